"""Recovery maps from low-dimensional solutions back to the full space.

The zero-order estimate is the linear reconstruction ``q_s @ alpha``; the
first-order estimate applies the dual map ``-(1/lam) A.T grad_f(A x)``, one
implicit gradient step that provably contracts the error whenever the
regularization dominates the squared projection residual.  Pipelines cover the
single-shot whitened recovery, its iterative refinement reusing one sketch,
the unbiased oblivious baseline, the column-subsampling baseline, and the
restricted-dual recovery for non-smooth losses.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from subsketch.embeddings import (
    ADAPTIVE_KINDS,
    COLUMN_SUBSAMPLE,
    EmbeddingSpec,
    Sketch,
    build_sketch,
    projection_residual_norm,
)
from subsketch.losses import NonSmoothLoss, SmoothLoss, SubgradientPartition
from subsketch.numkit import SeededRng, sample_gaussian_matrix
from subsketch.solvers import (
    BoxSet,
    SolveOptions,
    SolveResult,
    conjugate_feasible_set,
    solve_dual_projected,
    solve_nonsmooth_primal_reference,
    solve_primal_reference,
    solve_sketched,
    solve_sketched_shifted,
)

PLAIN_DUAL = "plain"
RESTRICTED_DUAL = "restricted"


@dataclass
class RecoveryReport:
    """Per-trial record of a recovery run and its bound certificate."""

    alpha: np.ndarray
    x0: np.ndarray
    x1: np.ndarray
    rel_err_x0: float
    rel_err_x1: float
    residual_norm: float
    bound_rhs: float
    condition_ok: bool
    runtime_ms: float
    seed: int
    stream_id: int = 0
    route: str = "adaptive"
    provenance: str = ""
    x_star_norm: float = float("nan")
    objective: float = float("nan")
    iterations: int = 0
    converged: bool = True
    t: int = 0


@dataclass
class NonsmoothRecovery:
    """Recovery report plus the dual solution and route diagnostics."""

    report: RecoveryReport
    y_star: np.ndarray
    dual_objective: float
    dual_objective_plain: float
    partition: SubgradientPartition
    x_arbitrary: np.ndarray
    rel_err_arbitrary: float


def zero_order(q_s: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Linear reconstruction ``q_s @ alpha`` of a low-dimensional solution."""
    q_s = np.asarray(q_s, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if q_s.shape[1] != alpha.shape[0]:
        raise ValueError(f"basis has {q_s.shape[1]} columns but alpha has length {alpha.shape[0]}")
    return q_s @ alpha


def first_order(A: np.ndarray, loss: SmoothLoss, lam: float, v: np.ndarray) -> np.ndarray:
    """Dual-map reconstruction ``-(1/lam) A.T grad_f(A v)``.

    Equals ``v - (1/lam) grad F(v)`` for the ridge objective F, i.e. one exact
    gradient step of length 1/lam from v.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    A = np.asarray(A, dtype=float)
    return -(A.T @ loss.gradient(A @ v)) / lam


def _rel_err(x, x_star, x_star_norm):
    if x_star_norm == 0.0:
        return float("nan")
    return float(np.linalg.norm(x - x_star)) / x_star_norm


def _pad(vec, dim):
    if vec.shape[0] == dim:
        return vec
    out = np.zeros(dim)
    out[: vec.shape[0]] = vec
    return out


def reference_provenance(loss, lam: float, opts: SolveOptions) -> str:
    return f"{loss.kind}:lam={lam:.12g}:tol={opts.grad_tolerance:g}:it={opts.max_iters}"


def _ensure_reference(A, loss, lam, opts, x_star):
    if x_star is not None:
        return np.asarray(x_star, dtype=float)
    if isinstance(loss, SmoothLoss):
        return solve_primal_reference(A, loss, lam, opts).minimizer
    x_star, _ = solve_nonsmooth_primal_reference(A, loss, lam)
    return x_star


def recover_whitened(A, loss: SmoothLoss, lam: float, spec: EmbeddingSpec,
                     opts: SolveOptions = SolveOptions(), x_star=None,
                     compute_residual: bool = True,
                     sketch: Sketch | None = None) -> RecoveryReport:
    """Whitened recovery pipeline for a smooth loss and any embedding family.

    Draws the embedding, whitens it, solves the low-dimensional program with
    the isotropic regularizer, and returns both estimators together with the
    certificate quantities (projection residual, bound right-hand side, and
    whether the regularization condition held).
    """
    t0 = time.perf_counter()
    A = np.asarray(A, dtype=float)
    if sketch is None:
        sketch = build_sketch(A, spec)
    x_star = _ensure_reference(A, loss, lam, opts, x_star)
    x_star = _pad(x_star, sketch.ambient_dim)
    x_star_norm = float(np.linalg.norm(x_star))

    res = solve_sketched(sketch.a_qs, loss, lam, opts)
    alpha = res.minimizer
    x0 = zero_order(sketch.q_s, alpha)
    grad = loss.gradient(sketch.a_qs @ alpha)
    x1 = _pad(-(A.T @ grad) / lam, sketch.ambient_dim)

    residual = projection_residual_norm(A, sketch.q_s) if compute_residual else float("nan")
    rel0 = _rel_err(x0, x_star, x_star_norm)
    rel1 = _rel_err(x1, x_star, x_star_norm)
    mu = loss.smoothness
    if compute_residual:
        bound = np.sqrt(mu / (2.0 * lam)) * residual * min(1.0, rel0)
        cond_ok = lam >= 2.0 * mu * residual**2
    else:
        bound, cond_ok = float("nan"), False
    return RecoveryReport(
        alpha=alpha, x0=x0, x1=x1, rel_err_x0=rel0, rel_err_x1=rel1,
        residual_norm=residual, bound_rhs=float(bound), condition_ok=bool(cond_ok),
        runtime_ms=(time.perf_counter() - t0) * 1e3,
        seed=spec.seed.seed, stream_id=spec.seed.stream_id,
        route=spec.kind, provenance=reference_provenance(loss, lam, opts),
        x_star_norm=x_star_norm, objective=res.objective,
        iterations=res.iterations, converged=res.converged,
    )


def recover_adaptive(A, loss: SmoothLoss, lam: float, spec: EmbeddingSpec,
                     opts: SolveOptions = SolveOptions(), x_star=None,
                     compute_residual: bool = True) -> RecoveryReport:
    """Single-shot adaptive recovery: sketch, whiten, solve, dual map."""
    if spec.kind not in ADAPTIVE_KINDS and spec.kind != COLUMN_SUBSAMPLE:
        raise ValueError(f"recover_adaptive expects an adaptive embedding, got {spec.kind!r}")
    return recover_whitened(A, loss, lam, spec, opts, x_star, compute_residual)


def recover_nystrom(A, loss: SmoothLoss, lam: float, m: int, rng: SeededRng,
                    opts: SolveOptions = SolveOptions(), x_star=None,
                    compute_residual: bool = True) -> RecoveryReport:
    """Baseline with a uniform column-subsampling inner matrix (no replacement)."""
    spec = EmbeddingSpec(kind=COLUMN_SUBSAMPLE, m=m, seed=rng)
    return recover_whitened(A, loss, lam, spec, opts, x_star, compute_residual)


def recover_iterative(A, loss: SmoothLoss, lam: float, spec: EmbeddingSpec, T: int,
                      opts: SolveOptions = SolveOptions(), x_star=None,
                      compute_residual: bool = True,
                      error_floor: float = 1e-12) -> list[RecoveryReport]:
    """Iterative refinement reusing a single sketch.

    Each round solves the low-dimensional program shifted by the previous
    iterate and applies the dual map; the relative error contracts geometrically
    while the regularization condition holds.  Stops early once the error falls
    below ``error_floor`` or a shifted solve fails to converge.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    A = np.asarray(A, dtype=float)
    sketch = build_sketch(A, spec)
    x_star = _ensure_reference(A, loss, lam, opts, x_star)
    x_star = _pad(x_star, sketch.ambient_dim)
    x_star_norm = float(np.linalg.norm(x_star))
    residual = projection_residual_norm(A, sketch.q_s) if compute_residual else float("nan")
    mu = loss.smoothness
    cond_ok = bool(lam >= 2.0 * mu * residual**2) if compute_residual else False

    d = A.shape[1]
    reports: list[RecoveryReport] = []
    x_hat = np.zeros(sketch.ambient_dim)
    image = np.zeros(A.shape[0])  # A @ x_hat
    for t in range(1, T + 1):
        t0 = time.perf_counter()
        res = solve_sketched_shifted(sketch.a_qs, image, sketch.q_s.T @ x_hat, loss, lam, opts)
        alpha = res.minimizer
        inner = sketch.a_qs @ alpha + image
        v = x_hat + zero_order(sketch.q_s, alpha)
        x_hat = _pad(-(A.T @ loss.gradient(inner)) / lam, sketch.ambient_dim)
        image = A @ x_hat[:d]
        rel0 = _rel_err(v, x_star, x_star_norm)
        rel1 = _rel_err(x_hat, x_star, x_star_norm)
        bound = np.sqrt(mu / (2.0 * lam)) * residual * min(1.0, rel0) if compute_residual else float("nan")
        reports.append(RecoveryReport(
            alpha=alpha, x0=v, x1=x_hat, rel_err_x0=rel0, rel_err_x1=rel1,
            residual_norm=residual, bound_rhs=float(bound), condition_ok=cond_ok,
            runtime_ms=(time.perf_counter() - t0) * 1e3,
            seed=spec.seed.seed, stream_id=spec.seed.stream_id,
            route=f"iterative-{spec.kind}",
            provenance=reference_provenance(loss, lam, opts),
            x_star_norm=x_star_norm, objective=res.objective,
            iterations=res.iterations, converged=res.converged, t=t,
        ))
        if not res.converged or rel1 < error_floor:
            break
    return reports


def recover_oblivious_dagger(A, loss: SmoothLoss, lam: float, m: int, rng: SeededRng,
                             opts: SolveOptions = SolveOptions(), x_star=None,
                             compute_residual: bool = False) -> RecoveryReport:
    """Unbiased oblivious baseline: plain Gaussian Q with the isotropic
    regularizer and no whitening."""
    t0 = time.perf_counter()
    A = np.asarray(A, dtype=float)
    d = A.shape[1]
    Q = sample_gaussian_matrix(d, m, 1.0 / m, rng)
    aq = A @ Q
    x_star = _ensure_reference(A, loss, lam, opts, x_star)
    x_star_norm = float(np.linalg.norm(x_star))
    res = solve_sketched(aq, loss, lam, opts)
    alpha = res.minimizer
    x0 = Q @ alpha
    x1 = -(A.T @ loss.gradient(aq @ alpha)) / lam
    if compute_residual:
        basis, _ = np.linalg.qr(Q)
        residual = projection_residual_norm(A, basis)
    else:
        residual = float("nan")
    rel0 = _rel_err(x0, x_star, x_star_norm)
    rel1 = _rel_err(x1, x_star, x_star_norm)
    return RecoveryReport(
        alpha=alpha, x0=x0, x1=x1, rel_err_x0=rel0, rel_err_x1=rel1,
        residual_norm=residual, bound_rhs=float("nan"), condition_ok=False,
        runtime_ms=(time.perf_counter() - t0) * 1e3,
        seed=rng.seed, stream_id=rng.stream_id, route="oblivious-dagger",
        provenance=reference_provenance(loss, lam, opts),
        x_star_norm=x_star_norm, objective=res.objective,
        iterations=res.iterations, converged=res.converged,
    )


def recover_nonsmooth(A, loss: NonSmoothLoss, lam: float, spec: EmbeddingSpec,
                      route: str = RESTRICTED_DUAL,
                      opts: SolveOptions = SolveOptions(grad_tolerance=1e-9, max_iters=200_000),
                      x_star=None, warm_start=None,
                      tie_tolerance: float | None = None,
                      compute_residual: bool = True) -> NonsmoothRecovery:
    """Recovery for a non-smooth loss through the sketched dual program.

    The plain route minimizes f*(y) + (1/2 lam)||Q.T A.T y||^2 over the whole
    conjugate domain.  The restricted route re-solves the same objective over
    the subdifferential of f at the sketched primal point, which pins every
    coordinate where f is differentiable and resolves the set-valued dual map.
    Returns the recovery report plus the dual solution and both objectives.
    """
    if route not in (PLAIN_DUAL, RESTRICTED_DUAL):
        raise ValueError(f"route must be {PLAIN_DUAL!r} or {RESTRICTED_DUAL!r}")
    if spec.kind not in ADAPTIVE_KINDS:
        raise ValueError("non-smooth recovery expects an adaptive embedding")
    t0 = time.perf_counter()
    A = np.asarray(A, dtype=float)
    sketch = build_sketch(A, spec)
    x_star = _ensure_reference(A, loss, lam, opts, x_star)
    x_star_norm = float(np.linalg.norm(x_star))

    B = sketch.a_qs.T
    feas = conjugate_feasible_set(loss)
    plain = solve_dual_projected(loss, B, loss.b, lam, feas, opts, y0=warm_start)
    alpha = -(B @ plain.minimizer) / lam
    w = sketch.a_qs @ alpha
    partition = loss.subgradient_partition(w, tie_tolerance)

    if route == RESTRICTED_DUAL:
        feas_r = conjugate_feasible_set(loss, partition)
        if isinstance(feas_r, BoxSet) and np.all(feas_r.lows == feas_r.highs):
            # subdifferential is a single point: the dual is fully determined
            y = feas_r.lows.copy()
            By = B @ y
            dual_obj = float(y @ loss.b) + float(By @ By) / (2.0 * lam)
            res = SolveResult(y, dual_obj, 0.0, 0, True)
        else:
            res = solve_dual_projected(loss, B, loss.b, lam, feas_r, opts,
                                       y0=feas_r.project(plain.minimizer))
    else:
        res = plain

    y_star = res.minimizer
    x1 = -(A.T @ y_star) / lam
    x0 = zero_order(sketch.q_s, alpha)
    g_arb = loss.arbitrary_subgradient(w)
    x_arb = -(A.T @ g_arb) / lam

    residual = projection_residual_norm(A, sketch.q_s) if compute_residual else float("nan")
    rel0 = _rel_err(x0, x_star, x_star_norm)
    rel1 = _rel_err(x1, x_star, x_star_norm)
    rel_arb = _rel_err(x_arb, x_star, x_star_norm)
    # unconditional non-smooth certificate: ||x1 - x*|| <= sqrt(6) (L/lam) residual
    bound = np.sqrt(6.0) * loss.lipschitz / lam * residual if compute_residual else float("nan")
    report = RecoveryReport(
        alpha=alpha, x0=x0, x1=x1, rel_err_x0=rel0, rel_err_x1=rel1,
        residual_norm=residual, bound_rhs=float(bound), condition_ok=True,
        runtime_ms=(time.perf_counter() - t0) * 1e3,
        seed=spec.seed.seed, stream_id=spec.seed.stream_id,
        route=f"nonsmooth-{route}", provenance=reference_provenance(loss, lam, opts),
        x_star_norm=x_star_norm, objective=res.objective,
        iterations=res.iterations, converged=res.converged,
    )
    return NonsmoothRecovery(
        report=report, y_star=y_star, dual_objective=res.objective,
        dual_objective_plain=plain.objective, partition=partition,
        x_arbitrary=x_arb, rel_err_arbitrary=rel_arb,
    )
