"""CLI and experiment orchestration: config parsing, sweep execution, CSV/JSON
persistence, and the certification entry point.

Every run is deterministic given its base seed: the trial at sweep cell
``(trial, m_index)`` draws from the Philox stream ``mix64(trial, m_index)``
under the base seed, so results are reproducible cell by cell regardless of
execution order or the size of the worker pool (``SUBSKETCH_THREADS``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from subsketch import analysis, certify as certify_suites, estimators, synth
from subsketch.embeddings import (
    ADAPTIVE_GAUSSIAN,
    ADAPTIVE_SRHT,
    COLUMN_SUBSAMPLE,
    OBLIVIOUS_GAUSSIAN,
    OBLIVIOUS_SRHT,
    EmbeddingSpec,
)
from subsketch.losses import NONSMOOTH_KINDS, SMOOTH_KINDS, make_loss
from subsketch.numkit import SeededRng, thin_svd
from subsketch.solvers import SolveOptions, solve_nonsmooth_primal_reference, solve_primal_reference

log = logging.getLogger("subsketch")

EXPERIMENTS = ("recover", "sweep", "iterative", "nonsmooth", "kernel", "risk",
               "certify", "conditioning")

EMBEDDING_NAMES = {
    "gaussian": OBLIVIOUS_GAUSSIAN,
    "srht": OBLIVIOUS_SRHT,
    "nystrom": COLUMN_SUBSAMPLE,
    "adaptive-gaussian": ADAPTIVE_GAUSSIAN,
    "adaptive-srht": ADAPTIVE_SRHT,
    "oblivious-dagger": "oblivious-dagger",
}

CSV_COLUMNS = [
    "experiment", "trial", "seed", "n", "d", "decay", "nu", "loss", "lambda",
    "embedding", "q", "m", "T", "rel_err_x0", "rel_err_x1", "residual_norm",
    "spectral_residual_k", "bound_rhs", "condition_ok", "kappa", "kappa_dagger",
    "objective", "runtime_ms",
]


@dataclass
class RunRecord:
    """One CSV row of an experiment run; unused fields stay None."""

    experiment: str
    trial: int
    seed: int
    n: int
    d: int
    decay: str
    nu: float | None
    loss: str
    lam: float
    embedding: str
    q: int | None = None
    m: int | None = None
    T: int = 0
    rel_err_x0: float | None = None
    rel_err_x1: float | None = None
    residual_norm: float | None = None
    spectral_residual_k: float | None = None
    bound_rhs: float | None = None
    condition_ok: bool | None = None
    kappa: float | None = None
    kappa_dagger: float | None = None
    objective: float | None = None
    runtime_ms: float | None = None

    def to_row(self) -> list[str]:
        vals = [self.experiment, self.trial, self.seed, self.n, self.d, self.decay,
                self.nu, self.loss, self.lam, self.embedding, self.q, self.m, self.T,
                self.rel_err_x0, self.rel_err_x1, self.residual_norm,
                self.spectral_residual_k, self.bound_rhs, self.condition_ok,
                self.kappa, self.kappa_dagger, self.objective, self.runtime_ms]
        out = []
        for v in vals:
            if v is None:
                out.append("")
            elif isinstance(v, bool):
                out.append("1" if v else "0")
            elif isinstance(v, float):
                out.append(format(v, ".17g"))
            else:
                out.append(str(v))
        return out


def _parse_cell(name, text):
    if text == "":
        return None
    if name in ("trial", "seed", "n", "d", "q", "m", "T"):
        return int(text)
    if name == "condition_ok":
        return text == "1"
    if name in ("experiment", "decay", "loss", "embedding"):
        return text
    return float(text)


def read_records(path) -> list[RunRecord]:
    """Parse a CSV written by :func:`write_records` back into records."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        if header != CSV_COLUMNS:
            raise ValueError("unexpected CSV header")
        records = []
        for line in fh:
            cells = line.rstrip("\n").split(",")
            kv = {
                ("lam" if name == "lambda" else name): _parse_cell(name, cell)
                for name, cell in zip(CSV_COLUMNS, cells)
            }
            records.append(RunRecord(**kv))
    return records


def write_records(path, records: list[RunRecord]) -> None:
    """Atomically write records as CSV: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".csv.tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for rec in records:
                fh.write(",".join(rec.to_row()) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_summary(path, records: list[RunRecord]) -> dict:
    """Per (embedding, m) cell means and twice the standard deviations."""
    cells: dict[tuple, dict] = {}
    for rec in records:
        key = (rec.embedding, rec.m)
        cells.setdefault(key, {"rel_err_x0": [], "rel_err_x1": []})
        for fld in ("rel_err_x0", "rel_err_x1"):
            v = getattr(rec, fld)
            if v is not None and np.isfinite(v):
                cells[key][fld].append(v)
    summary = {"cells": []}
    for (embedding, m), data in sorted(cells.items(), key=lambda kv: (kv[0][0], kv[0][1] or 0)):
        entry = {"embedding": embedding, "m": m}
        for fld, vals in data.items():
            if vals:
                arr = np.asarray(vals)
                entry[f"mean_{fld}"] = float(arr.mean())
                entry[f"two_std_{fld}"] = float(2.0 * arr.std(ddof=1)) if arr.size > 1 else 0.0
        summary["cells"].append(entry)
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


@dataclass
class ExperimentConfig:
    experiment: str
    n: int = 100
    d: int = 200
    decay: str = synth.EXPONENTIAL
    nu: float = 0.1
    ratio: float = 0.98
    loss: str = "logistic"
    lam: float = 1e-4
    embedding: str = "adaptive-gaussian"
    m_list: list[int] = field(default_factory=lambda: [16])
    q: int = 0
    T: int = 1
    trials: int = 1
    seed: int = 0
    tol: float = 1e-10
    max_iters: int = 500
    noise_var: float = 1.0
    out_path: str = "run.csv"
    suite: str = "all"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.embedding not in EMBEDDING_NAMES:
            raise ValueError(f"unknown embedding {self.embedding!r}")
        if self.loss not in SMOOTH_KINDS + NONSMOOTH_KINDS:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.m_list != sorted(self.m_list):
            raise ValueError("m list must be sorted ascending")
        if self.trials < 1 or self.T < 1:
            raise ValueError("trials and T must be >= 1")

    def spectrum(self) -> synth.SpectrumSpec:
        if self.decay == synth.GEOMETRIC:
            return synth.SpectrumSpec(kind=synth.GEOMETRIC, ratio=self.ratio)
        if self.decay == synth.EXPLICIT:
            raise ValueError("explicit spectra are only supported through the Python API")
        return synth.SpectrumSpec(kind=self.decay, nu=self.nu)

    def solve_options(self) -> SolveOptions:
        return SolveOptions(grad_tolerance=self.tol, max_iters=self.max_iters)

    def dual_options(self) -> SolveOptions:
        return SolveOptions(grad_tolerance=max(self.tol, 1e-9), max_iters=max(self.max_iters, 200_000))


_CONFIG_KEYS = {
    "experiment", "n", "d", "decay", "nu", "ratio", "loss", "lambda", "embedding",
    "m", "q", "T", "trials", "seed", "tol", "max_iters", "noise_var", "out", "suite",
}


def _add_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=str, default=None, help="JSON config file; flags override")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--decay", type=str, default=None, choices=["poly", "exp", "geom"])
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--ratio", type=float, default=None)
    p.add_argument("--loss", type=str, default=None,
                   choices=list(SMOOTH_KINDS + NONSMOOTH_KINDS))
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--embedding", type=str, default=None, choices=sorted(EMBEDDING_NAMES))
    p.add_argument("--m", type=str, default=None, help="comma-separated sketch sizes")
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    p.add_argument("--noise-var", dest="noise_var", type=float, default=None)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--suite", type=str, default=None, help="certificate suite name or 'all'")


def parse_config(argv=None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from CLI arguments plus an optional
    JSON config file; explicit flags win over file keys."""
    parser = argparse.ArgumentParser(
        prog="subsketch",
        description="randomized subspace optimization experiments",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        _add_flags(sub.add_parser(name))
    args = parser.parse_args(argv)

    merged: dict = {}
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - _CONFIG_KEYS
        if unknown:
            parser.error(f"unknown config key(s): {sorted(unknown)}")
        merged.update(file_cfg)
    for key in _CONFIG_KEYS - {"experiment"}:
        flag_name = {"lambda": "lam", "out": "out"}.get(key, key)
        flag_val = getattr(args, flag_name, None)
        if flag_val is not None:
            if key in merged and merged[key] != flag_val:
                log.info("flag --%s=%r overrides config file value %r", key, flag_val, merged[key])
            merged[key] = flag_val
    if args.experiment != "certify":
        missing = [k for k in ("n", "d") if k not in merged]
        if missing:
            parser.error(f"missing required argument(s): {', '.join('--' + k for k in missing)}")
    kwargs = {"experiment": args.experiment}
    rename = {"lambda": "lam", "out": "out_path", "m": "m_list"}
    for key, val in merged.items():
        if key == "experiment":
            continue
        if key == "m":
            if isinstance(val, str):
                val = [int(tok) for tok in val.split(",") if tok]
            kwargs["m_list"] = list(val)
        else:
            kwargs[rename.get(key, key)] = val
    try:
        return ExperimentConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        parser.error(str(exc))


def build_instance(config: ExperimentConfig):
    """Deterministic instance for a config: data matrix, spectrum, loss, and
    reference solution.

    Targets follow a fixed recipe: sign labels for logistic/relu/hinge, a noisy
    observation of a random unit planted vector for quadratic/l1/linf.
    """
    base = SeededRng(config.seed)
    A, summary = synth.synth_matrix(config.n, config.d, config.spectrum(), base.derive(0xA))
    if config.loss in ("logistic", "relu", "hinge"):
        y = synth.synth_labels(config.n, base.derive(0xB))
        loss = make_loss(config.loss, b=y, y=y)
    else:
        gen = base.derive(0xC).generator()
        x_pl = gen.standard_normal(config.d)
        x_pl /= np.linalg.norm(x_pl)
        b = synth.synth_observation(A, x_pl, config.noise_var, base.derive(0xD))
        loss = make_loss(config.loss, b=b)
    return A, summary, loss


def _reference(A, loss, config: ExperimentConfig):
    if loss.smooth:
        return solve_primal_reference(A, loss, config.lam, config.solve_options()).minimizer
    x_star, _ = solve_nonsmooth_primal_reference(A, loss, config.lam, config.dual_options())
    return x_star


def _record_base(config: ExperimentConfig, trial: int, m: int | None, summary) -> RunRecord:
    rec = RunRecord(
        experiment=config.experiment, trial=trial, seed=config.seed, n=config.n,
        d=config.d, decay=config.decay,
        nu=config.nu if config.decay in (synth.POLYNOMIAL, synth.EXPONENTIAL) else config.ratio,
        loss=config.loss, lam=config.lam, embedding=config.embedding,
        q=config.q, m=m,
    )
    if m is not None and m >= 2 and summary is not None:
        rec.spectral_residual_k = analysis.spectral_residual(summary, m / 2)
    return rec


def _fill_from_report(rec: RunRecord, rep: estimators.RecoveryReport) -> RunRecord:
    rec.rel_err_x0 = rep.rel_err_x0
    rec.rel_err_x1 = rep.rel_err_x1
    rec.residual_norm = rep.residual_norm if np.isfinite(rep.residual_norm) else None
    rec.bound_rhs = rep.bound_rhs if np.isfinite(rep.bound_rhs) else None
    rec.condition_ok = rep.condition_ok
    rec.objective = rep.objective
    rec.runtime_ms = rep.runtime_ms
    rec.T = rep.t
    return rec


def _embedding_spec(config: ExperimentConfig, m: int, rng: SeededRng) -> EmbeddingSpec:
    kind = EMBEDDING_NAMES[config.embedding]
    q = config.q if kind in (ADAPTIVE_GAUSSIAN, ADAPTIVE_SRHT) else 0
    return EmbeddingSpec(kind=kind, m=m, q=q, seed=rng)


def _run_cell(config, A, summary, loss, x_star, trial, m_idx, m):
    rng = SeededRng(config.seed).derive(trial, m_idx)
    opts = config.solve_options()
    records = []
    if config.experiment in ("recover", "sweep"):
        if config.embedding == "oblivious-dagger":
            rep = estimators.recover_oblivious_dagger(A, loss, config.lam, m, rng, opts,
                                                      x_star=x_star)
        else:
            spec = _embedding_spec(config, m, rng)
            rep = estimators.recover_whitened(A, loss, config.lam, spec, opts, x_star=x_star)
        records.append(_fill_from_report(_record_base(config, trial, m, summary), rep))
    elif config.experiment == "iterative":
        spec = _embedding_spec(config, m, rng)
        for rep in estimators.recover_iterative(A, loss, config.lam, spec, config.T, opts,
                                                x_star=x_star):
            records.append(_fill_from_report(_record_base(config, trial, m, summary), rep))
    elif config.experiment == "nonsmooth":
        spec = _embedding_spec(config, m, rng)
        out = estimators.recover_nonsmooth(A, loss, config.lam, spec,
                                           route=estimators.RESTRICTED_DUAL,
                                           opts=config.dual_options(), x_star=x_star)
        records.append(_fill_from_report(_record_base(config, trial, m, summary), out.report))
        arb = _record_base(config, trial, m, summary)
        arb.embedding = "arbitrary-subgradient"
        arb.rel_err_x1 = out.rel_err_arbitrary
        arb.residual_norm = out.report.residual_norm
        arb.runtime_ms = out.report.runtime_ms
        records.append(arb)
    elif config.experiment == "conditioning":
        from subsketch.embeddings import build_sketch

        spec = _embedding_spec(config, m, rng)
        sketch = build_sketch(A, spec)
        kappa, kappa_dag = analysis.condition_numbers(A, sketch.q_s, config.lam)
        rec = _record_base(config, trial, m, summary)
        rec.kappa, rec.kappa_dagger = kappa, kappa_dag
        records.append(rec)
    elif config.experiment == "kernel":
        records.append(_kernel_cell(config, A, summary, loss, trial, m, rng))
    elif config.experiment == "risk":
        spec = _embedding_spec(config, m, rng)
        mc, limit = analysis.risk_zero_order(A, spec, config.noise_var, config.lam,
                                             config.trials, rng.derive(0xE))
        rec = _record_base(config, trial, m, summary)
        rec.objective = mc
        rec.bound_rhs = limit
        records.append(rec)
    else:
        raise ValueError(f"experiment {config.experiment!r} does not produce records")
    return records


def _kernel_cell(config, A, summary, loss, trial, m, rng):
    from subsketch import kernelize
    from subsketch.numkit import sample_gaussian_matrix

    K = kernelize.gram_from_features(A)
    s_tilde = sample_gaussian_matrix(config.n, m, 1.0 / m, rng)
    res = kernelize.solve_sketched_kernel(K, s_tilde, loss, config.lam, config.solve_options())
    w1 = kernelize.kernel_first_order(K, s_tilde, res.minimizer, loss, config.lam)
    w0 = kernelize.kernel_zero_order(s_tilde, res.minimizer)
    w_star = kernelize.solve_sketched_kernel(K, np.eye(config.n), loss, config.lam,
                                             config.solve_options()).minimizer
    denom = kernelize.rkhs_distance(K, w_star, np.zeros(config.n))
    rec = _record_base(config, trial, m, summary)
    rec.rel_err_x0 = kernelize.rkhs_distance(K, w0, w_star) / denom
    rec.rel_err_x1 = kernelize.rkhs_distance(K, w1, w_star) / denom
    rec.objective = res.objective
    return rec


def run_experiment(config: ExperimentConfig) -> list[RunRecord]:
    """Run all (trial, m) cells of an experiment, write the CSV and JSON
    summary atomically, and return the records in (trial, m) order."""
    A, summary, loss = build_instance(config)
    x_star = None
    if config.experiment in ("recover", "sweep", "iterative", "nonsmooth"):
        x_star = _reference(A, loss, config)

    cells = [(trial, m_idx, m)
             for trial in range(config.trials)
             for m_idx, m in enumerate(config.m_list)]
    if config.experiment == "risk":
        # trials are the noise draws inside each cell; one cell per m
        cells = [(0, m_idx, m) for m_idx, m in enumerate(config.m_list)]

    workers = int(os.environ.get("SUBSKETCH_THREADS", "1"))

    def work(cell):
        trial, m_idx, m = cell
        try:
            return cell, _run_cell(config, A, summary, loss, x_star, trial, m_idx, m)
        except Exception:
            log.exception("cell (trial=%s, m=%s) failed", trial, m)
            rec = _record_base(config, trial, m, summary)
            rec.condition_ok = False
            return cell, [rec]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, cells))
    else:
        results = [work(cell) for cell in cells]
    results.sort(key=lambda pair: (pair[0][0], pair[0][1]))
    records = [rec for _, recs in results for rec in recs]

    write_records(config.out_path, records)
    base, _ = os.path.splitext(config.out_path)
    write_summary(base + ".summary.json", records)
    return records


def run_certify(config: ExperimentConfig) -> int:
    """Run the named certificate suite(s); exit status 0 iff everything passed."""
    results = certify_suites.run_suites(config.suite, seed=config.seed)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return 1 if failed else 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    config = parse_config(argv)
    if config.experiment == "certify":
        return run_certify(config)
    records = run_experiment(config)
    print(f"wrote {len(records)} records to {config.out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
