"""Synthetic experiment protocols and their CSV result tables.

Each experiment draws a ground-truth dictionary with a known block structure,
generates block-sparse signals, runs a fixed set of algorithms and scores them
by normalised error ``e``, block recovery ``p`` and mean block sparsity ``b``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .coding import CodingBudget, code_matrix
from .core import BlockStructure
from .framework import LearnConfig, initial_dictionary, learn_block_dictionary
from .metrics import recovery_percentage, representation_error
from .sac import block_sparsity_objective, sac_cluster
from .synth import (
    add_noise,
    generate_block_structure,
    generate_dictionary,
    generate_signals,
    oracle_run,
    perturbed_dictionary,
)
from .update import bksvd_learn, ksvd_learn

EXPERIMENTS = ("sac_only", "bksvd_vs_bksvd_baseline", "full_framework",
               "mixed_blocks", "wrong_blocksize")
AXES = ("snr", "k", "iterations")
COLUMNS = ("experiment", "sweep_value", "trial", "algorithm", "e", "p", "b", "status")

ALGORITHMS = {
    "sac_only": ("sac", "oracle"),
    "bksvd_vs_bksvd_baseline": ("bksvd", "bksvd_atom"),
    "full_framework": ("bksvd_sac", "ksvd", "bksvd_random_d", "oracle"),
    "mixed_blocks": ("bksvd_sac", "bksvd_sac_sl3", "ksvd"),
    "wrong_blocksize": ("bksvd_sac", "bksvd_sac_sl3", "ksvd"),
}

# (block sizes, s_high, s_low) for the variable-size experiments
_STRUCTURES = {
    "mixed_blocks": ([2] * 12 + [3] * 12, 3, 2),
    "wrong_blocksize": ([2] * 30, 3, 2),
}


@dataclass
class ExperimentSpec:
    experiment: str
    axis: str = "snr"
    values: list = field(default_factory=lambda: [math.inf])
    trials: int = 10
    L: int = 600
    outer_iters: int = 250
    ksvd_init_iters: int = 250
    N: int = 30
    sizes: list | None = None           # defaults to twenty blocks of three
    k: int = 2
    snr_db: float = math.inf            # used when the axis is not snr
    ksvd_atoms: int | None = None       # K-SVD baseline sparsity; default per experiment
    seed: int = 0
    workers: int = 1
    tol: float = 1e-6
    only: list | None = None            # restrict to a subset of the experiment's algorithms

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.axis not in AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.trials < 1:
            raise ValueError("trial count must be >= 1")
        if self.axis == "iterations":
            if self.experiment == "sac_only":
                raise ValueError("sac_only has no iterations to sweep")
            self.values = sorted(int(v) for v in self.values)
        if self.axis == "k":
            self.values = [int(v) for v in self.values]
        if self.only is not None:
            unknown = set(self.only) - set(ALGORITHMS[self.experiment])
            if unknown or not self.only:
                raise ValueError(f"algorithms {sorted(unknown)} not part of {self.experiment}")
        if self.sizes is None:
            self.sizes = list(_STRUCTURES.get(self.experiment, ([3] * 20,))[0])

    @property
    def s_high(self) -> int:
        return _STRUCTURES[self.experiment][1] if self.experiment in _STRUCTURES else max(self.sizes)

    @property
    def s_low(self) -> int:
        return _STRUCTURES[self.experiment][2] if self.experiment in _STRUCTURES else max(self.sizes)

    @property
    def algorithms(self) -> tuple[str, ...]:
        full = ALGORITHMS[self.experiment]
        return full if self.only is None else tuple(a for a in full if a in self.only)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["values"] = [format_value(v) for v in self.values]
        out["snr_db"] = format_value(self.snr_db)
        return out


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def format_value(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v.is_integer():
        return str(int(v))
    return format(v, ".17g")


def _fmt_metric(v) -> str:
    return "" if v is None else format(float(v), ".17g")


@dataclass
class _Scores:
    e: list = field(default_factory=list)       # per checkpoint / single value
    p: list = field(default_factory=list)
    b: list = field(default_factory=list)


def _tracker(checkpoints, score):
    """Callback recording scores at the given iteration checkpoints."""
    seen: dict[int, tuple] = {}

    def cb(it, *state):
        if it in checkpoints:
            seen[it] = score(*state)
        cb.last = (it, state)
    cb.last = None

    def finish():
        # early convergence: later checkpoints keep the final state's scores
        out = []
        final = None
        for c in checkpoints:
            if c in seen:
                out.append(seen[c])
            else:
                if final is None:
                    final = score(*cb.last[1])
                out.append(final)
        return out
    return cb, finish


def _run_point(spec: ExperimentSpec, trial: int, point_index: int, value):
    """Run every algorithm of ``spec`` at one sweep point; returns {alg: [(e,p,b), ...]}."""
    k = value if spec.axis == "k" else spec.k
    snr = float(value) if spec.axis == "snr" else spec.snr_db
    checkpoints = list(spec.values) if spec.axis == "iterations" else [spec.outer_iters]
    n_iters = max(checkpoints)
    K = sum(spec.sizes)

    D_star = generate_dictionary(spec.N, K, derive_seed(spec.seed, trial, 0))
    d_star = generate_block_structure(K, spec.sizes)
    d_star = BlockStructure(d_star.labels, spec.s_high)
    X, _ = generate_signals(D_star, d_star, k, spec.L, derive_seed(spec.seed, trial, 1, k))
    X = add_noise(X, snr, derive_seed(spec.seed, trial, 2, point_index))
    truth = (D_star, d_star)
    L = X.shape[1]
    results: dict[str, list] = {}

    def scored(D, d, Theta):
        return (representation_error(X, D, Theta), recovery_percentage(D, d, *truth),
                block_sparsity_objective(Theta, d) / L)

    if "oracle" in spec.algorithms:
        Theta, e = oracle_run(D_star, d_star, X, k, workers=1)
        results["oracle"] = [(e, 100.0, block_sparsity_objective(Theta, d_star) / L)] * len(checkpoints)

    if spec.experiment == "sac_only":
        Theta0 = code_matrix(D_star, None, X, k * spec.s_low)
        d = sac_cluster(Theta0, spec.s_high)
        Theta = code_matrix(D_star, d, X, k)
        results["sac"] = [scored(D_star, d, Theta)] * len(checkpoints)

    elif spec.experiment == "bksvd_vs_bksvd_baseline":
        D0 = perturbed_dictionary(D_star, d_star, derive_seed(spec.seed, trial, 5))
        for alg, rule in (("bksvd", "block"), ("bksvd_atom", "atom")):
            if alg not in spec.algorithms:
                continue
            cb, finish = _tracker(checkpoints, lambda D, Th: scored(D, d_star, Th))
            bksvd_learn(X, D0, d_star, CodingBudget(k), n_iters, tol=spec.tol,
                        update=rule, callback=cb)
            results[alg] = finish()

    else:
        wanted = spec.algorithms
        variants = {}
        if "bksvd_sac" in wanted or "bksvd_random_d" in wanted:
            variants["bksvd_sac"] = spec.s_low
        if "bksvd_sac_sl3" in wanted:
            variants["bksvd_sac_sl3"] = spec.s_high
        base = LearnConfig(n_atoms=K, k=k, s=spec.s_high, outer_iters=n_iters,
                           ksvd_init_iters=spec.ksvd_init_iters,
                           seed=derive_seed(spec.seed, trial, 3), tol=spec.tol)
        D0 = None
        for alg, s_low in variants.items():
            cfg = replace(base, s_low=s_low)
            D_init = initial_dictionary(X, cfg)
            if alg == "bksvd_sac":
                D0 = D_init
                if alg not in wanted:
                    continue
            cb, finish = _tracker(checkpoints, scored)
            learn_block_dictionary(X, cfg, D0=D_init, callback=cb)
            results[alg] = finish()

        if "ksvd" in wanted:
            t = spec.ksvd_atoms or (8 if spec.experiment == "full_framework" else k * spec.s_high)
            D_sig = initial_dictionary(X, replace(base, init="signals"))

            def ksvd_score(D, Theta):
                return scored(D, sac_cluster(Theta, spec.s_high), Theta)
            cb, finish = _tracker(checkpoints, ksvd_score)
            ksvd_learn(X, D_sig, t, n_iters, tol=spec.tol, callback=cb)
            results["ksvd"] = finish()

        if "bksvd_random_d" in wanted:
            rng = np.random.default_rng(derive_seed(spec.seed, trial, 4))
            d_rand = BlockStructure(tuple(rng.permutation(d_star.labels).tolist()), spec.s_high)
            cb, finish = _tracker(checkpoints, lambda D, Th: scored(D, d_rand, Th))
            bksvd_learn(X, D0, d_rand, CodingBudget(k), n_iters, tol=spec.tol, callback=cb)
            results["bksvd_random_d"] = finish()
    return results


def _run_trial(spec: ExperimentSpec, trial: int) -> list[dict]:
    rows = []
    points = list(enumerate(spec.values)) if spec.axis != "iterations" else [(0, None)]
    for idx, value in points:
        try:
            res = _run_point(spec, trial, idx, value)
            error = None
        except Exception as exc:  # recorded in the table; the run goes on
            res, error = {}, f"error: {type(exc).__name__}: {exc}"
        sweep = spec.values if spec.axis == "iterations" else [value]
        for ci, sv in enumerate(sweep):
            for alg in spec.algorithms:
                if error is None:
                    e, p, b = res[alg][ci]
                    rows.append(_row(spec, sv, trial, alg, e, p, b, "ok"))
                else:
                    rows.append(_row(spec, sv, trial, alg, None, None, None, error))
    return rows


def _row(spec, sweep_value, trial, alg, e, p, b, status) -> dict:
    return {"experiment": spec.experiment, "sweep_value": sweep_value, "trial": trial,
            "algorithm": alg, "e": e, "p": p, "b": b, "status": status}


def run_experiment(spec: ExperimentSpec) -> list[dict]:
    """Run all trials; rows come back ordered by (sweep value, trial, algorithm)."""
    if spec.workers > 1 and spec.trials > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            per_trial = list(pool.map(_run_trial, [spec] * spec.trials, range(spec.trials)))
    else:
        per_trial = [_run_trial(spec, t) for t in range(spec.trials)]
    order = {format_value(v): i for i, v in enumerate(spec.values)}
    algs = {a: i for i, a in enumerate(spec.algorithms)}
    rows = [r for chunk in per_trial for r in chunk]
    rows.sort(key=lambda r: (order[format_value(r["sweep_value"])], r["trial"], algs[r["algorithm"]]))
    return rows


def summarize(rows: list[dict]) -> list[dict]:
    """Mean ``e``, ``p``, ``b`` per (sweep value, algorithm) over successful trials."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        if r["trial"] == "mean":
            continue
        groups.setdefault((r["experiment"], format_value(r["sweep_value"]), r["algorithm"]), []).append(r)
    out = []
    for (exp, sv, alg), members in groups.items():
        ok = [m for m in members if m["status"] == "ok"]
        mean = {}
        for key in ("e", "p", "b"):
            vals = [m[key] for m in ok if m[key] is not None]
            mean[key] = float(np.mean(vals)) if vals else None
        status = "ok" if len(ok) == len(members) else f"{len(members) - len(ok)} failed"
        out.append({"experiment": exp, "sweep_value": members[0]["sweep_value"],
                    "trial": "mean", "algorithm": alg, **mean, "status": status})
    return out


def to_csv(rows: list[dict], include_means: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    body = list(rows) + (summarize(rows) if include_means else [])
    for r in body:
        writer.writerow([r["experiment"], format_value(r["sweep_value"]), r["trial"],
                         r["algorithm"], _fmt_metric(r["e"]), _fmt_metric(r["p"]),
                         _fmt_metric(r["b"]), r["status"]])
    return buf.getvalue()


def write_csv(path, rows: list[dict], include_means: bool = True) -> None:
    with open(path, "w", newline="") as f:
        f.write(to_csv(rows, include_means))


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def mean_table(rows: list[dict]) -> dict[tuple[str, str], dict]:
    """``{(sweep_value, algorithm): {"e", "p", "b"}}`` from :func:`summarize`."""
    return {(format_value(r["sweep_value"]), r["algorithm"]): r for r in summarize(rows)}
