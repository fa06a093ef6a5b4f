"""Seeded Monte Carlo power study: Bonferroni, cross-screening and single screening.

Each replicate draws ``I x K`` independent errors; outcome 1 is shifted by ``tau1`` and
outcome 2 by ``tau2``, the rest are null. Replicate ``r`` uses the stream
``SeedSequence(master_seed, spawn_key=(r,))``, so results do not depend on how replicates are
distributed across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from crossscreen.errors import InputError
from crossscreen.multitest import PROCEDURES, rejections
from crossscreen.pairdata import PairDiffMatrix
from crossscreen.scores import ScoreSpec, score_matrix
from crossscreen.screening import plan, planned_pvalues
from crossscreen.sensbound import kappa, normal_upper

STATISTIC_SETS = {
    "wilcoxon": (ScoreSpec("wilcoxon"),),
    "u858": (ScoreSpec.ustat(8, 5, 8),),
    "adaptive": (ScoreSpec.ustat(8, 5, 8), ScoreSpec.ustat(8, 6, 7), ScoreSpec.ustat(8, 7, 8)),
}
METHODS = ("bonferroni", "cross_screen", "single_screen")

DEFAULT_METHODS = tuple(f"{m}:{s}" for m in METHODS for s in STATISTIC_SETS)


def parse_error_dist(text: str):
    """``normal`` or ``t:df``."""
    if text == "normal":
        return ("normal", None)
    name, _, arg = text.partition(":")
    if name == "t":
        try:
            df = float(arg)
        except ValueError:
            raise InputError(f"bad degrees of freedom in {text!r}") from None
        if df <= 0:
            raise InputError("degrees of freedom must be positive")
        return ("t", df)
    raise InputError(f"unknown error distribution {text!r}")


@dataclass(frozen=True)
class SimConfig:
    K: int = 100
    I: int = 250
    tau1: float = 0.5
    tau2: float = 0.0
    error_dist: str = "normal"
    gamma: float = 2.0
    alpha: float = 0.05
    replicates: int = 2000
    master_seed: int = 0
    methods: tuple[str, ...] = DEFAULT_METHODS
    planning_fraction: float = 0.2
    procedure: str = "fixed"

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.replicates < 1:
            raise InputError("replicates must be at least 1")
        if self.K < 2:
            raise InputError("K must be at least 2 (outcomes 1 and 2 carry the effects)")
        if self.I < 4:
            raise InputError("I must be at least 4")
        if self.gamma < 1:
            raise InputError("Gamma must be >= 1")
        if self.procedure not in PROCEDURES:
            raise InputError(f"unknown procedure {self.procedure!r}")
        parse_error_dist(self.error_dist)
        for m in self.methods:
            method, _, stat = m.partition(":")
            if method not in METHODS or stat not in STATISTIC_SETS:
                raise InputError(f"unknown method/statistic combination {m!r}")
        if math.floor(self.planning_fraction * self.I) < 2:
            raise InputError("planning sample too small")


@dataclass(frozen=True)
class SimRow:
    method: str
    statistic: str
    h1: float
    h2: float
    h12: float
    se_h1: float
    se_h2: float
    se_h12: float


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    rows: tuple[SimRow, ...]
    replicates: int

    def row(self, method, statistic) -> SimRow:
        for r in self.rows:
            if r.method == method and r.statistic == statistic:
                return r
        raise KeyError((method, statistic))

    def to_dict(self) -> dict:
        return {"config": asdict(self.config), "replicates": self.replicates, "rows": [asdict(r) for r in self.rows]}


def mc_standard_error(p_hat, n) -> float:
    if n < 1:
        raise InputError("n must be at least 1")
    return math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n)


def replicate_rng(master_seed, index) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def draw_data(config: SimConfig, rng) -> np.ndarray:
    kind, df = parse_error_dist(config.error_dist)
    shape = (config.I, config.K)
    y = rng.standard_normal(shape) if kind == "normal" else rng.standard_t(df, shape)
    y[:, 0] += config.tau1
    y[:, 1] += config.tau2
    return y


def _bonferroni_two(y, specs, gamma, alpha):
    K = y.shape[1]
    best = np.ones(2)
    kap = kappa(gamma)
    for spec in specs:
        sub = y[:, :2]
        # scores depend only on the column itself, so the first two columns suffice
        q = score_matrix(np.abs(sub), spec)
        s1, s2 = q.sum(axis=0), (q * q).sum(axis=0)
        for hit in (sub > 0, sub < 0):
            t = np.where(hit, q, 0.0).sum(axis=0)
            best = np.minimum(best, normal_upper(t, s1, s2, kap))
    return best <= alpha / (len(specs) * 2 * K)


def _screen_two(planning, testing, specs, config, level):
    p = plan(PairDiffMatrix(planning), specs, config.gamma, config.alpha)
    pv = planned_pvalues(PairDiffMatrix(testing), p, config.gamma)
    rej = rejections(config.procedure, pv, level)
    got = {k for k, r in zip(p.hypothesis_order, rej) if r}
    return np.array([0 in got, 1 in got])


def run_replicate(config: SimConfig, index: int) -> np.ndarray:
    """Rejection indicators, shape ``(n_methods, 2)`` for outcomes 1 and 2."""
    rng = replicate_rng(config.master_seed, index)
    y = draw_data(config, rng)
    n = config.I
    perm_cross = rng.permutation(n)
    perm_single = rng.permutation(n)
    h = n // 2
    n_plan = math.floor(config.planning_fraction * n)
    out = np.zeros((len(config.methods), 2), dtype=bool)
    for i, m in enumerate(config.methods):
        method, _, stat = m.partition(":")
        specs = STATISTIC_SETS[stat]
        if method == "bonferroni":
            out[i] = _bonferroni_two(y, specs, config.gamma, config.alpha)
        elif method == "cross_screen":
            a, b = y[perm_cross[:h]], y[perm_cross[h:]]
            level = config.alpha / 2
            out[i] = _screen_two(a, b, specs, config, level) | _screen_two(b, a, specs, config, level)
        else:
            a, b = y[perm_single[:n_plan]], y[perm_single[n_plan:]]
            out[i] = _screen_two(a, b, specs, config, config.alpha)
    return out


def _count_chunk(config: SimConfig, indices) -> np.ndarray:
    counts = np.zeros((len(config.methods), 3), dtype=np.int64)
    for r in indices:
        rej = run_replicate(config, r)
        counts[:, 0] += rej[:, 0]
        counts[:, 1] += rej[:, 1]
        counts[:, 2] += rej[:, 0] & rej[:, 1]
    return counts


def simulate(config: SimConfig, workers: int = 1, progress=None) -> SimResult:
    """Run all replicates and tabulate rejection rates of H1, H2 and both.

    Counts are integer sums, so any ``workers`` value gives identical output.
    """
    idx = np.arange(config.replicates)
    if workers <= 1:
        counts = _count_chunk(config, idx)
    else:
        chunks = [c for c in np.array_split(idx, workers * 4) if len(c)]
        counts = np.zeros((len(config.methods), 3), dtype=np.int64)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for c in pool.map(_count_chunk, [config] * len(chunks), chunks):
                counts += c
    n = config.replicates
    rows = []
    for i, m in enumerate(config.methods):
        method, _, stat = m.partition(":")
        h1, h2, h12 = (float(c) / n for c in counts[i])
        rows.append(SimRow(method, stat, h1, h2, h12,
                           mc_standard_error(h1, n), mc_standard_error(h2, n), mc_standard_error(h12, n)))
    return SimResult(config, tuple(rows), n)
