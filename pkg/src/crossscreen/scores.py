"""Signed-rank style scores ``q_i >= 0`` for sums of the form ``T = sum(sgn(Y_i) q_i)``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache, reduce

import numpy as np
from scipy.stats import rankdata

from crossscreen.errors import InputError

FAMILIES = ("wilcoxon", "sign", "perm_t", "huber_m", "ustat")

# U-statistics with I above this are scored in floating point only
USTAT_EXACT_MAX_I = 20


@dataclass(frozen=True)
class ScoreSpec:
    family: str
    c: float = 2.5
    m: int = 0
    m_lo: int = 0
    m_hi: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown score family {self.family!r}")
        if self.family == "huber_m" and not self.c > 0:
            raise InputError("Huber tuning constant must be positive")
        if self.family == "ustat" and not (1 <= self.m_lo <= self.m_hi <= self.m):
            raise InputError(f"U-statistic needs 1 <= m_lo <= m_hi <= m, got ({self.m},{self.m_lo},{self.m_hi})")

    @classmethod
    def wilcoxon(cls):
        return cls("wilcoxon")

    @classmethod
    def ustat(cls, m, m_lo, m_hi):
        return cls("ustat", m=m, m_lo=m_lo, m_hi=m_hi)

    def label(self) -> str:
        """Flag-grammar form, the inverse of :func:`parse_stat`."""
        if self.family == "perm_t":
            return "perm-t"
        if self.family == "huber_m":
            return f"huber:{self.c:g}"
        if self.family == "ustat":
            return f"u:{self.m},{self.m_lo},{self.m_hi}"
        return self.family

    def __str__(self):
        return self.label()


def parse_stat(text: str) -> ScoreSpec:
    """Parse ``wilcoxon | sign | perm-t | huber[:c] | u:m,mlo,mhi``."""
    text = text.strip().lower()
    name, _, arg = text.partition(":")
    if name == "wilcoxon" and not arg:
        return ScoreSpec("wilcoxon")
    if name == "sign" and not arg:
        return ScoreSpec("sign")
    if name in ("perm-t", "perm_t") and not arg:
        return ScoreSpec("perm_t")
    if name == "huber":
        try:
            return ScoreSpec("huber_m", c=float(arg)) if arg else ScoreSpec("huber_m")
        except ValueError:
            raise InputError(f"bad Huber constant in {text!r}") from None
    if name == "u":
        try:
            m, lo, hi = (int(v) for v in arg.split(","))
        except ValueError:
            raise InputError(f"expected u:m,mlo,mhi, got {text!r}") from None
        return ScoreSpec.ustat(m, lo, hi)
    raise InputError(f"unknown statistic {text!r}")


@dataclass(frozen=True)
class ScoreVector:
    """Scores for one outcome.

    ``lattice``, when present, holds integers proportional to ``q`` (``q = lattice / scale``)
    so the exact null distribution can be built on an integer grid.
    """

    q: np.ndarray
    ranks: np.ndarray
    lattice: np.ndarray | None = None
    scale: int | None = None

    @property
    def sum(self) -> float:
        return float(self.q.sum())

    @property
    def sum_sq(self) -> float:
        return float(np.dot(self.q, self.q))

    def __len__(self):
        return len(self.q)


@lru_cache(maxsize=256)
def _ustat_numerators(n: int, m: int, m_lo: int, m_hi: int) -> tuple[int, ...]:
    # numerator of the score at integer rank a = 1..n; denominator is C(n, m)
    return tuple(
        sum(math.comb(a - 1, ell - 1) * math.comb(n - a, m - ell) for ell in range(m_lo, m_hi + 1))
        for a in range(1, n + 1)
    )


@lru_cache(maxsize=256)
def rank_score_table(n: int, spec: ScoreSpec) -> np.ndarray:
    """Scores at untied ranks ``1..n`` with no zero differences (read-only array)."""
    if spec.family == "wilcoxon":
        out = np.arange(1, n + 1, dtype=float)
    elif spec.family == "sign":
        out = np.ones(n)
    elif spec.family == "ustat":
        if spec.m > n:
            raise InputError(f"U-statistic m={spec.m} exceeds number of pairs {n}")
        den = math.comb(n, spec.m)
        out = np.array([num / den for num in _ustat_numerators(n, spec.m, spec.m_lo, spec.m_hi)])
    else:
        raise InputError(f"{spec.family} scores depend on magnitudes, not ranks")
    out.setflags(write=False)
    return out


def _tie_blocks(abs_y):
    order = np.argsort(abs_y, kind="stable")
    sorted_vals = abs_y[order]
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], len(abs_y)]
    return order, starts, ends


def compute_scores(abs_y, spec: ScoreSpec) -> ScoreVector:
    """Score the absolute differences of one outcome.

    Ties get midranks; for the U-statistic the score of a tied block is the average of the
    scores at the block's integer positions. Zero differences always score 0.
    """
    a = np.asarray(abs_y, dtype=float)
    if a.ndim != 1:
        raise InputError("compute_scores expects a vector")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise InputError("absolute differences must be finite and nonnegative")
    n = len(a)
    nonzero = a > 0
    ranks = np.zeros(n)
    if nonzero.any():
        ranks[nonzero] = rankdata(a[nonzero])
    lattice = None
    scale = None

    if spec.family == "wilcoxon":
        q = ranks.copy()
        twice = np.rint(2 * q).astype(np.int64)
        if np.all(twice % 2 == 0):
            lattice, scale = twice // 2, 1
        else:
            lattice, scale = twice, 2
    elif spec.family == "sign":
        q = nonzero.astype(float)
        lattice, scale = nonzero.astype(np.int64), 1
    elif spec.family == "perm_t":
        q = a / n
    elif spec.family == "huber_m":
        q = np.zeros(n)
        if nonzero.any():
            kappa = float(np.median(a[nonzero]))
            q[nonzero] = np.minimum(a[nonzero] / kappa, spec.c)
    else:
        q, lattice, scale = _ustat_scores(a, spec)
    q = np.where(nonzero, q, 0.0)
    if lattice is not None:
        lattice = np.where(nonzero, lattice, 0)
    return ScoreVector(q, ranks, lattice, scale)


def _ustat_scores(a, spec):
    n = len(a)
    if spec.m > n:
        raise InputError(f"U-statistic m={spec.m} exceeds number of pairs {n}")
    den = math.comb(n, spec.m)
    nums = _ustat_numerators(n, spec.m, spec.m_lo, spec.m_hi)
    order, starts, ends = _tie_blocks(a)
    q = np.empty(n)
    block_sums = []
    for s, e in zip(starts, ends):
        total = sum(nums[s:e])
        q[order[s:e]] = total / (den * (e - s))
        block_sums.append((order[s:e], total, e - s))
    if n > USTAT_EXACT_MAX_I:
        return q, None, None
    mult = reduce(math.lcm, (size for _, _, size in block_sums), 1)
    lattice = np.empty(n, dtype=np.int64)
    for idx, total, size in block_sums:
        lattice[idx] = total * (mult // size)
    return q, lattice, den * mult


def score_matrix(abs_y, spec: ScoreSpec) -> np.ndarray:
    """Scores for every column of an ``I x K`` matrix of absolute differences."""
    a = np.asarray(abs_y, dtype=float)
    n, k = a.shape
    if spec.family in ("wilcoxon", "sign", "ustat") and np.all(a > 0):
        order = np.argsort(a, axis=0)
        ranks = np.empty_like(order)
        np.put_along_axis(ranks, order, np.arange(n)[:, None], axis=0)
        sorted_a = np.take_along_axis(a, order, axis=0)
        if not np.any(sorted_a[1:] == sorted_a[:-1]):
            return rank_score_table(n, spec)[ranks]
    return np.column_stack([compute_scores(a[:, j], spec).q for j in range(k)])


def test_statistic(y, q) -> float:
    """``sum(q_i for Y_i > 0)``; ``q`` may be a :class:`ScoreVector` or an array."""
    qv = q.q if isinstance(q, ScoreVector) else np.asarray(q, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.shape != qv.shape:
        raise InputError(f"length mismatch: {y.shape} vs {qv.shape}")
    return float(qv[y > 0].sum())


test_statistic.__test__ = False
