"""Familywise error rate control for lists of one-sided P-value bounds.

Every procedure returns one :class:`TestOutcome` per input, in input order. ``adjusted_p`` is the
smallest level at which the hypothesis would be rejected given all the realized P-values, so
``rejected`` is equivalent to ``adjusted_p <= alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from crossscreen.errors import InputError

PROCEDURES = ("bonferroni", "holm", "fixed", "fallback", "recycle")


@dataclass(frozen=True)
class TestOutcome:
    hypothesis_index: int
    adjusted_p: float
    rejected: bool
    level_spent: float
    raw_p: float = float("nan")
    tested: bool = True

    def to_dict(self) -> dict:
        return {
            "index": self.hypothesis_index,
            "raw_p": self.raw_p,
            "adjusted_p": self.adjusted_p,
            "rejected": self.rejected,
            "level": self.level_spent,
            "tested": self.tested,
        }


TestOutcome.__test__ = False


def _prepare(pvals, indices):
    p = np.asarray(pvals, dtype=float).ravel()
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise InputError("P-values must lie in [0, 1]")
    if indices is None:
        idx = list(range(len(p)))
    else:
        idx = [int(i) for i in indices]
        if len(idx) != len(p):
            raise InputError(f"{len(idx)} indices for {len(p)} P-values")
    return p, idx


def _check_alpha(alpha):
    if not 0 < alpha <= 1:
        raise InputError("alpha must lie in (0, 1]")


def bonferroni(pvals, factor, alpha=0.05, indices=None) -> list[TestOutcome]:
    """``adjusted = min(1, factor * p)``; ``factor`` counts every comparison being paid for."""
    p, idx = _prepare(pvals, indices)
    _check_alpha(alpha)
    if factor < max(1, len(p)):
        raise InputError(f"factor {factor} is smaller than the {len(p)} comparisons supplied")
    adj = np.minimum(1.0, factor * p)
    return [TestOutcome(i, float(a), bool(a <= alpha), alpha / factor, float(r)) for i, a, r in zip(idx, adj, p)]


def holm(pvals, alpha=0.05, indices=None) -> list[TestOutcome]:
    """Holm's step-down procedure."""
    p, idx = _prepare(pvals, indices)
    _check_alpha(alpha)
    m = len(p)
    if m == 0:
        return []
    order = np.argsort(p, kind="stable")
    stepped = np.minimum(1.0, (m - np.arange(m)) * p[order])
    adj_sorted = np.maximum.accumulate(stepped)
    adj = np.empty(m)
    adj[order] = adj_sorted
    out = []
    for pos in range(m):
        rank = int(np.flatnonzero(order == pos)[0])
        prior_rejected = bool(rank == 0 or adj_sorted[rank - 1] <= alpha)
        level = alpha / (m - rank) if prior_rejected else 0.0
        out.append(TestOutcome(idx[pos], float(adj[pos]), bool(adj[pos] <= alpha), level, float(p[pos]), prior_rejected))
    return out


def _fixed_decide(p, alpha):
    rejected = np.zeros(len(p), dtype=bool)
    levels = np.zeros(len(p))
    for j, pj in enumerate(p):
        levels[j] = alpha
        if pj > alpha:
            break
        rejected[j] = True
    return rejected, levels


def _fallback_weights(n, alpha):
    # alpha/2 to each of the first two, nothing further: later hypotheses only see carried alpha
    if n == 1:
        return np.array([alpha])
    w = np.zeros(n)
    w[:2] = alpha / 2
    return w


def _fallback_decide(p, alpha):
    w = _fallback_weights(len(p), alpha)
    rejected = np.zeros(len(p), dtype=bool)
    levels = np.zeros(len(p))
    carry = 0.0
    for j, pj in enumerate(p):
        levels[j] = w[j] + carry
        rejected[j] = levels[j] > 0 and pj <= levels[j]
        carry = levels[j] if rejected[j] else 0.0
    return rejected, levels


def _recycle_decide(p, alpha):
    rejected, levels = _fallback_decide(p, alpha)
    n = len(p)
    freed = 0.0
    # one backward sweep: alpha held by a rejection that was not passed on to a later
    # rejection goes back to the nearest earlier acceptance
    for j in range(n - 1, -1, -1):
        if rejected[j]:
            if j == n - 1 or not rejected[j + 1]:
                freed += levels[j]
        elif freed > 0:
            levels[j] += freed
            if p[j] <= levels[j]:
                rejected[j] = True
                freed = levels[j]
            else:
                freed = 0.0
    return rejected, levels


def _ordered(decide: Callable, multipliers, pvals, alpha, indices):
    p, idx = _prepare(pvals, indices)
    _check_alpha(alpha)
    if len(p) == 0:
        return []
    rejected, levels = decide(p, alpha)
    # decisions change only where alpha * level-fraction crosses some p_j
    cands = np.unique(np.concatenate([np.minimum(1.0, p * mlt) for mlt in multipliers] + [[1.0]]))
    adj = np.full(len(p), 1.0)
    pending = np.ones(len(p), dtype=bool)
    for a in cands:
        if not pending.any():
            break
        # a zero candidate is the infimum of positive levels; procedures give nothing at level 0
        rej, _ = decide(p, max(a, np.finfo(float).tiny))
        newly = rej & pending
        adj[newly] = a
        pending &= ~rej
    adj = np.maximum(adj, p)
    return [
        TestOutcome(i, float(a), bool(r), float(lv), float(pj), bool(lv > 0))
        for i, a, r, lv, pj in zip(idx, adj, rejected, levels, p)
    ]


def fixed_sequence(ordered_pvals, alpha=0.05, indices=None) -> list[TestOutcome]:
    """Test in the given order at full ``alpha``, stopping at the first acceptance."""
    return _ordered(_fixed_decide, (1.0,), ordered_pvals, alpha, indices)


def fallback(ordered_pvals, alpha=0.05, indices=None) -> list[TestOutcome]:
    """Fall-back testing: the first two hypotheses get ``alpha/2`` each and a rejection passes
    its level on to the next hypothesis.

    With two hypotheses this is the rule: first at ``alpha/2``; second at ``alpha`` if the first
    was rejected, otherwise at ``alpha/2``. From the third hypothesis on only carried alpha is
    available. A single hypothesis is tested at ``alpha``.
    """
    return _ordered(_fallback_decide, (1.0, 2.0), ordered_pvals, alpha, indices)


def recycling(ordered_pvals, alpha=0.05, indices=None) -> list[TestOutcome]:
    """Fall-back plus one backward pass returning freed alpha to earlier acceptances.

    For two hypotheses: if the first is accepted at ``alpha/2`` and the second rejected at
    ``alpha/2``, the first is retested at ``alpha``.
    """
    return _ordered(_recycle_decide, (1.0, 2.0), ordered_pvals, alpha, indices)


def adaptive_min_p(pvals_per_statistic, n_statistics=None, alpha=0.05, K=None, indices=None) -> list[TestOutcome]:
    """Bonferroni over several statistics and both tails.

    ``pvals_per_statistic`` is ``(n_statistics, n_hypotheses)`` of one-sided bounds (already the
    smaller tail, or both tails stacked). The smallest bound per hypothesis is multiplied by
    ``n_statistics * 2 * K``.
    """
    arr = np.atleast_2d(np.asarray(pvals_per_statistic, dtype=float))
    n_stat = arr.shape[0] if n_statistics is None else int(n_statistics)
    K = arr.shape[1] if K is None else int(K)
    min_p = arr.min(axis=0)
    return bonferroni(min_p, n_stat * 2 * K, alpha, indices)


def run_procedure(name, pvals, alpha=0.05, indices=None) -> list[TestOutcome]:
    """Dispatch by CLI name; ``bonferroni`` uses the number of P-values as its factor."""
    if name == "bonferroni":
        return bonferroni(pvals, max(1, len(pvals)), alpha, indices)
    if name == "holm":
        return holm(pvals, alpha, indices)
    if name == "fixed":
        return fixed_sequence(pvals, alpha, indices)
    if name == "fallback":
        return fallback(pvals, alpha, indices)
    if name == "recycle":
        return recycling(pvals, alpha, indices)
    raise InputError(f"unknown procedure {name!r}; choose from {PROCEDURES}")


def rejections(name, pvals, alpha=0.05) -> np.ndarray:
    """Boolean rejection vector only; skips the adjusted-P search (used in simulation loops)."""
    p = np.asarray(pvals, dtype=float)
    if name == "fixed":
        return _fixed_decide(p, alpha)[0]
    if name == "fallback":
        return _fallback_decide(p, alpha)[0]
    if name == "recycle":
        return _recycle_decide(p, alpha)[0]
    if name == "bonferroni":
        return p * max(1, len(p)) <= alpha
    return np.array([o.rejected for o in holm(p, alpha)], dtype=bool)
