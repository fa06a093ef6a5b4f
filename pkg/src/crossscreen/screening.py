"""Cross-screening: split the pairs, let each half plan the tests run on the other half.

A plan fixes, for each selected outcome, the test direction and the score family, and orders
the outcomes from least to most sensitive to bias. Plans are built from one set of pairs and
carry no data, so executing a plan can only ever see the pairs it is handed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from crossscreen.errors import InputError
from crossscreen.multitest import PROCEDURES, TestOutcome, run_procedure
from crossscreen.pairdata import PairDiffMatrix, SplitAssignment, covariate_split, random_split
from crossscreen.scores import ScoreSpec, compute_scores, score_matrix
from crossscreen.sensbound import (
    SENSITIVE_AT_ONE,
    TAILS,
    kappa,
    normal_upper,
    pbound_exact,
    sensitivity_value,
    sensitivity_value_normal,
)

RANK_BY = ("gamma_star", "pvalue")


@dataclass(frozen=True)
class ScreenConfig:
    candidates: tuple[ScoreSpec, ...] = (ScoreSpec("wilcoxon"),)
    gamma: float = 1.0
    alpha: float = 0.05
    seed: int = 0
    selection: str | int = "ordered"  # "ordered" or a top-k count
    procedure: str = "fixed"
    method: str = "normal"
    planning_gamma: float | None = None
    rank_by: str = "gamma_star"

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise InputError("at least one candidate statistic is required")
        if self.procedure not in PROCEDURES:
            raise InputError(f"unknown procedure {self.procedure!r}")
        if self.rank_by not in RANK_BY:
            raise InputError(f"rank_by must be one of {RANK_BY}")
        if not 0 < self.alpha < 1:
            raise InputError("alpha must lie in (0, 1)")
        if self.gamma < 1:
            raise InputError("Gamma must be >= 1")
        sel = self.selection
        if not (sel == "ordered" or (isinstance(sel, int) and sel >= 1)):
            raise InputError(f"selection must be 'ordered' or a positive integer, got {sel!r}")


@dataclass(frozen=True)
class ScreenPlan:
    hypothesis_order: tuple[int, ...]
    directions: tuple[str, ...]
    statistics: tuple[ScoreSpec, ...]
    selection_mode: str | int
    gamma_star: tuple[float, ...] = ()
    n_outcomes: int = 0

    def to_dict(self, names=None) -> dict:
        def name(k):
            return names[k] if names is not None else k

        return {
            "selection": self.selection_mode,
            "tests": [
                {"outcome": name(k), "index": k, "direction": d, "statistic": s.label(), "gamma_star": g}
                for k, d, s, g in zip(self.hypothesis_order, self.directions, self.statistics, self.gamma_star)
            ],
        }


@dataclass(frozen=True)
class HalfResult:
    """Outcome of running one plan on one set of pairs at ``level``."""

    outcomes: tuple[TestOutcome, ...]
    level: float

    @property
    def rejected(self) -> tuple[int, ...]:
        return tuple(sorted(o.hypothesis_index for o in self.outcomes if o.rejected))

    def adjusted(self, scale=1.0) -> dict[int, float]:
        return {o.hypothesis_index: min(1.0, scale * o.adjusted_p) for o in self.outcomes}


@dataclass(frozen=True)
class ScreenResult:
    r1: tuple[int, ...]
    r2: tuple[int, ...]
    union: tuple[int, ...]
    intersection: tuple[int, ...]
    adjusted_p: dict[int, float]
    adjusted_p_half1: dict[int, float]
    adjusted_p_half2: dict[int, float]
    plan1: ScreenPlan
    plan2: ScreenPlan
    split: SplitAssignment
    gamma: float
    alpha: float
    outcome_names: tuple[str, ...] = field(default=())

    @property
    def replicated(self) -> tuple[int, ...]:
        return self.intersection

    def to_dict(self) -> dict:
        names = self.outcome_names or None

        def nm(ks):
            return [names[k] if names else k for k in ks]

        def adj(d):
            return {(names[k] if names else str(k)): v for k, v in sorted(d.items())}

        return {
            "gamma": self.gamma,
            "alpha": self.alpha,
            "split": self.split.to_dict(),
            # plan1 is tested on half1 (built from half2) and plan2 on half2
            "plans": {"half1": self.plan1.to_dict(names), "half2": self.plan2.to_dict(names)},
            "r1": nm(self.r1),
            "r2": nm(self.r2),
            "union": nm(self.union),
            "replicated": nm(self.intersection),
            "adjusted_p": adj(self.adjusted_p),
            "adjusted_p_half1": adj(self.adjusted_p_half1),
            "adjusted_p_half2": adj(self.adjusted_p_half2),
        }


def _normal_tail_stats(y, spec):
    q = score_matrix(np.abs(y), spec)
    t_pos = np.where(y > 0, q, 0.0).sum(axis=0)
    t_neg = np.where(y < 0, q, 0.0).sum(axis=0)
    return t_pos, t_neg, q.sum(axis=0), (q * q).sum(axis=0)


def _planning_grid(y, candidates, alpha, gamma, method):
    """Gamma* and P-value bounds, shape ``(n_candidates, 2 tails, K)``."""
    n_c, K = len(candidates), y.shape[1]
    gstar = np.empty((n_c, 2, K))
    p_at_star = np.empty((n_c, 2, K))
    p_at_gamma = np.empty((n_c, 2, K))
    for c, spec in enumerate(candidates):
        if method == "normal":
            t_pos, t_neg, s1, s2 = _normal_tail_stats(y, spec)
            for j, t in enumerate((t_pos, t_neg)):
                g = sensitivity_value_normal(t, s1, s2, alpha)
                gstar[c, j] = g
                p_at_star[c, j] = normal_upper(t, s1, s2, kappa(np.maximum(g, 1.0)))
                p_at_gamma[c, j] = normal_upper(t, s1, s2, kappa(gamma))
        else:
            for k in range(K):
                col = y[:, k]
                sv = compute_scores(np.abs(col), spec)
                for j, tail in enumerate(TAILS):
                    g = sensitivity_value(col, spec, alpha, tail, method)
                    gstar[c, j, k] = g
                    p_at_star[c, j, k] = pbound_exact(col > 0, sv, max(g, 1.0), tail).upper
                    p_at_gamma[c, j, k] = pbound_exact(col > 0, sv, gamma, tail).upper
    return gstar, p_at_star, p_at_gamma


def plan(planning_half: PairDiffMatrix, candidates: Sequence[ScoreSpec], gamma=1.0, alpha=0.05,
         selection="ordered", method="normal", rank_by="gamma_star") -> ScreenPlan:
    """Choose direction, statistic and test order from the planning pairs alone.

    With ``rank_by="gamma_star"`` each outcome keeps the (statistic, tail) with the largest
    sensitivity value at ``alpha``; outcomes are ordered by it, largest first. Ties go to the
    smaller P-value bound at the common Gamma*, then to the earlier candidate / ``greater``
    tail / lower outcome index. With ``rank_by="pvalue"`` the smallest bound at ``gamma``
    decides instead.
    """
    if planning_half.n_pairs < 1:
        raise InputError("empty planning sample")
    candidates = tuple(candidates)
    if not candidates:
        raise InputError("at least one candidate statistic is required")
    y = planning_half.values
    K = y.shape[1]
    gstar, p_star, p_gamma = _planning_grid(y, candidates, alpha, gamma, method)
    n_c = len(candidates)
    # flattened choice c * 2 + tail; position breaks remaining ties
    g_flat = gstar.reshape(n_c * 2, K)
    ps_flat = p_star.reshape(n_c * 2, K)
    pg_flat = p_gamma.reshape(n_c * 2, K)
    pos = np.arange(n_c * 2)[:, None] * np.ones((1, K))
    if rank_by == "gamma_star":
        choice = np.lexsort((pos, ps_flat, -g_flat), axis=0)[0]
    else:
        choice = np.lexsort((pos, -g_flat, pg_flat), axis=0)[0]
    cols = np.arange(K)
    best_g = g_flat[choice, cols]
    best_ps = ps_flat[choice, cols]
    best_pg = pg_flat[choice, cols]
    if rank_by == "gamma_star":
        order = np.lexsort((cols, best_ps, -best_g))
    else:
        order = np.lexsort((cols, -best_g, best_pg))
    if selection != "ordered":
        order = order[: int(selection)]
    return ScreenPlan(
        hypothesis_order=tuple(int(k) for k in order),
        directions=tuple(TAILS[int(choice[k]) % 2] for k in order),
        statistics=tuple(candidates[int(choice[k]) // 2] for k in order),
        selection_mode=selection,
        gamma_star=tuple(float(best_g[k]) for k in order),
        n_outcomes=K,
    )


def planned_pvalues(testing_half: PairDiffMatrix, plan_: ScreenPlan, gamma, method="normal") -> np.ndarray:
    """Upper one-sided bounds at ``gamma`` for the planned outcomes, in plan order."""
    y = testing_half.values
    if plan_.hypothesis_order and max(plan_.hypothesis_order) >= y.shape[1]:
        raise InputError("plan refers to an outcome the data does not have")
    out = np.empty(len(plan_.hypothesis_order))
    if method == "normal":
        cache = {}
        for i, (k, tail, spec) in enumerate(zip(plan_.hypothesis_order, plan_.directions, plan_.statistics)):
            if spec not in cache:
                cache[spec] = _normal_tail_stats(y, spec)
            t_pos, t_neg, s1, s2 = cache[spec]
            t = t_pos[k] if tail == "greater" else t_neg[k]
            out[i] = normal_upper(t, s1[k], s2[k], kappa(gamma))
    else:
        for i, (k, tail, spec) in enumerate(zip(plan_.hypothesis_order, plan_.directions, plan_.statistics)):
            col = y[:, k]
            out[i] = pbound_exact(col > 0, compute_scores(np.abs(col), spec), gamma, tail).upper
    return out


def execute(testing_half: PairDiffMatrix, plan_: ScreenPlan, gamma, level, procedure="fixed",
            method="normal") -> HalfResult:
    """Test the planned outcomes on ``testing_half`` with FWER control at ``level``.

    Cross-screening passes ``level = alpha / 2``; single screening passes ``alpha``.
    """
    p = planned_pvalues(testing_half, plan_, gamma, method)
    outcomes = run_procedure(procedure, p, level, indices=plan_.hypothesis_order)
    return HalfResult(tuple(outcomes), level)


def _cross(m: PairDiffMatrix, split: SplitAssignment, config: ScreenConfig) -> ScreenResult:
    half1, half2 = m.take(split.half1), m.take(split.half2)
    pg = config.planning_gamma if config.planning_gamma is not None else config.gamma
    common = dict(gamma=pg, alpha=config.alpha, selection=config.selection, method=config.method,
                  rank_by=config.rank_by)
    plan2 = plan(half1, config.candidates, **common)
    plan1 = plan(half2, config.candidates, **common)
    level = config.alpha / 2
    res2 = execute(half2, plan2, config.gamma, level, config.procedure, config.method)
    res1 = execute(half1, plan1, config.gamma, level, config.procedure, config.method)
    # adjusted P on the alpha scale: half-level adjustment times 2 for the two analyses
    adj1 = res1.adjusted(config.alpha / level)
    adj2 = res2.adjusted(config.alpha / level)
    combined = {k: min(adj1.get(k, 1.0), adj2.get(k, 1.0)) for k in set(adj1) | set(adj2)}
    r1, r2 = res1.rejected, res2.rejected
    return ScreenResult(
        r1=r1,
        r2=r2,
        union=tuple(sorted(set(r1) | set(r2))),
        intersection=tuple(sorted(set(r1) & set(r2))),
        adjusted_p=combined,
        adjusted_p_half1=adj1,
        adjusted_p_half2=adj2,
        plan1=plan1,
        plan2=plan2,
        split=split,
        gamma=config.gamma,
        alpha=config.alpha,
        outcome_names=m.outcome_names,
    )


def cross_screen(m: PairDiffMatrix, config: ScreenConfig) -> ScreenResult:
    """Random cross-screening; rejects the union of the two halves' rejections."""
    if m.n_pairs < 4:
        raise InputError("cross-screening needs at least 4 pairs")
    return _cross(m, random_split(m, config.seed), config)


def nonrandom_cross_screen(m: PairDiffMatrix, labels, config: ScreenConfig) -> ScreenResult:
    """Cross-screening across the two groups of a binary pair covariate.

    ``intersection`` then lists outcomes rejected separately within each subgroup.
    """
    return _cross(m, covariate_split(m, labels), config)


@dataclass(frozen=True)
class SingleScreenResult:
    rejected: tuple[int, ...]
    adjusted_p: dict[int, float]
    plan: ScreenPlan
    planning_pairs: tuple[int, ...]
    analysis_pairs: tuple[int, ...]
    gamma: float
    alpha: float
    outcome_names: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        names = self.outcome_names or None
        return {
            "gamma": self.gamma,
            "alpha": self.alpha,
            "planning_pairs": list(self.planning_pairs),
            "analysis_pairs": list(self.analysis_pairs),
            "plan": self.plan.to_dict(names),
            "rejected": [names[k] if names else k for k in self.rejected],
            "adjusted_p": {(names[k] if names else str(k)): v for k, v in sorted(self.adjusted_p.items())},
        }


def planning_split(n_pairs: int, planning_fraction: float, seed: int):
    if not 0 < planning_fraction < 1:
        raise InputError("planning fraction must lie in (0, 1)")
    n_plan = math.floor(planning_fraction * n_pairs)
    if n_plan < 2:
        raise InputError(f"planning sample of {n_plan} pairs is too small (need 2)")
    if n_pairs - n_plan < 1:
        raise InputError("no pairs left for analysis")
    perm = np.random.default_rng(seed).permutation(n_pairs)
    return tuple(sorted(int(i) for i in perm[:n_plan])), tuple(sorted(int(i) for i in perm[n_plan:]))


def single_screen(m: PairDiffMatrix, planning_fraction: float, config: ScreenConfig) -> SingleScreenResult:
    """Plan on a random ``floor(f I)`` pairs, discard them, test the rest at full ``alpha``."""
    plan_rows, test_rows = planning_split(m.n_pairs, planning_fraction, config.seed)
    pg = config.planning_gamma if config.planning_gamma is not None else config.gamma
    p = plan(m.take(plan_rows), config.candidates, pg, config.alpha, config.selection, config.method,
             config.rank_by)
    res = execute(m.take(test_rows), p, config.gamma, config.alpha, config.procedure, config.method)
    return SingleScreenResult(
        rejected=res.rejected,
        adjusted_p=res.adjusted(),
        plan=p,
        planning_pairs=plan_rows,
        analysis_pairs=test_rows,
        gamma=config.gamma,
        alpha=config.alpha,
        outcome_names=m.outcome_names,
    )
