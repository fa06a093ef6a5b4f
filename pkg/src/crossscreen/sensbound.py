"""P-value bounds under the Gamma sensitivity model for matched pairs.

Under a bias of at most Gamma, the null distribution of ``T = sum(sgn(Y_i) q_i)`` is bracketed
by sums of independent ``q_i * Bernoulli(p)`` with ``p = kappa = Gamma / (1 + Gamma)`` (upper) and
``p = 1 - kappa`` (lower).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from crossscreen.errors import ExactMethodError, InputError
from crossscreen.scores import ScoreSpec, ScoreVector, compute_scores

TAILS = ("greater", "less")
METHODS = ("normal", "exact")

# returned by sensitivity_value when the test already fails at Gamma = 1
SENSITIVE_AT_ONE = 0.0

EXACT_LIMIT = 20  # pairs; above this, non-lattice scores are refused
MAX_LATTICE = 4_000_000
GAMMA_BRACKET = 1000.0
GAMMA_CAP = 1e6
GAMMA_TOL = 1e-4


@dataclass(frozen=True)
class SensitivityModel:
    gamma: float

    def __post_init__(self):
        if not (self.gamma >= 1.0 and math.isfinite(self.gamma)):
            raise InputError(f"Gamma must be a finite number >= 1, got {self.gamma}")

    @property
    def kappa(self) -> float:
        return self.gamma / (1.0 + self.gamma)


def kappa(gamma):
    return np.asarray(gamma, dtype=float) / (1.0 + np.asarray(gamma, dtype=float))


@dataclass(frozen=True)
class PValueBound:
    upper: float
    lower: float
    tail: str = "greater"
    method: str = "normal"
    degenerate: bool = False


def _model(model) -> SensitivityModel:
    return model if isinstance(model, SensitivityModel) else SensitivityModel(float(model))


def _check_tail(tail):
    if tail not in TAILS:
        raise InputError(f"tail must be one of {TAILS}, got {tail!r}")


def normal_upper(t, sum_q, sum_q2, kap):
    """Vectorized normal approximation ``1 - Phi((t - kap S1) / sqrt(kap (1 - kap) S2))``."""
    t, sum_q, sum_q2, kap = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, sum_q, sum_q2, kap)))
    sd = np.sqrt(kap * (1.0 - kap) * sum_q2)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (t - kap * sum_q) / sd
    return np.where(sum_q2 > 0, ndtr(-z), 1.0)


def pbound_normal(t, sum_q, sum_q2, model, tail="greater") -> PValueBound:
    """Large-sample bounds for the observed statistic ``t`` (no continuity correction).

    For ``tail="less"`` pass the statistic computed on the negative differences, ``sum_q - t``
    when there are no zero differences; the bounding distributions are the same.
    """
    _check_tail(tail)
    model = _model(model)
    if sum_q2 <= 0:
        return PValueBound(1.0, 1.0, tail, "normal", degenerate=True)
    k = model.kappa
    upper = float(normal_upper(t, sum_q, sum_q2, k))
    lower = float(normal_upper(t, sum_q, sum_q2, 1.0 - k))
    return PValueBound(upper, min(lower, upper), tail, "normal")


def _lattice_tail_probs(weights, t_int, probs):
    """``P(sum w_i B_i >= t_int)`` for each Bernoulli success probability in ``probs``."""
    total = int(weights.sum())
    if total > MAX_LATTICE:
        raise ExactMethodError(
            f"exact distribution needs a lattice of {total} points (limit {MAX_LATTICE}); use the normal method"
        )
    out = []
    for p in probs:
        dist = np.zeros(total + 1)
        dist[0] = 1.0
        top = 0
        for w in weights:
            w = int(w)
            if w == 0:
                continue
            shifted = dist[: top + 1].copy()
            dist[: top + 1] *= 1.0 - p
            dist[w : w + top + 1] += p * shifted
            top += w
        out.append(float(dist[max(t_int, 0) :].sum()) if t_int <= total else 0.0)
    return out


def _sparse_tail_probs(q, t, probs):
    # exact distribution over distinct attainable sums; keys rounded to merge float noise
    out = []
    tol = 1e-9 * max(1.0, float(np.abs(q).sum()))
    for p in probs:
        dist = {0.0: 1.0}
        for w in q:
            if w == 0:
                continue
            nxt = {}
            for s, pr in dist.items():
                for key, val in ((s, pr * (1.0 - p)), (s + w, pr * p)):
                    nxt[key] = nxt.get(key, 0.0) + val
            dist = nxt
        out.append(sum(pr for s, pr in dist.items() if s >= t - tol))
    return out


def pbound_exact(signs, q: ScoreVector, model, tail="greater") -> PValueBound:
    """Exact bounds by convolving the scaled Bernoulli distributions.

    ``signs`` marks pairs with a positive difference. Integer-lattice scores (Wilcoxon, sign,
    U-statistics with at most 20 pairs) use a dense dynamic program; other scores are convolved
    exactly over their attainable sums when there are at most ``EXACT_LIMIT`` pairs.
    """
    _check_tail(tail)
    model = _model(model)
    signs = np.asarray(signs).astype(bool)
    if signs.shape != q.q.shape:
        raise InputError(f"length mismatch: {signs.shape} vs {q.q.shape}")
    hit = signs if tail == "greater" else ~signs
    k = model.kappa
    probs = (k, 1.0 - k) if model.gamma > 1 else (k,)
    if q.lattice is not None:
        t_int = int(q.lattice[hit].sum())
        res = _lattice_tail_probs(q.lattice, t_int, probs)
    elif len(q.q) <= EXACT_LIMIT:
        res = _sparse_tail_probs(q.q, float(q.q[hit].sum()), probs)
    else:
        raise ExactMethodError(
            f"exact bounds for non-integer scores need at most {EXACT_LIMIT} pairs; use the normal method"
        )
    upper = min(res[0], 1.0)
    lower = min(res[-1], upper)
    return PValueBound(upper, lower, tail, "exact")


def pvalue_upper(y, spec: ScoreSpec, gamma, tail="greater", method="normal", scores=None) -> float:
    """Upper one-sided P-value bound for one outcome's differences ``y``."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise InputError("differences must be finite")
    sv = scores if scores is not None else compute_scores(np.abs(y), spec)
    if method == "exact":
        return pbound_exact(y > 0, sv, gamma, tail).upper
    if method != "normal":
        raise InputError(f"method must be one of {METHODS}")
    t = sv.q[(y > 0) if tail == "greater" else (y < 0)].sum()
    return pbound_normal(t, sv.sum, sv.sum_sq, gamma, tail).upper


def _bisect(rejects, lo, hi, tol):
    # rejects(lo) is True, rejects(hi) is False
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if rejects(mid):
            lo = mid
        else:
            hi = mid
    return lo


def sensitivity_value(y, spec: ScoreSpec, alpha=0.05, tail="greater", method="normal",
                      gamma_max=GAMMA_BRACKET, tol=GAMMA_TOL) -> float:
    """Largest Gamma at which the one-sided test still rejects at level ``alpha``.

    Returns :data:`SENSITIVE_AT_ONE` if even the randomization test (Gamma = 1) does not reject.
    The search bracket starts at ``[1, gamma_max]`` and is widened tenfold up to ``GAMMA_CAP``;
    if the test still rejects there, the cap is returned.
    """
    if not 0 < alpha <= 1:
        raise InputError("alpha must lie in (0, 1]")
    _check_tail(tail)
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise InputError("differences must be finite")
    sv = compute_scores(np.abs(y), spec)

    def rejects(g):
        return pvalue_upper(y, spec, g, tail, method, scores=sv) <= alpha

    if not rejects(1.0):
        return SENSITIVE_AT_ONE
    hi = float(gamma_max)
    while rejects(hi):
        if hi >= GAMMA_CAP:
            return GAMMA_CAP
        hi = min(hi * 10.0, GAMMA_CAP)
    return _bisect(rejects, 1.0, hi, tol)


def sensitivity_value_normal(t, sum_q, sum_q2, alpha=0.05, gamma_max=GAMMA_BRACKET, tol=GAMMA_TOL):
    """Array version of :func:`sensitivity_value` for the normal approximation.

    All arguments broadcast; every element is bisected on Gamma in lock step. Elements that
    still reject at ``gamma_max`` return ``gamma_max``.
    """
    t, s1, s2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, sum_q, sum_q2)))
    ok_at_one = normal_upper(t, s1, s2, 0.5) <= alpha
    lo = np.ones(t.shape)
    hi = np.full(t.shape, float(gamma_max))
    at_cap = normal_upper(t, s1, s2, kappa(gamma_max)) <= alpha
    n_iter = int(math.ceil(math.log2((gamma_max - 1.0) / tol)))
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        rej = normal_upper(t, s1, s2, kappa(mid)) <= alpha
        lo = np.where(rej, mid, lo)
        hi = np.where(rej, hi, mid)
    out = np.where(at_cap, float(gamma_max), lo)
    return np.where(ok_at_one, out, SENSITIVE_AT_ONE)


def _check_gammas(gamma_true, gamma_assumed):
    if gamma_true < 1:
        raise InputError("true Gamma must be >= 1")
    if gamma_true > gamma_assumed:
        raise InputError(f"true Gamma {gamma_true} exceeds assumed Gamma {gamma_assumed}")


def size_bound(gamma_true, gamma_assumed, sum_q, sum_q2, alpha=0.05, spread="assumed") -> float:
    """Approximate size of an ``alpha``-level sensitivity analysis run at ``gamma_assumed``
    when the actual bias is ``gamma_true``.

    ``spread`` picks the standard deviation that scales the distance to the critical value:
    ``"assumed"`` (default) uses ``kappa (1 - kappa)`` at the assumed bias;
    ``"true"`` uses ``kappa' (1 - kappa')``, the variance of the bounding statistic at the
    true bias.
    """
    _check_gammas(gamma_true, gamma_assumed)
    k, kp = float(kappa(gamma_assumed)), float(kappa(gamma_true))
    z = ndtri(1.0 - alpha)
    num = (k - kp) * sum_q + z * math.sqrt(k * (1 - k) * sum_q2)
    if spread == "assumed":
        den = math.sqrt(k * (1 - k) * sum_q2)
    elif spread == "true":
        den = math.sqrt(kp * (1 - kp) * sum_q2)
    else:
        raise InputError("spread must be 'assumed' or 'true'")
    return float(ndtr(-num / den))


def expected_pvalue(gamma_true, gamma_assumed, sum_q, sum_q2) -> float:
    """Approximate expected upper P-value bound for a true null when the actual bias is
    ``gamma_true`` and the analysis assumes ``gamma_assumed``."""
    _check_gammas(gamma_true, gamma_assumed)
    k, kp = float(kappa(gamma_assumed)), float(kappa(gamma_true))
    return float(ndtr((k - kp) * sum_q / math.sqrt((k * (1 - k) + kp * (1 - kp)) * sum_q2)))


def wilcoxon_sums(n_pairs: int) -> tuple[float, float]:
    """``(sum q, sum q^2)`` for untied signed ranks."""
    n = n_pairs
    return n * (n + 1) / 2, n * (n + 1) * (2 * n + 1) / 6


def two_sided_upper(y, spec, gamma, method="normal") -> float:
    """``min(1, 2 * min(greater, less))`` of the upper bounds."""
    sv = compute_scores(np.abs(np.asarray(y, dtype=float)), spec)
    p = min(pvalue_upper(y, spec, gamma, t, method, scores=sv) for t in TAILS)
    return min(1.0, 2.0 * p)
