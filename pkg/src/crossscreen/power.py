"""Closed-form and quadrature power calculations comparing Bonferroni with screening."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, optimize, stats
from scipy.special import ndtr, ndtri

from crossscreen.errors import InputError

QUAD_HALF_WIDTH = 10.0  # standard units each side of the Gaussian bulk


def _norm_pdf(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


def bonferroni_power(ncp, K=1, alpha=0.05) -> float:
    """Power of the full-sample test with a two-sided Bonferroni correction for ``K`` outcomes,
    ``1 - Phi(-sqrt(2) ncp - Phi^-1(alpha / 2K))``, assuming equal null and alternative variances.
    """
    if K < 1:
        raise InputError("K must be at least 1")
    return float(ndtr(math.sqrt(2) * ncp + ndtri(alpha / (2 * K))))


def cross_screen_power(ncp, alpha=0.05, rho_s=2) -> float:
    """Power of non-adaptive cross-screening for one false hypothesis.

    Rejection needs the larger half statistic above ``lambda1 = z(1 - alpha/rho_s) - ncp`` and
    the smaller above ``lambda2 = z(1 - alpha) - ncp``; the probability
    ``2 * int_{lambda1}^inf phi(y) (Phi(y) - Phi(lambda2)) dy`` is integrated adaptively.
    """
    if not 0 < alpha < 1:
        raise InputError("alpha must lie in (0, 1)")
    lam1 = float(ndtri(1 - alpha / rho_s)) - ncp
    lam2 = float(ndtri(1 - alpha)) - ncp
    lo = lam1
    hi = max(lam1, 0.0) + QUAD_HALF_WIDTH
    if lo >= hi:
        return 0.0
    lo = max(lo, -QUAD_HALF_WIDTH)
    phi2 = float(ndtr(lam2))
    val, _ = integrate.quad(lambda y: _norm_pdf(y) * (ndtr(y) - phi2), lo, hi, epsabs=1e-10, epsrel=1e-10, limit=200)
    return float(min(max(2.0 * val, 0.0), 1.0))


def ttest_power(n_pairs, tau, K=1, alpha=0.05) -> float:
    """Power of the two-sided one-sample t-test at level ``alpha / K`` for ``N(tau, 1)`` differences.

    ``n_pairs`` may be real-valued.
    """
    df = n_pairs - 1
    crit = stats.t.isf(alpha / (2 * K), df)
    nc = tau * math.sqrt(n_pairs)
    # lower tail via the reflected noncentrality; nct.cdf loses it far out
    return float(stats.nct.sf(crit, df, nc) + stats.nct.sf(crit, df, -nc))


def ttest_pairs_required(tau, K=1, power=0.8, alpha=0.05, rule="ceil") -> int:
    """Pairs needed for the Bonferroni-corrected two-sided t-test to reach ``power``.

    ``rule="ceil"`` returns the smallest integer ``I`` with enough power; ``rule="round"`` solves
    for a real-valued ``I`` and rounds to the nearest integer.
    """
    if tau == 0:
        raise InputError("tau = 0 has no finite sample size")
    if not 0 < power < 1:
        raise InputError("power must lie in (0, 1)")
    tau = abs(tau)

    def gap(n):
        return ttest_power(n, tau, K, alpha) - power

    lo = 2
    if gap(lo) >= 0:
        return lo
    hi = 4
    while gap(hi) < 0:
        lo, hi = hi, hi * 2
    if rule == "round":
        return int(round(optimize.brentq(gap, lo, hi, xtol=1e-6)))
    if rule != "ceil":
        raise InputError("rule must be 'ceil' or 'round'")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if gap(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


def naive_selection_prob(tau, K, n_pairs) -> float:
    """Chance that the one shifted outcome out of ``K`` has the largest sample mean.

    Outcome means are independent with unit-variance differences, the active one shifted by
    ``tau``. On the scale of sample sums, ``int Phi(u)^(K-1) phi(u - tau sqrt(I)) du``.
    """
    if K < 1 or n_pairs < 1:
        raise InputError("K and I must be at least 1")
    shift = tau * math.sqrt(n_pairs)
    if K == 1:
        return 1.0
    lo, hi = shift - QUAD_HALF_WIDTH, shift + QUAD_HALF_WIDTH
    val, _ = integrate.quad(
        lambda u: ndtr(u) ** (K - 1) * _norm_pdf(u - shift), lo, hi, epsabs=1e-9, epsrel=1e-9, limit=200
    )
    return float(min(max(val, 0.0), 1.0))


def power_table(ncps=(1, 2, 3), Ks=(1, 10, 50, 100, 250, 500), alpha=0.05) -> list[dict]:
    rows = []
    for ncp in ncps:
        row = {"ncp": ncp, "cross_screen": cross_screen_power(ncp, alpha)}
        for K in Ks:
            row[f"bonferroni_K{K}"] = bonferroni_power(ncp, K, alpha)
        rows.append(row)
    return rows
