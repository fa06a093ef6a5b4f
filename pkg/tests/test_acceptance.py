"""One test per acceptance criterion; each records a pass/fail line shown in the run summary."""

import time

import numpy as np
import pytest

from conftest import brute_force_upper, record
from crossscreen.multitest import PROCEDURES, bonferroni, fallback, fixed_sequence, recycling, rejections
from crossscreen.pairdata import PairDiffMatrix
from crossscreen.power import bonferroni_power, cross_screen_power, naive_selection_prob, ttest_pairs_required
from crossscreen.scores import ScoreSpec, compute_scores
from crossscreen.screening import ScreenConfig, cross_screen, single_screen
from crossscreen.sensbound import expected_pvalue, pbound_exact, pvalue_upper, size_bound, wilcoxon_sums
from crossscreen.simulation import SimConfig, simulate

WIL = ScoreSpec("wilcoxon")

# (true Gamma, assumed Gamma): size at I = 100, 250, 500, then EPV at the same I
SIZE_EPV_TABLE = {
    (1.00, 1.00): ((0.05000, 0.05000, 0.05000), (0.50, 0.50, 0.50)),
    (1.00, 1.10): ((0.01976, 0.01077, 0.00511), (0.62, 0.68, 0.74)),
    (1.00, 1.25): ((0.00445, 0.00074, 0.00007), (0.75, 0.86, 0.94)),
    (1.10, 1.25): ((0.01392, 0.00586, 0.00197), (0.65, 0.73, 0.81)),
    (1.25, 1.25): ((0.05000, 0.05000, 0.05000), (0.50, 0.50, 0.50)),
    (1.25, 1.50): ((0.00750, 0.00194, 0.00033), (0.71, 0.81, 0.89)),
    (1.50, 2.00): ((0.00204, 0.00017, 0.00001), (0.80, 0.91, 0.97)),
}

# ncp -> (cross-screen, Bonferroni at K = 1, 10, 50, 100, 250, 500)
POWER_TABLE = {
    1: (0.0591, (0.2926, 0.0818, 0.0303, 0.0194, 0.0106, 0.0066)),
    2: (0.3929, (0.8074, 0.5085, 0.3220, 0.2571, 0.1866, 0.1441)),
    3: (0.8285, (0.9888, 0.9244, 0.8295, 0.7769, 0.6997, 0.6376)),
}
POWER_KS = (1, 10, 50, 100, 250, 500)

PAIRS_TABLE = {
    0.1: (787, 1335, 1713, 1874, 2087, 2247),
    0.3: (89, 152, 195, 214, 238, 256),
    0.5: (33, 57, 74, 81, 90, 97),
}


def test_criterion_01_size_and_epv_table():
    t0 = time.perf_counter()
    bad = []
    for (g_true, g), (sizes, epvs) in SIZE_EPV_TABLE.items():
        for n, want_size, want_epv in zip((100, 250, 500), sizes, epvs):
            s1, s2 = wilcoxon_sums(n)
            size = size_bound(g_true, g, s1, s2, 0.05)
            epv = expected_pvalue(g_true, g, s1, s2)
            if round(size, 5) != want_size:
                bad.append(("size", g_true, g, n, size, want_size))
            if round(epv, 2) != want_epv:
                bad.append(("epv", g_true, g, n, epv, want_epv))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 1.0
    record(1, ok, f"42 size/EPV cells, {len(bad)} mismatches, {elapsed:.3f}s")
    assert not bad, bad
    assert elapsed < 1.0


def test_criterion_02_asymptotic_power_table():
    t0 = time.perf_counter()
    bad = []
    for ncp, (cs, bonf) in POWER_TABLE.items():
        got = cross_screen_power(ncp)
        if round(got, 4) != cs:
            bad.append(("cs", ncp, got, cs))
        for K, want in zip(POWER_KS, bonf):
            got = bonferroni_power(ncp, K)
            if round(got, 4) != want:
                bad.append(("bonferroni", ncp, K, got, want))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 1.0
    record(2, ok, f"21 power cells to 4 dp, {len(bad)} mismatches, {elapsed:.3f}s")
    assert not bad, bad
    assert elapsed < 1.0


def test_criterion_03_pairs_required_table():
    t0 = time.perf_counter()
    worst, exact_round = 0, 0
    for tau, row in PAIRS_TABLE.items():
        for K, want in zip(POWER_KS, row):
            worst = max(worst, abs(ttest_pairs_required(tau, K) - want))
            exact_round += ttest_pairs_required(tau, K, rule="round") == want
    elapsed = time.perf_counter() - t0
    ok = worst <= 1 and elapsed < 5.0
    record(3, ok, f"18 sample sizes, max |diff| {worst} (smallest-I rule), "
                  f"{exact_round}/18 exact with rounding rule, {elapsed:.2f}s")
    assert worst <= 1
    assert elapsed < 5.0


def test_criterion_04_selection_probabilities():
    want = {0.1: 0.082, 0.25: 0.501, 0.5: 0.988}
    got = {tau: naive_selection_prob(tau, 100, 100) for tau in want}
    worst = max(abs(got[t] - want[t]) for t in want)
    record(4, worst <= 0.002, "selection probabilities " + ", ".join(f"{got[t]:.4f}" for t in want)
           + f"; max |diff| {worst:.4f}")
    assert worst <= 0.002


def test_criterion_05_exact_bound_oracle():
    rng = np.random.default_rng(5)
    families = [WIL, ScoreSpec("sign"), ScoreSpec("perm_t"), ScoreSpec("huber_m")]
    worst = 0.0
    for i in range(200):
        n = int(rng.integers(1, 13))
        y = rng.normal(0.3, 1, n)
        if i % 4 == 0:
            y = np.round(y, 1)
        spec = families[i % len(families)]
        gamma = float(rng.choice([1, 1.5, 2, 5]))
        sv = compute_scores(np.abs(y), spec)
        got = pbound_exact(y > 0, sv, gamma).upper
        want = brute_force_upper(sv.q, y > 0, gamma / (1 + gamma))
        worst = max(worst, abs(got - want))
    record(5, worst <= 1e-12, f"200 instances with I <= 12, max |exact - enumeration| {worst:.2e}")
    assert worst <= 1e-12


def test_criterion_06_exact_normal_consistency():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        y = rng.normal(rng.uniform(0, 0.3), 1, 250)
        gamma = float(rng.choice([1, 1.25, 1.5, 2]))
        worst = max(worst, abs(pvalue_upper(y, WIL, gamma, method="exact") - pvalue_upper(y, WIL, gamma)))
    record(6, worst <= 0.005, f"100 instances at I = 250, max |exact - normal| {worst:.5f}")
    assert worst <= 0.005


def _fwer_line(label, hits, n):
    rate = hits / n
    bound = 0.05 + 3 * np.sqrt(0.05 * 0.95 / n)
    return rate <= bound, f"{label} {rate:.4f}"


def test_criterion_07_familywise_error_under_null():
    t0 = time.perf_counter()
    n = 10_000
    rng = np.random.default_rng(7)
    cross_hits = single_hits = 0
    for s in range(n):
        m = PairDiffMatrix(rng.standard_normal((50, 20)))
        cfg = ScreenConfig(gamma=1.0, alpha=0.05, seed=s)
        cross_hits += bool(cross_screen(m, cfg).union)
        single_hits += bool(single_screen(m, 0.2, cfg).rejected)
    results = [_fwer_line("cross_screen", cross_hits, n), _fwer_line("single_screen", single_hits, n)]
    urng = np.random.default_rng(70)
    for name in PROCEDURES:
        hits = sum(bool(rejections(name, urng.random(20), 0.05).any()) for _ in range(n))
        results.append(_fwer_line(name, hits, n))
    elapsed = time.perf_counter() - t0
    ok = all(r[0] for r in results) and elapsed < 300
    record(7, ok, f"10000 null datasets, bound {0.05 + 3 * np.sqrt(0.0475 / n):.4f}: "
                  + ", ".join(r[1] for r in results) + f"; {elapsed:.0f}s")
    assert all(r[0] for r in results), results
    assert elapsed < 300


SIM_CELLS = [
    (100, 250, 0.5, 0.0, "cross_screen:adaptive", "h1", 88.3),
    (100, 250, 0.5, 0.0, "bonferroni:adaptive", "h1", 35.0),
    (100, 500, 0.6, 0.4, "cross_screen:adaptive", "h2", 86.5),
    (100, 500, 0.6, 0.4, "bonferroni:adaptive", "h2", 30.8),
    (500, 500, 0.5, 0.5, "cross_screen:adaptive", "h12", 99.3),
    (100, 250, 0.5, 0.0, "single_screen:wilcoxon", "h1", 57.8),
]


@pytest.mark.slow
def test_criterion_08_simulated_power_cells():
    t0 = time.perf_counter()
    lines, ok = [], True
    for K, n, t1, t2, method, col, want in SIM_CELLS:
        cfg = SimConfig(K=K, I=n, tau1=t1, tau2=t2, gamma=2.0, replicates=2000, master_seed=20170225,
                        methods=(method,))
        got = 100 * getattr(simulate(cfg).rows[0], col)
        ok &= abs(got - want) <= 3.0
        lines.append(f"{method} K={K} I={n} {col}={got:.1f} (target {want})")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 1800
    record(8, ok, "; ".join(lines) + f"; {elapsed:.0f}s")
    assert ok


def test_criterion_09_bonferroni_arithmetic():
    a = bonferroni([0.001036], 92)[0].adjusted_p
    b = bonferroni([0.00383], 4)[0].adjusted_p
    c = bonferroni([0.00865], 4)[0].adjusted_p
    ok = round(a, 3) == 0.095 and round(b, 3) == 0.015 and round(c, 3) == 0.035
    record(9, ok, f"adjusted {a:.5f}, {b:.5f}, {c:.5f}")
    assert ok


def _rej(outcomes):
    return [o.rejected for o in outcomes]


def test_criterion_10_ordered_testing_rules():
    cases = [
        ("fixed", fixed_sequence, (0.01, 0.2, 0.001), [True, False, False]),
        ("fixed", fixed_sequence, (0.04, 0.04, 0.04), [True, True, True]),
        ("fixed", fixed_sequence, (0.06, 0.001), [False, False]),
        ("fallback", fallback, (0.02, 0.04), [True, True]),
        ("fallback", fallback, (0.03, 0.02), [False, True]),
        ("fallback", fallback, (0.03, 0.03), [False, False]),
        ("fallback", fallback, (0.026, 0.026), [False, False]),
        ("recycle", recycling, (0.03, 0.02), [True, True]),
        ("recycle", recycling, (0.06, 0.02), [False, True]),
        ("recycle", recycling, (0.02, 0.3), [True, False]),
        ("recycle", recycling, (0.05, 0.025), [True, True]),
    ]
    bad = [(name, p, _rej(fn(p)), want) for name, fn, p, want in cases if _rej(fn(p)) != want]
    # levels: first at alpha/2, second at alpha after a rejection, else alpha/2
    levels_ok = (
        [o.level_spent for o in fallback((0.02, 0.04))] == pytest.approx([0.025, 0.05])
        and [o.level_spent for o in fallback((0.03, 0.02))] == pytest.approx([0.025, 0.025])
        and [o.level_spent for o in recycling((0.03, 0.02))] == pytest.approx([0.05, 0.025])
        and not fixed_sequence((0.01, 0.2, 0.001))[2].tested
    )
    ok = not bad and levels_ok
    record(10, ok, f"{len(cases)} decision cases, {len(bad)} mismatches, levels {'ok' if levels_ok else 'wrong'}")
    assert not bad, bad
    assert levels_ok
