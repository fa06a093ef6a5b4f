import numpy as np
import pytest

from crossscreen.errors import InputError
from crossscreen.simulation import (
    SimConfig,
    draw_data,
    mc_standard_error,
    parse_error_dist,
    replicate_rng,
    run_replicate,
    simulate,
)

SMALL = dict(K=10, I=40, tau1=0.8, tau2=0.4, gamma=1.0, replicates=40, master_seed=5,
             methods=("bonferroni:wilcoxon", "cross_screen:wilcoxon", "single_screen:wilcoxon"))


def test_same_seed_same_result():
    a = simulate(SimConfig(**SMALL))
    b = simulate(SimConfig(**SMALL))
    assert a == b


def test_worker_count_does_not_change_result():
    cfg = SimConfig(**SMALL)
    assert simulate(cfg, workers=1).rows == simulate(cfg, workers=2).rows


def test_replicate_depends_only_on_index():
    cfg = SimConfig(**SMALL)
    a = run_replicate(cfg, 7)
    run_replicate(cfg, 3)
    assert np.array_equal(a, run_replicate(cfg, 7))
    y1 = draw_data(cfg, replicate_rng(5, 7))
    y2 = draw_data(cfg, replicate_rng(5, 7))
    assert np.array_equal(y1, y2)


def test_both_rate_bounded_by_each():
    res = simulate(SimConfig(**SMALL))
    for r in res.rows:
        assert r.h12 <= min(r.h1, r.h2)
        assert 0 <= r.h1 <= 1


def test_effects_on_first_two_columns():
    cfg = SimConfig(K=3, I=20000, tau1=0.5, tau2=-0.25, replicates=1)
    y = draw_data(cfg, replicate_rng(0, 0))
    np.testing.assert_allclose(y.mean(axis=0), [0.5, -0.25, 0.0], atol=0.03)


def test_t_errors():
    assert parse_error_dist("t:3") == ("t", 3.0)
    with pytest.raises(InputError):
        parse_error_dist("cauchy")
    y = draw_data(SimConfig(K=2, I=5000, error_dist="t:3", tau1=0, replicates=1), replicate_rng(0, 1))
    assert np.abs(y).max() > 6  # heavy tails show up


def test_null_rejection_rate():
    n = 600
    res = simulate(SimConfig(K=10, I=40, tau1=0, tau2=0, gamma=1.0, replicates=n, master_seed=1,
                             methods=SMALL["methods"]))
    bound = 0.05 + 3 * mc_standard_error(0.05, n)
    for r in res.rows:
        # each outcome is a true null; per-outcome rate is below the familywise rate
        assert r.h1 <= bound and r.h2 <= bound


def test_config_validation():
    with pytest.raises(InputError):
        SimConfig(methods=("oracle:wilcoxon",))
    with pytest.raises(InputError):
        SimConfig(K=1)
    with pytest.raises(InputError):
        SimConfig(I=8, planning_fraction=0.2)


def test_standard_error():
    assert mc_standard_error(0.5, 100) == 0.05


def test_standard_error_examples():
    assert mc_standard_error(0.5, 10000) == 0.005
    assert mc_standard_error(0.0, 50) == 0.0
    assert mc_standard_error(0.883, 2000) == pytest.approx(0.00719, abs=5e-6)


def test_power_grows_with_pairs_and_effect():
    base = dict(K=20, tau2=0.0, gamma=1.5, replicates=150, master_seed=3,
                methods=("cross_screen:wilcoxon", "bonferroni:wilcoxon"))
    small = simulate(SimConfig(I=40, tau1=0.4, **base))
    more_pairs = simulate(SimConfig(I=120, tau1=0.4, **base))
    bigger = simulate(SimConfig(I=40, tau1=0.8, **base))
    for a, b, c in zip(small.rows, more_pairs.rows, bigger.rows):
        assert b.h1 >= a.h1 and c.h1 >= a.h1
