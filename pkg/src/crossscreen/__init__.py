"""Sensitivity analysis and cross-screening for matched-pair studies of many outcomes."""

from crossscreen.pairdata import (
    PairDiffMatrix,
    SplitAssignment,
    covariate_split,
    load_pairs,
    pair_differences,
    random_split,
)
from crossscreen.scores import ScoreSpec, ScoreVector, compute_scores, parse_stat, test_statistic
from crossscreen.sensbound import (
    SENSITIVE_AT_ONE,
    PValueBound,
    SensitivityModel,
    expected_pvalue,
    pbound_exact,
    pbound_normal,
    sensitivity_value,
    size_bound,
)
from crossscreen.multitest import (
    TestOutcome,
    adaptive_min_p,
    bonferroni,
    fallback,
    fixed_sequence,
    holm,
    recycling,
)
from crossscreen.screening import (
    ScreenConfig,
    ScreenPlan,
    ScreenResult,
    cross_screen,
    execute,
    nonrandom_cross_screen,
    plan,
    single_screen,
)
from crossscreen.power import (
    bonferroni_power,
    cross_screen_power,
    naive_selection_prob,
    ttest_pairs_required,
)
from crossscreen.simulation import SimConfig, SimResult, mc_standard_error, simulate

__version__ = "0.1.0"
