"""Correlation-statistic tests: worked rank examples, exact affine cases,
permutation p-values against full enumeration, and sweep assembly."""

import itertools
import math

import numpy as np
import pytest

from infoshift.analysis import (
    CorrResult,
    PairedSeries,
    fit_line,
    kendall,
    pearson,
    spearman,
    sweep_table,
)
from infoshift.errors import DomainError, ShapeError
from infoshift.metrics import build_bound_report
from infoshift.numkit import Rng
from infoshift.synthgen import perturbed_model, severity_ladder


def _series(a, b):
    return PairedSeries(labels=tuple(str(i) for i in range(len(a))), a=np.array(a, float), b=np.array(b, float))


# -- worked examples ----------------------------------------------------------------

def test_spearman_worked_example():
    """Ranks (1,2,3,4,5) vs (2,1,4,3,5): sum of squared rank gaps is 4,
    giving rho = 1 - 24/120 = 0.8; the exact two-sided p enumerates 5!."""
    s = _series([10, 20, 30, 40, 50], [15, 5, 40, 30, 55])
    res = spearman(s)
    assert res.statistic == pytest.approx(0.8, abs=1e-12)
    assert res.method == "spearman"
    assert res.permutations == math.factorial(5)
    count = 0
    base = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    target = np.array([2.0, 1.0, 4.0, 3.0, 5.0])
    obs = np.corrcoef(base, target)[0, 1]
    for perm in itertools.permutations(range(5)):
        r = np.corrcoef(base, target[list(perm)])[0, 1]
        if abs(r) >= abs(obs) - 1e-12:
            count += 1
    assert res.p_value == pytest.approx(count / 120.0, abs=1e-15)
    assert res.p_value == pytest.approx(16 / 120, abs=1e-15)


def test_kendall_worked_example():
    """Three pairs, one discordant: tau = (2 - 1) / 3."""
    res = kendall(_series([1, 2, 3], [1, 3, 2]))
    assert res.statistic == pytest.approx(1 / 3, abs=1e-12)
    assert res.method == "kendall"


def test_kendall_tie_correction():
    """b has a tied pair: the denominator drops the tied comparison,
    matching the tau-b convention."""
    res = kendall(_series([1, 2, 3, 4], [1, 2, 2, 3]))
    # concordant 5, discordant 0, tied-in-b 1: tau = 5 / sqrt(6 * 5)
    assert res.statistic == pytest.approx(5 / math.sqrt(30), abs=1e-12)


def test_pearson_affine_cases_exact():
    a = [0.5, 1.5, 2.0, 4.0, 7.5]
    up = [2 * v + 3 for v in a]
    down = [-0.5 * v + 1 for v in a]
    assert pearson(_series(a, up)).statistic == pytest.approx(1.0, abs=1e-12)
    assert pearson(_series(a, down)).statistic == pytest.approx(-1.0, abs=1e-12)


def test_pearson_statistic_clamped_to_unit_interval():
    res = pearson(_series([1, 2, 3, 4], [2, 4, 6, 8]))
    assert -1.0 <= res.statistic <= 1.0


def test_v_shape_has_zero_linear_slope():
    """Symmetric V: linearly uncorrelated although fully dependent."""
    s = _series([-2, -1, 0, 1, 2], [2, 1, 0, 1, 2])
    assert pearson(s).statistic == pytest.approx(0.0, abs=1e-12)
    slope, _ = fit_line(s)
    assert slope == pytest.approx(0.0, abs=1e-12)


# -- permutation p-values ----------------------------------------------------------------

def test_exact_enumeration_used_for_short_series():
    """Up to 7 scenarios the p-value enumerates every permutation, and the
    requested Monte Carlo budget is ignored."""
    res = pearson(_series([1, 2, 3, 4, 5], [1, 3, 2, 5, 4]), permutations=50)
    assert res.permutations == math.factorial(5)
    assert 0.0 < res.p_value <= 1.0


def test_monte_carlo_p_for_longer_series():
    rng = Rng(1)
    a = rng.normal(size=12)
    b = rng.child("b").normal(size=12)
    res = pearson(_series(a, b), permutations=2000, seed=7)
    assert res.permutations == 2000
    # add-one smoothing keeps MC p-values off zero
    assert 1 / 2001 <= res.p_value <= 1.0
    again = pearson(_series(a, b), permutations=2000, seed=7)
    assert res.p_value == again.p_value


def test_mc_p_approximates_exact_p():
    """Monte Carlo at n=8 should land near the exact p of the matching
    pattern at n <= 7, and the smoothed estimator never returns 0."""
    a = list(range(1, 9))
    b = [2, 1, 4, 3, 6, 5, 8, 7]
    res = spearman(_series(a, b), permutations=20_000, seed=11)
    direct = 0
    total = 0
    base = np.array(a, float)
    target = np.array(b, float)
    obs = abs(np.corrcoef(base, target)[0, 1])
    for perm in itertools.permutations(range(8)):
        total += 1
        if abs(np.corrcoef(base, target[list(perm)])[0, 1]) >= obs - 1e-12:
            direct += 1
    assert res.p_value == pytest.approx(direct / total, abs=0.005)
    assert res.p_value > 0.0


def test_strong_monotone_signal_gets_small_p():
    a = np.arange(12, dtype=float)
    res = spearman(_series(a, a * 2 + 1), permutations=5000, seed=3)
    assert res.statistic == pytest.approx(1.0, abs=1e-12)
    assert res.p_value < 0.01


def test_constant_series_is_rejected():
    with pytest.raises(DomainError, match="constant"):
        pearson(_series([1, 1, 1, 1], [1, 2, 3, 4]))
    with pytest.raises(DomainError):
        kendall(_series([2, 2, 2], [1, 2, 3]))
    with pytest.raises(DomainError):
        fit_line(_series([3, 3, 3], [1, 2, 3]))


# -- containers ---------------------------------------------------------------------------

def test_paired_series_validation():
    with pytest.raises(ShapeError):
        PairedSeries(labels=("a", "b"), a=np.zeros(2), b=np.zeros(2))
    with pytest.raises(ShapeError):
        PairedSeries(labels=("a",), a=np.zeros(3), b=np.zeros(3))
    with pytest.raises(DomainError):
        PairedSeries(labels=("a", "b", "c"), a=np.array([1.0, np.inf, 2.0]), b=np.zeros(3))
    with pytest.raises(ShapeError):
        PairedSeries(labels=("a", "b", "c"), a=np.zeros((3, 1)), b=np.zeros(3))


def test_map_a_transforms_one_side():
    s = _series([-1, -2, 3], [5, 6, 7])
    t = s.map_a(np.abs, suffix="|.|")
    assert np.array_equal(t.a, [1, 2, 3])
    assert np.array_equal(t.b, s.b)
    assert t.labels == ("0|.|", "1|.|", "2|.|")


def test_fit_line_matches_normal_equations():
    rng = Rng(2)
    a = rng.normal(size=20)
    b = 3.0 * a - 2.0 + 0.1 * rng.child("noise").normal(size=20)
    slope, intercept = fit_line(_series(a, b))
    design = np.stack([a, np.ones(20)], axis=1)
    coef, *_ = np.linalg.lstsq(design, b, rcond=None)
    assert slope == pytest.approx(coef[0], abs=1e-10)
    assert intercept == pytest.approx(coef[1], abs=1e-10)


# -- sweep assembly --------------------------------------------------------------------------

def _ladder_reports():
    reports = []
    for l, seed in enumerate((60, 61)):
        scens = severity_ladder("joint", 5, Rng(seed))
        model = perturbed_model(scens[0].p, 0.3, Rng(seed).child("model"))
        for i, s in enumerate(scens):
            reports.append(
                build_bound_report(f"joint-l{l}-s{i + 1}", s.kind, s.severity, s.p, s.q, model)
            )
    return reports


def test_sweep_table_series_shapes():
    reports = _ladder_reports()
    table = sweep_table(reports)
    assert set(table) == {"emi_wr", "emid_thm3", "emid_thm2", "emid_partial"}
    for key, series in table.items():
        assert series.n == 10, key
    assert table["emid_thm2"].labels[0] == "joint-l0-s1"


def test_sweep_table_drops_consistency_series_without_support():
    from infoshift.synthgen import make_conditional_shift_pair, random_joint

    reports = []
    for seed in range(4):
        base = random_joint(3, 3, 3, Rng(70 + seed))
        scen = make_conditional_shift_pair(base, 0.6, Rng(80 + seed))
        model = perturbed_model(scen.p, 0.2, Rng(90 + seed))
        reports.append(
            build_bound_report(f"cond-{seed}", scen.kind, scen.severity, scen.p, scen.q, model)
        )
    table = sweep_table(reports)
    assert "emid_thm2" not in table and "emid_partial" not in table
    assert table["emid_thm3"].n == 4


def test_sweep_table_needs_three_reports():
    with pytest.raises(ShapeError):
        sweep_table(_ladder_reports()[:2])
