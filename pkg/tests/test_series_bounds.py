"""Tail sums over discrete sets versus the analytic bound with explicit constant."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wannloc import (
    UniformlyDiscreteSet,
    default_epsilon,
    lattice,
    lemma_check,
    lemma_constant,
    tail_exponent_fit,
    tail_sum,
    verify_lemma,
)
from wannloc.series_bounds import TailSumReport, truncation_residual_estimate

PI_COTH_PI = math.pi / math.tanh(math.pi)  # sum over Z of (1 + n^2)^(-1)


def singleton(point):
    return UniformlyDiscreteSet(np.atleast_2d(np.asarray(point, float)),
                                radius=1.0, verify=False)


# --- tail sums ---------------------------------------------------------------


def test_single_center_at_origin_sums_to_one():
    for s in (0.7, 1.0, 2.5):
        assert tail_sum(singleton([0.0]), [0.0], 0.0, s) == 1.0


def test_full_lattice_sum_matches_closed_form():
    N = 2000
    Z = lattice(1, N, with_labels=False)
    assert tail_sum(Z, [0.0], 0.0, 1.0) == pytest.approx(PI_COTH_PI, abs=2.0 / N)


def test_tail_beyond_two_matches_closed_form():
    # removing n in {-1, 0, 1} subtracts 1 + 2*(1/2) = 2 from the full sum
    N = 2000
    Z = lattice(1, N, with_labels=False)
    tail = tail_sum(Z, [0.0], 2.0, 1.0)
    assert tail == pytest.approx(PI_COTH_PI - 2.0, abs=2.0 / N)


def test_cutoff_excludes_boundary_exactly():
    # ||x - gamma|| >= R keeps the center at distance exactly R
    pair = UniformlyDiscreteSet(np.array([[0.0], [3.0]]), radius=1.0)
    assert tail_sum(pair, [0.0], 3.0, 1.0) == pytest.approx(1.0 / 10.0)
    assert tail_sum(pair, [0.0], 3.0 + 1e-9, 1.0) == 0.0


@settings(max_examples=30, deadline=None)
@given(
    R1=st.floats(0.0, 6.0),
    dR=st.floats(0.0, 6.0),
    s1=st.floats(0.6, 3.0),
    ds_=st.floats(0.0, 2.0),
    seed=st.integers(0, 2**31 - 1),
)
def test_tail_monotone_in_cutoff_and_exponent(R1, dR, s1, ds_, seed):
    rng = np.random.default_rng(seed)
    D = lattice(1, 12, with_labels=False)
    x = rng.uniform(-0.5, 0.5, size=1)
    assert tail_sum(D, x, R1 + dR, s1) <= tail_sum(D, x, R1, s1) + 1e-15
    assert tail_sum(D, x, R1, s1 + ds_) <= tail_sum(D, x, R1, s1) + 1e-15


def test_tail_monotone_under_superset():
    small = lattice(1, 5, with_labels=False)
    big = lattice(1, 9, with_labels=False)
    x = [0.3]
    assert tail_sum(small, x, 1.0, 1.0) <= tail_sum(big, x, 1.0, 1.0)


# --- the explicit constant ------------------------------------------------------


def test_constant_against_hand_evaluation():
    # d=1, s=1, eps=1/4, R=1:
    #   2^s (1-eps)^(-2s) / (c_hat eps^d (2s-d)) * (1 - eps/(1+R))^(d-2s)
    # = 2 * (4/3)^2 * 4 * (8/7), with c_hat = 1/d = 1
    assert lemma_constant(1, 1.0, 0.25, 0.5, 1.0) == pytest.approx(1024.0 / 63.0,
                                                                   rel=1e-14)


def test_constant_against_hand_evaluation_2d():
    # d=2, s=3/2, eps=1/4, R=1, c_hat = 1/2:
    # 2^1.5 * (4/3)^3 * (2 * 16 / 1) * (8/7)
    expected = 2**1.5 * (64.0 / 27.0) * 32.0 * (8.0 / 7.0)
    assert lemma_constant(2, 1.5, 0.25, 0.5, 1.0) == pytest.approx(expected,
                                                                   rel=1e-14)


def test_constant_is_positive():
    for d, s in ((1, 0.8), (1, 2.0), (2, 1.2), (2, 3.0)):
        assert lemma_constant(d, s, 0.1, 0.5, 2.0) > 0.0


def test_constant_scaling_under_exponent_shift():
    # moving s -> s + delta rescales C by
    #   2^delta (1-eps)^(-2 delta) ((1+R-eps)/(1+R))^(-2 delta)... times the
    # denominator ratio |2s-d| / |2(s+delta)-d|; checked by re-evaluation
    d, eps, r, R = 1, 0.2, 0.5, 2.0
    s, delta = 1.0, 0.7
    base = lemma_constant(d, s, eps, r, R)
    shifted = lemma_constant(d, s + delta, eps, r, R)
    factor = (2.0**delta * (1 - eps) ** (-2 * delta)
              * (1 - eps / (1 + R)) ** (-2 * delta)
              * (2 * s - d) / (2 * (s + delta) - d))
    assert shifted == pytest.approx(base * factor, rel=1e-12)


def test_default_epsilon_halves_the_binding_constraint():
    assert default_epsilon(0.5, 2.0) == pytest.approx(0.25)
    assert default_epsilon(3.0, 0.4) == pytest.approx(0.2)
    assert default_epsilon(3.0, 4.0) == pytest.approx(0.5)


def test_constant_rejects_bad_parameters():
    with pytest.raises(ValueError):
        lemma_constant(1, 0.4, 0.25, 0.5, 1.0)  # s <= d/2
    with pytest.raises(ValueError):
        lemma_constant(1, 1.0, 0.6, 0.5, 1.0)  # eps >= r
    with pytest.raises(ValueError):
        lemma_constant(1, 1.0, 1.5, 2.0, 2.0)  # eps >= 1
    with pytest.raises(ValueError):
        lemma_constant(1, 1.0, 0.0, 0.5, 1.0)  # eps must be positive


# --- the lemma check ------------------------------------------------------------


def test_lemma_holds_on_the_line():
    Z = lattice(1, 200, with_labels=False)
    for R in (1.0, 2.0, 4.0, 8.0):
        check = verify_lemma(Z, [0.0], R, 1.0, eps=0.2)
        assert check.passed
        assert check.slack >= 0.0


def test_lemma_holds_on_the_plane_at_random_points():
    Z2 = lattice(2, 30, with_labels=False)
    rng = np.random.default_rng(3)
    for R in (1.0, 2.0, 4.0):
        for _ in range(5):
            x = rng.uniform(-0.5, 0.5, size=2)
            assert verify_lemma(Z2, x, R, 1.5).passed


def test_lemma_vacuous_for_empty_tail():
    check = verify_lemma(singleton([0.0]), [0.0], 1.0, 1.0, eps=0.25)
    assert check.tail == 0.0
    assert check.passed


def test_verify_raises_on_violated_hypotheses():
    Z = lattice(1, 20, with_labels=False)
    with pytest.raises(ValueError):
        verify_lemma(Z, [0.0], 2.0, 0.3)  # s <= d/2
    with pytest.raises(ValueError):
        verify_lemma(Z, [0.0], 2.0, 1.0, eps=0.7)  # eps >= r


def test_lemma_check_flags_instead_of_raising():
    Z = lattice(1, 20, with_labels=False)
    row = lemma_check(Z, [0.0], 2.0, 0.3)
    assert not row.hypothesis_ok
    assert not row.passed
    assert "hypothesis violated" in row.note


def test_report_statistics_and_csv(tmp_path):
    Z = lattice(1, 100, with_labels=False)
    rows = [lemma_check(Z, [x], R, s)
            for x in (0.0, 0.4) for R in (1.0, 2.0) for s in (1.0, 0.2)]
    report = TailSumReport(rows=tuple(rows))
    assert report.pass_rate == 1.0  # flagged rows do not count against it
    assert report.worst_slack >= 0.0
    out = tmp_path / "report.csv"
    report.write_csv(out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == ("d,s,R,eps,x1,tail,bound,residual_estimate,"
                        "hypothesis_ok,pass,note")
    assert len(lines) == len(rows) + 1


def test_residual_estimate_shrinks_with_extent():
    x = [0.0]
    small = truncation_residual_estimate(lattice(1, 50, with_labels=False), x, 1.0)
    big = truncation_residual_estimate(lattice(1, 500, with_labels=False), x, 1.0)
    assert big < small
    # integral-comparison scale for the line at s = 1: 2 * rho0^(-1)
    assert big == pytest.approx(2.0 / 500.0, rel=1e-9)


# --- decay-exponent fits ----------------------------------------------------------


def test_line_tail_decays_at_minus_one():
    # the abscissa is log(1+R), so the asymptotic slope d-2s only emerges
    # for cutoffs well above 1; small cutoffs bias the fit steep
    Z = lattice(1, 16000, with_labels=False)
    fit = tail_exponent_fit(Z, [0.0], [16.0, 32.0, 64.0, 128.0], 1.0)
    assert fit.slope == pytest.approx(-1.0, abs=0.1)
    assert fit.target == pytest.approx(-1.0)
    assert fit.passed


def test_plane_tail_decays_at_minus_two():
    Z2 = lattice(2, 700, with_labels=False)
    fit = tail_exponent_fit(Z2, [0.0, 0.0], [8.0, 16.0, 32.0, 64.0], 2.0)
    assert fit.slope == pytest.approx(-2.0, abs=0.15)
    assert fit.passed


def test_scaling_the_set_preserves_the_exponent():
    R_list = [2.0, 4.0, 8.0, 16.0, 32.0]
    base = tail_exponent_fit(lattice(1, 4000, with_labels=False),
                             [0.0], R_list, 1.0)
    scaled = tail_exponent_fit(lattice(1, 4000, spacing=2.0, with_labels=False),
                               [0.0], R_list, 1.0)
    assert scaled.slope == pytest.approx(base.slope, abs=0.1)


def test_fit_rejects_bad_sweeps():
    Z = lattice(1, 4000, with_labels=False)
    with pytest.raises(ValueError):
        tail_exponent_fit(Z, [0.0], [2.0, 4.0, 8.0], 1.0)  # too few
    with pytest.raises(ValueError):
        tail_exponent_fit(Z, [0.0], [2.0, 4.0, 4.0, 8.0], 1.0)  # not increasing


def test_fit_rejects_undersized_sets():
    # truncation residual at R = 16 is not < 1% of the tail on a tiny set
    with pytest.raises(ValueError):
        tail_exponent_fit(lattice(1, 30, with_labels=False),
                          [0.0], [2.0, 4.0, 8.0, 16.0], 1.0)


def test_fit_rejects_empty_tails():
    pair = UniformlyDiscreteSet(np.array([[0.0], [1.0]]), radius=0.5)
    with pytest.raises(ValueError):
        tail_exponent_fit(pair, [0.0], [2.0, 4.0, 8.0, 16.0], 1.0)
