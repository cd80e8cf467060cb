import numpy as np
import pytest

from fpplab import multiline as ml
from fpplab.laws import (BerExp, BerGeomPlus, Bernoulli, Exponential, Geom0,
                         ParameterRangeError)
from fpplab.rng import RngStream
from fpplab.stats import ks_one_sample, ks_two_sample
from fpplab.stores import NoAnchorError
from fpplab.windows import Window


def exp_win(rate, n, seed, stream=0):
    return Window(Exponential(rate).sample(RngStream(seed, stream), size=n))


# ---------------------------------------------------------------------------
# invariant marginal table
# ---------------------------------------------------------------------------

def test_table_exponential_rows():
    assert ml.invariant_marginal(ml.MAP_H, Exponential(1.0), 0.7) == BerExp(1.0, 1.7)
    law = ml.invariant_marginal(ml.MAP_V, Exponential(1.0), 0.7)
    assert law == BerExp(1.0 / 1.7, 0.7)
    law = ml.invariant_marginal(ml.MAP_A, BerExp(0.7, 1.0), 2.0)
    assert law.p == pytest.approx(1.0 / (1.0 + 0.3 * 2.0))
    assert law.tau == 2.0


def test_table_discrete_rows():
    law = ml.invariant_marginal(ml.MAP_A, Bernoulli(0.7), 0.4)
    assert law == BerGeomPlus((1 - 0.4) / (1 - 0.4 * 0.7), 0.4)
    law = ml.invariant_marginal(ml.MAP_V, Bernoulli(0.7), 0.4)
    assert isinstance(law, Geom0) and law.c == 0.4
    law = ml.invariant_marginal(ml.MAP_H, Bernoulli(0.7), 0.4)
    assert law.p == pytest.approx(0.6 * 0.7 / (1 - 0.4 * 0.7))


def test_table_rows_are_compatible_families():
    from fpplab.laws import compat_invariant
    w = BerExp(0.7, 1.0)
    vals = [compat_invariant(ml.invariant_marginal(ml.MAP_H, w, r)) for r in (0.3, 1.0, 4.0)]
    assert vals[0] == pytest.approx(vals[1]) == pytest.approx(vals[2])
    assert vals[0] == pytest.approx(compat_invariant(w))


def test_param_mean_roundtrip():
    for mk in (ml.MAP_H, ml.MAP_V, ml.MAP_A):
        for law in (BerExp(0.7, 1.0), Bernoulli(0.7), BerGeomPlus(0.6, 0.45)):
            for p in (0.2, 0.5):
                m = ml.invariant_mean(mk, law, p)
                assert ml.param_for_mean(mk, law, m) == pytest.approx(p, abs=1e-9)


# ---------------------------------------------------------------------------
# multi-line sampler
# ---------------------------------------------------------------------------

def test_mean_vector_validation():
    with pytest.raises(ParameterRangeError):
        ml.MeanVector((0.5, 0.5), ml.MAP_H)
    with pytest.raises(ParameterRangeError):
        ml.MeanVector((0.5, -0.1), ml.MAP_H)


def test_single_line_is_iid_marginal():
    mv = ml.MeanVector((0.4,), ml.MAP_H)
    s = ml.sample_multiline(mv, Exponential(1.0), 50_000, 7)
    law = ml.invariant_marginal(ml.MAP_H, Exponential(1.0),
                                ml.param_for_mean(ml.MAP_H, Exponential(1.0), 0.4))
    assert ks_one_sample(s.lines[0], law).passed


def test_multiline_monotone_coupling_exact():
    mv = ml.MeanVector((0.5, 0.35, 0.2), ml.MAP_H)
    s = ml.sample_multiline(mv, Exponential(1.0), 20_000, 8)
    assert np.all(s.lines[0] >= s.lines[1])
    assert np.all(s.lines[1] >= s.lines[2])


def test_multiline_marginals_pass_ks():
    mv = ml.MeanVector((0.5, 0.35, 0.2), ml.MAP_H)
    s = ml.sample_multiline(mv, Exponential(1.0), 120_000, 9)
    t = s.trimmed(0.1)
    for k, mean in enumerate(mv.means):
        law = ml.invariant_marginal(ml.MAP_H, Exponential(1.0),
                                    ml.param_for_mean(ml.MAP_H, Exponential(1.0), mean))
        assert ks_one_sample(t[k], law).passed, f"line {k}"


def test_multiline_no_anchor_raises():
    # near-critical pair on a short window: this seed's internal store never
    # empties, so the sampler must refuse rather than emit junk
    mv = ml.MeanVector((0.99999, 0.99998), ml.MAP_H)
    with pytest.raises(NoAnchorError):
        ml.sample_multiline(mv, Exponential(1.0), 64, 17)


# ---------------------------------------------------------------------------
# LPP maps, Burke, duality
# ---------------------------------------------------------------------------

def test_lpp_d_constant_inputs():
    I = Window(np.full(100, 2.5))
    W = Window(np.full(100, 2.5))
    out = ml.lpp_d(I, W, anchor_auto=False)
    assert np.all(out.values[1:] == 2.5)


def test_burke_output_marginal():
    # Exp(rho) arrivals, Exp(1) services, rho < 1: departures are Exp(rho)
    n = 120_000
    I = exp_win(0.6, n, 10, 0)
    W = exp_win(1.0, n, 10, 1)
    out = ml.lpp_d(I, W)
    lo, hi = out.valid_slice()
    x = out.values[lo + n // 10: hi - n // 10]
    assert ks_one_sample(x, Exponential(0.6)).passed


def test_h_equals_r_exactly_zero():
    for seed in (1, 2, 3):
        I = exp_win(2.0, 10_000, seed, 0)
        W = exp_win(1.0, 10_000, seed, 1)
        assert ml.h_equals_r_residual(I, W) == 0.0


def test_h_equals_r_zero_inputs():
    I = Window(np.zeros(500))
    W = exp_win(1.0, 500, 11)
    assert ml.h_equals_r_residual(I, W) == 0.0


def test_h_equals_r_detects_injected_mismatch():
    I = exp_win(2.0, 5_000, 12, 0)
    W = exp_win(1.0, 5_000, 12, 1)
    broken = Window(I.values.copy())
    broken.values[2_500] += 0.125
    from fpplab.stores import h_map, ANCHOR_AUTO
    h = h_map(I, W, anchor=ANCHOR_AUTO)
    h_broken = h_map(broken, W, anchor=ANCHOR_AUTO)
    assert np.max(np.abs(h.values - h_broken.values)) > 0.0


# ---------------------------------------------------------------------------
# intertwinings
# ---------------------------------------------------------------------------

def test_intertwine_a_exact_zero():
    for seed in (21, 22):
        y1 = exp_win(1.0, 6_000, seed, 0)
        y2 = exp_win(1.25, 6_000, seed, 1)
        y3 = exp_win(2.2, 6_000, seed, 2)
        assert ml.intertwine_residual_a(y1, y2, y3) == 0.0


def test_intertwine_a_zero_third_line():
    y1 = exp_win(1.0, 3_000, 23, 0)
    y2 = exp_win(1.25, 3_000, 23, 1)
    y3 = Window(np.zeros(3_000))
    assert ml.intertwine_residual_a(y1, y2, y3) == 0.0


def test_intertwine_v_exact_zero():
    for seed in (24, 25):
        r = RngStream(seed, 5)
        x1 = Window(Bernoulli(0.7).sample(r.split(0), size=6_000))
        x2 = Window(Geom0(0.45).sample(r.split(1), size=6_000))
        x3 = Window(Geom0(0.65).sample(r.split(2), size=6_000))
        assert ml.intertwine_residual_v(x1, x2, x3) == 0.0


def test_intertwine_v_requires_bernoulli_line():
    r = RngStream(26, 5)
    x1 = Window(Geom0(0.5).sample(r.split(0), size=500))
    x2 = Window(Geom0(0.45).sample(r.split(1), size=500))
    x3 = Window(Geom0(0.65).sample(r.split(2), size=500))
    with pytest.raises(ParameterRangeError):
        ml.intertwine_residual_v(x1, x2, x3)


def test_intertwine_a_bad_means_raise_not_lie():
    # means violating the ordering starve the anchors rather than mis-report
    y1 = exp_win(2.2, 800, 27, 0)
    y2 = exp_win(1.25, 800, 27, 1)
    y3 = exp_win(1.0, 800, 27, 2)      # heaviest line fed as the input
    with pytest.raises(NoAnchorError):
        ml.intertwine_residual_a(y1, y2, y3)


# ---------------------------------------------------------------------------
# nested H vs D
# ---------------------------------------------------------------------------

def test_nested_single_line_trivial():
    H, D = ml.nested_h_vs_d((0.5,), 4_000, 31)
    assert ks_two_sample(H[0], D[0]).passed


def test_nested_marginals_match_rates():
    rates = (0.8, 0.5, 0.3)
    H, D = ml.nested_h_vs_d(rates, 60_000, 32)
    a, b = 6_000, 54_000
    for k, want_rate in enumerate((0.3, 0.5, 0.8)):
        assert ks_one_sample(H[k][a:b], Exponential(want_rate)).passed, f"H line {k}"
        assert ks_one_sample(D[k][a:b], Exponential(want_rate)).passed, f"D line {k}"


def test_nested_rejects_bad_rates():
    with pytest.raises(ParameterRangeError):
        ml.nested_h_vs_d((0.5, 0.8), 100, 1)
    with pytest.raises(ParameterRangeError):
        ml.nested_h_vs_d((1.5, 0.5), 100, 1)
