import math

import numpy as np
import pytest

from fpplab.laws import Exponential
from fpplab.rng import RngStream
from fpplab.stores import (ANCHOR_AUTO, BoundaryPolicy, NoAnchorError, Window,
                           a_kernel, a_map, diamond_update, h0_map, h_map,
                           reverse_diamond_exponential, reverse_square_bernoulli,
                           reverse_weights_a, sjr_kernel, sjr_outflux,
                           sjr_update, square_update, store_levels, v_kernel,
                           v_map)


def exp_win(rate, n, seed, stream=0):
    return Window(Exponential(rate).sample(RngStream(seed, stream), size=n))


# ---------------------------------------------------------------------------
# h_map
# ---------------------------------------------------------------------------

def test_h_map_worked_example():
    out = h_map(Window([1.0, 0.0, 2.0]), Window([0.0, 3.0, 1.0]))
    assert out.values.tolist() == [0.0, 1.0, 1.0]
    assert store_levels(np.array([1.0, 0, 2]), np.array([0.0, 3, 1])).tolist() == [0.0, 1.0, 0.0]


def test_h_map_zero_inputs():
    out = h_map(Window(np.zeros(10)), exp_win(1.0, 10, 1))
    assert np.all(out.values == 0.0)


def test_h_map_scan_matches_reference_loop():
    I = Exponential(2.0).sample(RngStream(5, 0), size=500)
    W = Exponential(1.0).sample(RngStream(5, 1), size=500)
    x = 0.0
    ref = []
    for k in range(500):
        ref.append(min(I[k] + x, W[k]))
        x = max(0.0, x + I[k] - W[k])
    out = h_map(Window(I), Window(W))
    assert np.allclose(out.values, ref, rtol=1e-9, atol=1e-12)


def test_h_map_auto_anchor_mask_and_error():
    I = Exponential(2.0).sample(RngStream(6, 0), size=1000)
    W = Exponential(1.0).sample(RngStream(6, 1), size=1000)
    mw = h_map(Window(I), Window(W), anchor=ANCHOR_AUTO)
    X = store_levels(I, W)
    first_empty = 1 + int(np.flatnonzero(X[1:] == 0.0)[0])
    assert not mw.valid[: first_empty].any()
    assert mw.valid[first_empty:].all()
    # overloaded store never empties
    with pytest.raises(NoAnchorError):
        h_map(Window(W + 1.0), Window(W * 0.5), anchor=ANCHOR_AUTO)


def test_h0_matches_empty_left():
    I = exp_win(2.0, 300, 7)
    W = exp_win(1.0, 300, 7, 1)
    assert np.array_equal(h0_map(I, W).values, h_map(I, W).values)


def test_h_output_never_exceeds_service():
    I = exp_win(1.5, 400, 8)
    W = exp_win(1.0, 400, 8, 1)
    assert np.all(h_map(I, W).values <= W.values)


# ---------------------------------------------------------------------------
# a_map
# ---------------------------------------------------------------------------

def test_a_map_worked_example():
    Y = Window([2.0, 1.0], left=BoundaryPolicy.explicit(0.0))
    W = Window([3.0, 0.5], left=BoundaryPolicy.explicit(0.0))
    out = a_map(Y, W)
    assert out.values.tolist() == [0.0, 2.5]
    assert out.valid.all()


def test_a_map_zero_service_is_identity():
    Y = exp_win(1.0, 50, 9)
    out = a_map(Y, Window(np.zeros(50)))
    assert np.array_equal(out.values[1:], Y.values[1:])


def test_a_map_mass_conservation_exact():
    n = 100_000
    Y = Exponential(1.0).sample(RngStream(10, 0), size=n)
    W = Exponential(0.8).sample(RngStream(10, 1), size=n)
    Yp = a_kernel(Y, W, 0.0, 0.0)
    lhs = math.fsum(Yp[1:]) - math.fsum(Y[1:])
    rhs = min(Y[0], W[0]) - min(Y[-1], W[-1])
    assert abs(lhs - rhs) <= 1e-9 * abs(math.fsum(Y[1:]))


def test_maps_are_monotone_in_inputs():
    gen = np.random.default_rng(0)
    Y = gen.exponential(1.0, 200)
    W = gen.exponential(1.0, 200)
    bump = np.zeros(200)
    bump[77] = 0.35
    for f in (lambda a, b: a_kernel(a, b, 0.0, 0.0),
              lambda a, b: np.minimum(a + store_levels(a, b), b)):
        assert np.all(f(Y + bump, W) >= f(Y, W) - 1e-12)
        assert np.all(f(Y, W + bump) >= f(Y, W) - 1e-12)
    xp0, _ = v_kernel(Y, W)
    xp1, _ = v_kernel(Y + bump, W)
    ok = ~np.isnan(xp0) & ~np.isnan(xp1)
    assert np.all(xp1[ok] >= xp0[ok] - 1e-12)


# ---------------------------------------------------------------------------
# v_map
# ---------------------------------------------------------------------------

def test_v_map_worked_example():
    mw = v_map(Window([1.0, 2.0, 5.0]), Window([3.0, 1.0, 1.0]))
    assert mw.valid.tolist() == [True, True, False]
    assert mw.values[:2].tolist() == [0.0, 2.0]


def test_v_map_brute_force_against_particles():
    gen = np.random.default_rng(3)
    X = gen.integers(0, 4, 40).astype(float)
    W = gen.integers(0, 4, 40).astype(float)
    mw = v_map(Window(X), Window(W))
    # frontmost-first particle sweep with zero-extended data is exact where
    # a blocking index certifies the truncation
    pos = np.concatenate([[0.0], np.cumsum(X)])
    ext_pos = np.concatenate([pos, pos[-1] + np.arange(1, 61) * 0.0])
    ext_W = np.concatenate([W, np.zeros(60)])
    moved = ext_pos.copy()
    for k in range(len(ext_W) - 1, -1, -1):
        front = moved[k + 1] if k + 1 < len(moved) else np.inf
        moved[k] = min(ext_pos[k] + ext_W[k], front)
    gaps = np.diff(moved)[: len(X)]
    assert np.allclose(mw.values[mw.valid], gaps[mw.valid])


def test_v_map_huge_store_keeps_everything_valid():
    X = np.full(32, 50.0)
    W = Exponential(1.0).sample(RngStream(12, 0), size=32)
    mw = v_map(Window(X), Window(W))
    assert mw.valid[:-1].all()
    # inflow is just the next service when stores dwarf services
    from fpplab.stores import v_inflows
    J = v_inflows(X, W)
    assert np.allclose(J[:-1], W[1:])


# ---------------------------------------------------------------------------
# sjr update
# ---------------------------------------------------------------------------

def test_sjr_reduces_to_a_bitwise():
    n = 100_000
    Y = Exponential(1.0).sample(RngStream(13, 0), size=n)
    W = Exponential(0.9).sample(RngStream(13, 1), size=n)
    assert np.array_equal(sjr_kernel(Y, W, 0.0, 0.0)[1:], a_kernel(Y, W, 0.0, 0.0)[1:])


def test_sjr_annihilation_moves_negative_mass():
    Y = Window([-1.0, 2.0], left=BoundaryPolicy.explicit(0.0))
    W = Window([0.0, 0.0], left=BoundaryPolicy.explicit(0.0))
    out = sjr_update(Y, W)
    assert out.values.tolist() == [0.0, 1.0]


def test_sjr_signed_mass_flux_identity():
    gen = np.random.default_rng(5)
    Y = gen.normal(0, 1, 5000)
    W = gen.normal(0, 1, 5000)
    Yp = sjr_kernel(Y, W, 0.0, 0.0)
    lhs = math.fsum(Yp[1:]) - math.fsum(Y[1:])
    rhs = sjr_outflux(Y[0], W[0]) - sjr_outflux(Y[-1], W[-1])
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(math.fsum(np.abs(Y))))


# ---------------------------------------------------------------------------
# squares, diamonds, reverse weights
# ---------------------------------------------------------------------------

def test_square_diamond_worked_examples():
    assert square_update(1.0, 1.0, 3.0) == (2.0, 0.0)
    assert diamond_update(2.0, 1.0, 0.5) == (0.5, 2.5)


def test_square_conserves_total():
    gen = np.random.default_rng(1)
    # exact on integer-valued triples
    I, X, W = gen.integers(0, 20, (3, 1_000_000)).astype(float)
    Ip, Xp = square_update(I, X, W)
    assert np.array_equal(Ip + Xp, I + X)
    # to rounding on continuous triples
    I, X, W = gen.exponential(1.0, (3, 1_000_000))
    Ip, Xp = square_update(I, X, W)
    assert np.allclose(Ip + Xp, I + X, rtol=1e-15, atol=0.0)


def test_reverse_square_bernoulli_recovery():
    gen = np.random.default_rng(2)
    I = (gen.random(1_000_000) < 0.4).astype(float)
    X = gen.geometric(0.5, 1_000_000) - 1.0
    W = (gen.random(1_000_000) < 0.7).astype(float)
    Ip, Xp = square_update(I, X, W)
    Wp = reverse_square_bernoulli(I, X, W)
    Ir, Xr = square_update(Ip, Xp, Wp)   # the reversed square has the same form
    assert np.array_equal(Ir, I)
    assert np.array_equal(Xr, X)


def test_reverse_diamond_recovery_identities():
    gen = np.random.default_rng(3)
    # exact recovery on integer triples (the identity is exact arithmetic)
    I, Y, W = gen.integers(0, 20, (3, 1_000_000)).astype(float)
    Istar, Ystar = diamond_update(I, Y, W)
    Wstar = reverse_diamond_exponential(I, Y, W)
    assert np.array_equal(np.minimum(Ystar, Wstar), I)
    assert np.array_equal(Istar + np.maximum(Ystar - Wstar, 0.0), Y)
    # continuous triples recover to rounding
    I, Y, W = gen.exponential(1.0, (3, 1_000_000))
    Istar, Ystar = diamond_update(I, Y, W)
    Wstar = reverse_diamond_exponential(I, Y, W)
    assert np.allclose(np.minimum(Ystar, Wstar), I, rtol=1e-12, atol=0.0)
    assert np.allclose(Istar + np.maximum(Ystar - Wstar, 0.0), Y, rtol=1e-12, atol=0.0)
    # worked example: (I, Y, W) = (0.5, 2, 1) -> W* = 0.5
    assert reverse_diamond_exponential(0.5, 2.0, 1.0) == 0.5


def test_reverse_weights_a_recovers_input_entrywise():
    Y = exp_win(1.0, 4000, 14)
    W = exp_win(0.8, 4000, 14, 1)
    Ystar = a_map(Y, W).values
    Wstar = reverse_weights_a(Y, W)
    v = Wstar.values
    rec = np.maximum(Ystar[1:-1] - v[1:-1], 0.0) + np.minimum(Ystar[2:], v[2:])
    assert np.allclose(rec, Y.values[1:-1], rtol=1e-14, atol=0.0)
    # dominance with the stated equality pattern
    inflow = np.minimum(Y.values[:-1], W.values[:-1])
    assert np.all(v[1:] >= inflow)
    eq = v[1:] == inflow
    assert np.array_equal(eq, W.values[1:] <= Y.values[1:])
