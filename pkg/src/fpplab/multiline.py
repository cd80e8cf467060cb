"""Multi-line invariant distributions, LPP duality, and identity verifiers.

The single-site invariant marginals live in one table keyed by the weight
family and the map: with weights W and the table law at the matching
parameter, one update application leaves the marginal unchanged.  Iterating
the store map over independent table-law inputs with decreasing means builds
the jointly invariant multi-line distribution; its lines are coupled
monotonically (each line is the previous line's store output, hence entrywise
dominated by it).

The identity verifiers (H = shifted R, the two intertwinings) evaluate both
sides in exact rational arithmetic -- float64 inputs are dyadic rationals, and
the maps only add, subtract, and compare -- so "residual is zero" means zero,
not small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import stores
from .laws import (BerExp, BerGeomPlus, Bernoulli, Geom0, ParameterRangeError,
                   WeightLaw)
from .rng import RngStream
from .stores import NoAnchorError
from .windows import MaskedWindow, Window

MAP_H, MAP_V, MAP_A = "H", "V", "A"


# ---------------------------------------------------------------------------
# the invariant-marginal table
# ---------------------------------------------------------------------------

def invariant_marginal(map_kind: str, weight_law: WeightLaw, param: float) -> WeightLaw:
    """Product-measure marginal left invariant by one update map application.

    `param` is the table parameter (rho >= 0 for the exponential family,
    c in [0, 1] for the discrete ones); it is not the mean -- see
    invariant_mean / param_for_mean for the conversion.
    """
    if isinstance(weight_law, BerExp):
        p, a = weight_law.p, weight_law.tau
        rho = param
        if rho < 0:
            raise ParameterRangeError("rho must be >= 0")
        if map_kind == MAP_H:
            return BerExp(a * p / (a + (1.0 - p) * rho), a + rho)
        if rho == 0.0:
            raise ParameterRangeError("V/A rows need rho > 0")
        if map_kind == MAP_V:
            return BerExp(a / (a + rho), rho)
        if map_kind == MAP_A:
            return BerExp(a / (a + (1.0 - p) * rho), rho)
    elif isinstance(weight_law, BerGeomPlus):
        p, a = weight_law.p, weight_law.a
        c = param
        if not 0.0 <= c <= 1.0:
            raise ParameterRangeError("c must lie in [0, 1]")
        ac = a * (1.0 - c)
        if map_kind == MAP_H:
            return BerGeomPlus(ac * p / (ac + c * (1.0 - p)), ac + c) if c > 0 \
                else BerGeomPlus(p, a)
        if c == 0.0:
            raise ParameterRangeError("V/A rows need c > 0")
        if map_kind == MAP_V:
            return BerGeomPlus(ac / (ac + c), c)
        if map_kind == MAP_A:
            # drop the weight-law p from the H-row numerator, as in the
            # exponential family; this is the exact fixed point (the naive
            # (a(1-c)+cp)/(a(1-c)+c) fails the one-step pmf identity)
            return BerGeomPlus(ac / (ac + c * (1.0 - p)), c)
    elif isinstance(weight_law, Bernoulli):
        p = weight_law.p
        c = param
        if not 0.0 <= c <= 1.0:
            raise ParameterRangeError("c must lie in [0, 1]")
        if map_kind == MAP_H:
            return Bernoulli((1.0 - c) * p / (1.0 - c * p)) if c < 1.0 else Bernoulli(1e-300)
        if c == 0.0 or c == 1.0:
            raise ParameterRangeError("V/A rows need c in (0, 1)")
        if map_kind == MAP_V:
            return Geom0(c)
        if map_kind == MAP_A:
            # same pattern: (1-c)/(1-cp) is the exact fixed-point mass at
            # nonzero; verified by direct pmf convolution
            return BerGeomPlus((1.0 - c) / (1.0 - c * p), c)
    raise ParameterRangeError(
        f"no table row for {type(weight_law).__name__} / map {map_kind!r}")


def invariant_mean(map_kind: str, weight_law: WeightLaw, param: float) -> float:
    return invariant_marginal(map_kind, weight_law, param).mean()


def param_for_mean(map_kind: str, weight_law: WeightLaw, mean: float) -> float:
    """Invert the (strictly monotone) param -> mean map of one table row."""
    if mean <= 0.0:
        raise ParameterRangeError("mean must be > 0")
    if isinstance(weight_law, BerExp) and map_kind == MAP_V:
        # mean = a / (rho (a + rho)): closed form
        a = weight_law.tau
        rho = (-a * mean + math.sqrt(a * a * mean * mean + 4.0 * a * mean)) / (2.0 * mean)
        return rho
    lo, hi = 0.0, 1.0
    if isinstance(weight_law, BerExp):
        while invariant_mean(map_kind, weight_law, hi) > mean:
            hi *= 2.0
            if hi > 1e12:
                raise ParameterRangeError(f"mean {mean} unreachable")
        lo = 0.0
    else:
        lo, hi = 1e-12, 1.0 - 1e-12
        if invariant_mean(map_kind, weight_law, lo) < mean:
            raise ParameterRangeError(f"mean {mean} unreachable in this row")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if invariant_mean(map_kind, weight_law, mid) > mean:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# multi-line sampler
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeanVector:
    """Strictly decreasing line means for one map kind."""

    means: tuple
    map_kind: str = MAP_H

    def __post_init__(self):
        m = self.means
        if any(b >= a for a, b in zip(m, m[1:])) or m[-1] <= 0.0:
            raise ParameterRangeError("means must be strictly decreasing and positive")

    def __len__(self) -> int:
        return len(self.means)


@dataclass
class MultiLineSample:
    lines: np.ndarray        # (n, L) stacked J^1..J^n
    inputs: np.ndarray       # (n, L) the independent I^k fed in, for audit
    means: MeanVector
    offset: int
    valid_from: int          # absolute index from which every internal anchor held

    def line(self, k: int) -> Window:
        return Window(self.lines[k], self.offset)

    def trimmed(self, frac: float = 0.1) -> np.ndarray:
        n = self.lines.shape[1]
        a = max(self.valid_from - self.offset, int(frac * n))
        b = n - int(frac * n)
        return self.lines[:, a:b]


def sample_multiline(mean_vec: MeanVector, weight_law: WeightLaw, window_len: int,
                     seed: int, batch: int | None = None) -> MultiLineSample:
    """Iterated store construction J^1 = I^1, J^k = H(I^k, J^{k-1}).

    Inputs are independent table-law lines at the requested means.  The store
    recursions anchor empty at the left edge; valid_from reports the first
    index by which every internal recursion had emptied at least once, the
    auto-anchor point consumers should trim to.
    """
    n = len(mean_vec)
    B = 1 if batch is None else batch
    rng = RngStream(seed, 0)
    lines = np.empty((B, n, window_len))
    inputs = np.empty((B, n, window_len))
    for k, mean in enumerate(mean_vec.means):
        law = invariant_marginal(mean_vec.map_kind, weight_law,
                                 param_for_mean(mean_vec.map_kind, weight_law, mean))
        draws = law.sample(rng.split(k), size=B * window_len).reshape(B, window_len)
        inputs[:, k, :] = draws
    lines[:, 0, :] = inputs[:, 0, :]
    valid_from = 0
    for k in range(1, n):
        I = inputs[:, k, :]
        W = lines[:, k - 1, :]
        X = stores.store_levels(I, W)
        lines[:, k, :] = np.minimum(I + X, W)
        empt = X[..., 1:] == 0.0
        if not empt.any(axis=-1).all():
            raise NoAnchorError(f"line {k}: no emptying time in window")
        first_empty = np.argmax(empt, axis=-1) + 1
        valid_from = max(valid_from, int(first_empty.max()))
    if batch is None:
        return MultiLineSample(lines[0], inputs[0], mean_vec, 0, valid_from)
    return MultiLineSample(lines, inputs, mean_vec, 0, valid_from)


# ---------------------------------------------------------------------------
# LPP departure/reverse maps and the duality with H
# ---------------------------------------------------------------------------

def dr_kernels(Ibar: np.ndarray, Wbar: np.ndarray):
    """Workload M, departures D, reverse weights R for the max-plus queue.

    J_{k+1} = Wbar_k + (J_k - Ibar_k)^+ seeded idle at the left edge;
    D_k = Wbar_k + (Ibar_k - J_k)^+, R_k = Ibar_k ^ J_k, both valid from the
    second entry.  The workload recursion shares its float evaluation order
    with stores.store_levels, which is what makes the H = shifted R identity
    bitwise on shared data.
    """
    Ibar = np.asarray(Ibar)
    Wbar = np.asarray(Wbar)
    D = np.empty_like(Ibar)
    D[..., 0] = 0.0 * Ibar[..., 0]
    D[..., 1:] = Ibar[..., 1:] - Wbar[..., :-1]
    S = np.cumsum(-D, axis=-1)
    M = S - np.minimum.accumulate(S, axis=-1)        # M_k, M_0 = 0
    J = np.empty_like(Ibar)
    J[..., 0] = np.inf
    J[..., 1:] = Wbar[..., :-1] + M[..., :-1]
    dep = Wbar + np.maximum(Ibar - J, 0.0 * Ibar)
    rev = np.minimum(Ibar, J)
    return M, dep, rev


def lpp_d(I: Window, W: Window, anchor_auto: bool = True) -> MaskedWindow:
    """Departure process of the max-plus queue with interarrivals I, services W."""
    Iv, Wv, off = stores._aligned(I, W)
    M, dep, _ = dr_kernels(Iv, Wv)
    valid = np.ones(len(dep), dtype=bool)
    valid[0] = False
    if anchor_auto:
        idles = np.flatnonzero(M[1:] == 0.0)
        if len(idles) == 0:
            raise NoAnchorError("queue never idles in window")
        valid[: idles[0] + 1] = False
    return MaskedWindow(Window(dep, off), valid)


def lpp_r(I: Window, W: Window, anchor_auto: bool = True) -> MaskedWindow:
    """Reverse-weight process Ibar ^ Jbar of the same queue."""
    Iv, Wv, off = stores._aligned(I, W)
    M, _, rev = dr_kernels(Iv, Wv)
    valid = np.ones(len(rev), dtype=bool)
    valid[0] = False
    if anchor_auto:
        idles = np.flatnonzero(M[1:] == 0.0)
        if len(idles) == 0:
            raise NoAnchorError("queue never idles in window")
        valid[: idles[0] + 1] = False
    return MaskedWindow(Window(rev, off), valid)


def h_equals_r_residual(I: Window, W: Window) -> float:
    """max |H(I, W) - sigma_{-1} R(sigma_1 W, I)| over the common valid range.

    Exactly zero: both sides reduce to the same float operations in the same
    order once the input wiring is unwound.
    """
    H = stores.h_map(I, W, anchor=stores.ANCHOR_AUTO)
    shifted_w = Window(np.concatenate([[0.0], W.values[:-1]]), W.offset)
    R = lpp_r(shifted_w, I, anchor_auto=False)
    # (sigma_{-1} R)_k = R_{k+1}
    r_shift = R.values[1:]
    h_vals = H.values[:-1]
    both = H.valid[:-1] & R.valid[1:]
    both[0] = False
    if not both.any():
        raise NoAnchorError("no common valid range")
    return float(np.max(np.abs(h_vals[both] - r_shift[both])))


# ---------------------------------------------------------------------------
# exact-arithmetic intertwining verifiers
# ---------------------------------------------------------------------------

def _fracs(a) -> np.ndarray:
    return np.array([Fraction(float(x)) for x in np.asarray(a).ravel()], dtype=object)


def _h_exact(I, W):
    D = I - W
    S = np.concatenate([[Fraction(0)], np.cumsum(D)])[:-1]
    X = S - np.minimum.accumulate(S)
    return np.minimum(I + X, W), X


def _a_exact(Y, W):
    out = np.empty(len(Y), dtype=object)
    out[0] = Fraction(0)
    zero = Fraction(0)
    kept = np.maximum(Y - W, zero)
    inflow = np.minimum(Y[:-1], W[:-1])
    out[1:] = kept[1:] + inflow
    return out


def _v_exact(X, W):
    """(X', J, valid) with the suffix blocking mask."""
    n = len(X)
    J = np.empty(n, dtype=object)
    valid = np.zeros(n, dtype=bool)
    cur = None
    zero = Fraction(0)
    for k in range(n - 2, -1, -1):
        if W[k + 1] <= X[k + 1]:
            cur = W[k + 1]
        elif cur is not None:
            cur = min(W[k + 1], X[k + 1] + cur)
        if cur is not None:
            J[k] = cur
            valid[k] = True
    out = np.empty(n, dtype=object)
    for k in range(n):
        out[k] = max(zero, X[k] + J[k] - W[k]) if valid[k] else zero
    return out, J, valid


def _a_mirror_exact(Y, W):
    """The tandem update in its reflected orientation: keep (Y_k - W_k)^+,
    gain the k+1 neighbor's dispatch.  This is the orientation the antidiagonal
    passage-time increments actually follow, and the one the intertwining
    identity holds in; entry n-1 needs a right neighbor and is a sentinel."""
    out = np.empty(len(Y), dtype=object)
    zero = Fraction(0)
    out[-1] = zero
    kept = np.maximum(Y - W, zero)
    inflow = np.minimum(Y[1:], W[1:])
    out[:-1] = kept[:-1] + inflow
    return out


def intertwine_residual_a(Y1: Window, Y2: Window, Y3: Window) -> float:
    """A(H(Y3, Y2), Y1) vs H(A(Y3, W1), W2), exact rational arithmetic.

    Both A applications run in the reflected orientation (the update the
    antidiagonal boundary increments obey), W2 = A(Y2, Y1), and W1 is the
    per-site diamond reverse weight of that update serving the next site:
    W1_k = (Y2_k ^ Y1_k) + (Y1_{k-1} - Y2_{k-1})^+.  Exactly zero on the
    settled interior for atomless (exponential-family) inputs; requires
    means(Y1) >= means(Y2) > means(Y3) so the store stages anchor.
    """
    y1, y2, y3 = _fracs(Y1.values), _fracs(Y2.values), _fracs(Y3.values)
    n = len(y1)
    if not (len(y2) == len(y3) == n):
        raise ValueError("windows must be aligned")
    zero = Fraction(0)
    h32, X32 = _h_exact(y3, y2)
    lhs = _a_mirror_exact(h32, y1)                # valid through n-2
    w2 = _a_mirror_exact(y2, y1)                  # valid through n-2
    w1 = np.empty(n, dtype=object)
    w1[0] = zero
    w1[1:] = np.minimum(y2[1:], y1[1:]) + np.maximum(y1[:-1] - y2[:-1], zero)
    inner = _a_mirror_exact(y3, w1)               # valid on [1, n-2]
    rhs, X_r = _h_exact(inner[1:], w2[1:])        # anchored empty at index 1
    settle = max(_settle_index([X32]), 1 + _settle_index([X_r]))
    lo = max(2, settle)
    if lo >= n - 2:
        raise NoAnchorError("window too short to settle the anchors")
    diffs = [abs(lhs[k] - rhs[k - 1]) for k in range(lo, n - 2)]
    return float(max(diffs))


def intertwine_residual_v(X1: Window, X2: Window, X3: Window) -> float:
    """V(H(X3, X2), X1) vs H(V(X3, Z1), Z2) with Z2 = V(X2, X1) and Z1 the
    square reverse weights; Bernoulli-family (X1 in {0,1}) only, where the
    closed-form reverse weight is exact.  Exact integer arithmetic throughout.
    """
    x1, x2, x3 = _fracs(X1.values), _fracs(X2.values), _fracs(X3.values)
    if not set(float(v) for v in x1) <= {0.0, 1.0}:
        raise ParameterRangeError("the V intertwining check needs Bernoulli X1")
    n = len(x1)
    h32, X32 = _h_exact(x3, x2)
    lhs, _, lhs_valid = _v_exact(h32, x1)
    z2, Jv, z_valid = _v_exact(x2, x1)
    zero = Fraction(0)
    # square at site k-1 has inflow J_{k-1}, store x2_{k-1}, service x1_{k-1};
    # its reverse weight serves site k
    z1 = np.empty(n, dtype=object)
    z1_valid = np.zeros(n, dtype=bool)
    z1[0] = math.inf
    for k in range(1, n):
        if z_valid[k - 1]:
            I, X, W = Jv[k - 1], x2[k - 1], x1[k - 1]
            z1[k] = I + max(zero, W - (I + X))
            z1_valid[k] = True
        else:
            z1[k] = math.inf   # unknown: must not certify a blocking
    inner, _, inner_valid = _v_exact(x3, z1)
    inner_valid &= z1_valid
    rhs, X_r = _h_exact(inner, z2)
    settle = _settle_index([X32, X_r])
    ok = lhs_valid & inner_valid & z_valid
    ok[:settle] = False
    ok[0] = False
    if not ok.any():
        raise NoAnchorError("no settled common range")
    diffs = [abs(lhs[k] - rhs[k]) for k in np.flatnonzero(ok)]
    return float(max(diffs))


def _settle_index(store_histories) -> int:
    """First index from which every listed store recursion has emptied once."""
    settle = 1
    for X in store_histories:
        nz = [k for k in range(1, len(X)) if X[k] == 0]
        if not nz:
            raise NoAnchorError("a store stage never empties in the window")
        settle = max(settle, nz[0])
    return settle


# ---------------------------------------------------------------------------
# nested H tuple vs reversed-D tuple
# ---------------------------------------------------------------------------

def nested_h_tuple(rates, window_len: int, seed: int) -> np.ndarray:
    """(I^n, H^(2)(I^{n-1}, I^n), ..., H^(n)(I^1, ..., I^n)) for Exp(rate) lines."""
    n = len(rates)
    rng = RngStream(seed, 1)
    lines = [BerExp(1.0, r).sample(rng.split(i), size=window_len)
             for i, r in enumerate(rates)]
    out = np.empty((n, window_len))
    for k in range(1, n + 1):
        acc = lines[n - k]
        for m in range(n - k + 1, n):
            acc = stores.h_kernel(acc, lines[m])
        out[k - 1] = acc
    return out


def nested_d_tuple(rates, window_len: int, seed: int) -> np.ndarray:
    """(<-D^(n)(I^n..I^1), ..., <-D^(2)(I^2, I^1), I^1), reversed-queue side."""
    n = len(rates)
    rng = RngStream(seed, 2)
    lines = [BerExp(1.0, r).sample(rng.split(i), size=window_len)
             for i, r in enumerate(rates)]

    def back_d(A, B):
        _, dep, _ = dr_kernels(np.flip(A), np.flip(B))
        return np.flip(dep)

    out = np.empty((n, window_len))
    for k in range(1, n + 1):
        m = n - k + 1                     # tuple component k uses I^m..I^1
        acc = lines[0]
        for j in range(1, m):
            acc = back_d(lines[j], acc)
        out[k - 1] = acc
    return out


def nested_h_vs_d(rates, window_len: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Paired (independent) samples of the two n-tuples for distributional tests."""
    if any(b >= a for a, b in zip(rates, rates[1:])) or rates[-1] <= 0 or rates[0] >= 1:
        raise ParameterRangeError("rates must satisfy 1 > rho_1 > ... > rho_n > 0")
    return nested_h_tuple(rates, window_len, seed), nested_d_tuple(rates, window_len, seed + 1)
