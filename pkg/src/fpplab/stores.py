"""Tandem-store update maps and their local square/diamond pieces.

The three sequence maps move boundary passage-time increments one lattice
step, in store language:

* ``h_map``  -- one storage bin fed left-to-right: out_k = (I_k + X_k) ^ W_k,
  store X_{k+1} = (X_k + I_k - W_k)^+.
* ``a_map``  -- a tandem served high-index-first, strictly local:
  Y'_k = (Y_k - W_k)^+ + (Y_{k-1} ^ W_{k-1}).
* ``v_map``  -- a tandem served low-index-first; the inflow into bin k is the
  suffix recursion J_k = W_{k+1} ^ (X_{k+1} + J_{k+1}) and
  X'_k = (X_k + J_k - W_k)^+.

All maps are pure: inputs are never mutated.  Array kernels operate on the
last axis and broadcast over leading batch axes; the Window-level functions
add boundary policies and validity masks.

Exact-arithmetic note: every kernel uses only +, -, min, max in a fixed
left-to-right (or right-to-left) order, so integer-valued inputs stay exact
in float64, and identities that are exact in real arithmetic over this
evaluation order (H = shifted R, the intertwinings, recovery) hold bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .windows import BoundaryPolicy, MaskedWindow, PolicyKind, Window


class NoAnchorError(ValueError):
    """The window shows no store-emptying time: the mean condition

    (inputs lighter than service on average) cannot be certified here, so
    auto-anchored outputs would be meaningless."""


class InsufficientWindowError(ValueError):
    """The truncation guarantee fails for the requested range."""


# ---------------------------------------------------------------------------
# array kernels (batch over leading axes, sequence on the last axis)
# ---------------------------------------------------------------------------

def store_levels(I: np.ndarray, W: np.ndarray) -> np.ndarray:
    """X_k for the bin fed with I and served W, empty at the left edge.

    X_k = max_{l <= k} sum_{j=l}^{k-1} (I_j - W_j), computed as the running
    walk minus its running minimum, entirely in vector ops.
    """
    D = np.asarray(I, dtype=float) - np.asarray(W, dtype=float)
    S = np.cumsum(D, axis=-1)
    S = np.concatenate([np.zeros(S.shape[:-1] + (1,)), S], axis=-1)[..., :-1]
    return S - np.minimum.accumulate(S, axis=-1)


def h_kernel(I: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Store outputs with the left edge declared empty."""
    X = store_levels(I, W)
    return np.minimum(np.asarray(I, dtype=float) + X, W)


def a_kernel(Y: np.ndarray, W: np.ndarray, y_left, w_left) -> np.ndarray:
    """Local tandem update; (y_left, w_left) supply the k-1 neighbor of entry 0."""
    Y = np.asarray(Y, dtype=float)
    W = np.asarray(W, dtype=float)
    kept = np.maximum(Y - W, 0.0)
    prev_y = np.concatenate([np.broadcast_to(y_left, Y.shape[:-1] + (1,)), Y[..., :-1]], axis=-1)
    prev_w = np.concatenate([np.broadcast_to(w_left, W.shape[:-1] + (1,)), W[..., :-1]], axis=-1)
    return kept + np.minimum(prev_y, prev_w)


def v_inflows(X: np.ndarray, W: np.ndarray) -> np.ndarray:
    """J_k = min_{l >= k+1} (W_l + sum_{j=k+1}^{l-1} X_j), via a suffix min.

    The last entry (no suffix data) comes out +inf; callers mask it.  Entries
    are exact once a blocking index l (W_l <= X_l) exists in (k, end); before
    the first blocking index from the right the suffix min may still be an
    overestimate, which the mask in v_map accounts for.
    """
    X = np.asarray(X, dtype=float)
    W = np.asarray(W, dtype=float)
    T = np.cumsum(X, axis=-1)
    T = np.concatenate([np.zeros(T.shape[:-1] + (1,)), T], axis=-1)[..., :-1]
    # J_k = suffix-min_{l > k} (W_l + T_l) - T_{k+1}
    A = W + T
    rev = np.flip(A, axis=-1)
    sfx = np.flip(np.minimum.accumulate(rev, axis=-1), axis=-1)
    out = np.full_like(A, np.inf)
    out[..., :-1] = sfx[..., 1:] - T[..., 1:]
    return out


def v_kernel(X: np.ndarray, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(X', valid) where X'_k = (X_k + J_k - W_k)^+.

    valid[k] certifies a blocking index strictly right of k inside the window,
    which makes the suffix truncation exact (the paper-level guarantee made a
    runtime mask).
    """
    X = np.asarray(X, dtype=float)
    W = np.asarray(W, dtype=float)
    J = v_inflows(X, W)
    Xp = np.maximum(X + J - W, 0.0)
    blocking = W <= X
    has_block_right = np.flip(np.cumsum(np.flip(blocking, axis=-1), axis=-1), axis=-1) > 0
    valid = np.zeros_like(blocking)
    valid[..., :-1] = has_block_right[..., 1:]
    return np.where(valid, Xp, np.nan), valid


def sjr_kernel(Y: np.ndarray, W: np.ndarray, y_left, w_left) -> np.ndarray:
    """Signed-material tandem update.

    Positive bins push min(Y^+, W^+) forward; negative bins keep min(Y^-, W^-)
    and push the excess (Y^- - W^-)^+ forward as negative material; material
    of opposite signs annihilates on contact.  For Y, W >= 0 the arithmetic
    reduces term by term to a_kernel (bit-identical).
    """
    Y = np.asarray(Y, dtype=float)
    W = np.asarray(W, dtype=float)
    prev_y = np.concatenate([np.broadcast_to(y_left, Y.shape[:-1] + (1,)), Y[..., :-1]], axis=-1)
    prev_w = np.concatenate([np.broadcast_to(w_left, W.shape[:-1] + (1,)), W[..., :-1]], axis=-1)

    def pos(a):
        return np.maximum(a, 0.0)

    def neg(a):
        return np.maximum(-a, 0.0)

    kept = np.maximum(pos(Y) - pos(W), 0.0) - np.minimum(neg(Y), neg(W))
    inflow = np.minimum(pos(prev_y), pos(prev_w)) - np.maximum(neg(prev_y) - neg(prev_w), 0.0)
    return kept + inflow


def sjr_outflux(y, w) -> float:
    """Net signed material bin (y, w) pushes to its right neighbor."""
    yp, yn = max(y, 0.0), max(-y, 0.0)
    wp, wn = max(w, 0.0), max(-w, 0.0)
    return min(yp, wp) - max(yn - wn, 0.0)


# ---------------------------------------------------------------------------
# scalar square / diamond updates and reverse weights
# ---------------------------------------------------------------------------

def square_update(I, X, W):
    """(I', X') = ((I + X) ^ W, (I + X - W)^+); conserves I + X exactly."""
    I, X, W = np.asarray(I, float), np.asarray(X, float), np.asarray(W, float)
    s = I + X
    return np.minimum(s, W), np.maximum(s - W, 0.0)


def diamond_update(I, Y, W):
    """(I*, Y*) = (Y ^ W, I + (Y - W)^+)."""
    I, Y, W = np.asarray(I, float), np.asarray(Y, float), np.asarray(W, float)
    return np.minimum(Y, W), I + np.maximum(Y - W, 0.0)


def reverse_square_bernoulli(I, X, W):
    """Reverse weight for the square with {0,1}-valued service.

    W' = I + (W - (I + X))^+.  Recovery -- I = (I' + X') ^ W' and
    X = (I' + X' - W')^+ -- is an algebraic identity whenever W > I + X can
    only happen with X = 0 (true for W <= 1 and integer X, the Bernoulli
    world this is meant for).
    """
    I, X, W = np.asarray(I, float), np.asarray(X, float), np.asarray(W, float)
    return I + np.maximum(W - (I + X), 0.0)


def reverse_diamond_exponential(I, Y, W):
    """Reverse weight for the diamond, W* = I + (W - Y)^+.

    Recovery -- I = Y* ^ W* and Y = I* + (Y* - W*)^+ -- holds identically for
    all nonnegative inputs; the exponential family is where W* also has the
    service law, making the update reversible in distribution.
    """
    I, Y, W = np.asarray(I, float), np.asarray(Y, float), np.asarray(W, float)
    return I + np.maximum(W - Y, 0.0)


def reverse_weights_a(Y: Window, W: Window) -> MaskedWindow:
    """Per-site reverse weights for a_map(Y, W).

    Site k of the tandem is the diamond with inflow I_k = Y_{k-1} ^ W_{k-1},
    so W*_k = I_k + (W_k - Y_k)^+.  Running the A update on the reversed
    (Y*, W*) pair recovers Y entrywise (tested), and W*_{k+1} >= Y_k ^ W_k
    always, with equality exactly when W_{k+1} <= Y_{k+1}.
    """
    Yv, Wv, off = _aligned(Y, W)
    yl, wl, has_left = _left_neighbors(Y, W)
    prev_y = np.concatenate([[yl], Yv[:-1]])
    prev_w = np.concatenate([[wl], Wv[:-1]])
    inflow = np.minimum(prev_y, prev_w)
    vals = inflow + np.maximum(Wv - Yv, 0.0)
    valid = np.ones(len(vals), dtype=bool)
    if not has_left:
        vals[0] = 0.0
        valid[0] = False
    return MaskedWindow(Window(vals, off), valid)


# ---------------------------------------------------------------------------
# window-level maps
# ---------------------------------------------------------------------------

def _aligned(*windows: Window) -> tuple:
    offs = {w.offset for w in windows}
    lens = {len(w) for w in windows}
    if len(offs) != 1 or len(lens) != 1:
        raise ValueError("windows must be aligned (same offset and length)")
    return tuple(w.values for w in windows) + (windows[0].offset,)


def _left_neighbors(Y: Window, W: Window) -> tuple[float, float, bool]:
    """Neighbor values left of the windows, if the policies supply them."""
    try:
        return Y.left.neighbor(), W.left.neighbor(), True
    except (ValueError, IndexError):
        return 0.0, 0.0, False


ANCHOR_EMPTY_LEFT = "empty_at_left"
ANCHOR_AUTO = "auto"


def h_map(I: Window, W: Window, anchor: str = ANCHOR_EMPTY_LEFT) -> MaskedWindow:
    """Store output window; `anchor` fixes the unknown store level at the left edge.

    EMPTY_LEFT declares X = 0 at the window start (a boundary condition; all
    entries valid by definition).  AUTO treats the data as a slice of a
    longer stationary sequence: the recursion still starts from 0, but only
    entries at or after the first observed emptying time (X hits 0 strictly
    inside the window) are marked valid -- from such a time on the computed
    store coincides with the bi-infinite one whenever the true store emptied
    at or before it, which for subcritical inputs is the almost-sure case the
    window-level statistics rely on.  No emptying time at all signals the
    mean condition is violated on this window and raises NoAnchorError.
    """
    Iv, Wv, off = _aligned(I, W)
    X = store_levels(Iv, Wv)
    out = np.minimum(Iv + X, Wv)
    valid = np.ones(len(out), dtype=bool)
    if anchor == ANCHOR_AUTO:
        empt = np.flatnonzero(X[1:] == 0.0)
        if len(empt) == 0:
            raise NoAnchorError("no emptying time in window")
        valid[: empt[0] + 1] = False
    elif anchor != ANCHOR_EMPTY_LEFT:
        raise ValueError(f"unknown anchor {anchor!r}")
    return MaskedWindow(Window(out, off), valid)


def h0_map(I: Window, W: Window) -> Window:
    """One-sided store map: empty store at the first index."""
    if I.offset != W.offset or len(I) != len(W):
        raise ValueError("windows must be aligned")
    return Window(h_kernel(I.values, W.values), I.offset)


def a_map(Y: Window, W: Window) -> MaskedWindow:
    Yv, Wv, off = _aligned(Y, W)
    yl, wl, has_left = _left_neighbors(Y, W)
    out = a_kernel(Yv, Wv, yl, wl)
    valid = np.ones(len(out), dtype=bool)
    if not has_left:
        out[..., 0] = 0.0
        valid[0] = False
    return MaskedWindow(Window(out, off), valid)


def v_map(X: Window, W: Window) -> MaskedWindow:
    """Low-index-first tandem update with exact blocking-certified mask."""
    Xv, Wv, off = _aligned(X, W)
    vals, valid = v_kernel(Xv, Wv)
    vals = np.where(valid, vals, 0.0)
    return MaskedWindow(Window(vals, off), valid)


def v_map_with_inflows(X: Window, W: Window) -> tuple[MaskedWindow, np.ndarray]:
    """v_map plus the internal inflow sequence J (used by the geodesic fan)."""
    Xv, Wv, off = _aligned(X, W)
    J = v_inflows(Xv, Wv)
    vals, valid = v_kernel(Xv, Wv)
    vals = np.where(valid, vals, 0.0)
    return MaskedWindow(Window(vals, off), valid), J


def sjr_update(Y: Window, W: Window) -> MaskedWindow:
    Yv, Wv, off = _aligned(Y, W)
    yl, wl, has_left = _left_neighbors(Y, W)
    out = sjr_kernel(Yv, Wv, yl, wl)
    valid = np.ones(len(out), dtype=bool)
    if not has_left:
        out[..., 0] = 0.0
        valid[0] = False
    return MaskedWindow(Window(out, off), valid)
