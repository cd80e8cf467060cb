"""Dynamic-programming passage times, geodesics, boundary fields, interfaces.

Vertices are (i, j) = (column, row); paths step by e1 = (1, 0) or e2 = (0, 1).
``w1[i, j]`` is the weight of the horizontal edge into (i, j), ``w2[i, j]``
the vertical one.  The DP sweeps row by row; within a row the recursion
L(i, j) = min(L(i, j-1) + w2, L(i-1, j) + w1) collapses to a prefix minimum,
so a field costs O(width * height) with one vectorized pass per row.

Tie convention: among minimizing paths we always follow the right-most
geodesic, the one that takes its e1 steps as early as possible.  Walking
backward from the target this means preferring the vertical predecessor
whenever both achieve the minimum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .environment import Environment, ModelFamily, ModelKind, weight_rows
from .laws import WeightLaw
from .stores import InsufficientWindowError
from .windows import MaskedWindow, Window

E1 = (1, 0)
E2 = (0, 1)


@dataclass
class PassageField:
    """L(source, .) over the sub-rectangle [source, (width-1, height-1)]."""

    source: tuple[int, int]
    grid: np.ndarray          # shape (width, height); +inf below/left of source
    env: "Environment | None" = None

    def value(self, i: int, j: int) -> float:
        return float(self.grid[i, j])


@dataclass
class LatticePath:
    start: tuple[int, int]
    steps: list[tuple[int, int]]     # sequence of E1/E2, in travel order

    def vertices(self):
        x, y = self.start
        out = [(x, y)]
        for dx, dy in self.steps:
            x, y = x + dx, y + dy
            out.append((x, y))
        return out

    @property
    def end(self) -> tuple[int, int]:
        x, y = self.start
        return (x + sum(s[0] for s in self.steps), y + sum(s[1] for s in self.steps))


def _row_sweep(prev_row: np.ndarray, w1_row: np.ndarray, w2_row: np.ndarray) -> np.ndarray:
    """One DP row: entry costs A = prev + w2, then a running min over
    left-entry points: L_i = S_i + min_{l <= i} (A_l - S_l), S = cumsum w1."""
    A = prev_row + w2_row
    S = np.concatenate([[0.0], np.cumsum(w1_row[1:])])
    return S + np.minimum.accumulate(A - S)


def passage_field(env: Environment, source: tuple[int, int] = (0, 0),
                  method: str = "auto") -> PassageField:
    """DP solution of L(source, .).

    method "exact" evaluates min(L(i,j-1) + w2, L(i-1,j) + w1) literally, so
    every value is a minimum of left-to-right path sums and agrees bitwise
    with path enumeration and with the particle recursions.  method "sweep"
    vectorizes each row through a prefix minimum, identical up to rounding
    (~1 ulp) and the only sane choice for large grids.  "auto" picks exact
    for small grids.
    """
    si, sj = source
    if not (0 <= si < env.width and 0 <= sj < env.height):
        raise ValueError("source outside grid")
    if method == "auto":
        method = "exact" if env.width * env.height <= 250_000 else "sweep"
    grid = np.full((env.width, env.height), np.inf)
    row = np.full(env.width, np.inf)
    row[si] = 0.0
    if method == "exact":
        for i in range(si + 1, env.width):
            row[i] = row[i - 1] + env.w1[i, sj]
        grid[:, sj] = row
        w1, w2 = env.w1, env.w2
        for j in range(sj + 1, env.height):
            prev = grid[:, j - 1]
            cur = grid[:, j]
            cur[si] = prev[si] + w2[si, j]
            for i in range(si + 1, env.width):
                cur[i] = min(prev[i] + w2[i, j], cur[i - 1] + w1[i, j])
        return PassageField(source, grid, env)
    row[si + 1:] = np.cumsum(env.w1[si + 1:, sj])
    grid[:, sj] = row
    for j in range(sj + 1, env.height):
        row = _row_sweep(row, env.w1[:, j], env.w2[:, j])
        grid[:, j] = row
    return PassageField(source, grid, env)


def passage_times_to_targets(model: ModelKind, law: WeightLaw, width: int, height: int,
                             seed: int, targets: list[tuple[int, int]]) -> dict:
    """Streaming DP from the origin: one row of weights at a time.

    Matches passage_field on the materialized environment exactly (same seed
    and sweep), but never holds more than two rows, so n ~ thousands is fine.
    """
    need = {t[1]: [] for t in targets}
    for t in need:
        need[t] = [tt for tt in targets if tt[1] == t]
    w1r, w2r = weight_rows(model, law, width, seed, 0, 1)
    row = np.concatenate([[0.0], np.cumsum(w1r[0, 1:])])
    out = {}
    for t in need.get(0, []):
        out[t] = float(row[t[0]])
    for j in range(1, height):
        w1r, w2r = weight_rows(model, law, width, seed, j, j + 1)
        row = _row_sweep(row, w1r[0], w2r[0])
        for t in need.get(j, []):
            out[t] = float(row[t[0]])
    return out


def geodesic(field: PassageField, target: tuple[int, int]) -> LatticePath:
    """Right-most geodesic from field.source to target (backward trace).

    At ties the vertical predecessor wins, which puts e1 steps as early as
    possible along the travel direction; the trace is deterministic.
    """
    env = field.env
    if env is None:
        raise ValueError("field carries no environment")
    ti, tj = target
    si, sj = field.source
    if ti < si or tj < sj:
        raise ValueError("target not reachable from source")
    L = field.grid
    steps: list[tuple[int, int]] = []
    i, j = ti, tj
    while (i, j) != (si, sj):
        can_h = i > si
        can_v = j > sj
        if can_h and can_v:
            via_h = L[i - 1, j] + env.w1[i, j]
            via_v = L[i, j - 1] + env.w2[i, j]
            take_v = via_v <= via_h    # tie -> vertical predecessor (right-most)
        else:
            take_v = can_v
        if take_v:
            steps.append(E2)
            j -= 1
        else:
            steps.append(E1)
            i -= 1
    steps.reverse()
    return LatticePath((si, sj), steps)


def path_weight(env: Environment, path: LatticePath) -> float:
    total = 0.0
    x, y = path.start
    for dx, dy in path.steps:
        x, y = x + dx, y + dy
        total += env.w1[x, y] if dx else env.w2[x, y]
    return total


def brute_force_passage(env: Environment, source: tuple[int, int],
                        target: tuple[int, int]) -> float:
    """Minimum over explicit enumeration of all directed paths (oracle)."""
    dx = target[0] - source[0]
    dy = target[1] - source[1]
    best = np.inf
    for combo in itertools.combinations(range(dx + dy), dx):
        hset = set(combo)
        x, y = source
        tot = 0.0
        for s in range(dx + dy):
            if s in hset:
                x += 1
                tot += env.w1[x, y]
            else:
                y += 1
                tot += env.w2[x, y]
        best = min(best, tot)
    return float(best)


# ---------------------------------------------------------------------------
# boundary (line-to-point) passage fields
# ---------------------------------------------------------------------------

BOUNDARY_H = "horizontal"
BOUNDARY_V = "vertical"
BOUNDARY_A = "antidiagonal"


@dataclass
class BoundaryCondition:
    """A boundary line plus the increment window of its passage times.

    kind=horizontal: points (k, row), increments g(k+1,row)-g(k,row) left->right.
    kind=vertical:   points (col, -k) ordered DOWNWARD (top to bottom is
                     increasing index k, matching the V map), increments
                     g(col, j-1) - g(col, j) as j decreases.
    kind=antidiagonal: points (k, -k) + base, increments along increasing k.
    """

    kind: str
    increments: Window
    base: tuple[int, int] = (0, 0)


def boundary_passage_field(env: Environment, bc: BoundaryCondition, depth: int):
    """Line-to-point passage times on a strip of `depth` above/right of the line.

    Returns a list of MaskedWindow levels, level d holding the increments of
    L^Gamma along Gamma shifted d steps (the update-map outputs), plus the
    absolute passage times on the final level for identity checks.  Masks
    implement the truncation guarantees: blocking indices for vertical lines,
    store-emptying anchors for horizontal ones, one-entry shrink per step for
    the antidiagonal.  An empty valid range raises InsufficientWindowError.
    """
    from . import stores

    if depth < 1:
        raise ValueError("depth >= 1")
    levels = []
    if bc.kind == BOUNDARY_H:
        cur = MaskedWindow(bc.increments, np.ones(len(bc.increments), dtype=bool))
        row = bc.base[1]
        for d in range(1, depth + 1):
            ks = np.arange(cur.offset, cur.offset + len(cur))
            if ks[0] < 0 or ks[-1] + 1 >= env.width or row + d >= env.height:
                raise InsufficientWindowError("boundary strip leaves the grid")
            w = Window(env.w1[ks + 1, row + d], cur.offset)
            nxt = stores.h_map(Window(cur.values, cur.offset), w, anchor=stores.ANCHOR_AUTO)
            nxt.valid &= cur.valid
            _require_valid(nxt)
            levels.append(nxt)
            cur = nxt
        return levels
    if bc.kind == BOUNDARY_V:
        cur = MaskedWindow(bc.increments, np.ones(len(bc.increments), dtype=bool))
        col = bc.base[0]
        for d in range(1, depth + 1):
            ks = np.arange(cur.offset, cur.offset + len(cur))
            rows = bc.base[1] - ks
            if rows.min() < 0 or rows.max() >= env.height or col + d >= env.width:
                raise InsufficientWindowError("boundary strip leaves the grid")
            # increment index k spans rows (base_j - k) downward
            w = Window(env.w1[col + d, rows], cur.offset)
            nxt = stores.v_map(Window(cur.values, cur.offset), w)
            nxt.valid &= cur.valid
            _require_valid(nxt)
            levels.append(nxt)
            cur = nxt
        return levels
    if bc.kind == BOUNDARY_A:
        # with increments enumerated top-left to bottom-right the local update
        # is the tandem map in its reflected orientation, so run a_map on the
        # reversed windows (the stores-level map keeps the bottom-right-first
        # enumeration the worked store examples use)
        cur = MaskedWindow(bc.increments, np.ones(len(bc.increments), dtype=bool))
        for d in range(1, depth + 1):
            ks = np.arange(cur.offset, cur.offset + len(cur))
            ii = bc.base[0] + ks + d
            jj = bc.base[1] - ks
            if ii.min() < 0 or ii.max() >= env.width or jj.min() < 0 or jj.max() >= env.height:
                raise InsufficientWindowError("boundary strip leaves the grid")
            w = Window(env.w1[ii, jj][::-1], cur.offset)
            rev = stores.a_map(Window(cur.values[::-1], cur.offset), w)
            nxt = MaskedWindow(Window(rev.values[::-1].copy(), cur.offset),
                               rev.valid[::-1] & cur.valid)
            _require_valid(nxt)
            levels.append(nxt)
            cur = nxt
        return levels
    raise ValueError(f"unknown boundary kind {bc.kind!r}")


def _require_valid(mw: MaskedWindow) -> None:
    if not mw.valid.any():
        raise InsufficientWindowError("truncation guarantee exhausted the window")


def boundary_field_from_downright(env: Environment, g: dict, region) -> PassageField:
    """L^Gamma(x) = min_p g(p) + L(p, x) for a finite boundary dict {vertex: g}.

    Straight DP with the boundary values as sources; used by the idempotence
    and agreement checks rather than performance paths.
    """
    grid = np.full((env.width, env.height), np.inf)
    for (i, j), val in g.items():
        grid[i, j] = min(grid[i, j], val)
    for j in range(env.height):
        A = grid[:, j].copy()
        if j > 0:
            A = np.minimum(A, grid[:, j - 1] + env.w2[:, j])
        S = np.concatenate([[0.0], np.cumsum(env.w1[1:, j])])
        grid[:, j] = S + np.minimum.accumulate(A - S)
    return PassageField((0, 0), grid)


# ---------------------------------------------------------------------------
# competition interface
# ---------------------------------------------------------------------------

def first_step_labels(env: Environment, height: int) -> np.ndarray:
    """Label 1/2 per column of row `height`: does the right-most geodesic from
    the origin to (i, height) leave through e1 or e2?  Vectorized per row by
    propagating the label of the column where the path enters the row."""
    w1, w2 = env.w1, env.w2
    W = env.width
    L = np.concatenate([[0.0], np.cumsum(w1[1:, 0])])
    lab = np.ones(W, dtype=np.int8)
    lab[0] = 2   # entering a higher row at column 0 means the e2 step came first
    cols = np.arange(W)
    for j in range(1, height + 1):
        A = L + w2[:, j]
        S = np.concatenate([[0.0], np.cumsum(w1[1:, j])])
        B = A - S
        cm = np.minimum.accumulate(B)
        prev = np.concatenate([[np.inf], cm[:-1]])
        entered = B <= prev           # ties -> later column = vertical predecessor
        src = np.maximum.accumulate(np.where(entered, cols, -1))
        lab = lab[src]
        lab[0] = 2
        L = S + cm
    return lab


def competition_interface(env: Environment, n_max: int) -> np.ndarray:
    """r_n for n = 1..n_max: the last column of row n on the e2 side of the
    interface (the geodesic to (r, n) takes e1 first iff r > r_n).

    Grid width censors from above; r_n = width-1 means "at least this".
    """
    w1, w2 = env.w1, env.w2
    W = env.width
    L = np.concatenate([[0.0], np.cumsum(w1[1:, 0])])
    lab = np.ones(W, dtype=np.int8)
    lab[0] = 2
    cols = np.arange(W)
    out = np.empty(n_max, dtype=np.int64)
    for j in range(1, n_max + 1):
        A = L + w2[:, j]
        S = np.concatenate([[0.0], np.cumsum(w1[1:, j])])
        B = A - S
        cm = np.minimum.accumulate(B)
        prev = np.concatenate([[np.inf], cm[:-1]])
        entered = B <= prev
        src = np.maximum.accumulate(np.where(entered, cols, -1))
        lab = lab[src]
        lab[0] = 2
        L = S + cm
        ones = np.flatnonzero(lab == 1)
        out[j - 1] = (ones[0] - 1) if len(ones) else (W - 1)
    return out


def interface_rho_from_rn(r_n: np.ndarray) -> np.ndarray:
    """Invert r_n/(r_n+n) through xi(rho) to the critical mean parameter."""
    n = np.arange(1, len(r_n) + 1, dtype=float)
    xi2 = n / (r_n + n)
    s = np.sqrt(xi2)
    return s / (1.0 - s)


# ---------------------------------------------------------------------------
# limit shape
# ---------------------------------------------------------------------------

def limit_shape_exp1(s: float, t: float) -> float:
    """Time constant for Exp(1) horizontal weights: (sqrt(s+t) - sqrt(t))^2."""
    if s < 0 or t < 0:
        raise ValueError("first-quadrant directions only")
    return (np.sqrt(s + t) - np.sqrt(t)) ** 2


def limit_shape_exp1_gradient(s: float, t: float) -> tuple[float, float]:
    r = np.sqrt(s + t)
    rt = np.sqrt(t)
    ds = (r - rt) / r
    dt = -((r - rt) ** 2) / (rt * r) if t > 0 else np.inf
    return (float(ds), float(dt))


def limit_shape_estimate(model: ModelKind, law: WeightLaw, direction: tuple[float, float],
                         n: int, seed: int, replicas: int) -> np.ndarray:
    """Monte Carlo L(floor(n s), floor(n t))/n over independent replicas."""
    s, t = direction
    ti, tj = int(np.floor(n * s)), int(np.floor(n * t))
    vals = np.empty(replicas)
    for r in range(replicas):
        res = passage_times_to_targets(model, law, ti + 1, tj + 1,
                                       seed + 7919 * r, [(ti, tj)])
        vals[r] = res[(ti, tj)] / n
    return vals


def sjr_limit_shape_check(law: WeightLaw, alpha: float, directions, n: int, seed: int,
                          replicas: int) -> dict:
    """Empirical SJR time constant against max of its two degenerate shapes.

    The H-shape keeps the horizontal weights (zeroing verticals): SWFPP with
    Ber(alpha)-thinned weights; the V-shape is the reflected analogue.
    """
    report = {}
    from .laws import BerExp, Bernoulli, BerGeomPlus

    def thinned(p_keep):
        if isinstance(law, BerExp):
            return BerExp(law.p * p_keep, law.tau)
        if isinstance(law, Bernoulli):
            return Bernoulli(law.p * p_keep)
        if isinstance(law, BerGeomPlus):
            return BerGeomPlus(law.p * p_keep, law.a)
        raise ValueError("unsupported law for SJR check")

    law_h = thinned(alpha)
    law_v = thinned(1.0 - alpha)
    for d in directions:
        s, t = d
        sjr = limit_shape_estimate(ModelKind.sjr(alpha), law, d, n, seed, replicas)
        ell_h = limit_shape_estimate(ModelKind.swfpp(), law_h, d, n, seed + 1, replicas)
        # vertical-degenerate model = horizontal model in the reflected direction
        ell_v = limit_shape_estimate(ModelKind.swfpp(), law_v, (t, s), n, seed + 2, replicas)
        hv = max(ell_h.mean(), ell_v.mean())
        report[d] = {
            "sjr": float(sjr.mean()), "ell_h": float(ell_h.mean()),
            "ell_v": float(ell_v.mean()), "max_hv": float(hv),
            "ratio": float(sjr.mean() / hv) if hv > 0 else np.nan,
        }
    return report
