"""Branch process, convoys, highway counters, and renewal asymptotics.

The random-walk machinery lives on S_k = sum (X^2_j - X^1_j) with
Ber(q_i)Exp(rho_i) marginals; everything downstream (tau, sigma, convoy
holding times) is a stopping time of this walk.  Hitting times have infinite
mean in the equal-rate case, so every sampler takes an explicit step cap and
reports capped draws instead of silently truncating; renewal counters cap
each holding at the remaining horizon, which cannot change the count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .environment import Environment, ModelFamily
from .laws import BerExp, ParameterRangeError
from .multiline import MAP_V, MeanVector, invariant_mean, sample_multiline
from .rng import RngStream
from .stores import v_inflows
from .windows import Window


class CapExceededError(RuntimeError):
    def __init__(self, cap: int, count: int):
        self.cap = cap
        self.count = count
        super().__init__(f"{count} walk(s) not absorbed within {cap} steps")


# ---------------------------------------------------------------------------
# walk parameters
# ---------------------------------------------------------------------------

def q_of(rho: float) -> float:
    """P(a vertical increment at parameter rho is nonzero) = 1/(1+rho)."""
    return 1.0 / (1.0 + rho)


@dataclass(frozen=True)
class WalkParams:
    rho1: float
    rho2: float
    q1: float = field(init=False)
    q2: float = field(init=False)
    beta: float = field(init=False)
    p_up: float = field(init=False)
    p_flat: float = field(init=False)
    p_down: float = field(init=False)
    q_up: float = field(init=False)
    q_flat: float = field(init=False)
    p_down_down: float = field(init=False)

    def __post_init__(self):
        if self.rho1 <= 0 or self.rho2 <= 0:
            raise ParameterRangeError("rho parameters must be > 0")
        q1, q2 = q_of(self.rho1), q_of(self.rho2)
        p_up = (1 - q1) * q2 + q1 * q2 * self.rho1 / (self.rho1 + self.rho2)
        p_flat = (1 - q1) * (1 - q2)
        p_down = 1.0 - p_up - p_flat
        object.__setattr__(self, "q1", q1)
        object.__setattr__(self, "q2", q2)
        object.__setattr__(self, "beta", (self.rho1 * self.rho2) /
                           ((1 + self.rho1) * (1 + self.rho2)))
        object.__setattr__(self, "p_up", p_up)
        object.__setattr__(self, "p_flat", p_flat)
        object.__setattr__(self, "p_down", p_down)
        object.__setattr__(self, "q_up", p_up / (1.0 - p_down))
        object.__setattr__(self, "q_flat", p_flat / (1.0 - p_down))
        object.__setattr__(self, "p_down_down", (1 - q2) * q1 / p_down)


def step_probabilities(rho1: float, rho2: float) -> WalkParams:
    return WalkParams(rho1, rho2)


READING_STRICT = "strict"          # first step conditioned strictly positive;
                                   # counts the steps after it (GF-consistent)
READING_FLAT_STOPS = "flat_stops"  # first step conditioned >= 0; a flat first
                                   # step already sits at <= 0, so sigma = 1


def _walk_steps(params: WalkParams, shape, gen: np.random.Generator) -> np.ndarray:
    x2 = (gen.random(shape) < params.q2) * gen.standard_exponential(shape) / params.rho2
    x1 = (gen.random(shape) < params.q1) * gen.standard_exponential(shape) / params.rho1
    return x2 - x1


def _absorb(start: np.ndarray, params: WalkParams, gen: np.random.Generator,
            cap: int) -> tuple[np.ndarray, np.ndarray]:
    """Steps until S <= 0 from positive starting levels, blockwise, capped."""
    m = len(start)
    steps = np.full(m, cap, dtype=np.int64)
    capped = np.ones(m, dtype=bool)
    S = start.copy()
    idx = np.arange(m)
    base = 0
    while len(idx) and base < cap:
        block = int(np.clip(2_000_000 // max(len(idx), 1), 256, 2_000_000))
        block = min(block, cap - base)
        X = _walk_steps(params, (len(idx), block), gen)
        np.cumsum(X, axis=1, out=X)
        P = S[idx][:, None] + X
        hit = P <= 0.0
        anyhit = hit.any(axis=1)
        first = np.argmax(hit, axis=1)
        steps[idx[anyhit]] = base + first[anyhit] + 1
        capped[idx[anyhit]] = False
        S[idx[~anyhit]] = P[~anyhit, -1]
        idx = idx[~anyhit]
        base += block
    return steps, capped


def sample_sigma(params: WalkParams, rng: RngStream, n: int,
                 reading: str = READING_STRICT, cap: int = 10**8,
                 allow_capped: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Hitting times of (-inf, 0] after a non-negative first step.

    strict reading (default): condition the first step strictly positive and
    count the subsequent steps -- this is the variable whose generating
    function is the series in sigma_series.  flat_stops reading: condition
    the first step >= 0 and count all steps, so a flat first step gives 1.
    Returns (values, capped_mask); raises unless allow_capped.
    """
    gen = rng.generator()
    out = np.empty(n, dtype=np.int64)
    cap_mask = np.zeros(n, dtype=bool)
    if reading == READING_STRICT:
        # overshoot of a strictly positive step is Exp(rho2) by memorylessness
        start = gen.standard_exponential(n) / params.rho2
        out, cap_mask = _absorb(start, params, gen, cap)
    elif reading == READING_FLAT_STOPS:
        u = gen.random(n)
        up = u < params.q_up
        out = np.ones(n, dtype=np.int64)
        n_up = int(up.sum())
        start = gen.standard_exponential(n_up) / params.rho2
        st, cm = _absorb(start, params, gen, cap)
        out[up] += st
        cap_mask[up] = cm
    else:
        raise ValueError(f"unknown sigma reading {reading!r}")
    if cap_mask.any() and not allow_capped:
        raise CapExceededError(cap, int(cap_mask.sum()))
    return out, cap_mask


def sample_walk_tau(params: WalkParams, rng: RngStream, n: int,
                    cap: int = 10**8, allow_capped: bool = False
                    ) -> tuple[np.ndarray, np.ndarray]:
    """First strict drop of the walk from a running minimum.

    tau = 1 + sum of Geom0(p_down)-many flat_stops-sigma excursions: a down
    step from the minimum ends the wait, and every non-negative excursion
    must return to the minimum level first.
    """
    gen = rng.generator(start=1)
    Y = (gen.geometric(params.p_down, n) - 1).astype(np.int64)
    total = int(Y.sum())
    sig, cm = sample_sigma(params, rng.split(1), total,
                           reading=READING_FLAT_STOPS, cap=cap, allow_capped=True)
    out = np.ones(n, dtype=np.int64)
    sums = np.concatenate([[0], np.cumsum(sig)])
    pos = np.concatenate([[0], np.cumsum(Y)])
    out += (sums[pos[1:]] - sums[pos[:-1]]).astype(np.int64)
    cap_sums = np.concatenate([[0], np.cumsum(cm.astype(np.int64))])
    capped = (cap_sums[pos[1:]] - cap_sums[pos[:-1]]) > 0
    if capped.any() and not allow_capped:
        raise CapExceededError(cap, int(capped.sum()))
    return out, capped


# ---------------------------------------------------------------------------
# series machinery for sigma-tilde
# ---------------------------------------------------------------------------

def sigma_series(beta: float, K: int) -> np.ndarray:
    """Taylor coefficients p~_0..p~_K of (sqrt(1-bz)-sqrt(1-z))/(sqrt(1-bz)+sqrt(1-z)).

    Uses the rational form (2 - (1+b)z - 2 sqrt((1-z)(1-bz)))/((1-b)z) and the
    linear ODE recurrence for the square-root product, so the cost is O(K)
    with no convolutions.  Coefficients are probabilities: nonnegative,
    p~_0 = 0, partial sums increasing to 1.
    """
    if not 0.0 <= beta < 1.0:
        raise ParameterRangeError("beta must lie in [0, 1)")
    if K < 0:
        raise ParameterRangeError("K must be >= 0")
    g = np.zeros(K + 2)
    g[0] = 1.0
    if K + 1 >= 1:
        g[1] = -(1.0 + beta) / 2.0
    for k in range(1, K + 1):
        g[k + 1] = ((1.0 + beta) * (2 * k - 1) * g[k]
                    - 2.0 * beta * (k - 2) * g[k - 1]) / (2.0 * (k + 1))
    p = np.zeros(K + 1)
    if K >= 1:
        p[1:] = -2.0 * g[2:K + 2] / (1.0 - beta)
    return p


def sigma_tail_constant(params: WalkParams) -> float:
    """Leading constant of p~_k ~ c k^{-3/2}: c = 1/sqrt(pi (1 - beta))."""
    return 1.0 / math.sqrt(math.pi * (1.0 - params.beta))


def sigma_cf(beta: float, theta: float) -> complex:
    """Characteristic function of sigma-tilde, evaluated exactly."""
    z = np.exp(1j * theta)
    a = np.sqrt(1.0 - beta * z)
    b = np.sqrt(1.0 - z)
    return complex((a - b) / (a + b))


def erickson_limit(alpha: float, L: float) -> float:
    """Renewal-count constant for tails 1 - F(x) = L x^{-alpha} + o(x^{-alpha}):
    U(n)/n^alpha -> (1-alpha)/(L Gamma(1+alpha) Gamma(2-alpha))."""
    if not 0.0 < alpha < 1.0 or L <= 0:
        raise ParameterRangeError("need 0 < alpha < 1 and L > 0")
    return (1.0 - alpha) / (L * math.gamma(1.0 + alpha) * math.gamma(2.0 - alpha))


def sigma_renewal_constant(params: WalkParams) -> float:
    """U^s(n)/sqrt(n) limit for renewals with sigma holdings: sqrt(1-beta)/(q_up sqrt(pi))."""
    return math.sqrt(1.0 - params.beta) / (params.q_up * math.sqrt(math.pi))


def sigma_tail_L(params: WalkParams) -> float:
    """L with P(sigma > n) ~ L n^{-1/2} for the flat_stops sigma."""
    return 2.0 * params.q_up / math.sqrt(math.pi * (1.0 - params.beta))


# ---------------------------------------------------------------------------
# renewal counting and convoys
# ---------------------------------------------------------------------------

def renewal_count(hold_sampler, horizon: int, rng: RngStream) -> int:
    """Renewals in [0, horizon] given one at 0 (counted).

    hold_sampler(rng_stream, cap) returns a batch of holding times; any
    holding capped at `cap` >= remaining horizon + 1 only ever ends the scan,
    so capping cannot bias the count.
    """
    total, count, round_ = 0, 1, 0
    while True:
        s = hold_sampler(rng.split(round_), horizon - total + 1)
        cs = np.cumsum(s) + total
        m = int(np.searchsorted(cs, horizon, side="right"))
        count += m
        if m < len(cs):
            return count
        total = int(cs[-1])
        round_ += 1


def sigma_renewal_count(params: WalkParams, horizon: int, rng: RngStream) -> int:
    const = sigma_renewal_constant(params)

    def holds(rs, cap):
        # expected renewals left ~ const * sqrt(remaining); oversampling wastes
        # E[sigma ^ cap] ~ sqrt(cap) walk cells per extra draw
        batch = int(np.clip(1.3 * const * math.sqrt(cap) + 64, 64, 60000))
        v, _ = sample_sigma(params, rs, batch, reading=READING_FLAT_STOPS,
                            cap=int(cap), allow_capped=True)
        return v
    return renewal_count(holds, horizon, rng)


def convoy_sample(rho: float, n: int, rng: RngStream, batch: int = 512) -> np.ndarray:
    """Renewal points of the convoy through height n, conditioned on 0.

    Holding = sum of Geom_+(p_dd) independent tau(rho, rho) waits,
    p_dd = 2 rho/(1+2 rho); draws are capped at the remaining horizon
    (sound for point sets clipped to [0, n]).
    """
    params = WalkParams(rho, rho)
    p_dd = 2.0 * rho / (1.0 + 2.0 * rho)
    pts = [0]
    total, round_ = 0, 0
    while total <= n:
        rs = rng.split(round_)
        Z = rs.generator().geometric(p_dd, batch).astype(np.int64)
        taus, _ = sample_walk_tau(params, rs.split(1), int(Z.sum()),
                                  cap=n - total + 1, allow_capped=True)
        gaps = np.add.reduceat(taus, np.concatenate([[0], np.cumsum(Z)])[:-1])
        cs = np.cumsum(gaps) + total
        keep = cs <= n
        pts.append(cs[keep])
        if not keep.all():
            break
        total = int(cs[-1])
        round_ += 1
    return np.unique(np.concatenate([np.atleast_1d(p) for p in pts]).astype(np.int64))


def convoy_constant_candidates(rho: float) -> dict:
    """The three closed forms competing to be lim |C ∩ [0,n]|/sqrt(n).

    'long' is the displayed constant, 'simplified' its claimed unwrapping,
    'thinned' the renewal-thinning algebra (a Geom_+(p) compound multiplies
    the tail by 1/p, and Erickson's constant is inversely proportional to the
    tail, so the count scales by p -- not 1/p).  The Monte Carlo experiment
    adjudicates; they cannot all be right.
    """
    p = WalkParams(rho, rho)
    p_dd = 2.0 * rho / (1.0 + 2.0 * rho)
    long_form = (p.p_down * math.sqrt(1 - p.beta)
                 / (p_dd * (1 - p.p_down) * p.q_up * math.sqrt(math.pi)))
    simplified = (1 + 2 * rho) / (2 * rho * math.sqrt(math.pi * (1 + rho * rho)))
    thinned = 2 * rho / ((1 + rho) * math.sqrt(math.pi * (1 + 2 * rho)))
    return {"long": long_form, "simplified": simplified, "thinned": thinned}


def holding_mean_constant(rho1: float, rho2: float) -> float:
    """Ergodic mean gap of the two-sided parameter band: 1/(q(rho1) - q(rho2))."""
    return 1.0 / (q_of(rho1) - q_of(rho2))


def band_sample(rho1: float, rho2: float, n: int, rng: RngStream,
                batch: int = 1024) -> np.ndarray:
    """Renewal points with rho* in [rho1, rho2] through height n (rho1 < rho2)."""
    if not 0 < rho1 < rho2:
        raise ParameterRangeError("need 0 < rho1 < rho2")
    params = WalkParams(rho1, rho2)
    pts = [0]
    total, round_ = 0, 0
    while total <= n:
        rs = rng.split(round_)
        Z = rs.generator().geometric(params.p_down_down, batch).astype(np.int64)
        taus, _ = sample_walk_tau(params, rs.split(1), int(Z.sum()),
                                  cap=n - total + 1, allow_capped=True)
        gaps = np.add.reduceat(taus, np.concatenate([[0], np.cumsum(Z)])[:-1])
        cs = np.cumsum(gaps) + total
        keep = cs <= n
        pts.append(cs[keep])
        if not keep.all():
            break
        total = int(cs[-1])
        round_ += 1
    return np.unique(np.concatenate([np.atleast_1d(p) for p in pts]).astype(np.int64))


# ---------------------------------------------------------------------------
# branch process along the vertical axis
# ---------------------------------------------------------------------------

@dataclass
class JumpTrajectory:
    times: np.ndarray       # grid/jump parameters, increasing, in [0, 1)
    values: np.ndarray      # b at those parameters; nondecreasing integers

    def __post_init__(self):
        assert np.all(np.diff(self.times) > 0)
        assert np.all(np.diff(self.values) >= 0)

    def value_at(self, t: float) -> int:
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        if i < 0:
            return 0
        return int(self.values[i])

    def jumps(self) -> tuple[np.ndarray, np.ndarray]:
        keep = np.concatenate([[True], np.diff(self.values) > 0])
        return self.times[keep], self.values[keep]


def branch_jump_cdf(t: float, b: int, d: float) -> float:
    """P(next jump <= t | current value b, last jump at d), t in [d, 1)."""
    if t <= d:
        return 0.0
    return t ** b * (1.0 - (1.0 - t) / (1.0 - d))


def invert_branch_jump_cdf(u: float, b: int, d: float, tol: float = 1e-12) -> float:
    """Bisection inverse of branch_jump_cdf in t (monotone on [d, 1))."""
    lo, hi = d, 1.0 - 1e-16
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if branch_jump_cdf(mid, b, d) < u:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _geometric_grid(t_max: float, per_octave: int) -> np.ndarray:
    n_oct = max(1, int(math.ceil(-math.log2(max(1.0 - t_max, 1e-12)))))
    ks = np.arange(1, n_oct * per_octave + 1)
    ts = 1.0 - np.power(2.0, -ks / per_octave)
    return ts[ts <= t_max + 1e-15]


def _h_kernel_batch(I, W):
    D = I - W
    S = np.cumsum(D, axis=-1)
    S = np.concatenate([np.zeros(S.shape[:-1] + (1,)), S], axis=-1)[..., :-1]
    X = S - np.minimum.accumulate(S, axis=-1)
    return np.minimum(I + X, W)


def branch_grid_values(t_grid: np.ndarray, level_cap: int, rng: RngStream,
                       batch: int = 1, burn: int = 2000) -> np.ndarray:
    """b(t) at the grid parameters via the coupled multi-line construction.

    Line t carries the vertical-increment marginal with P(nonzero) = 1 - t;
    successive lines are chained through the store map, so the joint law at
    the grid times is exact.  b(t) is the first index at or above the origin
    where line t is nonzero (level_cap if none in window).  Windows carry a
    left burn-in so index 0 sees the stationary interior.
    """
    L = level_cap + burn
    bs = np.empty((batch, len(t_grid)), dtype=np.int64)
    J = None
    gen = rng.generator()
    for j, t in enumerate(t_grid):
        rho = t / (1.0 - t)
        q = 1.0 - t
        I = (gen.random((batch, L)) < q) * gen.standard_exponential((batch, L)) / rho
        J = I if J is None else _h_kernel_batch(I, J)
        nz = J[:, burn:] != 0.0
        hit = nz.any(axis=1)
        bs[:, j] = np.where(hit, np.argmax(nz, axis=1), level_cap)
    return bs


def branch_process_sample(level_cap: int, rng: RngStream, t_max: float | None = None,
                          per_octave: int = 8, burn: int = 2000) -> JumpTrajectory:
    """One trajectory of the branch process until it reaches level_cap
    (or passes t_max, if given).

    Sampled on a geometric grid of directions via the coupled multi-line
    chain; the value is monotone between grid points, so stopping once the
    value reaches the cap loses nothing below it.  The grid extends
    adaptively, one line at a time, holding only the current service line.
    """
    L = level_cap + burn
    gen = rng.generator()
    times = [0.0]
    values = [0]
    J = None
    k, b = 1, 0
    while b < level_cap:
        t = 1.0 - 2.0 ** (-k / per_octave)
        if t_max is not None and t > t_max:
            break
        if 1.0 - t < 1e-14:
            break
        rho = t / (1.0 - t)
        I = (gen.random(L) < (1.0 - t)) * gen.standard_exponential(L) / rho
        J = I if J is None else _h_kernel_batch(I, J)
        nz = np.flatnonzero(J[burn:] != 0.0)
        b_t = int(nz[0]) if len(nz) else level_cap
        b = max(b, b_t)
        times.append(t)
        values.append(b)
        k += 1
    return JumpTrajectory(np.asarray(times), np.asarray(values, dtype=np.int64))


def branch_count(traj: JumpTrajectory, N: int) -> int:
    """Distinct values realized strictly below N."""
    vals = np.unique(traj.values[traj.values < N])
    return int(len(vals))


def branch_growth_experiment(N_list, replicas, seed: int, per_octave: int = 6) -> dict:
    """Mean branch counts over the N-ladder, one trajectory per replica."""
    out = {}
    for i, N in enumerate(N_list):
        counts = np.empty(replicas, dtype=np.int64)
        for r in range(replicas):
            traj = branch_process_sample(N, RngStream(seed, 0).split(i, r),
                                         per_octave=per_octave,
                                         burn=min(2000, 2 * N))
            counts[r] = branch_count(traj, N)
        out[int(N)] = {"mean": float(counts.mean()),
                       "stderr": float(counts.std(ddof=1) / math.sqrt(replicas)),
                       "over_log": float(counts.mean() / math.log(N))}
    return out


# ---------------------------------------------------------------------------
# Busemann geodesic fan and highways through a column
# ---------------------------------------------------------------------------

def busemann_geodesic_fan(env: Environment, rho_grid, height: int,
                          columns: int, seed: int) -> dict:
    """Semi-infinite-geodesic fan from the origin, clipped to the window.

    The joint vertical Busemann increments on the rightmost column come from
    the multi-line construction (V family); each step left propagates them
    through the low-index-first tandem update using the environment weights of
    that column, keeping the internal horizontal increments.  A direction's
    geodesic then climbs while its vertical increment vanishes and steps right
    otherwise.  Returns the fan paths, per-column visit counts, and the
    horizontal-increment tightness check mask.
    """
    if env.model.family is not ModelFamily.SWFPP:
        raise ParameterRangeError("geodesic fan requires an SWFPP environment")
    rho_grid = np.asarray(sorted(rho_grid), dtype=float)
    margin = 4 * columns + 64
    L = height + margin
    if L > env.height or columns + 1 > env.width:
        raise ParameterRangeError("environment too small for the fan window")
    means = tuple(invariant_mean(MAP_V, BerExp(1.0, 1.0), r) for r in rho_grid)
    mv = MeanVector(tuple(sorted(means, reverse=True)), MAP_V)
    sample = sample_multiline(mv, BerExp(1.0, 1.0), L, seed)
    nlines = len(rho_grid)

    # columns indexed c = columns (rightmost, Busemann input) down to 0;
    # B2[c][k] = vertical increment of column c spanning heights [k, k+1)
    B2 = {columns: sample.lines}
    Ih = {}   # Ih[c][k] = horizontal increment into column c+1 at height k
    cur = sample.lines
    for c in range(columns, 0, -1):
        w = env.w1[c, :L]           # weights entering column c from column c-1
        J = v_inflows(cur, np.broadcast_to(w, cur.shape))
        nxt = np.maximum(cur + J - w, 0.0)
        Ih[c - 1] = J
        B2[c - 1] = nxt
        cur = nxt
    paths = []
    visits = np.zeros((columns + 1, height), dtype=np.int64)
    visits[0, 0] = nlines
    tight = []
    for i in range(nlines):
        c, h = 0, 0
        path = [(0, 0)]
        while h < height - 1 and c < columns:
            vert = B2[c][i, h]
            if not np.isfinite(vert):
                break
            if vert == 0.0:
                h += 1
            else:
                # adaptedness: a right step must be tight for the horizontal
                # increment; the suffix-scan inflow at array slot h-1 is the
                # horizontal increment at height h
                if h >= 1 and np.isfinite(Ih[c][i, h - 1]):
                    tight.append(bool(np.isclose(Ih[c][i, h - 1], env.w1[c + 1, h],
                                                 rtol=1e-9, atol=1e-12)))
                c += 1
            visits[c, h] += 1
            path.append((c, h))
        paths.append(path)
    return {"paths": paths, "visits": visits,
            "tightness": np.asarray(tight, dtype=bool),
            "rho_grid": rho_grid}


def highways_column_count(fan: dict, k: int, n: int) -> int:
    """A_k(n): distinct fan vertices in column k up to height n."""
    visits = fan["visits"]
    return int(np.count_nonzero(visits[k, :n]))
