"""Batched Monte Carlo engines behind the acceptance criteria and the CLI.

Each engine is registered with the stats runner so `run_experiment` can farm
replicas; the heavy ones carry their own internal batching because a replica
at desk scale is itself a large vectorized computation.
"""

from __future__ import annotations

import math

import numpy as np

from . import asymptotics as asy
from . import multiline as ml
from . import stats as st
from .laws import BerExp, WeightLaw
from .rng import RngStream
from .stores import a_map, h_map, store_levels, v_map, ANCHOR_AUTO
from .windows import Window


# ---------------------------------------------------------------------------
# competition interface at finite n
# ---------------------------------------------------------------------------

def interface_cdf_counts(n: int, rho_values, replicas: int, seed: int,
                         batch: int = 8, width: int | None = None) -> dict:
    """Count {rho*_hat <= rho} events from the interface position at height n.

    Exp(1) SWFPP; the geodesic-tree first-step labels are the right-most
    convention, and the interface r_n at height n decides every threshold
    event even when censored by the grid width.
    """
    rho_values = sorted(rho_values)
    thr = {r: int(math.ceil(n * ((1 + r) ** 2 / r ** 2 - 1.0))) for r in rho_values}
    W = width or (int(thr[rho_values[0]] * 1.25) + 64)
    hits = {r: 0 for r in rho_values}
    done = 0
    while done < replicas:
        B = min(batch, replicas - done)
        gen = RngStream(seed, 0).split(done).generator()
        w1 = gen.standard_exponential((B, n + 1, W))
        L = np.concatenate([np.zeros((B, 1)), np.cumsum(w1[:, 0, 1:], axis=1)], axis=1)
        lab = np.ones((B, W), dtype=np.int8)
        lab[:, 0] = 2
        cols = np.broadcast_to(np.arange(W), (B, W))
        for j in range(1, n + 1):
            S = np.concatenate([np.zeros((B, 1)), np.cumsum(w1[:, j, 1:], axis=1)], axis=1)
            Bx = L - S
            cm = np.minimum.accumulate(Bx, axis=1)
            prev = np.concatenate([np.full((B, 1), np.inf), cm[:, :-1]], axis=1)
            entered = Bx <= prev
            src = np.maximum.accumulate(np.where(entered, cols, -1), axis=1)
            lab = np.take_along_axis(lab, src, axis=1)
            lab[:, 0] = 2
            L = S + cm
        ones = lab == 1
        has = ones.any(axis=1)
        first = np.where(has, np.argmax(ones, axis=1), W)
        rn = first - 1          # censored at W - 1 when no label-1 in range
        rn[~has] = W - 1
        for r in rho_values:
            hits[r] += int(np.sum(rn >= thr[r]))
        done += B
    return {"hits": hits, "replicas": replicas, "thresholds": thr, "width": W}


# ---------------------------------------------------------------------------
# adjacent critical-angle ordering
# ---------------------------------------------------------------------------

def adjacent_ordering_counts(replicas: int, seed: int, grid_size: int = 64,
                             window: int = 384, batch: int = 256,
                             rho_lo: float = 0.02, rho_hi: float = 50.0) -> dict:
    """P(xi*(0) > / = / < xi*(e2)) estimated from the coupled multi-line field.

    The critical parameter at a height is the smallest grid rho whose line
    vanishes there (suffix structure from the monotone coupling); comparisons
    are in the angle ordering, which reverses the rho ordering.  Heights are
    read at the window midpoint; out-of-grid heights (no vanishing line, or
    rho* below the grid) contribute to the reported grid bias.
    """
    params = np.geomspace(rho_lo, rho_hi, grid_size)
    q = 1.0 / (1.0 + params)
    counts = np.zeros(3, dtype=np.int64)
    oob = 0
    h0 = window // 2
    done = 0
    while done < replicas:
        B = min(batch, replicas - done)
        gen = RngStream(seed, 1).split(done).generator()
        J = None
        i0 = np.full(B, grid_size, dtype=np.int64)
        i1 = np.full(B, grid_size, dtype=np.int64)
        got0 = np.zeros(B, dtype=bool)
        got1 = np.zeros(B, dtype=bool)
        for i in range(grid_size):
            I = (gen.random((B, window)) < q[i]) * gen.standard_exponential((B, window)) / params[i]
            J = I if J is None else _h_batch(I, J)
            z0 = (J[:, h0] == 0.0) & ~got0
            z1 = (J[:, h0 + 1] == 0.0) & ~got1
            i0[z0] = i
            i1[z1] = i
            got0 |= z0
            got1 |= z1
        oob += int((~got0).sum() + (~got1).sum())
        counts[0] += int(np.sum(i0 < i1))    # rho*(0) < rho*(e2): xi*(0) > xi*(e2)
        counts[1] += int(np.sum(i0 == i1))
        counts[2] += int(np.sum(i0 > i1))
        done += B
    return {"counts": counts, "replicas": replicas, "out_of_grid": oob,
            "grid_size": grid_size}


def _h_batch(I, W):
    X = store_levels(I, W)
    return np.minimum(I + X, W)


# ---------------------------------------------------------------------------
# invariance cells
# ---------------------------------------------------------------------------

def invariance_cell(map_kind: str, weight_law: WeightLaw, param: float,
                    n: int, seed: int, alpha: float = 1e-3) -> st.TestResult:
    """One table cell: i.i.d. invariant-marginal inputs, one update, KS/chi2."""
    margin = max(n // 8, 2000)
    L = n + 2 * margin
    law = ml.invariant_marginal(map_kind, weight_law, param)
    rng = RngStream(seed, 2)
    I = law.sample(rng.split(0), size=L)
    W = weight_law.sample(rng.split(1), size=L)
    if map_kind == ml.MAP_H:
        out = h_map(Window(I), Window(W), anchor=ANCHOR_AUTO)
    elif map_kind == ml.MAP_A:
        out = a_map(Window(I), Window(W))
    else:
        out = v_map(Window(I), Window(W))
    lo, hi = out.valid_slice()
    lo = max(lo, margin)
    hi = min(hi, L - margin)
    x = out.values[lo:hi]
    return st.ks_one_sample(x[:n] if len(x) > n else x, law, alpha=alpha,
                            name=f"{map_kind}/{type(weight_law).__name__}/{param}")


def joint_invariance(map_kind: str, weight_law: WeightLaw, means, window: int,
                     seed: int, alpha: float = 1e-3) -> dict:
    """Three-line joint invariance: marginals preserved by one shared update,
    monotone ordering exact before and after."""
    mv = ml.MeanVector(tuple(means), map_kind)
    sample = ml.sample_multiline(mv, weight_law, window, seed)
    rng = RngStream(seed, 3)
    Wv = weight_law.sample(rng.split(9), size=window)
    updated = []
    masks = []
    for k in range(len(mv)):
        line = Window(sample.lines[k])
        if map_kind == ml.MAP_H:
            mw = h_map(line, Window(Wv), anchor=ANCHOR_AUTO)
        elif map_kind == ml.MAP_A:
            mw = a_map(line, Window(Wv))
        else:
            mw = v_map(line, Window(Wv))
        updated.append(mw.values)
        masks.append(mw.valid)
    common = np.logical_and.reduce(masks)
    common[: max(sample.valid_from, window // 10)] = False
    common[-window // 10:] = False
    idx = np.flatnonzero(common)
    results = []
    for k, mean in enumerate(mv.means):
        law = ml.invariant_marginal(map_kind, weight_law,
                                    ml.param_for_mean(map_kind, weight_law, mean))
        results.append(st.ks_one_sample(updated[k][idx], law, alpha=alpha,
                                        name=f"joint-{map_kind}-line{k + 1}"))
    order_before = all(np.all(sample.lines[k - 1] >= sample.lines[k])
                       for k in range(1, len(mv)))
    order_after = all(np.all(updated[k - 1][idx] >= updated[k][idx])
                      for k in range(1, len(mv)))
    return {"marginals": results, "order_before": order_before,
            "order_after": order_after}


# ---------------------------------------------------------------------------
# branch marginals
# ---------------------------------------------------------------------------

def branch_marginal_counts(t_evals, replicas: int, seed: int,
                           per_octave: int = 8, burn: int = 768,
                           value_cap: int = 64, batch: int = 512) -> dict:
    """Histogram of b(t) at chosen grid times over the coupled chain."""
    base = asy._geometric_grid(max(t_evals), per_octave)
    grid = np.unique(np.concatenate([base, np.asarray(t_evals, dtype=float)]))
    cols = {t: int(np.searchsorted(grid, t)) for t in t_evals}
    hists = {t: np.zeros(value_cap + 1, dtype=np.int64) for t in t_evals}
    done = 0
    while done < replicas:
        B = min(batch, replicas - done)
        bs = asy.branch_grid_values(grid, value_cap, RngStream(seed, 4).split(done),
                                    batch=B, burn=burn)
        for t, c in cols.items():
            hists[t] += np.bincount(np.minimum(bs[:, c], value_cap),
                                    minlength=value_cap + 1)
        done += B
    return {"grid": grid, "hists": hists, "replicas": replicas}


# ---------------------------------------------------------------------------
# nested H vs D comparison
# ---------------------------------------------------------------------------

def nested_comparison(rates, window: int, seed: int, trim: float = 0.1,
                      alpha: float = 1e-3, block: int = 200) -> dict:
    """Distributional comparison of the two n-tuples: per-line two-sample KS
    plus lag-0/lag-1 cross-moment z-tests with batch-means errors."""
    H, D = ml.nested_h_vs_d(rates, window, seed)
    a = int(trim * window)
    b = window - a
    H = H[:, a:b]
    D = D[:, a:b]
    n = len(rates)
    ks = [st.ks_two_sample(H[k], D[k], alpha=alpha, name=f"nested-line{k + 1}")
          for k in range(n)]
    moments = []
    L = H.shape[1]
    for k in range(n):
        for k2 in range(k, n):
            for lag in (0, 1):
                ph = H[k, : L - lag] * H[k2, lag:]
                pd = D[k, : L - lag] * D[k2, lag:]
                mh, sh = _batch_means(ph, block)
                md, sd = _batch_means(pd, block)
                z = abs(mh - md) / math.sqrt(sh ** 2 + sd ** 2)
                moments.append({"lines": (k + 1, k2 + 1), "lag": lag,
                                "h": mh, "d": md, "z": z,
                                "passed": bool(z < 3.29)})
    return {"ks": ks, "moments": moments}


def _batch_means(x: np.ndarray, block: int) -> tuple[float, float]:
    m = len(x) // block
    means = x[: m * block].reshape(m, block).mean(axis=1)
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(m))
