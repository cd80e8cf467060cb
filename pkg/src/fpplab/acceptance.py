"""The acceptance battery: every quantitative claim the package commits to.

Each criterion function returns {"name", "passed", "detail"} and prints one
PASS/FAIL line.  Tolerances are pinned here and nowhere else; `budget`
rescales Monte Carlo sizes for quick runs (smoke) without touching the
normative desk tolerances -- only the desk budget is the acceptance gate.
"""

from __future__ import annotations

import math

import numpy as np

from . import asymptotics as asy
from . import experiments as ex
from . import multiline as ml
from . import particles as pt
from . import percolation as pc
from . import stats as st
from .environment import ModelKind, generate_environment
from .laws import BerExp, BerGeomPlus, Bernoulli, Exponential
from .rng import RngStream
from .stores import (a_kernel, a_map, h_map, sjr_kernel, ANCHOR_AUTO)
from .windows import BoundaryPolicy, Window

BUDGETS = {"smoke": 0.01, "desk": 1.0}


def _scale(n: int, budget: str) -> int:
    return max(64, int(n * BUDGETS[budget]))


def _report(name: str, passed: bool, detail: str) -> dict:
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return {"name": name, "passed": bool(passed), "detail": detail}


# ---------------------------------------------------------------------------

def criterion_1_exact_identities(budget: str = "desk", seed: int = 2026) -> list[dict]:
    out = []
    n = _scale(10_000, budget)

    # (a) H = shifted R on exponential windows
    rng = RngStream(seed, 10)
    worst = 0.0
    for i, (ri, rw) in enumerate([(2.0, 1.0), (1.4, 0.7), (3.0, 2.0)]):
        I = Window(Exponential(ri).sample(rng.split(i, 0), size=n))
        W = Window(Exponential(rw).sample(rng.split(i, 1), size=n))
        worst = max(worst, ml.h_equals_r_residual(I, W))
    out.append(_report("1a h=r residual", worst == 0.0, f"max residual {worst!r}"))

    # (b) intertwinings, exact arithmetic
    y1 = Window(Exponential(1.0).sample(rng.split(9, 0), size=n))
    y2 = Window(Exponential(1.25).sample(rng.split(9, 1), size=n))
    y3 = Window(Exponential(2.2).sample(rng.split(9, 2), size=n))
    ra = ml.intertwine_residual_a(y1, y2, y3)
    x1 = Window(Bernoulli(0.7).sample(rng.split(9, 3), size=n))
    x2 = Window(ml.invariant_marginal(ml.MAP_V, Bernoulli(0.7), 0.45).sample(rng.split(9, 4), size=n))
    x3 = Window(ml.invariant_marginal(ml.MAP_V, Bernoulli(0.7), 0.65).sample(rng.split(9, 5), size=n))
    rv = ml.intertwine_residual_v(x1, x2, x3)
    out.append(_report("1b intertwinings", ra == 0.0 and rv == 0.0,
                       f"A residual {ra!r}, V residual {rv!r}"))

    # (c) particle/passage-time identity on 100x100 grids
    side = max(20, int(100 * math.sqrt(BUDGETS[budget])))
    worst = 0.0
    for i, law in enumerate([Exponential(1.0), Bernoulli(0.6)]):
        env = generate_environment(ModelKind.swfpp(), law, side + 1, side + 1, seed + i)
        worst = max(worst, pt.passage_identity_residual(env, side, side))
    out.append(_report("1c particle identity", worst == 0.0, f"max residual {worst!r}"))

    # (d) A-map mass conservation + SJR bit-identity on long windows
    m = _scale(100_000, budget)
    Y = Exponential(1.0).sample(rng.split(11, 0), size=m)
    Wv = Exponential(0.8).sample(rng.split(11, 1), size=m)
    Yp = a_kernel(Y, Wv, 0.0, 0.0)
    lhs = math.fsum(Yp[1:]) - math.fsum(Y[1:])
    rhs = min(Y[0], Wv[0]) - min(Y[-1], Wv[-1])
    mass_ok = abs(lhs - rhs) <= 1e-9 * max(1.0, abs(math.fsum(Y[1:])))
    sjr_vals = sjr_kernel(Y, Wv, 0.0, 0.0)
    bit_ok = np.array_equal(sjr_vals[1:], Yp[1:])
    out.append(_report("1d mass + sjr", mass_ok and bit_ok,
                       f"mass err {abs(lhs - rhs):.3e}, bit-identical {bit_ok}"))

    # (e) DP equals brute force on all small grids
    ok = True
    worst = 0.0
    cases = 0
    for w in range(1, 12):
        for h in range(1, 13 - w):
            for j, law in enumerate([Exponential(1.0), Bernoulli(0.5), BerGeomPlus(0.6, 0.5)]):
                for model in [ModelKind.swfpp(), ModelKind.general(), ModelKind.sjr(0.5)]:
                    env = generate_environment(model, law, w + 1, h + 1,
                                               seed + 97 * w + h + j)
                    field = pc.passage_field(env)
                    bf = pc.brute_force_passage(env, (0, 0), (w, h))
                    diff = abs(field.grid[w, h] - bf)
                    worst = max(worst, diff)
                    ok &= diff == 0.0
                    cases += 1
    out.append(_report("1e dp=bruteforce", ok, f"{cases} grids, max diff {worst!r}"))
    return out


def criterion_2_invariance(budget: str = "desk", seed: int = 2026) -> list[dict]:
    out = []
    n = _scale(100_000, budget)
    families = [BerExp(0.7, 1.0), BerGeomPlus(0.6, 0.45), Bernoulli(0.7)]
    params = {BerExp: (0.5, 2.0), BerGeomPlus: (0.3, 0.7), Bernoulli: (0.3, 0.7)}
    all_ok = True
    fails = []
    cell = 0
    for fam in families:
        for mk in (ml.MAP_H, ml.MAP_V, ml.MAP_A):
            for p in params[type(fam)]:
                cell += 1
                res = ex.invariance_cell(mk, fam, p, n, seed + 13 * cell)
                if not res.passed:
                    fails.append((res.name, res.p_value))
                all_ok &= res.passed
    out.append(_report("2 single-map invariance (18 cells)", all_ok,
                       f"failures: {fails!r}" if fails else "all cells pass at alpha=1e-3"))

    window = _scale(200_000, budget)
    joint_ok = True
    detail = []
    for mk, fam, means in [
        (ml.MAP_H, BerExp(0.7, 1.0), (0.5, 0.35, 0.2)),
        (ml.MAP_V, Exponential(1.0), (0.9, 0.5, 0.25)),
        (ml.MAP_A, Exponential(1.0), (2.0, 1.0, 0.5)),
    ]:
        rep = ex.joint_invariance(mk, fam, means, window, seed + 5)
        ok = (all(r.passed for r in rep["marginals"])
              and rep["order_before"] and rep["order_after"])
        joint_ok &= ok
        detail.append(f"{mk}: marginals {[round(r.p_value, 5) for r in rep['marginals']]} "
                      f"order {rep['order_before']}/{rep['order_after']}")
    out.append(_report("2 joint 3-line invariance", joint_ok, "; ".join(detail)))
    return out


def criterion_3_critical_angle(budget: str = "desk", seed: int = 2026) -> list[dict]:
    out = []
    n = _scale(100_000, budget)
    rng = RngStream(seed, 20)
    ok = True
    ps = []
    for i, rho in enumerate((0.5, 1.0, 2.0)):
        law = ml.invariant_marginal(ml.MAP_V, Exponential(1.0), rho)
        x = law.sample(rng.split(i), size=n)
        zeros = int(np.sum(x == 0.0))
        from scipy.stats import binomtest
        p = binomtest(zeros, n, rho / (1.0 + rho)).pvalue
        ps.append(round(float(p), 5))
        ok &= p >= 1e-3
    out.append(_report("3 busemann zero-mass binomial", ok, f"p-values {ps}"))

    reps = _scale(10_000, budget)
    nn = 512 if budget == "desk" else 64
    res = ex.interface_cdf_counts(nn, (0.5, 1.0, 2.0), reps, seed)
    worst = 0.0
    freqs = {}
    for rho, hit in res["hits"].items():
        f = hit / reps
        freqs[rho] = round(f, 4)
        worst = max(worst, abs(f - rho / (1 + rho)))
    out.append(_report("3 interface cdf at n=512", worst <= 0.03,
                       f"freqs {freqs}, worst dev {worst:.4f} (tol 0.03)"))
    return out


def criterion_4_adjacent_ordering(budget: str = "desk", seed: int = 2026) -> list[dict]:
    reps = _scale(10_000, budget)
    res = ex.adjacent_ordering_counts(reps, seed)
    probs = res["counts"] / reps
    targets = np.array([1 / 3, 1 / 6, 1 / 2])
    devs = np.abs(probs - targets)
    ok = bool(np.all(devs <= 0.04))
    detail = (f"P(>,=,<) = {np.round(probs, 4).tolist()} vs (1/3, 1/6, 1/2); "
              f"devs {np.round(devs, 4).tolist()}; grid bias on P(=): "
              f"{probs[1] - 1 / 6:+.4f}; out-of-grid reads {res['out_of_grid']}")
    return [_report("4 adjacent angle ordering", ok, detail)]


def criterion_5_renewal_means(budget: str = "desk", seed: int = 2026) -> list[dict]:
    out = []
    n_gaps = _scale(1_000_000, budget)
    params = asy.step_probabilities(1.0, 2.0)
    rng = RngStream(seed, 30)
    Z = rng.generator().geometric(params.p_down_down, n_gaps).astype(np.int64)
    taus, _ = asy.sample_walk_tau(params, rng.split(1), int(Z.sum()),
                                  cap=10**8, allow_capped=True)
    gaps = np.add.reduceat(taus, np.concatenate([[0], np.cumsum(Z)])[:-1])
    mean = float(gaps.mean())
    target = asy.holding_mean_constant(1.0, 2.0)
    ok1 = abs(mean - target) <= 0.02 * target
    out.append(_report("5 band holding mean", ok1,
                       f"mean gap {mean:.4f} vs {target} (tol 2%)"))

    m = _scale(400_000, budget)
    dens_ok = True
    detail = []
    for i, rho in enumerate((0.5, 1.0, 2.0)):
        mv = ml.MeanVector((ml.invariant_mean(ml.MAP_V, Exponential(1.0), rho / 1.3),
                            ml.invariant_mean(ml.MAP_V, Exponential(1.0), rho)), ml.MAP_V)
        sample = ml.sample_multiline(mv, Exponential(1.0), m, seed + i)
        line = sample.trimmed(0.05)[1]
        freq = float(np.mean(line != 0.0))
        target = 1.0 / (1.0 + rho)
        dens_ok &= abs(freq - target) <= 0.01 * target
        detail.append(f"rho={rho}: {freq:.4f} vs {target:.4f}")
    out.append(_report("5 bernoulli density of {rho* >= rho}", dens_ok, "; ".join(detail)))
    return out


def criterion_6_sigma_series(budget: str = "desk", seed: int = 2026) -> list[dict]:
    out = []
    params = asy.step_probabilities(1.0, 1.0)
    ser = asy.sigma_series(params.beta, 10_000)
    n = _scale(1_000_000, budget)
    vals, _ = asy.sample_sigma(params, RngStream(seed, 40), n, cap=64, allow_capped=True)
    kmax = 50
    obs = np.bincount(np.minimum(vals, kmax + 1), minlength=kmax + 2)[1: kmax + 2].astype(float)
    probs = np.concatenate([ser[1: kmax + 1], [1.0 - ser[: kmax + 1].sum()]])
    res = st.chi_square(obs, probs * n, alpha=1e-3, name="sigma-chi2")
    out.append(_report("6 sigma series vs MC", res.passed,
                       f"chi2 {res.statistic:.1f} dof {res.meta['dof']} p {res.p_value:.5f}"))

    tail = ser[10_000] * 10_000 ** 1.5
    target = asy.sigma_tail_constant(params)
    ok = abs(tail - target) <= 0.02 * target
    out.append(_report("6 tail constant", ok, f"{tail:.5f} vs {target:.5f} (tol 2%)"))
    return out


def criterion_7_sigma_renewal(budget: str = "desk", seed: int = 2026,
                              replicas: int = 400) -> list[dict]:
    params = asy.step_probabilities(1.0, 1.0)
    n = _scale(10_000_000, budget)
    reps = replicas if budget == "desk" else 20
    counts = np.array([asy.sigma_renewal_count(params, n, RngStream(seed, 41).split(r))
                       for r in range(reps)], dtype=float)
    est = float(counts.mean() / math.sqrt(n))
    se = float(counts.std(ddof=1) / math.sqrt(reps) / math.sqrt(n))
    target = asy.sigma_renewal_constant(params)
    ok = abs(est - target) <= 0.10 * target
    return [_report("7 sigma renewal constant", ok,
                    f"U/sqrt(n) = {est:.4f} +- {se:.4f} vs {target:.4f} "
                    f"(tol 10%, {reps} replicas)")]


def criterion_8_convoy(budget: str = "desk", seed: int = 2026,
                       stderr_target: float = 0.02, max_replicas: int = 2000
                       ) -> list[dict]:
    n = _scale(1_000_000, budget)
    counts = []
    r = 0
    min_reps = 100 if budget == "desk" else 20
    while True:
        counts.append(len(asy.convoy_sample(1.0, n, RngStream(seed, 42).split(r))))
        r += 1
        if r >= min_reps:
            arr = np.asarray(counts, dtype=float) / math.sqrt(n)
            se = arr.std(ddof=1) / math.sqrt(r)
            if se <= stderr_target * arr.mean() or r >= max_replicas:
                break
    est, se = float(arr.mean()), float(se)
    cands = asy.convoy_constant_candidates(1.0)
    verdict = {k: abs(v - est) <= 3 * se for k, v in cands.items()}
    n_match = sum(verdict.values())
    ok = (se <= stderr_target * est) and n_match >= 1 and not (
        verdict["long"] and verdict["simplified"])
    detail = (f"density {est:.4f} +- {se:.4f} ({r} replicas); candidates "
              + ", ".join(f"{k}={v:.4f}[{'in' if verdict[k] else 'out'}]"
                          for k, v in cands.items()))
    return [_report("8 convoy density verdict", ok, detail)]


def criterion_9_branch(budget: str = "desk", seed: int = 2026) -> list[dict]:
    out = []
    reps = _scale(100_000, budget)
    t_evals = (0.25, 0.5, 0.75)
    res = ex.branch_marginal_counts(t_evals, reps, seed)
    ok = True
    ps = {}
    for t in t_evals:
        h = res["hists"][t]
        kmax = 24
        obs = np.concatenate([h[:kmax], [h[kmax:].sum()]]).astype(float)
        pk = t ** np.arange(kmax) * (1 - t)
        probs = np.concatenate([pk, [1.0 - pk.sum()]])
        r = st.chi_square(obs, probs * reps, alpha=1e-3, name=f"branch-{t}")
        ps[t] = round(float(r.p_value), 5)
        ok &= r.passed
    out.append(_report("9 branch marginals", ok, f"chi2 p-values {ps}"))

    Ns = (10**3, 10**4, 10**5, 10**6) if budget == "desk" else (10**3, 10**4)
    reps_ladder = {10**3: 400, 10**4: 200, 10**5: 80, 10**6: 40}
    growth = {}
    for N in Ns:
        reps_n = reps_ladder[N] if budget == "desk" else 12
        growth.update(asy.branch_growth_experiment((N,), reps_n, seed))
    ratios = [growth[int(N)]["over_log"] for N in Ns]
    in_band = all(0.05 <= r <= 1.5 for r in ratios)
    spread = max(ratios) - min(ratios)
    ses = [growth[int(N)]["stderr"] / math.log(N) for N in Ns]
    flat = spread <= 4 * max(ses) + 0.25
    out.append(_report("9 branch growth", in_band and flat,
                       f"B(N)/lnN = {[round(x, 3) for x in ratios]} over N={list(Ns)}; "
                       f"band [0.05, 1.5], spread {spread:.3f}"))
    return out


def criterion_10_limit_shape(budget: str = "desk", seed: int = 2026) -> list[dict]:
    out = []
    n = 2000 if budget == "desk" else 200
    reps = 20 if budget == "desk" else 5
    ok = True
    detail = []
    for s, t in ((1, 1), (2, 1), (1, 3)):
        vals = pc.limit_shape_estimate(ModelKind.swfpp(), Exponential(1.0), (s, t),
                                       n, seed, reps)
        target = pc.limit_shape_exp1(s, t)
        dev = abs(vals.mean() - target) / target
        ok &= dev <= 0.02
        detail.append(f"({s},{t}): {vals.mean():.5f} vs {target:.5f} ({dev:.2%})")
    out.append(_report("10 exp(1) limit shape", ok, "; ".join(detail)))

    rep = pc.sjr_limit_shape_check(Exponential(1.0), 0.5,
                                   [(1.0, 1.0), (2.0, 1.0), (1.0, 3.0)],
                                   n, seed + 1, max(4, reps // 2))
    worst = max(abs(v["ratio"] - 1.0) for v in rep.values())
    out.append(_report("10 sjr shape = max of parts", worst <= 0.05,
                       f"worst |ratio-1| = {worst:.4f} over {list(rep)}"))
    return out


def criterion_11_nested(budget: str = "desk", seed: int = 2026) -> list[dict]:
    window = _scale(100_000, budget)
    res = ex.nested_comparison((0.8, 0.5, 0.3), window, seed)
    ks_ok = all(r.passed for r in res["ks"])
    mom_ok = all(m["passed"] for m in res["moments"])
    worst_z = max(m["z"] for m in res["moments"])
    detail = (f"per-line KS p {[round(r.p_value, 5) for r in res['ks']]}, "
              f"max moment z {worst_z:.2f} (limit 3.29)")
    return [_report("11 nested H vs D", ks_ok and mom_ok, detail)]


CRITERIA = {
    "1": criterion_1_exact_identities,
    "2": criterion_2_invariance,
    "3": criterion_3_critical_angle,
    "4": criterion_4_adjacent_ordering,
    "5": criterion_5_renewal_means,
    "6": criterion_6_sigma_series,
    "7": criterion_7_sigma_renewal,
    "8": criterion_8_convoy,
    "9": criterion_9_branch,
    "10": criterion_10_limit_shape,
    "11": criterion_11_nested,
}


def run_all(budget: str = "desk", seed: int = 2026, only=None) -> list[dict]:
    results = []
    for key, fn in CRITERIA.items():
        if only and key not in only:
            continue
        results.extend(fn(budget=budget, seed=seed))
    n_pass = sum(r["passed"] for r in results)
    print(f"== acceptance: {n_pass}/{len(results)} checks passed ==")
    return results
