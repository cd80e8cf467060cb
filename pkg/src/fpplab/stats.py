"""Statistical test primitives, the experiment runner, and result bundles.

Goodness-of-fit dispatch: continuous laws get the one-sample KS test with the
asymptotic Kolmogorov p-value; mixed laws (atom at zero + density) split into
an exact binomial test on the atom and a KS test on the conditioned positive
part, combined by Bonferroni; fully discrete laws get a chi-square against
the pmf with a tail bucket.  All acceptance thresholds route through these
so the tolerance story lives in one place.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps
from scipy.special import kolmogorov

from .laws import BerExp, WeightLaw
from .rng import RngStream


@dataclass
class TestResult:
    name: str
    statistic: float
    p_value: float | None
    n: int
    passed: bool
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.p_value is not None:
            assert 0.0 <= self.p_value <= 1.0


def ks_one_sample(samples: np.ndarray, law_or_cdf, alpha: float = 1e-3,
                  name: str = "ks") -> TestResult:
    """One-sample goodness of fit against a law (with atom/discrete handling)
    or a plain cdf callable (treated as continuous)."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 10:
        raise ValueError("need n >= 10")
    if isinstance(law_or_cdf, WeightLaw):
        law = law_or_cdf
        if law.is_discrete():
            return _chi_square_against_law(x, law, alpha, name)
        if isinstance(law, BerExp) and law.p < 1.0:
            return _mixed_atom_ks(x, law, alpha, name)
        return _continuous_ks(x, lambda t: law.cdf(t), alpha, name, n)
    return _continuous_ks(x, law_or_cdf, alpha, name, n)


def _continuous_ks(x, cdf, alpha, name, n) -> TestResult:
    u = np.sort(np.asarray(cdf(np.sort(x)), dtype=float))
    k = np.arange(1, n + 1)
    d = max(float(np.max(k / n - u)), float(np.max(u - (k - 1) / n)))
    if np.ptp(x) == 0.0:
        return TestResult(name, d, 0.0, n, False, {"degenerate": True})
    p = float(kolmogorov(np.sqrt(n) * d))
    return TestResult(name, d, p, n, p >= alpha, {"kind": "ks"})


def _mixed_atom_ks(x, law: BerExp, alpha, name) -> TestResult:
    n = len(x)
    zeros = int(np.sum(x == 0.0))
    p_atom = float(sps.binomtest(zeros, n, 1.0 - law.p).pvalue)
    pos = x[x > 0.0]
    if len(pos) < 10:
        return TestResult(name, np.nan, p_atom, n, p_atom >= alpha / 2,
                          {"kind": "atom-only", "zeros": zeros})
    sub = _continuous_ks(pos, law.conditional_positive_cdf, alpha / 2,
                         name + "-cont", len(pos))
    passed = (p_atom >= alpha / 2) and (sub.p_value >= alpha / 2)
    return TestResult(name, sub.statistic, min(p_atom, sub.p_value), n, passed,
                      {"kind": "atom+ks", "p_atom": p_atom, "p_cont": sub.p_value})


def _chi_square_against_law(x, law: WeightLaw, alpha, name) -> TestResult:
    pairs = law.pmf_pairs(upto=256)
    vals = np.array([v for v, _ in pairs])
    probs = np.array([p for _, p in pairs])
    # merge the tail so expected counts stay reasonable
    n = len(x)
    keep = probs * n >= 5.0
    keep[0] = True
    cut = int(np.argmin(keep)) if not keep.all() else len(vals)
    cut = max(cut, 2)
    edges = vals[:cut]
    counts = np.array([np.sum(x == v) for v in edges], dtype=float)
    tail_count = n - counts.sum()
    tail_prob = 1.0 - probs[:cut].sum()
    obs = np.concatenate([counts, [tail_count]])
    exp = np.concatenate([probs[:cut] * n, [max(tail_prob, 1e-300) * n]])
    if tail_prob * n < 1.0:
        obs = obs[:-1]
        exp = exp[:-1]
        exp *= obs.sum() / exp.sum()
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = len(obs) - 1
    p = float(sps.chi2.sf(stat, dof))
    return TestResult(name, stat, p, n, p >= alpha, {"kind": "chi2", "dof": dof})


def ks_two_sample(a: np.ndarray, b: np.ndarray, alpha: float = 1e-3,
                  name: str = "ks2") -> TestResult:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    res = sps.ks_2samp(a, b, method="asymp")
    return TestResult(name, float(res.statistic), float(res.pvalue),
                      len(a) + len(b), res.pvalue >= alpha, {"kind": "ks2"})


def chi_square(observed: np.ndarray, expected: np.ndarray, alpha: float = 1e-3,
               name: str = "chi2", dof_delta: int = 1) -> TestResult:
    obs = np.asarray(observed, dtype=float)
    exp = np.asarray(expected, dtype=float)
    if np.any(exp <= 0):
        raise ValueError("expected counts must be positive")
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = len(obs) - dof_delta
    p = float(sps.chi2.sf(stat, dof))
    return TestResult(name, stat, p, int(obs.sum()), p >= alpha, {"dof": dof})


def mean_ci(samples: np.ndarray, level: float = 0.99) -> tuple[float, float]:
    """CLT interval (mean, half-width)."""
    x = np.asarray(samples, dtype=float)
    if len(x) < 30:
        raise ValueError("need n >= 30 for the CLT interval")
    z = float(sps.norm.ppf(0.5 + level / 2.0))
    return float(x.mean()), float(z * x.std(ddof=1) / np.sqrt(len(x)))


# ---------------------------------------------------------------------------
# experiment runner
# ---------------------------------------------------------------------------

_REGISTRY: dict = {}


def register_experiment(name: str):
    def deco(fn):
        _REGISTRY[name] = fn
        return fn
    return deco


def registered_experiments() -> list[str]:
    return sorted(_REGISTRY)


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    params: tuple            # sorted (key, value) pairs
    replicas: int
    seed: int

    @staticmethod
    def make(experiment: str, replicas: int, seed: int, **params) -> "ExperimentSpec":
        if replicas < 1:
            raise ValueError("replicas >= 1")
        return ExperimentSpec(experiment, tuple(sorted(params.items())), replicas, seed)

    def param_dict(self) -> dict:
        return dict(self.params)


def _one_replica(args):
    spec, r = args
    fn = _REGISTRY[spec.experiment]
    rng = RngStream(spec.seed, 0).split(r)
    return fn(rng=rng, replica=r, **spec.param_dict())


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> dict:
    """Replicas on disjoint derived streams; aggregation independent of order.

    The bundle is a plain JSON-ready dict whose digest depends only on the
    spec (no timestamps or machine state), so reruns are byte-identical and a
    worker pool produces the same bundle as a serial run.
    """
    if spec.experiment not in _REGISTRY:
        raise KeyError(f"unknown experiment {spec.experiment!r}")
    jobs = [(spec, r) for r in range(spec.replicas)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_replica, jobs))
    else:
        results = [_one_replica(j) for j in jobs]
    bundle = {
        "experiment": spec.experiment,
        "params": spec.param_dict(),
        "replicas": spec.replicas,
        "seed": spec.seed,
        "results": results,
    }
    bundle["digest"] = bundle_digest(bundle)
    return bundle


def bundle_digest(bundle: dict) -> str:
    payload = {k: v for k, v in bundle.items() if k != "digest"}
    return hashlib.sha256(bundle_json(payload).encode()).hexdigest()[:16]


def bundle_json(bundle: dict) -> str:
    return json.dumps(bundle, sort_keys=True, default=_jsonify)


def _jsonify(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, TestResult):
        return {"name": x.name, "statistic": x.statistic, "p_value": x.p_value,
                "n": x.n, "passed": x.passed, "meta": x.meta}
    raise TypeError(f"not JSON-serializable: {type(x)}")


def write_plot_data(path, xs, ys, band=None) -> None:
    """(x, y[, band]) CSV for external plotting."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    with open(path, "w") as fh:
        if band is None:
            fh.write("x,y\n")
            for x, y in zip(xs, ys):
                fh.write(f"{x!r},{y!r}\n")
        else:
            fh.write("x,y,band\n")
            for x, y, b in zip(xs, ys, np.asarray(band, dtype=float)):
                fh.write(f"{x!r},{y!r},{b!r}\n")
