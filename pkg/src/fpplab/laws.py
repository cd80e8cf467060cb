"""Weight distributions with exact CDFs, samplers, and compatibility solving.

The five families cover every distribution this package touches:

* ``Bernoulli(p)``          -- atom at 0, atom at 1
* ``BerExp(p, tau)``        -- atom at 0 of mass 1-p, Exp(tau) density with mass p
* ``BerGeomPlus(p, a)``     -- atom at 0 of mass 1-p, Geom on {1,2,...} with mass p
* ``Geom0(c)``              -- geometric on {0,1,...}, pmf (1-c)^k c
* ``ConstZero()``           -- degenerate at 0

Mixed (atom + density) laws are represented explicitly: the CDF is exact and
the sampler spends a fixed budget of two uniforms per draw (atom, then
continuous/geometric part), which keeps grid generation position-indexed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import RngStream

UNIFORMS_PER_DRAW = 2


class ParameterRangeError(ValueError):
    """Requested parameter or target mean is outside the admissible range."""


@dataclass(frozen=True)
class WeightLaw:
    """Base class; concrete laws implement mean/cdf/from_uniforms."""

    def mean(self) -> float:
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def from_uniforms(self, u_atom, u_part):
        """Map two uniform arrays to draws (vectorized, position-stable)."""
        raise NotImplementedError

    def sample(self, rng: RngStream, size: int | None = None, start: int = 0):
        """Draws at positions start.. of the stream; scalar if size is None."""
        n = 1 if size is None else size
        u = rng.uniforms(UNIFORMS_PER_DRAW * n, start=UNIFORMS_PER_DRAW * start)
        out = self.from_uniforms(u[0::2], u[1::2])
        return float(out[0]) if size is None else out

    def atom_at_zero(self) -> float:
        """P(W = 0); every family here has its only continuous-part-free atom at 0."""
        return float(self.cdf(0.0))

    def is_discrete(self) -> bool:
        return False


@dataclass(frozen=True)
class Bernoulli(WeightLaw):
    p: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ParameterRangeError(f"Bernoulli p={self.p} not in (0, 1]")

    def mean(self) -> float:
        return self.p

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0.0, 0.0, np.where(x < 1.0, 1.0 - self.p, 1.0))

    def from_uniforms(self, u_atom, u_part):
        return (np.asarray(u_atom) < self.p).astype(float)

    def is_discrete(self) -> bool:
        return True

    def pmf_pairs(self, upto: int = 1):
        return [(0.0, 1.0 - self.p), (1.0, self.p)]


@dataclass(frozen=True)
class BerExp(WeightLaw):
    """P(W >= x) = (1-p) 1{x=0} + p e^{-tau x} for x >= 0."""

    p: float
    tau: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ParameterRangeError(f"BerExp p={self.p} not in (0, 1]")
        if not self.tau > 0.0:
            raise ParameterRangeError(f"BerExp tau={self.tau} must be > 0")

    def mean(self) -> float:
        return self.p / self.tau

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0.0, 0.0, 1.0 - self.p * np.exp(-self.tau * x))

    def from_uniforms(self, u_atom, u_part):
        on = np.asarray(u_atom) < self.p
        return on * (-np.log1p(-np.asarray(u_part)) / self.tau)

    def conditional_positive_cdf(self, x):
        """CDF of W | W > 0, an Exp(tau)."""
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0.0, 0.0, -np.expm1(-self.tau * x))


def Exponential(rate: float) -> BerExp:
    """Exp(rate) as the p = 1 Bernoulli-exponential."""
    return BerExp(1.0, rate)


@dataclass(frozen=True)
class BerGeomPlus(WeightLaw):
    """Atom 1-p at 0; with prob p a Geom_+(a) on {1, 2, ...}, pmf (1-a)^{k-1} a."""

    p: float
    a: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ParameterRangeError(f"BerGeomPlus p={self.p} not in (0, 1]")
        if not 0.0 < self.a < 1.0:
            raise ParameterRangeError(f"BerGeomPlus a={self.a} not in (0, 1)")

    def mean(self) -> float:
        return self.p / self.a

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        k = np.floor(x)
        return np.where(x < 0.0, 0.0, 1.0 - self.p * (1.0 - self.a) ** np.maximum(k, 0.0))

    def from_uniforms(self, u_atom, u_part):
        on = np.asarray(u_atom) < self.p
        g = np.ceil(np.log1p(-np.asarray(u_part)) / math.log1p(-self.a))
        return on * np.maximum(g, 1.0)

    def is_discrete(self) -> bool:
        return True

    def pmf_pairs(self, upto: int = 64):
        pairs = [(0.0, 1.0 - self.p)]
        for k in range(1, upto + 1):
            pairs.append((float(k), self.p * (1.0 - self.a) ** (k - 1) * self.a))
        return pairs


@dataclass(frozen=True)
class Geom0(WeightLaw):
    """pmf (1-c)^k c on {0, 1, ...}; mean (1-c)/c."""

    c: float

    def __post_init__(self):
        if not 0.0 < self.c <= 1.0:
            raise ParameterRangeError(f"Geom0 c={self.c} not in (0, 1]")

    def mean(self) -> float:
        return (1.0 - self.c) / self.c

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        k = np.floor(x)
        return np.where(x < 0.0, 0.0, 1.0 - (1.0 - self.c) ** (np.maximum(k, 0.0) + 1.0))

    def from_uniforms(self, u_atom, u_part):
        if self.c == 1.0:
            return np.zeros_like(np.asarray(u_part, dtype=float))
        return np.floor(np.log1p(-np.asarray(u_part)) / math.log1p(-self.c))

    def is_discrete(self) -> bool:
        return True

    def pmf_pairs(self, upto: int = 64):
        return [(float(k), (1.0 - self.c) ** k * self.c) for k in range(upto + 1)]


@dataclass(frozen=True)
class ConstZero(WeightLaw):
    def mean(self) -> float:
        return 0.0

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return (x >= 0.0).astype(float)

    def from_uniforms(self, u_atom, u_part):
        return np.zeros_like(np.asarray(u_atom, dtype=float))

    def is_discrete(self) -> bool:
        return True

    def pmf_pairs(self, upto: int = 0):
        return [(0.0, 1.0)]


def sample(law: WeightLaw, rng: RngStream, size: int | None = None):
    return law.sample(rng, size=size)


def cdf(law: WeightLaw, x):
    return law.cdf(x)


def mean_via_cdf(law: WeightLaw, grid_points: int = 2_000_000) -> float:
    """Numerical mean from the CDF alone: integral of the survival function.

    Used as an independent oracle against law.mean().  The integration grid is
    placed on [0, T] with T far enough out that the truncated tail is below
    the quadrature tolerance; discrete laws are summed exactly instead.
    """
    if law.is_discrete():
        upto = 1
        while (1.0 - float(law.cdf(upto))) > 1e-15 and upto < 10**6:
            upto *= 2
        ks = np.arange(1, upto + 1, dtype=float)
        # sum of survival at integers: E = sum_{k>=0} P(W > k) for integer laws
        return float(np.sum(1.0 - law.cdf(ks - 1.0)))
    m = law.mean()
    T = 1.0
    while (1.0 - float(law.cdf(T))) * T > 1e-12:
        T *= 2.0
    xs = np.linspace(0.0, T, grid_points)
    surv = 1.0 - law.cdf(xs)
    return float(np.trapezoid(surv, xs)) if hasattr(np, "trapezoid") else float(np.trapz(surv, xs))


# ---------------------------------------------------------------------------
# compatibility: the one-parameter family sharing a fixed point with a law
# ---------------------------------------------------------------------------

def compat_invariant(law: WeightLaw) -> float:
    """The quantity preserved along a compatible family.

    BerExp(p, a): a p / (1 - p);  BerGeomPlus(p, a): [a/(1-a)][p/(1-p)].
    Degenerate p = 1 members map to +inf.
    """
    if isinstance(law, BerExp):
        if law.p == 1.0:
            return math.inf
        return law.tau * law.p / (1.0 - law.p)
    if isinstance(law, BerGeomPlus):
        if law.p == 1.0:
            return math.inf
        return (law.a / (1.0 - law.a)) * (law.p / (1.0 - law.p))
    if isinstance(law, Geom0):
        return compat_invariant(BerGeomPlus(1.0 - law.c, law.c))
    raise ParameterRangeError(f"no compatible family for {type(law).__name__}")


def solve_compatible(anchor: WeightLaw, target_mean: float,
                     require_mean_below: bool = True) -> WeightLaw:
    """The unique member of `anchor`'s compatible family with the given mean.

    With `require_mean_below` (the store-input regime), the target mean must
    be strictly below the anchor's mean; pass False to solve anywhere in
    (0, inf), e.g. to invert the map back toward the anchor.
    """
    if not target_mean > 0.0:
        raise ParameterRangeError(f"target mean {target_mean} must be > 0")
    if require_mean_below and not target_mean < anchor.mean():
        raise ParameterRangeError(
            f"target mean {target_mean} not strictly below anchor mean {anchor.mean()}")

    if isinstance(anchor, BerExp):
        if anchor.p == 1.0:
            # degenerate family: exponentials; fix q = 1
            return BerExp(1.0, 1.0 / target_mean)
        K = compat_invariant(anchor)
        # q/tau = m and q tau/(1-q) = K  ->  q^2 + K m q - K m = 0
        km = K * target_mean
        q = (-km + math.sqrt(km * km + 4.0 * km)) / 2.0
        return BerExp(q, q / target_mean)
    if isinstance(anchor, BerGeomPlus):
        if anchor.p == 1.0:
            if target_mean <= 1.0:
                raise ParameterRangeError(
                    "pure-geometric anchor admits compatible means > 1 only")
            return BerGeomPlus(1.0, 1.0 / target_mean)
        K = compat_invariant(anchor)
        # q/b = m and [b/(1-b)][q/(1-q)] = K; substitute q = m b:
        # m b^2 = K (1-b)(1-mb)  ->  m(1-K) b^2 + K(1+m) b - K = 0
        m = target_mean
        a2, a1, a0 = m * (1.0 - K), K * (1.0 + m), -K
        if a2 == 0.0:
            roots = [-a0 / a1]
        else:
            disc = math.sqrt(a1 * a1 - 4.0 * a2 * a0)
            roots = [(-a1 - disc) / (2.0 * a2), (-a1 + disc) / (2.0 * a2)]
        for b in roots:
            if 0.0 < b < 1.0 and 0.0 < m * b <= 1.0:
                return BerGeomPlus(m * b, b)
        raise ParameterRangeError(f"no compatible geometric law at mean {m}")
    raise ParameterRangeError(f"no compatible family for {type(anchor).__name__}")


def rho_to_direction(rho: float) -> tuple[float, float]:
    """Unit-simplex direction associated with a mean parameter rho > 0.

    xi(rho) = (1 - rho^2/(1+rho)^2, rho^2/(1+rho)^2); components sum to 1.
    """
    if not rho > 0.0:
        raise ParameterRangeError(f"rho={rho} must be > 0")
    s = (rho / (1.0 + rho)) ** 2
    return (1.0 - s, s)


def parse_law(spec: str) -> WeightLaw:
    """Parse the CLI grammar family:params, e.g. 'berexp:0.5,2.0' or 'exp:1'."""
    name, _, rest = spec.partition(":")
    args = [float(tok) for tok in rest.split(",") if tok] if rest else []
    name = name.strip().lower()
    if name == "ber":
        return Bernoulli(*args)
    if name == "berexp":
        return BerExp(*args)
    if name == "exp":
        return Exponential(*args)
    if name == "bergeom":
        return BerGeomPlus(*args)
    if name == "geom0":
        return Geom0(*args)
    if name in ("const0", "zero"):
        return ConstZero()
    raise ParameterRangeError(f"unknown law spec {spec!r}")
