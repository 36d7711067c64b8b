"""Edge disorder: distribution laws, environment sampling, Gibbs weights.

An environment attaches one disorder value omega_e to every edge; together
with an inverse temperature beta >= 0 it induces conductances
w(e) = exp(-beta * omega_e).  Sampling goes through an inverse-CDF transform
of keyed uniforms, so an environment is a pure function of
(law, graph, seed) and can be regenerated bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .graph import MultiGraph, delete_edges_mapped
from .rng import keyed_uniforms

ENV_STREAM = "environment"


class UnsupportedLawError(ValueError):
    pass


# --------------------------------------------------------------------------
# disorder laws
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Uniform01:
    name = "uniform01"

    def inverse_cdf(self, p):
        return np.asarray(p, dtype=float)

    def cdf(self, t):
        return np.clip(np.asarray(t, dtype=float), 0.0, 1.0)


@dataclass(frozen=True)
class PowerTail:
    """Law whose CDF is c_mu * t^alpha on [0, rho].

    Outside the pinned range the default completion keeps the same power
    shape up to total mass one (for alpha=1 this is the uniform distribution
    on [0, 1/c_mu]); the completion exists exactly when c_mu * rho^alpha <= 1.
    """

    alpha: float
    c_mu: float = 1.0
    rho: float = 1.0
    name = "power_tail"

    def __post_init__(self):
        if self.alpha <= 0 or self.c_mu <= 0 or self.rho <= 0:
            raise ValueError("alpha, c_mu, rho must be positive")
        if self.c_mu * self.rho ** self.alpha > 1 + 1e-12:
            raise ValueError("need c_mu * rho^alpha <= 1")

    @property
    def pinned_mass(self):
        return self.c_mu * self.rho ** self.alpha

    @property
    def support_max(self):
        return self.c_mu ** (-1.0 / self.alpha)

    def inverse_cdf(self, p):
        p = np.asarray(p, dtype=float)
        return (p / self.c_mu) ** (1.0 / self.alpha)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.clip(self.c_mu * np.clip(t, 0.0, None) ** self.alpha, 0.0, 1.0)


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    variance: float = 1.0
    name = "gaussian"

    def inverse_cdf(self, p):
        return self.mean + math.sqrt(self.variance) * special.ndtri(np.asarray(p, dtype=float))

    def cdf(self, t):
        return special.ndtr((np.asarray(t, dtype=float) - self.mean) / math.sqrt(self.variance))


@dataclass(frozen=True)
class Bounded:
    """Uniform distribution on [a, b]; the workhorse bounded-support law."""

    a: float = 0.0
    b: float = 1.0
    name = "bounded"

    def __post_init__(self):
        if self.a > self.b:
            raise ValueError("need a <= b")

    def inverse_cdf(self, p):
        return self.a + (self.b - self.a) * np.asarray(p, dtype=float)

    def cdf(self, t):
        if self.b == self.a:
            return np.where(np.asarray(t, dtype=float) >= self.a, 1.0, 0.0)
        return np.clip((np.asarray(t, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)


@dataclass(frozen=True)
class NegExpInv:
    """Law of -exp(1/U) for U uniform on (0, 1]; support (-inf, -e]."""

    name = "neg_exp_inv"

    def inverse_cdf(self, p):
        p = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(p <= 0, -np.inf, -np.exp(1.0 / np.maximum(p, 1e-300)))

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        mask = t <= -math.e
        out[mask] = 1.0 / np.log(-t[mask])
        out[t > -math.e] = 1.0
        return out


@dataclass(frozen=True)
class TableInverseCdf:
    """Piecewise-linear inverse CDF through given (p, x) points."""

    points: tuple
    name = "table"

    def __post_init__(self):
        ps = [p for p, _ in self.points]
        xs = [x for _, x in self.points]
        if sorted(ps) != list(ps) or sorted(xs) != list(xs):
            raise ValueError("table must be monotone nondecreasing")

    def inverse_cdf(self, p):
        ps = np.array([q for q, _ in self.points])
        xs = np.array([x for _, x in self.points])
        return np.interp(np.asarray(p, dtype=float), ps, xs)


def inverse_cdf(law, p):
    """Quantile function F^{-1}(p) of a disorder law."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p must lie in [0, 1]")
    return law.inverse_cdf(p)


def parse_law(text: str):
    """Parse 'name key=value ...' law descriptions, e.g.
    'power_tail alpha=2 c_mu=1 rho=1' or 'uniform01'."""
    parts = text.replace(",", " ").split()
    if not parts:
        raise ValueError("empty law description")
    name = parts[0].lower()
    kv = {}
    for token in parts[1:]:
        if "=" not in token:
            raise ValueError(f"bad law parameter {token!r}")
        k, v = token.split("=", 1)
        kv[k] = float(v)
    if name == "uniform01":
        return Uniform01()
    if name == "power_tail":
        return PowerTail(alpha=kv["alpha"], c_mu=kv.get("c_mu", 1.0), rho=kv.get("rho", 1.0))
    if name == "gaussian":
        return Gaussian(mean=kv.get("mean", 0.0), variance=kv.get("variance", 1.0))
    if name == "bounded":
        return Bounded(a=kv.get("a", 0.0), b=kv.get("b", 1.0))
    if name == "neg_exp_inv":
        return NegExpInv()
    raise ValueError(f"unknown law {name!r}")


def law_to_string(law) -> str:
    if isinstance(law, Uniform01):
        return "uniform01"
    if isinstance(law, PowerTail):
        return f"power_tail alpha={law.alpha:g} c_mu={law.c_mu:g} rho={law.rho:g}"
    if isinstance(law, Gaussian):
        return f"gaussian mean={law.mean:g} variance={law.variance:g}"
    if isinstance(law, Bounded):
        return f"bounded a={law.a:g} b={law.b:g}"
    if isinstance(law, NegExpInv):
        return "neg_exp_inv"
    raise ValueError(f"cannot serialize {law!r}")


# --------------------------------------------------------------------------
# environments and weighted views
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Environment:
    """Disorder values per edge of a graph, regeneratable from (law, seed)."""

    graph: MultiGraph
    omega: np.ndarray
    law: object = None
    seed: int | None = None

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=float)
        if om.shape != (self.graph.m,):
            raise ValueError("need one omega per edge")
        if not np.all(np.isfinite(om)):
            raise ValueError("omega values must be finite")
        om = om.copy()
        om.flags.writeable = False
        object.__setattr__(self, "omega", om)


def sample_environment(law, g: MultiGraph, seed: int) -> Environment:
    """Draw i.i.d. disorder per edge via inverse-CDF of keyed uniforms."""
    u = keyed_uniforms(seed, ENV_STREAM, np.arange(g.m))
    return Environment(g, np.asarray(law.inverse_cdf(u), dtype=float), law, seed)


def edge_weight(env: Environment, eid: int, beta: float) -> float:
    """Gibbs conductance exp(-beta * omega_e)."""
    return math.exp(-beta * float(env.omega[eid]))


def open_subgraph(g: MultiGraph, env: Environment, law, p: float):
    """Subgraph of edges with omega_e <= F^{-1}(p); the standard monotone
    percolation coupling.  Returns (subgraph, edge map old->new-or-None)."""
    if not (0 <= p <= 1):
        raise ValueError("p must lie in [0, 1]")
    threshold = float(inverse_cdf(law, p))
    closed = [eid for eid in range(g.m) if env.omega[eid] > threshold]
    return delete_edges_mapped(g, closed)


class WeightedGraphView:
    """A graph plus an environment at a fixed inverse temperature.

    Conductances are kept in log form; solvers read them through
    ``scaled_weights`` which shifts the maximum log weight to zero whenever
    the raw values would overflow or the spread would underflow (the Gibbs
    law is invariant under a global weight rescaling).
    """

    def __init__(self, graph: MultiGraph, env_or_omega, beta: float):
        self.graph = graph
        if isinstance(env_or_omega, Environment):
            self.env = env_or_omega
            omega = env_or_omega.omega
        else:
            omega = np.asarray(env_or_omega, dtype=float)
            self.env = Environment(graph, omega)
        if beta < 0:
            raise ValueError("beta must be nonnegative")
        self.beta = float(beta)
        self.omega = self.env.omega
        self.log_weights = -self.beta * self.omega

    @property
    def m(self):
        return self.graph.m

    @property
    def n(self):
        return self.graph.n

    def weights(self) -> np.ndarray:
        """Plain conductances; may over/underflow for extreme beta."""
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(self.log_weights)

    def scaled_weights(self):
        """(weights / exp(shift), shift) with max scaled weight 1 whenever a
        shift is needed for representability; shift == 0 otherwise."""
        if self.m == 0:
            return np.array([]), 0.0
        hi = float(self.log_weights.max())
        lo = float(self.log_weights.min())
        shift = hi if (hi > 700.0 or hi - lo > 700.0 or hi < -700.0) else 0.0
        with np.errstate(under="ignore"):
            return np.exp(self.log_weights - shift), shift

    def reweighted(self, omega_new) -> "WeightedGraphView":
        return WeightedGraphView(self.graph, np.asarray(omega_new, dtype=float), self.beta)


def explicit_view(graph: MultiGraph, weights) -> WeightedGraphView:
    """View with directly prescribed conductances (beta folded to 1)."""
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("conductances must be positive")
    return WeightedGraphView(graph, -np.log(w), 1.0)


# --------------------------------------------------------------------------
# weight statistics and tail bounds
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightStats:
    xi: float       # mean of exp(-beta*omega)
    sigma2: float   # variance
    K: float        # almost-sure bound on the weight


def weight_stats(law, beta: float) -> WeightStats:
    """Mean/variance of the Gibbs weight under a law; closed form for the
    uniform law, adaptive quadrature (rel. tol 1e-10) otherwise."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if isinstance(law, Uniform01):
        if beta == 0:
            return WeightStats(1.0, 0.0, 1.0)
        xi = -math.expm1(-beta) / beta
        second = -math.expm1(-2.0 * beta) / (2.0 * beta)
        return WeightStats(xi, max(second - xi * xi, 0.0), 1.0)
    if isinstance(law, PowerTail):
        a, c, top = law.alpha, law.c_mu, law.support_max

        def moment(r):
            val, _ = integrate.quad(
                lambda t: math.exp(-r * beta * t) * a * c * t ** (a - 1.0),
                0.0, top, epsrel=1e-10, epsabs=0.0, limit=500)
            return val

        xi, second = moment(1), moment(2)
        return WeightStats(xi, max(second - xi * xi, 0.0), 1.0)
    if isinstance(law, Bounded):
        lo, hi = law.a, law.b
        K = math.exp(-beta * lo) if beta * lo > -700 else math.inf
        if not math.isfinite(K):
            raise UnsupportedLawError("weight bound overflows for this beta")
        if hi == lo or beta == 0:
            return WeightStats(K if beta else 1.0, 0.0, K if beta else 1.0)
        xi = (math.exp(-beta * lo) - math.exp(-beta * hi)) / (beta * (hi - lo))
        second = (math.exp(-2 * beta * lo) - math.exp(-2 * beta * hi)) / (2 * beta * (hi - lo))
        return WeightStats(xi, max(second - xi * xi, 0.0), K)
    raise UnsupportedLawError(f"weight_stats undefined for {law!r}")


def bernstein_tail_bound(m: int, delta: float, beta: float, law) -> float:
    """Upper bound on P(|S_m - m*xi| >= delta*m*xi) for a sum of m weights.

    Uniform law: 2*exp(-delta^2 m / (9 max(beta,1))).  Power-tail laws: the
    Bernstein ratio xi^2/(2 sigma^2 + 2 delta xi / 3) evaluated numerically;
    the resulting constant is valid, no optimality claimed.
    """
    if m < 1 or not (0 < delta <= 1):
        raise ValueError("need m >= 1 and 0 < delta <= 1")
    if isinstance(law, Uniform01):
        return 2.0 * math.exp(-delta * delta * m / (9.0 * max(beta, 1.0)))
    if isinstance(law, PowerTail):
        st = weight_stats(law, beta)
        ratio = st.xi ** 2 / (2.0 * st.sigma2 + 2.0 * delta * st.xi / 3.0)
        return 2.0 * math.exp(-ratio * delta * delta * m)
    raise UnsupportedLawError(f"no tail bound for {law!r}")


def paley_zygmund_lower_bound(mean: float, second_moment: float, t: float) -> float:
    """(1-t)^2 mean^2 / E[Z^2], the floor on P(Z > t*mean) for Z >= 0."""
    if not (0 <= t <= 1):
        raise ValueError("t must lie in [0, 1]")
    if second_moment <= 0:
        return 0.0
    return (1.0 - t) ** 2 * mean * mean / second_moment
