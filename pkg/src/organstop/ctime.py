"""Threshold computations for the continuous-time offer-arrival model.

The patient has a random remaining lifetime; offers arrive at random times
carrying i.i.d. positive bounded values; accepting the offer at time t with
value k yields reward beta(t) * k.  The acceptance threshold is
lambda(t) / beta(t), where lambda is the continuation value of rejecting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize, stats

QUAD_TOL = 1e-10
TRUNCATION_SURVIVAL = 1e-6


# ---------------------------------------------------------------------------
# offer-value distributions

class OfferDistribution:
    """Distribution of offer values on a bounded positive support."""

    lower: float
    upper: float

    def cdf(self, x):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def tail_value_integral(self, c) -> float:
        """E[X ; X > c] = integral of x dF(x) over (c, infinity)."""
        raise NotImplementedError

    def excess_integral(self, c) -> float:
        """E[(X - c)+] = integral of (1 - F(x)) dx over (c, infinity)."""
        raise NotImplementedError

    def sample(self, rng, n):
        raise NotImplementedError


@dataclass(frozen=True)
class FiniteOffers(OfferDistribution):
    """Finitely many values x_1 > ... > x_m > 0 with probabilities p_i."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if (np.diff(v) >= 0).any():
            raise ValueError("offer values must be strictly decreasing")
        if v[-1] <= 0:
            raise ValueError("offer values must be positive")
        if abs(p.sum() - 1.0) > 1e-9 or (p < 0).any():
            raise ValueError("offer probabilities must form a distribution")
        for name, arr in (("values", v), ("probs", p)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def lower(self):
        return float(self.values[-1])

    @property
    def upper(self):
        return float(self.values[0])

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x[..., None] >= self.values, self.probs, 0.0).sum(axis=-1)

    def mean(self):
        return float(self.values @ self.probs)

    def tail_value_integral(self, c):
        c = np.asarray(c, dtype=float)
        take = self.values > c[..., None]
        return (np.where(take, self.values * self.probs, 0.0)).sum(axis=-1)

    def excess_integral(self, c):
        c = np.asarray(c, dtype=float)
        gaps = np.clip(self.values - c[..., None], 0.0, None)
        return (gaps * self.probs).sum(axis=-1)

    def sample(self, rng, n):
        return rng.choice(self.values, size=n, p=self.probs)


@dataclass(frozen=True)
class UniformOffers(OfferDistribution):
    low: float
    high: float

    def __post_init__(self):
        if not (0 <= self.low < self.high):
            raise ValueError("need 0 <= low < high")

    @property
    def lower(self):
        return self.low

    @property
    def upper(self):
        return self.high

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.low)
                       / (self.high - self.low), 0.0, 1.0)

    def mean(self):
        return 0.5 * (self.low + self.high)

    def tail_value_integral(self, c):
        c = np.clip(np.asarray(c, dtype=float), self.low, self.high)
        return (self.high ** 2 - c ** 2) / (2.0 * (self.high - self.low))

    def excess_integral(self, c):
        c = np.asarray(c, dtype=float)
        c_in = np.clip(c, self.low, self.high)
        inside = (self.high - c_in) ** 2 / (2.0 * (self.high - self.low))
        return inside + np.clip(self.low - c, 0.0, None)

    def sample(self, rng, n):
        return rng.uniform(self.low, self.high, size=n)


@dataclass(frozen=True)
class ContinuousOffers(OfferDistribution):
    """Generic continuous offers backed by a density on bounded support."""

    pdf: Callable[[float], float]
    support: tuple[float, float]

    @property
    def lower(self):
        return self.support[0]

    @property
    def upper(self):
        return self.support[1]

    def cdf(self, x):
        def one(c):
            if c <= self.lower:
                return 0.0
            if c >= self.upper:
                return 1.0
            val, _ = integrate.quad(self.pdf, self.lower, c, epsabs=QUAD_TOL)
            return min(val, 1.0)
        return np.vectorize(one)(x)[()]

    def mean(self):
        val, _ = integrate.quad(lambda x: x * self.pdf(x), self.lower,
                                self.upper, epsabs=QUAD_TOL)
        return val

    def tail_value_integral(self, c):
        def one(c0):
            lo = max(c0, self.lower)
            if lo >= self.upper:
                return 0.0
            val, _ = integrate.quad(lambda x: x * self.pdf(x), lo, self.upper,
                                    epsabs=QUAD_TOL)
            return val
        return np.vectorize(one)(c)[()]

    def excess_integral(self, c):
        def one(c0):
            lo = max(c0, self.lower)
            if lo >= self.upper:
                return 0.0
            val, _ = integrate.quad(lambda x: (x - c0) * self.pdf(x), lo,
                                    self.upper, epsabs=QUAD_TOL)
            return val
        return np.vectorize(one)(c)[()]

    def sample(self, rng, n):
        # inverse transform through a dense CDF table
        xs = np.linspace(self.lower, self.upper, 4097)
        dens = np.array([self.pdf(x) for x in xs])
        cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) * 0.5
                                               * np.diff(xs))])
        cdf /= cdf[-1]
        return np.interp(rng.random(n), cdf, xs)


# ---------------------------------------------------------------------------
# lifetimes and arrivals

@dataclass(frozen=True)
class Lifetime:
    """Remaining-lifetime distribution wrapping a frozen scipy distribution."""

    dist: object
    ifr: bool = False

    def cdf(self, t):
        return self.dist.cdf(t)

    def pdf(self, t):
        return self.dist.pdf(t)

    def survival(self, t):
        return self.dist.sf(t)

    def failure_rate(self, t):
        sf = self.dist.sf(t)
        return np.where(sf > 1e-300, self.dist.pdf(t) / np.maximum(sf, 1e-300),
                        np.inf)[()]

    def conditional_survival(self, s, t):
        """P(tau > t + s | tau > t); 0 once survival past t is negligible."""
        sf_t = self.dist.sf(t)
        if sf_t < 1e-12:
            return 0.0
        return float(self.dist.sf(t + s) / sf_t)

    def sample(self, rng, n):
        return self.dist.rvs(size=n, random_state=rng)


def exponential_lifetime(rate: float) -> Lifetime:
    return Lifetime(stats.expon(scale=1.0 / rate), ifr=True)


def erlang_lifetime(shape: int, rate: float) -> Lifetime:
    return Lifetime(stats.erlang(int(shape), scale=1.0 / rate), ifr=True)


@dataclass(frozen=True)
class DeterministicInterarrival:
    gap: float

    def cdf(self, s):
        return (np.asarray(s, dtype=float) >= self.gap).astype(float)

    def mean(self):
        return self.gap

    def sample(self, rng, n):
        return np.full(n, self.gap)


@dataclass(frozen=True)
class ScipyInterarrival:
    dist: object

    def cdf(self, s):
        return self.dist.cdf(s)

    def mean(self):
        return float(self.dist.mean())

    def sample(self, rng, n):
        return self.dist.rvs(size=n, random_state=rng)


def exponential_interarrival(rate: float) -> ScipyInterarrival:
    return ScipyInterarrival(stats.expon(scale=1.0 / rate))


@dataclass(frozen=True)
class FixedInstants:
    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if (np.diff(t) <= 0).any():
            raise ValueError("arrival instants must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)


@dataclass(frozen=True)
class RenewalArrivals:
    interarrival: object


@dataclass(frozen=True)
class PoissonArrivals:
    rate: float


@dataclass(frozen=True)
class NonhomogeneousPoissonArrivals:
    rate_fn: Callable[[float], float]
    rate_bound: float | None = None  # required for simulation by thinning


@dataclass(frozen=True)
class ContinuousModelSpec:
    """Continuous-time model data.

    ``survival_alphas`` applies to fixed instants: alphas[j] is the
    probability of surviving to instant j given survival to instant j - 1
    (alphas[0] = survival to the first instant).  The other arrival patterns
    carry an explicit ``lifetime`` distribution instead.
    """

    offers: OfferDistribution
    arrivals: object
    lifetime: Lifetime | None = None
    discount_fn: Callable[[float], float] = field(default=lambda t: 1.0)
    survival_alphas: np.ndarray | None = None

    def __post_init__(self):
        if self.survival_alphas is not None:
            a = np.asarray(self.survival_alphas, dtype=float)
            if ((a < 0) | (a > 1)).any():
                raise ValueError("survival probabilities must lie in [0, 1]")
            a.setflags(write=False)
            object.__setattr__(self, "survival_alphas", a)
        if isinstance(self.arrivals, FixedInstants):
            if self.survival_alphas is None:
                raise ValueError("fixed instants require survival_alphas")
            if len(self.survival_alphas) != len(self.arrivals.times):
                raise ValueError("need one survival probability per instant")
        elif self.lifetime is None:
            raise ValueError("this arrival pattern requires a lifetime "
                             "distribution")
        # light monotonicity check of the discount function
        grid = np.linspace(0.0, 100.0, 41)
        vals = np.array([self.discount_fn(t) for t in grid])
        if (np.diff(vals) > 1e-12).any() or (vals <= 0).any() or (vals > 1).any():
            raise ValueError("discount function must be nonincreasing with "
                             "values in (0, 1]")


@dataclass
class ThresholdCurve:
    """Continuation value lambda(t) on a time grid, linearly interpolated.

    Beyond the last grid point the curve is 0 (the backward boundary);
    before the first it is clamped at lambda(times[0]).
    """

    times: np.ndarray
    values: np.ndarray
    truncated: bool = False
    critical_times: np.ndarray | None = None

    def __call__(self, t):
        return np.interp(t, self.times, self.values,
                         left=self.values[0], right=0.0)

    def is_nonincreasing(self, slack: float = 1e-9) -> bool:
        return bool((np.diff(self.values) <= slack).all())


# ---------------------------------------------------------------------------
# fixed arrival instants

def _offer_value_expectation(offers, lam, beta):
    """E[max(beta * X, lam)] = lam F(lam/beta) + beta * E[X ; X > lam/beta]."""
    c = np.asarray(lam, dtype=float) / beta
    return lam * offers.cdf(c) + beta * offers.tail_value_integral(c)


def finite_horizon_thresholds(spec: ContinuousModelSpec,
                              n_instants: int | None = None) -> np.ndarray:
    """Backward recursion for the fixed-instants rejection values.

    Returns lambda[j] for j = 0..N, where the j-th offer should be accepted
    iff its value exceeds lambda[j] / beta(U_j); the process terminates by
    itself at the final instant, so lambda[N] = 0.
    """
    if not isinstance(spec.arrivals, FixedInstants):
        raise ValueError("finite_horizon_thresholds requires fixed instants")
    if spec.offers.upper == math.inf:
        raise ValueError("offer support must be bounded")
    times = spec.arrivals.times
    n = len(times) if n_instants is None else n_instants
    alphas = spec.survival_alphas
    betas = np.array([spec.discount_fn(t) for t in times[:n]])
    lam = np.zeros(n)
    for j in range(n - 2, -1, -1):
        lam[j] = alphas[j + 1] * _offer_value_expectation(
            spec.offers, lam[j + 1], betas[j + 1])
    return lam


def infinite_horizon_limit(offers: OfferDistribution,
                           alpha,
                           step_discount=1.0,
                           tol: float = 1e-9):
    """Stationary limit of the fixed-instants thresholds as the horizon grows.

    ``step_discount`` is the per-arrival discount ratio beta(U_{j+1}) /
    beta(U_j); with stationary data (scalar alpha and ratio) the limit
    gamma solves gamma = alpha * delta * (gamma F(gamma) + E[X ; X > gamma])
    and the optimal rule accepts iff the offer exceeds gamma.  Sequence
    inputs take the flagged slower path: the tail (last values, repeated) is
    solved as a fixed point and the finite prefix recursed backward from it,
    returning the whole gamma_j sequence.
    """
    alpha_arr = np.atleast_1d(np.asarray(alpha, dtype=float))
    delta_arr = np.atleast_1d(np.asarray(step_discount, dtype=float))
    stationary = alpha_arr.size == 1 and delta_arr.size == 1

    def phi(gamma, a, d):
        return a * d * (gamma * offers.cdf(gamma)
                        + offers.tail_value_integral(gamma))

    def stationary_root(a, d):
        if a * d == 0.0:
            return 0.0
        hi = offers.upper
        g = lambda x: x - phi(x, a, d)
        if g(hi) <= 0:
            return hi
        return float(optimize.brentq(g, 0.0, hi, xtol=tol))

    if stationary:
        return stationary_root(float(alpha_arr[0]), float(delta_arr[0]))

    n = max(alpha_arr.size, delta_arr.size)
    alphas = np.resize(alpha_arr, n)
    deltas = np.resize(delta_arr, n)
    gammas = np.empty(n)
    tail = stationary_root(float(alphas[-1]), float(deltas[-1]))
    gammas[-1] = phi(tail, alphas[-1], deltas[-1])
    for j in range(n - 2, -1, -1):
        gammas[j] = phi(gammas[j + 1], alphas[j + 1], deltas[j + 1])
    return gammas


# ---------------------------------------------------------------------------
# renewal arrivals

def renewal_lambda(spec: ContinuousModelSpec, t_max: float,
                   step: float) -> ThresholdCurve:
    """Solve the renewal-arrival integral equation backward on a grid.

    lambda(t) = integral over interarrival s of
    Gbar(s | t) * E[max(beta(t+s) X, lambda(t+s))] dH(s), taken as 0 for
    t >= t_max.  Beyond t_max the offer expectation uses lambda = 0 (accept
    anything).  Under an IFR lifetime the returned curve is nonincreasing.
    """
    if not isinstance(spec.arrivals, RenewalArrivals):
        raise ValueError("renewal_lambda requires renewal arrivals")
    lifetime = spec.lifetime
    truncated = lifetime.survival(t_max) > TRUNCATION_SURVIVAL

    times = np.arange(0.0, t_max + 0.5 * step, step)
    n = len(times)
    lam = np.zeros(n)
    inter = spec.arrivals.interarrival
    betas = np.array([spec.discount_fn(t) for t in times])

    def w_at(u_times, lam_interp):
        """offer expectation at times u (vector), using interpolated lambda."""
        lam_u = np.interp(u_times, times, lam_interp, right=0.0)
        beta_u = np.array([spec.discount_fn(u) for u in np.atleast_1d(u_times)])
        return _offer_value_expectation(spec.offers, lam_u, beta_u)

    if isinstance(inter, DeterministicInterarrival):
        d = inter.gap
        for i in range(n - 1, -1, -1):
            t = times[i]
            gbar = lifetime.conditional_survival(d, t)
            lam[i] = gbar * w_at(np.array([t + d]), lam)[0]
        return ThresholdCurve(times, lam, truncated=truncated)

    # continuous interarrivals: trapezoid over the s-grid, midpoint masses
    s_edges = np.arange(0.0, _interarrival_horizon(inter) + step, step)
    s_mids = 0.5 * (s_edges[1:] + s_edges[:-1])
    masses = np.diff(np.asarray(inter.cdf(s_edges), dtype=float))
    keep = masses > 0
    s_mids, masses = s_mids[keep], masses[keep]

    for i in range(n - 1, -1, -1):
        t = times[i]
        sf_t = lifetime.survival(t)
        if sf_t < 1e-12:
            lam[i] = 0.0
            continue
        gbar = np.asarray(lifetime.survival(t + s_mids), dtype=float) / sf_t
        # the first midpoint may interpolate lambda(t) itself: fixed point
        guess = lam[i + 1] if i + 1 < n else 0.0
        for _ in range(100):
            lam[i] = guess
            w = w_at(t + s_mids, lam)
            new = float(np.sum(gbar * masses * w))
            if abs(new - guess) <= 1e-13:
                guess = new
                break
            guess = new
        lam[i] = guess
    return ThresholdCurve(times, lam, truncated=truncated)


def _interarrival_horizon(inter, tiny=1e-9):
    hi = 1.0
    for _ in range(80):
        if 1.0 - float(inter.cdf(hi)) <= tiny:
            return hi
        hi *= 2.0
    raise ValueError("interarrival distribution tail does not decay")


# ---------------------------------------------------------------------------
# nonhomogeneous Poisson arrivals

class StiffnessError(RuntimeError):
    """Failure rate too large for the step integrator."""


def poisson_lambda_ode(spec: ContinuousModelSpec, t_max: float,
                       step: float) -> ThresholdCurve:
    """Integrate the threshold ODE backward from lambda(t_max) = 0.

    lambda'(t) = r(t) lambda(t) - beta(t) mu(t) E[(X - lambda(t)/beta(t))+],
    solved with classical fourth-order steps; each grid interval is
    subdivided until the step-doubling error estimate is below 1e-8.
    """
    arrivals = spec.arrivals
    if isinstance(arrivals, PoissonArrivals):
        rate_fn = lambda t: arrivals.rate
    elif isinstance(arrivals, NonhomogeneousPoissonArrivals):
        rate_fn = arrivals.rate_fn
    else:
        raise ValueError("poisson_lambda_ode requires Poisson arrivals")
    lifetime = spec.lifetime
    truncated = lifetime.survival(t_max) > TRUNCATION_SURVIVAL

    def rhs(t, lam):
        r = float(lifetime.failure_rate(t))
        if not np.isfinite(r) or r > 1e6:
            raise StiffnessError(f"failure rate {r:.3g} at t={t:.6g} exceeds 1e6")
        beta = spec.discount_fn(t)
        return r * lam - beta * rate_fn(t) \
            * float(spec.offers.excess_integral(np.asarray(lam / beta)))

    def rk4(t, lam, h):
        k1 = rhs(t, lam)
        k2 = rhs(t + 0.5 * h, lam + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, lam + 0.5 * h * k2)
        k4 = rhs(t + h, lam + h * k3)
        return lam + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    times = np.arange(0.0, t_max + 0.5 * step, step)
    lam = np.zeros(len(times))
    value = 0.0
    for i in range(len(times) - 1, 0, -1):
        t1, t0 = times[i], times[i - 1]
        n_sub = 1
        while True:
            h = (t0 - t1) / n_sub  # negative: integrating backward
            full = value
            for j in range(n_sub):
                full = rk4(t1 + j * h, full, h)
            half = value
            for j in range(2 * n_sub):
                half = rk4(t1 + j * (h / 2), half, h / 2)
            err = abs(half - full) / 15.0
            if err <= 1e-8 or n_sub >= 1024:
                if n_sub >= 1024 and err > 1e-8:
                    raise StiffnessError(
                        f"step-size underflow between t={t0:.6g} and {t1:.6g}")
                value = half
                break
            n_sub *= 2
        lam[i - 1] = value
    return ThresholdCurve(times, lam, truncated=truncated)


# ---------------------------------------------------------------------------
# critical times

def critical_times(curve: ThresholdCurve, values: Sequence[float],
                   time_tol: float = 1e-9) -> np.ndarray:
    """First times at which the curve drops below each offer value.

    ``values`` must be strictly decreasing (x_1 > ... > x_m).  Entry i is 0
    when the curve starts below x_i, infinity when it never reaches x_i,
    and otherwise the crossing time located by bisection on the linear
    interpolant.  The result is nondecreasing.
    """
    if not curve.is_nonincreasing():
        raise ValueError("critical times require a nonincreasing curve")
    xs = np.asarray(values, dtype=float)
    if (np.diff(xs) >= 0).any():
        raise ValueError("offer values must be strictly decreasing")
    out = np.empty(len(xs))
    t_lo, t_hi = float(curve.times[0]), float(curve.times[-1])
    inf_lambda = float(curve.values.min())
    for i, x in enumerate(xs):
        if inf_lambda >= x:
            out[i] = np.inf
        elif curve.values[0] < x:
            out[i] = 0.0
        else:
            lo, hi = t_lo, t_hi
            while hi - lo > time_tol:
                mid = 0.5 * (lo + hi)
                if curve(mid) < x:
                    hi = mid
                else:
                    lo = mid
            out[i] = hi
    return out
