"""Random evolution-time distributions and their characteristic functions.

Every distribution exposes ``char_fn(omega) = E[exp(i omega T)]`` in closed
form (or from a precomputed table), ``mean_abs()`` for the cost ``E|T|``, and
``sample(rng, size)``. Samplers take an explicit ``numpy`` Generator so
parallel consumers can use independent seeded streams.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve

REAL = "real"
NONNEG_REAL = "nonnegative-real"
INTEGER = "integer"
NONNEG_INTEGER = "nonnegative-integer"


def _as_omega(omega):
    arr = np.asarray(omega, dtype=float)
    return arr, arr.ndim == 0


def _out(values, scalar):
    values = np.asarray(values, dtype=np.complex128)
    return complex(values) if scalar else values


def _shape(size):
    if size is None:
        return ()
    return (size,) if isinstance(size, (int, np.integer)) else tuple(size)


def _finish(arr, size, integer=False):
    arr = np.asarray(arr)
    arr = arr.astype(np.int64) if integer else arr.astype(float)
    return arr.item() if size is None else arr


class TimeDistribution:
    """Base class. Subclasses are frozen dataclasses."""

    kind: str = "abstract"
    support: str = REAL
    # Phi vanishes for |omega| >= bandlimit when set
    bandlimit: float | None = None

    @property
    def nonnegative(self) -> bool:
        return self.support in (NONNEG_REAL, NONNEG_INTEGER)

    @property
    def integer(self) -> bool:
        return self.support in (INTEGER, NONNEG_INTEGER)

    def char_fn(self, omega):
        omega, scalar = _as_omega(omega)
        return _out(self._phi(omega), scalar)

    def _phi(self, omega: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def mean_abs(self) -> float:
        raise NotImplementedError

    def mean(self) -> float:
        if self.nonnegative:
            return self.mean_abs()
        raise NotImplementedError(f"{self.kind} has no closed-form mean")

    def params(self) -> dict:
        raise NotImplementedError

    def to_spec(self) -> dict:
        return {"kind": self.kind, "params": self.params()}

    def pmf(self) -> tuple[np.ndarray, np.ndarray]:
        """Support points and probabilities for finitely supported kinds."""
        raise NotImplementedError(f"{self.kind} has no finite probability table")

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({inner})"


def _abs_mean_from_pmf(values, probs) -> float:
    return float(np.sum(np.abs(values) * probs))


def _abs_mean_from_char_fn(dist: TimeDistribution) -> float:
    """E|T| = (2/pi) * integral_0^inf (1 - Re Phi(w)) / w^2 dw.

    Used only for signed sums without a closed form; the integrand is smooth
    at 0 whenever T has a finite second moment.
    """
    def integrand(w):
        if w < 1e-6:
            w = 1e-6
        return (1.0 - dist.char_fn(w).real) / w**2

    cut = dist.bandlimit if dist.bandlimit is not None else 50.0
    head, _ = integrate.quad(integrand, 0.0, cut, limit=500, epsabs=1e-12, epsrel=1e-11)
    if dist.bandlimit is not None:
        tail = 1.0 / cut
    else:
        tail, _ = integrate.quad(integrand, cut, np.inf, limit=500, epsabs=1e-12)
    return 2.0 / np.pi * (head + tail)


@dataclass(frozen=True, repr=False)
class PointMass(TimeDistribution):
    t0: float = 0.0
    kind = "point_mass"

    @property
    def support(self):
        integral = float(self.t0).is_integer()
        if self.t0 >= 0:
            return NONNEG_INTEGER if integral else NONNEG_REAL
        return INTEGER if integral else REAL

    def _phi(self, omega):
        return np.exp(1j * omega * self.t0)

    def sample(self, rng, size=None):
        return _finish(np.full(_shape(size), self.t0), size, self.integer)

    def mean_abs(self):
        return abs(self.t0)

    def mean(self):
        return float(self.t0)

    def pmf(self):
        return np.array([self.t0]), np.array([1.0])

    def params(self):
        return {"t0": self.t0}


@dataclass(frozen=True, repr=False)
class TwoPoint(TimeDistribution):
    """T = 0 or pi / omega1 with probability 1/2 each."""

    omega1: float = 1.0
    kind = "two_point"
    support = NONNEG_REAL

    def __post_init__(self):
        if self.omega1 <= 0:
            raise ValueError("omega1 must be positive")

    @property
    def t1(self) -> float:
        return np.pi / self.omega1

    def _phi(self, omega):
        return 0.5 * (1.0 + np.exp(1j * omega * self.t1))

    def sample(self, rng, size=None):
        return _finish(rng.integers(0, 2, size=_shape(size)) * self.t1, size)

    def mean_abs(self):
        return np.pi / (2 * self.omega1)

    def pmf(self):
        return np.array([0.0, self.t1]), np.array([0.5, 0.5])

    def params(self):
        return {"omega1": self.omega1}


def _bspline4(u):
    """Centered cubic cardinal B-spline (support [-2, 2], value 2/3 at 0)."""
    a = np.abs(u)
    out = np.zeros_like(a)
    inner = a < 1
    outer = (a >= 1) & (a < 2)
    out[inner] = 2.0 / 3.0 - a[inner] ** 2 + 0.5 * a[inner] ** 3
    out[outer] = (2.0 - a[outer]) ** 3 / 6.0
    return out


@dataclass(frozen=True, repr=False)
class Sinc4(TimeDistribution):
    """Density proportional to sinc(lam t)^4; Phi is a cubic B-spline on [-4 lam, 4 lam]."""

    lam: float = 1.0
    kind = "sinc4"
    support = REAL

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")

    @property
    def bandlimit(self):
        return 4 * self.lam

    def _phi(self, omega):
        return 1.5 * _bspline4(omega / (2 * self.lam))

    def density(self, t):
        x = self.lam * np.asarray(t, dtype=float)
        return 3 * self.lam / (2 * np.pi) * np.sinc(x / np.pi) ** 4

    def tail_extent(self, mass: float) -> float:
        # two-sided tail of sinc^4 is below (3 / (8 pi lam^3)) / K^3 at |t| > K
        return (3.0 / (8 * np.pi * self.lam**3) / mass) ** (1 / 3)

    def sample(self, rng, size=None):
        n = int(np.prod(_shape(size))) if size is not None else 1
        out = np.empty(0)
        # rejection from a Cauchy envelope: sinc(x)^4 <= 2 / (1 + x^2)
        while out.size < n:
            x = rng.standard_cauchy(size=max(3 * (n - out.size), 16))
            accept = rng.random(x.size) < np.sinc(x / np.pi) ** 4 * (1 + x**2) / 2
            out = np.concatenate([out, x[accept]])
        t = out[:n] / self.lam
        return _finish(t.reshape(_shape(size)), size)

    def mean_abs(self):
        return 3 * math.log(2) / (np.pi * self.lam)

    def params(self):
        return {"lam": self.lam}


@dataclass(frozen=True, repr=False)
class UniformInt(TimeDistribution):
    """Uniform on the integers shift, shift + 1, ..., shift + Q - 1."""

    Q: int = 2
    shift: int = 0
    kind = "uniform_int"

    def __post_init__(self):
        if int(self.Q) != self.Q or self.Q < 1:
            raise ValueError("Q must be a positive integer")
        if int(self.shift) != self.shift:
            raise ValueError("shift must be an integer")

    @property
    def support(self):
        return NONNEG_INTEGER if self.shift >= 0 else INTEGER

    def _phi(self, omega):
        q = self.Q
        z = np.exp(1j * omega)
        near = np.abs(np.angle(z)) < 1e-8
        with np.errstate(divide="ignore", invalid="ignore"):
            geo = (1 - z**q) / (q * (1 - z))
        # Taylor expansion of the geometric mean around z = 1
        eps = np.angle(z)
        geo = np.where(near, np.exp(1j * eps * (q - 1) / 2), geo)
        return np.exp(1j * omega * self.shift) * geo

    def sample(self, rng, size=None):
        return _finish(rng.integers(0, self.Q, size=_shape(size)) + self.shift, size, True)

    def pmf(self):
        return np.arange(self.Q) + self.shift, np.full(self.Q, 1.0 / self.Q)

    def mean_abs(self):
        return _abs_mean_from_pmf(*self.pmf())

    def params(self):
        return {"Q": int(self.Q), "shift": int(self.shift)}


def _std_normal_cdf(x):
    return 0.5 * special.erfc(-x / np.sqrt(2))


@dataclass(frozen=True, repr=False)
class Gaussian(TimeDistribution):
    """N(shift, sigma^2), optionally conditioned on T > 0."""

    sigma: float = 1.0
    shift: float = 0.0
    conditioned: bool = False
    kind = "gaussian"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def support(self):
        return NONNEG_REAL if self.conditioned else REAL

    @property
    def positive_mass(self) -> float:
        return float(_std_normal_cdf(self.shift / self.sigma))

    def _phi(self, omega):
        mu, s = self.shift, self.sigma
        free = np.exp(1j * omega * mu - 0.5 * (s * omega) ** 2)
        if not self.conditioned:
            return free
        # E[e^{iwT} | T > 0] written with the Faddeeva function w(z); the
        # argument stays in the upper half plane so nothing overflows.
        z = (-(s**2) * omega + 1j * mu) / (s * np.sqrt(2))
        neg = 0.5 * np.exp(-(mu**2) / (2 * s**2)) * special.wofz(z)
        return (free - neg) / self.positive_mass

    def error_bound(self, gap: float) -> float:
        """Bound on sup_{|w| >= gap} |Phi(w)| (plus the conditioning loss)."""
        bound = math.exp(-((self.sigma * gap) ** 2) / 2)
        if self.conditioned:
            bound += math.exp(-(self.shift**2) / (2 * self.sigma**2))
        return bound

    def sample(self, rng, size=None):
        if not self.conditioned:
            return _finish(rng.normal(self.shift, self.sigma, size=_shape(size)), size)
        a = -self.shift / self.sigma
        draws = stats.truncnorm.rvs(a, np.inf, loc=self.shift, scale=self.sigma,
                                    size=_shape(size) or None, random_state=rng)
        return _finish(np.maximum(draws, np.nextafter(0.0, 1.0)), size)

    def mean_abs(self):
        mu, s = self.shift, self.sigma
        if self.conditioned:
            return self.mean()
        return float(s * np.sqrt(2 / np.pi) * np.exp(-(mu**2) / (2 * s**2))
                     + mu * (1 - 2 * _std_normal_cdf(-mu / s)))

    def mean(self):
        mu, s = self.shift, self.sigma
        if not self.conditioned:
            return float(mu)
        alpha = mu / s
        return float(mu + s * stats.norm.pdf(alpha) / _std_normal_cdf(alpha))

    def params(self):
        return {"sigma": self.sigma, "shift": self.shift, "conditioned": self.conditioned}


@dataclass(frozen=True, repr=False)
class Binomial(TimeDistribution):
    """Sum of 2m independent fair +-1/2 steps, plus an integer shift."""

    m: int = 1
    shift: int = 0
    kind = "binomial"

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")

    @property
    def support(self):
        return NONNEG_INTEGER if self.shift >= self.m else INTEGER

    def _phi(self, omega):
        return np.exp(1j * omega * self.shift) * np.cos(omega / 2) ** (2 * self.m)

    def sample(self, rng, size=None):
        k = rng.binomial(2 * self.m, 0.5, size=_shape(size))
        return _finish(k - self.m + self.shift, size, True)

    def pmf(self):
        k = np.arange(2 * self.m + 1)
        return k - self.m + self.shift, stats.binom.pmf(k, 2 * self.m, 0.5)

    def mean_abs(self):
        return _abs_mean_from_pmf(*self.pmf())

    def params(self):
        return {"m": int(self.m), "shift": int(self.shift)}


@dataclass(frozen=True, repr=False)
class Exponential(TimeDistribution):
    rate: float = 1.0
    kind = "exponential"
    support = NONNEG_REAL

    def _phi(self, omega):
        return 1.0 / (1.0 - 1j * omega / self.rate)

    def sample(self, rng, size=None):
        return _finish(rng.exponential(1 / self.rate, size=_shape(size)), size)

    def mean_abs(self):
        return 1.0 / self.rate

    def params(self):
        return {"rate": self.rate}


# ---------------------------------------------------------------------------
# Compactly supported characteristic function built from a smooth bump


def bump(omega):
    """exp(-1 / (1 - (2 omega)^2)) on (-1/2, 1/2), zero outside."""
    x = 2 * np.asarray(omega, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


class _BumpProfile:
    """Unit-gap tables: Phi_1 on a frequency grid and the density f_1.

    f_1(t) = h(t)^2 / int h^2, where h is the inverse Fourier transform of the
    bump, so f_1 >= 0 and its characteristic function is the normalized
    self-convolution of the bump (support (-1, 1)).
    """

    GRID_POINTS = 2**16 + 1
    GRID_HALF_WIDTH = 2.0
    QUAD_NODES = 1025
    TAIL_MASS = 1e-10
    FAR = 400.0
    CDF_STEP = 0.01

    def __init__(self):
        w = np.linspace(0.0, 0.5, self.QUAD_NODES)
        wts = np.full(w.size, w[1] - w[0])
        wts[0] = wts[-1] = wts[0] / 2
        self._w = w
        self._bw = bump(w) * wts
        self._norm = 2 * float(np.sum(bump(w) ** 2 * wts))

        grid = np.linspace(-self.GRID_HALF_WIDTH, self.GRID_HALF_WIDTH, self.GRID_POINTS)
        b = bump(grid)
        conv = fftconvolve(b, b, mode="same")
        center = self.GRID_POINTS // 2
        self.grid = grid
        self.phi_grid = np.where(np.abs(grid) < 1.0, conv / conv[center], 0.0)
        self._spline = CubicSpline(grid, self.phi_grid)

        nodes, weights = self._panels(0.0, self.FAR, 1.0)
        dens = self.density(nodes)
        panel_mass = (dens * weights).reshape(-1, 20).sum(axis=1)
        tail = 2 * np.cumsum(panel_mass[::-1])[::-1]
        # first panel edge beyond which the two-sided mass is below TAIL_MASS
        idx = int(np.argmax(tail <= self.TAIL_MASS))
        self.t_max = float(idx)
        self.tail_mass = float(tail[idx])
        self.mass = float(2 * np.sum(dens * weights))
        self.cost = float(2 * np.sum(nodes * dens * weights))

    @staticmethod
    def _panels(a, b, width, order=20):
        x, wx = np.polynomial.legendre.leggauss(order)
        edges = np.arange(a, b + width / 2, width)
        lo, hi = edges[:-1, None], edges[1:, None]
        nodes = ((lo + hi) / 2 + (hi - lo) / 2 * x).ravel()
        weights = ((hi - lo) / 2 * wx).ravel()
        return nodes, weights

    def h(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(t.shape)
        flat_t, flat_out = t.ravel(), out.ravel()
        for start in range(0, flat_t.size, 4096):
            chunk = flat_t[start:start + 4096]
            flat_out[start:start + 4096] = np.cos(np.outer(chunk, self._w)) @ self._bw / np.pi
        return out

    def density(self, t):
        return 2 * np.pi * self.h(t) ** 2 / self._norm

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) < 1.0, self._spline(np.clip(x, -1.0, 1.0)), 0.0)

    def phi_direct(self, x, nodes: int = 4001):
        """Self-convolution by trapezoid quadrature, independent of the grid table."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        nu = np.linspace(-0.5, 0.5, nodes)
        dnu = nu[1] - nu[0]
        b = bump(nu)
        vals = np.array([np.sum(b * bump(xi - nu)) * dnu for xi in x])
        return vals / (np.sum(b * b) * dnu)

    def moment(self, order: int, upper: float = 1600.0) -> float:
        """Central moment of f_1 truncated to |t| <= upper (the mean is 0)."""
        if order % 2:
            return 0.0
        nodes, weights = self._panels(0.0, upper, 1.0)
        return float(2 * np.sum(nodes**order * self.density(nodes) * weights))

    @functools.cached_property
    def inverse_cdf(self):
        t = np.arange(0.0, self.t_max + self.CDF_STEP / 2, self.CDF_STEP)
        d = self.density(t)
        half = integrate.cumulative_trapezoid(d, t, initial=0.0)
        half = 0.5 * half / half[-1]
        ts = np.concatenate([-t[:0:-1], t])
        cdf = np.concatenate([0.5 - half[:0:-1], 0.5 + half])
        return cdf, ts


@functools.lru_cache(maxsize=1)
def bump_profile() -> _BumpProfile:
    return _BumpProfile()


@dataclass(frozen=True, repr=False)
class CompactOptimal(TimeDistribution):
    """Phi vanishes identically for |omega| >= gap; cost is Theta(1/gap)."""

    gap: float = 1.0
    kind = "compact_optimal"
    support = REAL

    def __post_init__(self):
        if not self.gap > 0:
            raise ValueError("gap must be positive")

    @property
    def bandlimit(self):
        return self.gap

    def _phi(self, omega):
        return bump_profile().phi(omega / self.gap).astype(np.complex128)

    def density(self, t):
        return self.gap * bump_profile().density(self.gap * np.asarray(t, dtype=float))

    def tail_extent(self, mass: float = 1e-10) -> float:
        return bump_profile().FAR / self.gap

    def sample(self, rng, size=None):
        cdf, ts = bump_profile().inverse_cdf
        u = rng.random(_shape(size))
        return _finish(np.interp(u, cdf, ts) / self.gap, size)

    def mean_abs(self):
        return bump_profile().cost / self.gap

    def mean(self):
        return 0.0

    def params(self):
        return {"gap": self.gap}


# ---------------------------------------------------------------------------
# Combinators


def _sum_support(parts) -> str:
    integer = all(p.integer for p in parts)
    nonneg = all(p.nonnegative for p in parts)
    if integer:
        return NONNEG_INTEGER if nonneg else INTEGER
    return NONNEG_REAL if nonneg else REAL


def _convolve_pmfs(tables):
    values, probs = tables[0]
    for v2, p2 in tables[1:]:
        grid = np.add.outer(values, v2).ravel()
        weight = np.multiply.outer(probs, p2).ravel()
        uniq, inv = np.unique(np.round(grid, 12), return_inverse=True)
        probs = np.bincount(inv, weights=weight)
        values = uniq
    return values, probs


@dataclass(frozen=True, repr=False)
class Repeated(TimeDistribution):
    """Sum of n independent copies of ``base``."""

    base: TimeDistribution = field(default_factory=PointMass)
    n: int = 1
    kind = "repeated"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")

    @property
    def support(self):
        return self.base.support

    @property
    def bandlimit(self):
        return self.base.bandlimit

    def _phi(self, omega):
        return self.base._phi(omega) ** self.n

    def sample(self, rng, size=None):
        draws = np.asarray(self.base.sample(rng, (self.n,) + _shape(size)))
        return _finish(draws.sum(axis=0), size, self.integer)

    def pmf(self):
        return _convolve_pmfs([self.base.pmf()] * self.n)

    def mean_abs(self):
        if self.base.nonnegative:
            return self.n * self.base.mean_abs()
        if isinstance(self.base, Gaussian) and not self.base.conditioned:
            return Gaussian(self.base.sigma * math.sqrt(self.n), self.base.shift * self.n).mean_abs()
        try:
            return _abs_mean_from_pmf(*self.pmf())
        except NotImplementedError:
            return _abs_mean_from_char_fn(self)

    def mean(self):
        return self.n * self.base.mean()

    def error_bound(self, gap: float) -> float:
        return self.base.error_bound(gap) ** self.n

    def params(self):
        return {"base": self.base.to_spec(), "n": int(self.n)}


@dataclass(frozen=True, repr=False)
class IndependentSum(TimeDistribution):
    parts: tuple = ()
    kind = "independent_sum"

    def __post_init__(self):
        if not self.parts:
            raise ValueError("need at least one part")

    @property
    def support(self):
        return _sum_support(self.parts)

    def _phi(self, omega):
        out = np.ones(np.shape(omega), dtype=np.complex128)
        for p in self.parts:
            out = out * p._phi(omega)
        return out

    def sample(self, rng, size=None):
        total = sum(np.asarray(p.sample(rng, _shape(size) or None), dtype=float) for p in self.parts)
        return _finish(total, size, self.integer)

    def pmf(self):
        return _convolve_pmfs([p.pmf() for p in self.parts])

    def mean_abs(self):
        if all(p.nonnegative for p in self.parts):
            return float(sum(p.mean_abs() for p in self.parts))
        try:
            return _abs_mean_from_pmf(*self.pmf())
        except NotImplementedError:
            return _abs_mean_from_char_fn(self)

    def mean(self):
        return float(sum(p.mean() for p in self.parts))

    def params(self):
        return {"parts": [p.to_spec() for p in self.parts]}


def two_point_multi(gaps) -> IndependentSum:
    """Independent sum of two-point times, one per distinct known gap."""
    distinct = sorted({abs(float(g)) for g in gaps})
    if not distinct or distinct[0] == 0:
        raise ValueError("need nonzero gaps")
    return IndependentSum(tuple(TwoPoint(g) for g in distinct))


@dataclass(frozen=True, repr=False)
class IntegerDiscretized(TimeDistribution):
    """Restriction of a band-limited density to the integers: prob(k) = f(k).

    When Phi_base vanishes outside (-pi, pi), the characteristic function of
    the restriction is the 2 pi-periodization of Phi_base, which is what
    ``char_fn`` evaluates; ``pmf_char_fn`` sums the probability table instead.
    """

    base: TimeDistribution = field(default_factory=lambda: CompactOptimal(1.0))
    truncation_mass: float = 1e-12
    kind = "integer_discretized"
    support = INTEGER

    def __post_init__(self):
        lim = self.base.bandlimit
        if lim is None or not hasattr(self.base, "density"):
            raise ValueError(f"{self.base.kind} is not a band-limited density")
        if lim > np.pi + 1e-12:
            raise ValueError(f"characteristic function support {lim:.6g} exceeds pi")

    @property
    def bandlimit(self):
        return self.base.bandlimit

    @functools.cached_property
    def _table(self):
        k_max = int(math.ceil(self.base.tail_extent(self.truncation_mass)))
        k = np.arange(-k_max, k_max + 1)
        return k, self.base.density(k.astype(float))

    def pmf(self):
        return self._table

    def _phi(self, omega):
        wrapped = np.angle(np.exp(1j * omega))
        return self.base._phi(wrapped)

    def pmf_char_fn(self, omega):
        omega, scalar = _as_omega(omega)
        k, p = self._table
        flat = omega.ravel()
        vals = np.array([np.sum(p * np.exp(1j * w * k)) for w in flat]).reshape(omega.shape)
        return _out(vals, scalar)

    def sample(self, rng, size=None):
        k, p = self._table
        return _finish(rng.choice(k, size=_shape(size), p=p / p.sum()), size, True)

    def mean_abs(self):
        return _abs_mean_from_pmf(*self._table)

    def mean(self):
        k, p = self._table
        return float(np.sum(k * p))

    def params(self):
        return {"base": self.base.to_spec()}


# ---------------------------------------------------------------------------
# Operations


def char_fn(dist: TimeDistribution, omega):
    return dist.char_fn(omega)


def mean_abs_cost(dist: TimeDistribution) -> float:
    return dist.mean_abs()


def dephasing_error(dist: TimeDistribution, gaps) -> float:
    """sup_j |Phi(omega_j)| over the supplied energy differences."""
    gaps = np.atleast_1d(np.asarray(gaps, dtype=float))
    if gaps.size == 0:
        raise ValueError("need at least one gap")
    if np.any(gaps == 0):
        raise ValueError("gaps must be nonzero")
    return float(np.max(np.abs(dist.char_fn(gaps))))


@dataclass(frozen=True)
class BoundCheck:
    value: float
    bound: float
    passed: bool


def cost_lower_bound_check(dist: TimeDistribution, omega: float) -> BoundCheck:
    """E|T| >= (1 - |Phi(omega)|) / |omega|."""
    if omega == 0:
        raise ValueError("omega must be nonzero")
    cost = dist.mean_abs()
    bound = (1 - abs(dist.char_fn(omega))) / abs(omega)
    return BoundCheck(cost, float(bound), bool(cost >= bound - 1e-9))


def positive_lower_bound_check(dist: TimeDistribution, gap: float) -> BoundCheck:
    """sup_{|w| >= gap} |Phi(w)| >= exp(-gap E[T] pi / 2) for T >= 0.

    The supremum is taken over w in [gap, 100 gap] with spacing gap / 100.
    """
    if not dist.nonnegative:
        raise ValueError(f"{dist.kind} has signed support")
    if gap <= 0:
        raise ValueError("gap must be positive")
    grid = np.linspace(gap, 100 * gap, 9901)
    sup_val = float(np.max(np.abs(dist.char_fn(grid))))
    bound = math.exp(-gap * dist.mean() * np.pi / 2)
    return BoundCheck(sup_val, bound, bool(sup_val >= bound - 1e-9))


def repeat(dist: TimeDistribution, n: int) -> Repeated:
    return Repeated(dist, n)


def condition_positive(dist: Gaussian) -> Gaussian:
    if not isinstance(dist, Gaussian):
        raise TypeError("only Gaussian times can be conditioned")
    if dist.shift <= 0:
        raise ValueError("conditioning needs a positive shift")
    return Gaussian(dist.sigma, dist.shift, conditioned=True)


def gaussian_for_error(eps: float, gap: float, positive: bool = False) -> Gaussian:
    """Gaussian time whose residual coherence for |omega| >= gap is at most eps."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if positive:
        sigma = 2 * math.sqrt(math.log(2 / eps)) / gap
        shift = math.sqrt(2) * sigma * math.sqrt(math.log(2 / eps))
        return condition_positive(Gaussian(sigma, shift))
    return Gaussian(2 * math.sqrt(math.log(1 / eps)) / gap)


def build_compact_optimal(gap: float) -> CompactOptimal:
    return CompactOptimal(gap)


def discretize_to_integers(dist: TimeDistribution) -> TimeDistribution:
    if isinstance(dist, PointMass) and float(dist.t0).is_integer():
        return dist
    return IntegerDiscretized(dist)


# ---------------------------------------------------------------------------
# Serialization

_KINDS = {
    "point_mass": lambda p: PointMass(float(p.get("t0", 0.0))),
    "two_point": lambda p: TwoPoint(float(p["omega1"])),
    "two_point_multi": lambda p: two_point_multi(p["gaps"]),
    "sinc4": lambda p: Sinc4(float(p["lam"])),
    "uniform_int": lambda p: UniformInt(int(p["Q"]), int(p.get("shift", 0))),
    "gaussian": lambda p: Gaussian(float(p["sigma"]), float(p.get("shift", 0.0)),
                                   bool(p.get("conditioned", False))),
    "binomial": lambda p: Binomial(int(p["m"]), int(p.get("shift", 0))),
    "exponential": lambda p: Exponential(float(p.get("rate", 1.0))),
    "compact_optimal": lambda p: CompactOptimal(float(p["gap"])),
    "repeated": lambda p: Repeated(from_spec(p["base"]), int(p["n"])),
    "independent_sum": lambda p: IndependentSum(tuple(from_spec(x) for x in p["parts"])),
    "integer_discretized": lambda p: IntegerDiscretized(from_spec(p["base"])),
}

KINDS = tuple(_KINDS)


def from_spec(spec: dict) -> TimeDistribution:
    """Build a distribution from ``{"kind": ..., "params": {...}}``."""
    try:
        kind = spec["kind"]
        factory = _KINDS[kind]
    except KeyError as exc:
        raise ValueError(f"unknown or missing distribution kind in {spec!r}") from exc
    try:
        return factory(spec.get("params", {}))
    except KeyError as exc:
        raise ValueError(f"{kind}: missing parameter {exc}") from exc
