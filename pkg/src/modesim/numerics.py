"""Special functions, closed-form integrals and random sampling primitives.

Everything here is scalar-in / scalar-out (or small vectors) and pure; the
heavier batched sampling used by the Monte-Carlo engine lives in
:mod:`modesim.simulate` but draws from the same distributions.

The scaled exponential integral ``e^x * E_n(x)`` is the workhorse: the rate
formulas need it at arguments ranging from ~1e-2 up to ~1e6, where the plain
``E_n`` underflows and the prefactor overflows. It is computed natively
(power series below 1, modified Lentz continued fraction above) so the
product never passes through an intermediate exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy import special as sp_special

from .errors import DegeneratePoleError, NumericsError

LOG2E = math.log2(math.e)

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for the adaptive quadrature used as a numerical oracle."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be strictly positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream keyed by (master_seed, stream_id).

    Equal keys reproduce identical sequences; distinct stream ids give
    statistically independent streams. A stream is consumed by deriving a
    generator from it, so holding an ``RngStream`` is side-effect free.
    """

    master_seed: int
    stream_id: int

    def generator(self, *subkeys: int) -> np.random.Generator:
        """Fresh generator for this stream, optionally refined by extra keys
        (e.g. a user index) that must stay independent of sibling draws."""
        entropy = [self.master_seed & _SEED_MASK, self.stream_id & _SEED_MASK]
        entropy.extend(int(k) & _SEED_MASK for k in subkeys)
        return np.random.default_rng(np.random.SeedSequence(entropy))


def _as_generator(rng, *subkeys: int) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator(*subkeys)
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"rng must be an RngStream or numpy Generator, got {type(rng)!r}")


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------

def bessel_j0(x: float) -> float:
    """Bessel function of the first kind, order zero."""
    if not math.isfinite(x):
        raise ValueError(f"bessel_j0 requires finite input, got {x}")
    return float(sp_special.j0(x))


def _en_series(n: int, x: float) -> float:
    # Power series (A&S 5.1.12), accurate for x < 1.
    if n == 1:
        s = -np.euler_gamma - math.log(x)
        term = 1.0
        k = 0
        while True:
            k += 1
            term *= -x / k
            add = -term / k
            s += add
            if abs(add) <= 1e-17 * abs(s) + 1e-300:
                return s
            if k > 500:  # pragma: no cover - series converges long before
                raise NumericsError(f"E1 series failed to converge at x={x}")
    psi = -np.euler_gamma + sum(1.0 / k for k in range(1, n))
    s = ((-x) ** (n - 1) / math.factorial(n - 1)) * (psi - math.log(x))
    term = 1.0  # (-x)^m / m!
    m = 0
    while True:
        if m != n - 1:
            add = -term / (m - n + 1)
            s += add
            if m > n and abs(add) <= 1e-17 * abs(s) + 1e-300:
                return s
        m += 1
        term *= -x / m
        if m > 500:  # pragma: no cover
            raise NumericsError(f"E{n} series failed to converge at x={x}")


def _en_scaled_cf(n: int, x: float) -> float:
    # Modified Lentz evaluation of the continued fraction for e^x * E_n(x)
    # (Numerical Recipes 6.3 with the exponential left out).
    tiny = 1e-300
    b = x + n
    c = 1.0 / tiny
    d = 1.0 / b
    f = d
    for i in range(1, 1000):
        a = -i * (n - 1 + i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-15:
            return f
    raise NumericsError(f"E{n} continued fraction failed to converge at x={x}")


def _check_en_args(n: int, x: float) -> None:
    if n != int(n) or n < 1:
        raise ValueError(f"exponential integral order must be an integer >= 1, got {n}")
    if not (isinstance(x, (int, float)) and math.isfinite(x)) or x <= 0:
        raise ValueError(f"exponential integral requires x > 0, got {x}")


def scaled_expint(n: int, x: float) -> float:
    """``e^x * E_n(x)``, overflow-safe for x up to ~1e6 and beyond."""
    _check_en_args(n, x)
    n = int(n)
    if x < 1.0:
        return math.exp(x) * _en_series(n, x)
    return _en_scaled_cf(n, x)


def expint_en(n: int, x: float) -> float:
    """Exponential integral ``E_n(x) = int_1^inf e^(-x t) t^(-n) dt``."""
    _check_en_args(n, x)
    n = int(n)
    if x < 1.0:
        return _en_series(n, x)
    return math.exp(-x) * _en_scaled_cf(n, x)


def gamma_upper_negint(k: int, x: float) -> float:
    """Upper incomplete gamma ``Gamma(-k, x)`` at non-positive integer order,
    via the identity ``Gamma(-k, x) = x^(-k) E_(k+1)(x)``."""
    if k != int(k) or k < 0:
        raise ValueError(f"order -k requires integer k >= 0, got k={k}")
    en = expint_en(int(k) + 1, x)
    return x ** (-int(k)) * en


def beta_fn(a: float, b: float) -> float:
    """Beta function through log-gamma, stable for very unbalanced arguments."""
    if not (a > 0 and b > 0):
        raise ValueError(f"beta function requires positive arguments, got ({a}, {b})")
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


# ---------------------------------------------------------------------------
# the three rate-analysis integrals
# ---------------------------------------------------------------------------

def integral_i1(a: float, b: float, m: int) -> float:
    """``int_0^inf x^m e^(-a x) / (x + b) dx`` in closed form."""
    if not (a > 0 and b > 0):
        raise ValueError(f"integral_i1 requires a, b > 0, got ({a}, {b})")
    if m != int(m) or m < 0:
        raise ValueError(f"integral_i1 requires integer m >= 0, got {m}")
    m = int(m)
    s = 0.0
    for k in range(1, m + 1):
        s += math.factorial(k - 1) * (-b) ** (m - k) * a ** (-k)
    return s - (-1.0) ** (m - 1) * b ** m * scaled_expint(1, a * b)


def integral_i2(a: float, b: float, m: int) -> float:
    """``int_0^inf e^(-a x) / (x + b)^m dx`` in closed form."""
    if not (a > 0 and b > 0):
        raise ValueError(f"integral_i2 requires a, b > 0, got ({a}, {b})")
    if m != int(m) or m < 1:
        raise ValueError(f"integral_i2 requires integer m >= 1, got {m}")
    m = int(m)
    if m == 1:
        return scaled_expint(1, a * b)
    fm = math.factorial(m - 1)
    s = 0.0
    for k in range(1, m):
        s += math.factorial(k - 1) / fm * (-a) ** (m - k - 1) / b ** k
    return s + (-a) ** (m - 1) / fm * scaled_expint(1, a * b)


def integral_i3(a: float, b: float, m: int) -> float:
    """``int_0^inf e^(-a x) / ((x + b)^m (x + 1)) dx`` via partial fractions.

    The expansion has a pole at b = 1; callers must use the merged-pole
    reduction ``integral_i2(a, 1, m + 1)`` there.
    """
    if not (a > 0 and b > 0):
        raise ValueError(f"integral_i3 requires a, b > 0, got ({a}, {b})")
    if m != int(m) or m < 1:
        raise ValueError(f"integral_i3 requires integer m >= 1, got {m}")
    if abs(b - 1.0) < 1e-9:
        raise DegeneratePoleError(
            f"integral_i3 is singular at b=1 (got b={b}); use integral_i2(a, 1, m+1)"
        )
    m = int(m)
    s = 0.0
    for i in range(1, m + 1):
        s += (-1.0) ** (i - 1) * (1.0 - b) ** (-i) * integral_i2(a, b, m - i + 1)
    return s + (b - 1.0) ** (-m) * integral_i2(a, 1.0, 1)


# ---------------------------------------------------------------------------
# quadrature oracle
# ---------------------------------------------------------------------------

def quad_integrate(fn, lo: float, hi: float, spec: QuadratureSpec | None = None,
                   points=None) -> float:
    """Adaptive quadrature with failure reporting.

    Used as an independent oracle in tests and as the evaluator for the one
    rate expression that has no closed form. ``points`` seeds break points
    for integrands with sharp features. Raises :class:`NumericsError`
    carrying the achieved error estimate if the requested tolerance was not
    reached.
    """
    spec = spec or QuadratureSpec()
    res = integrate.quad(
        fn, lo, hi,
        epsabs=spec.abs_tol, epsrel=spec.rel_tol,
        limit=spec.max_subdivisions, full_output=1, points=points,
    )
    val, abserr = res[0], res[1]
    if len(res) > 3 and abserr > 10.0 * max(spec.abs_tol, spec.rel_tol * abs(val)):
        # 4th element is QUADPACK's explanation of why it gave up
        raise NumericsError(
            f"quadrature did not converge: estimate {val!r}, achieved abs "
            f"error {abserr!r} ({res[3]})"
        )
    return float(val)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def sample_complex_gaussian_vec(dim, variance_per_entry, rng, count=None):
    """Circularly-symmetric complex Gaussian vector(s), CN(0, variance * I).

    Returns shape ``(dim,)`` or ``(count, dim)``.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if not variance_per_entry > 0:
        raise ValueError(f"variance_per_entry must be > 0, got {variance_per_entry}")
    gen = _as_generator(rng)
    shape = (dim,) if count is None else (int(count), dim)
    scale = math.sqrt(variance_per_entry / 2.0)
    return scale * (gen.standard_normal(shape) + 1j * gen.standard_normal(shape))


def sample_gamma(shape, scale, rng, count=None):
    """Gamma(shape, scale) samples matching E[x] = shape*scale."""
    if not (shape > 0 and scale > 0):
        raise ValueError(f"gamma parameters must be positive, got ({shape}, {scale})")
    gen = _as_generator(rng)
    out = gen.gamma(shape, scale, size=count)
    return float(out) if count is None else out


def sample_beta_1_n(n: int, rng, count=None):
    """Beta(1, n) via the inverse CDF ``1 - U^(1/n)``; n = 0 is the point mass 1."""
    if n != int(n) or n < 0:
        raise ValueError(f"beta_1_n requires integer n >= 0, got {n}")
    gen = _as_generator(rng)
    if n == 0:
        return 1.0 if count is None else np.ones(count)
    u = gen.random(size=count)
    out = 1.0 - u ** (1.0 / n)
    return float(out) if count is None else out
