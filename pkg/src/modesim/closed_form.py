"""Closed-form ergodic rates, bounds and approximations.

All rates are in bps/Hz: the underlying expectations are evaluated in nats
through the integral identity ``E[ln(1+X)] = int (1-F_X(x))/(1+x) dx`` and
converted once by log2(e).

Conventions shared by every function here:

* ``P`` is the average transmit SNR (linear), ``U`` the number of served
  users, equal power ``P/U`` per beam in the multi-user mode.
* ``rho``/``eps_sq`` describe the two-slot channel model of
  :mod:`modesim.channel` (``eps_sq = 1 - rho^2``).
* ``delta = 2^(-B/(Nt-1))`` is the mean quantization leakage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

import mpmath

from .channel import ScenarioConfig
from .codebook import quantization_delta
from .errors import ConfigurationError
from .numerics import (
    LOG2E,
    QuadratureSpec,
    integral_i2,
    quad_integrate,
    scaled_expint,
)

_NUDGE = 1e-5
_DEGENERATE_REL = 1e-6
_TINY_VARIANCE = 1e-12

# The partial-fraction expansions behind the delayed/quantized rates cancel
# catastrophically when the two interference scales approach each other or
# when many chi-square orders pile up (large Nt at low SNR). Sums are
# accumulated together with their absolute magnitude; if the estimated
# rounding error exceeds the tolerance below, the same formula is
# re-evaluated in arbitrary precision.
_COND_ABS_TOL = 1e-11
_COND_REL_TOL = 1e-9


def _needs_rescue(value: float, abs_sum: float) -> bool:
    err = abs_sum * 1e-16
    return not math.isfinite(value) or err > max(_COND_ABS_TOL, _COND_REL_TOL * abs(value))


def _rescue_dps(value: float, abs_sum: float) -> int:
    if not math.isfinite(value) or value == 0.0:
        ratio = abs_sum
    else:
        ratio = abs_sum / abs(value)
    return min(200, 30 + int(math.log10(max(ratio, 1.0))))


def _mp_e1x(x):
    # e^x E1(x) in the working precision
    return mpmath.exp(x) * mpmath.e1(x)


def _mp_i1(a, b, m):
    s = mpmath.mpf(0)
    for k in range(1, m + 1):
        s += mpmath.factorial(k - 1) * (-b) ** (m - k) * a ** (-k)
    return s - (-1) ** (m - 1) * b ** m * _mp_e1x(a * b)


def _mp_i2(a, b, m):
    if m == 1:
        return _mp_e1x(a * b)
    fm = mpmath.factorial(m - 1)
    s = mpmath.mpf(0)
    for k in range(1, m):
        s += mpmath.factorial(k - 1) / fm * (-a) ** (m - k - 1) / b ** k
    return s + (-a) ** (m - 1) / fm * _mp_e1x(a * b)


def _mp_i3(a, b, m):
    s = mpmath.mpf(0)
    for i in range(1, m + 1):
        s += (-1) ** (i - 1) * (1 - b) ** (-i) * _mp_i2(a, b, m - i + 1)
    return s + (b - 1) ** (-m) * _mp_i2(a, 1, 1)


def _i1_parts(a: float, b: float, m: int):
    total = abs_sum = 0.0
    for k in range(1, m + 1):
        t = math.factorial(k - 1) * (-b) ** (m - k) * a ** (-k)
        total += t
        abs_sum += abs(t)
    t = -((-1.0) ** (m - 1)) * b ** m * scaled_expint(1, a * b)
    return total + t, abs_sum + abs(t)


def _i2_parts(a: float, b: float, m: int):
    if m == 1:
        v = scaled_expint(1, a * b)
        return v, v
    fm = math.factorial(m - 1)
    total = abs_sum = 0.0
    for k in range(1, m):
        t = math.factorial(k - 1) / fm * (-a) ** (m - k - 1) / b ** k
        total += t
        abs_sum += abs(t)
    t = (-a) ** (m - 1) / fm * scaled_expint(1, a * b)
    return total + t, abs_sum + abs(t)


def _i3_parts(a: float, b: float, m: int):
    total = abs_sum = 0.0
    for i in range(1, m + 1):
        v, s = _i2_parts(a, b, m - i + 1)
        scale = (-1.0) ** (i - 1) * (1.0 - b) ** (-i)
        total += scale * v
        abs_sum += abs(scale) * s
    v, s = _i2_parts(a, 1.0, 1)
    total += (b - 1.0) ** (-m) * v
    abs_sum += abs(b - 1.0) ** (-m) * s
    return total, abs_sum


# ---------------------------------------------------------------------------
# perfect-CSIT references
# ---------------------------------------------------------------------------

def r_bf_perfect(snr_linear: float, n_tx: int) -> float:
    """Ergodic rate of beamforming with perfect CSIT (maximal ratio combining)."""
    if not snr_linear > 0:
        raise ValueError(f"snr_linear must be > 0, got {snr_linear}")
    x = 1.0 / snr_linear
    return LOG2E * sum(scaled_expint(k + 1, x) for k in range(n_tx))


def r_zf_perfect_per_user(snr_linear: float, n_users: int) -> float:
    """Per-user ergodic rate of zero forcing with perfect CSIT (SISO Rayleigh)."""
    if not snr_linear > 0:
        raise ValueError(f"snr_linear must be > 0, got {snr_linear}")
    return LOG2E * scaled_expint(1, n_users / snr_linear)


def r_zf_perfect_sum(snr_linear: float, n_users: int) -> float:
    return n_users * r_zf_perfect_per_user(snr_linear, n_users)


# ---------------------------------------------------------------------------
# single-user mode with quantization and/or delay
# ---------------------------------------------------------------------------

def avg_snr_bf_qd(cfg: ScenarioConfig) -> float:
    """Upper bound on the mean received SNR of the stale, quantized beam.

    ``P Nt (rho^2 (1 - (Nt-1)/Nt 2^(-B/(Nt-1))) + eps^2/Nt)``; feeds the
    Jensen bound, so tests check the bound direction, not equality.
    """
    nt = cfg.n_tx
    if cfg.feedback_bits is None or nt == 1:
        dist = 0.0
    else:
        dist = (nt - 1) / nt * quantization_delta(nt, cfg.feedback_bits)
    delta_q = 1.0 - dist
    delta_d = cfg.eps_sq / nt
    return cfg.snr_linear * nt * (cfg.rho_sq * delta_q + delta_d)


def r_bf_quantized(snr_linear: float, n_tx: int, bits: int,
                   quad: QuadratureSpec | None = None) -> float:
    """Ergodic rate of beamforming from a B-bit RVQ codebook (no delay).

    Perfect-CSIT rate minus a quantization-loss integral over [0, 1]. The
    integrand couples a steep codebook weight with a scaled exponential
    integral; both factors are evaluated in log/scaled space so the result
    stays finite for any (Nt, B, P) on the operating grid.
    """
    if not snr_linear > 0:
        raise ValueError(f"snr_linear must be > 0, got {snr_linear}")
    if bits < 0:
        raise ValueError(f"bits must be >= 0, got {bits}")
    if n_tx == 1:
        # a single antenna has no direction to quantize
        return r_bf_perfect(snr_linear, 1)
    big_l = 2.0 ** bits
    first = sum(scaled_expint(k + 1, 1.0 / snr_linear) for k in range(n_tx))

    def integrand(x: float) -> float:
        if x <= 0.0 or x >= 1.0:
            return 0.0
        base = (1.0 - x) ** (n_tx - 1)
        if big_l > 1e3:
            logw = big_l * math.log1p(-base)
            if logw < -745.0:
                return 0.0
            w = math.exp(logw)
        else:
            w = (1.0 - base) ** big_l
        if w == 0.0:
            return 0.0
        return w * (n_tx / x) * scaled_expint(n_tx + 1, 1.0 / (snr_linear * x))

    # the codebook weight turns on near x = 1 - (ln 2 / L)^(1/(Nt-1)); seed
    # the subdivision there so the quadrature cannot miss a thin sliver
    pts = sorted(
        {
            min(max(1.0 - (c * math.log(2.0) / big_l) ** (1.0 / (n_tx - 1)), 1e-9), 1.0 - 1e-9)
            for c in (0.1, 1.0, 10.0)
        }
    )
    loss = quad_integrate(integrand, 0.0, 1.0, quad, points=pts)
    return LOG2E * (first - loss)


def r_bf_qd_approx(cfg: ScenarioConfig) -> float:
    """Quantized + delayed beamforming, approximated as quantized-only at
    the delay-discounted SNR ``rho^2 P``."""
    if cfg.feedback_bits is None:
        raise ConfigurationError("r_bf_qd_approx needs feedback_bits; use r_bf_delay for delay-only")
    return r_bf_quantized(cfg.rho_sq * cfg.snr_linear, cfg.n_tx, cfg.feedback_bits)


@dataclass(frozen=True)
class BfDelayParams:
    """Parameters of the two-term SNR model ``eta1*chi2_{2Nt} + eta2*chi2_2``
    used for the delayed (unquantized) beam."""

    eta1: float
    eta2: float
    a0: float
    n_tx: int

    @classmethod
    def from_values(cls, snr_linear: float, n_tx: int, rho_sq: float) -> "BfDelayParams":
        eta1 = snr_linear * rho_sq
        eta2 = snr_linear * (1.0 - rho_sq)
        if not (eta1 > 0 and eta2 > 0):
            raise ValueError(f"degenerate SNR split (eta1={eta1}, eta2={eta2})")
        if abs(eta1 - eta2) <= _DEGENERATE_REL * max(eta1, eta2):
            # removable singularity of the partial fractions; nudge the
            # smaller rate, the perturbation is far below model error
            if eta1 <= eta2:
                eta1 *= 1.0 - _NUDGE
            else:
                eta2 *= 1.0 - _NUDGE
        return cls(eta1=eta1, eta2=eta2, a0=eta2 / (eta2 - eta1), n_tx=n_tx)

    def snr_cdf(self, x) -> np.ndarray:
        """CDF of the modeled SNR (for validity checks)."""
        x = np.asarray(x, dtype=float)
        nt, a0 = self.n_tx, self.a0
        inner = np.zeros_like(x)
        for i in range(nt):
            for l in range(i + 1):
                inner += a0 ** (nt - 1 - i) / math.factorial(i - l) * (x / self.eta1) ** (i - l)
        return 1.0 - a0 ** nt * np.exp(-x / self.eta2) + (a0 - 1.0) * np.exp(-x / self.eta1) * inner


def r_bf_delay(cfg: ScenarioConfig) -> float:
    """Ergodic rate of beamforming on the stale direction (no quantization)."""
    return rate_bf_delay(cfg.snr_linear, cfg.n_tx, cfg.rho_sq)


def rate_bf_delay(snr_linear: float, n_tx: int, rho_sq: float) -> float:
    if not snr_linear > 0:
        raise ValueError(f"snr_linear must be > 0, got {snr_linear}")
    if n_tx == 1:
        # a one-antenna beam is a pure phase: staleness costs nothing
        return r_bf_perfect(snr_linear, 1)
    eps_sq = 1.0 - rho_sq
    if eps_sq < _TINY_VARIANCE:
        return r_bf_perfect(snr_linear * rho_sq, n_tx)
    if rho_sq < _TINY_VARIANCE:
        # beam is independent of the channel: scalar Rayleigh at full power
        return LOG2E * scaled_expint(1, 1.0 / (snr_linear * eps_sq))
    eta1, eta2 = snr_linear * rho_sq, snr_linear * eps_sq
    if abs(eta1 - eta2) <= _DEGENERATE_REL * max(eta1, eta2):
        # merged scales: the SNR collapses to a single Gamma(Nt+1) variable
        eta = 0.5 * (eta1 + eta2)
        return LOG2E * sum(scaled_expint(k + 1, 1.0 / eta) for k in range(n_tx + 1))
    value, abs_sum = _bf_delay_sum(eta1, eta2, n_tx)
    if _needs_rescue(value, abs_sum):
        with mpmath.workdps(_rescue_dps(value, abs_sum)):
            value = float(_bf_delay_sum_mp(eta1, eta2, n_tx))
    return max(0.0, LOG2E * value)


def _bf_delay_sum(eta1: float, eta2: float, nt: int):
    a0 = eta2 / (eta2 - eta1)
    v, s = _i2_parts(1.0 / eta2, 1.0, 1)
    total = a0 ** nt * v
    abs_sum = abs(a0) ** nt * s
    one_minus_a0 = 1.0 - a0
    for i in range(nt):
        for l in range(i + 1):
            coeff = one_minus_a0 * a0 ** (nt - 1 - i) / math.factorial(i - l) \
                * eta1 ** (-(i - l))
            v, s = _i1_parts(1.0 / eta1, 1.0, i - l)
            # the +(1 - a0) sign fixes a sign slip in the printed expansion,
            # verified against Monte Carlo of the same SNR model
            total += coeff * v
            abs_sum += abs(coeff) * s
    return total, abs_sum


def _bf_delay_sum_mp(eta1: float, eta2: float, nt: int):
    e1m, e2m = mpmath.mpf(eta1), mpmath.mpf(eta2)
    a0 = e2m / (e2m - e1m)
    total = a0 ** nt * _mp_i2(1 / e2m, 1, 1)
    for i in range(nt):
        for l in range(i + 1):
            total += (1 - a0) * a0 ** (nt - 1 - i) / mpmath.factorial(i - l) \
                * e1m ** (-(i - l)) * _mp_i1(1 / e1m, 1, i - l)
    return total


# ---------------------------------------------------------------------------
# multi-user mode: interference statistics
# ---------------------------------------------------------------------------

def delta_zf_interference(cfg: ScenarioConfig, per_user_rho: float | None = None,
                          per_user_eps_sq: float | None = None) -> float:
    """Mean noise-plus-interference of one zero-forcing user.

    ``1 + (U-1) (P/U) (rho^2 * U/(U-1) * delta + eps^2)`` with
    ``delta = 2^(-B/(Nt-1))`` (0 when directions are unquantized).
    """
    _check_mu(cfg)
    u = cfg.n_users
    rho_sq = cfg.rho_sq if per_user_rho is None else per_user_rho ** 2
    eps_sq = cfg.eps_sq if per_user_eps_sq is None else per_user_eps_sq
    if cfg.feedback_bits is None:
        delta = 0.0
    else:
        delta = quantization_delta(cfg.n_tx, cfg.feedback_bits)
    delta_q = u / (u - 1.0) * delta
    return 1.0 + (u - 1.0) * cfg.snr_linear / u * (rho_sq * delta_q + eps_sq)


def required_bits(delta0: float, snr_linear: float, rho_sq: float, n_tx: int,
                  n_users: int) -> float | None:
    """Feedback bits per user that cap the per-user rate loss at log2(delta0).

    Returns None when infeasible: the delay term alone already exceeds the
    loss budget, so no codebook size can meet it.
    """
    if not delta0 > 1:
        raise ValueError(f"delta0 must exceed 1, got {delta0}")
    if not (0 < rho_sq <= 1):
        raise ValueError(f"rho_sq must lie in (0, 1], got {rho_sq}")
    bracket = (delta0 - 1.0) / (rho_sq * snr_linear) \
        - (n_users - 1.0) / n_users * (1.0 / rho_sq - 1.0)
    if bracket <= 0.0:
        return None
    return -(n_tx - 1.0) * math.log2(bracket)


def r_zf_lower_bound(cfg: ScenarioConfig) -> float:
    """Rate-loss lower bound: perfect-CSIT sum rate minus the log of the mean
    interference blow-up per user. Loose by construction; floored at 0."""
    _check_mu(cfg)
    value = r_zf_perfect_sum(cfg.snr_linear, cfg.n_users) \
        - cfg.n_users * math.log2(delta_zf_interference(cfg))
    return max(0.0, value)


# ---------------------------------------------------------------------------
# multi-user mode: achievable-rate approximations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZfApproxParams:
    """Parameters of the SINR model ``alpha*z / (1 + beta*(d1*y1 + d2*y2))``
    with z ~ chi2_2 and y1, y2 ~ chi2_{2M} independent.

    The coefficient lists expand the pdf of ``d1*y1 + d2*y2`` as
    ``sum_j sum_i a_i^{(j)} y^i exp(-y/d_j)``.
    """

    alpha: float
    beta: float
    delta1: float
    delta2: float
    m: int
    a1_coeffs: list = field(default_factory=list)
    a2_coeffs: list = field(default_factory=list)

    @classmethod
    def from_values(cls, p_share: float, delta1: float, delta2: float, m: int) -> "ZfApproxParams":
        if min(delta1, delta2) < _TINY_VARIANCE:
            raise ValueError("both interference scales must be positive; use the single-term form")
        if abs(delta1 - delta2) <= _DEGENERATE_REL * max(delta1, delta2):
            if delta1 <= delta2:
                delta1 *= 1.0 - _NUDGE
            else:
                delta2 *= 1.0 - _NUDGE
        a1, a2 = [], []
        fac_m1 = math.factorial(m - 1)
        for i in range(m):
            comb = math.factorial(2 * (m - 1) - i) / (math.factorial(i) * math.factorial(m - 1 - i))
            a1.append(
                comb / (delta1 ** (i + 1) * fac_m1)
                * (delta1 / (delta1 - delta2)) ** m
                * (delta2 / (delta2 - delta1)) ** (m - 1 - i)
            )
            a2.append(
                comb / (delta2 ** (i + 1) * fac_m1)
                * (delta2 / (delta2 - delta1)) ** m
                * (delta1 / (delta1 - delta2)) ** (m - 1 - i)
            )
        return cls(alpha=p_share, beta=p_share, delta1=delta1, delta2=delta2,
                   m=m, a1_coeffs=a1, a2_coeffs=a2)

    def interference_pdf(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for coeffs, dj in ((self.a1_coeffs, self.delta1), (self.a2_coeffs, self.delta2)):
            powers = sum(c * y ** i for i, c in enumerate(coeffs))
            out += powers * np.exp(-y / dj)
        return out


def _rate_exp_over_gamma(p_share: float, scale: float, m: int) -> float:
    # E[log2(1 + p_share*z / (1 + p_share*scale*y))], z ~ Exp(1), y ~ Gamma(m, 1)
    a = 1.0 / p_share
    b = 1.0 / scale
    if abs(b - 1.0) < 1e-9:
        return LOG2E * integral_i2(a, 1.0, m + 1)
    value, abs_sum = _i3_parts(a, b, m)
    scaled = b ** m
    if _needs_rescue(scaled * value, scaled * abs_sum):
        with mpmath.workdps(_rescue_dps(scaled * value, scaled * abs_sum)):
            return max(0.0, float(LOG2E * mpmath.mpf(b) ** m * _mp_i3(a, b, m)))
    return max(0.0, LOG2E * scaled * value)


def r_zf_qd_approx_per_user(cfg: ScenarioConfig) -> float:
    """Per-user zero-forcing rate with quantized, delayed directions.

    Models the residual interference as the independent sum of a
    quantization part (scale ``rho^2 delta``) and a delay part (scale
    ``eps^2``); either part degenerating to zero falls back to the
    single-term model.
    """
    _check_mu(cfg)
    nt, u, p = cfg.n_tx, cfg.n_users, cfg.snr_linear
    m = nt - 1
    p_share = p / u
    eps_sq = cfg.eps_sq
    if cfg.feedback_bits is None:
        delta1 = 0.0
    else:
        delta1 = cfg.rho_sq * quantization_delta(nt, cfg.feedback_bits)
    delta2 = eps_sq
    small1 = delta1 < _TINY_VARIANCE
    small2 = delta2 < _TINY_VARIANCE
    if small1 and small2:
        return r_zf_perfect_per_user(p, u)
    if small1:
        return _rate_exp_over_gamma(p_share, delta2, m)
    if small2:
        return _rate_exp_over_gamma(p_share, delta1, m)
    if abs(delta1 - delta2) <= _DEGENERATE_REL * max(delta1, delta2):
        # merged scales: the interference collapses to one Gamma(2M) variable
        return _rate_exp_over_gamma(p_share, 0.5 * (delta1 + delta2), 2 * m)
    value, abs_sum = _zf_qd_sum(p_share, delta1, delta2, m)
    if _needs_rescue(value, abs_sum):
        with mpmath.workdps(_rescue_dps(value, abs_sum)):
            value = float(_zf_qd_sum_mp(p_share, delta1, delta2, m))
    return max(0.0, LOG2E * value)


def _zf_qd_sum(p_share: float, delta1: float, delta2: float, m: int):
    par = ZfApproxParams.from_values(p_share, delta1, delta2, m)
    a = 1.0 / par.alpha
    total = abs_sum = 0.0
    for coeffs, dj in ((par.a1_coeffs, par.delta1), (par.a2_coeffs, par.delta2)):
        bj = par.alpha / (par.beta * dj)
        for i, c in enumerate(coeffs):
            w = c * math.factorial(i) * (par.alpha / par.beta) ** (i + 1)
            if abs(bj - 1.0) < 1e-9:
                v = s = integral_i2(a, 1.0, i + 2)
            else:
                v, s = _i3_parts(a, bj, i + 1)
            total += w * v
            abs_sum += abs(w) * s
    return total, abs_sum


def _zf_qd_sum_mp(p_share: float, delta1: float, delta2: float, m: int):
    ps = mpmath.mpf(p_share)
    d1, d2 = mpmath.mpf(delta1), mpmath.mpf(delta2)
    a = 1 / ps
    fac_m1 = mpmath.factorial(m - 1)
    total = mpmath.mpf(0)
    for da, db in ((d1, d2), (d2, d1)):
        for i in range(m):
            comb = mpmath.factorial(2 * (m - 1) - i) / (
                mpmath.factorial(i) * mpmath.factorial(m - 1 - i))
            c = comb / (da ** (i + 1) * fac_m1) * (da / (da - db)) ** m \
                * (db / (db - da)) ** (m - 1 - i)
            bj = 1 / da
            if abs(bj - 1) < 1e-9:
                val = _mp_i2(a, 1, i + 2)
            else:
                val = _mp_i3(a, bj, i + 1)
            total += c * mpmath.factorial(i) * val
    return total


def r_zf_qd_approx_sum(cfg: ScenarioConfig) -> float:
    return cfg.n_users * r_zf_qd_approx_per_user(cfg)


def r_zf_delay(cfg: ScenarioConfig) -> float:
    """Per-user zero-forcing rate with stale (unquantized) directions.

    Interference model: ``(P/U) eps^2 * chi2_{2(Nt-1)}``. The same form with
    ``eps^2`` replaced by ``delta`` serves a quantized-only system (see
    :func:`r_zf_qd_approx_per_user`, which dispatches automatically).
    """
    _check_mu(cfg)
    return rate_zf_delay(cfg.snr_linear, cfg.n_users, cfg.n_tx, cfg.eps_sq)


def rate_zf_delay(snr_linear: float, n_users: int, n_tx: int, eps_sq: float) -> float:
    if n_tx < 2:
        raise ValueError(f"zero forcing needs n_tx >= 2, got {n_tx}")
    if eps_sq < _TINY_VARIANCE:
        return r_zf_perfect_per_user(snr_linear, n_users)
    return _rate_exp_over_gamma(snr_linear / n_users, eps_sq, n_tx - 1)


def _check_mu(cfg: ScenarioConfig) -> None:
    if cfg.n_tx < 2 or cfg.n_users != cfg.n_tx:
        raise ConfigurationError(
            f"multi-user mode needs n_users == n_tx >= 2, got U={cfg.n_users}, Nt={cfg.n_tx}"
        )
