"""Scenario configuration and the Gauss-Markov time-varying channel.

The channel between two slots is ``h[n] = rho * h[n-1] + e[n]`` with
``e ~ CN(0, eps^2 I)`` independent of the past sample, so both slots are
marginally CN(0, I) when ``eps^2 = 1 - rho^2``. The available transmitter
knowledge is always the older slot (possibly quantized); the imperfection
scenario only determines ``eps^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError
from .numerics import RngStream, _as_generator, bessel_j0, sample_complex_gaussian_vec

SPEED_OF_LIGHT = 2.998e8  # m/s

CSIT_VARIANTS = ("delay", "estimation", "analog_feedback", "analog_feedback_prediction")


def correlation_from_doppler(doppler_ts: float) -> float:
    """Slot-to-slot correlation under isotropic scattering: J0(2 pi fd Ts)."""
    if doppler_ts < 0:
        raise ValueError(f"normalized Doppler must be >= 0, got {doppler_ts}")
    return bessel_j0(2.0 * math.pi * doppler_ts)


def error_variance(variant: str, params: dict, rho: float) -> float:
    """Innovation variance eps^2 of the CSIT for each imperfection scenario."""
    if variant == "delay":
        return 1.0 - rho * rho
    if variant == "estimation":
        tau, gamma = _require(params, variant, "tau_p", "gamma_p")
        return 1.0 / (1.0 + tau * gamma)
    if variant == "analog_feedback":
        tau, gamma = _require(params, variant, "tau_ul", "gamma_ul")
        return 1.0 / (1.0 + tau * gamma)
    if variant == "analog_feedback_prediction":
        d, eps0 = _require(params, variant, "d", "eps0")
        if d != int(d) or d < 1:
            raise ConfigurationError(f"prediction depth d must be an integer >= 1, got {d}")
        if not 0.0 <= eps0 <= 1.0:
            raise ConfigurationError(f"eps0 must lie in [0, 1], got {eps0}")
        rho_sq = rho * rho
        tail = sum(rho_sq ** l for l in range(int(d)))
        return rho_sq ** int(d) * eps0 + (1.0 - rho_sq) * tail
    raise ConfigurationError(f"unknown CSIT variant {variant!r}; expected one of {CSIT_VARIANTS}")


def _require(params, variant, *names):
    try:
        values = tuple(params[name] for name in names)
    except KeyError as exc:
        raise ConfigurationError(
            f"CSIT variant {variant!r} requires parameter {exc.args[0]!r}"
        ) from None
    for name, value in zip(names, values):
        if not value >= 0:
            raise ConfigurationError(f"parameter {name!r} must be non-negative, got {value}")
    return values


@dataclass
class ScenarioConfig:
    """All physical and system parameters of one operating point.

    ``n_users`` is the number of users served in the multi-user mode and must
    equal ``n_tx`` (single-user mode always serves one user regardless).
    ``feedback_bits = None`` means unquantized directions (delay only).
    The normalized Doppler can be given directly or derived from
    velocity / carrier / symbol period.
    """

    n_tx: int
    n_users: int
    snr_db: float
    feedback_bits: int | None = None
    doppler_ts: float | None = None
    symbol_period_s: float | None = None
    carrier_hz: float | None = None
    velocity_kmh: float | None = None
    csit_variant: str = "delay"
    variant_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_tx < 1:
            raise ConfigurationError(f"n_tx must be >= 1, got {self.n_tx}")
        if self.n_users not in (1, self.n_tx):
            raise ConfigurationError(
                f"n_users must be 1 (SU) or n_tx (MU), got {self.n_users} with n_tx={self.n_tx}"
            )
        if self.feedback_bits is not None and self.feedback_bits < 0:
            raise ConfigurationError(f"feedback_bits must be >= 0, got {self.feedback_bits}")
        if self.csit_variant not in CSIT_VARIANTS:
            raise ConfigurationError(
                f"unknown CSIT variant {self.csit_variant!r}; expected one of {CSIT_VARIANTS}"
            )
        if self.doppler_ts is None:
            if None in (self.velocity_kmh, self.carrier_hz, self.symbol_period_s):
                raise ConfigurationError(
                    "doppler_ts missing: give it directly or provide velocity_kmh, "
                    "carrier_hz and symbol_period_s"
                )
            fd = (self.velocity_kmh / 3.6) * self.carrier_hz / SPEED_OF_LIGHT
            self.doppler_ts = fd * self.symbol_period_s
        if self.doppler_ts < 0:
            raise ConfigurationError(f"doppler_ts must be >= 0, got {self.doppler_ts}")
        # touch the variant formula early so bad params fail at construction
        self.eps_sq

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def rho(self) -> float:
        """Gauss-Markov coefficient of the two-slot model."""
        if self.csit_variant == "delay":
            return correlation_from_doppler(self.doppler_ts)
        return math.sqrt(max(0.0, 1.0 - self.eps_sq))

    @property
    def rho_sq(self) -> float:
        return self.rho ** 2

    @property
    def eps_sq(self) -> float:
        rho_doppler = correlation_from_doppler(self.doppler_ts)
        return error_variance(self.csit_variant, self.variant_params, rho_doppler)

    def at_snr_db(self, snr_db: float) -> "ScenarioConfig":
        return replace(self, snr_db=snr_db)


@dataclass
class ChannelState:
    """One channel realization plus its delayed predecessor."""

    h_now: np.ndarray
    h_prev: np.ndarray
    rho: float
    eps_sq: float


def draw_channel_pair(cfg: ScenarioConfig, user: int, rng) -> ChannelState:
    """Draw (h[n-1], h[n]) for one user.

    ``h[n-1] ~ CN(0, I)`` and ``h[n] = rho h[n-1] + e`` with
    ``e ~ CN(0, eps^2 I)``, so the current slot is also CN(0, I). Channels
    are independent across users: when ``rng`` is an :class:`RngStream`, the
    user index refines the stream; a plain generator is consumed in place.
    """
    gen = rng.generator(user) if isinstance(rng, RngStream) else _as_generator(rng)
    rho, eps_sq = cfg.rho, cfg.eps_sq
    h_prev = sample_complex_gaussian_vec(cfg.n_tx, 1.0, gen)
    if eps_sq > 0.0:
        e = sample_complex_gaussian_vec(cfg.n_tx, eps_sq, gen)
        h_now = rho * h_prev + e
    else:
        h_now = rho * h_prev
    return ChannelState(h_now=h_now, h_prev=h_prev, rho=rho, eps_sq=eps_sq)
