"""Beamforming and multi-user precoder construction plus SINR evaluation.

Directions are unit vectors; a stack of user directions is a (U, Nt) array
whose rows are the (unconjugated) direction vectors. Zero forcing inverts
the matrix with conjugated rows, so the nulling holds for the physical
inner products ``h_u^* f``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelState
from .codebook import Codebook, quantize
from .errors import ConfigurationError, RankError

CSIT_MODES = ("perfect", "delayed", "quantized", "quantized_delayed")

COND_LIMIT = 1e12


@dataclass
class PrecoderSet:
    """Unit-norm precoding vectors, one column per user."""

    vectors: np.ndarray  # (n_tx, n_users) complex, unit columns
    kind: str  # bf | zf | mmse
    csit: str


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def bf_vector(state: ChannelState, cb: Codebook | None, csit: str) -> np.ndarray:
    """Single-user beam along the known (possibly stale/quantized) direction."""
    if csit not in CSIT_MODES:
        raise ConfigurationError(f"unknown CSIT mode {csit!r}; expected one of {CSIT_MODES}")
    if csit in ("quantized", "quantized_delayed") and cb is None:
        raise ConfigurationError(f"CSIT mode {csit!r} requires a codebook")
    if csit == "perfect":
        return _unit(state.h_now)
    if csit == "delayed":
        return _unit(state.h_prev)
    if csit == "quantized":
        return quantize(state.h_now, cb).quantized_dir
    return quantize(state.h_prev, cb).quantized_dir


def zf_precoders(quantized_dirs: np.ndarray, csit: str = "quantized_delayed") -> PrecoderSet:
    """Zero-forcing beams from the pseudo-inverse of the stacked directions.

    Column u is orthogonal to every other input direction:
    ``dirs[u']^* f_u = 0`` for u' != u (against the directions used for the
    design, not the true channels).
    """
    dirs = np.asarray(quantized_dirs)
    u_count, _ = dirs.shape
    sv = np.linalg.svd(dirs, compute_uv=False)
    if sv[-1] == 0.0 or sv[0] / sv[-1] > COND_LIMIT:
        raise RankError(
            f"direction matrix is numerically rank deficient (cond ~ {sv[0] / max(sv[-1], 1e-300):.3e})"
        )
    h = dirs.conj()  # rows are h_u^*
    gram = h @ h.conj().T
    f = np.linalg.solve(gram, h).conj().T  # H^* (H H^*)^{-1}, shape (n_tx, U)
    f /= np.linalg.norm(f, axis=0, keepdims=True)
    return PrecoderSet(vectors=f, kind="zf", csit=csit)


def mmse_precoders(quantized_dirs: np.ndarray, snr_linear: float, n_users: int,
                   csit: str = "quantized_delayed") -> PrecoderSet:
    """Regularized zero forcing: normalized columns of H^*(H H^* + (U/P) I)^{-1}."""
    if not snr_linear > 0:
        raise ValueError(f"snr_linear must be > 0, got {snr_linear}")
    dirs = np.asarray(quantized_dirs)
    h = dirs.conj()
    gram = h @ h.conj().T + (n_users / snr_linear) * np.eye(dirs.shape[0])
    f = np.linalg.solve(gram, h).conj().T
    f /= np.linalg.norm(f, axis=0, keepdims=True)
    return PrecoderSet(vectors=f, kind="mmse", csit=csit)


def sinr_mu(h_true: np.ndarray, precoders: PrecoderSet, u: int, snr_linear: float,
            n_users: int) -> float:
    """Received SINR of user u under equal power P/U per beam."""
    if not 0 <= u < n_users:
        raise ValueError(f"user index {u} out of range for {n_users} users")
    gains = np.abs(h_true.conj() @ precoders.vectors) ** 2
    p_share = snr_linear / n_users
    signal = p_share * gains[u]
    interference = p_share * (gains.sum() - gains[u])
    return float(signal / (1.0 + interference))
