"""Random vector quantization of channel directions and its statistics.

A codebook holds ``2^B`` isotropic unit vectors; each user quantizes its
channel direction to the codeword with the largest absolute inner product.
For codebooks too large to enumerate, the quantization-cell approximation
replaces explicit search: the squared quantization angle ``sin^2(theta)``
then has CDF ``(s / delta)^(Nt - 1)`` on ``[0, delta]`` with
``delta = 2^(-B / (Nt - 1))``, which makes the per-interferer quantization
leakage ``|h^* f|^2`` exactly exponential with mean ``delta``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError
from .numerics import (
    RngStream,
    _as_generator,
    beta_fn,
    sample_beta_1_n,
    sample_complex_gaussian_vec,
    sample_gamma,
)

MAX_EXPLICIT_BITS = 24


@dataclass
class Codebook:
    """Per-user set of 2^B unit-norm direction vectors (rows of ``vectors``)."""

    user: int
    vectors: np.ndarray  # (2^B, n_tx) complex, unit rows
    bits: int


@dataclass
class QuantizationResult:
    index: int
    quantized_dir: np.ndarray
    cos_sq: float
    sin_sq: float


def quantization_delta(n_tx: int, bits: int) -> float:
    """Mean of the cell-approximation leakage, ``2^(-B / (Nt - 1))``."""
    if n_tx < 2:
        raise ValueError(f"quantization needs n_tx >= 2, got {n_tx}")
    return 2.0 ** (-bits / (n_tx - 1))


def generate_rvq(n_tx: int, bits: int, user: int, rng) -> Codebook:
    """Draw a random codebook of 2^bits isotropic unit vectors.

    Distinct users fed from the same :class:`RngStream` get independent
    codebooks (the user index refines the stream).
    """
    if bits < 0:
        raise ValueError(f"bits must be >= 0, got {bits}")
    if bits > MAX_EXPLICIT_BITS:
        raise CapacityError(
            f"explicit RVQ with B={bits} needs 2^{bits} codewords; use the "
            "cell-approximation sampling instead"
        )
    gen = rng.generator(user) if isinstance(rng, RngStream) else _as_generator(rng)
    raw = sample_complex_gaussian_vec(n_tx, 1.0, gen, count=2 ** bits)
    vectors = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    return Codebook(user=user, vectors=vectors, bits=bits)


def quantize(h: np.ndarray, cb: Codebook) -> QuantizationResult:
    """Map a channel vector to its closest codeword by |inner product|.

    Exhaustive argmax; ties break to the lowest index. Invariant to scaling
    and phase rotation of ``h``.
    """
    h = np.asarray(h)
    norm = np.linalg.norm(h)
    if norm == 0.0:
        raise ValueError("cannot quantize the zero vector")
    hdir = h / norm
    corr = np.abs(cb.vectors @ hdir.conj())
    index = int(np.argmax(corr))
    cos_sq = float(min(corr[index] ** 2, 1.0))
    return QuantizationResult(
        index=index,
        quantized_dir=cb.vectors[index],
        cos_sq=cos_sq,
        sin_sq=1.0 - cos_sq,
    )


def expected_sq_distortion(n_tx: int, bits: int):
    """Mean squared quantization angle of RVQ and its two-sided bound.

    Returns ``(exact, (lower, upper))`` where the exact value is
    ``2^B beta(2^B, Nt/(Nt-1))`` and the bounds are
    ``(Nt-1)/Nt * 2^(-B/(Nt-1))`` and ``2^(-B/(Nt-1))``.
    """
    if n_tx < 2:
        raise ValueError(f"quantization angle undefined for n_tx={n_tx}")
    if bits < 0:
        raise ValueError(f"bits must be >= 0, got {bits}")
    big_l = 2.0 ** bits
    exact = big_l * beta_fn(big_l, n_tx / (n_tx - 1.0))
    upper = quantization_delta(n_tx, bits)
    lower = (n_tx - 1.0) / n_tx * upper
    return exact, (lower, upper)


def cell_approx_interference_sample(n_tx: int, bits: int, rng, count=None):
    """Leakage power ``|h^* f|^2`` onto another user's beam, cell approximation.

    Built as Gamma(Nt-1, delta) * Beta(1, Nt-2), which marginally is
    exponential with mean ``delta``.
    """
    delta = quantization_delta(n_tx, bits)
    gen = _as_generator(rng)
    g = sample_gamma(n_tx - 1.0, delta, gen, count=count)
    b = sample_beta_1_n(n_tx - 2, gen, count=count)
    return g * b


def cell_approx_sin_sq(n_tx: int, bits: int, rng, count=None):
    """Squared quantization angle under the cell approximation.

    Inverse CDF of ``(s/delta)^(Nt-1)`` on [0, delta].
    """
    delta = quantization_delta(n_tx, bits)
    gen = _as_generator(rng)
    u = gen.random(size=count)
    return delta * u ** (1.0 / (n_tx - 1))


def rvq_best_sin_sq(n_tx: int, bits: int, rng, count=None):
    """Exact law of the squared angle to the best codeword of an RVQ codebook.

    Each codeword's squared angle to the channel is an independent
    Beta(Nt-1, 1) variable, so the minimum over 2^B codewords has CDF
    ``1 - (1 - s^(Nt-1))^(2^B)``; sampled by inverting with one uniform.
    Exactly matches explicit codeword search in distribution.
    """
    if n_tx < 2:
        raise ValueError(f"quantization needs n_tx >= 2, got {n_tx}")
    gen = _as_generator(rng)
    big_l = 2.0 ** bits
    u = gen.random(size=count)
    with np.errstate(divide="ignore"):  # u == 0 maps to the worst angle, 1
        out = (-np.expm1(np.log(u) / big_l)) ** (1.0 / (n_tx - 1))
    return float(out) if count is None else out


def dirs_at_angle(hdirs: np.ndarray, sin_sq: np.ndarray, gen) -> np.ndarray:
    """Unit vectors at the given squared angle from each unit row of ``hdirs``,
    with the error direction isotropic in the orthogonal complement (the
    distribution of an isotropic codeword conditioned on its angle)."""
    hdirs = np.asarray(hdirs)
    n_tx = hdirs.shape[-1]
    lead = hdirs.shape[:-1]
    sin_sq = np.broadcast_to(np.asarray(sin_sq), lead)
    w = sample_complex_gaussian_vec(n_tx, 1.0, gen, count=max(int(np.prod(lead)), 1))
    w = w.reshape(lead + (n_tx,))
    w -= np.sum(hdirs.conj() * w, axis=-1, keepdims=True) * hdirs
    w /= np.linalg.norm(w, axis=-1, keepdims=True)
    return np.sqrt(1.0 - sin_sq)[..., None] * hdirs + np.sqrt(sin_sq)[..., None] * w


def _sampled_quantized_dirs(hdirs: np.ndarray, bits: int, gen, law) -> np.ndarray:
    hdirs = np.asarray(hdirs)
    n_tx = hdirs.shape[-1]
    lead = hdirs.shape[:-1]
    sin_sq = law(n_tx, bits, gen, count=max(int(np.prod(lead)), 1))
    return dirs_at_angle(hdirs, np.asarray(sin_sq).reshape(lead), gen)


def rvq_quantized_dirs(hdirs: np.ndarray, bits: int, gen) -> np.ndarray:
    """Quantized directions with the exact RVQ best-codeword law."""
    return _sampled_quantized_dirs(hdirs, bits, gen, rvq_best_sin_sq)


def cell_approx_quantized_dirs(hdirs: np.ndarray, bits: int, gen) -> np.ndarray:
    """Quantized directions under the quantization-cell approximation."""
    return _sampled_quantized_dirs(hdirs, bits, gen, cell_approx_sin_sq)
