"""Shared numeric utilities: seeded random streams, complex/real conversions,
and the QR factorization used for inter-relay interference cancellation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Clip value applied to every log-likelihood ratio exposed across module
# boundaries. Keeps exp() calls in the detectors and decoders well away
# from overflow without affecting hard decisions.
LLR_MAX = 50.0

# Source-signal gain below which a fading draw is treated as unusable.
QR_GAIN_FLOOR = 1e-12

# Recorded in output manifests so result files identify their generator.
GENERATOR_KIND = "numpy-pcg64-seedseq"


class DegenerateChannelError(ValueError):
    """A fading draw left no usable dimension for the source signal."""


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream keyed by a 64-bit seed plus a stream key.

    Streams with different keys are statistically independent, and an equal
    (seed, key) pair always reproduces the same draw sequence.
    """

    seed: int
    key: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")
        for part in self.key:
            if not isinstance(part, (int, np.integer)):
                raise TypeError(f"stream key parts must be integers, got {self.key}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=tuple(self.key))
        return np.random.default_rng(ss)

    def derive(self, *subkey: int) -> "RngStream":
        """Child stream with extra key components appended."""
        return RngStream(self.seed, self.key + tuple(int(k) for k in subkey))


def clamp_llrs(llrs: np.ndarray) -> np.ndarray:
    return np.clip(llrs, -LLR_MAX, LLR_MAX)


def logsumexp(values: np.ndarray, axis: int = -1) -> np.ndarray:
    """log(sum(exp(values))) along an axis, stable against overflow."""
    peak = np.max(values, axis=axis, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(values - peak), axis=axis))
    return out + np.squeeze(peak, axis=axis)


def sample_rayleigh(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-power circular complex Gaussian entries, CN(0, 1)."""
    return np.sqrt(0.5) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_awgn(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    """Circular complex noise with the given per-entry variance."""
    if variance <= 0:
        raise ValueError(f"noise variance must be positive, got {variance}")
    return np.sqrt(variance) * sample_rayleigh(rng, shape)


def qr_positive_diagonal(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR factorization with a real, non-negative diagonal in R.

    Returns (Q, R) with matrix = Q @ R, orthonormal columns in Q and upper
    triangular R. Rotating the last diagonal entry to be real means the
    bottom row of R scales the source stream by a plain positive gain.

    Raises DegenerateChannelError when that gain falls below QR_GAIN_FLOOR,
    since the source stream would then be unrecoverable after cancellation.
    """
    q, r = np.linalg.qr(matrix)
    diag = np.diagonal(r).copy()
    mags = np.abs(diag)
    phases = np.where(mags > 0, diag / np.where(mags > 0, mags, 1.0), 1.0)
    q = q * phases[np.newaxis, :]
    r = phases.conj()[:, np.newaxis] * r
    if abs(r[-1, -1]) < QR_GAIN_FLOOR:
        raise DegenerateChannelError(
            f"source-signal gain {abs(r[-1, -1]):.3e} below {QR_GAIN_FLOOR:.0e}"
        )
    return q, r


def to_real_observation(values: np.ndarray) -> np.ndarray:
    """Stack a complex array into its real representation [Re; Im]."""
    return np.concatenate([values.real, values.imag], axis=0)


def to_real_channel(matrix: np.ndarray) -> np.ndarray:
    """Real block form of a complex matrix: [[Re, -Im], [Im, Re]].

    Satisfies to_real_channel(H) @ to_real_observation(X)
    == to_real_observation(H @ X).
    """
    return np.block([[matrix.real, -matrix.imag], [matrix.imag, matrix.real]])
