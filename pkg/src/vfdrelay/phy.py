"""Modulation and soft detection for the two-stream relay channel.

The destination detector works on the real-stacked observation model and
enumerates joint (relay, source) symbol hypotheses. Relay-stream bits get
the reliability-aware treatment: their feedback priors are flip-adjusted by
the current relay decoding-error probability, and their output LLRs mix the
two flip cases so a confidently wrong relay cannot poison the combiner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fec import BitFrame, _expect_stage
from .numerics import clamp_llrs, logsumexp

# Estimated relay error probabilities are clamped to this range; an exact
# zero would let a confident wrong prior lock the detector in.
PE_MIN = 1e-6
PE_MAX = 0.5

# Effective detector variance in noiseless runs, where drawing real noise
# with zero variance is disallowed. Small enough to saturate every LLR.
NOISELESS_VARIANCE = 1e-4


@dataclass(frozen=True)
class Constellation:
    """Complex symbol alphabet plus the bit label of each point (MSB first)."""

    points: np.ndarray
    bit_labels: np.ndarray

    def __post_init__(self) -> None:
        if self.points.ndim != 1 or self.bit_labels.ndim != 2:
            raise ValueError("points are a vector, bit labels a (Q, B) table")
        if self.points.size != self.bit_labels.shape[0]:
            raise ValueError("one bit label per constellation point")

    @property
    def bits_per_symbol(self) -> int:
        return self.bit_labels.shape[1]


def qpsk() -> Constellation:
    """Gray-mapped QPSK: bits (b1, b0) -> ((1-2*b1) + 1j*(1-2*b0)) / sqrt(2)."""
    labels = np.array([[b1, b0] for b1 in (0, 1) for b0 in (0, 1)], dtype=np.int8)
    points = ((1 - 2 * labels[:, 0]) + 1j * (1 - 2 * labels[:, 1])) / np.sqrt(2.0)
    return Constellation(points=points, bit_labels=labels)


@dataclass
class SymbolFrame:
    """Modulated symbols and which node's stream they belong to."""

    symbols: np.ndarray
    origin: str = "source"

    def __post_init__(self) -> None:
        if self.origin not in ("source", "relay"):
            raise ValueError(f"unknown origin {self.origin!r}")

    def __len__(self) -> int:
        return self.symbols.size


def modulate(frame: BitFrame, cmap: Constellation, origin: str = "source") -> SymbolFrame:
    _expect_stage(frame, "channel", "modulate")
    width = cmap.bits_per_symbol
    if len(frame) % width:
        raise ValueError(f"frame length {len(frame)} not a multiple of {width}")
    weights = 1 << np.arange(width - 1, -1, -1)
    idx = frame.bits.reshape(-1, width) @ weights
    return SymbolFrame(cmap.points[idx], origin)


def llr_to_posterior(llrs: np.ndarray) -> np.ndarray:
    """Probability of logical 0 (the +1 amplitude), numerically stable."""
    llrs = np.asarray(llrs, dtype=np.float64)
    out = np.empty_like(llrs)
    pos = llrs >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-llrs[pos]))
    grown = np.exp(llrs[~pos])
    out[~pos] = grown / (1.0 + grown)
    return out


def modify_priors(prior_llrs: np.ndarray, pe: float) -> np.ndarray:
    """Probability that the relay actually sent +1, given feedback priors on
    what it should have sent and a per-bit decoding-error probability."""
    if not 0.0 <= pe <= 1.0:
        raise ValueError(f"error probability must lie in [0, 1], got {pe}")
    p_plus = llr_to_posterior(prior_llrs)
    return (1.0 - pe) * p_plus + pe * (1.0 - p_plus)


def _log_prob_pair(llrs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # (log p[+1], log p[-1]) straight from LLRs; finite for finite input
    tail = np.log1p(np.exp(-np.abs(llrs)))
    log_plus = np.minimum(llrs, 0.0) - tail
    return log_plus, log_plus - llrs


def _log_modified_pair(llrs: np.ndarray, pe: float) -> tuple[np.ndarray, np.ndarray]:
    # log of the flip-adjusted pair, mixing in the log domain
    log_plus, log_minus = _log_prob_pair(llrs)
    if pe == 0.0:
        return log_plus, log_minus
    if pe == 1.0:
        return log_minus, log_plus
    stay = np.log1p(-pe)
    flip = np.log(pe)
    return (
        np.logaddexp(stay + log_plus, flip + log_minus),
        np.logaddexp(stay + log_minus, flip + log_plus),
    )


def relay_channel_llrs(symbols: np.ndarray, gain: complex, noise_variance: float,
                       cmap: Constellation) -> np.ndarray:
    """Exact per-bit LLRs for the scalar channel y = gain * x + CN(0, var)."""
    if noise_variance <= 0:
        raise ValueError(f"noise variance must be positive, got {noise_variance}")
    diff = symbols[:, np.newaxis] - gain * cmap.points[np.newaxis, :]
    metric = -(diff.real**2 + diff.imag**2) / noise_variance
    width = cmap.bits_per_symbol
    out = np.empty(symbols.size * width)
    for k in range(width):
        zero = cmap.bit_labels[:, k] == 0
        out[k::width] = logsumexp(metric[:, zero], axis=1) - logsumexp(
            metric[:, ~zero], axis=1
        )
    return clamp_llrs(out)


def map_detect(y_real: np.ndarray, h_real: np.ndarray, noise_variance: float,
               cmap: Constellation,
               relay_priors: np.ndarray | None = None,
               source_priors: np.ndarray | None = None,
               relay_present: bool = True, source_present: bool = True,
               pe: float = 0.0,
               clamp: bool = True) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Joint MAP detection of one slot, returning per-bit LLRs.

    y_real is the real-stacked observation (2N, M) and h_real the real
    block channel (2N, 4) of the stacked [relay; source] streams. Priors
    are per-bit LLRs of length M * B (zeros when omitted). An absent stream
    collapses its hypothesis space to the zero symbol and yields None.

    Returns (relay LLRs, source LLRs). Source bits follow the usual MAP
    rule with flip-adjusted relay priors inside the hypothesis weights.
    Relay bits exclude their own adjusted prior from the hypothesis
    weights, mix the two flip cases of each hypothesis sum with weights
    (1 - pe, pe), and add back their own unmodified prior.

    clamp=False skips the usual output clamp so a caller can subtract the
    prior from the raw posterior without the clamp swallowing the
    difference; the raw values are finite for finite inputs.
    """
    if not 0.0 <= pe <= 1.0:
        raise ValueError(f"error probability must lie in [0, 1], got {pe}")
    if noise_variance <= 0:
        raise ValueError(f"noise variance must be positive, got {noise_variance}")
    if not relay_present and not source_present:
        raise ValueError("at least one stream must be present")
    if h_real.shape != (y_real.shape[0], 4):
        raise ValueError(f"channel shape {h_real.shape} does not match observation")

    pts = cmap.points
    q = pts.size
    width = cmap.bits_per_symbol
    m = y_real.shape[1]

    rel_idx = src_idx = None
    if relay_present and source_present:
        rel_idx = np.repeat(np.arange(q), q)
        src_idx = np.tile(np.arange(q), q)
    elif relay_present:
        rel_idx = np.arange(q)
    else:
        src_idx = np.arange(q)

    n_hyp = q * q if (relay_present and source_present) else q
    x_rel = pts[rel_idx] if rel_idx is not None else np.zeros(n_hyp, dtype=complex)
    x_src = pts[src_idx] if src_idx is not None else np.zeros(n_hyp, dtype=complex)
    x_stack = np.vstack([x_rel.real, x_src.real, x_rel.imag, x_src.imag])

    hx = h_real @ x_stack
    sq_dist = (
        np.sum(y_real * y_real, axis=0)[:, np.newaxis]
        - 2.0 * (y_real.T @ hx)
        + np.sum(hx * hx, axis=0)[np.newaxis, :]
    )
    # real-stacked noise carries noise_variance / 2 per entry, so the
    # Gaussian exponent is ||.||^2 / (2 * var/2) = ||.||^2 / var
    metric = -sq_dist / noise_variance

    if source_present:
        source_priors = (np.zeros(m * width) if source_priors is None
                         else np.asarray(source_priors, dtype=np.float64))
        if source_priors.size != m * width:
            raise ValueError("source priors length does not match the slot")
        src_log_plus, src_log_minus = _log_prob_pair(source_priors.reshape(m, width))
        src_labels = cmap.bit_labels[src_idx]
        src_zero = (src_labels.T == 0).astype(np.float64)
        metric = metric + src_log_plus @ src_zero + src_log_minus @ (1.0 - src_zero)

    if relay_present:
        relay_priors = (np.zeros(m * width) if relay_priors is None
                        else np.asarray(relay_priors, dtype=np.float64))
        if relay_priors.size != m * width:
            raise ValueError("relay priors length does not match the slot")
        prior_grid = relay_priors.reshape(m, width)
        adj_log_plus, adj_log_minus = _log_modified_pair(prior_grid, pe)
        rel_labels = cmap.bit_labels[rel_idx]
        rel_zero = (rel_labels.T == 0).astype(np.float64)
        metric = metric + adj_log_plus @ rel_zero + adj_log_minus @ (1.0 - rel_zero)

    llr_source = None
    if source_present:
        llr_source = np.empty(m * width)
        for k in range(width):
            zero = src_labels[:, k] == 0
            llr_source[k::width] = logsumexp(metric[:, zero], axis=1) - logsumexp(
                metric[:, ~zero], axis=1
            )
        if clamp:
            llr_source = clamp_llrs(llr_source)

    llr_relay = None
    if relay_present:
        llr_relay = np.empty(m * width)
        for k in range(width):
            zero = rel_labels[:, k] == 0
            own = np.where(zero[np.newaxis, :], adj_log_plus[:, k:k + 1],
                           adj_log_minus[:, k:k + 1])
            reduced = metric - own
            s_plus = logsumexp(reduced[:, zero], axis=1)
            s_minus = logsumexp(reduced[:, ~zero], axis=1)
            if pe == 0.0:
                mix = s_plus - s_minus
            elif pe == 1.0:
                mix = s_minus - s_plus
            else:
                stay = np.log1p(-pe)
                flip = np.log(pe)
                mix = np.logaddexp(stay + s_plus, flip + s_minus) - np.logaddexp(
                    stay + s_minus, flip + s_plus
                )
            llr_relay[k::width] = prior_grid[:, k] + mix
        if clamp:
            llr_relay = clamp_llrs(llr_relay)

    return llr_relay, llr_source


def estimate_pe(source_llrs: np.ndarray, relay_llrs: np.ndarray) -> float:
    """Average probability that the source and relay soft versions of the
    same frame disagree bit-by-bit, clamped to [PE_MIN, PE_MAX]."""
    if source_llrs.shape != relay_llrs.shape:
        raise ValueError("the two LLR versions must have equal length")
    p_src = llr_to_posterior(source_llrs)
    p_rel = llr_to_posterior(relay_llrs)
    disagree = p_src * (1.0 - p_rel) + (1.0 - p_src) * p_rel
    return float(np.clip(np.mean(disagree), PE_MIN, PE_MAX))
