"""Serially concatenated convolutional code shared by every hop.

Transmit chain: a rate-1/2 memory-1 feedforward outer code, a random
interleaver, then a rate-1 doped accumulator whose output is modulated
directly. The decoder iterates exact log-domain BCJR passes over the two
two-state trellises, exchanging extrinsic information through the
interleaver, and reports posteriors both for the information bits and for
the modulated (channel-position) bits.

LLR sign convention everywhere: positive favors logical 0, which is the +1
amplitude after mapping.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .numerics import LLR_MAX, clamp_llrs

# Feedforward taps of the outer code, octal (3, 2): first output
# u[n] ^ u[n-1], second output u[n].
OUTER_TAPS = (0o3, 0o2)
OUTER_RATE_INVERSE = 2

# Every DOPING_PERIOD-th accumulator output is replaced by the raw input
# bit (positions n with n % period == period - 1).
DOPING_PERIOD = 2

DECODER_ITERATIONS = 8

STAGES = ("info", "outer-coded", "interleaved", "channel")


@dataclass
class BitFrame:
    """Hard bits plus the pipeline stage they belong to."""

    bits: np.ndarray
    stage: str

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        self.bits = np.asarray(self.bits, dtype=np.int8)
        if self.bits.ndim != 1:
            raise ValueError("bit frames are one-dimensional")
        if np.any((self.bits != 0) & (self.bits != 1)):
            raise ValueError("bit frames hold only 0 and 1")

    def __len__(self) -> int:
        return self.bits.size


@dataclass
class LlrFrame:
    """Soft bit beliefs (log p[bit=0] / p[bit=1]) at a pipeline stage."""

    values: np.ndarray
    stage: str

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("LLR frames are one-dimensional")

    def __len__(self) -> int:
        return self.values.size


def _expect_stage(frame, stage: str, op: str) -> None:
    if frame.stage != stage:
        raise ValueError(f"{op} expects stage {stage!r}, got {frame.stage!r}")


@dataclass(frozen=True)
class Interleaver:
    """Fixed permutation: output position k carries input position perm[k]."""

    permutation: np.ndarray
    inverse: np.ndarray
    seed: int | None = None

    def __len__(self) -> int:
        return self.permutation.size


def random_interleaver(length: int, seed: int) -> Interleaver:
    perm = np.random.default_rng(seed).permutation(length)
    inv = np.argsort(perm)
    return Interleaver(permutation=perm, inverse=inv, seed=seed)


def identity_interleaver(length: int) -> Interleaver:
    idx = np.arange(length)
    return Interleaver(permutation=idx, inverse=idx.copy(), seed=None)


def _payload(frame):
    return frame.bits if isinstance(frame, BitFrame) else frame.values


def _with_payload(frame, data, stage):
    if isinstance(frame, BitFrame):
        return replace(frame, bits=data, stage=stage)
    return replace(frame, values=data, stage=stage)


def interleave(frame, interleaver: Interleaver):
    _expect_stage(frame, "outer-coded", "interleave")
    if len(frame) != len(interleaver):
        raise ValueError("frame and interleaver lengths differ")
    return _with_payload(frame, _payload(frame)[interleaver.permutation], "interleaved")


def deinterleave(frame, interleaver: Interleaver):
    _expect_stage(frame, "interleaved", "deinterleave")
    if len(frame) != len(interleaver):
        raise ValueError("frame and interleaver lengths differ")
    return _with_payload(frame, _payload(frame)[interleaver.inverse], "outer-coded")


def conv_encode_outer(frame: BitFrame) -> BitFrame:
    """Rate-1/2 feedforward encode, no trellis termination.

    Input bit u[n] emits the pair (u[n] ^ u[n-1], u[n]) with u[-1] = 0.
    """
    _expect_stage(frame, "info", "conv_encode_outer")
    u = frame.bits
    prev = np.concatenate(([0], u[:-1])).astype(np.int8)
    out = np.empty(2 * u.size, dtype=np.int8)
    out[0::2] = u ^ prev
    out[1::2] = u
    return BitFrame(out, "outer-coded")


def doped_accumulate(frame: BitFrame, period: int = DOPING_PERIOD) -> BitFrame:
    """Rate-1 inner code: running XOR, doped with raw input bits.

    State s[n] = d[n] ^ s[n-1] with s[-1] = 0; output position n carries
    the raw input d[n] when n % period == period - 1, else s[n].
    """
    _expect_stage(frame, "interleaved", "doped_accumulate")
    if period < 1:
        raise ValueError("doping period must be at least 1")
    d = frame.bits
    state = np.bitwise_xor.accumulate(d)
    out = state.copy()
    doped = (np.arange(d.size) % period) == period - 1
    out[doped] = d[doped]
    return BitFrame(out.astype(np.int8), "channel")


def sccc_encode(frame: BitFrame, interleaver: Interleaver,
                period: int = DOPING_PERIOD) -> BitFrame:
    """Full transmit-side chain: outer code, interleave, doped accumulate."""
    return doped_accumulate(interleave(conv_encode_outer(frame), interleaver), period)


@dataclass(frozen=True)
class Trellis:
    """Two-state trellis with per-step output tables.

    next_state[d, s] is the successor of state s under input d; out_bits
    has shape (steps, 2 inputs, 2 states, outputs_per_step).
    """

    name: str
    next_state: np.ndarray
    out_bits: np.ndarray

    @property
    def steps(self) -> int:
        return self.out_bits.shape[0]

    @property
    def outputs_per_step(self) -> int:
        return self.out_bits.shape[3]


def outer_trellis(num_info: int) -> Trellis:
    """Trellis of the rate-1/2 feedforward outer code (state = u[n-1])."""
    next_state = np.empty((2, 2), dtype=np.int8)
    out = np.empty((num_info, 2, 2, 2), dtype=np.int8)
    for d in range(2):
        for s in range(2):
            next_state[d, s] = d
            out[:, d, s, 0] = d ^ s
            out[:, d, s, 1] = d
    return Trellis("outer", next_state, out)


def inner_doped_trellis(num_bits: int, period: int = DOPING_PERIOD) -> Trellis:
    """Trellis of the doped accumulator (state = running XOR)."""
    next_state = np.empty((2, 2), dtype=np.int8)
    out = np.empty((num_bits, 2, 2, 1), dtype=np.int8)
    doped = (np.arange(num_bits) % period) == period - 1
    for d in range(2):
        for s in range(2):
            next_state[d, s] = d ^ s
            out[:, d, s, 0] = np.where(doped, d, d ^ s)
    return Trellis("inner-doped", next_state, out)


@njit(cache=True, inline="always")
def _ladd(a, b):
    # log(exp(a) + exp(b)) without overflow
    if a < b:
        a, b = b, a
    d = b - a
    if d < -60.0:
        return a
    return a + np.log1p(np.exp(d))


@njit(cache=True)
def _forward_backward(next_state, out_bits, chan, priors):
    steps = priors.shape[0]
    n_out = chan.shape[1]
    neg = -1.0e30

    gamma = np.empty((steps, 2, 2))
    for t in range(steps):
        for d in range(2):
            base = 0.5 * priors[t] * (1.0 - 2.0 * d)
            for s in range(2):
                g = base
                for k in range(n_out):
                    g += 0.5 * chan[t, k] * (1.0 - 2.0 * out_bits[t, d, s, k])
                gamma[t, d, s] = g

    alpha = np.empty((steps + 1, 2))
    alpha[0, 0] = 0.0
    alpha[0, 1] = neg
    for t in range(steps):
        a0 = neg
        a1 = neg
        for d in range(2):
            for s in range(2):
                v = alpha[t, s] + gamma[t, d, s]
                if next_state[d, s] == 0:
                    a0 = _ladd(a0, v)
                else:
                    a1 = _ladd(a1, v)
        peak = a0 if a0 > a1 else a1
        alpha[t + 1, 0] = a0 - peak
        alpha[t + 1, 1] = a1 - peak

    # open trellis end: uniform over final states
    beta = np.empty((steps + 1, 2))
    beta[steps, 0] = 0.0
    beta[steps, 1] = 0.0
    for t in range(steps - 1, -1, -1):
        b0 = _ladd(gamma[t, 0, 0] + beta[t + 1, next_state[0, 0]],
                   gamma[t, 1, 0] + beta[t + 1, next_state[1, 0]])
        b1 = _ladd(gamma[t, 0, 1] + beta[t + 1, next_state[0, 1]],
                   gamma[t, 1, 1] + beta[t + 1, next_state[1, 1]])
        peak = b0 if b0 > b1 else b1
        beta[t, 0] = b0 - peak
        beta[t, 1] = b1 - peak

    input_post = np.empty(steps)
    output_post = np.empty((steps, n_out))
    for t in range(steps):
        e00 = alpha[t, 0] + gamma[t, 0, 0] + beta[t + 1, next_state[0, 0]]
        e01 = alpha[t, 1] + gamma[t, 0, 1] + beta[t + 1, next_state[0, 1]]
        e10 = alpha[t, 0] + gamma[t, 1, 0] + beta[t + 1, next_state[1, 0]]
        e11 = alpha[t, 1] + gamma[t, 1, 1] + beta[t + 1, next_state[1, 1]]
        input_post[t] = _ladd(e00, e01) - _ladd(e10, e11)
        for k in range(n_out):
            num = neg
            den = neg
            if out_bits[t, 0, 0, k] == 0:
                num = _ladd(num, e00)
            else:
                den = _ladd(den, e00)
            if out_bits[t, 0, 1, k] == 0:
                num = _ladd(num, e01)
            else:
                den = _ladd(den, e01)
            if out_bits[t, 1, 0, k] == 0:
                num = _ladd(num, e10)
            else:
                den = _ladd(den, e10)
            if out_bits[t, 1, 1, k] == 0:
                num = _ladd(num, e11)
            else:
                den = _ladd(den, e11)
            output_post[t, k] = num - den
    return input_post, output_post


def _run_trellis(trellis: Trellis, channel_llrs: np.ndarray, priors: np.ndarray):
    chan = np.ascontiguousarray(
        channel_llrs.reshape(trellis.steps, trellis.outputs_per_step), dtype=np.float64
    )
    return _forward_backward(trellis.next_state, trellis.out_bits, chan,
                             np.ascontiguousarray(priors, dtype=np.float64))


def bcjr_decode(trellis: Trellis, channel_llrs: np.ndarray,
                priors: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Exact log-domain forward/backward pass over a two-state trellis.

    channel_llrs holds one LLR per trellis output bit (flattened in step
    order), priors one LLR per input bit. Returns (extrinsic, posterior)
    for the input bits, with posterior = priors + extrinsic; both are
    clamped to +/- LLR_MAX on the way out.
    """
    if priors is None:
        priors = np.zeros(trellis.steps)
    input_post, _ = _run_trellis(trellis, channel_llrs, priors)
    return clamp_llrs(input_post - priors), clamp_llrs(input_post)


def bcjr_coded_posteriors(trellis: Trellis, channel_llrs: np.ndarray,
                          priors: np.ndarray | None = None) -> np.ndarray:
    """Full posteriors for the trellis output bits, flattened in step order."""
    if priors is None:
        priors = np.zeros(trellis.steps)
    _, output_post = _run_trellis(trellis, channel_llrs, priors)
    return clamp_llrs(output_post.reshape(-1))


def sccc_decode(channel_llrs: LlrFrame, interleaver: Interleaver,
                iterations: int = DECODER_ITERATIONS,
                period: int = DOPING_PERIOD,
                clamp_coded: bool = True) -> tuple[LlrFrame, LlrFrame]:
    """Iterative decode of one received frame.

    Returns (info posteriors, channel-position coded-bit posteriors). The
    coded posteriors describe the modulated bits and are what the
    destination feeds back to its detector. clamp_coded=False leaves them
    unclamped so the caller can subtract the decoder input and clamp the
    difference instead.
    """
    _expect_stage(channel_llrs, "channel", "sccc_decode")
    n = len(channel_llrs)
    if n != len(interleaver) or n % OUTER_RATE_INVERSE:
        raise ValueError(f"frame length {n} does not fit the code")
    num_info = n // OUTER_RATE_INVERSE

    inner = inner_doped_trellis(n, period)
    outer = outer_trellis(num_info)
    observed = clamp_llrs(channel_llrs.values)
    info_post = np.zeros(num_info)
    inner_priors = np.zeros(n)
    for _ in range(iterations):
        inner_post, _ = _run_trellis(inner, observed, inner_priors)
        to_outer = deinterleave(
            LlrFrame(clamp_llrs(inner_post - inner_priors), "interleaved"), interleaver
        ).values
        info_post, outer_out_post = _run_trellis(
            outer, to_outer, np.zeros(num_info)
        )
        outer_extrinsic = clamp_llrs(outer_out_post.reshape(-1) - to_outer)
        inner_priors = interleave(
            LlrFrame(outer_extrinsic, "outer-coded"), interleaver
        ).values
    # one extra inner pass so the coded posteriors see the final feedback
    _, coded_post = _run_trellis(inner, observed, inner_priors)
    coded = coded_post.reshape(-1)
    if clamp_coded:
        coded = clamp_llrs(coded)
    return LlrFrame(clamp_llrs(info_post), "info"), LlrFrame(coded, "channel")


def hard_decisions(llrs: LlrFrame) -> BitFrame:
    """Positive LLR decides logical 0; exact zero also decides 0."""
    return BitFrame((llrs.values < 0).astype(np.int8), llrs.stage)


def count_frame_errors(decoded: BitFrame, reference: BitFrame) -> int:
    if decoded.stage != reference.stage or len(decoded) != len(reference):
        raise ValueError("frames to compare must share stage and length")
    return int(np.count_nonzero(decoded.bits != reference.bits))
