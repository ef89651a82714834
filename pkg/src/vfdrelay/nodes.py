"""Relay and destination node processing.

Scheduling: the source sends frame l in slot l for l = 1..L (L even).
Relay one listens in odd slots and transmits in even slots, relay two the
other way around, so the frame decoded in slot l is forwarded in slot l+1
and the last slot carries only relay two's copy of frame L. Slot 1 is the
only slot guaranteed free of inter-relay interference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fec, numerics, phy

DESTINATION_ITERATIONS = 5

PE_MODES = ("estimated", "genie", "zero")

POLICY_KINDS = ("always", "crc", "threshold", "perfect")

THRESHOLD_ERROR_FRACTION = 0.15


@dataclass(frozen=True)
class SlotSchedule:
    """Who is doing what in each of the L + 1 slots."""

    num_frames: int

    def __post_init__(self) -> None:
        if self.num_frames < 2 or self.num_frames % 2:
            raise ValueError(f"frame count must be even and positive, got {self.num_frames}")

    @property
    def num_slots(self) -> int:
        return self.num_frames + 1

    def _check(self, slot: int) -> None:
        if not 1 <= slot <= self.num_slots:
            raise ValueError(f"slot {slot} outside 1..{self.num_slots}")

    def source_active(self, slot: int) -> bool:
        self._check(slot)
        return slot <= self.num_frames

    def receiving_relay(self, slot: int) -> int | None:
        """Relay listening in this slot (it will decode frame = slot)."""
        self._check(slot)
        if slot > self.num_frames:
            return None
        return 1 if slot % 2 else 2

    def transmitting_relay(self, slot: int) -> int | None:
        """Relay forwarding frame slot - 1 in this slot."""
        self._check(slot)
        if slot == 1:
            return None
        return 2 if slot % 2 else 1

    def relay_frame(self, slot: int) -> int | None:
        """Frame index carried by the relay stream of this slot."""
        return None if slot == 1 else slot - 1


@dataclass(frozen=True)
class ForwardingPolicy:
    """How a relay decides whether to forward its decoded frame."""

    kind: str
    error_fraction_threshold: float = THRESHOLD_ERROR_FRACTION

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy {self.kind!r}")
        if not 0.0 < self.error_fraction_threshold < 1.0:
            raise ValueError("threshold must lie strictly between 0 and 1")


def decide_forward(policy: ForwardingPolicy, decoded: fec.BitFrame,
                   truth: fec.BitFrame) -> tuple[bool, fec.BitFrame]:
    """Apply a forwarding policy. Returns (forward, bits to re-encode).

    The error counts against the true frame stand in for an ideal CRC; the
    perfect policy additionally swaps in the true bits.
    """
    if policy.kind == "perfect":
        return True, truth
    if policy.kind == "always":
        return True, decoded
    errors = fec.count_frame_errors(decoded, truth)
    if policy.kind == "crc":
        return errors == 0, decoded
    return errors < policy.error_fraction_threshold * len(truth), decoded


def relay_receive(y: np.ndarray, h: np.ndarray, noise_variance: float,
                  interference_present: bool, interleaver: fec.Interleaver,
                  cmap: phy.Constellation,
                  decoder_iterations: int = fec.DECODER_ITERATIONS) -> fec.BitFrame:
    """Decode the source frame observed at a relay during one slot.

    With a transmitting relay on air the observation is rotated into the
    triangular basis of the channel, which confines the interference to the
    top row and leaves the bottom row as a clean scalar channel for the
    source symbols. Slot 1 has no interference, so plain maximum-ratio
    combining over the source column is used instead.
    """
    if interference_present:
        if h.shape[0] < 2:
            raise ValueError("interference cancellation needs at least two antennas")
        q, r = numerics.qr_positive_diagonal(h)
        rotated = q.conj().T @ y
        row = rotated[-1]
        gain = r[-1, -1]
    else:
        col = h[:, -1]
        norm = np.linalg.norm(col)
        if norm < numerics.QR_GAIN_FLOOR:
            raise numerics.DegenerateChannelError("vanishing source column")
        row = (col.conj() @ y) / norm
        gain = norm
    llrs = phy.relay_channel_llrs(row, gain, noise_variance, cmap)
    info_post, _ = fec.sccc_decode(
        fec.LlrFrame(llrs, "channel"), interleaver, decoder_iterations
    )
    return fec.hard_decisions(info_post)


@dataclass
class DetectorSlotInput:
    """Everything the destination holds about one received slot."""

    slot: int
    y_real: np.ndarray
    h_real: np.ndarray
    noise_variance: float
    relay_present: bool
    source_present: bool
    relay_frame: int | None
    source_frame: int | None


def destination_collect_slot(slot: int, y: np.ndarray, h: np.ndarray,
                             schedule: SlotSchedule, relay_forwarded: bool,
                             noise_variance: float) -> DetectorSlotInput:
    """Package one slot's complex observation for the iterative receiver.

    relay_forwarded reflects the genie silence signalling: the destination
    knows when a selective relay chose not to transmit.
    """
    source_on = schedule.source_active(slot)
    relay_on = schedule.transmitting_relay(slot) is not None and relay_forwarded
    return DetectorSlotInput(
        slot=slot,
        y_real=numerics.to_real_observation(y),
        h_real=numerics.to_real_channel(h),
        noise_variance=noise_variance,
        relay_present=relay_on,
        source_present=source_on,
        relay_frame=schedule.relay_frame(slot) if relay_on else None,
        source_frame=slot if source_on else None,
    )


@dataclass
class DestinationResult:
    """Outcome of the iterative destination receiver."""

    decisions: list[fec.BitFrame]
    info_llrs: list[np.ndarray]
    pe_history: np.ndarray  # (iterations, num_slots + 1), NaN where absent
    iterations: int

    def final_pe(self) -> np.ndarray:
        return self.pe_history[-1]


def iterative_receive(slots: list[DetectorSlotInput],
                      interleavers: dict[int, fec.Interleaver],
                      cmap: phy.Constellation,
                      iterations: int = DESTINATION_ITERATIONS,
                      pe_mode: str = "estimated",
                      genie_pe: dict[int, float] | None = None,
                      decoder_iterations: int = fec.DECODER_ITERATIONS,
                      posterior_feedback: bool = False) -> DestinationResult:
    """Joint iterative detection and decoding across all collected slots.

    Each iteration detects every slot with the current priors and relay
    error probabilities, estimates the new error probability of each relay
    stream, then decodes each frame from its combined source-slot and
    relay-slot LLRs. Priors start uniform and error probabilities at one
    half.

    The estimate for a relay stream compares the source-slot posterior of
    its frame against a measurement detection of the relay slot taken at
    pe = 0 with neutral relay priors (source priors still weigh the
    interfering stream). The measurement reports what the relay actually
    transmitted; routing the frame's own code feedback or the reliability
    mixing into it would mask exactly the disagreement being measured.

    The detector and decoder exchange extrinsic information: the decoder
    input is the sum of the two detector outputs with their priors removed
    (pre-clamp, so saturated magnitudes still cancel exactly), and the
    prior routed back to both slots that carry a frame is the decoder's
    coded-bit posterior minus the decoder input. Each module therefore only
    ever receives what the other added. posterior_feedback=True switches
    both directions to raw posterior passing, which double-counts priors
    and tends to freeze early decisions; it is kept as a study variant.
    """
    if pe_mode not in PE_MODES:
        raise ValueError(f"unknown error-probability mode {pe_mode!r}")
    if pe_mode == "genie" and genie_pe is None:
        raise ValueError("genie mode needs the true flip fractions")
    if iterations < 1:
        raise ValueError("at least one iteration required")

    by_slot = {s.slot: s for s in slots}
    num_frames = max(s.source_frame for s in slots if s.source_frame is not None)
    width = cmap.bits_per_symbol
    frame_bits = {
        s.slot: s.y_real.shape[1] * width for s in slots
    }

    src_priors = {s.slot: np.zeros(frame_bits[s.slot]) for s in slots if s.source_present}
    rel_priors = {s.slot: np.zeros(frame_bits[s.slot]) for s in slots if s.relay_present}
    pe_current = {s.slot: 0.5 for s in slots if s.relay_present}

    pe_history = np.full((iterations, max(by_slot) + 1), np.nan)
    decisions: list[fec.BitFrame] = []
    info_llrs: list[np.ndarray] = []

    for it in range(iterations):
        src_out: dict[int, np.ndarray] = {}
        rel_out: dict[int, np.ndarray] = {}
        src_ext: dict[int, np.ndarray] = {}
        rel_ext: dict[int, np.ndarray] = {}
        for s in slots:
            if s.relay_present:
                if pe_mode == "zero":
                    pe_used = phy.PE_MIN
                elif pe_mode == "genie":
                    pe_used = genie_pe[s.slot]
                else:
                    pe_used = pe_current[s.slot]
            else:
                pe_used = 0.0
            raw_rel, raw_src = phy.map_detect(
                s.y_real, s.h_real, s.noise_variance, cmap,
                relay_priors=rel_priors.get(s.slot),
                source_priors=src_priors.get(s.slot),
                relay_present=s.relay_present, source_present=s.source_present,
                pe=pe_used, clamp=False,
            )
            if raw_src is not None:
                src_out[s.slot] = numerics.clamp_llrs(raw_src)
                src_ext[s.slot] = numerics.clamp_llrs(raw_src - src_priors[s.slot])
            if raw_rel is not None:
                rel_out[s.slot] = numerics.clamp_llrs(raw_rel)
                rel_ext[s.slot] = numerics.clamp_llrs(raw_rel - rel_priors[s.slot])

        # fresh disagreement estimate for every active relay stream
        for s in slots:
            if s.relay_present:
                measured, _ = phy.map_detect(
                    s.y_real, s.h_real, s.noise_variance, cmap,
                    source_priors=src_priors.get(s.slot),
                    relay_present=True, source_present=s.source_present,
                    pe=0.0,
                )
                estimate = phy.estimate_pe(src_out[s.slot - 1], measured)
                pe_current[s.slot] = estimate
                pe_history[it, s.slot] = estimate

        to_decoder = src_out if posterior_feedback else src_ext
        rel_to_decoder = rel_out if posterior_feedback else rel_ext

        decisions = []
        info_llrs = []
        for frame in range(1, num_frames + 1):
            combined = to_decoder[frame].copy()
            relay_slot = frame + 1
            if relay_slot in rel_to_decoder:
                combined = combined + rel_to_decoder[relay_slot]
            combined = numerics.clamp_llrs(combined)
            info_post, coded_post = fec.sccc_decode(
                fec.LlrFrame(combined, "channel"), interleavers[frame],
                decoder_iterations, clamp_coded=False,
            )
            if posterior_feedback:
                feedback = numerics.clamp_llrs(coded_post.values)
            else:
                feedback = numerics.clamp_llrs(coded_post.values - combined)
            src_priors[frame] = feedback
            if relay_slot in rel_priors:
                rel_priors[relay_slot] = feedback
            decisions.append(fec.hard_decisions(info_post))
            info_llrs.append(info_post.values)

    return DestinationResult(
        decisions=decisions, info_llrs=info_llrs,
        pe_history=pe_history, iterations=iterations,
    )
