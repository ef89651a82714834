"""Scenario configuration, link geometry, and Monte Carlo campaigns.

SNR semantics: every receiver sees unit-variance complex noise and the
per-link SNR scales the transmit amplitude, folded into the fading columns
at draw time. One realization draws data, fading, and noise once and reuses
them for every configured scheme and SNR point, so scheme comparisons are
paired and adding grid points never disturbs existing ones.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial

import numpy as np

from . import fec, nodes, numerics, phy

# scheme name -> (forwarding policy, default error-probability mode)
SCHEME_POLICIES = {
    "proposed-with-pe": ("always", "estimated"),
    "proposed-without-pe": ("always", "zero"),
    "crc-sdf": ("crc", "estimated"),
    "threshold-sdf": ("threshold", "estimated"),
    "perfect-relay": ("perfect", "estimated"),
}
ALL_SCHEMES = tuple(SCHEME_POLICIES)

PAPER_SNR_GRID = tuple(float(x) for x in range(0, 18, 2))

DESK_REALIZATIONS = 100
DESK_FRAMES = 10
DESK_INFO_BITS = 256
DESK_SNR_GRID = (4.0, 8.0, 12.0)

# a degenerate fading draw has probability zero; a handful of retries is
# only there to turn float-level freak events into fresh draws
MAX_REDRAWS = 8


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one simulation campaign."""

    relay_location: str = "A"
    snr_grid_db: tuple[float, ...] = PAPER_SNR_GRID
    num_frames: int = 20
    info_bits: int = 512
    num_antennas: int = 2
    iterations: int = nodes.DESTINATION_ITERATIONS
    decoder_iterations: int = fec.DECODER_ITERATIONS
    schemes: tuple[str, ...] = ALL_SCHEMES
    realizations: int = 1000
    base_seed: int = 20250817
    pathloss_exponent: float = 3.52
    noiseless: bool = False
    pe_mode: str | None = None
    posterior_feedback: bool = False
    workers: int | None = None

    def validate(self) -> None:
        if self.relay_location not in ("A", "B"):
            raise ValueError(f"location must be A or B, got {self.relay_location!r}")
        if not self.snr_grid_db:
            raise ValueError("snr grid must not be empty")
        if self.num_frames < 2 or self.num_frames % 2:
            raise ValueError(f"frames must be even and at least 2, got {self.num_frames}")
        if self.info_bits < 2:
            raise ValueError(f"info_bits must be at least 2, got {self.info_bits}")
        if self.num_antennas < 2:
            raise ValueError(f"antennas must be at least 2, got {self.num_antennas}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be positive, got {self.iterations}")
        if self.decoder_iterations < 1:
            raise ValueError(
                f"decoder_iterations must be positive, got {self.decoder_iterations}"
            )
        if not self.schemes:
            raise ValueError("at least one scheme required")
        for scheme in self.schemes:
            if scheme not in SCHEME_POLICIES:
                raise ValueError(
                    f"unknown scheme {scheme!r}; pick from {', '.join(ALL_SCHEMES)}"
                )
        if len(set(self.schemes)) != len(self.schemes):
            raise ValueError("scheme list contains duplicates")
        if self.realizations < 1:
            raise ValueError(f"realizations must be positive, got {self.realizations}")
        if not 0 <= self.base_seed < 2**64:
            raise ValueError(f"seed must fit in 64 bits, got {self.base_seed}")
        if self.pathloss_exponent <= 0:
            raise ValueError(
                f"pathloss_exponent must be positive, got {self.pathloss_exponent}"
            )
        if self.pe_mode is not None and self.pe_mode not in nodes.PE_MODES:
            raise ValueError(f"pe_mode must be one of {', '.join(nodes.PE_MODES)}")
        if self.workers is not None and self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}")

    def desk_scaled(self) -> "ScenarioConfig":
        """Shrunk variant for quick runs on a single machine."""
        return replace(
            self,
            realizations=DESK_REALIZATIONS,
            num_frames=DESK_FRAMES,
            info_bits=DESK_INFO_BITS,
            snr_grid_db=DESK_SNR_GRID,
        )

    @property
    def coded_bits(self) -> int:
        return fec.OUTER_RATE_INVERSE * self.info_bits


@dataclass(frozen=True)
class LinkBudget:
    """Per-link SNRs in dB for one operating point.

    Location A places both relays at the source-destination distance from
    either end, so every link shares the baseline SNR. Location B moves the
    relays closer to the source: source-relay and inter-relay distances are
    half the direct path and relay-destination three quarters of it, which
    boosts those links by the pathloss law.
    """

    source_destination_db: float
    source_relay_db: float
    relay_destination_db: float
    inter_relay_db: float


def link_budget(location: str, gamma_sd_db: float,
                pathloss_exponent: float = 3.52) -> LinkBudget:
    if location == "A":
        return LinkBudget(gamma_sd_db, gamma_sd_db, gamma_sd_db, gamma_sd_db)
    if location == "B":
        scale = 10.0 * pathloss_exponent
        half = scale * np.log10(2.0)
        three_quarter = scale * np.log10(4.0 / 3.0)
        return LinkBudget(
            source_destination_db=gamma_sd_db,
            source_relay_db=gamma_sd_db + half,
            relay_destination_db=gamma_sd_db + three_quarter,
            inter_relay_db=gamma_sd_db + half,
        )
    raise ValueError(f"location must be A or B, got {location!r}")


def _amplitude(snr_db: float) -> float:
    return float(10.0 ** (snr_db / 20.0))


@dataclass
class SchemeOutcome:
    """Per-realization results of one scheme at one SNR point."""

    bit_errors: int
    bits_total: int
    final_pe: np.ndarray
    forwarded: np.ndarray
    relay_info_errors: np.ndarray


@dataclass
class RealizationResult:
    realization: int
    snr_db: float
    per_scheme: dict[str, SchemeOutcome]
    redraws: int


@dataclass
class BerRecord:
    """Aggregated campaign counts for one (scheme, SNR) cell."""

    scheme: str
    snr_db: float
    bit_errors: int
    bits_total: int
    realizations: int
    mean_slot_pe: np.ndarray

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total


@dataclass
class CampaignResult:
    config: ScenarioConfig
    records: list[BerRecord]
    redraws: int

    def record(self, scheme: str, snr_db: float) -> BerRecord:
        for rec in self.records:
            if rec.scheme == scheme and rec.snr_db == snr_db:
                return rec
        raise KeyError(f"no record for {scheme} at {snr_db} dB")


@dataclass
class _World:
    """Everything one realization draws before any scheme runs."""

    info_frames: dict[int, fec.BitFrame]
    coded_frames: dict[int, fec.BitFrame]
    source_symbols: dict[int, np.ndarray]
    interleavers: dict[int, fec.Interleaver]
    fading_dest: dict[int, np.ndarray]
    fading_relay: dict[int, np.ndarray]
    noise_dest: dict[int, np.ndarray]
    noise_relay: dict[int, np.ndarray]


def _draw_world(config: ScenarioConfig, index: int, attempt: int,
                cmap: phy.Constellation) -> _World:
    stream = numerics.RngStream(config.base_seed, (index, attempt))
    data_rng = stream.derive(0).generator()
    channel_rng = stream.derive(1).generator()
    noise_rng = stream.derive(2).generator()
    mix_rng = stream.derive(3).generator()

    frames = config.num_frames
    n = config.num_antennas
    symbols = config.coded_bits // cmap.bits_per_symbol

    interleavers = {}
    info_frames = {}
    coded_frames = {}
    source_symbols = {}
    for frame in range(1, frames + 1):
        seed = int(mix_rng.integers(0, 2**63))
        interleavers[frame] = fec.random_interleaver(config.coded_bits, seed)
        bits = fec.BitFrame(data_rng.integers(0, 2, size=config.info_bits), "info")
        info_frames[frame] = bits
        coded = fec.sccc_encode(bits, interleavers[frame])
        coded_frames[frame] = coded
        source_symbols[frame] = phy.modulate(coded, cmap, "source").symbols

    fading_dest = {}
    fading_relay = {}
    noise_dest = {}
    noise_relay = {}
    for slot in range(1, frames + 2):
        fading_dest[slot] = numerics.sample_rayleigh(channel_rng, (n, 2))
        if slot <= frames:
            fading_relay[slot] = numerics.sample_rayleigh(channel_rng, (n, 2))
    for slot in range(1, frames + 2):
        if config.noiseless:
            noise_dest[slot] = np.zeros((n, symbols), dtype=complex)
        else:
            noise_dest[slot] = numerics.sample_awgn(noise_rng, (n, symbols), 1.0)
        if slot <= frames:
            if config.noiseless:
                noise_relay[slot] = np.zeros((n, symbols), dtype=complex)
            else:
                noise_relay[slot] = numerics.sample_awgn(noise_rng, (n, symbols), 1.0)

    return _World(info_frames, coded_frames, source_symbols, interleavers,
                  fading_dest, fading_relay, noise_dest, noise_relay)


def _scaled_channels(config: ScenarioConfig, world: _World, snr_db: float):
    budget = link_budget(config.relay_location, snr_db, config.pathloss_exponent)
    col_dest = np.array([_amplitude(budget.relay_destination_db),
                         _amplitude(budget.source_destination_db)])
    col_relay = np.array([_amplitude(budget.inter_relay_db),
                          _amplitude(budget.source_relay_db)])
    h_dest = {slot: g * col_dest for slot, g in world.fading_dest.items()}
    h_relay = {slot: g * col_relay for slot, g in world.fading_relay.items()}
    return h_dest, h_relay


def _probe_degenerate(h_relay: dict[int, np.ndarray]) -> None:
    # trips the same error paths the relay pipeline would hit, up front
    for slot, h in h_relay.items():
        if slot == 1:
            if np.linalg.norm(h[:, -1]) < numerics.QR_GAIN_FLOOR:
                raise numerics.DegenerateChannelError("vanishing source column")
        else:
            numerics.qr_positive_diagonal(h)


def _run_scheme(config: ScenarioConfig, world: _World, scheme: str,
                h_dest: dict[int, np.ndarray], h_relay: dict[int, np.ndarray],
                cmap: phy.Constellation, schedule: nodes.SlotSchedule) -> SchemeOutcome:
    policy_kind, default_pe_mode = SCHEME_POLICIES[scheme]
    pe_mode = config.pe_mode if config.pe_mode is not None else default_pe_mode
    policy = nodes.ForwardingPolicy(policy_kind)
    detector_variance = phy.NOISELESS_VARIANCE if config.noiseless else 1.0

    frames = config.num_frames
    symbols = config.coded_bits // cmap.bits_per_symbol
    relay_tx: dict[int, np.ndarray] = {}
    genie_pe: dict[int, float] = {}
    forwarded = np.zeros(frames, dtype=bool)
    relay_info_errors = np.zeros(frames, dtype=np.int64)

    for slot in range(1, frames + 1):
        truth = world.info_frames[slot]
        if policy.kind == "perfect":
            decoded = truth
        else:
            interferer = relay_tx.get(slot)
            if interferer is None:
                interferer = np.zeros(symbols, dtype=complex)
            x = np.vstack([interferer, world.source_symbols[slot]])
            y = h_relay[slot] @ x + world.noise_relay[slot]
            decoded = nodes.relay_receive(
                y, h_relay[slot], detector_variance,
                interference_present=slot >= 2,
                interleaver=world.interleavers[slot], cmap=cmap,
                decoder_iterations=config.decoder_iterations,
            )
        relay_info_errors[slot - 1] = fec.count_frame_errors(decoded, truth)
        forward, tx_bits = nodes.decide_forward(policy, decoded, truth)
        forwarded[slot - 1] = forward
        if forward:
            recoded = fec.sccc_encode(tx_bits, world.interleavers[slot])
            relay_tx[slot + 1] = phy.modulate(recoded, cmap, "relay").symbols
            mismatch = fec.count_frame_errors(recoded, world.coded_frames[slot])
            genie_pe[slot + 1] = float(
                np.clip(mismatch / len(recoded), phy.PE_MIN, phy.PE_MAX)
            )

    slot_inputs = []
    for slot in range(1, frames + 2):
        relay_symbols = relay_tx.get(slot)
        source_symbols = world.source_symbols.get(slot)
        if relay_symbols is None and source_symbols is None:
            continue  # a silent relay leaves the last slot empty
        x = np.vstack([
            relay_symbols if relay_symbols is not None else np.zeros(symbols, dtype=complex),
            source_symbols if source_symbols is not None else np.zeros(symbols, dtype=complex),
        ])
        y = h_dest[slot] @ x + world.noise_dest[slot]
        slot_inputs.append(nodes.destination_collect_slot(
            slot, y, h_dest[slot], schedule,
            relay_forwarded=relay_symbols is not None,
            noise_variance=detector_variance,
        ))

    result = nodes.iterative_receive(
        slot_inputs, world.interleavers, cmap,
        iterations=config.iterations, pe_mode=pe_mode, genie_pe=genie_pe,
        decoder_iterations=config.decoder_iterations,
        posterior_feedback=config.posterior_feedback,
    )
    bit_errors = sum(
        fec.count_frame_errors(result.decisions[frame - 1], world.info_frames[frame])
        for frame in range(1, frames + 1)
    )
    final_pe = np.full(frames + 2, np.nan)
    final_pe[: result.pe_history.shape[1]] = result.final_pe()
    return SchemeOutcome(
        bit_errors=int(bit_errors),
        bits_total=frames * config.info_bits,
        final_pe=final_pe,
        forwarded=forwarded,
        relay_info_errors=relay_info_errors,
    )


def _simulate_index(config: ScenarioConfig, index: int) -> list[RealizationResult]:
    """All SNR points and schemes for one realization index."""
    cmap = phy.qpsk()
    schedule = nodes.SlotSchedule(config.num_frames)
    for attempt in range(MAX_REDRAWS + 1):
        world = _draw_world(config, index, attempt, cmap)
        try:
            results = []
            for snr_db in config.snr_grid_db:
                h_dest, h_relay = _scaled_channels(config, world, snr_db)
                _probe_degenerate(h_relay)
                per_scheme = {
                    scheme: _run_scheme(config, world, scheme, h_dest, h_relay,
                                        cmap, schedule)
                    for scheme in config.schemes
                }
                results.append(RealizationResult(index, snr_db, per_scheme, attempt))
            return results
        except numerics.DegenerateChannelError:
            continue
    raise RuntimeError(f"realization {index}: fading draws degenerate after "
                       f"{MAX_REDRAWS} redraws")


def run_realization(config: ScenarioConfig, snr_db: float,
                    realization_index: int) -> RealizationResult:
    """One realization at one SNR point, deterministic in
    (base_seed, realization_index) and independent of the rest of the grid."""
    config.validate()
    single = replace(config, snr_grid_db=(float(snr_db),))
    return _simulate_index(single, realization_index)[0]


def run_campaign(config: ScenarioConfig) -> CampaignResult:
    """Monte Carlo sweep over the whole (scheme, SNR, realization) grid.

    Realizations are independent and mapped possibly in parallel; the
    reduction below is a plain sum taken in realization order, so worker
    count never changes the result.
    """
    config.validate()
    worker_count = config.workers if config.workers is not None else os.cpu_count() or 1
    worker_count = min(worker_count, config.realizations)

    task = partial(_simulate_index, config)
    indices = range(config.realizations)
    if worker_count > 1:
        chunk = max(1, config.realizations // (worker_count * 4))
        with ProcessPoolExecutor(max_workers=worker_count) as pool:
            all_results = list(pool.map(task, indices, chunksize=chunk))
    else:
        all_results = [task(i) for i in indices]

    slots = config.num_frames + 2
    errors: dict[tuple[str, float], int] = {}
    done: dict[tuple[str, float], int] = {}
    bits: dict[tuple[str, float], int] = {}
    pe_sum: dict[tuple[str, float], np.ndarray] = {}
    pe_count: dict[tuple[str, float], np.ndarray] = {}
    redraws = 0
    for per_index in all_results:
        redraws += per_index[0].redraws if per_index else 0
        for res in per_index:
            for scheme, outcome in res.per_scheme.items():
                key = (scheme, res.snr_db)
                errors[key] = errors.get(key, 0) + outcome.bit_errors
                bits[key] = bits.get(key, 0) + outcome.bits_total
                done[key] = done.get(key, 0) + 1
                if key not in pe_sum:
                    pe_sum[key] = np.zeros(slots)
                    pe_count[key] = np.zeros(slots)
                seen = np.isfinite(outcome.final_pe)
                pe_sum[key][seen] += outcome.final_pe[seen]
                pe_count[key][seen] += 1

    records = []
    for scheme in config.schemes:
        for snr_db in config.snr_grid_db:
            key = (scheme, float(snr_db))
            with np.errstate(invalid="ignore"):
                mean_pe = pe_sum[key] / pe_count[key]
            records.append(BerRecord(
                scheme=scheme, snr_db=float(snr_db),
                bit_errors=errors[key], bits_total=bits[key],
                realizations=done[key], mean_slot_pe=mean_pe,
            ))
    return CampaignResult(config=config, records=records, redraws=redraws)
