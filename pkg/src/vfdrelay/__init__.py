"""Link-level simulator for a two-relay virtual full-duplex network.

The source streams coded frames back-to-back while two half-duplex relays
alternate between listening and forwarding, so the destination sees a new
frame every slot. Relays strip the other relay's interference with a QR
rotation; the destination runs joint iterative detection and decoding that
weighs each relay contribution by an estimated decoding-error probability.
"""

from .fec import (
    BitFrame,
    Interleaver,
    LlrFrame,
    bcjr_coded_posteriors,
    bcjr_decode,
    conv_encode_outer,
    count_frame_errors,
    doped_accumulate,
    hard_decisions,
    random_interleaver,
    sccc_decode,
    sccc_encode,
)
from .nodes import (
    DestinationResult,
    DetectorSlotInput,
    ForwardingPolicy,
    SlotSchedule,
    decide_forward,
    destination_collect_slot,
    iterative_receive,
    relay_receive,
)
from .numerics import (
    DegenerateChannelError,
    RngStream,
    qr_positive_diagonal,
    sample_awgn,
    sample_rayleigh,
    to_real_channel,
    to_real_observation,
)
from .phy import (
    Constellation,
    SymbolFrame,
    estimate_pe,
    llr_to_posterior,
    map_detect,
    modify_priors,
    modulate,
    qpsk,
    relay_channel_llrs,
)
from .sim import (
    BerRecord,
    CampaignResult,
    LinkBudget,
    ScenarioConfig,
    SchemeOutcome,
    link_budget,
    run_campaign,
    run_realization,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
