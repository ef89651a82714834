from dataclasses import replace

import numpy as np
import pytest

from vfdrelay import sim
from vfdrelay.sim import (
    ALL_SCHEMES,
    CampaignResult,
    ScenarioConfig,
    link_budget,
    run_campaign,
    run_realization,
)

TINY = ScenarioConfig(
    relay_location="B", snr_grid_db=(4.0, 8.0), num_frames=2, info_bits=16,
    schemes=("proposed-with-pe", "crc-sdf"), realizations=3, base_seed=77,
)


class TestLinkBudget:
    def test_location_a_is_flat(self):
        budget = link_budget("A", 7.0)
        assert budget.source_destination_db == 7.0
        assert budget.source_relay_db == 7.0
        assert budget.relay_destination_db == 7.0
        assert budget.inter_relay_db == 7.0

    def test_location_b_boosts(self):
        budget = link_budget("B", 6.0)
        assert budget.source_destination_db == 6.0
        assert abs(budget.source_relay_db - 6.0 - 10.5966) < 1e-3
        assert abs(budget.inter_relay_db - 6.0 - 10.5966) < 1e-3
        assert abs(budget.relay_destination_db - 6.0 - 4.3977) < 1e-3

    def test_exponent_scales_boost(self):
        budget = link_budget("B", 0.0, pathloss_exponent=2.0)
        assert abs(budget.source_relay_db - 6.0206) < 1e-3
        assert abs(budget.relay_destination_db - 2.4988) < 1e-3

    def test_rejects_unknown_location(self):
        with pytest.raises(ValueError, match="location"):
            link_budget("C", 0.0)


class TestScenarioConfig:
    def test_defaults_match_full_scale(self):
        config = ScenarioConfig()
        assert config.num_frames == 20
        assert config.info_bits == 512
        assert config.num_antennas == 2
        assert config.iterations == 5
        assert config.realizations == 1000
        assert config.schemes == ALL_SCHEMES
        config.validate()

    def test_desk_scaled(self):
        desk = ScenarioConfig().desk_scaled()
        assert desk.realizations == 100
        assert desk.num_frames == 10
        assert desk.info_bits == 256
        desk.validate()

    def test_coded_bits(self):
        assert ScenarioConfig(info_bits=256).coded_bits == 512

    @pytest.mark.parametrize("field,value,msg", [
        ("relay_location", "C", "location"),
        ("snr_grid_db", (), "grid"),
        ("num_frames", 7, "even"),
        ("info_bits", 1, "info_bits"),
        ("num_antennas", 1, "antennas"),
        ("iterations", 0, "iterations"),
        ("decoder_iterations", 0, "decoder_iterations"),
        ("schemes", ("nonesuch",), "unknown scheme"),
        ("schemes", ("crc-sdf", "crc-sdf"), "duplicates"),
        ("schemes", (), "scheme"),
        ("realizations", 0, "realizations"),
        ("base_seed", -1, "seed"),
        ("pathloss_exponent", 0.0, "pathloss"),
        ("pe_mode", "oracle", "pe_mode"),
        ("workers", 0, "workers"),
    ])
    def test_validation(self, field, value, msg):
        with pytest.raises(ValueError, match=msg):
            replace(ScenarioConfig(), **{field: value}).validate()


class TestRunRealization:
    def test_deterministic(self):
        a = run_realization(TINY, 4.0, 1)
        b = run_realization(TINY, 4.0, 1)
        for scheme in TINY.schemes:
            assert a.per_scheme[scheme].bit_errors == b.per_scheme[scheme].bit_errors
            np.testing.assert_array_equal(
                a.per_scheme[scheme].final_pe, b.per_scheme[scheme].final_pe
            )

    def test_indices_differ(self):
        outcomes = {
            idx: run_realization(TINY, 4.0, idx).per_scheme["proposed-with-pe"]
            for idx in range(4)
        }
        pes = {idx: tuple(out.final_pe[np.isfinite(out.final_pe)])
               for idx, out in outcomes.items()}
        assert len(set(pes.values())) > 1

    def test_grid_membership_is_irrelevant(self):
        # paired draws: the same index gives the same world whatever else
        # is on the grid
        wide = run_realization(TINY, 8.0, 2)
        narrow = run_realization(replace(TINY, snr_grid_db=(8.0,)), 8.0, 2)
        for scheme in TINY.schemes:
            assert (wide.per_scheme[scheme].bit_errors
                    == narrow.per_scheme[scheme].bit_errors)

    def test_validates_config(self):
        with pytest.raises(ValueError, match="even"):
            run_realization(replace(TINY, num_frames=3), 4.0, 0)

    def test_outcome_accounting(self):
        res = run_realization(TINY, 4.0, 0)
        for scheme in TINY.schemes:
            out = res.per_scheme[scheme]
            assert out.bits_total == TINY.num_frames * TINY.info_bits
            assert 0 <= out.bit_errors <= out.bits_total
            assert out.forwarded.shape == (TINY.num_frames,)
            assert out.relay_info_errors.shape == (TINY.num_frames,)

    def test_perfect_relay_always_forwards_truth(self):
        cfg = replace(TINY, schemes=("perfect-relay",))
        res = run_realization(cfg, 4.0, 3)
        out = res.per_scheme["perfect-relay"]
        assert np.all(out.forwarded)


class TestRunCampaign:
    def test_matches_single_realizations(self):
        campaign = run_campaign(replace(TINY, workers=1))
        for scheme in TINY.schemes:
            for snr in TINY.snr_grid_db:
                expected = sum(
                    run_realization(TINY, snr, idx).per_scheme[scheme].bit_errors
                    for idx in range(TINY.realizations)
                )
                rec = campaign.record(scheme, snr)
                assert rec.bit_errors == expected
                assert rec.realizations == TINY.realizations
                assert rec.bits_total == (
                    TINY.realizations * TINY.num_frames * TINY.info_bits
                )
                assert rec.ber == rec.bit_errors / rec.bits_total

    def test_worker_count_never_changes_results(self):
        serial = run_campaign(replace(TINY, workers=1))
        parallel = run_campaign(replace(TINY, workers=2))
        for scheme in TINY.schemes:
            for snr in TINY.snr_grid_db:
                a = serial.record(scheme, snr)
                b = parallel.record(scheme, snr)
                assert a.bit_errors == b.bit_errors
                np.testing.assert_allclose(a.mean_slot_pe, b.mean_slot_pe,
                                           equal_nan=True)

    def test_record_lookup_miss(self):
        campaign = run_campaign(replace(TINY, workers=1, realizations=1))
        with pytest.raises(KeyError, match="record"):
            campaign.record("proposed-with-pe", 99.0)
        assert isinstance(campaign, CampaignResult)

    def test_mean_pe_confined_to_relay_slots(self):
        campaign = run_campaign(replace(TINY, workers=1, realizations=2))
        rec = campaign.record("proposed-with-pe", 4.0)
        finite = np.isfinite(rec.mean_slot_pe)
        # slots 2..L+1 carry relay streams; 0 is padding, 1 never does
        assert not finite[0] and not finite[1]
        assert finite[2] and finite[3]

    def test_noiseless_is_error_free(self):
        cfg = replace(TINY, noiseless=True, schemes=ALL_SCHEMES,
                      snr_grid_db=(6.0,), realizations=2, workers=1)
        campaign = run_campaign(cfg)
        for scheme in ALL_SCHEMES:
            assert campaign.record(scheme, 6.0).bit_errors == 0


class TestSchemeTable:
    def test_known_schemes(self):
        assert set(ALL_SCHEMES) == {
            "proposed-with-pe", "proposed-without-pe", "crc-sdf",
            "threshold-sdf", "perfect-relay",
        }

    def test_policies_are_valid(self):
        for scheme, (policy, pe_mode) in sim.SCHEME_POLICIES.items():
            assert policy in ("always", "crc", "threshold", "perfect")
            assert pe_mode in ("estimated", "genie", "zero")
