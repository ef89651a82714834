import numpy as np
import pytest

from _oracles import trellis_reference
from vfdrelay import fec
from vfdrelay.fec import (
    BitFrame,
    LlrFrame,
    bcjr_coded_posteriors,
    bcjr_decode,
    conv_encode_outer,
    count_frame_errors,
    deinterleave,
    doped_accumulate,
    hard_decisions,
    identity_interleaver,
    inner_doped_trellis,
    interleave,
    outer_trellis,
    random_interleaver,
    sccc_decode,
    sccc_encode,
)


def _info(bits) -> BitFrame:
    return BitFrame(np.array(bits, dtype=np.int8), "info")


class TestFrames:
    def test_bitframe_rejects_bad_stage(self):
        with pytest.raises(ValueError, match="stage"):
            BitFrame(np.array([0, 1]), "wat")

    def test_bitframe_rejects_non_binary(self):
        with pytest.raises(ValueError, match="0 and 1"):
            BitFrame(np.array([0, 2]), "info")

    def test_bitframe_rejects_2d(self):
        with pytest.raises(ValueError, match="one-dimensional"):
            BitFrame(np.zeros((2, 2)), "info")

    def test_llrframe_rejects_bad_stage(self):
        with pytest.raises(ValueError, match="stage"):
            LlrFrame(np.zeros(4), "nope")


class TestOuterCode:
    def test_impulse_response(self):
        out = conv_encode_outer(_info([1, 0, 0, 0]))
        np.testing.assert_array_equal(out.bits, [1, 1, 1, 0, 0, 0, 0, 0])
        assert out.stage == "outer-coded"

    def test_linearity(self, rng):
        a = rng.integers(0, 2, 32)
        b = rng.integers(0, 2, 32)
        enc_xor = conv_encode_outer(_info(a ^ b)).bits
        xor_enc = conv_encode_outer(_info(a)).bits ^ conv_encode_outer(_info(b)).bits
        np.testing.assert_array_equal(enc_xor, xor_enc)

    def test_stage_gate(self):
        with pytest.raises(ValueError, match="stage"):
            conv_encode_outer(BitFrame(np.array([0, 1]), "channel"))


class TestDopedAccumulator:
    def test_hand_case_period_two(self):
        frame = BitFrame(np.array([1, 0, 1, 1], dtype=np.int8), "interleaved")
        out = doped_accumulate(frame, period=2)
        np.testing.assert_array_equal(out.bits, [1, 0, 0, 1])
        assert out.stage == "channel"

    def test_period_one_is_identity(self, rng):
        bits = rng.integers(0, 2, 16)
        out = doped_accumulate(BitFrame(bits, "interleaved"), period=1)
        np.testing.assert_array_equal(out.bits, bits)

    def test_hand_case_period_three(self):
        frame = BitFrame(np.array([1, 0, 1, 1, 0, 1], dtype=np.int8), "interleaved")
        out = doped_accumulate(frame, period=3)
        np.testing.assert_array_equal(out.bits, [1, 1, 1, 1, 1, 1])

    def test_rejects_bad_period(self):
        with pytest.raises(ValueError, match="period"):
            doped_accumulate(BitFrame(np.array([0, 1]), "interleaved"), period=0)


class TestInterleaver:
    def test_random_interleaver_is_permutation(self):
        il = random_interleaver(64, seed=5)
        assert sorted(il.permutation.tolist()) == list(range(64))
        np.testing.assert_array_equal(il.permutation[il.inverse], np.arange(64))

    def test_seed_determinism(self):
        a = random_interleaver(64, seed=5)
        b = random_interleaver(64, seed=5)
        c = random_interleaver(64, seed=6)
        np.testing.assert_array_equal(a.permutation, b.permutation)
        assert not np.array_equal(a.permutation, c.permutation)

    def test_round_trip(self, rng):
        il = random_interleaver(32, seed=1)
        bits = BitFrame(rng.integers(0, 2, 32), "outer-coded")
        back = deinterleave(interleave(bits, il), il)
        np.testing.assert_array_equal(back.bits, bits.bits)
        llrs = LlrFrame(rng.normal(size=32), "outer-coded")
        back_llrs = deinterleave(interleave(llrs, il), il)
        np.testing.assert_array_equal(back_llrs.values, llrs.values)

    def test_length_mismatch(self):
        il = random_interleaver(16, seed=1)
        with pytest.raises(ValueError, match="length"):
            interleave(BitFrame(np.zeros(8, dtype=np.int8), "outer-coded"), il)

    def test_stage_gates(self):
        il = identity_interleaver(4)
        with pytest.raises(ValueError, match="stage"):
            interleave(BitFrame(np.zeros(4, dtype=np.int8), "info"), il)
        with pytest.raises(ValueError, match="stage"):
            deinterleave(BitFrame(np.zeros(4, dtype=np.int8), "outer-coded"), il)


class TestEncodeChain:
    def test_composition(self, rng):
        bits = _info(rng.integers(0, 2, 24))
        il = random_interleaver(48, seed=3)
        manual = doped_accumulate(interleave(conv_encode_outer(bits), il))
        chained = sccc_encode(bits, il)
        np.testing.assert_array_equal(chained.bits, manual.bits)
        assert chained.stage == "channel"


class TestTrellisTables:
    def test_outer_structure(self):
        tr = outer_trellis(5)
        assert tr.steps == 5 and tr.outputs_per_step == 2
        for d in range(2):
            for s in range(2):
                assert tr.next_state[d, s] == d
                assert tr.out_bits[0, d, s, 0] == d ^ s
                assert tr.out_bits[0, d, s, 1] == d

    def test_inner_doping_pattern(self):
        tr = inner_doped_trellis(6, period=2)
        assert tr.outputs_per_step == 1
        for t in range(6):
            for d in range(2):
                for s in range(2):
                    expected = d if t % 2 == 1 else d ^ s
                    assert tr.out_bits[t, d, s, 0] == expected
                    assert tr.next_state[d, s] == d ^ s


class TestBcjrAgainstEnumeration:
    def test_outer_posteriors(self, rng):
        tr = outer_trellis(8)
        chan = rng.normal(0.0, 2.0, size=16)
        priors = rng.normal(0.0, 1.0, size=8)
        ref_in, _ = trellis_reference(tr, chan, priors)
        assert np.max(np.abs(ref_in)) < 49  # clamp must stay inactive
        extrinsic, posterior = bcjr_decode(tr, chan, priors)
        np.testing.assert_allclose(posterior, ref_in, atol=1e-9)
        np.testing.assert_allclose(extrinsic, ref_in - priors, atol=1e-9)

    def test_inner_posteriors(self, rng):
        tr = inner_doped_trellis(10, period=2)
        chan = rng.normal(0.0, 2.0, size=10)
        priors = rng.normal(0.0, 1.0, size=10)
        ref_in, ref_out = trellis_reference(tr, chan, priors)
        _, posterior = bcjr_decode(tr, chan, priors)
        np.testing.assert_allclose(posterior, ref_in, atol=1e-9)
        coded = bcjr_coded_posteriors(tr, chan, priors)
        np.testing.assert_allclose(coded, ref_out.reshape(-1), atol=1e-9)

    def test_doping_changes_posteriors(self, rng):
        # with uniform priors the outputs are uniform for any invertible
        # doping map; only input priors expose the pattern
        chan = rng.normal(0.0, 2.0, size=12)
        priors = rng.normal(0.0, 1.5, size=12)
        a = bcjr_coded_posteriors(inner_doped_trellis(12, period=2), chan, priors)
        b = bcjr_coded_posteriors(inner_doped_trellis(12, period=3), chan, priors)
        assert not np.allclose(a, b)

    def test_zero_input_gives_zero_output(self):
        tr = outer_trellis(6)
        extrinsic, posterior = bcjr_decode(tr, np.zeros(12), np.zeros(6))
        np.testing.assert_allclose(extrinsic, 0.0, atol=1e-12)
        np.testing.assert_allclose(posterior, 0.0, atol=1e-12)

    def test_default_priors_are_uniform(self, rng):
        tr = outer_trellis(6)
        chan = rng.normal(size=12)
        np.testing.assert_array_equal(
            bcjr_decode(tr, chan)[1], bcjr_decode(tr, chan, np.zeros(6))[1]
        )


class TestScccDecode:
    def test_noiseless_round_trip(self, rng):
        bits = _info(rng.integers(0, 2, 64))
        il = random_interleaver(128, seed=9)
        coded = sccc_encode(bits, il)
        channel = LlrFrame(50.0 * (1 - 2 * coded.bits.astype(float)), "channel")
        info_post, coded_post = sccc_decode(channel, il)
        assert count_frame_errors(hard_decisions(info_post), bits) == 0
        np.testing.assert_array_equal(hard_decisions(coded_post).bits, coded.bits)

    def test_output_clamping(self, rng):
        bits = _info(rng.integers(0, 2, 64))
        il = random_interleaver(128, seed=10)
        coded = sccc_encode(bits, il)
        channel = LlrFrame(50.0 * (1 - 2 * coded.bits.astype(float)), "channel")
        info_post, coded_post = sccc_decode(channel, il)
        assert np.max(np.abs(info_post.values)) <= 50.0
        assert np.max(np.abs(coded_post.values)) <= 50.0
        _, raw = sccc_decode(channel, il, clamp_coded=False)
        assert np.max(np.abs(raw.values)) > 50.0
        np.testing.assert_array_equal(
            np.clip(raw.values, -50.0, 50.0), coded_post.values
        )

    def test_decoding_corrects_noise(self, rng):
        bits = _info(rng.integers(0, 2, 128))
        il = random_interleaver(256, seed=11)
        coded = sccc_encode(bits, il)
        clean = 2.2 * (1 - 2 * coded.bits.astype(float))
        noisy = clean + rng.normal(0.0, 1.2, size=256)
        info_post, _ = sccc_decode(LlrFrame(noisy, "channel"), il)
        raw_errors = int(np.count_nonzero((noisy < 0) != coded.bits.astype(bool)))
        decoded_errors = count_frame_errors(hard_decisions(info_post), bits)
        assert decoded_errors == 0
        assert raw_errors > 0

    def test_rejects_wrong_stage(self):
        il = identity_interleaver(8)
        with pytest.raises(ValueError, match="stage"):
            sccc_decode(LlrFrame(np.zeros(8), "info"), il)

    def test_rejects_odd_length(self):
        il = identity_interleaver(7)
        with pytest.raises(ValueError, match="length"):
            sccc_decode(LlrFrame(np.zeros(7), "channel"), il)


class TestDecisions:
    def test_hard_decisions_signs(self):
        frame = LlrFrame(np.array([2.5, -0.1, 0.0]), "info")
        np.testing.assert_array_equal(hard_decisions(frame).bits, [0, 1, 0])

    def test_count_errors(self):
        a = _info([0, 1, 1, 0])
        b = _info([0, 1, 0, 1])
        assert count_frame_errors(a, b) == 2

    def test_count_errors_stage_mismatch(self):
        a = _info([0, 1])
        b = BitFrame(np.array([0, 1], dtype=np.int8), "channel")
        with pytest.raises(ValueError, match="stage"):
            count_frame_errors(a, b)
