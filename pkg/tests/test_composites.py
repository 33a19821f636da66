import itertools

import numpy as np
import pytest

from copuf.composites import (
    LOOP_CONFIGS,
    ApufInstance,
    FfApufInstance,
    GeometryError,
    IpufInstance,
    LoopSpec,
    MnApufInstance,
    OaxFfInstance,
    XorFfInstance,
    ff_respond,
    instance_descriptor,
    instance_from_descriptor,
    ipuf_respond,
    mn_respond,
    oax_ff_respond,
    parse_loops,
    resolve_loops,
    respond,
    xor_ff_respond,
)
from copuf.core import NoiseModel, apuf_respond
from copuf.metrics import measure_ber, measure_uniformity

from conftest import random_challenges
from oracles import two_branch_oracle


class TestFfApuf:
    def test_zero_loops_degenerates_to_plain_chain(self, challenges64):
        ff = FfApufInstance.from_seed(3, 64, ())
        plain = ApufInstance.from_seed(3, 64)
        assert np.array_equal(ff_respond(ff, challenges64), apuf_respond(plain, challenges64))

    def test_two_branch_oracle_exhaustive_n8(self):
        for seed in range(4):
            inst = FfApufInstance.from_seed(seed, 8, ((3, (6,)),))
            for bits in itertools.product((0, 1), repeat=8):
                c = np.array(bits, dtype=np.uint8)
                assert ff_respond(inst, c) == two_branch_oracle(inst, c)

    def test_two_branch_oracle_sampled_n64(self):
        rng = np.random.default_rng(0)
        for _ in range(3):
            s = int(rng.integers(5, 40))
            e = int(rng.integers(s + 1, 65))
            inst = FfApufInstance.from_seed(int(rng.integers(1 << 30)), 64, ((s, (e,)),))
            for c in random_challenges(s * e, 200, 64):
                assert ff_respond(inst, c) == two_branch_oracle(inst, c)

    def test_input_end_bits_are_ignored(self, challenges64):
        inst = FfApufInstance.from_seed(5, 64, LOOP_CONFIGS["Loop_B"])
        mutated = challenges64.copy()
        for e in inst.end_positions:
            mutated[:, e - 1] ^= 1
        assert np.array_equal(ff_respond(inst, challenges64), ff_respond(inst, mutated))

    def test_noisy_requires_rng(self):
        inst = FfApufInstance.from_seed(5, 16, ((3, (8,)),))
        with pytest.raises(ValueError):
            ff_respond(inst, np.zeros(16, dtype=np.uint8), NoiseModel(0.1), None)

    def test_loop_geometry_errors(self):
        with pytest.raises(GeometryError):
            LoopSpec(10, (5,), 0.0)  # end before arbiter
        with pytest.raises(GeometryError):
            LoopSpec(10, (), 0.0)  # no ends
        with pytest.raises(GeometryError):
            FfApufInstance.from_seed(1, 64, ((5, (10,)), (8, (10,))))  # shared end
        with pytest.raises(GeometryError):
            FfApufInstance.from_seed(1, 64, ((5, (70,)),))  # end beyond n

    def test_parse_and_resolve_loops(self):
        assert parse_loops("15->25,30") == ((15, (25, 30)),)
        assert parse_loops("8→62;16→63") == ((8, (62,)), (16, (63,)))
        assert resolve_loops("Loop_D") == LOOP_CONFIGS["Loop_D"]
        with pytest.raises(GeometryError):
            resolve_loops("Loop_Z")
        with pytest.raises(GeometryError):
            parse_loops("banana")


class TestXorFf:
    def test_single_member_identity(self, challenges64):
        xor1 = XorFfInstance.from_seed(7, 1, 64, LOOP_CONFIGS["Loop_A"])
        assert np.array_equal(
            xor_ff_respond(xor1, challenges64), ff_respond(xor1.members[0], challenges64)
        )

    def test_duplicate_member_cancels(self, challenges64):
        member = FfApufInstance.from_seed(8, 64, LOOP_CONFIGS["Loop_A"])
        pair = XorFfInstance(members=(member, member))
        assert (xor_ff_respond(pair, challenges64) == 0).all()

    def test_empty_members_rejected(self):
        with pytest.raises(ValueError):
            XorFfInstance(members=())

    def test_ber_monotone_in_member_count(self):
        # Fixed loop config and sigma; composition scales instability up.
        bers = [
            measure_ber(XorFfInstance.from_seed(21, z, 64, LOOP_CONFIGS["Loop_A"]),
                        sigma=0.05, n_challenges=10_000, repeats=11, seed=5)
            for z in (1, 2, 3, 4)
        ]
        assert bers == sorted(bers)

    def test_xor_debiasing_trend(self):
        # |uniformity - 0.5| at z=4 no larger than at z=1 on >= 8 of 10 seeds.
        wins = 0
        for seed in range(10):
            u1 = measure_uniformity(
                XorFfInstance.from_seed(seed, 1, 64, LOOP_CONFIGS["Loop_A"]), 10_000, seed=99
            )
            u4 = measure_uniformity(
                XorFfInstance.from_seed(seed, 4, 64, LOOP_CONFIGS["Loop_A"]), 10_000, seed=99
            )
            wins += abs(u4 - 0.5) <= abs(u1 - 0.5)
        assert wins >= 8


class TestOaxFf:
    def test_degenerate_equals_xor(self, challenges64):
        oax = OaxFfInstance.from_seed(31, 0, 0, 3, 64, LOOP_CONFIGS["Loop_A"])
        xor = XorFfInstance.from_seed(31, 3, 64, LOOP_CONFIGS["Loop_A"])
        assert np.array_equal(
            oax_ff_respond(oax, challenges64), xor_ff_respond(xor, challenges64)
        )
        # identical under shared noisy streams too
        noise = NoiseModel(0.2)
        r1 = oax_ff_respond(oax, challenges64, noise, np.random.default_rng(5))
        r2 = xor_ff_respond(xor, challenges64, noise, np.random.default_rng(5))
        assert np.array_equal(r1, r2)

    def test_singleton_groups_reduce_to_xor(self, challenges64):
        oax = OaxFfInstance.from_seed(32, 1, 1, 1, 64, LOOP_CONFIGS["Loop_A"])
        a, b, c3 = (ff_respond(m, challenges64)
                    for m in oax.or_members + oax.and_members + oax.xor_members)
        assert np.array_equal(oax_ff_respond(oax, challenges64), a ^ b ^ c3)

    def test_all_groups_empty_rejected(self):
        with pytest.raises(ValueError):
            OaxFfInstance(or_members=(), and_members=(), xor_members=())


class TestMn:
    def test_noop_overwrite_equals_main_chain(self):
        # challenges whose MSBs already equal the auxiliary outputs: the
        # overwrite is a no-op and the response is the plain main-chain
        # response.  The auxiliaries read the driven positions too, so a
        # consistent assignment is a fixed point; search the 8 combos.
        inst = MnApufInstance.from_seed(41, 64)
        c = random_challenges(42, 500, 64)
        fixed_rows = []
        for combo in itertools.product((0, 1), repeat=3):
            trial = c.copy()
            for i, bit in enumerate(combo):
                trial[:, 64 - 1 - i] = bit
            outs = np.stack([
                apuf_respond(a, trial[:, 64 - a.n:]) for a in inst.aux
            ])
            match = (outs == np.array(combo)[:, None]).all(axis=0)
            fixed_rows.append(trial[match])
        fixed = np.concatenate(fixed_rows)
        assert len(fixed) >= 100
        assert np.array_equal(mn_respond(inst, fixed), apuf_respond(inst.main, fixed))

    def test_aux_read_raw_challenge(self):
        # the largest auxiliary overlaps the driven positions; it must see
        # the raw input bits, not other auxiliaries' outputs
        inst = MnApufInstance.from_seed(43, 64)
        c = random_challenges(44, 200, 64)
        expected = c.copy()
        for i, a in enumerate(inst.aux):
            expected[:, 64 - 1 - i] = apuf_respond(a, c[:, 64 - a.n:])
        assert np.array_equal(mn_respond(inst, c), apuf_respond(inst.main, expected))

    def test_sizes_and_positions(self):
        inst = MnApufInstance.from_seed(45, 64, (32, 16, 8))
        assert inst.sizes == (32, 16, 8)
        assert inst.driven_positions == (64, 63, 62)

    def test_oversized_aux_rejected(self):
        with pytest.raises(ValueError):
            MnApufInstance.from_seed(46, 16, (32, 8, 4))


class TestIpuf:
    def test_constant_interposition(self, challenges64):
        # lower chain pinned to response 0 by a huge positive offset
        w = np.zeros(65)
        w[-1] = 1e6
        pinned = ApufInstance(n=64, weights=w)
        upper = tuple(ApufInstance.from_seed([51, m], 65) for m in range(3))
        inst = IpufInstance(lower=(pinned,), upper=upper, interpose_pos=33)

        with_zero = np.insert(challenges64, 32, 0, axis=1)
        expected = np.zeros(len(challenges64), dtype=np.uint8)
        for m in upper:
            expected ^= apuf_respond(m, with_zero)
        assert np.array_equal(ipuf_respond(inst, challenges64), expected)

    def test_insertion_length_and_recovery(self, challenges64):
        from copuf.composites import interpose_challenge, remove_interposed

        bits = np.random.default_rng(3).integers(0, 2, len(challenges64), dtype=np.uint8)
        for pos in (1, 33, 65):
            upper = interpose_challenge(challenges64, bits, pos)
            assert upper.shape == (len(challenges64), 65)
            assert (upper[:, pos - 1] == bits).all()
            assert np.array_equal(remove_interposed(upper, pos), challenges64)

    def test_interpose_position_matters(self, challenges64):
        a = IpufInstance.from_seed(52, 1, 1, 64, interpose_pos=33)
        b = IpufInstance.from_seed(52, 1, 1, 64, interpose_pos=1)
        assert (ipuf_respond(a, challenges64) != ipuf_respond(b, challenges64)).any()

    def test_bad_geometry(self):
        lower = (ApufInstance.from_seed(1, 64),)
        upper = (ApufInstance.from_seed(2, 65),)
        with pytest.raises(ValueError):
            IpufInstance(lower=lower, upper=upper, interpose_pos=66)
        with pytest.raises(ValueError):
            IpufInstance(lower=lower, upper=(ApufInstance.from_seed(2, 64),), interpose_pos=33)


class TestDescriptors:
    @pytest.mark.parametrize("build", [
        lambda: ApufInstance.from_seed(61, 64),
        lambda: FfApufInstance.from_seed(62, 64, LOOP_CONFIGS["Loop_B"]),
        lambda: XorFfInstance.from_seed(63, 3, 64, LOOP_CONFIGS["Loop_A"]),
        lambda: OaxFfInstance.from_seed(64, 2, 3, 1, 64, LOOP_CONFIGS["Loop_A"]),
        lambda: MnApufInstance.from_seed(65, 64),
        lambda: IpufInstance.from_seed(66, 3, 3, 64),
    ])
    def test_round_trip_preserves_behavior(self, build, challenges64):
        inst = build()
        seed = {ApufInstance: 61, FfApufInstance: 62, XorFfInstance: 63,
                OaxFfInstance: 64, MnApufInstance: 65, IpufInstance: 66}[type(inst)]
        rebuilt = instance_from_descriptor(instance_descriptor(inst, seed))
        assert np.array_equal(respond(inst, challenges64), respond(rebuilt, challenges64))
