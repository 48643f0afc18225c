import dataclasses
import logging
import random

import pytest
from hypothesis import given, settings, strategies as st

from psiauth import (
    DeviceSecret,
    DuplicateFeatureError,
    EncryptedProfile,
    FeatureMode,
    FeatureSet,
    build_encrypted_profile,
    decode_numeric,
    decrypt,
    encode_numeric,
    hash_feature,
    poly_from_roots,
    solve_blinding,
    solve_blinding_gaussian,
)
from psiauth.encoding import DecodeError
from psiauth.paillier import draw_unit, keypair_from_primes
from psiauth.profiles import _solve_scaled_integer_system

from helpers import blinding_identity_holds, distinct_values


def case_a(values):
    return FeatureSet.from_values(FeatureMode.CASE_A, values)


class TestFeatureSet:
    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            FeatureSet.from_values(FeatureMode.CASE_A, [])

    def test_zero_and_oversized_rejected(self):
        with pytest.raises(ValueError):
            case_a([0, 1])
        with pytest.raises(ValueError):
            case_a([1, (1 << 128) + 1])

    def test_set_semantics(self):
        assert case_a([3, 1, 2, 3]).values == (1, 2, 3)

    def test_case_c_requires_parameters(self):
        with pytest.raises(ValueError):
            FeatureSet.from_values(FeatureMode.CASE_C, [1, 2])
        with pytest.raises(ValueError):
            FeatureSet.from_values(FeatureMode.CASE_A, [1], count=2, cap=3)


class TestPolyFromRoots:
    def test_two_roots(self, kp128):
        pk, _ = kp128
        coeffs = poly_from_roots(case_a([2, 3]), pk.n)
        assert coeffs == [6, pk.n - 5, 1]  # (x-2)(x-3) = x**2 - 5x + 6

    def test_single_root(self, kp128):
        pk, _ = kp128
        assert poly_from_roots(case_a([7]), pk.n) == [pk.n - 7, 1]

    def test_duplicate_roots_modulo_n_rejected(self, tiny_keypair):
        pk, _ = tiny_keypair
        with pytest.raises(DuplicateFeatureError):
            poly_from_roots(case_a([2, 17]), pk.n)  # 17 = 2 mod 15

    def test_monic_and_vanishing_at_roots(self, kp128):
        pk, _ = kp128
        rng = random.Random(31)
        for _ in range(100):
            values = distinct_values(rng, rng.randint(1, 20), 32)
            coeffs = poly_from_roots(case_a(values), pk.n)
            assert coeffs[-1] == 1
            for root in values:
                total = sum(c * pow(root, k, pk.n) for k, c in enumerate(coeffs))
                assert total % pk.n == 0


class TestBlindingSolvers:
    def test_closed_form_single_root_identity(self, kp128, rng):
        pk, sk = kp128
        root = 12345
        coeffs = poly_from_roots(case_a([root]), pk.n)
        anchor = draw_unit(rng, pk.n_squared)
        solution = solve_blinding(coeffs, anchor, pk, sk, rng)
        r0, r1 = solution.randomizers
        assert r0 * pow(r1, root, pk.n_squared) % pk.n_squared == anchor

    def test_solution_is_nontrivial(self, kp128):
        pk, sk = kp128
        for seed in range(10):
            rng = random.Random(seed)
            values = distinct_values(rng, 5, 32)
            coeffs = poly_from_roots(case_a(values), pk.n)
            solution = solve_blinding(coeffs, draw_unit(rng, pk.n_squared),
                                      pk, sk, rng)
            assert any(r != 1 for r in solution.randomizers[1:])

    def test_anchor_must_be_unit(self, kp128, rng):
        pk, sk = kp128
        with pytest.raises(ValueError):
            solve_blinding([1, 1], pk.n, pk, sk, rng)

    @pytest.mark.parametrize("solver", [solve_blinding, solve_blinding_gaussian])
    def test_identity_on_random_profiles(self, kp128, solver):
        pk, sk = kp128
        rng = random.Random(77)
        for _ in range(30):
            values = distinct_values(rng, rng.randint(1, 12), 32)
            features = case_a(values)
            anchor = draw_unit(rng, pk.n_squared)
            if solver is solve_blinding:
                solution = solver(poly_from_roots(features, pk.n), anchor,
                                  pk, sk, rng)
            else:
                solution = solver(features, anchor, pk, sk, rng)
            assert blinding_identity_holds(
                solution.randomizers, solution.anchor, values, pk.n_squared)

    def test_identity_with_reduced_powers_too(self, kp128, rng):
        # The protocol reduces feature powers mod n; the identity must hold
        # under that convention as well.
        pk, sk = kp128
        values = distinct_values(rng, 8, 32)
        coeffs = poly_from_roots(case_a(values), pk.n)
        solution = solve_blinding(coeffs, draw_unit(rng, pk.n_squared),
                                  pk, sk, rng)
        for root in values:
            acc = solution.randomizers[0]
            power = 1
            for k in range(1, len(solution.randomizers)):
                power = power * root % pk.n
                acc = acc * pow(solution.randomizers[k], power,
                                pk.n_squared) % pk.n_squared
            assert acc == solution.anchor

    def test_gaussian_two_by_two_hand_example(self):
        # Power matrix of roots {2, 3}: det = 2*3*(3-2) = 6; the scaled
        # system V x = 6*(1,1) has the integer solution x = (5, -1).
        solution, det = _solve_scaled_integer_system([[2, 4], [3, 9]], [1, 1])
        assert det == 6
        assert solution == [5, -1]

    def test_gaussian_falls_back_on_degenerate_input(self, caplog):
        pk, sk = keypair_from_primes(3, 5, insecure_test_mode=True)
        features = case_a([15])  # 15 = 0 mod n: zero row in the power matrix
        rng = random.Random(3)
        with caplog.at_level(logging.WARNING, logger="psiauth.profiles"):
            solution = solve_blinding_gaussian(
                features, draw_unit(rng, pk.n_squared), pk, sk, rng)
        assert "falling back" in caplog.text
        assert blinding_identity_holds(
            solution.randomizers, solution.anchor, features.values,
            pk.n_squared, reduce_mod=pk.n * sk.lam)

    def test_gaussian_does_not_log_on_clean_input(self, kp128, rng, caplog):
        pk, sk = kp128
        with caplog.at_level(logging.WARNING, logger="psiauth.profiles"):
            solve_blinding_gaussian(case_a([5, 9, 14]),
                                    draw_unit(rng, pk.n_squared), pk, sk, rng)
        assert not caplog.records


class TestBuildEncryptedProfile:
    def test_sizes_and_monicity(self, rng):
        features = case_a([10, 20, 30])
        profile, secret, audit = build_encrypted_profile(
            "alice", features, 128, rng, keep_setup_audit=True)
        assert len(profile.enc_coeffs) == 4
        assert len(profile.blinded_randomizers) == 4
        assert profile.size == 3
        assert decrypt(profile.public_key, audit.secret_key,
                       profile.enc_coeffs[-1]) == 1

    def test_unblinded_randomizer_consistency(self, rng):
        # Enc(p_i) * R_i**n must equal an encryption of p_i whose
        # randomizer is the blinding value r'_i.
        features = case_a([3, 5, 8])
        profile, _, audit = build_encrypted_profile(
            "alice", features, 128, rng, keep_setup_audit=True)
        pk = profile.public_key
        for ct, coeff, big_r, blind in zip(profile.enc_coeffs, audit.coeffs,
                                           audit.unblinded_randomizers,
                                           audit.blinding.randomizers):
            lhs = ct.value * pow(big_r, pk.n, pk.n_squared) % pk.n_squared
            rhs = (1 + coeff * pk.n) * pow(blind, pk.n, pk.n_squared) % pk.n_squared
            assert lhs == rhs

    def test_device_secret_field_inventory(self, rng):
        secret = build_encrypted_profile("alice", case_a([4, 5]), 128, rng)[1]
        names = {f.name for f in dataclasses.fields(DeviceSecret)}
        assert names == {"user_id", "secret_exponent", "anchor", "mode",
                         "count", "cap"}
        assert secret.user_id == "alice"
        assert secret.count is None and secret.cap is None

    def test_secret_invariant_under_feature_permutation(self):
        # With a fixed seed the retained secret cannot depend on the order
        # in which features were collected.
        values = [111, 222, 333, 444]
        runs = []
        for permuted in (values, values[::-1], [333, 111, 444, 222]):
            rng = random.Random(2024)
            _, secret = build_encrypted_profile(
                "alice", FeatureSet.from_values(FeatureMode.CASE_A, permuted),
                128, rng)
            runs.append(secret.to_bytes())
        assert runs[0] == runs[1] == runs[2]

    def test_unknown_solver_rejected(self, rng):
        with pytest.raises(ValueError):
            build_encrypted_profile("alice", case_a([1]), 128, rng,
                                    solver="cramer")

    def test_threshold_recorded(self, rng):
        profile, _ = build_encrypted_profile("alice", case_a([1, 2]), 128,
                                             rng, threshold=2)
        assert profile.threshold == 2


class TestNumericEncoding:
    def test_documented_example(self):
        features = encode_numeric((2, 0, 3), 3)
        assert features.values == (1, 2, 7, 8, 9)
        assert features.size == 5
        assert features.count == 3 and features.cap == 3

    def test_all_zero_vector_fails_setup(self):
        with pytest.raises(ValueError):
            encode_numeric((0, 0, 0), 3)

    def test_entry_above_cap_rejected(self):
        with pytest.raises(ValueError):
            encode_numeric((1, 4), 3)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(min_value=0, max_value=9), min_size=1,
                    max_size=10).filter(lambda u: sum(u) > 0))
    def test_cardinality_is_vector_sum(self, vector):
        assert encode_numeric(vector, 9).size == sum(vector)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(min_value=0, max_value=7), min_size=1,
                    max_size=8).filter(lambda u: sum(u) > 0))
    def test_decode_inverts_encode(self, vector):
        assert decode_numeric(encode_numeric(vector, 7)) == tuple(vector)

    def test_decode_rejects_gap(self):
        broken = FeatureSet(FeatureMode.CASE_C, (2,), count=1, cap=3)
        with pytest.raises(ValueError):
            decode_numeric(broken)


class TestHashFeature:
    def test_deterministic(self):
        assert hash_feature(b"cell-tower-17") == hash_feature(b"cell-tower-17")

    def test_range(self):
        for raw in (b"a", b"\x00", b"x" * 1000):
            assert 1 <= hash_feature(raw) <= 1 << 128

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            hash_feature(b"")

    def test_no_collisions_over_corpus(self):
        corpus = [f"feature-{i}".encode() for i in range(10_000)]
        digests = {hash_feature(raw) for raw in corpus}
        assert len(digests) == len(corpus)


class TestSerialization:
    def build(self, rng, **kwargs):
        return build_encrypted_profile("alice", case_a([9, 18, 27]), 128,
                                       rng, **kwargs)

    def test_profile_roundtrip(self, rng):
        profile, _ = self.build(rng, threshold=3)
        data = profile.to_bytes()
        restored = EncryptedProfile.from_bytes(data)
        assert restored == profile
        assert restored.to_bytes() == data

    def test_case_c_profile_roundtrip(self, rng):
        features = encode_numeric((2, 1), 3)
        profile, _ = build_encrypted_profile("alice", features, 128, rng)
        restored = EncryptedProfile.from_bytes(profile.to_bytes())
        assert restored == profile
        assert (restored.count, restored.cap) == (2, 3)

    def test_secret_roundtrip(self, rng):
        _, secret = self.build(rng)
        assert DeviceSecret.from_bytes(secret.to_bytes()) == secret

    def test_trailing_bytes_rejected(self, rng):
        profile, _ = self.build(rng)
        with pytest.raises(DecodeError, match="trailing"):
            EncryptedProfile.from_bytes(profile.to_bytes() + b"\x00")

    def test_unknown_mode_tag_rejected(self, rng):
        _, secret = self.build(rng)
        data = bytearray(secret.to_bytes())
        data[-1] = 0x7E
        with pytest.raises(DecodeError, match="mode tag"):
            DeviceSecret.from_bytes(bytes(data))

    def test_non_canonical_integer_rejected(self):
        from psiauth.encoding import Reader
        padded = (2).to_bytes(4, "big") + b"\x00\x07"
        with pytest.raises(DecodeError, match="leading zero"):
            Reader(padded).uint()

    def test_secret_serialization_carries_only_declared_fields(self, rng):
        # user id, d, anchor, mode tag: nothing else fits in the byte count.
        _, secret = self.build(rng)
        expected_len = (4 + len(secret.user_id.encode()) +
                        4 + (secret.secret_exponent.bit_length() + 7) // 8 +
                        4 + (secret.anchor.bit_length() + 7) // 8 +
                        1)
        assert len(secret.to_bytes()) == expected_len
