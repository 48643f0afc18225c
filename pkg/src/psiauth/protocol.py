"""The three-message authentication protocol and the decision rule.

One authentication run:

1. The carrier draws a fresh session exponent, raises every encrypted
   coefficient to it and sends those powers plus the stored blinded
   randomizers (``carrier_challenge``).
2. For each sample value the device evaluates the powered polynomial in the
   exponent, masks it with a per-value randomizer and its secret exponent,
   and emits the triple (cipher, correction, tag); the triples are shuffled
   before transmission (``device_respond``).
3. The carrier multiplies each cipher by the correction raised to
   ``n * theta`` and compares against the tag raised to the same power; the
   two collide exactly when the sample value is a profile feature
   (``carrier_score``).

The count of collisions is the set-intersection cardinality (Case A), the
similarity-weighted match total (Case B, ``device_respond_weighted``) or the
pairwise-min sum of the numeric vectors (Case C); ``decide`` turns it into a
dissimilarity score and an accept/reject outcome.

Feature powers ``b**i`` are reduced modulo ``n`` before use as exponents on
both response legs; profile set-up solves the blinding system compatibly, so
the carrier-side cancellation stays exact (see ``profiles``).
"""

from __future__ import annotations

import math
import random
import threading
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .encoding import Reader, encode_uint
from .paillier import PaillierPublicKey, draw_unit
from .profiles import DeviceSecret, EncryptedProfile, FeatureMode, FeatureSet
from .similarity import SimilarityFunction

__all__ = [
    "INFINITE",
    "AuthChallenge",
    "AuthDecision",
    "AuthResponseEntry",
    "ModeMismatchError",
    "ProtocolError",
    "SessionError",
    "SessionState",
    "carrier_challenge",
    "carrier_score",
    "decide",
    "device_respond",
    "device_respond_weighted",
]

_SYSTEM = random.SystemRandom()

# Dissimilarity of two sets with no overlap at all.
INFINITE = float("inf")


class ProtocolError(RuntimeError):
    """The exchange violated a protocol invariant."""


class ModeMismatchError(ProtocolError):
    """Profile, secret and sample disagree on the scoring mode."""


class SessionError(ProtocolError):
    """Unknown, expired or already-consumed session."""


@dataclass(frozen=True)
class AuthChallenge:
    """Carrier message opening a session (step 1)."""

    session_id: bytes
    public_key: PaillierPublicKey
    powered_coeffs: tuple[int, ...]
    blinded_randomizers: tuple[int, ...]
    mode: FeatureMode
    count: int | None = None
    cap: int | None = None

    def __post_init__(self):
        if len(self.powered_coeffs) != len(self.blinded_randomizers):
            raise ValueError("challenge legs differ in length")

    def to_bytes(self) -> bytes:
        parts = [len(self.session_id).to_bytes(4, "big"), self.session_id,
                 self.public_key.to_bytes(),
                 len(self.powered_coeffs).to_bytes(4, "big")]
        parts.extend(encode_uint(v) for v in self.powered_coeffs)
        parts.append(len(self.blinded_randomizers).to_bytes(4, "big"))
        parts.extend(encode_uint(v) for v in self.blinded_randomizers)
        parts.append(bytes([self.mode]))
        if self.mode is FeatureMode.CASE_C:
            parts.append(encode_uint(self.count))
            parts.append(encode_uint(self.cap))
        return b"".join(parts)

    @classmethod
    def from_reader(cls, reader: Reader) -> "AuthChallenge":
        session_id = reader.bytes_lp(64)
        pk = PaillierPublicKey.from_reader(reader)
        coeff_count = int.from_bytes(reader.take(4), "big")
        if coeff_count > 1 << 20:
            reader.fail("unreasonable coefficient count")
        powered = tuple(reader.uint() for _ in range(coeff_count))
        blind_count = int.from_bytes(reader.take(4), "big")
        if blind_count != coeff_count:
            reader.fail("challenge legs differ in length")
        blinded = tuple(reader.uint() for _ in range(blind_count))
        tag = reader.byte()
        try:
            mode = FeatureMode(tag)
        except ValueError:
            reader.fail(f"unknown mode tag 0x{tag:02x}")
        count = cap = None
        if mode is FeatureMode.CASE_C:
            count = reader.uint()
            cap = reader.uint()
        return cls(session_id, pk, powered, blinded, mode, count=count, cap=cap)


@dataclass
class SessionState:
    """Carrier-private state for one challenge; single use."""

    session_id: bytes
    session_exponent: int  # theta, uniform in [1, n)
    profile: EncryptedProfile
    created_at: float
    consumed: bool = False
    _lock: threading.Lock = field(default_factory=threading.Lock,
                                  repr=False, compare=False)

    def consume(self) -> None:
        with self._lock:
            if self.consumed:
                raise SessionError("session already consumed")
            self.consumed = True


@dataclass(frozen=True)
class AuthResponseEntry:
    """One shuffled response triple (step 2).

    ``cipher`` carries the masked polynomial evaluation, ``correction``
    cancels the encryption randomizers carrier-side, and ``tag`` is the
    anchor power the carrier compares against.
    """

    cipher: int
    correction: int
    tag: int

    def to_bytes(self) -> bytes:
        return encode_uint(self.cipher) + encode_uint(self.correction) + \
            encode_uint(self.tag)

    @classmethod
    def from_reader(cls, reader: Reader) -> "AuthResponseEntry":
        return cls(reader.uint(), reader.uint(), reader.uint())


@dataclass(frozen=True)
class AuthDecision:
    """Match count, dissimilarity and the threshold comparison outcome."""

    match_count: int
    dissimilarity: Fraction | float
    accepted: bool
    mode: FeatureMode

    def to_bytes(self) -> bytes:
        if self.dissimilarity == INFINITE:
            numerator, denominator = 1, 0
        else:
            numerator = self.dissimilarity.numerator
            denominator = self.dissimilarity.denominator
        return (encode_uint(self.match_count) + encode_uint(numerator) +
                encode_uint(denominator) + bytes([self.accepted]) +
                bytes([self.mode]))

    @classmethod
    def from_reader(cls, reader: Reader) -> "AuthDecision":
        match_count = reader.uint()
        numerator = reader.uint()
        denominator = reader.uint()
        dissimilarity = Fraction(numerator, denominator) if denominator \
            else INFINITE
        accepted_byte = reader.byte()
        if accepted_byte > 1:
            reader.fail("accepted flag must be 0 or 1")
        tag = reader.byte()
        try:
            mode = FeatureMode(tag)
        except ValueError:
            reader.fail(f"unknown mode tag 0x{tag:02x}")
        return cls(match_count, dissimilarity, bool(accepted_byte), mode)


def carrier_challenge(profile: EncryptedProfile,
                      rng: random.Random | None = None,
                      *,
                      session_exponent: int | None = None,
                      session_id: bytes | None = None,
                      ) -> tuple[AuthChallenge, SessionState]:
    """Open a session: raise the encrypted coefficients to a fresh exponent.

    ``session_exponent`` and ``session_id`` are test hooks; production use
    leaves both to the entropy source.
    """
    rng = rng or _SYSTEM
    n = profile.public_key.n
    theta = session_exponent if session_exponent is not None \
        else rng.randrange(1, n)
    if not 1 <= theta < n:
        raise ValueError("session exponent outside [1, n)")
    sid = session_id if session_id is not None \
        else rng.getrandbits(128).to_bytes(16, "big")
    n_squared = profile.public_key.n_squared
    powered = tuple(pow(c.value, theta, n_squared) for c in profile.enc_coeffs)
    challenge = AuthChallenge(sid, profile.public_key, powered,
                              profile.blinded_randomizers, profile.mode,
                              count=profile.count, cap=profile.cap)
    state = SessionState(sid, theta, profile, time.monotonic())
    return challenge, state


def _response_entry(value: int, randomizer: int, secret: DeviceSecret,
                    challenge: AuthChallenge) -> AuthResponseEntry:
    n = challenge.public_key.n
    n_squared = challenge.public_key.n_squared
    d = secret.secret_exponent
    cipher_acc = 1
    correction_acc = 1
    power = 1  # value**i mod n
    for coeff, blinded in zip(challenge.powered_coeffs,
                              challenge.blinded_randomizers):
        cipher_acc = cipher_acc * pow(coeff, power, n_squared) % n_squared
        correction_acc = correction_acc * pow(blinded, power, n_squared) % n_squared
        power = power * value % n
    cipher = pow(cipher_acc, d * randomizer, n_squared)
    correction = pow(correction_acc, randomizer, n_squared)
    tag = pow(secret.anchor, randomizer * d, n_squared)
    return AuthResponseEntry(cipher, correction, tag)


def _response_entry_args(args) -> AuthResponseEntry:
    return _response_entry(*args)


def _build_entries(jobs, workers: int) -> list[AuthResponseEntry]:
    if workers > 1 and len(jobs) > 1:
        # Per-value triples are independent; spread them over processes.
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_response_entry_args, jobs, chunksize=1))
    return [_response_entry(*job) for job in jobs]


def device_respond(secret: DeviceSecret, challenge: AuthChallenge,
                   sample: FeatureSet, rng: random.Random | None = None,
                   *, workers: int = 1) -> list[AuthResponseEntry]:
    """Build one response triple per sample value, shuffled (step 2).

    Per-value randomizers are drawn in ascending sample-value order, then the
    finished triples are shuffled with the same entropy source, so a seeded
    run is fully reproducible regardless of ``workers``.
    """
    if secret.mode is not challenge.mode or sample.mode is not challenge.mode:
        raise ModeMismatchError(
            f"modes differ: secret={secret.mode.name} "
            f"challenge={challenge.mode.name} sample={sample.mode.name}")
    if challenge.mode is FeatureMode.CASE_C and \
            (sample.count != challenge.count or sample.cap != challenge.cap):
        raise ModeMismatchError(
            f"numeric parameters differ: sample t={sample.count} M={sample.cap}"
            f" vs enrolled t={challenge.count} M={challenge.cap}")
    rng = rng or _SYSTEM
    n_squared = challenge.public_key.n_squared
    jobs = [(value, draw_unit(rng, n_squared), secret, challenge)
            for value in sample.values]
    entries = _build_entries(jobs, workers)
    rng.shuffle(entries)
    return entries


def device_respond_weighted(secret: DeviceSecret, challenge: AuthChallenge,
                            sample: FeatureSet, sim: SimilarityFunction,
                            rng: random.Random | None = None,
                            *, workers: int = 1) -> list[AuthResponseEntry]:
    """Weighted variant (step 2'): emit one triple per unit of similarity.

    For every value ``z`` in the union of supports, the total weight of ``z``
    against the sample determines how many independent triples are built on
    ``z``; profile features then collect exactly their similarity weight in
    matches, so the carrier's count is the double similarity sum.
    """
    if sample.mode is not FeatureMode.CASE_B:
        raise ModeMismatchError("weighted responses require a Case B sample")
    if secret.mode is not challenge.mode or sample.mode is not challenge.mode:
        raise ModeMismatchError(
            f"modes differ: secret={secret.mode.name} "
            f"challenge={challenge.mode.name} sample={sample.mode.name}")
    rng = rng or _SYSTEM
    totals: dict[int, int] = {}
    for y in sample.values:
        for z, weight in sim.support_for(y):
            totals[z] = totals.get(z, 0) + weight
    n_squared = challenge.public_key.n_squared
    jobs = []
    for z in sorted(totals):
        jobs.extend((z, draw_unit(rng, n_squared), secret, challenge)
                    for _ in range(totals[z]))
    if not jobs:
        raise ProtocolError("similarity support yields an empty response")
    entries = _build_entries(jobs, workers)
    rng.shuffle(entries)
    return entries


def carrier_score(session: SessionState,
                  entries: list[AuthResponseEntry]) -> int:
    """Count recognized triples (step 3) and consume the session.

    The session is claimed before any validation so that a malformed
    response still burns its challenge.
    """
    if not entries:
        raise ProtocolError("empty response")
    session.consume()
    pk = session.profile.public_key
    n, n_squared = pk.n, pk.n_squared
    exponent = n * session.session_exponent
    matches = 0
    for entry in entries:
        for value in (entry.cipher, entry.correction, entry.tag):
            if not 1 <= value < n_squared or math.gcd(value, n) != 1:
                raise ProtocolError("response entry is not a unit modulo n**2")
        combined = entry.cipher * pow(entry.correction, exponent, n_squared) % n_squared
        if combined == pow(entry.tag, exponent, n_squared):
            matches += 1
    return matches


def default_threshold(mode: FeatureMode, sample_size: int,
                      count: int | None, cap: int | None) -> int:
    """Deployment-knob defaults: majority overlap, or a quarter of the
    maximum L1 distance in Case C."""
    if mode is FeatureMode.CASE_C:
        assert count is not None and cap is not None
        return (count * cap + 3) // 4
    return (sample_size + 1) // 2


def decide(match_count: int, profile: EncryptedProfile, sample_size: int,
           threshold: int | None = None) -> AuthDecision:
    """Turn a match count into a dissimilarity score and an outcome.

    Case A/B accept when the (weighted) match count reaches the threshold;
    the dissimilarity is its reciprocal, infinite for zero matches.  Case C
    computes the L1 distance ``|X| + |Y| - 2 * matches`` from the stored
    profile size and the received entry count (``sample_size``) and accepts
    when it stays at or below the threshold.
    """
    if match_count < 0 or sample_size < 1:
        raise ValueError("match count must be >= 0 and sample size >= 1")
    if threshold is None:
        threshold = profile.threshold
    if threshold is None:
        threshold = default_threshold(profile.mode, sample_size,
                                      profile.count, profile.cap)
    if threshold < 1:
        raise ValueError("threshold must be positive")
    if profile.mode is FeatureMode.CASE_C:
        distance = profile.size + sample_size - 2 * match_count
        if distance < 0:
            raise ProtocolError(
                "negative L1 distance signals a corrupted exchange")
        return AuthDecision(match_count, Fraction(distance),
                            distance <= threshold, profile.mode)
    dissimilarity = Fraction(1, match_count) if match_count else INFINITE
    return AuthDecision(match_count, dissimilarity,
                        match_count >= threshold, profile.mode)
