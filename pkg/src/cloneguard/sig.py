"""ECDSA and ECDSA* over P-256, with randomized batch verification.

ECDSA* is the batch-friendly variant: the signer transmits the full
nonce point R instead of its reduced x-coordinate r.  A classic (r, s)
signature can always be projected out of a star signature, so the two
schemes sign identically and differ only in what the verifier gets to
work with.  Messages are hashed with SHA-256 throughout.

Batch verification uses small-exponent randomization: each signature is
weighted by a fresh random multiplier before the combined equation is
evaluated in a single multi-scalar multiplication.  A batch containing
any invalid signature passes with probability at most 2^-randomizer_bits.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Sequence

from .ec import B, G, INFINITY, N, P, Point, is_on_curve, multi_scalar_mul, scalar_mul, validate_public_key

PRIVATE_KEY_BYTES = 32
PUBLIC_KEY_BYTES = 33  # compressed: parity byte + x coordinate
SIGNATURE_BYTES = PUBLIC_KEY_BYTES + 32  # compressed R + s

DEFAULT_RANDOMIZER_BITS = 64


def hash_to_scalar(message: bytes) -> int:
    """SHA-256 digest of the message as an integer mod n."""
    return int.from_bytes(hashlib.sha256(message).digest(), "big") % N


@dataclass(frozen=True)
class KeyPair:
    private: int
    public: Point


@dataclass(frozen=True)
class Signature:
    """Classic ECDSA signature (r, s)."""

    r: int
    s: int


@dataclass(frozen=True)
class StarSignature:
    """ECDSA* signature: the full nonce point plus s."""

    R: Point
    s: int

    def to_classic(self) -> Signature:
        """Project down to the classic form by reducing x(R) mod n."""
        return Signature(r=self.R.x % N, s=self.s)


def generate_keypair(rng: random.Random) -> KeyPair:
    """Draw d uniformly from [1, n-1] and derive Q = d*G."""
    d = rng.randrange(1, N)
    return KeyPair(private=d, public=scalar_mul(d, G))


def sign(message: bytes, private: int, rng: random.Random) -> StarSignature:
    """Sign a message, retrying the nonce whenever r or s degenerates."""
    if not 1 <= private < N:
        raise ValueError("private key out of range")
    e = hash_to_scalar(message)
    while True:
        k = rng.randrange(1, N)
        big_r = scalar_mul(k, G)
        r = big_r.x % N
        if r == 0:
            continue
        s = pow(k, -1, N) * (e + private * r) % N
        if s == 0:
            continue
        return StarSignature(R=big_r, s=s)


def verify_classic(message: bytes, sig: Signature, public: Point) -> bool:
    """Classic ECDSA verification: recompute X and compare x(X) mod n to r."""
    if not (1 <= sig.r < N and 1 <= sig.s < N):
        return False
    if public is INFINITY or not is_on_curve(public):
        return False
    e = hash_to_scalar(message)
    w = pow(sig.s, -1, N)
    u1 = e * w % N
    u2 = sig.r * w % N
    x_pt = multi_scalar_mul([(u1, G), (u2, public)])
    if x_pt is INFINITY:
        return False
    return x_pt.x % N == sig.r


def verify_star(message: bytes, sig: StarSignature, public: Point) -> bool:
    """ECDSA* verification: recompute the nonce point and compare it to R.

    Strictly stronger than the classic check — full point equality
    instead of reduced-x equality — which is what makes signatures
    batchable without opening the x-coordinate malleability door.
    """
    if sig.R is INFINITY or not is_on_curve(sig.R):
        return False
    r = sig.R.x % N
    if not (1 <= r < N and 1 <= sig.s < N):
        return False
    if public is INFINITY or not is_on_curve(public):
        return False
    e = hash_to_scalar(message)
    w = pow(sig.s, -1, N)
    u1 = e * w % N
    u2 = r * w % N
    return multi_scalar_mul([(u1, G), (u2, public)]) == sig.R


BatchItem = tuple[bytes, StarSignature, Point]


def batch_verify(items: Sequence[BatchItem], rng: random.Random,
                 randomizer_bits: int = DEFAULT_RANDOMIZER_BITS) -> bool:
    """Verify a batch of ECDSA* signatures with one combined equation.

    Each item i gets a fresh multiplier lambda_i drawn from
    [1, 2^randomizer_bits]; the batch is accepted iff

        sum(lambda_i * R_i)
            == (sum(lambda_i * u1_i) mod n) * G + sum(lambda_i * u2_i mod n) * Q_i

    evaluated as a single multi-scalar multiplication (the R terms are
    folded in negated, so acceptance means the combined sum is the point
    at infinity).  Structurally broken items — off-curve or infinite R,
    out-of-range scalars, unusable public keys — reject the batch before
    the equation is evaluated.

    Returns a single accept/reject for the whole batch; callers that
    need to locate an offender fall back to ``verify_each``.
    """
    if not items:
        raise ValueError("batch must contain at least one signature")
    if randomizer_bits < 1:
        raise ValueError("randomizer_bits must be positive")
    for _, sig, public in items:
        if sig.R is INFINITY or not is_on_curve(sig.R):
            return False
        if not (1 <= sig.R.x % N < N and 1 <= sig.s < N):
            return False
        # Cofactor-1 shortcut: on-curve and finite already implies
        # order n, so the full order check is redundant here.
        if not validate_public_key(public, check_order=False):
            return False

    pairs = []
    u1_sum = 0
    for message, sig, public in items:
        lam = rng.randrange(1, (1 << randomizer_bits) + 1)
        e = hash_to_scalar(message)
        w = pow(sig.s, -1, N)
        u1 = e * w % N
        u2 = sig.R.x % N * w % N
        u1_sum = (u1_sum + lam * u1) % N
        pairs.append((N - lam % N, sig.R))  # -lambda_i * R_i
        pairs.append((lam * u2 % N, public))
    pairs.append((u1_sum, G))
    return multi_scalar_mul(pairs) is INFINITY


def verify_each(items: Sequence[BatchItem]) -> list[bool]:
    """Individual fallback path: verify every item on its own."""
    return [verify_star(message, sig, public) for message, sig, public in items]


# === Wire formats ===


def point_to_bytes(point: Point) -> bytes:
    """Compressed SEC encoding: 0x02/0x03 parity byte plus big-endian x."""
    prefix = 0x02 | (point.y & 1)
    return bytes([prefix]) + point.x.to_bytes(32, "big")


def point_from_bytes(data: bytes) -> Point:
    if len(data) != PUBLIC_KEY_BYTES or data[0] not in (0x02, 0x03):
        raise ValueError("malformed compressed point")
    x = int.from_bytes(data[1:], "big")
    if x >= P:
        raise ValueError("x coordinate out of range")
    y_sq = (x * x * x - 3 * x + B) % P
    y = pow(y_sq, (P + 1) // 4, P)  # p = 3 mod 4
    if y * y % P != y_sq:
        raise ValueError("x is not on the curve")
    if y & 1 != data[0] & 1:
        y = P - y
    return Point(x, y)


def signature_to_bytes(sig: StarSignature) -> bytes:
    """65-byte wire form: compressed R followed by big-endian s."""
    return point_to_bytes(sig.R) + sig.s.to_bytes(32, "big")


def signature_from_bytes(data: bytes) -> StarSignature:
    if len(data) != SIGNATURE_BYTES:
        raise ValueError(f"signature must be {SIGNATURE_BYTES} bytes")
    return StarSignature(R=point_from_bytes(data[:PUBLIC_KEY_BYTES]),
                         s=int.from_bytes(data[PUBLIC_KEY_BYTES:], "big"))


def private_to_bytes(d: int) -> bytes:
    return d.to_bytes(PRIVATE_KEY_BYTES, "big")


def private_from_bytes(data: bytes) -> int:
    if len(data) != PRIVATE_KEY_BYTES:
        raise ValueError(f"private key must be {PRIVATE_KEY_BYTES} bytes")
    return int.from_bytes(data, "big")
