"""Signature schemes and DS digests used to sign and check zones.

Two schemes share one interface: ECDSA P-256/SHA-256 (DNSSEC algorithm 13)
for real-UDP work, and a keyed SHA-256 digest registered under the private
algorithm number 253 for fast, deterministic simulation.  The stand-in offers
no security; it only has to break under any single-byte change of key, data
or signature, exactly like the real thing.
"""

from __future__ import annotations

import hashlib
import hmac
import random
from functools import lru_cache
from typing import Protocol

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import (
    decode_dss_signature,
    encode_dss_signature,
)

from .wire import name_to_wire

ECDSAP256SHA256 = 13
KEYED_DIGEST = 253

DIGEST_SHA1 = 1
DIGEST_SHA256 = 2
DIGEST_SHA384 = 4

_DIGESTS = {DIGEST_SHA1: "sha1", DIGEST_SHA256: "sha256", DIGEST_SHA384: "sha384"}


class UnknownAlgorithm(LookupError):
    """Raised for a signing algorithm or digest type with no implementation."""


class SigningScheme(Protocol):
    algorithm: int

    def generate(self, rng: random.Random) -> tuple[bytes, bytes]:
        """Return ``(public, private)`` key bytes."""

    def sign(self, private: bytes, data: bytes) -> bytes: ...

    def verify(self, public: bytes, data: bytes, signature: bytes) -> bool: ...


class KeyedDigestScheme:
    """Deterministic stand-in: signature = HMAC-SHA256(public key, data)."""

    algorithm = KEYED_DIGEST

    def generate(self, rng: random.Random) -> tuple[bytes, bytes]:
        key = rng.randbytes(32)
        return key, key

    def sign(self, private: bytes, data: bytes) -> bytes:
        return hmac.new(private, data, hashlib.sha256).digest()

    def verify(self, public: bytes, data: bytes, signature: bytes) -> bool:
        return hmac.compare_digest(hmac.new(public, data, hashlib.sha256).digest(), signature)


class EcdsaP256Scheme:
    """DNSSEC algorithm 13.  Keys and signatures use the RFC 6605 encodings."""

    algorithm = ECDSAP256SHA256
    _curve = ec.SECP256R1()
    # Group order of P-256.
    _order = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551

    def generate(self, rng: random.Random) -> tuple[bytes, bytes]:
        scalar = rng.randrange(1, self._order)
        key = ec.derive_private_key(scalar, self._curve)
        nums = key.public_key().public_numbers()
        public = nums.x.to_bytes(32, "big") + nums.y.to_bytes(32, "big")
        return public, scalar.to_bytes(32, "big")

    def sign(self, private: bytes, data: bytes) -> bytes:
        key = _load_p256_private(private)
        der = key.sign(data, ec.ECDSA(hashes.SHA256(), deterministic_signing=True))
        r, s = decode_dss_signature(der)
        return r.to_bytes(32, "big") + s.to_bytes(32, "big")

    def verify(self, public: bytes, data: bytes, signature: bytes) -> bool:
        if len(public) != 64 or len(signature) != 64:
            return False
        try:
            pub = _load_p256_public(public)
            der = encode_dss_signature(int.from_bytes(signature[:32], "big"), int.from_bytes(signature[32:], "big"))
            pub.verify(der, data, ec.ECDSA(hashes.SHA256()))
        except (InvalidSignature, ValueError):
            return False
        return True


@lru_cache(maxsize=256)
def _load_p256_private(private: bytes) -> ec.EllipticCurvePrivateKey:
    return ec.derive_private_key(int.from_bytes(private, "big"), ec.SECP256R1())


@lru_cache(maxsize=256)
def _load_p256_public(public: bytes) -> ec.EllipticCurvePublicKey:
    x, y = int.from_bytes(public[:32], "big"), int.from_bytes(public[32:], "big")
    return ec.EllipticCurvePublicNumbers(x, y, ec.SECP256R1()).public_key()


SCHEMES: dict[int, SigningScheme] = {
    ECDSAP256SHA256: EcdsaP256Scheme(),
    KEYED_DIGEST: KeyedDigestScheme(),
}


def scheme_for(algorithm: int) -> SigningScheme:
    try:
        return SCHEMES[algorithm]
    except KeyError:
        raise UnknownAlgorithm(f"no implementation for DNSSEC algorithm {algorithm}") from None


def ds_digest(owner: str, dnskey_rdata: bytes, digest_type: int) -> bytes:
    """Digest of owner name (canonical wire form) followed by the DNSKEY rdata."""
    try:
        algo = _DIGESTS[digest_type]
    except KeyError:
        raise UnknownAlgorithm(f"no implementation for DS digest type {digest_type}") from None
    return hashlib.new(algo, name_to_wire(owner, canonical=True) + dnskey_rdata).digest()
