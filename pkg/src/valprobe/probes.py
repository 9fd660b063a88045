"""Unique probe names: ``<nonce>-<iphex>.<kind-label>.<base zone>``.

The nonce defeats caching; the hex-encoded destination address lets the
authoritative side tie every incoming query back to the host we originally
probed, which is how forwarders are told apart from real resolvers.
"""

from __future__ import annotations

import ipaddress
import random
import re
from dataclasses import dataclass

from .wire import MAX_NAME_OCTETS, WireError, labels_to_name, name_labels, normalize_name
from .zones import MisconfigKind

IPAddress = ipaddress.IPv4Address | ipaddress.IPv6Address

_NONCE = re.compile(r"[0-9a-f]{8}")
_FIRST = re.compile(r"([0-9a-f]{8})-([0-9a-f]+)")


class NotAProbeName(ValueError):
    pass


class NameTooLong(ValueError):
    pass


@dataclass(frozen=True)
class ProbeName:
    nonce: str
    target: IPAddress
    kind: MisconfigKind
    base: str

    @property
    def fqdn(self) -> str:
        return encode_probe_name(self.target, self.nonce, self.kind, self.base)


def encode_probe_name(target, nonce: str, kind: MisconfigKind, base: str) -> str:
    if not _NONCE.fullmatch(nonce):
        raise ValueError(f"nonce must be 8 lowercase hex characters, got {nonce!r}")
    addr = target if isinstance(target, (ipaddress.IPv4Address, ipaddress.IPv6Address)) else ipaddress.ip_address(target)
    iphex = addr.packed.hex()
    fqdn = f"{nonce}-{iphex}.{MisconfigKind(kind).label}.{normalize_name(base).lstrip('.')}"
    if sum(len(lb) + 1 for lb in name_labels(fqdn)) + 1 > MAX_NAME_OCTETS:
        raise NameTooLong(f"probe name for base {base!r} exceeds 255 octets")
    return fqdn


def decode_probe_name(fqdn: str, base: str | None = None) -> ProbeName:
    """Inverse of :func:`encode_probe_name`.  Resolver 0x20 case games are undone first."""
    try:
        labels = name_labels(fqdn)
    except WireError:
        raise NotAProbeName(fqdn) from None
    if len(labels) < 3:
        raise NotAProbeName(fqdn)
    try:
        first = labels[0].decode("ascii").lower()
        kind_label = labels[1].decode("ascii").lower()
    except UnicodeDecodeError:
        raise NotAProbeName(fqdn) from None
    m = _FIRST.fullmatch(first)
    if not m:
        raise NotAProbeName(fqdn)
    nonce, iphex = m.groups()
    if len(iphex) not in (8, 32):
        raise NotAProbeName(fqdn)
    try:
        kind = MisconfigKind.from_label(kind_label)
    except ValueError:
        raise NotAProbeName(fqdn) from None
    zone = normalize_name(labels_to_name(labels[2:]))
    if base is not None and zone != normalize_name(base):
        raise NotAProbeName(fqdn)
    target = ipaddress.ip_address(bytes.fromhex(iphex))
    return ProbeName(nonce, target, kind, zone)


def is_probe_name(fqdn: str, base: str | None = None) -> bool:
    try:
        decode_probe_name(fqdn, base)
    except NotAProbeName:
        return False
    return True


class NonceSource:
    """Seedable nonce generator so whole experiments replay exactly."""

    def __init__(self, seed: int | str | None = None):
        self._rng = random.Random(seed)

    def __call__(self) -> str:
        return f"{self._rng.getrandbits(32):08x}"
