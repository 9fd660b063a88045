"""Signed two-level test zones, their deliberate misconfigurations, and the
chain-of-trust validator used both as a test oracle and by simulated
validating resolvers.
"""

from __future__ import annotations

import base64
import json
import random
import shlex
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

from . import crypto
from .wire import (
    AAAA,
    DNSKEY,
    DS,
    NS,
    NSEC,
    RRSIG,
    SOA,
    TXT,
    A,
    Opaque,
    ResourceRecord,
    RType,
    canonical_name_key,
    canonical_rrset_bytes,
    is_subdomain,
    key_tag,
    key_tag_rdata,
    label_count,
    name_labels,
    normalize_name,
    type_from_name,
)

DAY = 86400
HOUR = 3600

KEY_TTL = 3600
DS_TTL = 3600
NS_TTL = 3600
SOA_TTL = 3600
A_TTL = 300
NSEC_TTL = 300

SIG_INCEPTION_OFFSET = -HOUR
SIG_VALIDITY = 30 * DAY
EXPIRED_OFFSET = -DAY

PARENT_APEX_ADDRESS = "192.0.2.1"
CHILD_APEX_ADDRESS = "192.0.2.2"
NAMESERVER_ADDRESS = "192.0.2.53"
PROBE_ANSWER_ADDRESS = "192.0.2.10"

FLAG_ZONE = 0x0100
FLAG_SEP = 0x0001


class ZoneError(ValueError):
    """Precondition failure while building or mutating zones."""


class KeyGenFailure(ZoneError):
    pass


class AlreadyMisconfigured(ZoneError):
    pass


class MisconfigKind(str, Enum):
    VALID = "valid"
    NO_DS = "no-ds"
    BAD_DS = "bad-ds"
    NO_KEY = "no-key"
    BAD_KEY = "bad-key"
    NO_RRSIG = "no-rrsig"
    BAD_RRSIG = "bad-rrsig"
    EXP_RRSIG = "exp-rrsig"

    @property
    def label(self) -> str:
        return self.value

    @classmethod
    def from_label(cls, label: str) -> "MisconfigKind":
        return cls(label.lower())


# The six kinds a validator must reject; no-ds is insecure, not bogus.
BOGUS_KINDS = (
    MisconfigKind.BAD_DS,
    MisconfigKind.NO_KEY,
    MisconfigKind.BAD_KEY,
    MisconfigKind.NO_RRSIG,
    MisconfigKind.BAD_RRSIG,
    MisconfigKind.EXP_RRSIG,
)


class Status(str, Enum):
    SECURE = "Secure"
    INSECURE = "Insecure"
    BOGUS = "Bogus"


@dataclass(frozen=True)
class ValidationOutcome:
    status: Status
    reason: str = ""


EXPECTED_OUTCOME = {
    MisconfigKind.VALID: Status.SECURE,
    MisconfigKind.NO_DS: Status.INSECURE,
    **{k: Status.BOGUS for k in BOGUS_KINDS},
}


class KeyRole(str, Enum):
    KSK = "KSK"
    ZSK = "ZSK"


@dataclass(frozen=True)
class KeyPair:
    role: KeyRole
    algorithm: int
    public: bytes
    private: bytes = field(repr=False)

    @property
    def flags(self) -> int:
        return 257 if self.role is KeyRole.KSK else 256

    @property
    def rdata(self) -> DNSKEY:
        return DNSKEY(self.flags, 3, self.algorithm, self.public)

    @property
    def tag(self) -> int:
        return key_tag_rdata(self.rdata.to_wire())

    def dnskey(self, owner: str, ttl: int = KEY_TTL) -> ResourceRecord:
        return ResourceRecord(owner, RType.DNSKEY, ttl, self.rdata)


def generate_keypair(role: KeyRole, algorithm: int, rng: random.Random) -> KeyPair:
    scheme = crypto.scheme_for(algorithm)
    try:
        public, private = scheme.generate(rng)
    except Exception as exc:  # backend failures surface as one error type
        raise KeyGenFailure(f"{role.value} generation failed: {exc}") from exc
    return KeyPair(role, algorithm, public, private)


RRsetKey = tuple[str, int]


def _freeze(d: Mapping) -> Mapping:
    return MappingProxyType(dict(d))


@dataclass(frozen=True, eq=True)
class Zone:
    apex: str
    rrsets: Mapping[RRsetKey, tuple[ResourceRecord, ...]]
    rrsigs: Mapping[RRsetKey, tuple[ResourceRecord, ...]]
    ksk: KeyPair
    zsk: KeyPair
    child_apex: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "rrsets", _freeze(self.rrsets))
        object.__setattr__(self, "rrsigs", _freeze(self.rrsigs))

    def rrset(self, name: str, rtype: int) -> tuple[ResourceRecord, ...]:
        return self.rrsets.get((normalize_name(name), int(rtype)), ())

    def sigs(self, name: str, rtype: int) -> tuple[ResourceRecord, ...]:
        return self.rrsigs.get((normalize_name(name), int(rtype)), ())

    def names(self) -> set[str]:
        return {name for name, _ in self.rrsets}

    def types_at(self, name: str) -> set[int]:
        name = normalize_name(name)
        return {t for n, t in self.rrsets if n == name}

    @property
    def ds_for_child(self) -> ResourceRecord | None:
        if self.child_apex is None:
            return None
        ds = self.rrset(self.child_apex, RType.DS)
        return ds[0] if ds else None

    def records(self) -> Iterator[ResourceRecord]:
        for key in sorted(self.rrsets, key=lambda k: (canonical_name_key(k[0]), k[1])):
            yield from self.rrsets[key]
            yield from self.rrsigs.get(key, ())


@dataclass(frozen=True)
class SignedZonePair:
    parent: Zone
    child: Zone
    misconfiguration: MisconfigKind
    epoch: int
    digest_type: int = crypto.DIGEST_SHA256

    @property
    def algorithm(self) -> int:
        return self.child.zsk.algorithm

    def trust_anchor(self) -> ResourceRecord:
        """DS of the parent KSK: the desk-scale trust anchor."""
        return make_ds(self.parent.apex, self.parent.ksk, self.digest_type)


# ---------------------------------------------------------------------------
# Signing
# ---------------------------------------------------------------------------


def signature_window(epoch: int, expired: bool = False) -> tuple[int, int]:
    """Return ``(inception, expiration)`` for signatures made at ``epoch``."""
    if expired:
        expiration = epoch + EXPIRED_OFFSET
        return expiration - SIG_VALIDITY, expiration
    return epoch + SIG_INCEPTION_OFFSET, epoch + SIG_VALIDITY


def sign_rrset(
    rrset: Iterable[ResourceRecord],
    key: KeyPair,
    signer: str,
    inception: int,
    expiration: int,
) -> ResourceRecord:
    rrset = tuple(rrset)
    first = rrset[0]
    header = RRSIG(
        type_covered=first.rtype,
        algorithm=key.algorithm,
        labels=label_count(first.name),
        original_ttl=first.ttl,
        expiration=expiration & 0xFFFFFFFF,
        inception=inception & 0xFFFFFFFF,
        key_tag=key.tag,
        signer=normalize_name(signer),
        signature=b"",
    )
    payload = header.header_wire(canonical=True) + canonical_rrset_bytes(rrset, ttl=first.ttl)
    signature = crypto.scheme_for(key.algorithm).sign(key.private, payload)
    return ResourceRecord(first.name, RType.RRSIG, first.ttl, replace(header, signature=signature))


def make_ds(owner: str, ksk: KeyPair, digest_type: int = crypto.DIGEST_SHA256) -> ResourceRecord:
    digest = crypto.ds_digest(owner, ksk.rdata.to_wire(), digest_type)
    return ResourceRecord(normalize_name(owner), RType.DS, DS_TTL, DS(ksk.tag, ksk.algorithm, digest_type, digest))


def nsec_chain(apex: str, types_by_name: Mapping[str, set[int]]) -> dict[str, ResourceRecord]:
    """One NSEC per owner name, linked in canonical order and wrapping to the apex."""
    names = sorted(types_by_name, key=canonical_name_key)
    out = {}
    for i, name in enumerate(names):
        nxt = names[(i + 1) % len(names)]
        types = set(types_by_name[name]) | {RType.RRSIG, RType.NSEC}
        out[name] = ResourceRecord(name, RType.NSEC, NSEC_TTL, NSEC(nxt, tuple(int(t) for t in types)))
    return out


def _types_by_name(keys: Iterable[RRsetKey]) -> dict[str, set[int]]:
    by_name: dict[str, set[int]] = {}
    for name, rtype in keys:
        if rtype != RType.NSEC:
            by_name.setdefault(name, set()).add(rtype)
    return by_name


def _build_zone(
    apex: str,
    data: list[ResourceRecord],
    ksk: KeyPair,
    zsk: KeyPair,
    window: tuple[int, int],
    child_apex: str | None = None,
) -> Zone:
    rrsets: dict[RRsetKey, list[ResourceRecord]] = {}
    for rr in data:
        rrsets.setdefault((normalize_name(rr.name), int(rr.rtype)), []).append(rr)
    for owner, nsec in nsec_chain(apex, _types_by_name(rrsets)).items():
        rrsets[(owner, int(RType.NSEC))] = [nsec]
    rrsigs = {}
    for key, rrset in rrsets.items():
        name, rtype = key
        if child_apex is not None and name == child_apex and rtype == RType.NS:
            continue  # delegation NS is not authoritative data
        signing_key = ksk if rtype == RType.DNSKEY else zsk
        rrsigs[key] = (sign_rrset(rrset, signing_key, apex, *window),)
    return Zone(apex, {k: tuple(v) for k, v in rrsets.items()}, rrsigs, ksk, zsk, child_apex)


def generate_zone_pair(
    parent_apex: str,
    child_apex: str,
    epoch: int,
    *,
    algorithm: int = crypto.ECDSAP256SHA256,
    seed: int | None = 0,
    digest_type: int = crypto.DIGEST_SHA256,
    parent_keys: tuple[KeyPair, KeyPair] | None = None,
) -> SignedZonePair:
    """Build a correctly signed parent/child pair.

    ``parent_keys`` lets several pairs share one parent key set, which is how
    the observatory serves all eight child variants under one parent.
    """
    parent_apex = normalize_name(parent_apex)
    child_apex = normalize_name(child_apex)
    pl, cl = name_labels(parent_apex), name_labels(child_apex)
    if len(cl) != len(pl) + 1 or not is_subdomain(child_apex, parent_apex):
        raise ZoneError(f"{child_apex} is not a direct subdomain of {parent_apex}")
    crypto.scheme_for(algorithm)
    rng = random.Random(f"{seed}:{parent_apex}:{child_apex}") if seed is not None else random.SystemRandom()
    if parent_keys is None:
        prng = random.Random(f"{seed}:{parent_apex}") if seed is not None else random.SystemRandom()
        parent_keys = (
            generate_keypair(KeyRole.KSK, algorithm, prng),
            generate_keypair(KeyRole.ZSK, algorithm, prng),
        )
    p_ksk, p_zsk = parent_keys
    c_ksk = generate_keypair(KeyRole.KSK, algorithm, rng)
    c_zsk = generate_keypair(KeyRole.ZSK, algorithm, rng)
    window = signature_window(epoch)
    ns_name = "ns1." + parent_apex

    parent_data = [
        ResourceRecord(parent_apex, RType.SOA, SOA_TTL, _soa(parent_apex, epoch)),
        ResourceRecord(parent_apex, RType.NS, NS_TTL, NS(ns_name)),
        ResourceRecord(parent_apex, RType.A, A_TTL, A(PARENT_APEX_ADDRESS)),
        p_ksk.dnskey(parent_apex),
        p_zsk.dnskey(parent_apex),
        ResourceRecord(ns_name, RType.A, A_TTL, A(NAMESERVER_ADDRESS)),
        ResourceRecord(child_apex, RType.NS, NS_TTL, NS(ns_name)),
        make_ds(child_apex, c_ksk, digest_type),
    ]
    child_data = [
        ResourceRecord(child_apex, RType.SOA, SOA_TTL, _soa(child_apex, epoch)),
        ResourceRecord(child_apex, RType.NS, NS_TTL, NS(ns_name)),
        ResourceRecord(child_apex, RType.A, A_TTL, A(CHILD_APEX_ADDRESS)),
        c_ksk.dnskey(child_apex),
        c_zsk.dnskey(child_apex),
    ]
    parent = _build_zone(parent_apex, parent_data, p_ksk, p_zsk, window, child_apex=child_apex)
    child = _build_zone(child_apex, child_data, c_ksk, c_zsk, window)
    return SignedZonePair(parent, child, MisconfigKind.VALID, epoch, digest_type)


def _soa(apex: str, epoch: int) -> SOA:
    return SOA("ns1." + apex, "hostmaster." + apex, epoch & 0xFFFFFFFF, 7200, 900, 1209600, 300)


def _flip_last(data: bytes) -> bytes:
    return data[:-1] + bytes([data[-1] ^ 0xFF])


def apply_misconfiguration(pair: SignedZonePair, kind: MisconfigKind) -> SignedZonePair:
    """Return a copy of a Valid pair carrying exactly one deliberate fault."""
    kind = MisconfigKind(kind)
    if pair.misconfiguration is not MisconfigKind.VALID:
        raise AlreadyMisconfigured(f"pair already carries {pair.misconfiguration.value}")
    if kind is MisconfigKind.VALID:
        return pair
    parent, child = pair.parent, pair.child
    c_apex = child.apex
    p_sets, p_sigs = dict(parent.rrsets), dict(parent.rrsigs)
    c_sets, c_sigs = dict(child.rrsets), dict(child.rrsigs)
    ds_key = (c_apex, int(RType.DS))
    key_key = (c_apex, int(RType.DNSKEY))
    a_key = (c_apex, int(RType.A))

    if kind is MisconfigKind.NO_DS:
        del p_sets[ds_key]
        del p_sigs[ds_key]
        # The delegation's NSEC must stop claiming a DS exists.
        nsec_key = (c_apex, int(RType.NSEC))
        old = p_sets[nsec_key][0]
        types = tuple(t for t in old.rdata.types if t != RType.DS)
        new = replace(old, rdata=NSEC(old.rdata.next_name, types))
        p_sets[nsec_key] = (new,)
        old_sig = p_sigs[nsec_key][0].rdata
        p_sigs[nsec_key] = (sign_rrset((new,), parent.zsk, parent.apex, old_sig.inception, old_sig.expiration),)
    elif kind is MisconfigKind.BAD_DS:
        ds = p_sets[ds_key][0]
        p_sets[ds_key] = (replace(ds, rdata=replace(ds.rdata, digest=_flip_last(ds.rdata.digest))),)
    elif kind is MisconfigKind.NO_KEY:
        c_sets[key_key] = tuple(rr for rr in c_sets[key_key] if rr.rdata.flags != 256)
    elif kind is MisconfigKind.BAD_KEY:
        c_sets[key_key] = tuple(
            replace(rr, rdata=replace(rr.rdata, key=_flip_last(rr.rdata.key))) if rr.rdata.flags == 256 else rr
            for rr in c_sets[key_key]
        )
    elif kind is MisconfigKind.NO_RRSIG:
        del c_sigs[key_key]
    elif kind is MisconfigKind.BAD_RRSIG:
        sig = c_sigs[key_key][0]
        c_sigs[key_key] = (replace(sig, rdata=replace(sig.rdata, signature=_flip_last(sig.rdata.signature))),)
    elif kind is MisconfigKind.EXP_RRSIG:
        inception, expiration = signature_window(pair.epoch, expired=True)
        c_sigs[a_key] = (sign_rrset(c_sets[a_key], child.zsk, c_apex, inception, expiration),)

    return replace(
        pair,
        parent=replace(parent, rrsets=p_sets, rrsigs=p_sigs),
        child=replace(child, rrsets=c_sets, rrsigs=c_sigs),
        misconfiguration=kind,
    )


class OnlineSigner:
    """Synthesizes and signs records for unique probe names on demand.

    Stateless apart from the (immutable) key material, so concurrent calls
    are safe.  For the exp-rrsig variant every synthesized A RRset is signed
    with an already-expired window.
    """

    def __init__(self, pair: SignedZonePair):
        self.pair = pair

    def window(self, rtype: int) -> tuple[int, int]:
        expired = self.pair.misconfiguration is MisconfigKind.EXP_RRSIG and rtype == RType.A
        return signature_window(self.pair.epoch, expired=expired)

    def sign_child(self, rrset: tuple[ResourceRecord, ...]) -> ResourceRecord:
        child = self.pair.child
        return sign_rrset(rrset, child.zsk, child.apex, *self.window(rrset[0].rtype))

    def sign_parent(self, rrset: tuple[ResourceRecord, ...]) -> ResourceRecord:
        parent = self.pair.parent
        return sign_rrset(rrset, parent.zsk, parent.apex, *signature_window(self.pair.epoch))

    def probe_a(self, qname: str) -> tuple[tuple[ResourceRecord, ...], tuple[ResourceRecord, ...]]:
        rrset = (ResourceRecord(qname, RType.A, A_TTL, A(PROBE_ANSWER_ADDRESS)),)
        return rrset, (self.sign_child(rrset),)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

RRs = tuple[ResourceRecord, ...]


@dataclass(frozen=True)
class ChainEvidence:
    """Everything a validator has collected for one answer."""

    parent_apex: str
    child_apex: str
    answer: RRs
    answer_sigs: RRs
    child_dnskeys: RRs
    child_dnskey_sigs: RRs
    ds: RRs
    ds_sigs: RRs
    parent_dnskeys: RRs
    parent_dnskey_sigs: RRs
    ds_absence: RRs = ()
    ds_absence_sigs: RRs = ()


def _check_sigs(
    rrset: RRs,
    sigs: RRs,
    keys: Iterable[ResourceRecord],
    signer: str,
    now: int,
    what: str,
    require_flags: int | None = None,
) -> str | None:
    """Return None when some RRSIG in ``sigs`` verifies ``rrset``; else a reason."""
    if not rrset:
        return f"{what} missing"
    usable = [s for s in sigs if s.rdata.type_covered == rrset[0].rtype and normalize_name(s.rdata.signer) == normalize_name(signer)]
    if not usable:
        return f"{what} unsigned"
    keys = [k for k in keys if k.rdata.protocol == 3 and k.rdata.flags & FLAG_ZONE]
    if require_flags is not None:
        keys = [k for k in keys if k.rdata.flags == require_flags]
    reason = None
    for sig in usable:
        rd: RRSIG = sig.rdata
        scheme = crypto.scheme_for(rd.algorithm)
        if not _in_window(now, rd.inception, rd.expiration):
            reason = reason or ("signature expired" if now > rd.expiration else "signature not yet valid")
            continue
        candidates = [k for k in keys if k.rdata.algorithm == rd.algorithm and key_tag(k) == rd.key_tag]
        if not candidates:
            reason = reason or f"no DNSKEY matches {what} RRSIG"
            continue
        payload = rd.header_wire(canonical=True) + canonical_rrset_bytes(rrset, ttl=rd.original_ttl)
        for key in candidates:
            if scheme.verify(key.rdata.key, payload, rd.signature):
                return None
        reason = reason or f"bad signature over {what}"
    return reason


def _in_window(now: int, inception: int, expiration: int) -> bool:
    return inception <= now <= expiration


def _ds_matches(ds: DS, owner: str, key: ResourceRecord) -> bool:
    rd = key.rdata
    if ds.algorithm != rd.algorithm or ds.key_tag != key_tag(key):
        return False
    return crypto.ds_digest(owner, rd.to_wire(), ds.digest_type) == ds.digest


def _anchor_matches(anchor: ResourceRecord, owner: str, key: ResourceRecord) -> bool:
    if normalize_name(anchor.name) != normalize_name(owner):
        return False
    if isinstance(anchor.rdata, DNSKEY):
        return anchor.rdata == key.rdata
    if isinstance(anchor.rdata, DS):
        return _ds_matches(anchor.rdata, owner, key)
    raise ZoneError("trust anchor must be a DS or DNSKEY record")


def _check_parent(ev: ChainEvidence, anchor: ResourceRecord, now: int) -> str | None:
    reason = _check_sigs(
        ev.parent_dnskeys, ev.parent_dnskey_sigs, ev.parent_dnskeys, ev.parent_apex, now, "parent DNSKEY RRset", 257
    )
    if reason:
        return reason
    anchored = [k for k in ev.parent_dnskeys if _anchor_matches(anchor, ev.parent_apex, k)]
    if not anchored:
        return "trust anchor mismatch"
    signed_by_anchor = _check_sigs(
        ev.parent_dnskeys, ev.parent_dnskey_sigs, anchored, ev.parent_apex, now, "parent DNSKEY RRset"
    )
    if signed_by_anchor:
        return "trust anchor mismatch"
    return None


def validate_evidence(ev: ChainEvidence, anchor: ResourceRecord, now: int) -> ValidationOutcome:
    """Chain-of-trust check from the answer up to the parent-zone anchor.

    An absent DS is settled first (after authenticating the parent and its
    signed proof of absence) because a provably unsigned delegation is
    insecure whatever the child serves.  Otherwise the checks run bottom-up:
    answer RRSIG under the child ZSK, child DNSKEY RRset under the child
    KSK, child KSK against the parent DS, DS RRSIG under the parent ZSK,
    parent DNSKEY RRset, trust anchor.
    """
    bogus = lambda reason: ValidationOutcome(Status.BOGUS, reason)  # noqa: E731

    if not ev.ds:
        reason = _check_parent(ev, anchor, now)
        if reason:
            return bogus(reason)
        proof = [
            rr for rr in ev.ds_absence
            if rr.rtype == RType.NSEC and normalize_name(rr.name) == normalize_name(ev.child_apex)
        ]
        if not proof:
            return bogus("DS absence not proven")
        if RType.DS in proof[0].rdata.types:
            return bogus("NSEC claims a DS exists")
        reason = _check_sigs(tuple(proof), ev.ds_absence_sigs, ev.parent_dnskeys, ev.parent_apex, now, "NSEC proof")
        if reason:
            return bogus(reason)
        return ValidationOutcome(Status.INSECURE, "no DS at parent")

    reason = _check_sigs(ev.answer, ev.answer_sigs, ev.child_dnskeys, ev.child_apex, now, "answer RRset")
    if reason:
        return bogus(reason)
    reason = _check_sigs(ev.child_dnskeys, ev.child_dnskey_sigs, ev.child_dnskeys, ev.child_apex, now, "DNSKEY RRset", 257)
    if reason:
        return bogus(reason)
    ksks = [k for k in ev.child_dnskeys if k.rdata.flags == 257]
    if not any(_ds_matches(ds.rdata, ev.child_apex, k) for ds in ev.ds for k in ksks):
        return bogus("DS does not match child KSK")
    reason = _check_sigs(ev.ds, ev.ds_sigs, ev.parent_dnskeys, ev.parent_apex, now, "DS RRset")
    if reason:
        return bogus(reason)
    reason = _check_parent(ev, anchor, now)
    if reason:
        return bogus(reason)
    return ValidationOutcome(Status.SECURE, "chain verified")


def evidence_from_pair(pair: SignedZonePair, qname: str | None = None) -> ChainEvidence:
    parent, child = pair.parent, pair.child
    c_apex = child.apex
    if qname is None or normalize_name(qname) == c_apex:
        answer, answer_sigs = child.rrset(c_apex, RType.A), child.sigs(c_apex, RType.A)
    else:
        answer, answer_sigs = OnlineSigner(pair).probe_a(qname)
    ds = parent.rrset(c_apex, RType.DS)
    return ChainEvidence(
        parent_apex=parent.apex,
        child_apex=c_apex,
        answer=answer,
        answer_sigs=answer_sigs,
        child_dnskeys=child.rrset(c_apex, RType.DNSKEY),
        child_dnskey_sigs=child.sigs(c_apex, RType.DNSKEY),
        ds=ds,
        ds_sigs=parent.sigs(c_apex, RType.DS),
        parent_dnskeys=parent.rrset(parent.apex, RType.DNSKEY),
        parent_dnskey_sigs=parent.sigs(parent.apex, RType.DNSKEY),
        ds_absence=() if ds else parent.rrset(c_apex, RType.NSEC),
        ds_absence_sigs=() if ds else parent.sigs(c_apex, RType.NSEC),
    )


def verify_chain(
    pair: SignedZonePair,
    trust_anchor: ResourceRecord | None = None,
    now: int | None = None,
    qname: str | None = None,
) -> ValidationOutcome:
    """Validate the child apex A RRset (or a synthesized probe name) of ``pair``."""
    anchor = trust_anchor if trust_anchor is not None else pair.trust_anchor()
    return validate_evidence(evidence_from_pair(pair, qname), anchor, pair.epoch if now is None else now)


# ---------------------------------------------------------------------------
# Master-file export / import
# ---------------------------------------------------------------------------


def zone_to_text(zone: Zone) -> str:
    lines = [f"$ORIGIN {zone.apex}"]
    lines += [rr.to_text() for rr in zone.records()]
    return "\n".join(lines) + "\n"


def _parse_rdata(rtype: int, tokens: list[str]) -> object:
    if tokens and tokens[0] == "\\#":
        return Opaque(bytes.fromhex("".join(tokens[2:])))
    if rtype == RType.A:
        return A(tokens[0])
    if rtype == RType.AAAA:
        return AAAA(tokens[0])
    if rtype == RType.NS:
        return NS(tokens[0])
    if rtype == RType.SOA:
        return SOA(tokens[0], tokens[1], *(int(t) for t in tokens[2:7]))
    if rtype == RType.TXT:
        return TXT(tuple(t.encode("latin-1") for t in tokens))
    if rtype == RType.DNSKEY:
        return DNSKEY(int(tokens[0]), int(tokens[1]), int(tokens[2]), base64.b64decode("".join(tokens[3:])))
    if rtype == RType.DS:
        return DS(int(tokens[0]), int(tokens[1]), int(tokens[2]), bytes.fromhex("".join(tokens[3:])))
    if rtype == RType.RRSIG:
        return RRSIG(
            type_from_name(tokens[0]),
            *(int(t) for t in tokens[1:7]),
            tokens[7],
            base64.b64decode("".join(tokens[8:])),
        )
    if rtype == RType.NSEC:
        return NSEC(tokens[0], tuple(type_from_name(t) for t in tokens[1:]))
    raise ZoneError(f"cannot parse rdata of type {rtype} without \\# form")


def parse_zone_text(text: str) -> list[ResourceRecord]:
    records = []
    for raw in text.splitlines():
        line = raw.split(";", 1)[0].strip() if '"' not in raw else raw.strip()
        if not line or line.startswith("$"):
            continue
        tokens = shlex.split(line, posix=True) if '"' in line else line.split()
        name, ttl, cls, rtype_text = tokens[:4]
        if cls.upper() != "IN":
            raise ZoneError(f"only class IN is supported: {raw!r}")
        rtype = type_from_name(rtype_text)
        records.append(ResourceRecord(name, rtype, int(ttl), _parse_rdata(rtype, tokens[4:])))
    return records


def _zone_from_records(apex: str, records: list[ResourceRecord], ksk: KeyPair, zsk: KeyPair, child_apex: str | None) -> Zone:
    rrsets: dict[RRsetKey, list[ResourceRecord]] = {}
    rrsigs: dict[RRsetKey, list[ResourceRecord]] = {}
    for rr in records:
        name = normalize_name(rr.name)
        if rr.rtype == RType.RRSIG:
            rrsigs.setdefault((name, int(rr.rdata.type_covered)), []).append(rr)
        else:
            rrsets.setdefault((name, int(rr.rtype)), []).append(rr)
    return Zone(
        apex,
        {k: tuple(v) for k, v in rrsets.items()},
        {k: tuple(v) for k, v in rrsigs.items()},
        ksk,
        zsk,
        child_apex,
    )


def _key_doc(key: KeyPair) -> dict:
    return {"role": key.role.value, "algorithm": key.algorithm, "public": key.public.hex(), "private": key.private.hex()}


def _key_from_doc(doc: dict) -> KeyPair:
    return KeyPair(KeyRole(doc["role"]), doc["algorithm"], bytes.fromhex(doc["public"]), bytes.fromhex(doc["private"]))


def export_pair(pair: SignedZonePair, directory: str | Path) -> Path:
    """Write ``parent.zone``, ``child.zone`` and a ``pair.json`` sidecar."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "parent.zone").write_text(zone_to_text(pair.parent))
    (d / "child.zone").write_text(zone_to_text(pair.child))
    meta = {
        "misconfiguration": pair.misconfiguration.value,
        "epoch": pair.epoch,
        "digest_type": pair.digest_type,
        "parent_apex": pair.parent.apex,
        "child_apex": pair.child.apex,
        # Test zones only: the sidecar carries private keys so the online
        # signer can be rebuilt after import.
        "keys": {
            "parent_ksk": _key_doc(pair.parent.ksk),
            "parent_zsk": _key_doc(pair.parent.zsk),
            "child_ksk": _key_doc(pair.child.ksk),
            "child_zsk": _key_doc(pair.child.zsk),
        },
    }
    (d / "pair.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return d


def import_pair(directory: str | Path) -> SignedZonePair:
    d = Path(directory)
    meta = json.loads((d / "pair.json").read_text())
    keys = {k: _key_from_doc(v) for k, v in meta["keys"].items()}
    parent = _zone_from_records(
        meta["parent_apex"],
        parse_zone_text((d / "parent.zone").read_text()),
        keys["parent_ksk"],
        keys["parent_zsk"],
        meta["child_apex"],
    )
    child = _zone_from_records(
        meta["child_apex"], parse_zone_text((d / "child.zone").read_text()), keys["child_ksk"], keys["child_zsk"], None
    )
    return SignedZonePair(parent, child, MisconfigKind(meta["misconfiguration"]), meta["epoch"], meta["digest_type"])
