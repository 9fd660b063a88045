"""Simulated resolver population: the ground-truth world both scan steps run against.

A :class:`SimWorld` owns the resolvers, their networks (with or without
inbound source-address validation) and their caches, and talks to an
:class:`~valprobe.observatory.Observatory` in-process.  Resolvers answer
synchronously; a per-response Bernoulli drop models packet loss on the
resolver-to-scanner leg.
"""

from __future__ import annotations

import ipaddress
import random
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import count
from typing import Iterable, Mapping

from .observatory import Observatory, ZoneLevel
from .wire import (
    DnsMessage,
    Rcode,
    ResourceRecord,
    RType,
    make_query,
    normalize_name,
)
from .zones import (
    ChainEvidence,
    MisconfigKind,
    Status,
    validate_evidence,
)

IPAddress = ipaddress.IPv4Address | ipaddress.IPv6Address
IPNetwork = ipaddress.IPv4Network | ipaddress.IPv6Network

V4_PREFIXLEN = 24
V6_PREFIXLEN = 64
NEGATIVE_TTL = 300


class Archetype(str, Enum):
    VALIDATOR = "validator"
    ENABLED_NON_VALIDATOR = "enabled-non-validator"
    PLAIN = "plain"
    FORWARDER = "forwarder"


class Access(str, Enum):
    OPEN = "open"
    CLOSED = "closed"


class Rejected(Exception):
    """Client source not allowed by the resolver's access policy."""


class UpstreamTimeout(Exception):
    """A forwarder's upstream never answered."""


class InvalidRecipe(ValueError):
    pass


class WarmRecord(str, Enum):
    """Records another client may already have put in a shared cache."""

    DNSKEY_C = "dnskey_c"
    DNSKEY_P = "dnskey_p"
    DS = "ds"


@dataclass(frozen=True)
class ResolverSpec:
    address: IPAddress
    archetype: Archetype
    access: Access = Access.OPEN
    network_id: int = 0
    cache_group: int | None = None
    upstream: IPAddress | None = None
    # Validator knobs.  explicit_ds: always ask the parent for DS instead of
    # trusting the one that rides along with the referral.  permissive: fetch
    # and check everything, but hand out answers regardless of the outcome.
    # validates_kinds: enforce only for these variants (partial validation).
    explicit_ds: bool = False
    permissive: bool = False
    validates_kinds: frozenset[MisconfigKind] | None = None
    trust_anchor: ResourceRecord | None = None

    def enforces(self, kind: MisconfigKind) -> bool:
        if self.archetype is not Archetype.VALIDATOR or self.permissive:
            return False
        return self.validates_kinds is None or kind in self.validates_kinds


@dataclass
class SimNetwork:
    network_id: int
    prefix: IPNetwork
    sav_inbound: bool
    members: list[IPAddress] = field(default_factory=list)

    def __post_init__(self) -> None:
        for addr in self.members:
            if addr not in self.prefix:
                raise ValueError(f"{addr} is outside {self.prefix}")


def as_ip(value) -> IPAddress:
    if isinstance(value, (ipaddress.IPv4Address, ipaddress.IPv6Address)):
        return value
    return ipaddress.ip_address(value)


def admit_packet(network: SimNetwork, source, from_outside: bool) -> bool:
    """Inbound SAV drops outside packets that claim an inside source."""
    return not (from_outside and network.sav_inbound and as_ip(source) in network.prefix)


def expected_label(spec: ResolverSpec) -> str:
    """Ground-truth Step-1 label implied by a resolver's configuration."""
    if spec.archetype is Archetype.FORWARDER:
        return "Excluded:Forwarder"
    if spec.archetype is Archetype.PLAIN:
        return "Excluded:NotDnssecEnabled"
    if all(spec.enforces(k) for k in MisconfigKind):
        return "Validator"
    return "NonValidator"


# ---------------------------------------------------------------------------
# Cache
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CacheEntry:
    records: tuple[ResourceRecord, ...]
    sigs: tuple[ResourceRecord, ...]
    expiry: float
    proof: tuple[ResourceRecord, ...] = ()
    proof_sigs: tuple[ResourceRecord, ...] = ()

    @property
    def negative(self) -> bool:
        return not self.records


class CacheState:
    """(name, rtype) -> entry.  Expired entries are evicted on read."""

    def __init__(self) -> None:
        self._entries: dict[tuple[str, int], CacheEntry] = {}
        self._lock = threading.Lock()

    def get(self, name: str, rtype: int, now: float) -> CacheEntry | None:
        key = (normalize_name(name), int(rtype))
        with self._lock:
            entry = self._entries.get(key)
            if entry is not None and entry.expiry <= now:
                del self._entries[key]
                return None
            return entry

    def put(self, name: str, rtype: int, entry: CacheEntry) -> None:
        with self._lock:
            self._entries[(normalize_name(name), int(rtype))] = entry

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def __len__(self) -> int:
        return len(self._entries)


def _min_ttl(records: Iterable[ResourceRecord], default: int = NEGATIVE_TTL) -> int:
    ttls = [rr.ttl for rr in records]
    return min(ttls) if ttls else default


def _sigs_for(section: Iterable[ResourceRecord], name: str, rtype: int) -> tuple[ResourceRecord, ...]:
    name = normalize_name(name)
    return tuple(
        rr for rr in section
        if rr.rtype == RType.RRSIG and rr.rdata.type_covered == rtype and normalize_name(rr.name) == name
    )


def _rrs(section: Iterable[ResourceRecord], name: str, rtype: int) -> tuple[ResourceRecord, ...]:
    name = normalize_name(name)
    return tuple(rr for rr in section if rr.rtype == rtype and normalize_name(rr.name) == name)


# ---------------------------------------------------------------------------
# World
# ---------------------------------------------------------------------------


class SimWorld:
    def __init__(
        self,
        observatory: Observatory,
        resolvers: Iterable[ResolverSpec],
        networks: Iterable[SimNetwork] = (),
        *,
        warm: Mapping[int, frozenset[WarmRecord]] | None = None,
        loss_rate: float = 0.0,
        seed: int = 0,
    ):
        if not 0.0 <= loss_rate <= 1.0:
            raise ValueError("loss_rate must be within [0, 1]")
        self.observatory = observatory
        self.clock = observatory.clock
        self.resolvers: dict[IPAddress, ResolverSpec] = {r.address: r for r in resolvers}
        self.networks: dict[int, SimNetwork] = {n.network_id: n for n in networks}
        self.warm = dict(warm or {})
        self.loss_rate = loss_rate
        self._loss_rng = random.Random(f"loss:{seed}")
        self._loss_lock = threading.Lock()
        self._caches: dict[object, CacheState] = {}
        self._locks: dict[IPAddress, threading.RLock] = {a: threading.RLock() for a in self.resolvers}
        self._msg_ids = count(1)
        self._passes = 0

    # -- helpers --------------------------------------------------------

    def network_of(self, spec: ResolverSpec) -> SimNetwork | None:
        return self.networks.get(spec.network_id)

    def prefix_of(self, spec: ResolverSpec) -> IPNetwork:
        net = self.network_of(spec)
        if net is not None:
            return net.prefix
        plen = V4_PREFIXLEN if spec.address.version == 4 else V6_PREFIXLEN
        return ipaddress.ip_network(f"{spec.address}/{plen}", strict=False)

    def cache_for(self, spec: ResolverSpec) -> CacheState:
        key = ("group", spec.cache_group) if spec.cache_group is not None else ("own", spec.address)
        cache = self._caches.get(key)
        if cache is None:
            cache = self._caches.setdefault(key, CacheState())
        return cache

    def begin_pass(self) -> None:
        """Start an observation pass.  Time jumps past every TTL after the first."""
        if self._passes:
            self.clock.advance(7200)
        self._passes += 1

    def accepts(self, spec: ResolverSpec, client) -> bool:
        if spec.access is Access.OPEN:
            return True
        return as_ip(client) in self.prefix_of(spec)

    # -- packet entry point ---------------------------------------------

    def send(self, dst, query: DnsMessage, source, *, from_outside: bool = True) -> DnsMessage | None:
        """Deliver ``query`` to ``dst`` as if sent from ``source``.

        Returns the reply that would reach ``source``, or None when nothing
        comes back (no such host, SAV drop, timeout, loss).
        """
        spec = self.resolvers.get(as_ip(dst))
        if spec is None:
            return None
        net = self.network_of(spec)
        if net is not None and not admit_packet(net, source, from_outside):
            return None
        try:
            reply = self.resolve(spec, query, source)
        except Rejected:
            reply = _reply(query, Rcode.REFUSED)
        except UpstreamTimeout:
            return None
        if self.loss_rate:
            with self._loss_lock:
                if self._loss_rng.random() < self.loss_rate:
                    return None
        return reply

    # -- resolution -----------------------------------------------------

    def resolve(self, spec: ResolverSpec, query: DnsMessage, client) -> DnsMessage:
        if not self.accepts(spec, client):
            raise Rejected(f"{client} may not use {spec.address}")
        if query.question is None:
            return _reply(query, Rcode.FORMERR)
        with self._locks.setdefault(spec.address, threading.RLock()):
            if spec.archetype is Archetype.FORWARDER:
                upstream = self.resolvers.get(spec.upstream) if spec.upstream is not None else None
                if upstream is None:
                    raise UpstreamTimeout(f"upstream {spec.upstream} of {spec.address} is unreachable")
                reply = self.resolve(upstream, replace(query, rd=True), spec.address)
                return replace(reply, id=query.id)
            return self._recurse(spec, query)

    def _ask(self, spec: ResolverSpec, level: ZoneLevel, name: str, rtype: int, do: bool) -> DnsMessage:
        msg = make_query(name, rtype, msg_id=next(self._msg_ids) & 0xFFFF, rd=False, do_bit=do)
        return self.observatory.answer_query(msg, str(spec.address), level=level)

    def _recurse(self, spec: ResolverSpec, query: DnsMessage) -> DnsMessage:
        obs = self.observatory
        q = query.question
        qname = normalize_name(q.name)
        kind = obs.child_for(qname)
        if kind is None:
            return _reply(query, Rcode.SERVFAIL, ra=True)
        c_apex = obs.child_apex(kind)
        do = spec.archetype is not Archetype.PLAIN
        cache = self.cache_for(spec)

        self._referral(spec, cache, qname, c_apex, do)
        resp = self._ask(spec, ZoneLevel.CHILD, qname, q.qtype, do)
        if spec.archetype is not Archetype.VALIDATOR or resp.rcode != Rcode.NOERROR:
            return self._relay(query, resp)

        answer = _rrs(resp.answers, qname, q.qtype)
        answer_sigs = _sigs_for(resp.answers, qname, q.qtype)
        outcome = self._validate(spec, cache, c_apex, answer, answer_sigs)
        if outcome.status is Status.BOGUS and spec.enforces(kind):
            return _reply(query, Rcode.SERVFAIL, ra=True)
        answers = answer + (answer_sigs if query.do_bit else ())
        return _reply(query, Rcode.NOERROR, ra=True, ad=outcome.status is Status.SECURE, answers=answers)

    def _relay(self, query: DnsMessage, resp: DnsMessage) -> DnsMessage:
        answers = resp.answers if query.do_bit else tuple(rr for rr in resp.answers if rr.rtype != RType.RRSIG)
        return _reply(query, resp.rcode, ra=True, answers=answers)

    def _referral(self, spec: ResolverSpec, cache: CacheState, qname: str, c_apex: str, do: bool) -> None:
        now = self.clock.now()
        if cache.get(c_apex, RType.NS, now) is not None:
            return
        resp = self._ask(spec, ZoneLevel.PARENT, qname, RType.A, do)
        ns = _rrs(resp.authority, c_apex, RType.NS)
        if not ns:
            return
        cache.put(c_apex, RType.NS, CacheEntry(ns, (), now + _min_ttl(ns)))
        if not do or spec.explicit_ds:
            return
        ds = _rrs(resp.authority, c_apex, RType.DS)
        if ds:
            cache.put(c_apex, RType.DS, CacheEntry(ds, _sigs_for(resp.authority, c_apex, RType.DS), now + _min_ttl(ds)))
            return
        nsec = _rrs(resp.authority, c_apex, RType.NSEC)
        if nsec:
            sigs = _sigs_for(resp.authority, c_apex, RType.NSEC)
            cache.put(c_apex, RType.DS, CacheEntry((), (), now + _min_ttl(nsec), nsec, sigs))

    def _fetch(self, spec: ResolverSpec, cache: CacheState, level: ZoneLevel, name: str, rtype: int) -> CacheEntry:
        now = self.clock.now()
        entry = cache.get(name, rtype, now)
        if entry is None and spec.cache_group is not None:
            entry = self._warm_entry(spec.cache_group, name, rtype, now)
            if entry is not None:
                cache.put(name, rtype, entry)
        if entry is not None:
            return entry
        resp = self._ask(spec, level, name, rtype, True)
        records = _rrs(resp.answers, name, rtype)
        if records:
            entry = CacheEntry(records, _sigs_for(resp.answers, name, rtype), now + _min_ttl(records))
        else:
            proof = _rrs(resp.authority, name, RType.NSEC)
            entry = CacheEntry((), (), now + NEGATIVE_TTL, proof, _sigs_for(resp.authority, name, RType.NSEC))
        cache.put(name, rtype, entry)
        return entry

    def _warm_entry(self, group: int, name: str, rtype: int, now: float) -> CacheEntry | None:
        """Entries a shared cache already holds thanks to clients we never see."""
        warm = self.warm.get(group, frozenset())
        obs = self.observatory
        valid_apex = obs.child_apex(MisconfigKind.VALID)
        name = normalize_name(name)
        if rtype == RType.DNSKEY and name == obs.base and WarmRecord.DNSKEY_P in warm:
            zone = obs.parent
        elif rtype == RType.DNSKEY and name == valid_apex and WarmRecord.DNSKEY_C in warm:
            zone = obs.pairs[MisconfigKind.VALID].child
        elif rtype == RType.DS and name == valid_apex and WarmRecord.DS in warm:
            zone = obs.parent
        else:
            return None
        records = zone.rrset(name, rtype)
        return CacheEntry(records, zone.sigs(name, rtype), now + _min_ttl(records))

    def _validate(self, spec, cache, c_apex, answer, answer_sigs):
        obs = self.observatory
        p_apex = obs.base
        ds = cache.get(c_apex, RType.DS, self.clock.now())
        dnskey_c = None
        if ds is None or not ds.negative:
            dnskey_c = self._fetch(spec, cache, ZoneLevel.CHILD, c_apex, RType.DNSKEY)
            if ds is None:
                ds = self._fetch(spec, cache, ZoneLevel.PARENT, c_apex, RType.DS)
        dnskey_p = self._fetch(spec, cache, ZoneLevel.PARENT, p_apex, RType.DNSKEY)
        ev = ChainEvidence(
            parent_apex=p_apex,
            child_apex=c_apex,
            answer=answer,
            answer_sigs=answer_sigs,
            child_dnskeys=dnskey_c.records if dnskey_c else (),
            child_dnskey_sigs=dnskey_c.sigs if dnskey_c else (),
            ds=ds.records,
            ds_sigs=ds.sigs,
            parent_dnskeys=dnskey_p.records,
            parent_dnskey_sigs=dnskey_p.sigs,
            ds_absence=ds.proof,
            ds_absence_sigs=ds.proof_sigs,
        )
        anchor = spec.trust_anchor if spec.trust_anchor is not None else obs.trust_anchor()
        return validate_evidence(ev, anchor, int(self.clock.now()))


def _reply(query: DnsMessage, rcode: int, *, ra: bool = False, ad: bool = False, answers=()) -> DnsMessage:
    return DnsMessage(
        id=query.id,
        qr=True,
        opcode=query.opcode,
        rd=query.rd,
        ra=ra,
        ad=ad,
        cd=query.cd,
        rcode=rcode,
        question=query.question,
        answers=tuple(answers),
        edns=query.edns,
    )


def resolve(spec: ResolverSpec, query: DnsMessage, client, world: SimWorld) -> DnsMessage:
    return world.resolve(spec, query, client)


# ---------------------------------------------------------------------------
# Population
# ---------------------------------------------------------------------------

# Query patterns (ds_p, dnskey_p, dnskey_c) of resolvers that fetch keys,
# weighted by the counts observed for IPv4 open resolvers.
VALIDATOR_PATTERNS = {"111": 5641, "011": 1234, "000": 19, "010": 1, "001": 2}
KEYFETCHING_NONVALIDATOR_PATTERNS = {"111": 321, "011": 120, "101": 13, "010": 3, "001": 12}
OBSERVED_VALIDATORS = 6897
OBSERVED_NONVALIDATORS = 24722

_V_SHARE = OBSERVED_VALIDATORS / (OBSERVED_VALIDATORS + OBSERVED_NONVALIDATORS)


def _default_open_mix() -> dict[str, float]:
    labeled = 0.85
    return {
        "validator": labeled * _V_SHARE,
        "non_validator": labeled * (1 - _V_SHARE),
        "plain": 0.05,
        "forwarder": 0.10,
    }


def _default_closed_mix() -> dict[str, float]:
    return {"validator": 0.374, "non_validator": 0.626, "plain": 0.0, "forwarder": 0.0}


@dataclass
class Recipe:
    """Population recipe.  Mixes are proportions and must each sum to 1."""

    n: int = 3000
    closed_fraction: float = 0.4
    open_mix: dict[str, float] = field(default_factory=_default_open_mix)
    closed_mix: dict[str, float] = field(default_factory=_default_closed_mix)
    sav_off_fraction: float = 0.5
    validator_patterns: dict[str, float] = field(default_factory=lambda: dict(VALIDATOR_PATTERNS))
    keyfetching_patterns: dict[str, float] = field(
        default_factory=lambda: dict(KEYFETCHING_NONVALIDATOR_PATTERNS)
    )
    # Share of non-validators that nonetheless fetch keys (permissive validators).
    permissive_fraction: float = sum(KEYFETCHING_NONVALIDATOR_PATTERNS.values()) / OBSERVED_NONVALIDATORS
    # Share of validators behind a warm shared cache; None keeps the pattern weights as given.
    cache_group_fraction: float | None = None
    loss_rate: float = 0.0
    ipv6_fraction: float = 0.0

    @classmethod
    def from_mapping(cls, doc: Mapping) -> "Recipe":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise InvalidRecipe(f"unknown recipe keys: {sorted(unknown)}")
        recipe = cls(**{k: v for k, v in doc.items() if k in known})
        for name in ("open_mix", "closed_mix"):
            merged = {"validator": 0.0, "non_validator": 0.0, "plain": 0.0, "forwarder": 0.0}
            merged.update(getattr(recipe, name))
            setattr(recipe, name, merged)
        recipe.validate()
        return recipe

    def validate(self) -> None:
        if self.n < 0:
            raise InvalidRecipe("n must be non-negative")
        for name in ("closed_fraction", "sav_off_fraction", "permissive_fraction", "loss_rate", "ipv6_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidRecipe(f"{name} must be within [0, 1], got {value}")
        if self.cache_group_fraction is not None and not 0.0 <= self.cache_group_fraction <= 1.0:
            raise InvalidRecipe("cache_group_fraction must be within [0, 1]")
        for name in ("open_mix", "closed_mix"):
            mix = getattr(self, name)
            bad = set(mix) - {a for a in ("validator", "non_validator", "plain", "forwarder")}
            if bad:
                raise InvalidRecipe(f"{name} has unknown archetypes {sorted(bad)}")
            if any(v < 0 for v in mix.values()) or abs(sum(mix.values()) - 1.0) > 1e-6:
                raise InvalidRecipe(f"{name} proportions must be non-negative and sum to 1")
        for name in ("validator_patterns", "keyfetching_patterns"):
            pats = getattr(self, name)
            if not pats or any(not _is_pattern(p) or w < 0 for p, w in pats.items()) or sum(pats.values()) <= 0:
                raise InvalidRecipe(f"{name} must map 3-bit patterns like '011' to non-negative weights")
            if any(p[1] == "0" and p[2] == "0" and p[0] == "1" for p, w in pats.items() if w > 0):
                raise InvalidRecipe(f"{name}: a DS query without any DNSKEY query cannot be produced")
        if self.cache_group_fraction:
            if not any(w > 0 and p[1:] != "11" for p, w in self.validator_patterns.items()):
                raise InvalidRecipe("cache_group_fraction > 0 needs at least one subset pattern")


def _is_pattern(p: str) -> bool:
    return isinstance(p, str) and len(p) == 3 and set(p) <= {"0", "1"}


def largest_remainder(total: int, weights: Mapping[str, float]) -> dict[str, int]:
    """Split ``total`` into integer counts proportional to ``weights`` (Hamilton's method)."""
    wsum = sum(weights.values())
    if total == 0 or wsum <= 0:
        return {k: 0 for k in weights}
    quotas = {k: total * w / wsum for k, w in weights.items()}
    counts = {k: int(q) for k, q in quotas.items()}
    short = total - sum(counts.values())
    order = sorted(weights, key=lambda k: (-(quotas[k] - counts[k]), list(weights).index(k)))
    for k in order[:short]:
        counts[k] += 1
    return counts


def _pattern_weights(recipe: Recipe) -> dict[str, float]:
    pats = {p: float(w) for p, w in recipe.validator_patterns.items()}
    f = recipe.cache_group_fraction
    if f is None:
        return pats
    full = {p: w for p, w in pats.items() if p[1:] == "11"}
    subset = {p: w for p, w in pats.items() if p[1:] != "11"}
    fs, ss = sum(full.values()), sum(subset.values())
    if fs <= 0 and f < 1:
        raise InvalidRecipe("validator_patterns need a full-key pattern when cache_group_fraction < 1")
    out = {p: (1 - f) * w / fs for p, w in full.items()} if fs else {}
    if ss:
        out.update({p: f * w / ss for p, w in subset.items()})
    return out


def _mechanism(pattern: str) -> tuple[bool, frozenset[WarmRecord]]:
    """Configuration that makes a key-fetching resolver produce ``pattern``."""
    ds, kp, kc = (c == "1" for c in pattern)
    if kp and kc:
        return ds, frozenset()
    warm = set()
    if not kp:
        warm.add(WarmRecord.DNSKEY_P)
    if not kc:
        warm.add(WarmRecord.DNSKEY_C)
    if not ds:
        warm.add(WarmRecord.DS)
    return ds, frozenset(warm)


@dataclass
class Population:
    resolvers: list[ResolverSpec]
    networks: list[SimNetwork]
    warm: dict[int, frozenset[WarmRecord]]
    recipe: Recipe

    def world(self, observatory: Observatory, seed: int = 0) -> SimWorld:
        return SimWorld(
            observatory, self.resolvers, self.networks, warm=self.warm, loss_rate=self.recipe.loss_rate, seed=seed
        )

    def by_access(self, access: Access) -> list[ResolverSpec]:
        return [r for r in self.resolvers if r.access is access]


def _address(index: int, v6: bool) -> tuple[IPNetwork, IPAddress]:
    if v6:
        net = ipaddress.ip_network(f"2001:db8:{index >> 16:x}:{index & 0xFFFF:x}::/64")
        return net, net.network_address + 0x10
    if index >= 1 << 16:
        raise InvalidRecipe("population too large for the 10.0.0.0/8 address plan")
    net = ipaddress.ip_network(f"10.{index >> 8}.{index & 0xFF}.0/24")
    return net, net.network_address + 10


def populate(recipe: Recipe | Mapping | None = None, seed: int = 0) -> Population:
    """Build a population with exact per-category counts, deterministic in ``seed``.

    Every resolver sits alone in its own /24 (or /64).  Within the closed
    population SAV-off networks are assigned per archetype so each archetype
    contributes its exact share of reachable closed resolvers.
    """
    if recipe is None:
        recipe = Recipe()
    elif isinstance(recipe, Mapping):
        recipe = Recipe.from_mapping(recipe)
    recipe.validate()
    rng = random.Random(seed)

    n_closed = round(recipe.n * recipe.closed_fraction)
    slots: list[tuple[Access, str]] = []
    for access, n, mix in ((Access.OPEN, recipe.n - n_closed, recipe.open_mix), (Access.CLOSED, n_closed, recipe.closed_mix)):
        for arch, k in largest_remainder(n, mix).items():
            slots += [(access, arch)] * k

    # Decide, per (access, archetype) class, who is permissive, SAV-off and IPv6.
    classes: dict[tuple[Access, str], list[int]] = {}
    for i, slot in enumerate(slots):
        classes.setdefault(slot, []).append(i)
    detail: dict[int, dict] = {i: {} for i in range(len(slots))}
    validator_weights = _pattern_weights(recipe)
    for (access, arch), members in classes.items():
        members = members[:]
        rng.shuffle(members)
        if access is Access.CLOSED:
            k = round(len(members) * recipe.sav_off_fraction)
            for j, i in enumerate(members):
                detail[i]["sav_off"] = j < k
        rng.shuffle(members)
        k6 = round(len(members) * recipe.ipv6_fraction)
        for j, i in enumerate(members):
            detail[i]["v6"] = j < k6
        if arch == "non_validator":
            rng.shuffle(members)
            k = round(len(members) * recipe.permissive_fraction)
            fetchers, rest = members[:k], members[k:]
            for i in rest:
                detail[i]["permissive"] = False
            _assign_patterns(fetchers, recipe.keyfetching_patterns, detail, rng, permissive=True)
        elif arch == "validator":
            _assign_patterns(members, validator_weights, detail, rng, permissive=False)

    order = list(range(len(slots)))
    rng.shuffle(order)
    resolvers: list[ResolverSpec | None] = [None] * len(slots)
    networks: list[SimNetwork] = []
    warm: dict[int, frozenset[WarmRecord]] = {}
    v4 = v6 = 0
    for net_id, i in enumerate(order):
        access, arch = slots[i]
        d = detail[i]
        if d.get("v6"):
            prefix, addr = _address(v6, True)
            v6 += 1
        else:
            prefix, addr = _address(v4, False)
            v4 += 1
        sav_inbound = not d.get("sav_off", False) if access is Access.CLOSED else rng.random() < 0.5
        networks.append(SimNetwork(net_id, prefix, sav_inbound, [addr]))
        group = None
        if d.get("warm"):
            group = net_id
            warm[group] = d["warm"]
        if arch == "validator" or d.get("permissive"):
            archetype = Archetype.VALIDATOR
        elif arch == "non_validator":
            archetype = Archetype.ENABLED_NON_VALIDATOR
        elif arch == "plain":
            archetype = Archetype.PLAIN
        else:
            archetype = Archetype.FORWARDER
        resolvers[i] = ResolverSpec(
            address=addr,
            archetype=archetype,
            access=access,
            network_id=net_id,
            cache_group=group,
            explicit_ds=d.get("explicit_ds", False),
            permissive=d.get("permissive", False),
        )

    upstreams = [r for r in resolvers if r.access is Access.OPEN and r.archetype is not Archetype.FORWARDER]
    final = []
    for r in resolvers:
        if r.archetype is Archetype.FORWARDER:
            if not upstreams:
                raise InvalidRecipe("forwarders need at least one open non-forwarding resolver as upstream")
            r = replace(r, upstream=rng.choice(upstreams).address)
        final.append(r)
    final.sort(key=lambda r: (r.address.version, r.address))
    return Population(final, networks, warm, recipe)


def _assign_patterns(members, weights, detail, rng, *, permissive: bool) -> None:
    members = members[:]
    rng.shuffle(members)
    pos = 0
    for pattern, k in largest_remainder(len(members), weights).items():
        explicit_ds, warm = _mechanism(pattern)
        for i in members[pos : pos + k]:
            detail[i].update(permissive=permissive, explicit_ds=explicit_ds, warm=warm, pattern=pattern)
        pos += k
