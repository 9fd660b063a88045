"""Step 1 (open-resolver enumeration, validation probing, labeling) and
Step 2 (forged-source probing of closed resolvers, simulation only).

Everything the scanner learns about a resolver's own behavior comes from the
observatory log; client-side responses are only used for the rcode matrix.
"""

from __future__ import annotations

import ipaddress
import json
import random
import socket
import time
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Protocol, Sequence

from .lab import SimWorld, as_ip
from .observatory import Observatory, QueryLogEntry
from .probes import NonceSource, encode_probe_name
from .timing import TokenBucket
from .wire import DnsMessage, Rcode, RType, WireError, decode, encode, make_query
from .zones import BOGUS_KINDS, MisconfigKind

IPAddress = ipaddress.IPv4Address | ipaddress.IPv6Address

REPEATS = 10
SCANNER_ADDRESS = ipaddress.ip_address("198.51.100.1")


class OpenStatus(str, Enum):
    NON_FORWARDER = "NonForwarder"
    FORWARDER = "Forwarder"
    UNRESPONSIVE = "Unresponsive"


class ExclusionReason(str, Enum):
    FORWARDER = "Forwarder"
    NO_RESPONSE = "NoResponse"
    MIXED_RCODES = "MixedRcodes"
    NOT_DNSSEC_ENABLED = "NotDnssecEnabled"
    FAILS_NO_DS = "FailsNoDs"


class Label(str, Enum):
    VALIDATOR = "Validator"
    NON_VALIDATOR = "NonValidator"
    EXCLUDED = "Excluded"


@dataclass(frozen=True)
class GroundTruthLabel:
    label: Label
    reason: ExclusionReason | None = None

    def __str__(self) -> str:
        return f"Excluded:{self.reason.value}" if self.label is Label.EXCLUDED else self.label.value

    @classmethod
    def parse(cls, text: str) -> "GroundTruthLabel":
        if text.startswith("Excluded:"):
            return cls(Label.EXCLUDED, ExclusionReason(text.split(":", 1)[1]))
        return cls(Label(text))

    @property
    def excluded(self) -> bool:
        return self.label is Label.EXCLUDED


VALIDATOR = GroundTruthLabel(Label.VALIDATOR)
NON_VALIDATOR = GroundTruthLabel(Label.NON_VALIDATOR)


def excluded(reason: ExclusionReason) -> GroundTruthLabel:
    return GroundTruthLabel(Label.EXCLUDED, reason)


# ---------------------------------------------------------------------------
# Targets and transports
# ---------------------------------------------------------------------------


def read_exclusions(path: str | Path) -> list[ipaddress.IPv4Network | ipaddress.IPv6Network]:
    """One CIDR per line; ``#`` starts a comment."""
    nets = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            nets.append(ipaddress.ip_network(line, strict=False))
    return nets


@dataclass
class ScanTargetSet:
    addresses: Sequence
    seed: int = 0
    rate_limit: float | None = None
    exclude: Sequence = ()

    def ordered(self) -> list[IPAddress]:
        """Deduplicated, exclusion-filtered, seeded random permutation."""
        nets = [ipaddress.ip_network(n, strict=False) for n in self.exclude]
        seen: set[IPAddress] = set()
        out = []
        for a in self.addresses:
            addr = as_ip(a)
            if addr in seen or any(addr.version == n.version and addr in n for n in nets):
                continue
            seen.add(addr)
            out.append(addr)
        out.sort(key=lambda a: (a.version, a))
        random.Random(self.seed).shuffle(out)
        return out

    def __iter__(self) -> Iterator[IPAddress]:
        return iter(self.ordered())


class ScanTransport(Protocol):
    clock: object

    def exchange(self, dst: IPAddress, query: DnsMessage) -> DnsMessage | None: ...


class SimTransport:
    """Scanner attached to a :class:`SimWorld`."""

    repeat_spacing = 0.0

    def __init__(self, world: SimWorld, source=SCANNER_ADDRESS):
        self.world = world
        self.clock = world.clock
        self.source = ipaddress.ip_address(source)

    def exchange(self, dst, query: DnsMessage) -> DnsMessage | None:
        return self.world.send(dst, query, self.source)

    def spoof(self, dst, query: DnsMessage, claimed_source) -> None:
        # Any reply goes to the claimed source, never back to us.
        self.world.send(dst, query, claimed_source, from_outside=True)


class UdpTransport:
    """Plain UDP exchange with real hosts.  Forged sources are not supported."""

    repeat_spacing = 0.2

    def __init__(self, port: int = 53, timeout: float = 2.0, clock=None):
        from .timing import WallClock

        self.port = port
        self.timeout = timeout
        self.clock = clock or WallClock()

    def exchange(self, dst, query: DnsMessage) -> DnsMessage | None:
        dst = ipaddress.ip_address(dst)
        family = socket.AF_INET6 if dst.version == 6 else socket.AF_INET
        with socket.socket(family, socket.SOCK_DGRAM) as sock:
            sock.settimeout(self.timeout)
            sock.sendto(encode(query), (str(dst), self.port))
            deadline = time.monotonic() + self.timeout
            while True:
                try:
                    data, _ = sock.recvfrom(65535)
                except (socket.timeout, OSError):
                    return None
                try:
                    reply = decode(data)
                except WireError:
                    reply = None
                if reply is not None and reply.qr and reply.id == query.id:
                    return reply
                if time.monotonic() >= deadline:
                    return None


class _Sender:
    """Paces queries and hands out message ids."""

    def __init__(self, transport: ScanTransport, rate_limit: float | None, seed: int = 0):
        self.transport = transport
        self.bucket = TokenBucket(rate_limit, burst=1, clock=transport.clock) if rate_limit else None
        self._ids = random.Random(f"ids:{seed}")

    def query(self, qname: str) -> DnsMessage:
        return make_query(qname, RType.A, msg_id=self._ids.getrandbits(16), rd=True)

    def pace(self) -> None:
        if self.bucket is not None:
            self.bucket.acquire()

    def exchange(self, dst, qname: str) -> DnsMessage | None:
        self.pace()
        return self.transport.exchange(dst, self.query(qname))


# ---------------------------------------------------------------------------
# Step 1
# ---------------------------------------------------------------------------


def enumerate_open(
    targets: ScanTargetSet | Iterable,
    observatory: Observatory,
    transport: ScanTransport,
    nonces: NonceSource | None = None,
    *,
    settle: float = 0.0,
) -> dict[IPAddress, OpenStatus]:
    """Send one valid-kind probe per target and sort targets by who showed up at the observatory."""
    if not isinstance(targets, ScanTargetSet):
        targets = ScanTargetSet(list(targets))
    nonces = nonces or NonceSource(targets.seed)
    sender = _Sender(transport, targets.rate_limit, targets.seed)
    names: dict[str, IPAddress] = {}
    mark = observatory.log.mark()
    order = targets.ordered()
    for target in order:
        qname = encode_probe_name(target, nonces(), MisconfigKind.VALID, observatory.base)
        names[qname] = target
        sender.exchange(target, qname)
    if settle:
        time.sleep(settle)
    direct: set[IPAddress] = set()
    relayed: set[IPAddress] = set()
    for e in observatory.log.since(mark):
        target = names.get(e.qname)
        if target is None:
            continue
        (direct if e.src == str(target) else relayed).add(target)
    result = {}
    for t in order:
        if t in direct:
            result[t] = OpenStatus.NON_FORWARDER
        elif t in relayed:
            result[t] = OpenStatus.FORWARDER
        else:
            result[t] = OpenStatus.UNRESPONSIVE
    return result


@dataclass
class ResponseMatrix:
    resolver: IPAddress
    rcodes: dict[MisconfigKind, list[int]] = field(default_factory=lambda: {k: [] for k in MisconfigKind})
    do_seen: bool = False
    forwarded: bool = False

    def add(self, kind: MisconfigKind, rcode: int) -> None:
        codes = self.rcodes.setdefault(kind, [])
        if len(codes) >= REPEATS:
            raise ValueError(f"more than {REPEATS} responses recorded for {kind.label}")
        codes.append(int(rcode))

    def summary(self) -> dict[str, dict[str, int]]:
        return {
            k.label: {_rcode_name(c): n for c, n in sorted(Counter(self.rcodes.get(k, [])).items())}
            for k in MisconfigKind
        }

    def to_json(self) -> dict:
        return {
            "ip": str(self.resolver),
            "rcodes": {k.label: list(self.rcodes.get(k, [])) for k in MisconfigKind},
            "do_seen": self.do_seen,
            "forwarded": self.forwarded,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ResponseMatrix":
        return cls(
            ipaddress.ip_address(doc["ip"]),
            {MisconfigKind.from_label(k): list(v) for k, v in doc["rcodes"].items()},
            bool(doc["do_seen"]),
            bool(doc.get("forwarded", False)),
        )


def _rcode_name(code: int) -> str:
    try:
        return Rcode(code).name
    except ValueError:
        return f"RCODE{code}"


def probe_validation(
    resolver,
    observatory: Observatory,
    transport: ScanTransport,
    nonces: NonceSource | None = None,
    *,
    rate_limit: float | None = None,
    repeats: int = REPEATS,
    settle: float = 0.0,
) -> ResponseMatrix:
    """Ask ``resolver`` for ``repeats`` fresh names in each of the eight variants."""
    resolver = as_ip(resolver)
    nonces = nonces or NonceSource(str(resolver))
    sender = _Sender(transport, rate_limit, int(resolver))
    matrix = ResponseMatrix(resolver)
    kind_of: dict[str, MisconfigKind] = {}
    spacing = getattr(transport, "repeat_spacing", 0.0)
    mark = observatory.log.mark()
    for kind in MisconfigKind:
        for i in range(repeats):
            qname = encode_probe_name(resolver, nonces(), kind, observatory.base)
            kind_of[qname] = kind
            reply = sender.exchange(resolver, qname)
            if reply is not None:
                matrix.add(kind, reply.rcode)
            if spacing and i + 1 < repeats:
                time.sleep(spacing)
    if settle:
        time.sleep(settle)
    src = str(resolver)
    for e in observatory.log.since(mark):
        kind = kind_of.get(e.qname)
        if kind is None:
            continue
        if e.src != src:
            matrix.forwarded = True
        elif kind is MisconfigKind.VALID and e.do:
            matrix.do_seen = True
    return matrix


def label_from_rcodes(matrix: ResponseMatrix) -> GroundTruthLabel:
    """Ground-truth label from an rcode matrix; exclusion rules apply in order."""
    if matrix.forwarded:
        return excluded(ExclusionReason.FORWARDER)
    codes = {k: matrix.rcodes.get(k, []) for k in MisconfigKind}
    if any(not c for c in codes.values()):
        return excluded(ExclusionReason.NO_RESPONSE)
    if not matrix.do_seen:
        return excluded(ExclusionReason.NOT_DNSSEC_ENABLED)
    if any(len(set(c)) > 1 for c in codes.values()):
        return excluded(ExclusionReason.MIXED_RCODES)
    single = {k: c[0] for k, c in codes.items()}
    if all(single[k] == Rcode.SERVFAIL for k in BOGUS_KINDS):
        if single[MisconfigKind.NO_DS] == Rcode.SERVFAIL:
            return excluded(ExclusionReason.FAILS_NO_DS)
        if single[MisconfigKind.NO_DS] == Rcode.NOERROR and single[MisconfigKind.VALID] == Rcode.NOERROR:
            return VALIDATOR
    return NON_VALIDATOR


# ---------------------------------------------------------------------------
# Step 2
# ---------------------------------------------------------------------------


def neighbor_source(target) -> IPAddress:
    """An address next to ``target`` inside its /24 (IPv4) or /64 (IPv6)."""
    target = ipaddress.ip_address(target)
    plen = 24 if target.version == 4 else 64
    net = ipaddress.ip_network(f"{target}/{plen}", strict=False)
    for cand in (int(target) + 1, int(target) - 1):
        addr = ipaddress.ip_address(cand) if target.version == 4 else ipaddress.IPv6Address(cand)
        if addr in net and addr not in (net.network_address, net.broadcast_address):
            return addr
    raise ValueError(f"no usable neighbor for {target}")


@dataclass
class SpoofedScanResult:
    discovered: set[IPAddress]
    open_found: set[IPAddress]
    relayed: set[IPAddress]
    log_mark: int
    log_end: int


def spoofed_scan(
    targets: ScanTargetSet | Iterable,
    observatory: Observatory,
    world: SimWorld,
    nonces: NonceSource | None = None,
    *,
    open_found: set | None = None,
) -> SpoofedScanResult:
    """Forged-source probing of closed resolvers.  Simulation only.

    Each probe claims to come from a neighbor of its destination.  Targets the
    ordinary open scan also reaches are subtracted from the discovered set.
    """
    if not isinstance(world, SimWorld):
        raise TypeError("forged-source probing exists only inside a simulated world")
    if not isinstance(targets, ScanTargetSet):
        targets = ScanTargetSet(list(targets))
    nonces = nonces or NonceSource(f"spoof:{targets.seed}")
    transport = SimTransport(world)
    if open_found is None:
        statuses = enumerate_open(targets, observatory, transport, NonceSource(f"open:{targets.seed}"))
        open_found = {t for t, s in statuses.items() if s is not OpenStatus.UNRESPONSIVE}
    sender = _Sender(transport, targets.rate_limit, targets.seed)
    names: dict[str, IPAddress] = {}
    mark = observatory.log.mark()
    for target in targets.ordered():
        qname = encode_probe_name(target, nonces(), MisconfigKind.VALID, observatory.base)
        names[qname] = target
        sender.pace()
        transport.spoof(target, sender.query(qname), neighbor_source(target))
    end = observatory.log.mark()
    seen: set[IPAddress] = set()
    relayed: set[IPAddress] = set()
    for e in observatory.log.since(mark, end):
        target = names.get(e.qname)
        if target is not None:
            seen.add(target)
            if e.src != str(target):
                relayed.add(target)
    return SpoofedScanResult(seen - set(open_found), set(open_found), relayed - set(open_found), mark, end)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass
class ScanRecord:
    ip: IPAddress
    status: OpenStatus
    label: GroundTruthLabel | None = None
    matrix: ResponseMatrix | None = None

    def to_json(self) -> dict:
        doc = {"ip": str(self.ip), "status": self.status.value, "label": str(self.label) if self.label else None}
        if self.matrix is not None:
            doc["rcodes"] = self.matrix.summary()
            doc["do_seen"] = self.matrix.do_seen
            doc["forwarded"] = self.matrix.forwarded
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "ScanRecord":
        label = GroundTruthLabel.parse(doc["label"]) if doc.get("label") else None
        return cls(ipaddress.ip_address(doc["ip"]), OpenStatus(doc["status"]), label)


def write_jsonl(records: Iterable, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
    return path


def read_scan_records(path: str | Path) -> list[ScanRecord]:
    with Path(path).open() as fh:
        return [ScanRecord.from_json(json.loads(line)) for line in fh if line.strip()]


def entries_by_source(entries: Iterable[QueryLogEntry]) -> dict[str, list[QueryLogEntry]]:
    out: dict[str, list[QueryLogEntry]] = {}
    for e in entries:
        out.setdefault(e.src, []).append(e)
    return out


__all__ = [
    "ExclusionReason",
    "GroundTruthLabel",
    "Label",
    "OpenStatus",
    "ResponseMatrix",
    "ScanRecord",
    "ScanTargetSet",
    "SimTransport",
    "SpoofedScanResult",
    "UdpTransport",
    "entries_by_source",
    "enumerate_open",
    "label_from_rcodes",
    "neighbor_source",
    "probe_validation",
    "read_exclusions",
    "read_scan_records",
    "spoofed_scan",
    "write_jsonl",
]
