"""Authoritative nameserver for the two-level test zones, with a query log.

One :class:`Observatory` serves the parent zone and all eight child variants
(``valid.<base>``, ``no-ds.<base>``, ...).  Parent and child are logical
levels of the same process; simulated resolvers address a level explicitly,
while the UDP front end infers it (a DS query for a child apex goes to the
parent, everything else under a child apex goes to the child).

Every in-zone query is appended to the log before its response is released.
The log is the only thing Step-2 classification looks at.
"""

from __future__ import annotations

import json
import logging
import socketserver
import threading
from bisect import bisect_right
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from . import crypto
from .probes import NotAProbeName, decode_probe_name
from .timing import SimClock, TokenBucket, WallClock
from .wire import (
    CLASS_IN,
    NSEC,
    DnsMessage,
    Edns,
    Rcode,
    ResourceRecord,
    RType,
    WireError,
    canonical_name_key,
    decode,
    encode,
    is_subdomain,
    labels_to_name,
    name_labels,
    normalize_name,
    type_from_name,
    type_name,
)
from .zones import (
    MisconfigKind,
    OnlineSigner,
    SignedZonePair,
    Zone,
    apply_misconfiguration,
    generate_zone_pair,
    nsec_chain,
    sign_rrset,
    signature_window,
)

log = logging.getLogger(__name__)

DEFAULT_BASE = "dnssec-test.example."
DEFAULT_EPOCH = 1_700_000_000


class ZoneLevel(str, Enum):
    PARENT = "parent"
    CHILD = "child"


class Transport(str, Enum):
    SIM = "sim"
    UDP = "udp"


class BindFailure(OSError):
    pass


@dataclass(frozen=True, slots=True)
class QueryLogEntry:
    ts_us: int
    src: str
    qname: str
    qtype: int
    do: bool
    zone: ZoneLevel
    transport: Transport

    def to_json(self) -> dict:
        return {
            "ts_us": self.ts_us,
            "src": self.src,
            "qname": self.qname,
            "qtype": type_name(self.qtype),
            "do": self.do,
            "zone": self.zone.value,
            "transport": self.transport.value,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "QueryLogEntry":
        qtype = doc["qtype"]
        return cls(
            ts_us=int(doc["ts_us"]),
            src=doc["src"],
            qname=doc["qname"],
            qtype=type_from_name(qtype) if isinstance(qtype, str) else int(qtype),
            do=bool(doc["do"]),
            zone=ZoneLevel(doc["zone"]),
            transport=Transport(doc["transport"]),
        )


class QueryLog:
    """Append-only, thread-safe log indexed by source address."""

    def __init__(self) -> None:
        self._entries: list[QueryLogEntry] = []
        self._by_src: dict[str, list[QueryLogEntry]] = {}
        self._lock = threading.Lock()
        self._last_ts = -1

    def append(self, entry: QueryLogEntry) -> QueryLogEntry:
        with self._lock:
            if entry.ts_us <= self._last_ts:
                entry = replace(entry, ts_us=self._last_ts + 1)
            self._last_ts = entry.ts_us
            self._entries.append(entry)
            self._by_src.setdefault(entry.src, []).append(entry)
        return entry

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[QueryLogEntry]:
        return iter(self.snapshot())

    def snapshot(self) -> tuple[QueryLogEntry, ...]:
        with self._lock:
            return tuple(self._entries)

    def mark(self) -> int:
        """Position to pass to :meth:`since` later."""
        with self._lock:
            return len(self._entries)

    def since(self, mark: int, until: int | None = None) -> list[QueryLogEntry]:
        with self._lock:
            return self._entries[mark:until]

    def sources(self) -> list[str]:
        with self._lock:
            return list(self._by_src)

    def for_source(self, src: str, start_us: int | None = None, end_us: int | None = None) -> list[QueryLogEntry]:
        with self._lock:
            entries = list(self._by_src.get(src, ()))
        if start_us is not None:
            entries = [e for e in entries if e.ts_us >= start_us]
        if end_us is not None:
            entries = [e for e in entries if e.ts_us < end_us]
        return entries

    def window(self, start_us: int | None = None, end_us: int | None = None) -> list[QueryLogEntry]:
        entries = self.snapshot()
        return [
            e for e in entries
            if (start_us is None or e.ts_us >= start_us) and (end_us is None or e.ts_us < end_us)
        ]

    def write_jsonl(self, path: str | Path) -> Path:
        path = Path(path)
        with path.open("w") as fh:
            for e in self.snapshot():
                fh.write(json.dumps(e.to_json(), separators=(",", ":")) + "\n")
        return path


def read_query_log(path: str | Path) -> list[QueryLogEntry]:
    with Path(path).open() as fh:
        return [QueryLogEntry.from_json(json.loads(line)) for line in fh if line.strip()]


def _merge_parent(pairs: dict[MisconfigKind, SignedZonePair]) -> Zone:
    """One parent zone holding the delegations (and DS variants) of every child."""
    base = pairs[MisconfigKind.VALID]
    parent = base.parent
    rrsets = {k: v for k, v in parent.rrsets.items() if k[0] != parent.child_apex and k[1] != RType.NSEC}
    rrsigs = {k: v for k, v in parent.rrsigs.items() if k in rrsets}
    for pair in pairs.values():
        c_apex = pair.child.apex
        for key, rrset in pair.parent.rrsets.items():
            if key[0] == c_apex and key[1] != RType.NSEC:
                rrsets[key] = rrset
                if key in pair.parent.rrsigs:
                    rrsigs[key] = pair.parent.rrsigs[key]
    types: dict[str, set[int]] = {}
    for name, rtype in rrsets:
        types.setdefault(name, set()).add(rtype)
    window = signature_window(base.epoch)
    for owner, nsec in nsec_chain(parent.apex, types).items():
        key = (owner, int(RType.NSEC))
        rrsets[key] = (nsec,)
        rrsigs[key] = (sign_rrset((nsec,), parent.zsk, parent.apex, *window),)
    return Zone(parent.apex, rrsets, rrsigs, parent.ksk, parent.zsk, None)


class Observatory:
    """Authoritative server state: zone variants, online signer, query log."""

    def __init__(
        self,
        base: str = DEFAULT_BASE,
        epoch: int = DEFAULT_EPOCH,
        *,
        algorithm: int = crypto.ECDSAP256SHA256,
        seed: int | None = 0,
        digest_type: int = crypto.DIGEST_SHA256,
        clock=None,
    ):
        self.base = normalize_name(base)
        self._dot_base = "." + self.base if self.base != "." else "."
        self.epoch = epoch
        self.clock = clock if clock is not None else WallClock()
        valid = generate_zone_pair(
            self.base, f"valid.{self.base}", epoch, algorithm=algorithm, seed=seed, digest_type=digest_type
        )
        parent_keys = (valid.parent.ksk, valid.parent.zsk)
        self.pairs: dict[MisconfigKind, SignedZonePair] = {}
        for kind in MisconfigKind:
            pair = valid if kind is MisconfigKind.VALID else generate_zone_pair(
                self.base,
                f"{kind.label}.{self.base}",
                epoch,
                algorithm=algorithm,
                seed=seed,
                digest_type=digest_type,
                parent_keys=parent_keys,
            )
            self.pairs[kind] = apply_misconfiguration(pair, kind)
        self.parent = _merge_parent(self.pairs)
        self.signers = {kind: OnlineSigner(pair) for kind, pair in self.pairs.items()}
        self._child_by_apex = {pair.child.apex: kind for kind, pair in self.pairs.items()}
        self._parent_nsec = sorted(
            (rr for (n, t), rrs in self.parent.rrsets.items() if t == RType.NSEC for rr in rrs),
            key=lambda rr: canonical_name_key(rr.name),
        )
        self.log = QueryLog()

    # -- zone lookup ----------------------------------------------------

    def trust_anchor(self) -> ResourceRecord:
        return self.pairs[MisconfigKind.VALID].trust_anchor()

    def child_apex(self, kind: MisconfigKind) -> str:
        return self.pairs[MisconfigKind(kind)].child.apex

    def child_for(self, qname: str) -> MisconfigKind | None:
        qname = normalize_name(qname)
        if "\\" not in qname:
            if not qname.endswith(self._dot_base):
                return None
            head = qname[: -len(self._dot_base)]
            return self._child_by_apex.get(f"{head.rsplit('.', 1)[-1]}{self._dot_base}")
        labels = name_labels(qname)
        base_len = len(name_labels(self.base))
        if len(labels) <= base_len or not is_subdomain(qname, self.base):
            return None
        return self._child_by_apex.get(labels_to_name(labels[-base_len - 1 :]))

    def infer_level(self, qname: str, qtype: int) -> ZoneLevel | None:
        qname = normalize_name(qname)
        if qname != self.base and not (
            qname.endswith(self._dot_base) if "\\" not in qname else is_subdomain(qname, self.base)
        ):
            return None
        kind = self.child_for(qname)
        if kind is None:
            return ZoneLevel.PARENT
        if qtype == RType.DS and qname == self.child_apex(kind):
            return ZoneLevel.PARENT
        return ZoneLevel.CHILD

    # -- answering ------------------------------------------------------

    def answer_query(
        self,
        query: DnsMessage,
        source: str = "0.0.0.0",
        level: ZoneLevel | None = None,
        transport: Transport = Transport.SIM,
    ) -> DnsMessage:
        """Answer one query as the authoritative server for ``level``.

        Out-of-zone names get REFUSED and are not logged; so do queries sent
        to a level that does not hold the name.
        """
        q = query.question
        if q is None or query.qr or query.opcode != 0:
            return self._reply(query, Rcode.FORMERR)
        if q.qclass != CLASS_IN:
            return self._reply(query, Rcode.REFUSED)
        qname = normalize_name(q.name)
        inferred = self.infer_level(qname, q.qtype)
        if inferred is None:
            return self._reply(query, Rcode.REFUSED)
        kind = self.child_for(qname)
        if level is None:
            level = inferred
        elif level is ZoneLevel.CHILD and kind is None:
            return self._reply(query, Rcode.REFUSED)

        self.log.append(
            QueryLogEntry(
                ts_us=self.clock.tick(),
                src=str(source),
                qname=qname,
                qtype=int(q.qtype),
                do=query.do_bit,
                zone=level,
                transport=transport,
            )
        )
        do = query.do_bit
        if level is ZoneLevel.PARENT:
            return self._answer_parent(query, qname, q.qtype, kind, do)
        return self._answer_child(query, qname, q.qtype, kind, do)

    def _reply(self, query: DnsMessage, rcode: int, *, aa: bool = False, answers=(), authority=(), additional=()) -> DnsMessage:
        edns = None
        if query.edns is not None:
            edns = Edns(udp_payload_size=1232, do_bit=query.edns.do_bit)
        return DnsMessage(
            id=query.id,
            qr=True,
            opcode=query.opcode,
            aa=aa,
            rd=query.rd,
            cd=query.cd,
            rcode=rcode,
            question=query.question,
            answers=tuple(answers),
            authority=tuple(authority),
            additional=tuple(additional),
            edns=edns,
        )

    @staticmethod
    def _with_sigs(zone: Zone, name: str, rtype: int, do: bool) -> tuple[ResourceRecord, ...]:
        rrset = zone.rrset(name, rtype)
        return rrset + (zone.sigs(name, rtype) if do and rrset else ())

    def _negative(self, zone: Zone, nsec: ResourceRecord | None, do: bool) -> list[ResourceRecord]:
        auth = list(self._with_sigs(zone, zone.apex, RType.SOA, do))
        if do and nsec is not None:
            auth += [nsec, *zone.sigs(nsec.name, RType.NSEC)]
        return auth

    def _answer_parent(self, query, qname: str, qtype: int, kind: MisconfigKind | None, do: bool) -> DnsMessage:
        parent = self.parent
        if kind is not None:
            c_apex = self.child_apex(kind)
            if qname == c_apex and qtype == RType.DS:
                if parent.rrset(c_apex, RType.DS):
                    return self._reply(query, Rcode.NOERROR, aa=True, answers=self._with_sigs(parent, c_apex, RType.DS, do))
                nsec = parent.rrset(c_apex, RType.NSEC)[0]
                return self._reply(query, Rcode.NOERROR, aa=True, authority=self._negative(parent, nsec, do))
            return self._referral(query, c_apex, do)
        if parent.types_at(qname):
            if parent.rrset(qname, qtype):
                return self._reply(query, Rcode.NOERROR, aa=True, answers=self._with_sigs(parent, qname, qtype, do))
            nsec = parent.rrset(qname, RType.NSEC)[0]
            return self._reply(query, Rcode.NOERROR, aa=True, authority=self._negative(parent, nsec, do))
        return self._reply(query, Rcode.NXDOMAIN, aa=True, authority=self._negative(parent, self._covering_parent_nsec(qname), do))

    def _covering_parent_nsec(self, qname: str) -> ResourceRecord:
        keys = [canonical_name_key(rr.name) for rr in self._parent_nsec]
        idx = bisect_right(keys, canonical_name_key(qname)) - 1
        return self._parent_nsec[idx]

    def _referral(self, query, c_apex: str, do: bool) -> DnsMessage:
        parent = self.parent
        authority = list(parent.rrset(c_apex, RType.NS))
        if do:
            ds = parent.rrset(c_apex, RType.DS)
            if ds:
                authority += [*ds, *parent.sigs(c_apex, RType.DS)]
            else:
                authority += [*parent.rrset(c_apex, RType.NSEC), *parent.sigs(c_apex, RType.NSEC)]
        glue = []
        for ns in parent.rrset(c_apex, RType.NS):
            glue += parent.rrset(ns.rdata.target, RType.A)
        return self._reply(query, Rcode.NOERROR, authority=authority, additional=glue)

    def _answer_child(self, query, qname: str, qtype: int, kind: MisconfigKind, do: bool) -> DnsMessage:
        pair = self.pairs[kind]
        child = pair.child
        if child.types_at(qname):
            if child.rrset(qname, qtype):
                return self._reply(query, Rcode.NOERROR, aa=True, answers=self._with_sigs(child, qname, qtype, do))
            nsec = child.rrset(qname, RType.NSEC)[0]
            return self._reply(query, Rcode.NOERROR, aa=True, authority=self._negative(child, nsec, do))
        if self._is_probe_in(qname, kind):
            signer = self.signers[kind]
            if qtype == RType.A:
                rrset, sigs = signer.probe_a(qname)
                return self._reply(query, Rcode.NOERROR, aa=True, answers=rrset + (sigs if do else ()))
            nsec = ResourceRecord(qname, RType.NSEC, 300, NSEC("\\000." + qname, (RType.A,)))
            auth = list(self._with_sigs(child, child.apex, RType.SOA, do))
            if do:
                auth += [nsec, signer.sign_child((nsec,))]
            return self._reply(query, Rcode.NOERROR, aa=True, authority=auth)
        # A one-name child zone: its apex NSEC covers every other name.
        apex_nsec = child.rrset(child.apex, RType.NSEC)[0]
        return self._reply(query, Rcode.NXDOMAIN, aa=True, authority=self._negative(child, apex_nsec, do))

    def _is_probe_in(self, qname: str, kind: MisconfigKind) -> bool:
        if len(name_labels(qname)) != len(name_labels(self.child_apex(kind))) + 1:
            return False
        try:
            probe = decode_probe_name(qname, self.base)
        except NotAProbeName:
            return False
        return probe.kind is kind

    # -- log access -----------------------------------------------------

    def queries_for(self, source: str, start_us: int | None = None, end_us: int | None = None) -> list[QueryLogEntry]:
        """Entries from ``source`` with ``start_us <= ts_us < end_us``, in time order."""
        return self.log.for_source(str(source), start_us, end_us)

    # -- UDP ------------------------------------------------------------

    def serve_udp(
        self,
        host: str = "127.0.0.1",
        port: int = 53,
        *,
        level: ZoneLevel | None = None,
        rate_limit: float | None = 500.0,
    ) -> "UdpService":
        return UdpService(self, host, port, level=level, rate_limit=rate_limit)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        data, sock = self.request
        service: UdpService = self.server.service  # type: ignore[attr-defined]
        try:
            query = decode(data)
        except WireError as exc:
            log.debug("dropping malformed datagram from %s: %s", self.client_address[0], exc)
            return
        if query.qr:
            return
        if service.bucket is not None and not service.bucket.try_acquire():
            return
        reply = service.observatory.answer_query(
            query, self.client_address[0], level=service.level, transport=Transport.UDP
        )
        try:
            sock.sendto(encode(reply), self.client_address)
        except WireError as exc:  # pragma: no cover - every reply we build encodes
            log.warning("could not encode reply: %s", exc)


class _ThreadingUDPServer(socketserver.ThreadingMixIn, socketserver.UDPServer):
    daemon_threads = True
    allow_reuse_address = False  # UDP reuse would let a second server share the port silently
    max_packet_size = 65535


class UdpService:
    """Running UDP front end.  Use as a context manager or call :meth:`stop`."""

    def __init__(self, observatory: Observatory, host: str, port: int, *, level=None, rate_limit=500.0):
        self.observatory = observatory
        self.level = level
        self.bucket = TokenBucket(rate_limit) if rate_limit else None
        try:
            self._server = _ThreadingUDPServer((host, port), _Handler)
        except OSError as exc:
            raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
        self._server.service = self  # type: ignore[attr-defined]
        self._thread = threading.Thread(target=self._server.serve_forever, name="observatory-udp", daemon=True)
        self._thread.start()

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "UdpService":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def sim_observatory(base: str = DEFAULT_BASE, epoch: int = DEFAULT_EPOCH, seed: int = 0, clock=None) -> Observatory:
    """Observatory wired for simulation: fast stand-in signatures, virtual clock."""
    return Observatory(
        base, epoch, algorithm=crypto.KEYED_DIGEST, seed=seed, clock=clock if clock is not None else SimClock()
    )


def iter_entries(entries: Iterable[QueryLogEntry], qtype: int) -> Iterator[QueryLogEntry]:
    return (e for e in entries if e.qtype == qtype)
