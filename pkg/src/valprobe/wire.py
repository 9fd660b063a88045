"""DNS message model and wire codec.

Covers the header, a single question, the record types used by the probing
method (A, AAAA, NS, SOA, TXT, DNSKEY, DS, RRSIG, NSEC) and EDNS0.  Names are
carried as presentation-format strings with a trailing dot; bytes outside the
printable ASCII range are written as ``\\DDD`` escapes so that any label read
off the wire survives a round trip.

The encoder never emits compression pointers.  The decoder follows them.
"""

from __future__ import annotations

import base64
import ipaddress
import struct
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from typing import Union

CLASS_IN = 1
MAX_NAME_OCTETS = 255
MAX_LABEL_OCTETS = 63
HEADER_LEN = 12


class RType(IntEnum):
    A = 1
    NS = 2
    SOA = 6
    TXT = 16
    AAAA = 28
    OPT = 41
    DS = 43
    RRSIG = 46
    NSEC = 47
    DNSKEY = 48


class Rcode(IntEnum):
    NOERROR = 0
    FORMERR = 1
    SERVFAIL = 2
    NXDOMAIN = 3
    REFUSED = 5


class WireError(ValueError):
    """Base class for codec failures."""


class Truncated(WireError):
    pass


class MalformedName(WireError):
    pass


class PointerLoop(MalformedName):
    pass


class MalformedMessage(WireError):
    pass


class OversizeName(WireError):
    pass


class UnsupportedRtype(WireError):
    pass


class MixedRrset(WireError):
    pass


class WrongRtype(WireError):
    pass


def type_name(rtype: int) -> str:
    try:
        return RType(rtype).name
    except ValueError:
        return f"TYPE{rtype}"


def type_from_name(text: str) -> int:
    text = text.upper()
    if text in RType.__members__:
        return int(RType[text])
    if text.startswith("TYPE") and text[4:].isdigit():
        return int(text[4:])
    raise UnsupportedRtype(text)


# ---------------------------------------------------------------------------
# Names
# ---------------------------------------------------------------------------

_PLAIN = frozenset(range(0x21, 0x7F)) - {ord("."), ord("\\")}
_PLAIN_BYTES = bytes(sorted(_PLAIN))


def _label_to_text(label: bytes) -> str:
    if not label.translate(None, _PLAIN_BYTES):
        return label.decode("ascii")
    out = []
    for b in label:
        if b in _PLAIN:
            out.append(chr(b))
        elif b in (0x2E, 0x5C):
            out.append("\\" + chr(b))
        else:
            out.append(f"\\{b:03d}")
    return "".join(out)


def name_labels(name: str) -> list[bytes]:
    """Split a presentation-format name into raw labels (root excluded)."""
    return list(_split_name(name))


@lru_cache(maxsize=1 << 16)
def _split_name(name: str) -> tuple[bytes, ...]:
    if name in (".", ""):
        return ()
    if "\\" not in name and name.isascii():
        parts = name[:-1].split(".") if name.endswith(".") else name.split(".")
        if "" in parts:
            raise MalformedName(f"empty label in {name!r}")
        return tuple(p.encode("ascii") for p in parts)
    labels: list[bytes] = []
    cur = bytearray()
    i, n = 0, len(name)
    while i < n:
        c = name[i]
        if c == "\\":
            digits = name[i + 1 : i + 4]
            if len(digits) == 3 and all(d in "0123456789" for d in digits):
                val = int(digits)
                if val > 255:
                    raise MalformedName(f"bad escape in {name!r}")
                cur.append(val)
                i += 4
                continue
            if i + 1 >= n:
                raise MalformedName(f"dangling escape in {name!r}")
            cur.append(ord(name[i + 1]))
            i += 2
            continue
        if c == ".":
            if not cur:
                raise MalformedName(f"empty label in {name!r}")
            labels.append(bytes(cur))
            cur = bytearray()
            i += 1
            continue
        o = ord(c)
        if o > 0x7F:
            raise MalformedName(f"non-ASCII character in {name!r}")
        cur.append(o)
        i += 1
    if cur:
        labels.append(bytes(cur))
    return tuple(labels)


def labels_to_name(labels: list[bytes]) -> str:
    if not labels:
        return "."
    return ".".join(_label_to_text(lb) for lb in labels) + "."


@lru_cache(maxsize=1 << 16)
def normalize_name(name: str) -> str:
    """Lowercase (ASCII only) and make fully qualified."""
    return labels_to_name([lb.lower() for lb in _split_name(name)])


@lru_cache(maxsize=1 << 16)
def name_to_wire(name: str, canonical: bool = False) -> bytes:
    out = bytearray()
    for label in _split_name(name):
        if len(label) > MAX_LABEL_OCTETS:
            raise OversizeName(f"label longer than 63 octets in {name!r}")
        if canonical:
            label = label.lower()
        out.append(len(label))
        out += label
    out.append(0)
    if len(out) > MAX_NAME_OCTETS:
        raise OversizeName(f"{name!r} exceeds 255 octets")
    return bytes(out)


def is_subdomain(name: str, parent: str) -> bool:
    """True when ``name`` equals or lies below ``parent`` (case-insensitive)."""
    nl = [lb.lower() for lb in _split_name(name)]
    pl = [lb.lower() for lb in _split_name(parent)]
    return len(nl) >= len(pl) and (not pl or nl[-len(pl) :] == pl)


def label_count(name: str) -> int:
    return len(_split_name(name))


def canonical_name_key(name: str) -> tuple[bytes, ...]:
    """Sort key giving RFC 4034 canonical name order."""
    return tuple(lb.lower() for lb in reversed(_split_name(name)))


def _read_name(buf: bytes, offset: int) -> tuple[str, int]:
    labels: list[bytes] = []
    seen: set[int] = set()
    total = 1
    end = None
    pos = offset
    while True:
        if pos >= len(buf):
            raise Truncated("name runs past end of message")
        length = buf[pos]
        kind = length & 0xC0
        if kind == 0xC0:
            if pos + 1 >= len(buf):
                raise Truncated("truncated compression pointer")
            target = ((length & 0x3F) << 8) | buf[pos + 1]
            if end is None:
                end = pos + 2
            if target in seen or target == pos:
                raise PointerLoop(f"compression loop at offset {pos}")
            seen.add(pos)
            seen.add(target)
            if target >= len(buf):
                raise MalformedName("compression pointer beyond message")
            pos = target
            continue
        if kind:
            raise MalformedName(f"unsupported label type 0x{kind:02x}")
        if length == 0:
            if end is None:
                end = pos + 1
            break
        if pos + 1 + length > len(buf):
            raise Truncated("label runs past end of message")
        total += length + 1
        if total > MAX_NAME_OCTETS:
            raise MalformedName("name exceeds 255 octets")
        labels.append(buf[pos + 1 : pos + 1 + length])
        pos += 1 + length
    return labels_to_name(labels), end


# ---------------------------------------------------------------------------
# Record data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class A:
    address: str

    def to_wire(self, canonical: bool = False) -> bytes:
        return ipaddress.IPv4Address(self.address).packed

    def to_text(self) -> str:
        return self.address


@dataclass(frozen=True)
class AAAA:
    address: str

    def to_wire(self, canonical: bool = False) -> bytes:
        return ipaddress.IPv6Address(self.address).packed

    def to_text(self) -> str:
        return self.address


@dataclass(frozen=True)
class NS:
    target: str

    def to_wire(self, canonical: bool = False) -> bytes:
        return name_to_wire(self.target, canonical)

    def to_text(self) -> str:
        return self.target


@dataclass(frozen=True)
class SOA:
    mname: str
    rname: str
    serial: int
    refresh: int
    retry: int
    expire: int
    minimum: int

    def to_wire(self, canonical: bool = False) -> bytes:
        return (
            name_to_wire(self.mname, canonical)
            + name_to_wire(self.rname, canonical)
            + struct.pack("!IIIII", self.serial, self.refresh, self.retry, self.expire, self.minimum)
        )

    def to_text(self) -> str:
        return (
            f"{self.mname} {self.rname} {self.serial} {self.refresh} "
            f"{self.retry} {self.expire} {self.minimum}"
        )


@dataclass(frozen=True)
class TXT:
    strings: tuple[bytes, ...]

    def to_wire(self, canonical: bool = False) -> bytes:
        out = bytearray()
        for s in self.strings:
            if len(s) > 255:
                raise MalformedMessage("TXT character-string longer than 255 octets")
            out.append(len(s))
            out += s
        return bytes(out)

    def to_text(self) -> str:
        return " ".join('"' + s.decode("latin-1").replace("\\", "\\\\").replace('"', '\\"') + '"' for s in self.strings)


@dataclass(frozen=True)
class DNSKEY:
    flags: int
    protocol: int
    algorithm: int
    key: bytes

    def to_wire(self, canonical: bool = False) -> bytes:
        return struct.pack("!HBB", self.flags, self.protocol, self.algorithm) + self.key

    def to_text(self) -> str:
        return f"{self.flags} {self.protocol} {self.algorithm} {base64.b64encode(self.key).decode()}"


@dataclass(frozen=True)
class DS:
    key_tag: int
    algorithm: int
    digest_type: int
    digest: bytes

    def to_wire(self, canonical: bool = False) -> bytes:
        return struct.pack("!HBB", self.key_tag, self.algorithm, self.digest_type) + self.digest

    def to_text(self) -> str:
        return f"{self.key_tag} {self.algorithm} {self.digest_type} {self.digest.hex().upper()}"


@dataclass(frozen=True)
class RRSIG:
    type_covered: int
    algorithm: int
    labels: int
    original_ttl: int
    expiration: int
    inception: int
    key_tag: int
    signer: str
    signature: bytes

    def header_wire(self, canonical: bool = False) -> bytes:
        """RDATA minus the signature field (the part covered by the signature)."""
        return struct.pack(
            "!HBBIIIH",
            self.type_covered,
            self.algorithm,
            self.labels,
            self.original_ttl,
            self.expiration,
            self.inception,
            self.key_tag,
        ) + name_to_wire(self.signer, canonical)

    def to_wire(self, canonical: bool = False) -> bytes:
        return self.header_wire(canonical) + self.signature

    def to_text(self) -> str:
        return (
            f"{type_name(self.type_covered)} {self.algorithm} {self.labels} {self.original_ttl} "
            f"{self.expiration} {self.inception} {self.key_tag} {self.signer} "
            f"{base64.b64encode(self.signature).decode()}"
        )


def _encode_type_bitmap(types: tuple[int, ...]) -> bytes:
    windows: dict[int, bytearray] = {}
    for t in sorted(set(types)):
        win, low = divmod(t, 256)
        bm = windows.setdefault(win, bytearray())
        idx = low // 8
        if len(bm) <= idx:
            bm.extend(b"\x00" * (idx + 1 - len(bm)))
        bm[idx] |= 0x80 >> (low % 8)
    out = bytearray()
    for win in sorted(windows):
        bm = windows[win]
        out += bytes((win, len(bm))) + bm
    return bytes(out)


def _decode_type_bitmap(data: bytes) -> tuple[int, ...]:
    types: list[int] = []
    pos = 0
    last_win = -1
    while pos < len(data):
        if pos + 2 > len(data):
            raise MalformedMessage("truncated NSEC type bitmap")
        win, blen = data[pos], data[pos + 1]
        if win <= last_win or not 1 <= blen <= 32 or pos + 2 + blen > len(data):
            raise MalformedMessage("bad NSEC type bitmap window")
        last_win = win
        for i, byte in enumerate(data[pos + 2 : pos + 2 + blen]):
            for bit in range(8):
                if byte & (0x80 >> bit):
                    types.append(win * 256 + i * 8 + bit)
        pos += 2 + blen
    return tuple(types)


@dataclass(frozen=True)
class NSEC:
    next_name: str
    types: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "types", tuple(sorted(set(self.types))))

    def to_wire(self, canonical: bool = False) -> bytes:
        # RFC 6840 5.1: the next-name field is not downcased for signing.
        return name_to_wire(self.next_name) + _encode_type_bitmap(self.types)

    def to_text(self) -> str:
        return " ".join([self.next_name] + [type_name(t) for t in self.types])


@dataclass(frozen=True)
class Opaque:
    """RDATA of a type this codec does not model (RFC 3597 style)."""

    data: bytes

    def to_wire(self, canonical: bool = False) -> bytes:
        return self.data

    def to_text(self) -> str:
        return f"\\# {len(self.data)} {self.data.hex().upper()}".rstrip()


Rdata = Union[A, AAAA, NS, SOA, TXT, DNSKEY, DS, RRSIG, NSEC, Opaque]

_RDATA_CLASS: dict[int, type] = {
    RType.A: A,
    RType.AAAA: AAAA,
    RType.NS: NS,
    RType.SOA: SOA,
    RType.TXT: TXT,
    RType.DNSKEY: DNSKEY,
    RType.DS: DS,
    RType.RRSIG: RRSIG,
    RType.NSEC: NSEC,
}


@dataclass(frozen=True)
class ResourceRecord:
    name: str
    rtype: int
    ttl: int
    rdata: Rdata
    rclass: int = CLASS_IN

    def to_wire(self, canonical: bool = False, ttl: int | None = None) -> bytes:
        expected = _RDATA_CLASS.get(self.rtype, Opaque)
        if self.rtype == RType.OPT or not isinstance(self.rdata, expected):
            raise UnsupportedRtype(
                f"{type_name(self.rtype)} record carries {type(self.rdata).__name__} rdata"
            )
        rdata = self.rdata.to_wire(canonical)
        if len(rdata) > 0xFFFF:
            raise MalformedMessage("rdata longer than 65535 octets")
        return (
            name_to_wire(self.name, canonical)
            + struct.pack("!HHIH", self.rtype, self.rclass, self.ttl if ttl is None else ttl, len(rdata))
            + rdata
        )

    def to_text(self) -> str:
        cls = "IN" if self.rclass == CLASS_IN else f"CLASS{self.rclass}"
        return f"{self.name} {self.ttl} {cls} {type_name(self.rtype)} {self.rdata.to_text()}"


def _decode_rdata(buf: bytes, start: int, rdlen: int, rtype: int) -> Rdata:
    end = start + rdlen
    data = buf[start:end]

    def name_at(pos: int) -> tuple[str, int]:
        name, nxt = _read_name(buf, pos)
        if nxt > end:
            raise MalformedMessage("name overruns rdata")
        return name, nxt

    if rtype == RType.A:
        if rdlen != 4:
            raise MalformedMessage("A rdata must be 4 octets")
        return A(str(ipaddress.IPv4Address(data)))
    if rtype == RType.AAAA:
        if rdlen != 16:
            raise MalformedMessage("AAAA rdata must be 16 octets")
        return AAAA(str(ipaddress.IPv6Address(data)))
    if rtype == RType.NS:
        target, nxt = name_at(start)
        if nxt != end:
            raise MalformedMessage("trailing bytes in NS rdata")
        return NS(target)
    if rtype == RType.SOA:
        mname, pos = name_at(start)
        rname, pos = name_at(pos)
        if end - pos != 20:
            raise MalformedMessage("bad SOA rdata length")
        return SOA(mname, rname, *struct.unpack("!IIIII", buf[pos:end]))
    if rtype == RType.TXT:
        strings = []
        pos = 0
        while pos < len(data):
            ln = data[pos]
            if pos + 1 + ln > len(data):
                raise MalformedMessage("TXT string overruns rdata")
            strings.append(data[pos + 1 : pos + 1 + ln])
            pos += 1 + ln
        return TXT(tuple(strings))
    if rtype == RType.DNSKEY:
        if rdlen < 4:
            raise MalformedMessage("DNSKEY rdata too short")
        flags, proto, alg = struct.unpack("!HBB", data[:4])
        return DNSKEY(flags, proto, alg, data[4:])
    if rtype == RType.DS:
        if rdlen < 4:
            raise MalformedMessage("DS rdata too short")
        tag, alg, dtype = struct.unpack("!HBB", data[:4])
        return DS(tag, alg, dtype, data[4:])
    if rtype == RType.RRSIG:
        if rdlen < 18:
            raise MalformedMessage("RRSIG rdata too short")
        fields = struct.unpack("!HBBIIIH", data[:18])
        signer, pos = name_at(start + 18)
        return RRSIG(*fields, signer, buf[pos:end])
    if rtype == RType.NSEC:
        nxt_name, pos = name_at(start)
        return NSEC(nxt_name, _decode_type_bitmap(buf[pos:end]))
    return Opaque(data)


# ---------------------------------------------------------------------------
# Messages
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Question:
    name: str
    qtype: int
    qclass: int = CLASS_IN


@dataclass(frozen=True)
class Edns:
    udp_payload_size: int = 1232
    do_bit: bool = False
    version: int = 0
    ext_rcode: int = 0
    options: bytes = b""


@dataclass(frozen=True)
class DnsMessage:
    id: int = 0
    qr: bool = False
    opcode: int = 0
    aa: bool = False
    tc: bool = False
    rd: bool = False
    ra: bool = False
    ad: bool = False
    cd: bool = False
    rcode: int = Rcode.NOERROR
    question: Question | None = None
    answers: tuple[ResourceRecord, ...] = ()
    authority: tuple[ResourceRecord, ...] = ()
    additional: tuple[ResourceRecord, ...] = ()
    edns: Edns | None = None

    @property
    def do_bit(self) -> bool:
        return self.edns is not None and self.edns.do_bit

    def flag_word(self) -> int:
        return (
            (self.qr << 15)
            | ((self.opcode & 0xF) << 11)
            | (self.aa << 10)
            | (self.tc << 9)
            | (self.rd << 8)
            | (self.ra << 7)
            | (self.ad << 5)
            | (self.cd << 4)
            | (int(self.rcode) & 0xF)
        )


def make_query(
    qname: str,
    qtype: int = RType.A,
    *,
    msg_id: int = 0,
    rd: bool = True,
    do_bit: bool | None = False,
    udp_payload_size: int = 1232,
) -> DnsMessage:
    """Build a one-question query.  ``do_bit=None`` omits the OPT record."""
    edns = None if do_bit is None else Edns(udp_payload_size=udp_payload_size, do_bit=do_bit)
    return DnsMessage(id=msg_id, rd=rd, question=Question(qname, int(qtype)), edns=edns)


def _opt_record(edns: Edns) -> bytes:
    ttl = ((edns.ext_rcode & 0xFF) << 24) | ((edns.version & 0xFF) << 16) | (0x8000 if edns.do_bit else 0)
    return b"\x00" + struct.pack("!HHIH", RType.OPT, edns.udp_payload_size, ttl, len(edns.options)) + edns.options


def encode(msg: DnsMessage) -> bytes:
    """Serialize ``msg`` without name compression."""
    if msg.ad and not msg.qr:
        raise MalformedMessage("AD may only be set on responses")
    if not 0 <= msg.id <= 0xFFFF:
        raise MalformedMessage("message id out of range")
    arcount = len(msg.additional) + (1 if msg.edns is not None else 0)
    out = bytearray(
        struct.pack(
            "!HHHHHH",
            msg.id,
            msg.flag_word(),
            1 if msg.question else 0,
            len(msg.answers),
            len(msg.authority),
            arcount,
        )
    )
    if msg.question:
        q = msg.question
        out += name_to_wire(q.name) + struct.pack("!HH", q.qtype, q.qclass)
    for section in (msg.answers, msg.authority, msg.additional):
        for rr in section:
            out += rr.to_wire()
    if msg.edns is not None:
        out += _opt_record(msg.edns)
    return bytes(out)


def decode(data: bytes) -> DnsMessage:
    """Parse a wire-format message.  Raises a :class:`WireError` subclass on bad input."""
    try:
        return _decode(bytes(data))
    except WireError:
        raise
    except (struct.error, IndexError) as exc:
        raise Truncated(str(exc)) from None
    except ValueError as exc:
        raise MalformedMessage(str(exc)) from None


def _decode(buf: bytes) -> DnsMessage:
    if len(buf) < HEADER_LEN:
        raise Truncated(f"{len(buf)}-byte input is shorter than a DNS header")
    msg_id, flags, qd, an, ns, ar = struct.unpack("!HHHHHH", buf[:HEADER_LEN])
    if qd > 1:
        raise MalformedMessage("more than one question")
    pos = HEADER_LEN
    question = None
    if qd:
        qname, pos = _read_name(buf, pos)
        if pos + 4 > len(buf):
            raise Truncated("question runs past end of message")
        qtype, qclass = struct.unpack("!HH", buf[pos : pos + 4])
        pos += 4
        question = Question(qname, qtype, qclass)

    sections: list[list[ResourceRecord]] = [[], [], []]
    edns = None
    for idx, count in enumerate((an, ns, ar)):
        for _ in range(count):
            name, pos = _read_name(buf, pos)
            if pos + 10 > len(buf):
                raise Truncated("record header runs past end of message")
            rtype, rclass, ttl, rdlen = struct.unpack("!HHIH", buf[pos : pos + 10])
            pos += 10
            if pos + rdlen > len(buf):
                raise Truncated("rdata runs past end of message")
            if rtype == RType.OPT:
                if idx != 2 or edns is not None or name != ".":
                    raise MalformedMessage("misplaced or duplicate OPT record")
                edns = Edns(
                    udp_payload_size=rclass,
                    do_bit=bool(ttl & 0x8000),
                    version=(ttl >> 16) & 0xFF,
                    ext_rcode=(ttl >> 24) & 0xFF,
                    options=buf[pos : pos + rdlen],
                )
            else:
                rdata = _decode_rdata(buf, pos, rdlen, rtype)
                sections[idx].append(ResourceRecord(name, rtype, ttl, rdata, rclass))
            pos += rdlen

    rcode_val = flags & 0xF
    try:
        rcode: int = Rcode(rcode_val)
    except ValueError:
        rcode = rcode_val
    return DnsMessage(
        id=msg_id,
        qr=bool(flags & 0x8000),
        opcode=(flags >> 11) & 0xF,
        aa=bool(flags & 0x0400),
        tc=bool(flags & 0x0200),
        rd=bool(flags & 0x0100),
        ra=bool(flags & 0x0080),
        ad=bool(flags & 0x0020),
        cd=bool(flags & 0x0010),
        rcode=rcode,
        question=question,
        answers=tuple(sections[0]),
        authority=tuple(sections[1]),
        additional=tuple(sections[2]),
        edns=edns,
    )


# ---------------------------------------------------------------------------
# DNSSEC helpers
# ---------------------------------------------------------------------------


def canonical_rrset_bytes(rrset: list[ResourceRecord] | tuple[ResourceRecord, ...], ttl: int | None = None) -> bytes:
    """Canonical RRset image: lowercased names, duplicates dropped, sorted by rdata.

    ``ttl`` overrides the records' TTL (signers pass the RRSIG original TTL).
    """
    if not rrset:
        return b""
    first = rrset[0]
    owner = normalize_name(first.name)
    for rr in rrset[1:]:
        if (
            normalize_name(rr.name) != owner
            or rr.rtype != first.rtype
            or rr.rclass != first.rclass
            or rr.ttl != first.ttl
        ):
            raise MixedRrset(f"{rr.to_text()!r} does not belong with {first.to_text()!r}")
    head = name_to_wire(owner, canonical=True)
    use_ttl = first.ttl if ttl is None else ttl
    rdatas = sorted({rr.rdata.to_wire(canonical=True) for rr in rrset})
    return b"".join(
        head + struct.pack("!HHIH", first.rtype, first.rclass, use_ttl, len(rd)) + rd for rd in rdatas
    )


def key_tag(dnskey: ResourceRecord) -> int:
    """RFC 4034 Appendix B key tag over the DNSKEY rdata."""
    if dnskey.rtype != RType.DNSKEY or not isinstance(dnskey.rdata, DNSKEY):
        raise WrongRtype(f"key_tag needs a DNSKEY record, got {type_name(dnskey.rtype)}")
    return key_tag_rdata(dnskey.rdata.to_wire())


@lru_cache(maxsize=4096)
def key_tag_rdata(rdata: bytes) -> int:
    acc = 0
    for i, b in enumerate(rdata):
        acc += b if i & 1 else b << 8
    acc += (acc >> 16) & 0xFFFF
    return acc & 0xFFFF


__all__ = [
    "A",
    "AAAA",
    "CLASS_IN",
    "DNSKEY",
    "DS",
    "DnsMessage",
    "Edns",
    "MalformedMessage",
    "MalformedName",
    "MixedRrset",
    "NS",
    "NSEC",
    "Opaque",
    "OversizeName",
    "PointerLoop",
    "Question",
    "RRSIG",
    "RType",
    "Rcode",
    "ResourceRecord",
    "SOA",
    "TXT",
    "Truncated",
    "UnsupportedRtype",
    "WireError",
    "WrongRtype",
    "canonical_name_key",
    "canonical_rrset_bytes",
    "decode",
    "encode",
    "is_subdomain",
    "key_tag",
    "label_count",
    "make_query",
    "name_labels",
    "name_to_wire",
    "normalize_name",
]
