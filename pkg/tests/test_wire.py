import struct

import dns.dnssec
import dns.flags
import dns.message
import dns.name
import dns.rdata
import dns.rdataclass
import dns.rdatatype
import dns.rrset
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from valprobe.wire import (
    AAAA,
    DNSKEY,
    DS,
    NS,
    NSEC,
    RRSIG,
    SOA,
    TXT,
    A,
    DnsMessage,
    Edns,
    MalformedMessage,
    MixedRrset,
    Opaque,
    OversizeName,
    PointerLoop,
    Question,
    Rcode,
    ResourceRecord,
    RType,
    Truncated,
    UnsupportedRtype,
    WireError,
    WrongRtype,
    canonical_rrset_bytes,
    decode,
    encode,
    key_tag,
    labels_to_name,
    make_query,
    name_to_wire,
)

# --- strategies -------------------------------------------------------------

label = st.binary(min_size=1, max_size=20)
names = st.lists(label, min_size=0, max_size=5).map(labels_to_name)
u8, u16, u32 = st.integers(0, 255), st.integers(0, 0xFFFF), st.integers(0, 0xFFFFFFFF)
ipv4 = st.integers(0, 2**32 - 1).map(lambda n: ".".join(str((n >> s) & 255) for s in (24, 16, 8, 0)))
ipv6 = st.binary(min_size=16, max_size=16).map(lambda b: str(__import__("ipaddress").IPv6Address(b)))
known_types = st.sampled_from([t for t in RType if t != RType.OPT])

rdata_for = {
    RType.A: st.builds(A, ipv4),
    RType.AAAA: st.builds(AAAA, ipv6),
    RType.NS: st.builds(NS, names),
    RType.SOA: st.builds(SOA, names, names, u32, u32, u32, u32, u32),
    RType.TXT: st.builds(TXT, st.lists(st.binary(max_size=40), min_size=1, max_size=3).map(tuple)),
    RType.DNSKEY: st.builds(DNSKEY, u16, u8, u8, st.binary(max_size=64)),
    RType.DS: st.builds(DS, u16, u8, u8, st.binary(max_size=48)),
    RType.RRSIG: st.builds(RRSIG, known_types.map(int), u8, u8, u32, u32, u32, u16, names, st.binary(max_size=64)),
    RType.NSEC: st.builds(NSEC, names, st.lists(st.integers(1, 1000), max_size=6).map(tuple)),
}


@st.composite
def records(draw):
    if draw(st.booleans()):
        rtype = draw(st.sampled_from(sorted(rdata_for)))
        rdata = draw(rdata_for[rtype])
    else:
        rtype = draw(st.integers(65280, 65534))
        rdata = Opaque(draw(st.binary(max_size=30)))
    return ResourceRecord(draw(names), int(rtype), draw(u32), rdata)


@st.composite
def messages(draw):
    qr = draw(st.booleans())
    section = st.lists(records(), max_size=3).map(tuple)
    edns = draw(st.none() | st.builds(Edns, st.integers(512, 4096), st.booleans()))
    return DnsMessage(
        id=draw(u16),
        qr=qr,
        aa=draw(st.booleans()),
        rd=draw(st.booleans()),
        ra=draw(st.booleans()),
        ad=qr and draw(st.booleans()),
        cd=draw(st.booleans()),
        rcode=draw(st.sampled_from(list(Rcode))),
        question=draw(st.none() | st.builds(Question, names, known_types.map(int))),
        answers=draw(section),
        authority=draw(section),
        additional=draw(section),
        edns=edns,
    )


# --- encode layout ----------------------------------------------------------


def test_query_layout_with_do_bit():
    qname = "valid.dnssec-test.example."
    wire = encode(make_query(qname, RType.A, msg_id=0x1234, do_bit=True))
    qwire = name_to_wire(qname)
    assert len(wire) == 12 + len(qwire) + 4 + 11
    ident, flags, qd, an, ns, ar = struct.unpack("!6H", wire[:12])
    assert (ident, flags, qd, an, ns, ar) == (0x1234, 0x0100, 1, 0, 0, 1)
    assert wire[12 : 12 + len(qwire)] == qwire
    opt = wire[12 + len(qwire) + 4 :]
    assert opt[0] == 0 and struct.unpack("!H", opt[1:3])[0] == RType.OPT
    assert struct.unpack("!I", opt[5:9])[0] == 0x8000


def test_ad_flag_bit_position():
    wire = encode(DnsMessage(qr=True, ad=True, rcode=Rcode.NOERROR))
    assert wire[3] & 0x20
    assert not encode(DnsMessage(qr=True))[3] & 0x20


def test_ad_rejected_on_query():
    with pytest.raises(MalformedMessage):
        encode(DnsMessage(qr=False, ad=True))


def test_oversize_names_rejected():
    with pytest.raises(OversizeName):
        encode(make_query("a" * 64 + ".example."))
    with pytest.raises(OversizeName):
        encode(make_query(".".join(["abcdefghi"] * 26) + "."))


def test_rdata_type_mismatch_is_unsupported():
    rr = ResourceRecord("x.example.", RType.A, 60, NS("ns.example."))
    with pytest.raises(UnsupportedRtype):
        encode(DnsMessage(qr=True, answers=(rr,)))


# --- round trips ------------------------------------------------------------


@settings(max_examples=1000)
@given(messages())
def test_decode_encode_identity(msg):
    wire = encode(msg)
    back = decode(wire)
    assert back == msg
    assert encode(back) == wire


simple_rr = st.builds(
    lambda n, t, a: ResourceRecord(n, RType.A, t, A(a)), st.sampled_from(["a.example.", "b.example."]), u32, ipv4
)


@settings(max_examples=200)
@given(messages(), st.lists(simple_rr, max_size=4).map(tuple))
def test_independent_parser_agrees(msg, answers):
    msg = DnsMessage(**{**msg.__dict__, "answers": answers, "authority": (), "additional": ()})
    parsed = dns.message.from_wire(encode(msg))
    assert parsed.id == msg.id
    assert parsed.rcode() == int(msg.rcode)
    assert bool(parsed.flags & dns.flags.AD) == msg.ad
    assert bool(parsed.flags & dns.flags.RD) == msg.rd
    assert (parsed.ednsflags & dns.flags.DO != 0) == msg.do_bit
    got = sorted((str(rrset.name), rd.address) for rrset in parsed.answer for rd in rrset)
    assert got == sorted({(rr.name, rr.rdata.address) for rr in answers})


@given(messages().filter(lambda m: m.edns is not None))
def test_do_bit_isolation(msg):
    on = encode(DnsMessage(**{**msg.__dict__, "edns": Edns(msg.edns.udp_payload_size, True)}))
    off = encode(DnsMessage(**{**msg.__dict__, "edns": Edns(msg.edns.udp_payload_size, False)}))
    diff = [i for i, (a, b) in enumerate(zip(on, off)) if a != b]
    assert len(on) == len(off) and len(diff) == 1
    # The OPT record is last: owner(1) type(2) class(2) ttl(4) rdlen(2); DO is the ttl's bit 15.
    pos = len(on) - 11 + 5 + 2
    assert diff == [pos] and on[pos] ^ off[pos] == 0x80


# --- decoding foreign / malformed input ------------------------------------


def test_truncated_header():
    with pytest.raises(Truncated):
        decode(b"\x00\x01\x02\x03")


def test_self_pointer_loop():
    wire = struct.pack("!6H", 1, 0, 1, 0, 0, 0) + b"\xc0\x0c" + b"\x00\x01\x00\x01"
    with pytest.raises(PointerLoop):
        decode(wire)


def test_two_pointer_loop():
    wire = struct.pack("!6H", 1, 0, 1, 0, 0, 0) + b"\xc0\x0e\xc0\x0c" + b"\x00\x01\x00\x01"
    with pytest.raises(PointerLoop):
        decode(wire)


def test_compressed_response_from_independent_encoder():
    q = dns.message.make_query("valid.dnssec-test.example.", "A", want_dnssec=True)
    r = dns.message.make_response(q)
    r.use_edns(0, dns.flags.DO, 1232)
    r.answer.append(dns.rrset.from_text("valid.dnssec-test.example.", 300, "IN", "A", "192.0.2.10", "192.0.2.11"))
    r.authority.append(dns.rrset.from_text("dnssec-test.example.", 3600, "IN", "NS", "ns1.dnssec-test.example."))
    wire = r.to_wire()
    assert b"\xc0\x0c" in wire  # the reference encoder compressed names
    msg = decode(wire)
    assert msg.qr and msg.do_bit and msg.question.name == "valid.dnssec-test.example."
    assert sorted(rr.rdata.address for rr in msg.answers) == ["192.0.2.10", "192.0.2.11"]
    assert msg.authority[0].rdata == NS("ns1.dnssec-test.example.")


# Reply to an "example.com. A" query with DO=1, captured verbatim from a resolver
# reachable from the build host (it answered NXDOMAIN, no compression).
CAPTURED = bytes.fromhex("a0cb81830001000000000001076578616d706c6503636f6d00000100010000292000000000000000")


def test_captured_response_fixture():
    msg = decode(CAPTURED)
    assert msg.id == 0xA0CB and msg.qr and msg.rd and msg.ra and not msg.aa
    assert msg.rcode == Rcode.NXDOMAIN
    assert msg.question == Question("example.com.", RType.A)
    assert msg.answers == msg.authority == msg.additional == ()
    assert msg.edns == Edns(udp_payload_size=8192, do_bit=False)
    assert encode(msg) == CAPTURED
    ref = dns.message.from_wire(CAPTURED)
    assert ref.rcode() == 3 and ref.payload == 8192


def test_unknown_rtype_is_opaque():
    rr = ResourceRecord("x.example.", 65280, 10, Opaque(b"\x01\x02"))
    back = decode(encode(DnsMessage(qr=True, answers=(rr,))))
    assert back.answers == (rr,)


@settings(max_examples=2000)
@given(st.binary(max_size=300))
def test_decoder_never_panics(data):
    try:
        decode(data)
    except WireError:
        pass


# --- canonical form and key tags -------------------------------------------


def test_canonical_rrset_order_independent():
    a1 = ResourceRecord("WWW.Example.", RType.A, 60, A("192.0.2.9"))
    a2 = ResourceRecord("www.example.", RType.A, 60, A("192.0.2.1"))
    assert canonical_rrset_bytes([a1, a2]) == canonical_rrset_bytes([a2, a1])
    assert canonical_rrset_bytes([a1, a2]).startswith(name_to_wire("www.example."))


def test_canonical_single_record():
    rr = ResourceRecord("Host.Example.", RType.NS, 60, NS("NS.Example."))
    assert canonical_rrset_bytes([rr]) == rr.to_wire(canonical=True)
    assert b"ns" in canonical_rrset_bytes([rr]) and b"NS" not in canonical_rrset_bytes([rr])


def test_canonical_matches_independent_implementation():
    rrs = [ResourceRecord("a.example.", RType.A, 60, A(f"192.0.2.{i}")) for i in (7, 3, 200)]
    ref = dns.rrset.from_text("a.example.", 60, "IN", "A", "192.0.2.7", "192.0.2.3", "192.0.2.200")
    expected = b"".join(
        sorted(
            (ref.name.canonicalize().to_wire() + struct.pack("!HHIH", 1, 1, 60, 4) + rd.to_digestable())
            for rd in ref
        )
    )
    assert canonical_rrset_bytes(rrs) == expected


def test_mixed_rrset():
    a = ResourceRecord("x.example.", RType.A, 60, A("192.0.2.1"))
    aaaa = ResourceRecord("x.example.", RType.AAAA, 60, AAAA("2001:db8::1"))
    with pytest.raises(MixedRrset):
        canonical_rrset_bytes([a, aaaa])


def test_key_tag_of_zero_rdata():
    rr = ResourceRecord("x.", RType.DNSKEY, 60, DNSKEY(0, 0, 0, bytes(12)))
    assert key_tag(rr) == 0


def _loop_tag(rdata: bytes) -> int:
    ac = sum(b << 8 if i % 2 == 0 else b for i, b in enumerate(rdata))
    return (ac + (ac >> 16)) & 0xFFFF


@given(st.integers(0, 0xFFFF), st.integers(1, 255), st.binary(min_size=1, max_size=200))
def test_key_tag_oracles(flags, algorithm, key):
    rd = DNSKEY(flags, 3, algorithm, key)
    ours = key_tag(ResourceRecord("x.", RType.DNSKEY, 60, rd))
    assert ours == _loop_tag(rd.to_wire())
    if algorithm != 1:  # RSAMD5 uses a different tag rule
        ref = dns.rdata.from_wire(dns.rdataclass.IN, dns.rdatatype.DNSKEY, rd.to_wire(), 0, len(rd.to_wire()))
        assert ours == dns.dnssec.key_id(ref)


def test_key_tag_wrong_rtype():
    with pytest.raises(WrongRtype):
        key_tag(ResourceRecord("x.", RType.A, 60, A("192.0.2.1")))
