import json
import socket
import threading

import dns.flags
import dns.message
import dns.query
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from valprobe.observatory import (
    BindFailure,
    Observatory,
    QueryLog,
    QueryLogEntry,
    Transport,
    ZoneLevel,
    read_query_log,
    sim_observatory,
)
from valprobe.probes import encode_probe_name
from valprobe.timing import SimClock
from valprobe.wire import CLASS_IN, DnsMessage, Question, Rcode, RType, decode, encode, make_query
from valprobe.zones import MisconfigKind

BASE = "dnssec-test.example."


@pytest.fixture(scope="module")
def obs():
    return sim_observatory(BASE, 1_700_000_000, seed=3)


def probe(kind=MisconfigKind.VALID, target="198.51.100.7", nonce="00c0ffee"):
    return encode_probe_name(target, nonce, kind, BASE)


def types(section):
    return [rr.rtype for rr in section]


def all_types(msg):
    return set(types(msg.answers) + types(msg.authority) + types(msg.additional))


def test_signed_answer_with_do(obs):
    r = obs.answer_query(make_query(probe(), do_bit=True), "198.51.100.7")
    assert r.rcode == Rcode.NOERROR and r.qr and r.aa
    assert types(r.answers) == [RType.A, RType.RRSIG]
    assert r.answers[1].rdata.type_covered == RType.A


def test_no_dnssec_records_without_do(obs):
    r = obs.answer_query(make_query(probe(), do_bit=False))
    assert r.rcode == Rcode.NOERROR and types(r.answers) == [RType.A]
    for qname, qtype in [
        (BASE, RType.DNSKEY),
        ("valid." + BASE, RType.DNSKEY),
        ("valid." + BASE, RType.DS),
        (probe(), RType.A),
        ("nope.valid." + BASE, RType.A),
        ("nope." + BASE, RType.A),
    ]:
        for edns in (False, None):
            r = obs.answer_query(make_query(qname, qtype, do_bit=edns))
            assert not all_types(r) & {RType.RRSIG, RType.NSEC}
            if qtype != RType.DNSKEY:
                assert RType.DNSKEY not in all_types(r)


def test_dnskey_only_when_asked(obs):
    for kind in MisconfigKind:
        for qname in (probe(kind), obs.child_apex(kind), BASE):
            r = obs.answer_query(make_query(qname, RType.A, do_bit=True))
            assert RType.DNSKEY not in all_types(r)


def test_no_key_variant_lacks_zsk(obs):
    r = obs.answer_query(make_query(obs.child_apex(MisconfigKind.NO_KEY), RType.DNSKEY, do_bit=True))
    keys = [rr.rdata.flags for rr in r.answers if rr.rtype == RType.DNSKEY]
    assert keys == [257]
    r = obs.answer_query(make_query(obs.child_apex(MisconfigKind.VALID), RType.DNSKEY, do_bit=True))
    assert sorted(rr.rdata.flags for rr in r.answers if rr.rtype == RType.DNSKEY) == [256, 257]


def test_parent_referral_carries_ds(obs):
    r = obs.answer_query(make_query(probe(), do_bit=True), level=ZoneLevel.PARENT)
    assert r.rcode == Rcode.NOERROR and not r.aa and r.answers == ()
    assert types(r.authority) == [RType.NS, RType.DS, RType.RRSIG]
    assert r.additional and r.additional[0].rtype == RType.A


def test_no_ds_referral_proves_absence(obs):
    r = obs.answer_query(make_query(probe(MisconfigKind.NO_DS), do_bit=True), level=ZoneLevel.PARENT)
    assert types(r.authority) == [RType.NS, RType.NSEC, RType.RRSIG]
    assert RType.DS not in r.authority[1].rdata.types
    r = obs.answer_query(make_query(obs.child_apex(MisconfigKind.NO_DS), RType.DS, do_bit=True))
    assert r.rcode == Rcode.NOERROR and r.answers == ()
    assert {RType.SOA, RType.NSEC} <= set(types(r.authority))


def test_explicit_ds_query_goes_to_parent(obs):
    apex = obs.child_apex(MisconfigKind.VALID)
    assert obs.infer_level(apex, RType.DS) is ZoneLevel.PARENT
    assert obs.infer_level(apex, RType.DNSKEY) is ZoneLevel.CHILD
    assert obs.infer_level(BASE, RType.DNSKEY) is ZoneLevel.PARENT
    r = obs.answer_query(make_query(apex, RType.DS, do_bit=True))
    assert r.aa and types(r.answers) == [RType.DS, RType.RRSIG]


def test_nxdomain_with_nsec(obs):
    for qname in ("nothing." + BASE, "zzz." + BASE, "x.y.valid." + BASE):
        r = obs.answer_query(make_query(qname, do_bit=True))
        assert r.rcode == Rcode.NXDOMAIN
        assert RType.NSEC in types(r.authority)
        r = obs.answer_query(make_query(qname, do_bit=False))
        assert r.rcode == Rcode.NXDOMAIN and RType.NSEC not in types(r.authority)


def test_out_of_zone_refused_and_not_logged(obs):
    before = len(obs.log)
    r = obs.answer_query(make_query("www.example.com.", do_bit=True))
    assert r.rcode == Rcode.REFUSED
    assert len(obs.log) == before


def test_malformed_queries(obs):
    assert obs.answer_query(DnsMessage(id=1)).rcode == Rcode.FORMERR
    assert obs.answer_query(DnsMessage(id=1, qr=True, question=Question(BASE, RType.A))).rcode == Rcode.FORMERR
    assert obs.answer_query(DnsMessage(id=1, question=Question(BASE, RType.A, 3))).rcode == Rcode.REFUSED


def test_logged_before_reply_released():
    o = sim_observatory(BASE, seed=1)
    seen = []
    orig = o.log.append

    def spy(entry):
        seen.append(entry)
        return orig(entry)

    o.log.append = spy
    r = o.answer_query(make_query(probe(), do_bit=True), "192.0.2.9")
    assert r.rcode == Rcode.NOERROR and len(seen) == 1 and seen[0].src == "192.0.2.9"


def test_queries_for_and_windows():
    o = sim_observatory(BASE, seed=1, clock=SimClock(1000))
    src = "203.0.113.5"
    apex = o.child_apex(MisconfigKind.VALID)
    t0 = o.clock.now_us()
    for qname, qtype in ((probe(), RType.A), (apex, RType.DNSKEY), (apex, RType.DS), (BASE, RType.DNSKEY)):
        o.answer_query(make_query(qname, qtype, do_bit=True), src)
    t1 = o.clock.now_us() + 1
    got = o.queries_for(src, t0, t1)
    assert [(e.qtype, e.zone) for e in got] == [
        (RType.A, ZoneLevel.CHILD),
        (RType.DNSKEY, ZoneLevel.CHILD),
        (RType.DS, ZoneLevel.PARENT),
        (RType.DNSKEY, ZoneLevel.PARENT),
    ]
    assert [e.ts_us for e in got] == sorted(e.ts_us for e in got)
    assert o.queries_for("192.0.2.200") == []
    assert o.queries_for(src, t1, t1 + 100) == []


names = st.sampled_from(
    [BASE, "ns1." + BASE, "nothing." + BASE]
    + [f"valid.{BASE}", f"no-ds.{BASE}", f"bad-key.{BASE}", f"x.exp-rrsig.{BASE}", probe(MisconfigKind.NO_RRSIG)]
)
qtypes = st.sampled_from([RType.A, RType.DS, RType.DNSKEY, RType.NS, RType.SOA, RType.TXT])


@settings(max_examples=200)
@given(names, qtypes, st.booleans())
def test_zone_level_consistent_with_suffix(obs, qname, qtype, do):
    r = obs.answer_query(make_query(qname, qtype, do_bit=do), "192.0.2.50")
    entry = obs.log.snapshot()[-1]
    kind = obs.child_for(qname)
    under_child = kind is not None and not (qtype == RType.DS and entry.qname == obs.child_apex(kind))
    assert entry.zone is (ZoneLevel.CHILD if under_child else ZoneLevel.PARENT)
    assert r.rcode in (Rcode.NOERROR, Rcode.NXDOMAIN)
    assert encode(r) and decode(encode(r)) == r


def test_log_jsonl_fields(tmp_path, obs):
    path = obs.log.write_jsonl(tmp_path / "q.jsonl")
    lines = path.read_text().splitlines()
    assert len(lines) == len(obs.log)
    first = json.loads(lines[0])
    assert list(first) == ["ts_us", "src", "qname", "qtype", "do", "zone", "transport"]
    assert read_query_log(path) == list(obs.log.snapshot())


def test_log_is_append_only_and_ordered():
    log = QueryLog()
    e = QueryLogEntry(5, "192.0.2.1", BASE, RType.A, True, ZoneLevel.PARENT, Transport.SIM)
    for _ in range(3):
        log.append(e)
    assert [x.ts_us for x in log] == [5, 6, 7]
    mark = log.mark()
    log.append(e)
    assert len(log.since(mark)) == 1


# --- UDP -------------------------------------------------------------------


@pytest.fixture(scope="module")
def udp_obs():
    o = Observatory(BASE, 1_700_000_000, seed=11)
    with o.serve_udp("127.0.0.1", 0, rate_limit=None) as svc:
        yield o, svc


def test_udp_stub_client(udp_obs):
    o, svc = udp_obs
    host, port = svc.address
    q = dns.message.make_query(probe(), "A", want_dnssec=True)
    r = dns.query.udp(q, host, port=port, timeout=2)
    assert r.rcode() == 0 and r.flags & dns.flags.AA
    assert {rrset.rdtype for rrset in r.answer} == {1, 46}
    entry = o.log.snapshot()[-1]
    assert entry.transport is Transport.UDP and entry.src == "127.0.0.1" and entry.do


def test_udp_garbage_dropped(udp_obs):
    o, svc = udp_obs
    before = len(o.log)
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as s:
        s.settimeout(0.3)
        for junk in (b"", b"\x00", b"\xff" * 40, bytes(range(256))):
            s.sendto(junk, svc.address)
        with pytest.raises(socket.timeout):
            s.recvfrom(4096)
        s.settimeout(2)
        s.sendto(encode(make_query(probe(), msg_id=77, do_bit=True)), svc.address)
        data, _ = s.recvfrom(4096)
    assert decode(data).id == 77
    assert len(o.log) == before + 1


def test_udp_concurrent_load(udp_obs):
    o, svc = udp_obs
    before = len(o.log)
    n_threads, per_thread = 20, 50
    answered = []
    lock = threading.Lock()

    def worker(t):
        got = 0
        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as s:
            s.settimeout(5)
            for i in range(per_thread):
                q = make_query(probe(target=f"10.{t}.{i}.1", nonce=f"{t * 1000 + i:08x}"), msg_id=i, do_bit=True)
                s.sendto(encode(q), svc.address)
                data, _ = s.recvfrom(4096)
                got += decode(data).rcode == Rcode.NOERROR
        with lock:
            answered.append(got)

    threads = [threading.Thread(target=worker, args=(t,)) for t in range(n_threads)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sum(answered) == 1000
    assert len(o.log) - before == 1000


def test_udp_rate_limit_drops_excess():
    o = sim_observatory(BASE, seed=2)
    with o.serve_udp("127.0.0.1", 0, rate_limit=5) as svc, socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as s:
        s.settimeout(0.3)
        for i in range(30):
            s.sendto(encode(make_query(probe(nonce=f"{i:08x}"), msg_id=i)), svc.address)
        replies = 0
        try:
            while True:
                s.recvfrom(4096)
                replies += 1
        except socket.timeout:
            pass
    assert 1 <= replies <= 7


def test_bind_failure(udp_obs):
    _, svc = udp_obs
    with pytest.raises(BindFailure):
        Observatory(BASE, seed=11).serve_udp(*svc.address)


def test_udp_class_preserved_in_question(udp_obs):
    o, svc = udp_obs
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as s:
        s.settimeout(2)
        s.sendto(encode(make_query("www.example.com.", msg_id=9)), svc.address)
        r = decode(s.recvfrom(4096)[0])
    assert r.rcode == Rcode.REFUSED and r.question.qclass == CLASS_IN
