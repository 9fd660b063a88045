import ipaddress

import pytest
from hypothesis import given
from hypothesis import strategies as st

from valprobe.lab import Access, Archetype, ResolverSpec, SimNetwork, SimWorld
from valprobe.observatory import sim_observatory
from valprobe.probes import NonceSource
from valprobe.scan import (
    NON_VALIDATOR,
    VALIDATOR,
    ExclusionReason,
    GroundTruthLabel,
    OpenStatus,
    ResponseMatrix,
    ScanRecord,
    ScanTargetSet,
    SimTransport,
    enumerate_open,
    excluded,
    label_from_rcodes,
    neighbor_source,
    probe_validation,
    read_exclusions,
    read_scan_records,
    spoofed_scan,
    write_jsonl,
)
from valprobe.timing import SimClock
from valprobe.wire import Rcode
from valprobe.zones import BOGUS_KINDS, MisconfigKind

BASE = "dnssec-test.example."
ip = ipaddress.ip_address
NOERROR, SERVFAIL = int(Rcode.NOERROR), int(Rcode.SERVFAIL)


def matrix(codes: dict, do_seen=True, forwarded=False):
    m = ResponseMatrix(ip("192.0.2.1"), do_seen=do_seen, forwarded=forwarded)
    for kind in MisconfigKind:
        for c in codes.get(kind, []):
            m.add(kind, c)
    return m


def model(valid=NOERROR, no_ds=NOERROR, bogus=SERVFAIL, n=10):
    codes = {MisconfigKind.VALID: [valid] * n, MisconfigKind.NO_DS: [no_ds] * n}
    codes.update({k: [bogus] * n for k in BOGUS_KINDS})
    return codes


# --- labeling --------------------------------------------------------------


def test_model_validator():
    assert label_from_rcodes(matrix(model())) == VALIDATOR


def test_fails_no_ds():
    assert label_from_rcodes(matrix(model(no_ds=SERVFAIL))) == excluded(ExclusionReason.FAILS_NO_DS)


def test_partial_validation_is_non_validator():
    codes = model()
    codes[MisconfigKind.BAD_DS] = [NOERROR] * 10
    assert label_from_rcodes(matrix(codes)) == NON_VALIDATOR
    assert label_from_rcodes(matrix(model(bogus=NOERROR))) == NON_VALIDATOR


def test_exclusion_rules_in_order():
    codes = model()
    codes[MisconfigKind.NO_KEY] = []
    assert label_from_rcodes(matrix(codes)) == excluded(ExclusionReason.NO_RESPONSE)
    assert label_from_rcodes(matrix(codes, forwarded=True)) == excluded(ExclusionReason.FORWARDER)
    assert label_from_rcodes(matrix(model(), do_seen=False)) == excluded(ExclusionReason.NOT_DNSSEC_ENABLED)
    mixed = model()
    mixed[MisconfigKind.BAD_RRSIG] = [SERVFAIL] * 9 + [NOERROR]
    assert label_from_rcodes(matrix(mixed)) == excluded(ExclusionReason.MIXED_RCODES)
    assert label_from_rcodes(matrix(mixed, do_seen=False)) == excluded(ExclusionReason.NOT_DNSSEC_ENABLED)


rcode_lists = st.lists(st.sampled_from([NOERROR, SERVFAIL, int(Rcode.REFUSED)]), max_size=10)


@given(st.fixed_dictionaries({k: rcode_lists for k in MisconfigKind}), st.booleans(), st.booleans())
def test_labeling_is_total_and_fails_no_ds_is_narrow(codes, do_seen, forwarded):
    label = label_from_rcodes(matrix(codes, do_seen, forwarded))
    assert GroundTruthLabel.parse(str(label)) == label
    if label == excluded(ExclusionReason.FAILS_NO_DS):
        assert all(set(codes[k]) == {SERVFAIL} for k in BOGUS_KINDS)
        assert set(codes[MisconfigKind.NO_DS]) == {SERVFAIL}
    if label == VALIDATOR:
        assert set(codes[MisconfigKind.VALID]) == set(codes[MisconfigKind.NO_DS]) == {NOERROR}


def test_matrix_caps_repeats():
    m = ResponseMatrix(ip("192.0.2.1"))
    for _ in range(10):
        m.add(MisconfigKind.VALID, NOERROR)
    with pytest.raises(ValueError):
        m.add(MisconfigKind.VALID, NOERROR)
    assert ResponseMatrix.from_json(m.to_json()) == m


# --- targets ---------------------------------------------------------------


def test_target_set_dedup_exclusion_and_order(tmp_path):
    excl = tmp_path / "optout.txt"
    excl.write_text("# opt-outs\n10.0.5.0/24\n2001:db8::/32  # docs\n")
    nets = read_exclusions(excl)
    addrs = [f"10.0.{i}.10" for i in range(10)] * 2 + ["2001:db8::1", "2001:db9::1"]
    ts = ScanTargetSet(addrs, seed=4, exclude=nets)
    order = ts.ordered()
    assert len(order) == len(set(order)) == 10
    assert ip("10.0.5.10") not in order and ip("2001:db8::1") not in order
    assert order == ScanTargetSet(list(reversed(addrs)), seed=4, exclude=nets).ordered()
    assert order != sorted(order, key=lambda a: (a.version, a))


# --- step 1 ----------------------------------------------------------------


def small_world(loss_rate=0.0):
    specs = [
        ResolverSpec(ip("10.0.0.10"), Archetype.VALIDATOR),
        ResolverSpec(ip("10.0.1.10"), Archetype.FORWARDER, upstream=ip("10.0.0.10")),
        ResolverSpec(ip("10.0.2.10"), Archetype.ENABLED_NON_VALIDATOR),
        ResolverSpec(ip("10.0.3.10"), Archetype.PLAIN),
        ResolverSpec(ip("10.0.4.10"), Archetype.VALIDATOR, Access.CLOSED, network_id=4),
        ResolverSpec(ip("10.0.5.10"), Archetype.ENABLED_NON_VALIDATOR, Access.CLOSED, network_id=5),
    ]
    nets = [
        SimNetwork(4, ipaddress.ip_network("10.0.4.0/24"), False, [specs[4].address]),
        SimNetwork(5, ipaddress.ip_network("10.0.5.0/24"), True, [specs[5].address]),
    ]
    obs = sim_observatory(BASE, seed=2, clock=SimClock(1_700_000_000))
    return SimWorld(obs, specs, nets, loss_rate=loss_rate, seed=1)


def test_enumerate_open_partition():
    w = small_world()
    got = enumerate_open([r for r in w.resolvers], w.observatory, SimTransport(w))
    assert got == {
        ip("10.0.0.10"): OpenStatus.NON_FORWARDER,
        ip("10.0.1.10"): OpenStatus.FORWARDER,
        ip("10.0.2.10"): OpenStatus.NON_FORWARDER,
        ip("10.0.3.10"): OpenStatus.NON_FORWARDER,
        ip("10.0.4.10"): OpenStatus.UNRESPONSIVE,
        ip("10.0.5.10"): OpenStatus.UNRESPONSIVE,
    }


def test_probe_validation_examples():
    w = small_world()
    t = SimTransport(w)
    m = probe_validation("10.0.0.10", w.observatory, t, NonceSource(1))
    assert m.summary()["valid"] == {"NOERROR": 10} and m.summary()["no-ds"] == {"NOERROR": 10}
    assert all(m.summary()[k.label] == {"SERVFAIL": 10} for k in BOGUS_KINDS)
    assert m.do_seen and label_from_rcodes(m) == VALIDATOR
    m = probe_validation("10.0.2.10", w.observatory, t, NonceSource(2))
    assert sum(len(v) for v in m.rcodes.values()) == 80 and {c for v in m.rcodes.values() for c in v} == {NOERROR}
    assert m.do_seen and label_from_rcodes(m) == NON_VALIDATOR
    m = probe_validation("10.0.3.10", w.observatory, t, NonceSource(3))
    assert not m.do_seen and label_from_rcodes(m) == excluded(ExclusionReason.NOT_DNSSEC_ENABLED)
    m = probe_validation("10.0.1.10", w.observatory, t, NonceSource(4))
    assert m.forwarded and label_from_rcodes(m) == excluded(ExclusionReason.FORWARDER)


def test_probe_pacing_respects_rate():
    w = small_world()
    t0 = w.clock.now()
    probe_validation("10.0.2.10", w.observatory, SimTransport(w), NonceSource(5), rate_limit=100)
    assert w.clock.now() - t0 >= 79 / 100


def test_loss_produces_no_response_at_expected_rate():
    # p = 0.6: each kind is silent with probability p^10 ~ 0.006; over 8 kinds ~ 0.048
    w = small_world(loss_rate=0.6)
    t = SimTransport(w)
    n, missing = 300, 0
    for i in range(n):
        m = probe_validation("10.0.2.10", w.observatory, t, NonceSource(i))
        missing += label_from_rcodes(m) == excluded(ExclusionReason.NO_RESPONSE)
    p = 1 - (1 - 0.6**10) ** 8
    sigma = (n * p * (1 - p)) ** 0.5
    assert abs(missing - n * p) <= 3 * sigma


# --- step 2 ----------------------------------------------------------------


def test_spoofed_scan_finds_only_sav_off_closed():
    w = small_world()
    res = spoofed_scan(list(w.resolvers), w.observatory, w)
    assert res.discovered == {ip("10.0.4.10")}
    assert ip("10.0.0.10") in res.open_found and ip("10.0.1.10") in res.open_found
    fv_src = {e.src for e in w.observatory.log.since(res.log_mark, res.log_end)}
    assert "10.0.4.10" in fv_src and "10.0.5.10" not in fv_src


def test_spoofed_scan_is_simulation_only():
    with pytest.raises(TypeError):
        spoofed_scan(["10.0.0.1"], sim_observatory(BASE), world=object())


@pytest.mark.parametrize(
    "target,neighbor",
    [("10.0.0.10", "10.0.0.11"), ("10.0.0.254", "10.0.0.253"), ("2001:db8::10", "2001:db8::11")],
)
def test_neighbor_source(target, neighbor):
    assert neighbor_source(target) == ip(neighbor)


@given(st.integers(1, 2**32 - 2))
def test_neighbor_stays_in_prefix(n):
    t = ipaddress.IPv4Address(n)
    net = ipaddress.ip_network(f"{t}/24", strict=False)
    if t in (net.network_address, net.broadcast_address):
        return
    s = neighbor_source(t)
    assert s != t and s in net and abs(int(s) - int(t)) == 1


def test_scan_records_jsonl(tmp_path):
    recs = [
        ScanRecord(ip("10.0.0.10"), OpenStatus.NON_FORWARDER, VALIDATOR, matrix(model())),
        ScanRecord(ip("10.0.1.10"), OpenStatus.FORWARDER, excluded(ExclusionReason.FORWARDER)),
        ScanRecord(ip("10.0.9.10"), OpenStatus.UNRESPONSIVE),
    ]
    path = write_jsonl(recs, tmp_path / "scan.jsonl")
    back = read_scan_records(path)
    assert [(r.ip, r.status, r.label) for r in back] == [(r.ip, r.status, r.label) for r in recs]
