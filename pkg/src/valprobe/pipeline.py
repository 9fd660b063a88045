"""Step 1 and Step 2 end to end, with every intermediate artifact on disk.

Artifact layout under the output directory::

    step1/scan.jsonl       one line per target: status, label, rcode summary
    step1/features.csv     labeled rows (src,ds_p,dnskey_p,dnskey_c,label)
    step1/model.json       trained tree plus its held-out metrics
    step1/querylog.jsonl   observatory log of the pass
    step1/summary.json     funnel counts, pattern table, metrics
    step2/predictions.csv  discovered closed resolvers with predicted class
    step2/querylog.jsonl
    step2/summary.json
"""

from __future__ import annotations

import ipaddress
import json
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from . import crypto
from .classifier import (
    NON_VALIDATOR,
    VALIDATOR,
    FeatureVector,
    SingleClassDataset,
    extract_features,
    load_model,
    save_model,
    train,
    write_dataset_csv,
)
from .config import ExperimentConfig
from .lab import Access, Population, SimWorld, expected_label, populate
from .observatory import Observatory
from .probes import NonceSource
from .scan import (
    ExclusionReason,
    Label,
    OpenStatus,
    ScanRecord,
    ScanTargetSet,
    SimTransport,
    UdpTransport,
    enumerate_open,
    entries_by_source,
    label_from_rcodes,
    probe_validation,
    read_exclusions,
    spoofed_scan,
    write_jsonl,
)
from .timing import SimClock

log = logging.getLogger(__name__)


class ModelMissing(FileNotFoundError):
    pass


class SimulationOnly(RuntimeError):
    pass


def _dump(doc, path: Path) -> Path:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


@dataclass
class SimEnvironment:
    observatory: Observatory
    population: Population
    world: SimWorld


def build_sim(config: ExperimentConfig) -> SimEnvironment:
    clock = SimClock(config.epoch)
    obs = Observatory(config.base, config.epoch, algorithm=crypto.KEYED_DIGEST, seed=config.seed, clock=clock)
    population = populate(config.recipe, seed=config.seed)
    return SimEnvironment(obs, population, population.world(obs, seed=config.seed))


def _targets(config: ExperimentConfig, addresses) -> ScanTargetSet:
    exclude = read_exclusions(config.exclude) if config.exclude else ()
    return ScanTargetSet(list(addresses), seed=config.seed, rate_limit=config.rate_limit, exclude=exclude)


# ---------------------------------------------------------------------------
# Step 1
# ---------------------------------------------------------------------------


@dataclass
class Step1Result:
    records: list[ScanRecord]
    features: dict[ipaddress.IPv4Address | ipaddress.IPv6Address, FeatureVector]
    summary: dict
    model_path: Path | None


def funnel(records: list[ScanRecord]) -> dict:
    """Stage counts; each stage drops exactly the exclusion reasons listed under it."""
    reasons = Counter(r.label.reason.value for r in records if r.label is not None and r.label.excluded)
    statuses = Counter(r.status for r in records)
    labels = Counter(r.label.label for r in records if r.label is not None)
    targets = len(records)
    open_ = targets - statuses[OpenStatus.UNRESPONSIVE]
    non_fwd = statuses[OpenStatus.NON_FORWARDER]
    probed = non_fwd - reasons[ExclusionReason.FORWARDER.value] - reasons[ExclusionReason.NO_RESPONSE.value]
    enabled = probed - reasons[ExclusionReason.NOT_DNSSEC_ENABLED.value]
    labeled = enabled - reasons[ExclusionReason.MIXED_RCODES.value] - reasons[ExclusionReason.FAILS_NO_DS.value]
    return {
        "targets": targets,
        "open": open_,
        "forwarders": statuses[OpenStatus.FORWARDER],
        "non_forwarders": non_fwd,
        "consistent_responders": probed,
        "dnssec_enabled": enabled,
        "labeled": labeled,
        "validators": labels[Label.VALIDATOR],
        "non_validators": labels[Label.NON_VALIDATOR],
        "excluded": {r.value: reasons[r.value] for r in ExclusionReason},
    }


def pattern_table(rows) -> dict[str, dict[str, int]]:
    """pattern -> {class: count} over (FeatureVector, class) rows."""
    table: dict[str, dict[str, int]] = {}
    for fv, cls in rows:
        counts = table.setdefault(fv.pattern, {VALIDATOR: 0, NON_VALIDATOR: 0})
        counts[cls] += 1
    return dict(sorted(table.items(), key=lambda kv: -sum(kv[1].values())))


def run_step1(config: ExperimentConfig, env: SimEnvironment | None = None) -> Step1Result:
    out = Path(config.out) / "step1"
    out.mkdir(parents=True, exist_ok=True)
    if config.mode == "udp":
        return _run_step1_udp(config, out)
    env = env or build_sim(config)
    env.world.begin_pass()
    transport = SimTransport(env.world)
    return _step1(config, out, env.observatory, transport, [r.address for r in env.population.resolvers], env)


def _run_step1_udp(config: ExperimentConfig, out: Path) -> Step1Result:
    obs = Observatory(config.base, config.epoch, algorithm=crypto.ECDSAP256SHA256, seed=None)
    udp = config.udp
    service = obs.serve_udp(udp.bind, udp.port, rate_limit=udp.rate_limit)
    try:
        transport = UdpTransport(port=udp.target_port, timeout=udp.timeout)
        cfg = ExperimentConfig(**{**config.__dict__, "rate_limit": udp.rate_limit})
        return _step1(cfg, out, obs, transport, udp.targets, None, settle=udp.settle)
    finally:
        service.stop()


def _step1(config, out, obs, transport, addresses, env, settle: float = 0.0) -> Step1Result:
    targets = _targets(config, addresses)
    mark = obs.log.mark()
    statuses = enumerate_open(targets, obs, transport, NonceSource(f"enum:{config.seed}"), settle=settle)
    records: list[ScanRecord] = []
    nonces = NonceSource(f"probe:{config.seed}")
    for ip, status in statuses.items():
        rec = ScanRecord(ip, status)
        if status is OpenStatus.NON_FORWARDER:
            matrix = probe_validation(ip, obs, transport, nonces, rate_limit=targets.rate_limit, settle=settle)
            rec.matrix = matrix
            rec.label = label_from_rcodes(matrix)
        records.append(rec)
    end = obs.log.mark()
    by_src = entries_by_source(obs.log.since(mark, end))
    features = {
        r.ip: extract_features(by_src.get(str(r.ip), ()), obs.base)
        for r in records
        if r.label is not None and not r.label.excluded
    }
    records.sort(key=lambda r: (r.ip.version, r.ip))

    write_jsonl(records, out / "scan.jsonl")
    rows = [(str(r.ip), features[r.ip], r.label.label.value) for r in records if r.ip in features]
    write_dataset_csv(rows, out / "features.csv")
    _write_log(obs, mark, end, out / "querylog.jsonl")

    summary = {"mode": config.mode, "seed": config.seed, "funnel": funnel(records)}
    labeled = [(fv, label) for _, fv, label in rows]
    summary["patterns"] = pattern_table(labeled)
    if env is not None:
        summary["ground_truth"] = _step1_truth(records, env)
    model_path = None
    try:
        result = train(labeled, seed=config.seed)
    except SingleClassDataset as exc:
        summary["training_error"] = str(exc)
        _dump(summary, out / "summary.json")
        raise
    model_path = save_model(
        result.tree,
        out / "model.json",
        {"metrics": result.metrics.to_json(), "train_size": result.train_size, "test_size": result.test_size},
    )
    summary["metrics"] = result.metrics.to_json()
    _dump(summary, out / "summary.json")
    return Step1Result(records, features, summary, model_path)


def _write_log(obs: Observatory, mark: int, end: int, path: Path) -> None:
    with path.open("w") as fh:
        for e in obs.log.since(mark, end):
            fh.write(json.dumps(e.to_json(), separators=(",", ":")) + "\n")


def _step1_truth(records: list[ScanRecord], env: SimEnvironment) -> dict:
    """Compare labels with the configuration each simulated resolver was given."""
    specs = {r.address: r for r in env.population.resolvers}
    checked = agree = 0
    closed_unresponsive = forwarders_ok = 0
    for rec in records:
        spec = specs[rec.ip]
        if spec.access is Access.CLOSED:
            closed_unresponsive += rec.status is OpenStatus.UNRESPONSIVE
            continue
        if rec.status is OpenStatus.FORWARDER:
            forwarders_ok += spec.upstream is not None
        if rec.label is not None:
            checked += 1
            agree += str(rec.label) == expected_label(spec)
    return {
        "open_non_forwarders_checked": checked,
        "label_agreement": agree,
        "closed": sum(1 for s in specs.values() if s.access is Access.CLOSED),
        "closed_unresponsive": closed_unresponsive,
        "forwarders_true": sum(1 for s in specs.values() if s.upstream is not None and s.access is Access.OPEN),
        "forwarders_detected": forwarders_ok,
    }


# ---------------------------------------------------------------------------
# Step 2
# ---------------------------------------------------------------------------


@dataclass
class Step2Result:
    predictions: dict
    features: dict
    summary: dict


def run_step2(config: ExperimentConfig, model_path: str | Path | None = None, env: SimEnvironment | None = None) -> Step2Result:
    if config.mode != "sim":
        raise SimulationOnly("forged-source probing is implemented for simulation only")
    model_path = Path(model_path) if model_path else Path(config.out) / "step1" / "model.json"
    if not model_path.is_file():
        raise ModelMissing(f"no model at {model_path}; run step1 or train first")
    tree = load_model(model_path)
    out = Path(config.out) / "step2"
    out.mkdir(parents=True, exist_ok=True)
    env = env or build_sim(config)
    env.world.begin_pass()
    obs = env.observatory
    targets = _targets(config, [r.address for r in env.population.resolvers])
    scan = spoofed_scan(targets, obs, env.world, NonceSource(f"spoof:{config.seed}"))
    by_src = entries_by_source(obs.log.since(scan.log_mark, scan.log_end))

    features, predictions, not_enabled = {}, {}, []
    for ip in sorted(scan.discovered - scan.relayed, key=lambda a: (a.version, a)):
        entries = by_src.get(str(ip), ())
        if not any(e.do for e in entries):
            not_enabled.append(ip)
            continue
        fv = extract_features(entries, obs.base)
        features[ip] = fv
        predictions[ip] = tree.predict(fv)
    write_dataset_csv([(str(ip), features[ip], predictions[ip]) for ip in predictions], out / "predictions.csv")
    _write_log(obs, scan.log_mark, scan.log_end, out / "querylog.jsonl")

    n_pred = len(predictions)
    n_val = sum(1 for c in predictions.values() if c == VALIDATOR)
    summary = {
        "mode": config.mode,
        "seed": config.seed,
        "closed_scan": {
            "targets": len(targets.ordered()),
            "open_found": len(scan.open_found),
            "discovered_closed": len(scan.discovered),
            "closed_forwarders": len(scan.relayed),
            "not_dnssec_enabled": len(not_enabled),
            "classified": n_pred,
            "predicted_validators": n_val,
            "predicted_non_validators": n_pred - n_val,
            "validator_share": n_val / n_pred if n_pred else 0.0,
        },
        "patterns": pattern_table((features[ip], predictions[ip]) for ip in predictions),
        "ground_truth": _step2_truth(env, scan.discovered, predictions),
    }
    _dump(summary, out / "summary.json")
    return Step2Result(predictions, features, summary)


def _step2_truth(env: SimEnvironment, discovered, predictions) -> dict:
    specs = {r.address: r for r in env.population.resolvers}
    reachable = {
        r.address
        for r in env.population.resolvers
        if r.access is Access.CLOSED and not env.world.network_of(r).sav_inbound
    }
    truth = {ip: expected_label(specs[ip]) for ip in predictions}
    agree = sum(1 for ip, c in predictions.items() if truth[ip] == c)
    true_val = sum(1 for t in truth.values() if t == VALIDATOR)
    return {
        "closed_sav_off": len(reachable),
        "discovered_equals_sav_off_closed": set(discovered) == reachable,
        "true_validators": true_val,
        "true_validator_share": true_val / len(truth) if truth else 0.0,
        "agreement": agree / len(predictions) if predictions else 1.0,
    }


def run_simulation(config: ExperimentConfig) -> tuple[Step1Result, Step2Result]:
    env = build_sim(config)
    s1 = run_step1(config, env)
    s2 = run_step2(config, s1.model_path, env)
    return s1, s2
