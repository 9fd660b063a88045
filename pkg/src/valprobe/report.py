"""Text and JSON reports rebuilt purely from artifacts on disk."""

from __future__ import annotations

import csv
import ipaddress
import json
from pathlib import Path

from .classifier import NON_VALIDATOR, VALIDATOR, FeatureVector, read_dataset_csv


class MissingArtifact(FileNotFoundError):
    pass


def read_org_map(path: str | Path) -> list[tuple[ipaddress.IPv4Network | ipaddress.IPv6Network, str]]:
    """CSV with ``cidr,organization`` columns; more specific prefixes win."""
    rows = []
    with Path(path).open(newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].startswith("#") or rec[0].strip().lower() == "cidr":
                continue
            rows.append((ipaddress.ip_network(rec[0].strip(), strict=False), rec[1].strip()))
    rows.sort(key=lambda r: -r[0].prefixlen)
    return rows


def org_of(ip, org_map) -> str:
    ip = ipaddress.ip_address(ip)
    for net, org in org_map:
        if net.version == ip.version and ip in net:
            return org
    return "unknown"


def org_table(rows, org_map, top: int = 10) -> list[dict]:
    """Top organizations by resolver count, with the validator ratio of each."""
    stats: dict[str, list[int]] = {}
    for src, _, cls in rows:
        s = stats.setdefault(org_of(src, org_map), [0, 0])
        s[0] += 1
        s[1] += cls == VALIDATOR
    ordered = sorted(stats.items(), key=lambda kv: (-kv[1][0], kv[0]))[:top]
    return [{"organization": org, "resolvers": n, "validators": v, "validator_ratio": v / n} for org, (n, v) in ordered]


def _load(path: Path) -> dict:
    if not path.is_file():
        raise MissingArtifact(f"missing artifact {path}")
    return json.loads(path.read_text())


def _pattern_lines(patterns: dict, title: str, val_name: str, nonval_name: str) -> list[str]:
    tot_v = sum(c[VALIDATOR] for c in patterns.values())
    tot_n = sum(c[NON_VALIDATOR] for c in patterns.values())
    lines = [title, f"  {'pattern':<28}{val_name:>16}{nonval_name:>20}"]
    for pat, c in sorted(patterns.items(), key=lambda kv: (-sum(kv[1].values()), kv[0])):
        v, n = c[VALIDATOR], c[NON_VALIDATOR]
        lines.append(
            f"  {FeatureVector.from_pattern(pat).describe():<28}"
            f"{v:>8} ({v / tot_v if tot_v else 0:6.1%}){n:>10} ({n / tot_n if tot_n else 0:6.1%})"
        )
    lines.append(f"  {'Total':<28}{tot_v:>8}{'':9}{tot_n:>10}")
    return lines


def render_report(out_dir: str | Path, org_map_path: str | Path | None = None, top: int = 10) -> tuple[str, dict]:
    """Build the report from ``out_dir``.  Nothing under ``out_dir`` is modified."""
    out_dir = Path(out_dir)
    s1_path, s2_path = out_dir / "step1" / "summary.json", out_dir / "step2" / "summary.json"
    if not s1_path.is_file() and not s2_path.is_file():
        raise MissingArtifact(f"no step1 or step2 artifacts under {out_dir}")
    org_map = read_org_map(org_map_path) if org_map_path else None
    summary: dict = {}
    lines: list[str] = []

    if s1_path.is_file():
        s1 = _load(s1_path)
        summary["step1"] = {k: s1[k] for k in ("funnel", "patterns", "metrics") if k in s1}
        f = s1["funnel"]
        lines.append("Step 1: open resolvers")
        for key, name in (
            ("targets", "targets"),
            ("open", "open (seen at observatory)"),
            ("non_forwarders", "non-forwarders"),
            ("consistent_responders", "answered consistently"),
            ("dnssec_enabled", "DNSSEC-enabled"),
            ("labeled", "labeled"),
        ):
            lines.append(f"  {name:<28}{f[key]:>10}")
        lines.append(f"  {'  validators':<28}{f['validators']:>10}")
        lines.append(f"  {'  non-validators':<28}{f['non_validators']:>10}")
        lines.append(f"  {'forwarders':<28}{f['forwarders']:>10}")
        for reason in ("Forwarder", "NoResponse", "NotDnssecEnabled", "MixedRcodes", "FailsNoDs"):
            n = f["excluded"].get(reason, 0)
            lines.append(f"  {'excluded: ' + reason:<28}{n:>10}")
        lines.append("")
        lines += _pattern_lines(s1["patterns"], "Queries seen from labeled open resolvers", "validators", "non-validators")
        if "metrics" in s1:
            m = s1["metrics"]
            lines.append("")
            lines.append("Classifier (held-out split, support-weighted)")
            for key in ("accuracy", "precision", "recall", "f1", "mcc"):
                lines.append(f"  {key:<12}{m[key]:.3f}")
        elif "training_error" in s1:
            lines.append("")
            lines.append(f"Classifier not trained: {s1['training_error']}")
        lines.append("")

    pred_rows = None
    if s2_path.is_file():
        s2 = _load(s2_path)
        summary["step2"] = {k: s2[k] for k in ("closed_scan", "patterns")}
        c = s2["closed_scan"]
        lines.append("Step 2: closed resolvers (forged-source probing, simulation only)")
        for key in ("targets", "open_found", "discovered_closed", "not_dnssec_enabled", "classified"):
            lines.append(f"  {key.replace('_', ' '):<28}{c[key]:>10}")
        lines.append(f"  {'predicted validators':<28}{c['predicted_validators']:>10}  ({c['validator_share']:.1%})")
        lines.append("")
        lines += _pattern_lines(s2["patterns"], "Queries seen from DNSSEC-enabled closed resolvers", "validators", "non-validators")
        lines.append("")
        pred_path = out_dir / "step2" / "predictions.csv"
        if pred_path.is_file():
            pred_rows = read_dataset_csv(pred_path)

    if org_map is not None:
        if pred_rows is not None:
            rows, what = pred_rows, "closed resolvers (predicted)"
        else:
            feats = out_dir / "step1" / "features.csv"
            if not feats.is_file():
                raise MissingArtifact(f"missing artifact {feats}")
            rows, what = read_dataset_csv(feats), "open resolvers (labeled)"
        table = org_table(rows, org_map, top)
        summary["organizations"] = table
        lines.append(f"Organizations, {what}")
        lines.append(f"  {'organization':<30}{'resolvers':>10}{'validators':>12}{'ratio':>8}")
        for r in table:
            lines.append(f"  {r['organization']:<30}{r['resolvers']:>10}{r['validators']:>12}{r['validator_ratio']:>8.1%}")
        lines.append("")

    return "\n".join(lines).rstrip() + "\n", summary
