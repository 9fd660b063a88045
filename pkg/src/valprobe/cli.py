"""valprobe command line.

Exit status: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from pathlib import Path

from . import crypto
from .classifier import (
    SingleClassDataset,
    read_dataset_csv,
    render_tree,
    save_model,
    load_model,
    pattern_count_dataset,
    train,
    write_dataset_csv,
)
from .config import ConfigError, load_config
from .lab import InvalidRecipe
from .observatory import DEFAULT_BASE, DEFAULT_EPOCH, BindFailure, Observatory
from .pipeline import ModelMissing, SimulationOnly, run_simulation, run_step1, run_step2
from .report import MissingArtifact, render_report

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("valprobe")


def _config(args):
    return load_config(
        args.config,
        seed=args.seed,
        out=args.out,
        exclude=getattr(args, "exclude", None),
        org_map=getattr(args, "org_map", None),
    )


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if cfg.mode != "sim":
        raise ConfigError("simulate needs mode = 'sim'")
    run_simulation(cfg)
    text, _ = render_report(cfg.out, cfg.org_map)
    print(text, end="")
    return EXIT_OK


def cmd_step1(args) -> int:
    cfg = _config(args)
    result = run_step1(cfg)
    f = result.summary["funnel"]
    print(f"step 1: {f['validators']} validators, {f['non_validators']} non-validators, model at {result.model_path}")
    return EXIT_OK


def cmd_step2(args) -> int:
    cfg = _config(args)
    result = run_step2(cfg, args.model)
    c = result.summary["closed_scan"]
    print(
        f"step 2: {c['discovered_closed']} closed resolvers discovered, "
        f"{c['predicted_validators']}/{c['classified']} predicted validators ({c['validator_share']:.1%})"
    )
    return EXIT_OK


def cmd_train(args) -> int:
    if args.builtin_counts:
        rows = pattern_count_dataset(include_ipv6=args.ipv6)
    else:
        path = Path(args.features) if args.features else Path(args.out or "out") / "step1" / "features.csv"
        if not path.is_file():
            raise MissingArtifact(f"no dataset at {path}")
        rows = [(fv, label) for _, fv, label in read_dataset_csv(path) if label]
    result = train(rows, seed=args.seed or 0)
    model = Path(args.model) if args.model else Path(args.out or "out") / "model.json"
    model.parent.mkdir(parents=True, exist_ok=True)
    save_model(result.tree, model, {"metrics": result.metrics.to_json(), "train_size": result.train_size, "test_size": result.test_size})
    print(render_tree(result.tree))
    m = result.metrics
    print(f"accuracy={m.accuracy:.3f} precision={m.precision:.3f} recall={m.recall:.3f} f1={m.f1:.3f} mcc={m.mcc:.3f}")
    print(f"model written to {model}")
    return EXIT_OK


def cmd_predict(args) -> int:
    if not args.model or not Path(args.model).is_file():
        raise ModelMissing(f"no model at {args.model}")
    tree = load_model(args.model)
    rows = [(src, fv, tree.predict(fv)) for src, fv, _ in read_dataset_csv(args.features)]
    if args.out:
        write_dataset_csv(rows, args.out)
    else:
        print("src,ds_p,dnskey_p,dnskey_c,label")
        for src, fv, cls in rows:
            print(f"{src},{int(fv.ds_p)},{int(fv.dnskey_p)},{int(fv.dnskey_c)},{cls}")
    return EXIT_OK


def cmd_serve(args) -> int:
    obs = Observatory(args.base, args.epoch, algorithm=crypto.ECDSAP256SHA256, seed=args.seed)
    service = obs.serve_udp(args.bind, args.port, rate_limit=args.rate_limit or None)
    host, port = service.address
    print(f"serving {obs.base} on {host}:{port}", flush=True)
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    stop.wait(args.duration)
    service.stop()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        obs.log.write_jsonl(out / "querylog.jsonl")
        print(f"{len(obs.log)} queries logged to {out / 'querylog.jsonl'}")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg_org = args.org_map
    text, summary = render_report(args.out or "out", cfg_org, args.top)
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="valprobe", description="Detect DNSSEC-validating resolvers from authoritative query logs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=False):
        p.add_argument("--config", help="TOML (or .json) experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--exclude", help="file of CIDRs never to probe")
        p.add_argument("--org-map", dest="org_map", help="CSV mapping CIDR to organization")
        if model:
            p.add_argument("--model", help="model JSON (default: <out>/step1/model.json)")

    p = sub.add_parser("simulate", help="run both steps against a simulated population")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("step1", help="open-resolver enumeration, probing, labeling, training")
    common(p)
    p.set_defaults(func=cmd_step1)

    p = sub.add_parser("step2", help="forged-source closed-resolver scan and classification (simulation only)")
    common(p, model=True)
    p.set_defaults(func=cmd_step2)

    p = sub.add_parser("train", help="train a tree from a features CSV")
    p.add_argument("--features", help="dataset CSV (default: <out>/step1/features.csv)")
    p.add_argument("--builtin-counts", dest="builtin_counts", action="store_true", help="use the built-in published pattern counts")
    p.add_argument("--ipv6", action="store_true", help="with --builtin-counts, include the IPv6 rows")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")
    p.add_argument("--model", help="where to write the model JSON")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify feature rows with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True, help="CSV with src,ds_p,dnskey_p,dnskey_c[,label]")
    p.add_argument("--out", help="write predictions CSV here instead of stdout")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("serve", help="run the authoritative observatory over UDP")
    p.add_argument("--bind", default="127.0.0.1")
    p.add_argument("--port", type=int, default=53)
    p.add_argument("--base", default=DEFAULT_BASE)
    p.add_argument("--epoch", type=int, default=DEFAULT_EPOCH)
    p.add_argument("--seed", type=int, default=None, help="fixed key seed (default: fresh keys)")
    p.add_argument("--rate-limit", dest="rate_limit", type=float, default=500.0, help="queries/s, 0 disables")
    p.add_argument("--duration", type=float, default=None, help="stop after this many seconds")
    p.add_argument("--out", help="directory for querylog.jsonl on exit")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="render tables from existing artifacts")
    p.add_argument("--out", help="artifact directory (default: out)")
    p.add_argument("--org-map", dest="org_map")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--json", action="store_true", help="print the machine-readable summary")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidRecipe) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingleClassDataset, ModelMissing, MissingArtifact, SimulationOnly, BindFailure, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
