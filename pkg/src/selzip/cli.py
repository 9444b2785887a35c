"""selzip command line.

    selzip gen     --preset mixed --items 200 --seed 1 --out corpus/
    selzip train   --manifest corpus/manifest.jsonl --out models.json
    selzip oracle  --manifest corpus/manifest.jsonl --models models.json --out run/
    selzip run     --models models.json --out run/ --mbps 2 5 10
    selzip report  --out run/
    selzip serve   --port 8080 --models models.json
    selzip decide  --url http://127.0.0.1:8080 --size 100000 --label text --mbps 2
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import urllib.error
import urllib.request

from . import harness
from .harness import ALL_POLICIES, ExperimentConfig
from .policy import DEFAULT_EXCLUDED, DEFAULT_MIN_SIZE, DEFAULT_THROUGHPUT, PolicyConfig, mbps_to_bps


def _experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", default="", help="corpus manifest (JSON lines)")
    p.add_argument("--models", default="", help="model set JSON from `selzip train`")
    p.add_argument("--measurements", default="", help="dual-measurement log (default: <out>/measurements.jsonl)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--mbps", type=float, nargs="+", default=[2.0, 5.0, 10.0], help="link levels in Mbps")
    p.add_argument("--dynamic", action="store_true", help="epoch schedule instead of fixed links")
    p.add_argument("--partitions", type=int, default=4)
    p.add_argument("--schedule", default="", help="explicit schedule JSON (implies --dynamic)")
    p.add_argument("--policies", nargs="+", default=list(ALL_POLICIES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--decay", type=float, default=0.05, help="EWMA weight of the newest throughput sample")
    p.add_argument("--prior-mbps", type=float, default=DEFAULT_THROUGHPUT / 125_000)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--min-size", type=int, default=DEFAULT_MIN_SIZE)
    p.add_argument("--exclude", nargs="*", default=sorted(DEFAULT_EXCLUDED), help="labels never compressed")
    p.add_argument("--rtt", type=float, default=0.0)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--dataset", default="")
    p.add_argument("--live", default="", metavar="URL", help="send through a running server instead of the analytic link")
    p.add_argument("--repeats", type=int, default=3)


def _config(args) -> ExperimentConfig:
    return ExperimentConfig(
        manifest=args.manifest, models=args.models, measurements=args.measurements, out=args.out,
        mbps=list(args.mbps), dynamic=args.dynamic or bool(args.schedule), partitions=args.partitions,
        schedule=args.schedule, policies=list(args.policies), seed=args.seed, decay=args.decay,
        prior_bps=mbps_to_bps(args.prior_mbps), warmup=args.warmup, min_size_bytes=args.min_size,
        excluded_labels=sorted(args.exclude), rtt=args.rtt, jitter=args.jitter, dataset=args.dataset,
        live_url=args.live, repeats=args.repeats,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selzip", description="Selective compression decision engine and harness")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="synthesize a corpus")
    p.add_argument("--preset", choices=["mixed", "text", "random", "tiny"], default="mixed")
    p.add_argument("--items", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spec", default="", help="CorpusSpec JSON instead of a preset")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="fit per-type models on a corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="model set JSON to write")
    p.add_argument("--repeats", type=int, default=3)

    _experiment_args(sub.add_parser("oracle", help="dual-measurement pass enabling the time oracle"))
    _experiment_args(sub.add_parser("run", help="run policies and write reports"))

    p = sub.add_parser("report", help="rebuild reports from a run directory")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--to", default="", help="write reports here instead")

    p = sub.add_parser("serve", help="run the cloud endpoint")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--models", default="")
    p.add_argument("--min-size", type=int, default=DEFAULT_MIN_SIZE)
    p.add_argument("--exclude", nargs="*", default=sorted(DEFAULT_EXCLUDED))

    p = sub.add_parser("decide", help="ask a running server for a decision")
    p.add_argument("--url", default="http://127.0.0.1:8080")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--mbps", type=float, required=True)
    return parser


def _decide_remote(args) -> dict:
    body = json.dumps({"size": args.size, "label": args.label, "throughput_mbps": args.mbps}).encode()
    req = urllib.request.Request(args.url.rstrip("/") + "/decide", data=body,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        raise harness.HarnessError(f"server answered {exc.code}: {exc.read().decode(errors='replace')}") from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gen":
            spec = None
            if args.spec:
                from .corpus import CorpusSpec

                with open(args.spec) as fh:
                    spec = CorpusSpec.from_dict(json.load(fh))
            path = harness.cmd_gen(args.out, args.preset, args.items, args.seed, spec)
            print(path)
        elif args.command == "train":
            print(harness.cmd_train(args.manifest, args.out, args.repeats))
        elif args.command == "oracle":
            print(harness.cmd_oracle(_config(args)))
        elif args.command == "run":
            config = _config(args)
            harness.cmd_run(config)
            print(f"{config.out}/{harness.REPORT_CSV}")
        elif args.command == "report":
            harness.cmd_report(args.out, args.to or None)
            print(f"{args.to or args.out}/{harness.REPORT_CSV}")
        elif args.command == "serve":
            from .server import serve
            from .training import ModelSet

            models = ModelSet.load(args.models) if args.models else None
            serve(args.host, args.port, models, PolicyConfig(args.min_size, frozenset(args.exclude)))
        elif args.command == "decide":
            print(json.dumps(_decide_remote(args)))
    except (harness.HarnessError, OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
