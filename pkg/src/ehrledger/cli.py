"""Command-line entry points: ``bench``, ``net`` and ``tx``.

The network is in-process, so ``net init`` writes a journal (config plus the
ops executed so far) and every ``tx`` call rebuilds the network by replaying
it. Replay is exact because all randomness derives from the config seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import bench
from .chaincode import QUERY_FUNCTIONS, PublicRecordView
from .errors import LedgerError
from .network import NetworkConfig, init_network, parse_script, query, run_workload, submit_proposal

RESULTS_ENV = "EHRLEDGER_RESULTS_DIR"
DEFAULT_STATE = "network-journal.json"

TX_OPS = ("create", "read", "read-private", "update", "delete")


def _results_path(name: str) -> Path:
    return Path(os.environ.get(RESULTS_ENV, ".")) / name


def _int_list(text: str) -> list[int]:
    try:
        return [int(v.replace("_", "")) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _json_out(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


# -- bench -------------------------------------------------------------------

def cmd_bench_run(args) -> int:
    volumes = list(args.volumes)
    if args.include_million and 1_000_000 not in volumes:
        volumes.append(1_000_000)
    plan = bench.BenchPlan(targets=frozenset(args.targets), volumes=tuple(volumes),
                           reads_per_volume=args.reads, seed=args.seed)
    progress = (lambda msg: print(msg, file=sys.stderr)) if not args.quiet else None
    results = bench.run_bench(plan, progress)
    csv_text, summary = bench.report(results)
    out = Path(args.out) if args.out else _results_path("results.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(csv_text)
    print(f"wrote {len(results)} rows to {out}")
    print(bench.format_summary(summary))
    return 0


def cmd_bench_report(args) -> int:
    path = Path(args.infile) if args.infile else _results_path("results.csv")
    results = bench.from_csv(path.read_text())
    csv_text, summary = bench.report(results, include_reference=args.paper_ref)
    if args.json:
        _json_out(summary)
    else:
        sys.stdout.write(csv_text)
        print(bench.format_summary(summary))
    return 0


# -- net / tx ----------------------------------------------------------------

def _state_path(args) -> Path:
    return Path(args.state) if args.state else _results_path(DEFAULT_STATE)


def _load_journal(path: Path):
    if not path.exists():
        raise LedgerError(f"no network at {path}; run 'net init' first")
    journal = json.loads(path.read_text())
    config = NetworkConfig.from_json(journal["config"])
    return journal, config


def _replay(config: NetworkConfig, ops: list[dict]):
    net = init_network(config)
    for op in ops:
        try:
            _execute(net, op)
        except (LedgerError, ValueError, KeyError):
            pass
    return net


def _execute(net, op: dict):
    """Run one op to completion: writes are ordered and committed immediately."""
    name, client, args = op["op"], op["client"], op.get("args", {})
    if name in QUERY_FUNCTIONS:
        return {"result": _result_json(query(net, client, name, args))}
    tx = submit_proposal(net, client, name, args)
    reports = [net.deliver(b) for b in net.orderer.broadcast(tx) + net.orderer.drain()]
    last = next(iter(reports[-1].values()))
    out = {"txId": tx.tx_id.hex(), "status": last.flags[-1].value, "block": last.block_number}
    if name == "create":
        out["id"] = json.loads(tx.args[0])["id"]
    return out


def _result_json(result):
    if isinstance(result, PublicRecordView):
        return result.to_json()
    if isinstance(result, tuple):
        return {"name": result[0], "address": result[1]}
    return result


def cmd_net_init(args) -> int:
    config = NetworkConfig.load(args.config) if args.config else NetworkConfig()
    net = init_network(config)
    path = _state_path(args)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"config": config.to_json(), "ops": []}, indent=2))
    print(json.dumps({
        "state": str(path),
        "orgs": list(config.orgs),
        "peers": [p.name for p in net.all_peers],
        "orderers": [n.subject for n in net.orderer.nodes],
        "policy": str(config.endorsement_policy),
        "privateStores": [p.name for p in net.member_peers],
    }, indent=2))
    return 0


def cmd_net_run(args) -> int:
    config = NetworkConfig.load(args.config) if args.config else NetworkConfig()
    net = init_network(config)
    with open(args.script) as fh:
        script = parse_script(fh)
    result = run_workload(net, script)
    out = {
        "summary": result.summary,
        "height": net.height,
        "peersAgree": len(set(result.snapshots.values())) == 1,
    }
    _json_out(out)
    return 0


def cmd_tx(args) -> int:
    try:
        op_args = json.loads(args.args) if args.args else {}
    except json.JSONDecodeError as exc:
        raise LedgerError(f"--args is not valid JSON: {exc}") from exc
    if not isinstance(op_args, dict):
        raise LedgerError("--args must be a JSON object")
    path = _state_path(args)
    journal, config = _load_journal(path)
    net = _replay(config, journal["ops"])
    op = {"op": args.function, "client": args.client, "args": op_args}
    journal["ops"].append(op)
    try:
        out = _execute(net, op)
    finally:
        path.write_text(json.dumps(journal, indent=2))
    _json_out(out)
    return 0 if out.get("status", "valid") == "valid" else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ehrledger", description="Permissioned EHR ledger simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="latency benchmarks").add_subparsers(dest="sub", required=True)
    run = b.add_parser("run", help="populate targets and measure read/write latency")
    run.add_argument("--targets", type=_str_list, default=list(bench.TARGETS),
                     help="comma-separated subset of ledger,baseline")
    run.add_argument("--volumes", type=_int_list, default=list(bench.DEFAULT_VOLUMES),
                     help="comma-separated record counts, strictly increasing")
    run.add_argument("--include-million", action="store_true",
                     help="append the 1,000,000-record cell (slow)")
    run.add_argument("--reads", type=int, default=200, help="timed reads per cell")
    run.add_argument("--seed", type=int, default=42)
    run.add_argument("--out", help="CSV path (default $EHRLEDGER_RESULTS_DIR/results.csv)")
    run.add_argument("-q", "--quiet", action="store_true")
    run.set_defaults(func=cmd_bench_run)
    rep = b.add_parser("report", help="summarize a results CSV")
    rep.add_argument("--in", dest="infile", help="CSV written by bench run")
    rep.add_argument("--paper-ref", action="store_true",
                     help="include the published reference measurements and their crossover")
    rep.add_argument("--json", action="store_true")
    rep.set_defaults(func=cmd_bench_report)

    n = sub.add_parser("net", help="simulated network").add_subparsers(dest="sub", required=True)
    init = n.add_parser("init", help="create a network journal")
    init.add_argument("--config", help="JSON network config")
    init.add_argument("--state", help="journal path (default under $EHRLEDGER_RESULTS_DIR)")
    init.set_defaults(func=cmd_net_init)
    nrun = n.add_parser("run", help="run a JSON-lines workload script")
    nrun.add_argument("--config", help="JSON network config")
    nrun.add_argument("--script", required=True, help="JSON-lines file of {op, client, args}")
    nrun.set_defaults(func=cmd_net_run)

    t = sub.add_parser("tx", help="submit one client operation")
    t.add_argument("function", choices=TX_OPS)
    t.add_argument("--client", required=True, help="organization name, 'anon' or 'anon@<Org>'")
    t.add_argument("--args", default="{}", help="JSON object of record fields or {\"id\": ...}")
    t.add_argument("--state", help="journal written by net init")
    t.set_defaults(func=cmd_tx)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (LedgerError, ValueError, KeyError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def bench_main() -> int:
    return main(["bench", *sys.argv[1:]])


def net_main() -> int:
    return main(["net", *sys.argv[1:]])


def tx_main() -> int:
    return main(["tx", *sys.argv[1:]])


if __name__ == "__main__":
    sys.exit(main())
