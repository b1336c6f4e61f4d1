"""Command-line client for the simulation service.

`run` and `diff` build a request and send it through the HTTP API: against a
remote server when --server is given, otherwise against the in-process app
over an ASGI transport, so both paths exercise the same routes. `serve`
starts the service.

Exit codes: 0 success, 1 usage error, 2 simulation error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path
from typing import Optional

import httpx

from .experiment import (
    DEFAULT_ITERATIONS,
    DEFAULT_RATIO,
    DEFAULT_TOTAL,
    DEFAULT_ZONES,
    SWEEP_INNER,
    SWEEP_OUTER,
)
from .simulation import DEFAULT_EXCHANGE, DEFAULT_MEM_FRACTION

USAGE_ERROR = 1
SIMULATION_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit((USAGE_ERROR, f"error: {message}"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bubblesim",
                     description="Topology-aware hierarchical scheduling simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment point or a sweep")
    run.add_argument("--topology", default="paper16",
                     help="preset name or path to a topology spec file")
    run.add_argument("--strategy", default="spread",
                     choices=["spread", "shared", "rr", "all"])
    run.add_argument("--outer", type=int, default=16, help="outer team count")
    run.add_argument("--inner", type=int, default=4, help="tasks per zone team")
    run.add_argument("--sweep", action="store_true",
                     help="sweep outer in {1,2,4,8,16} and inner in {1,2,4,8}")
    run.add_argument("--zones", type=int, default=DEFAULT_ZONES)
    run.add_argument("--ratio", type=float, default=DEFAULT_RATIO,
                     help="biggest zone over smallest zone")
    run.add_argument("--iters", type=int, default=DEFAULT_ITERATIONS)
    run.add_argument("--total", type=int, default=DEFAULT_TOTAL,
                     help="per-round work across all zones, in microunits")
    run.add_argument("--workload", help="path to a workload file (overrides generator)")
    run.add_argument("--mem-fraction", default=str(DEFAULT_MEM_FRACTION),
                     help="memory-bound fraction of task work, in [0,1]")
    run.add_argument("--exchange", type=int, default=DEFAULT_EXCHANGE,
                     help="work units per face exchange per round")
    run.add_argument("--explode-ratio", default="1",
                     help="bubble explosion threshold ratio (alpha)")
    run.add_argument("--no-load-hints", action="store_true",
                     help="hide per-zone loads from the spread (infer from counts)")
    run.add_argument("--csv", default="-", help="CSV output path, or - for stdout")
    run.add_argument("--trace", help="write the JSON event trace here (single point only)")
    run.add_argument("--seed", type=int, default=0,
                     help="reserved; all generators are deterministic")
    run.add_argument("--workers", type=int, default=0,
                     help="parallel worker threads for sweep points")
    run.add_argument("--server", help="base URL of a running service; default in-process")

    diff = sub.add_parser("diff", help="compare the speedups of two report CSVs")
    diff.add_argument("csv_a", help="path to the first CSV")
    diff.add_argument("csv_b", help="path to the second CSV")
    diff.add_argument("--server", help="base URL of a running service")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _post(path: str, payload: dict, server: Optional[str]) -> dict:
    if server:
        response = httpx.post(server.rstrip("/") + path, json=payload, timeout=600.0)
    else:
        response = asyncio.run(_post_in_process(path, payload))
    if response.status_code >= 400:
        detail = response.json().get("detail", response.text)
        code = USAGE_ERROR if response.status_code < 409 else SIMULATION_ERROR
        raise SystemExit((code, f"error: {detail}"))
    return response.json()


async def _post_in_process(path: str, payload: dict) -> httpx.Response:
    from .service.app import app

    transport = httpx.ASGITransport(app=app)
    async with httpx.AsyncClient(transport=transport, base_url="http://sim") as client:
        return await client.post(path, json=payload, timeout=600.0)


def _topology_field(value: str) -> dict:
    path = Path(value)
    if path.is_file():
        return {"text": path.read_text()}
    return {"preset": value}


def _workload_field(args) -> dict:
    body = {
        "zones": args.zones, "ratio": args.ratio, "total": args.total,
        "iterations": args.iters, "outer": args.outer, "inner": args.inner,
    }
    if args.workload:
        from .workload import parse_workload

        parsed = parse_workload(Path(args.workload).read_text())
        body.update(zone_loads=list(parsed.zones), edges=[list(e) for e in parsed.exchange_edges],
                    iterations=parsed.iterations, outer=parsed.n_o, inner=parsed.n_i)
    return body


def _cmd_run(args) -> int:
    common = {
        "topology": _topology_field(args.topology),
        "workload": _workload_field(args),
        "model": {"mem_fraction": args.mem_fraction, "exchange": args.exchange},
        "explode_ratio": args.explode_ratio,
        "load_hints": not args.no_load_hints,
    }
    sweeping = args.sweep or args.strategy == "all"
    if args.trace and sweeping:
        raise SystemExit((USAGE_ERROR, "error: --trace needs a single experiment point"))

    if sweeping:
        strategies = ["spread", "shared", "rr"] if args.strategy == "all" else [args.strategy]
        payload = dict(common, strategies=strategies, workers=args.workers,
                       outers=list(SWEEP_OUTER) if args.sweep else [args.outer],
                       inners=list(SWEEP_INNER) if args.sweep else [args.inner])
        body = _post("/sweep", payload, args.server)
        csv_text = body["csv"]
        summary = [f"best {name}: speedup {row['speedup']:.3f} "
                   f"at {row['outer']}x{row['inner']}"
                   for name, row in sorted(body["best"].items())]
    else:
        payload = dict(common, strategy=args.strategy, include_trace=bool(args.trace))
        body = _post("/simulate", payload, args.server)
        csv_text = body["csv"]
        row = body["row"]
        summary = [f"best {row['strategy']}: speedup {row['speedup']:.3f} "
                   f"at {row['outer']}x{row['inner']}"]
        if args.trace:
            Path(args.trace).write_text(json.dumps(body["trace"], indent=1) + "\n")

    if args.csv == "-":
        sys.stdout.write(csv_text)
        print("\n".join(summary), file=sys.stderr)
    else:
        Path(args.csv).write_text(csv_text)
        print("\n".join(summary))
    return 0


def _cmd_diff(args) -> int:
    payload = {"csv_a": Path(args.csv_a).read_text(),
               "csv_b": Path(args.csv_b).read_text()}
    body = _post("/diff", payload, args.server)
    sys.stdout.write(body["text"])
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "diff":
            return _cmd_diff(args)
        return _cmd_serve(args)
    except SystemExit as exc:
        if isinstance(exc.code, tuple):
            code, message = exc.code
            print(message, file=sys.stderr)
            return code
        raise
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
