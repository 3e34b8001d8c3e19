"""Command-line front end.

A thin client of the HTTP service: every subcommand marshals its input
files into a request, posts it to the app (in process by default, or to a
remote ``--server``), and writes the response to disk.  A manifest JSON
recording inputs, outputs, seed, parallelism, and tool version is written
alongside every output artifact.

Exit codes: 0 success, 2 input error, 3 model error, 1 invariant failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_INPUT = 2
EXIT_MODEL = 3

FIGURE_FILES = {"comparison": "fig1_left.csv", "kscaling": "fig1_right.csv"}
DEFAULT_FIGURE_SEEDS = {"comparison": 7001, "kscaling": 7002}


class CliError(Exception):
    def __init__(self, exit_code: int, message: str):
        self.exit_code = exit_code
        super().__init__(message)


class ServiceClient:
    """POSTs requests either to the in-process app or to a remote server."""

    def __init__(self, server: str | None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=3600.0)
        else:
            import warnings

            with warnings.catch_warnings():
                # starlette's sync client wrapper warns about its own
                # httpx dependency; harmless for in-process use.
                warnings.simplefilter("ignore", DeprecationWarning)
                from fastapi.testclient import TestClient

            from .service.app import app

            self._client = TestClient(app)

    def post(self, path: str, payload: dict) -> dict:
        resp = self._client.post(path, json=payload)
        if resp.status_code == 200:
            return resp.json()
        detail = None
        try:
            detail = resp.json().get("detail")
        except Exception:
            pass
        if isinstance(detail, dict):
            message = detail.get("message", str(detail))
            code = detail.get("code")
            if detail.get("actions") is not None:
                message += f" (actions: {detail['actions']})"
        else:
            message = json.dumps(detail) if detail is not None else resp.text
            code = None
        if resp.status_code == 409 or code == "model-error":
            raise CliError(EXIT_MODEL, message)
        if resp.status_code in (400, 422):
            raise CliError(EXIT_INPUT, message)
        raise CliError(EXIT_INVARIANT, f"service error {resp.status_code}: {message}")


def _read_json(path: str, what: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read {what} {path}: {exc}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_INPUT, f"{what} {path} is not valid JSON: {exc}")


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _write_manifest(out_path: Path, subcommand: str, inputs: list[str],
                    outputs: list[str], seed, threads) -> None:
    manifest = {
        "subcommand": subcommand,
        "inputs": inputs,
        "outputs": outputs,
        "seed": seed,
        "threads": threads,
        "version": __version__,
    }
    _write_text(Path(str(out_path) + ".manifest.json"),
                json.dumps(manifest, indent=2) + "\n")


def _report_csv(doc: dict) -> str:
    lines = ["field,value"]
    for key, value in doc.items():
        if isinstance(value, list):
            cell = " ".join(str(v) for v in value)
        else:
            cell = str(value)
        lines.append(f"{key},{cell}")
    return "\n".join(lines) + "\n"


def cmd_analytic(args) -> int:
    instance = _read_json(args.instance, "instance file")
    client = ServiceClient(args.server)
    doc = client.post("/analytic", {"instance": instance, "n": args.n})
    text = _report_csv(doc) if args.format == "csv" else json.dumps(doc, indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        _write_text(out, text)
        _write_manifest(out, "analytic", [args.instance], [str(out)], None, 1)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    instance = _read_json(args.instance, "instance file")
    config = _read_json(args.config, "config file")
    if args.seed is not None:
        config["seed"] = args.seed
    if args.threads is not None:
        config["threads"] = args.threads
    client = ServiceClient(args.server)
    doc = client.post("/simulate", {"instance": instance, "config": config,
                                    "instance_id": args.instance_id})
    out = Path(args.out)
    _write_text(out, doc["csv"])
    _write_manifest(out, "simulate", [args.instance, args.config], [str(out)],
                    config.get("seed", 0), config.get("threads", 1))
    return EXIT_OK


def cmd_figure(args) -> int:
    seed = args.seed if args.seed is not None else DEFAULT_FIGURE_SEEDS[args.experiment]
    payload: dict = {"experiment": args.experiment, "seed": seed,
                     "threads": args.threads or 1}
    if args.replications is not None:
        payload["replications"] = args.replications
    if args.ks:
        payload["ks"] = [int(x) for x in args.ks.split(",")]
    client = ServiceClient(args.server)
    doc = client.post("/figure", payload)
    out_dir = Path(args.out)
    outputs = []
    for name, csv_text in doc["files"].items():
        path = out_dir / name
        _write_text(path, csv_text)
        outputs.append(str(path))
    constants_path = out_dir / f"{FIGURE_FILES[args.experiment].removesuffix('.csv')}_constants.json"
    _write_text(constants_path, json.dumps(doc["constants"], indent=2) + "\n")
    outputs.append(str(constants_path))
    _write_manifest(out_dir / FIGURE_FILES[args.experiment], "figure", [],
                    outputs, seed, args.threads or 1)
    return EXIT_OK


def cmd_verify(args) -> int:
    client = ServiceClient(args.server)
    payload = {"suites": args.suite or None}
    doc = client.post("/verify", payload)
    width = max(len(r["name"]) for r in doc["results"])
    for r in doc["results"]:
        print(f"{r['name']:{width}s}  {r['status']:7s}  checks={r['checks']:4d}  {r['detail']}")
    if args.out:
        _write_text(Path(args.out), json.dumps(doc, indent=2) + "\n")
    if not doc["all_passed"]:
        print("verification FAILED")
        return EXIT_INVARIANT
    print("all checks passed")
    return EXIT_OK


def cmd_locks(args) -> int:
    client = ServiceClient(args.server)
    doc = client.post("/locks", {"N": args.states, "p_star": args.p_star,
                                 "rmax": args.rmax, "H": args.horizon})
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        _write_text(out, text)
        _write_manifest(out, "locks", [], [str(out)], None, 1)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opeval",
                                     description="Off-policy evaluation toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_server(p):
        p.add_argument("--server", help="URL of a running service; in-process by default")

    p = sub.add_parser("analytic", help="closed-form report for an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--n", type=int, required=True, help="sample size")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    add_server(p)
    p.set_defaults(fn=cmd_analytic)

    p = sub.add_parser("simulate", help="Monte Carlo MSE curves for an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--instance-id", default="instance")
    add_server(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("figure", help="run a canned experiment bundle")
    p.add_argument("experiment", choices=("comparison", "kscaling"))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--ks", help="comma-separated action counts (kscaling only)")
    p.add_argument("--threads", type=int)
    add_server(p)
    p.set_defaults(fn=cmd_figure)

    p = sub.add_parser("verify", help="run invariant suites")
    p.add_argument("--suite", action="append", help="run only this suite (repeatable)")
    p.add_argument("--out", help="write the JSON report here")
    add_server(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("locks", help="emit a combination-lock MDP bundle")
    p.add_argument("--states", type=int, required=True)
    p.add_argument("--p-star", type=float, required=True)
    p.add_argument("--rmax", type=float, default=1.0)
    p.add_argument("--horizon", type=int)
    p.add_argument("--out")
    add_server(p)
    p.set_defaults(fn=cmd_locks)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
