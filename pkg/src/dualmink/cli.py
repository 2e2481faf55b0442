"""Command-line front end.

Subcommands: measure, solve, john, verify, probe, serve.  Every command
builds a request payload from its input files and flags, sends it through
the service client (in-process by default, --server for a remote service),
and writes results as structured text documents.

Exit codes: 0 success or suite pass, 1 suite/probe failure, 2 usage error
(bad arguments, unreadable or invalid input), 3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import os
import sys

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_DEGENERATE = 3


def _apply_thread_cap(argv: list[str]) -> None:
    # must run before numpy is imported anywhere in the process
    if "--threads" in argv:
        idx = argv.index("--threads")
        if idx + 1 < len(argv):
            n = argv[idx + 1]
            for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                        "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
                os.environ.setdefault(var, n)


def _parse_region(text: str) -> dict:
    try:
        if text == "full":
            return {"kind": "full"}
        kind, _, rest = text.partition(":")
        if kind == "hemisphere":
            x, y, z = (float(v) for v in rest.split(","))
            return {"kind": "hemisphere", "center": [x, y, z]}
        if kind == "cap":
            x, y, z, angle = (float(v) for v in rest.split(","))
            return {"kind": "cap", "center": [x, y, z], "angle": angle}
        if kind == "dir":
            dirs = [[float(v) for v in part.split(",")]
                    for part in rest.split(";")]
            return {"kind": "directions", "directions": dirs}
    except ValueError:
        pass
    raise SystemExit(_usage_error(
        f"cannot parse region {text!r}; expected full, hemisphere:x,y,z, "
        "cap:x,y,z,angle or dir:x,y,z[;...]"))


def _usage_error(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_USAGE


def _load(path: str, model):
    from .errors import ConfigurationError
    from .fileio import load_model
    try:
        return load_model(path, model)
    except ConfigurationError as exc:
        raise SystemExit(_usage_error(str(exc)))


def _response_payload(resp):
    if resp.status_code == 200:
        return resp.json()
    try:
        detail = resp.json().get("detail")
    except Exception:
        detail = resp.text
    if isinstance(detail, dict):
        kind = detail.get("kind", "error")
        print(f"error ({kind}): {detail.get('message')}", file=sys.stderr)
        code = EXIT_DEGENERATE if kind == "degeneracy" else EXIT_USAGE
        raise SystemExit(code)
    print(f"error: {detail}", file=sys.stderr)
    raise SystemExit(EXIT_USAGE)


def _write_out(path: str | None, payload: dict) -> None:
    if path is None:
        return
    from .fileio import write_document
    write_document(path, payload)


def _provenance(payload: dict, seed=None) -> dict:
    from .verify import config_hash
    return {"config_hash": config_hash(payload), "seed": seed}


def _cmd_measure(args, client) -> int:
    from .schemas import body_adapter
    body = _load(args.body, body_adapter())
    payload = {"body": body.model_dump(), "measure": args.measure,
               "p": args.p, "q": args.q, "region": _parse_region(args.region),
               "level": args.level, "include_rows": args.include_rows}
    data = _response_payload(client.post("/measure", payload))
    print(data["total"])
    data["provenance"] = _provenance(payload)
    _write_out(args.out, data)
    return EXIT_OK


def _cmd_solve(args, client) -> int:
    from .schemas import FieldModel, SolverConfigModel
    f = _load(args.f, FieldModel)
    if args.config is not None:
        config = _load(args.config, SolverConfigModel)
    else:
        config = SolverConfigModel()
    if args.level is not None:
        config = config.model_copy(update={"level": args.level})
    if f.level != config.level:
        return _usage_error(f"field level {f.level} does not match solver "
                            f"level {config.level}")
    payload = {"f": f.model_dump(), "p": args.p, "q": args.q,
               "config": config.model_dump()}
    data = _response_payload(client.post("/solve", payload))
    print(f"status: {data['status']}  iterations: {data['iterations']}  "
          f"final residual: {data['residual_history'][-1]:.3e}",
          file=sys.stderr)
    prov = _provenance(payload, seed=config.init.seed)
    solution = dict(data["solution"])
    solution["provenance"] = prov
    _write_out(args.out, solution)
    report = {k: data[k] for k in ("status", "iterations",
                                   "residual_history", "lam")}
    report["provenance"] = prov
    _write_out(args.report, report)
    if data["status"] == "converged":
        return EXIT_OK
    return EXIT_DEGENERATE


def _cmd_john(args, client) -> int:
    from .schemas import body_adapter
    body = _load(args.body, body_adapter())
    payload = {"body": body.model_dump()}
    data = _response_payload(client.post("/john", payload))
    print(f"center: {data['center']}")
    print(f"half_axes: {data['half_axes']}")
    print(f"containment gaps: inner {data['inner_gap']:.3e} "
          f"outer {data['outer_gap']:.3e}")
    data["provenance"] = _provenance(payload)
    _write_out(args.out, data)
    return EXIT_OK


_TSV_COLUMNS = ("body_id", "p", "q", "lam", "sup_h", "vol", "r1", "r2", "r3",
                "ratio", "cor_a", "cor_b", "cor_c", "retained")


def _report_tsv(report: dict) -> str:
    lines = ["\t".join(_TSV_COLUMNS)]
    for row in report["rows"]:
        lines.append("\t".join(repr(row[c]) if not isinstance(row[c], str)
                               else row[c] for c in _TSV_COLUMNS))
    return "\n".join(lines) + "\n"


def _cmd_verify(args, client) -> int:
    from .schemas import FamilyModel
    family = _load(args.family, FamilyModel)
    payload = {"family": family.model_dump(), "p": args.p, "q": args.q,
               "lambda_cap": args.lambda_cap,
               "sup_h_bound": args.sup_h_bound,
               "vol_floor": args.vol_floor,
               "ratio_spread_cap": args.ratio_spread_cap,
               "axis_ratio_floor": args.axis_ratio_floor,
               "baseline_dir": args.baseline_dir
               or os.environ.get("DUALMINK_BASELINE_DIR")}
    data = _response_payload(client.post(f"/verify/{args.suite}", payload))
    print(f"suite {args.suite}: {data['verdict']}", file=sys.stderr)
    _write_out(args.out, data)
    if args.tsv:
        from datetime import datetime, timezone
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        with open(args.tsv, "w") as fh:
            fh.write(f"# generated: {stamp}\n")
            fh.write(_report_tsv(data))
    if data["verdict"] == "fail":
        return EXIT_FAIL
    return EXIT_OK


def _cmd_probe(args, client) -> int:
    if args.kind == "uniqueness":
        from .schemas import FieldModel
        f = _load(args.f, FieldModel)
        payload = {"f": f.model_dump(), "p": args.p, "q": args.q,
                   "n_starts": args.starts, "seed": args.seed}
        data = _response_payload(client.post("/probe/uniqueness", payload))
    else:
        payload = {"p": args.p, "q": args.q, "level": args.level,
                   "allow_unsupported": args.allow_unsupported}
        if args.schedule:
            payload["schedule"] = [float(v) for v in args.schedule.split(",")]
        data = _response_payload(client.post("/probe/degeneration", payload))
    print(f"probe {data['probe']}: {data['verdict']}", file=sys.stderr)
    _write_out(args.out, data)
    if data["verdict"] == "fail":
        return EXIT_FAIL
    if data["verdict"] == "inconclusive":
        return EXIT_DEGENERATE
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualmink",
        description="dual curvature measures, the associated Monge-Ampere "
                    "solver, and the estimate verification suites")
    parser.add_argument("--server", default=None,
                        help="URL of a running service; default runs in-process")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap numerical worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("measure", help="evaluate a measure of a body")
    m.add_argument("--body", required=True)
    m.add_argument("--measure", default="lp-dual",
                   choices=["lp-dual", "dual-radial", "dual-boundary",
                            "surface-area", "cone-volume"])
    m.add_argument("--p", type=float, default=0.0)
    m.add_argument("--q", type=float, default=3.0)
    m.add_argument("--region", default="full")
    m.add_argument("--level", type=int, default=4)
    m.add_argument("--include-rows", action="store_true")
    m.add_argument("--out", default=None)

    s = sub.add_parser("solve", help="solve for a body with prescribed density")
    s.add_argument("--f", required=True, help="density field file")
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--q", type=float, required=True)
    s.add_argument("--config", default=None, help="solver config file")
    s.add_argument("--level", type=int, default=None)
    s.add_argument("--out", default=None, help="solution body spec file")
    s.add_argument("--report", default=None, help="solve report file")

    j = sub.add_parser("john", help="maximal inscribed ellipsoid")
    j.add_argument("--body", required=True)
    j.add_argument("--out", default=None)

    v = sub.add_parser("verify", help="run an estimate verification suite")
    v.add_argument("suite", choices=["c0", "basic-estimate", "proposition"])
    v.add_argument("--family", required=True)
    v.add_argument("--p", type=float, required=True)
    v.add_argument("--q", type=float, required=True)
    v.add_argument("--lambda-cap", type=float, default=20.0)
    v.add_argument("--sup-h-bound", type=float, default=10.0)
    v.add_argument("--vol-floor", type=float, default=None)
    v.add_argument("--ratio-spread-cap", type=float, default=50.0)
    v.add_argument("--axis-ratio-floor", type=float, default=0.05)
    v.add_argument("--baseline-dir", default=None)
    v.add_argument("--out", default=None)
    v.add_argument("--tsv", default=None)

    pr = sub.add_parser("probe", help="uniqueness / degeneration probes")
    prsub = pr.add_subparsers(dest="kind", required=True)
    pu = prsub.add_parser("uniqueness")
    pu.add_argument("--f", required=True)
    pu.add_argument("--p", type=float, required=True)
    pu.add_argument("--q", type=float, required=True)
    pu.add_argument("--starts", type=int, default=5)
    pu.add_argument("--seed", type=int, default=0)
    pu.add_argument("--out", default=None)
    pd = prsub.add_parser("degeneration")
    pd.add_argument("--p", type=float, required=True)
    pd.add_argument("--q", type=float, default=3.0)
    pd.add_argument("--schedule", default=None)
    pd.add_argument("--level", type=int, default=4)
    pd.add_argument("--allow-unsupported", action="store_true")
    pd.add_argument("--out", default=None)

    sv = sub.add_parser("serve", help="run the HTTP service")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8080)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    _apply_thread_cap(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors already
        return int(exc.code) if exc.code else EXIT_OK

    if args.command == "serve":
        return _cmd_serve(args)

    from .client import ServiceClient
    handlers = {"measure": _cmd_measure, "solve": _cmd_solve,
                "john": _cmd_john, "verify": _cmd_verify, "probe": _cmd_probe}
    try:
        with ServiceClient(server=args.server) as client:
            return handlers[args.command](args, client)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
