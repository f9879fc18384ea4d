"""Command-line front end.

    cpverify build SPEC
    cpverify verify SPEC REQUESTS [--solver bundled|lp-export] [--keep-acl-edges] [--timeout S]
    cpverify oracle-check SPEC REQUESTS [--max-failures K] [--seed S] [--jobs N]
    cpverify export-lp SPEC REQUESTS [--out DIR]
    cpverify path SPEC TC [--fail LINK ...] [--multipath] [--keep-acl-edges]

Every command prints one JSON document on stdout. Exit codes: 0 all
policies hold (or fast path and oracle agree), 1 some policy is violated
(or they disagree), 2 input or engine error, 3 verdict deferred to an
exported LP, 4 timeout. ``path`` exits 0 when the packet is delivered
and 1 when it is dropped or loops.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import threading
import time
from pathlib import Path

from .errors import SchemaError, UnknownTrafficClass, VerifyError
from .ilp import formulations
from .ilp.formulations import build_longest_path_ilp, build_mincut_ilp
from .ilp.lpformat import export_lp
from .model import load_spec_file
from .oracle import Replay, enumerate_scenarios, oracle_verify
from .policies import GraphCache, PolicyRequest, verify
from .tpvp import forward, run_tpvp
from .verdict import device_path

EXIT_HOLDS, EXIT_VIOLATED, EXIT_ERROR, EXIT_DEFERRED, EXIT_TIMEOUT = 0, 1, 2, 3, 4
SOLVERS = ("bundled", "lp-export")
ILP_KINDS = ("P3", "P4", "P7")


def _load_requests(path) -> list:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from None
    if isinstance(doc, dict) and "requests" in doc:
        doc = doc["requests"]
    if isinstance(doc, dict):
        doc = [doc]
    if not isinstance(doc, list):
        raise SchemaError("requests must be an object or a list of objects")
    return [PolicyRequest.from_json(d) for d in doc]


def _stats(cache: GraphCache) -> dict:
    out = {"base": cache.base.stats(), "traffic_classes": {}}
    for tc in cache.spec.traffic_classes:
        out["traffic_classes"][tc.name] = cache.graph(tc.name).stats()
    return out


def _lp_models(req: PolicyRequest, cache: GraphCache) -> dict:
    """The ILPs a request would be decided by, keyed by a file stem."""
    tc = req.traffic_class
    stem = f"{req.kind}_{tc}"
    if req.kind == "P3":
        return {stem: build_mincut_ilp(cache.graph(tc))}
    if req.kind == "P4":
        return {stem: build_longest_path_ilp(cache.graph(tc), "max")}
    if req.kind == "P7":
        g = cache.graph(tc)
        return {f"{stem}_max": build_longest_path_ilp(g, "max"), f"{stem}_min": build_longest_path_ilp(g, "min")}
    return {}


def _write_lps(models: dict, out_dir) -> list:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for stem, m in models.items():
        p = out_dir / f"{stem.replace('/', '_')}.lp"
        p.write_bytes(export_lp(m))
        paths.append(str(p))
    return paths


def cmd_build(args) -> tuple:
    spec = load_spec_file(args.spec)
    cache = GraphCache(spec)
    graphs = {"base": cache.base.to_json()}
    for tc in spec.traffic_classes:
        graphs[tc.name] = cache.graph(tc.name).to_json()
    return {"command": "build", "stats": _stats(cache), "graphs": graphs, "timings": cache.timings}, EXIT_HOLDS


def cmd_verify(args) -> tuple:
    spec = load_spec_file(args.spec)
    requests = _load_requests(args.requests)
    cache = GraphCache(spec)
    results, code = [], EXIT_HOLDS
    for req in requests:
        req.validate(spec)
        t = time.perf_counter()
        if args.solver == "lp-export" and req.kind in ILP_KINDS:
            files = _write_lps(_lp_models(req, cache), args.lp_dir)
            results.append({"request": req.to_json(), "verdict": None, "lp_files": files, "verify_s": time.perf_counter() - t})
            code = max(code, EXIT_DEFERRED) if code != EXIT_VIOLATED else code
            continue
        v = verify(req, spec, cache, keep_acl_edges=args.keep_acl_edges)
        results.append({"request": req.to_json(), "verdict": v.to_json(), "verify_s": time.perf_counter() - t})
        if not v.holds:
            code = EXIT_VIOLATED
    report = {
        "command": "verify",
        "solver": args.solver,
        "results": results,
        "timings": dict(cache.timings, verify=sum(r["verify_s"] for r in results)),
        "stats": _stats(cache),
    }
    return report, code


def cmd_oracle_check(args) -> tuple:
    spec = load_spec_file(args.spec)
    requests = _load_requests(args.requests)
    if args.max_failures > len(spec.links):
        raise SchemaError(f"--max-failures {args.max_failures} exceeds the {len(spec.links)} links")
    cache = GraphCache(spec)
    replay = Replay(spec, cache, jobs=args.jobs)
    rows, code = [], EXIT_HOLDS
    for req in requests:
        req.validate(spec)
        if args.seed is not None:
            # warm the replay cache in a shuffled order; verdicts must not depend on it
            scen = list(enumerate_scenarios(spec, args.max_failures))
            random.Random(args.seed).shuffle(scen)
            for tc in req.traffic_classes or (req.traffic_class,):
                for s in scen:
                    replay.outcome(tc, s)
        t = time.perf_counter()
        fast = verify(req, spec, cache, keep_acl_edges=args.keep_acl_edges)
        t1 = time.perf_counter()
        truth = oracle_verify(req, spec, args.max_failures, replay)
        t2 = time.perf_counter()
        agree = fast.holds == truth.holds
        if not agree:
            code = EXIT_VIOLATED
        rows.append(
            {
                "request": req.to_json(),
                "agree": agree,
                "fast_path": fast.to_json(),
                "oracle": truth.to_json(),
                "disagreeing_scenario": None if agree else (truth.witness or fast.witness),
                "fast_s": t1 - t,
                "oracle_s": t2 - t1,
            }
        )
    report = {
        "command": "oracle-check",
        "max_failures": args.max_failures,
        "seed": args.seed,
        "results": rows,
        "timings": cache.timings,
    }
    return report, code


def cmd_export_lp(args) -> tuple:
    spec = load_spec_file(args.spec)
    cache = GraphCache(spec)
    files = []
    for req in _load_requests(args.requests):
        req.validate(spec)
        files.extend(_write_lps(_lp_models(req, cache), args.out))
    return {"command": "export-lp", "files": files}, EXIT_HOLDS


def cmd_path(args) -> tuple:
    spec = load_spec_file(args.spec)
    if spec.traffic_class(args.tc) is None:
        raise UnknownTrafficClass(args.tc)
    failed = frozenset(args.fail or ())
    for lk in sorted(failed - set(spec.link_ids)):
        raise SchemaError(f"unknown link {lk!r}")
    cache = GraphCache(spec)
    g = cache.graph(args.tc, True)
    st = run_tpvp(g, failed=failed)
    res = forward(st, multipath=args.multipath, apply_acls=not args.keep_acl_edges)
    rows = [
        {"status": r.status, "reason": r.reason or None, "device": r.device, "path": device_path(r.nodes), "nodes": [str(n) for n in r.nodes]}
        for r in res
    ]
    code = EXIT_HOLDS if rows and all(r["status"] == "delivered" for r in rows) else EXIT_VIOLATED
    return {"command": "path", "traffic_class": args.tc, "failed": sorted(failed), "rounds": st.rounds, "paths": rows}, code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cpverify", description="Control-plane policy verification.")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build and dump the per-traffic-class graphs")
    b.add_argument("spec")
    b.set_defaults(func=cmd_build)

    v = sub.add_parser("verify", help="verify policy requests")
    v.add_argument("spec")
    v.add_argument("requests")
    v.add_argument("--solver", choices=SOLVERS, default="bundled")
    v.add_argument("--lp-dir", default=".", help="where --solver lp-export writes models")
    v.add_argument("--keep-acl-edges", action="store_true")
    v.add_argument("--timeout", type=float, default=None, help="seconds")
    v.set_defaults(func=cmd_verify)

    o = sub.add_parser("oracle-check", help="compare fast-path verdicts with failure enumeration")
    o.add_argument("spec")
    o.add_argument("requests")
    o.add_argument("--max-failures", type=int, default=3)
    o.add_argument("--seed", type=int, default=None)
    o.add_argument("--jobs", type=int, default=1)
    o.add_argument("--keep-acl-edges", action="store_true")
    o.add_argument("--timeout", type=float, default=None, help="seconds")
    o.set_defaults(func=cmd_oracle_check)

    e = sub.add_parser("export-lp", help="write the ILPs behind P3/P4/P7 requests as LP files")
    e.add_argument("spec")
    e.add_argument("requests")
    e.add_argument("--out", default=".")
    e.set_defaults(func=cmd_export_lp)

    pa = sub.add_parser("path", help="show the forwarding path of a traffic class under a failure set")
    pa.add_argument("spec")
    pa.add_argument("tc")
    pa.add_argument("--fail", nargs="*", default=[], metavar="LINK")
    pa.add_argument("--multipath", action="store_true", help="follow every equal-cost next hop")
    pa.add_argument("--keep-acl-edges", action="store_true", help="ignore ACLs while forwarding")
    pa.set_defaults(func=cmd_path)

    for p in (b, v, o, e, pa):
        p.add_argument("--inject-fault", choices=sorted({"flip-flow-sign"}), default=None, help=argparse.SUPPRESS)
    return ap


def _run(args) -> tuple:
    try:
        return args.func(args)
    except VerifyError as exc:
        return {"command": args.command, "error": type(exc).__name__.rstrip("_"), "message": str(exc)}, exc.exit_code


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    env = os.environ.get("TIRAMISU_SOLVER")
    if env and hasattr(args, "solver"):
        if env not in SOLVERS:
            print(json.dumps({"command": args.command, "error": "SchemaError", "message": f"TIRAMISU_SOLVER={env!r}"}))
            return EXIT_ERROR
        args.solver = env
    saved = set(formulations.FAULTS)
    if args.inject_fault:
        formulations.FAULTS.add(args.inject_fault)
    try:
        timeout = getattr(args, "timeout", None)
        if timeout is None:
            report, code = _run(args)
        else:
            box = []
            worker = threading.Thread(target=lambda: box.append(_run(args)), daemon=True)
            worker.start()
            worker.join(timeout)
            if not box:
                report, code = {"command": args.command, "error": "Timeout", "message": f"no verdict within {timeout}s"}, EXIT_TIMEOUT
            else:
                report, code = box[0]
    finally:
        formulations.FAULTS.clear()
        formulations.FAULTS.update(saved)
    json.dump(report, sys.stdout, indent=2, default=str)
    sys.stdout.write("\n")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
