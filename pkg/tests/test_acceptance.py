"""Acceptance criteria, one test each, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines appear inline
even though pytest captures output.
"""

import collections
import random
import statistics
import time

import networkx as nx
import numpy as np
import pytest

from cpverify.errors import Infeasible, NonConvergence
from cpverify.graph import SRC, build_base_graph, build_traffic_class_graph
from cpverify.ilp.formulations import min_cut
from cpverify.ilp.solver import solve
from cpverify.model import from_dict
from cpverify.netgen import random_network, scaled_network, strip_policies
from cpverify.oracle import Replay, oracle_verify
from cpverify.policies import GraphCache, PolicyRequest, verify
from cpverify.reach import iter_valid_paths, verify_p1_always_blocked
from cpverify.taint import path_run_ok, propagate_taints
from cpverify.tpvp import extract_path, forward, multipath, run_tpvp, unstable_nodes
from cpverify.tyen import min_failures_for_acl_path
from cpverify.verdict import device_path
from tests.test_ilp import random_model
from tests.test_tpvp import _ospf_digraph

KINDS = ("ospf", "ebgp", "ibgp", "mixed")
SUITE = 200


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return ok

    return emit


def _suite():
    for seed in range(SUITE):
        kind = KINDS[seed % len(KINDS)]
        yield seed, kind, from_dict(random_network(seed, kind=kind))


def test_golden_blackhole(blackhole, golden, report):
    exp = golden["blackhole"]
    t = time.perf_counter()
    cache = GraphCache(blackhole)
    got = []
    for case in exp["paths"]:
        res = forward(run_tpvp(cache.graph(exp["traffic_class"], True), failed=frozenset(case["failed"])))[0]
        row = {"failed": case["failed"], "status": res.status, "path": device_path(res.nodes)}
        if res.status == "dropped":
            row.update(device=res.device, reason=res.reason)
        got.append(row)
    elapsed = time.perf_counter() - t
    ok = got == exp["paths"] and elapsed < 1.0
    assert report("golden blackhole failover (C to E)", ok, f"{[r['path'] for r in got]} in {elapsed * 1000:.1f} ms")


def test_golden_community(hedge, golden, report):
    exp = golden["community"]
    g = GraphCache(hedge).graph(exp["traffic_class"])
    paths = sorted({tuple(device_path(p)) for p in iter_valid_paths(g)})
    p1 = verify_p1_always_blocked(g)
    ok = (
        paths == [tuple(p) for p in exp["valid_paths"]]
        and p1.holds is exp["p1_holds"]
        and p1.witness["path"] == exp["p1_witness"]
        and tuple(exp["community_excluded"]) not in paths
    )
    assert report("golden community filter (E to C)", ok, f"valid paths {paths}, P1 holds={p1.holds}")


def test_hedge_min_cut(hedge_no_ae, golden, report):
    exp = golden["hedge"]
    cache = GraphCache(hedge_no_ae)
    value, links = min_cut(cache.graph(exp["traffic_class"]))
    p3 = verify(PolicyRequest("P3", exp["traffic_class"], params={"k": exp["p3_k"]}), hedge_no_ae, cache)
    ok = value == exp["min_cut_without_ae"] and p3.holds is exp["p3_holds_without_ae"]
    assert report("hedge min-cut", ok, f"min-cut {value} via {links}, P3 K={exp['p3_k']} holds={p3.holds}")


def test_acl_min_cut(acl_paths, golden, report):
    exp = golden["acl"]
    cache = GraphCache(acl_paths)
    n = min_cut(cache.graph(exp["traffic_class"]))[0]
    big_l = min_failures_for_acl_path(cache.graph(exp["traffic_class"], True))[0]
    ok = (n, big_l, min(n, big_l)) == (exp["N"], exp["L"], exp["min"])
    assert report("ACL-corrected min-cut", ok, f"N={n} L={big_l} min={min(n, big_l)}")


def _requests(spec, rng, replay):
    tcs = [t.name for t in spec.traffic_classes]
    tc = tcs[0]
    t = spec.traffic_class(tc)
    others = [d.name for d in spec.routers() if d.name not in (t.src_router, t.dst_router)] or [t.src_router]
    out = [
        PolicyRequest("P1", tc),
        PolicyRequest("P2", tc, params={"waypoint": rng.choice(others)}),
        PolicyRequest("P3", tc, params={"k": rng.randint(1, 3)}),
        PolicyRequest("P4", tc, params={"k": rng.randint(1, 5)}),
    ]
    # preferences are drawn from paths that really occur under some failure
    seen = []
    for o in replay.outcomes(tc, 3):
        if o.delivered and o.devices not in seen:
            seen.append(o.devices)
    rng.shuffle(seen)
    if seen:
        out.append(PolicyRequest("P5", tc, params={"preference": seen[:3]}))
    out.append(PolicyRequest("P7", tc))
    if len(tcs) > 1:
        out.append(PolicyRequest("P8", traffic_classes=(tcs[0], tcs[1])))
    out.append(PolicyRequest("P9", tc))
    out.append(PolicyRequest("P10", tc))
    return out


def test_oracle_equivalence(report):
    t = time.perf_counter()
    total, bad, examples = collections.Counter(), collections.Counter(), collections.defaultdict(list)
    for seed, kind, spec in _suite():
        cache = GraphCache(spec)
        replay = Replay(spec, cache)
        for req in _requests(spec, random.Random(seed), replay):
            try:
                fast = verify(req, spec, cache).holds
            except NonConvergence:
                fast = None
            truth = oracle_verify(req, spec, 3, replay).holds
            total[req.kind] += 1
            if fast != truth:
                bad[req.kind] += 1
                examples[req.kind].append(seed)
    elapsed = time.perf_counter() - t
    n_bad = sum(bad.values())
    per = ", ".join(f"{k} {bad[k]}/{total[k]}" for k in sorted(total, key=lambda k: int(k[1:])))
    ok = n_bad == 0 and elapsed < 600
    report("oracle equivalence", ok, f"{n_bad} disagreements of {sum(total.values())} in {elapsed:.0f} s ({per})")
    for kind in sorted(examples):
        print(kind, "disagreeing seeds", examples[kind])
    assert ok


def _enumerate_optimum(m):
    """Exhaustive optimum over every 0/1 assignment, vectorized in chunks."""
    n = len(m.variables)
    obj = np.array([m.objective.get(v, 0) for v in m.variables])
    rows = np.zeros((len(m.constraints), n))
    for i, con in enumerate(m.constraints):
        for v, k in con.coeffs.items():
            rows[i, m.index(v)] = k
    rhs = np.array([c.rhs for c in m.constraints], dtype=float)
    senses = np.array([c.sense for c in m.constraints])
    best = None
    shifts = np.arange(n)
    for start in range(0, 1 << n, 1 << 16):
        ids = np.arange(start, min(start + (1 << 16), 1 << n))
        x = (ids[:, None] >> shifts) & 1
        lhs = x @ rows.T
        ok = np.ones(len(ids), dtype=bool)
        ok &= np.all(np.where(senses == "<=", lhs <= rhs, True), axis=1)
        ok &= np.all(np.where(senses == ">=", lhs >= rhs, True), axis=1)
        ok &= np.all(np.where(senses == "=", lhs == rhs, True), axis=1)
        if not ok.any():
            continue
        vals = x[ok] @ obj
        cand = vals.min() if m.sense == "min" else vals.max()
        if best is None or (cand < best if m.sense == "min" else cand > best):
            best = int(cand)
    return best


def test_ilp_vs_enumeration(report):
    mismatches, sizes = [], []
    for seed in range(1000, 1050):
        m = random_model(seed, max_vars=20)
        sizes.append(len(m.variables))
        want = _enumerate_optimum(m)
        try:
            got = solve(m).objective
        except Infeasible:
            got = None
        if got != want:
            mismatches.append((seed, got, want))
    ok = not mismatches
    assert report("ILP vs enumeration", ok, f"50 models, up to {max(sizes)} vars, mismatches {mismatches}")


def test_theorem_properties(report):
    checked = bad_run = unstable = diverged = 0
    for _, _, spec in _suite():
        cache = GraphCache(spec)
        for tc in spec.traffic_classes:
            g = cache.graph(tc.name, True)
            for failed in [()] + [(lk,) for lk in spec.link_ids]:
                try:
                    st = run_tpvp(g, failed=frozenset(failed))
                except NonConvergence:
                    diverged += 1
                    continue
                checked += 1
                p = extract_path(st)
                if p is not None and not path_run_ok(g, p):
                    bad_run += 1
                if any(u != SRC and not path_run_ok(g, adv.path) for u, adv in st.rib.items()):
                    bad_run += 1
                if unstable_nodes(st):
                    unstable += 1
    ok = bad_run == 0 and unstable == 0
    detail = f"{checked} converged runs, run-length violations {bad_run}, unstable {unstable}, diverged {diverged} (skipped)"
    assert report("run-length and stability properties", ok, detail)


def test_pure_igp_dijkstra(report):
    checked, wrong = 0, []
    for seed in range(SUITE):
        doc = strip_policies(random_network(seed, kind="ospf"))
        spec = from_dict(doc)
        ref_g = _ospf_digraph(doc)
        cache = GraphCache(spec)
        for tc in spec.traffic_classes:
            st = run_tpvp(cache.graph(tc.name, True))
            try:
                ref = {tuple(p) for p in nx.all_shortest_paths(ref_g, tc.src_router, tc.dst_router, weight="w")}
            except (nx.NetworkXNoPath, nx.NodeNotFound):
                ref = set()
            got = {tuple(device_path(r.nodes)) for r in multipath(st) if r.delivered}
            checked += 1
            if got != ref:
                wrong.append((seed, tc.name))
    ok = not wrong
    assert report("pure-IGP vs Dijkstra", ok, f"{checked} traffic classes, mismatches {wrong[:5]}")


def test_runtime_sanity(report):
    spec = from_dict(scaled_network(160))
    base = build_base_graph(spec)
    spec_ms, p1_ms, taint_ms = [], [], []
    for _ in range(7):
        t0 = time.perf_counter()
        g = build_traffic_class_graph(base, "far", spec)
        t1 = time.perf_counter()
        g = propagate_taints(g)
        t2 = time.perf_counter()
        verify_p1_always_blocked(g)
        t3 = time.perf_counter()
        spec_ms.append((t1 - t0) * 1000)
        taint_ms.append((t2 - t1) * 1000)
        p1_ms.append((t3 - t2) * 1000)
    s, p = statistics.median(spec_ms), statistics.median(p1_ms)
    # soft bound: twice the target is tolerated on slow machines
    ok = s < 2.0 and p < 100.0
    detail = (
        f"160 routers, {base.stats()['nodes']} nodes: specialization {s:.2f} ms (target 1), "
        f"taint {statistics.median(taint_ms):.2f} ms, P1 {p:.2f} ms (target 50)"
    )
    assert report("runtime sanity", ok, detail)
