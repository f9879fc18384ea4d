"""Brute-force ground truth: replay the control plane under every failure scenario.

Each scenario is a set of failed links. For every scenario the path-vector
engine runs on the graph that keeps ACL-denied edges (ACLs do not touch
the control plane) and the packet is then walked hop by hop with ACLs
dropping it where they apply. Policies are decided directly from the
resulting per-scenario outcomes.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .errors import NonConvergence
from .model import NetworkSpec
from .policies import GraphCache, PolicyRequest
from .tpvp import forward, run_tpvp
from .tyen import PreferencePolicy, expected_path
from .verdict import Verdict, device_path


def enumerate_scenarios(spec: NetworkSpec, max_failures: int) -> Iterator[frozenset]:
    """All link subsets of size at most ``max_failures``, by size then lexicographically."""
    links = sorted(spec.link_ids)
    if max_failures < 0:
        raise ValueError("max_failures must be non-negative")
    for size in range(min(max_failures, len(links)) + 1):
        for combo in itertools.combinations(links, size):
            yield frozenset(combo)


@dataclass
class Outcome:
    scenario: frozenset
    status: str  # delivered | dropped | loop | diverged
    devices: list = field(default_factory=list)
    links: frozenset = frozenset()
    reason: str = ""
    device: Optional[str] = None
    multipath: list = field(default_factory=list)  # (status, reason) per equal-cost path

    @property
    def delivered(self) -> bool:
        return self.status == "delivered"

    @property
    def hops(self) -> int:
        return len(self.devices) - 1


def _links_of(g, nodes) -> frozenset:
    out = set()
    for a, b in zip(nodes, nodes[1:]):
        for e in g.out(a):
            if e.dst == b and e.link is not None:
                out.add(e.link)
                break
    return frozenset(out)


class Replay:
    """Per traffic class, per scenario outcomes (computed once, shared by all policies)."""

    def __init__(self, spec: NetworkSpec, cache: Optional[GraphCache] = None, jobs: int = 1):
        self.spec = spec
        self.cache = cache or GraphCache(spec)
        self.jobs = max(1, jobs)
        self._memo = {}

    def outcome(self, tc: str, scenario: frozenset) -> Outcome:
        key = (tc, scenario)
        hit = self._memo.get(key)
        if hit is None:
            hit = self._compute(tc, scenario)
            self._memo[key] = hit
        return hit

    def _compute(self, tc: str, scenario: frozenset) -> Outcome:
        g = self.cache.graph(tc, True)
        try:
            st = run_tpvp(g, failed=scenario)
        except NonConvergence:
            return Outcome(scenario, "diverged")
        res = forward(st)[0]
        multi = [(r.status, r.reason) for r in forward(st, multipath=True)]
        return Outcome(
            scenario,
            res.status,
            device_path(res.nodes),
            _links_of(g, res.nodes),
            res.reason,
            res.device,
            multi,
        )

    def outcomes(self, tc: str, max_failures: int) -> list:
        scenarios = list(enumerate_scenarios(self.spec, max_failures))
        self.cache.graph(tc, True)
        todo = [s for s in scenarios if (tc, s) not in self._memo]
        if self.jobs > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.jobs) as pool:
                for s, out in zip(todo, pool.map(lambda s: self._compute(tc, s), todo)):
                    self._memo[(tc, s)] = out
        return [self.outcome(tc, s) for s in scenarios]


def _subsequence(chain, devices) -> bool:
    it = iter(devices)
    return all(any(d == w for d in it) for w in chain)


def oracle_verify(request: PolicyRequest, spec: NetworkSpec, max_failures: int, replay: Optional[Replay] = None) -> Verdict:
    """Decide ``request`` by replaying every scenario with at most ``max_failures`` failed links."""
    request.validate(spec)
    replay = replay or Replay(spec)
    kind, p = request.kind, request.params
    diags = []

    def witness(o: Outcome, **extra) -> dict:
        w = {"scenario": sorted(o.scenario)}
        if o.delivered or o.devices:
            w["path"] = o.devices
        w.update(extra)
        return w

    if kind == "P8":
        a, b = request.traffic_classes
        la, lb = set(), set()
        for o in replay.outcomes(a, max_failures):
            if o.delivered:
                la |= o.links
        for o in replay.outcomes(b, max_failures):
            if o.delivered:
                lb |= o.links
        shared = sorted(la & lb)
        if shared:
            return Verdict("P8", False, {"hedge": shared[0]}, [{"shared": shared}])
        return Verdict("P8", True)

    tc = request.traffic_class
    k = max_failures
    if kind == "P9":
        k = 0
    if kind == "P3":
        k = min(max_failures, p["k"] - 1)
        if p["k"] - 1 > max_failures:
            diags.append(f"only scenarios up to {max_failures} failures were replayed")
    outs = replay.outcomes(tc, k)
    diverged = [sorted(o.scenario) for o in outs if o.status == "diverged"]
    if diverged:
        diags.append({"diverged": diverged})
    outs = [o for o in outs if o.status != "diverged"]
    delivered = [o for o in outs if o.delivered]

    if kind == "P1":
        if delivered:
            return Verdict("P1", False, witness(delivered[0]), diags)
    elif kind == "P2":
        for o in delivered:
            if p["waypoint"] not in o.devices:
                return Verdict("P2", False, witness(o), diags)
    elif kind == "P3":
        for o in outs:
            if not o.delivered:
                return Verdict("P3", False, witness(o, reason=o.reason or o.status), diags)
    elif kind == "P4":
        for o in delivered:
            if o.hops > p["k"]:
                return Verdict("P4", False, witness(o, length=o.hops), diags)
    elif kind == "P5":
        g = replay.cache.graph(tc, True)
        pref = PreferencePolicy([list(x) for x in p["preference"]])
        for o in outs:
            exp = expected_path(g, pref, o.scenario)
            realized = o.devices if o.delivered else None
            if exp is not None and realized != exp:
                return Verdict("P5", False, {"scenario": sorted(o.scenario), "realized": realized, "expected": exp}, diags)
    elif kind == "P6":
        for o in delivered:
            if not _subsequence(p["waypoints"], o.devices):
                return Verdict("P6", False, witness(o), diags)
    elif kind == "P7":
        lengths = sorted({o.hops for o in delivered})
        if len(lengths) > 1:
            lo = next(o for o in delivered if o.hops == lengths[0])
            hi = next(o for o in delivered if o.hops == lengths[-1])
            return Verdict("P7", False, {"shortest": witness(lo), "longest": witness(hi)}, diags)
    elif kind == "P9":
        # not an "always" policy: judged on the network as configured, no failures
        for o in outs[:1] if outs and not outs[0].scenario else []:
            statuses = {s for s, _ in o.multipath}
            if "delivered" in statuses and any(r == "acl" for _, r in o.multipath):
                return Verdict("P9", False, witness(o), diags)
    elif kind == "P10":
        src = replay.spec.traffic_class(tc).src_router
        for o in outs:
            if o.status == "dropped" and (o.reason == "acl" or o.device != src):
                return Verdict("P10", False, witness(o, device=o.device, reason=o.reason), diags)
    return Verdict(kind, True, None, diags)
