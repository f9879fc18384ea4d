"""Uniform entry point for policies P1 to P10."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from .errors import IterationLimit, SchemaError, UnknownDevice, UnknownPolicyKind, UnknownTrafficClass
from .graph import build_base_graph, build_traffic_class_graph
from .ilp.formulations import StateSpace, verify_p3_reachable_k, verify_p4_bounded_length, verify_p7_equal_bound
from .model import NetworkSpec
from .reach import (
    iter_valid_paths,
    verify_p1_always_blocked,
    verify_p2_always_waypoint,
    verify_p6_waypoint_chain,
    verify_p10_no_blackholes,
)
from .taint import propagate_taints
from .tpvp import multipath, run_tpvp
from .tyen import PreferencePolicy, run_tyen
from .verdict import Verdict, device_path

KINDS = ("P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "P9", "P10")

# parameters each kind requires
REQUIRED = {
    "P1": (),
    "P2": ("waypoint",),
    "P3": ("k",),
    "P4": ("k",),
    "P5": ("preference",),
    "P6": ("waypoints",),
    "P7": (),
    "P8": (),
    "P9": (),
    "P10": (),
}


@dataclass
class PolicyRequest:
    kind: str
    traffic_class: Optional[str] = None
    traffic_classes: tuple = ()  # the pair for P8
    params: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, doc: dict) -> "PolicyRequest":
        try:
            kind = doc["policy"]
        except (KeyError, TypeError):
            raise SchemaError("request needs a 'policy' field") from None
        return cls(
            kind=kind,
            traffic_class=doc.get("traffic_class"),
            traffic_classes=tuple(doc.get("traffic_classes") or ()),
            params=dict(doc.get("params") or {}),
        )

    def to_json(self) -> dict:
        out = {"policy": self.kind, "params": dict(self.params)}
        if self.traffic_class is not None:
            out["traffic_class"] = self.traffic_class
        if self.traffic_classes:
            out["traffic_classes"] = list(self.traffic_classes)
        return out

    def validate(self, spec: NetworkSpec) -> None:
        if self.kind not in KINDS:
            raise UnknownPolicyKind(str(self.kind))
        for p in REQUIRED[self.kind]:
            if p not in self.params:
                raise SchemaError(f"{self.kind} needs parameter {p!r}")
        extra = set(self.params) - set(REQUIRED[self.kind])
        if extra:
            raise SchemaError(f"{self.kind} does not take {sorted(extra)}")
        names = list(self.traffic_classes) if self.kind == "P8" else [self.traffic_class]
        if self.kind == "P8" and len(names) != 2:
            raise SchemaError("P8 needs exactly two traffic classes")
        for n in names:
            if n is None or spec.traffic_class(n) is None:
                raise UnknownTrafficClass(str(n))
        for d in ([self.params["waypoint"]] if "waypoint" in self.params else []) + list(self.params.get("waypoints", [])):
            if spec.device(d) is None:
                raise UnknownDevice(d)
        if "k" in self.params and (not isinstance(self.params["k"], int) or self.params["k"] < (1 if self.kind == "P3" else 0)):
            raise SchemaError(f"bad K for {self.kind}")


class GraphCache:
    """Base graph plus tainted traffic-class graphs, built on first use."""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        self._base = None
        self._tc = {}
        self.timings = {"base": 0.0, "graph_build": 0.0, "taint": 0.0}  # seconds

    @property
    def base(self):
        if self._base is None:
            t = time.perf_counter()
            self._base = build_base_graph(self.spec)
            self.timings["base"] += time.perf_counter() - t
        return self._base

    def graph(self, tc: str, keep_acl_edges: bool = False):
        key = (tc, keep_acl_edges)
        g = self._tc.get(key)
        if g is None:
            base = self.base
            t0 = time.perf_counter()
            g = build_traffic_class_graph(base, tc, self.spec, keep_acl_edges)
            t1 = time.perf_counter()
            g = propagate_taints(g)
            self.timings["graph_build"] += t1 - t0
            self.timings["taint"] += time.perf_counter() - t1
            self._tc[key] = g
        return g


def _links_on_valid_paths(g) -> tuple:
    """Links carrying some valid simple src-dst path; falls back to all valid walks on large graphs."""
    used = set()
    try:
        for path in iter_valid_paths(g):
            for a, b in zip(path, path[1:]):
                for e in g.out(a):
                    if e.dst == b and e.link is not None:
                        used.add(e.link)
        return used, True
    except IterationLimit:
        space = StateSpace(g)
        return {e.link for _, _, e in space.trans if e.link is not None}, False


def verify_p8_isolated(tc_a: str, tc_b: str, spec: NetworkSpec, cache: Optional[GraphCache] = None) -> Verdict:
    """Two classes are isolated when no link carries a valid path of both."""
    cache = cache or GraphCache(spec)
    used, diags = [], []
    for name in (tc_a, tc_b):
        if spec.traffic_class(name) is None:
            raise UnknownTrafficClass(name)
        links, exact = _links_on_valid_paths(cache.graph(name))
        used.append(links)
        if not exact:
            diags.append(f"{name}: path enumeration budget hit, using every valid walk")
    shared = sorted(used[0] & used[1])
    if not shared:
        return Verdict("P8", True, None, diags)
    return Verdict("P8", False, {"hedge": shared[0]}, diags + [{"shared": shared}])


def verify_p9_multipath_consistency(tc: str, spec: NetworkSpec, cache: Optional[GraphCache] = None) -> Verdict:
    """Some equal-cost branches deliver while others run into an ACL.

    The control plane does not see ACLs, so the branches are computed once
    on the graph that keeps ACL-denied edges; the count without ACLs is the
    number of those branches that cross no denied edge.
    """
    cache = cache or GraphCache(spec)
    if spec.traffic_class(tc) is None:
        raise UnknownTrafficClass(tc)
    g = cache.graph(tc, True)
    branches = [r for r in multipath(run_tpvp(g), apply_acls=False) if r.delivered]
    acl = g.acl_edges
    clean, blocked = [], []
    for r in branches:
        hit = any(e.dst == b and e.id in acl for a, b in zip(r.nodes, r.nodes[1:]) for e in g.out(a))
        (blocked if hit else clean).append(device_path(r.nodes))
    diags = [{"with_acl_edges": len(branches), "without_acl_edges": len(clean), "blocked": blocked}]
    if not clean or not blocked:
        return Verdict("P9", True, None, diags)
    return Verdict("P9", False, {"paths": clean, "blocked": blocked}, diags)


def verify(request: PolicyRequest, spec: NetworkSpec, cache: Optional[GraphCache] = None, keep_acl_edges: bool = False) -> Verdict:
    """Dispatch ``request`` to the module that decides it.

    ``keep_acl_edges`` makes the reachability checks run on the graph
    that still contains ACL-denied edges.
    """
    request.validate(spec)
    cache = cache or GraphCache(spec)
    kind, p = request.kind, request.params
    if kind == "P8":
        return verify_p8_isolated(request.traffic_classes[0], request.traffic_classes[1], spec, cache)
    tc = request.traffic_class
    if kind == "P9":
        return verify_p9_multipath_consistency(tc, spec, cache)
    g = cache.graph(tc, keep_acl_edges)
    if kind == "P1":
        return verify_p1_always_blocked(g)
    if kind == "P2":
        return verify_p2_always_waypoint(g, p["waypoint"])
    if kind == "P3":
        return verify_p3_reachable_k(cache.graph(tc, False), cache.graph(tc, True), p["k"])
    if kind == "P4":
        return verify_p4_bounded_length(g, p["k"])
    if kind == "P5":
        return run_tyen(cache.graph(tc, True), PreferencePolicy([list(x) for x in p["preference"]]))
    if kind == "P6":
        return verify_p6_waypoint_chain(g, list(p["waypoints"]))
    if kind == "P7":
        return verify_p7_equal_bound(g)
    if kind == "P10":
        return verify_p10_no_blackholes(cache.graph(tc, True), cache.graph(tc, False), spec)
    raise UnknownPolicyKind(kind)  # pragma: no cover - validate() already rejects it
