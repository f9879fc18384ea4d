"""Multilayer hedge graph construction.

Edges point in the direction traffic flows; advertisements travel the other
way. Every edge that rides a physical link is a member of that link's hedge.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

from .errors import UnknownTrafficClass
from .model import (
    BGP,
    BLOCK,
    DEFAULT_VRF,
    OSPF,
    ROUTER,
    SWITCH,
    NetworkSpec,
    TrafficClass,
    prefix_matches,
)

STATIC = "static"
LABELS = ("f", "b", "o", "s", "r", "i", "p")

AD_DEFAULT = {BGP: 20, "ibgp": 200, OSPF: 110, STATIC: 1}
LOCAL_PREF_DEFAULT = 100
MED_DEFAULT = 0


class NodeId(NamedTuple):
    device: str
    kind: str  # proc | vlan | fib | src | dst
    name: str

    def __str__(self):
        if self.kind in ("src", "dst"):
            return self.kind
        return f"{self.device}_{self.name}"


SRC = NodeId("", "src", "src")
DST = NodeId("", "dst", "dst")


def proc_node(device: str, protocol: str, vrf: str = DEFAULT_VRF) -> NodeId:
    return NodeId(device, "proc", protocol if vrf == DEFAULT_VRF else f"{protocol}@{vrf}")


def fib_node(device: str, vrf: str = DEFAULT_VRF) -> NodeId:
    return NodeId(device, "fib", "fib" if vrf == DEFAULT_VRF else f"fib@{vrf}")


def vlan_node(device: str, vlan: int) -> NodeId:
    return NodeId(device, "vlan", f"v{vlan}")


@dataclass(frozen=True)
class NodeInfo:
    protocol: Optional[str] = None  # bgp | ospf | static for process nodes
    vrf: str = DEFAULT_VRF
    process: Optional[str] = None
    as_number: Optional[int] = None


@dataclass(frozen=True)
class MetricVector:
    ad: Optional[int] = None
    local_pref: Optional[int] = None
    as_path_increment: Optional[int] = None
    med: Optional[int] = None
    ospf_cost: Optional[int] = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


NULL_METRICS = MetricVector()


@dataclass(frozen=True)
class Edge:
    id: int
    src: NodeId
    dst: NodeId
    label: str
    metrics: MetricVector = NULL_METRICS
    link: Optional[str] = None  # physical link id for inter-device edges

    @property
    def inter_device(self) -> bool:
        return self.link is not None


@dataclass
class LayeredGraph:
    nodes: list
    node_info: dict
    edges: dict  # id -> Edge, insertion ordered by id
    hedges: dict  # link id -> list of edge ids
    ibgp_peers: dict = field(default_factory=dict)  # bgp node -> tuple of peer bgp nodes
    ac: dict = field(default_factory=dict)
    rc: dict = field(default_factory=dict)
    mc: dict = field(default_factory=dict)  # node -> {community: (action, value)}
    taint: Optional[dict] = None
    tc: Optional[TrafficClass] = None
    acl_edges: frozenset = frozenset()  # edges an ACL denies for this traffic class
    ibgp_filtered: frozenset = frozenset()  # (bgp node, peer node) imports dropped by filters
    keep_acl_edges: bool = False
    spec: Optional[NetworkSpec] = None

    def __post_init__(self):
        self._reindex()

    def _reindex(self):
        self.out_edges = {n: [] for n in self.nodes}
        self.in_edges = {n: [] for n in self.nodes}
        for e in self.edges.values():
            self.out_edges[e.src].append(e.id)
            self.in_edges[e.dst].append(e.id)
        self._node_set = set(self.nodes)

    def __contains__(self, node) -> bool:
        return node in self._node_set

    def copy(self) -> "LayeredGraph":
        g = copy.copy(self)
        g.nodes = list(self.nodes)
        g.edges = dict(self.edges)
        g.hedges = {k: list(v) for k, v in self.hedges.items()}
        g.ac = dict(self.ac)
        g.rc = dict(self.rc)
        g.mc = dict(self.mc)
        g.taint = dict(self.taint) if self.taint is not None else None
        g._reindex()
        return g

    def derive(self, drop: set, added: dict, extra_nodes=()) -> "LayeredGraph":
        """Copy without edges ``drop`` plus edges ``added``, patching the adjacency in place of a full reindex."""
        g = copy.copy(self)
        g.edges = {i: e for i, e in self.edges.items() if i not in drop}
        g.edges.update(added)
        g.hedges = {k: [i for i in v if i not in drop] if drop else list(v) for k, v in self.hedges.items()}
        for e in added.values():
            if e.link is not None:
                g.hedges.setdefault(e.link, []).append(e.id)
        new = [n for n in extra_nodes if n not in self._node_set]
        g.nodes = sorted(self.nodes + new) if new else list(self.nodes)
        g._node_set = self._node_set | set(new)
        g.out_edges = {n: list(v) for n, v in self.out_edges.items()}
        g.in_edges = {n: list(v) for n, v in self.in_edges.items()}
        for n in new:
            g.out_edges[n], g.in_edges[n] = [], []
        for i in drop:
            e = self.edges.get(i)
            if e is not None:
                g.out_edges[e.src].remove(i)
                g.in_edges[e.dst].remove(i)
        for e in added.values():
            g.out_edges[e.src].append(e.id)
            g.in_edges[e.dst].append(e.id)
        g.ac, g.rc, g.mc = dict(self.ac), dict(self.rc), dict(self.mc)
        g.taint = dict(self.taint) if self.taint is not None else None
        return g

    # -- queries -----------------------------------------------------------

    @property
    def src(self) -> Optional[NodeId]:
        return SRC if SRC in self else None

    @property
    def dst(self) -> Optional[NodeId]:
        return DST if DST in self else None

    def out(self, node, masked=frozenset()) -> list:
        return [self.edges[i] for i in self.out_edges[node] if i not in masked]

    def inc(self, node, masked=frozenset()) -> list:
        return [self.edges[i] for i in self.in_edges[node] if i not in masked]

    def device_nodes(self, device: str) -> list:
        return [n for n in self.nodes if n.device == device]

    def protocol(self, node) -> Optional[str]:
        info = self.node_info.get(node)
        return info.protocol if info else None

    def is_switch(self, node) -> bool:
        return node.kind == "vlan"

    def is_tainted(self, node) -> bool:
        return bool(self.taint and self.taint.get(node, False))

    def hedge_of(self, edge_id: int) -> Optional[str]:
        return self.edges[edge_id].link

    def masked_edges(self, failed_links: Iterable[str]) -> frozenset:
        out = set()
        for lid in failed_links:
            out.update(self.hedges.get(lid, ()))
        return frozenset(out)

    def communities(self) -> list:
        cs = set()
        for table in (self.ac, self.rc):
            for v in table.values():
                cs.update(v)
        for v in self.mc.values():
            cs.update(v)
        return sorted(cs)

    def blocked(self, node) -> frozenset:
        return frozenset(c for c, (act, _) in self.mc.get(node, {}).items() if act == BLOCK)

    # -- mutation ------------------------------------------------------------

    def remove_edges(self, ids: Iterable[int]) -> None:
        ids = set(ids)
        if not ids:
            return
        for i in ids:
            self.edges.pop(i, None)
        for lid in list(self.hedges):
            self.hedges[lid] = [i for i in self.hedges[lid] if i not in ids]
        self._reindex()

    def remove_nodes(self, nodes: Iterable) -> "LayeredGraph":
        """Return a copy without ``nodes`` and their incident edges."""
        drop = set(nodes)
        g = self.copy()
        g.remove_edges(e.id for e in self.edges.values() if e.src in drop or e.dst in drop)
        g.nodes = [n for n in g.nodes if n not in drop]
        if g.taint is not None:
            g.taint = {n: t for n, t in g.taint.items() if n not in drop}
        g._reindex()
        return g

    def stats(self) -> dict:
        return {
            "nodes": len(self.nodes),
            "edges": len(self.edges),
            "hedges": sum(1 for v in self.hedges.values() if v),
        }

    def to_json(self) -> dict:
        out = {
            "nodes": [str(n) for n in self.nodes],
            "edges": [
                {
                    "id": e.id,
                    "from": str(e.src),
                    "to": str(e.dst),
                    "label": e.label,
                    "metrics": e.metrics.as_dict(),
                    "link": e.link,
                }
                for e in self.edges.values()
            ],
            "hedges": {k: list(v) for k, v in sorted(self.hedges.items()) if v},
            "communities": {
                str(n): {
                    "ac": sorted(self.ac.get(n, ())),
                    "rc": sorted(self.rc.get(n, ())),
                    "mc": {c: list(a) for c, a in sorted(self.mc.get(n, {}).items())},
                }
                for n in self.nodes
                if self.ac.get(n) or self.rc.get(n) or self.mc.get(n)
            },
        }
        if self.tc is not None:
            out["traffic_class"] = self.tc.name
            out["acl_edges"] = sorted(self.acl_edges)
        if self.taint is not None:
            out["taint"] = {str(n): bool(self.taint.get(n, False)) for n in self.nodes}
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


class _EdgeBuffer:
    def __init__(self):
        self.items = []

    def add(self, src, dst, label, metrics=NULL_METRICS, link=None):
        self.items.append((src, dst, label, metrics, link))

    def finish(self, start: int = 0) -> dict:
        self.items.sort(key=lambda t: (t[0], t[1], t[2], t[4] or ""))
        return {start + k: Edge(start + k, *t) for k, t in enumerate(self.items)}


def _bgp_edge_metrics(spec: NetworkSpec, receiver: str, sender: str, vrf: str) -> MetricVector:
    rproc = spec.device(receiver).process_for(BGP, vrf)
    sproc = spec.device(sender).process_for(BGP, vrf)
    return MetricVector(
        ad=AD_DEFAULT[BGP],
        local_pref=rproc.local_pref_in.get(sender, LOCAL_PREF_DEFAULT),
        as_path_increment=1,
        med=sproc.med_out.get(receiver, MED_DEFAULT),
    )


def _ebgp_peers(spec: NetworkSpec, a: str, b: str, vrf: str) -> bool:
    pa = spec.device(a).process_for(BGP, vrf)
    if pa is None:
        return False
    return any(n.device == b and n.type == "ebgp" for n in pa.neighbors)


def build_base_graph(spec: NetworkSpec) -> LayeredGraph:
    """Compile ``spec`` into the traffic-class independent multilayer graph."""
    nodes, info = [], {}
    buf = _EdgeBuffer()

    for dev in spec.devices:
        if dev.kind == SWITCH:
            for vid in sorted({i.vlan for i in dev.interfaces if i.vlan is not None}):
                n = vlan_node(dev.name, vid)
                nodes.append(n)
                info[n] = NodeInfo()
            continue
        vrfs = sorted({p.vrf for p in dev.processes} | ({DEFAULT_VRF} if dev.static_routes else set()))
        for vrf in vrfs:
            fib = fib_node(dev.name, vrf)
            nodes.append(fib)
            info[fib] = NodeInfo(vrf=vrf)
        for p in dev.processes:
            n = proc_node(dev.name, p.protocol, p.vrf)
            nodes.append(n)
            info[n] = NodeInfo(p.protocol, p.vrf, p.name, p.as_number)
            buf.add(n, fib_node(dev.name, p.vrf), "f")
            buf.add(fib_node(dev.name, p.vrf), n, "f")
        if dev.static_routes:
            n = proc_node(dev.name, STATIC)
            nodes.append(n)
            info[n] = NodeInfo(STATIC, DEFAULT_VRF, STATIC)
            buf.add(n, fib_node(dev.name), "f")
            buf.add(fib_node(dev.name), n, "f")
        for p in dev.processes:
            here = proc_node(dev.name, p.protocol, p.vrf)
            for srcname in p.redistributes_from:
                other = dev.process(srcname)
                buf.add(here, proc_node(dev.name, other.protocol, other.vrf), "r", MetricVector(ad=AD_DEFAULT[p.protocol]))
            if p.protocol == BGP and any(n.type == "ibgp" for n in p.neighbors):
                if dev.process_for(OSPF, p.vrf) is not None:
                    buf.add(here, proc_node(dev.name, OSPF, p.vrf), "i")

    for lk in sorted(spec.links, key=lambda x: x.id):
        da, db = spec.device(lk.a.device), spec.device(lk.b.device)
        ia, ib = da.interface(lk.a.interface), db.interface(lk.b.interface)
        if da.kind == SWITCH and db.kind == SWITCH:
            if ia.vlan == ib.vlan:
                u, v = vlan_node(da.name, ia.vlan), vlan_node(db.name, ib.vlan)
                buf.add(u, v, "p", link=lk.id)
                buf.add(v, u, "p", link=lk.id)
            continue
        if da.kind == SWITCH or db.kind == SWITCH:
            sw, sw_itf, rt, rt_itf = (da, ia, db, ib) if da.kind == SWITCH else (db, ib, da, ia)
            s = vlan_node(sw.name, sw_itf.vlan)
            for p in rt.processes:
                if p.vrf != rt_itf.vrf:
                    continue
                r = proc_node(rt.name, p.protocol, p.vrf)
                cost = p.ospf_cost(rt_itf.name) if p.protocol == OSPF else None
                buf.add(r, s, "p", MetricVector(ospf_cost=cost), lk.id)
                buf.add(s, r, "p", link=lk.id)
            continue
        vrf = ia.vrf
        oa, ob = da.process_for(OSPF, vrf), db.process_for(OSPF, vrf)
        if oa is not None and ob is not None:
            u, v = proc_node(da.name, OSPF, vrf), proc_node(db.name, OSPF, vrf)
            buf.add(u, v, "o", MetricVector(ad=AD_DEFAULT[OSPF], ospf_cost=oa.ospf_cost(ia.name)), lk.id)
            buf.add(v, u, "o", MetricVector(ad=AD_DEFAULT[OSPF], ospf_cost=ob.ospf_cost(ib.name)), lk.id)
        if _ebgp_peers(spec, da.name, db.name, vrf) and _ebgp_peers(spec, db.name, da.name, vrf):
            u, v = proc_node(da.name, BGP, vrf), proc_node(db.name, BGP, vrf)
            buf.add(u, v, "b", _bgp_edge_metrics(spec, da.name, db.name, vrf), lk.id)
            buf.add(v, u, "b", _bgp_edge_metrics(spec, db.name, da.name, vrf), lk.id)

    nodes.sort()
    edges = buf.finish()
    hedges = {lk.id: [] for lk in sorted(spec.links, key=lambda x: x.id)}
    for e in edges.values():
        if e.link is not None:
            hedges[e.link].append(e.id)

    ibgp = {}
    for dev in spec.routers():
        for p in dev.processes:
            if p.protocol != BGP:
                continue
            peers = sorted(
                proc_node(n.device, BGP, p.vrf) for n in p.neighbors if n.type == "ibgp"
            )
            if peers:
                ibgp[proc_node(dev.name, BGP, p.vrf)] = tuple(peers)
    return LayeredGraph(nodes=nodes, node_info=info, edges=edges, hedges=hedges, ibgp_peers=ibgp, spec=spec)


def _acl_edge_ids(g: LayeredGraph, spec: NetworkSpec, tc: TrafficClass) -> set:
    denied = set()
    for dev in spec.devices:
        for acl in dev.acls:
            if not acl.denies(tc):
                continue
            for lk in spec.links:
                if (lk.a.device, lk.a.interface) == (dev.name, acl.interface) or (
                    lk.b.device,
                    lk.b.interface,
                ) == (dev.name, acl.interface):
                    for eid in g.hedges.get(lk.id, ()):
                        e = g.edges[eid]
                        if acl.direction == "out" and e.src.device == dev.name:
                            denied.add(eid)
                        elif acl.direction == "in" and e.dst.device == dev.name:
                            denied.add(eid)
    return denied


def acl_routers(spec: NetworkSpec, tc: TrafficClass) -> list:
    """Routers carrying at least one ACL that denies ``tc``."""
    return sorted({d.name for d in spec.devices for a in d.acls if a.denies(tc)})


def build_traffic_class_graph(
    base: LayeredGraph, tc, spec: NetworkSpec, keep_acl_edges: bool = False
) -> LayeredGraph:
    """Specialize ``base`` for one traffic class (ACLs, filters, statics, endpoints, communities)."""
    if isinstance(tc, str):
        name = tc
        tc = spec.traffic_class(name)
        if tc is None:
            raise UnknownTrafficClass(name)
    elif spec.traffic_class(tc.name) != tc:
        raise UnknownTrafficClass(tc.name)

    g = base  # read-only until derive()
    drop = set()
    denied = _acl_edge_ids(g, spec, tc)
    if not keep_acl_edges:
        drop |= denied

    filtered_ibgp = set()
    for dev in spec.routers():
        for p in dev.processes:
            node = proc_node(dev.name, p.protocol, p.vrf)
            for flt in p.route_filters:
                if not prefix_matches(flt.prefix, tc.dst_prefix):
                    continue
                for e in g.out(node):
                    if e.label == "f":
                        continue
                    if flt.neighbor is None:
                        drop.add(e.id)
                    elif e.inter_device and e.dst.device == flt.neighbor:
                        drop.add(e.id)
                for peer in g.ibgp_peers.get(node, ()):
                    if flt.neighbor is None or flt.neighbor == peer.device:
                        filtered_ibgp.add((node, peer))

    # new edges get ids after the base ones so base ids stay stable
    buf = _EdgeBuffer()
    for dev in spec.routers():
        for st in dev.static_routes:
            if not prefix_matches(st.dst_prefix, tc.dst_prefix):
                continue
            here = proc_node(dev.name, STATIC)
            nh = spec.device(st.next_hop_router)
            targets = [n for n in g.nodes if n.device == nh.name and n.kind in ("proc", "fib")]
            for lk in spec.links_between(dev.name, nh.name):
                for t in sorted(targets):
                    buf.add(here, t, "s", MetricVector(ad=AD_DEFAULT[STATIC]), lk.id)
    if tc.src_router != tc.dst_router:
        for n in g.nodes:
            if n.device == tc.src_router and n.kind == "proc":
                buf.add(SRC, n, "f")
        for n in g.nodes:
            if n.device == tc.dst_router and n.kind == "proc" and g.protocol(n) in (BGP, OSPF):
                buf.add(n, DST, "f")

    # a packet at the destination router is delivered there, never forwarded on
    if any(t == DST for _, t, *_ in buf.items):
        for n in g.nodes:
            if n.device == tc.dst_router:
                drop.update(e.id for e in g.out(n) if e.dst.device != tc.dst_router)
    start = max(base.edges, default=-1) + 1
    g = base.derive(drop, buf.finish(start), (SRC, DST))
    g.tc = tc
    g.keep_acl_edges = keep_acl_edges
    g.spec = spec
    g.node_info = dict(g.node_info)
    g.node_info.setdefault(SRC, NodeInfo())
    g.node_info.setdefault(DST, NodeInfo())
    g.acl_edges = frozenset(denied)
    g.ibgp_filtered = frozenset(filtered_ibgp)

    ac, rc, mc = {}, {}, {}
    for dev in spec.routers():
        for p in dev.processes:
            if p.protocol != BGP:
                continue
            node = proc_node(dev.name, BGP, p.vrf)
            adds = frozenset(t.community for t in p.adds if prefix_matches(t.prefix, tc.dst_prefix))
            rems = frozenset(t.community for t in p.removes if prefix_matches(t.prefix, tc.dst_prefix))
            mts = {
                m.community: (m.action, m.value)
                for m in p.matches
                if prefix_matches(m.prefix, tc.dst_prefix)
            }
            if adds:
                ac[node] = adds
            if rems:
                rc[node] = rems
            if mts:
                mc[node] = mts
    g.ac, g.rc, g.mc = ac, rc, mc
    g.taint = None
    return g
