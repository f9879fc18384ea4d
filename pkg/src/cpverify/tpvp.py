"""Multi-metric path-vector computation and hop-by-hop forwarding.

``run_tpvp`` computes, for every process node of a traffic-class graph, the
route it holds toward the destination once the computation settles. Route
sources follow the protocols: origination at the destination router, OSPF
and eBGP neighbours (directly or across a VLAN), redistribution inside a
router, iBGP sessions resolved over the IGP, and static routes. FIB nodes
pick the best process route by administrative distance.

``forward`` then walks the data plane. At every router the packet follows
that router's own FIB entry; an iBGP-learned entry sends it one IGP hop
toward the BGP next hop, after which the next router decides again. This
is what lets traffic leave the IGP early at a router that has its own
exit, and what drops it at a transit router that knows no route.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import NonConvergence
from .graph import (
    AD_DEFAULT,
    DST,
    LOCAL_PREF_DEFAULT,
    MED_DEFAULT,
    SRC,
    STATIC,
    LayeredGraph,
    fib_node,
    proc_node,
)
from .model import BGP, OSPF, SET_LOCAL_PREF, SET_MED
from .taint import path_run_ok


@dataclass(frozen=True)
class PathCost:
    ad: int = 0
    local_pref: int = LOCAL_PREF_DEFAULT
    as_path_len: int = 0
    med: int = MED_DEFAULT
    igp_cost: int = 0

    def key(self) -> tuple:
        return (self.ad, -self.local_pref, self.as_path_len, self.med, self.igp_cost)


ORIGIN_COST = PathCost()


@dataclass(frozen=True)
class Advertisement:
    """A route held at ``path[0]``; ``path`` runs toward the destination.

    ``via`` records how it was learned (origin, ospf, ebgp, ibgp, redist,
    static, fib); ``edge`` is the graph edge the traffic leaves on, when the
    route was learned across one; ``peer`` is the iBGP next hop.
    """

    path: tuple
    cost: PathCost
    communities: frozenset = frozenset()
    as_path: tuple = ()
    via: str = "origin"
    edge: Optional[int] = None
    peer: Optional[object] = None

    @property
    def next_node(self):
        return self.path[1] if len(self.path) > 1 else None


def choice_key(adv: Advertisement) -> tuple:
    nxt = adv.next_node
    return adv.cost.key() + ((nxt.device, nxt.kind, nxt.name) if nxt is not None else ("",), adv.edge or -1)


def choices(candidates) -> Optional[Advertisement]:
    """Best advertisement: lowest AD, highest local-pref, shortest AS path, lowest MED, lowest IGP cost, smallest next hop."""
    cands = [c for c in candidates if c is not None]
    if not cands:
        return None
    return min(cands, key=choice_key)


def tie_set(candidates) -> list:
    """All candidates whose metrics equal the best one's (the ECMP set)."""
    cands = [c for c in candidates if c is not None]
    if not cands:
        return []
    best = min(c.cost.key() for c in cands)
    return sorted((c for c in cands if c.cost.key() == best), key=choice_key)


def _asn(g: LayeredGraph, node) -> Optional[int]:
    info = g.node_info.get(node)
    return info.as_number if info else None


def update_cost(g: LayeredGraph, u, adv: Optional[Advertisement], kind: str, edge=None, igp: int = 0, prefix=()):
    """Extend ``adv`` (held by a neighbour of ``u``) to ``u`` or return None when ``u`` must reject it.

    ``kind`` is the way the route arrives: ``o``/``b`` across a link, ``l2``
    across a VLAN segment (``prefix`` holds the switch nodes crossed), ``r``
    by redistribution, ``i`` over an iBGP session with IGP distance ``igp``.
    """
    if adv is None or u in adv.path:
        return None
    path = (u,) + tuple(prefix) + adv.path
    if not path_run_ok(g, path):
        return None
    if adv.communities & g.blocked(u):
        return None
    proto = g.protocol(u)
    c = adv.cost
    as_path = adv.as_path
    eid = edge.id if edge is not None else None
    if kind == "r":
        cost = PathCost(ad=AD_DEFAULT[proto] if proto in AD_DEFAULT else 0)
        as_path, via = (), "redist"
    elif proto == OSPF:
        step = edge.metrics.ospf_cost if edge is not None and edge.metrics.ospf_cost else 1
        cost = PathCost(ad=AD_DEFAULT[OSPF], igp_cost=c.igp_cost + step)
        via = "ospf"
    elif kind == "i":
        cost = replace(c, ad=AD_DEFAULT["ibgp"], igp_cost=igp)
        via = "ibgp"
    else:  # eBGP over a link or a VLAN segment
        sender = adv.path[0]
        s_as = _asn(g, sender)
        as_path = (s_as,) + as_path
        lp, med = LOCAL_PREF_DEFAULT, MED_DEFAULT
        if edge is not None and edge.metrics.local_pref is not None:
            lp, med = edge.metrics.local_pref, edge.metrics.med or 0
        elif g.spec is not None:
            lp, med = _session_metrics(g, u, sender)
        cost = PathCost(ad=AD_DEFAULT[BGP], local_pref=lp, as_path_len=len(as_path), med=med, igp_cost=0)
        via = "ebgp"
    comms = adv.communities
    if proto == BGP and kind in ("b", "l2", "i"):
        for com, (action, value) in sorted(g.mc.get(u, {}).items()):
            if com in comms and action == SET_LOCAL_PREF and value is not None:
                cost = replace(cost, local_pref=value)
            elif com in comms and action == SET_MED and value is not None:
                cost = replace(cost, med=value)
    comms = (comms - g.rc.get(u, frozenset())) | g.ac.get(u, frozenset())
    return Advertisement(path, cost, comms, as_path, via, eid, adv.path[0] if kind == "i" else None)


def _session_metrics(g, receiver, sender):
    rp = g.spec.device(receiver.device).process_for(BGP, g.node_info[receiver].vrf)
    sp = g.spec.device(sender.device).process_for(BGP, g.node_info[sender].vrf)
    return rp.local_pref_in.get(sender.device, LOCAL_PREF_DEFAULT), sp.med_out.get(receiver.device, MED_DEFAULT)


@dataclass
class RibState:
    graph: LayeredGraph
    masked: frozenset
    rib: dict = field(default_factory=dict)
    rib_in: dict = field(default_factory=dict)  # (node, source key) -> Advertisement
    ties: dict = field(default_factory=dict)
    rounds: int = 0
    igp: Optional["IgpTables"] = None

    def best(self, node) -> Optional[Advertisement]:
        return self.rib.get(node)


class IgpTables:
    """Shortest IGP distances toward OSPF nodes, computed lazily per target."""

    def __init__(self, g: LayeredGraph, masked, l2):
        self.g = g
        self.masked = masked
        self.rev = {}
        for e in g.edges.values():
            if e.id in masked or e.label != "o":
                continue
            self.rev.setdefault(e.dst, []).append((e.src, e.metrics.ospf_cost or 1, e.id))
        for u, lst in l2.items():
            if g.protocol(u) != OSPF:
                continue
            for v, _, first in lst:
                self.rev.setdefault(v, []).append((u, first.metrics.ospf_cost or 1, None))
        self._cache = {}

    def dist_to(self, target) -> dict:
        d = self._cache.get(target)
        if d is None:
            d = {target: 0}
            heap = [(0, target)]
            while heap:
                du, u = heapq.heappop(heap)
                if du > d.get(u, du):
                    continue
                for w, c, _ in self.rev.get(u, ()):
                    nd = du + c
                    if nd < d.get(w, nd + 1):
                        d[w] = nd
                        heapq.heappush(heap, (nd, w))
            self._cache[target] = d
        return d


def _l2_neighbors(g: LayeredGraph, masked) -> dict:
    """Router process nodes that reach each other across switch VLAN segments.

    Maps a process node to ``(peer, switch_nodes, first_edge)`` triples,
    one per peer, using the fewest switch hops (ties to the smallest path).
    """
    out = {}
    for u in g.nodes:
        if u.kind != "proc":
            continue
        firsts = [e for e in g.out(u, masked) if e.label == "p"]
        if not firsts:
            continue
        proto = g.protocol(u)
        found = {}
        for first in firsts:
            seen = {first.dst: (first.dst,)}
            frontier = [first.dst]
            while frontier:
                nxt = []
                for s in frontier:
                    for e in g.out(s, masked):
                        if e.label != "p":
                            continue
                        if e.dst.kind == "vlan":
                            if e.dst not in seen:
                                seen[e.dst] = seen[s] + (e.dst,)
                                nxt.append(e.dst)
                        elif e.dst != u and e.dst.device != u.device and g.protocol(e.dst) == proto:
                            cand = (len(seen[s]), seen[s], first)
                            if e.dst not in found or cand[:2] < found[e.dst][:2]:
                                found[e.dst] = cand
                frontier = sorted(nxt)
        if found:
            out[u] = [(v, found[v][1], found[v][2]) for v in sorted(found)]
    return out


def _ebgp_over_l2(g, u, v) -> bool:
    if g.spec is None:
        return False
    p = g.spec.device(u.device).process_for(BGP, g.node_info[u].vrf)
    return p is not None and any(n.device == v.device and n.type == "ebgp" for n in p.neighbors)


def run_tpvp(g: LayeredGraph, dst=DST, failed=(), max_rounds: Optional[int] = None) -> RibState:
    """Compute every node's settled route under the failure of links ``failed``.

    Nodes are revisited in a fixed sorted order until a full pass changes
    nothing; more than |nodes|^2 passes raises NonConvergence.
    """
    masked = g.masked_edges(failed)
    l2 = _l2_neighbors(g, masked)
    igp = IgpTables(g, masked, l2)
    st = RibState(g, masked, igp=igp)
    origin = Advertisement((dst,), ORIGIN_COST)
    st.rib[dst] = origin
    order = [n for n in g.nodes if n.kind in ("proc", "fib")]
    procs_of = {}
    for n in order:
        if n.kind == "proc":
            procs_of.setdefault(fib_node(n.device, g.node_info[n].vrf), []).append(n)
    ibgp = {u: [p for p in peers if p in g and (u, p) not in g.ibgp_filtered] for u, peers in g.ibgp_peers.items()}
    has_igp = {u: proc_node(u.device, OSPF, g.node_info[u].vrf) for u in ibgp}

    def candidates(u):
        if u.kind == "fib":
            out = []
            for p in procs_of.get(u, ()):
                a = st.rib.get(p)
                if a is not None and u not in a.path:
                    out.append(Advertisement((u,) + a.path, a.cost, a.communities, a.as_path, "fib", None))
            return out
        proto = g.protocol(u)
        out = []
        for e in g.out(u, masked):
            lab = e.label
            if lab == "f" and e.dst == dst:
                out.append(Advertisement((u, dst), ORIGIN_COST, g.ac.get(u, frozenset())))
            elif lab in ("o", "b"):
                out.append(update_cost(g, u, st.rib.get(e.dst), lab, e))
            elif lab == "r":
                out.append(update_cost(g, u, st.rib.get(e.dst), "r", e))
            elif lab == "s" and e.dst.kind == "fib":
                nxt = st.rib.get(e.dst)
                if nxt is not None and u not in nxt.path:
                    path = (u,) + nxt.path
                else:
                    path = (u, e.dst)
                out.append(Advertisement(path, PathCost(ad=AD_DEFAULT[STATIC]), frozenset(), (), "static", e.id))
        for v, switches, first in l2.get(u, ()):
            if proto == BGP and not _ebgp_over_l2(g, u, v):
                continue
            a = update_cost(g, u, st.rib.get(v), "l2", first if proto == OSPF else None, prefix=switches)
            if a is not None:
                a = replace(a, edge=first.id)
            out.append(a)
        if proto == BGP and u in ibgp:
            ig = has_igp.get(u)
            for p in ibgp[u]:
                a = st.rib.get(p)
                if a is None or a.via == "ibgp":
                    continue  # iBGP-learned routes are not passed on to iBGP peers
                pig = proc_node(p.device, OSPF, g.node_info[p].vrf)
                if ig not in g or pig not in g:
                    continue
                d = igp.dist_to(pig).get(ig)
                if d is None:
                    continue
                out.append(update_cost(g, u, a, "i", igp=d))
        return out

    budget = max_rounds if max_rounds is not None else max(len(g.nodes) ** 2, 4)
    while True:
        st.rounds += 1
        if st.rounds > budget:
            raise NonConvergence(f"no fixed point after {budget} rounds")
        changed = False
        for u in order:
            cands = candidates(u)
            best = choices(cands)
            if best != st.rib.get(u):
                changed = True
                if best is None:
                    st.rib.pop(u, None)
                else:
                    st.rib[u] = best
        if not changed:
            break
    for u in order:
        cands = [c for c in candidates(u) if c is not None]
        for c in cands:
            st.rib_in[(u, c.path[1] if len(c.path) > 1 else None, c.edge)] = c
        st.ties[u] = tie_set(cands)
    src_fib = None
    if g.tc is not None:
        src_fib = st.rib.get(fib_node(g.tc.src_router))
    if src_fib is not None:
        st.rib[SRC] = Advertisement((SRC,) + src_fib.path[1:], src_fib.cost, src_fib.communities, src_fib.as_path, "src")
    return st


def unstable_nodes(state: RibState, dst=DST) -> list:
    """Nodes that would switch route if offered their current candidates again.

    Empty for a stable assignment: every node holds its best candidate and
    every held route is loop-free and ends at ``dst`` (unless a static
    route along it points at a next hop that does not resolve).
    """
    offered = {}
    for (u, _, _), c in state.rib_in.items():
        offered.setdefault(u, []).append(c)
    bad = []
    for u in sorted({n for n in state.rib if n != SRC and n != dst} | set(offered)):
        best = state.rib.get(u)
        alt = choices(offered.get(u, ()))
        if best is None:
            if alt is not None:
                bad.append(u)
            continue
        if alt is None or choice_key(alt) < choice_key(best):
            bad.append(u)
        elif len(set(best.path)) != len(best.path):
            bad.append(u)
        elif best.path[-1] != dst and not any(n.kind == "proc" and n.name == STATIC for n in best.path):
            bad.append(u)  # only a configured static may point at an unresolved next hop
    return bad


# --- data plane ----------------------------------------------------------------


@dataclass
class Forwarding:
    status: str  # delivered | dropped | loop
    nodes: list
    reason: str = ""
    device: Optional[str] = None

    @property
    def delivered(self) -> bool:
        return self.status == "delivered"


def _edge_between(g, masked, a, b, label=None):
    for e in g.out(a, masked):
        if e.dst == b and (label is None or e.label == label):
            return e
    return None


def forward(state: RibState, multipath: bool = False, apply_acls: bool = True, limit: int = 64) -> list:
    """Walk packets from src hop by hop; returns one Forwarding per distinct path (one unless ``multipath``)."""
    g = state.graph
    tc = g.tc
    masked = state.masked
    acl = g.acl_edges if apply_acls else frozenset()
    results = []

    def pick(node):
        if multipath:
            return state.ties.get(node) or ([] if state.rib.get(node) is None else [state.rib[node]])
        a = state.rib.get(node)
        return [a] if a is not None else []

    def cross(nodes, devices, e, arrival_hook):
        if e.id in acl:
            results.append(Forwarding("dropped", nodes + [e.dst], "acl", e.src.device))
            return
        arrival_hook(nodes + [e.dst], devices)

    def at_device(nodes, devices, arrival):
        if len(results) >= limit:
            return
        dev = arrival.device
        if dev in devices:
            results.append(Forwarding("loop", nodes, "loop", dev))
            return
        devices = devices | {dev}
        if dev == tc.dst_router:
            if arrival.kind == "proc" and _edge_between(g, masked, arrival, DST) is not None:
                results.append(Forwarding("delivered", nodes + [DST]))
                return
            fib = fib_node(dev, g.node_info[arrival].vrf if arrival in g.node_info else "default_vrf")
            for a in pick(fib):
                seq = nodes + ([fib] if arrival != fib else []) + [a.path[1], DST]
                results.append(Forwarding("delivered", seq))
            if not pick(fib):
                results.append(Forwarding("dropped", nodes, "no-route", dev))
            return
        vrf = g.node_info[arrival].vrf if arrival in g.node_info else "default_vrf"
        fib = fib_node(dev, vrf)
        entries = pick(fib) if fib in g else []
        if not entries:
            results.append(Forwarding("dropped", nodes, "no-route", dev))
            return
        for a in entries:
            p = a.path[1]
            seq = list(nodes)
            if arrival != p:
                if arrival.kind != "fib":
                    seq.append(fib)
                if seq[-1] != p:
                    seq.append(p)
            follow(seq, devices, p)

    def follow(nodes, devices, p):
        if len(results) >= limit:
            return
        for a in pick(p):
            nxt = a.next_node
            if nxt is None:
                results.append(Forwarding("dropped", nodes, "no-route", p.device))
                continue
            if a.via == "ibgp":
                ig = proc_node(p.device, OSPF, g.node_info[p].vrf)
                peer_ig = proc_node(a.peer.device, OSPF, g.node_info[a.peer].vrf)
                _igp_hop(nodes + [ig], devices, ig, peer_ig)
                continue
            if nxt.device == p.device:
                follow(nodes + [nxt], devices, nxt)
                continue
            if a.edge is not None:
                e = g.edges[a.edge]
            else:
                e = _edge_between(g, masked, p, nxt)
            if e is None:
                results.append(Forwarding("dropped", nodes, "no-route", p.device))
                continue
            if e.dst.kind == "vlan":
                _through_l2(nodes, devices, e, a)
                continue
            cross(nodes, devices, e, lambda seq, devs: at_device(seq, devs, seq[-1]))

    def _through_l2(nodes, devices, first, a):
        seq = list(nodes)
        i = 1
        prev = a.path[0]
        while a.path[i].kind == "vlan":
            e = first if i == 1 else _edge_between(g, masked, prev, a.path[i], "p")
            if e is None or e.id in acl:
                results.append(Forwarding("dropped", seq + [a.path[i]], "acl" if e is not None else "no-route", prev.device))
                return
            seq.append(a.path[i])
            prev = a.path[i]
            i += 1
        e = _edge_between(g, masked, prev, a.path[i], "p")
        if e is None:
            results.append(Forwarding("dropped", seq, "no-route", prev.device))
            return
        cross(seq, devices, e, lambda s2, devs: at_device(s2, devs, s2[-1]))

    def _igp_hop(nodes, devices, here, target):
        d = state.igp.dist_to(target)
        if here not in d:
            results.append(Forwarding("dropped", nodes, "no-route", here.device))
            return
        best = None
        hops = []
        for e in g.out(here, masked):
            if e.label != "o" or e.dst not in d:
                continue
            total = (e.metrics.ospf_cost or 1) + d[e.dst]
            if best is None or total < best:
                best, hops = total, [e]
            elif total == best:
                hops.append(e)
        l2hops = []
        for v, switches, first in _l2_cache(state).get(here, ()):
            if v in d:
                total = (first.metrics.ospf_cost or 1) + d[v]
                if best is None or total < best:
                    best, hops, l2hops = total, [], [(v, switches, first)]
                elif total == best:
                    l2hops.append((v, switches, first))
        if not hops and not l2hops:
            results.append(Forwarding("dropped", nodes, "no-route", here.device))
            return
        hops.sort(key=lambda e: (e.dst, e.id))
        if not multipath:
            if hops:
                hops, l2hops = hops[:1], []
            else:
                l2hops = l2hops[:1]
        for e in hops:
            cross(nodes, devices, e, lambda seq, devs: at_device(seq, devs, seq[-1]))
        for v, switches, first in l2hops:
            fake = Advertisement((here,) + tuple(switches) + (v,), ORIGIN_COST, edge=first.id)
            _through_l2(nodes, devices, first, fake)

    if tc.src_router == tc.dst_router:
        return [Forwarding("delivered", [SRC, DST])]
    src_fib = fib_node(tc.src_router)
    entries = pick(src_fib) if src_fib in g else []
    if not entries:
        return [Forwarding("dropped", [SRC], "no-route", tc.src_router)]
    for a in entries:
        p = a.path[1]
        follow([SRC, p], frozenset({tc.src_router}), p)
    return results[:limit] if multipath else results[:1]


def _l2_cache(state: RibState) -> dict:
    c = getattr(state, "_l2", None)
    if c is None:
        c = _l2_neighbors(state.graph, state.masked)
        state._l2 = c
    return c


def extract_path(state: RibState, src=SRC) -> Optional[list]:
    """Traffic-direction node path from ``src`` to dst, or None when the packet is not delivered."""
    if state.rib.get(SRC) is None and state.graph.tc is not None and state.graph.tc.src_router != state.graph.tc.dst_router:
        return None
    res = forward(state)
    if res and res[0].delivered:
        return res[0].nodes
    return None


def multipath(state: RibState, apply_acls: bool = False) -> list:
    """All equal-cost forwarding paths (ECMP at every decision point)."""
    return forward(state, multipath=True, apply_acls=apply_acls)
