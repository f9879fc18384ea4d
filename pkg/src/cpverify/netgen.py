"""Programmatic network construction and the seeded random network generator."""

from __future__ import annotations

import copy
import random
from typing import Optional

from .model import from_dict


class NetBuilder:
    """Small helper that assembles a network document without hand-written JSON.

    Router interfaces are named after the peer device (``to_B``); a second
    parallel link gets ``to_B_2`` and so on.
    """

    def __init__(self):
        self.devices = {}
        self.links = []
        self.tcs = []

    # devices ---------------------------------------------------------------

    def router(self, name: str) -> dict:
        d = self.devices.setdefault(
            name,
            {"name": name, "kind": "router", "interfaces": [], "processes": [], "acls": [], "static_routes": []},
        )
        return d

    def switch(self, name: str) -> dict:
        return self.devices.setdefault(name, {"name": name, "kind": "switch", "interfaces": []})

    def _proc(self, dev: str, protocol: str) -> Optional[dict]:
        for p in self.devices[dev]["processes"]:
            if p["protocol"] == protocol:
                return p
        return None

    def ospf(self, *names: str) -> "NetBuilder":
        for n in names:
            d = self.router(n)
            if self._proc(n, "ospf") is None:
                d["processes"].append({"name": "ospf", "protocol": "ospf", "interface_costs": {}})
        return self

    def bgp(self, name: str, asn: int) -> "NetBuilder":
        d = self.router(name)
        if self._proc(name, "bgp") is None:
            d["processes"].append({"name": "bgp", "protocol": "bgp", "as_number": asn, "neighbors": []})
        return self

    def peer(self, a: str, b: str, kind: str = "ebgp") -> "NetBuilder":
        for x, y in ((a, b), (b, a)):
            nb = self._proc(x, "bgp")["neighbors"]
            if not any(n["device"] == y for n in nb):
                nb.append({"device": y, "type": kind})
        return self

    def redistribute(self, dev: str, into: str, source: str) -> "NetBuilder":
        p = self._proc(dev, into)
        p.setdefault("redistributes_from", []).append(self._proc(dev, source)["name"])
        return self

    def filter(self, dev: str, protocol: str, prefix: str, neighbor: Optional[str] = None) -> "NetBuilder":
        p = self._proc(dev, protocol)
        p.setdefault("route_filters", []).append({"prefix": prefix, "neighbor": neighbor})
        return self

    def community(self, dev: str, kind: str, community: str, action: Optional[str] = None, value=None):
        p = self._proc(dev, "bgp")
        ca = p.setdefault("community_actions", {})
        if kind == "matches":
            ca.setdefault("matches", []).append({"community": community, "action": action, "value": value})
        else:
            ca.setdefault(kind, []).append({"community": community})
        return self

    def local_pref(self, dev: str, neighbor: str, value: int) -> "NetBuilder":
        self._proc(dev, "bgp").setdefault("local_pref_in", {})[neighbor] = value
        return self

    def med(self, dev: str, neighbor: str, value: int) -> "NetBuilder":
        self._proc(dev, "bgp").setdefault("med_out", {})[neighbor] = value
        return self

    def static(self, dev: str, prefix: str, next_hop: str) -> "NetBuilder":
        self.router(dev)["static_routes"].append({"dst_prefix": prefix, "next_hop_router": next_hop})
        return self

    def acl(self, dev: str, interface: str, direction: str = "out", src=None, dst=None) -> "NetBuilder":
        self.router(dev)["acls"].append(
            {"interface": interface, "direction": direction, "src_prefix": src, "dst_prefix": dst, "action": "deny"}
        )
        return self

    # links -----------------------------------------------------------------

    def _new_itf(self, dev: str, peer: str, vlan=None) -> str:
        d = self.devices[dev]
        base = f"to_{peer}"
        names = {i["name"] for i in d["interfaces"]}
        name, k = base, 2
        while name in names:
            name, k = f"{base}_{k}", k + 1
        itf = {"name": name}
        if vlan is not None:
            itf["vlan"] = vlan
        d["interfaces"].append(itf)
        return name

    def link(self, a: str, b: str, cost: int = 1, cost_ba: Optional[int] = None, vlan_a=None, vlan_b=None, lid=None) -> str:
        ia = self._new_itf(a, b, vlan_a)
        ib = self._new_itf(b, a, vlan_b)
        lid = lid or (f"{a}-{b}" if not any(l["id"] == f"{a}-{b}" for l in self.links) else f"{a}-{b}#{len(self.links)}")
        self.links.append({"id": lid, "a": {"device": a, "interface": ia}, "b": {"device": b, "interface": ib}})
        for dev, itf, c in ((a, ia, cost), (b, ib, cost if cost_ba is None else cost_ba)):
            if self.devices[dev]["kind"] == "router":
                p = self._proc(dev, "ospf")
                if p is not None:
                    p["interface_costs"][itf] = c
        return lid

    def traffic_class(self, name: str, src: str, dst: str, src_prefix=None, dst_prefix=None) -> "NetBuilder":
        self.tcs.append(
            {
                "name": name,
                "src_prefix": src_prefix or prefix_of(src),
                "dst_prefix": dst_prefix or prefix_of(dst),
                "src_router": src,
                "dst_router": dst,
            }
        )
        return self

    def doc(self) -> dict:
        return {
            "tiramisu_spec_version": 1,
            "devices": list(self.devices.values()),
            "links": list(self.links),
            "traffic_classes": list(self.tcs),
        }

    def spec(self):
        return from_dict(self.doc())


def prefix_of(router: str) -> str:
    """Deterministic /24 for a router name (hash-free so it is stable across runs)."""
    h = 0
    for ch in router:
        h = (h * 131 + ord(ch)) % 65000
    return f"10.{h // 250}.{h % 250}.0/24"


# --- reference scenarios ----------------------------------------------------------


def blackhole_network() -> NetBuilder:
    """Five routers; C learns E's prefix over iBGP from B and resolves B over OSPF."""
    b = NetBuilder()
    b.ospf("A", "B", "C", "D")
    for r in "ABC":
        b.bgp(r, 100)
    b.bgp("E", 200)
    b.peer("A", "E").peer("B", "E").peer("B", "C", "ibgp")
    b.link("A", "E")
    b.link("B", "E")
    b.link("B", "C")
    b.link("A", "C")
    b.link("C", "D", cost=5)
    b.link("A", "D")
    b.link("B", "D")
    b.traffic_class("C-E", "C", "E")
    return b


def hedge_network(with_ae: bool = True) -> NetBuilder:
    """Every router speaks eBGP; B and E also run OSPF; switch S1 puts A and C on different VLANs."""
    b = NetBuilder()
    for k, r in enumerate("ABCDE"):
        b.bgp(r, 65001 + k)
    b.ospf("B", "E")
    b.switch("S1")
    pairs = [("B", "E"), ("B", "D"), ("A", "D"), ("C", "D")]
    if with_ae:
        pairs.insert(0, ("A", "E"))
    for x, y in pairs:
        b.link(x, y)
        b.peer(x, y)
    b.link("S1", "C", vlan_a=1)
    b.link("S1", "A", vlan_a=2)
    b.community("D", "adds", "c1")
    b.community("A", "removes", "c1")
    b.community("E", "matches", "c1", "block")
    b.local_pref("E", "B", 100)
    b.local_pref("E", "A", 50)
    b.traffic_class("E-C", "E", "C")
    b.traffic_class("S-U", "E", "B", src_prefix="10.200.1.0/24", dst_prefix="10.200.3.0/24")
    return b


def acl_paths_network() -> NetBuilder:
    """Three edge-disjoint OSPF paths S->T of increasing cost with a deny ACL on the second."""
    b = NetBuilder()
    b.ospf("S", "T", "X1", "X2", "Y1", "Y2", "Z1", "Z2")
    b.link("S", "X1"); b.link("X1", "X2"); b.link("X2", "T")
    b.link("S", "Y1", cost=2); b.link("Y1", "Y2", cost=2); b.link("Y2", "T", cost=2)
    b.link("S", "Z1", cost=3); b.link("Z1", "Z2", cost=3); b.link("Z2", "T", cost=3)
    b.traffic_class("S-T", "S", "T")
    b.acl("Y1", "to_Y2", "out", dst=prefix_of("T"))
    return b


# --- random networks ------------------------------------------------------------


def random_network(seed: int, max_routers: int = 8, max_links: int = 12, max_communities: int = 3, kind: Optional[str] = None) -> dict:
    """Seeded random network document with one or two traffic classes.

    ``kind`` picks a protocol mix: ``ospf`` (single IGP), ``ebgp`` (one AS
    per router), ``ibgp`` (an AS running OSPF plus iBGP toward external
    eBGP speakers) or ``mixed`` (adds redistribution and statics). When
    None the mix is drawn from the seed. Switches are never generated.
    """
    rng = random.Random(seed)
    kind = kind or rng.choice(["ospf", "ebgp", "ibgp", "mixed"])
    n = rng.randint(3, max_routers)
    names = [chr(ord("A") + i) for i in range(n)]
    b = NetBuilder()
    for r in names:
        b.router(r)

    # spanning tree then extra edges
    edges = []
    order = names[:]
    rng.shuffle(order)
    for i in range(1, n):
        edges.append((order[rng.randrange(i)], order[i]))
    target = min(max_links, rng.randint(n - 1, n + 3))
    tries = 0
    while len(edges) < target and tries < 50:
        tries += 1
        x, y = rng.sample(names, 2)
        if (x, y) in edges or (y, x) in edges:
            continue
        edges.append((x, y))
    edges = [tuple(sorted(e)) for e in edges]

    asn = {}
    if kind == "ospf":
        b.ospf(*names)
    elif kind == "ebgp":
        for k, r in enumerate(names):
            asn[r] = 65001 + k
            b.bgp(r, asn[r])
    else:
        inner = sorted(rng.sample(names, max(2, n - rng.randint(1, max(1, n // 3)))))
        outer = [r for r in names if r not in inner]
        b.ospf(*inner)
        for r in inner:
            if kind == "ibgp" or rng.random() < 0.8:
                asn[r] = 100
                b.bgp(r, 100)
        for k, r in enumerate(outer):
            asn[r] = 65001 + k
            b.bgp(r, asn[r])

    for x, y in edges:
        b.link(x, y, cost=rng.choice([1, 1, 1, 2, 3, 5]))
    for x, y in edges:
        if x in asn and y in asn and asn[x] != asn[y]:
            b.peer(x, y)
    ibgp = sorted(r for r in asn if asn[r] == 100)
    if len(ibgp) >= 2:
        if rng.random() < 0.5:
            for i, x in enumerate(ibgp):
                for y in ibgp[i + 1 :]:
                    b.peer(x, y, "ibgp")
        else:
            for x, y in zip(ibgp, ibgp[1:]):
                b.peer(x, y, "ibgp")
            for i, x in enumerate(ibgp):
                for y in ibgp[i + 1 :]:
                    if rng.random() < 0.5:
                        b.peer(x, y, "ibgp")

    src, dst = rng.sample(names, 2)
    # the destination must originate somewhere: give it a protocol if it has none
    if not b.devices[dst]["processes"]:
        b.ospf(dst)
    b.traffic_class(f"{src}-{dst}", src, dst)
    dpre = prefix_of(dst)

    if kind == "mixed":
        for r in names:
            d = b.devices[r]
            protos = {p["protocol"] for p in d["processes"]}
            if protos == {"bgp", "ospf"} and rng.random() < 0.3:
                into, frm = rng.choice([("ospf", "bgp"), ("bgp", "ospf")])
                b.redistribute(r, into, frm)
        if rng.random() < 0.4:
            r = rng.choice([x for x in names if x != dst])
            nbrs = sorted({y for x, y in edges if x == r} | {x for x, y in edges if y == r})
            b.static(r, dpre, rng.choice(nbrs))

    bgp_routers = sorted(asn)
    ncomm = rng.randint(0, max_communities) if bgp_routers else 0
    for c in range(ncomm):
        cname = f"c{c + 1}"
        b.community(rng.choice(bgp_routers), "adds", cname)
        b.community(rng.choice(bgp_routers), "matches", cname, "block")
        if rng.random() < 0.5:
            b.community(rng.choice(bgp_routers), "removes", cname)
    for r in bgp_routers:
        for nb in b._proc(r, "bgp")["neighbors"]:
            if nb["type"] == "ebgp" and rng.random() < 0.25:
                b.local_pref(r, nb["device"], rng.choice([50, 150, 200]))

    if rng.random() < 0.3:
        r = rng.choice(names)
        p = rng.choice(b.devices[r]["processes"]) if b.devices[r]["processes"] else None
        if p is not None and r != dst:
            nbrs = sorted({y for x, y in edges if x == r} | {x for x, y in edges if y == r})
            p.setdefault("route_filters", []).append({"prefix": dpre, "neighbor": rng.choice(nbrs + [None])})
    if rng.random() < 0.35:
        x, y = rng.choice(edges)
        if rng.random() < 0.5:
            x, y = y, x
        itf = next(l["a"]["interface"] if l["a"]["device"] == x else l["b"]["interface"] for l in b.links if {l["a"]["device"], l["b"]["device"]} == {x, y})
        b.acl(x, itf, rng.choice(["in", "out"]), dst=dpre)

    # a second class toward the same destination from another router, for P8
    others = [r for r in names if r not in (src, dst)]
    if others:
        b.traffic_class(f"{others[0]}-{dst}", others[0], dst)
    return b.doc()


def scaled_network(routers: int = 160, as_size: int = 20, seed: int = 0) -> dict:
    """A larger multi-AS network for timing runs.

    Routers are split into ASes of ``as_size``. Each AS runs OSPF over a
    ring with random chords; its first two routers are borders that run
    BGP, peer over iBGP, redistribute BGP into OSPF and hold eBGP sessions
    to the borders of the next AS in a ring of ASes. One traffic class
    crosses half the network.
    """
    rng = random.Random(seed)
    b = NetBuilder()
    groups = [[f"R{i}" for i in range(s, min(s + as_size, routers))] for s in range(0, routers, as_size)]
    for k, grp in enumerate(groups):
        b.ospf(*grp)
        ring = list(zip(grp, grp[1:] + grp[:1])) if len(grp) > 2 else list(zip(grp, grp[1:]))
        for x, y in ring:
            b.link(x, y, cost=rng.randint(1, 5))
        for _ in range(len(grp) // 4):
            x, y = rng.sample(grp, 2)
            if not any({l["a"]["device"], l["b"]["device"]} == {x, y} for l in b.links):
                b.link(x, y, cost=rng.randint(1, 5))
        borders = grp[:2]
        for r in borders:
            b.bgp(r, 64512 + k)
            b.redistribute(r, "ospf", "bgp")
        if len(borders) == 2:
            b.peer(borders[0], borders[1], "ibgp")
    for k in range(len(groups)):
        nxt = groups[(k + 1) % len(groups)]
        if nxt is groups[k]:
            break
        for x, y in ((groups[k][0], nxt[1 % len(nxt)]), (groups[k][1 % len(groups[k])], nxt[0])):
            b.link(x, y)
            b.peer(x, y)
    far = groups[len(groups) // 2]
    b.traffic_class("far", groups[0][-1], far[-1])
    return b.doc()


def strip_policies(doc: dict) -> dict:
    """Copy of a network document without ACLs, route filters or static routes."""
    out = copy.deepcopy(doc)
    for dev in out["devices"]:
        if dev.get("kind") != "router":
            continue
        dev["acls"] = []
        dev["static_routes"] = []
        for p in dev.get("processes", ()):
            p.pop("route_filters", None)
    return out
