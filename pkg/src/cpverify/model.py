"""Declarative network description: types, loading, serialization and validation.

A network is a JSON document listing devices (routers and switches), the
physical links between their interfaces, and the traffic classes to analyze.
The normative schema lives next to this module in ``schema/network.schema.json``.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Iterable, Optional

import jsonschema

from .errors import InvariantError, ReferenceError, SchemaError

SPEC_VERSION = 1
DEFAULT_VRF = "default_vrf"

ROUTER = "router"
SWITCH = "switch"
BGP = "bgp"
OSPF = "ospf"

BLOCK = "block"
SET_LOCAL_PREF = "set-local-pref"
SET_MED = "set-med"


@dataclass(frozen=True)
class Interface:
    name: str
    vlan: Optional[int] = None
    vrf: str = DEFAULT_VRF


@dataclass(frozen=True)
class CommunityTag:
    community: str
    prefix: Optional[str] = None


@dataclass(frozen=True)
class CommunityMatch:
    community: str
    action: str
    value: Optional[int] = None
    prefix: Optional[str] = None


@dataclass(frozen=True)
class BgpNeighbor:
    device: str
    type: str


@dataclass(frozen=True)
class RouteFilter:
    """Import filter: drop advertisements for ``prefix`` (optionally only from ``neighbor``)."""

    prefix: str
    neighbor: Optional[str] = None


@dataclass(frozen=True)
class RoutingProcess:
    name: str
    protocol: str
    vrf: str = DEFAULT_VRF
    as_number: Optional[int] = None
    neighbors: tuple[BgpNeighbor, ...] = ()
    interface_costs: dict = field(default_factory=dict)
    redistributes_from: tuple[str, ...] = ()
    route_filters: tuple[RouteFilter, ...] = ()
    adds: tuple[CommunityTag, ...] = ()
    removes: tuple[CommunityTag, ...] = ()
    matches: tuple[CommunityMatch, ...] = ()
    local_pref_in: dict = field(default_factory=dict)
    med_out: dict = field(default_factory=dict)

    def ospf_cost(self, interface: str) -> int:
        return self.interface_costs.get(interface, 1)


@dataclass(frozen=True)
class AclRule:
    interface: str
    direction: str
    src_prefix: Optional[str] = None
    dst_prefix: Optional[str] = None
    action: str = "deny"

    def denies(self, tc: "TrafficClass") -> bool:
        return prefix_matches(self.src_prefix, tc.src_prefix) and prefix_matches(
            self.dst_prefix, tc.dst_prefix
        )


@dataclass(frozen=True)
class StaticRoute:
    dst_prefix: str
    next_hop_router: str


@dataclass(frozen=True)
class Device:
    name: str
    kind: str
    interfaces: tuple[Interface, ...] = ()
    vrfs: tuple[str, ...] = (DEFAULT_VRF,)
    processes: tuple[RoutingProcess, ...] = ()
    acls: tuple[AclRule, ...] = ()
    static_routes: tuple[StaticRoute, ...] = ()

    def interface(self, name: str) -> Optional[Interface]:
        for itf in self.interfaces:
            if itf.name == name:
                return itf
        return None

    def process(self, name: str) -> Optional[RoutingProcess]:
        for proc in self.processes:
            if proc.name == name:
                return proc
        return None

    def process_for(self, protocol: str, vrf: str) -> Optional[RoutingProcess]:
        for proc in self.processes:
            if proc.protocol == protocol and proc.vrf == vrf:
                return proc
        return None

    @property
    def is_router(self) -> bool:
        return self.kind == ROUTER


@dataclass(frozen=True)
class Endpoint:
    device: str
    interface: str


@dataclass(frozen=True)
class Link:
    id: str
    a: Endpoint
    b: Endpoint

    def other(self, device: str) -> Endpoint:
        return self.b if self.a.device == device else self.a

    def end(self, device: str) -> Endpoint:
        return self.a if self.a.device == device else self.b


@dataclass(frozen=True)
class TrafficClass:
    name: str
    src_prefix: str
    dst_prefix: str
    src_router: str
    dst_router: str


@dataclass(frozen=True)
class Diagnostic:
    location: str
    message: str
    kind: str = "invariant"  # or "reference"

    def __str__(self):
        return f"{self.location}: {self.message}"


@dataclass(frozen=True)
class NetworkSpec:
    devices: tuple[Device, ...] = ()
    links: tuple[Link, ...] = ()
    traffic_classes: tuple[TrafficClass, ...] = ()

    @cached_property
    def _device_index(self) -> dict:
        return {d.name: d for d in self.devices}

    @cached_property
    def _link_index(self) -> dict:
        return {link.id: link for link in self.links}

    def device(self, name: str) -> Optional[Device]:
        return self._device_index.get(name)

    def link(self, link_id: str) -> Optional[Link]:
        return self._link_index.get(link_id)

    def traffic_class(self, name: str) -> Optional[TrafficClass]:
        for tc in self.traffic_classes:
            if tc.name == name:
                return tc
        return None

    @property
    def link_ids(self) -> list[str]:
        return sorted(link.id for link in self.links)

    def links_between(self, a: str, b: str) -> list[Link]:
        return sorted(
            (lk for lk in self.links if {lk.a.device, lk.b.device} == {a, b} and a != b),
            key=lambda lk: lk.id,
        )

    def routers(self) -> list[Device]:
        return [d for d in self.devices if d.is_router]

    @cached_property
    def l2_segments(self) -> dict:
        """Map (switch, vlan) -> segment id; switches on one VLAN joined by links share a segment."""
        parent: dict = {}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for dev in self.devices:
            if dev.kind == SWITCH:
                for itf in dev.interfaces:
                    if itf.vlan is not None:
                        parent.setdefault((dev.name, itf.vlan), (dev.name, itf.vlan))
        for lk in self.links:
            da, db = self.device(lk.a.device), self.device(lk.b.device)
            if da is None or db is None or da.kind != SWITCH or db.kind != SWITCH:
                continue
            ia, ib = da.interface(lk.a.interface), db.interface(lk.b.interface)
            if ia is None or ib is None or ia.vlan is None or ia.vlan != ib.vlan:
                continue
            ra, rb = find((da.name, ia.vlan)), find((db.name, ib.vlan))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        return {key: find(key) for key in parent}

    def router_segments(self, router: str) -> dict:
        """Map L2 segment id -> list of (link id, router interface) attaching ``router`` to it."""
        out: dict = {}
        segs = self.l2_segments
        for lk in self.links:
            if router not in (lk.a.device, lk.b.device) or lk.a.device == lk.b.device:
                continue
            mine, theirs = lk.end(router), lk.other(router)
            sw = self.device(theirs.device)
            if sw is None or sw.kind != SWITCH:
                continue
            itf = sw.interface(theirs.interface)
            if itf is None or itf.vlan is None:
                continue
            out.setdefault(segs[(sw.name, itf.vlan)], []).append((lk.id, mine.interface))
        return out

    def adjacent(self, a: str, b: str) -> bool:
        """Routers ``a`` and ``b`` share a direct link or an L2 segment."""
        if self.links_between(a, b):
            return True
        return bool(set(self.router_segments(a)) & set(self.router_segments(b)))


# -- prefixes ---------------------------------------------------------------


def valid_prefix(text: Optional[str]) -> bool:
    if text is None:
        return True
    try:
        ipaddress.IPv4Network(text, strict=False)
    except ValueError:
        return False
    return True


def prefix_matches(rule: Optional[str], prefix: str) -> bool:
    """Exact-prefix equality; a missing rule prefix matches everything."""
    if rule is None:
        return True
    return ipaddress.IPv4Network(rule, strict=False) == ipaddress.IPv4Network(prefix, strict=False)


# -- loading ----------------------------------------------------------------


def _schema() -> dict:
    text = resources.files("cpverify").joinpath("schema/network.schema.json").read_text()
    return json.loads(text)


def _parse_device(d: dict) -> Device:
    vrfs = list(d.get("vrfs", []))
    if DEFAULT_VRF not in vrfs:
        vrfs.insert(0, DEFAULT_VRF)
    procs = []
    for p in d.get("processes", []):
        ca = p.get("community_actions", {})
        procs.append(
            RoutingProcess(
                name=p["name"],
                protocol=p["protocol"],
                vrf=p.get("vrf", DEFAULT_VRF),
                as_number=p.get("as_number"),
                neighbors=tuple(BgpNeighbor(n["device"], n["type"]) for n in p.get("neighbors", [])),
                interface_costs=dict(p.get("interface_costs", {})),
                redistributes_from=tuple(p.get("redistributes_from", [])),
                route_filters=tuple(
                    RouteFilter(f["prefix"], f.get("neighbor")) for f in p.get("route_filters", [])
                ),
                adds=tuple(CommunityTag(t["community"], t.get("prefix")) for t in ca.get("adds", [])),
                removes=tuple(
                    CommunityTag(t["community"], t.get("prefix")) for t in ca.get("removes", [])
                ),
                matches=tuple(
                    CommunityMatch(m["community"], m["action"], m.get("value"), m.get("prefix"))
                    for m in ca.get("matches", [])
                ),
                local_pref_in=dict(p.get("local_pref_in", {})),
                med_out=dict(p.get("med_out", {})),
            )
        )
    return Device(
        name=d["name"],
        kind=d["kind"],
        interfaces=tuple(
            Interface(i["name"], i.get("vlan"), i.get("vrf", DEFAULT_VRF)) for i in d.get("interfaces", [])
        ),
        vrfs=tuple(vrfs),
        processes=tuple(procs),
        acls=tuple(
            AclRule(a["interface"], a["direction"], a.get("src_prefix"), a.get("dst_prefix"))
            for a in d.get("acls", [])
        ),
        static_routes=tuple(
            StaticRoute(s["dst_prefix"], s["next_hop_router"]) for s in d.get("static_routes", [])
        ),
    )


def from_dict(doc: dict) -> NetworkSpec:
    """Build a validated :class:`NetworkSpec` from an already-decoded document."""
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {exc.message}") from None
    spec = NetworkSpec(
        devices=tuple(_parse_device(d) for d in doc["devices"]),
        links=tuple(
            Link(
                lk["id"],
                Endpoint(lk["a"]["device"], lk["a"]["interface"]),
                Endpoint(lk["b"]["device"], lk["b"]["interface"]),
            )
            for lk in doc["links"]
        ),
        traffic_classes=tuple(
            TrafficClass(t["name"], t["src_prefix"], t["dst_prefix"], t["src_router"], t["dst_router"])
            for t in doc.get("traffic_classes", [])
        ),
    )
    diags = validate_spec(spec)
    refs = [d for d in diags if d.kind == "reference"]
    if refs:
        raise ReferenceError("; ".join(map(str, refs)))
    if diags:
        raise InvariantError("; ".join(map(str, diags)))
    return spec


def load_spec(data) -> NetworkSpec:
    """Parse a serialized network document (bytes or str)."""
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError(f"document is not UTF-8: {exc}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object")
    return from_dict(doc)


def load_spec_file(path) -> NetworkSpec:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}") from None
    return load_spec(data)


# -- serialization ----------------------------------------------------------


def _tag(t: CommunityTag) -> dict:
    out = {"community": t.community}
    if t.prefix is not None:
        out["prefix"] = t.prefix
    return out


def _process_dict(p: RoutingProcess) -> dict:
    out = {"name": p.name, "protocol": p.protocol, "vrf": p.vrf}
    if p.as_number is not None:
        out["as_number"] = p.as_number
    if p.neighbors:
        out["neighbors"] = [{"device": n.device, "type": n.type} for n in p.neighbors]
    if p.interface_costs:
        out["interface_costs"] = dict(p.interface_costs)
    if p.redistributes_from:
        out["redistributes_from"] = list(p.redistributes_from)
    if p.route_filters:
        out["route_filters"] = [
            {"prefix": f.prefix, **({"neighbor": f.neighbor} if f.neighbor else {})}
            for f in p.route_filters
        ]
    if p.adds or p.removes or p.matches:
        ca: dict = {}
        if p.adds:
            ca["adds"] = [_tag(t) for t in p.adds]
        if p.removes:
            ca["removes"] = [_tag(t) for t in p.removes]
        if p.matches:
            ms = []
            for m in p.matches:
                md = {"community": m.community, "action": m.action}
                if m.value is not None:
                    md["value"] = m.value
                if m.prefix is not None:
                    md["prefix"] = m.prefix
                ms.append(md)
            ca["matches"] = ms
        out["community_actions"] = ca
    if p.local_pref_in:
        out["local_pref_in"] = dict(p.local_pref_in)
    if p.med_out:
        out["med_out"] = dict(p.med_out)
    return out


def to_dict(spec: NetworkSpec) -> dict:
    devices = []
    for d in spec.devices:
        dd: dict = {"name": d.name, "kind": d.kind}
        if d.interfaces:
            dd["interfaces"] = []
            for i in d.interfaces:
                idict: dict = {"name": i.name, "vrf": i.vrf}
                if i.vlan is not None:
                    idict["vlan"] = i.vlan
                dd["interfaces"].append(idict)
        dd["vrfs"] = list(d.vrfs)
        if d.processes:
            dd["processes"] = [_process_dict(p) for p in d.processes]
        if d.acls:
            dd["acls"] = [
                {
                    "interface": a.interface,
                    "direction": a.direction,
                    "src_prefix": a.src_prefix,
                    "dst_prefix": a.dst_prefix,
                    "action": a.action,
                }
                for a in d.acls
            ]
        if d.static_routes:
            dd["static_routes"] = [
                {"dst_prefix": s.dst_prefix, "next_hop_router": s.next_hop_router} for s in d.static_routes
            ]
        devices.append(dd)
    return {
        "tiramisu_spec_version": SPEC_VERSION,
        "devices": devices,
        "links": [
            {
                "id": lk.id,
                "a": {"device": lk.a.device, "interface": lk.a.interface},
                "b": {"device": lk.b.device, "interface": lk.b.interface},
            }
            for lk in spec.links
        ],
        "traffic_classes": [
            {
                "name": t.name,
                "src_prefix": t.src_prefix,
                "dst_prefix": t.dst_prefix,
                "src_router": t.src_router,
                "dst_router": t.dst_router,
            }
            for t in spec.traffic_classes
        ],
    }


def dump_spec(spec: NetworkSpec) -> bytes:
    return json.dumps(to_dict(spec), indent=2, sort_keys=False).encode("utf-8")


# -- validation -------------------------------------------------------------


def _dupes(names: Iterable[str]) -> list[str]:
    seen, dup = set(), []
    for n in names:
        if n in seen and n not in dup:
            dup.append(n)
        seen.add(n)
    return dup


def validate_spec(spec: NetworkSpec) -> list[Diagnostic]:
    """Check every structural invariant; an empty list means the spec is valid."""
    diags: list[Diagnostic] = []

    def bad(loc, msg, kind="invariant"):
        diags.append(Diagnostic(loc, msg, kind))

    for name in _dupes(d.name for d in spec.devices):
        bad(f"devices/{name}", "duplicate device name")
    for lid in _dupes(lk.id for lk in spec.links):
        bad(f"links/{lid}", "duplicate link id")
    for name in _dupes(t.name for t in spec.traffic_classes):
        bad(f"traffic_classes/{name}", "duplicate traffic class name")

    used_ports: dict = {}
    for lk in spec.links:
        for end in (lk.a, lk.b):
            dev = spec.device(end.device)
            if dev is None:
                bad(f"links/{lk.id}", f"unknown device {end.device!r}", "reference")
                continue
            if dev.interface(end.interface) is None:
                bad(f"links/{lk.id}", f"unknown interface {end.device}.{end.interface}", "reference")
            port = (end.device, end.interface)
            if port in used_ports:
                bad(f"links/{lk.id}", f"interface {end.device}.{end.interface} already used by {used_ports[port]}")
            used_ports[port] = lk.id
        if lk.a.device == lk.b.device:
            bad(f"links/{lk.id}", "link connects a device to itself")
        da, db = spec.device(lk.a.device), spec.device(lk.b.device)
        if da and db and da.kind == ROUTER and db.kind == ROUTER:
            ia, ib = da.interface(lk.a.interface), db.interface(lk.b.interface)
            if ia and ib and ia.vrf != ib.vrf:
                bad(f"links/{lk.id}", f"VRF mismatch {ia.vrf} vs {ib.vrf}")

    for dev in spec.devices:
        loc = f"devices/{dev.name}"
        for iname in _dupes(i.name for i in dev.interfaces):
            bad(loc, f"duplicate interface {iname}")
        if dev.kind == SWITCH:
            if dev.processes:
                bad(loc, "switch carries routing processes")
            if dev.static_routes:
                bad(loc, "switch carries static routes")
            for itf in dev.interfaces:
                if itf.vlan is None:
                    bad(f"{loc}/interfaces/{itf.name}", "switch port without VLAN")
        else:
            if not dev.processes and not dev.static_routes:
                bad(loc, "router carries neither routing processes nor static routes")
            for itf in dev.interfaces:
                if itf.vrf not in dev.vrfs:
                    bad(f"{loc}/interfaces/{itf.name}", f"unknown VRF {itf.vrf!r}", "reference")
        for pname in _dupes(p.name for p in dev.processes):
            bad(loc, f"duplicate process name {pname}")
        for key in _dupes(f"{p.protocol}/{p.vrf}" for p in dev.processes):
            bad(loc, f"more than one process for {key}")
        for proc in dev.processes:
            _validate_process(spec, dev, proc, bad)
        for acl in dev.acls:
            if dev.interface(acl.interface) is None:
                bad(f"{loc}/acls", f"unknown interface {acl.interface!r}", "reference")
            if not (valid_prefix(acl.src_prefix) and valid_prefix(acl.dst_prefix)):
                bad(f"{loc}/acls", "invalid prefix")
        for st in dev.static_routes:
            if not valid_prefix(st.dst_prefix):
                bad(f"{loc}/static_routes", f"invalid prefix {st.dst_prefix!r}")
            nh = spec.device(st.next_hop_router)
            if nh is None:
                bad(f"{loc}/static_routes", f"unknown next hop {st.next_hop_router!r}", "reference")
            elif not spec.links_between(dev.name, nh.name):
                bad(f"{loc}/static_routes", f"next hop {nh.name} is not directly connected")

    for tc in spec.traffic_classes:
        loc = f"traffic_classes/{tc.name}"
        for role in ("src_router", "dst_router"):
            dev = spec.device(getattr(tc, role))
            if dev is None:
                bad(loc, f"unknown {role} {getattr(tc, role)!r}", "reference")
            elif not dev.is_router:
                bad(loc, f"{role} {dev.name} is not a router")
        if tc.src_router == tc.dst_router:
            bad(loc, "src_router equals dst_router")
        if not (valid_prefix(tc.src_prefix) and valid_prefix(tc.dst_prefix)):
            bad(loc, "invalid prefix")
    return diags


def _validate_process(spec: NetworkSpec, dev: Device, proc: RoutingProcess, bad) -> None:
    loc = f"devices/{dev.name}/processes/{proc.name}"
    if proc.vrf not in dev.vrfs:
        bad(loc, f"unknown VRF {proc.vrf!r}", "reference")
    if proc.protocol == BGP:
        if proc.as_number is None or proc.as_number < 0:
            bad(loc, "BGP process needs a non-negative as_number")
    else:
        if proc.as_number is not None:
            bad(loc, "as_number is only valid for BGP")
        if proc.neighbors:
            bad(loc, "neighbors are only valid for BGP")
    for itf, cost in proc.interface_costs.items():
        if dev.interface(itf) is None:
            bad(loc, f"cost for unknown interface {itf!r}", "reference")
        if proc.protocol != OSPF:
            bad(loc, "interface costs are only valid for OSPF")
        if cost < 1:
            bad(loc, f"OSPF cost on {itf} must be >= 1")
    for src in proc.redistributes_from:
        other = dev.process(src)
        if other is None:
            bad(loc, f"redistributes from unknown process {src!r}", "reference")
        elif other.name == proc.name:
            bad(loc, "process redistributes from itself")
        elif other.vrf != proc.vrf:
            bad(loc, f"redistribution across VRFs ({other.vrf} -> {proc.vrf})")
    for flt in proc.route_filters:
        if not valid_prefix(flt.prefix):
            bad(loc, f"invalid filter prefix {flt.prefix!r}")
        if flt.neighbor is not None and spec.device(flt.neighbor) is None:
            bad(loc, f"filter names unknown neighbor {flt.neighbor!r}", "reference")
    for tag in proc.adds + proc.removes:
        if not valid_prefix(tag.prefix):
            bad(loc, "invalid community prefix")
    for m in proc.matches:
        if not valid_prefix(m.prefix):
            bad(loc, "invalid community prefix")
        if m.action in (SET_LOCAL_PREF, SET_MED) and (m.value is None or m.value < 0):
            bad(loc, f"{m.action} on {m.community} needs a non-negative value")
    for table in ("local_pref_in", "med_out"):
        for nbr, val in getattr(proc, table).items():
            if val < 0:
                bad(loc, f"{table}[{nbr}] must be >= 0")
            if spec.device(nbr) is None:
                bad(loc, f"{table} names unknown device {nbr!r}", "reference")
    seen = set()
    for nbr in proc.neighbors:
        if nbr.device in seen:
            bad(loc, f"duplicate neighbor {nbr.device}")
        seen.add(nbr.device)
        peer_dev = spec.device(nbr.device)
        if peer_dev is None:
            bad(loc, f"unknown BGP neighbor {nbr.device!r}", "reference")
            continue
        peer = peer_dev.process_for(BGP, proc.vrf)
        if peer is None:
            bad(loc, f"neighbor {nbr.device} has no BGP process in {proc.vrf}", "reference")
            continue
        if nbr.device == dev.name:
            bad(loc, "BGP process peers with its own device")
            continue
        back = [n for n in peer.neighbors if n.device == dev.name]
        if not back or back[0].type != nbr.type:
            bad(loc, f"session with {nbr.device} is not configured symmetrically")
        if nbr.type == "ibgp" and peer.as_number != proc.as_number:
            bad(loc, f"iBGP peering with {nbr.device} crosses AS {proc.as_number} -> {peer.as_number}")
        if nbr.type == "ebgp":
            if peer.as_number == proc.as_number:
                bad(loc, f"eBGP peering with {nbr.device} inside AS {proc.as_number}")
            if not spec.adjacent(dev.name, nbr.device):
                bad(loc, f"eBGP neighbor {nbr.device} is not adjacent")
