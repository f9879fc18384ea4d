import pytest

from cpverify.errors import UnknownTrafficClass
from cpverify.graph import (
    DST,
    LABELS,
    SRC,
    build_base_graph,
    build_traffic_class_graph,
    fib_node,
    proc_node,
    vlan_node,
)
from cpverify.netgen import NetBuilder, prefix_of
from cpverify.policies import GraphCache


def test_base_graph_layers(hedge):
    g = build_base_graph(hedge)
    assert proc_node("B", "ospf") in g and proc_node("B", "bgp") in g
    assert fib_node("E") in g
    assert vlan_node("S1", 1) in g and vlan_node("S1", 2) in g
    assert SRC not in g and DST not in g
    assert {e.label for e in g.edges.values()} <= set(LABELS)


def test_hedge_groups_every_edge_of_a_link(hedge):
    g = build_base_graph(hedge)
    # B-E carries both the eBGP session and the OSPF adjacency, in both directions
    be = [g.edges[i] for i in g.hedges["B-E"]]
    assert len(be) == 4
    assert {(e.src.device, e.dst.device) for e in be} == {("B", "E"), ("E", "B")}
    assert {e.label for e in be} == {"b", "o"}
    for lid, ids in g.hedges.items():
        assert all(g.edges[i].link == lid for i in ids)


def test_edges_point_against_traffic(blackhole):
    g = build_base_graph(blackhole)
    # C learns from its iBGP peer B through OSPF; advertisements flow B -> C, so edges run C -> B
    assert any(e.src == proc_node("C", "ospf") and e.dst == proc_node("B", "ospf") for e in g.edges.values())


def test_traffic_class_endpoints(hedge):
    g = build_traffic_class_graph(build_base_graph(hedge), "E-C", hedge)
    assert {e.dst for e in g.out(SRC)} == {proc_node("E", "bgp"), proc_node("E", "ospf")}
    assert {e.src for e in g.inc(DST)} == {proc_node("C", "bgp")}


def test_destination_router_does_not_forward(hedge):
    g = build_traffic_class_graph(build_base_graph(hedge), "E-C", hedge)
    for n in g.nodes:
        if n.device == "C":
            assert all(e.dst.device == "C" or e.dst == DST for e in g.out(n))


def test_base_ids_stable_and_new_ids_after(hedge):
    base = build_base_graph(hedge)
    g = build_traffic_class_graph(base, "E-C", hedge)
    top = max(base.edges)
    for i, e in g.edges.items():
        if i <= top:
            assert base.edges[i] == e
        else:
            assert SRC in (e.src, e.dst) or DST in (e.src, e.dst) or e.label == "s"


def test_base_not_mutated(hedge):
    base = build_base_graph(hedge)
    before = (list(base.nodes), dict(base.edges), {k: list(v) for k, v in base.hedges.items()})
    for tc in hedge.traffic_classes:
        build_traffic_class_graph(base, tc.name, hedge)
        build_traffic_class_graph(base, tc.name, hedge, keep_acl_edges=True)
    assert (base.nodes, base.edges, base.hedges) == before
    assert SRC not in base


def test_communities_instantiated(hedge):
    g = GraphCache(hedge).graph("E-C")
    assert g.ac == {proc_node("D", "bgp"): frozenset({"c1"})}
    assert g.rc == {proc_node("A", "bgp"): frozenset({"c1"})}
    assert g.blocked(proc_node("E", "bgp")) == frozenset({"c1"})


def test_unknown_traffic_class(hedge):
    with pytest.raises(UnknownTrafficClass):
        build_traffic_class_graph(build_base_graph(hedge), "nope", hedge)


def test_acl_edges_removed_or_kept(acl_paths):
    cache = GraphCache(acl_paths)
    removed, kept = cache.graph("S-T"), cache.graph("S-T", True)
    assert removed.acl_edges == kept.acl_edges
    assert len(kept.acl_edges) == 1
    (eid,) = kept.acl_edges
    assert eid in kept.edges and eid not in removed.edges
    # the denied edge carries routes from Y2 toward Y1, i.e. packets Y1 -> Y2
    e = kept.edges[eid]
    assert (e.src.device, e.dst.device) == ("Y1", "Y2")


def _filtered():
    b = NetBuilder()
    b.ospf("A", "B", "C")
    b.link("A", "B")
    b.link("B", "C")
    b.link("A", "C", cost=5)
    b.traffic_class("t", "A", "C")
    b.filter("A", "ospf", prefix_of("C"), neighbor="C")
    return b.spec()


def test_route_filter_removes_edges():
    spec = _filtered()
    g = GraphCache(spec).graph("t")
    a = proc_node("A", "ospf")
    assert {e.dst.device for e in g.out(a) if e.link} == {"B"}


def test_static_route_edges():
    b = NetBuilder()
    b.ospf("B", "C")
    b.router("A")
    b.link("A", "B")
    b.link("B", "C")
    b.static("A", prefix_of("C"), "B")
    b.traffic_class("t", "A", "C")
    spec = b.spec()
    g = GraphCache(spec).graph("t")
    st = proc_node("A", "static")
    outs = [e for e in g.out(st) if e.link is not None]
    assert outs and all(e.label == "s" and e.link == "A-B" and e.dst.device == "B" for e in outs)
    assert set(g.hedges["A-B"]) >= {e.id for e in outs}


def test_stats_and_json(blackhole):
    g = GraphCache(blackhole).graph("C-E")
    s = g.stats()
    assert s["nodes"] == len(g.nodes) and s["edges"] == len(g.edges)
    doc = g.to_json()
    assert doc["traffic_class"] == "C-E"
    assert set(doc["taint"]) == {str(n) for n in g.nodes}
    assert len(doc["edges"]) == s["edges"]
