from hypothesis import given, settings
from hypothesis import strategies as st

from cpverify.graph import DST, SRC, fib_node, proc_node
from cpverify.model import from_dict
from cpverify.netgen import random_network
from cpverify.policies import GraphCache
from cpverify.taint import PROHIBITED_RUN, is_prohibited, path_run_ok, propagate_taints


def test_prohibited_threshold():
    assert PROHIBITED_RUN == 3
    assert not is_prohibited(2)
    assert is_prohibited(3)


def test_hedge_taints(hedge):
    g = GraphCache(hedge).graph("E-C")
    # OSPF runs only between B and E and never hears of C's prefix
    assert not g.taint[proc_node("B", "ospf")]
    assert not g.taint[proc_node("E", "ospf")]
    for r in "ABCDE":
        assert g.taint[proc_node(r, "bgp")]
        assert g.taint[fib_node(r)]
    assert g.taint[DST] and not g.taint[SRC]


def test_blackhole_taints(blackhole):
    g = GraphCache(blackhole).graph("C-E")
    # D runs only OSPF and E's prefix is never redistributed into it
    assert not g.taint[proc_node("D", "ospf")]
    assert not g.taint[fib_node("D")]
    # C learns over iBGP; the OSPF hops that resolve B are untainted, two in a row
    assert g.taint[proc_node("C", "bgp")] and g.taint[proc_node("B", "bgp")]
    assert not g.taint[proc_node("C", "ospf")] and not g.taint[proc_node("B", "ospf")]
    ibgp_path = [SRC, proc_node("C", "bgp"), fib_node("C"), proc_node("C", "ospf"), proc_node("B", "ospf"), fib_node("B")]
    assert path_run_ok(g, ibgp_path)
    assert not path_run_ok(g, ibgp_path[:-1] + [proc_node("D", "ospf")])


def test_input_graph_untouched(hedge):
    g = GraphCache(hedge).graph("E-C")
    h = propagate_taints(g)
    assert h is not g and h.taint == g.taint
    h.taint[DST] = False
    assert g.taint[DST]


def test_run_check_on_concrete_paths(hedge):
    g = GraphCache(hedge).graph("E-C")
    e_o, b_o, b_f = proc_node("E", "ospf"), proc_node("B", "ospf"), fib_node("B")
    # src counts as one untainted node; two OSPF nodes make three
    assert not path_run_ok(g, [SRC, e_o, b_o])
    assert path_run_ok(g, [SRC, e_o, fib_node("E")])
    assert path_run_ok(g, [e_o, b_o, b_f])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_dst_side_is_tainted(seed):
    spec = from_dict(random_network(seed))
    tc = spec.traffic_classes[0]
    g = GraphCache(spec).graph(tc.name)
    for e in g.inc(DST):
        assert g.taint[e.src]
    # a FIB is tainted exactly when one of its processes is
    for n in g.nodes:
        if n.kind == "fib":
            assert g.taint[n] == any(g.taint[e.dst] for e in g.out(n) if e.label == "f")
