import pytest

from cpverify.netgen import NetBuilder
from cpverify.oracle import oracle_verify
from cpverify.policies import GraphCache, PolicyRequest
from cpverify.tyen import PreferencePolicy, expected_path, min_failures_for_acl_path, path_survives, run_tyen


def _triangle():
    b = NetBuilder()
    b.ospf("S", "A", "T")
    b.link("S", "T", cost=1)
    b.link("S", "A", cost=2)
    b.link("A", "T", cost=2)
    b.traffic_class("S-T", "S", "T")
    return b.spec()


def test_preference_holds_on_triangle():
    spec = _triangle()
    g = GraphCache(spec).graph("S-T", True)
    v = run_tyen(g, PreferencePolicy([["S", "T"], ["S", "A", "T"]]))
    assert v.holds, v
    assert v.diagnostics[0]["levels"] == 2


def test_preference_order_violated_on_triangle():
    spec = _triangle()
    g = GraphCache(spec).graph("S-T", True)
    v = run_tyen(g, PreferencePolicy([["S", "A", "T"], ["S", "T"]]))
    assert not v.holds
    assert v.witness == {"scenario": [], "realized": ["S", "T"], "expected": ["S", "A", "T"], "level": 1}


def test_blackhole_preference_violated_by_drop(blackhole):
    g = GraphCache(blackhole).graph("C-E", True)
    v = run_tyen(g, PreferencePolicy([["C", "B", "E"], ["C", "A", "E"]]))
    assert not v.holds
    # losing B-E leaves A's path standing, but C still forwards toward B and D drops it
    assert v.witness["scenario"] == ["B-E"]
    assert v.witness["expected"] == ["C", "A", "E"]
    assert v.witness["realized"] is None


def test_agrees_with_oracle_on_figures(blackhole, acl_paths):
    cases = [
        (blackhole, "C-E", [["C", "B", "E"], ["C", "A", "E"]]),
        (blackhole, "C-E", [["C", "B", "E"]]),
        (acl_paths, "S-T", [["S", "X1", "X2", "T"], ["S", "Y1", "Y2", "T"], ["S", "Z1", "Z2", "T"]]),
        (acl_paths, "S-T", [["S", "X1", "X2", "T"], ["S", "Z1", "Z2", "T"]]),
    ]
    for spec, tc, pref in cases:
        req = PolicyRequest("P5", tc, params={"preference": pref})
        fast = run_tyen(GraphCache(spec).graph(tc, True), PreferencePolicy(pref))
        assert fast.holds == oracle_verify(req, spec, 3).holds, pref


def test_expected_path_and_survival(blackhole):
    g = GraphCache(blackhole).graph("C-E", True)
    pref = PreferencePolicy([["C", "B", "E"], ["C", "A", "E"]])
    assert expected_path(g, pref, frozenset()) == ["C", "B", "E"]
    assert expected_path(g, pref, frozenset(["B-C"])) == ["C", "A", "E"]
    assert expected_path(g, pref, frozenset(["B-C", "A-C"])) is None
    assert path_survives(g, ["C", "D", "B"], frozenset(["B-C"]))
    assert not path_survives(g, ["C", "D", "B"], frozenset(["C-D"]))


def test_policy_validation():
    with pytest.raises(ValueError):
        PreferencePolicy([["A", "B"], ["A", "B"]])
    spec = _triangle()
    with pytest.raises(ValueError):
        run_tyen(GraphCache(spec).graph("S-T", True), PreferencePolicy([]))


def test_acl_failures(acl_paths, golden):
    g = GraphCache(acl_paths).graph("S-T", True)
    value, links = min_failures_for_acl_path(g)
    assert value == golden["acl"]["L"]
    assert len(links) == 1 and links[0] in {"S-X1", "X1-X2", "X2-T"}


def test_acl_failures_without_acls():
    g = GraphCache(_triangle()).graph("S-T", True)
    assert min_failures_for_acl_path(g) is None


def test_level_cap():
    g = GraphCache(_triangle()).graph("S-T", True)
    v = run_tyen(g, PreferencePolicy([["S", "T"], ["S", "A", "T"]]), max_levels=1)
    assert v.holds and v.diagnostics[0]["levels"] == 1
