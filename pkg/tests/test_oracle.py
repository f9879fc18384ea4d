import pytest

from cpverify.model import from_dict
from cpverify.netgen import NetBuilder, random_network
from cpverify.oracle import Replay, enumerate_scenarios, oracle_verify
from cpverify.policies import PolicyRequest


def _chain(n_links: int):
    b = NetBuilder()
    names = [f"R{i}" for i in range(n_links + 1)]
    b.ospf(*names)
    for a, c in zip(names, names[1:]):
        b.link(a, c)
    b.traffic_class("ends", names[0], names[-1])
    return b.spec()


def test_scenario_counts(golden):
    for case in golden["oracle_scenario_counts"]:
        spec = _chain(case["links"])
        scen = list(enumerate_scenarios(spec, case["k"]))
        assert len(scen) == case["count"]
        assert len(set(scen)) == len(scen)
        assert scen[0] == frozenset()
        assert [len(s) for s in scen] == sorted(len(s) for s in scen)


def test_scenarios_capped_by_link_count():
    spec = _chain(2)
    assert len(list(enumerate_scenarios(spec, 5))) == 4
    with pytest.raises(ValueError):
        list(enumerate_scenarios(spec, -1))


def test_blackhole_outcomes(blackhole, golden):
    exp = golden["blackhole"]
    rp = Replay(blackhole)
    for case in exp["paths"]:
        o = rp.outcome(exp["traffic_class"], frozenset(case["failed"]))
        assert o.status == case["status"]
        assert o.devices == case["path"]
    o = rp.outcome("C-E", frozenset())
    assert o.links == frozenset(["B-C", "B-E"]) and o.hops == 2


def test_replay_memoizes(blackhole):
    rp = Replay(blackhole)
    first = rp.outcomes("C-E", 1)
    assert rp.outcomes("C-E", 1)[0] is first[0]
    assert len(first) == 1 + len(blackhole.link_ids)


def test_parallel_replay_is_deterministic():
    spec = from_dict(random_network(11))
    tc = spec.traffic_classes[0].name
    serial = Replay(spec).outcomes(tc, 2)
    threaded = Replay(spec, jobs=4).outcomes(tc, 2)
    assert [(o.scenario, o.status, o.devices, o.reason) for o in serial] == [
        (o.scenario, o.status, o.devices, o.reason) for o in threaded
    ]


def test_oracle_witnesses(blackhole, hedge, hedge_no_ae):
    v = oracle_verify(PolicyRequest("P1", "E-C"), hedge, 0)
    assert not v.holds and v.witness["path"] == ["E", "A", "D", "C"]
    v = oracle_verify(PolicyRequest("P3", "S-U", params={"k": 2}), hedge_no_ae, 1)
    assert not v.holds and v.witness["scenario"] == ["B-E"]
    assert oracle_verify(PolicyRequest("P3", "S-U", params={"k": 2}), hedge, 1).holds
    v = oracle_verify(PolicyRequest("P10", "C-E"), blackhole, 2)
    assert not v.holds
    assert (v.witness["scenario"], v.witness["device"], v.witness["reason"]) == (["A-C", "B-C"], "D", "no-route")


def test_shared_replay_across_policies(hedge):
    rp = Replay(hedge)
    for req in (PolicyRequest("P1", "E-C"), PolicyRequest("P7", "E-C"), PolicyRequest("P4", "E-C", params={"k": 3})):
        oracle_verify(req, hedge, 2, rp)
    assert len(rp._memo) == len(list(enumerate_scenarios(hedge, 2)))
