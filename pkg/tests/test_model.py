import copy
import json

import pytest

from cpverify.errors import InvariantError, ReferenceError, SchemaError
from cpverify.model import dump_spec, from_dict, load_spec, prefix_matches, to_dict, valid_prefix
from cpverify.netgen import NetBuilder, random_network

from .conftest import data_path


def _doc(name):
    return json.loads(data_path(f"{name}.json").read_text())


@pytest.mark.parametrize("name", ["blackhole", "hedge", "hedge_no_ae", "acl_paths"])
def test_round_trip(name):
    spec = load_spec(data_path(f"{name}.json").read_bytes())
    again = load_spec(dump_spec(spec))
    assert again == spec
    assert to_dict(again) == to_dict(spec)


@pytest.mark.parametrize("seed", range(20))
def test_random_networks_are_valid(seed):
    spec = from_dict(random_network(seed))
    assert spec.routers()
    assert spec.traffic_classes


def test_malformed_json():
    with pytest.raises(SchemaError):
        load_spec(b"{not json")
    with pytest.raises(SchemaError):
        load_spec(b"[]")
    with pytest.raises(SchemaError):
        load_spec(b"\xff\xfe")


def test_schema_violation_names_location():
    doc = _doc("blackhole")
    doc["devices"][0]["kind"] = "bridge"
    with pytest.raises(SchemaError, match="devices/0"):
        from_dict(doc)


def test_unknown_link_endpoint():
    doc = _doc("blackhole")
    doc["links"][0]["a"]["device"] = "nowhere"
    with pytest.raises(ReferenceError):
        from_dict(doc)


def test_traffic_class_unknown_router():
    doc = _doc("blackhole")
    doc["traffic_classes"][0]["dst_router"] = "Q"
    with pytest.raises(ReferenceError):
        from_dict(doc)


def test_duplicate_link_id():
    doc = _doc("blackhole")
    doc["links"].append(copy.deepcopy(doc["links"][0]))
    with pytest.raises(InvariantError):
        from_dict(doc)


def test_static_next_hop_must_be_adjacent():
    b = NetBuilder()
    b.ospf("A", "B", "C")
    b.link("A", "B")
    b.link("B", "C")
    b.static("A", "10.0.0.0/8", "C")
    b.traffic_class("t", "A", "C")
    with pytest.raises(InvariantError, match="not directly connected"):
        b.spec()


def test_same_src_and_dst_rejected():
    b = NetBuilder()
    b.ospf("A", "B")
    b.link("A", "B")
    b.traffic_class("t", "A", "A")
    with pytest.raises(InvariantError):
        b.spec()


def test_links_between_and_adjacency(hedge):
    assert [lk.id for lk in hedge.links_between("A", "E")] == ["A-E"]
    assert hedge.links_between("A", "C") == []
    # A and C sit on different VLANs of S1
    assert not hedge.adjacent("A", "C")
    assert hedge.adjacent("B", "D")


@pytest.mark.parametrize(
    "rule,prefix,ok",
    [
        (None, "10.1.2.0/24", True),
        ("10.1.2.0/24", "10.1.2.0/24", True),
        ("10.1.2.7/24", "10.1.2.0/24", True),
        ("10.0.0.0/8", "10.1.2.0/24", False),  # exact match only, no longest-prefix
        ("10.1.2.0/24", "10.1.0.0/16", False),
        ("192.168.0.0/16", "10.1.2.0/24", False),
    ],
)
def test_prefix_matches(rule, prefix, ok):
    assert prefix_matches(rule, prefix) is ok


def test_valid_prefix():
    assert valid_prefix("10.0.0.0/8")
    assert not valid_prefix("10.0.0.300/8")
    assert not valid_prefix("banana")
