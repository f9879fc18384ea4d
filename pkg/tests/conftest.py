import json
from pathlib import Path

import pytest

from cpverify.model import load_spec_file
from cpverify.policies import GraphCache

DATA = Path(__file__).parent / "data"


def data_path(name: str) -> Path:
    return DATA / name


def load(name: str):
    return load_spec_file(DATA / f"{name}.json")


@pytest.fixture(scope="session")
def golden() -> dict:
    return json.loads((DATA / "golden.json").read_text())


@pytest.fixture
def blackhole():
    return load("blackhole")


@pytest.fixture
def hedge():
    return load("hedge")


@pytest.fixture
def hedge_no_ae():
    return load("hedge_no_ae")


@pytest.fixture
def acl_paths():
    return load("acl_paths")


@pytest.fixture
def cache_of():
    return GraphCache
