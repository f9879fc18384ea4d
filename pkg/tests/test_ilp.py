import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import Bounds, LinearConstraint, milp

from cpverify.errors import Infeasible, IterationLimit
from cpverify.ilp.formulations import hop_count_edges, longest_path, min_cut
from cpverify.ilp.lpformat import export_lp, parse_lp
from cpverify.ilp.model import IlpModel
from cpverify.ilp.solver import solve
from cpverify.model import from_dict
from cpverify.netgen import random_network
from cpverify.policies import GraphCache
from cpverify.reach import iter_valid_paths


def random_model(seed: int, max_vars: int = 20) -> IlpModel:
    rng = random.Random(seed)
    n = rng.randint(1, max_vars)
    m = IlpModel(name=f"rand{seed}", sense=rng.choice(["min", "max"]))
    xs = [m.add_var(f"x{i}") for i in range(n)]
    m.objective = {x: rng.randint(-5, 5) for x in xs}
    for k in range(rng.randint(0, 2 * n)):
        vs = rng.sample(xs, rng.randint(1, min(n, 5)))
        coeffs = {v: rng.choice([-3, -2, -1, 1, 2, 3]) for v in vs}
        m.add_constraint(coeffs, rng.choice(["<=", ">=", "="]), rng.randint(-2, 4), f"r{k}")
    return m


def enumerate_optimum(m: IlpModel):
    best = None
    for bits in itertools.product((0, 1), repeat=len(m.variables)):
        assign = dict(zip(m.variables, bits))
        if m.violated(assign):
            continue
        val = m.objective_value(assign)
        if best is None or (val < best if m.sense == "min" else val > best):
            best = val
    return best


def milp_optimum(m: IlpModel):
    n = len(m.variables)
    sign = 1 if m.sense == "min" else -1
    c = np.array([sign * m.objective.get(v, 0) for v in m.variables], dtype=float)
    cons = []
    for con in m.constraints:
        row = np.zeros(n)
        for v, k in con.coeffs.items():
            row[m.index(v)] = k
        lo, hi = {"<=": (-np.inf, con.rhs), ">=": (con.rhs, np.inf), "=": (con.rhs, con.rhs)}[con.sense]
        cons.append(LinearConstraint(row, lo, hi))
    res = milp(c, constraints=cons, integrality=np.ones(n), bounds=Bounds(0, 1))
    if res.status != 0:
        return None
    return round(sign * res.fun)


@pytest.mark.parametrize("seed", range(50))
def test_solver_matches_enumeration(seed):
    m = random_model(seed, max_vars=12)
    expected = enumerate_optimum(m)
    if expected is None:
        with pytest.raises(Infeasible):
            solve(m)
        return
    sol = solve(m)
    assert sol.status == "optimal"
    assert sol.objective == expected
    assert not m.violated(sol.assignment)


@pytest.mark.parametrize("seed", range(100, 120))
def test_solver_matches_milp(seed):
    m = random_model(seed, max_vars=20)
    ref = milp_optimum(m)
    if ref is None:
        with pytest.raises(Infeasible):
            solve(m)
    else:
        assert solve(m).objective == ref


@pytest.mark.parametrize("seed", range(30))
def test_lp_round_trip(seed):
    m = random_model(seed)
    text = export_lp(m)
    back = parse_lp(text)
    assert back.sense == m.sense
    assert sorted(back.variables) == sorted(m.variables)
    assert {k: v for k, v in back.objective.items() if v} == {k: v for k, v in m.objective.items() if v}
    assert [(c.coeffs, c.sense, c.rhs) for c in back.constraints] == [(c.coeffs, c.sense, c.rhs) for c in m.constraints]
    assert export_lp(back) == text


def test_lp_sections():
    m = IlpModel(name="tiny", sense="max")
    a, b = m.add_var("a"), m.add_var("b")
    m.objective = {a: 2, b: -1}
    m.add_constraint({a: 1, b: 1}, "<=", 1, "cap")
    text = export_lp(m).decode()
    assert text.splitlines()[0].startswith("\\")
    for section in ("Maximize", "Subject To", "Binary", "End"):
        assert section in text
    assert "cap:" in text


def test_boolean_helpers():
    for lits in itertools.product([True, False], repeat=3):
        m = IlpModel()
        x = m.add_var("x")
        vs = [m.add_var(f"v{i}") for i in range(3)]
        m.add_and(x, list(zip(vs, lits)))
        for bits in itertools.product((0, 1), repeat=3):
            want = int(all(b == int(p) for b, p in zip(bits, lits)))
            for xv in (0, 1):
                ok = not m.violated({x: xv, **dict(zip(vs, bits))})
                assert ok == (xv == want)
    m = IlpModel()
    y = m.add_var("y")
    ws = [m.add_var(f"w{i}") for i in range(2)]
    m.add_or(y, ws)
    for bits in itertools.product((0, 1), repeat=2):
        for yv in (0, 1):
            assert (not m.violated({y: yv, **dict(zip(ws, bits))})) == (yv == int(any(bits)))


def test_empty_and_infeasible():
    assert solve(IlpModel()).objective == 0
    m = IlpModel()
    x = m.add_var("x")
    m.add_constraint({x: 1}, ">=", 2)
    with pytest.raises(Infeasible):
        solve(m)


def test_node_budget():
    m = random_model(7, max_vars=20)
    with pytest.raises(IterationLimit):
        solve(m, node_budget=0)
    sol = solve(m, node_budget=0, raise_on_limit=False)
    assert sol.status == "iterationLimit"


def test_hedge_min_cut(hedge, hedge_no_ae, golden):
    exp = golden["hedge"]
    assert min_cut(GraphCache(hedge_no_ae).graph(exp["traffic_class"]))[0] == exp["min_cut_without_ae"]
    assert min_cut(GraphCache(hedge).graph(exp["traffic_class"]))[0] == exp["min_cut_with_ae"]


def test_min_cut_witness_disconnects(hedge_no_ae):
    from cpverify.reach import comm_tdfs

    g = GraphCache(hedge_no_ae).graph("S-U")
    value, links = min_cut(g)
    assert len(links) == value
    assert not comm_tdfs(g, masked=g.masked_edges(links))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_path_bounds_match_enumeration(seed):
    spec = from_dict(random_network(seed, max_routers=5, max_links=7))
    g = GraphCache(spec).graph(spec.traffic_classes[0].name)
    lengths = [hop_count_edges(g, p) for p in iter_valid_paths(g)]
    hi, lo = longest_path(g, "max"), longest_path(g, "min")
    if not lengths:
        assert hi is None and lo is None
        return
    assert hi[0] == max(lengths)
    assert lo[0] == min(lengths)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_min_cut_matches_enumeration(seed):
    from cpverify.reach import comm_tdfs

    spec = from_dict(random_network(seed, max_routers=5, max_links=6))
    g = GraphCache(spec).graph(spec.traffic_classes[0].name)
    value, _ = min_cut(g)
    if not comm_tdfs(g):
        assert value == 0
        return
    links = spec.link_ids
    brute = next(
        size
        for size in range(len(links) + 1)
        for cut in itertools.combinations(links, size)
        if not comm_tdfs(g, masked=g.masked_edges(cut))
    )
    assert value == brute
