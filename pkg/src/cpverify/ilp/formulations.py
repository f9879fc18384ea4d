"""Hedge min-cut and longest-path programs over a traffic-class graph.

Both programs run in advertisement direction (dst toward src) over an
expanded state space: a state is a graph node plus the untainted run
length so far and the communities the advertisement carries. A transition
into a node that would block a carried community, or that would make the
run prohibited, simply does not exist, so the per-edge "blocked" and
"prohibited" indicators are constant zero on every transition that is
kept. Edges of one physical link share a single failure variable.
"""

from __future__ import annotations

from collections import deque

from ..errors import Infeasible, MissingEndpoints
from ..graph import DST, SRC, LayeredGraph
from ..taint import is_prohibited, run_length
from ..verdict import Verdict, device_path
from .model import IlpModel
from .solver import solve

# test hook: names of deliberately broken constraints (see the CLI's fault flag)
FAULTS: set = set()

MAX_CUT_ROUNDS = 200


class StateSpace:
    """Reachable advertisement states and the transitions between them."""

    def __init__(self, g: LayeredGraph, masked=frozenset()):
        if g.src is None or g.dst is None:
            raise MissingEndpoints("graph has no src/dst attachment")
        start = (DST, 0, frozenset())
        index = {start: 0}
        states = [start]
        trans = []  # (from index, to index, edge)
        work = deque([0])
        while work:
            i = work.popleft()
            v, run, carried = states[i]
            if v == SRC:
                continue
            for e in g.inc(v, masked):
                u = e.src
                nrun = run_length(g, u, run)
                if is_prohibited(nrun) or carried & g.blocked(u):
                    continue
                ncar = (carried - g.rc.get(u, frozenset())) | g.ac.get(u, frozenset())
                st = (u, nrun, ncar)
                j = index.get(st)
                if j is None:
                    j = index[st] = len(states)
                    states.append(st)
                    work.append(j)
                trans.append((i, j, e))
        # keep only states from which a src state is reachable
        back = {}
        for k, (i, j, _) in enumerate(trans):
            back.setdefault(j, []).append(i)
        alive = {i for i, st in enumerate(states) if st[0] == SRC}
        work = deque(alive)
        while work:
            j = work.popleft()
            for i in back.get(j, ()):
                if i not in alive:
                    alive.add(i)
                    work.append(i)
        self.states = states
        self.alive = alive
        self.trans = [(i, j, e) for i, j, e in trans if i in alive and j in alive]
        self.src_states = sorted(i for i in alive if states[i][0] == SRC)

    def incoming(self) -> dict:
        inc = {}
        for k, (_, j, _) in enumerate(self.trans):
            inc.setdefault(j, []).append(k)
        return inc

    def outgoing(self) -> dict:
        out = {}
        for k, (i, _, _) in enumerate(self.trans):
            out.setdefault(i, []).append(k)
        return out


def _hedge_vars(m: IlpModel, space: StateSpace) -> dict:
    links = sorted({e.link for _, _, e in space.trans if e.link is not None})
    fvar = {}
    for k, lid in enumerate(links):
        fvar[lid] = m.add_var(f"F{k}")
    m.meta["hedges"] = {v: lid for lid, v in fvar.items()}
    return fvar


def build_mincut_ilp(g: LayeredGraph, masked=frozenset()) -> IlpModel:
    """Minimum number of hedges whose failure stops every valid advertisement from reaching src."""
    space = StateSpace(g, masked)
    m = IlpModel(name="hedge_mincut", sense="min")
    fvar = _hedge_vars(m, space)
    m.objective = {v: 1 for v in fvar.values()}
    rvar = {i: m.add_var(f"R{i}") for i in sorted(space.alive | {0})}
    avar = {k: m.add_var(f"A{k}") for k in range(len(space.trans))}
    m.fix(rvar[0], 1)
    for i in space.src_states:
        m.fix(rvar[i], 0)
    negate_f = "flip-flow-sign" not in FAULTS
    for k, (i, _, e) in enumerate(space.trans):
        lits = [(rvar[i], True)]
        if e.link is not None:
            lits.append((fvar[e.link], not negate_f))
        m.add_and(avar[k], lits)
    inc = space.incoming()
    for i in sorted(rvar):
        if i == 0:
            continue
        m.add_or(rvar[i], [avar[k] for k in inc.get(i, ())])
    m.meta["space"] = space
    return m


def min_cut(g: LayeredGraph, masked=frozenset()):
    """Return ``(value, failed_links)`` for the hedge min-cut.

    The program cuts every valid walk, which can cost more than cutting
    every valid simple path. Its answer is an upper bound that
    ``_tighten_cut`` lowers to the exact value.
    """
    m = build_mincut_ilp(g, masked)
    sol = solve(m)
    cut = sorted(lid for v, lid in m.meta["hedges"].items() if sol.value(v))
    return _tighten_cut(g, masked, sol.objective, cut)


def _links_on(g: LayeredGraph, path) -> frozenset:
    out = set()
    for a, b in zip(path, path[1:]):
        for e in g.out(a):
            if e.dst == b and e.link is not None:
                out.add(e.link)
                break
    return frozenset(out)


def _tighten_cut(g: LayeredGraph, masked, bound: int, bound_cut: list):
    """Smallest link set meeting every valid simple path, found by adding paths until the cut holds."""
    from ..reach import find_valid_path

    paths = []
    while True:
        if paths:
            m = IlpModel(name="path_hitting_set", sense="min")
            links = sorted(set().union(*paths))
            var = {lid: m.add_var(f"F{k}") for k, lid in enumerate(links)}
            m.objective = {v: 1 for v in var.values()}
            for k, p in enumerate(paths):
                m.add_constraint({var[lid]: 1 for lid in p}, ">=", 1, f"path{k}")
            sol = solve(m)
            value, cut = sol.objective, [lid for lid in links if sol.value(var[lid])]
        else:
            value, cut = 0, []
        if value >= bound:
            return bound, bound_cut
        p = find_valid_path(g, [SRC], [DST], frozenset(masked) | g.masked_edges(cut))
        if p is None:
            return value, cut
        links_p = _links_on(g, p)
        if not links_p:
            return bound, bound_cut
        paths.append(links_p)


def build_longest_path_ilp(g: LayeredGraph, sense: str = "max", masked=frozenset(), cuts=()) -> IlpModel:
    """Single-path flow from dst to src; the objective counts edges that ride a physical link."""
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    space = StateSpace(g, masked)
    m = IlpModel(name=f"{'longest' if sense == 'max' else 'shortest'}_path", sense=sense)
    avar = {k: m.add_var(f"A{k}") for k in range(len(space.trans))}
    m.objective = {avar[k]: 1 for k, (_, _, e) in enumerate(space.trans) if e.link is not None}
    inc, out = space.incoming(), space.outgoing()
    m.add_constraint({avar[k]: 1 for k in out.get(0, ())}, "=", 1, "dst")
    src_in = {}
    for i in space.src_states:
        for k in inc.get(i, ()):
            src_in[avar[k]] = 1
    m.add_constraint(src_in, "=", 1, "src")
    by_device, by_node = {}, {}
    for i in sorted(space.alive):
        if i == 0 or i in space.src_states:
            continue
        coeffs = {}
        for k in inc.get(i, ()):
            coeffs[avar[k]] = coeffs.get(avar[k], 0) + 1
        for k in out.get(i, ()):
            coeffs[avar[k]] = coeffs.get(avar[k], 0) - 1
        m.add_constraint(coeffs, "=", 0, f"flow{i}")
    # traffic enters a node once, plus once more over an iBGP next-hop edge
    for k, (_, _, e) in enumerate(space.trans):
        if e.dst != DST:
            by_node.setdefault((e.dst, e.label == "i"), []).append(k)
    for (n, via_i), ks in sorted(by_node.items()):
        if len(ks) > 1:
            m.add_constraint({avar[k]: 1 for k in ks}, "<=", 1, f"node_{n}{'_i' if via_i else ''}")
    # each device is entered from outside at most once, so the path never loops between devices
    for k, (i, j, _) in enumerate(space.trans):
        a, b = space.states[i][0], space.states[j][0]
        if a.device != b.device and b.device:
            by_device.setdefault(b.device, []).append(k)
    for dev, ks in sorted(by_device.items()):
        if len(ks) > 1:
            m.add_constraint({avar[k]: 1 for k in ks}, "<=", 1, f"enter_{dev}")
    for states in cuts:
        _add_cycle_cut(m, space, avar, states)
    m.meta["space"] = space
    m.meta["avar"] = avar
    return m


def _add_cycle_cut(m, space, avar, states):
    coeffs = {avar[k]: 1 for k, (i, j, _) in enumerate(space.trans) if i in states and j in states}
    if coeffs:
        m.add_constraint(coeffs, "<=", len(states) - 1, f"cycle{len(m.constraints)}")


def _decode_path(space, avar, sol):
    used = {k for k, v in avar.items() if sol.value(v)}
    out = {}
    for k in used:
        out.setdefault(space.trans[k][0], []).append(k)
    path_states = [0]
    seen_t = set()
    cur = 0
    while space.states[cur][0] != SRC:
        k = out[cur][0]
        seen_t.add(k)
        cur = space.trans[k][1]
        path_states.append(cur)
    cycles = []
    left = used - seen_t
    while left:
        k = min(left)
        cyc, cur = [], k
        while cur in left:
            left.discard(cur)
            cyc.append(cur)
            nxt = out.get(space.trans[cur][1], [])
            cur = next((x for x in nxt if x in left), None)
            if cur is None:
                break
        cycles.append(frozenset(space.trans[t][0] for t in cyc))
    nodes = [space.states[i][0] for i in reversed(path_states)]
    return nodes, cycles


def longest_path(g: LayeredGraph, sense: str = "max", masked=frozenset()):
    """Return ``(hops, path)`` for the longest (or shortest) valid path, or None when there is none.

    Flow conservation alone lets detached cycles inflate the objective, so
    cycles found in an optimum are cut off and the program is solved again.
    """
    cuts = []
    for _ in range(MAX_CUT_ROUNDS):
        m = build_longest_path_ilp(g, sense, masked, cuts)
        if not m.meta["space"].src_states:
            return None
        try:
            sol = solve(m)
        except Infeasible:
            return None
        path, cycles = _decode_path(m.meta["space"], m.meta["avar"], sol)
        if not cycles or sense == "min":
            return hop_count_edges(g, path), path
        cuts.extend(cycles)
    raise RuntimeError("cycle elimination did not settle")


def hop_count_edges(g: LayeredGraph, path) -> int:
    return sum(1 for a, b in zip(path, path[1:]) if a.device != b.device and a.kind not in ("src",) and b.kind != "dst")


def verify_p3_reachable_k(g_removed: LayeredGraph, g_keep: LayeredGraph, k: int) -> Verdict:
    """src stays connected under any k-1 link failures, counting ACL-poisoned path choices."""
    if k < 1:
        raise ValueError("K must be at least 1")
    n_val, n_cut = min_cut(g_removed)
    diags = {"N": n_val}
    value, witness = n_val, n_cut
    if g_keep is not None and g_keep.acl_edges:
        from ..tyen import min_failures_for_acl_path

        res = min_failures_for_acl_path(g_keep)
        if res is not None:
            l_val, l_cut = res
            diags["L"] = l_val
            if l_val < value:
                value, witness = l_val, l_cut
    diags["min_cut"] = value
    if value >= k:
        return Verdict("P3", True, None, [diags])
    return Verdict("P3", False, {"scenario": witness}, [diags])


def verify_p4_bounded_length(g: LayeredGraph, k: int) -> Verdict:
    res = longest_path(g, "max")
    if res is None:
        return Verdict("P4", True, None, [{"longest": None}])
    hops, path = res
    if hops <= k:
        return Verdict("P4", True, None, [{"longest": hops}])
    return Verdict("P4", False, {"path": device_path(path), "length": hops}, [{"longest": hops}])


def verify_p7_equal_bound(g: LayeredGraph) -> Verdict:
    hi = longest_path(g, "max")
    if hi is None:
        return Verdict("P7", True, None, [{"longest": None, "shortest": None}])
    lo = longest_path(g, "min")
    diags = [{"longest": hi[0], "shortest": lo[0]}]
    if hi[0] == lo[0]:
        return Verdict("P7", True, None, diags)
    return Verdict(
        "P7",
        False,
        {"longest": device_path(hi[1]), "shortest": device_path(lo[1])},
        diags,
    )
