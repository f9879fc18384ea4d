"""Taint-aware traversal and the reachability-style policies.

Searches run in traffic direction. A search state is the node plus the
length of the untainted run ending at it and, for the community-aware
variant, the set of communities some upstream node would block if a
downstream node added them (the "armed" set). Communities are handled in
the order a receiving node applies them: block check, then removals, then
additions.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import IterationLimit, UnknownDevice
from .graph import DST, SRC, STATIC, LayeredGraph, acl_routers
from .taint import is_prohibited, run_length
from .verdict import Verdict, device_path

EXACT_SEARCH_BUDGET = 200_000


@dataclass(frozen=True)
class ReachResult:
    visited: frozenset
    reached: bool


def tdfs(g: LayeredGraph, root, masked=frozenset(), dst=DST) -> ReachResult:
    """Depth-first search that refuses to extend a path into a third consecutive untainted node.

    Visitation is keyed on the best (smallest) run length seen at a node, so
    a node first reached with a long run is explored again if a shorter run
    shows up later.
    """
    best = {}
    start = run_length(g, root, 0)
    if is_prohibited(start):
        return ReachResult(frozenset(), False)
    stack = [(root, start)]
    best[root] = start
    while stack:
        node, run = stack.pop()
        if best.get(node, 99) < run:
            continue
        for e in reversed(g.out(node, masked)):
            nxt = run_length(g, e.dst, run)
            if is_prohibited(nxt) or best.get(e.dst, 99) <= nxt:
                continue
            best[e.dst] = nxt
            stack.append((e.dst, nxt))
    return ReachResult(frozenset(best), dst in best)


def _community_step(g: LayeredGraph, node, armed):
    """Return the armed set after ``node`` or None when ``node`` completes a block."""
    adds = g.ac.get(node)
    if adds and armed & adds:
        return None
    rem = g.rc.get(node)
    if rem:
        armed = armed - rem
    blk = g.blocked(node)
    if blk:
        armed = armed | blk
    return armed


def path_valid(g: LayeredGraph, nodes) -> bool:
    """Check one concrete node path against the untaint and community rules."""
    run, armed = 0, frozenset()
    for n in nodes:
        run = run_length(g, n, run)
        if is_prohibited(run):
            return False
        armed = _community_step(g, n, armed)
        if armed is None:
            return False
    return True


def _state_search(g, roots, targets, masked, through=None):
    """Search product states; returns a walk to any target or None.

    ``through`` optionally names a set of edge ids at least one of which
    the walk must cross.
    """
    parent = {}
    stack = []
    for r in roots:
        run = run_length(g, r, 0)
        armed = _community_step(g, r, frozenset())
        if is_prohibited(run) or armed is None:
            continue
        st = (r, run, armed, through is None)
        if st not in parent:
            parent[st] = None
            stack.append(st)
    stack.reverse()
    while stack:
        st = stack.pop()
        node, run, armed, crossed = st
        if node in targets and crossed:
            walk = []
            while st is not None:
                walk.append(st[0])
                st = parent[st]
            return walk[::-1]
        for e in reversed(g.out(node, masked)):
            nrun = run_length(g, e.dst, run)
            if is_prohibited(nrun):
                continue
            narmed = _community_step(g, e.dst, armed)
            if narmed is None:
                continue
            nst = (e.dst, nrun, narmed, crossed or (through is not None and e.id in through))
            if nst in parent:
                continue
            parent[nst] = st
            stack.append(nst)
    return None


def _revisit_ok(g, a, b) -> bool:
    """A BGP process may hand a packet back to its IGP to resolve the next hop."""
    return a.device == b.device and any(e.dst == b and e.label == "i" for e in g.out(a))


def is_simple(nodes, g: LayeredGraph = None) -> bool:
    """True when the path never returns to a device it has left and repeats no node.

    With ``g`` a node may appear twice inside one device when the second
    entry is over an iBGP next-hop edge (the FIB resolved the packet
    through BGP, which resolves its next hop through the IGP again).
    """
    seen = set()
    for k, n in enumerate(nodes):
        if n in seen:
            if g is None or nodes.count(n) > 2 or not _revisit_ok(g, nodes[k - 1], n):
                return False
        seen.add(n)
    done, cur = set(), None
    for n in nodes:
        d = n.device
        if d == cur:
            continue
        if d in done:
            return False
        if cur is not None and cur != "":
            done.add(cur)
        cur = d
    return True


def _dfs_paths(g, roots, targets, masked=frozenset(), through=None, budget=EXACT_SEARCH_BUDGET):
    """Yield every valid simple path from a root to a target, depth first.

    Paths never return to a device they have left and visit each node
    once, except that an iBGP next-hop edge may re-enter an IGP node of
    the current device one time (see ``is_simple``). Raises
    IterationLimit after ``budget`` steps.
    """
    count = 0
    for r in roots:
        run = run_length(g, r, 0)
        armed = _community_step(g, r, frozenset())
        if is_prohibited(run) or armed is None:
            continue
        first = (r, run, armed, through is None)
        if r in targets and first[3]:
            yield [r]
            continue
        path, on_path = [r], {r: 1}
        left = set()  # devices whose block is finished
        frames = [(iter(g.out(r, masked)), first, None)]
        while frames:
            count += 1
            if count > budget:
                raise IterationLimit(f"more than {budget} steps enumerating valid paths")
            it, st, closed = frames[-1]
            e = next(it, None)
            if e is None:
                frames.pop()
                gone = path.pop()
                on_path[gone] -= 1
                if not on_path[gone]:
                    del on_path[gone]
                if closed is not None:
                    left.discard(closed)
                continue
            node, run, armed, crossed = st
            nxt = e.dst
            same = nxt.device == node.device
            if nxt in on_path and (on_path[nxt] > 1 or not same or e.label != "i"):
                continue
            if not same and nxt.device in left:
                continue
            nrun = run_length(g, nxt, run)
            if is_prohibited(nrun):
                continue
            narmed = _community_step(g, nxt, armed)
            if narmed is None:
                continue
            nst = (nxt, nrun, narmed, crossed or (through is not None and e.id in through))
            if nxt in targets and nst[3]:
                yield path + [nxt]
                continue
            newly = node.device if not same and node.device and node.device not in left else None
            if newly is not None:
                left.add(newly)
            path.append(nxt)
            on_path[nxt] = on_path.get(nxt, 0) + 1
            frames.append((iter(g.out(nxt, masked)), nst, newly))


def _exact_search(g, roots, targets, masked, through=None, budget=EXACT_SEARCH_BUDGET):
    """First valid simple path, or None; raises IterationLimit when the budget runs out."""
    return next(_dfs_paths(g, roots, targets, masked, through, budget), None)


def iter_valid_paths(g: LayeredGraph, src=SRC, dst=DST, masked=frozenset(), budget=EXACT_SEARCH_BUDGET):
    """Yield every valid simple path from ``src`` to ``dst``; raises IterationLimit past ``budget`` steps."""
    yield from _dfs_paths(g, [src], frozenset([dst]), masked, None, budget)


def find_valid_path(g: LayeredGraph, roots, targets, masked=frozenset(), through=None):
    """Return a valid simple path from any root to any target, or None.

    The polynomial product-state search decides unreachability exactly;
    when the walk it returns revisits a node or a device, an exhaustive
    search over simple paths settles the question. If that search runs out of
    budget the walk is returned as is, erring toward reachable.
    """
    roots = [r for r in roots if r in g]
    targets = frozenset(t for t in targets if t in g)
    if not roots or not targets:
        return None
    walk = _state_search(g, roots, targets, masked, through)
    if walk is None:
        return None
    if is_simple(walk, g):
        return walk
    try:
        return _exact_search(g, roots, targets, masked, through)
    except IterationLimit:
        return walk


def comm_tdfs(g: LayeredGraph, src=SRC, dst=DST, masked=frozenset()) -> bool:
    """True when some path from ``src`` to ``dst`` survives both the untaint and community rules."""
    return find_valid_path(g, [src], [dst], masked) is not None


def _path_witness(path) -> dict:
    return {"path": device_path(path), "nodes": [str(n) for n in path]}


def _check_device(g: LayeredGraph, name: str) -> None:
    if g.spec is not None and g.spec.device(name) is None:
        raise UnknownDevice(name)
    if g.spec is None and not g.device_nodes(name):
        raise UnknownDevice(name)


def verify_p1_always_blocked(g: LayeredGraph) -> Verdict:
    path = find_valid_path(g, [SRC], [DST])
    if path is None:
        return Verdict("P1", True)
    return Verdict("P1", False, _path_witness(path))


def verify_p2_always_waypoint(g: LayeredGraph, waypoint: str) -> Verdict:
    _check_device(g, waypoint)
    h = g.remove_nodes(g.device_nodes(waypoint))
    path = find_valid_path(h, [SRC], [DST])
    if path is None:
        return Verdict("P2", True)
    return Verdict("P2", False, _path_witness(path))


def verify_p6_waypoint_chain(g: LayeredGraph, chain: list) -> Verdict:
    """Each waypoint must separate its predecessor (or src) from its successor (or dst)."""
    for w in chain:
        _check_device(g, w)
    stops = [[SRC]] + [g.device_nodes(w) for w in chain] + [[DST]]
    for i in range(1, len(stops) - 1):
        h = g.remove_nodes(stops[i])
        path = find_valid_path(h, stops[i - 1], stops[i + 1])
        if path is not None:
            w = _path_witness(path)
            w["bypassed"] = chain[i - 1]
            return Verdict("P6", False, w)
    return Verdict("P6", True)


def verify_p10_no_blackholes(g_keep: LayeredGraph, g_removed: LayeredGraph = None, spec=None) -> Verdict:
    """Look for traffic that could be forwarded into a router that then drops it.

    Three sources are checked on the graph that keeps ACL edges: a valid
    path crossing an edge some ACL denies, a valid prefix that follows an
    iBGP next-hop lookup into a router whose FIB holds nothing for the
    destination, and a static route whose next hop can be cut off from
    the destination while traffic still reaches the static route.
    """
    g = g_keep
    spec = spec or g.spec
    if g.acl_edges:
        path = find_valid_path(g, [SRC], [DST], through=frozenset(g.acl_edges))
        if path is not None:
            devs = sorted({g.edges[i].src.device for i in g.acl_edges} & set(device_path(path)))
            return Verdict(
                "P10",
                False,
                {"device": devs[0] if devs else acl_routers(spec, g.tc)[0], "reason": "acl", **_path_witness(path)},
            )
    dead = set()
    for n in g.nodes:
        if n.kind == "fib" and not g.is_tainted(n) and n.device != g.tc.dst_router:
            dead.update(m for m in g.device_nodes(n.device) if m.kind == "proc" and g.protocol(m) == "ospf")
    src_dev = g.tc.src_router
    dead = {n for n in dead if n.device != src_dev}
    # only an iBGP next-hop lookup hands traffic to an IGP neighbour that never advertised dst
    ibgp_hops = frozenset(e.id for e in g.edges.values() if e.label == "i")
    if dead and ibgp_hops:
        path = find_valid_path(g, [SRC], dead, through=ibgp_hops)
        if path is not None:
            return Verdict(
                "P10", False, {"device": path[-1].device, "reason": "no-route", **_path_witness(path)}
            )
    for n in sorted(g.nodes):
        if g.protocol(n) != STATIC:
            continue
        hit = _static_blackhole(g, n)
        if hit is not None:
            return Verdict("P10", False, hit)
    return Verdict("P10", True)


STATIC_PREFIX_BUDGET = 64


def _static_blackhole(g: LayeredGraph, static) -> dict:
    """A failure set under which traffic still follows ``static`` but its next hop has no route."""
    s_edges = [e for e in g.out(static) if e.label == "s" and e.dst.device != g.tc.dst_router]
    if not s_edges:
        return None
    all_links = {e.link for e in g.edges.values() if e.link is not None}
    tried = 0
    try:
        for prefix in iter_valid_paths(g, SRC, static):
            for se in s_edges:
                tried += 1
                if tried > STATIC_PREFIX_BUDGET:
                    return None
                keep = {se.link} - {None}
                for a, b in zip(prefix, prefix[1:]):
                    keep.update(e.link for e in g.out(a) if e.dst == b and e.link is not None)
                nh = se.dst.device
                nh_nodes = [m for m in g.device_nodes(nh) if m.kind in ("proc", "fib")]

                def dead(failed):
                    return find_valid_path(g, nh_nodes, [DST], g.masked_edges(failed)) is None

                failed = set(all_links - keep)
                if not dead(failed):
                    continue
                for lk in sorted(failed):  # shrink to a minimal failure set
                    if dead(failed - {lk}):
                        failed.discard(lk)
                return {
                    "device": nh,
                    "reason": "static",
                    "static_at": static.device,
                    "scenario": sorted(failed),
                    **_path_witness(prefix + [se.dst]),
                }
    except IterationLimit:
        return None
    return None
