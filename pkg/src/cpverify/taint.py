"""Forwarding-information taints and the prohibited-path rule."""

from __future__ import annotations

from collections import deque

from .errors import MissingDst
from .graph import DST, SRC, STATIC, LayeredGraph

PROHIBITED_RUN = 3

# labels an advertisement may cross while staying "known" to the receiver
_CARRYING = frozenset({"o", "b", "r", "s", "p"})


def is_prohibited(consecutive_untainted: int) -> bool:
    if consecutive_untainted < 0:
        raise ValueError("count must be non-negative")
    return consecutive_untainted >= PROHIBITED_RUN


def propagate_taints(g: LayeredGraph, dst=DST) -> LayeredGraph:
    """Return a copy of ``g`` whose ``taint`` map marks nodes that may know a route.

    Seeds are the processes attached to ``dst`` and static nodes holding a
    matching route. Taints then spread against the traffic direction over
    protocol, redistribution, static and layer-2 edges, and between iBGP
    peers. A FIB is tainted when any process on its router is.
    """
    if dst not in g:
        raise MissingDst(str(dst))
    taint = {n: False for n in g.nodes}
    taint[dst] = True
    work = deque()
    for e in g.inc(dst):
        if not taint[e.src]:
            taint[e.src] = True
            work.append(e.src)
    for n in g.nodes:
        if g.protocol(n) == STATIC and any(e.label == "s" for e in g.out(n)) and not taint[n]:
            taint[n] = True
            work.append(n)

    peers = {}
    for u, ps in g.ibgp_peers.items():
        for p in ps:
            if (u, p) in g.ibgp_filtered:
                continue
            peers.setdefault(p, []).append(u)

    while work:
        t = work.popleft()
        nbrs = [e.src for e in g.inc(t) if e.label in _CARRYING]
        nbrs += [u for u in peers.get(t, ()) if u in g]
        for u in nbrs:
            if u.kind in ("fib", "src") or taint[u]:
                continue
            taint[u] = True
            work.append(u)

    for n in g.nodes:
        if n.kind == "fib":
            taint[n] = any(taint[e.dst] for e in g.out(n) if e.label == "f")
    taint[SRC] = False
    out = g.derive(set(), {})
    out.taint = taint
    return out


def run_length(g: LayeredGraph, node, run: int) -> int:
    """Untaint run after stepping onto ``node``; switch nodes are transparent."""
    if node.kind == "vlan":
        return run
    return 0 if g.taint.get(node, False) else run + 1


def path_run_ok(g: LayeredGraph, nodes) -> bool:
    run = 0
    for n in nodes:
        run = run_length(g, n, run)
        if is_prohibited(run):
            return False
    return True
