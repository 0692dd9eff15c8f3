"""Concrete stabilizing protocols: maximal matching and the K-state token ring.

Each protocol is built as a ProgramSpec plus its invariant predicate and
helper classifiers.  Rule semantics here are the single source of truth
for both the live engine and the brute-force analyzer; their correctness
is gated by the exhaustive stabilization checks in the test suite rather
than taken on faith.
"""

from __future__ import annotations

import enum
from typing import Mapping, Sequence

from .model import (
    ActionDef,
    DomainError,
    GlobalState,
    GraphTopology,
    LocalView,
    NodeId,
    ProgramSpec,
    Value,
    VarId,
)

MATCHING_RULES = ("sanitize", "update", "marriage", "seduction", "abandonment")


def _prmarried_view(view: LocalView, v: NodeId, nbrs: tuple[int, ...]) -> bool:
    p_v = view.get("p", v)
    return p_v in nbrs and view.get("p", p_v) == v


def _matching_actions(v: NodeId, nbrs: tuple[int, ...]) -> list[ActionDef]:
    """The five matching rules for node v.

    `update` keeps the married flag consistent and has priority: every
    other rule is guarded off while an update is pending.  Marriage
    accepts the minimum proposing neighbor; seduction proposes to the
    maximum eligible higher-id neighbor.  Sanitize clears pointers that
    are outside N(v) + null (arbitrary initialization can plant any node
    id, including non-neighbors and v itself).
    """
    p_v = VarId(v, "p")
    m_v = VarId(v, "m")

    def update_guard(view: LocalView) -> bool:
        return view.get("m", v) != _prmarried_view(view, v, nbrs)

    def update_effect(view: LocalView) -> dict[VarId, Value]:
        return {m_v: _prmarried_view(view, v, nbrs)}

    def settled(view: LocalView) -> bool:
        # update priority: other rules wait until m is consistent
        return view.get("m", v) == _prmarried_view(view, v, nbrs)

    def sanitize_guard(view: LocalView) -> bool:
        p = view.get("p", v)
        return p is not None and p not in nbrs and settled(view)

    def sanitize_effect(view: LocalView) -> dict[VarId, Value]:
        return {p_v: None}

    def marriage_guard(view: LocalView) -> bool:
        if view.get("m", v) or view.get("p", v) is not None:
            return False
        return any(
            view.get("p", u) == v and not view.get("m", u) for u in nbrs
        )

    def marriage_effect(view: LocalView) -> dict[VarId, Value]:
        u = min(
            u for u in nbrs if view.get("p", u) == v and not view.get("m", u)
        )
        return {p_v: u}

    def seduction_guard(view: LocalView) -> bool:
        if view.get("m", v) or view.get("p", v) is not None:
            return False
        if any(view.get("p", u) == v for u in nbrs):
            return False
        return any(
            u > v and view.get("p", u) is None and not view.get("m", u)
            for u in nbrs
        )

    def seduction_effect(view: LocalView) -> dict[VarId, Value]:
        u = max(
            u
            for u in nbrs
            if u > v and view.get("p", u) is None and not view.get("m", u)
        )
        return {p_v: u}

    def abandonment_guard(view: LocalView) -> bool:
        if view.get("m", v):
            return False
        u = view.get("p", v)
        if u is None or u not in nbrs:
            return False
        return view.get("p", u) != v and (view.get("m", u) or u < v)

    def abandonment_effect(view: LocalView) -> dict[VarId, Value]:
        return {p_v: None}

    return [
        ActionDef(v, "sanitize", sanitize_guard, sanitize_effect),
        ActionDef(v, "update", update_guard, update_effect),
        ActionDef(v, "marriage", marriage_guard, marriage_effect),
        ActionDef(v, "seduction", seduction_guard, seduction_effect),
        ActionDef(v, "abandonment", abandonment_guard, abandonment_effect),
    ]


def matching_spec(topology: GraphTopology) -> ProgramSpec:
    """Self-stabilizing maximal matching over an undirected topology.

    Per node: pointer ``p`` in V + null (full V at the store level, so
    arbitrary initialization is representable) and married flag ``m``.
    """
    n = topology.node_count
    p_domain: tuple[Value, ...] = (None,) + tuple(range(n))
    m_domain: tuple[Value, ...] = (False, True)
    domains: dict[VarId, tuple[Value, ...]] = {}
    actions: dict[NodeId, list[ActionDef]] = {}
    for v in topology.nodes():
        domains[VarId(v, "p")] = p_domain
        domains[VarId(v, "m")] = m_domain
        actions[v] = _matching_actions(v, topology.neighbors[v])
    return ProgramSpec(
        name="matching",
        topology=topology,
        domains=domains,
        actions=actions,
        defaults={"p": None, "m": False},
    )


def _prmarried(topology: GraphTopology, state, v: NodeId) -> bool:
    p_v = state.get("p", v)
    return p_v in topology.neighbors[v] and state.get("p", p_v) == v


def matching_invariant(topology: GraphTopology, state) -> bool:
    """Symmetric pointers, consistent flags, and no augmentable edge."""
    for v in topology.nodes():
        p_v = state.get("p", v)
        if p_v is not None:
            if p_v not in topology.neighbors[v] or state.get("p", p_v) != v:
                return False
        if state.get("m", v) != _prmarried(topology, state, v):
            return False
    for u, v in topology.edges():
        if not _prmarried(topology, state, u) and not _prmarried(topology, state, v):
            return False
    return True


class NodeStatus(enum.Enum):
    MATCHED = "matched"
    DEAD = "dead"
    ACTIVE = "active"


def node_status(topology: GraphTopology, state, j: NodeId) -> NodeStatus:
    """Matched, dead (all neighbors married elsewhere), or still active."""
    if _prmarried(topology, state, j):
        return NodeStatus.MATCHED
    if all(_prmarried(topology, state, u) for u in topology.neighbors[j]):
        return NodeStatus.DEAD
    return NodeStatus.ACTIVE


def matched_nodes(topology: GraphTopology, state) -> int:
    return sum(1 for v in topology.nodes() if _prmarried(topology, state, v))


def ring_topology(n_nodes: int) -> GraphTopology:
    if n_nodes < 2:
        raise DomainError("ring needs at least 2 nodes")
    edges = [(j, (j + 1) % n_nodes) for j in range(n_nodes)]
    return GraphTopology(n_nodes, edges)


def token_spec(n_nodes: int, k: int) -> ProgramSpec:
    """Incrementing-token ring: node 0 bumps mod K when it matches its
    predecessor; every other node copies its predecessor."""
    if n_nodes < 2:
        raise DomainError("token ring needs at least 2 nodes")
    if k < 2:
        raise DomainError("token ring needs K >= 2")
    topology = ring_topology(n_nodes)
    domains = {VarId(j, "x"): tuple(range(k)) for j in range(n_nodes)}
    actions: dict[NodeId, list[ActionDef]] = {}
    last = n_nodes - 1

    def make_head(j: NodeId) -> ActionDef:
        x_j = VarId(j, "x")

        def guard(view: LocalView) -> bool:
            return view.get("x", 0) == view.get("x", last)

        def effect(view: LocalView) -> dict[VarId, Value]:
            return {x_j: (view.get("x", 0) + 1) % k}

        return ActionDef(j, "bump", guard, effect)

    def make_copy(j: NodeId) -> ActionDef:
        x_j = VarId(j, "x")

        def guard(view: LocalView) -> bool:
            return view.get("x", j - 1) != view.get("x", j)

        def effect(view: LocalView) -> dict[VarId, Value]:
            return {x_j: view.get("x", j - 1)}

        return ActionDef(j, "copy", guard, effect)

    actions[0] = [make_head(0)]
    for j in range(1, n_nodes):
        actions[j] = [make_copy(j)]
    return ProgramSpec(
        name="token-ring",
        topology=topology,
        domains=domains,
        actions=actions,
        defaults={"x": 0},
        params={"k": k},
    )


def token_invariant(state, k: int) -> bool:
    """Legitimate ring states: a prefix equal to x.0 followed by a suffix
    one step behind it (mod K)."""
    if isinstance(state, GlobalState):
        xs: Sequence[int] = state.values  # vars sort as x.0..x.N
    else:
        xs = state
    n = len(xs)
    x0 = xs[0]
    behind = (x0 - 1) % k
    j = 0
    while j + 1 < n and xs[j + 1] == x0:
        j += 1
    return all(xs[i] == behind for i in range(j + 1, n))


def invariant_for(spec: ProgramSpec):
    """The invariant predicate (over GlobalState) for a built protocol."""
    if spec.name == "matching":
        top = spec.topology
        return lambda state: matching_invariant(top, state)
    if spec.name == "token-ring":
        k = spec.params["k"]
        return lambda state: token_invariant(state, k)
    raise DomainError(f"no invariant registered for protocol {spec.name!r}")
