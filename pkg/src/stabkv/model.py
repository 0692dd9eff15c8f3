"""Graph programs as guarded-command rules over node variables.

A program is an undirected graph whose nodes own variables and guarded
actions.  A guard reads only the closed neighborhood of its owner; the
statement writes only the owner's variables.  The same rule objects are
evaluated by the live execution engine (against values read from the
key-value store) and by the brute-force analyzer (against enumerated
states), so there is a single source of truth for protocol semantics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping

Value = int | bool | None
NodeId = int


class DomainError(ValueError):
    """A value outside a variable's declared domain."""


class CapacityError(RuntimeError):
    """State-space enumeration exceeded the configured cap."""


@dataclass(frozen=True, order=True)
class VarId:
    """A variable owned by one node, identified by (node, name)."""

    node: NodeId
    name: str

    def key(self) -> str:
        """Stable store-key encoding, e.g. ``p.17``."""
        return f"{self.name}.{self.node}"

    @staticmethod
    def from_key(key: str) -> "VarId":
        name, node = key.rsplit(".", 1)
        return VarId(int(node), name)


class GraphTopology:
    """Undirected graph over nodes 0..n-1.

    Adjacency is stored without self-loops; closed neighborhoods always
    include the node itself.
    """

    def __init__(self, node_count: int, edges: Iterable[tuple[int, int]]):
        if node_count < 1:
            raise DomainError("node_count must be >= 1")
        adj: list[set[int]] = [set() for _ in range(node_count)]
        for u, v in edges:
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise DomainError(f"edge ({u},{v}) outside node range")
            if u != v:
                adj[u].add(v)
                adj[v].add(u)
        self.node_count = node_count
        self.neighbors: tuple[tuple[int, ...], ...] = tuple(
            tuple(sorted(s)) for s in adj
        )

    def closed_neighborhood(self, j: NodeId) -> tuple[int, ...]:
        if not (0 <= j < self.node_count):
            raise DomainError(f"unknown node {j}")
        return tuple(sorted(set(self.neighbors[j]) | {j}))

    def edges(self) -> Iterator[tuple[int, int]]:
        for u in range(self.node_count):
            for v in self.neighbors[u]:
                if u < v:
                    yield (u, v)

    def nodes(self) -> range:
        return range(self.node_count)


def closed_neighborhood(topology: GraphTopology, j: NodeId) -> tuple[int, ...]:
    """Neighbors of ``j`` plus ``j`` itself."""
    return topology.closed_neighborhood(j)


class LocalView:
    """Snapshot of the variables of a node's closed neighborhood.

    This is what a rule sees: possibly-stale values keyed by VarId.  The
    engine builds views from store reads; the analyzer builds them from
    enumerated states.
    """

    __slots__ = ("owner", "vals")

    def __init__(self, owner: NodeId, vals: Mapping[VarId, Value]):
        self.owner = owner
        self.vals = vals

    def get(self, name: str, node: NodeId) -> Value:
        return self.vals[VarId(node, name)]

    def __repr__(self) -> str:
        return f"LocalView(owner={self.owner}, vals={dict(self.vals)})"


@dataclass(frozen=True)
class ActionDef:
    """A guarded command ``guard -> effect`` owned by one node.

    ``guard`` reads the LocalView only; ``effect`` returns new values for
    (a subset of) the owner's variables.
    """

    owner: NodeId
    rule: str
    guard: Callable[[LocalView], bool]
    effect: Callable[[LocalView], dict[VarId, Value]]


class ProgramSpec:
    """Topology + variable declarations (with finite domains) + actions."""

    def __init__(
        self,
        name: str,
        topology: GraphTopology,
        domains: Mapping[VarId, tuple[Value, ...]],
        actions: Mapping[NodeId, list[ActionDef]],
        defaults: Mapping[str, Value],
        params: Mapping[str, Value] | None = None,
    ):
        self.name = name
        self.topology = topology
        self.domains = dict(domains)
        self.variables: tuple[VarId, ...] = tuple(sorted(self.domains))
        self.var_index = {v: i for i, v in enumerate(self.variables)}
        self.actions = {j: list(actions.get(j, [])) for j in topology.nodes()}
        for acts in actions.values():
            for ac in acts:
                if not (0 <= ac.owner < topology.node_count):
                    raise DomainError(f"action owner {ac.owner} not in topology")
        self.defaults = dict(defaults)
        self.params = dict(params or {})
        self._view_vars: dict[NodeId, tuple[VarId, ...]] = {}

    def node_vars(self, j: NodeId) -> tuple[VarId, ...]:
        return tuple(v for v in self.variables if v.node == j)

    def view_vars(self, j: NodeId) -> tuple[VarId, ...]:
        """Variables visible to node j: its closed neighborhood's."""
        cached = self._view_vars.get(j)
        if cached is None:
            nbhd = set(self.topology.closed_neighborhood(j))
            cached = tuple(v for v in self.variables if v.node in nbhd)
            self._view_vars[j] = cached
        return cached

    def default_value(self, var: VarId) -> Value:
        return self.defaults[var.name]

    def state_count(self) -> int:
        n = 1
        for v in self.variables:
            n *= len(self.domains[v])
        return n

    def make_state(self, assignment: Mapping[VarId, Value]) -> "GlobalState":
        return GlobalState(self, tuple(assignment[v] for v in self.variables))

    def view_of(self, state: "GlobalState", j: NodeId) -> LocalView:
        """Fresh view: exactly the current values of j's neighborhood."""
        return LocalView(j, {v: state[v] for v in self.view_vars(j)})


class GlobalState:
    """Total assignment of program variables; immutable and hashable.

    Values are stored as a tuple ordered by the spec's sorted VarId list.
    """

    __slots__ = ("spec", "values")

    def __init__(self, spec: ProgramSpec, values: tuple[Value, ...]):
        self.spec = spec
        self.values = values

    def __getitem__(self, var: VarId) -> Value:
        return self.values[self.spec.var_index[var]]

    def get(self, name: str, node: NodeId) -> Value:
        return self[VarId(node, name)]

    def as_dict(self) -> dict[VarId, Value]:
        return dict(zip(self.spec.variables, self.values))

    def replace(self, writes: Mapping[VarId, Value]) -> "GlobalState":
        vals = list(self.values)
        for var, val in writes.items():
            vals[self.spec.var_index[var]] = val
        return GlobalState(self.spec, tuple(vals))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GlobalState) and self.values == other.values

    def __hash__(self) -> int:
        return hash(self.values)

    def __repr__(self) -> str:
        return f"GlobalState{self.values}"


def enabled_actions(spec: ProgramSpec, state: GlobalState, j: NodeId) -> list[ActionDef]:
    """Actions of j whose guard holds on the fresh view of ``state``."""
    view = spec.view_of(state, j)
    return [ac for ac in spec.actions[j] if ac.guard(view)]


def select_action(
    spec: ProgramSpec, j: NodeId, view: LocalView
) -> tuple[ActionDef, dict[VarId, Value]] | None:
    """First enabled action of j on ``view`` (fixed rule-priority order)."""
    for ac in spec.actions[j]:
        if ac.guard(view):
            return ac, ac.effect(view)
    return None


def check_writes(spec: ProgramSpec, owner: NodeId, writes: Mapping[VarId, Value]) -> None:
    for var, val in writes.items():
        if var.node != owner:
            raise DomainError(f"action of node {owner} wrote foreign variable {var}")
        if val not in spec.domains[var]:
            raise DomainError(f"value {val!r} outside domain of {var}")


def apply_action(state: GlobalState, action: ActionDef, view: LocalView) -> GlobalState:
    """Execute ``action`` computing new values from ``view``.

    The view is not required to agree with ``state``; applying a rule to a
    stale view is exactly how an inconsistent read perturbs a single node.
    """
    if view.owner != action.owner:
        raise DomainError("view owner does not match action owner")
    writes = action.effect(view)
    check_writes(state.spec, action.owner, writes)
    return state.replace(writes)


def all_states(spec: ProgramSpec, cap: int = 2_000_000) -> list[GlobalState]:
    """Enumerate the full state space (bounded by ``cap`` states)."""
    import itertools

    total = spec.state_count()
    if total > cap:
        raise CapacityError(f"state space {total} exceeds cap {cap}")
    doms = [spec.domains[v] for v in spec.variables]
    return [GlobalState(spec, combo) for combo in itertools.product(*doms)]


def labeled_transitions(
    spec: ProgramSpec, state: GlobalState
) -> list[tuple[NodeId, str, GlobalState]]:
    """All (node, rule, successor) transitions out of ``state``."""
    out = []
    for j in spec.topology.nodes():
        view = spec.view_of(state, j)
        for ac in spec.actions[j]:
            if ac.guard(view):
                writes = ac.effect(view)
                check_writes(spec, j, writes)
                out.append((j, ac.rule, state.replace(writes)))
    return out


def program_transitions(
    spec: ProgramSpec, cap: int = 2_000_000
) -> set[tuple[GlobalState, GlobalState]]:
    """The exact transition relation, computed with fresh views."""
    pairs: set[tuple[GlobalState, GlobalState]] = set()
    for s in all_states(spec, cap=cap):
        for _, _, t in labeled_transitions(spec, s):
            pairs.add((s, t))
    return pairs
