"""Brute-force verification of stabilization properties on small instances.

Builds the exact transition relation of a ProgramSpec over its finite
state space and checks closure, convergence (not-invariant subgraph
acyclic and invariant reachable, which is sufficient under any daemon),
silence, adversary-tolerant stabilization via a forced-program-steps
product construction, and worst-case recovery bounds.
"""

from __future__ import annotations

import itertools
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

from .model import (
    CapacityError,
    GlobalState,
    LocalView,
    NodeId,
    ProgramSpec,
    Value,
    VarId,
    all_states,
    check_writes,
)

StateT = tuple  # value tuple in the spec's variable order


class AdversaryKind(Enum):
    ARBITRARY_ONE_NODE = "arbitrary-one-node"
    ACTION_DERIVED_CVF = "action-derived-cvf"


@dataclass
class TransitionSystem:
    """Enumerated state space with labeled program transitions."""

    spec: ProgramSpec
    states: list[StateT]
    index: dict[StateT, int]
    # per state: list of (successor index, node, rule)
    succ: list[list[tuple[int, NodeId, str]]]

    def invariant_mask(self, invariant: Callable[[GlobalState], bool]) -> list[bool]:
        spec = self.spec
        return [invariant(GlobalState(spec, s)) for s in self.states]


@dataclass
class AdversaryModel:
    """A one-node perturbation relation: src index -> successor indices."""

    kind: AdversaryKind
    edges: list[tuple[int, ...]]


@dataclass
class VerifyResult:
    passed: bool
    detail: str = ""
    # witness: a violating edge (pair of states) or cycle (state list)
    witness: list[StateT] | None = None

    def __bool__(self) -> bool:
        return self.passed


def build_transition_system(spec: ProgramSpec, cap: int = 2_000_000) -> TransitionSystem:
    """Exhaustive program transitions computed with fresh views."""
    states = [s.values for s in all_states(spec, cap=cap)]
    index = {s: i for i, s in enumerate(states)}
    var_index = spec.var_index
    succ: list[list[tuple[int, NodeId, str]]] = []
    node_actions = [
        (j, spec.view_vars(j), spec.actions[j]) for j in spec.topology.nodes()
    ]
    view_slots = {
        j: [var_index[v] for v in vvars] for j, vvars, _ in node_actions
    }
    for s in states:
        out: list[tuple[int, NodeId, str]] = []
        for j, vvars, actions in node_actions:
            slots = view_slots[j]
            view = LocalView(j, {v: s[i] for v, i in zip(vvars, slots)})
            for ac in actions:
                if ac.guard(view):
                    writes = ac.effect(view)
                    check_writes(spec, j, writes)
                    t = list(s)
                    for var, val in writes.items():
                        t[var_index[var]] = val
                    out.append((index[tuple(t)], j, ac.rule))
        succ.append(out)
    return TransitionSystem(spec, states, index, succ)


def _node_slots(spec: ProgramSpec, j: NodeId) -> list[int]:
    return [spec.var_index[v] for v in spec.node_vars(j)]


def single_node_corruptions(
    ts: TransitionSystem, sources: Iterable[int]
) -> set[int]:
    """States reachable from ``sources`` by rewriting one node's variables."""
    spec = ts.spec
    out: set[int] = set()
    for idx in sources:
        s = ts.states[idx]
        for j in spec.topology.nodes():
            slots = _node_slots(spec, j)
            doms = [spec.domains[v] for v in spec.node_vars(j)]
            for combo in itertools.product(*doms):
                if all(s[i] == val for i, val in zip(slots, combo)):
                    continue
                t = list(s)
                for i, val in zip(slots, combo):
                    t[i] = val
                out.add(ts.index[tuple(t)])
    return out


def cvf_transitions(
    spec: ProgramSpec,
    kind: AdversaryKind,
    ts: TransitionSystem | None = None,
    cap: int = 2_000_000,
    fresh_views_only: bool = False,
) -> AdversaryModel:
    """Enumerate the one-node fault relation.

    ARBITRARY_ONE_NODE: all pairs differing in exactly one node's
    variables.  ACTION_DERIVED_CVF: outcomes of executing a node's rules
    against views whose neighbor entries range over the full domains
    (the owner's own variables stay fresh).  ``fresh_views_only``
    restricts neighbor entries to their actual values, which collapses
    the relation back to the program transitions.
    """
    if ts is None:
        ts = build_transition_system(spec, cap=cap)
    n_states = len(ts.states)
    edges: list[tuple[int, ...]] = [()] * n_states

    if kind is AdversaryKind.ARBITRARY_ONE_NODE:
        per_state: list[set[int]] = [set() for _ in range(n_states)]
        for idx in range(n_states):
            s = ts.states[idx]
            for j in spec.topology.nodes():
                slots = _node_slots(spec, j)
                doms = [spec.domains[v] for v in spec.node_vars(j)]
                for combo in itertools.product(*doms):
                    if all(s[i] == val for i, val in zip(slots, combo)):
                        continue
                    t = list(s)
                    for i, val in zip(slots, combo):
                        t[i] = val
                    per_state[idx].add(ts.index[tuple(t)])
        edges = [tuple(sorted(x)) for x in per_state]
        return AdversaryModel(kind, edges)

    # ACTION_DERIVED_CVF: precompute, per node and per assignment of the
    # node's own variables, the set of write outcomes over all stale views.
    var_index = spec.var_index
    outcome_cache: dict[NodeId, dict[tuple, set[tuple]]] = {}
    for j in spec.topology.nodes():
        own_vars = spec.node_vars(j)
        own_doms = [spec.domains[v] for v in own_vars]
        nbr_vars = [v for v in spec.view_vars(j) if v.node != j]
        outcomes: dict[tuple, set[tuple]] = {}
        for own in itertools.product(*own_doms):
            outs: set[tuple] = set()
            base = dict(zip(own_vars, own))
            if fresh_views_only:
                nbr_iter: Iterable[tuple] = [None]  # placeholder, filled below
            else:
                nbr_iter = itertools.product(*[spec.domains[v] for v in nbr_vars])
            if not fresh_views_only:
                for nbr_combo in nbr_iter:
                    vals = dict(base)
                    vals.update(zip(nbr_vars, nbr_combo))
                    view = LocalView(j, vals)
                    for ac in spec.actions[j]:
                        if ac.guard(view):
                            writes = ac.effect(view)
                            check_writes(spec, j, writes)
                            new_own = tuple(
                                writes.get(v, base[v]) for v in own_vars
                            )
                            if new_own != own:
                                outs.add(new_own)
            outcomes[own] = outs
        outcome_cache[j] = outcomes

    per_state2: list[set[int]] = [set() for _ in range(n_states)]
    for idx in range(n_states):
        s = ts.states[idx]
        for j in spec.topology.nodes():
            own_vars = spec.node_vars(j)
            slots = [var_index[v] for v in own_vars]
            own = tuple(s[i] for i in slots)
            if fresh_views_only:
                nbr_vars = [v for v in spec.view_vars(j) if v.node != j]
                vals = dict(zip(own_vars, own))
                vals.update({v: s[var_index[v]] for v in nbr_vars})
                view = LocalView(j, vals)
                outs = set()
                for ac in spec.actions[j]:
                    if ac.guard(view):
                        writes = ac.effect(view)
                        new_own = tuple(writes.get(v, vals[v]) for v in own_vars)
                        if new_own != own:
                            outs.add(new_own)
            else:
                outs = outcome_cache[j][own]
            for new_own in outs:
                t = list(s)
                for i, val in zip(slots, new_own):
                    t[i] = val
                per_state2[idx].add(ts.index[tuple(t)])
    edges = [tuple(sorted(x)) for x in per_state2]
    return AdversaryModel(kind, edges)


def _find_cycle(
    n_states: int,
    succ_of: Callable[[int], Iterable[int]],
    candidates: Iterable[int],
) -> list[int] | None:
    """Iterative 3-color DFS; returns a cycle (as index list) if any."""
    color = bytearray(n_states)  # 0 white, 1 gray, 2 black
    parent: dict[int, int] = {}
    for s0 in candidates:
        if color[s0]:
            continue
        stack: list[tuple[int, Iterable[int]]] = [(s0, iter(succ_of(s0)))]
        color[s0] = 1
        while stack:
            u, it = stack[-1]
            advanced = False
            for v in it:
                if color[v] == 1:
                    cyc = [v, u]
                    w = u
                    while w != v:
                        w = parent[w]
                        cyc.append(w)
                    cyc.reverse()
                    return cyc
                if color[v] == 0:
                    color[v] = 1
                    parent[v] = u
                    stack.append((v, iter(succ_of(v))))
                    advanced = True
                    break
            if not advanced:
                color[u] = 2
                stack.pop()
    return None


def verify_stabilization(
    ts: TransitionSystem, invariant: Callable[[GlobalState], bool]
) -> VerifyResult:
    """Closure plus convergence (not-I subgraph acyclic, I reachable)."""
    inv = ts.invariant_mask(invariant)
    for idx, out in enumerate(ts.succ):
        if inv[idx]:
            for t, _, _ in out:
                if not inv[t]:
                    return VerifyResult(
                        False,
                        "closure violated: transition leaves the invariant",
                        [ts.states[idx], ts.states[t]],
                    )
    n = len(ts.states)
    notI = [i for i in range(n) if not inv[i]]

    def notI_succ(i: int) -> list[int]:
        return [t for t, _, _ in ts.succ[i] if not inv[t]]

    cyc = _find_cycle(n, notI_succ, notI)
    if cyc is not None:
        return VerifyResult(
            False,
            "convergence violated: cycle outside the invariant",
            [ts.states[i] for i in cyc],
        )
    # reverse reachability from I across the not-I subgraph
    rev: dict[int, list[int]] = defaultdict(list)
    enters: deque[int] = deque()
    reached = bytearray(n)
    for i in notI:
        for t, _, _ in ts.succ[i]:
            if inv[t]:
                if not reached[i]:
                    reached[i] = 1
                    enters.append(i)
            else:
                rev[t].append(i)
    while enters:
        u = enters.popleft()
        for p in rev[u]:
            if not reached[p]:
                reached[p] = 1
                enters.append(p)
    for i in notI:
        if not reached[i]:
            return VerifyResult(
                False,
                "convergence violated: state cannot reach the invariant",
                [ts.states[i]],
            )
    return VerifyResult(True, "closure and convergence hold")


def verify_silent(
    ts: TransitionSystem, invariant: Callable[[GlobalState], bool]
) -> VerifyResult:
    """Stabilization plus: no action is enabled inside the invariant."""
    base = verify_stabilization(ts, invariant)
    if not base.passed:
        return base
    inv = ts.invariant_mask(invariant)
    for idx, out in enumerate(ts.succ):
        if inv[idx] and out:
            t, j, rule = out[0]
            return VerifyResult(
                False,
                f"not silent: rule {rule!r} of node {j} enabled in the invariant",
                [ts.states[idx], ts.states[t]],
            )
    return VerifyResult(True, "silent stabilization holds")


def _product_liveness(
    ts: TransitionSystem,
    adv: AdversaryModel,
    k: int,
    inv: list[bool],
) -> VerifyResult:
    """No infinite path avoiding I in the (state, forced-steps) product.

    After an adversary step the next k-1 transitions must be program
    steps; the adversary may also act when the program has no enabled
    transition.  Fully stuck states stutter in place.
    """
    n = len(ts.states)
    notI = [i for i in range(n) if not inv[i]]
    prog_succ = [[t for t, _, _ in ts.succ[i] if not inv[t]] for i in range(n)]
    has_prog = [bool(ts.succ[i]) for i in range(n)]
    adv_succ = [[t for t in adv.edges[i] if not inv[t]] for i in range(n)]

    def node_id(state: int, forced: int) -> int:
        return state * k + forced

    def succ_of(pid: int) -> list[int]:
        state, forced = divmod(pid, k)
        out = []
        nf = forced - 1 if forced > 0 else 0
        for t in prog_succ[state]:
            out.append(node_id(t, nf))
        if forced == 0 or not has_prog[state]:
            for t in adv_succ[state]:
                out.append(node_id(t, k - 1))
        if not has_prog[state]:
            out.append(pid)  # stuck program may stutter forever
        return out

    starts = [node_id(i, 0) for i in notI]
    cyc = _find_cycle(n * k, succ_of, starts)
    if cyc is not None:
        return VerifyResult(
            False,
            f"infinite computation avoiding the invariant exists (k={k})",
            [ts.states[pid // k] for pid in cyc],
        )
    return VerifyResult(True, f"all (k={k}) computations reach the invariant")


def verify_k_active(
    ts: TransitionSystem,
    adv: AdversaryModel,
    k: int,
    invariant: Callable[[GlobalState], bool],
) -> VerifyResult:
    """Stabilization despite an adversary acting at most once per k-1
    program steps; the invariant must be closed under program and
    adversary steps alike."""
    if k < 2:
        raise ValueError("k must be >= 2")
    inv = ts.invariant_mask(invariant)
    for idx in range(len(ts.states)):
        if not inv[idx]:
            continue
        for t, _, _ in ts.succ[idx]:
            if not inv[t]:
                return VerifyResult(
                    False,
                    "closure violated by a program transition",
                    [ts.states[idx], ts.states[t]],
                )
        for t in adv.edges[idx]:
            if not inv[t]:
                return VerifyResult(
                    False,
                    "closure violated by an adversary transition",
                    [ts.states[idx], ts.states[t]],
                )
    return _product_liveness(ts, adv, k, inv)


def verify_contained_k_active(
    ts: TransitionSystem,
    adv: AdversaryModel,
    k: int,
    invariant: Callable[[GlobalState], bool],
) -> VerifyResult:
    """Containment: program closure, adversary-tolerant convergence, and
    recovery from any single adversary step out of the invariant within
    k-1 program steps.

    Unlike plain k-active stabilization, the adversary may leave the
    invariant; the third condition bounds how long the excursion lasts.
    Stuck states pad the k-1 steps with stutters.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    inv = ts.invariant_mask(invariant)
    for idx in range(len(ts.states)):
        if inv[idx]:
            for t, _, _ in ts.succ[idx]:
                if not inv[t]:
                    return VerifyResult(
                        False,
                        "closure violated by a program transition",
                        [ts.states[idx], ts.states[t]],
                    )
    live = _product_liveness(ts, adv, k, inv)
    if not live.passed:
        return live
    # third condition: breadth-first frontier of exactly k-1 program steps
    frontier: set[int] = set()
    for idx in range(len(ts.states)):
        if inv[idx]:
            frontier.update(adv.edges[idx])
    for _ in range(k - 1):
        nxt: set[int] = set()
        for i in frontier:
            out = ts.succ[i]
            if out:
                nxt.update(t for t, _, _ in out)
            else:
                nxt.add(i)
        frontier = nxt
    for i in frontier:
        if not inv[i]:
            return VerifyResult(
                False,
                f"a single adversary step from the invariant is not repaired "
                f"within {k - 1} program steps",
                [ts.states[i]],
            )
    return VerifyResult(True, f"contained {k}-active stabilization holds")


def find_min_contained_k(
    ts: TransitionSystem,
    adv: AdversaryModel,
    invariant: Callable[[GlobalState], bool],
    k_max: int = 256,
) -> int | None:
    """Smallest k for which contained k-active stabilization holds."""
    for k in range(2, k_max + 1):
        if verify_contained_k_active(ts, adv, k, invariant).passed:
            return k
    return None


class RecoveryContractError(RuntimeError):
    """Recovery bound requested on a system that does not converge."""


def _recovery_dp(
    ts: TransitionSystem,
    inv: list[bool],
    weight: Callable[[NodeId], int],
) -> list[int]:
    """Longest-path DP to the first invariant state, with edge weights.

    Requires the not-I subgraph to be acyclic; raises otherwise.
    """
    n = len(ts.states)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = bytearray(n)
    d = [0] * n
    for i in range(n):
        if inv[i]:
            color[i] = BLACK
    for s0 in range(n):
        if color[s0] != WHITE:
            continue
        stack: list[tuple[int, int]] = [(s0, 0)]
        while stack:
            u, phase = stack.pop()
            if phase == 0:
                if color[u] == BLACK:
                    continue
                color[u] = GRAY
                stack.append((u, 1))
                for t, _, _ in ts.succ[u]:
                    if color[t] == GRAY:
                        raise RecoveryContractError(
                            "cycle outside the invariant; recovery bound undefined"
                        )
                    if color[t] == WHITE:
                        stack.append((t, 0))
            else:
                if not ts.succ[u]:
                    raise RecoveryContractError(
                        "stuck state outside the invariant cannot reach it"
                    )
                d[u] = max(d[t] + weight(j) for t, j, _ in ts.succ[u])
                color[u] = BLACK
    return d


def max_recovery_steps(
    ts: TransitionSystem,
    invariant: Callable[[GlobalState], bool],
    from_states: Iterable[int] | None = None,
) -> int:
    """Longest program path from ``from_states`` to first reach I."""
    inv = ts.invariant_mask(invariant)
    d = _recovery_dp(ts, inv, lambda j: 1)
    idxs = range(len(ts.states)) if from_states is None else from_states
    return max(d[i] for i in idxs)


def max_recovery_actions(
    ts: TransitionSystem,
    invariant: Callable[[GlobalState], bool],
    node: NodeId,
    from_states: Iterable[int] | None = None,
) -> int:
    """Most executions of ``node`` along any recovery path from the set."""
    inv = ts.invariant_mask(invariant)
    d = _recovery_dp(ts, inv, lambda j: 1 if j == node else 0)
    idxs = range(len(ts.states)) if from_states is None else from_states
    return max(d[i] for i in idxs)
