"""Self-stabilizing graph protocols on a replicated quorum key-value store."""

from .model import (
    ActionDef,
    CapacityError,
    DomainError,
    GlobalState,
    GraphTopology,
    LocalView,
    ProgramSpec,
    VarId,
    apply_action,
    closed_neighborhood,
    enabled_actions,
    program_transitions,
)
from .protocols import (
    NodeStatus,
    matching_invariant,
    matching_spec,
    node_status,
    token_invariant,
    token_spec,
)
from .store import (
    Consistency,
    Ordering,
    QuorumConfig,
    QuorumError,
    ResolutionPolicy,
    VectorClock,
    VersionedValue,
    classify,
    resolve,
    vc_compare,
)

__version__ = "0.1.0"
