"""Teleportation, composites and symmetry in finite-dimensional GPTs."""

from .composite import (
    BipartiteElement,
    Composite,
    bipartitions,
    check_admissible,
    check_regular,
    explicit_composite,
    hat,
    leaf,
    parse_recipe,
    partial_subsystem,
    tensor,
    tmax,
    tmin,
    unhat,
)
from .cone import Cone, ConeMap, Inside, Outside, dual_cone, extreme_rays, is_order_iso, minimal_generators
from .errors import GPTError
from .scalar import RATIONAL, Backend, f64
from .state_space import Effect, Observable, StateSpace, make_model, make_state_space, model_families, validate
from .swap import (
    SwapScenario,
    audit_nonregularity,
    check_product_witness,
    effect_to_state,
    pivot,
    teleport_through,
    transported,
)
from .symmetry import (
    GroupAction,
    cyclic_action,
    equivariant_self_duality,
    invariant_state,
    synthesize_theorem3,
)
from .teleport import (
    ProtocolCandidate,
    classify,
    compression_of,
    protocol_from_compression,
    remote_evaluate,
    strengthen,
    verify_deterministic,
)

__version__ = "0.1.0"
