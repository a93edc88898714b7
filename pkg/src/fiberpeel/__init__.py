"""Quasi-static simulation of peeling and pull-off of two adhesive fibers."""

from .beam import HermiteElement, element_energy_force_tangent, interpolate, verify_tangent
from .contact import ContactLaw, closest_point_projection, contact_forces, penalty_pressure
from .interaction import (
    ElectrostaticLaw,
    LennardJonesLaw,
    SectionQuadrature,
    integrate_pair,
    interaction_pair_schedule,
    lj_parallel_equilibrium_gap,
    lj_section_force,
)
from .model import (
    FiberMesh,
    ReactionSet,
    SystemState,
    build_two_fiber_model,
    extract_reactions,
)
from .scenario import ScenarioConfig, load_config, preset, preset_members, run, save_config
from .solver import (
    ContinuationSettings,
    NewtonSettings,
    RelaxationSettings,
    continuation_sweep,
    newton_step_controlled,
    reference_force,
    relax_to_steady_state,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
