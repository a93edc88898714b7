"""Experiment configuration, presets, run orchestration and file output.

A scenario is one two-fiber system plus sweep and solver settings. Runs
produce a force-displacement curve CSV with the fixed schema

    step,u_x,u_x_over_l,F_x,F_x_normalized,newton_iters,branch

a per-step gap-extrema CSV, periodic and extremum/terminus VTK snapshots of
the fiber centerlines and the gap field, and a key-value summary. All forces
are reported as multiples of the reference point load that deflects a single
fiber's midpoint by a quarter of its length.
"""

import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .beam import hermite_shapes
from .contact import ContactLaw
from .interaction import (
    ElectrostaticLaw,
    LennardJonesLaw,
    SectionQuadrature,
    lj_parallel_equilibrium_gap,
)
from .model import FiberMesh, build_two_fiber_model, extract_reactions
from .solver import (
    ContinuationSettings,
    MaxTimeExceededError,
    NewtonSettings,
    NonConvergenceError,
    RelaxationSettings,
    SingularTangentError,
    StepRecord,
    continuation_sweep,
    newton_step_controlled,
    reference_force,
    relax_to_steady_state,
)

log = logging.getLogger("fiberpeel")

CSV_HEADER = "step,u_x,u_x_over_l,F_x,F_x_normalized,newton_iters,branch"
GAP_CSV_HEADER = "step,u_x,min_gap_over_R,arc_over_l"
SUMMARY_KEYS = (
    "F_ref",
    "u_at_max",
    "F_max",
    "u_at_min",
    "F_min",
    "branch_terminus_u",
    "mean_newton_iters",
    "min_gap_over_R",
)


class ValidationError(ValueError):
    """Configuration rejected; message carries the offending field path."""


def _fmt(x):
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# configuration schema


@dataclass
class QuadratureConfig:
    n_segments: int
    n_gp: int


@dataclass
class FiberConfig:
    length: float
    radius: float
    youngs_modulus: float
    poisson_ratio: float
    n_elements: int
    d0: float | None = None  # initial inter-axis separation; None = derived


@dataclass
class InteractionConfig:
    type: str  # "electrostatic" | "lennard_jones" | "none"
    quadrature: QuadratureConfig | None = None
    sigma1: float | None = None
    sigma2: float | None = None
    k_coulomb: float | None = None
    rho1: float | None = None
    rho2: float | None = None
    k_vdw: float | None = None
    k_rep: float | None = None
    reg_gap: float | None = None
    allow_reg_above_equilibrium: bool = False
    cutoff_radius: float | None = None


@dataclass
class ContactConfig:
    enabled: bool
    penalty: float | None = None
    gbar: float | None = None
    quadrature: QuadratureConfig | None = None


@dataclass
class SweepConfig:
    u_start: float
    u_end: float
    step_initial: float
    step_min: float
    step_max: float
    growth: float = 1.2


@dataclass
class SolverConfig:
    tol_residual: float
    tol_increment: float
    max_iter: int
    du_max: float


@dataclass
class RelaxationConfig:
    drag: float = 1e-4
    dt_initial: float = 0.1
    steady_tol: float = 1e-10
    step_budget: int = 5000


@dataclass
class OutputConfig:
    curve_csv: str = "curve.csv"
    gap_csv: str = "gap_extrema.csv"
    snapshots_every_n: int = 0  # 0 disables periodic snapshots
    vtk_dir: str = "vtk"
    summary: str = "summary.txt"


@dataclass
class ScenarioConfig:
    fiber: FiberConfig
    interaction: InteractionConfig
    contact: ContactConfig
    sweep: SweepConfig
    solver: SolverConfig
    relaxation: RelaxationConfig = field(default_factory=RelaxationConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    separated_sweep: SweepConfig | None = None
    relax_points: list | None = None
    normalization_youngs_modulus: float | None = None


_SECTION_TYPES = {
    "fiber": FiberConfig,
    "interaction": InteractionConfig,
    "contact": ContactConfig,
    "sweep": SweepConfig,
    "separated_sweep": SweepConfig,
    "solver": SolverConfig,
    "relaxation": RelaxationConfig,
    "outputs": OutputConfig,
}


def _from_dict(cls, data, path):
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: expected a mapping")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ValidationError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key == "quadrature" and value is not None:
            value = _from_dict(QuadratureConfig, value, f"{path}.{key}")
        kwargs[key] = value
    missing = [
        n for n, f in names.items()
        if n not in kwargs
        and f.default is dataclasses.MISSING
        and f.default_factory is dataclasses.MISSING
    ]
    if missing:
        raise ValidationError(f"{path}: missing keys {missing}")
    return cls(**kwargs)


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ValidationError("config: expected a mapping")
    known = set(_SECTION_TYPES) | {"relax_points", "normalization_youngs_modulus"}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"config: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, cls in _SECTION_TYPES.items():
        if key in data and data[key] is not None:
            kwargs[key] = _from_dict(cls, data[key], f"config.{key}")
    for key in ("relax_points", "normalization_youngs_modulus"):
        if key in data:
            kwargs[key] = data[key]
    for required in ("fiber", "interaction", "contact", "sweep", "solver"):
        if required not in kwargs:
            raise ValidationError(f"config: missing section '{required}'")
    return ScenarioConfig(**kwargs)


def config_to_dict(config):
    return dataclasses.asdict(config)


def save_config(config, path):
    with open(path, "w") as fp:
        json.dump(config_to_dict(config), fp, indent=2)
        fp.write("\n")


def load_config(path):
    with open(path) as fp:
        return config_from_dict(json.load(fp))


def _require_positive(value, path):
    if value is None or not (value > 0.0):
        raise ValidationError(f"{path}: must be positive, got {value}")


def validate(config):
    """Cross-field validation; raises ValidationError with field paths."""
    f = config.fiber
    _require_positive(f.length, "config.fiber.length")
    _require_positive(f.radius, "config.fiber.radius")
    _require_positive(f.youngs_modulus, "config.fiber.youngs_modulus")
    if f.n_elements < 1:
        raise ValidationError("config.fiber.n_elements: need at least one element")
    kind = config.interaction.type
    if kind not in ("electrostatic", "lennard_jones", "none"):
        raise ValidationError(f"config.interaction.type: unknown type '{kind}'")
    if kind == "lennard_jones" and config.contact.enabled:
        raise ValidationError(
            "config.contact.enabled: penalty contact cannot be combined with "
            "the Lennard-Jones law; its repulsive branch provides the steric "
            "resistance"
        )
    if kind == "electrostatic" and not config.contact.enabled:
        raise ValidationError(
            "config.contact.enabled: the electrostatic law requires penalty "
            "contact for steric resistance"
        )
    if kind != "none" and config.interaction.quadrature is None:
        raise ValidationError("config.interaction.quadrature: required")
    if config.contact.enabled:
        _require_positive(config.contact.penalty, "config.contact.penalty")
        _require_positive(config.contact.gbar, "config.contact.gbar")
        if config.contact.quadrature is None:
            raise ValidationError("config.contact.quadrature: required")
    for name in ("tol_residual", "tol_increment", "du_max"):
        _require_positive(getattr(config.solver, name), f"config.solver.{name}")
    for name in ("step_initial", "step_min", "step_max"):
        _require_positive(getattr(config.sweep, name), f"config.sweep.{name}")
    try:
        build_laws(config)
    except (ValueError, ValidationError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"config.interaction: {exc}") from exc
    return config


# ---------------------------------------------------------------------------
# model construction


def build_laws(config):
    f = config.fiber
    kind = config.interaction.type
    ia = config.interaction
    interaction_law = None
    if kind == "electrostatic":
        for name in ("sigma1", "sigma2", "k_coulomb"):
            if getattr(ia, name) is None:
                raise ValidationError(f"config.interaction.{name}: required")
        interaction_law = ElectrostaticLaw(
            sigma1=ia.sigma1, sigma2=ia.sigma2, k_coulomb=ia.k_coulomb,
            radius1=f.radius, radius2=f.radius,
        )
    elif kind == "lennard_jones":
        for name in ("rho1", "rho2", "k_vdw", "k_rep"):
            if getattr(ia, name) is None:
                raise ValidationError(f"config.interaction.{name}: required")
        interaction_law = LennardJonesLaw(
            rho1=ia.rho1, rho2=ia.rho2, k_vdw=ia.k_vdw, k_rep=ia.k_rep,
            radius1=f.radius, radius2=f.radius, reg_gap=ia.reg_gap,
            cutoff_radius=ia.cutoff_radius,
            allow_reg_above_equilibrium=ia.allow_reg_above_equilibrium,
        )
    contact_law = None
    if config.contact.enabled:
        contact_law = ContactLaw(
            penalty=config.contact.penalty, gbar=config.contact.gbar,
            radius1=f.radius, radius2=f.radius,
        )
    return interaction_law, contact_law


def default_d0(config, interaction_law):
    if config.fiber.d0 is not None:
        return config.fiber.d0
    touch = 2.0 * config.fiber.radius
    if isinstance(interaction_law, LennardJonesLaw):
        return touch + lj_parallel_equilibrium_gap(interaction_law)
    return touch


def build_model(config):
    """TwoFiberModel for a validated configuration."""
    interaction_law, contact_law = build_laws(config)
    f = config.fiber
    mesh_a = FiberMesh(length=f.length, radius=f.radius,
                       youngs_modulus=f.youngs_modulus,
                       poisson_ratio=f.poisson_ratio, n_elements=f.n_elements)
    d0 = default_d0(config, interaction_law)
    mesh_b = dataclasses.replace(mesh_a, origin_x=d0)
    iq = config.interaction.quadrature
    cq = config.contact.quadrature
    return build_two_fiber_model(
        mesh_a, mesh_b,
        interaction_law=interaction_law,
        interaction_quadrature=SectionQuadrature(iq.n_segments, iq.n_gp) if iq else None,
        contact_law=contact_law,
        contact_quadrature=SectionQuadrature(cq.n_segments, cq.n_gp) if cq else None,
    )


def newton_settings(config):
    s = config.solver
    return NewtonSettings(tol_residual=s.tol_residual, tol_increment=s.tol_increment,
                          max_iter=s.max_iter, du_max=s.du_max)


_F_REF_CACHE = {}


def compute_reference_force(config):
    """Reference load for normalization, cached per fiber geometry and the
    normalization modulus (shared-normalization studies override it)."""
    f = config.fiber
    e_norm = config.normalization_youngs_modulus or f.youngs_modulus
    key = (f.length, f.radius, e_norm, f.poisson_ratio, f.n_elements)
    if key not in _F_REF_CACHE:
        mesh = FiberMesh(length=f.length, radius=f.radius, youngs_modulus=e_norm,
                         poisson_ratio=f.poisson_ratio, n_elements=f.n_elements)
        settings = NewtonSettings(
            tol_residual=config.solver.tol_residual * e_norm / f.youngs_modulus,
            tol_increment=config.solver.tol_increment,
            max_iter=config.solver.max_iter,
            du_max=config.solver.du_max,
        )
        _F_REF_CACHE[key] = reference_force(mesh, settings)
    return _F_REF_CACHE[key]


# ---------------------------------------------------------------------------
# presets

BASE_FIBER = dict(length=5.0, radius=0.02, youngs_modulus=1.0e5, poisson_ratio=0.3)
LJ_PARAMS = dict(rho1=1.0, rho2=1.0, k_vdw=-1.0e-7, k_rep=5.0e-25)


def _solver_config(fiber, du_max):
    ea = fiber["youngs_modulus"] * math.pi * fiber["radius"] ** 2
    return SolverConfig(
        tol_residual=1e-8 * ea / fiber["length"],
        tol_increment=1e-10 * fiber["length"],
        max_iter=200,
        du_max=du_max,
    )


def _elstat_config(n_elements, youngs_modulus=1.0e5, interaction_quad=(2, 10),
                   norm_young=None):
    fiber = dict(BASE_FIBER, youngs_modulus=youngs_modulus)
    radius = fiber["radius"]
    length = fiber["length"]
    return ScenarioConfig(
        fiber=FiberConfig(n_elements=n_elements, **fiber),
        interaction=InteractionConfig(
            type="electrostatic", sigma1=1.0, sigma2=-1.0, k_coulomb=0.1,
            quadrature=QuadratureConfig(*interaction_quad),
        ),
        contact=ContactConfig(
            enabled=True, penalty=100.0, gbar=radius / 10.0,
            quadrature=QuadratureConfig(20, 5),
        ),
        sweep=SweepConfig(u_start=0.0, u_end=1.0 * length, step_initial=0.005,
                          step_min=1e-5, step_max=0.04),
        separated_sweep=SweepConfig(u_start=1.2 * length, u_end=0.55 * length,
                                    step_initial=0.05, step_min=1e-4, step_max=0.1),
        relax_points=[r * length for r in (0.62, 0.66, 0.70, 0.75, 0.80, 0.85, 0.90)],
        solver=_solver_config(fiber, du_max=radius / 2.0),
        relaxation=RelaxationConfig(),
        outputs=OutputConfig(snapshots_every_n=50),
        normalization_youngs_modulus=norm_young,
    )


def _lj_config(reg_ratio=None, allow_override=False, u_end_ratio=0.30):
    fiber = dict(BASE_FIBER)
    radius = fiber["radius"]
    length = fiber["length"]
    law = LennardJonesLaw(radius1=radius, radius2=radius, **LJ_PARAMS)
    g_eq = lj_parallel_equilibrium_gap(law)
    reg_gap = None if reg_ratio in (None, 0, 0.0) else reg_ratio * g_eq
    # the strict R/20 increment cap is what makes the unmodified law solvable
    # at all; regularized laws are smooth down to zero gap and run with the
    # standard R/2 cap
    du_max = radius / 20.0 if reg_gap is None else radius / 2.0
    solver = _solver_config(fiber, du_max=du_max)
    # regularization transparency is checked at 1e-10 relative between
    # separately converged sweeps, so equilibria are resolved much tighter
    solver = dataclasses.replace(
        solver,
        tol_residual=1e-4 * solver.tol_residual,
        tol_increment=1e-3 * solver.tol_increment,
    )
    return ScenarioConfig(
        fiber=FiberConfig(n_elements=64, **fiber),
        interaction=InteractionConfig(
            type="lennard_jones", quadrature=QuadratureConfig(5, 10),
            cutoff_radius=5.0 * radius, reg_gap=reg_gap,
            allow_reg_above_equilibrium=allow_override, **LJ_PARAMS,
        ),
        contact=ContactConfig(enabled=False),
        sweep=SweepConfig(u_start=1.6e-4 * length, u_end=u_end_ratio * length,
                          step_initial=2e-3, step_min=1e-6, step_max=2e-3,
                          growth=1.0),
        solver=solver,
        relaxation=RelaxationConfig(),
        outputs=OutputConfig(snapshots_every_n=200),
    )


_FAMILIES = {
    "elstat-baseline-16": [("", lambda: _elstat_config(16))],
    "elstat-paramstudy-32": [
        ("e1e4", lambda: _elstat_config(32, youngs_modulus=1.0e4, norm_young=1.0e5)),
        ("e1e5", lambda: _elstat_config(32, youngs_modulus=1.0e5, norm_young=1.0e5)),
        ("e1e6", lambda: _elstat_config(32, youngs_modulus=1.0e6, norm_young=1.0e5)),
    ],
    "elstat-meshstudy": [
        ("n8", lambda: _elstat_config(8)),
        ("n16", lambda: _elstat_config(16)),
        ("n32", lambda: _elstat_config(32)),
        ("n8-gp2x", lambda: _elstat_config(8, interaction_quad=(2, 20))),
    ],
    "lj-baseline-64": [("", lambda: _lj_config(None))],
    "lj-regularization": [
        ("r0.0", lambda: _lj_config(None)),
        ("r0.3", lambda: _lj_config(0.3)),
        ("r0.6", lambda: _lj_config(0.6)),
        ("r1.0", lambda: _lj_config(1.0)),
        ("r1.2", lambda: _lj_config(1.2, allow_override=True)),
    ],
}


def preset_names():
    return sorted(_FAMILIES)


def preset_members(name):
    """All (tag, config) members of a preset family."""
    if name not in _FAMILIES:
        raise ValidationError(f"unknown preset '{name}'; know {preset_names()}")
    return [(tag, validate(factory())) for tag, factory in _FAMILIES[name]]


def preset(name):
    """The representative configuration of a preset (first family member)."""
    return preset_members(name)[0][1]


# ---------------------------------------------------------------------------
# output writers


def _sample_centerline(model, state, fiber_index, points_per_element=10):
    mesh = model.meshes[fiber_index]
    nodal = model.nodal_blocks(state.q, fiber_index)
    xi = np.linspace(-1.0, 1.0, points_per_element, endpoint=False)
    s0, _, _ = hermite_shapes(xi, mesh.element_length)
    pts = np.einsum("ik,ekc->eic", s0, nodal).reshape(-1, 2)
    end = nodal[-1, 2]
    return np.vstack([pts, end])


def export_snapshot(model, state, gap_samples, shape_path, gaps_path,
                    points_per_element=10):
    """Legacy ASCII VTK polydata: centerline polylines with a fiber_id point
    scalar, and gap-sample midpoints carrying gap values normalized with the
    fiber radius."""
    curves = [
        _sample_centerline(model, state, i, points_per_element)
        for i in range(len(model.meshes))
    ]
    n_total = sum(len(c) for c in curves)
    with open(shape_path, "w") as fp:
        fp.write("# vtk DataFile Version 4.2\n")
        fp.write("fiber centerlines\n")
        fp.write("ASCII\nDATASET POLYDATA\n")
        fp.write(f"POINTS {n_total} float\n")
        for curve in curves:
            for x, y in curve:
                fp.write(f"{x:.9e} {y:.9e} 0.0\n")
        size = sum(len(c) + 1 for c in curves)
        fp.write(f"LINES {len(curves)} {size}\n")
        offset = 0
        for curve in curves:
            ids = " ".join(str(offset + k) for k in range(len(curve)))
            fp.write(f"{len(curve)} {ids}\n")
            offset += len(curve)
        fp.write(f"POINT_DATA {n_total}\n")
        fp.write("SCALARS fiber_id float 1\nLOOKUP_TABLE default\n")
        for i, curve in enumerate(curves):
            fp.write(f"{float(i):.1f}\n" * len(curve))

    radius = model.meshes[0].radius
    with open(gaps_path, "w") as fp:
        fp.write("# vtk DataFile Version 4.2\n")
        fp.write("active contact gap samples\n")
        fp.write("ASCII\nDATASET POLYDATA\n")
        fp.write(f"POINTS {len(gap_samples)} float\n")
        for s in gap_samples:
            fp.write(f"{s.midpoint[0]:.9e} {s.midpoint[1]:.9e} 0.0\n")
        fp.write(f"VERTICES {len(gap_samples)} {2 * len(gap_samples)}\n")
        for k in range(len(gap_samples)):
            fp.write(f"1 {k}\n")
        fp.write(f"POINT_DATA {len(gap_samples)}\n")
        fp.write("SCALARS gap_over_R float 1\nLOOKUP_TABLE default\n")
        for s in gap_samples:
            fp.write(f"{s.gap / radius:.9e}\n")


def write_curve_csv(path, records, length, f_ref):
    with open(path, "w") as fp:
        fp.write(CSV_HEADER + "\n")
        for r in records:
            fp.write(
                ",".join(
                    [
                        str(r.index),
                        _fmt(r.u_x),
                        _fmt(r.u_x / length),
                        _fmt(r.f_x),
                        _fmt(r.f_x / f_ref),
                        str(r.iterations),
                        r.branch,
                    ]
                )
                + "\n"
            )


def read_curve_csv(path):
    """Parse a curve CSV back into arrays, verifying the fixed schema."""
    with open(path) as fp:
        header = fp.readline().strip()
        if header != CSV_HEADER:
            raise ValidationError(f"{path}: unexpected curve header '{header}'")
        rows = [line.strip().split(",") for line in fp if line.strip()]
    return {
        "step": np.array([int(r[0]) for r in rows]),
        "u_x": np.array([float(r[1]) for r in rows]),
        "u_x_over_l": np.array([float(r[2]) for r in rows]),
        "F_x": np.array([float(r[3]) for r in rows]),
        "F_x_normalized": np.array([float(r[4]) for r in rows]),
        "newton_iters": np.array([int(r[5]) for r in rows]),
        "branch": [r[6] for r in rows],
    }


def write_gap_csv(path, rows, radius, length):
    with open(path, "w") as fp:
        fp.write(GAP_CSV_HEADER + "\n")
        for step, u_x, min_gap, arc in rows:
            fp.write(
                f"{step},{_fmt(u_x)},{_fmt(min_gap / radius)},{_fmt(arc / length)}\n"
            )


def write_summary(path, summary):
    with open(path, "w") as fp:
        for key in SUMMARY_KEYS:
            fp.write(f"{key} = {_fmt(summary[key])}\n")
        for key in sorted(set(summary) - set(SUMMARY_KEYS)):
            value = summary[key]
            text = _fmt(value) if isinstance(value, float) else str(value)
            fp.write(f"{key} = {text}\n")


def read_summary(path):
    out = {}
    with open(path) as fp:
        for line in fp:
            if "=" in line:
                key, value = line.split("=", 1)
                out[key.strip()] = value.strip()
    return out


# ---------------------------------------------------------------------------
# run orchestration


@dataclass
class RunResult:
    records: list
    summary: dict
    out_dir: str
    curve_path: str
    terminated_early: bool = False


class _SnapshotTracker:
    """Stashes states worth a forced snapshot: running force extrema and the
    final (terminus) state."""

    def __init__(self):
        self.max_state = None
        self.min_state = None
        self.max_f = -np.inf
        self.min_f = np.inf

    def observe(self, record, state, samples):
        if record.f_x > self.max_f:
            self.max_f = record.f_x
            self.max_state = (record, state.copy(), list(samples))
        if record.f_x < self.min_f:
            self.min_f = record.f_x
            self.min_state = (record, state.copy(), list(samples))


def _summarize(records, f_ref, radius, terminated_early, gap_rows):
    norm = np.array([r.f_x / f_ref for r in records])
    u = np.array([r.u_x for r in records])
    i_max = int(np.argmax(norm))
    i_min = int(np.argmin(norm))
    gaps = np.array([g[2] for g in gap_rows]) if gap_rows else np.array([np.nan])
    summary = {
        "F_ref": f_ref,
        "u_at_max": float(u[i_max]),
        "F_max": float(norm[i_max]),
        "u_at_min": float(u[i_min]),
        "F_min": float(norm[i_min]),
        "branch_terminus_u": float(u[-1]),
        "mean_newton_iters": float(
            np.mean([r.iterations for r in records[1:]]) if len(records) > 1 else 0.0
        ),
        "min_gap_over_R": float(np.nanmin(gaps) / radius),
        "terminated_by_failure": terminated_early,
        "n_steps": len(records),
    }
    if gap_rows:
        k = int(np.argmin([g[2] for g in gap_rows]))
        summary["min_gap_u"] = gap_rows[k][1]
        summary["min_gap_arc"] = gap_rows[k][3]
    return summary


def run(config, branch, out_dir):
    """Execute one branch of a validated scenario; writes all artifacts into
    ``out_dir`` and returns the in-memory results."""
    validate(config)
    os.makedirs(out_dir, exist_ok=True)
    vtk_dir = os.path.join(out_dir, config.outputs.vtk_dir)
    os.makedirs(vtk_dir, exist_ok=True)

    model = build_model(config)
    newton = newton_settings(config)
    f_ref = compute_reference_force(config)
    length = config.fiber.length
    radius = config.fiber.radius
    log.info("reference force F_ref = %.6e", f_ref)

    gap_rows = []
    tracker = _SnapshotTracker()
    every = config.outputs.snapshots_every_n

    def observer(record, state, assembly):
        min_gap = record.min_gap
        arc = record.min_gap_arc
        if np.isnan(min_gap):
            # no contact provider (LJ runs): light geometric probe
            from .contact import min_gap_probe

            min_gap, arc = min_gap_probe(
                model.nodal_blocks(state.q, 0), model.meshes[0].element_length,
                model.nodal_blocks(state.q, 1), model.meshes[1].element_length,
                2.0 * radius,
            )
        gap_rows.append((record.index, record.u_x, min_gap, arc))
        tracker.observe(record, state, assembly.gap_samples)
        if every and record.index % every == 0:
            _write_snapshot(model, state, assembly.gap_samples, vtk_dir,
                            f"step{record.index:05d}")
        log.info(
            "step %4d  u/l=%.6f  F=%.6e  F/F_ref=%.4f  iters=%d",
            record.index, record.u_x / length, record.f_x,
            record.f_x / f_ref, record.iterations,
        )

    terminated = False
    if branch in ("contact", "separated"):
        if branch == "contact":
            sweep_cfg = config.sweep
            initial = model.initial_state(u_x=sweep_cfg.u_start, branch=branch)
        else:
            sweep_cfg = config.separated_sweep
            if sweep_cfg is None:
                raise ValidationError("config.separated_sweep: required for this branch")
            initial = model.initial_state(u_x=sweep_cfg.u_start, branch=branch,
                                          straight_at_u=True)
        settings = ContinuationSettings(
            u_start=sweep_cfg.u_start, u_end=sweep_cfg.u_end,
            step_initial=sweep_cfg.step_initial, step_min=sweep_cfg.step_min,
            step_max=sweep_cfg.step_max, growth=sweep_cfg.growth,
        )
        try:
            result = continuation_sweep(model, settings, newton, initial,
                                        branch=branch, observer=observer)
        except (NonConvergenceError, SingularTangentError) as exc:
            raise NoConvergedStepError(str(exc)) from exc
        records = result.records
        terminated = result.terminated_early
        last_state = result.last_state
        last_samples = model.assemble(last_state, collect_samples=True).gap_samples
        _write_snapshot(model, last_state, last_samples, vtk_dir, "terminus")
    elif branch == "unstable":
        relax_cfg = config.relaxation
        relax = RelaxationSettings(drag=relax_cfg.drag, dt_initial=relax_cfg.dt_initial,
                                   steady_tol=relax_cfg.steady_tol,
                                   step_budget=relax_cfg.step_budget)
        points = config.relax_points or []
        if not points:
            raise ValidationError("config.relax_points: required for this branch")
        records = []
        for index, u in enumerate(points):
            state = model.initial_state(u_x=u, branch="unstable", straight_at_u=True)
            try:
                state = relax_to_steady_state(model, state, relax, newton)
            except (MaxTimeExceededError, NonConvergenceError, SingularTangentError):
                log.warning("relaxation found no steady state at u=%.4f", u)
                continue
            assembly = model.assemble(state, collect_samples=True)
            reactions = extract_reactions(model, state, assembly)
            record = StepRecord(
                index=index, u_x=u, f_x=reactions.total_fx, iterations=0,
                branch="unstable",
                min_gap=assembly.diagnostics.get("min_gap", np.nan),
                min_gap_arc=assembly.diagnostics.get("min_gap_arc", np.nan),
            )
            records.append(record)
            observer(record, state, assembly)
        if not records:
            raise NoConvergedStepError("no relaxation point reached a steady state")
        last_state = None
    else:
        raise ValidationError(f"unknown branch '{branch}'")

    if not records:
        raise NoConvergedStepError("no converged step recorded")

    for tag, stash in (("extremum_max", tracker.max_state),
                       ("extremum_min", tracker.min_state)):
        if stash is not None:
            _, state, samples = stash
            _write_snapshot(model, state, samples, vtk_dir, tag)

    curve_path = os.path.join(out_dir, config.outputs.curve_csv)
    write_curve_csv(curve_path, records, length, f_ref)
    write_gap_csv(os.path.join(out_dir, config.outputs.gap_csv), gap_rows,
                  radius, length)
    summary = _summarize(records, f_ref, radius, terminated, gap_rows)
    summary["branch"] = branch
    write_summary(os.path.join(out_dir, config.outputs.summary), summary)
    return RunResult(records=records, summary=summary, out_dir=out_dir,
                     curve_path=curve_path, terminated_early=terminated)


def _write_snapshot(model, state, samples, vtk_dir, tag):
    export_snapshot(
        model, state, samples,
        os.path.join(vtk_dir, f"shape_{tag}.vtk"),
        os.path.join(vtk_dir, f"gaps_{tag}.vtk"),
    )


class NoConvergedStepError(RuntimeError):
    """The requested branch produced no converged step at all."""
