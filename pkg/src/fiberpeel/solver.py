"""Quasi-static solution drivers.

Newton iteration with a per-iteration cap on nodal displacement increments,
displacement-driven continuation with adaptive step halving and branch-end
detection, first-order overdamped relaxation toward steady states that plain
continuation cannot reach, and the reference-force experiment used to
normalize all reported forces.
"""

from dataclasses import dataclass, field

import numpy as np

from .model import NonFiniteForceError, SingleFiberModel


class NonConvergenceError(RuntimeError):
    def __init__(self, iterations, residual_norm):
        self.iterations = iterations
        self.residual_norm = residual_norm
        super().__init__(
            f"Newton did not converge in {iterations} iterations "
            f"(last residual {residual_norm:.3e})"
        )


class SingularTangentError(RuntimeError):
    pass


class MaxTimeExceededError(RuntimeError):
    pass


@dataclass
class NewtonSettings:
    tol_residual: float
    tol_increment: float
    max_iter: int = 100
    du_max: float = 0.01  # per-iteration cap on nodal displacement magnitude


@dataclass
class ContinuationSettings:
    u_start: float
    u_end: float
    step_initial: float
    step_min: float
    step_max: float
    growth: float = 1.2

    def __post_init__(self):
        if self.step_min <= 0.0:
            raise ValueError("minimum step must be positive")
        if self.u_start == self.u_end:
            raise ValueError("sweep range is empty")


@dataclass
class RelaxationSettings:
    drag: float = 1e-4
    dt_initial: float = 0.1
    steady_tol: float = 1e-10
    step_budget: int = 5000


@dataclass
class StepRecord:
    index: int
    u_x: float
    f_x: float
    iterations: int
    branch: str
    min_gap: float = np.nan
    min_gap_arc: float = np.nan


@dataclass
class SweepResult:
    records: list
    terminated_early: bool
    last_state: object
    total_iterations: int = 0

    @property
    def mean_iterations(self):
        counted = [r.iterations for r in self.records if r.index > 0]
        return float(np.mean(counted)) if counted else 0.0


def _max_nodal_translation(model, dq_free):
    free = model.dofmap.free
    comp = free % 4
    node = free // 4
    n_nodes = model.n_dof // 4
    vx = np.zeros(n_nodes)
    vy = np.zeros(n_nodes)
    tmask = comp == 0
    vx[node[tmask]] = dq_free[tmask]
    tmask = comp == 1
    vy[node[tmask]] = dq_free[tmask]
    return float(np.hypot(vx, vy).max())


def newton_step_controlled(model, state, settings, augment=None):
    """Solve the current system in place; returns the iteration count.

    Each update is scaled so no nodal displacement increment exceeds
    ``du_max``. ``augment`` adds an implicit-relaxation term
    ``(c_diag, q_ref, dt)`` to residual and tangent.
    """
    model.apply_constraints(state)
    free = model.dofmap.free
    last_increment = 0.0
    iterations = 0
    best_norm = np.inf
    while True:
        assembly = model.assemble(state)
        residual = assembly.residual_free
        tangent = assembly.tangent_free
        if augment is not None:
            c_diag, q_ref, dt = augment
            residual = residual - c_diag / dt * (state.q[free] - q_ref)
            tangent = tangent - np.diag(c_diag / dt)
        res_norm = float(np.abs(residual).max()) if len(residual) else 0.0
        if res_norm < settings.tol_residual and last_increment <= settings.tol_increment:
            return iterations
        best_norm = min(best_norm, res_norm)
        # capped walks keep the residual near its entry level; an explosion
        # past it signals divergence (e.g. fibers crossing), not progress
        if iterations >= 15 and res_norm > 1e3 * best_norm:
            raise NonConvergenceError(iterations, res_norm)
        if iterations >= settings.max_iter:
            raise NonConvergenceError(iterations, res_norm)
        try:
            dq = np.linalg.solve(tangent, -residual)
        except np.linalg.LinAlgError as exc:
            raise SingularTangentError(str(exc)) from exc
        if not np.isfinite(dq).all():
            raise SingularTangentError("non-finite Newton update")
        max_tr = _max_nodal_translation(model, dq)
        scale = min(1.0, settings.du_max / max_tr) if max_tr > 0.0 else 1.0
        state.q[free] += scale * dq
        last_increment = float(np.abs(scale * dq).max())
        iterations += 1


def _record_step(model, state, assembly, index, iterations, branch):
    r = assembly.residual_full
    dofmap = model.dofmap
    f_x = float(-r[dofmap.driven].sum()) if len(dofmap.driven) else 0.0
    return StepRecord(
        index=index,
        u_x=state.u_x,
        f_x=f_x,
        iterations=iterations,
        branch=branch,
        min_gap=assembly.diagnostics.get("min_gap", np.nan),
        min_gap_arc=assembly.diagnostics.get("min_gap_arc", np.nan),
    )


def continuation_sweep(model, settings, newton, initial_state, branch="contact",
                       observer=None):
    """March the prescribed displacement from ``u_start`` to ``u_end``.

    Each step warm-starts from the previous converged state; failed steps are
    halved down to ``step_min``, below which the branch terminates and the
    last converged point is the branch terminus. Steps grow by a fixed factor
    after every success, so step sequences are deterministic functions of the
    failure pattern alone.
    """
    direction = 1.0 if settings.u_end >= settings.u_start else -1.0
    state = initial_state
    state.u_x = settings.u_start
    state.branch = branch
    iters = newton_step_controlled(model, state, newton)
    assembly = model.assemble(state, collect_samples=observer is not None)
    records = [_record_step(model, state, assembly, 0, iters, branch)]
    total_iters = iters
    if observer is not None:
        observer(records[-1], state, assembly)

    step = settings.step_initial
    terminated = False
    index = 0
    while direction * (settings.u_end - state.u_x) > 1e-14:
        u_next = state.u_x + direction * step
        if direction * (u_next - settings.u_end) > 0.0:
            u_next = settings.u_end
        trial = state.copy()
        trial.u_x = u_next
        try:
            iters = newton_step_controlled(model, trial, newton)
        except (NonConvergenceError, SingularTangentError, NonFiniteForceError):
            step *= 0.5
            if step < settings.step_min:
                terminated = True
                break
            continue
        state = trial
        index += 1
        total_iters += iters
        assembly = model.assemble(state, collect_samples=observer is not None)
        records.append(_record_step(model, state, assembly, index, iters, branch))
        if observer is not None:
            observer(records[-1], state, assembly)
        step = min(step * settings.growth, settings.step_max)
    return SweepResult(
        records=records,
        terminated_early=terminated,
        last_state=state,
        total_iterations=total_iters,
    )


def _drag_diagonal(model, drag):
    """Lumped drag per free DOF: translations get drag times tributary
    length, tangent DOFs the same scaled by radius^2 for conditioning."""
    c = np.zeros(model.n_dof)
    for i, mesh in enumerate(model.meshes):
        trib = np.full(mesh.n_nodes, mesh.element_length)
        trib[[0, -1]] = mesh.element_length / 2.0
        off = model.node_offsets[i]
        for node in range(mesh.n_nodes):
            base = 4 * (off + node)
            c[base: base + 2] = drag * trib[node]
            c[base + 2: base + 4] = drag * trib[node] * mesh.radius**2
    return c[model.dofmap.free]


def relax_to_steady_state(model, state, settings, newton):
    """First-order overdamped flow ``C qdot = residual`` integrated with
    adaptive implicit steps until velocities vanish and the static residual
    is converged; the result is verified by a final pure Newton solve."""
    model.apply_constraints(state)
    free = model.dofmap.free
    c_diag = _drag_diagonal(model, settings.drag)
    dt = settings.dt_initial
    for step in range(settings.step_budget):
        q_ref = state.q[free].copy()
        trial = state.copy()
        try:
            iters = newton_step_controlled(model, trial, newton, augment=(c_diag, q_ref, dt))
        except (NonConvergenceError, SingularTangentError, NonFiniteForceError):
            dt *= 0.5
            if dt < 1e-12:
                raise MaxTimeExceededError("relaxation time step collapsed")
            continue
        state = trial
        velocity = float(np.abs(state.q[free] - q_ref).max()) / dt
        static_residual = float(np.abs(model.assemble(state).residual_free).max())
        if velocity < settings.steady_tol and static_residual < newton.tol_residual:
            newton_step_controlled(model, state, newton)
            return state
        if iters <= 5:
            dt = min(dt * 2.0, 1e8)
    raise MaxTimeExceededError(
        f"no steady state within {settings.step_budget} relaxation steps"
    )


def solve_midload_deflection(model, load, newton, state=None, n_ramp=4):
    """Converged midpoint deflection of the single-fiber model under a
    transverse midspan load, ramping the load when cold-started."""
    if state is None:
        state = model.initial_state()
        ramp = np.linspace(load / n_ramp, load, n_ramp)
    else:
        ramp = [load]
    for f in ramp:
        model.set_midpoint_load(f)
        newton_step_controlled(model, state, newton)
    return model.midpoint_deflection(state), state


def reference_force(mesh, newton, target_ratio=0.25, tol_ratio=1e-8):
    """Point load at the fiber midpoint that deflects it by a quarter of its
    length, found by a secant iteration on the converged nonlinear response.
    """
    model = SingleFiberModel(mesh)
    target = target_ratio * mesh.length
    tol = tol_ratio * mesh.length
    # the secant resolves load changes whose residual signature is far below
    # the sweep tolerance; solve the inner problems near machine precision
    newton = NewtonSettings(
        tol_residual=min(newton.tol_residual, 1e-13 * mesh.ea / mesh.length),
        tol_increment=min(newton.tol_increment, 1e-14 * mesh.length),
        max_iter=newton.max_iter,
        du_max=newton.du_max,
    )

    # linear Euler-Bernoulli estimate as the starting guess (lower bound)
    f0 = 48.0 * mesh.ei * target / mesh.length**3
    d0, state = solve_midload_deflection(model, f0, newton)
    f1 = f0 * target / d0 if d0 > 0 else 2.0 * f0
    d1, state = solve_midload_deflection(model, f1, newton, state)
    for _ in range(80):
        if abs(d1 - target) < tol:
            return f1
        if d1 == d0:
            raise RuntimeError("reference-force secant stalled")
        f2 = f1 + (target - d1) * (f1 - f0) / (d1 - d0)
        if f2 <= 0.0:
            f2 = 0.5 * f1
        f0, d0 = f1, d1
        f1 = f2
        d1, state = solve_midload_deflection(model, f1, newton, state)
    raise RuntimeError("reference-force secant did not converge")
