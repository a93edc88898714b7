"""Meshes, DOF bookkeeping, boundary conditions and global assembly.

Each node carries four DOFs (x, y, tx, ty). The two-fiber system drives the
right fiber's endpoint x-DOFs with the prescribed support displacement
``u_x`` measured from surface contact: the driven support position is
``R1 + R2 + u_x``, so ``u_x`` equals the surface-to-surface separation the
supports impose. Supports are simple: endpoint positions are held in x,
rotations stay free, and the axial direction is released so the fibers can
feed length toward midspan; symmetry is pinned by fixing the midspan node's
y-coordinate on each fiber. Fixing the endpoints axially as well would lock
the fibers into membrane tension orders of magnitude above what the adhesion
laws can transmit and no peeling branch could exist.

The assembled residual is the out-of-balance force ``f_ext - grad(energy)``
and the tangent is its exact DOF derivative; support reactions are the
negative of full-system residual entries at constrained DOFs.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import beam, contact, interaction


class NonFiniteForceError(RuntimeError):
    """A provider produced non-finite force or tangent entries."""

    def __init__(self, provider, detail=""):
        self.provider = provider
        super().__init__(f"non-finite contribution from provider '{provider}' {detail}")


class ModelDefinitionError(ValueError):
    pass


@dataclass(frozen=True)
class FiberMesh:
    """Geometry, discretization and material of one straight fiber."""

    length: float
    radius: float
    youngs_modulus: float
    poisson_ratio: float
    n_elements: int
    origin_x: float = 0.0

    def __post_init__(self):
        if self.length <= 0.0 or self.radius <= 0.0:
            raise ModelDefinitionError("fiber length and radius must be positive")
        if self.n_elements < 1:
            raise ModelDefinitionError("need at least one element")

    @property
    def area(self):
        return math.pi * self.radius**2

    @property
    def second_moment(self):
        return math.pi * self.radius**4 / 4.0

    @property
    def ea(self):
        return self.youngs_modulus * self.area

    @property
    def ei(self):
        return self.youngs_modulus * self.second_moment

    @property
    def slenderness(self):
        return self.length / self.radius

    @property
    def n_nodes(self):
        return self.n_elements + 1

    @property
    def element_length(self):
        return self.length / self.n_elements

    def reference_positions(self):
        y = np.linspace(0.0, self.length, self.n_nodes)
        return np.column_stack([np.full(self.n_nodes, self.origin_x), y])

    def reference_tangents(self):
        return np.tile(np.array([0.0, 1.0]), (self.n_nodes, 1))


@dataclass
class DofMap:
    n_dof: int
    fixed: np.ndarray
    fixed_values: np.ndarray
    driven: np.ndarray
    free: np.ndarray
    node_offsets: tuple

    def validate(self):
        fixed, driven = set(self.fixed.tolist()), set(self.driven.tolist())
        free = set(self.free.tolist())
        assert not (fixed & driven) and not (fixed & free) and not (driven & free)
        assert fixed | driven | free == set(range(self.n_dof))


@dataclass
class SystemState:
    q: np.ndarray
    u_x: float
    branch: str = "contact"

    def copy(self):
        return SystemState(q=self.q.copy(), u_x=self.u_x, branch=self.branch)


@dataclass
class ReactionSet:
    """Support reactions; x-components at the four endpoint supports and the
    total horizontal force at the driven (right) supports."""

    bottom_left: float
    top_left: float
    bottom_right: float
    top_right: float
    f_y_max: float

    @property
    def total_fx(self):
        return self.bottom_right + self.top_right


@dataclass
class AssemblyResult:
    residual_free: np.ndarray
    tangent_free: np.ndarray
    residual_full: np.ndarray
    energy: float
    diagnostics: dict = field(default_factory=dict)
    gap_samples: list = field(default_factory=list)


class BeamProvider:
    def __init__(self, fiber_index):
        self.fiber_index = fiber_index
        self.name = f"beam[{fiber_index}]"

    def accumulate(self, system, q, grad, hess, collect):
        mesh = system.meshes[self.fiber_index]
        table = system.dof_tables[self.fiber_index]
        nodal = q[table].reshape(-1, 4, 2)
        energy, force, tangent = beam.internal_energy_force_tangent_batch(
            nodal, mesh.element_length, mesh.ea, mesh.ei
        )
        np.add.at(grad, table.ravel(), force.ravel())
        system.scatter_square(hess, table, tangent)
        return energy.sum(), {}


class InteractionProvider:
    def __init__(self, law, quadrature, fiber_a=0, fiber_b=1, chunk_pairs=200):
        self.law = law
        self.quadrature = quadrature
        self.fiber_a = fiber_a
        self.fiber_b = fiber_b
        self.chunk_pairs = chunk_pairs
        self.name = "interaction"
        self._grid = None

    def _grid_for(self, system):
        if self._grid is None:
            la = system.meshes[self.fiber_a].element_length
            lb = system.meshes[self.fiber_b].element_length
            self._grid = interaction._PairGrid(la, lb, self.quadrature)
        return self._grid

    def accumulate(self, system, q, grad, hess, collect):
        mesh_a = system.meshes[self.fiber_a]
        mesh_b = system.meshes[self.fiber_b]
        table_a = system.dof_tables[self.fiber_a]
        table_b = system.dof_tables[self.fiber_b]
        nodal_a = q[table_a].reshape(-1, 4, 2)
        nodal_b = q[table_b].reshape(-1, 4, 2)
        pairs = interaction.interaction_pair_schedule(
            system.node_positions(q, self.fiber_a),
            system.node_positions(q, self.fiber_b),
            self.law,
            element_length=mesh_a.element_length,
        )
        grid = self._grid_for(system)
        energy = 0.0
        for start in range(0, len(pairs), self.chunk_pairs):
            chunk = pairs[start:start + self.chunk_pairs]
            ia, ib = chunk[:, 0], chunk[:, 1]
            e, fa, fb, kaa, kab, kbb = interaction.integrate_pairs_batch(
                grid, nodal_a[ia], nodal_b[ib], self.law
            )
            energy += e.sum()
            rows_a = table_a[ia]
            rows_b = table_b[ib]
            np.add.at(grad, rows_a.ravel(), fa.ravel())
            np.add.at(grad, rows_b.ravel(), fb.ravel())
            system.scatter_square(hess, rows_a, kaa)
            system.scatter_square(hess, rows_b, kbb)
            system.scatter_rect(hess, rows_a, rows_b, kab)
            system.scatter_rect(hess, rows_b, rows_a, np.swapaxes(kab, 1, 2))
        return energy, {"n_pairs": len(pairs)}


class ContactProvider:
    def __init__(self, law, quadrature, slave=0, master=1):
        self.law = law
        self.quadrature = quadrature
        self.slave = slave
        self.master = master
        self.name = "contact"

    def accumulate(self, system, q, grad, hess, collect):
        mesh_s = system.meshes[self.slave]
        mesh_m = system.meshes[self.master]
        table_s = system.dof_tables[self.slave]
        table_m = system.dof_tables[self.master]
        res = contact.contact_forces(
            q[table_s].reshape(-1, 4, 2),
            mesh_s.element_length,
            q[table_m].reshape(-1, 4, 2),
            mesh_m.element_length,
            self.law,
            self.quadrature,
            collect_samples=collect,
        )
        if len(res.slave_elements):
            rows = np.concatenate(
                [table_s[res.slave_elements], table_m[res.master_elements]], axis=1
            )
            np.add.at(grad, rows.ravel(), res.forces.ravel())
            system.scatter_square(hess, rows, res.tangents)
        diag = {
            "min_gap": res.min_gap,
            "min_gap_arc": res.min_gap_arc,
            "n_active": len(res.slave_elements),
            "projection_fallbacks": res.diagnostics.fallbacks,
            "gap_samples": res.samples,
        }
        return res.energy, diag


class PointLoadProvider:
    """Constant external point loads; potential ``-f . q``."""

    def __init__(self):
        self.loads = {}
        self.name = "external"

    def set_load(self, dof, value):
        self.loads[dof] = value

    def accumulate(self, system, q, grad, hess, collect):
        energy = 0.0
        for dof, value in self.loads.items():
            grad[dof] -= value
            energy -= value * q[dof]
        return energy, {}


class TipMomentProvider:
    """Conservative end moment acting on one node's tangent direction."""

    def __init__(self, fiber_index, node, moment=0.0):
        self.fiber_index = fiber_index
        self.node = node
        self.moment = moment
        self.name = "tip-moment"

    def accumulate(self, system, q, grad, hess, collect):
        base = 4 * (system.node_offsets[self.fiber_index] + self.node)
        tx, ty = q[base + 2], q[base + 3]
        n2 = tx * tx + ty * ty
        theta = math.atan2(ty, tx)
        grad[base + 2] -= self.moment * (-ty / n2)
        grad[base + 3] -= self.moment * (tx / n2)
        h = (
            np.array([[2 * tx * ty, ty * ty - tx * tx], [ty * ty - tx * tx, -2 * tx * ty]])
            / n2**2
        )
        hess[base + 2: base + 4, base + 2: base + 4] -= self.moment * h
        return -self.moment * theta, {}


class FiberSystem:
    """Global DOF layout and assembly over a list of fiber meshes."""

    def __init__(self, meshes):
        self.meshes = list(meshes)
        offsets = []
        total = 0
        for mesh in self.meshes:
            offsets.append(total)
            total += mesh.n_nodes
        self.node_offsets = tuple(offsets)
        self.n_dof = 4 * total
        self.dof_tables = []
        for mesh, off in zip(self.meshes, offsets):
            elems = np.arange(mesh.n_elements)
            n1 = (off + elems) * 4
            table = np.stack(
                [n1 + k for k in range(4)] + [n1 + 4 + k for k in range(4)], axis=1
            )
            self.dof_tables.append(table)
        self.providers = []
        self.dofmap = None

    def register(self, provider):
        self.providers.append(provider)
        return provider

    def node_dof(self, fiber_index, node, comp):
        return 4 * (self.node_offsets[fiber_index] + node) + comp

    def node_positions(self, q, fiber_index):
        off = self.node_offsets[fiber_index]
        n = self.meshes[fiber_index].n_nodes
        block = q[4 * off: 4 * (off + n)].reshape(n, 4)
        return block[:, 0:2]

    def nodal_blocks(self, q, fiber_index):
        return q[self.dof_tables[fiber_index]].reshape(-1, 4, 2)

    def reference_q(self):
        q = np.zeros(self.n_dof)
        for i, mesh in enumerate(self.meshes):
            off = self.node_offsets[i]
            pos = mesh.reference_positions()
            tan = mesh.reference_tangents()
            block = q[4 * off: 4 * (off + mesh.n_nodes)].reshape(mesh.n_nodes, 4)
            block[:, 0:2] = pos
            block[:, 2:4] = tan
        return q

    @staticmethod
    def scatter_square(hess, rows, blocks):
        n = hess.shape[0]
        flat = (rows[:, :, None] * n + rows[:, None, :]).ravel()
        hess.ravel()[:] += np.bincount(flat, weights=blocks.ravel(), minlength=n * n)

    @staticmethod
    def scatter_rect(hess, rows_a, rows_b, blocks):
        n = hess.shape[0]
        flat = (rows_a[:, :, None] * n + rows_b[:, None, :]).ravel()
        hess.ravel()[:] += np.bincount(flat, weights=blocks.ravel(), minlength=n * n)

    def apply_constraints(self, state):
        dm = self.dofmap
        state.q[dm.fixed] = dm.fixed_values
        state.q[dm.driven] = self.driven_value(state.u_x)

    def assemble(self, state, collect_samples=False):
        """Out-of-balance residual and its derivative.

        Residual entries are ``f_ext - grad(energy)``; the tangent is the
        exact residual derivative (negative Hessian). Both are returned
        reduced to free DOFs alongside the full residual for reactions.
        """
        q = state.q
        grad = np.zeros(self.n_dof)
        hess = np.zeros((self.n_dof, self.n_dof))
        energy = 0.0
        diagnostics = {}
        samples = []
        for provider in self.providers:
            e, diag = provider.accumulate(self, q, grad, hess, collect_samples)
            if not (np.isfinite(e) and np.isfinite(grad).all() and np.isfinite(hess).all()):
                raise NonFiniteForceError(provider.name)
            energy += e
            samples.extend(diag.pop("gap_samples", []))
            diagnostics.update(diag)
        residual_full = -grad
        free = self.dofmap.free
        return AssemblyResult(
            residual_free=residual_full[free],
            tangent_free=-hess[np.ix_(free, free)],
            residual_full=residual_full,
            energy=energy,
            diagnostics=diagnostics,
            gap_samples=samples,
        )

    def driven_value(self, u_x):
        raise NotImplementedError


class TwoFiberModel(FiberSystem):
    """Left fiber at x = 0, right fiber driven at ``R1 + R2 + u_x``."""

    def __init__(self, mesh_a, mesh_b, interaction_provider=None, contact_provider=None):
        super().__init__([mesh_a, mesh_b])
        if mesh_a.origin_x != 0.0:
            raise ModelDefinitionError("left fiber must sit at x = 0")
        self.driven_base = mesh_a.radius + mesh_b.radius
        self.register(BeamProvider(0))
        self.register(BeamProvider(1))
        if interaction_provider is not None:
            self.register(interaction_provider)
        if contact_provider is not None:
            self.register(contact_provider)
        self.external = self.register(PointLoadProvider())
        self.dofmap = self._build_dofmap()
        self.dofmap.validate()

    def _build_dofmap(self):
        mesh_a, mesh_b = self.meshes
        na, nb = mesh_a.n_elements, mesh_b.n_elements
        fixed = [self.node_dof(0, 0, 0), self.node_dof(0, na, 0)]
        values = [0.0, 0.0]
        driven = [self.node_dof(1, 0, 0), self.node_dof(1, nb, 0)]
        if na == 1:
            # degenerate mesh: hold both endpoints completely
            for fiber, n_el in ((0, na), (1, nb)):
                for node in (0, n_el):
                    fixed.append(self.node_dof(fiber, node, 1))
                    values.append(self.meshes[fiber].length if node else 0.0)
        elif na % 2 == 0 and nb % 2 == 0:
            # midspan symmetry pin on each fiber
            for fiber, n_el in ((0, na), (1, nb)):
                fixed.append(self.node_dof(fiber, n_el // 2, 1))
                values.append(self.meshes[fiber].length / 2.0)
        else:
            # no midspan node: classic pin + axial roller
            for fiber in (0, 1):
                fixed.append(self.node_dof(fiber, 0, 1))
                values.append(0.0)
        fixed = np.array(fixed, dtype=int)
        driven = np.array(driven, dtype=int)
        mask = np.ones(self.n_dof, dtype=bool)
        mask[fixed] = False
        mask[driven] = False
        return DofMap(
            n_dof=self.n_dof,
            fixed=fixed,
            fixed_values=np.array(values),
            driven=driven,
            free=np.nonzero(mask)[0],
            node_offsets=self.node_offsets,
        )

    def driven_value(self, u_x):
        return self.driven_base + u_x

    def initial_state(self, u_x=0.0, branch="contact", straight_at_u=False):
        state = SystemState(q=self.reference_q(), u_x=u_x, branch=branch)
        if straight_at_u:
            off = self.node_offsets[1]
            n = self.meshes[1].n_nodes
            block = state.q[4 * off: 4 * (off + n)].reshape(n, 4)
            block[:, 0] = self.driven_value(u_x)
        self.apply_constraints(state)
        return state


class SingleFiberModel(FiberSystem):
    """One simply supported fiber with a transverse midspan point load."""

    def __init__(self, mesh):
        super().__init__([mesh])
        if mesh.n_elements % 2 != 0:
            raise ModelDefinitionError(
                "midpoint load requires a midspan node; use an even element count"
            )
        self.register(BeamProvider(0))
        self.external = self.register(PointLoadProvider())
        self.mid_node = mesh.n_elements // 2
        n = mesh.n_elements
        fixed = np.array(
            [self.node_dof(0, 0, 0), self.node_dof(0, n, 0), self.node_dof(0, self.mid_node, 1)]
        )
        values = np.array([mesh.origin_x, mesh.origin_x, mesh.length / 2.0])
        mask = np.ones(self.n_dof, dtype=bool)
        mask[fixed] = False
        self.dofmap = DofMap(
            n_dof=self.n_dof,
            fixed=fixed,
            fixed_values=values,
            driven=np.array([], dtype=int),
            free=np.nonzero(mask)[0],
            node_offsets=self.node_offsets,
        )
        self.dofmap.validate()

    def driven_value(self, u_x):
        return None

    def set_midpoint_load(self, value):
        self.external.set_load(self.node_dof(0, self.mid_node, 0), value)

    def midpoint_deflection(self, state):
        return state.q[self.node_dof(0, self.mid_node, 0)] - self.meshes[0].origin_x

    def initial_state(self):
        state = SystemState(q=self.reference_q(), u_x=0.0, branch="reference")
        self.apply_constraints(state)
        return state


def build_two_fiber_model(fiber_a, fiber_b, interaction_law=None,
                          interaction_quadrature=None, contact_law=None,
                          contact_quadrature=None):
    """Assemble the standard two-fiber system (left slave, right master)."""
    ip = None
    if interaction_law is not None:
        ip = InteractionProvider(interaction_law, interaction_quadrature)
    cp = None
    if contact_law is not None:
        cp = ContactProvider(contact_law, contact_quadrature, slave=0, master=1)
    return TwoFiberModel(fiber_a, fiber_b, interaction_provider=ip, contact_provider=cp)


def extract_reactions(model, state, assembly=None):
    """Support reactions from the full residual of a converged state."""
    if assembly is None:
        assembly = model.assemble(state)
    r = assembly.residual_full
    mesh_a, mesh_b = model.meshes[0], model.meshes[1]
    na, nb = mesh_a.n_elements, mesh_b.n_elements
    constrained = np.concatenate([model.dofmap.fixed, model.dofmap.driven])
    y_dofs = [d for d in constrained if d % 4 == 1]
    f_y_max = max((abs(r[d]) for d in y_dofs), default=0.0)
    return ReactionSet(
        bottom_left=-r[model.node_dof(0, 0, 0)],
        top_left=-r[model.node_dof(0, na, 0)],
        bottom_right=-r[model.node_dof(1, 0, 0)],
        top_right=-r[model.node_dof(1, nb, 0)],
        f_y_max=f_y_max,
    )
