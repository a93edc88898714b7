"""Cross-section pair interaction laws and their reduction to beam forces.

The interaction free energy of two fibers is evaluated as two nested 1D
integrals along the fiber axes of a closed-form law for the resultant
interaction of one pair of circular cross-sections. Laws depend only on the
centerline positions (cross-section rotations are neglected), so generalized
forces act on position-interpolating DOFs of both elements and the consistent
tangent follows from the law's first two distance derivatives.

Two families are implemented:

* charged fibers, monopole law ``4 pi^2 R1 R2 s1 s2 k / d`` in the center
  distance ``d``;
* Lennard-Jones fibers, attractive ``~ g^-5/2`` plus repulsive ``~ g^-17/2``
  in the surface gap ``g = d - R1 - R2``, from analytic integration of the
  point laws over two parallel disks, with optional linear-force
  regularization below a knot gap and an optional evaluation cutoff.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .beam import hermite_shapes
from .quadrature import segment_rule

# disk-disk reduction constant for the inverse-6 point law, exact value
VDW_DISK_CONSTANT = 3.0 * math.pi**2 / 256.0

# quoted 3-digit constant for the inverse-12 point law; disk_pair_constant(12)
# reproduces it to 3 significant digits (see tests)
REPULSIVE_DISK_CONSTANT = 5.30e-3

# equilibrium surface gap of two parallel cylinders under the full LJ law,
# as a multiple of the point-pair equilibrium spacing
PARALLEL_EQUILIBRIUM_FACTOR = 0.57169


class SingularSeparationError(ValueError):
    """A law was evaluated at a non-positive separation it cannot represent."""


def disk_pair_constant(exponent):
    """Closed-form constant of the coplanar disk-disk reduction of a
    ``k r^-m`` point law, valid for m > 7/2.

    The reduced section-pair law is
    ``C(m) rho1 rho2 sqrt(2 R1 R2 / (R1 + R2)) k g^(7/2 - m)``.
    """
    m = exponent
    if m <= 3.5:
        raise ValueError(f"disk reduction requires exponent > 3.5, got {m}")
    return (
        math.pi
        * math.gamma((m - 1.0) / 2.0)
        * math.gamma(m - 3.5)
        / (math.gamma(m / 2.0) * math.gamma(m - 3.0) * (m - 2.0) * (m - 3.0))
    )


@dataclass(frozen=True)
class ElectrostaticLaw:
    """Monopole section-pair law for two charged circular cross-sections."""

    sigma1: float
    sigma2: float
    k_coulomb: float
    radius1: float
    radius2: float

    def __post_init__(self):
        if self.radius1 <= 0.0 or self.radius2 <= 0.0:
            raise ValueError("cross-section radii must be positive")
        if self.k_coulomb <= 0.0:
            raise ValueError("Coulomb prefactor must be positive")

    @property
    def cutoff_radius(self):
        return None

    @property
    def prefactor(self):
        return (
            (2.0 * math.pi * self.radius1 * self.sigma1)
            * (2.0 * math.pi * self.radius2 * self.sigma2)
            * self.k_coulomb
        )

    def evaluate(self, d):
        """Potential per unit length squared and its first two derivatives
        with respect to the center distance ``d``."""
        d = np.asarray(d, dtype=float)
        if np.any(d <= 0.0):
            raise SingularSeparationError("non-positive center distance")
        pot = self.prefactor / d
        return pot, -pot / d, 2.0 * pot / d**2


@dataclass(frozen=True)
class LennardJonesLaw:
    """Lennard-Jones section-pair law (attractive + repulsive branch).

    ``k_vdw`` must be negative (attraction), ``k_rep`` positive. ``reg_gap``
    switches the combined section force to its linear extrapolation below
    that gap; it must not exceed the parallel-fiber equilibrium gap unless
    ``allow_reg_above_equilibrium`` is set, in which case converged states
    see the modified law and results are corrupted.
    """

    rho1: float
    rho2: float
    k_vdw: float
    k_rep: float
    radius1: float
    radius2: float
    reg_gap: float | None = None
    cutoff_radius: float | None = None
    allow_reg_above_equilibrium: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.k_vdw >= 0.0:
            raise ValueError(f"attractive prefactor must be negative, got {self.k_vdw}")
        if self.k_rep <= 0.0:
            raise ValueError(f"repulsive prefactor must be positive, got {self.k_rep}")
        if self.radius1 <= 0.0 or self.radius2 <= 0.0:
            raise ValueError("cross-section radii must be positive")
        if self.cutoff_radius is not None and self.cutoff_radius <= 0.0:
            raise ValueError("cutoff radius must be positive")
        if self.reg_gap is not None:
            if self.reg_gap <= 0.0:
                raise ValueError("regularization gap must be positive")
            g_eq = lj_parallel_equilibrium_gap(self)
            if self.reg_gap > g_eq:
                if not self.allow_reg_above_equilibrium:
                    raise ValueError(
                        f"regularization gap {self.reg_gap:.6g} exceeds the parallel "
                        f"equilibrium gap {g_eq:.6g}; converged states would see the "
                        "modified law (set allow_reg_above_equilibrium to override)"
                    )
                warnings.warn(
                    "regularization gap exceeds the parallel equilibrium gap; "
                    "results will deviate from the unmodified law",
                    stacklevel=2,
                )

    @property
    def geometry_factor(self):
        return math.sqrt(2.0 * self.radius1 * self.radius2 / (self.radius1 + self.radius2))

    @property
    def c_attract(self):
        return VDW_DISK_CONSTANT * self.rho1 * self.rho2 * self.geometry_factor * self.k_vdw

    @property
    def c_repulse(self):
        return (
            REPULSIVE_DISK_CONSTANT
            * self.rho1
            * self.rho2
            * self.geometry_factor
            * self.k_rep
        )

    @property
    def point_equilibrium_spacing(self):
        return (-2.0 * self.k_rep / self.k_vdw) ** (1.0 / 6.0)

    @property
    def hamaker_constant(self):
        return math.pi**2 * self.rho1 * self.rho2 * self.k_vdw

    def _raw(self, g):
        """Unregularized potential and two gap derivatives; requires g > 0."""
        if np.any(g <= 0.0):
            raise SingularSeparationError(
                "non-positive surface gap under the unregularized law"
            )
        ca, cr = self.c_attract, self.c_repulse
        # inverse powers composed from one divide and one square root
        t = 1.0 / g
        s = np.sqrt(t)
        t2 = t * t
        t4 = t2 * t2
        t8 = t4 * t4
        a2 = ca * (t2 * s)        # g^-2.5
        r8 = cr * (t8 * s)        # g^-8.5
        pot = a2 + r8
        d1 = (-2.5 * a2 - 8.5 * r8) * t
        d2 = (8.75 * a2 + 80.75 * r8) * t2
        return pot, d1, d2

    def evaluate(self, d):
        """Potential per unit length squared and derivatives with respect to
        the center distance ``d`` (equal to gap derivatives)."""
        g = np.asarray(d, dtype=float) - self.radius1 - self.radius2
        if self.reg_gap is None:
            return self._raw(g)
        knot = self.reg_gap
        pot_k, d1_k, d2_k = self._raw(np.asarray(knot))
        # raw branch evaluated at max(g, knot) so g <= 0 never reaches the
        # power laws; for g >= knot the result is the untouched raw value
        g_safe = np.maximum(g, knot)
        pot, d1, d2 = self._raw(g_safe)
        below = g < knot
        dg = g - knot
        pot = np.where(below, pot_k + d1_k * dg + 0.5 * d2_k * dg**2, pot)
        d1 = np.where(below, d1_k + d2_k * dg, d1)
        d2 = np.where(below, d2_k, d2)
        return pot, d1, d2


def electrostatic_section_potential(d, law):
    """Charged section-pair potential and derivatives at center distance d."""
    return law.evaluate(d)


def vdw_section_potential(g, law):
    """Attractive branch alone, as a function of the surface gap."""
    g = np.asarray(g, dtype=float)
    if np.any(g <= 0.0):
        raise SingularSeparationError("non-positive surface gap")
    ca = law.c_attract
    return ca * g**-2.5, -2.5 * ca * g**-3.5, 8.75 * ca * g**-4.5


def repulsive_lj_section_potential(g, law):
    """Repulsive branch alone, as a function of the surface gap."""
    g = np.asarray(g, dtype=float)
    if np.any(g <= 0.0):
        raise SingularSeparationError("non-positive surface gap")
    cr = law.c_repulse
    return cr * g**-8.5, -8.5 * cr * g**-9.5, 80.75 * cr * g**-10.5


def lj_section_force(g, law):
    """Combined section force ``f = -d(potential)/d(gap)`` and its gap
    derivative, with the linear extrapolation below the regularization knot
    when one is configured."""
    g = np.asarray(g, dtype=float)
    _, d1, d2 = law.evaluate(g + law.radius1 + law.radius2)
    return -d1, -d2


def lj_parallel_equilibrium_gap(law):
    """Force-free surface gap of two long parallel fibers under the exact
    cylinder-cylinder LJ law, ``0.57169`` times the point-pair equilibrium
    spacing."""
    return PARALLEL_EQUILIBRIUM_FACTOR * law.point_equilibrium_spacing


@dataclass(frozen=True)
class SectionQuadrature:
    """Segment-subdivided Gauss rule for one element's length integral."""

    n_segments: int
    n_points: int

    def __post_init__(self):
        if self.n_segments < 1 or self.n_points < 1:
            raise ValueError("quadrature needs at least one segment and one point")

    @property
    def total_points(self):
        return self.n_segments * self.n_points


class _PairGrid:
    """Cached shape values and weights of one (element A, element B) rule."""

    def __init__(self, length_a, length_b, quadrature):
        xi, w = segment_rule(quadrature.n_segments, quadrature.n_points)
        self.shapes_a = hermite_shapes(xi, length_a)[0]
        self.shapes_b = hermite_shapes(xi, length_b)[0]
        self.weights_a = w * (length_a / 2.0)
        self.weights_b = w * (length_b / 2.0)


def _pair_terms(grid, nodal_a, nodal_b, law):
    """Distances, weighted law derivatives and unit vectors for a batch of
    element pairs. ``nodal_a``/``nodal_b`` have shape (P, 4, 2)."""
    xa = np.einsum("ik,pkc->pic", grid.shapes_a, nodal_a)
    xb = np.einsum("jk,pkc->pjc", grid.shapes_b, nodal_b)
    u = xa[:, :, None, :] - xb[:, None, :, :]
    d = np.sqrt(np.einsum("pijc,pijc->pij", u, u))

    if law.cutoff_radius is not None:
        # evaluate the law only inside the cutoff; outside contributes zero
        inside = d <= law.cutoff_radius
        pot = np.zeros_like(d)
        d1 = np.zeros_like(d)
        d2 = np.zeros_like(d)
        pot[inside], d1[inside], d2[inside] = law.evaluate(d[inside])
    else:
        pot, d1, d2 = law.evaluate(d)

    w = grid.weights_a[None, :, None] * grid.weights_b[None, None, :]
    n = u / d[:, :, :, None]
    return d, w * pot, w * d1, w * d2, n


def integrate_pairs_batch(grid, nodal_a, nodal_b, law):
    """Energy, per-element generalized forces and tangent blocks for a batch
    of element pairs.

    Returns (energy[P], fa[P,8], fb[P,8], kaa, kab, kbb) where the 8-vectors
    follow the element DOF layout and ``kba = kab`` transposed.
    """
    d, wpot, wd1, wd2, n = _pair_terms(grid, nodal_a, nodal_b, law)
    sa, sb = grid.shapes_a, grid.shapes_b

    energy = wpot.sum(axis=(1, 2))
    fa = np.einsum("pij,ik,pijc->pkc", wd1, sa, n, optimize=True).reshape(-1, 8)
    fb = -np.einsum("pij,jk,pijc->pkc", wd1, sb, n, optimize=True).reshape(-1, 8)

    # 2x2 kernel of the distance Hessian: c2 n n^T + c1 (I - n n^T)
    c1 = wd1 / d
    alpha = wd2 - c1
    m = alpha[:, :, :, None, None] * np.einsum("pijc,pijd->pijcd", n, n)
    m[..., 0, 0] += c1
    m[..., 1, 1] += c1

    ma = m.sum(axis=2)
    mb = m.sum(axis=1)
    p = nodal_a.shape[0]
    kaa = np.einsum("ik,il,picd->pkcld", sa, sa, ma, optimize=True).reshape(p, 8, 8)
    kbb = np.einsum("jk,jl,pjcd->pkcld", sb, sb, mb, optimize=True).reshape(p, 8, 8)
    kab = -np.einsum("ik,jl,pijcd->pkcld", sa, sb, m, optimize=True).reshape(p, 8, 8)
    return energy, fa, fb, kaa, kab, kbb


def integrate_pair(length_a, length_b, q_a, q_b, law, quadrature):
    """Interaction energy, 16-vector of generalized forces and 16x16 tangent
    of one element pair (A DOFs first)."""
    grid = _PairGrid(length_a, length_b, quadrature)
    nodal_a = np.asarray(q_a, dtype=float).reshape(1, 4, 2)
    nodal_b = np.asarray(q_b, dtype=float).reshape(1, 4, 2)
    energy, fa, fb, kaa, kab, kbb = integrate_pairs_batch(grid, nodal_a, nodal_b, law)
    force = np.concatenate([fa[0], fb[0]])
    tangent = np.block([[kaa[0], kab[0]], [kab[0].T, kbb[0]]])
    return energy[0], force, tangent


def _segment_distance(p1, p2, p3, p4):
    """Minimum distance between segments (p1, p2) and (p3, p4), batched over
    leading dimensions."""
    d1 = p2 - p1
    d2 = p4 - p3
    r = p1 - p3
    a = np.einsum("...c,...c->...", d1, d1)
    e = np.einsum("...c,...c->...", d2, d2)
    b = np.einsum("...c,...c->...", d1, d2)
    c = np.einsum("...c,...c->...", d1, r)
    f = np.einsum("...c,...c->...", d2, r)
    denom = a * e - b * b
    s = np.where(np.abs(denom) > 1e-14, (b * f - c * e) / np.where(denom == 0, 1, denom), 0.0)
    s = np.clip(s, 0.0, 1.0)
    t = np.where(e > 1e-14, (b * s + f) / np.where(e == 0, 1, e), 0.0)
    t_cl = np.clip(t, 0.0, 1.0)
    # re-project s where t was clamped
    s = np.where(
        t != t_cl,
        np.clip(np.where(a > 1e-14, (b * t_cl - c) / np.where(a == 0, 1, a), 0.0), 0.0, 1.0),
        s,
    )
    closest1 = p1 + s[..., None] * d1
    closest2 = p3 + t_cl[..., None] * d2
    return np.linalg.norm(closest1 - closest2, axis=-1)


def interaction_pair_schedule(nodes_a, nodes_b, law, element_length=None):
    """Element pairs to integrate, pruned by a conservative broad phase.

    ``nodes_a``/``nodes_b`` are current nodal positions, shape (n+1, 2). A
    pair survives if the chord-to-chord distance minus both radii is within
    the cutoff plus a safety margin of one element length; without a cutoff
    every pair survives.
    """
    na = len(nodes_a) - 1
    nb = len(nodes_b) - 1
    if law.cutoff_radius is None:
        ia, ib = np.meshgrid(np.arange(na), np.arange(nb), indexing="ij")
        return np.column_stack([ia.ravel(), ib.ravel()])

    if element_length is None:
        element_length = float(np.linalg.norm(nodes_a[1] - nodes_a[0]))
    p1 = np.repeat(nodes_a[:-1], nb, axis=0)
    p2 = np.repeat(nodes_a[1:], nb, axis=0)
    p3 = np.tile(nodes_b[:-1], (na, 1))
    p4 = np.tile(nodes_b[1:], (na, 1))
    dist = _segment_distance(p1, p2, p3, p4)
    radii = getattr(law, "radius1", 0.0) + getattr(law, "radius2", 0.0)
    keep = dist - radii <= law.cutoff_radius + element_length
    ia, ib = np.meshgrid(np.arange(na), np.arange(nb), indexing="ij")
    pairs = np.column_stack([ia.ravel(), ib.ravel()])
    return pairs[keep]
