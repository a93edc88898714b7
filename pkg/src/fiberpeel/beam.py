"""Planar extensible, shear-rigid beam element on a cubic Hermite centerline.

Each node carries position (x, y) and tangent (tx, ty) degrees of freedom;
tangent magnitudes are unconstrained, stretch enters through ``|r'|``. Strain
measures are the axial strain ``eps = |r'| - 1`` and the signed curvature
``kappa = (r'_x r''_y - r'_y r''_x) / |r'|^2`` of the deformed centerline,
with derivatives taken with respect to reference arc length.

Internal energy is ``0.5 * int(EA eps^2 + EI kappa^2) ds``, integrated with a
fixed 4-point Gauss rule per element. Forces and the tangent operator are the
exact first and second derivatives of that energy with respect to the element
DOF vector ``[x1, y1, tx1, ty1, x2, y2, tx2, ty2]``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .quadrature import gauss_rule

# tangent-norm threshold below which strain measures are meaningless
DEGENERACY_THRESHOLD = 1e-12

N_GAUSS_INTERNAL = 4

_EPERP = np.array([[0.0, 1.0], [-1.0, 0.0]])  # (E @ b) = (b_y, -b_x)


class DegenerateTangentError(ValueError):
    """Centerline tangent norm fell below the degeneracy threshold."""


@dataclass(frozen=True)
class HermiteElement:
    """One two-node element: connectivity, reference length, section stiffness."""

    nodes: tuple
    length0: float
    ea: float
    ei: float

    def __post_init__(self):
        if self.length0 <= 0.0:
            raise ValueError(f"element reference length must be positive, got {self.length0}")


def hermite_shapes(xi, length0):
    """Shape rows (S0, S1, S2) at local coordinates ``xi`` in [-1, 1].

    Row k weights the k-th nodal 2-vector in the order (r1, t1, r2, t2);
    tangent rows carry the Jacobian ``J = length0 / 2`` so nodal tangents are
    derivatives with respect to reference arc length. S1 and S2 give first
    and second arc-length derivatives.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    jac = length0 / 2.0
    xi2 = xi * xi
    xi3 = xi2 * xi

    s0 = np.empty(xi.shape + (4,))
    s0[..., 0] = 0.25 * (2.0 - 3.0 * xi + xi3)
    s0[..., 1] = (0.25 * jac) * (1.0 - xi - xi2 + xi3)
    s0[..., 2] = 0.25 * (2.0 + 3.0 * xi - xi3)
    s0[..., 3] = (0.25 * jac) * (-1.0 - xi + xi2 + xi3)

    s1 = np.empty_like(s0)
    s1[..., 0] = (0.25 / jac) * (-3.0 + 3.0 * xi2)
    s1[..., 1] = 0.25 * (-1.0 - 2.0 * xi + 3.0 * xi2)
    s1[..., 2] = (0.25 / jac) * (3.0 - 3.0 * xi2)
    s1[..., 3] = 0.25 * (-1.0 + 2.0 * xi + 3.0 * xi2)

    s2 = np.empty_like(s0)
    s2[..., 0] = (1.5 / jac**2) * xi
    s2[..., 1] = (0.25 / jac) * (-2.0 + 6.0 * xi)
    s2[..., 2] = (-1.5 / jac**2) * xi
    s2[..., 3] = (0.25 / jac) * (2.0 + 6.0 * xi)
    return s0, s1, s2


def interpolate(element, xi, q_elem):
    """Centerline point, first and second arc-length derivative at ``xi``.

    ``q_elem`` is the 8-vector of element DOFs. Scalar ``xi`` gives 2-vectors,
    array ``xi`` gives (m, 2) arrays.
    """
    scalar = np.isscalar(xi)
    s0, s1, s2 = hermite_shapes(xi, element.length0)
    nodal = np.asarray(q_elem, dtype=float).reshape(4, 2)
    r = s0 @ nodal
    rp = s1 @ nodal
    rpp = s2 @ nodal
    if scalar:
        return r[0], rp[0], rpp[0]
    return r, rp, rpp


def _strain_terms(s1, s2, nodal):
    """Per-quadrature-point strain values and their DOF derivatives.

    ``nodal`` has shape (B, 4, 2). Returns eps, kappa and the gradient /
    Hessian arrays used by the energy assembly, all batched over B.
    """
    a = np.einsum("k,bkc->bc", s1, nodal)
    b = np.einsum("k,bkc->bc", s2, nodal)

    na = np.linalg.norm(a, axis=-1)
    if np.any(na <= DEGENERACY_THRESHOLD):
        raise DegenerateTangentError(
            f"centerline tangent norm {na.min():.3e} at a quadrature point"
        )
    ahat = a / na[:, None]

    eps = na - 1.0
    deps = np.einsum("k,bc->bkc", s1, ahat).reshape(-1, 8)
    proj = np.eye(2)[None, :, :] - np.einsum("bc,bd->bcd", ahat, ahat)
    d2eps = np.einsum("k,l,bcd->bkcld", s1, s1, proj / na[:, None, None]).reshape(-1, 8, 8)

    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    n2 = na**2
    eb = np.einsum("cd,bd->bc", _EPERP, b)
    ea_ = np.einsum("cd,bd->bc", _EPERP, a)
    dcross = (
        np.einsum("k,bc->bkc", s1, eb) - np.einsum("k,bc->bkc", s2, ea_)
    ).reshape(-1, 8)
    shape_anti = np.outer(s1, s2) - np.outer(s2, s1)
    d2cross = np.einsum("kl,cd->kcld", shape_anti, _EPERP).reshape(8, 8)

    dn2 = 2.0 * np.einsum("k,bc->bkc", s1, a).reshape(-1, 8)
    d2n2 = 2.0 * np.einsum("kl,cd->kcld", np.outer(s1, s1), np.eye(2)).reshape(8, 8)

    kappa = cross / n2
    dkappa = dcross / n2[:, None] - (cross / n2**2)[:, None] * dn2
    d2kappa = (
        d2cross[None, :, :] / n2[:, None, None]
        - (
            np.einsum("bi,bj->bij", dcross, dn2)
            + np.einsum("bi,bj->bij", dn2, dcross)
        )
        / (n2**2)[:, None, None]
        - (cross / n2**2)[:, None, None] * d2n2[None, :, :]
        + (2.0 * cross / n2**3)[:, None, None] * np.einsum("bi,bj->bij", dn2, dn2)
    )

    return eps, deps, d2eps, kappa, dkappa, d2kappa


@lru_cache(maxsize=64)
def _internal_rule(n_gauss, length0):
    xi, w = gauss_rule(n_gauss)
    return xi, w, hermite_shapes(xi, length0)


def internal_energy_force_tangent_batch(nodal, length0, ea, ei, n_gauss=N_GAUSS_INTERNAL):
    """Internal energy, forces and tangent for B same-length elements.

    ``nodal`` has shape (B, 4, 2). Returns (energy[B], f[B, 8], k[B, 8, 8]).
    """
    nodal = np.asarray(nodal, dtype=float)
    if nodal.ndim == 2:
        nodal = nodal[None]
    n_batch = nodal.shape[0]
    xi, w, (s0_all, s1_all, s2_all) = _internal_rule(n_gauss, length0)
    jac = length0 / 2.0

    energy = np.zeros(n_batch)
    force = np.zeros((n_batch, 8))
    tangent = np.zeros((n_batch, 8, 8))
    for g in range(len(xi)):
        eps, deps, d2eps, kap, dkap, d2kap = _strain_terms(s1_all[g], s2_all[g], nodal)
        wg = w[g] * jac
        energy += 0.5 * wg * (ea * eps**2 + ei * kap**2)
        force += wg * (ea * eps[:, None] * deps + ei * kap[:, None] * dkap)
        tangent += wg * (
            ea
            * (np.einsum("bi,bj->bij", deps, deps) + eps[:, None, None] * d2eps)
            + ei
            * (np.einsum("bi,bj->bij", dkap, dkap) + kap[:, None, None] * d2kap)
        )
    return energy, force, tangent


def element_energy_force_tangent(element, q_elem, n_gauss=N_GAUSS_INTERNAL):
    """Energy, internal force 8-vector and 8x8 tangent of one element."""
    nodal = np.asarray(q_elem, dtype=float).reshape(1, 4, 2)
    energy, force, tangent = internal_energy_force_tangent_batch(
        nodal, element.length0, element.ea, element.ei, n_gauss
    )
    return energy[0], force[0], tangent[0]


def verify_tangent(element, q_elem, step=1e-7):
    """Max relative mismatch between the analytic tangent and central finite
    differences of the internal force."""
    q_elem = np.asarray(q_elem, dtype=float)
    _, _, k_analytic = element_energy_force_tangent(element, q_elem)
    k_fd = np.zeros((8, 8))
    for j in range(8):
        dq = np.zeros(8)
        dq[j] = step
        _, f_plus, _ = element_energy_force_tangent(element, q_elem + dq)
        _, f_minus, _ = element_energy_force_tangent(element, q_elem - dq)
        k_fd[:, j] = (f_plus - f_minus) / (2.0 * step)
    scale = np.abs(k_analytic).max()
    if scale == 0.0:
        scale = 1.0
    return np.abs(k_fd - k_analytic).max() / scale
