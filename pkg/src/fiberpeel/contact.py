"""Frictionless penalty line contact between two fiber meshes.

Quadrature points along the slave fiber are projected onto the master
centerline (multi-start Newton on the orthogonality condition, global minimum
over candidate elements, clamped at the curve ends). The gap
``g = |r1 - r2c| - R1 - R2`` feeds a quadratically regularized linear penalty
law; line-integrated forces are the exact gradient of the penalty potential
and the tangent carries the full linearization of the moving projection
point.

Penalty pressure (slope ``-eps`` in penetration, value and slope zero at the
regularization gap ``gbar``)::

    p(g) = 0                          g >= gbar
    p(g) = eps (gbar - g)^2 / (2 gbar)   0 <= g < gbar
    p(g) = eps (gbar/2 - g)              g < 0
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .beam import hermite_shapes
from .quadrature import segment_rule

PROJECTION_TOL = 1e-13
PROJECTION_MAX_ITER = 50
PROJECTION_SEEDS = 5


@lru_cache(maxsize=64)
def _slave_grid(n_segments, n_points, length0):
    xi, w = segment_rule(n_segments, n_points)
    s0, _, _ = hermite_shapes(xi, length0)
    return xi, w * (length0 / 2.0), s0


@dataclass(frozen=True)
class ContactLaw:
    """Line penalty parameter, regularization gap and the two fiber radii."""

    penalty: float
    gbar: float
    radius1: float
    radius2: float

    def __post_init__(self):
        if self.penalty <= 0.0:
            raise ValueError(f"penalty parameter must be positive, got {self.penalty}")
        if self.gbar <= 0.0:
            raise ValueError(f"regularization gap must be positive, got {self.gbar}")


@dataclass
class GapSample:
    """One slave quadrature point's projection result."""

    slave_arc: float
    slave_point: np.ndarray
    master_element: int
    master_xi: float
    gap: float
    midpoint: np.ndarray
    orthogonality: float
    clamped: bool
    fallback: bool = False


def penalty_pressure(g, law):
    """Contact pressure (force per unit length) and its gap derivative."""
    g = np.asarray(g, dtype=float)
    eps, gbar = law.penalty, law.gbar
    p = np.where(
        g >= gbar,
        0.0,
        np.where(g >= 0.0, eps * (gbar - g) ** 2 / (2.0 * gbar), eps * (gbar / 2.0 - g)),
    )
    dp = np.where(g >= gbar, 0.0, np.where(g >= 0.0, -eps * (gbar - g) / gbar, -eps))
    return p, dp


def penalty_energy(g, law):
    """Penalty potential per unit slave length with first two derivatives;
    the first derivative is ``-p``."""
    g = np.asarray(g, dtype=float)
    eps, gbar = law.penalty, law.gbar
    e = np.where(
        g >= gbar,
        0.0,
        np.where(
            g >= 0.0,
            eps * (gbar - g) ** 3 / (6.0 * gbar),
            eps * (gbar**2 / 6.0 - gbar * g / 2.0 + g**2 / 2.0),
        ),
    )
    p, dp = penalty_pressure(g, law)
    return e, -p, -dp


def _eval_master(xi_flat, elem_flat, master_nodal, length0):
    """Positions and arc-length derivatives of the master curve at flattened
    candidate coordinates."""
    s0, s1, s2 = hermite_shapes(xi_flat, length0)
    nodal = master_nodal[elem_flat]
    r = np.einsum("qk,qkc->qc", s0, nodal)
    rp = np.einsum("qk,qkc->qc", s1, nodal)
    rpp = np.einsum("qk,qkc->qc", s2, nodal)
    return r, rp, rpp


def _point_segment_distance(points, seg_a, seg_b):
    """Distance matrix (N, E) from points to element chords."""
    ab = seg_b - seg_a
    denom = np.einsum("ec,ec->e", ab, ab)
    denom = np.where(denom < 1e-30, 1.0, denom)
    ap = points[:, None, :] - seg_a[None, :, :]
    t = np.clip(np.einsum("nec,ec->ne", ap, ab) / denom, 0.0, 1.0)
    closest = seg_a[None, :, :] + t[:, :, None] * ab[None, :, :]
    return np.linalg.norm(points[:, None, :] - closest, axis=-1)


class ProjectionDiagnostics:
    """Counters for projection robustness reporting."""

    def __init__(self):
        self.fallbacks = 0
        self.newton_iterations = 0


def project_points(points, master_nodal, length0, diagnostics=None):
    """Closest-point projection of ``points`` (N, 2) onto the master curve.

    ``master_nodal`` has shape (E, 4, 2). Returns arrays (element, xi,
    distance, interior, orthogonality, fallback) of length N. Candidates are
    seeded at uniform local coordinates per element, iterated with Newton on
    the orthogonality condition and resolved by the global distance minimum;
    exterior minimizers are clamped to element ends.
    """
    points = np.asarray(points, dtype=float)
    n_pts = len(points)
    n_ele = master_nodal.shape[0]

    # candidate pruning: elements whose chord is close to the per-point best
    chord_dist = _point_segment_distance(points, master_nodal[:, 0], master_nodal[:, 2])
    best = chord_dist.min(axis=1, keepdims=True)
    keep = chord_dist <= best + 2.0 * length0

    pt_idx, el_idx = np.nonzero(keep)
    seeds = np.linspace(-1.0, 1.0, PROJECTION_SEEDS)
    pt_idx = np.repeat(pt_idx, PROJECTION_SEEDS)
    el_idx = np.repeat(el_idx, PROJECTION_SEEDS)
    xi = np.tile(seeds, keep.sum())

    frozen = np.zeros(len(xi), dtype=bool)
    converged = np.zeros(len(xi), dtype=bool)
    for iteration in range(PROJECTION_MAX_ITER):
        work = ~(frozen | converged)
        if not work.any():
            break
        r, rp, rpp = _eval_master(xi[work], el_idx[work], master_nodal, length0)
        u = points[pt_idx[work]] - r
        phi = np.einsum("qc,qc->q", u, rp)
        norm_u = np.linalg.norm(u, axis=1)
        norm_t = np.linalg.norm(rp, axis=1)
        scale = np.maximum(norm_u * norm_t, 1e-30)
        newly_conv = np.abs(phi) / scale < PROJECTION_TOL
        dphi = -norm_t**2 + np.einsum("qc,qc->q", u, rpp)
        safe = np.abs(dphi) > 1e-30
        jac = length0 / 2.0
        step = np.where(safe, -phi / np.where(safe, dphi, 1.0), 0.0) / jac
        new_xi = xi[work] + step
        out = np.abs(new_xi) > 1.5
        work_idx = np.nonzero(work)[0]
        converged[work_idx[newly_conv]] = True
        frozen[work_idx[out | ~safe]] = True
        xi[work_idx] = np.where(newly_conv | out | ~safe, xi[work_idx], new_xi)
        xi[work_idx[out]] = np.clip(new_xi[out], -1.5, 1.5)
        if diagnostics is not None:
            diagnostics.newton_iterations += int(work.sum())

    # resolve: evaluate distance at clamped coordinates plus the two curve
    # ends (interior node minimizers are interior solutions of an adjacent
    # element on the C1 curve)
    xi_cl = np.clip(xi, -1.0, 1.0)
    cand_pt = np.concatenate([pt_idx, np.repeat(np.arange(n_pts), 2)])
    cand_el = np.concatenate(
        [el_idx, np.tile(np.array([0, n_ele - 1]), n_pts)]
    )
    cand_xi = np.concatenate([xi_cl, np.tile(np.array([-1.0, 1.0]), n_pts)])
    r, rp, _ = _eval_master(cand_xi, cand_el, master_nodal, length0)
    u = points[cand_pt] - r
    dist = np.linalg.norm(u, axis=1)
    orth = np.abs(np.einsum("qc,qc->q", u, rp)) / np.maximum(
        dist * np.linalg.norm(rp, axis=1), 1e-30
    )

    order = np.lexsort((dist, cand_pt))
    first = np.searchsorted(cand_pt[order], np.arange(n_pts))
    win = order[first]

    out_el = cand_el[win]
    out_xi = cand_xi[win]
    out_dist = dist[win]
    out_orth = orth[win]
    # a projection is a smooth (non-clamped) minimum when the orthogonality
    # condition holds, including hits exactly on element-boundary nodes of
    # the C1 curve; true end clamps violate it
    interior = out_orth <= 1e-10
    bad = (np.abs(out_xi) < 1.0 - 1e-12) & ~interior
    fallback = np.zeros(n_pts, dtype=bool)
    for n in np.nonzero(bad)[0]:
        el, loc, d_best = _dense_fallback(points[n], master_nodal, length0)
        out_el[n], out_xi[n], out_dist[n] = el, loc, d_best
        fallback[n] = True
        interior[n] = abs(loc) < 1.0 - 1e-12
        if diagnostics is not None:
            diagnostics.fallbacks += 1
    return out_el, out_xi, out_dist, interior, out_orth, fallback


def _dense_fallback(point, master_nodal, length0, n_samples=200):
    """Densely sampled minimization plus golden-section refinement."""
    n_ele = master_nodal.shape[0]
    xi = np.linspace(-1.0, 1.0, n_samples)
    best = (0, 0.0, np.inf)
    for e in range(n_ele):
        r, _, _ = _eval_master(xi, np.full(n_samples, e), master_nodal, length0)
        d = np.linalg.norm(point[None, :] - r, axis=1)
        k = int(np.argmin(d))
        if d[k] < best[2]:
            best = (e, xi[k], d[k])
    e, x0, _ = best
    lo = max(-1.0, x0 - 2.0 / n_samples)
    hi = min(1.0, x0 + 2.0 / n_samples)
    invphi = (np.sqrt(5.0) - 1.0) / 2.0

    def dist_at(x):
        r, _, _ = _eval_master(np.array([x]), np.array([e]), master_nodal, length0)
        return float(np.linalg.norm(point - r[0]))

    a, b = lo, hi
    c, d_ = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = dist_at(c), dist_at(d_)
    for _ in range(60):
        if fc < fd:
            b, d_, fd = d_, c, fc
            c = b - invphi * (b - a)
            fc = dist_at(c)
        else:
            a, c, fc = c, d_, fd
            d_ = a + invphi * (b - a)
            fd = dist_at(d_)
    x_best = (a + b) / 2.0
    return e, x_best, dist_at(x_best)


def closest_point_projection(point, master_nodal, length0):
    """Project one point; returns a GapSample with slave bookkeeping unset."""
    el, xi, dist, interior, orth, fb = project_points(
        np.asarray(point, dtype=float)[None, :], master_nodal, length0
    )
    r, _, _ = _eval_master(np.array([xi[0]]), np.array([el[0]]), master_nodal, length0)
    return GapSample(
        slave_arc=np.nan,
        slave_point=np.asarray(point, dtype=float),
        master_element=int(el[0]),
        master_xi=float(xi[0]),
        gap=float(dist[0]),  # caller subtracts radii when a law is in play
        midpoint=(np.asarray(point, dtype=float) + r[0]) / 2.0,
        orthogonality=float(orth[0]),
        clamped=not bool(interior[0]),
        fallback=bool(fb[0]),
    )


@dataclass
class ContactResult:
    energy: float
    slave_elements: np.ndarray  # (A,)
    master_elements: np.ndarray  # (A,)
    forces: np.ndarray  # (A, 16), slave DOFs first
    tangents: np.ndarray  # (A, 16, 16)
    min_gap: float
    min_gap_arc: float
    samples: list = field(default_factory=list)
    diagnostics: ProjectionDiagnostics = None


def contact_forces(slave_nodal, slave_length0, master_nodal, master_length0,
                   law, quadrature, collect_samples=True):
    """Line-integrated penalty energy, forces and consistent tangent.

    ``slave_nodal`` (Es, 4, 2) and ``master_nodal`` (Em, 4, 2) are current
    element DOF blocks. Each active slave quadrature point yields one
    contribution coupling its slave element and projected master element,
    with the 16-slot ordering (slave DOFs, master DOFs).
    """
    n_slave = slave_nodal.shape[0]
    xi_s, w_jac, s0 = _slave_grid(quadrature.n_segments, quadrature.n_points,
                                  slave_length0)
    pts = np.einsum("ik,ekc->eic", s0, slave_nodal).reshape(-1, 2)
    weights = np.tile(w_jac, n_slave)
    slave_elem = np.repeat(np.arange(n_slave), len(xi_s))
    slave_shape = np.tile(s0, (n_slave, 1))
    slave_arc = (
        slave_elem * slave_length0
        + np.tile((xi_s + 1.0) / 2.0 * slave_length0, n_slave)
    )

    diag = ProjectionDiagnostics()
    el, xi, dist, interior, orth, fb = project_points(
        pts, master_nodal, master_length0, diagnostics=diag
    )
    gap = dist - law.radius1 - law.radius2
    k_min = int(np.argmin(gap))

    active = gap < law.gbar
    energy_density, de_dg, d2e_dg2 = penalty_energy(gap, law)
    energy = float((weights * energy_density).sum())

    idx = np.nonzero(active)[0]
    r_m, rp_m, rpp_m = _eval_master(xi[idx], el[idx], master_nodal, master_length0)
    s0_m, s1_m, _ = hermite_shapes(xi[idx], master_length0)

    u = pts[idx] - r_m
    d = dist[idx]
    nvec = u / d[:, None]
    sr = slave_shape[idx]
    # 8 shape slots of the combined (slave, master) DOF block
    shape8 = np.concatenate([sr, -s0_m], axis=1)
    grad = np.einsum("ak,ac->akc", shape8, nvec).reshape(-1, 16)

    proj = (np.eye(2)[None] - np.einsum("ac,ad->acd", nvec, nvec)) / d[:, None, None]
    hess = np.einsum("ak,al,acd->akcld", shape8, shape8, proj).reshape(-1, 16, 16)

    # moving-projection part, interior projections only
    tau = rp_m
    beta = np.einsum("ac,ac->a", tau, tau) - np.einsum("ac,ac->a", u, rpp_m)
    use = interior[idx] & (np.abs(beta) > 1e-30)
    beta_safe = np.where(np.abs(beta) > 1e-30, beta, 1.0)
    dxi = np.concatenate(
        [
            np.einsum("ak,ac->akc", sr, tau).reshape(-1, 8),
            (
                -np.einsum("ak,ac->akc", s0_m, tau)
                + np.einsum("ak,ac->akc", s1_m, u)
            ).reshape(-1, 8),
        ],
        axis=1,
    ) / beta_safe[:, None]
    corr = (beta / d)[:, None, None] * np.einsum("ai,aj->aij", dxi, dxi)
    hess -= np.where(use[:, None, None], corr, 0.0)

    w_act = weights[idx]
    forces = (w_act * de_dg[idx])[:, None] * grad
    tangents = (w_act * d2e_dg2[idx])[:, None, None] * np.einsum(
        "ai,aj->aij", grad, grad
    ) + (w_act * de_dg[idx])[:, None, None] * hess

    samples = []
    if collect_samples:
        for row, n in enumerate(idx):
            samples.append(
                GapSample(
                    slave_arc=float(slave_arc[n]),
                    slave_point=pts[n],
                    master_element=int(el[n]),
                    master_xi=float(xi[n]),
                    gap=float(gap[n]),
                    midpoint=(pts[n] + r_m[row]) / 2.0,
                    orthogonality=float(orth[n]),
                    clamped=not bool(interior[n]),
                    fallback=bool(fb[n]),
                )
            )
    return ContactResult(
        energy=energy,
        slave_elements=slave_elem[idx],
        master_elements=el[idx],
        forces=forces,
        tangents=tangents,
        min_gap=float(gap[k_min]),
        min_gap_arc=float(slave_arc[k_min]),
        samples=samples,
        diagnostics=diag,
    )


def min_gap_probe(slave_nodal, slave_length0, master_nodal, master_length0,
                  radius_sum, points_per_element=10):
    """Minimum surface gap and its slave arc location, on a light sampling.

    Geometry-only diagnostic used for gap-extrema tracking in runs without
    the penalty law.
    """
    n_slave = slave_nodal.shape[0]
    xi = np.linspace(-1.0, 1.0, points_per_element, endpoint=False)
    s0, _, _ = hermite_shapes(xi, slave_length0)
    pts = np.einsum("ik,ekc->eic", s0, slave_nodal).reshape(-1, 2)
    arcs = (
        np.repeat(np.arange(n_slave), len(xi)) * slave_length0
        + np.tile((xi + 1.0) / 2.0 * slave_length0, n_slave)
    )
    _, _, dist, _, _, _ = project_points(pts, master_nodal, master_length0)
    gaps = dist - radius_sum
    k = int(np.argmin(gaps))
    return float(gaps[k]), float(arcs[k])
