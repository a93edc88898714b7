"""Self-contained property checks behind the ``verify`` subcommand.

Each check returns (name, passed, detail). The suite covers consistency of
analytic derivatives with finite differences, rigid-body invariance, mutual
force balance, penalty-law continuity, quadrature self-convergence and the
cutoff schedule's equivalence to brute force, using the laws and meshes of
the supplied configuration where applicable.
"""

import numpy as np

from . import scenario
from .beam import HermiteElement, element_energy_force_tangent, verify_tangent
from .contact import penalty_pressure
from .interaction import (
    SectionQuadrature,
    integrate_pair,
    interaction_pair_schedule,
)


def _beam_tangent_check(config, rng):
    mesh_len = config.fiber.length / config.fiber.n_elements
    ea = config.fiber.youngs_modulus * np.pi * config.fiber.radius**2
    ei = config.fiber.youngs_modulus * np.pi * config.fiber.radius**4 / 4
    elem = HermiteElement(nodes=(0, 1), length0=mesh_len, ea=ea, ei=ei)
    q0 = np.array([0.0, 0.0, 0.0, 1.0, 0.0, mesh_len, 0.0, 1.0])
    err = max(
        verify_tangent(elem, q0 + 0.05 * rng.standard_normal(8), step=1e-7)
        for _ in range(5)
    )
    return "beam-tangent-fd", err < 1e-6, f"max rel err {err:.2e}"


def _beam_invariance_check(config, rng):
    mesh_len = config.fiber.length / config.fiber.n_elements
    ea = config.fiber.youngs_modulus * np.pi * config.fiber.radius**2
    ei = config.fiber.youngs_modulus * np.pi * config.fiber.radius**4 / 4
    elem = HermiteElement(nodes=(0, 1), length0=mesh_len, ea=ea, ei=ei)
    q = np.array([0.0, 0.0, 0.0, 1.0, 0.0, mesh_len, 0.0, 1.0])
    q += 0.05 * rng.standard_normal(8)
    e_ref, _, _ = element_energy_force_tangent(elem, q)
    worst = 0.0
    for _ in range(10):
        angle = rng.uniform(-np.pi, np.pi)
        shift = rng.uniform(-3, 3, 2)
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        nodal = q.reshape(4, 2).copy()
        nodal[0] = rot @ nodal[0] + shift
        nodal[2] = rot @ nodal[2] + shift
        nodal[1] = rot @ nodal[1]
        nodal[3] = rot @ nodal[3]
        e_rot, _, _ = element_energy_force_tangent(elem, nodal.ravel())
        worst = max(worst, abs(e_rot - e_ref) / max(abs(e_ref), 1e-300))
    return "beam-rigid-body-invariance", worst < 1e-10, f"max rel drift {worst:.2e}"


def _pair_setup(config):
    law, _ = scenario.build_laws(config)
    if law is None:
        return None, None, None
    length = config.fiber.length / config.fiber.n_elements
    quad = SectionQuadrature(
        config.interaction.quadrature.n_segments, config.interaction.quadrature.n_gp
    )
    if config.interaction.type == "lennard_jones":
        gap = 2.0 * 8.3913e-4
    else:
        gap = config.fiber.radius / 2
    d = 2 * config.fiber.radius + gap
    qa = np.array([0.0, 0.0, 0.0, 1.0, 0.0, length, 0.0, 1.0])
    qb = np.array([d, 0.0, 0.0, 1.0, d, length, 0.0, 1.0])
    return law, quad, (length, qa, qb)


def _pair_gradient_check(config, rng):
    law, quad, geom = _pair_setup(config)
    if law is None:
        return "pair-gradient-fd", True, "no interaction law configured"
    length, qa, qb = geom
    qa = qa + 1e-4 * rng.standard_normal(8)
    qb = qb + 1e-4 * rng.standard_normal(8)
    _, force, _ = integrate_pair(length, length, qa, qb, law, quad)
    h = 1e-8
    worst = 0.0
    scale = np.abs(force).max()
    for idx in rng.choice(16, 6, replace=False):
        da, db = np.zeros(8), np.zeros(8)
        (da if idx < 8 else db)[idx % 8] = h
        ep, _, _ = integrate_pair(length, length, qa + da, qb + db, law, quad)
        em, _, _ = integrate_pair(length, length, qa - da, qb - db, law, quad)
        worst = max(worst, abs((ep - em) / (2 * h) - force[idx]) / scale)
    return "pair-gradient-fd", worst < 1e-6, f"max rel err {worst:.2e}"


def _force_balance_check(config, rng):
    law, quad, geom = _pair_setup(config)
    if law is None:
        return "mutual-force-balance", True, "no interaction law configured"
    length, qa, qb = geom
    qa = qa + 1e-4 * rng.standard_normal(8)
    qb = qb + 1e-4 * rng.standard_normal(8)
    _, force, _ = integrate_pair(length, length, qa, qb, law, quad)
    fa = force[:8].reshape(4, 2)[[0, 2]].sum(axis=0)
    fb = force[8:].reshape(4, 2)[[0, 2]].sum(axis=0)
    rel = np.abs(fa + fb).max() / np.abs(force).max()
    return "mutual-force-balance", rel < 1e-10, f"net/max {rel:.2e}"


def _penalty_knot_check(config, rng):
    if not config.contact.enabled:
        return "penalty-knot-continuity", True, "contact disabled"
    _, claw = scenario.build_laws(config)
    h = 1e-12
    p_hi = penalty_pressure(claw.gbar - h, claw)[0]
    p0_hi = penalty_pressure(+h, claw)[0]
    p0_lo = penalty_pressure(-h, claw)[0]
    jump_outer = abs(p_hi)  # pressure at the outer knot tends to zero
    jump_zero = abs(p0_hi - p0_lo)
    passed = jump_outer < 1e-9 * claw.penalty and jump_zero < 1e-9 * claw.penalty
    return "penalty-knot-continuity", passed, (
        f"outer {jump_outer:.2e}, zero {jump_zero:.2e}"
    )


def _quadrature_convergence_check(config, rng):
    law, quad, geom = _pair_setup(config)
    if law is None:
        return "quadrature-self-convergence", True, "no interaction law configured"
    length, qa, qb = geom
    values = []
    for refine in (1, 2, 4):
        rule = SectionQuadrature(quad.n_segments * refine, quad.n_points)
        e, _, _ = integrate_pair(length, length, qa, qb, law, rule)
        values.append(e)
    d1 = abs(values[1] - values[0])
    d2 = abs(values[2] - values[1])
    passed = d2 <= d1 + 1e-300
    return "quadrature-self-convergence", passed, f"changes {d1:.2e} -> {d2:.2e}"


def _cutoff_schedule_check(config, rng):
    law, _ = scenario.build_laws(config)
    if law is None or law.cutoff_radius is None:
        return "cutoff-schedule-brute-force", True, "no cutoff configured"
    n = config.fiber.n_elements
    length = config.fiber.length
    y = np.linspace(0, length, n + 1)
    nodes_a = np.column_stack([np.zeros(n + 1), y])
    nodes_b = np.column_stack([np.full(n + 1, 2 * config.fiber.radius + 1e-3), y])
    pairs = interaction_pair_schedule(nodes_a, nodes_b, law)
    kept = {(int(a), int(b)) for a, b in pairs}
    # every pair not kept must be fully beyond the cutoff at quadrature level
    quad = SectionQuadrature(
        config.interaction.quadrature.n_segments, config.interaction.quadrature.n_gp
    )
    ele_len = length / n
    worst = 0.0
    for ia in range(n):
        for ib in range(n):
            if (ia, ib) in kept or abs(ia - ib) > 8:
                continue
            qa = np.concatenate([nodes_a[ia], [0, 1], nodes_a[ia + 1], [0, 1]])
            qb = np.concatenate([nodes_b[ib], [0, 1], nodes_b[ib + 1], [0, 1]])
            _, force, _ = integrate_pair(ele_len, ele_len, qa, qb, law, quad)
            worst = max(worst, np.abs(force).max())
    return "cutoff-schedule-brute-force", worst <= 1e-10, f"dropped-pair force {worst:.2e}"


def run_property_suite(config):
    rng = np.random.default_rng(20260809)
    checks = (
        _beam_tangent_check,
        _beam_invariance_check,
        _pair_gradient_check,
        _force_balance_check,
        _penalty_knot_check,
        _quadrature_convergence_check,
        _cutoff_schedule_check,
    )
    return [check(config, rng) for check in checks]
