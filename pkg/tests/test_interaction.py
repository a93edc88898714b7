"""Section-pair laws, their derivatives, and the nested pair integration."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from fiberpeel.interaction import (
    ElectrostaticLaw,
    LennardJonesLaw,
    SectionQuadrature,
    SingularSeparationError,
    REPULSIVE_DISK_CONSTANT,
    VDW_DISK_CONSTANT,
    disk_pair_constant,
    electrostatic_section_potential,
    integrate_pair,
    interaction_pair_schedule,
    lj_parallel_equilibrium_gap,
    lj_section_force,
    repulsive_lj_section_potential,
    vdw_section_potential,
)

R = 0.02


def elstat_law(sigma2=-1.0):
    return ElectrostaticLaw(sigma1=1.0, sigma2=sigma2, k_coulomb=0.1, radius1=R, radius2=R)


def lj_law(**kwargs):
    params = dict(rho1=1.0, rho2=1.0, k_vdw=-1e-7, k_rep=5e-25, radius1=R, radius2=R)
    params.update(kwargs)
    return LennardJonesLaw(**params)


def parallel_elements(gap, length=0.3125):
    """Two straight vertical elements side by side at surface gap ``gap``."""
    d = 2 * R + gap
    qa = np.array([0.0, 0.0, 0.0, 1.0, 0.0, length, 0.0, 1.0])
    qb = np.array([d, 0.0, 0.0, 1.0, d, length, 0.0, 1.0])
    return qa, qb


class TestDiskConstants:
    def test_inverse_six_constant_exact(self):
        assert disk_pair_constant(6) == pytest.approx(3.0 * math.pi**2 / 256.0, rel=1e-14)
        assert VDW_DISK_CONSTANT == pytest.approx(disk_pair_constant(6), rel=1e-14)

    def test_inverse_twelve_constant_rounds_to_quoted(self):
        c12 = disk_pair_constant(12)
        assert float(f"{c12:.3g}") == REPULSIVE_DISK_CONSTANT


class TestElectrostaticLaw:
    def test_reference_value(self):
        pot, _, _ = electrostatic_section_potential(0.05, elstat_law())
        assert pot == pytest.approx(-0.0315827, rel=1e-5)

    def test_inverse_first_power_scaling(self):
        law = elstat_law()
        pot1, _, _ = electrostatic_section_potential(0.05, law)
        pot2, _, _ = electrostatic_section_potential(0.10, law)
        assert pot2 == pytest.approx(pot1 / 2.0, rel=1e-14)

    def test_sign_flip_with_charge(self):
        pot_m, _, _ = electrostatic_section_potential(0.05, elstat_law(sigma2=-1.0))
        pot_p, _, _ = electrostatic_section_potential(0.05, elstat_law(sigma2=+1.0))
        assert pot_p == pytest.approx(-pot_m, rel=1e-14)

    def test_rejects_nonpositive_distance(self):
        with pytest.raises(SingularSeparationError):
            electrostatic_section_potential(0.0, elstat_law())

    def test_derivatives_consistent(self):
        law = elstat_law()
        h = 1e-7
        for d in (0.045, 0.08, 0.3):
            _, d1, d2 = law.evaluate(d)
            pp, d1p, _ = law.evaluate(d + h)
            pm, d1m, _ = law.evaluate(d - h)
            assert d1 == pytest.approx((pp - pm) / (2 * h), rel=1e-7)
            assert d2 == pytest.approx((d1p - d1m) / (2 * h), rel=1e-7)


class TestLennardJonesLaw:
    def test_vdw_reference_value(self):
        pot, _, _ = vdw_section_potential(1e-3, lj_law())
        assert pot == pytest.approx(-5.1722e-2, rel=1e-4)

    def test_vdw_power_scaling(self):
        law = lj_law()
        p1, _, _ = vdw_section_potential(1e-3, law)
        p2, _, _ = vdw_section_potential(2e-3, law)
        assert p2 / p1 == pytest.approx(2.0**-2.5, rel=1e-12)

    def test_vdw_zero_prefactor(self):
        pot, d1, d2 = vdw_section_potential(1e-3, lj_law(k_vdw=-1e-300))
        assert abs(pot) < 1e-250

    def test_replj_reference_value(self):
        pot, _, _ = repulsive_lj_section_potential(1e-3, lj_law())
        assert pot == pytest.approx(1.1851e-2, rel=1e-4)

    def test_replj_power_scaling(self):
        law = lj_law()
        p1, _, _ = repulsive_lj_section_potential(1e-3, law)
        p2, _, _ = repulsive_lj_section_potential(2e-3, law)
        assert p2 / p1 == pytest.approx(2.0**-8.5, rel=1e-12)

    def test_combined_derivatives_consistent(self):
        law = lj_law()
        for g in (6e-4, 1e-3, 3e-3):
            h = 1e-7 * g
            d = g + 2 * R
            _, d1, d2 = law.evaluate(d)
            pp, d1p, _ = law.evaluate(d + h)
            pm, d1m, _ = law.evaluate(d - h)
            assert d1 == pytest.approx((pp - pm) / (2 * h), rel=1e-7)
            assert d2 == pytest.approx((d1p - d1m) / (2 * h), rel=1e-7)

    def test_invalid_sign_combinations(self):
        with pytest.raises(ValueError):
            lj_law(k_vdw=+1e-7)
        with pytest.raises(ValueError):
            lj_law(k_rep=-5e-25)


class TestEquilibriumGap:
    def test_reference_values(self):
        law = lj_law()
        assert law.point_equilibrium_spacing == pytest.approx(1.4678e-3, rel=1e-4)
        g_eq = lj_parallel_equilibrium_gap(law)
        assert g_eq == pytest.approx(8.3913e-4, rel=1e-4)
        assert g_eq / R == pytest.approx(4.2e-2, abs=0.1e-2)
        assert g_eq / 5.0 == pytest.approx(1.7e-4, abs=0.05e-4)

    def test_sixth_root_scaling(self):
        g1 = lj_parallel_equilibrium_gap(lj_law())
        g2 = lj_parallel_equilibrium_gap(lj_law(k_rep=5e-25 * 2**6))
        assert g2 == pytest.approx(2.0 * g1, rel=1e-12)

    def test_line_force_equilibrium_cross_check(self):
        # integrate the section force over a long opposing parallel fiber and
        # root-find the gap of vanishing net line force; the simple section
        # law's equilibrium deviates from the exact cylinder value by an O(1)
        # factor
        law = lj_law()
        span = 50 * R

        def line_force(g0):
            d0 = g0 + 2 * R

            def integrand(s):
                d = math.hypot(d0, s)
                _, d1, _ = law.evaluate(d)
                return -d1 * d0 / d

            val, _ = quad(integrand, -span, span, limit=200)
            return val

        g_eq = lj_parallel_equilibrium_gap(law)
        g_model = brentq(line_force, 0.5 * g_eq, 2.0 * g_eq, xtol=1e-12)
        ratio = g_model / g_eq
        assert 0.9 < ratio < 1.3

    def test_section_force_root_differs_from_parallel_equilibrium(self):
        law = lj_law()
        root = brentq(lambda g: lj_section_force(g, law)[0], 5e-4, 3e-3, xtol=1e-15)
        closed_form = (
            (17.0 / 5.0) * REPULSIVE_DISK_CONSTANT * law.k_rep
            / (VDW_DISK_CONSTANT * abs(law.k_vdw))
        ) ** (1.0 / 6.0)
        assert root == pytest.approx(closed_form, rel=1e-10)
        g_eq = lj_parallel_equilibrium_gap(law)
        assert abs(root - g_eq) / g_eq > 0.05


class TestRegularization:
    def test_matches_raw_at_and_above_knot(self):
        g_reg = 5e-4
        raw = lj_law()
        reg = lj_law(reg_gap=g_reg)
        for g in (g_reg, 6e-4, 1e-3, 5e-3):
            f_raw = lj_section_force(g, raw)[0]
            f_reg = lj_section_force(g, reg)[0]
            assert f_reg == f_raw  # identical code path above the knot

    def test_linear_extrapolation_below_knot(self):
        g_reg = 5e-4
        reg = lj_law(reg_gap=g_reg)
        f_k, fp_k = lj_section_force(g_reg, reg)
        f_0 = lj_section_force(0.0, reg)[0]
        assert np.isfinite(f_0)
        assert f_0 == pytest.approx(f_k - fp_k * g_reg, rel=1e-12)

    def test_potential_c1_at_knot(self):
        # value and slope agree across the knot: Taylor steps from either
        # side land on the knot values
        g_reg = 5e-4
        reg = lj_law(reg_gap=g_reg)
        d_knot = g_reg + 2 * R
        pot_k, d1_k, d2_k = reg.evaluate(d_knot)
        h = 1e-9
        for side in (-1.0, +1.0):
            pot, d1, _ = reg.evaluate(d_knot + side * h)
            taylor = pot_k + side * h * d1_k + 0.5 * h**2 * d2_k
            assert pot == pytest.approx(taylor, rel=1e-12)
            assert d1 - side * h * d2_k == pytest.approx(d1_k, rel=1e-9)

    def test_unregularized_singularity_guard(self):
        with pytest.raises(SingularSeparationError):
            lj_section_force(-1e-5, lj_law())

    def test_reg_above_equilibrium_needs_override(self):
        g_eq = lj_parallel_equilibrium_gap(lj_law())
        with pytest.raises(ValueError):
            lj_law(reg_gap=1.2 * g_eq)
        with pytest.warns(UserWarning):
            law = lj_law(reg_gap=1.2 * g_eq, allow_reg_above_equilibrium=True)
        assert law.reg_gap == pytest.approx(1.2 * g_eq)


class TestPairIntegration:
    def test_elstat_self_convergence(self):
        qa, qb = parallel_elements(gap=0.01)
        law = elstat_law()
        values = []
        for n_gp in (4, 8, 16, 32):
            e, _, _ = integrate_pair(0.3125, 0.3125, qa, qb, law, SectionQuadrature(2, n_gp))
            values.append(e)
        diffs = [abs(values[i + 1] - values[i]) for i in range(3)]
        assert diffs[0] > diffs[1] > diffs[2]

        # at moderate separation the baseline rule is converged to 1e-8
        qa, qb = parallel_elements(gap=2 * R)
        e_base, _, _ = integrate_pair(0.3125, 0.3125, qa, qb, law, SectionQuadrature(2, 10))
        e_fine, _, _ = integrate_pair(0.3125, 0.3125, qa, qb, law, SectionQuadrature(2, 20))
        assert abs(e_fine - e_base) / abs(e_fine) < 1e-8

    def test_forces_sum_to_zero(self):
        qa, qb = parallel_elements(gap=0.005)
        law = elstat_law()
        _, force, _ = integrate_pair(0.3125, 0.3125, qa, qb, law, SectionQuadrature(2, 10))
        fa = force[:8].reshape(4, 2)
        fb = force[8:].reshape(4, 2)
        # position-DOF rows carry the net force on each element
        net = fa[[0, 2]].sum(axis=0) + fb[[0, 2]].sum(axis=0)
        scale = np.abs(force).max()
        assert np.abs(net).max() < 1e-12 * scale

    def test_cutoff_gives_exact_zero(self):
        law = lj_law(cutoff_radius=5 * R)
        qa, qb = parallel_elements(gap=10 * R)  # beyond cutoff everywhere
        e, force, tangent = integrate_pair(0.078125, 0.078125, qa, qb, law, SectionQuadrature(5, 10))
        assert e == 0.0
        assert np.all(force == 0.0)
        assert np.all(tangent == 0.0)

    def test_forces_match_energy_gradient(self):
        rng = np.random.default_rng(5)
        length = 0.3125
        qa, qb = parallel_elements(gap=0.004, length=length)
        qa = qa + 0.01 * rng.standard_normal(8)
        qb = qb + 0.01 * rng.standard_normal(8)
        law = elstat_law()
        quad_rule = SectionQuadrature(2, 10)
        _, force, _ = integrate_pair(length, length, qa, qb, law, quad_rule)
        h = 1e-7
        for full_idx in range(16):
            da = np.zeros(8)
            db = np.zeros(8)
            if full_idx < 8:
                da[full_idx] = h
            else:
                db[full_idx - 8] = h
            ep, _, _ = integrate_pair(length, length, qa + da, qb + db, law, quad_rule)
            em, _, _ = integrate_pair(length, length, qa - da, qb - db, law, quad_rule)
            fd = (ep - em) / (2 * h)
            assert fd == pytest.approx(force[full_idx], rel=1e-6, abs=1e-12)

    def test_tangent_matches_force_fd(self):
        rng = np.random.default_rng(9)
        length = 0.3125
        qa, qb = parallel_elements(gap=0.004, length=length)
        qa = qa + 0.01 * rng.standard_normal(8)
        qb = qb + 0.01 * rng.standard_normal(8)
        law = elstat_law()
        quad_rule = SectionQuadrature(2, 10)
        _, _, tangent = integrate_pair(length, length, qa, qb, law, quad_rule)
        h = 1e-7
        for full_idx in range(16):
            da = np.zeros(8)
            db = np.zeros(8)
            if full_idx < 8:
                da[full_idx] = h
            else:
                db[full_idx - 8] = h
            _, fp, _ = integrate_pair(length, length, qa + da, qb + db, law, quad_rule)
            _, fm, _ = integrate_pair(length, length, qa - da, qb - db, law, quad_rule)
            fd_col = (fp - fm) / (2 * h)
            assert np.abs(fd_col - tangent[:, full_idx]).max() < 1e-6 * np.abs(tangent).max()

    def test_elstat_potential_decays_with_distance(self):
        law = elstat_law()
        length = 0.3125
        mags = []
        for gap in np.linspace(0.005, 0.5, 10):
            qa, qb = parallel_elements(gap=gap, length=length)
            e, _, _ = integrate_pair(length, length, qa, qb, law, SectionQuadrature(2, 10))
            mags.append(abs(e))
        assert all(mags[i] > mags[i + 1] for i in range(9))

    def test_lj_quadrature_self_convergence_at_equilibrium(self):
        # directly opposing sections at the equilibrium gap are the hardest
        # case for the g^-9.5 force kernel; halving segment width keeps
        # reducing the change
        law = lj_law()
        g_eq = lj_parallel_equilibrium_gap(law)
        length = 5.0 / 64.0
        qa, qb = parallel_elements(gap=g_eq, length=length)
        forces = []
        for n_seg in (5, 10, 20, 40):
            _, f, _ = integrate_pair(length, length, qa, qb, law, SectionQuadrature(n_seg, 10))
            forces.append(f)
        diffs = [np.abs(forces[i + 1] - forces[i]).max() for i in range(3)]
        assert diffs[0] > diffs[1] > diffs[2]

    def test_lj_quadrature_refinement(self):
        # slightly above the equilibrium gap (where converged states live)
        # the baseline rule agrees with a 4x refined rule to 1e-6
        law = lj_law()
        g_eq = lj_parallel_equilibrium_gap(law)
        length = 5.0 / 64.0
        qa, qb = parallel_elements(gap=1.5 * g_eq, length=length)
        _, f_base, _ = integrate_pair(length, length, qa, qb, law, SectionQuadrature(5, 10))
        _, f_fine, _ = integrate_pair(length, length, qa, qb, law, SectionQuadrature(20, 10))
        rel = np.abs(f_base - f_fine).max() / np.abs(f_fine).max()
        assert rel < 1e-6


def straight_fiber_nodes(n_ele, length=5.0, x=0.0):
    y = np.linspace(0.0, length, n_ele + 1)
    return np.column_stack([np.full(n_ele + 1, x), y])


class TestPairSchedule:
    def test_no_cutoff_keeps_all_pairs(self):
        nodes_a = straight_fiber_nodes(8)
        nodes_b = straight_fiber_nodes(8, x=0.04)
        law = lj_law(cutoff_radius=None)
        pairs = interaction_pair_schedule(nodes_a, nodes_b, law)
        assert len(pairs) == 64

    def test_far_fibers_near_empty(self):
        nodes_a = straight_fiber_nodes(16)
        nodes_b = straight_fiber_nodes(16, x=6.0)  # separated-branch analog
        law = lj_law(cutoff_radius=5 * R)
        pairs = interaction_pair_schedule(nodes_a, nodes_b, law)
        assert len(pairs) == 0

    def test_banded_schedule_matches_brute_force(self):
        n_ele = 64
        length = 5.0
        nodes_a = straight_fiber_nodes(n_ele, length)
        nodes_b = straight_fiber_nodes(n_ele, length, x=2 * R + 1e-3)
        law = lj_law(cutoff_radius=5 * R)
        pairs = interaction_pair_schedule(nodes_a, nodes_b, law)
        assert len(pairs) < 0.25 * n_ele * n_ele  # banded, not all-pairs
        band = max(abs(ia - ib) for ia, ib in pairs)
        assert band <= 4

        # identical integrated force: pruned pairs carry exactly zero
        ele_len = length / n_ele
        quad_rule = SectionQuadrature(5, 10)
        kept = {(int(a), int(b)) for a, b in pairs}
        total = np.zeros(2)
        total_kept = np.zeros(2)
        for ia in range(n_ele):
            for ib in range(n_ele):
                if abs(ia - ib) > 6:
                    continue  # distance > cutoff + margin by construction
                qa = np.concatenate(
                    [nodes_a[ia], [0, 1], nodes_a[ia + 1], [0, 1]]
                ).astype(float)
                qb = np.concatenate(
                    [nodes_b[ib], [0, 1], nodes_b[ib + 1], [0, 1]]
                ).astype(float)
                _, force, _ = integrate_pair(ele_len, ele_len, qa, qb, law, quad_rule)
                fx = force[[0, 4]].sum()
                total[0] += fx
                if (ia, ib) in kept:
                    total_kept[0] += fx
        assert abs(total[0] - total_kept[0]) <= 1e-10 * max(abs(total[0]), 1e-30)
