"""Spectral core: projections, norms, and the advection-term identities."""

import numpy as np
import pytest

from intertwine import spectral as sp
from intertwine.spectral import (
    AliasingViolation,
    Grid,
    SpectralField,
    bilinear_B,
    check_field,
    frechet_DB,
    hm_norm,
    inner,
    leray_project,
    norms,
    project_high,
    project_low,
    random_field,
    stokes_apply,
    trilinear_b,
)


class TestGrid:
    def test_rejects_odd_or_tiny_n(self):
        with pytest.raises(ValueError):
            Grid(7)
        with pytest.raises(ValueError):
            Grid(2)

    def test_rejects_bad_dealias_radius(self):
        with pytest.raises(ValueError):
            Grid(12, dealias_radius=5.0)  # beyond n/3
        with pytest.raises(ValueError):
            Grid(12, dealias_radius=0.0)

    def test_default_radius_is_two_thirds_rule(self):
        g = Grid(24)
        assert g.dealias_radius == pytest.approx(8.0)

    def test_low_mode_mask_k1(self, grid16):
        # |k| <= 1 keeps exactly the four unit modes (mean mode carries no data)
        mask = grid16.low_mode_mask(1.0)
        assert int(mask.sum()) == 5  # four unit modes plus k = 0
        assert mask[0, 1] and mask[0, -1] and mask[1, 0] and mask[-1, 0]


class TestLerayProjection:
    def test_gradient_field_is_annihilated(self, grid16, rng):
        # gradients i k phi_k span the projector kernel
        phi = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        raw = np.stack([1j * grid16.kx * phi, 1j * grid16.ky * phi])
        out = leray_project(grid16, raw)
        assert np.abs(out.coeffs).max() < 1e-13 * np.abs(raw).max()

    def test_identity_on_divergence_free(self, grid16, rng):
        u = random_field(grid16, rng)
        again = leray_project(grid16, u.coeffs)
        assert np.array_equal(again.coeffs, u.coeffs) or np.abs(
            again.coeffs - u.coeffs
        ).max() < 1e-15

    def test_single_mode_hand_check(self, grid16):
        # k = (1, 0), u_hat = (1, 1): the projector I - kk^T/|k|^2 keeps (0, 1)
        raw = np.zeros((2, 16, 16), complex)
        raw[:, 0, 1] = 1.0
        raw[:, 0, -1] = 1.0
        out = leray_project(grid16, raw)
        assert out.coeffs[0, 0, 1] == pytest.approx(0.0)
        assert out.coeffs[1, 0, 1] == pytest.approx(1.0)

    def test_idempotent_exactly(self, grid16, rng):
        raw = rng.standard_normal((2, 16, 16)) + 1j * rng.standard_normal((2, 16, 16))
        raw = raw + np.conj(np.roll(raw[:, ::-1, ::-1], (1, 1), axis=(1, 2)))
        once = leray_project(grid16, raw)
        twice = leray_project(grid16, once.coeffs)
        assert np.array_equal(once.coeffs, twice.coeffs)

    def test_output_satisfies_invariants(self, grid16, rng):
        raw = rng.standard_normal((2, 16, 16)) + 1j * rng.standard_normal((2, 16, 16))
        raw = raw + np.conj(np.roll(raw[:, ::-1, ::-1], (1, 1), axis=(1, 2)))
        raw[:, grid16.kx == -8] = 0.0
        raw[:, grid16.ky == -8] = 0.0
        check_field(leray_project(grid16, raw))


class TestStokesPowers:
    def test_single_mode_scaling(self, grid16):
        u = sp.field_from_modes(grid16, [(2, 1, (1.0 / 1j, -2.0 / 1j))])
        Au = stokes_apply(u, 2)
        assert np.allclose(Au.coeffs, 5.0 * u.coeffs)  # |k|^2 = 5

    def test_zero_power_is_identity(self, grid16, rng):
        u = random_field(grid16, rng)
        assert np.array_equal(stokes_apply(u, 0).coeffs, u.coeffs)

    def test_half_power_gives_h1_norm(self, grid16, rng):
        u = random_field(grid16, rng)
        assert stokes_apply(u, 1).l2 == pytest.approx(u.h1, rel=1e-13)

    def test_negative_power_inverts(self, grid16, rng):
        u = random_field(grid16, rng)
        back = stokes_apply(stokes_apply(u, -2), 2)
        assert np.allclose(back.coeffs, u.coeffs, atol=1e-15)


class TestModeProjections:
    def test_k1_ball_content(self, grid16):
        u = sp.field_from_modes(
            grid16, [(1, 0, (0.0, 1.0)), (0, 1, (1.0, 0.0)), (2, 2, (1.0, -1.0))]
        )
        low = project_low(u, 1.0)
        kept = np.argwhere(np.abs(low.coeffs).max(axis=0) > 0)
        mags = [grid16.kmag[tuple(ij)] for ij in kept]
        assert all(m <= 1.0 for m in mags) and len(kept) > 0

    def test_k0_gives_zero_field(self, grid16, rng):
        u = random_field(grid16, rng)
        assert project_low(u, 0.0).l2 == 0.0

    def test_parseval_split(self, grid16, rng):
        u = random_field(grid16, rng)
        lo, hi = project_low(u, 3.0), project_high(u, 3.0)
        assert u.l2**2 == pytest.approx(lo.l2**2 + hi.l2**2, rel=1e-13)
        assert np.array_equal((lo + hi).coeffs, u.coeffs)

    def test_mutual_orthogonality_exact(self, grid16, rng):
        u = random_field(grid16, rng)
        v = random_field(grid16, rng)
        assert inner(project_low(u, 4.0), project_high(v, 4.0)) == 0.0

    def test_idempotent(self, grid16, rng):
        u = random_field(grid16, rng)
        lo = project_low(u, 2.5)
        assert np.array_equal(project_low(lo, 2.5).coeffs, lo.coeffs)


class TestNorms:
    def test_unit_mode_l2_equals_h1(self, grid16):
        u = sp.field_from_modes(grid16, [(1, 0, (0.0, 1.0))])
        t = norms(u)
        assert t.l2 == pytest.approx(t.h1, rel=1e-14)
        assert t.hm[0] == t.l2 and t.hm[1] == t.h1

    def test_bernstein_equality_single_shell(self, grid16):
        # content only at |k| = 2 with N = 2: order-2 norm is exactly N^2 * l2
        u = sp.field_from_modes(grid16, [(0, 2, (1.0 / 1j, 0.0)), (2, 0, (0.0, 0.5))])
        t = norms(u, max_m=2)
        assert t.hm[2] == pytest.approx(4.0 * t.l2, rel=1e-13)

    def test_interpolation_by_direct_summation(self, grid16, rng):
        for _ in range(20):
            u = random_field(grid16, rng, slope=rng.uniform(0.5, 3.0))
            t = norms(u, max_m=2)
            # direct Cauchy-Schwarz on the coefficient sums
            assert t.hm[1] ** 2 <= t.hm[2] * t.hm[0] * (1 + 1e-12)

    def test_poincare_on_batch(self, grid16, rng):
        for _ in range(1000):
            u = random_field(grid16, rng, energy=rng.uniform(0.1, 10.0))
            assert u.l2 <= u.h1 * (1 + 1e-12)

    @pytest.mark.parametrize("N", [1.0, 2.0, 4.0, 8.0])
    def test_bernstein_both_directions(self, rng, N):
        grid = Grid(32)
        u = random_field(grid, rng)
        low, high = project_low(u, N), project_high(u, N)
        for m in range(3):
            for n_ in range(m, 3):
                if low.l2 > 0:
                    assert hm_norm(low, n_) <= N ** (n_ - m) * hm_norm(low, m) * (1 + 1e-12)
                if high.l2 > 0:
                    assert hm_norm(high, m) <= N ** (m - n_) * hm_norm(high, n_) * (1 + 1e-12)


class TestAdvectionTerm:
    def test_shear_self_advection_vanishes(self, grid16):
        shear = sp.field_from_modes(grid16, [(0, 1, (0.5 / 1j, 0.0))])
        assert bilinear_B(shear, shear).l2 < 1e-16

    def test_taylor_green_is_pure_gradient(self, grid16):
        # the unprojected quadratic term is nonzero, its projection vanishes
        tg = sp.taylor_green(grid16, 1.0)
        u_phys = sp.to_physical(tg)
        dvdx = np.real(np.fft.ifft2(1j * grid16.kx * tg.coeffs, norm="forward"))
        dvdy = np.real(np.fft.ifft2(1j * grid16.ky * tg.coeffs, norm="forward"))
        adv = u_phys[0] * dvdx + u_phys[1] * dvdy
        raw = np.fft.fft2(adv, norm="forward") * grid16.dealias_mask
        assert np.abs(raw).max() > 0.01
        assert bilinear_B(tg, tg).l2 < 1e-14

    def test_skew_symmetry_batch(self, grid16, rng):
        for _ in range(25):
            u = random_field(grid16, rng)
            v = random_field(grid16, rng)
            w = random_field(grid16, rng)
            scale = u.h1 * v.h1 * w.h1
            assert abs(trilinear_b(u, v, w) + trilinear_b(u, w, v)) <= 1e-10 * scale
            assert abs(trilinear_b(u, v, v)) <= 1e-10 * u.h1 * v.h1**2

    def test_enstrophy_identities(self, rng):
        grid = Grid(32)
        for _ in range(10):
            u = random_field(grid, rng)
            v = random_field(grid, rng)
            Au, Av = stokes_apply(u, 2), stokes_apply(v, 2)
            assert abs(trilinear_b(u, u, Au)) <= 1e-10 * u.h1**2 * Au.l2
            miracle = (
                trilinear_b(v, v, Au) + trilinear_b(u, v, Av) + trilinear_b(v, u, Av)
            )
            assert abs(miracle) <= 1e-10 * v.h1**2 * Au.l2

    def test_inclusive_boundary_alias_free(self, rng):
        # n divisible by 3 puts integer modes exactly on the two-thirds
        # boundary; the only candidate aliasing pairs there are axis-aligned
        # self-pairs, which incompressibility annihilates, so the inclusive
        # ball stays exact: check against a wrap-free direct convolution
        grid = Grid(24)
        assert grid.dealias_radius == 8.0
        u = random_field(grid, rng, energy=1.0, slope=1.0, kmax=8.0)
        v = random_field(grid, rng, energy=1.0, slope=1.0, kmax=8.0)
        assert np.abs(u.coeffs[:, 0, 8]).max() > 0  # boundary shell populated

        n = grid.n
        idx = np.fft.fftfreq(n, 1.0 / n).astype(int)
        modes = [
            (kx, ky)
            for ky in idx
            for kx in idx
            if 0 < kx * kx + ky * ky <= 64
        ]
        raw = np.zeros_like(u.coeffs)
        for ax, ay in modes:
            ua = u.coeffs[:, ay % n, ax % n]
            for bx, by in modes:
                kx, ky = ax + bx, ay + by
                if kx * kx + ky * ky > 64 or (kx, ky) == (0, 0):
                    continue
                vb = v.coeffs[:, by % n, bx % n]
                raw[:, ky % n, kx % n] += 1j * (ua[0] * bx + ua[1] * by) * vb
        direct = leray_project(grid, raw)
        pseudo = bilinear_B(u, v)
        assert (pseudo - direct).l2 <= 1e-11 * max(direct.l2, 1e-30)

    def test_aliasing_violation_raised(self, grid16, rng):
        u = random_field(grid16, rng)
        bad = u.coeffs.copy()
        bad[:, 0, 7] = 1.0  # |k| = 7 > 16/3
        bad[:, 0, -7] = 1.0
        dirty = leray_project(grid16, bad)
        with pytest.raises(AliasingViolation):
            bilinear_B(dirty, u)

    def test_output_invariants(self, grid16, rng):
        u = random_field(grid16, rng)
        v = random_field(grid16, rng)
        check_field(bilinear_B(u, v))


class TestFrechetDerivative:
    def test_at_self_equals_twice_B(self, grid16, rng):
        u = random_field(grid16, rng)
        lhs = frechet_DB(u, u)
        rhs = 2.0 * bilinear_B(u, u)
        assert (lhs - rhs).l2 <= 1e-13 * rhs.l2

    def test_at_zero_vanishes(self, grid16, rng):
        v = random_field(grid16, rng)
        zero = sp.zero_field(grid16)
        assert frechet_DB(zero, v).l2 == 0.0

    def test_finite_difference_slope(self, grid16, rng):
        # || B(u+e v, u+e v) - B(u,u) - e DB(u)v || should scale as e^2
        u = random_field(grid16, rng)
        v = random_field(grid16, rng)
        gaps = []
        for eps in (1e-3, 1e-4):
            pert = u + eps * v
            gap = (
                bilinear_B(pert, pert) - bilinear_B(u, u) - eps * frechet_DB(u, v)
            ).l2
            gaps.append(gap)
        slope = np.log10(gaps[0] / gaps[1])
        assert slope == pytest.approx(2.0, abs=0.1)


class TestEmpiricalRatios:
    def test_interpolation_ratios_stable_across_n(self, rng):
        """The Ladyzhenskaya/Agmon/Sobolev ratios stay finite and comparable
        between grid sizes; these scans calibrate the working constants."""
        maxima = {}
        for n in (16, 32):
            grid = Grid(n)
            r_l = r_a = r_s = 0.0
            for _ in range(40):
                u = random_field(grid, rng, slope=rng.uniform(0.5, 3.0))
                linf = sp.linf_norm(u)
                r_l = max(r_l, sp.l4_norm(u) ** 2 / (u.h1 * u.l2))
                r_a = max(r_a, linf**2 / (hm_norm(u, 2) * u.l2))
                r_s = max(r_s, linf / (np.sqrt(np.log(grid.dealias_radius)) * u.h1))
            maxima[n] = (r_l, r_a, r_s)
        for i in range(3):
            lo, hi = sorted((maxima[16][i], maxima[32][i]))
            assert np.isfinite(hi)
            assert hi <= 2.0 * lo + 0.1  # same order across resolutions

    def test_random_field_properties(self, rng):
        grid = Grid(32)
        u = random_field(grid, rng, energy=2.5, slope=2.0, kmax=6.0)
        check_field(u)
        assert u.l2 == pytest.approx(2.5, rel=1e-12)
        assert project_high(u, 6.0).l2 == 0.0

    def test_every_operation_preserves_invariants(self, grid16, rng):
        u = random_field(grid16, rng)
        v = random_field(grid16, rng)
        outputs = [
            stokes_apply(u, 2),
            stokes_apply(u, -2),
            stokes_apply(u, 1),
            project_low(u, 3.0),
            project_high(u, 3.0),
            bilinear_B(u, v),
            frechet_DB(u, v),
            sp.dealias(u),
            u + v,
            2.5 * u - v,
        ]
        for out in outputs:
            check_field(out)
