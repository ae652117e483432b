"""Solver oracles: patch test, closed-form energies, the two stiffness
limits of the micromorphic model, bounded-stiffness ordering, laminate
closed forms and finite-difference checks of the parameter sensitivities."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from micromorph.fem import (
    AffineLoadCase,
    RmmOperator,
    SingularSystemError,
    energy_sensitivities,
    solve_elasticity,
    solve_rmm,
    theta_to_params,
)
from micromorph.geometry import paper_like_cell, solid_square_cell
from micromorph.mesh import build_mesh
from micromorph.tensors import RmmStaticParams, TetragonalElasticity

GPA = 1e9
BASE = TetragonalElasticity.isotropic(lam=51.08 * GPA, mu=26.32 * GPA)


def quadratic_form_energy(c: TetragonalElasticity, strain: np.ndarray, area: float):
    """1/2 eps:C:eps * area for a uniform strain (the affine-solution energy)."""
    eps = np.array([strain[0, 0], strain[1, 1], 2.0 * strain[0, 1]])
    return 0.5 * float(eps @ c.voigt() @ eps) * area


@pytest.fixture(scope="module")
def unit_mesh():
    return build_mesh(solid_square_cell(l=1e-3), n_cells=1, resolution=8)


class TestElasticity:
    def test_patch_affine_exact(self, unit_mesh):
        load = AffineLoadCase(np.array([[0.003, 0.001], [0.001, -0.002]]), "mixed")
        u, energy = solve_elasticity(unit_mesh, BASE, load)
        xy = unit_mesh.node_coords
        assert_allclose(u, xy @ load.strain.T, atol=1e-18)
        ref = quadratic_form_energy(BASE, load.strain, (1e-3) ** 2)
        assert_allclose(energy, ref, rtol=1e-13)

    def test_volumetric_closed_form(self, unit_mesh):
        # 1/2 * 4(lam+mu) * 1e-4 * 1e-6 J/m for eps = 0.01 I on a 1 mm cell
        _, energy = solve_elasticity(unit_mesh, BASE, AffineLoadCase.volumetric(0.01))
        ref = 0.5 * 4.0 * (BASE.lam + BASE.mu) * 1e-4 * 1e-6
        assert_allclose(energy, ref, rtol=1e-13)

    def test_all_void_raises(self):
        geom = solid_square_cell()
        mesh = build_mesh(geom, 1, 4)
        object.__setattr__(mesh, "solid", np.zeros_like(mesh.solid))
        with pytest.raises(SingularSystemError):
            solve_elasticity(mesh, BASE, AffineLoadCase.volumetric())

    def test_laminate_axial_voigt_exact(self):
        """Layers normal to y, nu = 0 phases, load along x: the affine field
        solves the problem exactly and the energy is the arithmetic mean."""
        mesh = build_mesh(solid_square_cell(l=1e-3), 1, 8)
        mu1, mu2 = 10.0 * GPA, 40.0 * GPA
        fam = np.zeros((mesh.ny, mesh.nx, 3))
        for ey in range(mesh.ny):
            mu = mu1 if ey < mesh.ny // 2 else mu2
            fam[ey, :] = (0.0, mu, mu)
        load = AffineLoadCase(np.diag([0.01, 0.0]), "uniaxial")
        _, energy = solve_elasticity(mesh, fam, load)
        c_mean = 2.0 * 0.5 * (mu1 + mu2)  # <lam + 2 mu> with lam = 0
        ref = 0.5 * c_mean * 1e-4 * 1e-6
        assert_allclose(energy, ref, rtol=1e-12)

    def test_laminate_transverse_bounded_below_by_reuss(self):
        """Across-layer loading with full Dirichlet data exceeds the Reuss
        energy (boundary layers only stiffen) and approaches it for larger
        specimens."""
        mu1, mu2 = 10.0 * GPA, 20.0 * GPA
        reuss = 2.0 / (0.5 / mu1 + 0.5 / mu2)
        load = AffineLoadCase(np.diag([0.01, 0.0]), "uniaxial")
        ratios = []
        for n in (1, 3):
            mesh = build_mesh(solid_square_cell(l=1e-3), n, 8)
            fam = np.zeros((mesh.ny, mesh.nx, 3))
            for ex in range(mesh.nx):
                mu = mu1 if (ex % 8) < 4 else mu2
                fam[:, ex] = (0.0, mu, mu)
            _, energy = solve_elasticity(mesh, fam, load)
            ref = 0.5 * reuss * 1e-4 * (n * 1e-3) ** 2
            ratios.append(energy / ref)
        assert ratios[0] > 1.0
        assert ratios[1] < ratios[0]
        assert ratios[1] == pytest.approx(1.0, rel=0.05)


def _limit_params(c: TetragonalElasticity, mu_lc2: float, mu_c=0.5 * GPA):
    return RmmStaticParams(c_e=c, c_micro=c, mu_c=mu_c, mu_lc2=mu_lc2)


class TestRmmLimits:
    @pytest.mark.parametrize("order", [1, 2])
    def test_small_length_scale_reaches_macro(self, unit_mesh, order):
        c = TetragonalElasticity(lam=5.0 * GPA, mu=3.0 * GPA, mu_star=2.0 * GPA)
        mu_lc2 = 1e-12 * (c.mu / 2.0) * (1e-3) ** 2
        params = _limit_params(c, mu_lc2)
        load = AffineLoadCase.deviatoric(0.01)
        # the small-L_c limit is boundary-condition independent; the free
        # (natural) condition avoids the consistent-BC boundary layer
        _, e_rmm = solve_rmm(unit_mesh, params, load, consistent_bc=False, order=order)
        macro = TetragonalElasticity.from_families(c.families / 2.0)
        _, e_macro = solve_elasticity(unit_mesh, macro, load)
        assert_allclose(e_rmm, e_macro, rtol=1e-2)

    @pytest.mark.parametrize("order", [1, 2])
    def test_large_length_scale_reaches_micro(self, unit_mesh, order):
        c = TetragonalElasticity(lam=5.0 * GPA, mu=3.0 * GPA, mu_star=2.0 * GPA)
        mu_lc2 = 1e6 * (c.mu / 2.0) * (1e-3) ** 2
        params = _limit_params(c, mu_lc2)
        load = AffineLoadCase.shear(0.01)
        _, e_rmm = solve_rmm(unit_mesh, params, load, consistent_bc=True, order=order)
        _, e_micro = solve_elasticity(unit_mesh, c, load)
        assert_allclose(e_rmm, e_micro, rtol=1e-2)

    def test_bounded_stiffness_and_monotonicity(self, unit_mesh):
        c = TetragonalElasticity(lam=5.0 * GPA, mu=3.0 * GPA, mu_star=2.0 * GPA)
        macro = TetragonalElasticity.from_families(c.families / 2.0)
        load = AffineLoadCase.shear(0.01)
        _, e_macro = solve_elasticity(unit_mesh, macro, load)
        _, e_micro = solve_elasticity(unit_mesh, c, load)
        mu_macro_l2 = (c.mu / 2.0) * (1e-3) ** 2
        op = RmmOperator(unit_mesh, order=2, consistent_bc=True)
        energies = []
        for scale in [1e-2, 1e-1, 1.0, 1e1, 1e2]:
            params = _limit_params(c, scale * mu_macro_l2)
            energies.append(op.solve(params, load).energy)
        energies = np.asarray(energies)
        slack = 1e-9 * e_micro
        assert np.all(energies >= e_macro - slack)
        assert np.all(energies <= e_micro + slack)
        assert np.all(np.diff(energies) >= -slack)

    def test_affine_pair_kinematics(self, unit_mesh):
        """With P = grad(u) for affine u the relative-distortion measures
        vanish, the curl of the interpolated P is zero and the displacement
        block of the discrete residual vanishes; the microdistortion block
        carries exactly the micro stress source."""
        c = TetragonalElasticity(lam=5.0 * GPA, mu=3.0 * GPA, mu_star=2.0 * GPA)
        params = _limit_params(c, 1e3)
        load = AffineLoadCase(np.array([[0.004, 0.001], [0.001, -0.003]]), "mixed")
        op = RmmOperator(unit_mesh, order=2, consistent_bc=True)

        # assemble the full operator once via its pieces
        from micromorph.fem import piece_coefficients

        K_el = np.einsum("m,mij->ij", piece_coefficients(params), op.piece_stack)
        data_u = op.system.unique_data(K_el)
        blocks = {name: op.system.block(data_u, name) for name in ("ff", "fp", "pp")}

        # build d with u affine everywhere and P = interpolated strain
        n = op.dofmap.n_total
        d = np.zeros(n)
        xy = unit_mesh.node_coords
        d[: op.dofmap.n_u] = (xy @ load.strain.T).reshape(-1)
        for row in range(2):
            for edge_id in range(unit_mesh.n_edges):
                ends = unit_mesh.edge_endpoints(edge_id)
                tang = ends[1] - ends[0]
                length = np.linalg.norm(tang)
                target = load.strain[row] @ (tang / length)
                dofs = op.dofmap.p_edge_dofs(np.array([edge_id]), row)
                d[dofs[0]] = target * length  # zeroth moment; first moment = 0
            # interior moments of the constant row (cx, cy): the pulled-back
            # components are (hx/2) cx and (hy/2) cy, tested against {1, x}
            # and {1, y} respectively
            cx, cy = load.strain[row]
            base = op.dofmap.n_u + row * op.dofmap.n_p_row + 2 * unit_mesh.n_edges
            for elem in range(unit_mesh.n_elements):
                d[base + 4 * elem + 0] = 2.0 * unit_mesh.hx * cx
                d[base + 4 * elem + 2] = 2.0 * unit_mesh.hy * cy

        free, presc = op.system.free_ids, op.system.presc_ids
        residual_free = blocks["ff"] @ d[free] + blocks["fp"] @ d[presc]
        u_rows = free < op.dofmap.n_u
        scale = np.abs(residual_free).max()
        assert np.abs(residual_free[u_rows]).max() < 1e-12 * scale
        # curvature piece energy vanishes: curl of a constant field is zero
        d_els = d[op.dof_table]
        curl_energy = 0.5 * np.einsum(
            "ij,ei,ej->", op.piece_stack[7], d_els, d_els
        )
        # roundoff scale: the same contraction without cancellation
        curl_scale = 0.5 * np.einsum(
            "ij,ei,ej->", np.abs(op.piece_stack[7]), np.abs(d_els), np.abs(d_els)
        )
        assert abs(curl_energy) < 1e-12 * curl_scale
        # relative-distortion pieces vanish too: sym/skew(grad u - P) = 0
        for m in (0, 1, 2, 6):
            e_m = 0.5 * np.einsum("ij,ei,ej->", op.piece_stack[m], d_els, d_els)
            s_m = 0.5 * np.einsum(
                "ij,ei,ej->", np.abs(op.piece_stack[m]), np.abs(d_els), np.abs(d_els)
            )
            assert abs(e_m) < 1e-12 * s_m


class TestSensitivities:
    def test_curvature_sensitivity_nonnegative(self, unit_mesh):
        params = theta_to_params(
            [3.0 * GPA, 2.0 * GPA, 5.0 * GPA, 0.4 * GPA, 800.0],
            TetragonalElasticity(lam=2.0 * GPA, mu=1.0 * GPA, mu_star=0.8 * GPA),
        )
        grad = energy_sensitivities(unit_mesh, params, AffineLoadCase.shear(0.01))
        assert grad[4] >= 0.0

    @pytest.mark.parametrize("case", ["volumetric", "deviatoric", "shear"])
    def test_matches_central_differences(self, unit_mesh, case):
        macro = TetragonalElasticity(lam=2.0 * GPA, mu=1.0 * GPA, mu_star=0.8 * GPA)
        theta = np.array([3.0 * GPA, 2.5 * GPA, 5.0 * GPA, 0.4 * GPA, 900.0])
        load = getattr(AffineLoadCase, case)(0.01)
        op = RmmOperator(unit_mesh, order=2, consistent_bc=True)
        _, grad = op.energy_and_gradient(theta_to_params(theta, macro), load)
        for j in range(5):
            h = 1e-6 * theta[j]
            tp = theta.copy()
            tp[j] += h
            tm = theta.copy()
            tm[j] -= h
            fd = (
                op.solve(theta_to_params(tp, macro), load).energy
                - op.solve(theta_to_params(tm, macro), load).energy
            ) / (2 * h)
            assert_allclose(grad[j], fd, rtol=1e-4, atol=abs(fd) * 1e-4 + 1e-18)

    def test_stiff_coupling_approaches_pure_micro_derivative(self):
        """With a very stiff coupling tensor the energy tends to the micro
        elasticity energy, so dPi/dmu_micro approaches the derivative of
        the classical micro energy."""
        mesh = build_mesh(solid_square_cell(l=1e-3), 1, 8)
        load = AffineLoadCase.deviatoric(0.01)
        h = 1e-4 * GPA
        micro_hi = TetragonalElasticity(lam=5 * GPA, mu=3 * GPA + h, mu_star=2 * GPA)
        micro_lo = TetragonalElasticity(lam=5 * GPA, mu=3 * GPA - h, mu_star=2 * GPA)
        _, e_hi = solve_elasticity(mesh, micro_hi, load)
        _, e_lo = solve_elasticity(mesh, micro_lo, load)
        fd_classical = (e_hi - e_lo) / (2 * h)

        stiff = TetragonalElasticity(lam=5e6 * GPA, mu=3e6 * GPA, mu_star=2e6 * GPA)
        params = RmmStaticParams(
            c_e=stiff,
            c_micro=TetragonalElasticity(lam=5 * GPA, mu=3 * GPA, mu_star=2 * GPA),
            mu_c=0.3 * GPA,
            mu_lc2=1e3,
        )
        op = RmmOperator(mesh, order=2, consistent_bc=True)
        sol = op.solve(params, load, with_pieces=True)
        # direct partial wrt mu_micro is the mu_micro piece energy
        dmu_micro = sol.piece_energies[4]
        assert_allclose(dmu_micro, fd_classical, rtol=1e-3)


class TestMeshBuild:
    def test_all_solid_counts(self):
        mesh = build_mesh(solid_square_cell(), 1, 4)
        assert mesh.n_elements == 16
        assert mesh.solid.all()

    def test_tiling_matches_single_cell(self):
        geom = paper_like_cell()
        m1 = build_mesh(geom, 1, 20)
        m2 = build_mesh(geom, 2, 20)
        tiled = np.tile(m1.solid, (2, 2))
        assert np.array_equal(m2.solid, tiled)

    def test_misaligned_geometry_rejected(self):
        from micromorph.mesh import MeshResolutionError

        geom = paper_like_cell()  # needs h dividing 0.05 mm
        with pytest.raises(MeshResolutionError):
            build_mesh(geom, 1, 8)
