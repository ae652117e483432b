"""Homogenization oracles.

The laminate closed forms (layers normal to x, volume fractions f1/f2):

    C11 = <1/(lam+2mu)>^-1                     (harmonic)
    C12 = C11 <lam/(lam+2mu)>
    C22 = <lam+2mu> - <lam^2/(lam+2mu)> + C12^2/C11
    C33 = <1/mu>^-1                            (harmonic)

are exact; the FEM fields are piecewise linear and representable, so the
periodic solve must reproduce them to solver precision.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from micromorph.fem import AffineLoadCase
from micromorph.geometry import RectOp, UnitCellGeometry, paper_like_cell, solid_square_cell
from micromorph.homogenize import (
    EnergyTable,
    TetragonalSymmetryError,
    homogenize_periodic,
    periodic_effective_matrix,
    reference_energies,
)
from micromorph.tensors import BaseMaterial

GPA = 1e9
BASE = BaseMaterial(lam=51.08 * GPA, mu=26.32 * GPA, rho=2700.0)


def laminate_voigt(phases, fractions):
    """Exact 2D plane-strain laminate tensor, layers normal to x."""
    lam = np.array([p[0] for p in phases])
    mu = np.array([p[1] for p in phases])
    f = np.asarray(fractions)
    m = lam + 2 * mu
    c11 = 1.0 / np.sum(f / m)
    c12 = c11 * np.sum(f * lam / m)
    c22 = np.sum(f * m) - np.sum(f * lam**2 / m) + c12**2 / c11
    c33 = 1.0 / np.sum(f / mu)
    return np.array([[c11, c12, 0.0], [c12, c22, 0.0], [0.0, 0.0, c33]])


def test_homogeneous_cell_returns_base():
    macro = homogenize_periodic(solid_square_cell(), BASE, resolution=8)
    assert_allclose(macro.c_macro.lam, BASE.lam, rtol=1e-10)
    assert_allclose(macro.c_macro.mu, BASE.mu, rtol=1e-10)
    assert_allclose(macro.c_macro.mu_star, BASE.mu, rtol=1e-10)
    assert_allclose(macro.apparent_rho, BASE.rho, rtol=1e-14)


def test_laminate_matches_closed_form():
    """Half/half laminate of two isotropic phases; the periodic fields are
    exactly representable so agreement is to solver precision."""
    geom = solid_square_cell(l=1e-3)
    mesh_res = 8
    # build the laminate by per-element materials through the matrix-level
    # function: emulate with a custom assembly using two phases
    from micromorph.assembly import assemble_classical
    from micromorph.homogenize import _reduction_matrix
    from micromorph.mesh import build_mesh

    phases = [(20.0 * GPA, 10.0 * GPA), (5.0 * GPA, 30.0 * GPA)]
    # fake a geometry-independent check by calling the low-level pipeline
    import micromorph.homogenize as hz

    mesh = build_mesh(geom, 1, mesh_res)
    fam = np.empty((mesh.ny, mesh.nx, 3))
    for ex in range(mesh.nx):
        lam, mu = phases[0] if ex < mesh.nx // 2 else phases[1]
        fam[:, ex] = (lam, mu, mu)

    # replicate periodic_effective_matrix with the laminate material
    import scipy.sparse as sp

    from micromorph.assembly import M_LAM, M_MU, M_MUS, _u_kinematics
    from micromorph.elements import gauss_points
    from micromorph.fem import _factorize

    K, _, dof_table = assemble_classical(mesh, fam)
    supported = np.zeros(mesh.n_nodes, dtype=bool)
    supported[np.unique(dof_table) // 2] = True
    T = _reduction_matrix(mesh, supported, pin_node=0)
    lu = _factorize((T.T @ K @ T).tocsc())

    pts, wts = gauss_points(3)
    B_all, w_all = [], []
    for xi, wx in zip(pts, wts):
        for eta, wy in zip(pts, wts):
            B, _ = _u_kinematics(mesh.hx, mesh.hy, xi, eta)
            B_all.append(B)
            w_all.append(wx * wy * mesh.hx * mesh.hy / 4.0)
    B_all, w_all = np.asarray(B_all), np.asarray(w_all)
    xy = mesh.node_coords
    C_hom = np.zeros((3, 3))
    for col, strain in enumerate(hz._UNIT_STRAINS):
        a = (xy @ strain.T).reshape(-1)
        w_red = lu.solve(-(T.T @ (K @ a)))
        d = a + T @ w_red
        d_els = d[dof_table]
        eps = np.einsum("qij,ej->eqi", B_all, d_els)
        C_els = np.einsum(
            "ef,fij->eij",
            fam.reshape(-1, 3)[mesh.solid.ravel()],
            np.stack([M_LAM, M_MU, M_MUS]),
        )
        sig = np.einsum("eij,eqj->eqi", C_els, eps)
        C_hom[:, col] = np.einsum("q,eqi->i", w_all, sig) / mesh.length**2

    ref = laminate_voigt(phases, [0.5, 0.5])
    assert_allclose(C_hom, ref, rtol=1e-10, atol=1e-10 * ref.max())


def test_paper_cell_effective_constants_are_soft_and_tetragonal():
    macro = homogenize_periodic(paper_like_cell(), BASE, resolution=20)
    c = macro.c_macro
    assert c.is_positive_definite()
    assert_allclose(macro.solid_fraction, 0.55, atol=1e-12)
    # Voigt upper bound: solid fraction times the base constants
    f = macro.solid_fraction
    assert c.mu <= f * BASE.mu
    assert c.mu_star <= f * BASE.mu
    assert c.lam + c.mu <= f * (BASE.lam + BASE.mu)
    # the in-plane shear family is the soft, bending-dominated one for the
    # plus-shaped void (it drives the large shear size-effect)
    assert c.mu_star < 0.05 * BASE.mu
    assert c.mu_star < c.mu


def test_reference_energies_homogeneous_scaling():
    table = reference_energies(
        solid_square_cell(), BASE, n_list=(1, 2), resolution=4
    )
    for i, _label in enumerate(table.labels):
        assert_allclose(
            table.energies[i, 1], 4.0 * table.energies[i, 0], rtol=1e-12
        )
        assert_allclose(table.relative_stiffness[i], 1.0, rtol=1e-10)


def test_reference_energies_decreasing_relative_stiffness():
    table = reference_energies(
        paper_like_cell(), BASE, n_list=(1, 2, 3), resolution=20
    )
    shear = table.relative_stiffness[table.labels.index("shear")]
    assert np.all(np.diff(shear) < 0.0)
    assert np.all(table.relative_stiffness >= 1.0 - 1e-9)


def test_energy_table_csv_roundtrip(tmp_path):
    table = reference_energies(solid_square_cell(), BASE, n_list=(1,), resolution=4)
    path = tmp_path / "energies.csv"
    table.to_csv(path)
    text = path.read_text().splitlines()
    assert text[0] == "mode,n,energy,relative_stiffness"
    assert len(text) == 1 + 3
