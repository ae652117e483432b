"""First-order periodic homogenization and reference size-effect energies.

The effective tensor comes from the standard Hill averaging on one cell:
impose a unit macro strain plus a periodic fluctuation, solve, and average
the stress over the cell area (voids count as zero stress).  Periodicity
is enforced by identifying matching dofs on opposite edges of the
structured grid; one solid node is pinned to remove the translation.

The reference energies are plain heterogeneous elasticity solves of the
n x n specimens under affine Dirichlet data; they are the targets of the
static identification stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import M_LAM, M_MU, M_MUS, assemble_classical, elastic_element_blocks
from .elements import Q2Basis, gauss_points
from .fem import AffineLoadCase, SingularSystemError, _factorize, solve_elasticity
from .geometry import UnitCellGeometry
from .mesh import StructuredMesh, build_mesh
from .tensors import BaseMaterial, TetragonalElasticity

__all__ = [
    "MacroIdentification",
    "TetragonalSymmetryError",
    "periodic_effective_matrix",
    "homogenize_periodic",
    "reference_energies",
    "EnergyTable",
]


class TetragonalSymmetryError(RuntimeError):
    """Homogenized tensor is not tetragonal within tolerance."""


@dataclass(frozen=True)
class MacroIdentification:
    """Effective elasticity and apparent density of the unit-cell."""

    c_macro: TetragonalElasticity
    apparent_rho: float
    solid_fraction: float
    voigt_matrix: np.ndarray


def _periodic_maps(mesh: StructuredMesh, supported_nodes: np.ndarray):
    """Master map for periodic pairing of the Q2 node grid.

    Returns (master_of_node, master_nodes): opposite-edge nodes map to the
    same master; masters exclude the right column and top row.
    """
    gx, gy = mesh.node_grid_shape
    i = np.arange(gx)
    j = np.arange(gy)
    ii, jj = np.meshgrid(i, j, indexing="ij")
    im = np.where(ii == gx - 1, 0, ii)
    jm = np.where(jj == gy - 1, 0, jj)
    node = mesh.node_id(ii, jj).ravel()
    master = mesh.node_id(im, jm).ravel()
    master_of_node = np.empty(mesh.n_nodes, dtype=np.int64)
    master_of_node[node] = master
    # supported slaves must pair with supported masters (tetragonal cells do)
    bad = supported_nodes & ~supported_nodes[master_of_node]
    if np.any(bad):
        raise SingularSystemError(
            "periodic pairing hit a solid/void mismatch on opposite edges"
        )
    return master_of_node


def _reduction_matrix(mesh: StructuredMesh, supported_nodes, pin_node: int):
    """Sparse T with u_full = T u_red for periodic fluctuations.

    Reduced dofs are the supported master-node dofs except the pinned node.
    """
    master_of_node = _periodic_maps(mesh, supported_nodes)
    masters = np.unique(master_of_node[supported_nodes])
    masters = masters[masters != pin_node]
    red_index = {int(m): idx for idx, m in enumerate(masters)}
    rows, cols, vals = [], [], []
    for nid in np.nonzero(supported_nodes)[0]:
        m = int(master_of_node[nid])
        if m == pin_node:
            continue
        idx = red_index[m]
        for comp in range(2):
            rows.append(2 * nid + comp)
            cols.append(2 * idx + comp)
            vals.append(1.0)
    n_full = 2 * mesh.n_nodes
    n_red = 2 * len(masters)
    T = sp.csr_matrix((vals, (rows, cols)), shape=(n_full, n_red))
    return T


_UNIT_STRAINS = (
    np.array([[1.0, 0.0], [0.0, 0.0]]),
    np.array([[0.0, 0.0], [0.0, 1.0]]),
    np.array([[0.0, 0.5], [0.5, 0.0]]),
)


def periodic_effective_matrix(
    geometry: UnitCellGeometry, base: BaseMaterial, resolution: int = 40
):
    """Voigt matrix of the periodically homogenized cell plus metadata.

    Returns (C_hom (3,3), solid_fraction, mesh).  Works for arbitrary
    (also non-tetragonal) cells; the tetragonal reduction happens in
    ``homogenize_periodic``.
    """
    mesh = build_mesh(geometry, n_cells=1, resolution=resolution)
    if not mesh.solid.any():
        raise SingularSystemError("cell is all void")
    fam = np.empty((mesh.ny, mesh.nx, 3))
    fam[:, :] = (base.lam, base.mu, base.mu)
    K, _, dof_table = assemble_classical(mesh, fam)

    supported_nodes = np.zeros(mesh.n_nodes, dtype=bool)
    supported_nodes[np.unique(dof_table) // 2] = True
    pin_node = int(np.nonzero(supported_nodes)[0][0])
    T = _reduction_matrix(mesh, supported_nodes, pin_node)
    K_red = (T.T @ K @ T).tocsc()
    lu = _factorize(K_red)

    # quadrature data shared by every element for the stress average
    pts, wts = gauss_points(3)
    B_all = []
    w_all = []
    for xi, wx in zip(pts, wts):
        for eta, wy in zip(pts, wts):
            from .assembly import _u_kinematics

            B, _ = _u_kinematics(mesh.hx, mesh.hy, xi, eta)
            B_all.append(B)
            w_all.append(wx * wy * mesh.hx * mesh.hy / 4.0)
    B_all = np.asarray(B_all)  # (9, 3, 18)
    w_all = np.asarray(w_all)
    C_base = base.lam * M_LAM + base.mu * M_MU + base.mu * M_MUS
    area = mesh.length**2

    C_hom = np.zeros((3, 3))
    xy = mesh.node_coords
    for col, strain in enumerate(_UNIT_STRAINS):
        a = (xy @ strain.T).reshape(-1)
        w_red = lu.solve(-(T.T @ (K @ a)))
        d = a + T @ w_red
        d_els = d[dof_table]
        eps = np.einsum("qij,ej->eqi", B_all, d_els)
        sig = eps @ C_base.T
        C_hom[:, col] = np.einsum("q,eqi->i", w_all, sig) / area
    return C_hom, mesh.solid_fraction(), mesh


def homogenize_periodic(
    geometry: UnitCellGeometry,
    base: BaseMaterial,
    resolution: int = 40,
    symmetry_rtol: float = 1e-6,
) -> MacroIdentification:
    """Tetragonal effective constants and apparent density of the cell."""
    C, fraction, _ = periodic_effective_matrix(geometry, base, resolution)
    scale = np.abs(C).max()
    asym = np.abs(C - C.T).max()
    off = max(abs(C[0, 2]), abs(C[1, 2]), abs(C[2, 0]), abs(C[2, 1]))
    aniso = abs(C[0, 0] - C[1, 1])
    if asym > symmetry_rtol * scale or off > symmetry_rtol * scale or aniso > symmetry_rtol * scale:
        raise TetragonalSymmetryError(
            f"homogenized tensor not tetragonal: asym={asym/scale:.2e} "
            f"off={off/scale:.2e} aniso={aniso/scale:.2e}"
        )
    lam = 0.5 * (C[0, 1] + C[1, 0])
    mu = 0.25 * (C[0, 0] + C[1, 1]) - 0.5 * lam
    c_macro = TetragonalElasticity(lam=lam, mu=mu, mu_star=C[2, 2])
    if not c_macro.is_positive_definite():
        raise SingularSystemError("homogenized tensor not positive definite")
    return MacroIdentification(
        c_macro=c_macro,
        apparent_rho=base.rho * fraction,
        solid_fraction=fraction,
        voigt_matrix=C,
    )


@dataclass(frozen=True)
class EnergyTable:
    """Reference energies Pi_het[case, n] with relative-stiffness ratios."""

    labels: tuple  # load case labels
    sizes: tuple  # n values
    energies: np.ndarray  # (n_cases, n_sizes)
    relative_stiffness: np.ndarray  # energies / (n^2 * macro unit-cell energy)

    def energy(self, label: str, n: int) -> float:
        return float(self.energies[self.labels.index(label), self.sizes.index(n)])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("mode,n,energy,relative_stiffness\n")
            for i, label in enumerate(self.labels):
                for j, n in enumerate(self.sizes):
                    fh.write(
                        f"{label},{n},{self.energies[i, j]!r},"
                        f"{self.relative_stiffness[i, j]!r}\n"
                    )


def reference_energies(
    geometry: UnitCellGeometry,
    base: BaseMaterial,
    n_list,
    loads=None,
    resolution: int = 40,
    c_macro: TetragonalElasticity | None = None,
) -> EnergyTable:
    """Stored energies of fully meshed n x n specimens under affine data.

    ``c_macro`` (if given, e.g. from ``homogenize_periodic``) normalizes the
    relative-stiffness column; otherwise it is computed at the same
    resolution.
    """
    if loads is None:
        loads = AffineLoadCase.standard_cases(0.01)
    n_list = tuple(int(n) for n in n_list)
    if not n_list:
        raise ValueError("need at least one specimen size")
    if c_macro is None:
        c_macro = homogenize_periodic(geometry, base, resolution).c_macro

    energies = np.zeros((len(loads), len(n_list)))
    for j, n in enumerate(n_list):
        mesh = build_mesh(geometry, n_cells=n, resolution=resolution)
        fam = np.empty((mesh.ny, mesh.nx, 3))
        fam[:, :] = (base.lam, base.mu, base.mu)
        for i, load in enumerate(loads):
            _, energies[i, j] = solve_elasticity(mesh, fam, load)

    macro_unit = np.array(
        [
            _uniform_energy(c_macro, load.strain, geometry.l**2)
            for load in loads
        ]
    )
    rel = energies / (np.asarray(n_list)[None, :] ** 2 * macro_unit[:, None])
    return EnergyTable(
        labels=tuple(load.label for load in loads),
        sizes=n_list,
        energies=energies,
        relative_stiffness=rel,
    )


def _uniform_energy(c: TetragonalElasticity, strain: np.ndarray, area: float) -> float:
    eps = np.array([strain[0, 0], strain[1, 1], 2.0 * strain[0, 1]])
    return 0.5 * float(eps @ c.voigt() @ eps) * area
