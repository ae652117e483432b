"""Element matrices and sparse assembly for the plane-strain solvers.

The RMM strain energy density splits into eight pieces that are linear in
the scalar coefficients

    (lam_e, mu_e, mus_e, lam_micro, mu_micro, mus_micro, mu_c, mu_lc2),

so per-parameter element blocks are integrated once (all elements share
one rectangle shape) and recombined per parameter set without re-running
quadrature.  ``BlockSystem`` caches the global sparsity pattern and the
free/prescribed sub-block templates so repeated assemblies reduce to a
bincount and two gathers.

Strain measures use the Voigt convention (e11, e22, 2 e12); the rotation
scalar of a 2x2 tensor A is s(A) = A12 - A21 and the in-plane curl of a
row field v is curl v = d(v_y)/dx - d(v_x)/dy.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .elements import EdgeBasis, Q2Basis, gauss_points
from .mesh import StructuredMesh

__all__ = [
    "RMM_PIECES",
    "rmm_element_blocks",
    "elastic_element_blocks",
    "mass_element_block",
    "RmmDofMap",
    "BlockSystem",
    "assemble_classical",
]

RMM_PIECES = (
    "lam_e",
    "mu_e",
    "mus_e",
    "lam_micro",
    "mu_micro",
    "mus_micro",
    "mu_c",
    "mu_lc2",
)

# Voigt family matrices: C = lam*M_LAM + mu*M_MU + mu_star*M_MUS
M_LAM = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
M_MU = np.diag([2.0, 2.0, 0.0])
M_MUS = np.diag([0.0, 0.0, 1.0])


def _u_kinematics(hx, hy, xi, eta):
    """Q2 strain/rotation rows at a reference point.

    Returns (B_eps (3,18), s_u (18,)) with dof order (n0x, n0y, n1x, ...).
    """
    grad = Q2Basis.grad(xi, eta)
    dN = grad * np.array([2.0 / hx, 2.0 / hy])
    B = np.zeros((3, 18))
    s = np.zeros(18)
    for a in range(9):
        B[0, 2 * a] = dN[a, 0]
        B[1, 2 * a + 1] = dN[a, 1]
        B[2, 2 * a] = dN[a, 1]
        B[2, 2 * a + 1] = dN[a, 0]
        # s(grad u) = d2 u1 - d1 u2
        s[2 * a] = dN[a, 1]
        s[2 * a + 1] = -dN[a, 0]
    return B, s


def rmm_element_blocks(hx: float, hy: float, order: int):
    """Per-coefficient element blocks of the RMM energy (sign-adjusted).

    Returns (blocks: dict piece -> (nd, nd) array, edge_basis).
    Element dof order: 18 displacement dofs, then the edge-element dofs of
    microdistortion row 1, then row 2.
    """
    edge = EdgeBasis(order)
    ndp = edge.n_dofs
    nd = 18 + 2 * ndp
    sl_u = slice(0, 18)
    sl_p1 = slice(18, 18 + ndp)
    sl_p2 = slice(18 + ndp, nd)

    blocks = {name: np.zeros((nd, nd)) for name in RMM_PIECES}
    pts, wts = gauss_points(3)
    jac = hx * hy / 4.0
    for xi, wx in zip(pts, wts):
        for eta, wy in zip(pts, wts):
            w = wx * wy * jac
            B, s_u = _u_kinematics(hx, hy, xi, eta)
            Np = edge.eval_phys(xi, eta, hx, hy)
            Cp = edge.curl_phys(xi, eta, hx, hy)

            # sym(grad u - P) in Voigt components
            E = np.zeros((3, nd))
            E[:, sl_u] = B
            E[0, sl_p1] -= Np[0]  # P11
            E[1, sl_p2] -= Np[1]  # P22
            E[2, sl_p1] -= Np[1]  # P12
            E[2, sl_p2] -= Np[0]  # P21

            # rotation scalar s(grad u - P)
            S = np.zeros(nd)
            S[sl_u] = s_u
            S[sl_p1] -= Np[1]
            S[sl_p2] += Np[0]

            # sym P in Voigt components
            Pv = np.zeros((3, nd))
            Pv[0, sl_p1] = Np[0]
            Pv[1, sl_p2] = Np[1]
            Pv[2, sl_p1] = Np[1]
            Pv[2, sl_p2] = Np[0]

            C1 = np.zeros(nd)
            C1[sl_p1] = Cp
            C2 = np.zeros(nd)
            C2[sl_p2] = Cp

            blocks["lam_e"] += w * E.T @ M_LAM @ E
            blocks["mu_e"] += w * E.T @ M_MU @ E
            blocks["mus_e"] += w * E.T @ M_MUS @ E
            blocks["lam_micro"] += w * Pv.T @ M_LAM @ Pv
            blocks["mu_micro"] += w * Pv.T @ M_MU @ Pv
            blocks["mus_micro"] += w * Pv.T @ M_MUS @ Pv
            blocks["mu_c"] += w * np.outer(S, S)
            blocks["mu_lc2"] += w * (np.outer(C1, C1) + np.outer(C2, C2))

    signs = np.ones(nd)
    signs[sl_p1] = edge.local_signs()
    signs[sl_p2] = edge.local_signs()
    scale = np.outer(signs, signs)
    for name in blocks:
        blocks[name] = blocks[name] * scale
    return blocks, edge


def elastic_element_blocks(hx: float, hy: float):
    """Classical Q2 stiffness split into (lam, mu, mu_star) pieces."""
    blocks = {
        "lam": np.zeros((18, 18)),
        "mu": np.zeros((18, 18)),
        "mu_star": np.zeros((18, 18)),
    }
    pts, wts = gauss_points(3)
    jac = hx * hy / 4.0
    for xi, wx in zip(pts, wts):
        for eta, wy in zip(pts, wts):
            w = wx * wy * jac
            B, _ = _u_kinematics(hx, hy, xi, eta)
            blocks["lam"] += w * B.T @ M_LAM @ B
            blocks["mu"] += w * B.T @ M_MU @ B
            blocks["mu_star"] += w * B.T @ M_MUS @ B
    return blocks


def mass_element_block(hx: float, hy: float):
    """Unit-density consistent Q2 mass block (18 x 18)."""
    M = np.zeros((18, 18))
    pts, wts = gauss_points(3)
    jac = hx * hy / 4.0
    for xi, wx in zip(pts, wts):
        for eta, wy in zip(pts, wts):
            w = wx * wy * jac
            shp = Q2Basis.shape(xi, eta)
            N = np.zeros((2, 18))
            N[0, 0::2] = shp
            N[1, 1::2] = shp
            M += w * N.T @ N
    return M


class RmmDofMap:
    """Global dof layout for (u, P row 1, P row 2) on a structured mesh."""

    def __init__(self, mesh: StructuredMesh, order: int):
        self.mesh = mesh
        self.order = order
        self.edge = EdgeBasis(order)
        self.n_u = 2 * mesh.n_nodes
        self.n_int_per_elem = self.edge.n_interior
        self.n_p_row = order * mesh.n_edges + self.n_int_per_elem * mesh.n_elements
        self.n_total = self.n_u + 2 * self.n_p_row

    def u_dofs_of_nodes(self, nodes) -> np.ndarray:
        nodes = np.asarray(nodes)
        return np.stack([2 * nodes, 2 * nodes + 1], axis=-1).reshape(-1)

    def p_edge_dofs(self, edge_ids, row: int) -> np.ndarray:
        """All moments of the given global edges for microdistortion row."""
        edge_ids = np.atleast_1d(np.asarray(edge_ids))
        base = self.n_u + row * self.n_p_row
        out = (
            base
            + self.order * edge_ids[:, None]
            + np.arange(self.order)[None, :]
        )
        return out.reshape(-1)

    def element_dofs(self, ex: int, ey: int) -> np.ndarray:
        mesh = self.mesh
        dofs = np.empty(18 + 2 * self.edge.n_dofs, dtype=np.int64)
        dofs[:18] = self.u_dofs_of_nodes(mesh.element_nodes(ex, ey))
        elem_lin = ey * mesh.nx + ex
        pos = 18
        for row in range(2):
            base = self.n_u + row * self.n_p_row
            for edge_id, _sign in mesh.element_edges(ex, ey):
                for m in range(self.order):
                    dofs[pos] = base + self.order * edge_id + m
                    pos += 1
            int_base = base + self.order * mesh.n_edges + self.n_int_per_elem * elem_lin
            for j in range(self.n_int_per_elem):
                dofs[pos] = int_base + j
                pos += 1
        return dofs

    def element_dof_table(self) -> np.ndarray:
        """(n_solid_elements, nd) dof indices for all solid elements."""
        rows = [
            self.element_dofs(ex, ey) for ey, ex in self.mesh.solid_elements()
        ]
        return np.asarray(rows)


class BlockSystem:
    """Cached sparsity for repeated assembly with fixed element dof table.

    Splits the operator into free/free, free/prescribed and
    prescribed/prescribed blocks.  Per assembly only the numeric values
    change; patterns, dedup mapping and block templates are reused.
    """

    def __init__(self, dof_table: np.ndarray, n_total: int, free_mask: np.ndarray):
        self.dof_table = dof_table
        self.n_total = n_total
        self.free_mask = free_mask.copy()
        self.free_ids = np.nonzero(free_mask)[0]
        self.presc_ids = np.nonzero(~free_mask)[0]
        self.n_free = len(self.free_ids)
        self.n_presc = len(self.presc_ids)
        new_index = np.full(n_total, -1, dtype=np.int64)
        new_index[self.free_ids] = np.arange(self.n_free)
        new_index[self.presc_ids] = np.arange(self.n_presc)
        self._new_index = new_index

        ne, nd = dof_table.shape
        rows = np.repeat(dof_table, nd, axis=1).ravel()
        cols = np.tile(dof_table, (1, nd)).ravel()
        keys = rows.astype(np.int64) * n_total + cols.astype(np.int64)
        uniq, inverse = np.unique(keys, return_inverse=True)
        self.inverse = inverse.astype(np.int64)
        self.n_unique = len(uniq)
        self.i_u = (uniq // n_total).astype(np.int64)
        self.j_u = (uniq % n_total).astype(np.int64)

        self._blocks = {}
        self._make_block("ff", free_mask, free_mask, fmt="csc")
        self._make_block("fp", free_mask, ~free_mask, fmt="csr")
        self._make_block("pp", ~free_mask, ~free_mask, fmt="csr")

    def _make_block(self, name, row_mask, col_mask, fmt):
        sel = row_mask[self.i_u] & col_mask[self.j_u]
        sel_idx = np.nonzero(sel)[0]
        ri = self._new_index[self.i_u[sel_idx]]
        ci = self._new_index[self.j_u[sel_idx]]
        nrow = int(row_mask.sum())
        ncol = int(col_mask.sum())
        marker = sp.coo_matrix(
            (np.arange(1, len(sel_idx) + 1, dtype=np.float64), (ri, ci)),
            shape=(nrow, ncol),
        )
        tmpl = marker.tocsc() if fmt == "csc" else marker.tocsr()
        perm = tmpl.data.astype(np.int64) - 1
        self._blocks[name] = (tmpl, perm, sel_idx)

    def unique_data(self, element_data: np.ndarray) -> np.ndarray:
        """Sum element contributions into the deduplicated entry list.

        ``element_data``: (ne, nd, nd) or a single (nd, nd) block shared by
        all elements.
        """
        ne = self.dof_table.shape[0]
        if element_data.ndim == 2:
            weights = np.tile(element_data.ravel(), ne)
        else:
            weights = element_data.reshape(ne, -1).ravel()
        return np.bincount(self.inverse, weights=weights, minlength=self.n_unique)

    def block(self, data_u: np.ndarray, name: str):
        tmpl, perm, sel_idx = self._blocks[name]
        vals = data_u[sel_idx][perm]
        if tmpl.format == "csc":
            return sp.csc_matrix((vals, tmpl.indices, tmpl.indptr), shape=tmpl.shape)
        return sp.csr_matrix((vals, tmpl.indices, tmpl.indptr), shape=tmpl.shape)


def assemble_classical(mesh: StructuredMesh, families: np.ndarray, with_mass=False, rho=None):
    """Assemble the Q2 elasticity stiffness (and optionally mass).

    ``families``: (ny, nx, 3) per-element (lam, mu, mu_star); void elements
    are skipped regardless of their entries.  Returns (K, M or None,
    dof_table) on the full displacement dof numbering (2 dofs per node).
    """
    blocks = elastic_element_blocks(mesh.hx, mesh.hy)
    piece = np.stack(
        [blocks["lam"].ravel(), blocks["mu"].ravel(), blocks["mu_star"].ravel()]
    )
    solid = mesh.solid_elements()
    dof_rows = []
    coefs = []
    for ey, ex in solid:
        nodes = mesh.element_nodes(ex, ey)
        dof_rows.append(
            np.stack([2 * nodes, 2 * nodes + 1], axis=-1).reshape(-1)
        )
        coefs.append(families[ey, ex])
    dof_table = np.asarray(dof_rows)
    coefs = np.asarray(coefs)

    ne, nd = dof_table.shape
    rows = np.repeat(dof_table, nd, axis=1).ravel()
    cols = np.tile(dof_table, (1, nd)).ravel()
    data = (coefs @ piece).ravel()
    n = 2 * mesh.n_nodes
    K = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    M = None
    if with_mass:
        mb = mass_element_block(mesh.hx, mesh.hy).ravel()
        mdata = np.tile(rho * mb, ne)
        M = sp.coo_matrix((mdata, (rows, cols)), shape=(n, n)).tocsr()
    return K, M, dof_table
