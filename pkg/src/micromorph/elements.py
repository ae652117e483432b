"""Reference elements: Q2 Lagrange quads and curl-conforming edge elements.

The displacement uses the 9-node biquadratic Lagrange quad.  Each row of
the microdistortion uses a first-type curl-conforming edge element of
order 1 (Q_{0,1} x Q_{1,0}, one tangential moment per edge) or order 2
(Q_{1,2} x Q_{2,1}, two moments per edge plus four interior moments).

All meshes are axis-aligned rectangles with constant element size, so the
covariant map reduces to component scalings (2/hx, 2/hy) and the curl
picks up the factor 4/(hx hy).

Local edge dofs are defined on the counterclockwise traversal (bottom,
right, top, left); global edges are oriented +x / +y.  A local moment of
degree m relates to the global one by sigma^(m+1) where sigma is the
traversal sign, because both the tangent and the edge parameter flip.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "gauss_points",
    "Q2Basis",
    "EdgeBasis",
    "EDGE_SIGNS",
]

# local CCW edge traversal signs relative to the +x/+y global orientation
EDGE_SIGNS = (1, 1, -1, -1)

# reference edges: (start, end) on [-1, 1]^2, CCW
_REF_EDGES = (
    ((-1.0, -1.0), (1.0, -1.0)),
    ((1.0, -1.0), (1.0, 1.0)),
    ((1.0, 1.0), (-1.0, 1.0)),
    ((-1.0, 1.0), (-1.0, -1.0)),
)


def gauss_points(n: int):
    """1D Gauss-Legendre points and weights on [-1, 1]."""
    return np.polynomial.legendre.leggauss(n)


def _lagrange_1d(x):
    x = np.asarray(x, dtype=float)
    return np.stack(
        [0.5 * x * (x - 1.0), 1.0 - x * x, 0.5 * x * (x + 1.0)], axis=-1
    )


def _lagrange_1d_d(x):
    x = np.asarray(x, dtype=float)
    return np.stack([x - 0.5, -2.0 * x, x + 0.5], axis=-1)


class Q2Basis:
    """9-node Lagrange quad; local node (ix, iy) -> index 3*iy + ix."""

    n_nodes = 9

    @staticmethod
    def shape(xi, eta) -> np.ndarray:
        lx, ly = _lagrange_1d(xi), _lagrange_1d(eta)
        return np.array([lx[ix] * ly[iy] for iy in range(3) for ix in range(3)])

    @staticmethod
    def grad(xi, eta) -> np.ndarray:
        """Reference gradients, shape (9, 2)."""
        lx, ly = _lagrange_1d(xi), _lagrange_1d(eta)
        dlx, dly = _lagrange_1d_d(xi), _lagrange_1d_d(eta)
        out = np.empty((9, 2))
        for iy in range(3):
            for ix in range(3):
                out[3 * iy + ix, 0] = dlx[ix] * ly[iy]
                out[3 * iy + ix, 1] = lx[ix] * dly[iy]
        return out


def _edge_point(edge: int, s):
    """Point on reference edge at CCW parameter s in [-1, 1]."""
    (x0, y0), (x1, y1) = _REF_EDGES[edge]
    t = 0.5 * (np.asarray(s) + 1.0)
    return x0 + (x1 - x0) * t, y0 + (y1 - y0) * t


def _edge_tangent(edge: int) -> np.ndarray:
    (x0, y0), (x1, y1) = _REF_EDGES[edge]
    v = np.array([x1 - x0, y1 - y0])
    return v / np.linalg.norm(v)


class EdgeBasis:
    """First-type curl-conforming element of order 1 or 2 on [-1, 1]^2.

    Basis functions are stored as monomial coefficients and produced by
    inverting the degree-of-freedom matrix (dual basis construction).
    Local dof order: [edge0 moments..., edge1 ..., edge2 ..., edge3 ...,
    interior moments...].
    """

    def __init__(self, order: int):
        if order not in (1, 2):
            raise ValueError("edge element order must be 1 or 2")
        self.order = order
        self.monomials = self._monomials(order)
        self.n_dofs = len(self.monomials)
        self.n_edge_dofs = order
        self.n_interior = self.n_dofs - 4 * order
        self.coeffs = self._build_dual_basis()

    @staticmethod
    def _monomials(order: int):
        """(component, px, py) exponents of Q_{k-1,k} x Q_{k,k-1}."""
        monos = []
        for px in range(order):
            for py in range(order + 1):
                monos.append((0, px, py))
        for px in range(order + 1):
            for py in range(order):
                monos.append((1, px, py))
        return monos

    def _eval_monomials(self, xi, eta) -> np.ndarray:
        """(2, n_monomials) values at one reference point."""
        out = np.zeros((2, self.n_dofs))
        for m, (comp, px, py) in enumerate(self.monomials):
            out[comp, m] = xi**px * eta**py
        return out

    def _curl_monomials(self, xi, eta) -> np.ndarray:
        """Reference curl d(v_y)/dxi - d(v_x)/deta of every monomial."""
        out = np.zeros(self.n_dofs)
        for m, (comp, px, py) in enumerate(self.monomials):
            if comp == 0 and py > 0:
                out[m] = -py * xi**px * eta ** (py - 1)
            elif comp == 1 and px > 0:
                out[m] = px * xi ** (px - 1) * eta**py
        return out

    def _dof_matrix(self) -> np.ndarray:
        """V[a, m] = dof_a applied to monomial m."""
        pts, wts = gauss_points(3)
        V = np.zeros((self.n_dofs, self.n_dofs))
        row = 0
        for edge in range(4):
            tang = _edge_tangent(edge)
            for m in range(self.order):
                acc = np.zeros(self.n_dofs)
                for s, w in zip(pts, wts):
                    x, y = _edge_point(edge, s)
                    vals = self._eval_monomials(x, y)
                    acc += w * (s**m) * (tang @ vals)
                V[row] = acc
                row += 1
        if self.order == 2:
            # interior moments: v_x against {1, x}, v_y against {1, y}
            tests = [(0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 0, 1)]
            for comp, px, py in tests:
                acc = np.zeros(self.n_dofs)
                for sx, wx in zip(pts, wts):
                    for sy, wy in zip(pts, wts):
                        vals = self._eval_monomials(sx, sy)
                        acc += wx * wy * (sx**px * sy**py) * vals[comp]
                V[row] = acc
                row += 1
        return V

    def _build_dual_basis(self) -> np.ndarray:
        V = self._dof_matrix()
        cond = np.linalg.cond(V)
        if cond > 1e8:
            raise RuntimeError(f"edge element dof matrix ill-conditioned: {cond:.2e}")
        return np.linalg.inv(V)  # column a = coefficients of basis a

    # --- evaluation on the reference element --------------------------
    def eval_ref(self, xi, eta) -> np.ndarray:
        """(2, n_dofs) basis values at a reference point."""
        return self._eval_monomials(xi, eta) @ self.coeffs

    def curl_ref(self, xi, eta) -> np.ndarray:
        """(n_dofs,) reference curls at a reference point."""
        return self._curl_monomials(xi, eta) @ self.coeffs

    # --- evaluation mapped to an hx x hy rectangle ---------------------
    def eval_phys(self, xi, eta, hx: float, hy: float) -> np.ndarray:
        vals = self.eval_ref(xi, eta).copy()
        vals[0] *= 2.0 / hx
        vals[1] *= 2.0 / hy
        return vals

    def curl_phys(self, xi, eta, hx: float, hy: float) -> np.ndarray:
        return self.curl_ref(xi, eta) * (4.0 / (hx * hy))

    def local_signs(self) -> np.ndarray:
        """Per-dof sign converting global dof values to local ones."""
        signs = []
        for edge in range(4):
            for m in range(self.order):
                signs.append(EDGE_SIGNS[edge] ** (m + 1))
        signs.extend([1] * self.n_interior)
        return np.array(signs, dtype=float)
