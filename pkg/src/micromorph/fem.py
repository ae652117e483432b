"""Plane-strain solvers: classical elasticity and the relaxed micromorphic
model on structured meshes.

Both solvers are Dirichlet-driven: the affine data u = eps.x is imposed on
the full outer boundary, and for the micromorphic model the consistent
boundary condition pins the tangential trace of each microdistortion row
to the tangential part of grad(u) there.  Energies are 1/2 integral of
the respective quadratic densities so classical and micromorphic values
are directly comparable.

``RmmOperator`` caches assembly for one (mesh, order, bc) combination; a
parameter evaluation is a recombination of eight precomputed element
blocks, one sparse factorization and a couple of matvecs.  Sensitivities
with respect to the five identification parameters come from the envelope
theorem: at equilibrium the total derivative of the energy equals the
partial one, evaluated through the per-piece energies and the chain rule
of the coupling tensor (the macro tensor is held fixed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import RMM_PIECES, BlockSystem, RmmDofMap, assemble_classical, rmm_element_blocks
from .elements import gauss_points
from .mesh import StructuredMesh
from .tensors import RmmStaticParams, TetragonalElasticity, e_from_micro_macro

__all__ = [
    "AffineLoadCase",
    "RmmField",
    "SingularSystemError",
    "solve_elasticity",
    "RmmOperator",
    "solve_rmm",
    "energy_sensitivities",
    "THETA_NAMES",
]

THETA_NAMES = ("mu_micro", "mus_micro", "lam_micro", "mu_c", "mu_lc2")


class SingularSystemError(RuntimeError):
    """Assembled system is singular (all-void mesh or floating regions)."""


@dataclass(frozen=True)
class AffineLoadCase:
    """Affine Dirichlet data u = strain . x on the whole outer boundary."""

    strain: np.ndarray  # symmetric 2x2, dimensionless
    label: str

    @classmethod
    def volumetric(cls, amplitude: float = 0.01) -> "AffineLoadCase":
        return cls(np.diag([amplitude, amplitude]), "volumetric")

    @classmethod
    def deviatoric(cls, amplitude: float = 0.01) -> "AffineLoadCase":
        return cls(np.diag([amplitude, -amplitude]), "deviatoric")

    @classmethod
    def shear(cls, amplitude: float = 0.01) -> "AffineLoadCase":
        return cls(np.array([[0.0, amplitude], [amplitude, 0.0]]), "shear")

    @classmethod
    def standard_cases(cls, amplitude: float = 0.01):
        return (cls.volumetric(amplitude), cls.deviatoric(amplitude), cls.shear(amplitude))


@dataclass(frozen=True)
class RmmField:
    """Discrete micromorphic solution: nodal u and edge-element dofs of the
    two microdistortion rows."""

    u: np.ndarray  # (n_nodes, 2)
    p: np.ndarray  # (2, n_p_row_dofs)
    order: int


def _material_families(mesh: StructuredMesh, material) -> np.ndarray:
    if isinstance(material, TetragonalElasticity):
        fam = np.empty((mesh.ny, mesh.nx, 3))
        fam[:, :] = (material.lam, material.mu, material.mu_star)
        return fam
    fam = np.asarray(material, dtype=float)
    if fam.shape != (mesh.ny, mesh.nx, 3):
        raise ValueError(f"material array must have shape {(mesh.ny, mesh.nx, 3)}")
    return fam


def _affine_u_values(mesh: StructuredMesh, nodes: np.ndarray, strain: np.ndarray):
    xy = mesh.node_xy(nodes)
    return xy @ strain.T  # (n, 2): u_i = strain_ij x_j


def _factorize(A):
    try:
        lu = spla.splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise SingularSystemError(str(exc)) from exc
    return lu


def solve_elasticity(mesh: StructuredMesh, material, load: AffineLoadCase):
    """Equilibrium displacement and stored energy 1/2 int eps:C:eps dV.

    ``material`` is a TetragonalElasticity (uniform on solid elements) or a
    per-element (ny, nx, 3) array of (lam, mu, mu_star).
    """
    if not mesh.solid.any():
        raise SingularSystemError("mesh has no solid elements")
    families = _material_families(mesh, material)
    K, _, dof_table = assemble_classical(mesh, families)
    n = 2 * mesh.n_nodes
    supported = np.zeros(n, dtype=bool)
    supported[np.unique(dof_table)] = True
    if not supported.any():
        raise SingularSystemError("mesh has no solid elements")

    bnodes = mesh.boundary_node_ids()
    presc = np.zeros(n, dtype=bool)
    udofs = np.stack([2 * bnodes, 2 * bnodes + 1], axis=-1).reshape(-1)
    presc[udofs] = True
    presc &= supported
    free = supported & ~presc

    d = np.zeros(n)
    uvals = _affine_u_values(mesh, bnodes, load.strain)
    d[2 * bnodes] = uvals[:, 0]
    d[2 * bnodes + 1] = uvals[:, 1]
    d[~supported] = 0.0
    d[~presc & ~free] = 0.0

    fidx = np.nonzero(free)[0]
    pidx = np.nonzero(presc)[0]
    Kff = K[fidx][:, fidx]
    Kfp = K[fidx][:, pidx]
    lu = _factorize(Kff)
    d[fidx] = lu.solve(-Kfp @ d[pidx])
    if not np.all(np.isfinite(d)):
        raise SingularSystemError("singular elasticity system (floating solid region?)")
    energy = 0.5 * float(d @ (K @ d))
    return d.reshape(-1, 2), energy


def _series_derivative(x_micro: float, x_macro: float) -> float:
    """d/dx_micro of x_micro*x_macro/(x_micro - x_macro)."""
    return -(x_macro**2) / (x_micro - x_macro) ** 2


def theta_to_params(theta, c_macro: TetragonalElasticity) -> RmmStaticParams:
    """Five identification parameters -> full static set (C_macro fixed)."""
    mu_mi, mus_mi, lam_mi, mu_c, mu_lc2 = [float(t) for t in theta]
    c_micro = TetragonalElasticity(lam=lam_mi, mu=mu_mi, mu_star=mus_mi)
    return RmmStaticParams.from_macro(c_micro, c_macro, mu_c=mu_c, mu_lc2=mu_lc2)


def params_to_theta(params: RmmStaticParams) -> np.ndarray:
    c = params.c_micro
    return np.array([c.mu, c.mu_star, c.lam, params.mu_c, params.mu_lc2])


def coefficient_jacobian(theta, c_macro: TetragonalElasticity) -> np.ndarray:
    """d(piece coefficients)/d(theta), shape (8, 5).

    Piece order follows RMM_PIECES; theta order THETA_NAMES.  The coupling
    coefficients depend on theta through the series relation at fixed
    C_macro, including the lam_e = (lam+mu)_e - mu_e recombination.
    """
    mu_mi, mus_mi, lam_mi, _mu_c, _mu_lc2 = [float(t) for t in theta]
    dmu_e = _series_derivative(mu_mi, c_macro.mu)
    dmus_e = _series_derivative(mus_mi, c_macro.mu_star)
    ds_e = _series_derivative(lam_mi + mu_mi, c_macro.lam + c_macro.mu)
    J = np.zeros((8, 5))
    J[0, 0] = ds_e - dmu_e  # lam_e wrt mu_micro
    J[0, 2] = ds_e  # lam_e wrt lam_micro
    J[1, 0] = dmu_e
    J[2, 1] = dmus_e
    J[3, 2] = 1.0  # lam_micro
    J[4, 0] = 1.0  # mu_micro
    J[5, 1] = 1.0  # mus_micro
    J[6, 3] = 1.0  # mu_c
    J[7, 4] = 1.0  # mu_lc2
    return J


def piece_coefficients(params: RmmStaticParams) -> np.ndarray:
    return np.array(
        [
            params.c_e.lam,
            params.c_e.mu,
            params.c_e.mu_star,
            params.c_micro.lam,
            params.c_micro.mu,
            params.c_micro.mu_star,
            params.mu_c,
            params.mu_lc2,
        ]
    )


@dataclass
class RmmSolution:
    field: RmmField
    energy: float
    d_full: np.ndarray
    piece_energies: np.ndarray  # (8,) energies of the unit-coefficient pieces


class RmmOperator:
    """Reusable micromorphic solver for one mesh / element order / BC mode."""

    def __init__(self, mesh: StructuredMesh, order: int = 2, consistent_bc: bool = True):
        self.mesh = mesh
        self.order = order
        self.consistent_bc = consistent_bc
        blocks, self.edge = rmm_element_blocks(mesh.hx, mesh.hy, order)
        self.piece_stack = np.stack([blocks[name] for name in RMM_PIECES])
        self.dofmap = RmmDofMap(mesh, order)
        dof_table = self.dofmap.element_dof_table()
        self.dof_table = dof_table

        n = self.dofmap.n_total
        supported = np.zeros(n, dtype=bool)
        supported[np.unique(dof_table)] = True
        if not supported.any():
            raise SingularSystemError("mesh has no solid elements")
        self.supported = supported

        bnodes = mesh.boundary_node_ids()
        presc = np.zeros(n, dtype=bool)
        presc[self.dofmap.u_dofs_of_nodes(bnodes)] = True
        if consistent_bc:
            bedges = mesh.boundary_edge_ids()
            for row in range(2):
                presc[self.dofmap.p_edge_dofs(bedges, row)] = True
        presc &= supported
        free = supported & ~presc
        # unsupported dofs are treated as prescribed (value zero)
        self.system = BlockSystem(dof_table, n, free_mask=free)
        self._bnodes = bnodes
        self._bedges = mesh.boundary_edge_ids() if consistent_bc else None


    # -- boundary data -------------------------------------------------
    def prescribed_values(self, load: AffineLoadCase) -> np.ndarray:
        n = self.dofmap.n_total
        d = np.zeros(n)
        uvals = _affine_u_values(self.mesh, self._bnodes, load.strain)
        d[2 * self._bnodes] = uvals[:, 0]
        d[2 * self._bnodes + 1] = uvals[:, 1]
        if self.consistent_bc:
            pts, wts = gauss_points(3)
            for edge_id in self._bedges:
                ends = self.mesh.edge_endpoints(edge_id)
                tang = ends[1] - ends[0]
                length = np.linalg.norm(tang)
                tang = tang / length
                for row in range(2):
                    # tangential trace of grad(u) row = (strain row) . t
                    target = load.strain[row] @ tang
                    base = self.dofmap.p_edge_dofs(np.array([edge_id]), row)
                    for m in range(self.order):
                        q = pts**m
                        # dof = int v.t q_m(s) dl on the reference parameter
                        d[base[m]] = float(np.sum(wts * q) * target * length / 2.0)
        return d[self.system.presc_ids]

    # -- evaluation ------------------------------------------------------
    def solve(self, params: RmmStaticParams, load: AffineLoadCase, with_pieces=False) -> RmmSolution:
        return self.solve_cases(params, [load], with_pieces=with_pieces)[0]

    def energy(self, params: RmmStaticParams, load: AffineLoadCase) -> float:
        return self.solve(params, load).energy

    def solve_cases(self, params: RmmStaticParams, loads, with_pieces=False):
        """Solve several load cases with one factorization.

        All cases share the constrained dof set (the whole boundary), so
        only the right-hand sides differ.  Returns a list of RmmSolution.
        """
        params.require_admissible()
        c = piece_coefficients(params)
        K_el = np.einsum("m,mij->ij", c, self.piece_stack)
        data_u = self.system.unique_data(K_el)
        Kff = self.system.block(data_u, "ff")
        Kfp = self.system.block(data_u, "fp")
        Kpp = self.system.block(data_u, "pp")
        lu = _factorize(Kff)
        out = []
        n = self.dofmap.n_total
        for load in loads:
            d_p = self.prescribed_values(load)
            d_f = lu.solve(-(Kfp @ d_p))
            if not np.all(np.isfinite(d_f)):
                raise SingularSystemError("singular micromorphic system")
            energy = (
                0.5 * float(d_f @ (Kff @ d_f))
                + float(d_f @ (Kfp @ d_p))
                + 0.5 * float(d_p @ (Kpp @ d_p))
            )
            d = np.zeros(n)
            d[self.system.free_ids] = d_f
            d[self.system.presc_ids] = d_p
            pieces = None
            if with_pieces:
                d_els = d[self.dof_table]
                pieces = 0.5 * np.einsum("mij,ei,ej->m", self.piece_stack, d_els, d_els)
            u = d[: self.dofmap.n_u].reshape(-1, 2)
            p = np.stack(
                [
                    d[self.dofmap.n_u + r * self.dofmap.n_p_row:
                      self.dofmap.n_u + (r + 1) * self.dofmap.n_p_row]
                    for r in range(2)
                ]
            )
            out.append(
                RmmSolution(
                    field=RmmField(u=u, p=p, order=self.order),
                    energy=energy,
                    d_full=d,
                    piece_energies=pieces,
                )
            )
        return out

    def energy_and_gradient(self, params: RmmStaticParams, load: AffineLoadCase):
        """(energy, dPi/dtheta) with theta = (mu_micro, mus_micro, lam_micro,
        mu_c, mu_lc2) and C_macro held fixed (envelope theorem)."""
        sol = self.solve(params, load, with_pieces=True)
        theta = params_to_theta(params)
        J = coefficient_jacobian(theta, params.c_macro)
        # Pi = sum_m c_m * (1/2 d^T K_m d), so dPi/dtheta = J^T (piece energies)
        grad = J.T @ sol.piece_energies
        return sol.energy, grad


def solve_rmm(
    mesh: StructuredMesh,
    params: RmmStaticParams,
    load: AffineLoadCase,
    consistent_bc: bool = True,
    rho: float | None = None,  # reserved; statics does not use the density
    order: int = 2,
):
    """One-shot micromorphic solve; returns (RmmField, energy)."""
    op = RmmOperator(mesh, order=order, consistent_bc=consistent_bc)
    sol = op.solve(params, load)
    return sol.field, sol.energy


def energy_sensitivities(
    mesh: StructuredMesh,
    params: RmmStaticParams,
    load: AffineLoadCase,
    consistent_bc: bool = True,
    order: int = 2,
) -> np.ndarray:
    """dPi/d(mu_micro, mus_micro, lam_micro, mu_c, mu_lc2) at equilibrium."""
    op = RmmOperator(mesh, order=order, consistent_bc=consistent_bc)
    _, grad = op.energy_and_gradient(params, load)
    return grad
