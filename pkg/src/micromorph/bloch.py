"""Bloch-Floquet bands of the microstructured unit-cell.

The quasi-periodic condition u(x + l e) = exp(i k.l) u(x) is imposed by
identifying slave boundary dofs with their masters times the Floquet
phase; the reduced Hermitian pencil (K_red(k), M_red) is solved for the
lowest branches with a shift-invert Lanczos (dense fallback for small
systems).

Branch typing: at k = 0 the pressure-like modes are even under the
vertical mirror of the cell (with the vector parity u1 -> -u1) and the
shear-like modes are odd; at k > 0 the polarization relative to the
propagation direction decides, and ambiguous modes are labeled 'mixed'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import assemble_classical
from .curves import DispersionCurveSet, band_gap
from .geometry import UnitCellGeometry
from .mesh import StructuredMesh, build_mesh
from .tensors import BaseMaterial

__all__ = ["bloch_bands", "extract_cutoffs", "band_gap", "MissingCutoffsError", "Cutoffs"]


class MissingCutoffsError(RuntimeError):
    """Fewer than four nonzero cut-offs below the computed band count."""


@dataclass(frozen=True)
class Cutoffs:
    """The four nonzero k = 0 frequencies, grouped by wave type."""

    shear_1: float
    shear_2: float
    pressure_1: float
    pressure_2: float

    def as_tuple(self):
        return (self.shear_1, self.shear_2, self.pressure_1, self.pressure_2)


def _supported_node_mask(mesh: StructuredMesh, dof_table) -> np.ndarray:
    mask = np.zeros(mesh.n_nodes, dtype=bool)
    mask[np.unique(dof_table) // 2] = True
    return mask


def _floquet_transform(mesh: StructuredMesh, supported_nodes, k_vec):
    """Complex reduction matrix T with u_full = T u_red."""
    gx, gy = mesh.node_grid_shape
    ii, jj = np.meshgrid(np.arange(gx), np.arange(gy), indexing="ij")
    im = np.where(ii == gx - 1, 0, ii)
    jm = np.where(jj == gy - 1, 0, jj)
    nodes = mesh.node_id(ii, jj).ravel()
    masters = mesh.node_id(im, jm).ravel()
    master_of_node = np.empty(mesh.n_nodes, dtype=np.int64)
    master_of_node[nodes] = masters

    if np.any(supported_nodes & ~supported_nodes[master_of_node]):
        raise RuntimeError("solid/void mismatch between paired boundary nodes")

    master_ids = np.unique(master_of_node[supported_nodes])
    red_index = np.full(mesh.n_nodes, -1, dtype=np.int64)
    red_index[master_ids] = np.arange(len(master_ids))

    xy = mesh.node_coords
    rows, cols, vals = [], [], []
    for nid in np.nonzero(supported_nodes)[0]:
        m = master_of_node[nid]
        shift = xy[nid] - xy[m]
        phase = np.exp(1j * (k_vec @ shift))
        idx = red_index[m]
        for comp in range(2):
            rows.append(2 * nid + comp)
            cols.append(2 * idx + comp)
            vals.append(phase)
    n_full = 2 * mesh.n_nodes
    n_red = 2 * len(master_ids)
    T = sp.csr_matrix((vals, (rows, cols)), shape=(n_full, n_red), dtype=complex)
    return T, master_ids


def _lowest_modes(K_red, M_red, n_modes: int, sigma_scale: float):
    """Lowest generalized eigenpairs of the Hermitian pencil."""
    n = K_red.shape[0]
    if n <= max(400, 3 * n_modes):
        w, v = sla.eigh(K_red.toarray(), M_red.toarray())
        return w[:n_modes], v[:, :n_modes]
    sigma = -1e-3 * sigma_scale
    w, v = spla.eigsh(K_red, k=n_modes, M=M_red, sigma=sigma, which="LM")
    order = np.argsort(w)
    return w[order], v[:, order]


def _mirror_parity(mesh: StructuredMesh, supported_nodes, vec_full) -> float:
    """<u, M_x u> / <u, u> for the vertical-axis mirror of the cell."""
    gx, gy = mesh.node_grid_shape
    ii, jj = np.meshgrid(np.arange(gx), np.arange(gy), indexing="ij")
    mirror_of_node = np.empty(mesh.n_nodes, dtype=np.int64)
    mirror_of_node[mesh.node_id(ii, jj).ravel()] = mesh.node_id(
        (gx - 1) - ii, jj
    ).ravel()
    nodes = np.nonzero(supported_nodes)[0]
    u1 = vec_full[2 * nodes]
    u2 = vec_full[2 * nodes + 1]
    mn = mirror_of_node[nodes]
    m1 = -vec_full[2 * mn]
    m2 = vec_full[2 * mn + 1]
    num = np.real(np.vdot(u1, m1) + np.vdot(u2, m2))
    den = np.real(np.vdot(u1, u1) + np.vdot(u2, u2))
    return float(num / den)


def _polarization(supported_nodes, vec_full, k_hat) -> float:
    """Longitudinal energy fraction in [0, 1]."""
    nodes = np.nonzero(supported_nodes)[0]
    u = np.stack([vec_full[2 * nodes], vec_full[2 * nodes + 1]], axis=1)
    along = np.abs(u @ k_hat) ** 2
    total = np.abs(u[:, 0]) ** 2 + np.abs(u[:, 1]) ** 2
    return float(np.sum(along) / np.sum(total))


def bloch_bands(
    geometry: UnitCellGeometry,
    base: BaseMaterial,
    angle: float,
    k_samples,
    n_branches: int = 6,
    resolution: int = 20,
    type_threshold: float = 0.6,
) -> DispersionCurveSet:
    """Lowest dispersion branches of the detailed cell along one direction.

    ``k_samples`` must lie within the periodicity limit (pi/l at 0 degrees,
    sqrt(2) pi/l at 45 degrees).
    """
    k_samples = np.asarray(k_samples, dtype=float)
    l = geometry.l
    k_max = math.pi / l * (math.sqrt(2.0) if _is_45(angle) else 1.0)
    if np.any(k_samples < 0) or np.any(k_samples > k_max * (1 + 1e-12)):
        raise ValueError(f"k samples must lie in [0, {k_max:.4e}] at this angle")

    mesh = build_mesh(geometry, n_cells=1, resolution=resolution)
    fam = np.empty((mesh.ny, mesh.nx, 3))
    fam[:, :] = (base.lam, base.mu, base.mu)
    K, M, dof_table = assemble_classical(mesh, fam, with_mass=True, rho=base.rho)
    supported_nodes = _supported_node_mask(mesh, dof_table)

    c_p = math.sqrt((base.lam + 2 * base.mu) / base.rho)
    sigma_scale = (c_p * math.pi / l) ** 2
    direction = np.array([math.cos(angle), math.sin(angle)])

    nk = len(k_samples)
    omega = np.zeros((nk, n_branches))
    tlab = np.full((nk, n_branches), "mixed", dtype=object)
    mlab = np.full((nk, n_branches), "optic", dtype=object)
    for ik, kk in enumerate(k_samples):
        T, _ = _floquet_transform(mesh, supported_nodes, kk * direction)
        K_red = (T.getH() @ K @ T).tocsc()
        M_red = (T.getH() @ M @ T).tocsc()
        defect = _hermiticity_defect(K_red)
        if defect > 1e-12:
            raise RuntimeError(f"Bloch stiffness not Hermitian: defect {defect:.2e}")
        K_red = 0.5 * (K_red + K_red.getH())
        M_red = 0.5 * (M_red + M_red.getH())
        w2, vecs = _lowest_modes(K_red, M_red, n_branches, sigma_scale)
        w2 = np.maximum(w2, 0.0)
        omega[ik] = np.sqrt(w2)
        for b in range(n_branches):
            full_vec = T @ vecs[:, b]
            if kk == 0.0:
                if omega[ik, b] < 1e-6 * math.sqrt(sigma_scale):
                    tlab[ik, b] = "mixed"  # rigid translations, typed below
                    continue
                parity = _mirror_parity(mesh, supported_nodes, full_vec)
                if parity > type_threshold:
                    tlab[ik, b] = "pressure"
                elif parity < -type_threshold:
                    tlab[ik, b] = "shear"
            else:
                frac = _polarization(supported_nodes, full_vec, direction)
                if frac > type_threshold:
                    tlab[ik, b] = "pressure"
                elif frac < 1.0 - type_threshold:
                    tlab[ik, b] = "shear"

    _assign_modes(omega, tlab, mlab)
    return DispersionCurveSet(
        angle=angle, k=k_samples, omega=omega, type_labels=tlab, mode_labels=mlab
    )


def _assign_modes(omega, tlab, mlab):
    """Mark the lowest branch of each type family as acoustic per sample."""
    nk, nb = omega.shape
    for ik in range(nk):
        seen = set()
        for b in range(nb):
            t = tlab[ik, b]
            if t not in seen:
                mlab[ik, b] = "acoustic"
                seen.add(t)
    # guarantee exactly two acoustic branches per sample: the two lowest
    for ik in range(nk):
        acoustic = [b for b in range(nb) if mlab[ik, b] == "acoustic"]
        for b in acoustic[2:]:
            mlab[ik, b] = "optic"


def _hermiticity_defect(A) -> float:
    d = spla.norm(A - A.getH())
    return float(d / max(spla.norm(A), 1e-300))


def _is_45(angle: float) -> bool:
    return math.isclose(angle, math.pi / 4.0, abs_tol=1e-12)


def extract_cutoffs(
    curves_0: DispersionCurveSet,
    curves_45: DispersionCurveSet | None = None,
    rtol: float = 1e-6,
    flatness: float = 0.3,
) -> Cutoffs:
    """The two shear and two pressure cut-offs (lowest first).

    A cut-off is a nonzero k = 0 frequency whose branch is locally flat
    there (genuine optic modes of a square-symmetric cell have extrema at
    k = 0; folded acoustic branches of a near-homogeneous cell pass through
    with slope of the order of the wave speeds and are rejected).  Branch
    types come from the stored labels; 'mixed' entries (degenerate pairs at
    k = 0) inherit the type of the same branch index at the first positive
    sample.  When both angle sets are given their k = 0 columns must agree
    (the cut-offs are direction independent).
    """
    cut = _cutoffs_of(curves_0, flatness)
    if curves_45 is not None:
        other = _cutoffs_of(curves_45, flatness)
        rel = np.abs(np.asarray(cut.as_tuple()) - np.asarray(other.as_tuple()))
        rel = rel / np.asarray(cut.as_tuple())
        if np.any(rel > rtol):
            raise MissingCutoffsError(
                f"cut-offs differ between angles beyond rtol={rtol}: {rel}"
            )
    return cut


def _cutoffs_of(curves: DispersionCurveSet, flatness: float) -> Cutoffs:
    ik0 = int(np.argmin(curves.k))
    if curves.k[ik0] != 0.0:
        raise ValueError("curves must include a k = 0 sample")
    if len(curves.k) < 2:
        raise ValueError("cut-off classification needs a positive k sample")
    ik1 = ik0 + 1 if ik0 + 1 < len(curves.k) else ik0
    k1 = curves.k[ik1]
    om0 = curves.omega[ik0]
    om1 = curves.omega[ik1]
    scale = om0.max()
    if scale == 0.0:
        raise MissingCutoffsError("all k = 0 frequencies vanish")

    # reference speed from the acoustic branches at the first sample
    c_ref = float(np.max(om1[:2]) / k1)
    candidates = []
    rejected_steep = 0
    for b in range(curves.n_branches):
        if om0[b] <= 1e-6 * scale:
            continue
        slope = abs(om1[b] - om0[b]) / k1
        if slope > flatness * c_ref:
            rejected_steep += 1
            continue
        candidates.append(b)

    # group degenerate k = 0 values: the numeric eigenvectors of a cluster
    # are arbitrary mixtures, but the emanating branches split into one
    # pressure and one shear curve, so the cluster value feeds both lists
    clusters = []
    for b in candidates:
        if clusters and abs(om0[b] - om0[clusters[-1][-1]]) <= 1e-6 * scale:
            clusters[-1].append(b)
        else:
            clusters.append([b])

    shear, pressure = [], []
    for cluster in clusters:
        value = float(np.mean(om0[cluster]))
        if len(cluster) == 1:
            b = cluster[0]
            label = curves.type_labels[ik0][b]
            if label == "mixed":
                label = curves.type_labels[ik1][b]
            if label == "shear":
                shear.append(value)
            elif label == "pressure":
                pressure.append(value)
            continue
        k1_labels = [curves.type_labels[ik1][b] for b in cluster]
        n_p = k1_labels.count("pressure")
        n_s = k1_labels.count("shear")
        unresolved = len(cluster) - n_p - n_s
        # split the unresolved multiplicity evenly, shear first
        n_s += (unresolved + 1) // 2
        n_p += unresolved // 2
        shear.extend([value] * n_s)
        pressure.extend([value] * n_p)
    shear.sort()
    pressure.sort()
    if len(shear) < 2 or len(pressure) < 2:
        detail = (
            f"found {len(shear)} shear and {len(pressure)} pressure cut-offs"
            + (
                f"; {rejected_steep} steep folded branches rejected "
                "(a homogeneous cell has no optic branches below folding)"
                if rejected_steep
                else ""
            )
        )
        raise MissingCutoffsError(
            "no complete optic cut-off set below the computed bands: " + detail
        )
    return Cutoffs(
        shear_1=float(shear[0]),
        shear_2=float(shear[1]),
        pressure_1=float(pressure[0]),
        pressure_2=float(pressure[1]),
    )
