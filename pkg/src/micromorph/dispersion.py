"""Analytic plane-wave dispersion of the relaxed micromorphic model.

Substituting the plane-wave ansatz u_j = psi_j exp(i(k.x - w t)),
P_jl = psi_jl exp(i(k.x - w t)) into the balance equations yields a 6x6
generalized eigenproblem (K(k) - w^2 M(k)) Psi = 0 with amplitude ordering
Psi = (psi_1, psi_2, psi_11, psi_12, psi_21, psi_22).

Both blocks are built here as sesquilinear forms of the energy densities
(gradients become ik), which makes them Hermitian by construction and
keeps the FEM and plane-wave energy conventions identical.  Frequencies
are computed as generalized eigenvalues; the cubic-in-w^2 block structure
is retained only as a closed-form test oracle.

At incidence 0 the system decouples into a pressure block acting on
(psi_1, psi_11, psi_22) and a shear block acting on (psi_2, psi_12,
psi_21).  At 45 degrees the same decoupling holds in the rotated frame
with the tetragonal constants transformed by
(lam, mu, mu*) -> (lam + mu - mu*, mu*, mu), and likewise for the inertia
families (Lam, M, M*).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .curves import DispersionCurveSet
from .tensors import RmmStaticParams, TetragonalElasticity

__all__ = [
    "RmmDynamicParams",
    "PlaneWaveSystem",
    "InadmissibleInertiaError",
    "assemble_system",
    "cutoffs",
    "identify_j1",
    "branches",
    "decoupled_blocks",
    "PRESSURE_INDICES",
    "SHEAR_INDICES",
]

# amplitude ordering: (psi_1, psi_2, psi_11, psi_12, psi_21, psi_22)
PRESSURE_INDICES = (0, 2, 5)
SHEAR_INDICES = (1, 3, 4)


class InadmissibleInertiaError(ValueError):
    """Inertia block is not positive definite for the requested parameters."""


@dataclass(frozen=True)
class RmmDynamicParams:
    """Micro-inertia coefficients, stored as the mass-scaled products.

    j1_* are the rho L_c^2 {Lam_m1, M_m1, M*_m1, M_c1} coefficients (kg/m),
    j2_* the corresponding grad(u)-inertia block, and j_curl the curvature
    inertia rho L_c^4 M (kg m).  The Lam entries may be negative as long as
    Lam + M stays positive.
    """

    j1_lam: float
    j1_m: float
    j1_ms: float
    j1_c: float
    j2_lam: float = 0.0
    j2_m: float = 0.0
    j2_ms: float = 0.0
    j2_c: float = 0.0
    j_curl: float = 0.0

    def is_admissible(self) -> bool:
        first = (
            self.j1_m > 0.0
            and self.j1_ms > 0.0
            and self.j1_lam + self.j1_m > 0.0
            and self.j1_c > 0.0
        )
        second = (
            self.j2_m >= 0.0
            and self.j2_ms >= 0.0
            and self.j2_lam + self.j2_m >= 0.0
            and self.j2_c >= 0.0
        )
        return first and second and self.j_curl >= 0.0

    def require_admissible(self) -> None:
        if not self.is_admissible():
            raise InadmissibleInertiaError(f"inadmissible inertia set: {self}")

    def j1_families(self) -> np.ndarray:
        return np.array([self.j1_m, self.j1_ms, self.j1_lam + self.j1_m])

    def rotated_45(self) -> "RmmDynamicParams":
        """Inertia families in the 45-degree frame (isotropic parts fixed)."""
        return replace(
            self,
            j1_lam=self.j1_lam + self.j1_m - self.j1_ms,
            j1_m=self.j1_ms,
            j1_ms=self.j1_m,
            j2_lam=self.j2_lam + self.j2_m - self.j2_ms,
            j2_m=self.j2_ms,
            j2_ms=self.j2_m,
        )


@dataclass(frozen=True)
class PlaneWaveSystem:
    """Hermitian blocks of the 6x6 plane-wave eigenproblem."""

    k_matrix: np.ndarray
    m_matrix: np.ndarray
    k: float
    angle: float

    def hermiticity_defect(self) -> float:
        dk = np.linalg.norm(self.k_matrix - self.k_matrix.conj().T)
        dm = np.linalg.norm(self.m_matrix - self.m_matrix.conj().T)
        return max(
            dk / max(np.linalg.norm(self.k_matrix), 1e-300),
            dm / max(np.linalg.norm(self.m_matrix), 1e-300),
        )

    def frequencies(self) -> np.ndarray:
        """Nonnegative roots omega of det(K - w^2 M) = 0, ascending."""
        return _frequencies(self.k_matrix, self.m_matrix)

    def det_at(self, omega: float) -> complex:
        """Scaled determinant of (K - w^2 M); near zero at eigenvalues."""
        A = self.k_matrix - omega**2 * self.m_matrix
        scale = np.linalg.norm(self.k_matrix, 2)
        return np.linalg.det(A / scale)


def _frequencies(K, M) -> np.ndarray:
    try:
        w2 = sla.eigh(K, M, eigvals_only=True)
    except np.linalg.LinAlgError as exc:
        raise InadmissibleInertiaError(f"inertia block not positive definite: {exc}")
    scale = max(abs(w2).max(), 1.0)
    if w2.min() < -1e-8 * scale:
        raise InadmissibleInertiaError(
            f"negative squared frequency {w2.min():.3e} (relative {w2.min() / scale:.1e})"
        )
    return np.sqrt(np.maximum(w2, 0.0))


def _voigt_matrix(lam, mu, mus) -> np.ndarray:
    return np.array(
        [[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mus]]
    )


class _AmplitudeFields:
    """Kinematic measures of one amplitude vector at wavevector k."""

    def __init__(self, psi: np.ndarray, kvec: np.ndarray):
        u = psi[:2]
        P = np.array([[psi[2], psi[3]], [psi[4], psi[5]]])
        G = 1j * np.outer(u, kvec)  # (grad u)_jl = i k_l psi_j
        rel = G - P
        self.u = u
        self.sym_rel = np.array(
            [rel[0, 0], rel[1, 1], rel[0, 1] + rel[1, 0]]
        )
        self.skew_rel = rel[0, 1] - rel[1, 0]
        self.sym_p = np.array([P[0, 0], P[1, 1], P[0, 1] + P[1, 0]])
        self.skew_p = P[0, 1] - P[1, 0]
        self.sym_g = np.array([G[0, 0], G[1, 1], G[0, 1] + G[1, 0]])
        self.skew_g = G[0, 1] - G[1, 0]
        # curl of row i: i(k1 P_i2 - k2 P_i1)
        self.curl_p = 1j * (kvec[0] * P[:, 1] - kvec[1] * P[:, 0])


def _build_forms(static: RmmStaticParams, dynamic: RmmDynamicParams, rho: float,
                 kvec: np.ndarray, mu_lc2: float, j_curl: float):
    ce = static.c_e.voigt()
    cm = static.c_micro.voigt()
    j1 = _voigt_matrix(dynamic.j1_lam, dynamic.j1_m, dynamic.j1_ms)
    j2 = _voigt_matrix(dynamic.j2_lam, dynamic.j2_m, dynamic.j2_ms)
    fields = [_AmplitudeFields(e, kvec) for e in np.eye(6)]
    K = np.zeros((6, 6), dtype=complex)
    M = np.zeros((6, 6), dtype=complex)
    for a, fa in enumerate(fields):
        for b, fb in enumerate(fields):
            K[a, b] = (
                fa.sym_rel.conj() @ ce @ fb.sym_rel
                + static.mu_c * np.conj(fa.skew_rel) * fb.skew_rel
                + fa.sym_p.conj() @ cm @ fb.sym_p
                + mu_lc2 * (fa.curl_p.conj() @ fb.curl_p)
            )
            M[a, b] = (
                rho * (fa.u.conj() @ fb.u)
                + fa.sym_p.conj() @ j1 @ fb.sym_p
                + dynamic.j1_c * np.conj(fa.skew_p) * fb.skew_p
                + fa.sym_g.conj() @ j2 @ fb.sym_g
                + dynamic.j2_c * np.conj(fa.skew_g) * fb.skew_g
                + j_curl * (fa.curl_p.conj() @ fb.curl_p)
            )
    K = 0.5 * (K + K.conj().T)
    M = 0.5 * (M + M.conj().T)
    return K, M


def assemble_system(
    static: RmmStaticParams,
    dynamic: RmmDynamicParams,
    rho: float,
    k: float,
    angle: float,
    curvature: bool = True,
) -> PlaneWaveSystem:
    """Build the 6x6 plane-wave blocks at wavenumber k and incidence angle.

    With ``curvature`` off both curvature terms (stiffness mu L_c^2 and
    inertia rho L_c^4 M) are dropped, which is the reduced model variant.
    """
    if k < 0:
        raise ValueError("wavenumber must be nonnegative")
    dynamic.require_admissible()
    kvec = k * np.array([math.cos(angle), math.sin(angle)])
    mu_lc2 = static.mu_lc2 if curvature else 0.0
    j_curl = dynamic.j_curl if curvature else 0.0
    K, M = _build_forms(static, dynamic, rho, kvec, mu_lc2, j_curl)
    return PlaneWaveSystem(k_matrix=K, m_matrix=M, k=k, angle=angle)


def cutoffs(static: RmmStaticParams, dynamic: RmmDynamicParams, rho: float = None):
    """The four nonzero frequencies at k = 0 (closed form).

    Ordering: (w3, w4, w5, w6) = (rotational/shear, symmetric shear,
    deviatoric pressure, volumetric pressure); the curvature terms do not
    enter at k = 0.  ``rho`` is accepted for signature symmetry but the
    mass-scaled products absorb it.
    """
    denominators = np.array(
        [dynamic.j1_c, dynamic.j1_ms, dynamic.j1_m, dynamic.j1_lam + dynamic.j1_m]
    )
    if np.any(denominators <= 0.0):
        raise InadmissibleInertiaError("cut-off formulas require positive inertias")
    ce, cm = static.c_e, static.c_micro
    numerators = np.array(
        [
            static.mu_c,
            ce.mu_star + cm.mu_star,
            ce.mu + cm.mu,
            ce.lam + ce.mu + cm.lam + cm.mu,
        ]
    )
    w = np.sqrt(numerators / denominators)
    return tuple(w)


def identify_j1(
    static: RmmStaticParams, rho: float = None, measured=None
) -> RmmDynamicParams:
    """Invert the cut-off formulas for the first inertia block.

    ``measured`` = (w_s1, w_s2, w_p1, w_p2): the rotational and symmetric
    shear cut-offs and the deviatoric and volumetric pressure cut-offs.
    """
    if measured is None:
        raise ValueError("measured cut-offs required")
    w_s1, w_s2, w_p1, w_p2 = [float(w) for w in measured]
    if min(w_s1, w_s2, w_p1, w_p2) <= 0.0:
        raise ValueError("measured cut-off frequencies must be positive")
    ce, cm = static.c_e, static.c_micro
    j1_c = static.mu_c / w_s1**2
    j1_ms = (ce.mu_star + cm.mu_star) / w_s2**2
    j1_m = (ce.mu + cm.mu) / w_p1**2
    j1_lam_plus_m = (ce.lam + ce.mu + cm.lam + cm.mu) / w_p2**2
    return RmmDynamicParams(
        j1_lam=j1_lam_plus_m - j1_m, j1_m=j1_m, j1_ms=j1_ms, j1_c=j1_c
    )


def _rotated_inputs(static: RmmStaticParams, dynamic: RmmDynamicParams):
    static45 = RmmStaticParams(
        c_e=static.c_e.rotated_45(),
        c_micro=static.c_micro.rotated_45(),
        mu_c=static.mu_c,
        mu_lc2=static.mu_lc2,
    )
    return static45, dynamic.rotated_45()


def decoupled_blocks(
    static: RmmStaticParams,
    dynamic: RmmDynamicParams,
    rho: float,
    k: float,
    angle: float,
    curvature: bool = True,
):
    """Pressure and shear 3x3 blocks at incidence 0 or 45 degrees.

    The 45-degree case is the 0-degree assembly with the tetragonal
    families rotated; the isotropic rotational and curvature parameters
    are unchanged.  Returns {"pressure": (K3, M3), "shear": (K3, M3)}.
    """
    if math.isclose(angle, 0.0, abs_tol=1e-12):
        st, dy = static, dynamic
    elif math.isclose(angle, math.pi / 4.0, abs_tol=1e-12):
        st, dy = _rotated_inputs(static, dynamic)
    else:
        raise ValueError("decoupled blocks exist only at 0 and 45 degrees")
    sys0 = assemble_system(st, dy, rho, k, 0.0, curvature=curvature)
    p = np.ix_(PRESSURE_INDICES, PRESSURE_INDICES)
    s = np.ix_(SHEAR_INDICES, SHEAR_INDICES)
    return {
        "pressure": (sys0.k_matrix[p], sys0.m_matrix[p]),
        "shear": (sys0.k_matrix[s], sys0.m_matrix[s]),
    }


def branches(
    static: RmmStaticParams,
    dynamic: RmmDynamicParams,
    rho: float,
    angle: float,
    k_samples,
    curvature: bool = True,
) -> DispersionCurveSet:
    """Dispersion branches over the sampled wavenumbers.

    At the symmetry angles the pressure/shear 3x3 blocks are solved and the
    branch types are exact; at other angles the full 6x6 problem is solved
    and branches are labeled 'mixed'.
    """
    k_samples = np.asarray(k_samples, dtype=float)
    nk = len(k_samples)
    omega = np.zeros((nk, 6))
    tlab = np.full((nk, 6), "mixed", dtype=object)
    mlab = np.full((nk, 6), "optic", dtype=object)
    symmetry_angle = math.isclose(angle, 0.0, abs_tol=1e-12) or math.isclose(
        angle, math.pi / 4.0, abs_tol=1e-12
    )
    for ik, kk in enumerate(k_samples):
        if symmetry_angle:
            blocks = decoupled_blocks(static, dynamic, rho, kk, angle, curvature)
            entries = []
            for wave_type, (K3, M3) in blocks.items():
                ws = _frequencies(K3, M3)
                for rank, w in enumerate(ws):
                    entries.append((w, wave_type, "acoustic" if rank == 0 else "optic"))
            entries.sort(key=lambda t: t[0])
            for b, (w, t, m) in enumerate(entries):
                omega[ik, b] = w
                tlab[ik, b] = t
                mlab[ik, b] = m
        else:
            sys6 = assemble_system(static, dynamic, rho, kk, angle, curvature)
            omega[ik] = sys6.frequencies()
            order = np.argsort(omega[ik])
            omega[ik] = omega[ik][order]
            mlab[ik] = np.where(np.arange(6) < 2, "acoustic", "optic")
    return DispersionCurveSet(
        angle=angle, k=k_samples, omega=omega, type_labels=tlab, mode_labels=mlab
    )
