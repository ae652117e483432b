"""Tetragonal 2D elasticity tensors and the macro/coupling/micro relations.

A 2D tetragonal elasticity tensor is determined by three constants
(lambda, mu, mu_star).  In Voigt notation, acting on (e11, e22, 2*e12),

    C = [[lam + 2 mu, lam,        0      ],
         [lam,        lam + 2 mu, 0      ],
         [0,          0,          mu_star]].

The three scalar families (mu, mu_star, lam + mu) diagonalize the
micro/macro relations exactly, so all algebra here is done family-wise;
the matrix form exists for assembly and positive-definiteness checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TetragonalElasticity",
    "BaseMaterial",
    "RmmStaticParams",
    "StiffnessOrderingError",
    "macro_from_micro_e",
    "e_from_micro_macro",
    "round_trip_check",
]


class StiffnessOrderingError(ValueError):
    """Raised when a micro tensor is not strictly stiffer than the macro one."""


@dataclass(frozen=True)
class TetragonalElasticity:
    """Tetragonal plane-strain elasticity constants, SI (Pa)."""

    lam: float
    mu: float
    mu_star: float

    @classmethod
    def isotropic(cls, lam: float, mu: float) -> "TetragonalElasticity":
        return cls(lam=lam, mu=mu, mu_star=mu)

    @property
    def families(self) -> np.ndarray:
        """The decoupled scalar families (mu, mu_star, lam + mu)."""
        return np.array([self.mu, self.mu_star, self.lam + self.mu])

    @classmethod
    def from_families(cls, families) -> "TetragonalElasticity":
        mu, mu_star, lam_plus_mu = families
        return cls(lam=lam_plus_mu - mu, mu=mu, mu_star=mu_star)

    def voigt(self) -> np.ndarray:
        return np.array(
            [
                [self.lam + 2.0 * self.mu, self.lam, 0.0],
                [self.lam, self.lam + 2.0 * self.mu, 0.0],
                [0.0, 0.0, self.mu_star],
            ]
        )

    def is_positive_definite(self) -> bool:
        # Voigt eigenvalues are 2(lam + mu), 2 mu, mu_star.
        return self.mu > 0.0 and self.mu_star > 0.0 and self.lam + self.mu > 0.0

    def rotated_45(self) -> "TetragonalElasticity":
        """Constants in a frame rotated by 45 degrees.

        A tetragonal tensor stays tetragonal; the shear and deviatoric
        moduli swap: (lam, mu, mu_star) -> (lam + mu - mu_star, mu_star, mu).
        """
        return TetragonalElasticity(
            lam=self.lam + self.mu - self.mu_star, mu=self.mu_star, mu_star=self.mu
        )


@dataclass(frozen=True)
class BaseMaterial:
    """Isotropic base material of the unit-cell (plane strain), SI."""

    lam: float
    mu: float
    rho: float

    def __post_init__(self):
        if self.mu <= 0.0 or self.lam + 2.0 * self.mu <= 0.0:
            raise ValueError("base material must be elastically stable")
        if self.rho <= 0.0:
            raise ValueError("density must be positive")

    @property
    def elasticity(self) -> TetragonalElasticity:
        return TetragonalElasticity.isotropic(self.lam, self.mu)


@dataclass(frozen=True)
class RmmStaticParams:
    """Static parameter set of the relaxed micromorphic model.

    ``mu_lc2`` is the single curvature coefficient mu * L_c^2 in N; ``mu_c``
    is the rotational (Cosserat-type) coupling modulus in Pa.
    """

    c_e: TetragonalElasticity
    c_micro: TetragonalElasticity
    mu_c: float
    mu_lc2: float

    def is_admissible(self) -> bool:
        return (
            self.c_e.is_positive_definite()
            and self.c_micro.is_positive_definite()
            and self.mu_c >= 0.0
            and self.mu_lc2 > 0.0
        )

    def require_admissible(self) -> None:
        if not self.is_admissible():
            raise ValueError(f"inadmissible static parameter set: {self}")

    @property
    def c_macro(self) -> TetragonalElasticity:
        return macro_from_micro_e(self.c_micro, self.c_e)

    @classmethod
    def from_macro(
        cls,
        c_micro: TetragonalElasticity,
        c_macro: TetragonalElasticity,
        mu_c: float,
        mu_lc2: float,
    ) -> "RmmStaticParams":
        """Build the set from (C_micro, C_macro), eliminating C_e."""
        return cls(
            c_e=e_from_micro_macro(c_micro, c_macro),
            c_micro=c_micro,
            mu_c=mu_c,
            mu_lc2=mu_lc2,
        )


def macro_from_micro_e(
    c_micro: TetragonalElasticity, c_e: TetragonalElasticity
) -> TetragonalElasticity:
    """Effective tensor of the series sum of C_e and C_micro.

    C_macro = C_micro (C_e + C_micro)^-1 C_e, which is family-wise the
    harmonic-type combination x_e x_micro / (x_e + x_micro); it is softer
    than both inputs.
    """
    if not (c_micro.is_positive_definite() and c_e.is_positive_definite()):
        raise ValueError("both tensors must be positive definite")
    fm, fe = c_micro.families, c_e.families
    denom = fm + fe
    if np.any(denom <= 0.0):
        raise ValueError("singular series sum: C_e + C_micro not invertible")
    return TetragonalElasticity.from_families(fm * fe / denom)


def e_from_micro_macro(
    c_micro: TetragonalElasticity, c_macro: TetragonalElasticity
) -> TetragonalElasticity:
    """Coupling tensor from the micro and macro tensors.

    Family-wise x_e = x_micro x_macro / (x_micro - x_macro); requires the
    micro tensor to be strictly stiffer than the macro one in every family.
    """
    fm, fM = c_micro.families, c_macro.families
    denom = fm - fM
    if np.any(denom <= 0.0):
        bad = ["mu", "mu_star", "lam+mu"][int(np.argmin(denom))]
        raise StiffnessOrderingError(
            f"micro tensor not strictly stiffer than macro in family {bad!r}"
        )
    return TetragonalElasticity.from_families(fm * fM / denom)


def round_trip_check(
    c_micro: TetragonalElasticity, c_macro: TetragonalElasticity
) -> float:
    """Relative residual of recomposing C_macro through C_e."""
    back = macro_from_micro_e(c_micro, e_from_micro_macro(c_micro, c_macro))
    ref = np.linalg.norm(c_macro.voigt())
    return float(np.linalg.norm(back.voigt() - c_macro.voigt()) / ref)
