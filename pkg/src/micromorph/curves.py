"""Sampled dispersion-curve sets and their CSV schema.

Branches are stored ascending in frequency per wavenumber sample; type and
acoustic/optic labels are kept per (sample, branch) because sorted-index
branches may change character at crossings.  The CSV schema is shared by
the Bloch reference bands and the analytic model curves so both can be
overlaid by any plotting tool:

    angle_deg,k,branch_index,omega,type_label

with type_label like "pressure-acoustic" or "mixed-optic".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["DispersionCurveSet", "band_gap"]


@dataclass(frozen=True)
class DispersionCurveSet:
    """Branches omega[i_k, i_branch] (rad/s) over wavenumbers k (rad/m)."""

    angle: float  # incidence angle, radians
    k: np.ndarray  # (nk,) ascending
    omega: np.ndarray  # (nk, nb) ascending per row
    type_labels: np.ndarray = field(default=None)  # (nk, nb) of {pressure,shear,mixed}
    mode_labels: np.ndarray = field(default=None)  # (nk, nb) of {acoustic,optic}

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        om = np.asarray(self.omega, dtype=float)
        if om.shape[0] != k.shape[0]:
            raise ValueError("omega rows must match k samples")
        if np.any(np.diff(k) < 0):
            raise ValueError("k samples must be ascending")
        if np.any(om < -1e-9 * max(om.max(initial=0.0), 1.0)):
            raise ValueError("negative frequencies")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "omega", np.maximum(om, 0.0))
        if self.type_labels is None:
            object.__setattr__(self, "type_labels", np.full(om.shape, "mixed", dtype=object))
        if self.mode_labels is None:
            modes = np.full(om.shape, "optic", dtype=object)
            object.__setattr__(self, "mode_labels", modes)

    @property
    def n_branches(self) -> int:
        return self.omega.shape[1]

    def branch_labels(self):
        """Per-branch majority label (type, mode); 'mixed' when inconsistent."""
        out = []
        for b in range(self.n_branches):
            types = set(self.type_labels[:, b])
            modes = set(self.mode_labels[:, b])
            t = types.pop() if len(types) == 1 else "mixed"
            m = modes.pop() if len(modes) == 1 else "mixed"
            out.append((t, m))
        return out

    def values_of_type(self, ik: int, wave_type: str):
        """Sorted frequencies of one type family at sample ik."""
        sel = self.type_labels[ik] == wave_type
        return np.sort(self.omega[ik, sel])

    def continuity_violations(self, factor: float = 3.0):
        """Indices (ik, ib) where a branch jumps more than ``factor`` times
        the local secant slope estimate (guards against missorted data)."""
        bad = []
        k, om = self.k, self.omega
        for b in range(self.n_branches):
            d = np.abs(np.diff(om[:, b]))
            dk = np.diff(k)
            with np.errstate(divide="ignore", invalid="ignore"):
                slopes = d / dk
            # compare each jump against the median slope of the branch
            ref = np.median(slopes[np.isfinite(slopes)]) + 1e-30
            for i, s in enumerate(slopes):
                if np.isfinite(s) and s > factor * ref and d[i] > 1e-6 * om.max():
                    bad.append((i, b))
        return bad

    # --- CSV ----------------------------------------------------------
    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("angle_deg,k,branch_index,omega,type_label\n")
            deg = math.degrees(self.angle)
            for ik, kk in enumerate(self.k):
                for b in range(self.n_branches):
                    label = f"{self.type_labels[ik, b]}-{self.mode_labels[ik, b]}"
                    fh.write(f"{deg!r},{kk!r},{b},{self.omega[ik, b]!r},{label}\n")

    @classmethod
    def from_csv(cls, path) -> "DispersionCurveSet":
        rows = []
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            expected = ["angle_deg", "k", "branch_index", "omega", "type_label"]
            if header != expected:
                raise ValueError(f"unexpected curve CSV header {header}")
            for line in fh:
                deg, k, b, om, label = line.strip().split(",")
                rows.append((float(deg), float(k), int(b), float(om), label))
        if not rows:
            raise ValueError("empty curve CSV")
        angles = {r[0] for r in rows}
        if len(angles) != 1:
            raise ValueError("curve CSV must contain a single angle")
        ks = sorted({r[1] for r in rows})
        nb = max(r[2] for r in rows) + 1
        om = np.zeros((len(ks), nb))
        tl = np.full((len(ks), nb), "mixed", dtype=object)
        ml = np.full((len(ks), nb), "optic", dtype=object)
        k_index = {k: i for i, k in enumerate(ks)}
        for deg, k, b, w, label in rows:
            i = k_index[k]
            om[i, b] = w
            t, _, m = label.partition("-")
            tl[i, b] = t
            ml[i, b] = m or "optic"
        return cls(
            angle=math.radians(rows[0][0]),
            k=np.asarray(ks),
            omega=om,
            type_labels=tl,
            mode_labels=ml,
        )


def band_gap(curves: DispersionCurveSet, min_samples: int = 20):
    """Maximal frequency intervals not covered by any sampled branch.

    Each sorted-index branch is continuous, so its image over the sampled
    zone is the interval [min_k omega_b, max_k omega_b]; gaps are the holes
    in the union of those intervals.  Two classes of spurious holes are
    suppressed: anything above the minimum of the highest computed branch
    (uncomputed bands may live there) and holes narrower than the largest
    inter-sample frequency step (sorted branches kink at crossings between
    samples, which punches pinholes of that size).
    """
    if len(curves.k) < min_samples:
        raise ValueError(
            f"band gap extraction needs >= {min_samples} k samples, "
            f"got {len(curves.k)}"
        )
    intervals = sorted(
        (curves.omega[:, b].min(), curves.omega[:, b].max())
        for b in range(curves.n_branches)
    )
    ceiling = curves.omega[:, -1].min()
    resolution = np.abs(np.diff(curves.omega, axis=0)).max() if len(curves.k) > 1 else 0.0
    gaps = []
    covered_to = intervals[0][1]
    for lo, hi in intervals[1:]:
        if lo > covered_to and covered_to < ceiling * (1.0 - 1e-12):
            width = min(lo, ceiling) - covered_to
            if width > resolution:
                gaps.append((covered_to, min(lo, ceiling)))
        covered_to = max(covered_to, hi)
    return gaps
