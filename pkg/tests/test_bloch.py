"""Bloch-Floquet oracles.

Homogeneous-cell wave speeds for the aluminum base material:
    c_s = sqrt(26.32e9 / 2700) = 3122.1 m/s
    c_p = sqrt((51.08 + 2*26.32)e9 / 2700) = 6198.1 m/s
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from micromorph.bloch import MissingCutoffsError, bloch_bands, extract_cutoffs
from micromorph.curves import DispersionCurveSet, band_gap
from micromorph.geometry import paper_like_cell, solid_square_cell
from micromorph.tensors import BaseMaterial

GPA = 1e9
BASE = BaseMaterial(lam=51.08 * GPA, mu=26.32 * GPA, rho=2700.0)
L = 1e-3
C_S = math.sqrt(BASE.mu / BASE.rho)
C_P = math.sqrt((BASE.lam + 2 * BASE.mu) / BASE.rho)


@pytest.fixture(scope="module")
def homogeneous_curves():
    ks = np.linspace(0.0, math.pi / (2 * L), 6)
    return bloch_bands(solid_square_cell(L), BASE, 0.0, ks, n_branches=6, resolution=10)


class TestHomogeneous:
    def test_rigid_modes_at_k0(self, homogeneous_curves):
        # solver tolerance: sqrt(eps * lambda_max) of the pencil
        tol = 1e-6 * homogeneous_curves.omega.max()
        assert_allclose(homogeneous_curves.omega[0, :2], 0.0, atol=tol)

    def test_acoustic_speeds(self, homogeneous_curves):
        ks = homogeneous_curves.k[1:]
        shear = homogeneous_curves.omega[1:, 0] / ks
        pressure = homogeneous_curves.omega[1:, 1] / ks
        assert_allclose(shear, C_S, rtol=1e-2)
        assert_allclose(pressure, C_P, rtol=1e-2)

    def test_polarization_labels(self, homogeneous_curves):
        assert np.all(homogeneous_curves.type_labels[1:, 0] == "shear")
        assert np.all(homogeneous_curves.type_labels[1:, 1] == "pressure")

    def test_folded_branch_at_zone_edge(self):
        ks = np.array([math.pi / L])
        curves = bloch_bands(
            solid_square_cell(L), BASE, 0.0, ks, n_branches=4, resolution=20
        )
        # first two branches: shear at c_s*pi/l (doubly folded)
        assert_allclose(curves.omega[0, 0], C_S * math.pi / L, rtol=1e-2)
        assert_allclose(curves.omega[0, 1], C_S * math.pi / L, rtol=1e-2)

    def test_no_cutoffs_reported_for_homogeneous(self, homogeneous_curves):
        with pytest.raises(MissingCutoffsError, match="homogeneous"):
            extract_cutoffs(homogeneous_curves)

    def test_band_gap_empty(self, homogeneous_curves):
        ks = np.linspace(0.0, math.pi / L, 21)
        curves = bloch_bands(
            solid_square_cell(L), BASE, 0.0, ks, n_branches=6, resolution=10
        )
        assert band_gap(curves) == []


class TestSymmetryChecks:
    def test_angle0_equals_angle90(self):
        ks = np.linspace(0.0, math.pi / L, 4)
        a = bloch_bands(paper_like_cell(L), BASE, 0.0, ks, 6, resolution=20)
        b = bloch_bands(paper_like_cell(L), BASE, math.pi / 2, ks, 6, resolution=20)
        assert_allclose(a.omega, b.omega, rtol=1e-8, atol=1e-6 * a.omega.max())

    def test_45_degree_sampling_limit(self):
        ks = np.array([1.2 * math.pi / L])
        with pytest.raises(ValueError):
            bloch_bands(paper_like_cell(L), BASE, 0.0, ks, 6, resolution=20)
        # the same k is valid at 45 degrees
        bloch_bands(paper_like_cell(L), BASE, math.pi / 4, ks, 4, resolution=20)


class TestMicrostructuredCell:
    @pytest.fixture(scope="class")
    def cell_curves(self):
        ks = np.linspace(0.0, math.pi / L, 5)
        return bloch_bands(paper_like_cell(L), BASE, 0.0, ks, 8, resolution=20)

    def test_acoustic_branches_vanish_at_k0(self, cell_curves):
        tol = 1e-6 * cell_curves.omega.max()
        assert_allclose(cell_curves.omega[0, :2], 0.0, atol=tol)

    def test_four_labeled_cutoffs(self, cell_curves):
        cut = extract_cutoffs(cell_curves)
        values = np.asarray(cut.as_tuple())
        assert np.all(values > 0.0)
        assert cut.shear_1 < cut.shear_2
        assert cut.pressure_1 < cut.pressure_2

    def test_cutoffs_direction_independent(self, cell_curves):
        ks45 = np.linspace(0.0, math.sqrt(2) * math.pi / L, 5)
        curves45 = bloch_bands(paper_like_cell(L), BASE, math.pi / 4, ks45, 8, resolution=20)
        cut = extract_cutoffs(cell_curves, curves45, rtol=1e-6)
        assert np.all(np.asarray(cut.as_tuple()) > 0.0)

    def test_band_gap_present(self):
        ks = np.linspace(0.0, math.pi / L, 21)
        curves = bloch_bands(paper_like_cell(L), BASE, 0.0, ks, 8, resolution=20)
        gaps = band_gap(curves)
        assert gaps, "expected a stop band for the perforated cell"


class TestBandGapSynthetic:
    def test_constructed_gap(self):
        k = np.linspace(0.0, 10.0, 21)
        w1 = np.minimum(k * 1.0, 5.0)
        w2 = np.full_like(k, 8.0) + 0.2 * k
        curves = DispersionCurveSet(
            angle=0.0, k=k, omega=np.stack([w1, w2], axis=1)
        )
        gaps = band_gap(curves)
        assert len(gaps) == 1
        assert_allclose(gaps[0], (5.0, 8.0), rtol=1e-12)

    def test_too_few_samples_rejected(self):
        k = np.linspace(0.0, 10.0, 5)
        curves = DispersionCurveSet(
            angle=0.0, k=k, omega=np.stack([k, k + 1], axis=1)
        )
        with pytest.raises(ValueError, match="samples"):
            band_gap(curves)
