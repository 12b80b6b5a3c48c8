"""Scalar flow diagnostics: baseline semantics, exact flat values, clamping."""

import numpy as np
import pytest

from iiblab import DiagnosticsRecord, TorusGrid, compute_diagnostics, flat_metric
from iiblab.metrics import balanced_band_metric, fourier_scalar

GRID = TorusGrid(3, (0, 1), 8)

EXPECTED_KEYS = {
    "t", "hEigMin", "hEigMax", "tauMax", "normMax", "normMin",
    "sMax", "trhMin", "trhMax", "detHMin", "balancedDefect", "torsionSqMax",
}


def test_flat_record_values_are_exact():
    flat = flat_metric(GRID)
    rec = compute_diagnostics(GRID, flat, flat, t=0.5)
    assert rec.t == 0.5
    assert rec.h_eig_min == rec.h_eig_max == 1.0
    assert rec.tau_max == 0.0
    assert rec.norm_max == rec.norm_min == 1.0
    assert rec.s_max == 0.0
    assert rec.trh_min == rec.trh_max == 3.0
    assert rec.det_h_min == 1.0
    assert rec.balanced_defect == 0.0
    assert rec.torsion_sq_max == 0.0
    assert rec.test_function_max is None
    assert rec.is_finite()


def test_constant_rescale_against_flat_baseline():
    flat = flat_metric(GRID)
    rec = compute_diagnostics(GRID, 2.0 * flat, flat, t=0.0)
    assert rec.h_eig_min == pytest.approx(2.0, abs=1e-13)
    assert rec.h_eig_max == pytest.approx(2.0, abs=1e-13)
    assert rec.trh_min == pytest.approx(6.0, abs=1e-12)
    assert rec.det_h_min == pytest.approx(8.0, abs=1e-12)
    # both metrics are connection-free, so the comparison field stays zero
    assert rec.s_max == 0.0
    assert rec.norm_max == pytest.approx(8.0 ** -0.5, abs=1e-15)


def test_balanced_family_record_shape():
    f = fourier_scalar(GRID, [[1, 1, 0.0, -0.1], [1, -1, 0.0, -0.1]])
    g = balanced_band_metric(GRID, f)
    rec = compute_diagnostics(GRID, g, g, t=0.0)
    assert rec.balanced_defect < 1e-10
    assert rec.torsion_sq_max > 1e-6
    assert rec.tau_max > 1e-4
    assert rec.h_eig_min == pytest.approx(1.0, abs=1e-12)
    assert rec.det_h_min == pytest.approx(1.0, abs=1e-12)
    assert rec.is_finite()


def test_dict_keys_are_camel_case():
    flat = flat_metric(GRID)
    rec = compute_diagnostics(GRID, flat, flat, t=0.0)
    assert set(rec.to_dict()) == EXPECTED_KEYS


def test_test_function_clamps_vanishing_s():
    """At the baseline time S is identically zero; the blended test
    function must still come out finite (log floor) and carry the trace
    term on top."""
    flat = flat_metric(GRID)
    rec = compute_diagnostics(GRID, flat, flat, t=0.0, test_function=(0.1, 2.0))
    assert rec.test_function_max is not None
    assert np.isfinite(rec.test_function_max)
    assert rec.test_function_max == pytest.approx(np.log(1e-300) + 0.3, abs=1e-9)
    assert "testFunctionMax" in rec.to_dict()
    assert rec.is_finite()


def test_test_function_tracks_s_once_nonzero():
    flat = flat_metric(GRID)
    f = fourier_scalar(GRID, [[1, 1, 0.0, -0.1], [1, -1, 0.0, -0.1]])
    g = balanced_band_metric(GRID, f)
    rec = compute_diagnostics(GRID, g, flat, t=0.0, test_function=(0.0, 0.0))
    # with epsilon = a = 0 the test function is exactly log max S
    assert rec.test_function_max == pytest.approx(np.log(rec.s_max), rel=1e-12)


def test_record_is_plain_dataclass():
    rec = DiagnosticsRecord(
        t=0.0, h_eig_min=1.0, h_eig_max=1.0, tau_max=0.0, norm_max=1.0,
        norm_min=1.0, s_max=0.0, trh_min=3.0, trh_max=3.0, det_h_min=1.0,
        balanced_defect=0.0, torsion_sq_max=0.0,
    )
    with pytest.raises(AttributeError):
        rec.t = 1.0
    bad = DiagnosticsRecord(
        t=0.0, h_eig_min=np.nan, h_eig_max=1.0, tau_max=0.0, norm_max=1.0,
        norm_min=1.0, s_max=0.0, trh_min=3.0, trh_max=3.0, det_h_min=1.0,
        balanced_defect=0.0, torsion_sq_max=0.0,
    )
    assert not bad.is_finite()
