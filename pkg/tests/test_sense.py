import numpy as np
import numpy.testing as npt
import pytest

from xpdrecon.errors import InsufficientCalibrationError, InvalidShapeError
from xpdrecon.phantom import make_coil_maps, make_phantom
from xpdrecon.physics import ForwardOperator, apply_forward, make_mask
from xpdrecon.sense import acs_window, estimate_maps_lowfreq

# mean absolute map error on the phantom support, recorded on first run
MAE_ACS16 = 0.012495739971508706
MAE_ACS4 = 0.07568830974639276


def _mae(acs, apodize=True):
    n = 64
    # real-valued phantom: image phase would otherwise leak into the low-resolution maps
    image = make_phantom(n)
    maps = make_coil_maps(n, 4)
    mask = make_mask(n, n, 4, acs)
    est = estimate_maps_lowfreq(apply_forward(ForwardOperator(mask, maps), image), mask, apodize)
    support = np.abs(image) > 0
    return float(np.mean(np.abs(est - maps)[:, support])), est


def test_matches_true_maps():
    mae, _ = _mae(16)
    assert mae < 0.05
    assert mae == pytest.approx(MAE_ACS16, rel=1e-6)


def test_smaller_acs_not_better():
    mae16, _ = _mae(16)
    mae4, _ = _mae(4)
    assert mae4 >= mae16 - 0.01
    assert mae4 == pytest.approx(MAE_ACS4, rel=1e-6)


def test_normalized_on_support():
    _, est = _mae(16)
    energy = np.sum(np.abs(est) ** 2, axis=0)
    on = energy > 0
    npt.assert_allclose(energy[on], 1.0, atol=1e-12)


def test_single_coil_unit_magnitude():
    n = 32
    mask = make_mask(n, n, 4, 8)
    y = apply_forward(ForwardOperator(mask, np.ones((1, n, n), complex)), make_phantom(n))
    est = estimate_maps_lowfreq(y, mask)
    mag = np.abs(est[0])
    npt.assert_allclose(mag[mag > 0], 1.0, atol=1e-12)


def test_insufficient_calibration():
    mask = make_mask(16, 16, 4, 1)
    with pytest.raises(InsufficientCalibrationError):
        estimate_maps_lowfreq(np.zeros((2, 16, 16), complex), mask)


def test_shape_mismatch():
    with pytest.raises(InvalidShapeError):
        estimate_maps_lowfreq(np.zeros((2, 16, 8), complex), make_mask(16, 16, 4, 4))


def test_deterministic_and_anchor_phase():
    _, a = _mae(16)
    _, b = _mae(16)
    assert np.array_equal(a, b)
    n = 32
    mask = make_mask(n, n, 4, 8)
    y = apply_forward(ForwardOperator(mask, make_coil_maps(n, 3)), make_phantom(n))
    anchored = estimate_maps_lowfreq(y, mask, anchor_phase=True)
    ref = anchored[0][np.abs(anchored[0]) > 1e-6]
    npt.assert_allclose(np.angle(ref), 0.0, atol=1e-10)


def test_window():
    w = acs_window(6)
    assert w.shape == (6,) and np.all(w > 0) and np.allclose(w, w[::-1])
    npt.assert_array_equal(acs_window(6, apodize=False), np.ones(6))
