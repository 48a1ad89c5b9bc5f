import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import crandn
from xpdrecon.errors import InvalidConfigError, InvalidShapeError
from xpdrecon.wavelets import FILTERS, dwt2, idwt2, project_linf, shrink, soft_threshold

FAMILIES = ["haar", "db2"]


@pytest.mark.parametrize("family", FAMILIES)
def test_filters_orthonormal(family):
    h, g = FILTERS[family]
    assert np.isclose(h @ h, 1.0) and np.isclose(g @ g, 1.0) and abs(h @ g) < 1e-15
    # shifted-by-two orthogonality
    for k in range(2, len(h), 2):
        assert abs(h[k:] @ h[:-k]) < 1e-15


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("levels", [1, 2, 3])
def test_perfect_reconstruction_and_energy(rng, family, levels):
    x = crandn(rng, 32, 32)
    c = dwt2(x, levels, family)
    npt.assert_allclose(idwt2(c), x, atol=1e-12)
    assert abs(c.norm() - np.linalg.norm(x)) < 1e-12 * np.linalg.norm(x)
    assert sum(a.size for a in c.arrays()) == x.size
    assert c.ll.shape == (32 >> levels, 32 >> levels)


@pytest.mark.parametrize("family", FAMILIES)
def test_adjoint_identity(rng, family):
    a = rng.standard_normal((16, 16))
    c = dwt2(rng.standard_normal((16, 16)), 2, family)
    assert abs(dwt2(a, 2, family).vdot(c) - np.vdot(a, idwt2(c))) < 1e-12


def test_haar_constant_image_exact():
    c = dwt2(np.full((8, 8), 3.0), 2, "haar")
    for band in c.details:
        for b in band:
            assert np.all(b == 0)
    npt.assert_allclose(c.norm(), np.linalg.norm(np.full((8, 8), 3.0)))


def test_db2_constant_image_details_at_roundoff():
    c = dwt2(np.full((8, 8), 3.0), 2, "db2")
    assert max(np.abs(b).max() for band in c.details for b in band) < 1e-14


def test_haar_butterfly():
    a, b, c, d = 1.0, 2.0, 5.0, 7.0
    co = dwt2(np.array([[a, b], [c, d]]), 1, "haar")
    assert co.ll[0, 0] == pytest.approx((a + b + c + d) / 2)
    # first subband letter follows rows, second columns
    lh, hl, hh = (x[0, 0] for x in co.details[0])
    assert abs(hh) == pytest.approx(abs(a - b - c + d) / 2)
    assert sorted([abs(lh), abs(hl)]) == pytest.approx(sorted([abs(a + b - c - d) / 2, abs(a - b + c - d) / 2]))


def test_zero_coeffs_give_zero_image():
    c = dwt2(np.zeros((8, 8)), 3, "db2")
    assert not np.any(idwt2(c))


def test_indivisible_shape():
    with pytest.raises(InvalidShapeError):
        dwt2(np.zeros((12, 12)), 3)
    with pytest.raises(InvalidConfigError):
        dwt2(np.zeros((8, 8)), 0)


def test_float32_stays_float32():
    c = dwt2(np.ones((8, 8), np.float32), 1, "db2")
    assert c.ll.dtype == np.float32


class TestSoftThreshold:
    def test_closed_form(self):
        z = np.array([3.0, -0.5, -4.0, 0.0])
        npt.assert_allclose(shrink(z, 1.0), [2.0, 0.0, -3.0, 0.0])

    def test_complex_modulus(self):
        assert shrink(np.array([3 + 4j]), 1.0)[0] == pytest.approx(0.8 * (3 + 4j))

    def test_lambda_zero_identity(self, rng):
        c = dwt2(crandn(rng, 16, 16), 2, "db2")
        out = soft_threshold(c, 0.0)
        for a, b in zip(out.arrays(), c.arrays()):
            npt.assert_array_equal(a, b)

    def test_ll_untouched_by_default(self, rng):
        c = dwt2(rng.standard_normal((8, 8)), 1)
        npt.assert_array_equal(soft_threshold(c, 10.0).ll, c.ll)
        assert not np.any(soft_threshold(c, 1e3, threshold_ll=True).ll)

    def test_negative_lambda(self, rng):
        with pytest.raises(InvalidConfigError):
            soft_threshold(dwt2(np.zeros((4, 4))), -1.0)

    def test_prox_grid_oracle(self, rng):
        z = rng.uniform(-3, 3, 1000)
        lam = 0.7
        grid = np.linspace(-4, 4, 8001)
        step = grid[1] - grid[0]
        cost = 0.5 * (z[:, None] - grid[None]) ** 2 + lam * np.abs(grid[None])
        best = grid[np.argmin(cost, axis=1)]
        assert np.max(np.abs(shrink(z, lam) - best)) <= step

    @given(st.floats(0, 5), st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_non_expansive(self, lam, seed):
        r = np.random.default_rng(seed)
        a, b = crandn(r, 64), crandn(r, 64)
        assert np.linalg.norm(shrink(a, lam) - shrink(b, lam)) <= np.linalg.norm(a - b) + 1e-12

    def test_moreau_identity(self, rng):
        # prox of l1 plus projection onto the dual ball recovers the input
        z = crandn(rng, 100)
        npt.assert_allclose(shrink(z, 0.8) + project_linf(z, 0.8), z, atol=1e-14)
