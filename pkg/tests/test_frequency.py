import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsens.errors import RangeError
from sparsens.frequency import (
    C1,
    C2,
    DyadicDecomposition,
    FrequencySparsenessParams,
    TruncationWarning,
    besov_norm,
    besov_profile,
    bernstein_ratio,
    block,
    block_energy_csv,
    certify_frequency,
    chi,
    high_pass,
    low_pass,
    low_pass_ratio,
    phi,
    spatial_implies_frequency_check,
)
from sparsens.samples import gaussian_bump, plane_wave, white_noise
from sparsens.spectral_core import Field, Grid, lp_norm


def mode_grid(n=1024, d=1):
    # L = 2 pi puts wavenumber kappa at physical frequency |xi| = kappa
    return Grid(d, n, 2 * np.pi)


# -- profiles -------------------------------------------------------------------


def test_profile_supports():
    r = np.linspace(0, 6, 6001)
    assert np.all(chi(r[r <= 0.75]) == 1.0)
    assert np.all(chi(r[r >= 4 / 3]) == 0.0)
    assert np.all(phi(r[(r < C1) | (r > C2)]) == 0.0)
    assert np.all((phi(r) >= 0) & (phi(r) <= 1))


@pytest.mark.parametrize("d, n, L", [(1, 1024, 7.0), (2, 128, 3.0), (3, 32, 10.0)])
def test_partition_of_unity(d, n, L):
    assert DyadicDecomposition(Grid(d, n, L)).partition_residual() <= 1e-10


def test_blocks_reconstruct_field(rng):
    g = Grid(2, 64, 5.0)
    u = Field(g, rng.standard_normal(g.shape))
    dec = DyadicDecomposition(g)
    total = dec.low_pass(u, dec.j_min)
    for j in dec.levels():
        total = total + dec.block(u, j)
    assert lp_norm(total - u, 2) <= 1e-10 * lp_norm(u, 2)


@pytest.mark.parametrize("j", [2, 3, 4, 5])
def test_non_neighbouring_blocks_are_orthogonal(j):
    dec = DyadicDecomposition(mode_grid(256, 2))
    prod = dec.block_multiplier(j) * dec.block_multiplier(j + 2)
    assert np.all(prod == 0.0)


# -- blocks and low-pass --------------------------------------------------------


@pytest.mark.parametrize("j", [0, 1, 2, 6, 7])
def test_single_mode_far_blocks_vanish(j):
    u = plane_wave(mode_grid(), (16,))  # level 4
    assert lp_norm(block(u, j), math.inf) <= 1e-12


@pytest.mark.parametrize("J", [1.5, 3, 4.25, 6])
def test_low_plus_high_is_identity(rng, J):
    g = Grid(2, 64, 4.0)
    u = Field(g, rng.standard_normal(g.shape))
    assert lp_norm(low_pass(u, J) + high_pass(u, J) - u, 2) <= 1e-10 * lp_norm(u, 2)


def test_white_noise_almost_orthogonality(rng):
    g = Grid(2, 128, 8.0)
    u = white_noise(g, rng)
    u = u - Field(g, np.full(g.shape, u.values.mean()))
    dec = DyadicDecomposition(g)
    energy = sum(lp_norm(dec.block(u, j), 2) ** 2 for j in dec.levels())
    assert 0.5 <= energy / lp_norm(u, 2) ** 2 <= 1.0


def test_low_pass_linear_and_translation_invariant(rng):
    g = Grid(2, 32, 3.0)
    u = Field(g, rng.standard_normal(g.shape))
    v = Field(g, rng.standard_normal(g.shape))
    lhs = low_pass(2.0 * u - v, 3.5)
    rhs = 2.0 * low_pass(u, 3.5) - low_pass(v, 3.5)
    assert lp_norm(lhs - rhs, 2) <= 1e-12 * lp_norm(rhs, 2)
    shifted = low_pass(u.shifted((3, -7)), 3.5)
    assert lp_norm(shifted - low_pass(u, 3.5).shifted((3, -7)), 2) <= 1e-12 * lp_norm(shifted, 2)


def test_level_out_of_range():
    dec = DyadicDecomposition(Grid(1, 64, 1.0))
    with pytest.raises(RangeError):
        dec.block(Field.zeros(dec.grid), dec.j_top + 1)
    with pytest.raises(RangeError):
        dec.low_pass(Field.zeros(dec.grid), dec.j_min - 1)


# -- frequency sparseness -------------------------------------------------------


@pytest.mark.parametrize("J, ratio", [(1, 0.0), (2, 0.0), (6, 1.0), (7.5, 1.0)])
def test_single_mode_ratio(J, ratio):
    u = plane_wave(mode_grid(), (16,))
    cert = certify_frequency(u, FrequencySparsenessParams(0.5, J), "inf")
    assert cert.ratio == pytest.approx(ratio, abs=1e-12)
    assert cert.verdict == (ratio == 0.0)


def test_two_mode_ratio():
    g = mode_grid()
    u = plane_wave(g, (16,)) + plane_wave(g, (256,))
    assert low_pass_ratio(u, 6, 2) == pytest.approx(1 / math.sqrt(2), abs=0.02)


@settings(max_examples=20, deadline=None)
@given(c=st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3), J=st.floats(1.0, 6.0))
def test_ratio_amplitude_invariant(c, J):
    g = Grid(1, 256, 8.0)
    u = gaussian_bump(g, 0.2) + plane_wave(g, (40,), 0.3)
    assert low_pass_ratio(c * u, J, 4) == pytest.approx(low_pass_ratio(u, J, 4), rel=1e-12)


@pytest.mark.parametrize("p", [1, 2, 4, "inf"])
def test_low_pass_bounded_by_calibrated_constant(registry, rng, p):
    g = Grid(2, 64, 8.0)
    C_LP = registry.constant("lowpass_bound", "C_LP", 2)
    for J in (0.0, 1.5, 3.0):
        u = white_noise(g, rng)
        assert lp_norm(low_pass(u, J), p) <= C_LP * lp_norm(u, p)


# -- Bernstein ------------------------------------------------------------------


@pytest.mark.parametrize("J", [4, 5, 6])
def test_bernstein_single_mode(registry, J):
    u = plane_wave(mode_grid(), (16,))
    assert bernstein_ratio(u, J, "inf") <= registry.constant("bernstein", "C_B", 1, "inf")


def test_bernstein_zero_low_pass():
    u = plane_wave(mode_grid(), (256,))
    assert bernstein_ratio(u, 2, "inf") == pytest.approx(0.0, abs=1e-14)


def test_low_pass_nested(rng):
    g = Grid(1, 512, 8.0)
    u = white_noise(g, rng)
    # chi(xi / 2^J) grows pointwise with J, so the L2 norms are ordered
    norms = [lp_norm(low_pass(u, J), 2) for J in (0.5, 1, 2, 4, 7)]
    assert all(b >= a - 1e-10 for a, b in zip(norms, norms[1:]))


# -- Besov ----------------------------------------------------------------------


def test_besov_single_mode():
    u = plane_wave(mode_grid(), (16,), amplitude=3.0)
    assert 0.5 <= besov_norm(u) / (3.0 / 16) <= 1.5


@pytest.mark.parametrize("sigma", [0.5, 0.4])
def test_besov_critical_scaling(sigma):
    g = Grid(2, 256, 16.0)
    a = besov_norm(gaussian_bump(g, sigma))
    b = besov_norm(2.0 * gaussian_bump(g, sigma / 2))
    assert b == pytest.approx(a, rel=0.1)


def test_besov_zero_field():
    assert besov_norm(Field.zeros(Grid(1, 64, 1.0))) == 0.0


def test_besov_warns_on_edge_level():
    g = Grid(1, 1024, 16.0)
    with pytest.warns(TruncationWarning):
        besov_norm(gaussian_bump(g, 0.5))
    assert besov_profile(gaussian_bump(g, 0.5)).truncated


def test_block_energy_csv_columns():
    g = Grid(1, 64, 4.0)
    rows = block_energy_csv(gaussian_bump(g, 0.3)).splitlines()
    assert rows[0] == "j,l2,linf"
    assert len(rows) == 1 + len(DyadicDecomposition(g).levels())


# -- spatial vs frequency -------------------------------------------------------


def test_high_mode_passes_trivially(registry):
    u = plane_wave(mode_grid(), (256,))
    rep = spatial_implies_frequency_check(u, 0.5, 4.0, "inf", registry=registry)
    assert rep.ratio <= 1e-12
    assert rep.verdict


def test_constant_is_vacuous(registry):
    g = Grid(1, 1024, 64.0)
    rep = spatial_implies_frequency_check(Field(g, np.ones(g.shape)), 0.5, 0.0, "inf", registry=registry)
    assert rep.vacuous
    assert rep.verdict
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert rep.to_dict()["vacuous"] is True
