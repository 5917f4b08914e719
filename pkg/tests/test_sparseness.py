import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsens.errors import DegenerateInputError, DomainError, InputError, ResolutionError
from sparsens.samples import gaussian_bump, indicator, indicator_example, plane_wave
from sparsens.sparseness import (
    LocalFraction,
    SparsenessParams,
    apriori_certificate,
    ball_indicator,
    certify,
    chebyshev_scale,
    max_local_fraction,
    mu_exponent,
    nonsparse_scale,
    superlevel_mask,
)
from sparsens.spectral_core import Field, Grid, lp_norm


def brute_force_fraction(grid, mask, ell):
    """Direct enumeration of every lattice centre."""
    ball = ball_indicator(grid, ell)
    offsets = np.argwhere(ball)
    best = 0
    for centre in np.ndindex(*grid.shape):
        idx = tuple(((offsets[:, a] + centre[a]) % grid.n) for a in range(grid.d))
        best = max(best, int(mask[idx].sum()))
    return best / len(offsets)


@pytest.fixture(scope="module")
def example_grid():
    return Grid(1, 4096, 8.0)


# -- superlevel sets ------------------------------------------------------------


def test_indicator_example_superlevel_measure(example_grid):
    g = example_grid
    mask = superlevel_mask(indicator_example(g, 0.1), 0.5)
    assert abs(mask.sum() * g.h - 0.1) <= g.h


def test_constant_superlevel_is_full():
    g = Grid(2, 8, 1.0)
    f = Field(g, np.full(g.shape, 3.0))
    assert superlevel_mask(f, 1.5).all()
    assert not superlevel_mask(f, 3.5).any()


def test_negative_threshold_rejected():
    with pytest.raises(InputError):
        superlevel_mask(Field.zeros(Grid(1, 8, 1.0)), -1.0)


# -- local fractions ------------------------------------------------------------


def test_indicator_example_local_fraction(example_grid):
    g = example_grid
    mask = superlevel_mask(indicator_example(g, 0.1), 0.5)
    assert abs(max_local_fraction(g, mask, 1.0) - 0.05) <= 2 * g.h


@pytest.mark.parametrize("fill, expected", [(False, 0.0), (True, 1.0)])
def test_empty_and_full_masks(fill, expected):
    g = Grid(2, 16, 4.0)
    assert max_local_fraction(g, np.full(g.shape, fill), 1.0) == expected


def test_radius_limits():
    g = Grid(1, 64, 1.0)
    mask = np.zeros(g.shape, bool)
    with pytest.raises(ResolutionError):
        max_local_fraction(g, mask, 1.5 * g.h)
    with pytest.raises(DomainError):
        max_local_fraction(g, mask, 0.6)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), ell=st.floats(0.5, 1.75), density=st.floats(0.05, 0.6))
def test_local_fraction_matches_enumeration(seed, ell, density):
    g = Grid(2, 16, 4.0)
    mask = np.random.default_rng(seed).random(g.shape) < density
    assert max_local_fraction(g, mask, ell) == pytest.approx(brute_force_fraction(g, mask, ell))


# -- certificates ---------------------------------------------------------------


def test_indicator_example_certified(example_grid):
    cert = certify(indicator_example(example_grid, 0.1), SparsenessParams(0.1, 0.5, 1.0, "inf"))
    assert cert.verdict
    assert cert.measured_beta <= 0.5


def test_constant_fails():
    g = Grid(1, 64, 4.0)
    cert = certify(Field(g, np.full(g.shape, 2.0)), SparsenessParams(0.9, 0.5, 1.0))
    assert cert.measured_epsilon == 1.0
    assert not cert.verdict


def test_zero_field_is_degenerate():
    with pytest.raises(DegenerateInputError):
        certify(Field.zeros(Grid(1, 16, 1.0)), SparsenessParams(0.1, 0.5, 0.25))


@pytest.mark.parametrize(
    "eps, beta, ell", [(0.0, 0.5, 1.0), (1.0, 0.5, 1.0), (0.5, 1.0, 1.0), (0.5, 0.5, 0.0)]
)
def test_params_validated(eps, beta, ell):
    with pytest.raises(InputError):
        SparsenessParams(eps, beta, ell)


def test_gaussian_bump_brute_force():
    g = Grid(2, 64, 16.0)
    u = gaussian_bump(g, 0.5)
    cert = certify(u, SparsenessParams(0.05, 0.1, 8.0, "inf"))
    assert cert.verdict
    assert cert.measured_epsilon == pytest.approx(brute_force_fraction(g, cert.mask, 8.0))
    assert cert.measured_epsilon <= 0.05


def test_translation_invariance():
    g = Grid(2, 32, 8.0)
    u = gaussian_bump(g, 0.6, center=(0.3, -0.2)) + gaussian_bump(g, 0.3, center=(-2, 1))
    params = SparsenessParams(0.2, 0.3, 1.5, 4)
    a = certify(u, params)
    b = certify(u.shifted((5, -11)), params)
    assert a.measured_epsilon == b.measured_epsilon
    assert a.measured_beta == pytest.approx(b.measured_beta, rel=1e-12)


@pytest.mark.parametrize("lam", [2, 4])
def test_scaling_covariance(lam):
    big = Grid(2, 64, 16.0)
    small = Grid(2, 64, 16.0 / lam)
    vals = gaussian_bump(big, 1.0).values
    a = certify(Field(big, vals), SparsenessParams(0.1, 0.2, 4.0))
    b = certify(Field(small, vals), SparsenessParams(0.1, 0.2, 4.0 / lam))
    assert a.measured_epsilon == b.measured_epsilon
    assert a.verdict == b.verdict


@pytest.mark.parametrize("c", [-4.0, 0.125, 3.7])
def test_amplitude_invariance(c):
    g = Grid(1, 512, 8.0)
    u = gaussian_bump(g, 0.3) + 0.4 * gaussian_bump(g, 0.2, center=(2.0,))
    params = SparsenessParams(0.2, 0.25, 1.0, 3)
    a, b = certify(u, params), certify(c * u, params)
    assert a.measured_epsilon == b.measured_epsilon
    assert a.measured_beta == pytest.approx(b.measured_beta, rel=1e-9)
    assert a.verdict == b.verdict


# -- Chebyshev scale ------------------------------------------------------------


@pytest.mark.parametrize("d", [1, 2, 3])
def test_unit_cube_indicator_scale(d):
    g = Grid(d, 16, 4.0)
    f = Field.from_function(
        g, lambda *xs: np.logical_and.reduce(np.broadcast_arrays(*[(x >= 0) & (x < 1) for x in xs])).astype(float)
    )
    cs = chebyshev_scale(f, "inf")
    assert cs.l1_scale == pytest.approx(1.0)
    assert cs.superlevel_volume == pytest.approx(1.0)
    assert cs.bound_holds


@pytest.mark.parametrize("d, p, mu", [(3, "inf", 2 / 3), (2, 4, 2.0), (1, 6, 3.0)])
def test_mu_exponent(d, p, mu):
    assert mu_exponent(d, p) == pytest.approx(mu)


def test_mu_requires_p_above_two():
    with pytest.raises(InputError):
        mu_exponent(2, 2)


@pytest.mark.parametrize("lam", [2, 4])
def test_chebyshev_scale_dilation(lam):
    big = Grid(2, 64, 16.0)
    vals = gaussian_bump(big, 1.0).values
    a = chebyshev_scale(Field(big, vals), 4)
    b = chebyshev_scale(Field(Grid(2, 64, 16.0 / lam), vals), 4)
    assert b.ell0 == pytest.approx(a.ell0 / lam, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), q=st.floats(0.0, 1.0))
def test_chebyshev_inequality(seed, q):
    g = Grid(2, 16, 3.0)
    f = Field(g, np.random.default_rng(seed).standard_normal(g.shape))
    lam = q * lp_norm(f, "inf")
    measure = superlevel_mask(f, lam).sum() * g.cell_volume
    assert lam * measure <= lp_norm(f, 1) * (1 + 1e-12)


# -- a priori certificate -------------------------------------------------------


def _bumps(n=128):
    g = Grid(2, n, 16.0)
    return gaussian_bump(g, 0.4) + 0.6 * gaussian_bump(g, 0.25, center=(3.0, -2.0))


@pytest.mark.parametrize("p", [3, 4, "inf"])
def test_apriori_bounds(p):
    u = _bumps()
    ap = apriori_certificate(u, 0.1, 0.5, p)
    assert ap.certificate.verdict
    assert ap.witness_volume <= ap.volume_bound
    assert ap.tail_norm <= ap.tail_bound * (1 + 1e-12)


def test_apriori_a_is_minimal_dyadic():
    u = _bumps()
    ap = apriori_certificate(u, 0.1, 0.5, "inf")
    g = u.grid
    frac = LocalFraction(g, ap.certificate.mask)
    a = 1
    while not (a * ap.ell0 >= 2 * g.h and frac(a * ap.ell0) <= 0.1):
        a *= 2
    assert ap.a == a


def test_apriori_monotone_in_a():
    u = _bumps()
    ap = apriori_certificate(u, 0.1, 0.5, 4)
    frac = LocalFraction(u.grid, ap.certificate.mask)
    a_values = [a for a in (1, 2, 4, 8, 16) if 2 * u.grid.h <= a * ap.ell0 <= 8.0]
    fractions = [frac(a * ap.ell0) for a in a_values]
    assert all(x >= y for x, y in zip(fractions, fractions[1:]))


def test_apriori_box_too_small():
    g = Grid(1, 64, 1.0)
    u = plane_wave(g, (1,))
    with pytest.raises(DomainError):
        apriori_certificate(u, 0.01, 0.5, "inf")


def test_apriori_requires_p_above_two():
    with pytest.raises(InputError):
        apriori_certificate(_bumps(32), 0.1, 0.5, 2)


# -- non-sparseness scale -------------------------------------------------------


def test_sine_lower_scale():
    g = Grid(1, 1024, 5.0)
    u = Field.from_function(g, lambda x: np.sin(2 * np.pi * x / g.L))
    res = nonsparse_scale(u, 0, 0.5)
    assert res.ell == pytest.approx(0.5 * g.L / (2 * np.pi), rel=1e-10)
    assert res.fails_at_half
    assert not res.certificate.verdict


def test_constant_lower_scale_is_infinite():
    g = Grid(1, 64, 1.0)
    res = nonsparse_scale(Field(g, np.full(g.shape, 2.0)), 0, 0.5)
    assert res.ell == math.inf
    assert res.fails_at_half


@pytest.mark.parametrize("k", [0, 1])
def test_gaussian_lower_scale_proportional_to_width(k):
    g = Grid(1, 2048, 16.0)
    a = nonsparse_scale(gaussian_bump(g, 0.25), k, 0.5).ell
    b = nonsparse_scale(gaussian_bump(g, 0.5), k, 0.5).ell
    assert b / a == pytest.approx(2.0, rel=1e-3)


def test_lower_scale_unresolved():
    g = Grid(1, 16, 1.0)
    with pytest.raises(ResolutionError):
        nonsparse_scale(indicator(g, 0.3), 0, 0.5)
