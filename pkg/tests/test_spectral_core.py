import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsens.errors import InputError
from sparsens.fieldio import decode_field, encode_field, read_field, write_field
from sparsens.samples import gaussian_bump, indicator, indicator_example, taylor_green
from sparsens.spectral_core import (
    Field,
    Grid,
    divergence,
    gradient,
    inner,
    inverse,
    leray_project,
    lp_norm,
    parse_exponent,
    spectral_derivative,
    transform,
)


def rel_l2(a: Field, b: Field) -> float:
    return lp_norm(a - b, 2) / max(lp_norm(b, 2), 1e-300)


# -- Grid ---------------------------------------------------------------------


@pytest.mark.parametrize(
    "d, n, L",
    [(4, 8, 1.0), (1, 12, 1.0), (1, 4, 1.0), (2, 8, 0.0), (2, 8, -1.0), (3, 512, 1.0)],
)
def test_grid_rejects_invalid(d, n, L):
    with pytest.raises(InputError):
        Grid(d, n, L)


def test_grid_spacing_and_coords():
    g = Grid(1, 16, 4.0)
    assert g.h == 0.25
    assert g.coords()[0] == -2.0
    assert g.coords()[-1] == 2.0 - 0.25


@pytest.mark.parametrize("p, expected", [("inf", math.inf), ("Infinity", math.inf), (3, 3.0), ("2.5", 2.5)])
def test_parse_exponent(p, expected):
    assert parse_exponent(p) == expected


@pytest.mark.parametrize("p", [0.5, "nan", -1])
def test_parse_exponent_rejects(p):
    with pytest.raises(InputError):
        parse_exponent(p)


def test_field_rejects_non_finite():
    g = Grid(1, 8, 1.0)
    vals = np.zeros(8)
    vals[3] = np.nan
    with pytest.raises(InputError):
        Field(g, vals)


def test_field_is_read_only():
    f = Field.zeros(Grid(1, 8, 1.0))
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


# -- transforms -----------------------------------------------------------------


def test_constant_has_single_zero_mode():
    g = Grid(2, 16, 3.0)
    F = transform(Field(g, np.full(g.shape, 2.5)))
    c = np.abs(F.coeffs[0])
    assert c[0, 0] == pytest.approx(2.5 * g.size)
    c[0, 0] = 0
    assert c.max() < 1e-10


def test_sine_has_two_conjugate_modes():
    g = Grid(1, 32, 5.0)
    f = Field.from_function(g, lambda x: np.sin(2 * np.pi * x / g.L))
    c = transform(f).coeffs[0]
    big = np.flatnonzero(np.abs(c) > 1e-9)
    assert sorted(big.tolist()) == [1, g.n - 1]
    assert c[1] == pytest.approx(np.conj(c[g.n - 1]))


@pytest.mark.parametrize("d, n", [(1, 64), (2, 32), (3, 16)])
def test_round_trip_and_parseval(rng, d, n):
    g = Grid(d, n, 2.0)
    f = Field(g, rng.standard_normal((2,) + g.shape))
    F = transform(f)
    assert rel_l2(inverse(F), f) <= 1e-12
    assert F.l2_norm() == pytest.approx(lp_norm(f, 2), rel=1e-12)


# -- norms ----------------------------------------------------------------------


def test_half_box_indicator_l1():
    g = Grid(1, 256, 1.0)
    f = indicator(g, 0.5)
    assert abs(lp_norm(f, 1) - 0.5) <= g.h


@pytest.mark.parametrize("p", [1, 2, 3.5, math.inf])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_constant_norm(d, p):
    g = Grid(d, 8, 1.5)
    c = -0.7
    f = Field(g, np.full(g.shape, c))
    assert lp_norm(f, p) == pytest.approx(abs(c) * g.L ** (d / p), rel=1e-12)


def test_indicator_example_supremum():
    g = Grid(1, 4096, 8.0)
    assert lp_norm(indicator_example(g, 0.1), math.inf) == 1.0


def test_vector_norm_uses_magnitude():
    g = Grid(1, 8, 1.0)
    f = Field(g, np.stack([np.full(8, 3.0), np.full(8, 4.0)]))
    assert lp_norm(f, math.inf) == 5.0
    assert lp_norm(f, 2) == pytest.approx(5.0)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    q=st.floats(1.0, 4.0),
    dp=st.floats(0.1, 6.0),
)
def test_interpolation_inequality(seed, q, dp):
    g = Grid(1, 64, 1.0)
    f = Field(g, np.random.default_rng(seed).standard_normal(g.shape))
    p = q + dp
    lhs = lp_norm(f, p)
    rhs = lp_norm(f, math.inf) ** (1 - q / p) * lp_norm(f, q) ** (q / p)
    assert lhs <= rhs * (1 + 1e-12)


# -- derivatives ----------------------------------------------------------------


def test_derivative_of_sine():
    g = Grid(1, 64, 3.0)
    k = 2 * np.pi / g.L
    f = Field.from_function(g, lambda x: np.sin(k * x))
    df = spectral_derivative(f, (1,))
    exact = k * np.cos(k * g.coords())
    assert np.max(np.abs(df.values[0] - exact)) <= 1e-10
    assert "nyquist_amplified" not in df.flags


def test_derivative_of_constant_is_zero():
    g = Grid(2, 16, 1.0)
    f = Field(g, np.full(g.shape, 4.0))
    assert np.max(np.abs(spectral_derivative(f, (1, 1)).values)) < 1e-12


@pytest.mark.parametrize("alpha", [(1, 0), (0, 2), (1, 1)])
def test_derivative_grid_refinement(alpha):
    coarse = gaussian_bump(Grid(2, 64, 8.0), 0.5)
    fine = gaussian_bump(Grid(2, 128, 8.0), 0.5)
    dc = spectral_derivative(coarse, alpha).values[0]
    df = spectral_derivative(fine, alpha).values[0][::2, ::2]
    assert np.max(np.abs(dc - df)) <= 1e-8


def test_rough_field_flags_nyquist():
    g = Grid(1, 64, 1.0)
    f = indicator(g, 0.3)
    assert "nyquist_amplified" in spectral_derivative(f, (1,)).flags


def test_derivative_commutes_with_round_trip(rng):
    g = Grid(2, 16, 1.0)
    f = Field(g, rng.standard_normal(g.shape))
    a = spectral_derivative(inverse(transform(f)), (1, 0))
    b = spectral_derivative(f, (1, 0))
    assert rel_l2(a, b) <= 1e-12


def test_invalid_multi_index():
    g = Grid(2, 8, 1.0)
    with pytest.raises(InputError):
        spectral_derivative(Field.zeros(g), (1,))


# -- Leray projection -----------------------------------------------------------


def test_gradient_is_annihilated():
    g = Grid(2, 32, 4.0)
    phi = gaussian_bump(g, 0.4)
    out = leray_project(gradient(phi))
    assert lp_norm(out, 2) <= 1e-12 * lp_norm(gradient(phi), 2)


def test_taylor_green_unchanged():
    g = Grid(2, 16, 2 * np.pi)
    u = taylor_green(g)
    assert rel_l2(leray_project(u), u) <= 1e-12


@pytest.mark.parametrize("d", [2, 3])
def test_projection_idempotent_and_self_adjoint(rng, d):
    g = Grid(d, 16, 1.0)
    u = Field(g, rng.standard_normal((d,) + g.shape))
    v = Field(g, rng.standard_normal((d,) + g.shape))
    Pu = leray_project(u)
    assert lp_norm(divergence(Pu), 2) <= 1e-10 * lp_norm(Pu, 2) * g.n
    assert rel_l2(leray_project(Pu), Pu) <= 1e-12
    a, b = inner(Pu, v), inner(u, leray_project(v))
    assert a == pytest.approx(b, rel=1e-10)


def test_mean_flow_kept():
    g = Grid(2, 8, 1.0)
    u = Field(g, np.stack([np.ones(g.shape), np.zeros(g.shape)]))
    assert rel_l2(leray_project(u), u) < 1e-15


def test_leray_needs_vector():
    with pytest.raises(InputError):
        leray_project(Field.zeros(Grid(2, 8, 1.0)))


# -- field file format ----------------------------------------------------------


def test_field_file_round_trip(tmp_path, rng):
    g = Grid(2, 8, 3.5)
    f = Field(g, rng.standard_normal((2,) + g.shape))
    write_field(tmp_path / "u.spns", f)
    back = read_field(tmp_path / "u.spns")
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


def test_field_file_rejects_truncated_payload(rng):
    f = Field(Grid(1, 8, 1.0), rng.standard_normal(8))
    data = encode_field(f)
    with pytest.raises(InputError):
        decode_field(data[:-8])
    with pytest.raises(InputError):
        decode_field(b"XXXX" + data[4:])
