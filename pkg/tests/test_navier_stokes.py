import math

import numpy as np
import pytest

from sparsens.errors import CFLError, ContractError, DomainError, InputError, RangeError
from sparsens.navier_stokes import (
    NSState,
    Solver,
    admissible_dt,
    criterion_thresholds,
    cutoff_level,
    decreasing_experiment,
    duhamel_bound_check,
    effective_duhamel_constant,
    escape_times,
    guaranteed_time,
    integrate,
    monitor,
    relative_divergence,
    step,
)
from sparsens.samples import random_solenoidal, taylor_green, vortex_dipole
from sparsens.semigroup import evolve
from sparsens.spectral_core import Field, Grid, curl, lp_norm

TG_GRID = Grid(2, 64, 2 * math.pi)


def shifted_taylor_green(t: float, drift=(1.0, 0.5)) -> np.ndarray:
    """Taylor-Green vortex carried by a uniform flow: an exact solution that is not steady for Euler."""
    x, y = TG_GRID.mesh()
    xs, ys = x - drift[0] * t, y - drift[1] * t
    decay = math.exp(-2 * t)
    return np.stack(
        [drift[0] + decay * np.sin(xs) * np.cos(ys), drift[1] - decay * np.cos(xs) * np.sin(ys)]
    )


# -- stepping -------------------------------------------------------------------


def test_zero_field_stays_zero():
    u = Field.zeros(TG_GRID, 2)
    out = step(NSState(u), 1e-3)
    assert np.all(out.u.values == 0.0)
    assert out.t == 1e-3


def test_taylor_green_closed_form():
    u0 = taylor_green(TG_GRID)
    tr = integrate(u0, 0.1)
    assert lp_norm(tr.final - u0 * math.exp(-0.2), math.inf) <= 1e-6


def test_drifting_taylor_green_second_order():
    u0 = Field(TG_GRID, shifted_taylor_green(0.0))
    exact = shifted_taylor_green(0.1)
    errs = [
        float(np.abs(integrate(u0, 0.1, dt).final.values - exact).max())
        for dt in (2e-3, 1e-3, 5e-4)
    ]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 1.8
    assert errs[0] <= 1e-6


def test_energy_balance_single_mode():
    # a shear layer is an exact heat solution; its energy loss is 2 ||grad u||^2 dt
    g = Grid(2, 32, 2 * math.pi)
    x, y = g.mesh()
    u = Field(g, np.stack([np.sin(2 * y) + 0 * x, 0 * x + 0 * y]))
    dt = 1e-4
    out = step(NSState(u), dt).u
    dE = lp_norm(out, 2) ** 2 - lp_norm(u, 2) ** 2
    grad2 = lp_norm(curl(u), 2) ** 2
    assert dE == pytest.approx(-2 * grad2 * dt, rel=1e-3)
    assert abs(dE + 2 * grad2 * dt) <= 1e-6 * lp_norm(u, 2) ** 2


def test_divergence_and_energy_along_run(rng):
    u0 = random_solenoidal(Grid(2, 64, 2 * math.pi), rng, 6.0, amplitude=2.0)
    tr = integrate(u0, 0.05, snapshot_every=5)
    assert max(tr.divergences) <= 1e-8
    e = tr.energies
    assert all(b <= a * (1 + 1e-6) for a, b in zip(e, e[1:]))


def test_cfl_violation_rejected():
    u = taylor_green(TG_GRID, amplitude=50.0)
    with pytest.raises(CFLError) as info:
        step(NSState(u), 2 * admissible_dt(u))
    assert info.value.args


def test_divergent_data_rejected():
    x, y = TG_GRID.mesh()
    u = Field(TG_GRID, np.stack([np.sin(x) + 0 * y, 0 * x + 0 * y]))
    with pytest.raises(InputError):
        NSState(u)


def test_small_amplitude_tracks_heat_flow():
    u0 = vortex_dipole(TG_GRID, 0.5, 1.0)
    errs = []
    for A in (0.1, 0.05, 0.025):
        v = u0 * A
        tr = integrate(v, 0.05)
        errs.append(lp_norm(tr.final - evolve(v, 0.05), math.inf) / A)
    # relative deviation from the heat flow is linear in A, so absolute is quadratic
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.1)


def test_duhamel_recovers_solution():
    u0 = vortex_dipole(TG_GRID, 0.4, 0.8)
    tr = integrate(u0, 0.02)
    lin = evolve(u0, 0.02)
    assert lp_norm(lin + tr.duhamel - tr.final, math.inf) <= 1e-6 * lp_norm(u0, math.inf)


def test_solver_half_spectrum_round_trip(rng):
    u = random_solenoidal(TG_GRID, rng, 8.0)
    s = Solver(TG_GRID)
    assert np.allclose(s.inverse(s.forward(u.values)), u.values, rtol=0, atol=1e-14)


# -- existence time and Duhamel bound -------------------------------------------


def test_guaranteed_time_formula(registry):
    c = registry.constant("navier_stokes", "c_p", 2, "inf")
    assert guaranteed_time(2.0, "inf", 2, registry) == pytest.approx(c**2 / 4)
    assert guaranteed_time(4.0, "inf", 2, registry) == pytest.approx(
        guaranteed_time(2.0, "inf", 2, registry) / 4
    )


def test_guaranteed_time_needs_supercritical_p(registry):
    with pytest.raises(RangeError):
        guaranteed_time(1.0, 2, 2, registry)


def test_norm_bounded_up_to_guaranteed_time(registry):
    u0 = vortex_dipole(TG_GRID, 0.4, 0.8, amplitude=10.0)
    t_bar = guaranteed_time(lp_norm(u0, "inf"), "inf", 2, registry)
    tr = integrate(u0, t_bar, snapshot_every=1)
    assert max(lp_norm(w, "inf") for w in tr.snapshots) <= 2 * lp_norm(u0, "inf")


def test_duhamel_constant_amplitude_independent(registry):
    u0 = vortex_dipole(TG_GRID, 0.4, 0.8)
    consts = [duhamel_bound_check(u0 * A, "inf", 0.05, registry=registry) for A in (0.1, 0.2, 0.4)]
    vals = [c.constant for c in consts]
    assert max(vals) <= 1.2 * min(vals)
    assert all(c.holds for c in consts)


def test_duhamel_small_time_and_zero_data(registry):
    u0 = vortex_dipole(TG_GRID, 0.4, 0.8)
    norms = [duhamel_bound_check(u0, "inf", t, registry=registry).duhamel_norm for t in (4e-3, 1e-3)]
    assert norms[1] < norms[0]
    assert duhamel_bound_check(u0, "inf", 0.0, registry=registry).duhamel_norm == 0.0
    zero = duhamel_bound_check(Field.zeros(TG_GRID, 2), "inf", 0.1, registry=registry)
    assert zero.constant == 0.0


def test_duhamel_beyond_existence_time(registry):
    u0 = vortex_dipole(TG_GRID, 0.4, 0.8, amplitude=10.0)
    with pytest.raises(ContractError):
        duhamel_bound_check(u0, "inf", 1.0, registry=registry)


# -- criterion thresholds -------------------------------------------------------


def test_threshold_trivial_at_existence_time(registry):
    t_bar = guaranteed_time(3.0, "inf", 3, registry)
    th = criterion_thresholds(3.0, "inf", 3, t_bar, registry)
    assert th.trivial
    assert th.gamma == 1.0


def test_threshold_gamma_at_four_existence_times(registry):
    t_bar = guaranteed_time(3.0, "inf", 3, registry)
    th = criterion_thresholds(3.0, "inf", 3, 4 * t_bar, registry)
    assert th.gamma == pytest.approx(0.5)
    assert th.ell_bar**2 >= th.C0 * math.log(th.C0 / th.gamma) * (1 - 1e-12)


def test_thresholds_monotone(registry):
    t_bar = guaranteed_time(1.0, 4, 3, registry)
    rows = [criterion_thresholds(1.0, 4, 3, k * t_bar, registry) for k in (2, 4, 8, 16)]
    for a, b in zip(rows, rows[1:]):
        assert b.gamma < a.gamma
        assert b.ell_bar > a.ell_bar
        assert b.tail_fraction < a.tail_fraction
        assert b.local_fraction < a.local_fraction


# -- decreasing -----------------------------------------------------------------


def test_effective_constant_keeps_time_below_existence():
    C = effective_duhamel_constant(1 / 16, 0.5, 1.0)
    assert C == 0.5
    assert effective_duhamel_constant(2.0, 0.5, 1.0) == 2.0


def test_decreasing_zero_data(registry):
    rep = decreasing_experiment(Field.zeros(TG_GRID, 2), 0.5, "inf", registry=registry)
    assert rep.verdict


def test_decreasing_refuses_non_sparse_data(registry):
    with pytest.raises(ContractError, match="requirements unmet"):
        decreasing_experiment(taylor_green(TG_GRID, 5.0), 0.5, "inf", registry=registry)


def test_decreasing_scale_must_fit_box(registry):
    with pytest.raises(DomainError):
        decreasing_experiment(taylor_green(TG_GRID, 0.1), 0.5, "inf", registry=registry)


# -- monitor --------------------------------------------------------------------


def test_monitor_decaying_taylor_green(registry):
    u0 = taylor_green(TG_GRID)
    tr = integrate(u0, 0.2, snapshot_every=20)
    mon = monitor(tr.times, tr.snapshots, 1.0, ("inf", 4), registry)
    gam = mon.series("gamma_inf")
    besov = mon.series("besov")
    assert np.all(np.diff(gam) > 0)
    assert np.all(np.diff(besov) < 0)
    assert mon.escape_times == []
    assert mon.apriori_holds
    assert mon.to_csv().splitlines()[0].startswith("t,")


def test_monitor_zero_trajectory():
    z = Field.zeros(TG_GRID, 2)
    mon = monitor([0.0, 0.1], [z, z], 1.0)
    assert mon.rows == []


def test_monitor_rejects_late_samples(registry):
    with pytest.raises(InputError):
        monitor([0.0, 2.0], [taylor_green(TG_GRID)] * 2, 1.0, registry=registry)


@pytest.mark.parametrize(
    "sups, expected",
    [([1, 2, 3], [(1.0, 2)]), ([3, 2, 1], []), ([1, 2, 1, 3], [(1.0, 2)]), ([1, 3, 2, 4, 5], [(1.0, 3), (3.0, 4)])],
)
def test_escape_times(sups, expected):
    assert escape_times(list(range(len(sups))), sups) == expected


def test_cutoff_level_single_mode():
    x, y = TG_GRID.mesh()
    u = Field(TG_GRID, np.stack([np.sin(8 * y) + 0 * x, 0 * x + 0 * y]))
    J = cutoff_level(u, "inf")
    # chi(8 / 2^J) crosses 1/2 between 8/(4/3) and 8/(3/4)
    assert 8 * 0.75 <= 2**J <= 8 * 4 / 3
    assert relative_divergence(u) < 1e-14
