import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from cascade_lab.errors import ConvergenceError, InvalidParameterError
from cascade_lab.grids import graded_grid, panel_grid
from cascade_lab.spectral import (
    AdiabaticityWarning,
    CylinderGeometry,
    EnsembleParams,
    JointAmplitude,
    PumpParams,
    amplitude_values,
    fit_global_constant,
    g2,
    geometric_factor,
    joint_amplitude,
    superradiant_factor_from_geometry,
    superradiant_rate,
    time_domain_amplitude,
)

taus = st.floats(0.05, 2.0)
factors = st.floats(1.0, 20.0)
freqs = st.floats(-200.0, 200.0)


def direct_amplitude(tau, rate, ws, wi):
    """Closed form written out with complex division, one point at a time."""
    return complex(math.exp(-((ws + wi) ** 2) * tau**2 / 8)) / complex(rate / 2, -wi)


@given(tau=taus, sf=factors, ws=freqs, wi=freqs)
def test_amplitude_matches_direct_formula(tau, sf, ws, wi):
    p = EnsembleParams(tau, sf)
    got = amplitude_values(p, [ws], [wi])[0, 0]
    want = direct_amplitude(tau, sf, ws, wi)
    assert abs(got - want) <= 1e-14 * max(abs(want), 1e-300) + 1e-300


@given(tau=taus, sf=factors, x=st.lists(freqs, min_size=2, max_size=2), y=st.lists(freqs, min_size=2, max_size=2))
def test_rotated_separability(tau, sf, x, y):
    # f(x - y, y) = G(x) L(y) is rank one in (x, y): swapping the y's leaves the product unchanged
    p = EnsembleParams(tau, sf)
    f = lambda s, i: amplitude_values(p, [s], [i])[0, 0]  # noqa: E731
    lhs = f(x[0] - y[0], y[0]) * f(x[1] - y[1], y[1])
    rhs = f(x[0] - y[1], y[1]) * f(x[1] - y[0], y[0])
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs)) + 1e-300


def test_amplitude_not_separable_in_plain_variables():
    p = EnsembleParams(0.25, 5.0)
    v = amplitude_values(p, [0.0, 8.0], [0.0, -8.0])
    assert abs(v[0, 0] * v[1, 1] - v[0, 1] * v[1, 0]) > 1e-3 * abs(v[0, 0] * v[1, 1])


@given(tau=taus, sf=factors, wi=st.floats(-50, 50))
def test_ridge_on_antidiagonal(tau, sf, wi):
    # at fixed idler detuning |f| peaks at ws = -wi
    p = EnsembleParams(tau, sf)
    ws = -wi + np.linspace(-3, 3, 61) / tau
    mag = np.abs(amplitude_values(p, ws, [wi])[:, 0])
    assert ws[np.argmax(mag)] == pytest.approx(-wi, abs=1e-9)


@pytest.mark.parametrize("tau,sf", [(0.1, 5.0), (0.25, 5.0), (0.5, 10.0)])
def test_unnormalized_mass_matches_analytic(tau, sf):
    # int dwi int dws |f|^2 = (2 sqrt(pi)/tau) (4/rate) atan(2E/rate) on [-E, E]^2, up to edge corners
    p = EnsembleParams(tau, sf)
    g = graded_grid(tau, p.rate)
    amp = joint_amplitude(p, g, normalize=False)
    assert not amp.normalized
    exact = 2 * math.sqrt(math.pi) / tau * 4 / p.rate * math.atan(2 * 1200.0 / p.rate)
    assert amp.mass() == pytest.approx(exact, rel=1e-5)


def test_normalized_amplitude_has_unit_mass():
    p = EnsembleParams(0.25, 5.0)
    amp = joint_amplitude(p, graded_grid(0.25, 5.0))
    assert amp.normalized
    assert amp.mass() == pytest.approx(1.0, abs=1e-13)
    w = amp.weighted()
    assert np.sum(np.abs(w) ** 2) == pytest.approx(1.0, abs=1e-13)


def test_amplitude_rectangular_grids():
    p = EnsembleParams(0.25, 5.0)
    gs = panel_grid(np.linspace(-40, 40, 9))
    gi = panel_grid(np.linspace(-60, 60, 7))
    amp = joint_amplitude(p, gs, gi)
    assert amp.values.shape == (len(gs), len(gi))


def test_joint_amplitude_shape_validation():
    g = panel_grid(np.linspace(-1, 1, 3))
    with pytest.raises(InvalidParameterError):
        JointAmplitude(g, g, np.zeros((3, 3)))
    with pytest.raises(InvalidParameterError):
        JointAmplitude(g, g, np.full((len(g), len(g)), np.nan))


@pytest.mark.parametrize(
    "kwargs",
    [dict(tau=0.0, superradiant_factor=5.0), dict(tau=0.25, superradiant_factor=0.5),
     dict(tau=0.25, superradiant_factor=5.0, gamma3=0.0), dict(tau=math.inf, superradiant_factor=5.0)],
)
def test_ensemble_params_validation(kwargs):
    with pytest.raises(InvalidParameterError):
        EnsembleParams(**kwargs)


def test_collective_shift_does_not_enter_amplitude():
    a = EnsembleParams(0.25, 5.0)
    b = EnsembleParams(0.25, 5.0, collective_shift=37.0)
    ws = np.linspace(-30, 30, 7)
    assert np.array_equal(amplitude_values(a, ws, ws), amplitude_values(b, ws, ws))


def test_superradiant_rate():
    assert superradiant_rate(EnsembleParams(0.25, 5.0, gamma3=2.0)) == 10.0


@given(sf=factors, gamma3=st.floats(0.1, 5.0))
def test_g2_log_linear_with_superradiant_slope(sf, gamma3):
    p = EnsembleParams(0.25, sf, gamma3)
    t = np.linspace(0.0, 3.0 / p.rate, 25)
    slope, intercept = np.polyfit(t, np.log(g2(p, t)), 1)
    assert slope == pytest.approx(-p.rate, rel=1e-10)
    assert intercept == pytest.approx(0.0, abs=1e-10)


def test_g2_causal_and_scalar():
    p = EnsembleParams(0.25, 5.0)
    assert g2(p, 0.0) == 1.0
    assert isinstance(g2(p, 0.3), float)
    assert np.all(g2(p, np.array([-5.0, -1e-9, -1e3])) == 0.0)


# -- geometric factor -----------------------------------------------------------


def mu_by_quadpack(H, A, N):
    """Independent route: adaptive QUADPACK on the integrand written from scratch."""

    def f(x):
        num = (1 + x * x) * math.sin(0.5 * H * (1 - x)) ** 2 * special.j1(A * math.sqrt(1 - x * x)) ** 2
        return num / ((1 - x) ** 2 * (1 - x * x))

    val, _ = integrate.quad(f, -1, 1, limit=500, epsabs=0, epsrel=1e-12)
    return 6 * (N - 1) / (N * A * A * H * H) * val


@pytest.mark.parametrize("H,A,N", [(10.0, 1.0, 1000), (10.0, 4.0, 1000), (3.0, 0.5, 50), (25.0, 2.0, 10)])
def test_geometric_factor_matches_quadpack(H, A, N):
    assert geometric_factor(CylinderGeometry(H, A, N)) == pytest.approx(mu_by_quadpack(H, A, N), rel=1e-8)


@given(n=st.integers(2, 10**6))
def test_geometric_factor_small_argument_limit(n):
    mu = geometric_factor(CylinderGeometry(1e-3, 1e-3, n))
    assert mu == pytest.approx((n - 1) / n, abs=1e-4)


def test_geometric_factor_single_atom_and_info():
    assert geometric_factor(CylinderGeometry(10.0, 1.0, 1)) == 0.0
    mu, info = geometric_factor(CylinderGeometry(10.0, 1.0, 100), return_info=True)
    assert info["rel_change"] <= 1e-10
    assert info["panels"] >= 16
    assert superradiant_factor_from_geometry(CylinderGeometry(10.0, 1.0, 100)) == pytest.approx(100 * mu + 1)


def test_geometric_factor_decreases_with_radius():
    mus = [geometric_factor(CylinderGeometry(10.0, a, 1000)) for a in (1.0, 2.0, 4.0, 8.0)]
    assert all(x > y for x, y in zip(mus, mus[1:]))


def test_geometric_factor_convergence_failure():
    with pytest.raises(ConvergenceError):
        geometric_factor(CylinderGeometry(500.0, 300.0, 10), rtol=1e-15, max_panels=16)


@pytest.mark.parametrize("H,A,N", [(0.0, 1.0, 2), (1.0, -1.0, 2), (1.0, 1.0, 0), (1.0, 1.0, 2.5)])
def test_cylinder_validation(H, A, N):
    with pytest.raises(InvalidParameterError):
        CylinderGeometry(H, A, N)


# -- time-domain oracle ----------------------------------------------------------


def test_time_domain_matches_closed_form_small_grid():
    p = EnsembleParams(0.25, 5.0)
    d = np.linspace(-12, 12, 5)
    ws, wi = np.meshgrid(d, d, indexing="ij")
    num = time_domain_amplitude(PumpParams(), p, ws, wi)
    ana = amplitude_values(p, d, d)
    c, dev = fit_global_constant(num, ana)
    assert dev < 1e-6
    # the prefactor is divided out, so the fitted constant is trivial
    assert abs(c - 1) < 1e-5


def test_time_domain_scalar_input():
    p = EnsembleParams(0.25, 5.0)
    val = time_domain_amplitude(PumpParams(), p, 1.0, -2.0)
    assert isinstance(val, complex)
    assert val == pytest.approx(direct_amplitude(0.25, 5.0, 1.0, -2.0), rel=1e-5)


def test_adiabaticity_warning():
    pump = PumpParams(area_a=1.0, area_b=1.0, delta1=5.0, delta2=1000.0)
    with pytest.warns(AdiabaticityWarning):
        pump.check_adiabatic(0.25)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        PumpParams().check_adiabatic(0.25)


def test_time_domain_non_convergence():
    with pytest.raises(ConvergenceError):
        time_domain_amplitude(PumpParams(), EnsembleParams(0.25, 5.0), 0.0, 0.0, rtol=1e-16, max_halvings=2)


def test_time_domain_rejects_short_window():
    with pytest.raises(InvalidParameterError):
        time_domain_amplitude(PumpParams(), EnsembleParams(0.25, 5.0), 0.0, 0.0, t_final=-10.0)


def test_fit_global_constant_recovers_constant():
    rng = np.random.default_rng(3)
    ana = rng.normal(size=20) + 1j * rng.normal(size=20)
    c, dev = fit_global_constant(ana / (0.3 - 2j), ana)
    assert c == pytest.approx(0.3 - 2j)
    assert dev < 1e-14


@pytest.mark.parametrize("kwargs", [dict(delta1=0.0), dict(area_a=math.nan)])
def test_pump_validation(kwargs):
    with pytest.raises(InvalidParameterError):
        PumpParams(**kwargs)
