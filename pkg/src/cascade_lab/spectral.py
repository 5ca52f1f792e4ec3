"""Cascade-emission spectral physics.

Joint spectral amplitude of the signal/idler pair, superradiant idler decay,
the second-order correlation, the cylindrical geometry factor and a
brute-force time-domain evaluation of the two-photon amplitude that serves as
an oracle for the closed form.

Frequencies are in units of the natural decay rate ``gamma3`` and times in
units of ``1/gamma3``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import j1

from . import _accel
from .errors import ConvergenceError, InvalidParameterError
from .grids import FrequencyGrid


class AdiabaticityWarning(UserWarning):
    """Pump detunings are not large compared with the pulse Rabi scale."""


@dataclass(frozen=True)
class EnsembleParams:
    """Physical inputs of the cascade source.

    ``collective_shift`` is carried for bookkeeping only: the detuned
    frequency variables already absorb it, so it never enters the amplitude.
    """

    tau: float
    superradiant_factor: float
    gamma3: float = 1.0
    collective_shift: float = 0.0

    def __post_init__(self):
        for name in ("tau", "superradiant_factor", "gamma3", "collective_shift"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"{name} must be finite")
        if self.tau <= 0:
            raise InvalidParameterError(f"tau must be positive, got {self.tau}")
        if self.superradiant_factor < 1:
            raise InvalidParameterError(
                f"superradiant_factor must be >= 1, got {self.superradiant_factor}"
            )
        if self.gamma3 <= 0:
            raise InvalidParameterError(f"gamma3 must be positive, got {self.gamma3}")

    @property
    def rate(self) -> float:
        return self.superradiant_factor * self.gamma3


def superradiant_rate(params: EnsembleParams) -> float:
    """Collective idler decay rate (N mu + 1) * gamma3."""
    return params.rate


def g2(params: EnsembleParams, dt):
    """Normalized signal-idler correlation versus idler delay ``dt``.

    Zero before the signal photon (causality) and a pure exponential with the
    superradiant rate afterwards, scaled so that ``g2(params, 0) == 1``.
    """
    dt = np.asarray(dt, dtype=float)
    # clip keeps exp() from overflowing on the (masked) negative branch
    out = np.where(dt >= 0, np.exp(-params.rate * np.clip(dt, 0.0, None)), 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class JointAmplitude:
    signal_grid: FrequencyGrid
    idler_grid: FrequencyGrid
    values: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        shape = (len(self.signal_grid), len(self.idler_grid))
        if self.values.shape != shape:
            raise InvalidParameterError(f"values shape {self.values.shape} != grid shape {shape}")
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameterError("amplitude contains non-finite values")

    def mass(self) -> float:
        """Weighted squared L2 norm sum_jk w_j w_k |f_jk|^2."""
        ws = self.signal_grid.weights
        wi = self.idler_grid.weights
        return float(ws @ (np.abs(self.values) ** 2) @ wi)

    def weighted(self) -> np.ndarray:
        """sqrt(w_j) f_jk sqrt(w_k), the matrix whose singular values are sqrt(lambda)."""
        sws = np.sqrt(self.signal_grid.weights)
        swi = np.sqrt(self.idler_grid.weights)
        return sws[:, None] * self.values * swi[None, :]


def amplitude_values(params: EnsembleParams, ws, wi) -> np.ndarray:
    """Unnormalized amplitude exp(-(ws+wi)^2 tau^2/8) / (rate/2 - i wi) on an outer grid."""
    ws = np.ascontiguousarray(ws, dtype=float)
    wi = np.ascontiguousarray(wi, dtype=float)
    return _accel.joint_amplitude_grid(ws, wi, float(params.tau), 0.5 * params.rate)


def joint_amplitude(
    params: EnsembleParams,
    sgrid: FrequencyGrid,
    igrid: FrequencyGrid | None = None,
    normalize: bool = True,
) -> JointAmplitude:
    """Sample the joint spectral amplitude and (by default) L2-normalize it."""
    if params.tau <= 0 or params.rate <= 0:
        raise InvalidParameterError("tau and the superradiant rate must be positive")
    igrid = sgrid if igrid is None else igrid
    values = amplitude_values(params, sgrid.nodes, igrid.nodes)
    amp = JointAmplitude(sgrid, igrid, values, normalized=False)
    if not normalize:
        return amp
    values = values / math.sqrt(amp.mass())
    return JointAmplitude(sgrid, igrid, values, normalized=True)


# -- geometry -----------------------------------------------------------------


@dataclass(frozen=True)
class CylinderGeometry:
    """Cylindrical cloud in dimensionless units: H = k h, A = k a."""

    H: float
    A: float
    N: int

    def __post_init__(self):
        if not (self.H > 0 and self.A > 0):
            raise InvalidParameterError("H and A must be positive")
        if self.N < 1 or int(self.N) != self.N:
            raise InvalidParameterError("N must be a positive integer")


def _mu_integrand(x, H, A):
    # 1-x and 1+x formed separately so the endpoint factors keep full precision
    omx = 1.0 - x
    opx = 1.0 + x
    s = np.sin(0.5 * H * omx)
    b = j1(A * np.sqrt(omx * opx))
    return (1.0 + x * x) * s * s * b * b / (omx * omx * omx * opx)


def _mu_quadrature(H, A, panels, order, eps):
    edges = np.linspace(-1.0 + eps, 1.0 - eps, panels + 1)
    x0, w0 = leggauss(order)
    a = edges[:-1, None]
    b = edges[1:, None]
    x = 0.5 * (b - a) * x0 + 0.5 * (a + b)
    w = 0.5 * (b - a) * w0
    return float(np.sum(w * _mu_integrand(x, H, A)))


def geometric_factor(
    geom: CylinderGeometry,
    *,
    rtol: float = 1e-10,
    order: int = 16,
    start_panels: int = 8,
    max_panels: int = 1 << 16,
    eps: float = 1e-12,
    return_info: bool = False,
):
    """Geometric constant mu for a cylinder of height H and radius A.

    Composite Gauss-Legendre on ``[-1+eps, 1-eps]``; the panel count doubles
    until two successive estimates agree to ``rtol``.  Both endpoints are
    removable singularities so the open interval loses nothing measurable.
    """
    if geom.N == 1:
        info = {"panels": 0, "rel_change": 0.0}
        return (0.0, info) if return_info else 0.0
    pref = 6.0 * (geom.N - 1) / (geom.N * geom.A**2 * geom.H**2)
    panels = start_panels
    prev = _mu_quadrature(geom.H, geom.A, panels, order, eps)
    while True:
        panels *= 2
        cur = _mu_quadrature(geom.H, geom.A, panels, order, eps)
        change = abs(cur - prev) / max(abs(cur), 1e-300)
        if change <= rtol:
            break
        if panels >= max_panels:
            raise ConvergenceError(
                f"geometric factor not converged: rel change {change:.3e} at {panels} panels"
            )
        prev = cur
    mu = pref * cur
    if return_info:
        return mu, {"panels": panels, "rel_change": change}
    return mu


def superradiant_factor_from_geometry(geom: CylinderGeometry) -> float:
    """N mu + 1 for the given cylinder."""
    return geom.N * geometric_factor(geom) + 1.0


# -- time-domain oracle -------------------------------------------------------


@dataclass(frozen=True)
class PumpParams:
    """Gaussian two-photon pump: pulse areas and single-photon detunings.

    Each pulse is ``Omega(t) = area / (sqrt(pi) tau) * exp(-t^2/tau^2)``.
    """

    area_a: float = 1.0
    area_b: float = 1.0
    delta1: float = 1000.0
    delta2: float = 1000.0

    def __post_init__(self):
        if self.delta1 == 0 or self.delta2 == 0:
            raise InvalidParameterError("detunings must be non-zero")
        if not all(math.isfinite(v) for v in (self.area_a, self.area_b, self.delta1, self.delta2)):
            raise InvalidParameterError("pump parameters must be finite")

    def coupling(self) -> float:
        """Omega_a Omega_b / (4 Delta1 Delta2) with the Gaussian shapes stripped."""
        return self.area_a * self.area_b / (4.0 * self.delta1 * self.delta2)

    def b(self, t, tau):
        return self.coupling() / (math.pi * tau * tau) * np.exp(-2.0 * (t / tau) ** 2)

    def check_adiabatic(self, tau, margin=10.0):
        rabi = max(abs(self.area_a), abs(self.area_b)) / (math.sqrt(math.pi) * tau)
        if min(abs(self.delta1), abs(self.delta2)) < margin * rabi:
            warnings.warn(
                f"detunings ({self.delta1}, {self.delta2}) are not much larger than "
                f"the peak Rabi frequency {rabi:.3g}",
                AdiabaticityWarning,
                stacklevel=3,
            )


def default_t_final(params: EnsembleParams) -> float:
    # e^{-rate T/2} ~ 1e-9 leaves the truncated outer integral negligible
    return 5.0 * params.tau + 42.0 / params.rate


def time_domain_amplitude(
    pump: PumpParams,
    params: EnsembleParams,
    dws,
    dwi,
    t_final: float | None = None,
    *,
    rtol: float = 1e-7,
    max_halvings: int = 10,
):
    """Numerically integrate the nested time integral for the pair amplitude.

    Evaluates, for each detuning pair,

        int_{t0}^{T} dt' e^{(-G/2 + i dwi) t'} int_{t0}^{t'} dt'' e^{(G/2 + i dws) t''} b(t'')

    with ``t0 = -5 tau`` and ``G`` the superradiant rate, using the trapezoid
    rule on a step that starts at ``min(tau, 1/G)/50`` and is halved (with a
    Richardson step) until successive estimates agree to ``rtol`` relative to
    the largest magnitude.  The long-time prefactor
    ``coupling / (sqrt(2 pi) tau)`` is divided out so the result is directly
    the unnormalized closed-form amplitude.

    ``dws`` and ``dwi`` are the detuned variables, so the collective shift has
    already been absorbed and does not appear.
    """
    pump.check_adiabatic(params.tau)
    dws_b, dwi_b = np.broadcast_arrays(np.asarray(dws, dtype=float), np.asarray(dwi, dtype=float))
    shape = dws_b.shape
    flat_s = np.ascontiguousarray(dws_b.ravel())
    flat_i = np.ascontiguousarray(dwi_b.ravel())
    tau = params.tau
    half = 0.5 * params.rate
    t0 = -5.0 * tau
    T = default_t_final(params) if t_final is None else float(t_final)
    if T <= t0:
        raise InvalidParameterError("t_final must exceed the pulse start -5 tau")

    def trapezoid(h):
        n = int(math.ceil((T - t0) / h)) + 1
        t = np.linspace(t0, T, n)
        b = pump.b(t, tau)
        return _accel.nested_time_integral(t, b, flat_s, flat_i, half)

    h = min(tau, 1.0 / params.rate) / 50.0
    coarse = trapezoid(h)
    prev = None
    for _ in range(max_halvings):
        h *= 0.5
        fine = trapezoid(h)
        est = fine + (fine - coarse) / 3.0
        if prev is not None:
            scale = np.max(np.abs(est))
            if np.max(np.abs(est - prev)) <= rtol * scale:
                break
        prev, coarse = est, fine
    else:
        raise ConvergenceError(f"time integral not converged after {max_halvings} halvings")
    out = est / (pump.coupling() / (math.sqrt(2.0 * math.pi) * tau))
    return out.reshape(shape) if shape else complex(out[0])


def fit_global_constant(numeric, analytic):
    """Least-squares complex c minimizing |c numeric - analytic|; returns (c, rel_dev).

    ``rel_dev`` is max|c numeric - analytic| / max|analytic|.
    """
    num = np.ravel(numeric)
    ana = np.ravel(analytic)
    c = np.vdot(num, ana) / np.vdot(num, num)
    dev = np.max(np.abs(c * num - ana)) / np.max(np.abs(ana))
    return complex(c), float(dev)
