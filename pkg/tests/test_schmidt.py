import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from cascade_lab.errors import ConsistencyError, InvalidParameterError, PreconditionError
from cascade_lab.grids import graded_grid, panel_grid
from cascade_lab.schmidt import (
    IDLER,
    SIGNAL,
    KernelMatrix,
    SchmidtDecomposition,
    build_kernels,
    decompose,
    entropy,
    entropy_bits,
    mode_profile,
    schmidt_from_params,
)
from cascade_lab.schmidt import _clusters
from cascade_lab.spectral import EnsembleParams, JointAmplitude, amplitude_values, joint_amplitude
from helpers import cached_decomposition

# Captured on first computation with the default graded grid; they pin the
# mode-structure panels against accidental drift.
REGRESSION = {
    (0.1, 5.0): (0.909852529570246, 0.6838245972734639),
    (0.1, 10.0): (0.8338078561170537, 1.121319372556715),
    (0.25, 5.0): (0.7985293777374195, 1.3302779651638503),
    (0.25, 10.0): (0.6619076859985986, 2.0199522519056337),
    (0.5, 5.0): (0.6610260756353892, 2.041232745083857),
    (0.5, 10.0): (0.48951872862691315, 2.8861930385044205),
}


def hermite_functions(x, n):
    """First n orthonormal Hermite functions on the real line."""
    out = np.empty((n, x.size))
    out[0] = math.pi**-0.25 * np.exp(-(x**2) / 2)
    if n > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(2, n):
        out[k] = math.sqrt(2.0 / k) * x * out[k - 1] - math.sqrt((k - 1) / k) * out[k - 2]
    return out


@pytest.fixture(scope="module")
def hgrid():
    return panel_grid(np.linspace(-14, 14, 57), order=8)


def synthetic(grid, lambdas, phases=None):
    """Known Schmidt form: sum sqrt(lambda_n) e^{i theta_n} h_n(ws) h_n(wi)."""
    r = len(lambdas)
    h = hermite_functions(grid.nodes, r)
    phases = np.zeros(r) if phases is None else np.asarray(phases)
    vals = sum(math.sqrt(l) * np.exp(1j * p) * np.outer(h[k], h[k]) for k, (l, p) in enumerate(zip(lambdas, phases)))
    return JointAmplitude(grid, grid, vals.astype(complex), normalized=True), h


@settings(max_examples=15)
@given(
    lam=st.lists(st.floats(0.01, 1.0), min_size=1, max_size=5).map(lambda v: sorted(np.array(v) / sum(v), reverse=True)),
    phases=st.lists(st.floats(-math.pi, math.pi), min_size=5, max_size=5),
)
def test_recovers_known_schmidt_form(hgrid, lam, phases):
    lam = np.array(lam)
    # keep clusters apart so each mode is individually identifiable
    if lam.size > 1 and np.min(-np.diff(lam)) < 1e-3:
        lam = np.linspace(2, 1, lam.size) / np.linspace(2, 1, lam.size).sum()
    amp, h = synthetic(hgrid, lam, phases[: lam.size])
    d = decompose(*build_kernels(amp), max_rank=None)
    assert np.allclose(d.eigenvalues[: lam.size], lam, atol=1e-12)
    assert np.all(np.abs(d.eigenvalues[lam.size :]) < 1e-12)
    for k in range(lam.size):
        # modes equal the Hermite functions up to a phase
        ov = hgrid.inner(h[k], d.signal_modes[:, k])
        assert abs(ov) == pytest.approx(1.0, abs=1e-10)
        ovi = hgrid.inner(h[k], d.idler_modes[:, k])
        assert abs(ovi) == pytest.approx(1.0, abs=1e-10)
    # floor set by noise-level eigenvalues (~1e-16) whose eigenvectors cannot be paired
    assert d.diagnostics["reconstruction_error"] < 1e-6


def test_degenerate_cluster_reconstructs(hgrid):
    amp, _ = synthetic(hgrid, [0.5, 0.5], [0.0, 1.1])
    d = decompose(*build_kernels(amp), max_rank=None)
    assert np.allclose(d.eigenvalues[:2], 0.5, atol=1e-12)
    assert d.diagnostics["reconstruction_error"] < 1e-6
    # leading pair alone carries the whole amplitude
    assert np.max(np.abs(d.reconstruct(2) - amp.values)) < 1e-10
    assert d.diagnostics["orthonormality_idler"] < 1e-12


def test_separable_amplitude_has_unit_lambda(hgrid):
    h = hermite_functions(hgrid.nodes, 3)
    vals = np.outer(h[1], h[2]).astype(complex)
    d = decompose(*build_kernels(JointAmplitude(hgrid, hgrid, vals)))
    assert d.lambda1 == pytest.approx(1.0, abs=1e-12)
    assert d.truncation_rank == 1
    assert entropy(d) == pytest.approx(0.0, abs=1e-10)


def test_signal_phase_convention(benchmark_decomp):
    psi = benchmark_decomp.signal_modes
    idx = np.argmax(np.abs(psi), axis=0)
    peak = psi[idx, np.arange(psi.shape[1])]
    assert np.all(peak.real > 0)
    assert np.max(np.abs(peak.imag)) < 1e-12 * np.max(np.abs(peak))


def test_trace_identities(benchmark_decomp):
    p = EnsembleParams(0.25, 5.0)
    k1, k2 = build_kernels(joint_amplitude(p, graded_grid(0.25, 5.0)))
    assert k1.weighted_trace() == pytest.approx(1.0, abs=1e-12)
    assert k2.weighted_trace() == pytest.approx(1.0, abs=1e-12)
    assert benchmark_decomp.purity == pytest.approx(k1.weighted_trace_sq(), abs=1e-10)
    assert k1.hermiticity_error() == 0.0
    assert benchmark_decomp.diagnostics["spectrum_mismatch"] < 1e-12


def test_spectrum_matches_svd_oracle(benchmark_decomp):
    # independent route: singular values of sqrt(W_s) F sqrt(W_i)
    p = EnsembleParams(0.25, 5.0)
    amp = joint_amplitude(p, graded_grid(0.25, 5.0))
    sv = np.linalg.svd(amp.weighted(), compute_uv=False)
    lam = benchmark_decomp.eigenvalues
    assert np.allclose(lam[:50], sv[:50] ** 2, atol=1e-13)
    s_svd = -np.sum(sv[sv**2 > 1e-15] ** 2 * np.log2(sv[sv**2 > 1e-15] ** 2))
    assert entropy_bits(benchmark_decomp) == pytest.approx(s_svd, abs=1e-9)


def test_modes_orthonormal_and_paired(benchmark_decomp):
    d = benchmark_decomp
    assert d.diagnostics["orthonormality_signal"] < 1e-10
    assert d.diagnostics["orthonormality_idler"] < 1e-10
    # pairing identity: int dwi f(ws, wi) conj(phi_n(wi)) = sqrt(lambda_n) psi_n(ws)
    amp = joint_amplitude(EnsembleParams(0.25, 5.0), d.signal_grid)
    w = d.idler_grid.weights
    for n in range(5):
        proj = amp.values @ (w * np.conj(d.idler_modes[:, n]))
        assert np.max(np.abs(proj - math.sqrt(d.eigenvalues[n]) * d.signal_modes[:, n])) < 1e-10


def test_truncation_keeps_mass(benchmark_decomp):
    d = benchmark_decomp
    r = d.truncation_rank
    assert 1 <= r <= 200
    kept = d.retained().sum()
    assert kept >= 1 - 1e-6 or r == 200
    assert d.diagnostics["reconstruction_error"] ** 2 == pytest.approx(1 - kept, abs=1e-9)


def test_full_rank_reconstruction():
    p = EnsembleParams(0.25, 5.0)
    g = graded_grid(0.25, 5.0, extent=200.0)
    amp = joint_amplitude(p, g)
    d = decompose(*build_kernels(amp), max_rank=None)
    assert d.truncation_rank == len(g)
    assert d.diagnostics["reconstruction_error"] < 1e-6
    assert np.max(np.abs(d.reconstruct() - amp.values)) < 1e-6 * np.max(np.abs(amp.values))
    # the spectrum keeps its descending order after degenerate reordering
    assert np.all(np.diff(d.eigenvalues) <= 0)


def test_clusters_do_not_chain_small_eigenvalues():
    lam = np.array([0.5, 0.5 - 1e-12, 0.3, 1e-10, 5e-11, 2e-11, 0.0, 0.0])
    assert _clusters(lam) == [(0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 8)]


def _interpolated_signal_mode(decomp, params, n=1):
    """Nystrom interpolation psi_n(w) = lambda_n^-1/2 int f(w, wi) conj(phi_n(wi)) dwi."""
    g = decomp.idler_grid
    f0 = amplitude_values(params, g.nodes, g.nodes)
    norm = math.sqrt(float(decomp.signal_grid.weights @ np.abs(f0) ** 2 @ g.weights))
    proj = g.weights * np.conj(decomp.idler_modes[:, n - 1]) / math.sqrt(decomp.eigenvalues[n - 1])
    return lambda w: complex(amplitude_values(params, [w], g.nodes)[0] @ proj / norm)


def test_fwhm_of_leading_signal_mode(benchmark_decomp):
    params = EnsembleParams(0.25, 5.0)
    psi = _interpolated_signal_mode(benchmark_decomp, params)
    nodes, samples = mode_profile(benchmark_decomp, 1, SIGNAL)
    # the interpolant reproduces the stored samples
    for k in range(0, nodes.size, 97):
        assert psi(nodes[k]) == pytest.approx(samples[k], abs=1e-10)
    peak = abs(psi(0.0))
    half_width = optimize.brentq(lambda w: abs(psi(w)) - peak / 2, 0.0, 40.0)
    fwhm = 2 * half_width
    # bare-Gaussian estimate 4 sqrt(2 ln 2)/tau ~ 18.8; the Lorentzian idler factor
    # broadens the reduced signal spectrum, so the true mode is wider
    gaussian = 4 * math.sqrt(2 * math.log(2)) / 0.25
    assert gaussian < fwhm < 1.15 * gaussian
    assert abs(psi(-half_width)) == pytest.approx(peak / 2, rel=1e-6)


def test_refinement_stability():
    coarse = cached_decomposition(0.25, 5.0)
    fine = schmidt_from_params(EnsembleParams(0.25, 5.0), order=12)
    assert abs(coarse.lambda1 - fine.lambda1) < 1e-5
    assert abs(entropy_bits(coarse) - entropy_bits(fine)) < 1e-4


@pytest.mark.slow
@pytest.mark.parametrize("key", sorted(REGRESSION))
def test_regression_values(key):
    d = cached_decomposition(*key)
    lam1, s_bits = REGRESSION[key]
    assert d.lambda1 == pytest.approx(lam1, abs=1e-9)
    assert entropy_bits(d) == pytest.approx(s_bits, abs=1e-8)


@pytest.mark.slow
def test_lambda1_monotone_in_tau_and_rate():
    for sf in (5.0, 10.0):
        l = [cached_decomposition(t, sf).lambda1 for t in (0.1, 0.25, 0.5)]
        assert l[0] >= l[1] >= l[2]
    for t in (0.1, 0.25, 0.5):
        assert cached_decomposition(t, 5.0).lambda1 >= cached_decomposition(t, 10.0).lambda1


@given(lam=st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=30))
def test_entropy_properties(lam):
    lam = np.array(lam) / np.sum(lam)
    s = entropy(lam)
    assert -1e-12 <= s <= math.log(lam.size) + 1e-12
    assert entropy_bits(lam) == pytest.approx(s / math.log(2), abs=1e-12)
    d = SchmidtDecomposition.from_eigenvalues(lam)
    assert d.purity == pytest.approx(np.sum(lam**2))
    assert d.schmidt_number >= 1 - 1e-12


def test_entropy_extremes():
    assert entropy([1.0]) == 0.0
    assert entropy_bits(np.full(8, 1 / 8)) == pytest.approx(3.0)
    assert entropy([1.0, 0.0, 1e-20]) == 0.0


def test_from_eigenvalues_spectrum_only():
    d = SchmidtDecomposition.from_eigenvalues([0.2, 0.8])
    assert d.lambda1 == 0.8
    assert not d.has_modes
    assert d.truncation_rank == 2
    with pytest.raises(PreconditionError):
        d.reconstruct()
    with pytest.raises(PreconditionError):
        mode_profile(d, 1)
    for bad in ([], [0.5, 0.6], [1.2, -0.2]):
        with pytest.raises(InvalidParameterError):
            SchmidtDecomposition.from_eigenvalues(bad)


def test_mode_profile_bounds(benchmark_decomp):
    nodes, phi = mode_profile(benchmark_decomp, 2, IDLER)
    assert nodes.shape == phi.shape
    with pytest.raises(IndexError):
        mode_profile(benchmark_decomp, 0)
    with pytest.raises(IndexError):
        mode_profile(benchmark_decomp, benchmark_decomp.truncation_rank + 1)
    with pytest.raises(InvalidParameterError):
        mode_profile(benchmark_decomp, 1, "raman")


def test_build_kernels_needs_normalized(hgrid):
    amp = JointAmplitude(hgrid, hgrid, np.ones((len(hgrid), len(hgrid)), complex), normalized=False)
    with pytest.raises(PreconditionError):
        build_kernels(amp)


def test_decompose_detects_inconsistent_kernels(hgrid):
    amp, _ = synthetic(hgrid, [0.7, 0.3])
    k1, k2 = build_kernels(amp)
    broken = KernelMatrix(k2.grid, k2.entries * 1.01, IDLER, amp)
    with pytest.raises(ConsistencyError):
        decompose(k1, broken)
    with pytest.raises(InvalidParameterError):
        decompose(k2, k1)
    other, _ = synthetic(hgrid, [0.7, 0.3])
    with pytest.raises(PreconditionError):
        decompose(k1, build_kernels(other)[1])


def test_kernel_validation(hgrid):
    with pytest.raises(InvalidParameterError):
        KernelMatrix(hgrid, np.zeros((2, 2)), SIGNAL)
    with pytest.raises(InvalidParameterError):
        KernelMatrix(hgrid, np.zeros((len(hgrid), len(hgrid))), "raman")
