"""Schmidt decomposition of a sampled joint amplitude by Nystrom quadrature.

The one-photon kernels are discretized on the amplitude's quadrature grids,
symmetrized with the square-root weights, and handed to a dense Hermitian
eigensolver.  Mode samples are recovered by dividing out the root weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, InvalidParameterError, PreconditionError
from .grids import FrequencyGrid, graded_grid
from .spectral import EnsembleParams, JointAmplitude, joint_amplitude

SIGNAL = "signal"
IDLER = "idler"

TRUNCATION_MASS = 1.0 - 1e-6
MAX_RANK = 200
SPECTRUM_TOL = 1e-5
DEGENERACY_TOL = 1e-9
# relative guard: below ~1e-9 every pair is absolutely "close", and chaining
# those distinct eigenvalues would let the moment ordering permute them
DEGENERACY_RTOL = 1e-6
ENTROPY_FLOOR = 1e-15


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Discretized one-photon kernel K(w_j, w_k) on ``grid``."""

    grid: FrequencyGrid
    entries: np.ndarray
    side: str
    source: JointAmplitude | None = None

    def __post_init__(self):
        if self.side not in (SIGNAL, IDLER):
            raise InvalidParameterError(f"side must be '{SIGNAL}' or '{IDLER}'")
        n = len(self.grid)
        if self.entries.shape != (n, n):
            raise InvalidParameterError("kernel shape does not match its grid")

    def symmetrized(self) -> np.ndarray:
        """D^1/2 K D^1/2, Hermitian with the operator's eigenvalues."""
        sw = np.sqrt(self.grid.weights)
        return sw[:, None] * self.entries * sw[None, :]

    def weighted_trace(self) -> float:
        return float(np.real(np.sum(self.grid.weights * np.diag(self.entries))))

    def weighted_trace_sq(self) -> float:
        """Tr(K W K W), the discrete version of the double integral of |K|^2."""
        a = self.symmetrized()
        return float(np.real(np.sum(a * a.T)))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))


def build_kernels(amp: JointAmplitude) -> tuple[KernelMatrix, KernelMatrix]:
    """Signal and idler kernels of a normalized joint amplitude.

    K1(w, w') = sum_k wi_k f(w, w_k) conj f(w', w_k)
    K2(w, w') = sum_j ws_j f(w_j, w) conj f(w_j, w')
    """
    if not amp.normalized:
        raise PreconditionError("build_kernels needs a normalized JointAmplitude")
    f = amp.values
    a1 = f * np.sqrt(amp.idler_grid.weights)[None, :]
    k1 = a1 @ a1.conj().T
    a2 = f.T * np.sqrt(amp.signal_grid.weights)[None, :]
    k2 = a2 @ a2.conj().T
    # exact Hermitian symmetry; the products above agree to rounding
    k1 = 0.5 * (k1 + k1.conj().T)
    k2 = 0.5 * (k2 + k2.conj().T)
    return (
        KernelMatrix(amp.signal_grid, k1, SIGNAL, amp),
        KernelMatrix(amp.idler_grid, k2, IDLER, amp),
    )


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    """Schmidt spectrum and phase-fixed mode pairs.

    ``eigenvalues`` holds the full (non-truncated) descending spectrum; mode
    arrays have one column per retained mode, ``truncation_rank`` of them.
    A decomposition built by :meth:`from_eigenvalues` carries no modes.
    """

    eigenvalues: np.ndarray
    signal_modes: np.ndarray | None = None
    idler_modes: np.ndarray | None = None
    signal_grid: FrequencyGrid | None = None
    idler_grid: FrequencyGrid | None = None
    truncation_rank: int = 0
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_eigenvalues(cls, lambdas) -> "SchmidtDecomposition":
        """Spectrum-only decomposition, e.g. a pure source ``[1.0]``."""
        lam = np.asarray(lambdas, dtype=float)
        if lam.ndim != 1 or lam.size == 0 or np.any(lam < 0):
            raise InvalidParameterError("eigenvalues must be a non-empty non-negative sequence")
        if abs(lam.sum() - 1.0) > 1e-8:
            raise InvalidParameterError(f"eigenvalues must sum to 1, got {lam.sum():.12g}")
        lam = np.sort(lam)[::-1]
        return cls(eigenvalues=lam, truncation_rank=int(np.count_nonzero(lam)))

    @property
    def has_modes(self) -> bool:
        return self.signal_modes is not None

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def purity(self) -> float:
        return float(np.sum(self.eigenvalues**2))

    @property
    def entropy(self) -> float:
        return entropy(self)

    @property
    def schmidt_number(self) -> float:
        """Effective number of modes 1/sum(lambda^2)."""
        return 1.0 / self.purity

    def retained(self) -> np.ndarray:
        return self.eigenvalues[: self.truncation_rank]

    def reconstruct(self, rank: int | None = None) -> np.ndarray:
        """Sum_n sqrt(lambda_n) psi_n(ws) phi_n(wi) over the first ``rank`` modes."""
        if not self.has_modes:
            raise PreconditionError("decomposition carries no mode functions")
        r = self.truncation_rank if rank is None else min(rank, self.truncation_rank)
        s = np.sqrt(self.eigenvalues[:r])
        return (self.signal_modes[:, :r] * s) @ self.idler_modes[:, :r].T


def _truncation_rank(lam, max_rank=MAX_RANK):
    csum = np.cumsum(lam)
    r = int(np.searchsorted(csum, TRUNCATION_MASS * csum[-1]) + 1)
    return max(1, min(r, max_rank, lam.size))


def _clusters(lam, tol=DEGENERACY_TOL, rtol=DEGENERACY_RTOL):
    """Consecutive index ranges of (near-)degenerate eigenvalues."""
    out = []
    start = 0
    for k in range(1, lam.size + 1):
        if k == lam.size:
            out.append((start, k))
            break
        gap = abs(lam[k] - lam[k - 1])
        if gap >= tol or gap > rtol * max(abs(lam[k]), abs(lam[k - 1])):
            out.append((start, k))
            start = k
    return out


def _fix_largest_real(modes):
    idx = np.argmax(np.abs(modes), axis=0)
    peak = modes[idx, np.arange(modes.shape[1])]
    return modes * (np.abs(peak) / np.where(peak == 0, 1, peak))[None, :]


def _order_degenerate(lam, modes, nodes, weights):
    # first spectral moment decides the order inside a degenerate cluster
    order = np.arange(lam.size)
    for a, b in _clusters(lam):
        if b - a > 1:
            mom = (nodes * weights) @ (np.abs(modes[:, a:b]) ** 2)
            order[a:b] = a + np.argsort(mom, kind="stable")
    return modes[:, order]


def _eigh_desc(kernel: KernelMatrix):
    lam, vec = np.linalg.eigh(kernel.symmetrized())
    return lam[::-1], vec[:, ::-1]


def _align_idler(f, ws, wi, lam, psi, phi):
    """Rotate idler eigenmodes so that f = sum sqrt(lam) psi phi holds.

    The target for mode n is conj(psi_n)^T W_s f = sqrt(lam_n) phi_n.  Inside
    a (near-)degenerate cluster the eigenmodes are only fixed up to a
    unitary U, so the Gram matrix against the targets is U diag(sqrt(lam));
    its polar factor is U whatever the (non-negative) sqrt(lam) are, which is
    why the targets are not rescaled (zero eigenvalues stay harmless).
    """
    target = f.T @ (ws[:, None] * psi.conj())  # n_i x r, column n = sqrt(lam_n) phi_n
    out = phi.copy()
    for a, b in _clusters(lam):
        gram = phi[:, a:b].conj().T @ (wi[:, None] * target[:, a:b])
        u, _, vh = np.linalg.svd(gram)
        out[:, a:b] = phi[:, a:b] @ (u @ vh)
    return out


def decompose(k1: KernelMatrix, k2: KernelMatrix, max_rank: int | None = MAX_RANK) -> SchmidtDecomposition:
    """Schmidt decomposition from the signal and idler kernels.

    Both weight-symmetrized kernels are diagonalized independently; their
    spectra must agree to ``1e-5``.  Signal modes are rotated so the
    largest-magnitude sample is real positive.  Idler modes are then paired
    to the signal modes through the amplitude itself, which fixes their phase
    and guarantees the reconstruction identity.

    ``max_rank=None`` keeps every mode (full-rank reconstruction).
    """
    if k1.side != SIGNAL or k2.side != IDLER:
        raise InvalidParameterError("expected (signal kernel, idler kernel)")
    if k1.source is None or k1.source is not k2.source:
        raise PreconditionError("kernels must come from the same JointAmplitude")
    amp = k1.source
    ws = k1.grid.weights
    wi = k2.grid.weights
    lam1, vec1 = _eigh_desc(k1)
    lam2, vec2 = _eigh_desc(k2)
    n = min(lam1.size, lam2.size)
    mismatch = float(np.max(np.abs(lam1[:n] - lam2[:n])))
    if mismatch > SPECTRUM_TOL:
        raise ConsistencyError(f"signal and idler spectra differ by {mismatch:.3e}")
    lam = np.clip(lam1, 0.0, None)
    rank = lam.size if max_rank is None else _truncation_rank(lam, max_rank)

    psi = _fix_largest_real(vec1[:, :rank] / np.sqrt(ws)[:, None])
    psi = _order_degenerate(lam[:rank], psi, k1.grid.nodes, ws)
    phi = vec2[:, :rank] / np.sqrt(wi)[:, None]
    phi = _align_idler(amp.values, ws, wi, lam[:rank], psi, phi)

    recon = (psi * np.sqrt(lam[:rank])) @ phi.T
    diag = {
        "spectrum_mismatch": mismatch,
        "reconstruction_error": _weighted_l2(amp.values - recon, ws, wi),
        "orthonormality_signal": _orth_error(psi, ws),
        "orthonormality_idler": _orth_error(phi, wi),
        "trace": float(lam1.sum()),
        "min_eigenvalue": float(min(lam1[-1], lam2[-1])),
        "grid_nodes": int(len(k1.grid)),
    }
    return SchmidtDecomposition(
        eigenvalues=lam,
        signal_modes=psi,
        idler_modes=phi,
        signal_grid=k1.grid,
        idler_grid=k2.grid,
        truncation_rank=rank,
        diagnostics=diag,
    )


def _weighted_l2(diff, ws, wi):
    return math.sqrt(float(ws @ (np.abs(diff) ** 2) @ wi))


def _orth_error(modes, w):
    g = modes.conj().T @ (w[:, None] * modes)
    return float(np.max(np.abs(g - np.eye(g.shape[0]))))


def entropy(decomp_or_lambdas, base: float = math.e) -> float:
    """Entanglement entropy -sum lambda log(lambda); tiny eigenvalues contribute 0.

    Natural log by default; pass ``base=2`` for bits.
    """
    lam = getattr(decomp_or_lambdas, "eigenvalues", decomp_or_lambdas)
    lam = np.asarray(lam, dtype=float)
    lam = lam[lam > ENTROPY_FLOOR]
    return float(-np.sum(lam * np.log(lam)) / math.log(base))


def entropy_bits(decomp_or_lambdas) -> float:
    return entropy(decomp_or_lambdas, base=2.0)


def mode_profile(decomp: SchmidtDecomposition, index: int, side: str = SIGNAL):
    """Return ``(nodes, samples)`` for the 1-based Schmidt mode ``index``."""
    if not decomp.has_modes:
        raise PreconditionError("decomposition carries no mode functions")
    if not 1 <= index <= decomp.truncation_rank:
        raise IndexError(f"mode index {index} outside 1..{decomp.truncation_rank}")
    if side == SIGNAL:
        return decomp.signal_grid.nodes, decomp.signal_modes[:, index - 1]
    if side == IDLER:
        return decomp.idler_grid.nodes, decomp.idler_modes[:, index - 1]
    raise InvalidParameterError(f"side must be '{SIGNAL}' or '{IDLER}'")


def default_grid(params: EnsembleParams, extent: float | None = None, **kwargs) -> FrequencyGrid:
    if extent is None:
        return graded_grid(params.tau, params.rate, **kwargs)
    return graded_grid(params.tau, params.rate, extent, **kwargs)


def schmidt_from_params(
    params: EnsembleParams,
    grid: FrequencyGrid | None = None,
    max_rank: int | None = MAX_RANK,
    **grid_kwargs,
) -> SchmidtDecomposition:
    """Amplitude, kernels and decomposition in one call."""
    grid = default_grid(params, **grid_kwargs) if grid is None else grid
    amp = joint_amplitude(params, grid)
    return decompose(*build_kernels(amp), max_rank=max_rank)
