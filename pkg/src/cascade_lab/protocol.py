"""Closed-form repeater metrics driven by the Schmidt spectrum.

Entanglement swapping with threshold (NRPD) or number-resolving (PNRD)
telecom detectors, projection onto the path-encoded maximally entangled
state (PME), and teleportation of a qubit ``d0|0> + d1|1>``.

Conventions: ``o`` is the idler/Raman mode overlap (``lambda_1`` for the
matched Raman mode), ``P = sum(lambda^2)`` is the purity and
``k = (sqrt(eta_r) + 1/sqrt(eta_r))^2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, InvalidParameterError, PreconditionError
from .schmidt import SchmidtDecomposition


class DetectorKind(str, enum.Enum):
    NRPD = "nrpd"
    PNRD = "pnrd"

    @classmethod
    def parse(cls, value) -> "DetectorKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidParameterError(f"unknown detector kind {value!r} (nrpd|pnrd)") from None


def _unit_interval(name, x):
    if not (0.0 <= x <= 1.0):
        raise InvalidParameterError(f"{name} must lie in [0, 1], got {x}")


@dataclass(frozen=True)
class DetectorModel:
    """Detector kind plus flat telecom (eta_t) and infrared (eta_eff) efficiencies.

    ``eta_eff`` cancels from every closed form; it is kept for the oracle.
    """

    kind: DetectorKind = DetectorKind.NRPD
    eta_t: float = 1.0
    eta_eff: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DetectorKind.parse(self.kind))
        _unit_interval("eta_t", self.eta_t)
        _unit_interval("eta_eff", self.eta_eff)


@dataclass(frozen=True, eq=False)
class SwapConfig:
    """Efficiency ratio eta_1/eta_2 and an optional Raman mode on the idler grid.

    ``raman_mode=None`` means the Raman photon is matched to the leading
    idler mode.
    """

    eta_r: float = 1.0
    raman_mode: np.ndarray | None = None

    def __post_init__(self):
        if not (self.eta_r > 0 and math.isfinite(self.eta_r)):
            raise InvalidParameterError(f"eta_r must be positive and finite, got {self.eta_r}")


@dataclass(frozen=True)
class ProtocolMetrics:
    fidelity: float
    heralding: float
    success: float

    def __post_init__(self):
        for name in ("fidelity", "heralding", "success"):
            v = getattr(self, name)
            if not (-1e-12 <= v <= 1 + 1e-12):
                raise InvalidParameterError(f"{name}={v} outside [0, 1]")

    def as_tuple(self):
        return (self.fidelity, self.heralding, self.success)


@dataclass(frozen=True)
class TeleportInput:
    d0: complex
    d1: complex

    def __post_init__(self):
        norm = abs(self.d0) ** 2 + abs(self.d1) ** 2
        if abs(norm - 1.0) > 1e-10:
            raise InvalidParameterError(f"|d0|^2 + |d1|^2 = {norm:.12g}, expected 1")

    @classmethod
    def from_abs(cls, d0_abs: float, phase: float = 0.0) -> "TeleportInput":
        """Qubit with real ``|d0|`` and ``d1 = sqrt(1-|d0|^2) e^{i phase}``."""
        _unit_interval("|d0|", d0_abs)
        return cls(complex(d0_abs), math.sqrt(1.0 - d0_abs**2) * complex(math.cos(phase), math.sin(phase)))


# -- plain-number closed forms ------------------------------------------------


def efficiency_factor(eta_r: float) -> float:
    """(sqrt(eta_r) + 1/sqrt(eta_r))^2 = eta_r + 2 + 1/eta_r."""
    return eta_r + 2.0 + 1.0 / eta_r


def multipair_weight(kind, eta_r: float, eta_t: float, purity: float) -> float:
    """The double-excitation weight a: eta_r(2-eta_t)(1+P) for NRPD, 2 eta_r(1-eta_t)(1+P) for PNRD."""
    kind = DetectorKind.parse(kind)
    if kind is DetectorKind.NRPD:
        return eta_r * (2.0 - eta_t) * (1.0 + purity)
    return 2.0 * eta_r * (1.0 - eta_t) * (1.0 + purity)


def swap_closed_form(overlap, purity, eta_r, eta_t, kind) -> ProtocolMetrics:
    if eta_r <= 0:
        raise InvalidParameterError("eta_r must be positive")
    a = multipair_weight(kind, eta_r, eta_t, purity)
    k = efficiency_factor(eta_r)
    fid = (1.0 + overlap) / (0.5 * a + 2.0)
    her = (0.5 * a * eta_t + 2.0 * eta_t) / k
    suc = eta_t * (1.0 + overlap) / k
    return ProtocolMetrics(fid, her, suc)


def pme_closed_form(overlap, purity, eta_r, eta_t, kind=DetectorKind.NRPD) -> float:
    a = multipair_weight(kind, eta_r, eta_t, purity)
    return 4.0 * (1.0 + overlap**2) / (a + 4.0) ** 2


def teleport_closed_form(fidelity, overlap, d0, d1) -> float:
    p0 = abs(d0) ** 2
    p1 = abs(d1) ** 2
    return fidelity**2 / (1.0 + overlap) ** 2 * (1.0 + (2.0 * overlap**2 - 2.0) * p0 * p1)


def teleport_density_coefficients(a, overlap, d0, d1) -> dict:
    """Coefficients of the conditional atomic density rho_1 after teleportation.

    Keys: ``vacuum`` (|0><0|), ``BB`` and ``DD`` (the two single-excitation
    populations) and ``BD`` (the coherence, with ``DB`` its conjugate).
    """
    den = (a + 4.0) ** 2
    return {
        "vacuum": (a + 2.0) / (2.0 * den),
        "BB": abs(d0) ** 2 / den,
        "DD": abs(d1) ** 2 / den,
        "BD": overlap**2 * d0 * np.conj(d1) / den,
    }


# -- spectrum-level operations -------------------------------------------------


def mode_overlap(decomp: SchmidtDecomposition, phi=None) -> float:
    """sum_j lambda_j |int phi_j(w) conj Phi(w) dw|^2 for a Raman mode Phi on the idler grid.

    ``phi=None`` is the matched Raman mode Phi = phi_1, giving lambda_1.
    """
    if phi is None:
        return decomp.lambda1
    if not decomp.has_modes:
        raise PreconditionError("a custom Raman mode needs a decomposition with mode functions")
    phi = np.asarray(phi, dtype=complex)
    w = decomp.idler_grid.weights
    if phi.shape != w.shape:
        raise InvalidParameterError(
            f"Raman mode has {phi.shape[0] if phi.ndim else 0} samples, idler grid has {w.size}"
        )
    norm = float(np.sum(w * np.abs(phi) ** 2))
    if abs(norm - 1.0) > 1e-8:
        raise InvalidParameterError(f"Raman mode must be unit normalized, norm^2 = {norm:.12g}")
    proj = decomp.idler_modes.T @ (w * np.conj(phi))
    lam = decomp.retained()
    return float(np.sum(lam * np.abs(proj) ** 2))


def _overlap(decomp, cfg):
    return mode_overlap(decomp, cfg.raman_mode)


def swap_metrics(decomp: SchmidtDecomposition, det: DetectorModel, cfg: SwapConfig) -> ProtocolMetrics:
    """Fidelity, heralding and success probability of one swapping step."""
    return swap_closed_form(_overlap(decomp, cfg), decomp.purity, cfg.eta_r, det.eta_t, det.kind)


def vacuum_coefficient(det: DetectorModel, cfg: SwapConfig, decomp: SchmidtDecomposition) -> float:
    """c0 = a/4, the vacuum weight relative to the PME components."""
    return multipair_weight(det.kind, cfg.eta_r, det.eta_t, decomp.purity) / 4.0


def pme_success(decomp: SchmidtDecomposition, det: DetectorModel, cfg: SwapConfig) -> float:
    """Success probability of the PME projection, 4(1+o^2)/(a+4)^2."""
    return pme_closed_form(_overlap(decomp, cfg), decomp.purity, cfg.eta_r, det.eta_t, det.kind)


def teleport_success(
    decomp: SchmidtDecomposition, det: DetectorModel, cfg: SwapConfig, q: TeleportInput
) -> float:
    """P_QT = F^2/(1+o)^2 [1 + (2 o^2 - 2)|d0|^2 |d1|^2] with F the swap fidelity."""
    o = _overlap(decomp, cfg)
    fid = swap_closed_form(o, decomp.purity, cfg.eta_r, det.eta_t, det.kind).fidelity
    return teleport_closed_form(fid, o, q.d0, q.d1)


def teleport_conditional_density_metrics(
    decomp: SchmidtDecomposition, det: DetectorModel, cfg: SwapConfig, q: TeleportInput
) -> tuple[float, float]:
    """(F1, P1) from the conditional density rho_1; 4 P1 F1 equals the teleport success."""
    o = _overlap(decomp, cfg)
    a = multipair_weight(det.kind, cfg.eta_r, det.eta_t, decomp.purity)
    c = teleport_density_coefficients(a, o, q.d0, q.d1)
    p1 = c["vacuum"] + c["BB"] + c["DD"]
    # <Phi|rho_1|Phi> with |Phi> = d0|B> + d1|D>
    num = (
        abs(q.d0) ** 2 * c["BB"]
        + abs(q.d1) ** 2 * c["DD"]
        + 2.0 * np.real(np.conj(q.d0) * q.d1 * c["BD"])
    )
    f1 = float(num) / p1
    expected = teleport_success(decomp, det, cfg, q)
    if abs(4.0 * p1 * f1 - expected) > 1e-12:
        raise ConsistencyError(f"4 P1 F1 = {4 * p1 * f1!r} differs from P_QT = {expected!r}")
    return f1, float(p1)
