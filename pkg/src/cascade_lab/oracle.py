"""Brute-force detection networks built from the Fock-space primitives.

Each network composes :func:`build_joint_state`, beam splitters, efficiency
losses and click projectors, and reports the same figures of merit as the
closed forms in :mod:`cascade_lab.protocol` without using any of them.

Detector ports that must stay dark are projected onto vacuum *before* their
efficiency loss: the silent projector covers both the detected mode and its
loss mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .fock import (
    ATOMIC,
    NRPD,
    PNRD,
    SILENT,
    ClickSpec,
    ConditionalDensity,
    FockState,
    ModeRegistry,
    beam_splitter,
    build_joint_state,
    condition_and_trace,
    efficiency_loss,
)

NETWORKS = ("swap", "pme", "teleport")


@dataclass(frozen=True)
class OracleParams:
    eta1: float
    eta2: float
    lambdas: tuple
    eta_t: float = 1.0
    eta_eff: float = 1.0
    detector: str = NRPD
    raman: tuple | None = None
    d0: complex = 1.0
    d1: complex = 0.0

    def __post_init__(self):
        if self.detector not in (NRPD, PNRD):
            raise InvalidParameterError(f"detector must be nrpd or pnrd, got {self.detector!r}")
        for name in ("eta_t", "eta_eff"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParameterError(f"{name} must lie in [0, 1]")
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        if self.raman is not None:
            object.__setattr__(self, "raman", tuple(complex(x) for x in self.raman))

    @property
    def eta_r_exact(self) -> float:
        """eta1(1-eta2) / (eta2(1-eta1)), the ratio the closed forms actually see."""
        return self.eta1 * (1 - self.eta2) / (self.eta2 * (1 - self.eta1))


def eta_pair_for_ratio(eta_r: float, eta2: float = 0.01):
    """(eta1, eta2) with eta1(1-eta2)/(eta2(1-eta1)) equal to ``eta_r`` exactly."""
    if eta_r <= 0 or not 0 < eta2 < 1:
        raise InvalidParameterError("need eta_r > 0 and 0 < eta2 < 1")
    eta1 = eta_r * eta2 / (1.0 - eta2 + eta_r * eta2)
    return eta1, eta2


@dataclass
class SwapVariant:
    m_port: int
    n_port: int
    c_port: int
    sign: int
    probability: float
    fidelity: float
    density: ConditionalDensity = field(repr=False)


@dataclass
class SwapResult:
    fidelity: float
    heralding: float
    success: float
    normalization: float
    variants: list
    density: ConditionalDensity = field(repr=False)
    labels: dict = field(repr=False)

    def metrics(self):
        return (self.fidelity, self.heralding, self.success)

    def vacuum_weight(self) -> float:
        """a from the normalized density: rho_vac / rho_AA = a / 2."""
        rho = self.density.normalized()
        a_lab = self.labels["A"]["atom"]
        return 2.0 * rho.element({}, {}).real / rho.element({a_lab: 1}, {a_lab: 1}).real


@dataclass
class PMEResult:
    success: float
    post_probability: float
    fidelity: float


@dataclass
class TeleportResult:
    success: float
    events: list
    density: ConditionalDensity = field(repr=False)

    def coefficients(self, b_label="B", d_label="D"):
        rho = self.density
        return {
            "vacuum": rho.element({}, {}),
            "BB": rho.element({b_label: 1}, {b_label: 1}),
            "DD": rho.element({d_label: 1}, {d_label: 1}),
            "BD": rho.element({b_label: 1}, {d_label: 1}),
        }


def _swap_detection(params: OracleParams, m_port: int, n_port: int, term_filter=None):
    """Source, idler/Raman mixing and losses; returns state, labels and click groups."""
    state, reg, labels = build_joint_state(
        params.eta1, params.eta2, params.lambdas, params.raman, term_filter=term_filter
    )
    rank = len(params.lambdas)
    groups = {}
    for site, det in (("A", "m"), ("B", "n")):
        lab = labels[site]
        ports = {1: [], 2: []}
        for k, (i_mode, r_mode) in enumerate(zip(lab["idler"], lab["raman"])):
            out1, out2 = f"{det}1_{k}", f"{det}2_{k}"
            state = beam_splitter(state, i_mode, r_mode, 0.5, out_labels=(out1, out2))
            ports[1].append(out1)
            ports[2].append(out2)
        groups[det] = ports
    for j in range(rank):
        state = beam_splitter(state, labels["A"]["signal"][j], labels["B"]["signal"][j], 0.5,
                              out_labels=(f"c1_{j}", f"c2_{j}"))
    groups["c"] = {1: [f"c1_{j}" for j in range(rank)], 2: [f"c2_{j}" for j in range(rank)]}

    losses = {}
    for det, eta in (("m", params.eta_eff), ("n", params.eta_eff), ("c", params.eta_t)):
        for port in (1, 2):
            for mode in groups[det][port]:
                state, loss = efficiency_loss(state, mode, eta)
                losses[mode] = loss
    return state, labels, groups, losses


def _clicks(groups, losses, det, port, kind):
    """Click on ``port`` of detector ``det`` and darkness (pre-loss) on the other port."""
    other = 3 - port
    dark = tuple(groups[det][other]) + tuple(losses[m] for m in groups[det][other])
    return [ClickSpec(tuple(groups[det][port]), kind), ClickSpec(dark, SILENT)]


def _dlcz_target(labels, sign):
    a = labels["A"]["atom"]
    b = labels["B"]["atom"]
    s = 1.0 / math.sqrt(2.0)
    return [(s, {b: 1}), (sign * s, {a: 1})]


def run_swap(params: OracleParams, m_port=1, n_port=1, term_filter=None) -> SwapResult:
    """Swapping network conditioned on clicks at ``m_port`` and ``n_port``.

    Returns F, P_H = P_1 + P_2 and P_S = sum P_i F_i for the two midway
    outcomes, with P_i normalized by the probability N of the m/n clicks.
    The target for midway port ``c`` is ``(S_B + s S_A)/sqrt(2)`` with
    ``s = (-1)^(m_port + n_port + c - 3)`` (so ports 1, 1, 1 herald S_A + S_B).
    """
    kind = params.detector
    state, labels, groups, losses = _swap_detection(params, m_port, n_port, term_filter)
    mn = _clicks(groups, losses, "m", m_port, kind) + _clicks(groups, losses, "n", n_port, kind)
    norm = condition_and_trace(state, mn).trace
    if norm <= 0:
        raise InvalidParameterError("the m/n click pattern has zero probability")
    variants = []
    for c_port in (1, 2):
        rho = condition_and_trace(state, mn + _clicks(groups, losses, "c", c_port, kind))
        sign = (-1) ** (m_port + n_port + c_port - 3)
        tr = rho.trace
        fid = rho.expectation(_dlcz_target(labels, sign)) / tr if tr > 0 else 0.0
        variants.append(SwapVariant(m_port, n_port, c_port, sign, tr / norm, fid, rho))
    her = sum(v.probability for v in variants)
    suc = sum(v.probability * v.fidelity for v in variants)
    return SwapResult(
        fidelity=suc / her if her > 0 else 0.0,
        heralding=her,
        success=suc,
        normalization=norm,
        variants=variants,
        density=variants[0].density,
        labels=labels,
    )


def swap_click_variants(params: OracleParams):
    """All four (m, n) click variants of the swapping network."""
    return [run_swap(params, m, n) for m in (1, 2) for n in (1, 2)]


# -- PME and teleportation --------------------------------------------------------


def _ensemble_state(reg, ensemble_ab, ensemble_cd, relabel_ab, relabel_cd, extra=None):
    """Joint ensemble [(p, FockState)] of two independent pair densities (and an optional pure factor)."""
    out = []
    for p1, v1 in ensemble_ab:
        s1 = FockState.from_occupations(reg, [(a, relabel_ab(k)) for k, a in v1.items()])
        for p2, v2 in ensemble_cd:
            s2 = FockState.from_occupations(reg, [(a, relabel_cd(k)) for k, a in v2.items()])
            st = s1.tensor(s2)
            if extra is not None:
                st = extra.tensor(st)
            out.append((p1 * p2, st))
    return out


def _pair_ensemble(swap: SwapResult):
    rho = swap.density.normalized()
    a = swap.labels["A"]["atom"]
    b = swap.labels["B"]["atom"]
    names = {rho.registry.index(a): "A", rho.registry.index(b): "B"}
    ens = []
    for p, vec in rho.eigen_ensemble():
        ens.append((p, {tuple((names[m], n) for m, n in key): amp for key, amp in vec.items()}))
    return ens


def _relabel(mapping):
    def f(key):
        return {mapping[name]: n for name, n in key}
    return f


def _atomic_registry(labels):
    reg = ModeRegistry()
    for lab in labels:
        reg.add(lab, ATOMIC)
    return reg


def _accumulate(total, rho, weight):
    if total is None:
        return ConditionalDensity(rho.registry, rho.keep, rho.basis, weight * rho.matrix)
    basis = list(total.basis)
    for k in rho.basis:
        if k not in basis:
            basis.append(k)
    pos = {k: i for i, k in enumerate(basis)}
    mat = np.zeros((len(basis), len(basis)), dtype=complex)
    for src, w in ((total, 1.0), (rho, weight)):
        idx = [pos[k] for k in src.basis]
        mat[np.ix_(idx, idx)] += w * src.matrix
    return ConditionalDensity(total.registry, total.keep, basis, mat)


def run_pme(params: OracleParams) -> PMEResult:
    """Post-selected projection of rho_AB (x) rho_CD onto (S_A S_D + S_B S_C)/sqrt(2).

    Both pair densities come from the swapping network (m1, n1, c1 clicks),
    one excitation is required on each side {A, C} and {B, D}.
    """
    swap = run_swap(params)
    ens = _pair_ensemble(swap)
    reg = _atomic_registry(["A", "B", "C", "D"])
    joint = _ensemble_state(reg, ens, ens, _relabel({"A": "A", "B": "B"}), _relabel({"A": "C", "B": "D"}))
    total = None
    for p, st in joint:
        projected = FockState(reg, {k: a for k, a in st.amps.items() if _one_each(reg, k)})
        dens = _pure_density(projected, ("A", "B", "C", "D"))
        total = _accumulate(total, dens, p)
    post = total.trace
    s = 1.0 / math.sqrt(2.0)
    target = [(s, {"A": 1, "D": 1}), (s, {"B": 1, "C": 1})]
    fid = total.expectation(target) / post if post > 0 else 0.0
    return PMEResult(success=post * fid, post_probability=post, fidelity=fid)


def _one_each(reg, key):
    occ = {reg.labels[m]: n for m, n in key}
    return occ.get("A", 0) + occ.get("C", 0) == 1 and occ.get("B", 0) + occ.get("D", 0) == 1


def _pure_density(state: FockState, keep):
    basis = sorted(state.amps, key=lambda k: (sum(n for _, n in k), k))
    v = np.array([state.amps[k] for k in basis], dtype=complex)
    return ConditionalDensity(state.registry, keep, basis, np.outer(v, v.conj()))


TELEPORT_EVENTS = (("DI1", "DI2"), ("DA", "DC"), ("DI1", "DC"), ("DA", "DI2"))
# beam-splitter outputs keep their input labels: port "a" of BS(I1, A) is DI1, etc.
_DETECTOR_MODE = {"DI1": "I1", "DA": "A", "DI2": "I2", "DC": "C"}
_MIXED_EVENTS = (("DI1", "DC"), ("DA", "DI2"))


def _teleport_specs(event):
    specs = []
    for pair, hit in ((("DI1", "DA"), event[0]), (("DI2", "DC"), event[1])):
        miss = pair[1] if hit == pair[0] else pair[0]
        specs.append(ClickSpec((_DETECTOR_MODE[hit],), NRPD))
        specs.append(ClickSpec((_DETECTOR_MODE[miss],), SILENT))
    return specs


def run_teleport(params: OracleParams) -> TeleportResult:
    """Teleport d0|I1> + d1|I2> onto ensembles B and D.

    I1 is mixed with A and I2 with C on 50/50 beam splitters; each of the
    four single-click events (one click per splitter, threshold detectors)
    is scored against ``d0 S_B + s d1 S_D`` where ``s = -1`` for the mixed
    events (DI1, DC) and (DA, DI2), the relative-phase correction.
    """
    norm = abs(params.d0) ** 2 + abs(params.d1) ** 2
    if abs(norm - 1.0) > 1e-10:
        raise InvalidParameterError("teleported qubit must be normalized")
    ens = _pair_ensemble(run_swap(params))
    reg = _atomic_registry(["I1", "I2", "A", "B", "C", "D"])
    qubit = FockState.from_occupations(reg, [(params.d0, {"I1": 1}), (params.d1, {"I2": 1})])
    joint = _ensemble_state(
        reg, ens, ens, _relabel({"A": "A", "B": "B"}), _relabel({"A": "C", "B": "D"}), extra=qubit
    )
    mixed = []
    for p, st in joint:
        st = beam_splitter(st, "I1", "A", 0.5)
        mixed.append((p, beam_splitter(st, "I2", "C", 0.5)))

    events = []
    first = None
    total = 0.0
    for ev in TELEPORT_EVENTS:
        specs = _teleport_specs(ev)
        rho = None
        for p, st in mixed:
            rho = _accumulate(rho, condition_and_trace(st, specs, keep=("B", "D")), p)
        sign = -1.0 if ev in _MIXED_EVENTS else 1.0
        tr = rho.trace
        fid = rho.expectation([(params.d0, {"B": 1}), (sign * params.d1, {"D": 1})]) / tr if tr > 0 else 0.0
        events.append({"event": ev, "probability": tr, "fidelity": fid})
        total += tr * fid
        if first is None:
            first = rho
    return TeleportResult(success=total, events=events, density=first)


def run_network(network: str, params: OracleParams):
    """Dispatch to the swap, pme or teleport network."""
    if network == "swap":
        return run_swap(params)
    if network == "pme":
        return run_pme(params)
    if network == "teleport":
        return run_teleport(params)
    raise InvalidParameterError(f"unknown network {network!r}; expected one of {NETWORKS}")
