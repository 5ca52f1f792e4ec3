"""Truncated multimode Fock-space algebra for the detection oracle.

States are sparse: a dict from occupation keys to complex amplitudes, where a
key is a sorted tuple of ``(mode_index, count)`` pairs with ``count > 0``.
Mode labels live in a :class:`ModeRegistry` that a network owns and extends
(for instance with fresh loss modes) while it runs.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

DEFAULT_CAP = 4
ATOMIC = "atomic"
OPTICAL = "optical"

NRPD = "nrpd"
PNRD = "pnrd"
SILENT = "silent"


class TruncationError(InvalidParameterError):
    """A state would exceed the registry's photon-number truncation."""


class ModeRegistry:
    """Ordered, uniquely labelled modes with a total photon-number cap."""

    def __init__(self, cap: int = DEFAULT_CAP):
        if cap < DEFAULT_CAP:
            raise InvalidParameterError(f"photon truncation must be >= {DEFAULT_CAP}")
        self.cap = cap
        self.labels: list[str] = []
        self.kinds: list[str] = []
        self._index: dict[str, int] = {}
        self._fresh = 0

    def add(self, label: str, kind: str = OPTICAL) -> int:
        if label in self._index:
            raise InvalidParameterError(f"mode {label!r} already registered")
        self._index[label] = len(self.labels)
        self.labels.append(label)
        self.kinds.append(kind)
        return self._index[label]

    def fresh(self, prefix: str = "loss") -> str:
        while True:
            label = f"{prefix}#{self._fresh}"
            self._fresh += 1
            if label not in self._index:
                self.add(label, OPTICAL)
                return label

    def rename(self, old: str, new: str) -> None:
        if new in self._index:
            raise InvalidParameterError(f"mode {new!r} already registered")
        idx = self.index(old)
        del self._index[old]
        self._index[new] = idx
        self.labels[idx] = new

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise InvalidParameterError(f"unregistered mode {label!r}") from None

    def __contains__(self, label):
        return label in self._index

    def __len__(self):
        return len(self.labels)

    def atomic_labels(self):
        return [lab for lab, k in zip(self.labels, self.kinds) if k == ATOMIC]


def _key_from(occ: dict) -> tuple:
    return tuple(sorted((m, n) for m, n in occ.items() if n > 0))


def _total(key) -> int:
    return sum(n for _, n in key)


class FockState:
    """Sparse superposition of occupation-number states (not necessarily normalized)."""

    def __init__(self, registry: ModeRegistry, amplitudes: dict | None = None):
        self.registry = registry
        self.amps: dict[tuple, complex] = dict(amplitudes or {})
        for key, amp in self.amps.items():
            if not np.isfinite(amp):
                raise InvalidParameterError("non-finite amplitude")
            if _total(key) > registry.cap:
                raise TruncationError(f"term with {_total(key)} quanta exceeds cap {registry.cap}")

    @classmethod
    def vacuum(cls, registry: ModeRegistry, amplitude: complex = 1.0) -> "FockState":
        return cls(registry, {(): complex(amplitude)})

    @classmethod
    def from_occupations(cls, registry, terms) -> "FockState":
        """Build from ``[(amp, {label: count}), ...]``."""
        out = defaultdict(complex)
        for amp, occ in terms:
            out[_key_from({registry.index(k): v for k, v in occ.items()})] += amp
        return cls(registry, out)

    def copy(self):
        return FockState(self.registry, self.amps)

    def norm2(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amps.values()))

    def norm(self) -> float:
        return math.sqrt(self.norm2())

    def max_quanta(self) -> int:
        return max((_total(k) for k in self.amps), default=0)

    def occupation(self, key, label) -> int:
        idx = self.registry.index(label)
        return dict(key).get(idx, 0)

    def amplitude(self, occ: dict) -> complex:
        key = _key_from({self.registry.index(k): v for k, v in occ.items()})
        return self.amps.get(key, 0j)

    def pruned(self, tol=0.0) -> "FockState":
        return FockState(self.registry, {k: a for k, a in self.amps.items() if abs(a) > tol})

    def __add__(self, other):
        out = defaultdict(complex, self.amps)
        for k, a in other.amps.items():
            out[k] += a
        return FockState(self.registry, out)

    def __mul__(self, scalar):
        return FockState(self.registry, {k: scalar * a for k, a in self.amps.items()})

    __rmul__ = __mul__

    def tensor(self, other: "FockState") -> "FockState":
        """Product of two states on disjoint mode sets of the same registry."""
        out = defaultdict(complex)
        for k1, a1 in self.amps.items():
            m1 = {m for m, _ in k1}
            for k2, a2 in other.amps.items():
                if any(m in m1 for m, _ in k2):
                    raise InvalidParameterError("tensor factors share a mode")
                key = tuple(sorted(k1 + k2))
                if _total(key) > self.registry.cap:
                    raise TruncationError("tensor product exceeds the photon cap")
                out[key] += a1 * a2
        return FockState(self.registry, out)

    def create(self, label: str) -> "FockState":
        """Apply the creation operator of ``label``."""
        idx = self.registry.index(label)
        out = defaultdict(complex)
        for key, amp in self.amps.items():
            occ = dict(key)
            n = occ.get(idx, 0)
            occ[idx] = n + 1
            new = _key_from(occ)
            if _total(new) > self.registry.cap:
                raise TruncationError("creation exceeds the photon cap")
            out[new] += amp * math.sqrt(n + 1)
        return FockState(self.registry, out)


def apply_creation_polynomial(state: FockState, terms) -> FockState:
    """Apply sum_t c_t prod(a_label^dagger) given as ``[(c, (label, ...)), ...]``."""
    total = None
    for coeff, labels in terms:
        piece = state
        for lab in labels:
            piece = piece.create(lab)
        piece = piece * coeff
        total = piece if total is None else total + piece
    return total if total is not None else FockState(state.registry, {})


def _bs_expansion(na, nb, t, r):
    """Coefficients of (t A + r B)^na (r A - t B)^nb as {(pa, pb): c} in monomial form."""
    out = defaultdict(float)
    for k in range(na + 1):
        ck = math.comb(na, k) * t**k * r ** (na - k)
        for l in range(nb + 1):
            cl = math.comb(nb, l) * r**l * (-t) ** (nb - l)
            out[(k + l, na + nb - k - l)] += ck * cl
    return out


def beam_splitter(state: FockState, mode_a: str, mode_b: str, transmissivity: float, out_labels=None):
    """Two-mode beam splitter a^dag -> sqrt(T) a^dag + sqrt(1-T) b^dag, b^dag -> sqrt(1-T) a^dag - sqrt(T) b^dag.

    ``out_labels=(new_a, new_b)`` renames the two output modes in the registry.
    """
    if not 0.0 <= transmissivity <= 1.0:
        raise InvalidParameterError(f"transmissivity must lie in [0, 1], got {transmissivity}")
    reg = state.registry
    ia = reg.index(mode_a)
    ib = reg.index(mode_b)
    if ia == ib:
        raise InvalidParameterError("beam splitter needs two distinct modes")
    t = math.sqrt(transmissivity)
    r = math.sqrt(1.0 - transmissivity)
    cache = {}
    out = defaultdict(complex)
    for key, amp in state.amps.items():
        occ = dict(key)
        na = occ.pop(ia, 0)
        nb = occ.pop(ib, 0)
        if na == 0 and nb == 0:
            out[key] += amp
            continue
        if (na, nb) not in cache:
            cache[(na, nb)] = _bs_expansion(na, nb, t, r)
        norm_in = math.sqrt(math.factorial(na) * math.factorial(nb))
        for (pa, pb), c in cache[(na, nb)].items():
            if c == 0.0:
                continue
            occ2 = dict(occ)
            occ2[ia] = pa
            occ2[ib] = pb
            out[_key_from(occ2)] += amp * c * math.sqrt(math.factorial(pa) * math.factorial(pb)) / norm_in
    if out_labels is not None:
        reg.rename(mode_a, out_labels[0])
        reg.rename(mode_b, out_labels[1])
    return FockState(reg, out)


def efficiency_loss(state: FockState, mode: str, eta: float, loss_label: str | None = None):
    """Couple ``mode`` to a fresh vacuum loss mode with transmissivity ``eta``.

    Returns ``(state, loss_label)``.
    """
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameterError(f"efficiency must lie in [0, 1], got {eta}")
    reg = state.registry
    if loss_label is None:
        loss_label = reg.fresh(f"loss:{mode}")
    else:
        reg.add(loss_label, OPTICAL)
    return beam_splitter(state, mode, loss_label, eta), loss_label


@dataclass(frozen=True)
class ClickSpec:
    """Photon-number condition on the summed occupation of a mode group."""

    modes: tuple
    kind: str

    def __post_init__(self):
        if self.kind not in (NRPD, PNRD, SILENT):
            raise InvalidParameterError(f"click kind must be nrpd, pnrd or silent, got {self.kind!r}")
        if not self.modes:
            raise InvalidParameterError("a click group needs at least one mode")
        object.__setattr__(self, "modes", tuple(self.modes))

    def accepts(self, count: int) -> bool:
        if self.kind == NRPD:
            return count >= 1
        if self.kind == PNRD:
            return count == 1
        return count == 0


class ConditionalDensity:
    """Unnormalized density operator over a set of retained modes.

    ``basis`` lists occupation keys restricted to the retained modes (indices
    into the owning registry); ``matrix`` is expressed in that basis.
    """

    def __init__(self, registry: ModeRegistry, keep: tuple, basis: list, matrix: np.ndarray):
        self.registry = registry
        self.keep = tuple(keep)
        self.basis = list(basis)
        self.matrix = np.asarray(matrix, dtype=complex)
        self._pos = {k: i for i, k in enumerate(self.basis)}

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def normalized(self) -> "ConditionalDensity":
        tr = self.trace
        if tr <= 0:
            raise InvalidParameterError("cannot normalize a zero-trace density")
        return ConditionalDensity(self.registry, self.keep, self.basis, self.matrix / tr)

    def key(self, occ: dict) -> tuple:
        return _key_from({self.registry.index(k): v for k, v in occ.items()})

    def element(self, bra: dict, ket: dict) -> complex:
        """<bra|rho|ket> for occupation dicts over retained labels."""
        i = self._pos.get(self.key(bra))
        j = self._pos.get(self.key(ket))
        if i is None or j is None:
            return 0j
        return complex(self.matrix[i, j])

    def expectation(self, terms) -> float:
        """<v|rho|v> for ``v = sum amp |occ>`` given as ``[(amp, occ), ...]``."""
        vec = np.zeros(len(self.basis), dtype=complex)
        for amp, occ in terms:
            i = self._pos.get(self.key(occ))
            if i is not None:
                vec[i] += amp
        return float(np.real(np.conj(vec) @ self.matrix @ vec))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def min_eigenvalue(self) -> float:
        if not self.basis:
            return 0.0
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))[0])

    def eigen_ensemble(self, tol: float = 1e-15):
        """Pure-state ensemble ``[(weight, {key: amp}), ...]`` with unit-norm members."""
        herm = 0.5 * (self.matrix + self.matrix.conj().T)
        vals, vecs = np.linalg.eigh(herm)
        out = []
        for p, v in zip(vals[::-1], vecs.T[::-1]):
            if p > tol:
                out.append((float(p), {k: complex(c) for k, c in zip(self.basis, v) if c != 0}))
        return out

    def labelled(self):
        """Basis keys rendered as ``{label: count}`` dicts, for reporting."""
        return [{self.registry.labels[m]: n for m, n in key} for key in self.basis]


def condition_and_trace(state: FockState, click_spec, keep=None) -> ConditionalDensity:
    """Project onto the click pattern and trace out every non-retained mode.

    ``keep`` defaults to the registry's atomic modes.  The result is
    sum_c |v_c><v_c| where ``v_c`` collects the retained-mode amplitudes that
    share the traced-out configuration ``c``.
    """
    specs = list(click_spec)
    if not specs:
        raise InvalidParameterError("click_spec must not be empty")
    reg = state.registry
    keep_labels = tuple(reg.atomic_labels() if keep is None else keep)
    keep_idx = {reg.index(lab) for lab in keep_labels}
    groups = [({reg.index(m) for m in s.modes}, s) for s in specs]
    for idx_set, _ in groups:
        if idx_set & keep_idx:
            raise InvalidParameterError("a detected mode cannot also be retained")

    branches = defaultdict(dict)
    for key, amp in state.amps.items():
        occ = dict(key)
        if not all(s.accepts(sum(occ.get(m, 0) for m in idx_set)) for idx_set, s in groups):
            continue
        kept = tuple((m, n) for m, n in key if m in keep_idx)
        traced = tuple((m, n) for m, n in key if m not in keep_idx)
        branch = branches[traced]
        branch[kept] = branch.get(kept, 0j) + amp

    basis = sorted({k for b in branches.values() for k in b}, key=lambda k: (_total(k), k))
    pos = {k: i for i, k in enumerate(basis)}
    mat = np.zeros((len(basis), len(basis)), dtype=complex)
    for branch in branches.values():
        v = np.zeros(len(basis), dtype=complex)
        for k, a in branch.items():
            v[pos[k]] += a
        mat += np.outer(v, v.conj())
    return ConditionalDensity(reg, keep_labels, basis, mat)


# -- joint source state ----------------------------------------------------------

SITE_TERMS = ("vac", "c", "r", "b")
_DEGREE = {"vac": 0, "c": 1, "r": 1, "b": 2}


def site_labels(site: str, rank: int, n_freq: int) -> dict:
    return {
        "signal": [f"{site}.s{j}" for j in range(rank)],
        "idler": [f"{site}.i{k}" for k in range(n_freq)],
        "raman": [f"{site}.r{k}" for k in range(n_freq)],
        "atom": f"{site}.S",
    }


def _raman_coefficients(raman, rank):
    if raman is None:
        alpha = np.zeros(rank, dtype=complex)
        alpha[0] = 1.0
        return alpha
    alpha = np.asarray(raman, dtype=complex)
    if alpha.ndim != 1 or alpha.size < rank or alpha.size > rank + 1:
        raise InvalidParameterError("raman coefficients need rank or rank+1 entries")
    if abs(np.vdot(alpha, alpha).real - 1.0) > 1e-10:
        raise InvalidParameterError("raman coefficients must be unit normalized")
    return alpha


def _site_state(reg, labels, lambdas, alpha, eta1, eta2, allowed):
    """Per-site factor as {term_name: FockState} (unscaled, unit-norm pieces)."""
    vac = FockState.vacuum(reg)
    sq = np.sqrt(lambdas)
    cascade = [(s, (labels["signal"][j], labels["idler"][j])) for j, s in enumerate(sq)]
    raman = [(a, (labels["raman"][k], labels["atom"])) for k, a in enumerate(alpha) if a != 0]
    amp = {
        "vac": math.sqrt((1 - eta1) * (1 - eta2)),
        "c": math.sqrt(eta1 * (1 - eta2)),
        "r": math.sqrt(eta2 * (1 - eta1)),
        "b": math.sqrt(eta1 * eta2),
    }
    pieces = {}
    for name in allowed:
        if amp[name] == 0.0:
            continue
        if name == "vac":
            st = vac
        elif name == "c":
            st = apply_creation_polynomial(vac, cascade)
        elif name == "r":
            st = apply_creation_polynomial(vac, raman)
        else:
            st = apply_creation_polynomial(apply_creation_polynomial(vac, cascade), raman)
        pieces[name] = st * amp[name]
    return pieces


def build_joint_state(eta1, eta2, lambdas, raman=None, *, sites=("A", "B"), term_filter=None, cap=DEFAULT_CAP):
    """Two-site source state truncated at total order 2 in sqrt(eta).

    Each site emits a cascade pair ``sum_j sqrt(lambda_j) s_j^dag i_j^dag``
    with amplitude sqrt(eta1) and a Raman pair ``sum_k alpha_k r_k^dag S^dag``
    with amplitude sqrt(eta2).  ``raman`` gives the Raman photon's
    coefficients in the idler Schmidt basis (a trailing entry is the
    component orthogonal to every retained idler mode); ``None`` means the
    leading idler mode.

    ``term_filter`` optionally restricts the kept (site A term, site B term)
    pairs, with term names ``vac``, ``c``, ``r``, ``b``.

    Returns ``(state, registry, labels)`` where ``labels[site]`` maps roles
    to mode labels.
    """
    for name, e in (("eta1", eta1), ("eta2", eta2)):
        if not 0.0 <= e < 1.0:
            raise InvalidParameterError(f"{name} must lie in [0, 1), got {e}")
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1 or lam.size == 0 or np.any(lam < 0):
        raise InvalidParameterError("lambdas must be a non-empty non-negative sequence")
    if abs(lam.sum() - 1.0) > 1e-12:
        raise InvalidParameterError("lambdas must sum to 1")
    rank = lam.size
    alpha = _raman_coefficients(raman, rank)
    n_freq = alpha.size

    reg = ModeRegistry(cap)
    labels = {}
    for site in sites:
        lab = site_labels(site, rank, n_freq)
        for group in ("signal", "idler", "raman"):
            for m in lab[group]:
                reg.add(m, OPTICAL)
        reg.add(lab["atom"], ATOMIC)
        labels[site] = lab

    a_site, b_site = sites
    pa = _site_state(reg, labels[a_site], lam, alpha, eta1, eta2, SITE_TERMS)
    pb = _site_state(reg, labels[b_site], lam, alpha, eta1, eta2, SITE_TERMS)
    state = FockState(reg, {})
    for ta, sa in pa.items():
        for tb, sb in pb.items():
            if _DEGREE[ta] + _DEGREE[tb] > 2:
                continue
            if term_filter is not None and (ta, tb) not in term_filter:
                continue
            state = state + sa.tensor(sb)
    return state, reg, labels


def kept_norm(eta1, eta2) -> float:
    """Squared norm of the order-2 truncation of the two-site product state."""
    w_vac = (1 - eta1) * (1 - eta2)
    w_c = eta1 * (1 - eta2)
    w_r = eta2 * (1 - eta1)
    w_b = eta1 * eta2
    return w_vac**2 + 2 * w_vac * (w_c + w_r + w_b) + (w_c + w_r) ** 2
