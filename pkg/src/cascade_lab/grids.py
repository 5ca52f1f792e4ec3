"""Quadrature grids on the detuning axis (units of the natural decay rate)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import InvalidParameterError

DEFAULT_EXTENT = 1200.0
DEFAULT_ORDER = 6
DEFAULT_TAIL_RATIO = 1.3


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Nodes and positive quadrature weights, symmetric about zero."""

    nodes: np.ndarray
    weights: np.ndarray
    scheme: str = "custom"

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        weights = np.ascontiguousarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise InvalidParameterError("nodes and weights must be 1-D arrays of equal length")
        if nodes.size < 2:
            raise InvalidParameterError("a grid needs at least two nodes")
        if not np.all(np.diff(nodes) > 0):
            raise InvalidParameterError("grid nodes must be strictly increasing")
        if not np.all(weights > 0):
            raise InvalidParameterError("quadrature weights must be strictly positive")
        scale = max(abs(nodes[0]), abs(nodes[-1]))
        if not np.allclose(nodes, -nodes[::-1], rtol=0, atol=1e-9 * scale):
            raise InvalidParameterError("grid must be symmetric about zero")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.nodes.size

    @property
    def extent(self) -> float:
        return float(self.nodes[-1])

    def integrate(self, values, axis=-1):
        return np.tensordot(values, self.weights, axes=([axis], [0]))

    def inner(self, u, v) -> complex:
        """Hermitian inner product sum_j w_j conj(u_j) v_j."""
        return complex(np.sum(self.weights * np.conj(u) * v))

    def norm(self, u) -> float:
        return math.sqrt(float(np.sum(self.weights * np.abs(u) ** 2)))


def panel_grid(edges, order: int = DEFAULT_ORDER, scheme: str = "gauss-legendre") -> FrequencyGrid:
    """Composite Gauss-Legendre rule on consecutive panels ``edges[k]..edges[k+1]``."""
    edges = np.asarray(edges, dtype=float)
    if np.any(np.diff(edges) <= 0):
        raise InvalidParameterError("panel edges must be strictly increasing")
    x0, w0 = leggauss(order)
    a = edges[:-1, None]
    b = edges[1:, None]
    nodes = (0.5 * (b - a) * x0 + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w0).ravel()
    return FrequencyGrid(nodes, weights, scheme)


def uniform_grid(extent: float, n: int) -> FrequencyGrid:
    """Trapezoid rule on ``n`` equispaced nodes over ``[-extent, extent]``."""
    if extent <= 0 or n < 3:
        raise InvalidParameterError("need extent > 0 and n >= 3")
    nodes = np.linspace(-extent, extent, n)
    weights = np.full(n, nodes[1] - nodes[0])
    weights[[0, -1]] *= 0.5
    return FrequencyGrid(nodes, weights, "trapezoid")


def _half_edges(extent, core, core_panels, core_width, tail_ratio, tail_cap):
    if core >= extent:
        n = core_panels or max(1, math.ceil(extent / core_width))
        return list(np.linspace(0.0, extent, n + 1))
    n = core_panels or max(1, math.ceil(core / core_width))
    edges = list(np.linspace(0.0, core, n + 1))
    width = core / n
    while edges[-1] < extent * (1 - 1e-12):
        width = min(width * tail_ratio, max(tail_cap, core / n))
        edges.append(min(edges[-1] + width, extent))
    # Merge a sliver panel into its neighbour.
    if len(edges) > 3 and edges[-1] - edges[-2] < 0.3 * (edges[-2] - edges[-3]):
        edges.pop(-2)
    return edges


def graded_grid(
    tau: float,
    rate: float,
    extent: float = DEFAULT_EXTENT,
    *,
    core_panels: int | None = None,
    order: int = DEFAULT_ORDER,
    tail_ratio: float = DEFAULT_TAIL_RATIO,
) -> FrequencyGrid:
    """Graded Gauss-Legendre grid adapted to a pump width and idler decay rate.

    The core ``|w| <= 20 max(1/tau, rate)`` is covered by equal panels of width
    about ``2 min(rate/2, 2/tau)`` (the narrower of the Lorentzian half width and
    the Gaussian amplitude scale).  Outside the core the panel width grows
    geometrically by ``tail_ratio`` up to ``8/tau`` so the anti-diagonal
    Gaussian ridge stays resolved out to ``extent``.
    """
    if tau <= 0 or rate <= 0 or extent <= 0:
        raise InvalidParameterError("tau, rate and extent must be positive")
    if tail_ratio < 1:
        raise InvalidParameterError("tail_ratio must be >= 1")
    core = min(20.0 * max(1.0 / tau, rate), extent)
    core_width = 2.0 * min(rate / 2.0, 2.0 / tau)
    half = np.asarray(_half_edges(extent, core, core_panels, core_width, tail_ratio, 8.0 / tau))
    edges = np.concatenate([-half[::-1], half[1:]])
    return panel_grid(edges, order, scheme=f"graded-gl{order}")

