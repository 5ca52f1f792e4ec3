"""Shared, cached fixtures for the test modules."""

import functools

from cascade_lab.schmidt import schmidt_from_params
from cascade_lab.spectral import EnsembleParams


@functools.lru_cache(maxsize=None)
def cached_decomposition(tau: float, srfactor: float):
    return schmidt_from_params(EnsembleParams(tau, srfactor))
