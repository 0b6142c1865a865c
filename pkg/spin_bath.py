#!/usr/bin/env python3
"""
decoscatter - Spin Bath Sectors
The hidden bath is N spin-1/2 objects, each prepared in the +1/2 eigenstate of
S^1. The coupling only sees the total S^3, so the 2^N configurations collapse
into N+1 sectors labelled by the up-spin count j, with net spin
m_s = j - N/2 and binomial weight C(N, j) / 2^N.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple

import numpy as np

from errors import InvalidParameterError
from logger import log_debug


@dataclass(frozen=True)
class ModelParams:
    """Particle mass m, coupling mu and spin count N (hbar = 1)."""

    m: float
    mu: float
    N: int

    def __post_init__(self):
        if not np.isfinite(self.m) or self.m <= 0:
            raise InvalidParameterError(f"mass must be positive, got m={self.m}")
        if not np.isfinite(self.mu):
            raise InvalidParameterError(f"coupling must be finite, got mu={self.mu}")
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise InvalidParameterError(f"spin count must be an integer >= 1, got N={self.N}")
        object.__setattr__(self, 'N', int(self.N))

    def with_mu(self, mu: float) -> 'ModelParams':
        return ModelParams(m=self.m, mu=mu, N=self.N)

    def coupling_strength(self, ms: float) -> float:
        """Effective delta strength g = 2 m mu m_s (inverse length)."""
        return 2.0 * self.m * self.mu * ms


@dataclass(frozen=True)
class SpinSector:
    """One eigenvalue class of the bath's total S^3."""

    j: int
    two_ms: int          # 2 * m_s, exact
    weight: float
    log_weight: float
    multiplicity: int    # C(N, j), exact

    @property
    def m_s(self) -> Fraction:
        return Fraction(self.two_ms, 2)

    @property
    def ms(self) -> float:
        return self.two_ms / 2.0


def _log_binomial_weights(N: int) -> np.ndarray:
    # log of w(j+1) = w(j) (N - j) / (j + 1), accumulated from w(0) = 2^-N
    j = np.arange(N, dtype=float)
    steps = np.log(N - j) - np.log(j + 1.0)
    log_w = np.concatenate(([0.0], np.cumsum(steps))) - N * np.log(2.0)
    # exact mirror symmetry before normalising
    log_w = 0.5 * (log_w + log_w[::-1])
    peak = log_w.max()
    total = np.exp(log_w - peak).sum()
    return log_w - (peak + np.log(total))


def enumerate_sectors(params: ModelParams) -> List[SpinSector]:
    """N+1 sectors ordered by m_s ascending, weights summing to one."""
    N = params.N
    if N < 1:
        raise InvalidParameterError(f"spin count must be >= 1, got N={N}")

    log_w = _log_binomial_weights(N)
    weights = np.exp(log_w)

    sectors = []
    multiplicity = 1
    for j in range(N + 1):
        sectors.append(SpinSector(
            j=j,
            two_ms=2 * j - N,
            weight=float(weights[j]),
            log_weight=float(log_w[j]),
            multiplicity=multiplicity,
        ))
        multiplicity = multiplicity * (N - j) // (j + 1)

    log_debug(f"Enumerated {N + 1} spin sectors for N={N}")
    return sectors


def sector_arrays(sectors: Sequence[SpinSector]) -> Tuple[np.ndarray, np.ndarray]:
    """(m_s values, weights) as float arrays in sector order."""
    ms = np.array([s.ms for s in sectors], dtype=float)
    weights = np.array([s.weight for s in sectors], dtype=float)
    return ms, weights


def mirror_sum(values):
    """Sum over sectors along axis 0, pairing each sector with its m_s mirror.

    Sectors must be in enumerate_sectors order. Terms that are odd under
    m_s -> -m_s cancel pairwise before any other addition, so their sum is
    exactly zero.
    """
    values = np.asarray(values)
    count = values.shape[0]
    half = count // 2
    paired = values[:half] + values[::-1][:half]
    total = paired.sum(axis=0)
    if count % 2:
        total = total + values[half]
    return total


def sector_moment(sectors: Sequence[SpinSector], p: int) -> float:
    """Bath average of m_s**p."""
    if int(p) != p or p < 0:
        raise InvalidParameterError(f"moment order must be a non-negative integer, got p={p}")
    ms, weights = sector_arrays(sectors)
    return float(mirror_sum(weights * ms ** int(p)))


def bath_spin_expectation(sectors: Sequence[SpinSector]) -> float:
    """<sum_i S^3_i> in the spin-x bath state; conserved by the dynamics."""
    return sector_moment(sectors, 1)
