#!/usr/bin/env python3
"""
decoscatter - Gaussian Packets and Momentum Grids
Two equal-mass particles start as Gaussians of width sigma0 moving toward each
other with momenta +k0 and -k0. In Y = (x1 + x2)/2, y = x1 - x2 the product
splits into a centre-of-mass Gaussian and a relative packet with carrier
exp(i k0 y); only the relative packet is scattered.

Conventions: hbar = 1, relative dispersion omega(k) = k^2 / (2m),
momentum amplitudes use psi(k) = (2 pi)^-1/2 * integral psi(y) exp(-i k y) dy.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from errors import CoverageError, InvalidParameterError
from model_config import sim_config


@dataclass(frozen=True)
class PacketSpec:
    """Relative-packet parameters. y0 defaults to -15 sigma0."""

    k0: float
    sigma0: float
    y0: Optional[float] = None

    def __post_init__(self):
        if not np.isfinite(self.k0) or self.k0 <= 0:
            raise InvalidParameterError(f"k0 must be positive, got {self.k0}")
        if not np.isfinite(self.sigma0) or self.sigma0 <= 0:
            raise InvalidParameterError(f"sigma0 must be positive, got {self.sigma0}")
        if self.y0 is None:
            object.__setattr__(self, 'y0', -15.0 * self.sigma0)
        if not np.isfinite(self.y0) or self.y0 >= 0:
            raise InvalidParameterError(f"incoming packet needs y0 < 0, got {self.y0}")

    @property
    def narrowness(self) -> float:
        return self.sigma0 * self.k0

    def is_narrow(self, threshold: Optional[float] = None) -> bool:
        if threshold is None:
            threshold = sim_config.get_default('packet', 'narrowness_threshold')
        return self.narrowness >= threshold

    @property
    def support_kmax(self) -> float:
        """k0 + 8 / sigma0: upper edge of the momentum support kept on grids."""
        return self.k0 + sim_config.get_default('grid', 'kmax_sigmas') / self.sigma0


@dataclass(frozen=True)
class MomentumGrid:
    """Uniform signed grid (j - n/2) * dk, j = 0..n-1, spanning [-k_max, k_max)."""

    n: int
    dk: float
    values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise InvalidParameterError(f"grid size must be a power of two, got n={self.n}")
        if not np.isfinite(self.dk) or self.dk <= 0:
            raise InvalidParameterError(f"grid spacing must be positive, got dk={self.dk}")
        values = (np.arange(self.n) - self.n // 2) * self.dk
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_kmax(cls, n: int, k_max: float) -> 'MomentumGrid':
        return cls(n=n, dk=2.0 * k_max / n)

    @classmethod
    def for_packet(cls, spec: PacketSpec, n: Optional[int] = None) -> 'MomentumGrid':
        """Default desk-scale grid: n = 4096, k_max = k0 + 8 / sigma0."""
        if n is None:
            n = sim_config.get_default('grid', 'n')
        return cls.from_kmax(n, spec.support_kmax)

    @property
    def k_max(self) -> float:
        return self.n * self.dk / 2.0

    @property
    def positive(self) -> np.ndarray:
        return self.values > 0

    def mirror_index(self, j):
        """Index of -k for the bin at index j (j >= 1)."""
        j = np.asarray(j)
        if np.any(j < 1) or np.any(j >= self.n):
            raise InvalidParameterError("bin 0 (-k_max) has no mirror on the grid")
        return self.n - j

    def nearest_index(self, k: float) -> int:
        return int(np.clip(np.rint(k / self.dk) + self.n // 2, 0, self.n - 1))


def require_coverage(spec: PacketSpec, grid: MomentumGrid):
    """Raise CoverageError unless the grid spans +-(k0 + 8 / sigma0)."""
    slack = sim_config.get_tolerance('coverage_slack') * spec.support_kmax
    if grid.k_max + slack < spec.support_kmax:
        raise CoverageError(
            f"grid k_max={grid.k_max:.6g} does not cover k0 + 8/sigma0 = {spec.support_kmax:.6g}")


def relative_amplitude_in(k, spec: PacketSpec):
    """Incoming relative packet in momentum space.

    (4 sigma0^2 / pi)^(1/4) exp(-2 sigma0^2 (k - k0)^2) exp(-i k y0); the
    modulus drops to exp(-1/2) of its peak at k0 +- 1/(2 sigma0).
    """
    k = np.asarray(k, dtype=float)
    s2 = spec.sigma0 ** 2
    norm = (4.0 * s2 / np.pi) ** 0.25
    return norm * np.exp(-2.0 * s2 * (k - spec.k0) ** 2) * np.exp(-1j * k * spec.y0)


def relative_position_amplitude(y, spec: PacketSpec):
    """Relative packet in position space, centred at y0 with carrier exp(i k0 (y - y0))."""
    y = np.asarray(y, dtype=float)
    s2 = spec.sigma0 ** 2
    u = y - spec.y0
    return (4.0 * np.pi * s2) ** -0.25 * np.exp(-u * u / (8.0 * s2)) * np.exp(1j * spec.k0 * u)


def com_amplitude(Y, spec: PacketSpec):
    """Centre-of-mass Gaussian; spectator in every reduced quantity."""
    Y = np.asarray(Y, dtype=float)
    s2 = spec.sigma0 ** 2
    return (np.pi * s2) ** -0.25 * np.exp(-Y * Y / (2.0 * s2))


def single_particle_packet(x, spec: PacketSpec, direction: int):
    """lambda_1 (direction=+1, centred at y0/2) or lambda_2 (direction=-1, centred at -y0/2)."""
    if direction not in (1, -1):
        raise InvalidParameterError(f"direction must be +1 or -1, got {direction}")
    x = np.asarray(x, dtype=float)
    centre = direction * spec.y0 / 2.0
    u = x - centre
    s = spec.sigma0
    return (s * np.sqrt(2.0 * np.pi)) ** -0.5 * np.exp(-u * u / (4.0 * s * s)) \
        * np.exp(1j * direction * spec.k0 * u)


def com_factorization_check(x1, x2, spec: PacketSpec) -> Tuple[complex, complex]:
    """(lambda_1(x1) lambda_2(x2), COM(Y) * relative(y)) at the same point."""
    product = single_particle_packet(x1, spec, 1) * single_particle_packet(x2, spec, -1)
    Y = 0.5 * (np.asarray(x1, dtype=float) + np.asarray(x2, dtype=float))
    y = np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)
    factored = com_amplitude(Y, spec) * relative_position_amplitude(y, spec)
    return product, factored


def free_evolve(amp, k, m: float, t: float):
    """Multiply a momentum amplitude by exp(-i k^2 t / (2m))."""
    k = np.asarray(k, dtype=float)
    return np.asarray(amp) * np.exp(-1j * k * k * t / (2.0 * m))


def incoming_on_grid(spec: PacketSpec, grid: MomentumGrid) -> np.ndarray:
    """Incoming packet on the positive bins, renormalised so sum |psi|^2 dk = 1."""
    require_coverage(spec, grid)
    psi = np.where(grid.positive, relative_amplitude_in(grid.values, spec), 0.0)
    norm = np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dk)
    return psi / norm


def amplitude_width(k, amp) -> float:
    """Standard deviation of the |amp| profile; 1/(2 sigma0) for the incoming packet."""
    weight = np.abs(np.asarray(amp))
    k = np.asarray(k, dtype=float)
    mean = np.sum(weight * k) / np.sum(weight)
    return float(np.sqrt(np.sum(weight * (k - mean) ** 2) / np.sum(weight)))


def momentum_spread(k, amp) -> float:
    """Standard deviation of |amp|^2; 1/(2 sqrt(2) sigma0) for the incoming packet."""
    return amplitude_width(k, np.abs(np.asarray(amp)) ** 2)
