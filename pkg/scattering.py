#!/usr/bin/env python3
"""
decoscatter - Sector Scattering Amplitudes
Closed-form reflection (A) and transmission (B) amplitudes of the relative
coordinate off the delta potential mu * m_s * delta(y), left incidence only:

    B = 2ik / (2ik + g),   A = -g / (2ik + g),   g = 2 m mu m_s

With d = g^2 + 4k^2 the same numbers are evaluated as

    B = (4k^2 + 2ikg) / d,   A = (-g^2 + 2ikg) / d

so flipping the sign of g flips the imaginary parts bit-for-bit.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple

import numpy as np

from errors import InvalidMomentumError, UndefinedPhaseError
from spin_bath import ModelParams, SpinSector, mirror_sum, sector_arrays


class ChannelPair(str, Enum):
    """Which amplitudes enter a coherence factor: first at k, second at k2."""

    TT = 'TT'
    RR = 'RR'
    TR = 'TR'
    RT = 'RT'


@dataclass(frozen=True)
class ChannelAmplitudes:
    k: float
    m_s: float
    A: complex
    B: complex
    g: float

    @property
    def reflection_probability(self) -> float:
        return abs(self.A) ** 2

    @property
    def transmission_probability(self) -> float:
        return abs(self.B) ** 2


def _check_momentum(k):
    k_arr = np.asarray(k, dtype=float)
    if not np.all(np.isfinite(k_arr)) or np.any(k_arr <= 0):
        raise InvalidMomentumError(
            f"relative momentum must be positive (left incidence), got k={k}")
    return k_arr


def amplitude_arrays(k, g) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized (A, B) for broadcastable momentum and strength arrays."""
    k = np.asarray(k, dtype=float)
    g = np.asarray(g, dtype=float)
    four_k2 = 4.0 * k * k
    d = g * g + four_k2
    cross = 2.0 * k * g / d
    A = -(g * g) / d + 1j * cross
    B = four_k2 / d + 1j * cross
    return A, B


def sector_amplitude_table(k, sectors: Sequence[SpinSector], params: ModelParams):
    """(A, B) with shape (len(sectors),) + shape(k)."""
    k_arr = _check_momentum(k)
    ms, _ = sector_arrays(sectors)
    g = params.coupling_strength(ms).reshape((-1,) + (1,) * k_arr.ndim)
    return amplitude_arrays(k_arr[np.newaxis, ...], g)


def amplitudes(k: float, sector: SpinSector, params: ModelParams) -> ChannelAmplitudes:
    """Reflection and transmission amplitude of one sector at momentum k."""
    _check_momentum(k)
    g = params.coupling_strength(sector.ms)
    A, B = amplitude_arrays(k, g)
    return ChannelAmplitudes(k=float(k), m_s=sector.ms, A=complex(A), B=complex(B), g=float(g))


def reflected_phase_vs_hard_wall(amp: ChannelAmplitudes) -> float:
    """Phase of the reflected wave relative to a hard wall (A = -1).

    Equals -atan(2k/g); its magnitude stays below pi/2.
    """
    if amp.m_s == 0 or amp.A == 0:
        raise UndefinedPhaseError(f"reflection amplitude vanishes for m_s={amp.m_s}, g={amp.g}")
    return float(np.angle(-amp.A))


def transmitted_phase(amp: ChannelAmplitudes) -> float:
    """arg B = atan(g / 2k)."""
    return float(np.angle(amp.B))


def wigner_delay(k: float, sector: SpinSector, params: ModelParams) -> float:
    """Momentum derivative of the transmitted phase, -2g / (g^2 + 4k^2)."""
    _check_momentum(k)
    g = params.coupling_strength(sector.ms)
    return float(-2.0 * g / (g * g + 4.0 * k * k))


def bath_averaged_probabilities(k: float, sectors: Sequence[SpinSector],
                                params: ModelParams) -> Tuple[float, float]:
    """(P_reflect, P_transmit) averaged over the bath sectors."""
    A, B = sector_amplitude_table(k, sectors, params)
    _, weights = sector_arrays(sectors)
    p_reflect = float(mirror_sum(weights * np.abs(A) ** 2))
    p_transmit = float(mirror_sum(weights * np.abs(B) ** 2))
    return p_reflect, p_transmit


def coherence_factor(k: float, k2: float, sectors: Sequence[SpinSector],
                     params: ModelParams, pair) -> complex:
    """Bath average of X(k) * conj(Y(k2)), X and Y chosen by the pair tag."""
    pair = ChannelPair(pair)
    A1, B1 = sector_amplitude_table(k, sectors, params)
    A2, B2 = sector_amplitude_table(k2, sectors, params)
    first = B1 if pair.value[0] == 'T' else A1
    second = B2 if pair.value[1] == 'T' else A2
    _, weights = sector_arrays(sectors)
    return complex(mirror_sum(weights * first * np.conj(second)))
