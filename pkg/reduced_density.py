#!/usr/bin/env python3
"""
decoscatter - Reduced Density Matrix of the Relative Motion
After the collision each bath sector m_s carries the relative packet
B(k, m_s) f(k) at +k and A(k, m_s) f(k) at -k. Tracing out the bath gives

    rho(k, k') = sum_m w_m psi_m(k) conj(psi_m(k'))

sampled on a MomentumGrid with the dk-weighted convention
sum_k rho(k, k) dk = 1; eigenvalues are reported scaled by dk.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigvalsh
from scipy.optimize import minimize_scalar

from errors import InvalidParameterError, InvalidStateError, PreconditionError
from logger import log_debug, log_info
from model_config import sim_config
from scattering import bath_averaged_probabilities, sector_amplitude_table
from spin_bath import ModelParams, SpinSector, mirror_sum, sector_arrays
from wavepacket import MomentumGrid, PacketSpec, free_evolve, incoming_on_grid

LN2 = float(np.log(2.0))


class DensityMatrix:
    """Density matrix on a momentum grid, optionally held as a low-rank factor.

    With a factor F (n x r, columns sqrt(w_m) psi_m) the elements are F F^dagger
    and the spectrum comes from the r x r Gram matrix F^dagger F dk.
    """

    trace_convention = 'dk-weighted'

    def __init__(self, grid: MomentumGrid, elements: Optional[np.ndarray] = None,
                 factor: Optional[np.ndarray] = None):
        if elements is None and factor is None:
            raise InvalidStateError("density matrix needs elements or a factor")
        self.grid = grid
        self.factor = None if factor is None else np.asarray(factor, dtype=complex)
        self._elements = None if elements is None else np.asarray(elements, dtype=complex)
        shape = (grid.n, grid.n)
        if self._elements is not None and self._elements.shape != shape:
            raise InvalidStateError(f"elements shape {self._elements.shape} != {shape}")
        if self.factor is not None and self.factor.shape[0] != grid.n:
            raise InvalidStateError(f"factor rows {self.factor.shape[0]} != grid size {grid.n}")

    @classmethod
    def from_elements(cls, elements, grid: MomentumGrid) -> 'DensityMatrix':
        return cls(grid, elements=elements)

    @property
    def elements(self) -> np.ndarray:
        if self._elements is None:
            self._elements = self.factor @ self.factor.conj().T
        return self._elements

    def diagonal(self) -> np.ndarray:
        if self.factor is not None:
            return np.sum(np.abs(self.factor) ** 2, axis=1)
        return np.real(np.diag(self._elements)).copy()

    def element(self, i: int, j: int) -> complex:
        if self.factor is not None:
            return complex(np.dot(self.factor[i], self.factor[j].conj()))
        return complex(self._elements[i, j])

    def trace(self) -> float:
        return float(np.sum(self.diagonal()) * self.grid.dk)

    def hermiticity_error(self) -> float:
        if self.factor is not None:
            return 0.0
        return float(np.max(np.abs(self._elements - self._elements.conj().T)))

    def spectrum(self) -> np.ndarray:
        """dk-weighted eigenvalues, descending."""
        if self.factor is not None:
            gram = (self.factor.conj().T @ self.factor) * self.grid.dk
            values = eigvalsh(0.5 * (gram + gram.conj().T))
        else:
            values = eigvalsh(self._elements) * self.grid.dk
        return values[::-1]

    def purity(self) -> float:
        return float(np.sum(self.spectrum() ** 2))

    def kinetic_energy(self, m: float) -> float:
        """dk-weighted <k^2> / (2m)."""
        k = self.grid.values
        return float(np.sum(self.diagonal() * k * k) * self.grid.dk / (2.0 * m))

    def validate(self):
        """Raise InvalidStateError unless Hermitian, positive and unit-trace."""
        scale = max(1.0, float(np.max(np.abs(self.diagonal()))))
        if self.hermiticity_error() > sim_config.get_tolerance('hermiticity') * scale:
            raise InvalidStateError(f"not Hermitian: deviation {self.hermiticity_error():.3e}")
        lowest = float(np.min(self.spectrum()))
        if lowest < -sim_config.get_tolerance('positivity'):
            raise InvalidStateError(f"negative eigenvalue {lowest:.3e}")
        trace = self.trace()
        if abs(trace - 1.0) > sim_config.get_tolerance('trace'):
            raise InvalidStateError(f"dk-weighted trace {trace:.12f} != 1")
        return self


@dataclass(frozen=True)
class NarrowPacketDensity:
    """2x2 reduced density on {+k0, -k0} in the narrow-packet limit."""

    p_T: float
    p_R: float
    offdiag: complex

    @property
    def entropy(self) -> float:
        return binary_entropy(self.p_R)


def binary_entropy(p: float) -> float:
    """-p ln p - (1-p) ln(1-p) with 0 ln 0 = 0."""
    return entropy_from_eigenvalues(np.array([p, 1.0 - p]))


def entropy_from_eigenvalues(values) -> float:
    """-sum l ln l after clipping eigenvalues below the clip tolerance to zero."""
    values = np.asarray(values, dtype=float)
    values = values[values > sim_config.get_tolerance('eigen_clip')]
    return float(-np.sum(values * np.log(values)))


def _sector_states(sectors: Sequence[SpinSector], spec: PacketSpec, grid: MomentumGrid,
                   params: ModelParams, t: float = 0.0) -> np.ndarray:
    """Rows are the outgoing relative states of each sector on the grid."""
    f = incoming_on_grid(spec, grid)
    positive = np.nonzero(grid.positive)[0]
    mirrored = grid.mirror_index(positive)
    A, B = sector_amplitude_table(grid.values[positive], sectors, params)
    states = np.zeros((len(sectors), grid.n), dtype=complex)
    states[:, positive] = B * f[positive]
    states[:, mirrored] = A * f[positive]
    if t:
        states = free_evolve(states, grid.values, params.m, t)
    return states


def outgoing_sector_state(sector: SpinSector, spec: PacketSpec, grid: MomentumGrid,
                          params: ModelParams, t: float = 0.0) -> np.ndarray:
    """Post-collision relative state of one sector (transmitted at +k, reflected at -k)."""
    return _sector_states([sector], spec, grid, params, t)[0]


def assemble(sectors: Sequence[SpinSector], spec: PacketSpec, grid: MomentumGrid,
             params: ModelParams, t: float = 0.0) -> DensityMatrix:
    """Bath-traced density matrix of the relative coordinate after scattering."""
    states = _sector_states(sectors, spec, grid, params, t)
    _, weights = sector_arrays(sectors)
    factor = (np.sqrt(weights)[:, np.newaxis] * states).T
    rho = DensityMatrix(grid, factor=factor)
    log_debug(f"Assembled rank-{len(sectors)} density matrix on {grid.n} bins")
    return rho


def incoming_density(spec: PacketSpec, grid: MomentumGrid) -> DensityMatrix:
    """Pure density matrix of the incoming relative packet."""
    return DensityMatrix(grid, factor=incoming_on_grid(spec, grid)[:, np.newaxis])


def _equal_momentum_cross(k: float, sectors: Sequence[SpinSector], params: ModelParams) -> complex:
    # B(k) conj(A(k)) = -2ikg / (g^2 + 4k^2): odd in g, so the mirror sum is exactly zero
    ms, weights = sector_arrays(sectors)
    g = params.coupling_strength(ms)
    return complex(mirror_sum(weights * (-2j * k * g / (g * g + 4.0 * k * k))))


def narrow_packet_density(spec: PacketSpec, sectors: Sequence[SpinSector],
                          params: ModelParams) -> NarrowPacketDensity:
    """Channel populations and coherence at k = k' = k0."""
    if not spec.is_narrow():
        threshold = sim_config.get_default('packet', 'narrowness_threshold')
        raise PreconditionError(
            f"sigma0*k0 = {spec.narrowness:.3g} is below the narrowness threshold {threshold}; "
            f"use assemble() for broad packets")
    p_reflect, p_transmit = bath_averaged_probabilities(spec.k0, sectors, params)
    return NarrowPacketDensity(p_T=p_transmit, p_R=p_reflect,
                               offdiag=_equal_momentum_cross(spec.k0, sectors, params))


def narrow_entropy_formula(k0: float, sectors: Sequence[SpinSector], params: ModelParams) -> float:
    """Binary entropy of the bath-averaged reflection probability at k0."""
    p_reflect, _ = bath_averaged_probabilities(k0, sectors, params)
    return binary_entropy(p_reflect)


def maximize_narrow_entropy(sectors: Sequence[SpinSector], params: ModelParams,
                            k_lo: float, k_hi: float) -> Tuple[float, float]:
    """(k0, entropy) maximising the narrow-packet entropy on [k_lo, k_hi]."""
    if not 0 < k_lo <= k_hi:
        raise InvalidParameterError(f"need 0 < k_lo <= k_hi, got [{k_lo}, {k_hi}]")
    if k_lo == k_hi:
        return float(k_lo), narrow_entropy_formula(k_lo, sectors, params)
    result = minimize_scalar(
        lambda log_k: -narrow_entropy_formula(float(np.exp(log_k)), sectors, params),
        bounds=(np.log(k_lo), np.log(k_hi)), method='bounded',
        options={'xatol': 1e-10})
    return float(np.exp(result.x)), float(-result.fun)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """-Tr rho ln rho in nats from the dk-weighted spectrum."""
    scale = max(1.0, float(np.max(np.abs(rho.diagonal()))))
    if rho.hermiticity_error() > sim_config.get_tolerance('hermiticity') * scale:
        raise InvalidStateError(
            f"entropy of a non-Hermitian matrix requested (deviation {rho.hermiticity_error():.3e})")
    return entropy_from_eigenvalues(rho.spectrum())


def coherence_suppression_row(rho: DensityMatrix, index: int) -> np.ndarray:
    """Suppression factor between bin `index` and every bin; NaN where undefined."""
    diag = rho.diagonal()
    floor = sim_config.get_tolerance('diagonal_floor')
    result = np.full(rho.grid.n, np.nan)
    if diag[index] < floor:
        return result
    if rho.factor is not None:
        row = rho.factor @ rho.factor[index].conj()
    else:
        row = rho.elements[:, index]
    defined = diag >= floor
    result[defined] = np.minimum(np.abs(row[defined]) / np.sqrt(diag[defined] * diag[index]), 1.0)
    return result


def coherence_suppression_map(spec: PacketSpec, sectors: Sequence[SpinSector],
                              grid: MomentumGrid, params: ModelParams) -> np.ndarray:
    """|rho(k,k')| / sqrt(rho(k,k) rho(k',k')); NaN where a diagonal is negligible."""
    rho = assemble(sectors, spec, grid, params)
    diag = rho.diagonal()
    defined = diag >= sim_config.get_tolerance('diagonal_floor')
    result = np.full((grid.n, grid.n), np.nan)
    idx = np.nonzero(defined)[0]
    block = rho.factor[idx] @ rho.factor[idx].conj().T
    norm = np.sqrt(np.outer(diag[idx], diag[idx]))
    result[np.ix_(idx, idx)] = np.minimum(np.abs(block) / norm, 1.0)
    log_info(f"Coherence suppression map: {idx.size} of {grid.n} bins defined")
    return result
