#!/usr/bin/env python3
"""
decoscatter - Time-Dependent Lattice Oracle
Brute-force check of the closed-form results: each bath sector's relative
packet is evolved under

    i d/dt psi = -(1/2m) d^2/dy^2 psi + V_m(y) psi,   V_m -> mu m_s delta(y)

on a uniform Dirichlet lattice with Crank-Nicolson (Cayley) steps, which are
exactly norm- and energy-preserving for the time-independent lattice
Hamiltonian. Nothing here reads the analytic amplitudes.

The lattice solves the equation as written above; its sector m_s reproduces
the closed-form amplitudes of sector -m_s, so per-sector moduli and every
bath-averaged quantity agree while per-sector phases are mirrored.
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigvalsh
from scipy.sparse.linalg import splu

from errors import (BoundaryLeakError, InvalidParameterError, NonConvergenceError,
                    PreconditionError, StalenessError)
from logger import log_debug, log_info, log_warning
from model_config import sim_config
from reduced_density import DensityMatrix, entropy_from_eigenvalues
from spin_bath import ModelParams, SpinSector, enumerate_sectors, mirror_sum, sector_arrays
from wavepacket import MomentumGrid, PacketSpec, relative_position_amplitude
from worker_pool import parallel_map

SINGLE_BIN = 'single-bin'
NARROW_GAUSSIAN = 'narrow-gaussian'
DELTA_MODES = (SINGLE_BIN, NARROW_GAUSSIAN)


@dataclass(frozen=True)
class GridOracleConfig:
    spec: PacketSpec
    params: ModelParams
    y_extent: float = field(default_factory=lambda: sim_config.get_default('oracle', 'y_extent'))
    n_y: int = field(default_factory=lambda: sim_config.get_default('oracle', 'n_y'))
    dt: float = field(default_factory=lambda: sim_config.get_default('oracle', 'dt'))
    t_final: Optional[float] = None
    delta_mode: str = SINGLE_BIN
    gaussian_width: Optional[float] = None
    snapshot_stride: int = field(
        default_factory=lambda: sim_config.get_default('oracle', 'snapshot_stride'))

    def __post_init__(self):
        if self.n_y < 8 or self.n_y & (self.n_y - 1):
            raise InvalidParameterError(f"n_y must be a power of two, got {self.n_y}")
        if self.y_extent <= 0 or self.dt <= 0:
            raise InvalidParameterError("y_extent and dt must be positive")
        if self.delta_mode not in DELTA_MODES:
            raise InvalidParameterError(f"delta_mode must be one of {DELTA_MODES}")
        if self.t_final is None:
            # outgoing packets end as far from the origin as the incoming one started
            object.__setattr__(self, 't_final', 2.0 * abs(self.spec.y0) * self.params.m / self.spec.k0)
        if self.t_final <= 0:
            raise InvalidParameterError(f"t_final must be positive, got {self.t_final}")
        if self.delta_mode == NARROW_GAUSSIAN:
            limit = sim_config.get_default('oracle', 'gaussian_width_k0') / self.spec.k0
            if self.gaussian_width is None:
                object.__setattr__(self, 'gaussian_width', limit)
            if not 0 < self.gaussian_width <= limit * (1 + 1e-12):
                raise InvalidParameterError(
                    f"narrow-gaussian width must satisfy 0 < w*k0 <= 0.05, got w={self.gaussian_width}")
        if self.snapshot_stride < 1:
            raise InvalidParameterError("snapshot_stride must be >= 1")

    @property
    def dy(self) -> float:
        return 2.0 * self.y_extent / self.n_y

    @property
    def positions(self) -> np.ndarray:
        return -self.y_extent + self.dy * np.arange(self.n_y)

    @property
    def origin_index(self) -> int:
        return self.n_y // 2

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def with_resolution(self, n_y: int) -> 'GridOracleConfig':
        return replace(self, n_y=n_y)


class LatticeSystem:
    """Lattice Hamiltonian of one sector and its Crank-Nicolson propagator."""

    def __init__(self, sector: SpinSector, cfg: GridOracleConfig):
        self.sector = sector
        self.cfg = cfg
        self.y = cfg.positions
        self.dy = cfg.dy
        hop = 1.0 / (2.0 * cfg.params.m * self.dy ** 2)
        n = cfg.n_y
        self.kinetic = sp.diags(
            [np.full(n - 1, -hop), np.full(n, 2.0 * hop), np.full(n - 1, -hop)],
            offsets=[-1, 0, 1], format='csc', dtype=complex)
        self.potential = self._potential()
        self.hamiltonian = (self.kinetic + sp.diags(self.potential, format='csc')).tocsc()
        identity = sp.identity(n, dtype=complex, format='csc')
        half = 0.5j * cfg.dt * self.hamiltonian
        self._lu = splu((identity + half).tocsc())
        self._explicit = (identity - half).tocsc()

    def _potential(self) -> np.ndarray:
        cfg = self.cfg
        strength = cfg.params.mu * self.sector.ms
        potential = np.zeros(cfg.n_y)
        if strength == 0:
            return potential
        if cfg.delta_mode == SINGLE_BIN:
            potential[cfg.origin_index] = strength / self.dy
        else:
            w = cfg.gaussian_width
            shape = np.exp(-self.y ** 2 / (2.0 * w * w))
            potential = strength * shape / (np.sum(shape) * self.dy)
        return potential

    def step(self, psi: np.ndarray) -> np.ndarray:
        return self._lu.solve(self._explicit @ psi)

    def norm(self, psi: np.ndarray) -> float:
        return float(np.sum(np.abs(psi) ** 2) * self.dy)

    def energy(self, psi: np.ndarray) -> float:
        return float(np.real(np.vdot(psi, self.hamiltonian @ psi)) * self.dy)

    def kinetic_energy(self, psi: np.ndarray) -> float:
        return float(np.real(np.vdot(psi, self.kinetic @ psi)) * self.dy)

    def edge_probability(self, psi: np.ndarray) -> float:
        width = max(1, int(self.cfg.n_y * sim_config.get_default('oracle', 'edge_fraction')))
        density = np.abs(psi) ** 2
        return float((np.sum(density[:width]) + np.sum(density[-width:])) * self.dy)


@dataclass
class SectorTrajectory:
    sector: SpinSector
    times: np.ndarray
    states: np.ndarray          # (snapshots, n_y)
    norms: np.ndarray
    energies: np.ndarray
    system: LatticeSystem = field(repr=False)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def energy_drift(self) -> float:
        """Largest relative deviation of <H> from its initial value."""
        return float(np.max(np.abs(self.energies - self.energies[0])) / abs(self.energies[0]))

    @property
    def kinetic_energy_change(self) -> float:
        """Relative change of <K> between the first and last snapshot."""
        initial = self.system.kinetic_energy(self.states[0])
        return (self.system.kinetic_energy(self.final_state) - initial) / initial


def _initial_state(cfg: GridOracleConfig) -> np.ndarray:
    psi = relative_position_amplitude(cfg.positions, cfg.spec)
    return psi / np.sqrt(np.sum(np.abs(psi) ** 2) * cfg.dy)


def _near_origin_probability(psi: np.ndarray, cfg: GridOracleConfig) -> float:
    clearance = sim_config.get_default('oracle', 'clearance_sigmas') * cfg.spec.sigma0
    inside = np.abs(cfg.positions) < clearance
    return float(np.sum(np.abs(psi[inside]) ** 2) * cfg.dy)


def evolve_sector(sector: SpinSector, cfg: GridOracleConfig) -> SectorTrajectory:
    """Evolve one sector's relative packet through the collision."""
    spec = cfg.spec
    approach = sim_config.get_default('packet', 'approach_widths') * 2.0 * spec.sigma0
    if spec.y0 >= -approach:
        raise PreconditionError(f"packet starts at y0={spec.y0}; needs y0 < {-approach}")

    system = LatticeSystem(sector, cfg)
    norm_tol = sim_config.get_tolerance('norm_drift')
    leak_tol = sim_config.get_tolerance('boundary_density')

    psi = _initial_state(cfg)
    times, states, norms, energies = [], [], [], []

    def record(step_index, state):
        norm = system.norm(state)
        if abs(1.0 - norm) > norm_tol:
            raise NonConvergenceError(
                f"sector m_s={sector.ms}: norm drifted to {norm:.12f} at step {step_index}")
        leak = system.edge_probability(state)
        if leak > leak_tol:
            raise BoundaryLeakError(
                f"sector m_s={sector.ms}: edge probability {leak:.3e} at t={step_index * cfg.dt:.4g}; "
                f"enlarge y_extent or shorten t_final")
        times.append(step_index * cfg.dt)
        states.append(state.copy())
        norms.append(norm)
        energies.append(system.energy(state))

    record(0, psi)
    n_steps = cfg.n_steps
    for step_index in range(1, n_steps + 1):
        psi = system.step(psi)
        if step_index % cfg.snapshot_stride == 0 or step_index == n_steps:
            record(step_index, psi)

    remaining = _near_origin_probability(psi, cfg)
    if remaining >= sim_config.get_tolerance('scattering_clearance'):
        log_warning(f"sector m_s={sector.ms}: {remaining:.2e} probability still near the origin")
    log_debug(f"Evolved sector m_s={sector.ms} over {n_steps} steps")

    return SectorTrajectory(sector=sector, times=np.array(times), states=np.array(states),
                            norms=np.array(norms), energies=np.array(energies), system=system)


def extract_channel_probabilities(final_state: np.ndarray, cfg: GridOracleConfig) -> Tuple[float, float]:
    """(P_reflect, P_transmit) from probability left and right of the origin."""
    remaining = _near_origin_probability(final_state, cfg)
    if remaining >= sim_config.get_tolerance('scattering_clearance'):
        raise StalenessError(
            f"{remaining:.3e} probability within the clearance zone; scattering not complete")
    density = np.abs(final_state) ** 2 * cfg.dy
    origin = cfg.origin_index
    p_reflect = float(np.sum(density[:origin]) + 0.5 * density[origin])
    p_transmit = float(np.sum(density[origin + 1:]) + 0.5 * density[origin])
    return p_reflect, p_transmit


def free_phase(q: np.ndarray, cfg: GridOracleConfig, n_steps: int) -> np.ndarray:
    """Free lattice Crank-Nicolson propagator after n_steps, diagonal in q."""
    eps = (1.0 - np.cos(q * cfg.dy)) / (cfg.params.m * cfg.dy ** 2)
    return np.exp(-2j * n_steps * np.arctan(0.5 * eps * cfg.dt))


def momentum_window(cfg: GridOracleConfig) -> Tuple[MomentumGrid, slice]:
    """Smallest power-of-two window of FFT bins covering k0 + 8 / sigma0."""
    dq = np.pi / cfg.y_extent
    n_w = 2
    while n_w * dq / 2.0 < cfg.spec.support_kmax and n_w < cfg.n_y:
        n_w *= 2
    centre = cfg.n_y // 2
    return MomentumGrid(n=n_w, dk=dq), slice(centre - n_w // 2, centre + n_w // 2)


def to_momentum(state: np.ndarray, cfg: GridOracleConfig, n_steps: int) -> Tuple[MomentumGrid, np.ndarray]:
    """Interaction-picture momentum amplitude on the cropped FFT window."""
    n = cfg.n_y
    q = np.fft.fftshift(np.fft.fftfreq(n, d=cfg.dy)) * 2.0 * np.pi
    amp = np.fft.fftshift(np.fft.fft(state)) * np.exp(1j * q * cfg.y_extent) * cfg.dy / np.sqrt(2.0 * np.pi)
    amp = amp * np.conj(free_phase(q, cfg, n_steps))
    grid, window = momentum_window(cfg)
    return grid, amp[window]


def free_reference_state(cfg: GridOracleConfig, n_steps: int) -> np.ndarray:
    """Initial packet propagated by the free lattice dispersion, computed in Fourier space."""
    n = cfg.n_y
    q = np.fft.fftfreq(n, d=cfg.dy) * 2.0 * np.pi
    return np.fft.ifft(np.fft.fft(_initial_state(cfg)) * free_phase(q, cfg, n_steps))


def evolve_all_sectors(cfg: GridOracleConfig,
                       sectors: Optional[Sequence[SpinSector]] = None) -> List[SectorTrajectory]:
    """Evolve every sector; results ordered by m_s whatever the execution order."""
    if sectors is None:
        sectors = enumerate_sectors(cfg.params)
    log_info(f"Oracle: evolving {len(sectors)} sectors on {cfg.n_y} points, {cfg.n_steps} steps")
    return parallel_map(lambda sector: evolve_sector(sector, cfg), sectors)


def analytic_counterpart(sector: SpinSector, sectors: Sequence[SpinSector]) -> SpinSector:
    """Closed-form sector whose amplitudes the lattice sector reproduces (m_s -> -m_s)."""
    for candidate in sectors:
        if candidate.two_ms == -sector.two_ms:
            return candidate
    raise PreconditionError(f"no mirrored sector for m_s={sector.m_s} among the evolved sectors")


def oracle_density_matrix(cfg: GridOracleConfig,
                          trajectories: Optional[Sequence[SectorTrajectory]] = None) -> DensityMatrix:
    """Bath-traced momentum density matrix of the evolved final states."""
    if trajectories is None:
        trajectories = evolve_all_sectors(cfg)
    sectors = [trajectory.sector for trajectory in trajectories]
    columns = []
    grid = None
    for trajectory in trajectories:
        if trajectory.system.cfg.n_y != cfg.n_y:
            raise PreconditionError("all sectors must share one lattice")
        grid, amp = to_momentum(trajectory.final_state, cfg, cfg.n_steps)
        weight = analytic_counterpart(trajectory.sector, sectors).weight
        columns.append(np.sqrt(weight) * amp)
    return DensityMatrix(grid, factor=np.array(columns).T)


@dataclass(frozen=True)
class InteractionMoments:
    times: np.ndarray
    mean_V: np.ndarray
    mean_V2: np.ndarray
    spin_expectation: np.ndarray
    cutoff: float               # 1 / dy of the lattice regularisation


def interaction_energy_moments(trajectories: Sequence[SectorTrajectory],
                               cfg: GridOracleConfig) -> InteractionMoments:
    """Bath-averaged <V>(t) and regularised <V^2>(t) along the oracle trajectories."""
    sectors = [trajectory.sector for trajectory in trajectories]
    ms, weights = sector_arrays(sectors)
    mean_v, mean_v2, norms = [], [], []
    for trajectory in trajectories:
        density = np.abs(trajectory.states) ** 2 * cfg.dy
        potential = trajectory.system.potential
        mean_v.append(density @ potential)
        mean_v2.append(density @ (potential * potential))
        norms.append(density.sum(axis=1))
    w = weights[:, np.newaxis]
    return InteractionMoments(
        times=trajectories[0].times.copy(),
        mean_V=mirror_sum(w * np.array(mean_v)),
        mean_V2=mirror_sum(w * np.array(mean_v2)),
        spin_expectation=mirror_sum(w * ms[:, np.newaxis] * np.array(norms)),
        cutoff=1.0 / cfg.dy,
    )


def bath_traced_series(trajectories: Sequence[SectorTrajectory], cfg: GridOracleConfig):
    """(t, trace, purity, energy, entropy) of the bath-traced relative state at each snapshot."""
    _, weights = sector_arrays([trajectory.sector for trajectory in trajectories])
    states = np.array([trajectory.states for trajectory in trajectories])    # (sectors, snapshots, n_y)
    energies = np.array([trajectory.energies for trajectory in trajectories])
    scale = np.sqrt(weights * cfg.dy)[:, np.newaxis]
    rows = []
    for i, t in enumerate(trajectories[0].times):
        factor = scale * states[:, i, :]
        gram = factor.conj() @ factor.T
        values = eigvalsh(0.5 * (gram + gram.conj().T))
        rows.append((float(t), float(np.sum(values)), float(np.sum(values ** 2)),
                     float(weights @ energies[:, i]), entropy_from_eigenvalues(values)))
    return rows


def cutoff_scaling_fit(cutoffs, values) -> Tuple[float, float, float]:
    """Linear fit values ~ slope * cutoff + intercept; returns (slope, intercept, R^2)."""
    x = np.asarray(cutoffs, dtype=float)
    y = np.asarray(values, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(residual ** 2) / total if total > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def trajectory_rows(trajectory: SectorTrajectory, stride: int = 1):
    """(t, y, Re psi, Im psi) rows of every stored snapshot, y subsampled by stride."""
    y = trajectory.system.y[::stride]
    for t, state in zip(trajectory.times, trajectory.states):
        sampled = state[::stride]
        for yi, value in zip(y, sampled):
            yield (t, yi, value.real, value.imag)
