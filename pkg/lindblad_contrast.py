#!/usr/bin/env python3
"""
decoscatter - Markovian Contrast
A memoryless master equation for the relative packet,

    d rho / dt = -i [H, rho] + gamma (L rho L^dagger - 1/2 {L^dagger L, rho}),

with either a localising jump L = y / sigma0 or a momentum jump L = sigma0 p,
set against the exact model, which decoheres with no change in particle energy.
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.linalg import eigvalsh

from errors import InvalidParameterError, NonConvergenceError
from logger import log_info, log_warning
from model_config import sim_config
from reduced_density import (assemble, entropy_from_eigenvalues, incoming_density,
                             von_neumann_entropy)
from spin_bath import ModelParams, SpinSector
from wavepacket import MomentumGrid, PacketSpec, relative_position_amplitude

POSITION = 'position'
MOMENTUM = 'momentum'
JUMP_CHOICES = (POSITION, MOMENTUM)
MAX_REFINEMENTS = 3


@dataclass(frozen=True)
class LindbladConfig:
    params: ModelParams
    spec: PacketSpec
    gamma: float
    jump_choice: str = POSITION
    n_y: int = field(default_factory=lambda: sim_config.get_default('lindblad', 'n_y'))
    y_extent: float = field(default_factory=lambda: sim_config.get_default('lindblad', 'y_extent'))
    dt: float = field(default_factory=lambda: sim_config.get_default('lindblad', 'dt'))
    t_final: float = 2.0
    sample_stride: int = field(default_factory=lambda: sim_config.get_default('lindblad', 'sample_stride'))

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise InvalidParameterError(f"gamma must be >= 0, got {self.gamma}")
        if self.jump_choice not in JUMP_CHOICES:
            raise InvalidParameterError(f"jump_choice must be one of {JUMP_CHOICES}")
        if self.n_y < 4 or self.y_extent <= 0 or self.dt <= 0 or self.t_final <= 0:
            raise InvalidParameterError("n_y, y_extent, dt and t_final must be positive")
        if self.sample_stride < 1:
            raise InvalidParameterError("sample_stride must be >= 1")
        if self.jump_choice == POSITION and self.gamma > 0:
            bias = self.lattice_heating_bias
            if bias > sim_config.get_tolerance('lattice_heating_bias'):
                log_warning(f"k0*dy = {self.spec.k0 * self.dy:.3g}: lattice heating runs {100 * bias:.2g}% "
                            f"below gamma/sigma0^2; raise n_y or lower k0")

    @property
    def dy(self) -> float:
        return 2.0 * self.y_extent / self.n_y

    @property
    def positions(self) -> np.ndarray:
        return -self.y_extent + self.dy * np.arange(self.n_y)

    @property
    def lattice_heating_bias(self) -> float:
        """1 - cos(k0 dy), the shortfall of the lattice heating rate at the carrier momentum."""
        return float(1.0 - np.cos(self.spec.k0 * self.dy))


def build_lindblad_operators(cfg: LindbladConfig):
    """(H, L) as dense matrices on the Dirichlet lattice."""
    n, dy = cfg.n_y, cfg.dy
    hop = 1.0 / (2.0 * cfg.params.m * dy ** 2)
    shift = np.eye(n, k=1)
    H = hop * (2.0 * np.eye(n) - shift - shift.T)
    if cfg.jump_choice == POSITION:
        L = np.diag(cfg.positions / cfg.spec.sigma0)
    else:
        p = -1j * (shift - shift.T) / (2.0 * dy)
        L = cfg.spec.sigma0 * p
    return H.astype(complex), L.astype(complex)


def lindblad_rhs(H: np.ndarray, rho: np.ndarray, L: np.ndarray, gamma: float) -> np.ndarray:
    drho = -1j * (H @ rho - rho @ H)
    if gamma:
        Ld = L.conj().T
        LdL = Ld @ L
        drho += gamma * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))
    return drho


def rk4_step(H: np.ndarray, rho: np.ndarray, L: np.ndarray, gamma: float, dt: float) -> np.ndarray:
    k1 = lindblad_rhs(H, rho, L, gamma)
    k2 = lindblad_rhs(H, rho + 0.5 * dt * k1, L, gamma)
    k3 = lindblad_rhs(H, rho + 0.5 * dt * k2, L, gamma)
    k4 = lindblad_rhs(H, rho + dt * k3, L, gamma)
    return rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def position_dephasing_rate(cfg: LindbladConfig) -> float:
    """d<p^2>/dt for L = y / sigma0: gamma / sigma0^2 from [y, [y, p^2]] = -2.

    This is the continuum rate. The lattice kinetic term gives about
    gamma / sigma0^2 * <cos(p dy)>, so the two agree only while k0 dy is small;
    see LindbladConfig.lattice_heating_bias.
    """
    return cfg.gamma / cfg.spec.sigma0 ** 2


@dataclass
class LindbladSeries:
    cfg: LindbladConfig
    times: np.ndarray
    trace: np.ndarray
    purity: np.ndarray
    energy: np.ndarray
    entropy: np.ndarray
    p2: np.ndarray
    min_eigenvalue: np.ndarray
    dt_used: float

    @property
    def trace_drift(self) -> float:
        return float(np.max(np.abs(self.trace - 1.0)))

    @property
    def energy_change(self) -> float:
        return float(self.energy[-1] - self.energy[0])

    @property
    def energy_change_rel(self) -> float:
        return self.energy_change / abs(self.energy[0])

    @property
    def entropy_change(self) -> float:
        return float(self.entropy[-1] - self.entropy[0])

    def p2_slope(self) -> float:
        slope, _ = np.polyfit(self.times, self.p2, 1)
        return float(slope)

    def rows(self):
        for i in range(len(self.times)):
            yield (self.times[i], self.trace[i], self.purity[i], self.energy[i],
                   self.entropy[i], self.p2[i], self.min_eigenvalue[i])


def _initial_rho(cfg: LindbladConfig) -> np.ndarray:
    # packet moved to the box centre: evaluating at y + y0 recentres it on y = 0
    psi = relative_position_amplitude(cfg.positions + cfg.spec.y0, cfg.spec)
    psi = psi / np.sqrt(np.sum(np.abs(psi) ** 2))
    return np.outer(psi, psi.conj())


def _run(cfg: LindbladConfig, dt: float) -> LindbladSeries:
    H, L = build_lindblad_operators(cfg)
    rho = _initial_rho(cfg)
    n_steps = int(round(cfg.t_final / dt))
    stride = max(1, int(round(cfg.sample_stride * cfg.dt / dt)))
    samples = {key: [] for key in ('times', 'trace', 'purity', 'energy', 'entropy', 'p2', 'min_eig')}
    tolerance = sim_config.get_tolerance('lindblad_trace')
    positivity = sim_config.get_tolerance('lindblad_positivity')

    def sample(step_index, state):
        hermitian = 0.5 * (state + state.conj().T)
        eigenvalues = eigvalsh(hermitian)
        energy = float(np.real(np.trace(H @ state)))
        samples['times'].append(step_index * dt)
        samples['trace'].append(float(np.real(np.trace(state))))
        samples['purity'].append(float(np.sum(eigenvalues ** 2)))
        samples['energy'].append(energy)
        samples['entropy'].append(entropy_from_eigenvalues(eigenvalues))
        samples['p2'].append(2.0 * cfg.params.m * energy)
        samples['min_eig'].append(float(eigenvalues.min()))

    sample(0, rho)
    for step_index in range(1, n_steps + 1):
        rho = rk4_step(H, rho, L, cfg.gamma, dt)
        if step_index % stride == 0 or step_index == n_steps:
            if not np.all(np.isfinite(rho)):
                raise NonConvergenceError(f"non-finite density matrix at step {step_index} (dt={dt})")
            drift = abs(float(np.real(np.trace(rho))) - 1.0)
            if drift > tolerance:
                raise NonConvergenceError(f"trace drift {drift:.3e} at step {step_index} (dt={dt})")
            sample(step_index, rho)
            # RK4 keeps the trace exactly, so an unstable step shows up as negative weight
            if samples['min_eig'][-1] < -positivity:
                raise NonConvergenceError(
                    f"eigenvalue {samples['min_eig'][-1]:.3e} at step {step_index} (dt={dt})")

    return LindbladSeries(
        cfg=cfg, times=np.array(samples['times']), trace=np.array(samples['trace']),
        purity=np.array(samples['purity']), energy=np.array(samples['energy']),
        entropy=np.array(samples['entropy']), p2=np.array(samples['p2']),
        min_eigenvalue=np.array(samples['min_eig']), dt_used=dt)


def evolve_lindblad(cfg: LindbladConfig) -> LindbladSeries:
    """Integrate the master equation; halves dt on instability before giving up."""
    dt = cfg.dt
    for attempt in range(MAX_REFINEMENTS + 1):
        try:
            series = _run(cfg, dt)
            log_info(f"Lindblad {cfg.jump_choice} gamma={cfg.gamma}: "
                     f"dS={series.entropy_change:.4g}, dE={series.energy_change:.4g}")
            return series
        except NonConvergenceError as e:
            if attempt == MAX_REFINEMENTS:
                raise
            log_warning(f"{e}; refining time step")
            dt *= 0.5


@dataclass(frozen=True)
class ExactSummary:
    entropy_before: float
    entropy_after: float
    energy_before: float
    energy_after: float

    @property
    def entropy_gain(self) -> float:
        return self.entropy_after - self.entropy_before

    @property
    def energy_change_rel(self) -> float:
        return (self.energy_after - self.energy_before) / abs(self.energy_before)


def exact_summary(spec: PacketSpec, sectors: Sequence[SpinSector], grid: MomentumGrid,
                  params: ModelParams) -> ExactSummary:
    """Entropy and particle kinetic energy before and after the exact collision."""
    rho_in = incoming_density(spec, grid)
    rho_out = assemble(sectors, spec, grid, params)
    return ExactSummary(
        entropy_before=von_neumann_entropy(rho_in),
        entropy_after=von_neumann_entropy(rho_out),
        energy_before=rho_in.kinetic_energy(params.m),
        energy_after=rho_out.kinetic_energy(params.m),
    )


@dataclass(frozen=True)
class ContrastReport:
    exact_entropy_gain: float
    exact_energy_change_rel: float
    lindblad_jump: str
    lindblad_gamma: float
    lindblad_entropy_gain: float
    lindblad_energy_change: float
    lindblad_energy_change_rel: float
    p2_rate_measured: float
    p2_rate_expected: Optional[float]
    lindblad_trace_drift: float
    tolerances: Dict[str, float]
    exact_decoheres_at_fixed_energy: bool
    lindblad_changes_energy: bool

    def as_record(self) -> dict:
        return asdict(self)


def contrast_report(lindblad_series: LindbladSeries, exact: ExactSummary,
                    energy_tolerance: float = 1e-4) -> ContrastReport:
    """Exact-model entropy gain at fixed energy next to the master equation's energy drift."""
    cfg = lindblad_series.cfg
    expected = position_dephasing_rate(cfg) if cfg.jump_choice == POSITION else None
    return ContrastReport(
        exact_entropy_gain=exact.entropy_gain,
        exact_energy_change_rel=exact.energy_change_rel,
        lindblad_jump=cfg.jump_choice,
        lindblad_gamma=cfg.gamma,
        lindblad_entropy_gain=lindblad_series.entropy_change,
        lindblad_energy_change=lindblad_series.energy_change,
        lindblad_energy_change_rel=lindblad_series.energy_change_rel,
        p2_rate_measured=lindblad_series.p2_slope(),
        p2_rate_expected=expected,
        lindblad_trace_drift=lindblad_series.trace_drift,
        tolerances={'exact_energy': energy_tolerance,
                    'trace': sim_config.get_tolerance('lindblad_trace')},
        exact_decoheres_at_fixed_energy=bool(
            exact.entropy_gain > 0 and abs(exact.energy_change_rel) <= energy_tolerance),
        lindblad_changes_energy=bool(lindblad_series.energy_change > 0),
    )
