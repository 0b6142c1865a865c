import numpy as np
import pytest

from errors import BoundaryLeakError, InvalidParameterError, PreconditionError, StalenessError
from oracle_grid import (NARROW_GAUSSIAN, GridOracleConfig, LatticeSystem, analytic_counterpart,
                         bath_traced_series, cutoff_scaling_fit, evolve_all_sectors, evolve_sector,
                         extract_channel_probabilities, free_reference_state,
                         interaction_energy_moments, momentum_window, oracle_density_matrix,
                         trajectory_rows)
from reduced_density import assemble, binary_entropy, outgoing_sector_state, von_neumann_entropy
from scattering import bath_averaged_probabilities
from spin_bath import ModelParams, enumerate_sectors
from wavepacket import PacketSpec
from worker_pool import safe_pool_init, safe_pool_shutdown


@pytest.fixture(scope='module')
def benchmark():
    spec = PacketSpec(k0=10.0, sigma0=2.0, y0=-30.0)
    params = ModelParams(m=1.0, mu=1.0, N=1)
    cfg = GridOracleConfig(spec=spec, params=params)
    return cfg, evolve_all_sectors(cfg)


def test_default_lattice_and_duration():
    cfg = GridOracleConfig(spec=PacketSpec(k0=10.0, sigma0=2.0, y0=-30.0),
                           params=ModelParams(m=1.0, mu=1.0, N=1))
    assert cfg.n_y == 8192
    assert cfg.y_extent == 56.0
    assert cfg.t_final == pytest.approx(6.0)
    assert cfg.n_steps == 3000
    assert cfg.positions[cfg.origin_index] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize('kwargs', [
    {'n_y': 1000},
    {'dt': 0.0},
    {'delta_mode': 'smeared'},
    {'delta_mode': NARROW_GAUSSIAN, 'gaussian_width': 0.1},
    {'snapshot_stride': 0},
    {'t_final': -1.0},
])
def test_invalid_oracle_config(kwargs):
    with pytest.raises(InvalidParameterError):
        GridOracleConfig(spec=PacketSpec(k0=10.0, sigma0=2.0), params=ModelParams(m=1.0, mu=1.0, N=1),
                         **kwargs)


def test_narrow_gaussian_potential_carries_full_strength():
    params = ModelParams(m=1.0, mu=1.5, N=1)
    cfg = GridOracleConfig(spec=PacketSpec(k0=10.0, sigma0=2.0), params=params, n_y=1024,
                           delta_mode=NARROW_GAUSSIAN)
    assert cfg.gaussian_width == pytest.approx(0.005)
    sector = enumerate_sectors(params)[1]
    system = LatticeSystem(sector, cfg)
    assert np.sum(system.potential) * cfg.dy == pytest.approx(0.75, rel=1e-12)


def test_single_bin_potential_carries_full_strength():
    params = ModelParams(m=1.0, mu=1.5, N=1)
    cfg = GridOracleConfig(spec=PacketSpec(k0=10.0, sigma0=2.0), params=params, n_y=1024)
    system = LatticeSystem(enumerate_sectors(params)[0], cfg)
    assert np.count_nonzero(system.potential) == 1
    assert np.sum(system.potential) * cfg.dy == pytest.approx(-0.75, rel=1e-12)


def test_packet_too_close_to_origin():
    params = ModelParams(m=1.0, mu=1.0, N=1)
    cfg = GridOracleConfig(spec=PacketSpec(k0=10.0, sigma0=2.0, y0=-5.0), params=params, t_final=1.0)
    with pytest.raises(PreconditionError):
        evolve_sector(enumerate_sectors(params)[0], cfg)


def test_box_too_small_reports_leak():
    params = ModelParams(m=1.0, mu=1.0, N=1)
    cfg = GridOracleConfig(spec=PacketSpec(k0=10.0, sigma0=2.0, y0=-30.0), params=params,
                           y_extent=36.0, n_y=4096)
    with pytest.raises(BoundaryLeakError):
        evolve_sector(enumerate_sectors(params)[0], cfg)


def test_lattice_sectors_pair_with_mirrored_closed_form_sectors():
    sectors = enumerate_sectors(ModelParams(m=1.0, mu=1.0, N=3))
    for sector in sectors:
        counterpart = analytic_counterpart(sector, sectors)
        assert counterpart.two_ms == -sector.two_ms
        assert counterpart.weight == sector.weight
    with pytest.raises(PreconditionError):
        analytic_counterpart(sectors[0], sectors[:2])


def test_cutoff_fit_on_exact_line():
    slope, intercept, r2 = cutoff_scaling_fit([1.0, 2.0, 4.0], [2.5, 4.5, 8.5])
    assert slope == pytest.approx(2.0)
    assert intercept == pytest.approx(0.5)
    assert r2 == pytest.approx(1.0)


@pytest.mark.slow
def test_channel_probabilities_match_closed_form(benchmark):
    cfg, trajectories = benchmark
    for trajectory in trajectories:
        p_reflect, p_transmit = extract_channel_probabilities(trajectory.final_state, cfg)
        assert p_transmit == pytest.approx(400 / 401, abs=1e-3)
        assert p_reflect + p_transmit == pytest.approx(1.0, abs=1e-8)


@pytest.mark.slow
def test_energy_conserved_through_collision(benchmark):
    _, trajectories = benchmark
    for trajectory in trajectories:
        assert trajectory.energy_drift < 1e-6
        assert abs(trajectory.kinetic_energy_change) < 1e-4
        assert np.all(np.abs(trajectory.norms - 1.0) < 1e-8)


@pytest.mark.slow
def test_mid_collision_snapshot_is_stale(benchmark):
    cfg, trajectories = benchmark
    trajectory = trajectories[0]
    assert trajectory.times[60] == pytest.approx(3.0)
    with pytest.raises(StalenessError):
        extract_channel_probabilities(trajectory.states[60], cfg)


@pytest.mark.slow
def test_oracle_density_matrix_matches_closed_form(benchmark):
    cfg, trajectories = benchmark
    rho_oracle = oracle_density_matrix(cfg, trajectories)
    rho_analytic = assemble(enumerate_sectors(cfg.params), cfg.spec, rho_oracle.grid, cfg.params)
    difference = np.max(np.abs(rho_oracle.elements - rho_analytic.elements))
    assert difference / np.max(np.abs(rho_analytic.elements)) < 1e-3
    p_reflect, _ = bath_averaged_probabilities(cfg.spec.k0, enumerate_sectors(cfg.params), cfg.params)
    assert von_neumann_entropy(rho_oracle) == pytest.approx(binary_entropy(p_reflect), abs=5e-3)


@pytest.mark.slow
def test_bath_spin_expectation_vanishes(benchmark):
    cfg, trajectories = benchmark
    moments = interaction_energy_moments(trajectories, cfg)
    assert np.max(np.abs(moments.spin_expectation)) < 1e-12
    assert moments.mean_V2[0] < 1e-12
    peak = int(np.argmax(moments.mean_V2))
    assert moments.mean_V2[peak] > 0
    assert abs(moments.mean_V[peak]) < 0.01 * np.sqrt(moments.mean_V2[peak])
    assert moments.cutoff == pytest.approx(1.0 / cfg.dy)


@pytest.mark.slow
def test_bath_traced_series_tracks_entropy(benchmark):
    cfg, trajectories = benchmark
    rows = bath_traced_series(trajectories, cfg)
    assert len(rows) == len(trajectories[0].times)
    t0, trace0, purity0, energy0, entropy0 = rows[0]
    assert trace0 == pytest.approx(1.0, abs=1e-8)
    assert purity0 == pytest.approx(1.0, abs=1e-8)
    assert entropy0 == pytest.approx(0.0, abs=1e-8)
    final = rows[-1]
    assert final[3] == pytest.approx(energy0, rel=1e-6)
    rho_oracle = oracle_density_matrix(cfg, trajectories)
    assert final[4] == pytest.approx(von_neumann_entropy(rho_oracle), abs=1e-6)


@pytest.mark.slow
def test_trajectory_rows_subsample_positions(benchmark):
    _, trajectories = benchmark
    trajectory = trajectories[0]
    rows = list(trajectory_rows(trajectory, stride=64))
    assert len(rows) == len(trajectory.times) * (trajectory.system.cfg.n_y // 64)
    t, y, re_psi, im_psi = rows[0]
    assert t == 0.0
    assert y == pytest.approx(-56.0)


@pytest.mark.slow
def test_hard_wall_reflects_everything():
    params = ModelParams(m=1.0, mu=2000.0, N=1)
    cfg = GridOracleConfig(spec=PacketSpec(k0=10.0, sigma0=2.0, y0=-30.0), params=params)
    trajectory = evolve_sector(enumerate_sectors(params)[1], cfg)
    p_reflect, _ = extract_channel_probabilities(trajectory.final_state, cfg)
    assert p_reflect > 0.999


@pytest.mark.slow
def test_zero_spin_sector_propagates_freely():
    params = ModelParams(m=1.0, mu=1.0, N=2)
    cfg = GridOracleConfig(spec=PacketSpec(k0=10.0, sigma0=2.0, y0=-30.0), params=params)
    sector = enumerate_sectors(params)[1]
    assert sector.two_ms == 0
    trajectory = evolve_sector(sector, cfg)
    reference = free_reference_state(cfg, cfg.n_steps)
    overlap = np.vdot(reference, trajectory.final_state) * cfg.dy
    assert abs(overlap) ** 2 > 1.0 - 1e-6


@pytest.mark.slow
def test_no_coupling_keeps_state_pure():
    params = ModelParams(m=1.0, mu=0.0, N=1)
    cfg = GridOracleConfig(spec=PacketSpec(k0=10.0, sigma0=2.0, y0=-30.0), params=params,
                           n_y=2048, t_final=1.0)
    rho = oracle_density_matrix(cfg)
    assert rho.purity() == pytest.approx(1.0, abs=1e-10)


@pytest.mark.slow
def test_parallel_sectors_identical_to_sequential():
    params = ModelParams(m=1.0, mu=1.0, N=3)
    cfg = GridOracleConfig(spec=PacketSpec(k0=10.0, sigma0=2.0, y0=-30.0), params=params,
                           n_y=2048, t_final=1.0)
    sequential = evolve_all_sectors(cfg)
    try:
        assert safe_pool_init(2)
        parallel = evolve_all_sectors(cfg)
    finally:
        safe_pool_shutdown()
    assert [t.sector.two_ms for t in parallel] == [-3, -1, 1, 3]
    for a, b in zip(sequential, parallel):
        assert np.array_equal(a.states, b.states)


@pytest.mark.slow
def test_interaction_energy_grows_linearly_with_cutoff():
    params = ModelParams(m=1.0, mu=0.5, N=4)
    base = GridOracleConfig(spec=PacketSpec(k0=10.0, sigma0=2.0, y0=-30.0), params=params,
                            n_y=4096, t_final=3.0)
    cutoffs, peaks = [], []
    for n_y in (4096, 8192, 16384):
        cfg = base.with_resolution(n_y)
        moments = interaction_energy_moments(evolve_all_sectors(cfg), cfg)
        cutoffs.append(moments.cutoff)
        peaks.append(float(np.max(moments.mean_V2)))
    slope, _, r2 = cutoff_scaling_fit(cutoffs, peaks)
    assert slope > 0
    assert r2 > 0.999


@pytest.mark.slow
def test_regularisations_agree_on_channel_probabilities(benchmark):
    cfg, trajectories = benchmark
    smeared = GridOracleConfig(spec=cfg.spec, params=cfg.params, delta_mode=NARROW_GAUSSIAN)
    trajectory = evolve_sector(trajectories[1].sector, smeared)
    assert extract_channel_probabilities(trajectory.final_state, smeared) == pytest.approx(
        extract_channel_probabilities(trajectories[1].final_state, cfg), abs=2e-3)


@pytest.mark.slow
def test_channel_error_shrinks_under_refinement(benchmark):
    cfg, trajectories = benchmark
    sector = trajectories[1].sector
    errors = []
    for n_y in (2048, 4096, 8192):
        lattice = cfg.with_resolution(n_y)
        trajectory = trajectories[1] if n_y == cfg.n_y else evolve_sector(sector, lattice)
        p_reflect, _ = extract_channel_probabilities(trajectory.final_state, lattice)
        grid, _ = momentum_window(lattice)
        state = outgoing_sector_state(sector, lattice.spec, grid, lattice.params)
        expected = np.sum(np.abs(state[grid.values < 0]) ** 2) * grid.dk
        errors.append(abs(p_reflect - expected))
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] < 1e-3
