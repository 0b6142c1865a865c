import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import CoverageError, InvalidParameterError
from wavepacket import (MomentumGrid, PacketSpec, amplitude_width, com_amplitude,
                        com_factorization_check, free_evolve, incoming_on_grid, momentum_spread,
                        relative_amplitude_in, relative_position_amplitude, require_coverage,
                        single_particle_packet)


def test_default_start_is_fifteen_widths_out():
    spec = PacketSpec(k0=3.0, sigma0=2.0)
    assert spec.y0 == -30.0
    assert spec.narrowness == 6.0
    assert not spec.is_narrow()
    assert PacketSpec(k0=1.0, sigma0=20.0).is_narrow()


@pytest.mark.parametrize('kwargs', [
    {'k0': 0.0, 'sigma0': 1.0},
    {'k0': -1.0, 'sigma0': 1.0},
    {'k0': 1.0, 'sigma0': 0.0},
    {'k0': 1.0, 'sigma0': 1.0, 'y0': 0.0},
    {'k0': 1.0, 'sigma0': 1.0, 'y0': 5.0},
])
def test_invalid_packets_rejected(kwargs):
    with pytest.raises(InvalidParameterError):
        PacketSpec(**kwargs)


def test_grid_is_signed_and_mirrored():
    grid = MomentumGrid.from_kmax(64, 4.0)
    assert grid.dk == pytest.approx(0.125)
    assert grid.values[0] == -4.0
    assert grid.values[32] == 0.0
    j = np.arange(1, 64)
    assert np.all(grid.values[grid.mirror_index(j)] == -grid.values[j])
    assert grid.nearest_index(1.0) == 40


def test_grid_values_are_read_only():
    grid = MomentumGrid(n=8, dk=0.5)
    with pytest.raises(ValueError):
        grid.values[0] = 1.0


@pytest.mark.parametrize('n', [0, 3, 100])
def test_grid_size_must_be_power_of_two(n):
    with pytest.raises(InvalidParameterError):
        MomentumGrid(n=n, dk=0.1)


def test_lowest_bin_has_no_mirror():
    with pytest.raises(InvalidParameterError):
        MomentumGrid(n=16, dk=0.1).mirror_index(0)


def test_coverage_required():
    spec = PacketSpec(k0=5.0, sigma0=1.0)
    require_coverage(spec, MomentumGrid.for_packet(spec, 256))
    with pytest.raises(CoverageError):
        require_coverage(spec, MomentumGrid.from_kmax(256, 10.0))
    with pytest.raises(CoverageError):
        incoming_on_grid(spec, MomentumGrid.from_kmax(256, 10.0))


def test_incoming_packet_normalised_on_positive_bins():
    spec = PacketSpec(k0=2.0, sigma0=1.5)
    grid = MomentumGrid.for_packet(spec, 1024)
    psi = incoming_on_grid(spec, grid)
    assert np.sum(np.abs(psi) ** 2) * grid.dk == pytest.approx(1.0, abs=1e-12)
    assert np.all(psi[~grid.positive] == 0)


def test_momentum_widths():
    spec = PacketSpec(k0=5.0, sigma0=2.0)
    k = np.linspace(0.0, 10.0, 20001)
    amp = relative_amplitude_in(k, spec)
    assert amplitude_width(k, amp) == pytest.approx(1 / (2 * spec.sigma0), rel=1e-6)
    assert momentum_spread(k, amp) == pytest.approx(1 / (2 * np.sqrt(2) * spec.sigma0), rel=1e-6)


def test_momentum_amplitude_is_unit_normalised():
    spec = PacketSpec(k0=5.0, sigma0=2.0)
    k = np.linspace(0.0, 10.0, 20001)
    density = np.abs(relative_amplitude_in(k, spec)) ** 2
    assert np.sum(density) * (k[1] - k[0]) == pytest.approx(1.0, rel=1e-10)


def test_position_amplitude_centred_and_normalised():
    spec = PacketSpec(k0=3.0, sigma0=1.0, y0=-20.0)
    y = np.linspace(-40.0, 0.0, 40001)
    density = np.abs(relative_position_amplitude(y, spec)) ** 2
    dy = y[1] - y[0]
    assert np.sum(density) * dy == pytest.approx(1.0, rel=1e-10)
    assert np.sum(y * density) * dy == pytest.approx(-20.0, rel=1e-10)


def test_two_particle_packet_factorises(rng):
    spec = PacketSpec(k0=2.5, sigma0=1.3, y0=-10.0)
    x1 = rng.uniform(-12.0, 4.0, size=200)
    x2 = rng.uniform(-4.0, 12.0, size=200)
    product, factored = com_factorization_check(x1, x2, spec)
    assert_allclose(product, factored, rtol=1e-12, atol=1e-15)


def test_single_particle_direction_checked():
    with pytest.raises(InvalidParameterError):
        single_particle_packet(0.0, PacketSpec(k0=1.0, sigma0=1.0), 0)


def test_free_evolution_only_changes_phase():
    spec = PacketSpec(k0=2.0, sigma0=1.0)
    k = np.linspace(0.1, 4.0, 50)
    amp = relative_amplitude_in(k, spec)
    evolved = free_evolve(amp, k, m=1.5, t=3.0)
    assert_allclose(np.abs(evolved), np.abs(amp), rtol=1e-14)
    assert_allclose(evolved / amp, np.exp(-1j * k * k * 3.0 / 3.0), rtol=1e-12)


@pytest.mark.parametrize('sigma0', [0.5, 2.0, 7.0])
def test_amplitude_one_sigma_points(sigma0):
    spec = PacketSpec(k0=4.0, sigma0=sigma0)
    peak = np.abs(relative_amplitude_in(spec.k0, spec)) ** 2
    for k in (spec.k0 - 1 / (2 * sigma0), spec.k0 + 1 / (2 * sigma0)):
        assert np.abs(relative_amplitude_in(k, spec)) ** 2 / peak == pytest.approx(np.exp(-1), rel=1e-12)
    k = np.linspace(0.0, 8.0, 4001)
    assert np.argmax(np.abs(relative_amplitude_in(k, spec))) == 2000


@pytest.mark.parametrize('k0, sigma0', [(5.0, 2.0), (1.0, 20.0), (10.0, 0.5)])
def test_default_grid_holds_the_whole_packet(k0, sigma0):
    spec = PacketSpec(k0=k0, sigma0=sigma0)
    grid = MomentumGrid.for_packet(spec)
    assert grid.n == 4096
    assert grid.k_max == pytest.approx(k0 + 8 / sigma0)
    density = np.abs(relative_amplitude_in(grid.values, spec)) ** 2
    assert np.sum(density) * grid.dk == pytest.approx(1.0, abs=1e-10)


def test_factorisation_at_origin_and_centre_of_mass_peak():
    spec = PacketSpec(k0=2.5, sigma0=1.3)
    product, factored = com_factorization_check(0.0, 0.0, spec)
    assert abs(product - factored) <= 1e-12 * abs(factored)
    x1 = np.array([-3.0, 0.7, 4.2])
    product, factored = com_factorization_check(x1, -x1, spec)
    assert_allclose(product, factored, rtol=1e-12)
    relative = relative_position_amplitude(2 * x1, spec)
    assert_allclose(factored / relative, com_amplitude(0.0, spec), rtol=1e-14)
    assert com_amplitude(0.0, spec) == pytest.approx((np.pi * spec.sigma0 ** 2) ** -0.25)


def test_factorisation_over_thousand_draws(rng):
    spec = PacketSpec(k0=2.5, sigma0=1.3)
    x1, x2 = rng.uniform(-5 * spec.sigma0, 5 * spec.sigma0, size=(2, 1000))
    product, factored = com_factorization_check(x1, x2, spec)
    assert np.max(np.abs(product - factored) / np.abs(factored)) < 1e-12
