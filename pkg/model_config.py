#!/usr/bin/env python3
"""
decoscatter - Simulation Configuration
Default grids, oracle and master-equation settings, and numerical tolerances
shared by every module.
"""


class SimulationConfig:
    """Central registry of defaults and tolerances."""

    # Momentum grid for density-matrix assembly
    GRID = {
        'n': 4096,
        'kmax_sigmas': 8.0,   # k_max = k0 + kmax_sigmas / sigma0
    }

    # Gaussian packet defaults
    PACKET = {
        'narrowness_threshold': 10.0,   # sigma0 * k0 required by the narrow-packet path
        'approach_widths': 5.0,         # y0 < -approach_widths * (2 sigma0)
    }

    # Time-dependent lattice oracle
    ORACLE = {
        'n_y': 8192,
        'y_extent': 56.0,
        'dt': 0.002,
        'snapshot_stride': 25,
        'edge_fraction': 1.0 / 64.0,    # share of the box checked for leakage
        'clearance_sigmas': 4.0,        # |y| < clearance_sigmas * sigma0 must be empty after scattering
        'gaussian_width_k0': 0.05,      # max w * k0 for the narrow-gaussian delta
    }

    # Lindblad contrast integrator
    LINDBLAD = {
        'n_y': 128,
        'y_extent': 12.0,
        'dt': 0.005,
        'sample_stride': 10,
    }

    TOLERANCES = {
        'unitarity': 1e-12,
        'weights_sum': 1e-12,
        'hermiticity': 1e-12,
        'positivity': 1e-10,
        'trace': 1e-8,
        'eigen_clip': 1e-12,
        'diagonal_floor': 1e-14,
        'norm_drift': 1e-8,
        'boundary_density': 1e-8,
        'scattering_clearance': 1e-6,
        'lindblad_trace': 1e-6,
        'lindblad_positivity': 1e-8,
        'lattice_heating_bias': 1e-2,
        'coverage_slack': 1e-9,
    }

    OUTPUT = {
        'float_format': '.17g',
        'manifest_name': 'manifest.json',
        'formats': ('csv', 'json'),
    }

    @classmethod
    def get_default(cls, section, key, fallback=None):
        """Look up a default value in one of the section dictionaries."""
        table = getattr(cls, section.upper(), None)
        if not isinstance(table, dict):
            return fallback
        return table.get(key, fallback)

    @classmethod
    def get_tolerance(cls, key):
        """Get a numerical tolerance; unknown keys fall back to the unitarity level."""
        return cls.TOLERANCES.get(key, cls.TOLERANCES['unitarity'])

    @classmethod
    def format_float(cls, value):
        """Render a float the way every CSV artifact stores it."""
        return format(float(value), cls.OUTPUT['float_format'])


# Global config instance
sim_config = SimulationConfig()
