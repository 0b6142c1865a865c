#!/usr/bin/env python3
"""
decoscatter - Experiment Config Loader
Loads one JSON document per run, validates it against the schema documented in
docs/SCHEMA.md and caches the parsed result by absolute path.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from errors import ConfigError, InvalidParameterError
from logger import log_debug, log_info
from model_config import sim_config
from spin_bath import ModelParams
from wavepacket import PacketSpec

EXPERIMENTS = ('amplitudes', 'narrow', 'full-density', 'oracle-validate',
               'entropy-scan', 'lindblad', 'contrast')

# sweepable name -> config section it lives in
SWEEPABLE = {
    'm': 'params', 'mu': 'params', 'N': 'params',
    'k0': 'packet', 'sigma0': 'packet', 'y0': 'packet',
    'k': None,
}

REQUIRED_SECTIONS = {
    'amplitudes': ('params',),
    'narrow': ('params', 'packet'),
    'full-density': ('params', 'packet'),
    'oracle-validate': ('params', 'packet'),
    'entropy-scan': ('params', 'packet', 'sweep', 'scan'),
    'lindblad': ('params', 'packet', 'lindblad'),
    'contrast': ('params', 'packet', 'lindblad'),
}

# benchmark-driven or single-run experiments
UNSWEPT = ('oracle-validate', 'lindblad', 'contrast')

ORACLE_KEYS = ('y_extent', 'n_y', 'dt', 't_final', 'delta_mode', 'gaussian_width',
               'snapshot_stride', 'dump_stride')
LINDBLAD_KEYS = ('gamma', 'jump_choice', 'n_y', 'y_extent', 'dt', 't_final',
                 'sample_stride', 'k0', 'sigma0')
TOP_LEVEL_KEYS = ('experiment', 'params', 'packet', 'grid', 'oracle', 'lindblad', 'sweep',
                  'scan', 'k_values', 'benchmark', 'output', 'formats')


@dataclass(frozen=True)
class Sweep:
    parameter: str
    values: Tuple[float, ...]


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: ModelParams
    spec: Optional[PacketSpec]
    grid_n: int
    packet_y0: Optional[float] = None     # None: y0 follows sigma0 in sweeps
    oracle: Dict[str, Any] = field(default_factory=dict)
    lindblad: Dict[str, Any] = field(default_factory=dict)
    sweep: Optional[Sweep] = None
    scan_mode: str = 'narrow'
    k_values: Optional[Tuple[float, ...]] = None
    benchmark_N: Tuple[int, ...] = (1, 2, 4)
    benchmark_mu: Tuple[float, ...] = (0.5, 1.0)
    output: str = 'results'
    formats: Tuple[str, ...] = ('csv', 'json')
    config_hash: str = ''


def canonical_hash(document: Dict[str, Any]) -> str:
    """SHA-256 of the key-sorted compact JSON rendering."""
    text = json.dumps(document, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def _number(section: Dict[str, Any], key: str, path: str, required: bool = True,
            integer: bool = False, default=None):
    if key not in section:
        if required:
            raise ConfigError("missing required value", field=f"{path}.{key}")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=f"{path}.{key}")
    if integer:
        if int(value) != value:
            raise ConfigError(f"expected an integer, got {value!r}", field=f"{path}.{key}")
        return int(value)
    return float(value)


def _section(document: Dict[str, Any], key: str) -> Dict[str, Any]:
    value = document.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError("expected an object", field=key)
    return value


def _check_keys(section: Dict[str, Any], allowed, path: str):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key; allowed: {', '.join(allowed)}", field=f"{path}.{key}")


def _parse_sweep(document: Dict[str, Any], experiment: str) -> Optional[Sweep]:
    if 'sweep' not in document:
        return None
    if experiment in UNSWEPT:
        raise ConfigError(f"experiment {experiment!r} does not take a sweep", field='sweep')
    sweep = _section(document, 'sweep')
    _check_keys(sweep, ('parameter', 'values', 'logspace', 'linspace'), 'sweep')
    parameter = sweep.get('parameter')
    if parameter not in SWEEPABLE:
        raise ConfigError(f"unknown sweep parameter {parameter!r}; allowed: {', '.join(SWEEPABLE)}",
                          field='sweep.parameter')
    if parameter == 'k' and experiment != 'amplitudes':
        raise ConfigError("momentum sweeps only apply to the amplitudes experiment",
                          field='sweep.parameter')
    if experiment == 'amplitudes' and SWEEPABLE[parameter] == 'packet':
        raise ConfigError("amplitudes sweeps k, m, mu or N", field='sweep.parameter')
    if experiment == 'entropy-scan' and parameter not in ('k0', 'N', 'mu'):
        raise ConfigError("entropy-scan sweeps k0, N or mu", field='sweep.parameter')
    if 'values' in sweep:
        values = sweep['values']
        if not isinstance(values, list) or not values:
            raise ConfigError("expected a non-empty list", field='sweep.values')
        for i, value in enumerate(values):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"expected a number, got {value!r}", field=f"sweep.values[{i}]")
        values = tuple(float(v) for v in values)
    elif 'logspace' in sweep or 'linspace' in sweep:
        key = 'logspace' if 'logspace' in sweep else 'linspace'
        spec = sweep[key]
        if (not isinstance(spec, list) or len(spec) != 3
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in spec)
                or int(spec[2]) != spec[2] or spec[2] < 1):
            raise ConfigError("expected [start, stop, count]", field=f"sweep.{key}")
        if key == 'logspace':
            if spec[0] <= 0 or spec[1] <= 0:
                raise ConfigError("logspace bounds must be positive", field='sweep.logspace')
            values = tuple(float(v) for v in np.geomspace(spec[0], spec[1], int(spec[2])))
        else:
            values = tuple(float(v) for v in np.linspace(spec[0], spec[1], int(spec[2])))
    else:
        raise ConfigError("sweep needs 'values', 'logspace' or 'linspace'", field='sweep')
    if parameter == 'N' and any(int(v) != v for v in values):
        raise ConfigError("N sweep values must be integers", field='sweep.values')
    return Sweep(parameter=parameter, values=values)


def parse_config(document: Dict[str, Any], experiment: Optional[str] = None) -> ExperimentConfig:
    """Validate a decoded JSON document into an ExperimentConfig."""
    if not isinstance(document, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(document, TOP_LEVEL_KEYS, '$')

    named = document.get('experiment')
    if experiment is None:
        experiment = named
    elif named is not None and named != experiment:
        raise ConfigError(f"config is for {named!r}, command line asked for {experiment!r}",
                          field='experiment')
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}",
                          field='experiment')

    for key in REQUIRED_SECTIONS[experiment]:
        if key not in document:
            raise ConfigError(f"required for experiment {experiment!r}", field=key)

    params_doc = _section(document, 'params')
    _check_keys(params_doc, ('m', 'mu', 'N'), 'params')
    packet_doc = _section(document, 'packet')
    _check_keys(packet_doc, ('k0', 'sigma0', 'y0'), 'packet')
    try:
        params = ModelParams(m=_number(params_doc, 'm', 'params'),
                             mu=_number(params_doc, 'mu', 'params'),
                             N=_number(params_doc, 'N', 'params', integer=True))
    except InvalidParameterError as e:
        raise ConfigError(str(e), field='params') from e
    spec = None
    if packet_doc:
        try:
            spec = PacketSpec(k0=_number(packet_doc, 'k0', 'packet'),
                              sigma0=_number(packet_doc, 'sigma0', 'packet'),
                              y0=_number(packet_doc, 'y0', 'packet', required=False))
        except InvalidParameterError as e:
            raise ConfigError(str(e), field='packet') from e

    grid_doc = _section(document, 'grid')
    _check_keys(grid_doc, ('n',), 'grid')
    grid_n = _number(grid_doc, 'n', 'grid', required=False, integer=True,
                     default=sim_config.get_default('grid', 'n'))
    if grid_n < 2 or grid_n & (grid_n - 1):
        raise ConfigError(f"grid size must be a power of two, got {grid_n}", field='grid.n')

    oracle = _section(document, 'oracle')
    _check_keys(oracle, ORACLE_KEYS, 'oracle')
    lindblad = _section(document, 'lindblad')
    _check_keys(lindblad, LINDBLAD_KEYS, 'lindblad')
    if experiment in ('lindblad', 'contrast') and 'gamma' not in lindblad:
        raise ConfigError("missing required value", field='lindblad.gamma')

    scan = _section(document, 'scan')
    _check_keys(scan, ('mode',), 'scan')
    scan_mode = scan.get('mode', 'narrow')
    if scan_mode not in ('narrow', 'full'):
        raise ConfigError("scan mode must be 'narrow' or 'full'", field='scan.mode')

    k_values = document.get('k_values')
    if k_values is not None:
        if not isinstance(k_values, list) or not k_values:
            raise ConfigError("expected a non-empty list of momenta", field='k_values')
        for i, k in enumerate(k_values):
            if isinstance(k, bool) or not isinstance(k, (int, float)) or k <= 0:
                raise ConfigError(f"momenta must be positive numbers, got {k!r}", field=f"k_values[{i}]")
        k_values = tuple(float(k) for k in k_values)

    benchmark = _section(document, 'benchmark')
    _check_keys(benchmark, ('N', 'mu'), 'benchmark')
    benchmark_N = benchmark.get('N', [1, 2, 4])
    benchmark_mu = benchmark.get('mu', [0.5, 1.0])
    if (not isinstance(benchmark_N, list) or not benchmark_N
            or any(isinstance(n, bool) or not isinstance(n, int) or n < 1 for n in benchmark_N)):
        raise ConfigError("expected a non-empty list of spin counts >= 1", field='benchmark.N')
    if (not isinstance(benchmark_mu, list) or not benchmark_mu
            or any(isinstance(mu, bool) or not isinstance(mu, (int, float)) for mu in benchmark_mu)):
        raise ConfigError("expected a non-empty list of couplings", field='benchmark.mu')
    benchmark_N = tuple(benchmark_N)
    benchmark_mu = tuple(float(mu) for mu in benchmark_mu)

    formats = document.get('formats', list(sim_config.OUTPUT['formats']))
    if not isinstance(formats, list) or any(f not in sim_config.OUTPUT['formats'] for f in formats):
        raise ConfigError("formats must be a subset of ['csv', 'json']", field='formats')

    output = document.get('output', 'results')
    if not isinstance(output, str) or not output:
        raise ConfigError("expected a directory path", field='output')

    hashed = dict(document)
    hashed['experiment'] = experiment
    return ExperimentConfig(
        experiment=experiment, params=params, spec=spec, grid_n=grid_n,
        packet_y0=None if spec is None or 'y0' not in packet_doc else spec.y0,
        oracle=dict(oracle), lindblad=dict(lindblad),
        sweep=_parse_sweep(document, experiment), scan_mode=scan_mode,
        k_values=k_values, benchmark_N=benchmark_N, benchmark_mu=benchmark_mu,
        output=output, formats=tuple(sorted(set(formats))),
        config_hash=canonical_hash(hashed),
    )


class ConfigLoader:
    """Config file loading with caching."""

    def __init__(self):
        self.configs = {}

    def load(self, path: str, experiment: Optional[str] = None) -> ExperimentConfig:
        cache_key = (os.path.abspath(path), experiment)
        if cache_key in self.configs:
            return self.configs[cache_key]
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                document = json.load(handle)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON: {e.msg} (column {e.colno})", line=e.lineno) from e
        config = parse_config(document, experiment)
        self.configs[cache_key] = config
        log_info(f"Loaded config: {path} ({config.experiment}, sha256 {config.config_hash[:12]})")
        return config

    def clear_cache(self):
        self.configs.clear()
        log_debug("Config cache cleared")


# Global config loader instance
config_loader = ConfigLoader()


def load_config(path: str, experiment: Optional[str] = None) -> ExperimentConfig:
    """Load and validate a config file."""
    return config_loader.load(path, experiment)
