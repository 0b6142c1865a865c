#!/usr/bin/env python3
"""
decoscatter - Main Entry Point
Command-line driver: decoscatter <experiment> --config <path> [--out <dir>]
[--format csv,json] [--threads n]
"""

import argparse
import logging
import sys
from dataclasses import replace
from typing import List, Optional

from config_loader import load_config
from errors import (EXIT_CONFIG_ERROR, EXIT_NUMERICAL_FAILURE, EXIT_OK, ConfigError,
                    DecoScatterError, NumericalError)
from experiments import EXPERIMENT_MAP, run
from logger import log_error, log_info, sim_logger
from worker_pool import safe_pool_init, safe_pool_shutdown


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='decoscatter',
        description='Decoherence without dissipation: spin-bath delta scattering experiments.')
    parser.add_argument('experiment', choices=sorted(EXPERIMENT_MAP))
    parser.add_argument('--config', required=True, help='JSON experiment config (see docs/SCHEMA.md)')
    parser.add_argument('--out', default=None, help='output directory (overrides the config)')
    parser.add_argument('--format', default=None,
                        help='comma-separated subset of csv,json (overrides the config)')
    parser.add_argument('--threads', type=int, default=1, help='worker threads for sectors and sweeps')
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='console verbosity')
    return parser


def _formats(option: str):
    formats = tuple(sorted({part.strip() for part in option.split(',') if part.strip()}))
    if not formats or any(fmt not in ('csv', 'json') for fmt in formats):
        raise ConfigError(f"--format must be a subset of csv,json, got {option!r}", field='--format')
    return formats


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for decoscatter; returns the process exit code."""
    args = build_parser().parse_args(argv)
    sim_logger.set_console_level(getattr(logging, args.log_level))
    log_info(f"Starting decoscatter {args.experiment}...")

    try:
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}", field='--threads')
        config = load_config(args.config, args.experiment)
        if args.format is not None:
            config = replace(config, formats=_formats(args.format))
        safe_pool_init(args.threads)

        passed = run(config, output_dir=args.out)
        if not passed:
            log_error(f"Experiment '{args.experiment}' finished with failed checks")
            return EXIT_NUMERICAL_FAILURE
        log_info("Run complete.")
        return EXIT_OK

    except KeyboardInterrupt:
        log_info("Run interrupted by user")
        return EXIT_NUMERICAL_FAILURE
    except ConfigError as e:
        log_error(f"Config error: {e}")
        return EXIT_CONFIG_ERROR
    except NumericalError as e:
        log_error(f"Numerical failure ({type(e).__name__}): {e}")
        return EXIT_NUMERICAL_FAILURE
    except DecoScatterError as e:
        log_error(f"Run failed ({type(e).__name__}): {e}")
        return e.exit_code
    except MemoryError as e:
        log_error(f"Out of memory: {e}")
        return EXIT_NUMERICAL_FAILURE
    finally:
        safe_pool_shutdown()


if __name__ == "__main__":
    sys.exit(main())
