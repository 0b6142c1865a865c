#!/usr/bin/env python3
"""
decoscatter - Artifact Writer
Serializes experiment results to CSV and JSON and records every file in the
run manifest. All writes for a run go through one ArtifactWriter, in call
order, so identical configs give byte-identical output directories.
"""

import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass
from typing import Any, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from errors import ArtifactError, ConfigError
from logger import log_debug, log_info, log_warning
from model_config import sim_config

Column = Tuple[str, str]        # (name, unit); unit '1' for dimensionless


def format_cell(value) -> str:
    """One CSV cell: floats at 17 significant digits, everything else verbatim."""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return sim_config.format_float(value)
    if value is None:
        return ''
    return str(value)


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return {'re': value.real, 'im': value.imag}
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _clean(value):
    # JSON has no NaN/inf literal
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (float, np.floating)) and not np.isfinite(value):
        return None
    if isinstance(value, complex):
        return {'re': _clean(value.real), 'im': _clean(value.imag)}
    return value


def render_json(record: Any) -> str:
    return json.dumps(_clean(record), sort_keys=True, indent=2, default=_json_default) + '\n'


@dataclass(frozen=True)
class ArtifactEntry:
    name: str
    kind: str
    sha256: str
    rows: Optional[int] = None


class ArtifactWriter:
    """Writes a run's artifacts and keeps the manifest entries in emission order."""

    def __init__(self, output_dir: str, formats: Sequence[str], config_hash: str, experiment: str):
        self.output_dir = output_dir
        self.formats = tuple(formats)
        self.config_hash = config_hash
        self.experiment = experiment
        self.entries: List[ArtifactEntry] = []
        try:
            os.makedirs(self.output_dir, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"cannot create output directory {output_dir}: {e}", field='output') from e

    def _path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def _record(self, name: str, kind: str, payload: bytes, rows: Optional[int] = None):
        if any(entry.name == name for entry in self.entries):
            log_warning(f"Artifact {name} written twice; keeping the latest")
            self.entries = [entry for entry in self.entries if entry.name != name]
        with open(self._path(name), 'wb') as handle:
            handle.write(payload)
        self.entries.append(ArtifactEntry(name=name, kind=kind,
                                          sha256=hashlib.sha256(payload).hexdigest(), rows=rows))
        log_debug(f"Wrote {name} ({len(payload)} bytes)")

    def write_csv(self, name: str, columns: Sequence[Column], rows: Iterable[Sequence]) -> bool:
        """Write a table whose header cells read 'name [unit]'. Skipped unless csv is enabled."""
        if 'csv' not in self.formats:
            return False
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow([f"{column} [{unit}]" for column, unit in columns])
        count = 0
        for row in rows:
            if len(row) != len(columns):
                raise ArtifactError(f"{name}: row has {len(row)} cells, header has {len(columns)}")
            writer.writerow([format_cell(cell) for cell in row])
            count += 1
        self._record(name, 'csv', buffer.getvalue().encode('utf-8'), rows=count)
        return True

    def write_json(self, name: str, record: Any) -> bool:
        """Write a summary record with sorted keys. Skipped unless json is enabled."""
        if 'json' not in self.formats:
            return False
        self._record(name, 'json', render_json(record).encode('utf-8'))
        return True

    def finalize(self) -> str:
        """Write the manifest (always JSON) and return its path."""
        manifest = {
            'experiment': self.experiment,
            'config_sha256': self.config_hash,
            'float_format': sim_config.OUTPUT['float_format'],
            'artifacts': [
                {'name': entry.name, 'kind': entry.kind, 'sha256': entry.sha256, 'rows': entry.rows}
                for entry in self.entries
            ],
        }
        path = self._path(sim_config.OUTPUT['manifest_name'])
        with open(path, 'w', encoding='utf-8', newline='\n') as handle:
            handle.write(render_json(manifest))
        log_info(f"Wrote {len(self.entries)} artifacts and manifest to {self.output_dir}")
        return path
