"""Utility tools for parameter grids and result files."""

import csv
from datetime import datetime
import json

import numpy as np

from pyqep import __version__


def parse_grid(text):
    """Parse a grid of floats.

    Accepts a single value ("0.3"), a comma-separated list ("0.1,0.2") or an
    inclusive range "start:stop:step".
    """
    text = str(text).strip()
    try:
        if ':' in text:
            start, stop, step = (float(v) for v in text.split(':'))
            if step <= 0 or stop < start:
                raise ValueError(
                    f"Grid {text} needs start <= stop and a positive step")
            n = int(round((stop - start) / step)) + 1
            values = start + step * np.arange(n)
            return [round(float(v), 12) for v in values if v <= stop + 1e-12]
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError as e:
        raise ValueError(f"Cannot parse grid '{text}': {e}") from e


def _plain(value):
    """Convert numpy scalars and enums for CSV/JSON output."""
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, 'value') and not isinstance(value, (int, float)):
        return value.value
    return value


def metadata(params, seed):
    return {
        'version': __version__,
        'params': {k: _plain(v) for k, v in params.items()},
        'seed': seed,
        'timestamp': datetime.now().isoformat(timespec='seconds'),
    }


def write_csv(rows, f, params, seed):
    """Write rows as CSV preceded by `#` lines with version, seed and params.

    Args:
        rows: list of dicts sharing the same keys
        f: open text file
        params: full parameter set of the run
        seed: master seed
    """
    meta = metadata(params, seed)
    f.write(f"# pyqep {meta['version']}\n")
    f.write(f"# seed: {seed}\n")
    f.write(f"# params: {json.dumps(meta['params'], sort_keys=True)}\n")
    f.write(f"# timestamp: {meta['timestamp']}\n")
    if not rows:
        return
    writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()),
                            lineterminator='\n')
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _plain(v) for k, v in row.items()})


def write_json(rows, f, params, seed):
    """Write rows as a JSON document mirroring the CSV output."""
    doc = metadata(params, seed)
    doc['rows'] = [{k: _plain(v) for k, v in row.items()} for row in rows]
    f.write(json.dumps(doc, indent=4) + "\n")


WRITERS = {'csv': write_csv, 'json': write_json}


def write_rows(rows, f, params, seed, fmt='csv'):
    try:
        writer = WRITERS[fmt]
    except KeyError as e:
        raise ValueError(f"Unknown output format {fmt}") from e
    writer(rows, f, params, seed)


def read_csv(f):
    """Read rows back from a file written by write_csv, skipping metadata."""
    lines = [line for line in f if not line.startswith('#')]
    return list(csv.DictReader(lines))
