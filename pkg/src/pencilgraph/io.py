"""Deterministic artifact writers: JSON, CSV and a plain SVG scatter plot."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__


def jsonable(obj):
    """Convert numpy scalars/arrays and complex numbers to JSON-native values.

    Complex numbers become ``[re, im]``; non-finite floats become strings so
    the output stays strict JSON.
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(float(obj.real)), jsonable(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else repr(f)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


def meta(chash: str, command: str) -> dict:
    return {"config_hash": chash, "version": __version__, "command": command}


def write_json(path, payload: dict, info: dict) -> Path:
    """Write ``payload`` with a ``meta`` block; floats use the shortest round-trip repr."""
    path = Path(path)
    body = dict(jsonable(payload))
    body["meta"] = info
    path.write_text(json.dumps(body, sort_keys=True, indent=1) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows, info: dict) -> Path:
    """CSV with two leading comment lines carrying the meta data; numbers at 17 digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# config_hash={info['config_hash']} version={info['version']}\n")
        fh.write(f"# command={info['command']}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def read_csv(path):
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def write_svg_scatter(path, points, lattice, info: dict, width=900, height=360,
                      title="eigenvalues") -> Path:
    """Scatter of complex ``points`` (filled) over ``lattice`` points (open circles)."""
    pts = np.asarray(points, dtype=complex)
    lat = np.asarray(lattice, dtype=complex)
    allp = np.concatenate([pts, lat]) if lat.size else pts
    x0, x1 = float(allp.real.min()) - 1, float(allp.real.max()) + 1
    y0, y1 = min(float(allp.imag.min()), -1.0) - 0.5, max(float(allp.imag.max()), 1.0) + 0.5
    pad = 40

    def X(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def Y(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f"<!-- config_hash={info['config_hash']} version={info['version']} -->",
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{pad}" y1="{Y(0):.3f}" x2="{width - pad}" y2="{Y(0):.3f}" stroke="#999"/>',
           f'<text x="{pad}" y="20" font-size="14">{title}</text>']
    for z in lat:
        out.append(f'<circle cx="{X(z.real):.3f}" cy="{Y(z.imag):.3f}" r="4" fill="none" '
                   f'stroke="#1f77b4"/>')
    for z in pts:
        out.append(f'<circle cx="{X(z.real):.3f}" cy="{Y(z.imag):.3f}" r="2" fill="#d62728"/>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
    return Path(path)
