"""Plain-text tables for sweeps, series coefficients and reconstructions.

Every file is comma separated with one header row. Lines starting with ``#``
carry metadata as ``# key = json-value``. Floats are written with 17
significant digits so a write/read cycle is exact, and rows come out in a
fixed order so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ContractViolation
from .forward import ScatteringSweep
from .hierarchy import SeriesCoefficients

SWEEP_COLUMNS = ("k", "re_eps", "im_eps", "re_A", "im_A", "re_B", "im_B")
SERIES_COLUMNS = ("n", "re_k", "im_k", "re_A", "im_A", "re_B", "im_B", "fit_residual")
RECONSTRUCTION_COLUMNS = ("x", "q_recovered", "imag_residual_local")


class TableFormatError(ContractViolation):
    """A table file could not be parsed; the message names file and line."""


def fmt(value) -> str:
    return "%.17g" % value


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def _write(path, columns, rows, meta):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {key} = {json.dumps(_jsonable(val), sort_keys=True)}" for key, val in meta.items()]
    lines.append(",".join(columns))
    lines.extend(",".join(row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def _read(path, columns):
    """Return (meta, rows of floats); every row is checked against ``columns``."""
    path = Path(path)
    meta, rows, header_seen = {}, [], False
    with path.open(newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                key, sep, val = text[1:].partition("=")
                if sep:
                    try:
                        meta[key.strip()] = json.loads(val)
                    except json.JSONDecodeError as exc:
                        raise TableFormatError(f"{path}:{lineno}: bad metadata value ({exc})") from None
                continue
            fields = next(csv.reader([text]))
            if not header_seen:
                if tuple(f.strip() for f in fields) != tuple(columns):
                    raise TableFormatError(
                        f"{path}:{lineno}: expected header {','.join(columns)}, got {text!r}")
                header_seen = True
                continue
            if len(fields) != len(columns):
                raise TableFormatError(
                    f"{path}:{lineno}: expected {len(columns)} fields, got {len(fields)}")
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                raise TableFormatError(f"{path}:{lineno}: non-numeric field in {text!r}") from None
    if not header_seen:
        raise TableFormatError(f"{path}: no header row")
    return meta, np.array(rows, dtype=float).reshape(-1, len(columns))


# --- sweeps -----------------------------------------------------------------------


def write_sweep(path, sw: ScatteringSweep, provenance: dict | None = None):
    meta = {"table": "sweep", "b": sw.b, "degree": sw.degree, "delta": sw.delta,
            "n_k": len(sw.k_grid), "n_eps": len(sw.eps_list)}
    meta.update(provenance or {})
    rows = ([fmt(m.k), fmt(m.epsilon.real), fmt(m.epsilon.imag), fmt(m.A.real), fmt(m.A.imag),
             fmt(m.B.real), fmt(m.B.imag)] for m in sw.entries())
    return _write(path, SWEEP_COLUMNS, rows, meta)


def read_sweep(path) -> ScatteringSweep:
    meta, data = _read(path, SWEEP_COLUMNS)
    if data.shape[0] == 0:
        raise TableFormatError(f"{path}: sweep table has no rows")
    k_grid = np.unique(data[:, 0])
    eps = data[:, 1] + 1j * data[:, 2]
    # eps order as first written
    _, first = np.unique(eps, return_index=True)
    eps_list = eps[np.sort(first)]
    shape = (len(k_grid), len(eps_list))
    if data.shape[0] != shape[0] * shape[1]:
        raise TableFormatError(
            f"{path}: {data.shape[0]} rows do not form a full k x eps table {shape}")
    A = np.full(shape, np.nan + 0j)
    B = np.full(shape, np.nan + 0j)
    ki = np.searchsorted(k_grid, data[:, 0])
    ei = np.array([int(np.flatnonzero(eps_list == e)[0]) for e in eps])
    A[ki, ei] = data[:, 3] + 1j * data[:, 4]
    B[ki, ei] = data[:, 5] + 1j * data[:, 6]
    if np.isnan(A).any():
        raise TableFormatError(f"{path}: duplicate (k, eps) rows leave gaps in the table")
    if "b" not in meta:
        raise TableFormatError(f"{path}: missing '# b = ...' metadata line")
    return ScatteringSweep(k_grid, eps_list, A, B, float(meta["b"]), int(meta.get("degree", 0)),
                           meta.get("delta"))


# --- series coefficients ------------------------------------------------------------


def write_series(path, series: SeriesCoefficients, provenance: dict | None = None):
    meta = {"table": "series", "n_max": series.n_max, "source": series.source}
    meta.update(provenance or {})
    res = series.residual
    rows = []
    for n in range(1, series.n_max + 1):
        A, B = series.AB(n)
        for j, k in enumerate(series.k_grid):
            r = np.nan if res is None else res[j]
            rows.append([str(n), fmt(k.real), fmt(k.imag), fmt(A[j].real), fmt(A[j].imag),
                         fmt(B[j].real), fmt(B[j].imag), fmt(r)])
    return _write(path, SERIES_COLUMNS, rows, meta)


def read_series(path) -> SeriesCoefficients:
    meta, data = _read(path, SERIES_COLUMNS)
    if data.shape[0] == 0:
        raise TableFormatError(f"{path}: series table has no rows")
    orders = data[:, 0].astype(int)
    n_max = int(orders.max())
    first = data[orders == 1]
    k_grid = first[:, 1] + 1j * first[:, 2]
    if data.shape[0] != n_max * len(k_grid) or set(orders) != set(range(1, n_max + 1)):
        raise TableFormatError(f"{path}: expected {len(k_grid)} rows for every order 1..{n_max}")
    A = np.empty((n_max, len(k_grid)), dtype=complex)
    B = np.empty_like(A)
    for n in range(1, n_max + 1):
        block = data[orders == n]
        if not np.array_equal(block[:, 1] + 1j * block[:, 2], k_grid):
            raise TableFormatError(f"{path}: order {n} uses a different k grid")
        A[n - 1] = block[:, 3] + 1j * block[:, 4]
        B[n - 1] = block[:, 5] + 1j * block[:, 6]
    residual = first[:, 7]
    return SeriesCoefficients(k_grid, A, B, str(meta.get("source", "file")),
                              None if np.all(np.isnan(residual)) else residual)


# --- reconstructions ----------------------------------------------------------------


def reconstruction_meta(res) -> dict:
    d = res.diagnostics
    meta = {"table": "reconstruction", "n": res.n, "method": res.method, "basis": res.basis,
            "xi": res.xi, "M": res.M, "imag_residual": res.imag_residual,
            "linear_residual": res.linear_residual, "relative_residual": res.relative_residual}
    for key in ("route", "s_xi", "contraction_estimate", "K_minus_K0_norm", "K_norm", "M_U",
                "terms", "amplification", "k_min", "k_max", "k_count"):
        if d.get(key) is not None:
            meta[key] = d[key]
    return meta


def write_reconstruction(path, res, provenance: dict | None = None):
    meta = reconstruction_meta(res)
    meta.update(provenance or {})
    rows = ([fmt(x), fmt(q), fmt(e)] for x, q, e in zip(res.x, res.q, res.q_imag))
    return _write(path, RECONSTRUCTION_COLUMNS, rows, meta)


def read_reconstruction(path):
    """(meta, x, q, imag_residual_local)."""
    meta, data = _read(path, RECONSTRUCTION_COLUMNS)
    return meta, data[:, 0], data[:, 1], data[:, 2]


def write_columns(path, columns, arrays, meta: dict | None = None):
    """Generic numeric table (used for plot-ready curves and comparison tables)."""
    arrays = [np.asarray(a) for a in arrays]
    if len(columns) != len(arrays) or len({a.shape for a in arrays}) != 1:
        raise ContractViolation("one equal-length array per column required")
    rows = ([fmt(v) for v in row] for row in zip(*arrays))
    return _write(path, columns, rows, dict(meta or {}))


def read_columns(path, columns):
    meta, data = _read(path, columns)
    return meta, data
