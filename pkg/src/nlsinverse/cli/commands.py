"""Experiment drivers behind the command-line verbs.

Each driver takes validated inputs, writes its files into ``out`` and records
them in a :class:`RunManifest`. Drivers return an exit code (0 or 1) and never
call ``sys.exit`` themselves.
"""

from __future__ import annotations

import logging
import warnings
from pathlib import Path

import numpy as np

from .. import closed_form
from ..forward import sweep
from ..hierarchy import extract_series, series_from_cascade, solve_cascade
from ..inversion import (
    CascadeModel,
    ClosedFormModel,
    DataSetDn,
    InversionConfig,
    SeriesModel,
    ZeroModel,
    fourier_invert_special,
    recover_all,
    recover_q,
)
from ..io import read_series, read_sweep, write_columns, write_reconstruction, write_series, write_sweep
from ..numerics import SpatialGrid
from ..potential import CoefficientFunction, epsilon_bound
from .config import ExperimentConfig
from .manifest import RunManifest
from .selfcheck import format_table, run_selfcheck

log = logging.getLogger("nlsinverse")


def _surface(caught, manifest):
    msgs = sorted({str(w.message) for w in caught})
    for m in msgs:
        log.warning(m)
    if msgs:
        manifest.diagnostics.setdefault("warnings", []).extend(msgs)


def _l2(values, grid):
    return float(np.sqrt(np.sum(grid.weights * np.abs(values) ** 2)))


def relative_l2_error(recovered, truth, grid):
    """Relative L2 error; the absolute L2 norm of ``recovered`` when the truth is zero."""
    ref = _l2(truth, grid)
    err = _l2(recovered - truth, grid)
    return err / ref if ref > 0 else err


def _run_sweep(cfg: ExperimentConfig, grid, threads, manifest):
    p = cfg.potential.build()
    est = epsilon_bound(p, cfg.grids.r)
    eps = cfg.grids.eps_values(p)
    print(f"existence bound: r = {est.r:g}, C = {est.C:.6g}, delta = {est.delta:.6g}")
    over = [e for e in eps if abs(e) > est.delta]
    if over:
        print(f"  {len(over)} eps value(s) exceed delta: "
              + ", ".join(f"{abs(e):.4g}" for e in over))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        with manifest.stage("forward"):
            sw = sweep(p, cfg.grids.k_grid(), eps, grid, cfg.grids.r, threads)
    _surface(caught, manifest)
    manifest.diagnostics.update(delta=est.delta, C=est.C, r=est.r, eps_over_delta=len(over))
    return p, sw


def cmd_forward(cfg: ExperimentConfig, out: Path, manifest: RunManifest, threads: int = 1) -> int:
    grid = cfg.grids.spatial(cfg.potential.b)
    _, sw = _run_sweep(cfg, grid, threads, manifest)
    path = manifest.add_output(write_sweep(out / "sweep.csv", sw, {"config_hash": manifest.config_hash}))
    print(f"wrote {path} ({len(sw)} rows)")
    return 0


def cmd_extract(sweep_file, n_max, out: Path, manifest: RunManifest) -> int:
    sw = read_sweep(sweep_file)
    n_max = n_max or len(sw.eps_list)
    with manifest.stage("extract"):
        series = extract_series(sw, n_max)
    path = manifest.add_output(write_series(out / "series.csv", series, {"sweep": str(sweep_file)}))
    manifest.diagnostics.update(n_max=n_max, max_fit_residual=float(np.max(series.residual)))
    print(f"wrote {path} (orders 1..{n_max}, max fit residual {np.max(series.residual):.3e})")
    return 0


def _model(cfg: ExperimentConfig, grid):
    inv = cfg.inversion
    if inv.data == "cascade":
        return CascadeModel(cfg.potential.build(), grid), None
    if inv.data == "closed_form":
        return ClosedFormModel(inv.example, inv.example_param, cfg.potential.b), None
    if inv.data == "zero":
        return ZeroModel(), None
    series = read_series(Path(inv.series_file))
    return SeriesModel(series), np.real(series.k_grid)


def _report_results(results, truth, grid, out, manifest, tag=""):
    rows = []
    for res in results:
        path = manifest.add_output(write_reconstruction(out / f"reconstruction{tag}_n{res.n}.csv", res))
        err = None if truth is None else relative_l2_error(res.q, truth[res.n - 1], grid)
        rows.append((res.n, err, res.imag_residual, res.relative_residual, res.xi))
        print(f"  n={res.n} q{res.n - 1}: method={res.method} xi={res.xi:.4g} "
              f"rel_residual={res.relative_residual:.2e} imag={res.imag_residual:.2e}"
              + ("" if err is None else f" rel_L2_error={err:.3e}") + f" -> {path}")
    return rows


def cmd_invert(cfg: ExperimentConfig, out: Path, manifest: RunManifest) -> int:
    grid = cfg.grids.spatial(cfg.potential.b)
    model, k_real = _model(cfg, grid)
    config = cfg.inversion.inversion_config(k_real)
    q0 = cfg.potential.coefficient(0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        with manifest.stage("invert"):
            results = recover_all(model, q0, cfg.inversion.n_target, grid, config)
    _surface(caught, manifest)
    truth = None
    if cfg.inversion.data == "cascade":
        p = cfg.potential.build()
        truth = [p.q(m)(grid.nodes) for m in range(cfg.inversion.n_target)]
    elif cfg.inversion.data == "closed_form":
        q2 = closed_form.example_functions(cfg.inversion.example, cfg.inversion.example_param,
                                           cfg.potential.b)[2]
        truth = [np.zeros(grid.size), np.zeros(grid.size), q2(grid.nodes), np.zeros(grid.size)]
        truth += [None] * max(0, cfg.inversion.n_target - len(truth))
    print(f"inversion ({cfg.inversion.data} data):")
    rows = _report_results(results, truth, grid, out, manifest)
    manifest.diagnostics["orders"] = [
        {"n": n, "rel_l2_error": e, "imag_residual": i, "relative_residual": r, "xi": xi}
        for n, e, i, r, xi in rows]
    return 0


def _extraction_errors(extracted, reference, n):
    out = []
    for got, ref in zip(extracted.AB(n), reference.AB(n)):
        scale = np.max(np.abs(ref))
        diff = np.max(np.abs(got - ref))
        out.append(float(diff / scale if scale > 0 else diff))
    return out


def cmd_roundtrip(cfg: ExperimentConfig, out: Path, manifest: RunManifest, threads: int = 1) -> int:
    inv = cfg.inversion
    grid = cfg.grids.spatial(cfg.potential.b)
    p, sw = _run_sweep(cfg, grid, threads, manifest)
    manifest.add_output(write_sweep(out / "sweep.csv", sw, {"config_hash": manifest.config_hash}))
    n_max = cfg.extract_n_max or len(sw.eps_list)
    if n_max < inv.n_target:
        log.error("extraction order %d is below n_target %d; add eps values", n_max, inv.n_target)
        return 1
    with manifest.stage("extract"):
        series = extract_series(sw, n_max)
        reference = series_from_cascade(p, sw.k_grid, inv.n_target, grid)
    manifest.add_output(write_series(out / "series.csv", series))

    if inv.roundtrip_route == "real_axis":
        model = SeriesModel(series)
        config = InversionConfig(method="real_axis", k_real=tuple(np.real(series.k_grid)),
                                 use_F=inv.use_F, basis=inv.basis, n_basis=inv.n_basis, lam=inv.lam)
    else:
        # complex contour points are synthesized from the known potential
        model = CascadeModel(p, grid)
        config = inv.inversion_config()
    q0 = p.q(0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        with manifest.stage("invert"):
            results = recover_all(model, q0, inv.n_target, grid, config)
    _surface(caught, manifest)

    truth = [p.q(m)(grid.nodes) for m in range(inv.n_target)]
    print(f"roundtrip ({inv.roundtrip_route} route):")
    rows = _report_results(results, truth, grid, out, manifest)
    ext = [_extraction_errors(series, reference, n) for n, *_ in rows]
    write_columns(out / "roundtrip_errors.csv",
                  ("n", "rel_l2_error", "extraction_error_A", "extraction_error_B",
                   "imag_residual", "relative_residual"),
                  [[r[0] for r in rows], [r[1] for r in rows], [e[0] for e in ext], [e[1] for e in ext],
                   [r[2] for r in rows], [r[3] for r in rows]],
                  {"tolerance": inv.tolerance, "route": inv.roundtrip_route})
    manifest.add_output(out / "roundtrip_errors.csv")
    failed = [r[0] for r in rows if not r[1] <= inv.tolerance]
    manifest.diagnostics["orders"] = [
        {"n": r[0], "rel_l2_error": r[1], "extraction_error_A": e[0], "extraction_error_B": e[1]}
        for r, e in zip(rows, ext)]
    manifest.diagnostics["failed_orders"] = failed
    print(f"{'n':>3} {'rel L2 error':>14} {'extract A':>11} {'extract B':>11}  within {inv.tolerance:g}")
    for r, e in zip(rows, ext):
        print(f"{r[0]:>3} {r[1]:>14.3e} {e[0]:>11.3e} {e[1]:>11.3e}  {'yes' if r[1] <= inv.tolerance else 'NO'}")
    return 1 if failed else 0


def cmd_example(name, param, b, out: Path, manifest: RunManifest, k_cutoff=200.0, M=64,
                nx_per_unit=2000) -> int:
    A3, B3, q2 = closed_form.example_functions(name, param, b)
    grid = SpatialGrid.for_width(b, nx_per_unit)
    p = closed_form.example_potential(name, param, b)
    k = np.linspace(0.5, 8.0, 61)
    with manifest.stage("cascade"):
        state = solve_cascade(p, k, 3, grid)
        B3_double = solve_cascade(p, 2 * k, 3, grid).AB(3)[1]
    cA, cB = state.AB(3)
    exact_A, exact_B = A3(k), B3(k)
    err_A = np.abs(cA - exact_A) / np.abs(exact_A)
    err_B = np.abs(cB - exact_B) / np.abs(exact_B)
    write_columns(out / "a3_b3.csv",
                  ("k", "re_A3_closed", "im_A3_closed", "re_B3_closed", "im_B3_closed",
                   "re_A3_cascade", "im_A3_cascade", "re_B3_cascade", "im_B3_cascade",
                   "rel_err_A3", "rel_err_B3", "relation_closed", "relation_cascade"),
                  [k, exact_A.real, exact_A.imag, exact_B.real, exact_B.imag, cA.real, cA.imag,
                   cB.real, cB.imag, err_A, err_B, np.abs(exact_A + 2 * B3(2 * k)),
                   np.abs(cA + 2 * B3_double)],
                  {"example": name, "param": param, "b": b})
    manifest.add_output(out / "a3_b3.csv")

    x = grid.nodes
    with manifest.stage("invert"):
        q_int = fourier_invert_special(A3, b, x, route="integral", k_cutoff=k_cutoff)
        q_ser = fourier_invert_special(A3, b, x, route="series", M=M)
        d = DataSetDn.from_model(ClosedFormModel(name, param, b), 3,
                                 [CoefficientFunction.zero(b), CoefficientFunction.zero(b)], b)
        q_dir = recover_q(d, grid, InversionConfig(M=M)).q
    truth = q2(x)
    write_columns(out / "q2_reconstruction.csv",
                  ("x", "q2_true", "q2_integral", "q2_series", "q2_contour_direct"),
                  [x, truth, q_int, q_ser, q_dir],
                  {"example": name, "param": param, "b": b, "k_cutoff": k_cutoff, "M": M})
    manifest.add_output(out / "q2_reconstruction.csv")
    inner = (x >= 0.05 * b) & (x <= 0.95 * b)
    summary = {
        "max_rel_err_A3": float(err_A.max()),
        "max_rel_err_B3": float(err_B.max()),
        "max_relation_cascade": float(np.max(np.abs(cA + 2 * B3_double))),
        "interior_err_integral": float(np.max(np.abs(q_int - truth)[inner])),
        "interior_err_series": float(np.max(np.abs(q_ser - truth)[inner])),
        "interior_integral_vs_series": float(np.max(np.abs(q_int - q_ser)[inner])),
        "rel_l2_err_contour_direct": relative_l2_error(q_dir, truth, grid),
    }
    manifest.diagnostics.update(summary)
    print(f"example {name} (param {param:g}, b {b:g}):")
    for key, val in summary.items():
        print(f"  {key:<30} {val:.3e}")
    return 0


def cmd_selfcheck(overrides, manifest: RunManifest) -> int:
    with manifest.stage("selfcheck"):
        results = run_selfcheck(overrides)
    print(format_table(results))
    failed = [r.name for r in results if not r.passed]
    manifest.diagnostics.update(checks={r.name: {"value": r.value, "tolerance": r.tolerance,
                                                 "passed": r.passed} for r in results},
                                failed=failed)
    if failed:
        print(f"FAILED: {', '.join(failed)}")
        return 1
    print(f"all {len(results)} checks passed")
    return 0
