"""Command-line front end: analytic sweeps, Monte-Carlo runs, the
closed-form-versus-quadrature validation suite, and the four canned
figure datasets, all emitted as CSV.

SNR is expressed in dB on the command line and in the CSV files and
converted to linear scale exactly once at this boundary.  Output files
are written atomically (temp file + rename), floats carry 12 significant
digits, lines end with LF.  Exit codes: 0 success, 1 input validation,
2 numeric non-convergence (the offending grid point is named).
"""

from __future__ import annotations

import argparse
import math
import os
import sys as _sys
import tempfile
from dataclasses import dataclass, replace

from . import error_rate as er
from . import mcsim
from .fading import CorrelationModel, SystemModel, cdf_snr, cdf_stage1_bound
from .numerics import integrate_finite

__all__ = ["CurveRequest", "run", "reproduce_figures", "main"]

SCENARIOS = ("aser-stage", "aser-total", "cross-aser", "outage",
             "mc-ser", "mc-outage", "validate")


class CliError(Exception):
    """Input validation failure; maps to exit code 1."""


class NonConvergence(Exception):
    """A numeric evaluation failed to converge; maps to exit code 2."""


@dataclass(frozen=True)
class CurveRequest:
    """One CSV-producing job.  `systems` holds one SystemModel per
    requested receive-antenna count; scenario-specific fields are checked
    in run() before any computation starts."""

    scenario: str
    systems: tuple
    mod: er.ModulationScheme | None
    snr_grid_db: tuple
    output_path: str
    corr: CorrelationModel | None = None
    x_th: float | None = None
    mc: mcsim.MCConfig | None = None
    ordered: bool = True
    workers: int = 1


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _write_csv_atomic(path: str, header: list, rows: list) -> None:
    """All-or-nothing CSV write: assemble in a temp file in the target
    directory, then rename over the destination."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp_csv_", dir=directory, text=True)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _db_to_lin(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _sys_at(sys_model: SystemModel, omega: float) -> SystemModel:
    return replace(sys_model, omega=omega)


# ---------------------------------------------------------------------------
# scenario implementations
# ---------------------------------------------------------------------------

def _rows_aser_stage(req: CurveRequest) -> tuple:
    header = ["snr_db", "n", "m_n", "modulation", "stage", "value", "method"]
    rows = []
    for db in req.snr_grid_db:
        for s in req.systems:
            sm = _sys_at(s, _db_to_lin(db))
            try:
                r1 = er.aser_stage1(sm, req.mod)
                r2 = er.aser_stage2(sm, req.mod)
            except ArithmeticError as exc:
                raise NonConvergence(f"snr_db={db}, n={s.n}: {exc}") from exc
            rows.append([db, s.n, s.m_n, req.mod.label, "stage1", r1.value, r1.method])
            rows.append([db, s.n, s.m_n, req.mod.label, "stage2", r2.value, r2.method])
    return header, rows


def _rows_aser_total(req: CurveRequest) -> tuple:
    header = ["snr_db", "n", "m_n", "modulation", "rho", "stage", "value", "method"]
    rows = []
    rho = req.corr.rho if req.corr is not None else ""
    for db in req.snr_grid_db:
        for s in req.systems:
            sm = _sys_at(s, _db_to_lin(db))
            try:
                bd = er.aser_total(sm, req.mod, req.corr)
            except ArithmeticError as exc:
                raise NonConvergence(f"snr_db={db}, n={s.n}: {exc}") from exc
            tags = bd.method_tags
            rows.append([db, s.n, s.m_n, req.mod.label, rho, "stage1", bd.stage1, tags["stage1"]])
            rows.append([db, s.n, s.m_n, req.mod.label, rho, "stage2", bd.stage2, tags["stage2"]])
            rows.append([db, s.n, s.m_n, req.mod.label, rho, "cross", bd.cross, tags["cross"]])
            rows.append([db, s.n, s.m_n, req.mod.label, rho, "total", bd.total,
                         "+".join(sorted(set(tags.values())))])
    return header, rows


def _rows_cross(req: CurveRequest) -> tuple:
    header = ["snr_db", "n", "m_n", "modulation", "rho", "value", "method"]
    rows = []
    for db in req.snr_grid_db:
        for s in req.systems:
            sm = _sys_at(s, _db_to_lin(db))
            try:
                r = er.aser_cross(sm, req.mod, req.corr)
            except ArithmeticError as exc:
                raise NonConvergence(f"snr_db={db}, n={s.n}: {exc}") from exc
            rows.append([db, s.n, s.m_n, req.mod.label, req.corr.rho, r.value, r.method])
    return header, rows


def _rows_outage(req: CurveRequest) -> tuple:
    header = ["snr_db", "n", "m_n", "modulation", "xth_db", "stage", "value", "method"]
    rows = []
    xth_db = 10.0 * math.log10(req.x_th)
    for db in req.snr_grid_db:
        for s in req.systems:
            sm = _sys_at(s, _db_to_lin(db))
            try:
                p1 = er.outage_stage1(req.x_th, sm)
                p2c = er.outage_stage2_conditional(req.x_th, sm)
                p2u = er.outage_stage2_unconditional(req.x_th, sm, req.mod)
            except ArithmeticError as exc:
                raise NonConvergence(f"snr_db={db}, n={s.n}: {exc}") from exc
            rows.append([db, s.n, s.m_n, req.mod.label, xth_db, "stage1", p1, "closed_form"])
            rows.append([db, s.n, s.m_n, req.mod.label, xth_db, "stage2_cond", p2c, "closed_form"])
            rows.append([db, s.n, s.m_n, req.mod.label, xth_db, "stage2_uncond", p2u, "closed_form"])
    return header, rows


def _rows_mc_ser(req: CurveRequest) -> tuple:
    header = ["snr_db", "n", "m_n", "modulation", "stage", "value", "std_err", "method"]
    rows = []
    for s in req.systems:
        mc = replace(req.mc, snr_grid_db=req.snr_grid_db)
        ests = mcsim.estimate_ser(s, req.mod, mc, ordered=req.ordered, workers=req.workers)
        for db, est in zip(req.snr_grid_db, ests):
            for stage, val, se in est.per_stage:
                rows.append([db, s.n, s.m_n, req.mod.label, f"stage{stage}", val, se, "mc"])
            rows.append([db, s.n, s.m_n, req.mod.label, "total", est.value, est.std_error, "mc"])
    rows.sort(key=lambda r: (r[0], r[1], r[4]))
    return header, rows


def _rows_mc_outage(req: CurveRequest) -> tuple:
    header = ["snr_db", "n", "m_n", "xth_db", "stage", "value", "std_err", "method"]
    rows = []
    xth_db = 10.0 * math.log10(req.x_th)
    for s in req.systems:
        mc = replace(req.mc, snr_grid_db=req.snr_grid_db)
        ests = mcsim.estimate_outage(s, mc, req.x_th, ordered=req.ordered, workers=req.workers)
        for db, est in zip(req.snr_grid_db, ests):
            for stage, val, se in est.per_stage:
                rows.append([db, s.n, s.m_n, xth_db, f"stage{stage}", val, se, "mc"])
    rows.sort(key=lambda r: (r[0], r[1], r[4]))
    return header, rows


def _rows_validate(req: CurveRequest) -> tuple:
    """Closed form vs quadrature oracle across a compact grid; the CSV
    carries every comparison so a failing point is directly visible."""
    header = ["check", "point", "closed_form", "oracle", "abs_diff", "rel_diff", "method"]
    rows = []
    mods = [er.ModulationScheme.bpsk(), er.ModulationScheme.qam(16)]
    for db in req.snr_grid_db:
        omega = _db_to_lin(db)
        for s in req.systems:
            sm = _sys_at(s, omega)
            point = f"snr_db={db};n={s.n};m_n={s.m_n}"
            # stage-1 CDF bound vs the defining integral
            for x in (0.5 * omega, omega, 2.0 * omega):
                cf = cdf_stage1_bound(x, sm)
                res = integrate_finite(
                    lambda t: cdf_snr(x / t, sm.m, sm.omega) * t ** (sm.n - 2.0), 0.0, 1.0)
                if not res.converged:
                    raise NonConvergence(f"stage-1 CDF oracle at {point}, x={x}")
                orc = (sm.n - 1.0) * res.value
                rows.append(["cdf_stage1_bound", f"{point};x={_fmt(x)}", cf, orc,
                             abs(cf - orc), abs(cf - orc) / max(orc, 1e-300), "closed_form"])
            for mod in mods:
                r1 = er.aser_stage1(sm, mod)
                o1 = er.aser_stage1_quadrature(sm, mod)
                rows.append(["aser_stage1", f"{point};{mod.label}", r1.value, o1,
                             abs(r1.value - o1), abs(r1.value - o1) / max(o1, 1e-300), r1.method])
                r2 = er.aser_stage2(sm, mod)
                o2 = er.aser_stage2_quadrature(sm, mod)
                rows.append(["aser_stage2", f"{point};{mod.label}", r2.value, o2,
                             abs(r2.value - o2), abs(r2.value - o2) / max(o2, 1e-300), r2.method])
                if req.corr is not None:
                    rc = er.aser_cross(sm, mod, req.corr)
                    oc = er.aser_cross_quadrature(sm, mod, req.corr)
                    rows.append(["aser_cross", f"{point};{mod.label};rho={req.corr.rho}",
                                 rc.value, oc, abs(rc.value - oc),
                                 abs(rc.value - oc) / max(oc, 1e-300), rc.method])
    return header, rows


_SCENARIO_IMPL = {
    "aser-stage": _rows_aser_stage,
    "aser-total": _rows_aser_total,
    "cross-aser": _rows_cross,
    "outage": _rows_outage,
    "mc-ser": _rows_mc_ser,
    "mc-outage": _rows_mc_outage,
    "validate": _rows_validate,
}


def _check_request(req: CurveRequest) -> None:
    if req.scenario not in SCENARIOS:
        raise CliError(f"unknown scenario {req.scenario!r}")
    if not req.snr_grid_db:
        raise CliError("empty SNR grid")
    if not req.systems:
        raise CliError("no antenna configuration given")
    if req.scenario in ("aser-stage", "aser-total", "cross-aser", "outage", "mc-ser") \
            and req.mod is None:
        raise CliError(f"scenario {req.scenario} needs --mod")
    if req.scenario == "cross-aser" and req.corr is None:
        raise CliError("scenario cross-aser needs --rho")
    if req.scenario in ("outage", "mc-outage") and (req.x_th is None or req.x_th <= 0.0):
        raise CliError(f"scenario {req.scenario} needs --xth-db")
    if req.scenario in ("mc-ser", "mc-outage") and req.mc is None:
        raise CliError(f"scenario {req.scenario} needs --trials")


def run(req: CurveRequest) -> str:
    """Validate the request, compute the rows, write the CSV atomically.
    Returns the output path; raises CliError / NonConvergence."""
    _check_request(req)
    header, rows = _SCENARIO_IMPL[req.scenario](req)
    _write_csv_atomic(req.output_path, header, rows)
    return req.output_path


# ---------------------------------------------------------------------------
# canned figure datasets
# ---------------------------------------------------------------------------

def reproduce_figures(out_dir: str, trials: int = 50000, seed: int = 1234,
                      x_th_db: float = 0.0, workers: int = 1) -> list:
    """Emit the four canned CSV datasets.

    fig1: per-stage ASER, m_N = 1, BPSK, n in {2,3,4}, with MC overlay.
    fig2: total ASER (independence mode), m_N = 2, n = 2,
          modulations {BPSK, 4-QAM, 16-QAM}, with MC overlay.
    fig3: cross-product ASER, n = 2, m_N = 0.5, rho in {0.3, 0.5, 0.7},
          BPSK and 16-QAM.
    fig4: stage-1 / unconditional stage-2 outage, m_N = 2, BPSK,
          n in {2,3,4}, at the given threshold.

    Deterministic for a fixed seed, byte for byte.
    """
    os.makedirs(out_dir, exist_ok=True)
    grid = tuple(float(db) for db in range(0, 21, 2))
    paths = []

    # fig1 -------------------------------------------------------------
    header = ["snr_db", "n", "m_n", "modulation", "stage", "value", "std_err", "method"]
    rows = []
    bpsk = er.ModulationScheme.bpsk()
    for n in (2, 3, 4):
        base = SystemModel(n=n, m_n=1.0, omega=1.0)
        for db in grid:
            sm = _sys_at(base, _db_to_lin(db))
            r1 = er.aser_stage1(sm, bpsk)
            r2 = er.aser_stage2(sm, bpsk)
            rows.append([db, n, 1.0, bpsk.label, "stage1", r1.value, "", r1.method])
            rows.append([db, n, 1.0, bpsk.label, "stage2", r2.value, "", r2.method])
        mc = mcsim.MCConfig(trials=trials, seed=seed, snr_grid_db=grid)
        for db, est in zip(grid, mcsim.estimate_ser(base, bpsk, mc, workers=workers)):
            for stage, val, se in est.per_stage:
                rows.append([db, n, 1.0, bpsk.label, f"stage{stage}", val, se, "mc"])
    p = os.path.join(out_dir, "fig1.csv")
    _write_csv_atomic(p, header, rows)
    paths.append(p)

    # fig2 -------------------------------------------------------------
    header = ["snr_db", "n", "m_n", "modulation", "stage", "value", "std_err", "method"]
    rows = []
    for mod in (er.ModulationScheme.bpsk(), er.ModulationScheme.qam(4),
                er.ModulationScheme.qam(16)):
        base = SystemModel(n=2, m_n=2.0, omega=1.0)
        for db in grid:
            sm = _sys_at(base, _db_to_lin(db))
            bd = er.aser_total(sm, mod)
            rows.append([db, 2, 2.0, mod.label, "total", bd.total, "",
                         "+".join(sorted(set(bd.method_tags.values())))])
        mc = mcsim.MCConfig(trials=trials, seed=seed, snr_grid_db=grid)
        for db, est in zip(grid, mcsim.estimate_ser(base, mod, mc, workers=workers)):
            rows.append([db, 2, 2.0, mod.label, "total", est.value, est.std_error, "mc"])
    p = os.path.join(out_dir, "fig2.csv")
    _write_csv_atomic(p, header, rows)
    paths.append(p)

    # fig3 -------------------------------------------------------------
    header = ["snr_db", "n", "m_n", "modulation", "rho", "value", "method"]
    rows = []
    base = SystemModel(n=2, m_n=0.5, omega=1.0)
    for mod in (er.ModulationScheme.bpsk(), er.ModulationScheme.qam(16)):
        for rho in (0.3, 0.5, 0.7):
            corr = CorrelationModel(rho)
            for db in grid:
                sm = _sys_at(base, _db_to_lin(db))
                r = er.aser_cross(sm, mod, corr)
                rows.append([db, 2, 0.5, mod.label, rho, r.value, r.method])
    p = os.path.join(out_dir, "fig3.csv")
    _write_csv_atomic(p, header, rows)
    paths.append(p)

    # fig4 -------------------------------------------------------------
    header = ["snr_db", "n", "m_n", "modulation", "xth_db", "stage", "value", "method"]
    rows = []
    x_th = _db_to_lin(x_th_db)
    for n in (2, 3, 4):
        base = SystemModel(n=n, m_n=2.0, omega=1.0)
        for db in grid:
            sm = _sys_at(base, _db_to_lin(db))
            p1 = er.outage_stage1(x_th, sm)
            p2u = er.outage_stage2_unconditional(x_th, sm, bpsk)
            rows.append([db, n, 2.0, bpsk.label, x_th_db, "stage1", p1, "closed_form"])
            rows.append([db, n, 2.0, bpsk.label, x_th_db, "stage2_uncond", p2u, "closed_form"])
    p = os.path.join(out_dir, "fig4.csv")
    _write_csv_atomic(p, header, rows)
    paths.append(p)

    return paths


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 with a single-line diagnostic
        raise CliError(message)


def _parse_snr(spec: str) -> tuple:
    """lo:hi:step in dB, inclusive of hi up to float fuzz."""
    try:
        lo, hi, step = (float(p) for p in spec.split(":"))
    except ValueError as exc:
        raise CliError(f"bad --snr {spec!r}, expected lo:hi:step") from exc
    if step <= 0.0 or hi < lo:
        raise CliError(f"bad --snr range {spec!r}")
    out = []
    v = lo
    while v <= hi + 1e-9:
        out.append(round(v, 9))
        v += step
    return tuple(out)


def _parse_n_list(spec: str) -> tuple:
    try:
        return tuple(int(p) for p in spec.split(","))
    except ValueError as exc:
        raise CliError(f"bad --n {spec!r}, expected int or comma list") from exc


def _build_parser() -> _Parser:
    ap = _Parser(prog="vblast-perf",
                 description="Analytic bounds and Monte-Carlo simulation for "
                             "ordered V-BLAST ZF-SIC over Nakagami-m fading")
    ap.add_argument("scenario", choices=SCENARIOS + ("figures",))
    ap.add_argument("--n", default="2", help="receive antennas, int or comma list")
    ap.add_argument("--tx", type=int, default=2, help="transmit antennas (closed forms need 2)")
    ap.add_argument("--mn", type=float, default=1.0, help="per-link Nakagami shape m_N")
    ap.add_argument("--snr", default="0:20:4", help="SNR grid lo:hi:step in dB")
    ap.add_argument("--mod", default=None, help="bpsk | bfsk | dpsk | qam:M")
    ap.add_argument("--rho", type=float, default=None, help="stage SNR correlation in [0,1)")
    ap.add_argument("--xth-db", type=float, default=None, help="outage threshold in dB")
    ap.add_argument("--trials", type=int, default=None, help="Monte-Carlo trials per point")
    ap.add_argument("--seed", type=int, default=1234, help="RNG seed (64-bit unsigned)")
    ap.add_argument("--batch-size", type=int, default=65536)
    ap.add_argument("--workers", type=int, default=1,
                    help="parallel batch workers (does not change results)")
    ap.add_argument("--unordered", action="store_true",
                    help="fixed detection order instead of best-SNR-first")
    ap.add_argument("--out", default=None, help="output CSV path (or directory for figures)")
    return ap


def _request_from_args(args) -> CurveRequest:
    try:
        systems = tuple(SystemModel(n=n, m_n=args.mn, omega=1.0, l=args.tx)
                        for n in _parse_n_list(args.n))
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    mod = None
    if args.mod is not None:
        try:
            mod = er.ModulationScheme.parse(args.mod)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    corr = None
    if args.rho is not None:
        try:
            corr = CorrelationModel(args.rho)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    mc = None
    if args.trials is not None:
        try:
            mc = mcsim.MCConfig(trials=args.trials, seed=args.seed, batch_size=args.batch_size)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    x_th = _db_to_lin(args.xth_db) if args.xth_db is not None else None
    if args.out is None:
        raise CliError("--out is required")
    return CurveRequest(
        scenario=args.scenario,
        systems=systems,
        mod=mod,
        snr_grid_db=_parse_snr(args.snr),
        output_path=args.out,
        corr=corr,
        x_th=x_th,
        mc=mc,
        ordered=not args.unordered,
        workers=args.workers,
    )


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
        if args.scenario == "figures":
            out_dir = args.out or "figures"
            trials = args.trials if args.trials is not None else 50000
            x_th_db = args.xth_db if args.xth_db is not None else 0.0
            paths = reproduce_figures(out_dir, trials=trials, seed=args.seed,
                                      x_th_db=x_th_db, workers=args.workers)
            for p in paths:
                print(p)
            return 0
        req = _request_from_args(args)
        path = run(req)
        print(path)
        return 0
    except CliError as exc:
        print(f"vblast-perf: invalid input: {exc}", file=_sys.stderr)
        return 1
    except NonConvergence as exc:
        print(f"vblast-perf: numeric non-convergence: {exc}", file=_sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
