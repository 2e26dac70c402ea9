"""Command-line driver.

Subcommands: ``sweep``, ``scaling``, ``collapse``, ``oracle-check``, ``constants``.
Data files are CSV or JSON, written atomically; each run also writes a manifest
next to its output. ``--plot DIR`` renders figures from the same data.

Exit codes: 0 ok, 1 invalid arguments, 2 numerical failure, 3 oracle mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import free_fermion as corr
from . import ed
from . import entanglement as ent
from . import scaling
from .free_fermion import THERMODYNAMIC, DivergenceError, ModelPoint, QuadratureError

logger = logging.getLogger("tfim_entanglement")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_ORACLE = 3

SWEEP_COLUMNS = ("N", "lambda", "Ev", "dEv_dlambda", "concurrence", "dC_dlambda")
MODES = ("entropy", "derivative", "concurrence")
WORKERS_ENV = "TFIM_WORKERS"


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# --- formatting and output -------------------------------------------------

def fmt(x) -> str:
    """Round-trip float text: 17 significant digits, ``inf``/``nan`` spelled out."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the target directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(out, text: str) -> None:
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        atomic_write(out, text)


def _sibling(out, suffix: str) -> Path | None:
    if out is None or str(out) == "-":
        return None
    out = Path(out)
    return out.with_name(out.stem + suffix)


@dataclass
class RunManifest:
    command: str
    config: dict
    tool_version: str = __version__
    duration_s: float = 0.0
    checks: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    def write(self, out) -> None:
        text = _json_text(asdict(self))
        path = _sibling(out, ".manifest.json")
        if path is None:
            sys.stderr.write(text)
        else:
            atomic_write(path, text)


# --- argument parsing helpers ----------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_sizes(text) -> list:
    if isinstance(text, (list, tuple)):
        items = list(text)
    else:
        items = [t for t in str(text).replace(" ", "").split(",") if t]
    sizes = []
    for t in items:
        if isinstance(t, str) and t.lower() in ("inf", "thermo", "thermodynamic", "0"):
            sizes.append(THERMODYNAMIC)
            continue
        try:
            n = int(float(t)) if isinstance(t, str) else int(t)
        except ValueError:
            raise CliError(EXIT_USAGE, f"bad size {t!r}") from None
        if n < 3:
            raise CliError(EXIT_USAGE, f"sizes must be >= 3, got {n}")
        sizes.append(n)
    if not sizes:
        raise CliError(EXIT_USAGE, "no sizes given")
    return sizes


def parse_floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    try:
        return [float(t) for t in str(text).replace(" ", "").split(",") if t]
    except ValueError:
        raise CliError(EXIT_USAGE, f"bad number list {text!r}") from None


def _size_label(s) -> int:
    return 0 if s is THERMODYNAMIC else int(s)


def _size_json(s):
    return "THERMODYNAMIC" if s is THERMODYNAMIC else int(s)


def _workers(args) -> int:
    if getattr(args, "workers", None) is not None:
        w = args.workers
    elif os.environ.get(WORKERS_ENV):
        try:
            w = int(os.environ[WORKERS_ENV])
        except ValueError:
            raise CliError(EXIT_USAGE, f"{WORKERS_ENV} must be an integer") from None
    else:
        w = 1
    if w < 1:
        raise CliError(EXIT_USAGE, "worker count must be >= 1")
    return w


def _pmap(func, items, workers: int) -> list:
    """Ordered map, serial for one worker."""
    if workers <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items, chunksize=max(1, len(items) // (4 * workers))))


# --- sweep -----------------------------------------------------------------

@dataclass
class SweepConfig:
    sizes: list
    lambda_min: float
    lambda_max: float
    steps: int
    modes: tuple = MODES
    out: str | None = None
    fmt: str = "csv"
    workers: int = 1

    def validate(self) -> None:
        if not self.sizes:
            raise CliError(EXIT_USAGE, "sizes must be nonempty")
        if not (0.0 <= self.lambda_min < self.lambda_max):
            raise CliError(
                EXIT_USAGE,
                f"need 0 <= lambda_min < lambda_max, got {self.lambda_min}, {self.lambda_max}",
            )
        if self.steps < 2:
            raise CliError(EXIT_USAGE, f"steps must be >= 2, got {self.steps}")
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise CliError(EXIT_USAGE, f"unknown mode(s) {bad}; choose from {MODES}")
        if self.fmt not in ("csv", "json"):
            raise CliError(EXIT_USAGE, f"format must be csv or json, got {self.fmt!r}")

    def lambdas(self) -> np.ndarray:
        return np.linspace(self.lambda_min, self.lambda_max, self.steps)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sizes"] = [_size_json(s) for s in self.sizes]
        d["modes"] = list(self.modes)
        return d


def _diverging(lam: float, size, func) -> float:
    """Sign-carrying infinity for a derivative that diverges at the critical point."""
    probe = func(ModelPoint(lam - 1e-4 if lam >= 1.0 else lam + 1e-4, size))
    return math.copysign(math.inf, probe)


def sweep_point(task) -> dict:
    """One sweep row; module level so worker processes can import it."""
    size, lam, modes = task
    p = ModelPoint(lam, size)
    row = {k: math.nan for k in SWEEP_COLUMNS}
    row["N"] = _size_label(size)
    row["lambda"] = float(lam)
    try:
        c = corr.correlators(p)
        if "entropy" in modes:
            row["Ev"] = ent.von_neumann_entropy(ent.rdm_spectrum(c))
        if "concurrence" in modes:
            row["concurrence"] = ent.concurrence(ent.build_rdm(c))
        if "derivative" in modes:
            s = ent.sample(p)
            row["dEv_dlambda"] = s.d_ev
            if "concurrence" in modes:
                row["dC_dlambda"] = s.d_conc
    except DivergenceError:
        if "derivative" in modes:
            row["dEv_dlambda"] = _diverging(lam, size, ent.entropy_derivative)
            if "concurrence" in modes:
                row["dC_dlambda"] = _diverging(lam, size, ent.concurrence_derivative)
    except (QuadratureError, ent.NonPhysicalStateError, ent.BranchSwitchError, ArithmeticError) as exc:
        return {"error": f"N={_size_label(size)}, lambda={lam!r}: {exc}"}
    return row


def _sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([fmt(r[k]) for k in SWEEP_COLUMNS])
    return buf.getvalue()


def _sweep_json(rows) -> str:
    cols = {k: [r[k] for r in rows] for k in SWEEP_COLUMNS}
    return _json_text({"columns": list(SWEEP_COLUMNS), "data": cols})


def run_sweep(cfg: SweepConfig) -> list[dict]:
    cfg.validate()
    tasks = [(s, float(l), tuple(cfg.modes)) for s in cfg.sizes for l in cfg.lambdas()]
    rows = _pmap(sweep_point, tasks, cfg.workers)
    errors = [r["error"] for r in rows if "error" in r]
    if errors:
        raise CliError(EXIT_NUMERICAL, "numerical failure at " + "; ".join(errors[:5]))
    rows.sort(key=lambda r: (r["N"], r["lambda"]))
    return rows


def cmd_sweep(args) -> int:
    cfg = SweepConfig(
        sizes=parse_sizes(args.sizes),
        lambda_min=args.lambda_min,
        lambda_max=args.lambda_max,
        steps=args.steps,
        modes=tuple(m for m in str(args.mode).split(",") if m),
        out=args.out,
        fmt=args.format,
        workers=_workers(args),
    )
    t0 = time.perf_counter()
    rows = run_sweep(cfg)
    text = _sweep_csv(rows) if cfg.fmt == "csv" else _sweep_json(rows)
    _emit(cfg.out, text)
    outputs = [str(cfg.out)] if cfg.out else []
    if args.plot:
        from .plotting import plot_sweep

        outputs += [str(p) for p in plot_sweep(rows, args.plot)]
    RunManifest("sweep", cfg.to_dict(), duration_s=time.perf_counter() - t0,
                checks={"rows": len(rows)}, outputs=outputs).write(cfg.out)
    return EXIT_OK


# --- scaling ---------------------------------------------------------------

def _lambda_m_task(task):
    n, tol = task
    return scaling.locate_lambda_m(n, tol)


def _critical_task(task):
    n, tol, with_max = task
    d_c = ent.entropy_derivative(1.0, n)
    r = scaling.locate_lambda_m(n, tol) if with_max else None
    return n, d_c, r


def scaling_report(drift_sizes, log_sizes, thermo_exponents, tol=None, workers=1,
                   lambda_m_log=True) -> dict:
    """Pseudo-critical drift, ln N amplitude at lambda_c and lambda_m, ln|lambda - 1| amplitude."""
    a1 = ent.a1_constant()
    report: dict = {"a1_constant": a1, "lambda_c": scaling.LAMBDA_C}
    checks: dict = {}

    lm = _pmap(_lambda_m_task, [(n, tol) for n in drift_sizes], workers) if drift_sizes else []
    report["lambda_m"] = [r.to_dict() for r in lm]
    if lm:
        drift = scaling.fit_power_law([(r.n, 1.0 - r.lambda_m) for r in lm])
        report["drift_fit"] = drift.to_dict()
        checks["drift_exponent_-1.5+-0.1"] = bool(abs(drift.exponent + 1.5) <= 0.1)
        checks["drift_r2_gt_0.999"] = bool(drift.r_squared > 0.999)

    crit = _pmap(_critical_task, [(n, tol, lambda_m_log) for n in log_sizes], workers) if log_sizes else []
    report["critical_samples"] = [
        {
            "n": n,
            "d_ev_at_lambda_c": d,
            "lambda_m": r.lambda_m if r else None,
            "d_ev_at_lambda_m": r.derivative_at_max if r else None,
            "momentum_sum": ent.critical_derivative_sum(n),
        }
        for n, d, r in crit
    ]
    if crit:
        f_c = scaling.fit_log_in_N([(n, d) for n, d, _ in crit])
        report["a1_fit_lambda_c"] = f_c.to_dict()
        checks["a1_slope_lambda_c_within_1pct"] = bool(abs(f_c.amplitude - a1) <= 0.01 * a1)
        if lambda_m_log:
            f_m = scaling.fit_log_in_N([(n, r.derivative_at_max) for n, _, r in crit])
            report["a1_fit_lambda_m"] = f_m.to_dict()
            checks["a1_slope_lambda_m_within_5pct"] = bool(abs(f_m.amplitude - a1) <= 0.05 * a1)

    thermo = []
    for side, sign in (("below", -1.0), ("above", 1.0)):
        for k in thermo_exponents:
            lam = 1.0 + sign * 10.0 ** (-k)
            thermo.append({"side": side, "lambda": lam,
                           "d_ev": ent.entropy_derivative(lam, THERMODYNAMIC)})
    report["thermodynamic_samples"] = thermo
    if thermo_exponents:
        fits = {}
        for side in ("below", "above"):
            pts = [(t["lambda"], t["d_ev"]) for t in thermo if t["side"] == side]
            fits[side] = scaling.fit_log_in_lambda(pts, scaling.LAMBDA_C)
            report[f"a2_fit_{side}"] = fits[side].to_dict()
        a2 = abs(fits["below"].amplitude)
        checks["a2_slope_below_within_5pct"] = bool(abs(a2 - a1) <= 0.05 * a1)
        checks["a2_above_vs_below_within_10pct"] = bool(
            abs(abs(fits["above"].amplitude) - a2) <= 0.10 * a2
        )
    report["checks"] = checks
    return report


def cmd_scaling(args) -> int:
    drift = parse_sizes(args.sizes) if args.sizes else []
    logs = parse_sizes(args.log_sizes) if args.log_sizes else []
    if any(s is THERMODYNAMIC for s in drift + logs):
        raise CliError(EXIT_USAGE, "scaling sizes must be finite")
    if any(n < 8 for n in drift + logs):
        raise CliError(EXIT_USAGE, "scaling sizes must be >= 8")
    thermo = parse_floats(args.thermo_exponents) if args.thermo_exponents else []
    if any(k <= 0 for k in thermo):
        raise CliError(EXIT_USAGE, "thermodynamic exponents must be positive")
    if args.tol is not None and args.tol <= 0:
        raise CliError(EXIT_USAGE, "--tol must be positive")
    config = {
        "sizes": drift, "log_sizes": logs, "thermo_exponents": thermo,
        "tol": args.tol, "lambda_m_log": not args.skip_lambda_m_log, "workers": _workers(args),
    }
    t0 = time.perf_counter()
    try:
        report = scaling_report(drift, logs, thermo, args.tol, config["workers"],
                                lambda_m_log=config["lambda_m_log"])
    except scaling.FitError as exc:
        raise CliError(EXIT_NUMERICAL, f"fit precondition failed: {exc}") from exc
    except (scaling.BoundaryMaximumError, ArithmeticError) as exc:
        raise CliError(EXIT_NUMERICAL, str(exc)) from exc
    _emit(args.out, _json_text(report))
    outputs = [str(args.out)] if args.out else []
    if args.plot:
        from .plotting import plot_scaling

        outputs += [str(p) for p in plot_scaling(report, args.plot)]
    RunManifest("scaling", config, duration_s=time.perf_counter() - t0,
                checks=report["checks"], outputs=outputs).write(args.out)
    return EXIT_OK


# --- collapse --------------------------------------------------------------

def read_collapse_fixture(path) -> list[scaling.CollapseCurve]:
    """Curves from a CSV with columns ``N,lambda,dEv_dlambda,lambda_m``.

    ``lambda_m`` is the collapse centre of that size and must appear among its
    ``lambda`` values.
    """
    groups: dict[int, list[tuple[float, float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"N", "lambda", "dEv_dlambda", "lambda_m"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise CliError(EXIT_USAGE, f"collapse input needs columns {sorted(need)}")
        for row in reader:
            groups.setdefault(int(row["N"]), []).append(
                (float(row["lambda"]), float(row["dEv_dlambda"]), float(row["lambda_m"]))
            )
    curves = []
    for n, pts in sorted(groups.items()):
        lam = np.array([p[0] for p in pts])
        y = np.array([p[1] for p in pts])
        center = pts[0][2]
        hit = np.nonzero(lam == center)[0]
        if hit.size == 0:
            raise CliError(EXIT_USAGE, f"curve N={n} lacks a sample at its centre {center!r}")
        curves.append(scaling.CollapseCurve(n, lam, y, center, float(y[hit[0]])))
    return curves


def _curve_task(task):
    n, half_width, points, center, tol = task
    return scaling.sample_collapse_curve(n, half_width, points, center, tol)


def cmd_collapse(args) -> int:
    if args.input:
        curves = read_collapse_fixture(args.input)
        sizes = [c.n for c in curves]
    else:
        sizes = parse_sizes(args.sizes)
        if any(s is THERMODYNAMIC or s < 8 for s in sizes):
            raise CliError(EXIT_USAGE, "collapse sizes must be finite and >= 8")
    if len(sizes) < 3:
        raise CliError(EXIT_USAGE, f"collapse needs at least 3 sizes, got {len(sizes)}")
    if not 0 < args.nu_min < args.nu_max or args.nu_steps < 3:
        raise CliError(EXIT_USAGE, "need 0 < nu_min < nu_max and nu_steps >= 3")
    if args.points < 3 or args.points % 2 == 0:
        raise CliError(EXIT_USAGE, "--points must be odd and >= 3")
    config = {
        "sizes": list(sizes), "input": args.input, "nu_range": [args.nu_min, args.nu_max],
        "nu_steps": args.nu_steps, "half_width": args.half_width, "points": args.points,
        "center": args.center, "tol": args.tol, "workers": _workers(args),
    }
    t0 = time.perf_counter()
    try:
        if not args.input:
            tasks = [(n, args.half_width, args.points, args.center, args.tol) for n in sizes]
            curves = _pmap(_curve_task, tasks, config["workers"])
        result = scaling.data_collapse(curves, (args.nu_min, args.nu_max), args.nu_steps)
    except scaling.CollapseError as exc:
        raise CliError(EXIT_NUMERICAL, str(exc)) from exc
    except (scaling.BoundaryMaximumError, ArithmeticError) as exc:
        raise CliError(EXIT_NUMERICAL, str(exc)) from exc

    res = result.to_dict()
    grid = result.grid_residuals
    res["interior_minimum"] = bool(0 < int(np.argmin(grid)) < len(grid) - 1)
    res["centers"] = {str(c.n): c.center for c in curves}
    _emit(args.out, _json_text(res))

    transformed = {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("N", "x", "y"))
    for c in curves:
        x = c.n ** (1.0 / result.nu) * (c.lam - c.center)
        y = c.y - c.y_center
        transformed[c.n] = (x, y)
        for xi, yi in zip(x, y):
            w.writerow((fmt(c.n), fmt(xi), fmt(yi)))
    curves_path = _sibling(args.out, ".curves.csv")
    outputs = [str(args.out)] if args.out else []
    if curves_path is not None:
        atomic_write(curves_path, buf.getvalue())
        outputs.append(str(curves_path))
    if args.plot:
        from .plotting import plot_collapse

        outputs.append(str(plot_collapse(transformed, result.nu, args.plot)))
    RunManifest("collapse", config, duration_s=time.perf_counter() - t0,
                checks={"interior_minimum": res["interior_minimum"]},
                outputs=outputs).write(args.out)
    return EXIT_OK


# --- oracle check ----------------------------------------------------------

def oracle_comparisons(n: int, lam: float) -> list[tuple[str, float, float]]:
    """(quantity, free-fermion value, ED value) triples at one point."""
    g = ed.ground_state(lam, n)
    rho = ed.two_site_rdm(g)
    c_ed = ed.rdm_correlators(rho)
    c_ff = corr.correlators(lam, n)
    r_ff = ent.build_rdm(c_ff)
    out = [
        ("ground_energy", corr.ground_energy(lam, n), g.energy),
        ("sz", c_ff.sz, c_ed.sz),
        ("xx", c_ff.xx, c_ed.xx),
        ("yy", c_ff.yy, c_ed.yy),
        ("zz", c_ff.zz, c_ed.zz),
        ("rdm.u_plus", r_ff.u_plus, rho[0, 0]),
        ("rdm.u_minus", r_ff.u_minus, rho[3, 3]),
        ("rdm.w1", r_ff.w1, rho[1, 1]),
        ("rdm.w2", r_ff.w2, rho[2, 2]),
        ("rdm.z_plus", r_ff.z_plus, rho[1, 2]),
        ("rdm.z_minus", r_ff.z_minus, rho[0, 3]),
    ]
    off = np.abs(rho[np.array([0, 0, 1, 1, 2, 2, 3, 3]), np.array([1, 2, 0, 3, 0, 3, 1, 2])]).max()
    out.append(("rdm.off_pattern", 0.0, float(off)))
    w = np.clip(np.linalg.eigvalsh(rho), 0.0, 1.0)
    e_ed = ent.von_neumann_entropy(ent.RdmSpectrum(tuple(float(x) for x in w)))
    out.append(("entropy", ent.von_neumann_entropy(ent.rdm_spectrum(c_ff)), e_ed))
    return out


def run_oracle_check(max_n: int, lambdas, tol: float = 1e-10, momentum_sum_sizes=(1000,)) -> dict:
    if not 4 <= max_n <= 14:
        raise CliError(EXIT_USAGE, f"max_n must be in [4, 14], got {max_n}")
    if not lambdas:
        raise CliError(EXIT_USAGE, "no couplings given")
    if any(l < 0 for l in lambdas):
        raise CliError(EXIT_USAGE, "couplings must be nonnegative")
    rows = []
    failures = []
    for n in range(4, max_n + 1):
        for lam in lambdas:
            for name, ff, exact in oracle_comparisons(n, lam):
                diff = abs(ff - exact)
                ok = bool(diff <= tol)
                rows.append({"n": n, "lambda": lam, "quantity": name, "free_fermion": ff,
                             "exact_diagonalization": exact, "abs_diff": diff, "pass": ok})
                if not ok:
                    failures.append(
                        f"{name} at N={n}, lambda={lam!r}: free-fermion {ff!r} vs ED {exact!r}"
                    )
    msum = []
    for n in momentum_sum_sizes:
        chain = ent.entropy_derivative(1.0, n)
        closed = ent.critical_derivative_sum(n)
        msum.append({"n": n, "chain_rule": chain, "momentum_sum": closed,
                     "relative_discrepancy": abs(closed - chain) / abs(chain)})
    return {
        "tolerance": tol,
        "comparisons": rows,
        "max_abs_diff": max(r["abs_diff"] for r in rows),
        "failures": failures,
        "momentum_sum_vs_chain_rule": msum,
        "passed": not failures,
    }


def cmd_oracle_check(args) -> int:
    lambdas = parse_floats(args.lambdas)
    t0 = time.perf_counter()
    report = run_oracle_check(args.max_n, lambdas, args.tol)
    _emit(args.out, _json_text(report))
    RunManifest(
        "oracle-check",
        {"max_n": args.max_n, "lambdas": lambdas, "tol": args.tol},
        duration_s=time.perf_counter() - t0,
        checks={"passed": report["passed"], "n_comparisons": len(report["comparisons"]),
                "n_failures": len(report["failures"])},
        outputs=[str(args.out)] if args.out else [],
    ).write(args.out)
    if report["failures"]:
        for f in report["failures"][:20]:
            logger.error("oracle mismatch: %s", f)
        raise CliError(EXIT_ORACLE, f"oracle mismatch: {report['failures'][0]}")
    return EXIT_OK


# --- constants -------------------------------------------------------------

def _sig15(x: float) -> float:
    return float(format(x, ".15g"))


def constants_report() -> dict:
    eps = ent.critical_spectrum_closed_form().eps
    return {
        "eps1": _sig15(eps[0]),
        "eps2": _sig15(eps[1]),
        "eps3": _sig15(eps[2]),
        "eps4": _sig15(eps[3]),
        "a1_constant": _sig15(ent.a1_constant()),
        "concurrence_log_constant": _sig15(ent.concurrence_log_constant()),
        "entropy_at_criticality": _sig15(ent.critical_entropy()),
    }


def cmd_constants(args) -> int:
    report = constants_report()
    _emit(args.out, _json_text(report))
    if args.out:
        RunManifest("constants", {}, checks={"eps_sum": math.fsum(
            report[k] for k in ("eps1", "eps2", "eps3", "eps4"))}, outputs=[str(args.out)]
        ).write(args.out)
    return EXIT_OK


# --- entry point -----------------------------------------------------------

def _add_common(p, out_help="output file (default stdout)"):
    p.add_argument("--out", default=None, help=out_help)
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (env {WORKERS_ENV} if unset; default 1)")
    p.add_argument("--plot", metavar="DIR", default=None,
                   help="also render figures into DIR (needs matplotlib)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tfim-ent", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=None, help="JSON file of flag defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("sweep", help="E_v, C and their derivatives on a (N, lambda) grid")
    p.add_argument("--sizes", default="41,101,251,401",
                   help="comma-separated sizes; 'inf' for the thermodynamic limit")
    p.add_argument("--lambda-min", type=float, default=0.6)
    p.add_argument("--lambda-max", type=float, default=1.4)
    p.add_argument("--steps", type=int, default=201)
    p.add_argument("--mode", default=",".join(MODES),
                   help=f"comma-separated subset of {','.join(MODES)}")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scaling", help="lambda_m drift, A1 and A2 logarithmic amplitudes")
    p.add_argument("--sizes", default="50,100,200,400,800,1600,3200",
                   help="sizes for the lambda_m drift fit")
    p.add_argument("--log-sizes", default="1000,10000,100000,1000000",
                   help="sizes for the ln N fits at lambda_c and lambda_m")
    p.add_argument("--thermo-exponents", default="2,2.5,3,3.5,4",
                   help="k values; infinite-chain samples at lambda = 1 -+ 10^-k")
    p.add_argument("--tol", type=float, default=None,
                   help="lambda_m bracket width (default 1e-3 N^-1.5)")
    p.add_argument("--skip-lambda-m-log", action="store_true",
                   help="skip locating lambda_m for --log-sizes")
    _add_common(p, "JSON report (default stdout)")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("collapse", help="finite-size data collapse of dE_v/dlambda")
    p.add_argument("--sizes", default="41,101,251,401,801")
    p.add_argument("--input", default=None,
                   help="CSV of curves (N,lambda,dEv_dlambda,lambda_m) instead of computing them")
    p.add_argument("--nu-min", type=float, default=0.8)
    p.add_argument("--nu-max", type=float, default=1.2)
    p.add_argument("--nu-steps", type=int, default=41)
    p.add_argument("--half-width", type=float, default=1.0,
                   help="sample lambda_m +- half_width / N")
    p.add_argument("--points", type=int, default=41, help="samples per curve (odd)")
    p.add_argument("--center", choices=("lambda_m", "lambda_c"), default="lambda_m")
    p.add_argument("--tol", type=float, default=None)
    _add_common(p, "JSON result (default stdout); curves go to <stem>.curves.csv")
    p.set_defaults(func=cmd_collapse)

    p = sub.add_parser("oracle-check", help="free-fermion engine against exact diagonalization")
    p.add_argument("--max-n", type=int, default=12)
    p.add_argument("--lambdas", default="0.2,0.5,1.0,1.5,3.0")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("constants", help="closed-form critical constants")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_constants)
    return parser


def _apply_config(parser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                conf = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(EXIT_USAGE, f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(conf, dict):
            raise CliError(EXIT_USAGE, "config file must hold a JSON object")
        explicit = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
        for key, value in conf.items():
            dest = key.replace("-", "_")
            if not hasattr(args, dest):
                raise CliError(EXIT_USAGE, f"unknown config key {key!r}")
            if dest not in explicit:
                setattr(args, dest, value)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"tfim-ent: {exc}\n")
        return exc.code
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
