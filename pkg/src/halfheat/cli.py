"""Command-line front end: ``halfheat <command> CONFIG``.

Exit status is 0 when the command (or check) passes, 2 when a check fails or
a solve does not converge, and 1 on any error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import platform
import sys
import time
from contextlib import nullcontext
from dataclasses import asdict
from pathlib import Path

import numpy as np
import scipy
from threadpoolctl import threadpool_limits

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import ConfigurationError, HalfHeatError, HypothesisViolation
from .grid import BoundaryFunction
from .lorentz import LorentzIndex, norm, quasi_norm_star
from .operators import evaluate_potential, operators_for
from .solver import calibrate, check_admissibility, contraction_report, picard_solve
from . import verify as V

log = logging.getLogger("halfheat")

CHECKS = ("trace_decay", "g1_decay", "time_integral", "self_similarity", "positivity", "symmetry",
          "contraction", "continuous_dependence", "initial_trace")

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path: Path, header, rows, append=False):
    exists = path.exists() and append
    with open(path, "a" if append else "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not exists:
            w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Run:
    """Bookkeeping for one command: output directory, manifest and timing."""

    def __init__(self, cfg: ExperimentConfig, command, check=None):
        self.cfg = cfg
        self.command = command
        self.check = check
        self.out = Path(cfg.output_dir())
        self.out.mkdir(parents=True, exist_ok=True)
        self.start = time.perf_counter()
        self.outputs = []
        self.extra = {}

    def path(self, name):
        p = self.out / name
        if name not in self.outputs:
            self.outputs.append(name)
        return p

    def manifest(self, status, exit_code):
        cfg = self.cfg
        doc = {
            "command": self.command,
            "check": self.check,
            "status": status,
            "exit_code": exit_code,
            "config_path": cfg.path,
            "config_sha256": cfg.sha256,
            "config_text": cfg.text,
            "seed": cfg["output"]["seed"],
            "grid": asdict(cfg.grid_spec()),
            "p": cfg.p,
            "q": cfg.q,
            "outputs": self.outputs,
            "wall_time_seconds": time.perf_counter() - self.start,
            "versions": {
                "halfheat": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            **self.extra,
        }
        with open(self.out / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
            fh.write("\n")


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_norm(cfg: ExperimentConfig, run: Run):
    spec = cfg["norm"]
    if spec["field"] == "potential":
        f = evaluate_potential(cfg.potential(), cfg.grid())
    elif spec["field"] == "data":
        f = cfg.data()
    else:
        raise ConfigurationError(f"[norm] field must be data or potential, got {spec['field']!r}")
    idx = LorentzIndex(spec["p"], spec["r"])
    star, nrm = quasi_norm_star(f, idx), norm(f, idx)
    domain = "boundary" if isinstance(f, BoundaryFunction) else "interior"
    write_csv(run.path("norm.csv"), ["field", "domain", "p", "r", "quasi_norm_star", "norm"],
              [[spec["field"], domain, idx.p, idx.r, star, nrm]])
    print(f"quasi_norm_star = {star:.10g}")
    print(f"norm = {nrm:.10g}")
    run.extra["result"] = {"quasi_norm_star": star, "norm": nrm}
    return "ok", EXIT_PASS


def cmd_evolve(cfg: ExperimentConfig, run: Run):
    u0 = cfg.initial_data()
    sc = cfg.solver_config()
    ops = operators_for(u0.grid, "cell", sc.time_nodes)
    rows = []
    for t in sc.levels():
        inner, trace = ops.semigroup(u0, t), ops.semigroup_trace(u0, t)
        ni, nb = norm(inner, LorentzIndex(sc.p)), norm(trace, LorentzIndex(sc.q))
        rows.append([t, ni, nb, ni + nb])
    write_csv(run.path("evolve.csv"), ["t", "interior_weak_p", "boundary_weak_q", "xpq"], rows)
    for r in rows:
        print("t = %.6g  ||E(t)u0|| = %.10g" % (r[0], r[3]))
    return "ok", EXIT_PASS


def _solve(cfg: ExperimentConfig, run: Run, keep_history=False):
    """Calibrate, check admissibility and run Picard; None solution when refused."""
    u0 = cfg.initial_data()
    sc = cfg.solver_config()
    h = cfg.nonlinearity()
    Vp = cfg.potential()
    ops = operators_for(u0.grid, "cell", sc.time_nodes)
    cal = calibrate(u0.grid, sc, h, ops)
    report = check_admissibility(u0, Vp, sc, cal)
    run.extra["calibration"] = cal.to_dict()
    run.extra["admissibility"] = report.to_dict()
    override = cfg["solver"]["override"]
    if not report.admissible:
        log.warning("inadmissible data: %s", "; ".join(report.reasons))
        if not override:
            print("refused: data are not admissible (" + "; ".join(report.reasons)
                  + "); set override = true in [solver] to run anyway")
            return u0, None
    sol = picard_solve(u0, Vp, h, sc, admissibility=report, override=override, ops=ops,
                       keep_history=keep_history)
    run.extra["solve"] = {"status": sol.status, "corrections": sol.corrections,
                          "ratios": sol.ratios, "differences": sol.differences}
    return u0, sol


def _write_solution(sol, run: Run):
    rows = [[t, ni, nb, ni + nb] for t, (ni, nb) in zip(sol.levels, sol.level_norms())]
    write_csv(run.path("levels.csv"), ["t", "interior_weak_p", "boundary_weak_q", "xpq"], rows)
    hist = [[0, sol.differences[0], math.nan, sol.iterate_norms[0]]]
    hist += [[k + 1, d, r, m] for k, (d, r, m) in
             enumerate(zip(sol.differences[1:], sol.ratios, sol.iterate_norms[1:]))]
    write_csv(run.path("history.csv"), ["k", "difference", "ratio", "iterate_norm"], hist)


def cmd_solve(cfg: ExperimentConfig, run: Run):
    _, sol = _solve(cfg, run)
    if sol is None:
        return "inadmissible", EXIT_FAIL
    _write_solution(sol, run)
    print(f"{sol.status} after {sol.corrections} correction(s); "
          f"sup-level norm {sol.e_norm():.10g}")
    return sol.status, EXIT_PASS if sol.converged else EXIT_FAIL


def cmd_calibrate(cfg: ExperimentConfig, run: Run):
    grid = cfg.grid()
    sc = cfg.solver_config()
    cal = calibrate(grid, sc, cfg.nonlinearity(), operators_for(grid, "cell", sc.time_nodes))
    run.extra["calibration"] = cal.to_dict()
    with open(run.path("calibration.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(cal.to_dict()), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"delta1 = {cal.delta1:.10g}\ndelta2 = {cal.delta2:.10g}\nK = {cal.K:.10g}")
    return "ok", EXIT_PASS


def _fit_times(vcfg):
    lo, hi, count = vcfg["fit_times"]
    return np.geomspace(lo, hi, int(count))


def run_check(name, cfg: ExperimentConfig, run: Run):
    """Return ``(parameters, statistic, threshold, verdict)`` with verdict pass/fail/inconclusive."""
    v = cfg["verify"]
    if name == "trace_decay":
        fit = V.fit_trace_decay(cfg.initial_data(), v["d1"], v["d2"], _fit_times(v), r=v["r"])
        params = {"d1": v["d1"], "d2": v["d2"], "slope": fit.slope, "theory": fit.theory}
        return params, fit.deviation, 0.05, fit.passed(0.05)
    if name == "g1_decay":
        psi = cfg.data()
        if not isinstance(psi, BoundaryFunction):
            raise ConfigurationError("g1_decay needs a boundary data preset")
        fit = V.fit_g1_decay(psi, v["d1"], v["d2"], _fit_times(v), target=v["target"], r=v["r"])
        params = {"d1": v["d1"], "d2": v["d2"], "target": v["target"], "slope": fit.slope,
                  "theory": fit.theory}
        return params, fit.deviation, 0.05, fit.passed(0.05)
    if name == "time_integral":
        rep = V.check_time_integrals(cfg.data(), v["d1"], v["d2"], v["which"],
                                         v["ladder_t_min"], v["ladder_t_max"], v["rungs"],
                                         v["per_octave"], v["tolerance"])
        params = {"which": rep.which, "integral": rep.integral, "constant": rep.constant,
                  "window": rep.windows[-1], "status": rep.status}
        change = rep.relative_changes[-1] if rep.relative_changes else math.nan
        verdict = True if rep.converged else "inconclusive"
        return params, change, rep.tolerance, verdict
    if name == "continuous_dependence":
        u0 = cfg.initial_data()
        sc = cfg.solver_config()
        Vb = evaluate_potential(cfg.potential(), u0.grid)
        eps = v["perturbation"]
        rep = V.check_continuous_dependence(u0, Vb, cfg.nonlinearity(), sc, eps * u0, eps * Vb,
                                            halvings=v["halvings"])
        params = {"lipschitz": rep.lipschitz, "data_distances": rep.data_distances}
        return params, rep.spread, rep.threshold, rep.passed

    u0, sol = _solve(cfg, run)
    if sol is None:
        return {"status": "inadmissible"}, math.nan, math.nan, False
    _write_solution(sol, run)
    if name == "self_similarity":
        rep = V.check_self_similarity(sol, v["lambdas"])
        params = {"lambdas": v["lambdas"], "per_lambda": rep.per_lambda, "compared": rep.compared,
                  "excluded": rep.excluded, "core_radius": rep.core_radius}
        ok = rep.passed
        if v["refine"]:
            coarse = dict(run.extra)
            _, fine = _solve(cfg.refined(), run)
            run.extra = {**coarse, "refined": {k: run.extra.get(k)
                                               for k in ("calibration", "admissibility", "solve")}}
            if fine is None:
                return params, rep.defect, rep.threshold, False
            frep = V.check_self_similarity(fine, v["lambdas"])
            params["refined_defect"] = frep.defect
            ok = ok and frep.defect <= rep.threshold and frep.defect < rep.defect
        return params, rep.defect, rep.threshold, ok
    if name == "positivity":
        rep = V.check_positivity(sol, v["expected_sign"])
        params = {"min": rep.minimum, "max": rep.maximum, "status": rep.status}
        stat = rep.minimum if v["expected_sign"] > 0 else rep.maximum
        return params, stat, 0.0, rep.passed
    if name == "symmetry":
        rep = V.check_symmetry(sol, v["transform"], v["parity"])
        return {"transform": rep.transform, "parity": rep.parity}, rep.defect, rep.threshold, rep.passed
    if name == "contraction":
        if len(sol.differences) < 2:
            raise ConfigurationError("contraction check needs at least one correction")
        rep = contraction_report(sol)
        params = {"ratios": sol.ratios, "flagged": rep.flagged, "status": sol.status}
        return params, rep.max_ratio, 1.0, rep.contracting and sol.converged
    if name == "initial_trace":
        if cfg.n != 3:
            raise ConfigurationError("initial_trace test functions are defined for n = 3")
        tests = V.default_test_functions()
        rep = V.check_weak_initial_trace(sol, tests)
        params = {"times": rep.times, "pairings": rep.pairings}
        return params, float(sum(not m for m in rep.monotone)), 0.0, rep.passed
    raise ConfigurationError(f"unknown check {name!r}; expected one of {CHECKS}")


def cmd_verify(cfg: ExperimentConfig, run: Run, check):
    params, stat, threshold, verdict = run_check(check, cfg, run)
    label = verdict if isinstance(verdict, str) else ("pass" if verdict else "fail")
    write_csv(run.path("report.csv"), ["check", "parameters", "statistic", "threshold", "result"],
              [[check, json.dumps(_jsonable(params), sort_keys=True), stat, threshold, label]],
              append=True)
    run.extra["result"] = {"check": check, "statistic": stat, "threshold": threshold,
                           "result": label, "parameters": params}
    print(f"{check}: statistic = {stat:.6g}, threshold = {threshold:.6g} -> {label}")
    return label, EXIT_FAIL if label == "fail" else EXIT_PASS


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="halfheat", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("norm", "Lorentz norms of the configured field"),
                           ("evolve", "norms of E(t)u0 at the configured levels"),
                           ("solve", "calibrate, check admissibility and run Picard"),
                           ("calibrate", "empirical operator constants on the grid")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="experiment configuration file")
    p = sub.add_parser("verify", help="run one numerical check")
    p.add_argument("check", choices=CHECKS)
    p.add_argument("config", help="experiment configuration file")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = os.environ.get("HALFHEAT_THREADS")
    try:
        limit = threadpool_limits(int(threads)) if threads else nullcontext()
    except ValueError:
        print(f"error: HALFHEAT_THREADS must be an integer, got {threads!r}", file=sys.stderr)
        return EXIT_ERROR
    run = None
    with limit:
        try:
            cfg = load_config(args.config)
            run = Run(cfg, args.command, getattr(args, "check", None))
            if args.command == "verify":
                status, code = cmd_verify(cfg, run, args.check)
            else:
                status, code = {"norm": cmd_norm, "evolve": cmd_evolve, "solve": cmd_solve,
                                "calibrate": cmd_calibrate}[args.command](cfg, run)
        except HypothesisViolation as exc:
            print(f"refused: {exc} (requires rho/(rho-1) < n-1)",
                  file=sys.stderr)
            return EXIT_ERROR
        except HalfHeatError as exc:
            where = f"{args.config}: " if isinstance(exc, ConfigurationError) else ""
            print(f"error: {where}{exc}", file=sys.stderr)
            if run is not None:
                run.extra["error"] = str(exc)
                run.manifest("error", EXIT_ERROR)
            return EXIT_ERROR
    run.manifest(status, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
