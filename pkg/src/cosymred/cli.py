"""Command line entry point ``cosymred``.

Exit codes: 0 pass (an empty level set counts as an outcome), 1 a check
failed, 2 bad input, 3 numerical failure.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .errors import CosymError, EmptyLevelSet, InputError
from .integrate import RunConfig, rk4_integrate
from .linalg import lemma45_fuzz, scipy_nullspace_oracle
from .reports import Report, render

REPORT_ENV = "COSYMRED_REPORT_DIR"


def _floats(text, what):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"{what} must be a comma-separated list of numbers, got {text!r}") from None


def _scenario(args):
    from .scenarios import load_scenario, parse_params

    return load_scenario(args.scenario, **parse_params(args.param))


def _cfg(args):
    tol = {}
    for item in getattr(args, "tol", None) or []:
        k, _, v = item.partition("=")
        tol[k] = float(v)
    return RunConfig(h=args.h, T=args.T, seed=args.seed, tolerances=tol,
                     output_dir=_report_dir(args))


def _report_dir(args):
    d = getattr(args, "report_dir", None) or os.environ.get(REPORT_ENV)
    return d or None


def _mu(args, s):
    if args.mu is None:
        return s.mu_default
    return np.array(_floats(args.mu, "--mu"))


def _emit(args, reports, tag):
    text = render(reports, args.json)
    sys.stdout.write(text)
    d = _report_dir(args)
    if d:
        Path(d).mkdir(parents=True, exist_ok=True)
        name = getattr(args, "scenario", None) or tag
        name = Path(name).stem if name.endswith(".ini") else name
        ext = "json" if args.json else "txt"
        (Path(d) / f"{name}-{tag}.{ext}").write_text(text)
    return 0 if all(r.passed for r in reports) else 1


def _on_level_starts(s, mu, n, seed):
    L = s.level_set(mu)
    return L, L.sample(*s.sample_box, n=n, seed=seed)


# ------------------------------------------------------------------ commands

def cmd_validate(args):
    from .symmetry import verify_momentum

    s = _scenario(args)
    pts = s.samples(args.samples, args.seed)
    reps = [s.structure.validate(pts, args.seed), s.modified().validate(pts, args.seed)]
    if s.action is not None:
        reps.append(s.action.consistency_report(pts, args.seed))
        reps.append(verify_momentum(s.action, s.structure, s.momentum, pts, args.seed))
    return _emit(args, reps, "validate")


def cmd_reeb(args):
    from .pipeline import reeb_recovery_report
    from .structures import reeb_invariance_report

    s = _scenario(args)
    pts = s.samples(args.samples, args.seed)
    r = s.structure.reeb_residual(pts)
    reps = [Report("reeb conditions", r < 1e-9, {"max_abs_residual": r}, {"points": pts.shape[1]},
                   args.seed),
            reeb_invariance_report(s.structure, pts[:, :50], args.seed),
            reeb_recovery_report(s, pts, seed=args.seed),
            s.mechanical().kernel_report(pts[:, :50], args.seed)]
    return _emit(args, reps, "reeb")


def cmd_evolve(args):
    s = _scenario(args)
    cfg = _cfg(args)
    if args.x0:
        x0 = np.array(_floats(args.x0, "--x0"))
        if x0.shape != (s.dim,):
            raise InputError(f"--x0 needs {s.dim} values")
    else:
        x0 = s.samples(1, args.seed)[:, 0]
    obs = {"H": s.hamiltonian}
    if s.action is not None:
        JH = s.modified_momentum()
        obs = {f"J{a + 1}_H": Ja for a, Ja in enumerate(JH.components)} | obs
    traj = rk4_integrate(s.evolution_field(), x0, cfg, obs)
    metrics = {f"drift_{k}": traj.drift(k) for k in obs}
    metrics["final_time"] = float(traj.times[-1])
    passed = all(traj.drift(k) < cfg.tol("drift", 1e-6) for k in obs if k != "H")
    details = {"x0": x0, "final": traj.final, "steps": cfg.steps}
    if args.out or cfg.output_dir:
        out = args.out or str(Path(cfg.output_dir) / f"{s.name}-trajectory.csv")
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        traj.to_csv(out)
        details["csv"] = out
    return _emit(args, [Report("evolve", passed, metrics, details, args.seed)], "evolve")


def cmd_noether(args):
    from .pipeline import drift_order_report, noether_drift
    from .symmetry import noether_report

    s = _scenario(args)
    cfg = _cfg(args)
    pts = s.samples(args.samples, args.seed)
    JH = s.modified_momentum(pts)
    st = s.structure
    fields = [st.evolution_field(s.hamiltonian), st.hamiltonian_field(s.hamiltonian), st.reeb_field()]
    c = s.cocycle(pts)
    zero_all = bool(np.all(c.values == 0))
    reps = [noether_report(JH, fields, pts, [True, zero_all, zero_all], args.seed,
                           names=["E_H", "X_H", "R"])]
    _, starts = _on_level_starts(s, _mu(args, s), args.starts, args.seed)
    traj = noether_drift(s, JH, starts, cfg)
    drift = max(traj.drift(f"J{a + 1}_H") for a in range(JH.k))
    reps.append(Report("noether drift", drift < cfg.tol("drift", 1e-6),
                       {"max_abs_drift": drift}, {"T": cfg.T, "h": cfg.h, "starts": args.starts},
                       args.seed))
    reps.append(drift_order_report(s, JH, starts, T=cfg.T))
    return _emit(args, reps, "noether")


def cmd_reduce(args):
    from .pipeline import run_pipeline

    s = _scenario(args)
    cfg = _cfg(args)
    res = run_pipeline(s, _mu(args, s), cfg, n_samples=args.samples, compare=args.compare)
    code = _emit(args, res.reports, "reduce")
    return res.exit_code if res.status == "error" else code


def cmd_compare(args):
    from .reduction import compare_dynamics, reduce

    s = _scenario(args)
    cfg = _cfg(args)
    mu = _mu(args, s)
    L = s.level_set(mu)
    if args.x0:
        x0 = np.array(_floats(args.x0, "--x0"))
        if x0.shape != (s.dim,):
            raise InputError(f"--x0 needs {s.dim} values")
        x0 = L.project(x0)
    else:
        x0 = L.sample(*s.sample_box, n=args.starts, seed=args.seed)
    sl = s.slice_chart()
    red = reduce(L, s.action, sl)
    rep = compare_dynamics(L, s.action, sl, red, x0, cfg.T, cfg.h, tol=cfg.tol("compare", 1e-5))
    return _emit(args, [rep], "compare")


def cmd_formalisms(args):
    from .structures import (
        build_reeb_formalism, formalism_relation_check, hamilton_equations_residual,
        reeb_formalism_field,
    )
    from .fields import sample_points

    s = _scenario(args)
    cfg = _cfg(args)
    d = s.section_data()
    pts = sample_points(d.chart, *s.sample_box, n=args.samples, seed=args.seed)
    reps = []
    if d.Y is not None:
        reps.append(formalism_relation_check(d, pts, args.seed))
    sh = build_reeb_formalism(d)
    R = sh.reeb_field()
    dev = float(np.max(np.abs(R(pts) - reeb_formalism_field(d)(pts))))
    reps.append(Report("reeb formalism field", dev < 1e-8, {"max_abs_deviation": dev},
                       {"points": pts.shape[1]}, args.seed))
    traj = rk4_integrate(R, pts[:, 0], cfg)
    he = hamilton_equations_residual(d, traj)
    reps.append(Report("hamilton equations", he < cfg.tol("hamilton", 1e-6),
                       {"max_abs_residual": he}, {"T": cfg.T, "h": cfg.h}, args.seed))
    return _emit(args, reps, "formalisms")


def cmd_fuzz(args):
    dims = [int(v) for v in _floats(args.dims, "--dims")]
    if any(d < 1 for d in dims):
        raise InputError("dimensions must be positive")
    summary = lemma45_fuzz(dims, args.cases, args.seed, oracle=scipy_nullspace_oracle)
    reps = [Report(f"lemma45 dim {d}", v["failed"] == 0, {"pass_rate": v["passed"] / v["cases"]},
                   v, args.seed) for d, v in summary.items()]
    return _emit(args, reps, "fuzz-lemma45")


def cmd_levelset_cut(args):
    from .levelset import levelset_cut

    s = _scenario(args)
    mu = _mu(args, s)
    plane = {}
    for item in (args.plane or "").split(","):
        if item.strip():
            k, _, v = item.partition("=")
            try:
                plane[k.strip()] = float(v)
            except ValueError:
                raise InputError(f"bad --plane entry {item!r}") from None
    axes = [a.strip() for a in args.axes.split(",")]
    rng = _floats(args.range, "--range")
    if len(rng) == 2:
        rng = rng * 2
    if len(rng) != 4 or len(axes) != 2:
        raise InputError("--axes takes two names and --range two or four numbers")
    out = args.out
    if out is None and _report_dir(args):
        out = str(Path(_report_dir(args)) / f"{s.name}-levelset-cut.dat")
    rep = levelset_cut(s, mu, plane, axes, rng, args.grid, out)
    return _emit(args, [rep], "levelset-cut")


# --------------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="cosymred", description="Cosymplectic dynamics and reduction checks.")
    p.add_argument("--json", action="store_true", help="machine-readable reports")
    p.add_argument("--report-dir", help=f"write reports here (default ${REPORT_ENV})")
    sub = p.add_subparsers(dest="command", required=True)

    def scen(name, fn, help, run=False, mu=False, x0=False):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("scenario", help="built-in name or path to an .ini scenario file")
        sp.add_argument("--param", action="append", metavar="KEY=VALUE",
                        help="override a built-in parameter")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--samples", type=int, default=200)
        sp.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
        sp.add_argument("--report-dir", default=argparse.SUPPRESS)
        if run:
            sp.add_argument("--T", type=float, default=10.0)
            sp.add_argument("--h", type=float, default=1e-3)
            sp.add_argument("--tol", action="append", metavar="NAME=VALUE")
        if mu:
            sp.add_argument("--mu", help="momentum level, comma separated")
        if x0:
            sp.add_argument("--x0", help="start point, comma separated")
        sp.set_defaults(func=fn)
        return sp

    scen("validate", cmd_validate, "validate structure, action and momentum map")
    scen("reeb", cmd_reeb, "Reeb field checks")
    e = scen("evolve", cmd_evolve, "integrate the evolution field", run=True, x0=True)
    e.add_argument("--out", help="trajectory CSV path")
    n = scen("noether", cmd_noether, "first integrals and drift", run=True, mu=True)
    n.add_argument("--starts", type=int, default=10)
    r = scen("reduce", cmd_reduce, "full modification and reduction pipeline", run=True, mu=True)
    r.add_argument("--compare", action="store_true", help="also compare reduced dynamics")
    c = scen("compare", cmd_compare, "ambient vs reduced dynamics", run=True, mu=True, x0=True)
    c.add_argument("--starts", type=int, default=3)
    scen("formalisms", cmd_formalisms, "Reeb and evolution formalisms", run=True)
    lc = scen("levelset-cut", cmd_levelset_cut, "gnuplot data for a planar cut of a level set",
              mu=True)
    lc.add_argument("--plane", default="", help="fixed coordinates, e.g. p3=0,q2=0,q3=0,t=0")
    lc.add_argument("--axes", default="q1,p1", help="two free coordinates spanning the grid")
    lc.add_argument("--range", default="-4,4", help="lo,hi or xlo,xhi,ylo,yhi")
    lc.add_argument("--grid", type=int, default=101)
    lc.add_argument("--out", help="data file path")

    f = sub.add_parser("fuzz-lemma45", help="random instances of the perp dimension lemma")
    f.add_argument("--dims", default="3,5,7")
    f.add_argument("--cases", type=int, default=1000)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
    f.add_argument("--report-dir", default=argparse.SUPPRESS)
    f.set_defaults(func=cmd_fuzz)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EmptyLevelSet as exc:
        rep = Report("level set", True, {"mu": exc.mu}, {"empty": True, "reason": exc.reason})
        _emit(args, [rep], "levelset")
        return 0
    except CosymError as exc:
        print(f"cosymred: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        print(f"cosymred: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
