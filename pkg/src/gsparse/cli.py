"""Command-line experiment runner.

Subcommands ``simulate``, ``fit``, ``stability``, ``achievability`` and
``report`` read a JSON config (``--config``) layered over a preset
(``--preset``) and write CSV tables with JSON sidecars into ``--out``.
Every CSV starts with a ``#`` line carrying the config hash.

Exit codes: 0 success, 1 pipeline failure, 2 usage or config error.
"""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import runner
from .config import PRESETS, load_config
from .errors import ConfigError, GroupError, GsparseError
from .groups import GroupStructure

log = logging.getLogger("gsparse")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_table(path, header, rows, comment):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r[h]) for h in header])


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer, np.floating)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


class Output:
    """Output directory bound to one config; stamps provenance on every file."""

    def __init__(self, cfg, command):
        self.cfg = cfg
        self.command = command
        self.dir = cfg.out
        os.makedirs(self.dir, exist_ok=True)

    @property
    def comment(self):
        return f"config_hash={self.cfg.hash} command={self.command}"

    def path(self, name):
        return os.path.join(self.dir, name)

    def table(self, name, header, rows):
        write_table(self.path(name), header, rows, self.comment)
        return self.path(name)

    def sidecar(self, name, **payload):
        write_json(self.path(name), {"config_hash": self.cfg.hash, "command": self.command,
                                     "config": self.cfg.to_dict(), **payload})


# ------------------------------------------------------------------ commands

def cmd_simulate(cfg, args):
    out = Output(cfg, "simulate")
    data = runner.simulate(cfg, for_pipeline=False)
    if cfg.experiment == "jak-stat":
        data.to_csv(out.path("series.csv"), comment=out.comment)
        out.sidecar("series.json", params=data.params, rows=len(data.t))
        print(f"wrote {out.path('series.csv')} ({len(data.t)} rows)")
        return EXIT_OK
    times = list(cfg.report.get("snapshot_times") or data.params.get("snapshot_times") or ())
    if cfg.experiment == "advection-diffusion":
        data.to_csv(out.path("field.csv"), comment=out.comment)
        print(f"wrote {out.path('field.csv')}")
    files = []
    for t in times:
        i = data.time_index(t)
        name = f"snapshot_t{t:g}.csv"
        data.to_csv(out.path(name), indices=[i], comment=out.comment)
        files.append(name)
        print(f"wrote {out.path(name)}")
    out.sidecar("field.json", field=data.sidecar(), snapshots=files)
    return EXIT_OK


def cmd_fit(cfg, args):
    out = Output(cfg, "fit")
    groups = None
    if args.groups:
        if not os.path.exists(args.groups):
            raise ConfigError(f"groups file not found: {args.groups}")
        problem, _ = runner.build_problem(cfg)
        groups = GroupStructure.from_json(args.groups)
        if groups.p != problem.p:
            raise GroupError(f"groups cover {groups.p} columns, problem has {problem.p}",
                             [f"expected p = {problem.p}"])
    problem, truth, est = runner.run_fit(cfg, lam=args.lam, groups=groups)
    payload = est.to_dict()
    payload.update(config_hash=cfg.hash, truth=truth)
    write_json(out.path("model.json"), payload)
    if args.save_problem:
        problem.save(out.path("problem"))
    print(f"lambda = {est.lam:.6g}; support groups: {est.support_groups}")
    return EXIT_OK


def cmd_stability(cfg, args):
    out = Output(cfg, "stability")
    run = runner.run_stability(cfg, threads=args.threads)
    run.path.to_csv(out.path("stability_path.csv"), comment=out.comment)
    q = run.path.mean_selected()
    out.table("stability_q.csv", ["lambda", "q"],
              [{"lambda": float(l), "q": float(v)} for l, v in zip(run.path.lambdas, q)])
    out.sidecar("selection.json", selection=run.selection.to_dict(), path=run.path.meta_dict(),
                truth_groups=run.truth_groups, success=run.success)
    print(f"stable set ({len(run.selection.stable_set)}): {run.selection.stable_set}")
    print(f"matches truth: {run.success}")
    return EXIT_OK


def cmd_achievability(cfg, args):
    out = Output(cfg, "achievability")
    curves = runner.achievability_curves(cfg, threads=args.threads)
    files = []
    for label, cur in curves:
        name = f"achievability_{label}.csv"
        cur.to_csv(out.path(name), comment=out.comment)
        files.append(name)
        print(f"{label}: " + ", ".join(f"{x:g}->{p:.2f}" for x, p in zip(cur.x, cur.success_prob)))
    out.sidecar("achievability.json", files=files, trials=cfg.trials,
                sweep=cfg.sweep)
    return EXIT_OK


def cmd_report(cfg, args):
    out = Output(cfg, "report")
    figures = cfg.report.get("figures", True) and not args.no_figures
    run, rows = runner.coefficient_report(cfg, threads=args.threads)
    key = "rate" if cfg.experiment == "jak-stat" else "term"
    header = ([key] if key == "rate" else []) + ["term", "true", "estimate", "error", "status"]
    out.table("coefficient_errors.csv", header, rows)
    run.path.to_csv(out.path("stability_path.csv"), comment=out.comment)
    written = ["coefficient_errors.csv", "stability_path.csv"]
    if figures:
        from . import plotting
        plotting.plot_coefficient_errors(rows, out.path("coefficient_errors.png"), key)
        plotting.plot_stability_path(run.path, out.path("stability_path.png"),
                                     cfg.stability["pi_th"], run.truth_groups)
    if cfg.experiment == "advection-diffusion":
        _, vel = runner.latent_velocity(cfg, run, rows)
        out.table("latent_velocity.csv", list(vel[0]), vel)
        written.append("latent_velocity.csv")
        if figures:
            plotting.plot_latent_velocity(vel, runner.simulate(cfg).lengths["x"],
                                          out.path("latent_velocity.png"))
    if cfg.experiment == "lambda-omega":
        data = runner.simulate(cfg)
        for t in cfg.report.get("snapshot_times") or ():
            i = data.time_index(t)
            name = f"snapshot_t{t:g}.csv"
            data.to_csv(out.path(name), indices=[i], comment=out.comment)
            written.append(name)
            if figures:
                plotting.plot_snapshot(data, i, out.path(f"snapshot_t{t:g}.png"))
    out.sidecar("report.json", files=written, selection=run.selection.to_dict(),
                truth_groups=run.truth_groups, success=run.success)
    for r in rows:
        if r.get("status") != "false_positive":
            print(f"{r.get(key)}: true {r['true']:.6g} estimate {r['estimate']:.6g} "
                  f"error {r['error']:.3g}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "stability": cmd_stability,
    "achievability": cmd_achievability,
    "report": cmd_report,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--preset", choices=sorted(PRESETS), help="figure preset")
    common.add_argument("--experiment", choices=["jak-stat", "advection-diffusion",
                                                 "lambda-omega"])
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("--trials", type=int, help="trials per grid point")
    common.add_argument("--noise", type=float, help="noise level sigma")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="gsparse", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="write simulated data")
    fit = sub.add_parser("fit", parents=[common], help="single gIHT solve")
    fit.add_argument("--lam", type=float, help="regularisation strength (absolute)")
    fit.add_argument("--groups", help="groups JSON replacing the prior's groups")
    fit.add_argument("--save-problem", action="store_true",
                     help="also write the regression problem directory")
    sub.add_parser("stability", parents=[common], help="stability path and stable set")
    sub.add_parser("achievability", parents=[common], help="success-probability sweep")
    rep = sub.add_parser("report", parents=[common], help="coefficient errors and tables")
    rep.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, preset=args.preset, experiment=args.experiment,
                          seed=args.seed, out=args.out, threads=args.threads,
                          trials=args.trials, noise=args.noise)
        return COMMANDS[args.command](cfg, args)
    except GroupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GsparseError as exc:
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
