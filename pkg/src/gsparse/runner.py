"""End-to-end experiment runs driven by an :class:`ExperimentConfig`.

All randomness flows from the master seed: trial ``t`` at grid point ``i``
uses seeds drawn from ``SeedSequence([seed, i, t])`` for the noise, the
row sample and the stability subsamples, so results do not depend on the
order in which trials run.
"""

import json
import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .giht import PreparedProblem, SolverOptions, debias, giht_solve
from .pipelines import (Sampling, advection_problem, jak_stat_problem,
                        reaction_diffusion_problem, truth_groups)
from .preprocess import DerivativeSpec, NoiseSpec, coefficient_errors
from .simulate import (SimConfig, advection_velocity, simulate_advection_diffusion,
                       simulate_jak_stat, simulate_lambda_omega)
from .stability import achievability, select_stable, stability_path

__all__ = [
    "trial_seeds",
    "sim_config",
    "simulate",
    "build_problem",
    "solver_options",
    "StabilityRun",
    "run_stability",
    "run_fit",
    "achievability_curves",
    "coefficient_report",
    "latent_velocity",
    "JAK_STAT_RATE_TERMS",
]

log = logging.getLogger(__name__)

# (rate label, qualified column, factor): rate = factor * coefficient
JAK_STAT_RATE_TERMS = [
    ("k1-", "x1:c*x1", -1.0), ("k1+", "x2:c*x1", 1.0),
    ("k2-", "x2:x2^2", -1.0), ("k2+", "x3:x2^2", 2.0),
    ("k3-", "x3:x3", -1.0), ("k3+", "x4:x3", 1.0),
    ("k4-", "x4:x4", -1.0), ("k4+", "x1:x4", 0.5),
]

_SIMULATORS = {
    "jak-stat": (SimConfig.jak_stat, simulate_jak_stat),
    "advection-diffusion": (SimConfig.advection_diffusion, simulate_advection_diffusion),
    "lambda-omega": (SimConfig.lambda_omega, simulate_lambda_omega),
}

_sim_cache = {}


def trial_seeds(seed, trial=0, point=0):
    """Independent integer seeds for noise, row sampling and subsampling."""
    a, b, c = np.random.SeedSequence([int(seed), int(point), int(trial)]).generate_state(3)
    return {"noise": int(a), "sampling": int(b), "stability": int(c)}


def _deriv(cfg, key, default):
    spec = cfg.derivatives.get(key, default)
    return DerivativeSpec(int(spec[0]), int(spec[1]))


def sim_config(cfg, n_points=None, for_pipeline=True):
    """Simulator settings for ``cfg``.

    For JAK-STAT without an explicit ``n_t`` the time grid holds the
    requested number of rows, plus the samples a derivative window of
    width ``w`` loses at the ends (``w - 1``) when the pipeline estimates
    derivatives from data.
    """
    make, _ = _SIMULATORS[cfg.experiment]
    sim = dict(cfg.sim)
    if cfg.experiment == "jak-stat" and "n_t" not in sim:
        n = int(n_points or cfg.sampling.get("n_points") or 200)
        pad = 0 if (cfg.exact or not for_pipeline) else _deriv(cfg, "deriv", (11, 4)).window - 1
        sim["n_t"] = n + pad
    try:
        return make(**sim)
    except TypeError as exc:
        raise ConfigError(f"bad sim settings: {exc}") from exc


def simulate(cfg, n_points=None, for_pipeline=True):
    """Run (or reuse) the simulation for ``cfg``; simulators are deterministic."""
    sc = sim_config(cfg, n_points, for_pipeline)
    key = json.dumps(sc.to_dict(), sort_keys=True, default=list)
    if key not in _sim_cache:
        if len(_sim_cache) > 8:
            _sim_cache.clear()
        _sim_cache[key] = _SIMULATORS[cfg.experiment][1](sc)
    return _sim_cache[key]


def build_problem(cfg, trial=0, point=0, n_points=None, noise=None, data=None):
    """Regression problem and true coefficients for one trial."""
    seeds = trial_seeds(cfg.seed, trial, point)
    n_points = n_points if n_points is not None else cfg.sampling.get("n_points")
    noise = NoiseSpec(float(cfg.noise if noise is None else noise), seed=seeds["noise"])
    if data is None:
        data = simulate(cfg, n_points)
    common = dict(prior=cfg.prior, exact=cfg.exact, smooth_states=cfg.smooth_states,
                  balance=cfg.balance)
    if cfg.experiment == "jak-stat":
        return jak_stat_problem(data, noise, deriv=_deriv(cfg, "deriv", (11, 4)),
                                sampling=Sampling(n_points, seed=seeds["sampling"]), **common)
    sampling = Sampling(n_points, cfg.sampling.get("n_locations"), seed=seeds["sampling"])
    builder = advection_problem if cfg.experiment == "advection-diffusion" \
        else reaction_diffusion_problem
    return builder(data, noise, sampling=sampling, deriv_t=_deriv(cfg, "deriv_t", (11, 4)),
                   deriv_x=_deriv(cfg, "deriv_x", (9, 4)), **common)


def solver_options(cfg, lam=0.0):
    opts = dict(cfg.solver)
    opts.pop("lam", None)
    try:
        return SolverOptions(lam=lam, **opts)
    except TypeError as exc:
        raise ConfigError(f"bad solver settings: {exc}") from exc


@dataclass
class StabilityRun:
    problem: object
    truth: dict
    truth_groups: list
    path: object
    selection: object

    @property
    def success(self):
        return set(self.selection.stable_set) == set(self.truth_groups)


def run_stability(cfg, trial=0, point=0, n_points=None, noise=None, threads=None):
    """Stability path and stable set for one trial."""
    problem, truth = build_problem(cfg, trial, point, n_points, noise)
    st = cfg.stability
    path = stability_path(problem, B=int(st["B"]), fraction=float(st["fraction"]),
                          n_lambda=int(st["n_lambda"]),
                          seed=trial_seeds(cfg.seed, trial, point)["stability"],
                          opts=solver_options(cfg), threads=int(threads or cfg.threads))
    path.meta.update({"config_hash": cfg.hash, "trial": trial, "point": point})
    if path.failures:
        log.warning("%d solver failures excluded from the importance averages", path.failures)
    sel = select_stable(path, float(st["pi_th"]), float(st["E_fp"]))
    return StabilityRun(problem, truth, sorted(truth_groups(problem, truth)), path, sel)


def run_fit(cfg, lam=None, groups=None):
    """Single gIHT solve at ``lam`` (default: ``fit`` section of the config)."""
    problem, truth = build_problem(cfg)
    if groups is not None:
        problem = problem.with_groups(groups)
    if lam is None:
        lam = cfg.fit.get("lam")
    if lam is None:
        lam = float(cfg.fit.get("lam_fraction", 0.5)) * \
            PreparedProblem(problem, solver_options(cfg)).lambda_max()
    return problem, truth, giht_solve(problem, solver_options(cfg, lam))


def achievability_curves(cfg, trials=None, threads=None):
    """Success-probability curves over the configured sweep.

    Returns a list of ``(label, AchievabilityCurve)``; an ``n_points`` sweep
    yields one curve per entry of ``sweep.noises`` (default: the config's
    noise level).
    """
    sweep = cfg.sweep
    if not sweep or not sweep.get("values"):
        raise ConfigError("achievability needs sweep.param and sweep.values")
    trials = int(trials or cfg.trials)
    xs = list(sweep["values"])
    curves = []
    if sweep["param"] == "n_points":
        noises = sweep.get("noises") or [cfg.noise]
        for j, sigma in enumerate(noises):
            def trial_fn(x, t, sigma=sigma, j=j):
                point = j * len(xs) + xs.index(x)
                run = run_stability(cfg, t, point, n_points=int(x), noise=sigma, threads=threads)
                return run.selection.stable_set

            truth = _truth_names(cfg)
            curves.append((f"noise{sigma:g}",
                           achievability(trial_fn, xs, trials, truth, "n_points", log)))
    else:
        def trial_fn(x, t):
            run = run_stability(cfg, t, xs.index(x), noise=float(x), threads=threads)
            return run.selection.stable_set

        curves.append(("noise", achievability(trial_fn, xs, trials, _truth_names(cfg),
                                              "noise", log)))
    return curves


def _truth_names(cfg):
    problem, truth = build_problem(cfg)
    return sorted(truth_groups(problem, truth))


def coefficient_report(cfg, run=None, threads=None):
    """Coefficients de-biased on the stable set, compared with the truth.

    Returns ``(run, rows)``. For JAK-STAT the rows are the eight rate
    constants (consuming ``k-`` and producing ``k+`` terms separately);
    otherwise one row per true term plus any false positives.
    """
    run = run or run_stability(cfg, threads=threads)
    problem = run.problem
    cols = sorted(int(j) for name in run.selection.stable_set
                  for j in problem.groups.group(name).indices)
    coef = debias(problem, cols)
    est = _Estimate(problem.column_names, coef)
    if cfg.experiment != "jak-stat":
        return run, coefficient_errors(est, run.truth)
    index = {n: j for j, n in enumerate(problem.column_names)}
    rows = []
    for rate, term, factor in JAK_STAT_RATE_TERMS:
        true = factor * run.truth[term]
        value = factor * float(coef[index[term]])
        rows.append(dict(rate=rate, term=term, true=true, estimate=value,
                         error=abs(value - true) / abs(true),
                         status="ok" if coef[index[term]] != 0 else "miss"))
    return run, rows


@dataclass
class _Estimate:
    column_names: list
    coefficients: np.ndarray


def latent_velocity(cfg, run=None, rows=None, threads=None):
    """Per-location velocity estimates from the advection-diffusion fit.

    With ``u_t = -c_x u - c u_x + D u_xx`` at location ``x_i`` the velocity
    is minus the ``u_x`` coefficient and its slope minus the ``u``
    coefficient. Both species give an estimate; ``c_hat`` is their mean.
    """
    if cfg.experiment != "advection-diffusion":
        raise ConfigError("latent velocity is defined for advection-diffusion only")
    if rows is None:
        run, rows = coefficient_report(cfg, run, threads)
    problem = run.problem
    names = problem.column_names
    index = {n: j for j, n in enumerate(names)}
    cols = sorted(int(j) for name in run.selection.stable_set
                  for j in problem.groups.group(name).indices)
    coef = debias(problem, cols)
    xs = np.asarray(problem.metadata["x_locations"])
    L = simulate(cfg).lengths["x"]
    c, cx = advection_velocity(xs, L)
    out = []
    for i, x in enumerate(xs):
        cu = -coef[index[f"u@{i}:u_x"]]
        cv = -coef[index[f"v@{i}:v_x"]]
        cxu = -coef[index[f"u@{i}:u"]]
        cxv = -coef[index[f"v@{i}:v"]]
        out.append(dict(x=float(x), c_true=float(c[i]), c_hat_u=float(cu), c_hat_v=float(cv),
                        c_hat=float((cu + cv) / 2), c_x_true=float(cx[i]),
                        c_x_hat=float((cxu + cxv) / 2)))
    return run, out
