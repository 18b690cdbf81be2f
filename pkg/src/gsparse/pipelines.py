"""Turn simulated data into grouped regression problems.

Each builder adds noise, estimates derivatives by local polynomial fits
(or takes them exactly from the simulator when ``exact=True``), samples
rows, stacks the per-equation blocks and attaches the requested prior.
It also returns the true coefficients keyed by qualified column name.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .dictionary import (JAK_STAT_ROSTER, Dictionary, advection_roster, evaluate_terms,
                         reaction_diffusion_roster, stack_blocks)
from .errors import PreprocessError
from .groups import (conservation_groups, singleton_groups, spatial_groups,
                     symmetry_groups, union_groups)
from .preprocess import DerivativeSpec, NoiseSpec, add_noise, polyfit_derivative
from .problem import RegressionProblem
from .simulate import (SpatioTemporalField, TimeSeriesSet, advection_rhs, advection_velocity,
                       jak_stat_rhs, lambda_omega_rhs, spectral_derivative)

__all__ = [
    "Sampling",
    "jak_stat_problem",
    "advection_problem",
    "reaction_diffusion_problem",
    "assemble_problem",
    "PRIOR_MODES",
    "truth_groups",
]

PRIOR_MODES = {
    "jak-stat": ("none", "conservation"),
    "advection-diffusion": ("none", "spatial", "spatial+equivalence"),
    "lambda-omega": ("none", "symmetry"),
}

JAK_STAT_PAIRS = [
    ("g1", "c*x1", "x1", "x2"),
    ("g2", "x2^2", "x2", "x3"),
    ("g3", "x3", "x3", "x4"),
    ("g4", "x4", "x1", "x4"),
]


@dataclass(frozen=True)
class Sampling:
    """Row sampling: points per block (``None`` = all) and the RNG seed."""

    n_points: int = None
    n_locations: int = None
    seed: int = 0


def _check_prior(model, prior):
    if prior not in PRIOR_MODES[model]:
        raise PreprocessError(f"prior {prior!r} not available for {model}; "
                              f"choose from {PRIOR_MODES[model]}")


def _finish(problem, balance):
    problem.metadata["balanced"] = bool(balance)
    return problem.balanced() if balance else problem


def _meta(model, prior, noise, sampling, **extra):
    return {"model": model, "prior": prior, "noise": asdict(noise),
            "sampling": asdict(sampling), **extra}


# ---------------------------------------------------------------- JAK-STAT

def jak_stat_problem(ts, noise=NoiseSpec(), prior="conservation", deriv=DerivativeSpec(11, 4),
                     exact=False, smooth_states=False, roster=JAK_STAT_ROSTER,
                     sampling=Sampling(), balance=False):
    """Four stacked blocks (one per species) sharing the same term roster.

    The activation signal ``c`` is used as given; only the species
    concentrations are corrupted.
    """
    _check_prior("jak-stat", prior)
    species = ["x1", "x2", "x3", "x4"]
    t = ts.t
    dt = float(t[1] - t[0])
    clean = {s: ts.series[s] for s in species}
    noisy = add_noise(clean, noise)
    if exact:
        states = clean
        rhs = jak_stat_rhs(np.array([clean[s] for s in species]), ts.series["c"],
                           ts.params.get("rates", (0.021, 2.46, 0.2066, 0.10658)),
                           ts.params.get("rates_plus"))
        targets = [rhs[i] for i in range(4)]
    else:
        states = ({s: polyfit_derivative(noisy[s], dt, deriv, 0) for s in species}
                  if smooth_states else noisy)
        targets = [polyfit_derivative(noisy[s], dt, deriv, 1) for s in species]
    rows = np.arange(len(t)) if exact else _interior(len(t), deriv.window)
    if sampling.n_points is not None and sampling.n_points < len(rows):
        rng = np.random.default_rng(sampling.seed)
        rows = np.sort(rng.choice(rows, sampling.n_points, replace=False))
    values = {**{s: states[s][rows] for s in species}, "c": ts.series["c"][rows]}
    theta = evaluate_terms(roster, values)
    blocks = [Dictionary(theta, list(roster)) for _ in species]
    comp, target = stack_blocks(blocks, [tg[rows] for tg in targets], species, uniform=True)
    if prior == "conservation":
        gs = conservation_groups(comp, JAK_STAT_PAIRS)
    else:
        gs = singleton_groups(comp)
    k = ts.params.get("rates", (0.021, 2.46, 0.2066, 0.10658))
    kp = ts.params.get("rates_plus") or k
    truth = {"x1:c*x1": -k[0], "x2:c*x1": kp[0], "x2:x2^2": -k[1], "x3:x2^2": kp[1] / 2,
             "x3:x3": -k[2], "x4:x3": kp[2], "x1:x4": 2 * kp[3], "x4:x4": -k[3]}
    meta = _meta("jak-stat", prior, noise, sampling, deriv=asdict(deriv), exact=exact,
                 smooth_states=smooth_states, roster=[str(l) for l in roster])
    return _finish(RegressionProblem(comp, target, gs, meta), balance), truth


# ------------------------------------------------------ advection-diffusion

def _interior(n, window):
    half = window // 2
    if n <= 2 * half:
        raise PreprocessError(f"{n} samples leave no interior for window {window}")
    return np.arange(half, n - half)


def advection_problem(field, noise=NoiseSpec(), prior="spatial+equivalence",
                      sampling=Sampling(n_points=75, n_locations=10),
                      deriv_t=DerivativeSpec(11, 4), deriv_x=DerivativeSpec(9, 4),
                      exact=False, smooth_states=False, balance=False):
    """Location blocks for both species of the 1-D transport model.

    Columns are laid out species-major: all location blocks of ``u``, then
    those of ``v``; each block has the same 15-operator roster.
    """
    _check_prior("advection-diffusion", prior)
    species = ["u", "v"]
    dx = field.spacing["x"]
    dt = field.dt
    L = field.lengths["x"]
    noisy = add_noise({s: field.data[s] for s in species}, noise)
    D = {"u": field.params.get("D_u", 0.25), "v": field.params.get("D_v", 0.5)}
    derived = {}
    for s in species:
        if exact:
            u = field.data[s]
            c, _ = advection_velocity(field.coords["x"], L)
            k = 2 * np.pi * np.fft.rfftfreq(u.shape[1], d=dx)
            derived[s] = {
                "": u,
                "x": spectral_derivative(u, L, axis=1, order=1),
                "xx": spectral_derivative(u, L, axis=1, order=2),
                "t": advection_rhs(u, c, np.full(u.shape[0], D[s]), k),
            }
        else:
            u = noisy[s]
            # with smoothing on, space derivatives see the time-smoothed field
            # and the time derivative sees the space-smoothed one
            ut = polyfit_derivative(u, dt, deriv_t, 0, axis=0) if smooth_states else u
            ux = polyfit_derivative(u, dx, deriv_x, 0, axis=1, periodic=True) \
                if smooth_states else u
            derived[s] = {
                "": polyfit_derivative(ut, dx, deriv_x, 0, axis=1, periodic=True)
                if smooth_states else u,
                "x": polyfit_derivative(ut, dx, deriv_x, 1, axis=1, periodic=True),
                "xx": polyfit_derivative(ut, dx, deriv_x, 2, axis=1, periodic=True),
                "t": polyfit_derivative(ux, dt, deriv_t, 1, axis=0),
            }
    rng = np.random.default_rng(sampling.seed)
    nt, nx = field.data["u"].shape
    n_loc = sampling.n_locations or 10
    locs = np.sort(rng.choice(nx, n_loc, replace=False))
    t_pool = np.arange(nt) if exact else _interior(nt, deriv_t.window)
    n_pts = sampling.n_points or len(t_pool)
    blocks, targets, names = [], [], []
    for s in species:
        roster = advection_roster(s)
        for i, xi in enumerate(locs):
            ti = np.sort(rng.choice(t_pool, n_pts, replace=False))
            vals = {(s, d): derived[s][d][ti, xi] for d in ("", "x", "xx")}
            blocks.append(Dictionary(evaluate_terms(roster, vals), roster))
            targets.append(derived[s]["t"][ti, xi])
            names.append(f"{s}@{i}")
    comp, target = stack_blocks(blocks, targets, names, uniform=True)
    p = len(advection_roster("u"))
    if prior == "none":
        gs = singleton_groups(comp)
    else:
        gu = spatial_groups(p, n_loc, advection_roster("u"), prefix="u:")
        gv = spatial_groups(p, n_loc, advection_roster("v"), prefix="v:")
        pairing = []
        if prior == "spatial+equivalence":
            pairing = [(f"u:{a}", f"v:{b}") for a, b in zip(advection_roster("u"),
                                                           advection_roster("v"))]
        gs = union_groups(gu, gv, pairing)
    c, cx = advection_velocity(field.coords["x"][locs], L)
    # the slope vanishes analytically at x = L/2; drop the rounding residue
    cx = np.where(np.abs(cx) < 1e-12, 0.0, cx)
    truth = {}
    for s in species:
        for i in range(n_loc):
            truth[f"{s}@{i}:{s}"] = -cx[i]
            truth[f"{s}@{i}:{s}_x"] = -c[i]
            truth[f"{s}@{i}:{s}_xx"] = D[s]
    meta = _meta("advection-diffusion", prior, noise, sampling, exact=exact,
                 deriv_t=asdict(deriv_t), deriv_x=asdict(deriv_x), smooth_states=smooth_states,
                 locations=locs.tolist(), x_locations=field.coords["x"][locs].tolist())
    return _finish(RegressionProblem(comp, target, gs, meta), balance), truth


# ---------------------------------------------------------- lambda-omega

def reaction_diffusion_problem(field, noise=NoiseSpec(), prior="symmetry",
                               sampling=Sampling(n_points=1000), deriv_t=DerivativeSpec(11, 4),
                               deriv_x=DerivativeSpec(9, 4), exact=False, smooth_states=False,
                               balance=False):
    """Two blocks (the u- and v-equations) over randomly sampled space-time points."""
    _check_prior("lambda-omega", prior)
    species = ["u", "v"]
    dt = field.dt
    sp = field.spacing
    L = field.lengths
    rng = np.random.default_rng(sampling.seed)
    nt = len(field.t)
    shape = field.data["u"].shape[1:]
    t_pool = np.arange(nt) if exact else _interior(nt, deriv_t.window)
    n_pts = sampling.n_points or 1000
    pts = np.column_stack([rng.choice(t_pool, n_pts)] +
                          [rng.integers(0, n, n_pts) for n in shape])
    flat = np.ravel_multi_index(tuple(pts.T), (nt,) + shape)
    if len(np.unique(flat)) < n_pts:
        # redraw duplicates deterministically
        flat = np.unique(flat)
        pool = np.setdiff1d(np.ravel_multi_index(
            np.meshgrid(t_pool, *[np.arange(n) for n in shape], indexing="ij"),
            (nt,) + shape).ravel(), flat)
        flat = np.sort(np.concatenate([flat, rng.choice(pool, n_pts - len(flat), replace=False)]))
        pts = np.column_stack(np.unravel_index(flat, (nt,) + shape))
    idx = tuple(pts.T)
    vals = {}
    if exact:
        u, v = field.data["u"], field.data["v"]
        for s, a in (("u", u), ("v", v)):
            vals[(s, "")] = a[idx]
            for ax_i, ax in enumerate(field.axes):
                vals[(s, ax)] = spectral_derivative(a, L[ax], axis=ax_i + 1, order=1)[idx]
                vals[(s, ax * 2)] = spectral_derivative(a, L[ax], axis=ax_i + 1, order=2)[idx]
        p = field.params

        def lap(f):
            return sum(spectral_derivative(f, L[ax], axis=i, order=2)
                       for i, ax in enumerate(field.axes))

        ut = np.empty(n_pts)
        vt = np.empty(n_pts)
        for ti in np.unique(pts[:, 0]):
            rows = pts[:, 0] == ti
            a, b = lambda_omega_rhs(u[ti], v[ti], p.get("beta", 1.0), p.get("D_u", 0.1),
                                    p.get("D_v", 0.1), lap)
            sp_idx = tuple(pts[rows, 1:].T)
            ut[rows] = a[sp_idx]
            vt[rows] = b[sp_idx]
        targets = [ut, vt]
    else:
        noisy = add_noise({s: field.data[s] for s in species}, noise)
        targets = []
        for s in species:
            a = noisy[s]
            if smooth_states:
                sm = a
                for ax_i, ax in enumerate(field.axes):
                    sm = polyfit_derivative(sm, sp[ax], deriv_x, 0, axis=ax_i + 1, periodic=True)
                vals[(s, "")] = sm[idx]
            else:
                vals[(s, "")] = a[idx]
            for ax_i, ax in enumerate(field.axes):
                for order in (1, 2):
                    d = polyfit_derivative(a, sp[ax], deriv_x, order, axis=ax_i + 1, periodic=True)
                    vals[(s, ax * order)] = d[idx]
            targets.append(polyfit_derivative(a, dt, deriv_t, 1, axis=0)[idx])
    roster = reaction_diffusion_roster(species)
    theta = evaluate_terms(roster, vals)
    blocks = [Dictionary(theta, list(roster)), Dictionary(theta.copy(), list(roster))]
    comp, target = stack_blocks(blocks, targets, species, uniform=True)
    if prior == "symmetry":
        gs = symmetry_groups(blocks[0], blocks[1], ("u", "v"))
    else:
        gs = singleton_groups(comp)
    beta = field.params.get("beta", 1.0)
    Du, Dv = field.params.get("D_u", 0.1), field.params.get("D_v", 0.1)
    truth = {"u:u": 1.0, "u:u^3": -1.0, "u:u*v^2": -1.0, "u:u^2*v": beta, "u:v^3": beta,
             "u:u_xx": Du, "u:u_yy": Du,
             "v:v": -1.0, "v:v^3": 1.0, "v:u^2*v": 1.0, "v:u^3": -beta, "v:u*v^2": -beta,
             "v:v_xx": Dv, "v:v_yy": Dv}
    meta = _meta("lambda-omega", prior, noise, sampling, exact=exact, deriv_t=asdict(deriv_t),
                 deriv_x=asdict(deriv_x), smooth_states=smooth_states)
    return _finish(RegressionProblem(comp, target, gs, meta), balance), truth


def assemble_problem(data, dict_spec=None, groups_spec="auto", sampling=Sampling(), **kw):
    """Dispatch on the type of ``data`` to the matching builder.

    ``dict_spec`` may carry derivative specs (``deriv``/``deriv_t``/
    ``deriv_x``) and flags (``exact``, ``smooth_states``, ``noise``);
    ``groups_spec`` is the prior mode.
    """
    opts = dict(dict_spec or {})
    opts.update(kw)
    if isinstance(data, TimeSeriesSet):
        prior = "conservation" if groups_spec == "auto" else groups_spec
        return jak_stat_problem(data, prior=prior, sampling=sampling, **opts)
    if isinstance(data, SpatioTemporalField):
        model = data.params.get("model")
        if model == "advection-diffusion" or len(data.axes) == 1:
            prior = "spatial+equivalence" if groups_spec == "auto" else groups_spec
            return advection_problem(data, prior=prior, sampling=sampling, **opts)
        prior = "symmetry" if groups_spec == "auto" else groups_spec
        return reaction_diffusion_problem(data, prior=prior, sampling=sampling, **opts)
    raise PreprocessError(f"cannot assemble a problem from {type(data).__name__}")


def truth_groups(problem, truth):
    """Names of the groups that contain a true column."""
    names = problem.column_names
    index = {n: j for j, n in enumerate(names)}
    return problem.groups.groups_touching([index[t] for t in truth])

