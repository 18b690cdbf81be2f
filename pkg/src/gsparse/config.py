"""Experiment configuration: schema, presets and provenance hash.

A configuration is one JSON object. Every key is optional; missing keys
take the defaults of the chosen experiment, then of the named preset.

Keys
----
experiment : str
    ``jak-stat``, ``advection-diffusion`` or ``lambda-omega``.
preset : str
    Name of a preset in :data:`PRESETS` used as the base layer.
command : str
    Subcommand the preset was written for (informational).
sim : dict
    Overrides for :class:`gsparse.simulate.SimConfig`.
noise : float
    Noise level sigma.
sampling : dict
    ``n_points`` (rows per block) and ``n_locations`` (advection only).
prior : str
    Group prior, one of :data:`gsparse.pipelines.PRIOR_MODES`.
derivatives : dict
    ``deriv`` (JAK-STAT) or ``deriv_t``/``deriv_x`` as ``[window, degree]``.
smooth_states, exact, balance : bool
    Pipeline flags; see :mod:`gsparse.pipelines`.
solver : dict
    Fields of :class:`gsparse.giht.SolverOptions` except ``lam``.
stability : dict
    ``B``, ``fraction``, ``n_lambda``, ``pi_th``, ``E_fp``.
trials : int
    Independent trials per grid point.
sweep : dict
    ``param`` (``n_points`` or ``noise``), ``values`` and, for ``n_points``
    sweeps, optional ``noises`` giving one curve per noise level.
fit : dict
    ``lam`` (absolute) or ``lam_fraction`` of lambda_max for single fits.
report : dict
    ``snapshot_times`` for field snapshots and ``figures`` (bool).
seed : int
    Master seed; all per-trial seeds derive from it.
out : str
    Output directory.
threads : int
    Worker threads for subsample fan-out.
"""

import copy
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

from .errors import ConfigError
from .pipelines import PRIOR_MODES

__all__ = ["ExperimentConfig", "PRESETS", "EXPERIMENT_DEFAULTS", "load_config", "config_hash",
           "deep_merge"]

EXPERIMENTS = ("jak-stat", "advection-diffusion", "lambda-omega")

_STABILITY = {"B": 100, "fraction": 0.5, "n_lambda": 25, "pi_th": 0.8, "E_fp": 1.0}

EXPERIMENT_DEFAULTS = {
    "jak-stat": {
        "sim": {"signal_amplitude": 1.0, "signal_tau": 8.0, "horizon": 20.0},
        "noise": 0.1,
        "sampling": {"n_points": 200},
        "prior": "conservation",
        "derivatives": {"deriv": [41, 2]},
        "smooth_states": False,
        "balance": True,
        "solver": {"step_mode": "fixed", "step": 1.0, "normalize": True, "loss": "mean"},
        "sweep": {"param": "n_points", "values": [50, 100, 150, 200, 300, 400, 500]},
    },
    "advection-diffusion": {
        "sim": {},
        "noise": 0.15,
        "sampling": {"n_points": 75, "n_locations": 10},
        "prior": "spatial+equivalence",
        "derivatives": {"deriv_t": [31, 2], "deriv_x": [51, 4]},
        "smooth_states": True,
        "balance": True,
        "solver": {"step_mode": "lipschitz", "normalize": True, "loss": "mean"},
        "sweep": {"param": "noise", "values": [0.01, 0.05, 0.1, 0.15, 0.2]},
    },
    "lambda-omega": {
        "sim": {},
        "noise": 0.1,
        "sampling": {"n_points": 1000},
        "prior": "symmetry",
        "derivatives": {"deriv_t": [13, 3], "deriv_x": [13, 3]},
        "smooth_states": True,
        "balance": True,
        "solver": {"step_mode": "lipschitz", "normalize": True, "loss": "mean"},
        "sweep": {"param": "n_points", "values": [250, 500, 1000, 2000]},
        "report": {"snapshot_times": [7.5]},
    },
}


def _preset(experiment, command, **kw):
    return {"experiment": experiment, "command": command, **kw}


PRESETS = {
    # JAK-STAT: stability plots with and without conservation groups, then
    # success probability against sample size
    "fig3a": _preset("jak-stat", "stability", prior="conservation"),
    "fig3b": _preset("jak-stat", "stability", prior="none"),
    "fig3c": _preset("jak-stat", "achievability", prior="conservation",
                     sweep={"param": "n_points", "values": [50, 100, 150, 200, 300, 400, 500],
                            "noises": [0.01, 0.05, 0.1]}),
    "fig3d": _preset("jak-stat", "achievability", prior="none",
                     sweep={"param": "n_points", "values": [50, 100, 150, 200, 300, 400, 500],
                            "noises": [0.01, 0.05, 0.1]}),
    # advection-diffusion: full prior, spatial groups only, no groups, and
    # success probability against noise
    "fig5a": _preset("advection-diffusion", "stability", prior="spatial+equivalence"),
    "fig5b": _preset("advection-diffusion", "stability", prior="spatial"),
    "fig5c": _preset("advection-diffusion", "stability", prior="none"),
    "fig5d": _preset("advection-diffusion", "achievability", prior="spatial+equivalence"),
    "fig6": _preset("lambda-omega", "simulate", noise=0.0),
    "fig7a": _preset("lambda-omega", "stability", prior="symmetry"),
    "fig7b": _preset("lambda-omega", "stability", prior="none"),
    "fig7c": _preset("lambda-omega", "achievability", prior="symmetry"),
    "fig7d": _preset("lambda-omega", "achievability", prior="none"),
    # coefficient errors and the latent velocity table
    "figA1": _preset("jak-stat", "report", prior="conservation"),
    "figA2": _preset("advection-diffusion", "report", prior="spatial+equivalence", noise=0.01),
    "figA3": _preset("lambda-omega", "report", prior="symmetry"),
}


def deep_merge(base, over):
    """Recursive dict merge; values in ``over`` win, ``None`` never erases."""
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        elif v is not None or k not in out:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    experiment: str = "jak-stat"
    preset: str = None
    command: str = None
    sim: dict = field(default_factory=dict)
    noise: float = 0.1
    sampling: dict = field(default_factory=dict)
    prior: str = "conservation"
    derivatives: dict = field(default_factory=dict)
    smooth_states: bool = False
    exact: bool = False
    balance: bool = False
    solver: dict = field(default_factory=dict)
    stability: dict = field(default_factory=lambda: dict(_STABILITY))
    trials: int = 20
    sweep: dict = field(default_factory=dict)
    fit: dict = field(default_factory=lambda: {"lam": None, "lam_fraction": 0.5})
    report: dict = field(default_factory=lambda: {"snapshot_times": [], "figures": True})
    seed: int = 0
    out: str = "out"
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.preset is not None and self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; available: {sorted(PRESETS)}")
        if self.prior not in PRIOR_MODES[self.experiment]:
            raise ConfigError(f"prior {self.prior!r} not available for {self.experiment}; "
                              f"choose from {PRIOR_MODES[self.experiment]}")
        st = self.stability
        missing = set(_STABILITY) - set(st)
        if missing:
            raise ConfigError(f"stability section lacks {sorted(missing)}")
        if not 0.5 < st["pi_th"] <= 1:
            raise ConfigError(f"pi_th must lie in (0.5, 1], got {st['pi_th']}")
        if not st["E_fp"] > 0:
            raise ConfigError("E_fp must be positive")
        if int(st["B"]) < 1 or int(st["n_lambda"]) < 2:
            raise ConfigError("need B >= 1 and n_lambda >= 2")
        if not 0 < st["fraction"] <= 1:
            raise ConfigError("fraction must lie in (0, 1]")
        if not (isinstance(self.noise, (int, float)) and self.noise >= 0):
            raise ConfigError(f"noise must be a number >= 0, got {self.noise!r}")
        if int(self.trials) < 1:
            raise ConfigError("trials must be >= 1")
        if int(self.threads) < 1:
            raise ConfigError("threads must be >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        for key, spec in self.derivatives.items():
            if key not in ("deriv", "deriv_t", "deriv_x"):
                raise ConfigError(f"unknown derivative key {key!r}")
            if not (isinstance(spec, (list, tuple)) and len(spec) == 2):
                raise ConfigError(f"{key} must be [window, degree]")
        if self.sweep and self.sweep.get("param") not in ("n_points", "noise"):
            raise ConfigError("sweep.param must be 'n_points' or 'noise'")

    def to_dict(self):
        return asdict(self)

    def provenance(self):
        """The settings that determine results (no output path or thread count)."""
        d = self.to_dict()
        for k in ("out", "threads", "command"):
            d.pop(k)
        return d

    @property
    def hash(self):
        return config_hash(self)

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)


def config_hash(cfg):
    """First 16 hex digits of the SHA-256 of the canonical provenance JSON."""
    text = json.dumps(cfg.provenance(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def resolve(raw=None, preset=None, experiment=None, **overrides):
    """Layer experiment defaults, preset, raw config and overrides into a config."""
    raw = dict(raw or {})
    preset = preset or raw.get("preset")
    layers = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
        layers = PRESETS[preset]
    exp = experiment or raw.get("experiment") or layers.get("experiment") or "jak-stat"
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; choose from {EXPERIMENTS}")
    base = deep_merge(ExperimentConfig(experiment=exp,
                                       prior=PRIOR_MODES[exp][-1]).to_dict(),
                      EXPERIMENT_DEFAULTS[exp])
    merged = deep_merge(base, layers)
    merged = deep_merge(merged, raw)
    merged = deep_merge(merged, {k: v for k, v in overrides.items() if v is not None})
    merged["experiment"] = exp
    merged["preset"] = preset
    return ExperimentConfig.from_dict(merged)


def load_config(path=None, preset=None, experiment=None, **overrides):
    """Read a JSON config file (optional) and resolve it against presets."""
    raw = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
    return resolve(raw, preset=preset, experiment=experiment, **overrides)
