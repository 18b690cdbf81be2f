"""Ground-truth data generators.

* JAK-STAT signalling ODE driven by an activation pulse ``c(t)``;
* 1-D advection-diffusion of two species in a latent velocity field;
* 2-D lambda-omega reaction-diffusion (spiral waves).

All integrators are fixed-step classical RK4; the PDEs use Fourier
spectral derivatives on periodic grids.
"""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import SimulationError

__all__ = [
    "SimConfig",
    "TimeSeriesSet",
    "SpatioTemporalField",
    "rk4_step",
    "spectral_derivative",
    "synth_epor_signal",
    "jak_stat_rhs",
    "simulate_jak_stat",
    "simulate_advection_diffusion",
    "advection_velocity",
    "advection_rhs",
    "simulate_lambda_omega",
    "lambda_omega_rhs",
    "JAK_STAT_RATES",
]

log = logging.getLogger(__name__)

JAK_STAT_RATES = (0.021, 2.46, 0.2066, 0.10658)


@dataclass
class SimConfig:
    """Parameters of one simulation; see the ``jak_stat``/... constructors for defaults."""

    model: str = "jak-stat"
    # JAK-STAT: (k1, k2, k3, k4) for the consuming terms, and optionally
    # distinct values for the producing terms
    rates: tuple = JAK_STAT_RATES
    rates_plus: tuple = None
    x0: tuple = (1.0, 0.0, 0.0, 0.0)
    signal_amplitude: float = 2.0
    signal_tau: float = 8.0
    # PDEs
    D_u: float = 0.25
    D_v: float = 0.5
    beta: float = 1.0
    length: float = 5.0
    n_x: int = 256
    # time grid
    n_t: int = 200
    horizon: float = 60.0
    dt: float = None
    snapshot_times: tuple = ()
    seed: int = 0

    def __post_init__(self):
        for name in ("horizon", "length"):
            if not getattr(self, name) > 0:
                raise SimulationError(f"{name} must be positive")
        if self.n_t < 2 or self.n_x < 2:
            raise SimulationError("grid sizes must be >= 2")
        if self.dt is not None and not self.dt > 0:
            raise SimulationError("dt must be positive")
        vals = list(self.rates) + list(self.rates_plus or ()) + [self.D_u, self.D_v, self.beta]
        if not all(math.isfinite(v) for v in vals):
            raise SimulationError("parameters must be finite")

    @classmethod
    def jak_stat(cls, **kw):
        kw.setdefault("n_t", 200)
        kw.setdefault("horizon", 60.0)
        return cls(model="jak-stat", **kw)

    @classmethod
    def advection_diffusion(cls, **kw):
        base = dict(D_u=0.25, D_v=0.5, length=5.0, n_x=256, n_t=200, horizon=3.0)
        base.update(kw)
        return cls(model="advection-diffusion", **base)

    @classmethod
    def lambda_omega(cls, **kw):
        base = dict(D_u=0.1, D_v=0.1, beta=1.0, length=20.0, n_x=128, n_t=201,
                    horizon=10.0, dt=0.05, snapshot_times=(7.5,))
        base.update(kw)
        return cls(model="lambda-omega", **base)

    def to_dict(self):
        return asdict(self)


def _read_table(path):
    """Structured array from a CSV whose leading ``#`` lines carry provenance."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return np.genfromtxt(lines, delimiter=",", names=True)


@dataclass
class TimeSeriesSet:
    t: np.ndarray
    series: dict
    params: dict = field(default_factory=dict)

    def to_csv(self, path, comment=None):
        names = list(self.series)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + names)
            for i, t in enumerate(self.t):
                w.writerow([repr(float(t))] + [repr(float(self.series[n][i])) for n in names])

    @classmethod
    def from_csv(cls, path, params=None):
        arr = _read_table(path)
        names = [n for n in arr.dtype.names if n != "t"]
        return cls(np.asarray(arr["t"]), {n: np.asarray(arr[n]) for n in names}, params or {})


@dataclass
class SpatioTemporalField:
    """Species values on a regular periodic grid.

    ``data[s]`` has shape ``(nt, n_x)`` in 1-D and ``(nt, n_x, n_y)`` in 2-D;
    ``axes`` names the spatial array axes in order.
    """

    t: np.ndarray
    coords: dict
    data: dict
    lengths: dict
    axes: tuple = ("x",)
    params: dict = field(default_factory=dict)

    @property
    def spacing(self):
        return {a: self.lengths[a] / len(self.coords[a]) for a in self.axes}

    @property
    def dt(self):
        return float(self.t[1] - self.t[0])

    def snapshot(self, index):
        return {s: v[index] for s, v in self.data.items()}

    def time_index(self, t):
        i = int(np.argmin(np.abs(self.t - t)))
        if not np.isclose(self.t[i], t, atol=1e-9 * max(1.0, abs(t))):
            raise SimulationError(f"no snapshot at t = {t}")
        return i

    def _rows(self, indices):
        names = list(self.data)
        grids = np.meshgrid(*[self.coords[a] for a in self.axes], indexing="ij")
        flat = [g.ravel() for g in grids]
        for i in indices:
            vals = [self.data[s][i].ravel() for s in names]
            for j in range(flat[0].size):
                yield [repr(float(c[j])) for c in flat] + [repr(float(self.t[i]))] + \
                      [repr(float(v[j])) for v in vals]

    def to_csv(self, path, indices=None, comment=None):
        """One row per sample: coordinates, time, species values."""
        indices = range(len(self.t)) if indices is None else indices
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(self.axes) + ["t"] + list(self.data))
            w.writerows(self._rows(indices))

    def sidecar(self):
        return {"axes": list(self.axes), "lengths": self.lengths,
                "shape": {a: len(self.coords[a]) for a in self.axes},
                "n_t": len(self.t), "t0": float(self.t[0]), "t1": float(self.t[-1]),
                "species": list(self.data), "params": self.params}

    @classmethod
    def from_csv(cls, path, sidecar):
        """Rebuild a field written by :meth:`to_csv` (all time indices)."""
        if isinstance(sidecar, str):
            with open(sidecar, encoding="utf-8") as fh:
                sidecar = json.load(fh)
        axes = tuple(sidecar["axes"])
        arr = _read_table(path)
        shape = [sidecar["shape"][a] for a in axes]
        t = np.unique(arr["t"])
        data = {s: np.asarray(arr[s]).reshape([len(t)] + shape) for s in sidecar["species"]}
        coords = {}
        for k, a in enumerate(axes):
            col = np.asarray(arr[a][: int(np.prod(shape))]).reshape(shape)
            coords[a] = np.moveaxis(col, k, 0)[(slice(None),) + (0,) * (len(axes) - 1)]
        return cls(t, coords, data, dict(sidecar["lengths"]), axes, sidecar.get("params", {}))


def rk4_step(state, rhs, dt, t=0.0):
    """One classical fourth-order Runge-Kutta step of ``y' = rhs(t, y)``."""
    k1 = rhs(t, state)
    k2 = rhs(t + dt / 2, state + dt / 2 * k1)
    k3 = rhs(t + dt / 2, state + dt / 2 * k2)
    k4 = rhs(t + dt, state + dt * k3)
    return state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _wavenumbers(n, length):
    return 2 * np.pi * np.fft.fftfreq(n, d=length / n)


def spectral_derivative(values, length, axis=-1, order=1):
    """Fourier derivative of periodic samples along ``axis``.

    The Nyquist mode is dropped for odd orders. Sizes that are not powers
    of two work but are logged as slow.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    if n & (n - 1):
        log.debug("spectral derivative on non-power-of-two size %d", n)
    k = _wavenumbers(n, length)
    if order % 2 == 1 and n % 2 == 0:
        k[n // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = n
    mult = ((1j * k) ** order).reshape(shape)
    return np.real(np.fft.ifft(mult * np.fft.fft(values, axis=axis), axis=axis))


def _check(state, t):
    if not np.all(np.isfinite(state)):
        raise SimulationError(f"non-finite state at t = {t:.6g}", time=t)


def _steps_per_output(out_dt, dt_max):
    return max(1, int(math.ceil(out_dt / dt_max - 1e-9)))


# ---------------------------------------------------------------- JAK-STAT

def synth_epor_signal(t, amplitude=2.0, tau=8.0):
    """Activation pulse ``A (t / tau) exp(1 - t / tau)``; peaks at ``t = tau`` with value ``A``."""
    if not tau > 0:
        raise SimulationError("tau must be positive")
    t = np.asarray(t, dtype=float)
    return amplitude * (t / tau) * np.exp(1.0 - t / tau)


def jak_stat_rhs(x, c, rates=JAK_STAT_RATES, rates_plus=None):
    """Right-hand side of the four-state model at states ``x`` (shape ``(4, ...)``)."""
    k1m, k2m, k3m, k4m = rates
    k1p, k2p, k3p, k4p = rates_plus or rates
    x1, x2, x3, x4 = x
    return np.array([
        -k1m * x1 * c + 2 * k4p * x4,
        k1p * x1 * c - k2m * x2 ** 2,
        -k3m * x3 + 0.5 * k2p * x2 ** 2,
        k3p * x3 - k4m * x4,
    ])


def simulate_jak_stat(cfg, c=None):
    """Integrate the JAK-STAT model on ``cfg.n_t`` output points over ``[0, horizon]``.

    ``c`` is the activation signal sampled on the output grid (default: the
    synthetic pulse); it is linearly interpolated at RK4 stage times. The
    internal step is the largest divisor of the output spacing not
    exceeding ``cfg.dt`` (default ``horizon / 2000``).
    """
    t_out = np.linspace(0.0, cfg.horizon, cfg.n_t)
    if c is None:
        c = synth_epor_signal(t_out, cfg.signal_amplitude, cfg.signal_tau)
    c = np.asarray(c, dtype=float)
    if c.shape != t_out.shape:
        raise SimulationError(f"signal has {c.size} samples, output grid has {t_out.size}")
    out_dt = t_out[1] - t_out[0]
    sub = _steps_per_output(out_dt, cfg.dt or cfg.horizon / 2000)
    dt = out_dt / sub

    def rhs(t, x):
        return jak_stat_rhs(x, np.interp(t, t_out, c), cfg.rates, cfg.rates_plus)

    x = np.array(cfg.x0, dtype=float)
    traj = np.empty((cfg.n_t, 4))
    traj[0] = x
    for i in range(1, cfg.n_t):
        t = t_out[i - 1]
        for s in range(sub):
            x = rk4_step(x, rhs, dt, t + s * dt)
        _check(x, t_out[i])
        traj[i] = x
    series = {f"x{j + 1}": traj[:, j] for j in range(4)}
    series["c"] = c
    params = {**cfg.to_dict(), "model": "jak-stat", "dt": dt}
    return TimeSeriesSet(t_out, series, params)


# ------------------------------------------------------ advection-diffusion

def advection_velocity(x, length):
    """``c(x) = -3/2 + cos(2 pi x / L)`` and its derivative."""
    w = 2 * np.pi / length
    return -1.5 + np.cos(w * x), -w * np.sin(w * x)


def advection_rhs(state, c, D, k):
    """``-(c u)_x + D u_xx`` for a stack of species (rows of ``state``)."""
    U = np.fft.rfft(state, axis=-1)
    CU = np.fft.rfft(c * state, axis=-1)
    k1 = k.copy()
    if len(k1) and state.shape[-1] % 2 == 0:
        k1[-1] = 0.0
    return np.fft.irfft(-1j * k1 * CU - D[:, None] * k ** 2 * U, n=state.shape[-1], axis=-1)


def simulate_advection_diffusion(cfg, velocity=None):
    """Two species advected by ``c(x)`` and diffusing with ``D_u``, ``D_v``.

    Initial profiles ``cos(2 pi x / L)`` and ``-cos(2 pi x / L)``; the
    conservative form keeps total mass constant.
    """
    n, L = cfg.n_x, cfg.length
    x = np.arange(n) * L / n
    c = advection_velocity(x, L)[0] if velocity is None else np.asarray(velocity, dtype=float)
    k = 2 * np.pi * np.fft.rfftfreq(n, d=L / n)
    D = np.array([cfg.D_u, cfg.D_v])
    t_out = np.linspace(0.0, cfg.horizon, cfg.n_t)
    out_dt = t_out[1] - t_out[0]
    # keep |dt * eigenvalue| inside the RK4 stability region
    stiff = D.max() * k.max() ** 2 + np.abs(c).max() * k.max()
    dt_max = cfg.dt or (2.0 / stiff if stiff > 0 else out_dt)
    dt = out_dt / _steps_per_output(out_dt, dt_max)
    dx = L / n
    if np.abs(c).max() * dt / dx > 1:
        log.warning("CFL number %.3g exceeds 1", np.abs(c).max() * dt / dx)
    state = np.vstack([np.cos(2 * np.pi * x / L), -np.cos(2 * np.pi * x / L)])
    out = np.empty((cfg.n_t, 2, n))
    out[0] = state
    sub = int(round(out_dt / dt))

    def rhs(t, s):
        return advection_rhs(s, c, D, k)

    for i in range(1, cfg.n_t):
        for s in range(sub):
            state = rk4_step(state, rhs, dt)
        _check(state, t_out[i])
        out[i] = state
    params = {**cfg.to_dict(), "model": "advection-diffusion", "dt": dt}
    return SpatioTemporalField(t_out, {"x": x}, {"u": out[:, 0], "v": out[:, 1]},
                               {"x": L}, ("x",), params)


# ---------------------------------------------------------- lambda-omega

def lambda_omega_rhs(u, v, beta, D_u, D_v, lap):
    """Reaction-diffusion right-hand side; ``lap`` maps a field to its Laplacian."""
    r2 = u ** 2 + v ** 2
    lam = 1 - r2
    om = -beta * r2
    return D_u * lap(u) + lam * u - om * v, D_v * lap(v) + om * u - lam * v


def _laplacian_2d(n, length):
    k = _wavenumbers(n, length)
    k2 = k[:, None] ** 2 + k[None, :] ** 2

    def lap(f):
        return np.real(np.fft.ifft2(-k2 * np.fft.fft2(f)))
    return lap


def simulate_lambda_omega(cfg, initial=None):
    """Spiral waves on ``[-L/2, L/2)^2`` recorded every output step.

    ``cfg.dt`` caps the RK4 step; it is reduced further (to an integer
    fraction of the output spacing) when the diffusion term would make it
    unstable.

    Default initial condition: ``tanh(r cos(3 theta - r))`` for ``u`` and
    ``tanh(r sin(3 theta - r))`` for ``v``.
    """
    n, L = cfg.n_x, cfg.length
    x = -L / 2 + np.arange(n) * L / n
    X, Y = np.meshgrid(x, x, indexing="ij")
    if initial is None:
        r = np.sqrt(X ** 2 + Y ** 2)
        ang = np.angle(X + 1j * Y)
        u = np.tanh(r * np.cos(3 * ang - r))
        v = np.tanh(r * np.sin(3 * ang - r))
    else:
        u, v = (np.array(a, dtype=float) for a in initial)
    lap = _laplacian_2d(n, L)
    t_out = np.linspace(0.0, cfg.horizon, cfg.n_t)
    out_dt = t_out[1] - t_out[0]
    # explicit diffusion limit: |dt * D * k^2| must stay inside the RK4 region
    k_max = np.pi * n / L
    dt_diff = 2.5 / (max(cfg.D_u, cfg.D_v) * 2 * k_max ** 2)
    dt = out_dt / _steps_per_output(out_dt, min(cfg.dt or out_dt, dt_diff))
    sub = int(round(out_dt / dt))
    state = np.stack([u, v])

    def rhs(t, s):
        return np.stack(lambda_omega_rhs(s[0], s[1], cfg.beta, cfg.D_u, cfg.D_v, lap))

    out = np.empty((cfg.n_t, 2, n, n))
    out[0] = state
    for i in range(1, cfg.n_t):
        for s in range(sub):
            state = rk4_step(state, rhs, dt)
        _check(state, t_out[i])
        out[i] = state
    params = {**cfg.to_dict(), "model": "lambda-omega", "dt": dt}
    return SpatioTemporalField(t_out, {"x": x, "y": x.copy()}, {"u": out[:, 0], "v": out[:, 1]},
                               {"x": L, "y": L}, ("x", "y"), params)
