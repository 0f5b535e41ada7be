"""Fixed-step classical RK4 and trajectory I/O."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NonFinite


@dataclass
class RunConfig:
    h: float = 1e-3
    T: float = 10.0
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    output_dir: str | None = None

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise InputError(f"step must be positive, got {self.h}")
        if not (self.T >= 0 and math.isfinite(self.T)):
            raise InputError(f"duration must be non-negative, got {self.T}")

    @property
    def steps(self):
        n = round(self.T / self.h)
        if abs(n * self.h - self.T) > 1e-9 * max(1.0, self.T):
            raise InputError(f"duration {self.T} is not a multiple of the step {self.h}")
        return n

    def tol(self, name, default):
        return float(self.tolerances.get(name, default))


@dataclass
class Trajectory:
    """States on a uniform grid.

    ``states`` has shape ``(steps + 1, dim)`` for one start or
    ``(steps + 1, dim, *B)`` for a batch of starts.
    """

    times: np.ndarray
    states: np.ndarray
    names: tuple = ()
    invariant_log: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.states[-1]

    def columns(self):
        """States as ``(dim, steps + 1, *B)``, ready for batched field evaluation."""
        return np.moveaxis(self.states, 0, 1)

    def log_observables(self, observables):
        cols = self.columns()
        for name, f in observables.items():
            self.invariant_log[name] = np.asarray(f.evaluate(cols), dtype=float) + np.zeros(cols.shape[1:])
        return self

    def drift(self, name):
        v = self.invariant_log[name]
        return float(np.max(np.abs(v - v[0])))

    def to_csv(self, path, start=None):
        """Write ``time,<coords>,<observables>`` with 17 significant digits.
        For batches, ``start`` selects one trajectory."""
        states = self.states if start is None else self.states[..., start]
        if states.ndim != 2:
            raise ValueError("select one trajectory of the batch with start=")
        logs = {k: (v if start is None else v[..., start]) for k, v in self.invariant_log.items()}
        names = list(self.names) or [f"x{i}" for i in range(states.shape[1])]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time"] + names + list(logs))
            for k, t in enumerate(self.times):
                row = [t] + list(states[k]) + [logs[n][k] for n in logs]
                w.writerow([f"{float(v):.17g}" for v in row])

    @classmethod
    def from_csv(cls, path, dim):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, data = rows[0], np.array(rows[1:], dtype=float)
        log = {name: data[:, 1 + dim + i] for i, name in enumerate(header[1 + dim:])}
        return cls(data[:, 0], data[:, 1:1 + dim], tuple(header[1:1 + dim]), log)


def rk4_integrate(field, x0, cfg, observables=None, check_guard=True):
    """Integrate ``field`` from ``x0`` with fixed step ``cfg.h`` up to ``cfg.T``.

    Increments are accumulated with compensated summation so that long runs
    do not pick up a systematic rounding bias.
    """
    chart = field.chart
    x = np.array(x0, dtype=float)
    if x.shape[0] != chart.dim:
        raise InputError(f"start has {x.shape[0]} coordinates, chart has {chart.dim}")
    n = cfg.steps
    h = cfg.h
    if check_guard:
        chart.check(x, step=0)
    states = np.empty((n + 1,) + x.shape)
    states[0] = x
    comp = np.zeros_like(x)
    ev = field.evaluate
    # overflow is caught by the finiteness check below
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            k1 = np.asarray(ev(x))
            k2 = np.asarray(ev(x + (0.5 * h) * k1))
            k3 = np.asarray(ev(x + (0.5 * h) * k2))
            k4 = np.asarray(ev(x + h * k3))
            dx = (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4) - comp
            new = x + dx
            comp = (new - x) - dx
            x = new
            if not np.all(np.isfinite(x)):
                raise NonFinite(f"non-finite state at step {k + 1}", step=k + 1)
            if check_guard:
                chart.check(x, step=k + 1)
            states[k + 1] = x
    times = h * np.arange(n + 1)
    traj = Trajectory(times, states, chart.names)
    if observables:
        traj.log_observables(observables)
    return traj
