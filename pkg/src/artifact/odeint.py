"""Fixed-step classical RK4 with grid output and blow-up detection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArtifactError

DEFAULT_BOUND = 1e8
# 400 steps per unit time keeps pure-Python solves fast; refine_check bounds the error
DEFAULT_STEPS_PER_UNIT = 400


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t1: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.t1 == self.t0:
            raise ValueError("grid must have nonzero length")

    @property
    def step(self) -> float:
        return (self.t1 - self.t0) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.step * np.arange(self.n_steps + 1)

    @classmethod
    def with_density(cls, t0, t1, steps_per_unit=DEFAULT_STEPS_PER_UNIT):
        n = max(1, int(np.ceil(abs(t1 - t0) * steps_per_unit - 1e-9)))
        return cls(t0, t1, n)

    def refined(self, factor=2) -> "TimeGrid":
        return TimeGrid(self.t0, self.t1, self.n_steps * factor)


@dataclass
class Path:
    grid: TimeGrid
    values: np.ndarray  # (n_done + 1, dim)
    status: str = "completed"  # or "blew_up"
    blowup_time: float | None = None
    blowup_component: int | None = None
    reason: str = ""

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    @property
    def times(self) -> np.ndarray:
        return self.grid.times[: len(self.values)]

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]


def _bad(y, bound):
    if not np.all(np.isfinite(y)):
        return int(np.flatnonzero(~np.isfinite(y))[0])
    big = np.abs(y) > bound
    if big.any():
        return int(np.flatnonzero(big)[0])
    return None


def integrate(field, init, grid: TimeGrid, bound: float = DEFAULT_BOUND) -> Path:
    """Integrate y' = field(t, y) from grid.t0 to grid.t1 (either direction).

    Stops at the first grid point where a component leaves [-bound, bound] or
    the field produces a non-finite value or raises a package error.
    """
    y = np.array(init, dtype=float)
    n = grid.n_steps
    h = grid.step
    half = 0.5 * h
    values = np.empty((n + 1,) + y.shape)
    values[0] = y
    t = grid.t0

    def blew(i, time, comp, reason):
        return Path(grid, values[: i + 1].copy(), "blew_up", time, comp, reason)

    for i in range(n):
        try:
            k1 = field(t, y)
            k2 = field(t + half, y + half * k1)
            k3 = field(t + half, y + half * k2)
            k4 = field(t + h, y + h * k3)
        except (ArtifactError, ZeroDivisionError, FloatingPointError) as exc:
            return blew(i, t, None, f"{type(exc).__name__}: {exc}")
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = grid.t0 + (i + 1) * h
        comp = _bad(y, bound)
        if comp is not None:
            reason = "non-finite derivative" if not np.all(np.isfinite(y)) else "bound exceeded"
            return blew(i, t, comp, reason)
        values[i + 1] = y
    return Path(grid, values)


@dataclass
class BatchEnd:
    """End states of a batch of IVPs integrated side by side."""

    final: np.ndarray  # (dim, n), last good state per column
    completed: np.ndarray  # (n,) bool
    blowup_time: np.ndarray  # (n,), nan where completed
    blowup_component: np.ndarray  # (n,), -1 where completed


def integrate_batch(field, init, grid: TimeGrid, bound: float = DEFAULT_BOUND) -> BatchEnd:
    """RK4 on a (dim, n) array of initial states, one IVP per column.

    ``field`` must map (t, (dim, k) array) to derivatives column by column and
    mark failures with NaN rather than raise. A column that fails or leaves
    the bound is frozen at its last good state.
    """
    y = np.array(init, dtype=float)
    n_cols = y.shape[1]
    alive = np.ones(n_cols, dtype=bool)
    t_fail = np.full(n_cols, np.nan)
    comp = np.full(n_cols, -1)
    h = grid.step
    half = 0.5 * h
    with np.errstate(all="ignore"):
        for i in range(grid.n_steps):
            if not alive.any():
                break
            t = grid.t0 + i * h
            cols = np.flatnonzero(alive)
            z = y[:, cols]
            k1 = field(t, z)
            k2 = field(t + half, z + half * k1)
            k3 = field(t + half, z + half * k2)
            k4 = field(t + h, z + h * k3)
            z_new = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            bad = ~np.isfinite(z_new) | (np.abs(z_new) > bound)
            failed = bad.any(axis=0)
            ok = cols[~failed]
            y[:, ok] = z_new[:, ~failed]
            if failed.any():
                dead = cols[failed]
                alive[dead] = False
                t_fail[dead] = grid.t0 + (i + 1) * h
                comp[dead] = np.argmax(bad[:, failed], axis=0)
    return BatchEnd(y, alive, t_fail, comp)


@dataclass(frozen=True)
class RefineReport:
    diff_coarse: float  # sup |y_n - y_2n| on the coarse grid
    diff_fine: float  # sup |y_2n - y_4n| on the coarse grid
    ratio: float
    statuses: tuple
    blowup_times: tuple

    @property
    def consistent(self) -> bool:
        return len(set(self.statuses)) == 1


def refine_check(field, init, grid: TimeGrid, bound: float = DEFAULT_BOUND) -> RefineReport:
    """Integrate at n, 2n and 4n steps and compare on the coarse grid."""
    paths = [integrate(field, init, grid.refined(f), bound) for f in (1, 2, 4)]
    statuses = tuple(p.status for p in paths)
    times = tuple(p.blowup_time for p in paths)
    m = min(len(paths[0].values), (len(paths[1].values) - 1) // 2 + 1, (len(paths[2].values) - 1) // 4 + 1)
    a = paths[0].values[:m]
    b = paths[1].values[: 2 * m - 1 : 2]
    c = paths[2].values[: 4 * m - 3 : 4]
    d1 = float(np.max(np.abs(a - b))) if m else float("nan")
    d2 = float(np.max(np.abs(b - c))) if m else float("nan")
    ratio = d1 / d2 if d2 > 0 else float("inf")
    return RefineReport(d1, d2, ratio, statuses, times)
