"""Tabulated data behind the standard plots: marginal density and flux maps,
theta-solution maps and phase-plane snapshots.

Every producer returns a :class:`Table` in long format (one sample per row)
whose row order is the grid order, so the output is deterministic whatever
the number of worker threads used to evaluate it.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.signal import find_peaks

from .chain_lift import (
    PhaseBox,
    f_n_stationary_array,
    f_n_theta_array,
    marginal_density,
    marginal_flux,
    polygon_area,
    support_polygon,
)
from .well_solutions import (
    ModeConstants,
    ThetaSolution,
    characteristic_slope,
    density_theta,
    flux_theta,
)


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid ``[x_min, x_max] x [t_min, t_max]`` (both ends included)."""

    x_min: float
    x_max: float
    nx: int
    t_min: float
    t_max: float
    nt: int

    def __post_init__(self):
        if self.nx < 2 or self.nt < 2:
            raise ValueError("grid counts must be >= 2")
        if not self.x_min < self.x_max:
            raise ValueError(f"x_min must be < x_max, got [{self.x_min}, {self.x_max}]")
        if not self.t_min < self.t_max:
            raise ValueError(f"t_min must be < t_max, got [{self.t_min}, {self.t_max}]")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.nt)


def default_marginal_grid(box: PhaseBox, nx: int = 401, nt: int = 64, t_max: float | None = None) -> GridSpec:
    """Grid covering the full support of the order-2 marginal up to ``t_max``.

    ``t_max`` defaults to ``3 a / adot``, by which time the distribution has
    spread to four well widths and every peak has washed out.
    """
    if t_max is None:
        t_max = 3 * box.a / box.adot
    return GridSpec(0.0, box.a + box.adot * t_max, nx, 0.0, t_max, nt)


# ---------------------------------------------------------------------------
# tables


def _format(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return ""
    return repr(v)


@dataclass
class Table:
    """Column names plus a list of row tuples in output order."""

    columns: tuple
    rows: list

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        lines.extend(",".join(_format(v) for v in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        def conv(v):
            if isinstance(v, str):
                return v
            if isinstance(v, (int, np.integer)):
                return int(v)
            v = float(v)
            return None if math.isnan(v) else v

        recs = [{c: conv(v) for c, v in zip(self.columns, row)} for row in self.rows]
        return json.dumps(recs, allow_nan=False) + "\n"

    def dumps(self, fmt: str = "csv") -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown format {fmt!r}")


def _map_ordered(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """``[fn(i) for i in items]``, optionally evaluated on a thread pool."""
    if workers <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _xt_table(name: str, fn: Callable, grid: GridSpec, workers: int) -> Table:
    """Rows ``(x, t, fn(x, t))`` with ``x`` outer and ``t`` inner."""
    x, t = grid.x, grid.t
    cols = _map_ordered(lambda xi: np.asarray(fn(np.full_like(t, xi), t), dtype=float), list(x), workers)
    rows = [(float(xi), float(tj), float(v)) for xi, col in zip(x, cols) for tj, v in zip(t, col)]
    return Table(("x", "t", name), rows)


def density_1d(mode: ModeConstants, box: PhaseBox, grid: GridSpec, workers: int = 1) -> Table:
    """Coordinate density of the order-2 stationary lift on ``grid``."""
    return _xt_table("f1", lambda x, t: marginal_density(x, t, mode, box), grid, workers)


def flux_1d(mode: ModeConstants, box: PhaseBox, grid: GridSpec, workers: int = 1) -> Table:
    """Mean velocity of the order-2 stationary lift; NaN where the density vanishes."""
    return _xt_table("mean_v", lambda x, t: marginal_flux(x, t, mode, box), grid, workers)


def count_local_maxima(values, rel_prominence: float = 1e-3, resolution: float = 1e-9) -> int:
    """Number of peaks of a sampled profile.

    The profile is first quantized to ``resolution`` times its maximum so
    that round-off ripples on flat stretches are not mistaken for peaks;
    a flat-topped maximum counts once.  Only peaks whose prominence is at
    least ``rel_prominence`` times the maximum are counted.
    """
    f = np.nan_to_num(np.asarray(values, dtype=float), nan=0.0)
    top = float(np.max(np.abs(f))) if f.size else 0.0
    if top == 0.0:
        return 0
    q = np.round(f / (top * resolution))
    peaks, _ = find_peaks(q, prominence=rel_prominence / resolution)
    return int(len(peaks))


def peak_counts(table: Table, value: str = "f1", **kw) -> tuple[np.ndarray, np.ndarray]:
    """Peak count of the ``x`` profile at every time of an ``(x, t, value)`` table."""
    t = table.column("t")
    f = table.column(value)
    times = np.unique(t)
    counts = np.array([count_local_maxima(f[t == tj], **kw) for tj in times])
    return times, counts


# ---------------------------------------------------------------------------
# theta-solution maps


def theta_density_map(sol: ThetaSolution, n_eta: int = 201, n_tau: int = 201, periods: float = 1.0) -> Table:
    """Rows ``(eta, tau, F)`` over ``[0, a] x [0, periods * T]``."""
    a, T = sol.params.a, sol.mode.T
    etas = np.linspace(0.0, a, n_eta)
    taus = np.linspace(0.0, periods * T, n_tau)
    E, Tt = np.meshgrid(etas, taus, indexing="ij")
    F = density_theta(E, Tt, sol)
    rows = [(float(e), float(t), float(v)) for e, t, v in zip(E.ravel(), Tt.ravel(), F.ravel())]
    return Table(("eta", "tau", "F"), rows)


PROFILE_FRACTIONS = (1 / 8, 1 / 4, 1 / 3, 1 / 2.5, 1 / 2.2)


def theta_flux_profiles(sol: ThetaSolution, n_eta: int = 201, fractions: Sequence[float] = PROFILE_FRACTIONS) -> Table:
    """Rows ``(tau, eta, flux)`` at ``tau = fraction * T`` for each fraction.

    Points where the density is below the solution's floor carry NaN flux.
    """
    a, T = sol.params.a, sol.mode.T
    etas = np.linspace(0.0, a, n_eta)
    rows = []
    for frac in fractions:
        tau = frac * T
        u = flux_theta(etas, np.full_like(etas, tau), sol)
        rows.extend((float(tau), float(e), float(v)) for e, v in zip(etas, u))
    return Table(("tau", "eta", "flux"), rows)


def characteristic_lines(sol: ThetaSolution, n_max: int = 4) -> Table:
    """Slopes ``(s + k + 1) / (2 mu)`` of the constant-phase lines of each ``(s, k)`` term.

    ``weight`` is the normalized pair weight ``exp(-pi beta (m_s^2 + m_k^2) / 4) / N``
    with ``m_j = 2 j + 1``; it tells which lines are visible in the density map.
    """
    beta, mu = sol.beta, sol.mode.mu
    rows = []
    for s in range(n_max + 1):
        for k in range(n_max + 1):
            ms, mk = 2 * s + 1, 2 * k + 1
            w = math.exp(-math.pi * beta * (ms * ms + mk * mk) / 4) / sol.normN
            rows.append((s, k, w, characteristic_slope(s, k, mu)))
    return Table(("s", "k", "weight", "slope"), rows)


# ---------------------------------------------------------------------------
# phase-plane snapshots


def phase_snapshots(
    box: PhaseBox,
    times: Sequence[float],
    mode: ModeConstants | None = None,
    sol: ThetaSolution | None = None,
    nx: int = 81,
    nv: int = 41,
    workers: int = 1,
) -> Table:
    """Order-2 phase density on the bounding box of the support at each time.

    Sample rows have ``kind = "sample"``; the four support-polygon corners
    follow each time block with ``kind = "corner"`` and an empty density.
    Exactly one of ``mode`` (stationary lift) or ``sol`` (theta lift) is used.
    """
    if (mode is None) == (sol is None):
        raise ValueError("give exactly one of mode or sol")
    if box.order != 2:
        raise ValueError("phase snapshots need an order-2 box")
    a, adot = box.a, box.adot

    def block(t):
        t = float(t)
        x = np.linspace(0.0, a + adot * t, nx)
        v = np.linspace(0.0, adot, nv)
        X, V = np.meshgrid(x, v, indexing="ij")
        D = np.stack([X.ravel(), V.ravel()])
        if sol is not None:
            f = f_n_theta_array(D, t, sol, box)
        else:
            f = f_n_stationary_array(D, t, mode, box)
        rows = [(t, "sample", float(xx), float(vv), float(ff)) for xx, vv, ff in zip(D[0], D[1], f)]
        rows.extend((t, "corner", float(cx), float(cv), math.nan) for cx, cv in support_polygon(t, box))
        return rows

    blocks = _map_ordered(block, list(times), workers)
    return Table(("t", "kind", "x", "v", "f2"), [r for b in blocks for r in b])


def snapshot_areas(table: Table) -> dict:
    """Support-polygon area per time of a :func:`phase_snapshots` table."""
    out = {}
    kinds = table.column("kind")
    t = table.column("t").astype(float)
    x = table.column("x").astype(float)
    v = table.column("v").astype(float)
    for tj in np.unique(t[kinds == "corner"]):
        sel = (kinds == "corner") & (t == tj)
        out[float(tj)] = polygon_area(np.column_stack([x[sel], v[sel]]))
    return out
