"""Delay-aware integration: the z-path, the integrating factor, first variation.

The functional value z(b) is produced by integrating

    z'(t) = L(t, x(t), x'(t), x(t-tau), x'(t-tau), z(t)),   z(a) = gamma

with classic 4-stage Runge-Kutta at the grid step, restarted at every
trajectory breakpoint and at every breakpoint shifted by +tau, so no stage
straddles a kink of the integrand. Delayed arguments are read from the
trajectory; since tau sits exactly on the grid, delayed reads at nodes land
on nodes. Stage times at substep ends use one-sided trajectory limits so the
integrand stays smooth within each substep.

The integrating factor lambda(t) = exp(-int_a^t dL/dz) is accumulated in the
same pass as log-lambda (positivity by construction); if L does not depend on
z the integrand is exactly zero and lambda is exactly one at every node.

The first variation zeta(b) of z(b) along an admissible direction eta is the
closed integral

    zeta(b) = (1/lambda(b)) int_a^b lambda(s) [ L_x eta + L_dx eta'
              + L_xtau eta(s-tau) + L_dxtau eta'(s-tau) ] ds

with eta identically zero left of a, evaluated by composite Simpson on
breakpoint-aligned panels (grid intervals split at kinks, midpoint sampled).
All operations are pure; concurrent integrations are safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import isfinite

import numpy as np
from scipy.interpolate import CubicSpline

from . import expr
from .errors import FixedNode, InvalidTrajectory, NonFinite, OutOfDomain
from .reportio import csv_text
from .trajectory import Grid, HerglotzProblem, Trajectory


def _snap(ts: np.ndarray, anchors: np.ndarray, tol: float) -> np.ndarray:
    """Replace entries of ts lying within tol of an anchor by that anchor.

    Kills one-ulp drift so that kink times compare exactly in side-aware
    evaluation (e.g. a node computed as a + k*h versus a breakpoint 1.0).
    """
    if len(anchors) == 0:
        return ts
    out = np.asarray(ts, dtype=float).copy()
    idx = np.clip(np.searchsorted(anchors, out), 0, len(anchors) - 1)
    below = np.clip(idx - 1, 0, len(anchors) - 1)
    pick = np.where(
        np.abs(anchors[idx] - out) <= np.abs(anchors[below] - out), idx, below)
    near = np.abs(anchors[pick] - out) <= tol
    out[near] = anchors[pick][near]
    return out


def integration_stops(problem: HerglotzProblem, traj: Trajectory):
    """Sorted substep boundaries on [a, b] and the stop index of each node.

    Stops are the grid nodes on [a, b] merged with every trajectory
    breakpoint rho and its image rho + tau (both read by the integrand).
    A node within snapping tolerance of a kink is displaced onto the kink
    value so float comparisons at the kink are exact.
    """
    g = problem.grid
    vals = g.main_nodes.astype(float).copy()
    tol = 1e-9 * g.h
    extras = []
    for rho in traj.breakpoints:
        for p in (float(rho), float(rho) + g.tau):
            if p <= g.a + tol or p >= g.b - tol:
                continue
            j = int(round((p - g.a) / g.h))
            if 0 <= j <= g.n and abs(vals[j] - p) <= tol:
                vals[j] = p
            else:
                extras.append(p)
    if extras:
        stops = np.sort(np.concatenate([vals, np.array(sorted(set(extras)))]))
    else:
        stops = vals
    node_pos = np.searchsorted(stops, vals)
    return stops, node_pos


def _delay_anchors(problem: HerglotzProblem, traj: Trajectory) -> np.ndarray:
    g = problem.grid
    return np.sort(np.concatenate(
        [g.nodes, np.asarray(traj.breakpoints, dtype=float)]))


@dataclass
class ZPath:
    """z and lambda at the nodes of [a, b], with spline interpolation between."""

    grid: Grid
    z: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)

    @property
    def times(self) -> np.ndarray:
        return self.grid.main_nodes

    @property
    def z_b(self) -> float:
        return float(self.z[-1])

    @property
    def lambda_b(self) -> float:
        return float(self.lam[-1])

    @cached_property
    def _z_spline(self):
        bc = "not-a-knot" if len(self.z) >= 4 else "natural"
        return CubicSpline(self.times, self.z, bc_type=bc)

    @cached_property
    def _lam_spline(self):
        bc = "not-a-knot" if len(self.lam) >= 4 else "natural"
        return CubicSpline(self.times, self.lam, bc_type=bc)

    def _check(self, ts: np.ndarray) -> None:
        g = self.grid
        slack = 1e-9 * (g.b - g.a)
        if np.any(ts < g.a - slack) or np.any(ts > g.b + slack):
            raise OutOfDomain(f"time outside [{g.a}, {g.b}]")

    def _interp(self, spline, stored, t):
        ts = np.asarray(t, dtype=float)
        self._check(np.atleast_1d(ts))
        out = spline(ts)
        nodes = self.times
        idx = np.clip(np.searchsorted(nodes, ts), 0, len(nodes) - 1)
        exact = nodes[idx] == ts
        out = np.where(exact, stored[idx], out)
        return float(out) if np.isscalar(t) or np.ndim(t) == 0 else out

    def z_at(self, t):
        return self._interp(self._z_spline, self.z, t)

    def lambda_at(self, t):
        return self._interp(self._lam_spline, self.lam, t)

    def csv(self) -> str:
        return csv_text(["t", "z", "lambda"], [self.times, self.z, self.lam])


def lambda_at(zpath: ZPath, t):
    """Integrating factor at time t (spline between nodes, exact at nodes)."""
    return zpath.lambda_at(t)


def integrate_z(problem: HerglotzProblem, traj: Trajectory) -> ZPath:
    """Integrate z and log-lambda over [a, b] along the given trajectory."""
    g = problem.grid
    stops, node_pos = integration_stops(problem, traj)
    lefts, rights = stops[:-1], stops[1:]
    mids = 0.5 * (lefts + rights)
    hs = rights - lefts
    anchors = _delay_anchors(problem, traj)
    tol = 1e-9 * g.h

    def batch(ts, side):
        tsnap = _snap(ts, anchors, tol)
        x, dx = traj.eval_many(tsnap, side=side, want_ddx=False)
        xt, dxt = traj.eval_many(
            _snap(tsnap - g.tau, anchors, tol), side=side, want_ddx=False)
        return x, dx, xt, dxt

    xL, dxL, xtL, dxtL = batch(lefts, "right")
    xM, dxM, xtM, dxtM = batch(mids, "right")
    xR, dxR, xtR, dxtR = batch(rights, "left")

    L = problem.lagrangian
    b: dict = {"t": 0.0, "x": 0.0, "dx": 0.0, "xtau": 0.0, "dxtau": 0.0, "z": 0.0}

    def stage(i, arrs, tv, zv):
        x, dx, xt, dxt = arrs
        b["t"] = tv
        b["x"] = x[i]
        b["dx"] = dx[i]
        b["xtau"] = xt[i]
        b["dxtau"] = dxt[i]
        b["z"] = zv
        val, dz = expr.value_and_partial(L, "z", b)
        return float(val), -float(dz)

    n_nodes = g.n + 1
    z_nodes = np.empty(n_nodes)
    mu_nodes = np.empty(n_nodes)
    z = float(problem.gamma)
    mu = 0.0
    rec = {int(p): k for k, p in enumerate(node_pos)}
    if 0 in rec:
        z_nodes[rec[0]] = z
        mu_nodes[rec[0]] = mu
    AL = (xL, dxL, xtL, dxtL)
    AM = (xM, dxM, xtM, dxtM)
    AR = (xR, dxR, xtR, dxtR)
    for i in range(len(lefts)):
        h = hs[i]
        z1, m1 = stage(i, AL, lefts[i], z)
        z2, m2 = stage(i, AM, mids[i], z + 0.5 * h * z1)
        z3, m3 = stage(i, AM, mids[i], z + 0.5 * h * z2)
        z4, m4 = stage(i, AR, rights[i], z + h * z3)
        z = z + h * (z1 + 2.0 * z2 + 2.0 * z3 + z4) / 6.0
        mu = mu + h * (m1 + 2.0 * m2 + 2.0 * m3 + m4) / 6.0
        if not (isfinite(z) and isfinite(mu)):
            raise NonFinite(f"z integration produced a non-finite value at t={rights[i]}")
        k = rec.get(i + 1)
        if k is not None:
            z_nodes[k] = z
            mu_nodes[k] = mu
    lam = np.exp(mu_nodes)
    if not np.all(np.isfinite(lam)):
        raise NonFinite("integrating factor overflowed")
    return ZPath(grid=g, z=z_nodes, lam=lam)


@dataclass
class VariationDirection:
    """Admissible direction: values at free nodes, zero on [a-tau, a] and at b.

    Evaluation between nodes goes through the same natural-spline machinery
    as sampled trajectories, so a unit direction is exactly the change of
    trajectory produced by perturbing that node.
    """

    grid: Grid
    main_values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.main_values, dtype=float).copy()
        if vals.shape != (self.grid.n + 1,):
            raise InvalidTrajectory(
                f"direction needs {self.grid.n + 1} values on [a, b], got {vals.shape}")
        vals[0] = 0.0
        vals[-1] = 0.0
        vals.setflags(write=False)
        object.__setattr__(self, "main_values", vals)

    @classmethod
    def from_free(cls, grid: Grid, free_values) -> "VariationDirection":
        vals = np.zeros(grid.n + 1)
        free = np.asarray(free_values, dtype=float)
        if free.shape != (grid.n - 1,):
            raise InvalidTrajectory(
                f"expected {grid.n - 1} free values, got {free.shape}")
        vals[1:-1] = free
        return cls(grid, vals)

    @classmethod
    def unit(cls, grid: Grid, node_index: int) -> "VariationDirection":
        """Direction with value 1 at one free node (global node index)."""
        if not (grid.m < node_index < grid.n + grid.m):
            raise FixedNode(f"node {node_index} is pinned")
        vals = np.zeros(grid.n + 1)
        vals[node_index - grid.m] = 1.0
        return cls(grid, vals)

    @cached_property
    def _spline(self):
        return CubicSpline(self.grid.main_nodes, self.main_values, bc_type="natural")

    def eval_many(self, ts, side: str = "right"):
        """eta and eta' at the given times; zero left of a. At exactly t=a the
        value is zero either way, but the slope is one-sided: side="left"
        returns the flat history slope 0, side="right" the spline slope."""
        ts = np.asarray(ts, dtype=float)
        eta = np.zeros_like(ts)
        deta = np.zeros_like(ts)
        inside = ts > self.grid.a if side == "left" else ts >= self.grid.a
        if np.any(inside):
            tm = ts[inside]
            eta[inside] = self._spline(tm)
            deta[inside] = self._spline(tm, 1)
            nodes = self.grid.main_nodes
            idx = np.clip(np.searchsorted(nodes, ts), 0, len(nodes) - 1)
            exact = (nodes[idx] == ts) & inside
            eta[exact] = self.main_values[idx[exact]]
        return eta, deta

    def eval(self, t: float, side: str = "right"):
        eta, deta = self.eval_many(np.array([float(t)]), side=side)
        return float(eta[0]), float(deta[0])


def _panel_samples(problem: HerglotzProblem, traj: Trajectory):
    """Panel geometry plus trajectory/z samples at ends and midpoints."""
    g = problem.grid
    stops, node_pos = integration_stops(problem, traj)
    lefts, rights = stops[:-1], stops[1:]
    mids = 0.5 * (lefts + rights)
    hs = rights - lefts
    anchors = _delay_anchors(problem, traj)
    tol = 1e-9 * g.h
    times = np.concatenate([lefts, mids, rights])
    delayed = _snap(times - g.tau, anchors, tol)
    sides = ["right"] * len(lefts) + ["right"] * len(mids) + ["left"] * len(rights)
    x = np.empty_like(times)
    dx = np.empty_like(times)
    xt = np.empty_like(times)
    dxt = np.empty_like(times)
    k = len(lefts)
    for sl, side in ((slice(0, 2 * k), "right"), (slice(2 * k, 3 * k), "left")):
        x[sl], dx[sl] = traj.eval_many(times[sl], side=side, want_ddx=False)
        xt[sl], dxt[sl] = traj.eval_many(delayed[sl], side=side, want_ddx=False)
    return stops, node_pos, lefts, mids, rights, hs, times, delayed, x, dx, xt, dxt


def first_variation(problem: HerglotzProblem, traj: Trajectory, zpath: ZPath,
                    eta: VariationDirection) -> float:
    """Directional derivative zeta(b) of z(b) along the admissible direction."""
    (stops, _, lefts, mids, rights, hs,
     times, delayed, x, dx, xt, dxt) = _panel_samples(problem, traj)
    zs = zpath.z_at(times)
    lam = zpath.lambda_at(times)
    bind = {"t": times, "x": x, "dx": dx, "xtau": xt, "dxtau": dxt, "z": zs}
    p2 = expr.partial(problem.lagrangian, "x", bind)
    p3 = expr.partial(problem.lagrangian, "dx", bind)
    p4 = expr.partial(problem.lagrangian, "xtau", bind)
    p5 = expr.partial(problem.lagrangian, "dxtau", bind)
    eta_s, deta_s = eta.eval_many(times)
    # delayed reads are one-sided like the trajectory reads: panel right
    # endpoints take the left limit, so a kink of eta(s - tau) at s = a + tau
    # never leaks across its panel boundary
    k2 = 2 * len(lefts)
    eta_d = np.empty_like(times)
    deta_d = np.empty_like(times)
    eta_d[:k2], deta_d[:k2] = eta.eval_many(delayed[:k2], side="right")
    eta_d[k2:], deta_d[k2:] = eta.eval_many(delayed[k2:], side="left")
    f = lam * (np.asarray(p2) * eta_s + np.asarray(p3) * deta_s
               + np.asarray(p4) * eta_d + np.asarray(p5) * deta_d)
    k = len(lefts)
    fl, fm, fr = f[:k], f[k:2 * k], f[2 * k:]
    total = float(np.sum(hs / 6.0 * (fl + 4.0 * fm + fr)))
    if not isfinite(total):
        raise NonFinite("first variation is non-finite")
    return total / zpath.lambda_b
