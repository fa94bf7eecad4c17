"""Direct transcription: free node values, objective z(b), exact gradient.

The decision variables are the node values strictly between a and b; the
history segment is pinned by the initial function and x(b) by the endpoint
condition. The gradient of z(b) with respect to node j is the first variation
along that node's unit direction, which by linearity of spline interpolation
is exactly the direction the trajectory moves when the node is perturbed, so
the analytic gradient and the central-difference oracle agree to quadrature
precision.

The descent loop is L-BFGS (memory 10) with Armijo backtracking; accepted
steps decrease the working objective monotonically, and maximize problems
run on the negated objective. Desk-scale problem sizes keep the dense
basis-matrix gradient assembly cheap; the basis is cached per grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import BadInterval, NonFinite
from . import expr
from .integrate import ZPath, _panel_samples, integrate_z
from .trajectory import HerglotzProblem, SampledTrajectory, seed_trajectory

_LBFGS_MEMORY = 10
_MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class SolveOptions:
    """Descent controls. Defaults: 1000 iterations, stop at gradient
    inf-norm 1e-6, Armijo constant 1e-4, step shrink 0.5, unit initial step,
    linear seed between delta(a) and beta."""

    max_iters: int = 1000
    grad_tol: float = 1e-6
    armijo_c: float = 1e-4
    shrink: float = 0.5
    initial_step: float = 1.0
    seed_guess: Union[str, Sequence[float]] = "linear"

    def __post_init__(self):
        if self.max_iters < 0:
            raise BadInterval("max_iters must be >= 0")
        if not (self.grad_tol > 0 and self.initial_step > 0):
            raise BadInterval("grad_tol and initial_step must be positive")
        if not (0.0 < self.armijo_c < 1.0 and 0.0 < self.shrink < 1.0):
            raise BadInterval("armijo_c and shrink must lie in (0, 1)")


@dataclass
class SolveResult:
    trajectory: SampledTrajectory
    z_b: float
    iterations: int
    final_grad_norm: float
    converged: bool
    objective_history: list = field(repr=False)

    def summary(self) -> dict:
        return {
            "z_b": self.z_b,
            "iterations": self.iterations,
            "final_grad_norm": self.final_grad_norm,
            "converged": self.converged,
            "objective_history": list(self.objective_history),
        }


class _Basis:
    """Unit-direction spline values/derivatives at the quadrature samples of a
    grid, at the samples themselves and at their delayed images."""

    def __init__(self, grid, times, delayed):
        nfree = grid.n - 1
        main = grid.main_nodes
        self.E = np.empty((len(times), nfree))
        self.D = np.empty((len(times), nfree))
        self.Ed = np.zeros((len(times), nfree))
        self.Dd = np.zeros((len(times), nfree))
        # delayed reads in the last third (panel right endpoints) take the
        # left limit: at exactly s - tau = a the direction is flat-zero
        inside = delayed >= grid.a
        k2 = 2 * (len(times) // 3)
        inside[k2:] = delayed[k2:] > grid.a
        din = delayed[inside]
        e = np.zeros(grid.n + 1)
        for col in range(nfree):
            e[col + 1] = 1.0
            cs = CubicSpline(main, e, bc_type="natural")
            e[col + 1] = 0.0
            self.E[:, col] = cs(times)
            self.D[:, col] = cs(times, 1)
            if np.any(inside):
                self.Ed[inside, col] = cs(din)
                self.Dd[inside, col] = cs(din, 1)


_BASIS_CACHE: dict = {}
_BASIS_CACHE_MAX_N = 512


def _basis_for(problem: HerglotzProblem, times, delayed) -> _Basis:
    # keyed on the actual sample times: trajectories with different kink
    # positions produce different quadrature panels on the same grid
    key = (problem.grid.key(), times.tobytes())
    basis = _BASIS_CACHE.get(key)
    if basis is None:
        basis = _Basis(problem.grid, times, delayed)
        if len(_BASIS_CACHE) > 8:
            _BASIS_CACHE.clear()
        _BASIS_CACHE[key] = basis
    return basis


def _accumulate_directions(grid, times, delayed, c0, c1, c2, c3) -> np.ndarray:
    """Pair the coefficient vectors with every unit direction one column at a
    time; same arithmetic as the cached dense basis without the O(n^2) memory,
    for grids too large to keep the matrices around."""
    main = grid.main_nodes
    inside = delayed >= grid.a
    k2 = 2 * (len(times) // 3)
    inside[k2:] = delayed[k2:] > grid.a
    din = delayed[inside]
    c2_in = c2[inside]
    c3_in = c3[inside]
    out = np.empty(grid.n - 1)
    e = np.zeros(grid.n + 1)
    for col in range(grid.n - 1):
        e[col + 1] = 1.0
        cs = CubicSpline(main, e, bc_type="natural")
        e[col + 1] = 0.0
        acc = cs(times) @ c0 + cs(times, 1) @ c1
        if len(din):
            acc += cs(din) @ c2_in + cs(din, 1) @ c3_in
        out[col] = acc
    return out


def variational_gradient(problem: HerglotzProblem, traj: SampledTrajectory,
                         zpath: ZPath) -> np.ndarray:
    """d z(b) / d x_j for every free node j (indices m+1 .. n+m-1), computed
    in one quadrature pass from the first-variation integral; the sign is
    flipped for maximize problems so descent always means improvement.

    The solver drives sampled trajectories, but any trajectory backend is
    accepted: the entries are then the first variations along the unit node
    directions of the grid."""
    (stops, _, lefts, mids, rights, hs,
     times, delayed, x, dx, xt, dxt) = _panel_samples(problem, traj)
    zs = zpath.z_at(times)
    lam = zpath.lambda_at(times)
    bind = {"t": times, "x": x, "dx": dx, "xtau": xt, "dxtau": dxt, "z": zs}
    k = len(lefts)
    w = np.empty(3 * k)
    w[:k] = hs / 6.0
    w[k:2 * k] = 4.0 * hs / 6.0
    w[2 * k:] = hs / 6.0

    def coeff(name):
        p = np.asarray(expr.partial(problem.lagrangian, name, bind), dtype=float)
        return w * lam * np.broadcast_to(p, times.shape)

    c0, c1, c2, c3 = coeff("x"), coeff("dx"), coeff("xtau"), coeff("dxtau")
    if problem.grid.n <= _BASIS_CACHE_MAX_N:
        basis = _basis_for(problem, times, delayed)
        g = basis.E.T @ c0 + basis.D.T @ c1 + basis.Ed.T @ c2 + basis.Dd.T @ c3
    else:
        g = _accumulate_directions(problem.grid, times, delayed, c0, c1, c2, c3)
    g /= zpath.lambda_b
    if problem.sense == "maximize":
        g = -g
    return g


def fd_gradient(problem: HerglotzProblem, traj: SampledTrajectory,
                eps: float = 1e-5) -> np.ndarray:
    """Central-difference oracle: perturb each free node by +-eps, re-spline,
    re-integrate. O(number of free nodes) integrations; same sign convention
    as variational_gradient."""
    from .trajectory import perturb

    g = np.empty(problem.grid.n - 1)
    for col, j in enumerate(problem.grid.free_indices):
        zp = integrate_z(problem, perturb(traj, j, +eps)).z_b
        zm = integrate_z(problem, perturb(traj, j, -eps)).z_b
        g[col] = (zp - zm) / (2.0 * eps)
    if problem.sense == "maximize":
        g = -g
    return g


def _two_loop(grad, s_list, y_list):
    q = grad.copy()
    alphas = []
    for s, y in zip(reversed(s_list), reversed(y_list)):
        a = (s @ q) / (y @ s)
        alphas.append(a)
        q -= a * y
    if s_list:
        q *= (s_list[-1] @ y_list[-1]) / (y_list[-1] @ y_list[-1])
    for (s, y), a in zip(zip(s_list, y_list), reversed(alphas)):
        b = (y @ q) / (y @ s)
        q += (a - b) * s
    return q


def solve_direct(problem: HerglotzProblem, opts: Optional[SolveOptions] = None) -> SolveResult:
    """Extremize z(b) over the free node values.

    Each iteration re-splines the trajectory, re-integrates z and lambda,
    takes an L-BFGS step with Armijo backtracking, and records the achieved
    functional value. Terminates on the gradient tolerance or the iteration
    cap; the converged flag reports which.
    """
    opts = opts or SolveOptions()
    base = seed_trajectory(problem, opts.seed_guess)
    g = problem.grid
    free = np.fromiter(g.free_indices, dtype=int)
    sign = -1.0 if problem.sense == "maximize" else 1.0

    def build(xfree: np.ndarray) -> SampledTrajectory:
        values = base.values.copy()
        values[free] = xfree
        return base._with_values(values)

    def objective(xfree: np.ndarray, it: int):
        traj = build(xfree)
        try:
            zpath = integrate_z(problem, traj)
        except NonFinite as e:
            raise NonFinite(f"objective failed at iteration {it}: {e}") from e
        return sign * zpath.z_b, traj, zpath

    x = base.values[free].copy()
    f, traj, zpath = objective(x, 0)
    grad = variational_gradient(problem, traj, zpath)
    history = [sign * f]
    s_list: list = []
    y_list: list = []
    iterations = 0
    converged = False
    for it in range(1, opts.max_iters + 1):
        gnorm = float(np.max(np.abs(grad))) if len(grad) else 0.0
        if gnorm <= opts.grad_tol:
            converged = True
            break
        d = _two_loop(grad, s_list, y_list)
        d = -d
        dg = float(d @ grad)
        if dg >= 0.0:
            d = -grad
            dg = -float(grad @ grad)
        step = opts.initial_step
        accepted = None
        for _ in range(_MAX_BACKTRACKS):
            trial = x + step * d
            f_new, traj_new, zpath_new = objective(trial, it)
            if f_new <= f + opts.armijo_c * step * dg:
                accepted = (trial, f_new, traj_new, zpath_new)
                break
            step *= opts.shrink
        if accepted is None:
            break
        x_new, f_new, traj, zpath = accepted
        grad_new = variational_gradient(problem, traj, zpath)
        s = x_new - x
        y = grad_new - grad
        if (y @ s) > 1e-12 * np.linalg.norm(y) * np.linalg.norm(s):
            s_list.append(s)
            y_list.append(y)
            if len(s_list) > _LBFGS_MEMORY:
                s_list.pop(0)
                y_list.pop(0)
        x, f, grad = x_new, f_new, grad_new
        iterations = it
        history.append(sign * f)
    else:
        pass
    final_gnorm = float(np.max(np.abs(grad))) if len(grad) else 0.0
    if not converged and final_gnorm <= opts.grad_tol:
        converged = True
    return SolveResult(trajectory=traj, z_b=sign * f, iterations=iterations,
                       final_grad_norm=final_gnorm, converged=converged,
                       objective_history=history)
