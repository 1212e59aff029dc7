"""Expanding-ball construction of entire solutions and checkers for the
local uniform bound sup_{B_r}|u| <= sup_{B_r} phi_{2r} + C r ||f^-||_{L^n}
and for the growth profile (u^+)^s / |x|^{mu s rho / 2}.

All balls share one center and one spacing, so solutions on different radii
live on nested sublattices and can be compared node-by-node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .barrier import barrier_constants, exponent_mu
from .core import BallGrid, ScalarField, build_ball_grid, norm
from .operators import CheckReport
from .solver import ProblemSpec, solve_dirichlet


@dataclass(frozen=True)
class EntireRun:
    problem: ProblemSpec
    radii: tuple
    fields: tuple          # ScalarField per radius
    reports: tuple         # SolveReport per radius
    stabilization: tuple   # rows {k, k_next, j, sup_diff}
    flagged: bool          # any non-convergent solve

    @property
    def h(self) -> float:
        return self.fields[0].grid.h

    @property
    def center(self) -> np.ndarray:
        return self.fields[0].grid.center


def constant_family(value: float) -> Callable:
    """Boundary family g_k = value for every radius."""
    def family(k):
        return lambda x: value
    return family


def function_family(fn: Callable) -> Callable:
    """Boundary family g_k = fn restricted to each sphere."""
    def family(k):
        return fn
    return family


def _lattice_index(grid: BallGrid) -> dict:
    return {tuple(p): i for i, p in enumerate(grid.lattice[: grid.n_interior])}


def _warm_start(grid: BallGrid, prev: Optional[ScalarField]) -> Optional[np.ndarray]:
    """Seed interior values from the previous (smaller) solution where the
    lattices overlap; leave None to fall back on radial interpolation."""
    if prev is None:
        return None
    small = _lattice_index(prev.grid)
    vals = np.zeros(grid.n_interior)
    filled = np.zeros(grid.n_interior, dtype=bool)
    for i, p in enumerate(grid.lattice[: grid.n_interior]):
        j = small.get(tuple(p))
        if j is not None:
            vals[i] = prev.values[j]
            filled[i] = True
    if not filled.all():
        # new rim nodes start from the mean of the already-known values
        vals[~filled] = float(vals[filled].mean()) if filled.any() else 0.0
    return vals


def sup_difference(a: ScalarField, b: ScalarField, radius: float,
                   center=None) -> float:
    """sup |a - b| over interior lattice nodes with |x - center| < radius,
    matched through the shared integer lattice."""
    ga, gb = a.grid, b.grid
    if abs(ga.h - gb.h) > 1e-15 or np.any(np.abs(ga.center - gb.center) > 1e-15):
        raise ValueError("fields must share spacing and center")
    if center is None:
        center = ga.center
    center = np.atleast_1d(np.asarray(center, dtype=float))
    idx_b = _lattice_index(gb)
    best = 0.0
    found = False
    pts = ga.interior_nodes
    dist = np.linalg.norm(pts - center[None, :], axis=1)
    for i in np.nonzero(dist < radius)[0]:
        j = idx_b.get(tuple(ga.lattice[i]))
        if j is not None:
            found = True
            best = max(best, abs(float(a.values[i]) - float(b.values[j])))
    if not found:
        raise ValueError("no shared nodes in the requested ball")
    return best


def construct_entire(problem: ProblemSpec, k_max: int, boundary_family: Callable,
                     tol: float, h: float, max_iter: int, center=None,
                     warm_start: bool = True) -> EntireRun:
    """Solve the Dirichlet problem on B_k for k = 1..k_max and record the
    stabilization table sup_{B_j}|u_k - u_{k+1}| for j < k."""
    if k_max < 1:
        raise ValueError("k_max >= 1 required")
    n = 1
    if center is not None:
        n = len(np.atleast_1d(center))
    else:
        center = np.zeros(1)
    fields, reports = [], []
    flagged = False
    prev = None
    for k in range(1, k_max + 1):
        grid = build_ball_grid(center, float(k), h, n)
        initial = _warm_start(grid, prev) if warm_start else None
        sol, rep = solve_dirichlet(problem, grid, boundary_family(k), tol,
                                   max_iter, initial=initial)
        fields.append(sol)
        reports.append(rep)
        if not rep.converged:
            flagged = True
            break
        prev = sol
    rows = []
    for i in range(len(fields) - 1):
        k = i + 1
        for j in range(1, k):
            rows.append({"k": k, "k_next": k + 1, "j": j,
                         "sup_diff": sup_difference(fields[i], fields[i + 1],
                                                    float(j), center)})
    return EntireRun(problem=problem, radii=tuple(range(1, len(fields) + 1)),
                     fields=tuple(fields), reports=tuple(reports),
                     stabilization=tuple(rows), flagged=flagged)


def separation_table(run_a: EntireRun, run_b: EntireRun,
                     radius: float = 1.0) -> list[dict]:
    """sup_{B_radius}|u_k^a - u_k^b| per shared radius k."""
    rows = []
    for k in sorted(set(run_a.radii) & set(run_b.radii)):
        a = run_a.fields[run_a.radii.index(k)]
        b = run_b.fields[run_b.radii.index(k)]
        rows.append({"k": k, "separation": sup_difference(a, b, radius)})
    return rows


def fit_decay_exponent(radii: Sequence[float], values: Sequence[float],
                       discard: int = 2) -> float:
    """Least-squares slope of log(value) vs log(radius), sign-flipped so a
    decay C/k^e yields +e. The first `discard` radii are dropped (tail fit)."""
    r = np.asarray(radii, dtype=float)[discard:]
    v = np.asarray(values, dtype=float)[discard:]
    keep = v > 0
    if keep.sum() < 2:
        raise ValueError("need at least two positive tail values to fit")
    slope = np.polyfit(np.log(r[keep]), np.log(v[keep]), 1)[0]
    return float(-slope)


def _negative_part_norm(f_field: ScalarField, center, radius: float) -> float:
    neg = ScalarField(grid=f_field.grid,
                      values=np.clip(-f_field.values, 0.0, None))
    return norm(neg, kind="lp", p=f_field.grid.n, center=center, radius=radius)


def local_bound(r: float, center, f_field: ScalarField, params: dict,
                C_emp: float = 0.0, delta_hat: float = 1.0,
                r_max: float = 0.5, c0_scale: float = 1.0) -> float:
    """The Lemma-style bound sup_{B_r} phi_{2r} + C_emp r ||f^-||_{L^n(B_2r)}.

    The barrier part uses gamma = 2^{m-1} gamma_m, delta = 1, R = 2r, giving
    sup_{|x|=r} phi_{2r} = C_{2r} (2/3)^mu r^{-mu}. c0_scale rescales the
    barrier term (falsification knob). params needs s, m, n, Lam, gamma1,
    gamma_m.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if r > r_max:
        raise ValueError(f"r={r} exceeds the smallness threshold r_max={r_max}")
    s, m, n = params["s"], params["m"], params["n"]
    spec = barrier_constants(s=s, m=m, n=n, Lam=params["Lam"],
                             gamma1=params["gamma1"],
                             gamma=2.0 ** (m - 1.0) * params["gamma_m"],
                             delta=1.0, R=2.0 * r)
    fn_norm = _negative_part_norm(f_field, center, 2.0 * r)
    if fn_norm * 4.0 * r >= delta_hat:
        raise ValueError("ABP smallness violated: ||f^-|| * diam >= delta_hat")
    barrier_term = c0_scale * spec.C_R * (2.0 / 3.0) ** spec.mu * r ** (-spec.mu)
    return barrier_term + C_emp * r * fn_norm


def fit_abp_constant(problem_factory: Callable, const_values: Sequence[float],
                     r: float, h: float, tol: float, max_iter: int,
                     n: int = 1, safety: float = 2.0) -> float:
    """Empirical ABP constant from a calibration set of f = -const problems.

    problem_factory(f) must return a ProblemSpec sharing F, H, s. For each
    constant c > 0 the Dirichlet problem on B_2r with zero boundary is
    solved and sup_{B_r} u^+ / (r ||f^-||) recorded; the fit is the safety
    factor times the calibration maximum.
    """
    center = np.zeros(n)
    grid = build_ball_grid(center, 2.0 * r, h, n)
    best = 0.0
    for c in const_values:
        if c <= 0:
            raise ValueError("calibration constants must be positive")
        problem = problem_factory(lambda x, c=c: -c)
        sol, rep = solve_dirichlet(problem, grid, lambda x: 0.0, tol, max_iter)
        if not rep.converged:
            raise ValueError("calibration solve did not converge")
        plus = ScalarField(grid=grid, values=np.clip(sol.values, 0.0, None))
        sup_plus = norm(plus, kind="sup", center=center, radius=r)
        fn = norm(ScalarField(grid=grid, values=np.full(len(grid.nodes), c)),
                  kind="lp", p=n, center=center, radius=2.0 * r)
        best = max(best, sup_plus / (r * fn))
    return safety * best


def check_local_bound(run: EntireRun, r: float, center, C_emp: float,
                      delta_hat: float = 1.0, r_max: float = 0.5,
                      c0_scale: float = 1.0) -> CheckReport:
    """Margin = local_bound - sup_{B_r(center)}|u_k| for every solution in
    the run whose ball covers B_2r(center)."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    problem = run.problem
    H = problem.H
    ell = problem.ellipticity
    off = float(np.linalg.norm(center - run.center))
    covered = [(k, f) for k, f in zip(run.radii, run.fields)
               if k >= off + 2.0 * r - 1e-12]
    if not covered:
        raise ValueError("no solution in the run covers B_2r(center)")
    grid = covered[-1][1].grid
    if isinstance(problem.f, ScalarField):
        f_field = problem.f
    else:
        f_field = ScalarField(grid=grid, values=np.asarray(
            [float(problem.f(x)) for x in grid.nodes]))
    params = {"s": problem.s, "m": H.m, "n": grid.n, "Lam": ell.Lam,
              "gamma1": H.gamma1, "gamma_m": H.gamma_m}
    bound = local_bound(r, center, f_field, params, C_emp=C_emp,
                        delta_hat=delta_hat, r_max=r_max, c0_scale=c0_scale)
    worst = np.inf
    witness: dict = {}
    for k, f in covered:
        sup_u = norm(f, kind="sup", center=center, radius=r)
        margin = bound - sup_u
        if margin < worst:
            worst = margin
            witness = {"k": k, "sup_u": sup_u, "bound": bound}
    return CheckReport(condition="local_bound", samples=len(covered),
                       worst_margin=float(worst), witness=witness)


def rho_threshold(s: float, m: float) -> float:
    """Growth threshold 2 m' / (mu s) with m' the conjugate exponent of m."""
    if m <= 1.0:
        raise ValueError("threshold requires m > 1")
    if m >= s:
        raise ValueError("threshold requires m < s")
    m_conj = m / (m - 1.0)
    return 2.0 * m_conj / (exponent_mu(s, m) * s)


def rho_threshold_closed_form(s: float, m: float) -> float:
    """Branchwise closed form: m(s-1)/((m-1)s) for m <= 2s/(s+1), else
    2(s-m)/(s(m-1))."""
    if m <= 1.0 or m >= s:
        raise ValueError("need 1 < m < s")
    if m <= 2.0 * s / (s + 1.0):
        return m * (s - 1.0) / ((m - 1.0) * s)
    return 2.0 * (s - m) / (s * (m - 1.0))


def growth_profile(problem: ProblemSpec, radii: Sequence[int], rho: float,
                   h: float, tol: float, max_iter: int) -> dict:
    """Shell maxima of (u^+)^s / |x|^{mu s rho / 2} for f = -(1 + |x|^rho).

    Solves on expanding balls with zero boundary data and tabulates the
    ratio over unit spherical shells of the largest solution; the verdict
    reports whether the tail of shell maxima is non-increasing.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    s, m = problem.s, problem.H.m
    if not m < s:
        raise ValueError("growth profile requires s > m")
    mu = exponent_mu(s, m)
    expo = mu * s * rho / 2.0

    def f(x):
        return -(1.0 + float(np.linalg.norm(np.atleast_1d(x))) ** rho)

    prob = ProblemSpec(F=problem.F, H=problem.H, s=s, f=f)
    run = construct_entire(prob, int(max(radii)), constant_family(0.0),
                           tol, h, max_iter)
    u = run.fields[-1]
    grid = u.grid
    dist = np.linalg.norm(grid.interior_nodes - grid.center[None, :], axis=1)
    uplus = np.clip(u.interior_values, 0.0, None)
    rows = []
    for j in range(1, int(max(radii))):
        mask = (dist >= j) & (dist < j + 1)
        if not mask.any():
            continue
        ratio = float((uplus[mask] ** s / dist[mask] ** expo).max())
        rows.append({"shell": j, "ratio": ratio})
    tail = [row["ratio"] for row in rows[-3:]]
    bounded = all(tail[i + 1] <= tail[i] * 1.05 for i in range(len(tail) - 1))
    return {"rows": rows, "exponent": expo, "bounded_tail": bounded,
            "flagged": run.flagged}
