"""Direct fixed-step integration of -u'' + V u = k^2 u.

Deliberately low-tech: classical RK4 on (u, u') with a uniform step inside
every gap between breakpoints (requested samples and table nodes), so a
piecewise-constant table is never stepped across.  It shares no right-hand
side code with the Pruefer integrator; the feedback family is accepted only
through an exported table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernel
from .core import Trajectory
from .potential import PotentialError, PotentialSpec, evaluate_array

LN2 = math.log(2.0)

TOLERANCE_PROFILES = {
    "exact": 1e-8,
    "smooth": 1e-6,
    "table": 1e-4,
}


@dataclass(eq=False)
class WaveTrajectory:
    """Samples of the solution; the true values are ``(u, up) * exp(log_scale)``."""

    spec: PotentialSpec
    k: float
    u0: float
    up0: float
    step: float
    x: np.ndarray
    u: np.ndarray
    up: np.ndarray
    log_scale: np.ndarray

    def true_u(self) -> np.ndarray:
        return self.u * np.exp(self.log_scale)


def _substep_grid(breaks: np.ndarray, step: float):
    gaps = np.diff(breaks)
    counts = np.maximum(1, np.ceil(gaps / step * (1 - 1e-12)).astype(np.int64))
    starts = np.concatenate([[0], np.cumsum(counts)])
    owner = np.repeat(np.arange(gaps.size), counts)
    local = np.arange(starts[-1]) - starts[owner]
    left = breaks[owner] + gaps[owner] * (local / counts[owner])
    grid = np.concatenate([left, breaks[-1:]])
    # Breakpoints themselves must be hit exactly.
    grid[starts] = breaks
    return grid, starts


def integrate_direct(spec: PotentialSpec, k: float, u0: float, u0_prime: float,
                     x_end: float, step: float,
                     sample_x=None) -> WaveTrajectory:
    """Integrate u'' = (V - k^2) u on [0, x_end] with RK4.

    ``step`` is an upper bound; every gap between breakpoints is divided
    evenly.  ``sample_x`` selects the recorded points (default: every node).
    """
    if spec.is_feedback:
        raise PotentialError("the oracle evaluates feedback potentials only "
                             "through an exported table")
    if not (k > 0 and x_end > 0 and step > 0):
        raise ValueError("need k, x_end, step > 0")
    if step > math.pi / (20.0 * k):
        raise ValueError(f"step {step:g} does not resolve the oscillation; "
                         f"need <= pi/(20k) = {math.pi / (20 * k):.4g}")
    if u0 == 0.0 and u0_prime == 0.0:
        raise ValueError("initial data (0, 0) gives the trivial solution")
    breaks = [np.array([0.0, float(x_end)])]
    piecewise_constant = False
    if spec.variant == "tabulated":
        g = spec.grid
        if g[0] > 0.0 or g[-1] < x_end:
            raise PotentialError(f"table covers [{g[0]:g}, {g[-1]:g}], "
                                 f"oracle needs [0, {x_end:g}]")
        breaks.append(g[(g > 0.0) & (g < x_end)])
        piecewise_constant = spec.interpolation == "constant"
    if sample_x is not None:
        sx = np.asarray(sample_x, dtype=float)
        if np.any(sx < 0) or np.any(sx > x_end):
            raise ValueError("sample points must lie in [0, x_end]")
        breaks.append(sx)
    breaks = np.unique(np.concatenate(breaks))
    grid, starts = _substep_grid(breaks, step)

    left, right = grid[:-1], grid[1:]
    mid = 0.5 * (left + right)
    v_mid = evaluate_array(spec, mid)
    if piecewise_constant:
        v_left = v_right = v_mid
    else:
        v_left = evaluate_array(spec, left)
        v_right = evaluate_array(spec, right)

    if sample_x is None:
        record = np.ones(grid.size, dtype=bool)
    else:
        record = np.zeros(grid.size, dtype=bool)
        wanted = np.isin(breaks, sx)
        record[starts[wanted]] = True
    u, up, e2 = kernel.rk4_march(grid, v_left, v_mid, v_right, float(k),
                                 float(u0), float(u0_prime), record)
    return WaveTrajectory(spec=spec, k=float(k), u0=float(u0),
                          up0=float(u0_prime), step=float(step),
                          x=grid[record], u=np.asarray(u),
                          up=np.asarray(up),
                          log_scale=np.asarray(e2, dtype=float) * LN2)


def matched_initial_data(theta0: float, k: float,
                         logR0: float = 0.0) -> tuple[float, float]:
    """(u(0), u'(0)) = (R0 sin theta0, k R0 cos theta0)."""
    r = math.exp(logR0)
    return r * math.sin(theta0), k * r * math.cos(theta0)


@dataclass(frozen=True)
class DiscrepancyReport:
    max_dtheta: float
    max_dlogR: float
    x_range: tuple[float, float]
    n_points: int
    profile: str
    tolerance: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "max_dtheta": self.max_dtheta,
            "max_dlogR": self.max_dlogR,
            "x_range": list(self.x_range),
            "n_points": self.n_points,
            "pass": self.passed,
            "profile": self.profile,
            "tolerance": self.tolerance,
        }


def cross_check(ptraj: Trajectory, wtraj: WaveTrajectory, k: float,
                profile: str = "smooth",
                x_range: tuple[float, float] | None = None) -> DiscrepancyReport:
    """Compare the two representations at their common sample points."""
    if profile not in TOLERANCE_PROFILES:
        raise ValueError(f"unknown tolerance profile {profile!r}")
    u0, up0 = matched_initial_data(ptraj.config.theta0, k, ptraj.logR[0])
    scale = max(1.0, abs(u0), abs(up0))
    if (abs(wtraj.u0 - u0) > 1e-12 * scale
            or abs(wtraj.up0 - up0) > 1e-12 * scale or wtraj.k != k):
        raise ValueError("oracle initial data do not match the Pruefer "
                         f"start: expected ({u0:.17g}, {up0:.17g}) at k={k}")
    common, ip, iw = np.intersect1d(ptraj.x, wtraj.x, return_indices=True)
    if x_range is not None:
        sel = (common >= x_range[0]) & (common <= x_range[1])
        common, ip, iw = common[sel], ip[sel], iw[sel]
    if common.size == 0:
        raise ValueError("no common sample points")
    u, up = wtraj.u[iw], wtraj.up[iw]
    c = up / k
    base = np.arctan2(u, c)
    hint = ptraj.theta[ip]
    theta = base + 2.0 * np.pi * np.round((hint - base) / (2.0 * np.pi))
    logr = np.log(np.hypot(u, c)) + wtraj.log_scale[iw]
    dth = float(np.max(np.abs(theta - hint)))
    dlr = float(np.max(np.abs(logr - ptraj.logR[ip])))
    tol = TOLERANCE_PROFILES[profile]
    return DiscrepancyReport(
        max_dtheta=dth, max_dlogR=dlr,
        x_range=(float(common[0]), float(common[-1])),
        n_points=int(common.size), profile=profile, tolerance=tol,
        passed=bool(dth <= tol and dlr <= tol))


def l2_norm_tail(traj, x_lo: float) -> float:
    """Integral of R^2 (Pruefer trajectory) or u^2 (wave trajectory) from
    ``x_lo`` to the last sample.

    Pruefer samples are integrated exactly under piecewise power-law
    interpolation of R^2 (log R linear in log x); wave samples use the
    trapezoidal rule and need a grid that resolves the oscillation.
    """
    x = np.asarray(traj.x)
    if not x[0] <= x_lo < x[-1]:
        raise ValueError(f"x_lo={x_lo:g} outside [{x[0]:g}, {x[-1]:g})")
    if isinstance(traj, WaveTrajectory):
        u = traj.true_u()
        i = int(np.searchsorted(x, x_lo, side="right"))
        xs = np.concatenate([[x_lo], x[i:]])
        us = np.concatenate([[np.interp(x_lo, x, u)], u[i:]])
        return float(np.trapezoid(us * us, xs))
    if x_lo <= 0:
        raise ValueError("power-law tail quadrature needs x_lo > 0")
    lx = np.log(x[x > 0])
    ly = 2.0 * np.asarray(traj.logR)[x > 0]
    t0 = math.log(x_lo)
    i = int(np.searchsorted(lx, t0, side="right"))
    ts = np.concatenate([[t0], lx[i:]])
    ys = np.concatenate([[np.interp(t0, lx, ly)], ly[i:]])
    # integral of exp(y(t) + t) dt with y linear on each cell
    dt = np.diff(ts)
    g0 = ys[:-1] + ts[:-1]
    g1 = ys[1:] + ts[1:]
    dg = g1 - g0
    e0 = np.exp(g0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cell = np.where(np.abs(dg) > 1e-12, e0 * np.expm1(dg) / dg * dt,
                        e0 * dt * (1 + 0.5 * dg))
    return float(cell.sum())
