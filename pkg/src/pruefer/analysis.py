"""Quantities extracted from Pruefer trajectories.

Decay exponents of R, the weighted integral of |sin 2 theta|, per-half-period
integrals, crossing statistics, and the exponent rule that decides whether
k^2 is an embedded eigenvalue (R in L^2 iff the decay exponent exceeds 1/2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import NonMonotoneError, Trajectory, detect_crossings
from .oracle import l2_norm_tail

EMBEDDED = "embedded_eigenvalue"
NOT_EIGENVALUE = "not_eigenvalue"
INCONCLUSIVE = "inconclusive"

DEFAULT_FIT_START = 1e3
MARGIN_FLOOR = 0.02


def max_eigenvalue_bound(a: float) -> float:
    """Largest possible eigenvalue 4 a^2 / pi^2 for limsup |x V(x)| = a."""
    if a < 0:
        raise ValueError("envelope amplitude must be non-negative")
    return 4.0 * a * a / (math.pi * math.pi)


def critical_wavenumber(a: float) -> float:
    """k at which the feedback decay exponent a / (k pi) equals 1/2."""
    return 2.0 * a / math.pi


# -- decay fits -------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    x_lo: float
    x_hi: float
    slope: float
    intercept: float
    residual_rms: float
    n_samples: int

    @property
    def exponent(self) -> float:
        """p in R ~ x^-p (positive for decay)."""
        return -self.slope

    @property
    def slope_scale(self) -> float:
        """Residual RMS per unit of log-window length."""
        return self.residual_rms / math.log(self.x_hi / self.x_lo)

    def to_json(self) -> dict:
        return {
            "fit_window": [self.x_lo, self.x_hi],
            "slope": self.slope,
            "exponent": self.exponent,
            "intercept": self.intercept,
            "residual_rms": self.residual_rms,
            "n_samples": self.n_samples,
        }


def fit_decay_samples(x, logR, window, min_samples: int = 50) -> DecayFit:
    """Least-squares line logR = slope * ln x + intercept over ``window``."""
    lo, hi = float(window[0]), float(window[1])
    if lo < 1.0 or hi / lo < 10.0:
        raise ValueError(f"fit window [{lo:g}, {hi:g}] must start at x >= 1 "
                         "and span at least one decade")
    x = np.asarray(x, dtype=float)
    logR = np.asarray(logR, dtype=float)
    sel = (x >= lo) & (x <= hi)
    n = int(sel.sum())
    if n < min_samples:
        raise ValueError(f"only {n} samples in [{lo:g}, {hi:g}]; need "
                         f"{min_samples}")
    lx = np.log(x[sel])
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(A, logR[sel], rcond=None)
    resid = logR[sel] - (slope * lx + icpt)
    return DecayFit(lo, hi, float(slope), float(icpt),
                    float(np.sqrt(np.mean(resid * resid))), n)


def default_window(traj: Trajectory) -> tuple[float, float]:
    x_end = traj.x_end
    lo = DEFAULT_FIT_START
    if x_end / lo < 100.0:
        lo = x_end / 100.0
    if lo < 1.0:
        raise ValueError(f"x_end={x_end:g} too short for a two-decade window")
    return lo, x_end


def fit_decay(traj: Trajectory, window=None) -> DecayFit:
    if window is None:
        window = default_window(traj)
    if window[0] < traj.x[0] or window[1] > traj.x_end:
        raise ValueError("fit window outside the trajectory")
    return fit_decay_samples(traj.x, traj.logR, window)


# -- quadratures ------------------------------------------------------------

class Quadrature(NamedTuple):
    value: float
    abserr: float


def _boundary_cumulative(traj: Trajectory, which: str):
    if traj.q1 is None:
        raise ValueError("trajectory has no running integrals (loaded from "
                         "file?); re-integrate it")
    q = traj.piece_q1 if which == "q1" else traj.piece_q2
    xb = np.concatenate([[0.0], traj.piece_x1])
    cb = np.concatenate([[0.0], np.cumsum(q)])
    return xb, cb


def _cumulative_nodes(traj: Trajectory, which: str):
    xb, cb = _boundary_cumulative(traj, which)
    xs = np.concatenate([xb, traj.x])
    cs = np.concatenate([cb, traj.q1 if which == "q1" else traj.q2])
    xs, idx = np.unique(xs, return_index=True)
    return xs, cs[idx]


def _cumulative_at(xs, cs, x):
    j = int(np.searchsorted(xs, x))
    if j < xs.size and xs[j] == x:
        return float(cs[j]), 0.0
    if j == 0 or j == xs.size:
        raise ValueError(f"x={x:g} outside the trajectory")
    val = cs[j - 1] + (cs[j] - cs[j - 1]) * (x - xs[j - 1]) / (xs[j] - xs[j - 1])
    return float(val), float(0.5 * abs(cs[j] - cs[j - 1]))


def weighted_sin_integral(traj: Trajectory, x0: float, x: float) -> Quadrature:
    """Integral of |sin 2 theta(y)| / (1 + y) over [x0, x].

    Built from per-half-period quadratures recorded during integration;
    exact (to integrator tolerance) when both ends are sample or crossing
    points, otherwise a linear interpolation whose error bound is reported.
    """
    if x0 < 1.0 or not x > x0:
        raise ValueError("need 1 <= x0 < x")
    if x > traj.x_end:
        raise ValueError("upper limit beyond the trajectory")
    xs, cs = _cumulative_nodes(traj, "q2")
    gap = np.max(np.diff(xs[(xs >= x0) & (xs <= x)]), initial=0.0)
    half_period = math.pi / (2.0 * traj.config.k)
    if gap > 2.0 * half_period and traj.piece_x1.size < 2:
        raise ValueError("samples too sparse for the oscillation scale")
    v1, e1 = _cumulative_at(xs, cs, x)
    v0, e0 = _cumulative_at(xs, cs, x0)
    return Quadrature(v1 - v0, e0 + e1)


class PeriodIntegral(NamedTuple):
    index: int
    value: float
    deviation: float


def per_period_integrals(traj: Trajectory, x0: float = 0.0):
    """Integral of |sin 2 theta| between consecutive crossings.

    Returns ``(index, values)`` where ``values[j]`` covers
    [x_i, x_{i+1}] with ``i = index[j]``.
    """
    cr = detect_crossings(traj, x0)
    if len(cr) < 2:
        raise ValueError("fewer than two crossings recorded")
    xb, cb = _boundary_cumulative(traj, "q1")
    pos = np.searchsorted(xb, cr.x)
    if np.any(xb[np.minimum(pos, xb.size - 1)] != cr.x):
        raise ValueError("crossings do not coincide with piece boundaries")
    c = cb[pos]
    return cr.index[:-1], np.diff(c)


def per_period_integral(traj: Trajectory, i: int) -> PeriodIntegral:
    idx, vals = per_period_integrals(traj)
    hit = np.nonzero(idx == i)[0]
    if hit.size == 0:
        raise ValueError(f"crossings {i} and {i + 1} are not both recorded")
    v = float(vals[hit[0]])
    return PeriodIntegral(int(i), v, v - 1.0 / traj.config.k)


@dataclass(frozen=True)
class DecayConstant:
    """Fit of |deviation_i| <= C / (1 + i)."""

    C: float
    scaled: np.ndarray
    index: np.ndarray
    decaying: bool


def period_deviation_constant(traj: Trajectory, i_min: int = 10,
                              i_max: int | None = None) -> DecayConstant:
    idx, vals = per_period_integrals(traj)
    dev = np.abs(vals - 1.0 / traj.config.k)
    sel = idx >= i_min
    if i_max is not None:
        sel &= idx <= i_max
    scaled = dev[sel] * (1.0 + idx[sel])
    C = float(scaled.max())
    # block maxima of the raw deviations must shrink
    blocks = np.array_split(dev[sel], 4)
    maxima = [b.max() for b in blocks if b.size]
    decaying = bool(all(b <= a for a, b in zip(maxima, maxima[1:])))
    return DecayConstant(C, scaled, idx[sel], decaying)


@dataclass(frozen=True)
class SpacingStats:
    index: np.ndarray
    spacing: np.ndarray
    scaled_deviation: np.ndarray
    bound: float
    trend: float


def crossing_spacing(traj: Trajectory, i_min: int = 10,
                     i_max: int | None = None) -> SpacingStats:
    """|(x_{i+1} - x_i) - pi/(2k)| (x_i + 1) over i in [i_min, i_max].

    ``trend`` is the least-squares slope of the scaled deviation against
    ln i, in units of its mean; a bounded sequence has trend near zero.
    """
    cr = detect_crossings(traj)
    k = traj.config.k
    sp = np.diff(cr.x)
    idx = cr.index[:-1]
    scaled = np.abs(sp - math.pi / (2.0 * k)) * (cr.x[:-1] + 1.0)
    sel = idx >= i_min
    if i_max is not None:
        sel &= idx <= i_max
    s = scaled[sel]
    li = np.log(idx[sel].astype(float))
    slope = np.polyfit(li, s, 1)[0] if s.size > 2 else 0.0
    mean = float(s.mean()) if s.size else 0.0
    return SpacingStats(idx[sel], sp[sel], s, float(s.max(initial=0.0)),
                        float(slope / mean) if mean > 0 else 0.0)


# -- envelope of log R ------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeCheck:
    x_lo: float
    x_hi: float
    g_min: float
    g_max: float
    spread: float
    trend: float
    decade_spreads: tuple[float, ...]
    bounded: bool


def lower_envelope_check(traj: Trajectory, a: float, k: float,
                         window=None, spread_limit: float = 1.0) -> EnvelopeCheck:
    """g(x) = logR(x) + (a / (k pi)) ln x over the window.

    Both one-sided estimates hold with O(1) remainders exactly when g stays
    bounded; ``trend`` is the slope of g against ln x.
    """
    traj.require_complete()
    lo, hi = window if window is not None else (1e2, traj.x_end)
    if hi / lo < 1e3 - 1e-9:
        raise ValueError("envelope check needs at least three decades")
    sel = (traj.x >= lo) & (traj.x <= hi)
    lx = np.log(traj.x[sel])
    g = traj.logR[sel] + a / (k * math.pi) * lx
    trend = float(np.polyfit(lx, g, 1)[0])
    edges = np.arange(math.floor(math.log10(lo)), math.ceil(math.log10(hi)))
    spreads = []
    for e in edges:
        d = (traj.x[sel] >= 10.0 ** e) & (traj.x[sel] <= 10.0 ** (e + 1))
        if d.any():
            spreads.append(float(np.ptp(g[d])))
    spread = float(g.max() - g.min())
    return EnvelopeCheck(float(lo), float(hi), float(g.min()), float(g.max()),
                         spread, trend, tuple(spreads), spread <= spread_limit)


# -- verdict ----------------------------------------------------------------

@dataclass(frozen=True)
class EigenvalueVerdict:
    a: float
    k: float
    lam: float
    threshold: float
    predicted_exponent: float
    fitted_exponent: float
    fit: DecayFit
    tail_l2: float
    verdict: str
    margin: float
    margin_floor: float
    diagnostic: str = ""

    def to_json(self) -> dict:
        return {
            "a": self.a,
            "k": self.k,
            "lambda": self.lam,
            "threshold": self.threshold,
            "predicted_exponent": self.predicted_exponent,
            "fitted_exponent": self.fitted_exponent,
            "fit_window": [self.fit.x_lo, self.fit.x_hi],
            "fit_residual": self.fit.residual_rms,
            "tail_l2": self.tail_l2,
            "verdict": self.verdict,
            "margin": self.margin,
        }


def verdict(traj: Trajectory, a: float, k: float,
            window=None) -> EigenvalueVerdict:
    """Decide whether k^2 is an eigenvalue from the decay exponent of R.

    R ~ x^-p is square integrable iff p > 1/2.  The decision needs
    |p - 1/2| > max(0.02, 3 * rms / ln(x_hi / x_lo)); ``margin`` is
    (p - 1/2) in units of that floor.  An exponent above 1/2 at an energy
    above 4a^2/pi^2 contradicts the bound and is reported as inconclusive.
    """
    traj.require_complete()
    fit = fit_decay(traj, window)
    p = fit.exponent
    floor = max(MARGIN_FLOOR, 3.0 * fit.slope_scale)
    lam = k * k
    thr = max_eigenvalue_bound(a)
    diag = ""
    if p > 0.5 + floor:
        v = EMBEDDED
    elif p < 0.5 - floor:
        v = NOT_EIGENVALUE
    else:
        v = INCONCLUSIVE
        diag = "exponent within the margin floor of 1/2"
    if v == EMBEDDED and lam > thr:
        v = INCONCLUSIVE
        diag = (f"fitted exponent {p:.4f} > 1/2 but lambda={lam:.6g} exceeds "
                f"the bound {thr:.6g}; finite-x fit is unreliable")
    return EigenvalueVerdict(
        a=float(a), k=float(k), lam=lam, threshold=thr,
        predicted_exponent=a / (k * math.pi) if k > 0 else math.inf,
        fitted_exponent=p, fit=fit, tail_l2=l2_norm_tail(traj, fit.x_lo),
        verdict=v, margin=(p - 0.5) / floor, margin_floor=floor,
        diagnostic=diag)


__all__ = [
    "DecayFit", "EigenvalueVerdict", "EnvelopeCheck", "NonMonotoneError",
    "PeriodIntegral", "Quadrature", "crossing_spacing", "fit_decay",
    "fit_decay_samples", "lower_envelope_check", "max_eigenvalue_bound",
    "per_period_integral", "per_period_integrals",
    "period_deviation_constant", "verdict", "weighted_sin_integral",
]
