"""Potential families, envelope estimation and tabulated-potential files.

Five families are supported:

=====================  =================================================
``zero``               V(x) = 0
``coulomb_sign``       V(x) = s a / (1 + x),  s = +1 or -1
``wigner_von_neumann`` V(x) = -c sin(2 kappa x + phase) / (1 + x)
``feedback_sign``      V(x) = -(a / (1 + x)) sgn(sin 2 theta(x))
``tabulated``          piecewise constant (default) or linear on a grid
=====================  =================================================

The feedback family depends on the concurrent Pruefer angle, which must be
passed explicitly; sgn(0) is taken to be +1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ._version import __version__

VARIANTS = ("zero", "coulomb_sign", "wigner_von_neumann", "feedback_sign",
            "tabulated")
INTERPOLATIONS = ("constant", "linear")


class PotentialError(ValueError):
    """Invalid potential parameters or an out-of-domain evaluation."""


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Immutable description of one potential.

    Use the classmethod constructors rather than the raw initializer.
    """

    variant: str
    a: float = 0.0
    sign: int = -1
    kappa: float = 0.0
    phase: float = 0.0
    grid: np.ndarray | None = None
    values: np.ndarray | None = None
    interpolation: str = "constant"
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise PotentialError(f"unknown potential variant {self.variant!r}")
        if not math.isfinite(self.a):
            raise PotentialError("amplitude must be finite")
        if self.variant == "feedback_sign" and not self.a > 0:
            raise PotentialError("feedback_sign requires amplitude a > 0")
        if self.variant == "coulomb_sign" and self.sign not in (1, -1):
            raise PotentialError("coulomb_sign requires sign +1 or -1")
        if self.variant == "wigner_von_neumann" and not (
                math.isfinite(self.kappa) and math.isfinite(self.phase)):
            raise PotentialError("wavenumber and phase must be finite")
        if self.variant == "tabulated":
            x = np.array(self.grid, dtype=float)
            v = np.array(self.values, dtype=float)
            if x.ndim != 1 or x.shape != v.shape or x.size < 2:
                raise PotentialError("table needs matching 1-d grid and "
                                     "values with at least two rows")
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
                raise PotentialError("table contains non-finite entries")
            if np.any(np.diff(x) <= 0):
                raise PotentialError("table grid must be strictly increasing")
            if self.interpolation not in INTERPOLATIONS:
                raise PotentialError(
                    f"interpolation must be one of {INTERPOLATIONS}")
            x.flags.writeable = False
            v.flags.writeable = False
            object.__setattr__(self, "grid", x)
            object.__setattr__(self, "values", v)

    def _scalars(self):
        return (self.variant, self.a, self.sign, self.kappa, self.phase,
                self.interpolation)

    def __eq__(self, other):
        if not isinstance(other, PotentialSpec):
            return NotImplemented
        if self._scalars() != other._scalars():
            return False
        if dict(self.meta) != dict(other.meta):
            return False
        if self.grid is None or other.grid is None:
            return self.grid is None and other.grid is None
        return (np.array_equal(self.grid, other.grid)
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash(self._scalars())

    @classmethod
    def zero(cls) -> PotentialSpec:
        return cls("zero")

    @classmethod
    def coulomb_sign(cls, a: float, sign: int = -1) -> PotentialSpec:
        return cls("coulomb_sign", a=float(a), sign=int(sign))

    @classmethod
    def wigner_von_neumann(cls, c: float, kappa: float,
                           phase: float = 0.0) -> PotentialSpec:
        return cls("wigner_von_neumann", a=float(c), kappa=float(kappa),
                   phase=float(phase))

    @classmethod
    def feedback_sign(cls, a: float) -> PotentialSpec:
        return cls("feedback_sign", a=float(a))

    @classmethod
    def tabulated(cls, grid, values, interpolation: str = "constant",
                  meta: Mapping[str, str] | None = None) -> PotentialSpec:
        return cls("tabulated", grid=grid, values=values,
                   interpolation=interpolation, meta=dict(meta or {}))

    @property
    def is_feedback(self) -> bool:
        return self.variant == "feedback_sign"

    @property
    def amplitude(self) -> float:
        """Envelope amplitude of the analytic families (0 for zero)."""
        if self.variant == "tabulated":
            raise PotentialError("tabulated potentials have no closed-form "
                                 "amplitude; use estimate_envelope")
        return abs(self.a) if self.variant != "zero" else 0.0

    def describe(self) -> dict[str, str]:
        """Flat key/value metadata used in file headers."""
        d = {"variant": self.variant}
        if self.variant in ("coulomb_sign", "feedback_sign"):
            d["a"] = _fmt(self.a)
        if self.variant == "coulomb_sign":
            d["sign"] = str(self.sign)
        if self.variant == "wigner_von_neumann":
            d["c"] = _fmt(self.a)
            d["kappa"] = _fmt(self.kappa)
            d["phase"] = _fmt(self.phase)
        if self.variant == "tabulated":
            d["interpolation"] = self.interpolation
            d["rows"] = str(self.grid.size)
        return d


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def sgn(v):
    """Sign with sgn(0) = +1."""
    return np.where(np.asarray(v) >= 0, 1.0, -1.0)


def evaluate(spec: PotentialSpec, x: float, theta: float | None = None) -> float:
    """V(x); ``theta`` is required for, and only for, the feedback family."""
    return float(evaluate_array(spec, np.asarray(x, dtype=float),
                                None if theta is None
                                else np.asarray(theta, dtype=float)))


def evaluate_array(spec: PotentialSpec, x, theta=None) -> np.ndarray:
    """Vectorized :func:`evaluate`."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise PotentialError("potential is defined for finite x >= 0 only")
    if spec.is_feedback:
        if theta is None:
            raise PotentialError("feedback_sign evaluation needs the Pruefer "
                                 "angle theta")
    elif theta is not None:
        raise PotentialError(f"{spec.variant} does not take an angle")
    v = spec.variant
    if v == "zero":
        return np.zeros_like(x)
    if v == "coulomb_sign":
        return spec.sign * spec.a / (1.0 + x)
    if v == "wigner_von_neumann":
        return -spec.a * np.sin(2.0 * spec.kappa * x + spec.phase) / (1.0 + x)
    if v == "feedback_sign":
        return -spec.a / (1.0 + x) * sgn(np.sin(2.0 * np.asarray(theta)))
    return _table_eval(spec, x)


def _table_eval(spec, x):
    g, vals = spec.grid, spec.values
    if np.any(x < g[0]) or np.any(x > g[-1]):
        raise PotentialError(
            f"x outside tabulated domain [{g[0]:g}, {g[-1]:g}]")
    i = np.clip(np.searchsorted(g, x, side="right") - 1, 0, g.size - 1)
    if spec.interpolation == "constant":
        return vals[i]
    j = np.minimum(i, g.size - 2)
    t = (x - g[j]) / (g[j + 1] - g[j])
    return vals[j] + t * (vals[j + 1] - vals[j])


# -- envelope ---------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeEstimate:
    tail_start: float
    window_count: int
    window_edges: np.ndarray
    window_sup: np.ndarray
    estimate: float
    monotone_decreasing: bool


def estimate_envelope(source: PotentialSpec, T: float, window_count: int = 8,
                      x_max: float | None = None,
                      points_per_window: int = 2000) -> EnvelopeEstimate:
    """Estimate ``limsup (1 + x)|V(x)|`` from the tail ``[T, x_max]``.

    The tail is cut into log-uniform windows; the estimate is the largest
    supremum among the last ``ceil(window_count / 2)`` windows.  Tables are
    sampled at their own nodes; analytic families at ``points_per_window``
    log-spaced points per window.
    """
    if not T > 0 or window_count < 2:
        raise PotentialError("need T > 0 and at least two windows")
    if source.is_feedback:
        raise PotentialError("feedback_sign has no standalone values; export "
                             "a table from a trajectory first")
    if source.variant == "tabulated":
        hi = source.grid[-1] if x_max is None else min(x_max, source.grid[-1])
    else:
        hi = 1e6 if x_max is None else float(x_max)
    if not hi > T:
        raise PotentialError("empty tail: x_max must exceed T")
    edges = T * (hi / T) ** (np.arange(window_count + 1) / window_count)
    edges[-1] = hi
    sups = np.empty(window_count)
    for w in range(window_count):
        lo, up = edges[w], edges[w + 1]
        if source.variant == "tabulated":
            g = source.grid
            last = w == window_count - 1
            sel = (g >= lo) & ((g <= up) if last else (g < up))
            xs, vs = g[sel], source.values[sel]
        else:
            xs = np.geomspace(lo, up, points_per_window)
            vs = evaluate_array(source, xs)
        if xs.size == 0:
            raise PotentialError(f"window [{lo:g}, {up:g}) holds no samples")
        prod = (1.0 + xs) * np.abs(vs)
        if not np.all(np.isfinite(prod)):
            raise PotentialError("non-finite potential values in tail")
        sups[w] = prod.max()
    half = math.ceil(window_count / 2)
    return EnvelopeEstimate(
        tail_start=float(T),
        window_count=window_count,
        window_edges=edges,
        window_sup=sups,
        estimate=float(sups[-half:].max()),
        monotone_decreasing=bool(np.all(np.diff(sups) <= 0)),
    )


# -- tables -----------------------------------------------------------------

def feedback_table(trajectory, cell_ratio: float = 5e-5,
                   min_cells: int = 8) -> PotentialSpec:
    """Tabulate the potential that drove a feedback trajectory.

    Each smooth piece between sign switches is cut into cells that are
    log-uniform in (1 + x) with relative width at most ``cell_ratio`` and at
    least ``min_cells`` per piece; a cell carries the midpoint value of
    ``-sigma a / (1 + x)``, so piecewise-constant evaluation is second-order
    accurate.  Sliding intervals (angle held at an odd multiple of pi/2)
    carry the equivalent value ``k**2`` that keeps ``u'`` at zero.

    The cells are finest near x = 0 on purpose: replaying the table through
    the linear equation amplifies an error made at x by about
    (x_end / x)**(2a / (k pi)), because the square-integrable solution is
    the subdominant one.
    """
    spec = trajectory.spec
    if not spec.is_feedback:
        raise PotentialError("feedback_table needs a feedback_sign trajectory")
    if not cell_ratio > 0 or min_cells < 1:
        raise PotentialError("cell_ratio must be positive, min_cells >= 1")
    a, k = spec.a, trajectory.config.k
    x0 = np.concatenate([trajectory.piece_x0, trajectory.slide_x0])
    x1 = np.concatenate([trajectory.piece_x1, trajectory.slide_x1])
    sigma = np.concatenate([
        np.where(trajectory.piece_level % 2 == 0, 1.0, -1.0),
        np.zeros(trajectory.slide_x0.size)])
    order = np.argsort(x0, kind="stable")
    x0, x1, sigma = x0[order], x1[order], sigma[order]
    keep = x1 > x0
    x0, x1, sigma = x0[keep], x1[keep], sigma[keep]

    span = np.log1p(x1) - np.log1p(x0)
    cells = np.maximum(min_cells,
                       np.ceil(span / math.log1p(cell_ratio))).astype(np.int64)
    cells[sigma == 0.0] = 1
    owner = np.repeat(np.arange(x0.size), cells)
    first = np.concatenate([[0], np.cumsum(cells)[:-1]])
    frac = (np.arange(cells.sum()) - first[owner]) / cells[owner]
    left = np.expm1(np.log1p(x0[owner]) + span[owner] * frac)
    left[first] = x0
    right = np.concatenate([left[1:], x1[-1:]])
    right[first[1:] - 1] = x0[1:]
    mid = 0.5 * (left + right)
    vals = np.where(sigma[owner] == 0.0, k * k,
                    -sigma[owner] * a / (1.0 + mid))
    x_end = x1[-1]
    last = sigma[-1] if sigma[-1] != 0.0 else 1.0
    grid = np.concatenate([left, [x_end]])
    vals = np.concatenate([vals, [-last * a / (1.0 + x_end)]])
    meta = {
        "variant": "feedback_sign",
        "a": _fmt(a),
        "k": _fmt(k),
        "theta0": _fmt(trajectory.config.theta0),
        "cell_ratio": _fmt(cell_ratio),
        "values": "cell_midpoint",
    }
    return PotentialSpec.tabulated(grid, vals, "constant", meta)


def export_table(spec: PotentialSpec, source, path) -> PotentialSpec:
    """Write a tabulated-potential CSV and return the table written.

    ``source`` is a grid (array) for analytic families, a trajectory for the
    feedback family, or ``None`` for an existing table.
    """
    if spec.is_feedback:
        if source is None or not hasattr(source, "piece_level"):
            raise PotentialError("feedback_sign export needs a completed "
                                 "trajectory")
        table = feedback_table(source)
    elif spec.variant == "tabulated":
        table = spec
    else:
        grid = np.asarray(source, dtype=float)
        if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
            raise PotentialError("export grid must be strictly increasing")
        meta = spec.describe()
        meta["values"] = "node"
        table = PotentialSpec.tabulated(grid, evaluate_array(spec, grid),
                                        "constant", meta)
    write_table(table, path)
    return table


def write_table(table: PotentialSpec, path) -> None:
    meta = dict(table.meta)
    meta.setdefault("variant", "tabulated")
    meta["interpolation"] = table.interpolation
    meta["generator_version"] = __version__
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key in sorted(meta):
            fh.write(f"# {key}={meta[key]}\n")
        fh.write("x,V\n")
        for x, v in zip(table.grid.tolist(), table.values.tolist()):
            fh.write(f"{x:.17g},{v:.17g}\n")


def read_metadata(fh) -> tuple[dict[str, str], str]:
    """Consume ``# key=value`` lines; return (meta, first non-comment line)."""
    meta = {}
    for line in fh:
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, val = body.partition("=")
                meta[key.strip()] = val.strip()
            continue
        return meta, line.strip()
    return meta, ""


def import_table(path) -> PotentialSpec:
    """Read a file written by :func:`export_table`."""
    with open(path, encoding="utf-8") as fh:
        meta, header = read_metadata(fh)
        if header.replace(" ", "") != "x,V":
            raise PotentialError(f"{path}: expected header 'x,V', "
                                 f"got {header!r}")
        data = np.loadtxt(fh, delimiter=",", dtype=float, ndmin=2)
    interp = meta.pop("interpolation", "constant")
    meta.pop("generator_version", None)
    return PotentialSpec.tabulated(data[:, 0], data[:, 1], interp, meta)
