"""Modified Pruefer integration of -u'' + V u = k^2 u on the half-line.

With u = R sin(theta) and u' = k R cos(theta) the eigenvalue equation
becomes

    theta' = k - (V / k) sin^2(theta)
    (log R)' = (V / 2k) sin(2 theta)

The integrator works in piece-local coordinates: theta = m pi/2 + phi with
phi in [0, pi/2].  Each piece ends when phi reaches 0 or pi/2, which is
exactly where sin(2 theta) changes sign; the step is cut there, so the
feedback potential is only ever integrated on smooth pieces and the
unwrapped angle keeps full precision out to large x.

For the feedback family the angle can be pushed back onto an odd level
m pi/2 while (1 + x) < a / k^2.  There the vector field points into the
level from both sides and the solution slides along it (Filippov sense):
theta is held, log R is constant and the effective potential is k^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from ._backend import kernel
from ._version import __version__
from .potential import (PotentialError, PotentialSpec, evaluate_array,
                        read_metadata)

HALF_PI = 0.5 * math.pi

_VARIANT_CODE = {
    "zero": 0,
    "coulomb_sign": 1,
    "wigner_von_neumann": 2,
    "feedback_sign": 3,
    "tabulated": 4,
}

_STATUS = {
    0: "ok",
    1: "step size underflow",
    2: "non-finite state",
    3: "event chattering (zero-length pieces)",
}


class IntegrationError(RuntimeError):
    """Integration could not reach ``x_end``."""


class NonMonotoneError(ValueError):
    """The angle decreases somewhere in a region that was assumed monotone."""


@dataclass(frozen=True)
class PrueferState:
    x: float
    theta: float
    logR: float


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration parameters.

    ``max_step_fraction`` caps the step at that fraction of the half-period
    pi / (2k); ``event_tol`` bounds |sin 2 theta| at located sign switches.
    """

    k: float
    x_end: float
    theta0: float = math.pi / 4
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step_fraction: float = 0.1
    event_tol: float = 1e-12
    n_samples: int = 1000
    n_prefix: int = 50

    def __post_init__(self):
        if not (self.k > 0 and math.isfinite(self.k)):
            raise ValueError("k must be positive and finite")
        if not (self.x_end > 0 and math.isfinite(self.x_end)):
            raise ValueError("x_end must be positive and finite")
        if not math.isfinite(self.theta0):
            raise ValueError("theta0 must be finite")
        if not (self.rtol > 0 and self.atol > 0 and self.event_tol > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.max_step_fraction <= 0.5:
            raise ValueError("max_step_fraction must lie in (0, 1/2]")
        if self.n_samples < 2 or self.n_prefix < 1:
            raise ValueError("need at least two samples")

    @property
    def lam(self) -> float:
        return self.k * self.k

    @property
    def max_step(self) -> float:
        return self.max_step_fraction * math.pi / (2.0 * self.k)

    def describe(self) -> dict[str, str]:
        return {
            "k": _fmt(self.k),
            "theta0": _fmt(self.theta0),
            "x_end": _fmt(self.x_end),
            "rtol": _fmt(self.rtol),
            "atol": _fmt(self.atol),
            "max_step_fraction": _fmt(self.max_step_fraction),
            "event_tol": _fmt(self.event_tol),
            "n_samples": str(self.n_samples),
            "n_prefix": str(self.n_prefix),
        }


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def sample_grid(x_end: float, n_samples: int = 1000, n_prefix: int = 50):
    """Linear prefix on [0, 1) plus log-spaced points on [1, x_end].

    Integer powers of ten inside the range are always included so that
    decade boundaries are exact sample points.
    """
    if x_end <= 1.0:
        return np.linspace(0.0, x_end, n_samples)
    prefix = np.linspace(0.0, 1.0, n_prefix, endpoint=False)
    logs = np.geomspace(1.0, x_end, n_samples)
    decades = 10.0 ** np.arange(0, math.floor(math.log10(x_end)) + 1)
    grid = np.union1d(np.concatenate([prefix, logs]),
                      decades[decades <= x_end])
    grid[-1] = x_end
    return grid


@dataclass(eq=False)
class Trajectory:
    """Samples of (x, theta, logR, V) plus recorded events.

    ``q1``/``q2`` are the running integrals of |sin 2 theta| and
    |sin 2 theta| / (1 + x) from 0, accumulated piece by piece inside the
    integrator.  Piece arrays describe every smooth piece between level
    crossings; crossing arrays hold the first arrival at each level
    m pi/2 above theta0.
    """

    spec: PotentialSpec
    config: IntegratorConfig
    x: np.ndarray
    theta: np.ndarray
    logR: np.ndarray
    V: np.ndarray
    q1: np.ndarray | None = None
    q2: np.ndarray | None = None
    cross_level: np.ndarray = field(default_factory=lambda: np.empty(0, int))
    cross_x: np.ndarray = field(default_factory=lambda: np.empty(0))
    switch_x: np.ndarray = field(default_factory=lambda: np.empty(0))
    piece_level: np.ndarray = field(default_factory=lambda: np.empty(0, int))
    piece_x0: np.ndarray = field(default_factory=lambda: np.empty(0))
    piece_x1: np.ndarray = field(default_factory=lambda: np.empty(0))
    piece_q1: np.ndarray = field(default_factory=lambda: np.empty(0))
    piece_q2: np.ndarray = field(default_factory=lambda: np.empty(0))
    piece_exit: np.ndarray = field(default_factory=lambda: np.empty(0, int))
    slide_level: np.ndarray = field(default_factory=lambda: np.empty(0, int))
    slide_x0: np.ndarray = field(default_factory=lambda: np.empty(0))
    slide_x1: np.ndarray = field(default_factory=lambda: np.empty(0))
    n_down: int = 0
    x_last_down: float = -1.0
    status: str = "ok"
    n_steps: int = 0
    n_rejected: int = 0

    @property
    def truncated(self) -> bool:
        return self.status != "ok"

    @property
    def x_end(self) -> float:
        return float(self.x[-1])

    def state(self, i: int) -> PrueferState:
        return PrueferState(float(self.x[i]), float(self.theta[i]),
                            float(self.logR[i]))

    def require_complete(self):
        if self.truncated:
            raise IntegrationError(f"trajectory truncated: {self.status}")


# -- right-hand side and coordinate changes ---------------------------------

def pruefer_rhs(theta: float, V: float, k: float) -> tuple[float, float]:
    """(d theta/dx, d log R/dx) at one point."""
    s = math.sin(theta)
    return k - V / k * s * s, V / (2.0 * k) * math.sin(2.0 * theta)


def to_wavefunction(state: PrueferState, k: float) -> tuple[float, float]:
    """(u, u') = (R sin theta, k R cos theta)."""
    if not k > 0:
        raise ValueError("k must be positive")
    if state.logR > 709.0:
        raise OverflowError(f"R = exp({state.logR:g}) overflows; keep the "
                            "state in log scale")
    r = math.exp(state.logR)
    return r * math.sin(state.theta), k * r * math.cos(state.theta)


def from_wavefunction(u: float, u_prime: float, k: float,
                      theta_hint: float = 0.0,
                      log_scale: float = 0.0) -> tuple[float, float]:
    """Inverse change of variables; returns (theta, logR).

    theta is the branch of atan2(u, u'/k) closest to ``theta_hint``.
    ``log_scale`` is added to logR for rescaled inputs.
    """
    if not k > 0:
        raise ValueError("k must be positive")
    c = u_prime / k
    if u == 0.0 and c == 0.0:
        raise ValueError("(u, u') = (0, 0) is not a nontrivial solution")
    base = math.atan2(u, c)
    theta = base + 2.0 * math.pi * round((theta_hint - base) / (2.0 * math.pi))
    return theta, math.log(math.hypot(u, c)) + log_scale


# -- integration ------------------------------------------------------------

def integrate(spec: PotentialSpec, cfg: IntegratorConfig, *,
              out_x=None, strict: bool = False) -> Trajectory:
    """Integrate the Pruefer system from x = 0 with theta(0) = theta0,
    R(0) = 1.

    A failure to reach ``x_end`` returns a partial trajectory whose
    ``status`` names the cause; ``strict=True`` raises instead.
    """
    if spec.variant == "tabulated":
        g = spec.grid
        if g[0] > 0.0 or g[-1] < cfg.x_end:
            raise PotentialError(
                f"table covers [{g[0]:g}, {g[-1]:g}], integration needs "
                f"[0, {cfg.x_end:g}]")
        tab_x, tab_v = g, spec.values
    else:
        tab_x = tab_v = np.empty(0)
    params = (spec.a, float(spec.sign) if spec.variant == "coulomb_sign"
              else spec.kappa, spec.phase)
    grid = sample_grid(cfg.x_end, cfg.n_samples, cfg.n_prefix) \
        if out_x is None else np.asarray(out_x, dtype=float)
    raw = kernel.integrate_pruefer(
        _VARIANT_CODE[spec.variant], params, tab_x, tab_v,
        int(spec.interpolation == "linear"), cfg.k, cfg.theta0, cfg.x_end,
        cfg.rtol, cfg.atol, cfg.max_step, cfg.event_tol, grid)
    n = raw["n_out"]
    x = grid[:n]
    sigma = raw["sigma"][:n]
    theta = raw["theta"][:n]
    if spec.is_feedback:
        V = np.where(sigma == 0.0, cfg.k ** 2, -sigma * spec.a / (1.0 + x))
    else:
        V = evaluate_array(spec, x)
    status = _STATUS[raw["status"]]
    if status != "ok":
        status = f"{status} at x={raw['x_stop']:.17g}"
        if strict:
            raise IntegrationError(status)
    return Trajectory(
        spec=spec, config=cfg, x=x, theta=theta, logR=raw["logR"][:n], V=V,
        q1=raw["q1"][:n], q2=raw["q2"][:n],
        cross_level=raw["cross_level"], cross_x=raw["cross_x"],
        switch_x=raw["switch_x"],
        piece_level=raw["piece_level"], piece_x0=raw["piece_x0"],
        piece_x1=raw["piece_x1"], piece_q1=raw["piece_q1"],
        piece_q2=raw["piece_q2"], piece_exit=raw["piece_exit"],
        slide_level=raw["slide_level"], slide_x0=raw["slide_x0"],
        slide_x1=raw["slide_x1"],
        n_down=int(raw["n_down"]), x_last_down=float(raw["x_last_down"]),
        status=status, n_steps=int(raw["n_steps"]),
        n_rejected=int(raw["n_rejected"]),
    )


@dataclass(frozen=True)
class Crossings:
    """Points x_i with theta(x_i) = 2 pi i0 + i pi/2, i = first, first+1, ..."""

    i0: int
    x0: float
    index: np.ndarray
    x: np.ndarray

    def __len__(self):
        return self.x.size

    def count_upto(self, x: float) -> int:
        return int(np.searchsorted(self.x, x, side="right"))


def detect_crossings(traj: Trajectory, x0: float = 0.0) -> Crossings:
    """Crossing points of the quarter-turn levels beyond ``x0``.

    i0 is the largest integer >= 0 with 2 pi i0 < theta(x0).  The index i of
    each crossing is fixed by its level, so it starts at 1 only when
    theta(x0) lies in the first quarter turn above 2 pi i0.
    """
    if traj.n_down and traj.x_last_down >= x0:
        raise NonMonotoneError(
            f"theta decreases through a level at x={traj.x_last_down:.6g} "
            f"(>= x0={x0:g}); crossings are undefined there")
    if traj.cross_x.size == 0 and traj.piece_x1.size == 0:
        raise ValueError("trajectory carries no crossing record")
    theta_x0 = _theta_at(traj, x0)
    i0 = max(0, math.ceil(theta_x0 / (2.0 * math.pi)) - 1)
    sel = traj.cross_x > x0
    levels = traj.cross_level[sel]
    return Crossings(i0=i0, x0=float(x0), index=levels - 4 * i0,
                     x=traj.cross_x[sel])


def _theta_at(traj: Trajectory, x: float) -> float:
    """Angle at x from the level records, exact at crossings."""
    if x <= traj.x[0]:
        return float(traj.theta[0])
    xs = np.concatenate([traj.x, traj.cross_x])
    ts = np.concatenate([traj.theta, traj.cross_level * HALF_PI])
    order = np.argsort(xs, kind="stable")
    return float(np.interp(x, xs[order], ts[order]))


# -- trajectory files -------------------------------------------------------

def write_trajectory(traj: Trajectory, path, events_path=None) -> None:
    """Trajectory CSV plus a sibling ``.events.csv`` (kind,x)."""
    meta = {f"spec.{k}": v for k, v in traj.spec.describe().items()}
    meta.update({f"cfg.{k}": v for k, v in traj.config.describe().items()})
    meta["status"] = traj.status
    meta["generator_version"] = __version__
    if traj.cross_level.size:
        meta["first_crossing_level"] = str(int(traj.cross_level[0]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key in sorted(meta):
            fh.write(f"# {key}={meta[key]}\n")
        fh.write("x,theta,logR,V\n")
        for row in zip(traj.x.tolist(), traj.theta.tolist(),
                       traj.logR.tolist(), traj.V.tolist()):
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")
    if events_path is None:
        events_path = events_path_for(path)
    events = [(x, "sign_switch") for x in traj.switch_x.tolist()]
    events += [(x, "crossing") for x in traj.cross_x.tolist()]
    events.sort(key=lambda e: (e[0], e[1]))
    with open(events_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("kind,x\n")
        for x, kind in events:
            fh.write(f"{kind},{x:.17g}\n")


def events_path_for(path) -> str:
    path = str(path)
    stem = path[:-4] if path.endswith(".csv") else path
    return stem + ".events.csv"


def read_trajectory(path, events_path=None) -> Trajectory:
    """Load a file written by :func:`write_trajectory`.

    Piece records and running integrals are not serialized; the result
    supports sampling-based analysis (fits, envelopes) and crossing lists.
    """
    with open(path, encoding="utf-8") as fh:
        meta, header = read_metadata(fh)
        if header.replace(" ", "") != "x,theta,logR,V":
            raise ValueError(f"{path}: unexpected header {header!r}")
        data = np.loadtxt(fh, delimiter=",", dtype=float, ndmin=2)
    spec = _spec_from_meta(meta)
    cfg = IntegratorConfig(
        k=float(meta["cfg.k"]), x_end=float(meta["cfg.x_end"]),
        theta0=float(meta["cfg.theta0"]), rtol=float(meta["cfg.rtol"]),
        atol=float(meta["cfg.atol"]),
        max_step_fraction=float(meta["cfg.max_step_fraction"]),
        event_tol=float(meta["cfg.event_tol"]),
        n_samples=int(meta["cfg.n_samples"]),
        n_prefix=int(meta["cfg.n_prefix"]))
    switch, cross = [], []
    ev = events_path or events_path_for(path)
    try:
        with open(ev, encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                kind, _, val = line.strip().partition(",")
                (switch if kind == "sign_switch" else cross).append(float(val))
    except FileNotFoundError:
        pass
    first = int(meta.get("first_crossing_level", 0))
    return Trajectory(
        spec=spec, config=cfg, x=data[:, 0], theta=data[:, 1],
        logR=data[:, 2], V=data[:, 3],
        cross_level=np.arange(first, first + len(cross), dtype=np.int64),
        cross_x=np.asarray(cross, dtype=float),
        switch_x=np.asarray(switch, dtype=float),
        status=meta.get("status", "ok"))


def _spec_from_meta(meta: dict[str, str]) -> PotentialSpec:
    v = meta.get("spec.variant", "zero")
    if v == "zero":
        return PotentialSpec.zero()
    if v == "coulomb_sign":
        return PotentialSpec.coulomb_sign(float(meta["spec.a"]),
                                          int(meta["spec.sign"]))
    if v == "wigner_von_neumann":
        return PotentialSpec.wigner_von_neumann(float(meta["spec.c"]),
                                                float(meta["spec.kappa"]),
                                                float(meta["spec.phase"]))
    if v == "feedback_sign":
        return PotentialSpec.feedback_sign(float(meta["spec.a"]))
    # The grid of a tabulated driver is not embedded in trajectory files.
    return PotentialSpec.tabulated([0.0, 1.0], [0.0, 0.0],
                                   meta.get("spec.interpolation", "constant"),
                                   {"source": "unavailable"})


def backend() -> str:
    """Name of the active kernel ("cython" or "python")."""
    return _backend.BACKEND
