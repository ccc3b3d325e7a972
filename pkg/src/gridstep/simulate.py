"""Time-domain simulation: exact piecewise-modal propagation with switching
events, an adaptive numeric integrator for nonlinear models, disturbance
application, and trajectory recording/export."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DimensionError, ModelError, ScheduleError, StiffnessError
from .modal import ModalBasis, orbit_value_batch, propagate, propagate_batch
from .network import ReducedModel
from .oscillation import DeocSchedule, _switching_function_batch, oscillation_energy_batch


@dataclass(frozen=True)
class Disturbance:
    """Either an explicit post-fault state or a power-pulse approximation.

    ``initial-state``: the trajectory starts from ``x0`` at ``t0`` (the
    primary interface; a bolted fault has no DC-linear representation, so
    callers supply the post-clearing state directly).

    ``power-pulse``: a constant injection of ``magnitude`` pu at ``bus``
    during ``[start, start + duration]`` starting from equilibrium, which
    emulates a fault's accelerating-power effect within the linear model.
    """

    kind: str  # "initial-state" | "power-pulse"
    x0: np.ndarray | None = None
    t0: float = 0.0
    bus: int | None = None
    magnitude: float = 0.0
    start: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        if self.kind not in ("initial-state", "power-pulse"):
            raise DimensionError(f"unknown disturbance kind {self.kind!r}")
        if self.kind == "power-pulse" and self.duration <= 0.0:
            raise DimensionError("power pulse requires duration > 0")


@dataclass
class Trajectory:
    """Sampled states plus per-sample diagnostics and an event log."""

    t: np.ndarray
    x: np.ndarray                      # (n_samples, 2m)
    ek: np.ndarray                     # oscillation energy
    orbit: np.ndarray                  # orbit value w.r.t. the active center
    h: np.ndarray                      # switching-function value (NaN if n/a)
    stage: np.ndarray                  # active stage id, -1 when inactive
    events: list[tuple[float, str]] = field(default_factory=list)
    machine_buses: tuple[int, ...] = ()

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0.0):
            raise DimensionError("trajectory time stamps must be strictly increasing")

    @property
    def n_machines(self) -> int:
        return self.x.shape[1] // 2

    def frequencies_hz(self, f_nominal: float = 60.0) -> np.ndarray:
        return self.x[:, self.n_machines:] * f_nominal

    def columns(self) -> list[str]:
        m = self.n_machines
        buses = self.machine_buses or tuple(range(1, m + 1))
        names = ["t"]
        names += [f"delta_{b}" for b in buses]
        names += [f"omega_{b}" for b in buses]
        names += ["ek", "orbit_value", "h", "stage"]
        return names

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns())
            for i in range(len(self.t)):
                row = [f"{self.t[i]:.9f}"]
                row += [f"{v:.12e}" for v in self.x[i]]
                row += [f"{self.ek[i]:.12e}", f"{self.orbit[i]:.12e}"]
                row += ["nan" if np.isnan(self.h[i]) else f"{self.h[i]:.12e}"]
                row += [str(int(self.stage[i]))]
                writer.writerow(row)

    def to_json(self, path) -> None:
        doc = {
            "columns": self.columns(),
            "events": [{"t": t, "label": label} for t, label in self.events],
            "t": [float(v) for v in self.t],
            "x": [[float(v) for v in row] for row in self.x],
            "ek": [float(v) for v in self.ek],
            "orbit_value": [float(v) for v in self.orbit],
            "h": [None if np.isnan(v) else float(v) for v in self.h],
            "stage": [int(v) for v in self.stage],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)


def apply_disturbance(model: ReducedModel, basis: ModalBasis, dist: Disturbance):
    """Resolve a disturbance into the post-disturbance ``(t0, x0)``."""
    if dist.kind == "initial-state":
        x0 = np.asarray(dist.x0, dtype=float)
        if x0.shape != model.x_eq.shape:
            raise DimensionError(f"x0 has shape {x0.shape}, expected {model.x_eq.shape}")
        return dist.t0, x0

    col = _injection_column(model, dist.bus)
    delta_pulse = model.delta_eq - np.linalg.solve(model.b_red, col * dist.magnitude)
    center = np.concatenate([delta_pulse, np.ones(model.n_machines)])
    x0 = propagate(basis, center, model.x_eq, dist.duration)
    return dist.start + dist.duration, x0


def _injection_column(model: ReducedModel, bus: int) -> np.ndarray:
    """Map of a 1 pu injection at ``bus`` onto machine electrical powers."""
    if bus in model.load_buses:
        return model.b_load[:, model.load_buses.index(bus)]
    if bus in model.machine_buses:
        # Injection at a machine node offsets its own electrical power.
        col = np.zeros(model.n_machines)
        col[model.machine_buses.index(bus)] = -1.0
        return col
    raise ModelError(f"unknown or reference bus {bus}")


def _segments(model, schedule: DeocSchedule, t0: float, t_end: float):
    """(t_start, center, stage_id) pieces covering [t0, t_end]."""
    segs = [(t0, model.x_eq, -1)]
    prev_off = t0
    for k, st in enumerate(schedule.stages):
        if st.t_on < prev_off - 1e-12 or st.t_off > t_end + 1e-9:
            raise ScheduleError(
                f"stage {k} [{st.t_on}, {st.t_off}] outside [{prev_off}, {t_end}]"
            )
        segs.append((st.t_on, st.x_c, k))
        segs.append((st.t_off, model.x_eq, -1))
        prev_off = st.t_off
    return segs


def simulate_deoc(
    model: ReducedModel,
    basis: ModalBasis,
    disturbance: Disturbance,
    schedule: DeocSchedule,
    t_end: float,
    dt_out: float,
) -> Trajectory:
    """Exact piecewise closed-form trajectory with switching events.

    The state is continuous across every switch; only the orbit center
    alternates between ``x_e`` and the active stage's ``x_c``.
    """
    t0, x0 = apply_disturbance(model, basis, disturbance)
    segs = _segments(model, schedule, t0, t_end)

    t_grid = np.arange(t0, t_end + 0.5 * dt_out, dt_out)
    samples = np.empty((len(t_grid), len(x0)))
    orbit = np.empty(len(t_grid))
    h_vals = np.full(len(t_grid), np.nan)
    stage_ids = np.full(len(t_grid), -1, dtype=int)

    events: list[tuple[float, str]] = []
    if disturbance.kind == "power-pulse":
        events.append((disturbance.start, "fault-on"))
    events.append((t0, "fault-clear"))

    x_seg = x0
    for si, (t_start, center, stage_id) in enumerate(segs):
        if si > 0:
            # advance the running state exactly to this segment boundary
            prev_start, prev_center, prev_id = segs[si - 1]
            x_seg = propagate(basis, prev_center, x_seg, t_start - prev_start)
            events.append((t_start, "switch-on" if stage_id >= 0 else "switch-off"))
        t_next = segs[si + 1][0] if si + 1 < len(segs) else np.inf
        mask = (t_grid >= t_start - 1e-12) & (t_grid < t_next - 1e-12)
        if si == 0:
            mask |= t_grid < t_start  # guard for float fuzz at the first stamp
        if si + 1 == len(segs):
            mask |= t_grid >= t_next - 1e-12
        if not mask.any():
            continue
        xs = propagate_batch(basis, center, x_seg, t_grid[mask] - t_start)
        samples[mask] = xs
        orbit[mask] = orbit_value_batch(basis, center, xs)
        stage_ids[mask] = stage_id
        xc_for_h = _h_reference(schedule, stage_id, t_start)
        if xc_for_h is not None:
            h_vals[mask] = _switching_function_batch(basis, model.x_eq, xc_for_h, xs)

    ek = oscillation_energy_batch(model, samples)
    events.sort(key=lambda ev: ev[0])
    return Trajectory(
        t=t_grid,
        x=samples,
        ek=ek,
        orbit=orbit,
        h=h_vals,
        stage=stage_ids,
        events=events,
        machine_buses=model.machine_buses,
    )


def _h_reference(schedule: DeocSchedule, stage_id: int, t_start: float):
    """x_c used for the h diagnostic: active stage, else next upcoming stage."""
    if stage_id >= 0:
        return schedule.stages[stage_id].x_c
    for st in schedule.stages:
        if st.t_on >= t_start - 1e-12:
            return st.x_c
    return None


def integrate_nonlinear(
    dynamics,
    x0: np.ndarray,
    t_span: tuple[float, float],
    event_times=(),
    rtol: float = 1e-8,
    atol: float = 1e-10,
    dt_out: float = 0.01,
    method: str = "DOP853",
):
    """Adaptive explicit integration with restarts at declared event times.

    The vector field may be discontinuous at the event times (power steps),
    so each piece is integrated separately and the pieces are stitched on a
    shared ``dt_out`` grid. Returns ``(t, x)`` arrays.
    """
    t0, t1 = t_span
    boundaries = [t0] + sorted(t for t in event_times if t0 < t < t1) + [t1]
    t_grid = np.arange(t0, t1 + 0.5 * dt_out, dt_out)
    out = np.empty((len(t_grid), len(x0)))

    x = np.asarray(x0, dtype=float)
    for lo, hi in zip(boundaries, boundaries[1:]):
        mask = (t_grid >= lo - 1e-12) & (t_grid < hi - 1e-12)
        if hi == boundaries[-1]:
            mask |= t_grid >= hi - 1e-12
        t_eval = np.clip(t_grid[mask], lo, hi)
        drop_end = len(t_eval) == 0 or t_eval[-1] < hi - 1e-12
        if drop_end:
            t_eval = np.append(t_eval, hi)  # boundary state doubles as restart
        sol = solve_ivp(
            dynamics, (lo, hi), x, method=method, rtol=rtol, atol=atol,
            t_eval=t_eval,
        )
        if not sol.success:
            raise StiffnessError(f"integration failed on [{lo}, {hi}]: {sol.message}")
        out[mask] = sol.y.T[:-1] if drop_end else sol.y.T
        x = sol.y[:, -1]
    return t_grid, out


def deoc_rhs(model: ReducedModel, schedule: DeocSchedule):
    """Piecewise-linear vector field of the controlled swing model, for
    cross-checking the closed-form propagation numerically."""
    stages = schedule.stages

    def rhs(t, x):
        center = model.x_eq
        for st in stages:
            if st.t_on <= t < st.t_off:
                center = st.x_c
                break
        return model.a @ (x - center)

    return rhs
