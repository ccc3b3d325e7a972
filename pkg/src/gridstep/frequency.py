"""Discrete frequency excursion control on a nonlinear two-machine system.

A governor-equipped synchronous generator feeds a synchronous motor over a
lossless line; a controllable component at the generator bus can inject a
power block ``dp`` during ``[t_on, t_off]`` after the motor's mechanical
load steps up. The controller design problem is to pick ``(dp, t_on, t_off)``
minimizing the excursion of the average frequency below its post-disturbance
steady state.

Internal EMF magnitudes are held constant (no voltage-controller dynamics);
the phenomenon of interest is governed by the swing and governor dynamics.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize

from .errors import DimensionError, OptimizationError, StiffnessError

INSTABILITY_COST = float("inf")
_ANGLE_SLIP = math.pi  # |delta1 - delta2| beyond this flags loss of synchronism


@dataclass(frozen=True)
class GovernorParams:
    """IEESGO-style speed governor + turbine chain.

    Controller ``k1 (1 + s t2) / ((1 + s t1)(1 + s t3))`` acts on the speed
    deviation; the limited power command feeds three cascaded lags
    ``t4, t5, t6`` whose outputs are blended with fractions ``k2, k3``.
    Steady-state droop is ``1 / k1``.
    """

    k1: float
    t1: float
    t2: float
    t3: float
    k2: float
    k3: float
    t4: float
    t5: float
    t6: float
    p_max: float = 1.2
    p_min: float = 0.0

    def __post_init__(self):
        if self.p_min >= self.p_max:
            raise DimensionError("governor limits require p_min < p_max")
        for name in ("t1", "t3", "t4", "t5", "t6"):
            if getattr(self, name) <= 0.0:
                raise DimensionError(f"governor time constant {name} must be > 0")


@dataclass(frozen=True)
class TwoMachineModel:
    h1: float
    h2: float
    e1: float
    e2: float
    x: float
    gov: GovernorParams
    d1: float = 0.0
    d2: float = 0.0
    p_set: float = 0.75
    omega_s: float = 120.0 * math.pi

    def __post_init__(self):
        if self.x <= 0.0 or self.h1 <= 0.0 or self.h2 <= 0.0:
            raise DimensionError("reactance and inertias must be positive")
        if abs(self.p_set * self.x / (self.e1 * self.e2)) >= 1.0:
            raise DimensionError("no equilibrium: |p_set x / (e1 e2)| >= 1")

    @property
    def p_sync(self) -> float:
        return self.e1 * self.e2 / self.x

    def equilibrium(self) -> np.ndarray:
        """State [d1, w1, d2, w2, g1, g2, a1, a2, a3] at the pre-disturbance
        operating point."""
        d12 = math.asin(self.p_set / self.p_sync)
        return np.array(
            [d12, 1.0, 0.0, 1.0, 0.0, 0.0, self.p_set, self.p_set, self.p_set]
        )


@dataclass(frozen=True)
class DfecAction:
    dp: float
    t_on: float
    t_off: float

    def __post_init__(self):
        if not (0.0 <= self.t_on < self.t_off):
            raise DimensionError("action requires 0 <= t_on < t_off")
        if self.dp < 0.0:
            raise DimensionError("dp must be >= 0 (injection counters under-frequency)")


@dataclass(frozen=True)
class SimOptions:
    horizon: float = 60.0
    dt_out: float = 0.02
    rtol: float = 1e-8
    atol: float = 1e-10
    ss_window: float = 2.0      # tail window used for the steady-state mean
    disturbance: float = 0.25   # motor mechanical power step, pu
    t_disturbance: float = 0.0


@dataclass(frozen=True)
class DfecResult:
    action: DfecAction
    cost: float
    uncontrolled_cost: float
    uncontrolled_nadir: float   # 1 - min average speed, pu
    controlled_nadir: float
    history: tuple = ()

    def to_dict(self) -> dict:
        return {
            "action": {"dp": self.action.dp, "t_on": self.action.t_on, "t_off": self.action.t_off},
            "cost": self.cost,
            "uncontrolled_cost": self.uncontrolled_cost,
            "uncontrolled_nadir": self.uncontrolled_nadir,
            "controlled_nadir": self.controlled_nadir,
            "history": [
                {"start": list(map(float, s)), "cost": float(c)} for s, c in self.history
            ],
        }


def dfec_dynamics(model: TwoMachineModel, dp_active: float, p_motor: float):
    """Right-hand side for one continuous piece (fixed injection and load)."""
    g = model.gov
    ws = model.omega_s
    p_sync = model.p_sync
    h1_2, h2_2 = 2.0 * model.h1, 2.0 * model.h2
    t2_over_t1 = g.t2 / g.t1

    def rhs(t, y):
        d1, w1, d2, w2, g1, g2, a1, a2, a3 = y
        pe = p_sync * math.sin(d1 - d2)
        u = w1 - 1.0
        dg1 = (u - g1) / g.t1
        y1 = g1 + t2_over_t1 * (u - g1)
        dg2 = (g.k1 * y1 - g2) / g.t3
        p_cmd = min(max(model.p_set - g2, g.p_min), g.p_max)
        da1 = (p_cmd - a1) / g.t4
        da2 = (a1 - a2) / g.t5
        da3 = (a2 - a3) / g.t6
        pm1 = (1.0 - g.k2) * a1 + g.k2 * (1.0 - g.k3) * a2 + g.k2 * g.k3 * a3
        dw1 = (pm1 - (pe - dp_active) - model.d1 * (w1 - 1.0)) / h1_2
        dw2 = (pe - p_motor - model.d2 * (w2 - 1.0)) / h2_2
        return [ws * (w1 - 1.0), dw1, ws * (w2 - 1.0), dw2, dg1, dg2, da1, da2, da3]

    return rhs


@dataclass
class DfecTrajectory:
    t: np.ndarray
    y: np.ndarray          # (n, 9)
    unstable: bool

    @property
    def avg_speed(self) -> np.ndarray:
        return 0.5 * (self.y[:, 1] + self.y[:, 3])


def simulate(model: TwoMachineModel, action: DfecAction | None, opts: SimOptions) -> DfecTrajectory:
    """Integrate the disturbance response, restarting at every power step."""
    y0 = model.equilibrium()
    breaks = {opts.t_disturbance}
    if action is not None and action.dp > 0.0:
        breaks.update((action.t_on, action.t_off))
    breaks = sorted(b for b in breaks if 0.0 < b < opts.horizon)
    bounds = [0.0] + breaks + [opts.horizon]

    t_grid = np.arange(0.0, opts.horizon + 0.5 * opts.dt_out, opts.dt_out)
    out = np.empty((len(t_grid), 9))
    y = y0
    unstable = False
    for lo, hi in zip(bounds, bounds[1:]):
        mid = 0.5 * (lo + hi)
        p_motor = model.p_set + (opts.disturbance if mid >= opts.t_disturbance else 0.0)
        dp_active = 0.0
        if action is not None and action.t_on <= mid < action.t_off:
            dp_active = action.dp
        rhs = dfec_dynamics(model, dp_active, p_motor)
        mask = (t_grid >= lo - 1e-12) & (t_grid < hi - 1e-12)
        if hi == bounds[-1]:
            mask |= t_grid >= hi - 1e-12
        t_eval = np.clip(t_grid[mask], lo, hi)
        drop_end = len(t_eval) == 0 or t_eval[-1] < hi - 1e-12
        if drop_end:
            t_eval = np.append(t_eval, hi)
        sol = solve_ivp(rhs, (lo, hi), y, method="RK45", rtol=opts.rtol,
                        atol=opts.atol, t_eval=t_eval)
        if not sol.success:
            raise StiffnessError(f"DFEC integration failed on [{lo}, {hi}]: {sol.message}")
        out[mask] = sol.y.T[:-1] if drop_end else sol.y.T
        y = sol.y[:, -1]
        if np.abs(out[mask][:, 0] - out[mask][:, 2]).max(initial=0.0) > _ANGLE_SLIP:
            unstable = True
            break
    if unstable:
        out[:] = np.nan
    return DfecTrajectory(t=t_grid, y=out, unstable=unstable)


def nadir_cost(model: TwoMachineModel, action: DfecAction | None, opts: SimOptions) -> float:
    """``w_ss - min((w1 + w2) / 2)``; +inf when the run loses synchronism."""
    traj = simulate(model, action, opts)
    if traj.unstable:
        return INSTABILITY_COST
    avg = traj.avg_speed
    tail = traj.t >= opts.horizon - opts.ss_window
    w_ss = float(avg[tail].mean())
    return w_ss - float(avg.min())


def steady_state_speed(model: TwoMachineModel, opts: SimOptions) -> float:
    traj = simulate(model, None, opts)
    tail = traj.t >= opts.horizon - opts.ss_window
    return float(traj.avg_speed[tail].mean())


@dataclass(frozen=True)
class ActionBounds:
    dp_max: float = 0.25
    t_on_max: float = 10.0
    t_off_max: float = 40.0


def optimize_action(
    model: TwoMachineModel,
    bounds: ActionBounds,
    opts: SimOptions,
    initial_guess: DfecAction | None = None,
    grid_starts: int = 5,
    refine_starts: int = 3,
) -> DfecResult:
    """Derivative-free search for the best injection block.

    The cost comes from an event-driven simulation with a nonsmooth ``min``,
    so a penalized Nelder-Mead simplex is run from the best points of a
    coarse ``grid_starts^3`` scan (variables scaled to the unit cube; the
    window is parameterized as ``(dp, t_on, length)`` so ``t_on < t_off``
    holds by construction).
    """
    uncontrolled = nadir_cost(model, None, opts)
    traj0 = simulate(model, None, opts)
    nadir0 = 1.0 - float(traj0.avg_speed.min())

    scales = np.array([bounds.dp_max, bounds.t_on_max, bounds.t_off_max])

    def unpack(v):
        dp = float(np.clip(v[0], 0.0, 1.0)) * bounds.dp_max
        t_on = float(np.clip(v[1], 0.0, 1.0)) * bounds.t_on_max
        length = float(np.clip(v[2], 1e-3, 1.0)) * (bounds.t_off_max - t_on)
        return dp, t_on, t_on + max(length, 1e-3)

    def cost_of(v):
        penalty = float(np.sum(np.clip(np.abs(v - 0.5) - 0.5, 0.0, None) ** 2)) * 10.0
        dp, t_on, t_off = unpack(v)
        if dp <= 0.0:
            return uncontrolled + penalty
        c = nadir_cost(model, DfecAction(dp, t_on, t_off), opts)
        return c + penalty

    candidates = []
    if initial_guess is not None:
        v = np.array([
            initial_guess.dp / bounds.dp_max,
            initial_guess.t_on / bounds.t_on_max,
            (initial_guess.t_off - initial_guess.t_on)
            / max(bounds.t_off_max - initial_guess.t_on, 1e-9),
        ])
        candidates.append((v, cost_of(v)))
    grid = (np.arange(grid_starts) + 0.5) / grid_starts
    for gd in grid:
        for gon in grid:
            for glen in grid:
                v = np.array([gd, gon, glen])
                candidates.append((v, cost_of(v)))

    finite = [(v, c) for v, c in candidates if np.isfinite(c)]
    if not finite:
        raise OptimizationError("all optimizer starts diverged", history=candidates)
    finite.sort(key=lambda vc: vc[1])

    history = []
    best_v, best_c = finite[0]
    for v0, c0 in finite[:refine_starts]:
        res = minimize(
            cost_of, v0, method="Nelder-Mead",
            options={"xatol": 1e-3, "fatol": 1e-9, "maxiter": 400},
        )
        history.append((unpack(res.x), float(res.fun)))
        if res.fun < best_c:
            best_v, best_c = res.x, float(res.fun)

    dp, t_on, t_off = unpack(best_v)
    if best_c > uncontrolled:
        # dp = 0 is always feasible; never return something worse.
        dp, t_on, t_off, best_c = 0.0, 0.0, 1e-3, uncontrolled
    action = DfecAction(dp, max(t_on, 0.0), t_off)
    traj_c = simulate(model, action if dp > 0 else None, opts)
    nadir_c = 1.0 - float(traj_c.avg_speed.min()) if not traj_c.unstable else float("nan")
    return DfecResult(
        action=action,
        cost=best_c,
        uncontrolled_cost=uncontrolled,
        uncontrolled_nadir=nadir0,
        controlled_nadir=nadir_c,
        history=tuple(history),
    )


def contour_sweep(
    model: TwoMachineModel,
    dp: float,
    t_on_values: np.ndarray,
    t_off_values: np.ndarray,
    opts: SimOptions,
    workers: int = 1,
) -> np.ndarray:
    """Cost grid (scaled by 1000) over switch-on/switch-off times.

    Cells with ``t_on >= t_off`` carry NaN. Rows follow ``t_on_values``,
    columns ``t_off_values``. Evaluations are independent; with
    ``workers > 1`` rows fan out over a thread pool and are merged in order.
    """
    t_on_values = np.asarray(t_on_values, dtype=float)
    t_off_values = np.asarray(t_off_values, dtype=float)

    def row(i):
        vals = np.full(len(t_off_values), np.nan)
        for j, t_off in enumerate(t_off_values):
            t_on = t_on_values[i]
            if t_on >= t_off:
                continue
            vals[j] = 1000.0 * nadir_cost(model, DfecAction(dp, t_on, t_off), opts)
        return vals

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, range(len(t_on_values))))
    else:
        rows = [row(i) for i in range(len(t_on_values))]
    return np.vstack(rows)


def sweep_to_csv(path, t_on_values, t_off_values, grid) -> None:
    """Header row/column carry the grid values; NaN cells are left empty."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_on\\t_off"] + [f"{v:.6f}" for v in t_off_values])
        for i, t_on in enumerate(t_on_values):
            row = [f"{t_on:.6f}"]
            row += ["" if np.isnan(v) else f"{v:.6f}" for v in grid[i]]
            writer.writerow(row)
