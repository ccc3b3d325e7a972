"""Discrete oscillation control: switching function, injection design,
switch-time search and multi-stage scheduling.

The controller damps swing oscillations by stepping CC injections so the
equilibrium temporarily shifts from ``x_e`` to ``x_c``. The switch-on instant
is the root of a closed-form switching function (the orbit around ``x_c``
through the current state then contains ``x_e``); the switch-off instant is
the first minimum of the kinetic oscillation energy afterwards.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    DimensionError,
    MaxWindowWarning,
    NoSwitchOpportunityError,
    ReachabilityWarning,
)
from .modal import ModalBasis, orbit_value, propagate, propagate_batch
from .network import ReducedModel, equilibrium_shifted

SAMPLE_DT = 1e-3          # root/minimum bracketing step, s
H_ROOT_RTOL = 1e-10       # |h| tolerance relative to the h(x_c) term


@dataclass(frozen=True)
class ControlStage:
    dp: np.ndarray            # CC power change, pu
    target_modes: tuple[int, ...]
    t_on: float
    t_off: float
    x_c: np.ndarray
    h_residual: float
    energy_on: float
    energy_off: float

    def __post_init__(self):
        if not self.t_on < self.t_off:
            raise DimensionError(f"stage requires t_on < t_off, got {self.t_on} >= {self.t_off}")


@dataclass(frozen=True)
class DeocSchedule:
    stages: tuple[ControlStage, ...]
    final_state: np.ndarray | None = None
    final_time: float | None = None
    skipped: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        for prev, nxt in zip(self.stages, self.stages[1:]):
            if prev.t_off > nxt.t_on:
                raise DimensionError(
                    f"stages overlap: t_off {prev.t_off} > next t_on {nxt.t_on}"
                )

    def to_dict(self, base_mva: float) -> dict:
        return {
            "stages": [
                {
                    "target_modes": list(s.target_modes),
                    "dp_pu": [float(v) for v in s.dp],
                    "dp_mw": [float(v * base_mva) for v in s.dp],
                    "t_on": s.t_on,
                    "t_off": s.t_off,
                    "h_residual": s.h_residual,
                    "energy_on": s.energy_on,
                    "energy_off": s.energy_off,
                }
                for s in self.stages
            ],
            "skipped": [{"target": t, "reason": r} for t, r in self.skipped],
        }


def switching_function(
    basis: ModalBasis, x_e: np.ndarray, x_c: np.ndarray, x: np.ndarray
) -> float:
    """Closed-form switch-on indicator; its zero marks the switching instant."""
    g = basis.d + basis.a.T @ basis.e @ basis.a
    shift = x_e - x_c
    dx = np.asarray(x, dtype=float) - x_c
    return float(2.0 * shift @ basis.d @ shift - dx @ g @ dx)


def _switching_function_batch(
    basis: ModalBasis, x_e: np.ndarray, x_c: np.ndarray, xs: np.ndarray
) -> np.ndarray:
    g = basis.d + basis.a.T @ basis.e @ basis.a
    shift = x_e - x_c
    amp = 2.0 * shift @ basis.d @ shift
    dx = xs - x_c
    return amp - np.einsum("ij,jk,ik->i", dx, g, dx)


def oscillation_energy(model: ReducedModel, x: np.ndarray) -> float:
    """Kinetic oscillation energy ``w_s (w-1)^T H (w-1)`` in pu."""
    dw = np.asarray(x, dtype=float)[model.n_machines:] - 1.0
    return float(model.omega_s * dw @ (model.h * dw))


def oscillation_energy_batch(model: ReducedModel, xs: np.ndarray) -> np.ndarray:
    dw = np.asarray(xs, dtype=float)[:, model.n_machines:] - 1.0
    return model.omega_s * np.einsum("ij,j,ij->i", dw, model.h, dw)


def design_dp(
    basis: ModalBasis,
    model: ReducedModel,
    x0: np.ndarray,
    target_modes,
    scale: float,
) -> np.ndarray:
    """CC power change whose equilibrium shift points into the targeted
    modal subspace of the current excitation.

    Solves ``min || b_red^-1 b_cc dp - scale * v ||`` by least squares, where
    ``v`` is the normalized angle part of the modal components of
    ``x0 - x_e`` in the targeted pairs.
    """
    target_modes = tuple(target_modes)
    if not target_modes:
        raise DimensionError("target_modes must be nonempty")
    if model.n_cc == 0:
        raise DimensionError("model has no controllable components")

    v = _target_direction(basis, model, x0, target_modes)
    if v is None:
        return np.zeros(model.n_cc)

    t_map = np.linalg.solve(model.b_red, model.b_cc)
    dp, *_ = np.linalg.lstsq(t_map, scale * v, rcond=None)
    resid = np.linalg.norm(t_map @ dp - scale * v)
    if resid > 1e-6 * abs(scale):
        warnings.warn(
            ReachabilityWarning(
                f"targeted subspace only partially reachable through the CCs "
                f"(residual {resid:.3e})",
                residual=resid,
            )
        )
    return dp


def _target_direction(basis, model, x0, target_modes):
    """Normalized angle-space direction of the targeted modal components."""
    z = basis.modal_coords(model.x_eq, x0)
    m = model.n_machines
    v_full = np.zeros(2 * m)
    for p in target_modes:
        v_full += 2.0 * (basis.m[:, 2 * p] * z[2 * p]).real
    v = v_full[:m]
    norm = np.linalg.norm(v)
    if norm < 1e-14:
        return None
    return v / norm


def auto_scale(basis, model, x0, target_modes) -> float:
    """Shift magnitude that guarantees a switching-function root.

    A root exists when the targeted pair's modal shift exceeds (half of) the
    total squared modal excitation divided by the pair amplitude; a factor-2
    margin is applied.
    """
    z = basis.modal_coords(model.x_eq, x0)
    rho_sq = float(np.abs(z) ** 2 @ np.ones(len(z)))
    amp = basis.pair_amplitudes(model.x_eq, x0)
    pair_mag = np.sqrt(sum(amp[p] ** 2 for p in target_modes))
    if pair_mag < 1e-14:
        return 0.0
    v = _target_direction(basis, model, x0, target_modes)
    w_unit = basis.m_inv @ np.concatenate([v, np.zeros(model.n_machines)])
    idx = [i for p in target_modes for i in (2 * p, 2 * p + 1)]
    w_pair = np.linalg.norm(w_unit[idx])
    if w_pair < 1e-14:
        return 0.0
    return rho_sq / (pair_mag * w_pair)


def find_switch_on(
    basis: ModalBasis,
    model: ReducedModel,
    x_c: np.ndarray,
    x0: np.ndarray,
    t0: float,
    t_arm: float,
    t_max: float,
    dt: float = SAMPLE_DT,
    validate_roots: bool = True,
):
    """Earliest usable switching-function root along the uncontrolled orbit.

    ``x0`` is the state at time ``t0``; the search covers ``[t_arm, t_max]``
    with fixed-step bracketing followed by bisection. The switching function
    vanishes twice per revolution of the targeted mode, but only one of the
    crossings steers the trajectory toward ``x_e`` before the opposite orbit
    extreme; with ``validate_roots`` each root is verified by riding the
    shifted orbit to its first oscillation-energy minimum and checking that
    the residual orbit amplitude around ``x_e`` actually shrinks. Roots that
    fail the check are skipped.

    Returns ``(t_on, x_on, h_residual)``.
    """
    if not t_arm < t_max:
        raise DimensionError("t_arm must be < t_max")
    x_e = model.x_eq
    shift = x_e - x_c
    h_amp = float(2.0 * shift @ basis.d @ shift)
    tol = H_ROOT_RTOL * h_amp

    ts = np.arange(max(t_arm, t0), t_max + 0.5 * dt, dt)
    xs = propagate_batch(basis, x_e, x0, ts - t0)
    hs = _switching_function_batch(basis, x_e, x_c, xs)

    def h_at(t):
        return switching_function(basis, x_e, x_c, propagate(basis, x_e, x0, t - t0))

    roots_rejected = 0
    for k in range(len(ts) - 1):
        if hs[k] == 0.0 or hs[k] * hs[k + 1] < 0.0:
            t_on = _bisect(h_at, ts[k], ts[k + 1], hs[k], hs[k + 1], tol)
            x_on = propagate(basis, x_e, x0, t_on - t0)
            if validate_roots and not _root_improves(basis, model, x_c, x_on, t_on, dt):
                roots_rejected += 1
                continue
            return t_on, x_on, abs(h_at(t_on))

    min_h = float(np.min(np.abs(hs)))
    raise NoSwitchOpportunityError(
        f"no usable switching-function root in [{t_arm:.3f}, {t_max:.3f}] s "
        f"(min |h| = {min_h:.3e}, {roots_rejected} roots rejected)",
        min_abs_h=min_h,
    )


def _root_improves(basis, model, x_c, x_on, t_on, dt) -> bool:
    """Does switching here, then off at the first energy minimum, shrink the
    orbit around the equilibrium?"""
    slowest = min(mode.frequency for mode in basis.modes)
    window = 2.0 * np.pi / slowest * 1.5
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxWindowWarning)
        _, x_off, _ = find_switch_off(basis, model, x_c, x_on, t_on, t_on + window, dt=dt)
    before = orbit_value(basis, model.x_eq, x_on)
    after = orbit_value(basis, model.x_eq, x_off)
    return after < before


def _bisect(func, lo, hi, f_lo, f_hi, tol, max_iter=200):
    if f_lo == 0.0:
        return lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = func(mid)
        if abs(f_mid) < tol or (hi - lo) < 1e-14:
            return mid
        if f_lo * f_mid <= 0.0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)


def find_switch_off(
    basis: ModalBasis,
    model: ReducedModel,
    x_c: np.ndarray,
    x_on: np.ndarray,
    t_on: float,
    t_max: float,
    dt: float = SAMPLE_DT,
):
    """First local minimum of the oscillation energy after switch-on.

    The system orbits ``x_c`` while the control is active. Returns
    ``(t_off, x_off, energy_off)``; if no interior minimum appears before
    ``t_max``, returns the window end and emits :class:`MaxWindowWarning`.
    """
    ts = np.arange(t_on, t_max + 0.5 * dt, dt)
    xs = propagate_batch(basis, x_c, x_on, ts - t_on)
    ek = oscillation_energy_batch(model, xs)

    def ek_at(t):
        return oscillation_energy(model, propagate(basis, x_c, x_on, t - t_on))

    for k in range(1, len(ts) - 1):
        if ek[k] <= ek[k - 1] and ek[k] <= ek[k + 1] and (ek[k] < ek[k - 1] or ek[k] < ek[k + 1]):
            res = minimize_scalar(
                ek_at, bounds=(ts[k - 1], ts[k + 1]), method="bounded",
                options={"xatol": 1e-9},
            )
            t_off = float(res.x)
            x_off = propagate(basis, x_c, x_on, t_off - t_on)
            return t_off, x_off, oscillation_energy(model, x_off)

    warnings.warn(MaxWindowWarning(
        f"no oscillation-energy minimum in [{t_on:.3f}, {t_max:.3f}] s; using window end"
    ))
    x_off = propagate(basis, x_c, x_on, ts[-1] - t_on)
    return float(ts[-1]), x_off, oscillation_energy(model, x_off)


def default_targets(basis: ModalBasis, model: ReducedModel, x0: np.ndarray, n: int):
    """Mode pairs ordered by descending modal excitation of ``x0``."""
    amp = basis.pair_amplitudes(model.x_eq, x0)
    order = np.argsort(-(amp ** 2), kind="stable")
    return tuple(int(i) for i in order[:n])


def build_schedule(
    basis: ModalBasis,
    model: ReducedModel,
    x0: np.ndarray,
    t0: float,
    targets,
    dp_overrides=None,
    scale: float | None = None,
    stage_window: float = 10.0,
    dt: float = SAMPLE_DT,
) -> DeocSchedule:
    """Sequential per-mode schedule: design the injection, find the switch-on
    root, ride the shifted orbit to the energy minimum, advance, repeat.

    A stage that finds no switching opportunity is skipped with a recorded
    reason; later stages continue from the unchanged state.
    """
    targets = list(targets)
    if dp_overrides is not None and len(dp_overrides) != len(targets):
        raise DimensionError("dp_overrides must match targets in length")

    x, t = np.asarray(x0, dtype=float), float(t0)
    stages: list[ControlStage] = []
    skipped: list[tuple[int, str]] = []

    for k, target in enumerate(targets):
        pair_targets = (target,) if np.isscalar(target) else tuple(target)
        if dp_overrides is not None and dp_overrides[k] is not None:
            dp = np.asarray(dp_overrides[k], dtype=float)
        else:
            s = scale if scale is not None else auto_scale(basis, model, x, pair_targets)
            if s == 0.0:
                skipped.append((int(target), "target mode not excited"))
                continue
            dp = design_dp(basis, model, x, pair_targets, s)
        x_c = equilibrium_shifted(model, dp)
        if np.linalg.norm(x_c - model.x_eq) < 1e-14:
            skipped.append((int(target), "zero equilibrium shift"))
            continue
        try:
            t_on, x_on, h_res = find_switch_on(
                basis, model, x_c, x, t, t, t + stage_window, dt=dt
            )
        except NoSwitchOpportunityError as exc:
            skipped.append((int(target), str(exc)))
            continue
        e_on = oscillation_energy(model, x_on)
        t_off, x_off, e_off = find_switch_off(
            basis, model, x_c, x_on, t_on, t_on + stage_window, dt=dt
        )
        stages.append(
            ControlStage(
                dp=dp,
                target_modes=pair_targets,
                t_on=t_on,
                t_off=t_off,
                x_c=x_c,
                h_residual=h_res,
                energy_on=e_on,
                energy_off=e_off,
            )
        )
        x, t = x_off, t_off

    return DeocSchedule(
        stages=tuple(stages),
        final_state=x,
        final_time=t,
        skipped=tuple(skipped),
    )
