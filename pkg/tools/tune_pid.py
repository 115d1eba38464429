# -*- mode: python; coding: utf-8 -*-
# !/usr/bin/env python3
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""
Re-derive and check the gains of the dual-loop PID baseline.

The shipped gains were obtained in two steps:

1. Ziegler-Nichols start on the altitude channel: with integral and derivative
   gains disabled, the proportional gain is raised until the altitude error
   oscillates without decay. The ultimate gain ``Ku`` and the oscillation
   period ``Tu`` give ``kp = 0.6 Ku``, ``ki = 1.2 Ku / Tu``,
   ``kd = 0.075 Ku Tu``.
2. Manual refinement of all channels against 1 m position steps until every
   axis settles within 0.1 m in less than 10 s without saturating rotors.

Example:
    python tune_pid.py --ziegler-nichols

    === Ziegler-Nichols start (altitude) ===
    Ku = <ultimate gain>, Tu = <period> s
    z_kp: ...  z_ki: ...  z_kd: ...

    python tune_pid.py --gains ../src/vtol_transition/data/pid_gains.yaml

    === Step responses (1 m, 10 s) ===
       steady_state_error  settling_time  saturated_ticks
    x   ...                 ...            ...
    y   ...
    z   ...
"""

from __future__ import annotations

import argparse
from dataclasses import replace

import numpy as np
import pandas as pd

from vtol_transition.config import load_pid_gains, load_vehicle_params
from vtol_transition.dynamics import VehicleParams, integrate_step, solve_trim
from vtol_transition.pid import DualLoopController, DualLoopGains, PidGains

AXES = {"x": 0, "y": 1, "z": 2}


def step_response(
    params: VehicleParams,
    gains: DualLoopGains,
    axis: str,
    step: float = 1.0,
    duration: float = 10.0,
) -> pd.DataFrame:
    """Flies a position step along ``axis`` from the trim hover."""
    controller = DualLoopController(params, gains)
    state = solve_trim(params).state()
    target = np.zeros(3)
    # Altitude steps go up, i.e. towards negative z.
    target[AXES[axis]] = -step if axis == "z" else step

    rows = []
    for tick in range(round(duration / params.dt)):
        command = controller(state, target)
        state = integrate_step(state, command, params)
        saturated = bool(np.any(command.as_array()[:3] >= params.omega_max) or np.any(command.as_array()[:3] <= 0))
        rows.append(
            {
                "time": (tick + 1) * params.dt,
                "error": float(target[AXES[axis]] - state.position[AXES[axis]]),
                "saturated": saturated,
            },
        )
    return pd.DataFrame(rows)


def oscillation(response: pd.DataFrame) -> tuple[float, float]:
    """Ratio of the last to the first error peak and the mean period."""
    error = response["error"].to_numpy()
    time = response["time"].to_numpy()
    crossings = np.nonzero(np.diff(np.signbit(error)))[0]
    if len(crossings) < 3:
        return 0.0, float("nan")
    peaks = [np.max(np.abs(error[a:b])) for a, b in zip(crossings[:-1], crossings[1:], strict=True)]
    period = float(2.0 * np.mean(np.diff(time[crossings])))
    return float(peaks[-1] / peaks[0]), period


def ziegler_nichols(
    params: VehicleParams,
    gains: DualLoopGains,
    kp_grid: np.ndarray,
    duration: float = 30.0,
) -> tuple[float, float, PidGains]:
    """Searches the ultimate gain of the altitude channel on ``kp_grid``."""
    for kp in kp_grid:
        probe = replace(gains, z=replace(gains.z, kp=float(kp), ki=0.0, kd=0.0))
        ratio, period = oscillation(step_response(params, probe, "z", duration=duration))
        if ratio >= 0.95 and np.isfinite(period):
            ku, tu = float(kp), period
            return ku, tu, replace(gains.z, kp=0.6 * ku, ki=1.2 * ku / tu, kd=0.075 * ku * tu)
    raise RuntimeError("No sustained oscillation found on the gain grid")


def summarize(response: pd.DataFrame, tolerance: float = 0.1) -> dict[str, float]:
    tail = response[response["time"] > response["time"].iloc[-1] - 1.0]
    outside = response.index[np.abs(response["error"]) > tolerance]
    settling = 0.0 if len(outside) == 0 else float(response["time"].iloc[min(outside[-1] + 1, len(response) - 1)])
    return {
        "steady_state_error": float(np.mean(np.abs(tail["error"]))),
        "settling_time": settling,
        "saturated_ticks": int(response["saturated"].sum()),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description="Tune and check the dual-loop PID gains.")
    parser.add_argument("--vehicle", help="Vehicle parameter file.")
    parser.add_argument("--gains", help="PID gain file to check.")
    parser.add_argument("--ziegler-nichols", action="store_true", help="Run the altitude gain search.")
    parser.add_argument("--duration", type=float, default=10.0, help="Step response length (s).")
    args = parser.parse_args()

    params = load_vehicle_params(args.vehicle)
    gains = load_pid_gains(args.gains)

    if args.ziegler_nichols:
        ku, tu, z = ziegler_nichols(params, gains, np.linspace(0.1, 10.0, 100))
        print("=== Ziegler-Nichols start (altitude) ===")  # noqa: T201
        print(f"Ku = {ku:.3f}, Tu = {tu:.2f} s")  # noqa: T201
        print(f"z_kp: {z.kp:.3f}  z_ki: {z.ki:.3f}  z_kd: {z.kd:.3f}")  # noqa: T201
        return

    print(f"=== Step responses (1 m, {args.duration:g} s) ===")  # noqa: T201
    table = pd.DataFrame(
        {axis: summarize(step_response(params, gains, axis, duration=args.duration)) for axis in AXES},
    ).T
    print(table.to_string())  # noqa: T201


if __name__ == "__main__":
    main()
