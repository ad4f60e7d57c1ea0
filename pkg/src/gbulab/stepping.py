"""Explicit time integration with CFL step control, gradient blow-up
detection, eps-continuation, and snapshot/restart.

Forward Euler on the interior with boundary nodes re-pinned each step.
The step size never exceeds theta times the stability bound

    h^2 / (2 d (p-1) (W^2+eps)^((p-2)/2) + h q (W^2+eps)^((q-1)/2)),

with W the current max nodal gradient magnitude and d the dimension.
A run terminates when t_end is reached, when ||grad u||_inf crosses the
configured threshold (GBUDetected), or when the stable step collapses
below dt_min / the field goes non-finite (StalledStep unless the gradient
was still growing, which is reported as GBUDetected).

Identical spec + control produce bit-identical monitor series.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import fieldio
from .grid import Grid
from .operators import (
    gradient_source,
    integrate,
    quadrature_weights,
    regularized_diffusion,
)
from .problem import ProblemSpec, SolutionState

COMPLETED = "Completed"
GBU_DETECTED = "GBUDetected"
STALLED = "StalledStep"

MONITOR_COLUMNS = (
    "t",
    "min_u",
    "max_u",
    "sup_u",
    "grad_inf",
    "y",
    "ut_l2_acc",
    "max_ut",
    "min_source",
    "source_energy_acc",
    "dt",
)
CSV_COLUMNS = ("t", "max_u", "min_u", "grad_inf", "y", "ut_l2_acc")


class StalledStepError(RuntimeError):
    """Non-finite field values or a rejected step."""


@dataclass(frozen=True)
class StepControl:
    """Run control: horizon, CFL safety, detection threshold, snapshots."""

    t_end: float
    theta: float = 0.5
    dt_min: float = 1e-14
    gbu_threshold: float = 1e6
    snapshot_every: int = 0
    t_marks: tuple[float, ...] = ()
    report_thresholds: tuple[float, ...] = ()
    functional_weight: np.ndarray | None = None  # phi1^alpha field; records y(t)
    monitor_stride: int = 1
    max_steps: int = 0  # 0 = unlimited

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not 0 < self.theta <= 1:
            raise ValueError("theta must be in (0, 1]")
        if not self.dt_min > 0:
            raise ValueError("dt_min must be positive")
        if not self.gbu_threshold > 0:
            raise ValueError("gbu_threshold must be positive")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be >= 0")
        if self.monitor_stride < 1:
            raise ValueError("monitor_stride must be >= 1")
        object.__setattr__(self, "t_marks", tuple(sorted(float(t) for t in self.t_marks)))
        object.__setattr__(
            self, "report_thresholds", tuple(sorted(float(g) for g in self.report_thresholds))
        )


class _MonitorBuffer:
    """Grow-by-doubling column store for per-step scalars."""

    def __init__(self, columns=MONITOR_COLUMNS, capacity=1024):
        self.columns = columns
        self._data = np.empty((capacity, len(columns)))
        self._n = 0

    def append(self, row):
        if self._n == self._data.shape[0]:
            bigger = np.empty((2 * self._data.shape[0], self._data.shape[1]))
            bigger[: self._n] = self._data
            self._data = bigger
        self._data[self._n] = row
        self._n += 1

    def finish(self) -> dict[str, np.ndarray]:
        trimmed = self._data[: self._n].copy()
        return {name: trimmed[:, k] for k, name in enumerate(self.columns)}


@dataclass
class Trajectory:
    """Snapshot states (always including t=0 and the final time) + monitors."""

    grid: Grid
    spec: ProblemSpec
    states: list[SolutionState]
    monitors: dict[str, np.ndarray]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def state_at(self, t: float, rtol: float = 1e-9) -> SolutionState:
        for s in self.states:
            if math.isclose(s.t, t, rel_tol=rtol, abs_tol=1e-300):
                return s
        raise KeyError(f"no snapshot at t={t}")


@dataclass
class RunReport:
    verdict: str
    t_detect: float | None
    monitors: dict[str, np.ndarray]
    config: dict
    wall_time: float
    reason: str
    steps: int
    threshold_crossings: dict[float, float]
    min_u_overall: float
    max_u_overall: float
    initial_gradient_energy: float

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "reason": self.reason,
            "t_detect": self.t_detect,
            "steps": self.steps,
            "wall_time": self.wall_time,
            "config": self.config,
            "threshold_crossings": {
                repr(float(g)): t for g, t in sorted(self.threshold_crossings.items())
            },
            "min_u_overall": self.min_u_overall,
            "max_u_overall": self.max_u_overall,
            "initial_gradient_energy": self.initial_gradient_energy,
            "series": {k: v.tolist() for k, v in self.monitors.items()},
        }


def stable_dt(state: SolutionState, spec: ProblemSpec, control: StepControl) -> float:
    """theta-scaled explicit stability bound; infinite when the RHS is flat."""
    grid = state.grid
    h = grid.h_min
    d = grid.dimension
    w = float(np.max(state.grad_mag))
    s = w * w + spec.epsilon
    denom = 2.0 * d * (spec.p - 1.0) * s ** ((spec.p - 2.0) / 2.0)
    denom += h * spec.q * s ** ((spec.q - 1.0) / 2.0)
    if denom == 0.0:
        return math.inf
    return control.theta * h * h / denom


def step(state: SolutionState, spec: ProblemSpec, dt: float) -> SolutionState:
    """One explicit step; returns a new state at t + dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    diff = regularized_diffusion(state, spec.p, spec.epsilon)
    src = gradient_source(state, spec.q, spec.epsilon, spec.mu)
    inner = state.grid.interior_slice()
    u_new = state.u.copy()
    u_new[inner] += dt * (diff[inner] + src[inner])
    bd = state.grid.boundary_mask()
    u_new[bd] = spec.boundary_values[bd]
    if not np.all(np.isfinite(u_new)):
        raise StalledStepError(f"non-finite field values after step at t={state.t}")
    return SolutionState(state.grid, u_new, state.t + dt)


def _config_echo(spec: ProblemSpec, control: StepControl) -> dict:
    return {
        "grid": {
            "extents": [list(e) for e in spec.grid.extents],
            "points_per_axis": list(spec.grid.points_per_axis),
        },
        "p": spec.p,
        "q": spec.q,
        "epsilon": spec.epsilon,
        "mu": spec.mu,
        "theta": control.theta,
        "dt_min": control.dt_min,
        "gbu_threshold": control.gbu_threshold,
        "t_end": control.t_end,
        "snapshot_every": control.snapshot_every,
        "t_marks": list(control.t_marks),
        "report_thresholds": list(control.report_thresholds),
        "records_functional": control.functional_weight is not None,
        "monitor_stride": control.monitor_stride,
    }


def run(spec: ProblemSpec, control: StepControl) -> tuple[Trajectory, RunReport]:
    """Integrate until t_end, threshold crossing, or stall."""
    t_start = time.perf_counter()
    grid = spec.grid
    inner = grid.interior_slice()
    bd = grid.boundary_mask()
    qw = quadrature_weights(grid)
    state = spec.initial_state()

    e0 = integrate(
        grid, np.power(state.grad_mag**2 + spec.epsilon, spec.p / 2.0)
    )
    weight = control.functional_weight
    if weight is not None and weight.shape != grid.shape:
        raise ValueError("functional_weight must be a grid field")

    buf = _MonitorBuffer()
    snapshots: list[SolutionState] = [state.copy()]
    crossings: dict[float, float] = {}
    pending = list(control.report_thresholds)
    marks = [t for t in control.t_marks if 0.0 < t <= control.t_end]
    ut_l2_acc = 0.0
    src_energy_acc = 0.0
    min_overall = float(np.min(state.u))
    max_overall = float(np.max(state.u))

    def y_of(u: np.ndarray) -> float:
        if weight is None:
            return math.nan
        return float(np.sum(qw * u * weight))

    def record(dt_used: float, max_ut: float, min_src: float, mn=None, mx=None):
        u = state.u
        if mn is None:
            mn, mx = float(np.min(u)), float(np.max(u))
        buf.append(
            (
                state.t,
                mn,
                mx,
                max(abs(mn), abs(mx)),
                float(np.max(state.grad_mag)),
                y_of(u),
                ut_l2_acc,
                max_ut,
                min_src,
                src_energy_acc,
                dt_used,
            )
        )

    record(0.0, math.nan, math.nan)

    verdict, reason, t_detect = COMPLETED, "t_end", None
    steps = 0
    grad_prev = float(np.max(state.grad_mag))
    while True:
        w_now = float(np.max(state.grad_mag))
        while pending and w_now >= pending[0]:
            crossings[pending.pop(0)] = state.t
        if w_now >= control.gbu_threshold:
            verdict, reason, t_detect = GBU_DETECTED, "threshold", state.t
            break
        if state.t >= control.t_end:
            break
        if control.max_steps and steps >= control.max_steps:
            verdict, reason = STALLED, "max_steps"
            break

        dt_stable = stable_dt(state, spec, control)
        if dt_stable < control.dt_min:
            if w_now > grad_prev:
                verdict, reason, t_detect = GBU_DETECTED, "dt_floor", state.t
            else:
                verdict, reason = STALLED, "dt_floor"
            break
        grad_prev = w_now

        while marks and marks[0] <= state.t:
            marks.pop(0)
        target = min(marks[0], control.t_end) if marks else control.t_end
        if dt_stable >= target - state.t:
            dt = target - state.t
            t_new = target  # assign exactly so marks and t_end are hit bit-exactly
            if marks and target == marks[0]:
                marks.pop(0)
                hit = target
            else:
                hit = None
        else:
            dt = dt_stable
            t_new = state.t + dt
            hit = None

        diff = regularized_diffusion(state, spec.p, spec.epsilon)
        # source inlined with the same operation order as gradient_source so
        # the half-power can be reused by the energy accumulator
        w_mag = state.grad_mag
        s_half = np.power(w_mag * w_mag + spec.epsilon, spec.q / 2.0)
        src = spec.mu * (s_half - spec.epsilon ** (spec.q / 2.0))
        rhs_inner = diff[inner] + src[inner]
        src_energy_acc += dt * float(np.sum(qw * (s_half * s_half)))
        u_new = state.u.copy()
        u_new[inner] += dt * rhs_inner
        u_new[bd] = spec.boundary_values[bd]
        mn, mx = float(np.min(u_new)), float(np.max(u_new))
        if not (math.isfinite(mn) and math.isfinite(mx)):
            verdict, reason = STALLED, "nonfinite"
            break
        state = SolutionState(grid, u_new, t_new)
        steps += 1

        max_ut = float(np.max(rhs_inner))
        min_src = float(np.min(src[inner]))
        ut_l2_acc += dt * float(np.sum(qw[inner] * rhs_inner * rhs_inner))
        min_overall = min(min_overall, mn)
        max_overall = max(max_overall, mx)
        if steps % control.monitor_stride == 0:
            record(dt, max_ut, min_src, mn, mx)
        if hit is not None or (
            control.snapshot_every and steps % control.snapshot_every == 0
        ):
            snapshots.append(state.copy())

    if snapshots[-1].t != state.t:
        snapshots.append(state.copy())
    monitors = buf.finish()
    if monitors["t"][-1] != state.t:
        # final partial-stride step still gets a row
        state_row_needed = True
    else:
        state_row_needed = False
    if state_row_needed:
        record(monitors["dt"][-1] if steps else 0.0, math.nan, math.nan)
        monitors = buf.finish()

    report = RunReport(
        verdict=verdict,
        t_detect=t_detect,
        monitors=monitors,
        config=_config_echo(spec, control),
        wall_time=time.perf_counter() - t_start,
        reason=reason,
        steps=steps,
        threshold_crossings=crossings,
        min_u_overall=min_overall,
        max_u_overall=max_overall,
        initial_gradient_energy=e0,
    )
    traj = Trajectory(grid=grid, spec=spec, states=snapshots, monitors=monitors)
    return traj, report


@dataclass
class PairReport:
    """Lockstep twin run: identical dt sequence for both problems."""

    traj_low: Trajectory
    traj_high: Trajectory
    report_low: RunReport
    report_high: RunReport
    ordering_margin: np.ndarray  # per accepted step: min(v - u) over nodes
    times: np.ndarray


def run_pair(
    spec_low: ProblemSpec, spec_high: ProblemSpec, control: StepControl
) -> PairReport:
    """Run two ordered problems in lockstep (dt = min of both stability bounds).

    Preconditions: same grid, u0_low <= u0_high, g_low <= g_high.
    """
    if spec_low.grid is not spec_high.grid and spec_low.grid != spec_high.grid:
        raise ValueError("lockstep runs need a common grid")
    if np.any(spec_low.initial > spec_high.initial):
        raise ValueError("initial data must be ordered: u0_low <= u0_high")
    if np.any(spec_low.boundary_values > spec_high.boundary_values):
        raise ValueError("boundary data must be ordered: g_low <= g_high")

    grid = spec_low.grid
    inner = grid.interior_slice()
    bd = grid.boundary_mask()
    states = [spec_low.initial_state(), spec_high.initial_state()]
    specs = [spec_low, spec_high]
    bufs = [_MonitorBuffer(("t", "min_u", "max_u", "grad_inf", "dt")) for _ in range(2)]
    snaps: list[list[SolutionState]] = [[states[0].copy()], [states[1].copy()]]
    margins = [float(np.min(states[1].u - states[0].u))]
    times = [0.0]

    for k, s in enumerate(states):
        bufs[k].append((0.0, float(np.min(s.u)), float(np.max(s.u)),
                        float(np.max(s.grad_mag)), 0.0))

    verdict, reason = COMPLETED, "t_end"
    steps = 0
    while states[0].t < control.t_end:
        dt_stable = min(stable_dt(states[k], specs[k], control) for k in range(2))
        if dt_stable < control.dt_min:
            verdict, reason = STALLED, "dt_floor"
            break
        if max(float(np.max(s.grad_mag)) for s in states) >= control.gbu_threshold:
            verdict, reason = GBU_DETECTED, "threshold"
            break
        if control.max_steps and steps >= control.max_steps:
            verdict, reason = STALLED, "max_steps"
            break
        gap = control.t_end - states[0].t
        if dt_stable >= gap:
            dt, t_new = gap, control.t_end
        else:
            dt, t_new = dt_stable, states[0].t + dt_stable
        new_states = []
        for k in range(2):
            diff = regularized_diffusion(states[k], specs[k].p, specs[k].epsilon)
            src = gradient_source(states[k], specs[k].q, specs[k].epsilon, specs[k].mu)
            u_new = states[k].u.copy()
            u_new[inner] += dt * (diff[inner] + src[inner])
            u_new[bd] = specs[k].boundary_values[bd]
            if not np.all(np.isfinite(u_new)):
                raise StalledStepError("non-finite field in lockstep run")
            new_states.append(SolutionState(grid, u_new, t_new))
        states = new_states
        steps += 1
        margins.append(float(np.min(states[1].u - states[0].u)))
        times.append(t_new)
        for k, s in enumerate(states):
            bufs[k].append((s.t, float(np.min(s.u)), float(np.max(s.u)),
                            float(np.max(s.grad_mag)), dt))
        if control.snapshot_every and steps % control.snapshot_every == 0:
            for k in range(2):
                snaps[k].append(states[k].copy())

    for k in range(2):
        if snaps[k][-1].t != states[k].t:
            snaps[k].append(states[k].copy())

    trajs = [
        Trajectory(grid=grid, spec=specs[k], states=snaps[k], monitors=bufs[k].finish())
        for k in range(2)
    ]
    reports = [
        RunReport(
            verdict=verdict,
            t_detect=None,
            monitors=trajs[k].monitors,
            config=_config_echo(specs[k], control),
            wall_time=0.0,
            reason=reason,
            steps=steps,
            threshold_crossings={},
            min_u_overall=float(np.min(trajs[k].monitors["min_u"])),
            max_u_overall=float(np.max(trajs[k].monitors["max_u"])),
            initial_gradient_energy=math.nan,
        )
        for k in range(2)
    ]
    return PairReport(
        traj_low=trajs[0],
        traj_high=trajs[1],
        report_low=reports[0],
        report_high=reports[1],
        ordering_margin=np.array(margins),
        times=np.array(times),
    )


# -- GBU verdict over threshold/resolution families ---------------------------

@dataclass(frozen=True)
class ThresholdCrossing:
    resolution: int
    threshold: float
    t_detect: float | None


@dataclass(frozen=True)
class GbuVerdict:
    status: str  # "GBU" | "NoGBU" | "Inconclusive"
    t_max_estimate: float | None
    per_resolution: dict


def detect_gbu(
    evidence: list[ThresholdCrossing],
    increment_ratio_max: float = 0.75,
    resolution_tol: float = 0.25,
) -> GbuVerdict:
    """Cauchy-style verdict from detection times at nested thresholds/grids.

    A resolution supports GBU when every threshold was crossed, detection
    times are nondecreasing, and increments shrink (ratio <= the given
    bound); its T_max estimate is the geometric extrapolation of the

    crossing times. Resolutions must agree within resolution_tol or the
    verdict is Inconclusive.
    """
    if len(evidence) < 2:
        raise ValueError("need at least 2 runs (nested thresholds or grids)")
    groups: dict[int, list[ThresholdCrossing]] = {}
    for rec in evidence:
        groups.setdefault(rec.resolution, []).append(rec)

    per_res = {}
    statuses = []
    estimates = []
    for res in sorted(groups):
        recs = sorted(groups[res], key=lambda r: r.threshold)
        times = [r.t_detect for r in recs]
        if all(t is None for t in times):
            per_res[res] = {"status": "NoGBU", "t_detect": times}
            statuses.append("NoGBU")
            continue
        if any(t is None for t in times):
            per_res[res] = {"status": "Inconclusive", "t_detect": times}
            statuses.append("Inconclusive")
            continue
        if any(t1 < t0 for t0, t1 in zip(times, times[1:])):
            per_res[res] = {"status": "Inconclusive", "t_detect": times}
            statuses.append("Inconclusive")
            continue
        incs = [t1 - t0 for t0, t1 in zip(times, times[1:])]
        est = times[-1]
        ok = True
        if len(incs) >= 2:
            for d0, d1 in zip(incs, incs[1:]):
                if d0 == 0.0:
                    continue
                if d1 > increment_ratio_max * d0:
                    ok = False
            if ok and incs[-2] > 0:
                r = min(incs[-1] / incs[-2], 0.9)
                est = times[-1] + incs[-1] * r / (1.0 - r)
        elif len(incs) == 1 and incs[0] > 0:
            # two thresholds only: no ratio information, extrapolate one step
            est = times[-1] + incs[0] * increment_ratio_max
        status = "GBU" if ok else "Inconclusive"
        per_res[res] = {"status": status, "t_detect": times, "t_max_estimate": est}
        statuses.append(status)
        if status == "GBU":
            estimates.append(est)

    if all(s == "NoGBU" for s in statuses):
        return GbuVerdict(status="NoGBU", t_max_estimate=None, per_resolution=per_res)
    if all(s == "GBU" for s in statuses):
        mid = float(np.median(estimates))
        if mid > 0 and (max(estimates) - min(estimates)) <= resolution_tol * mid:
            return GbuVerdict(
                status="GBU", t_max_estimate=estimates[-1], per_resolution=per_res
            )
    return GbuVerdict(status="Inconclusive", t_max_estimate=None, per_resolution=per_res)


# -- eps continuation ---------------------------------------------------------

@dataclass
class ContinuationReport:
    epsilons: list[float]
    sup_distances: list[float]  # consecutive pairs ||u_k - u_{k+1}||_inf
    rates: list[float]
    monotone: bool
    extrapolated: np.ndarray
    final_fields: list[np.ndarray]

    def to_dict(self) -> dict:
        return {
            "epsilons": self.epsilons,
            "sup_distances": self.sup_distances,
            "rates": self.rates,
            "monotone": self.monotone,
        }


def epsilon_continuation(
    spec: ProblemSpec, epsilons, control: StepControl
) -> ContinuationReport:
    """Run the same problem for each eps (strictly decreasing, >= 3 entries)
    and study convergence of the final-time fields as eps -> 0."""
    eps = [float(e) for e in epsilons]
    if len(eps) < 3:
        raise ValueError("need at least 3 epsilon values")
    if any(e1 >= e0 for e0, e1 in zip(eps, eps[1:])) or any(e < 0 for e in eps):
        raise ValueError("epsilons must be strictly decreasing and nonnegative")

    finals = []
    for e in eps:
        traj, report = run(replace(spec, epsilon=e), control)
        if report.verdict != COMPLETED:
            raise StalledStepError(
                f"continuation run at eps={e} ended with {report.verdict}"
            )
        finals.append(traj.states[-1].u.copy())

    dists = [
        float(np.max(np.abs(a - b))) for a, b in zip(finals, finals[1:])
    ]
    rates = []
    for k in range(len(dists) - 1):
        if dists[k + 1] > 0 and dists[k] > 0 and eps[k] > eps[k + 1] > 0:
            rates.append(
                math.log(dists[k] / dists[k + 1]) / math.log(eps[k] / eps[k + 1])
            )
        else:
            rates.append(math.nan)
    monotone = all(d0 > d1 for d0, d1 in zip(dists, dists[1:]))

    extrap = finals[-1].copy()
    if rates and math.isfinite(rates[-1]) and rates[-1] > 0 and eps[-1] > 0:
        r = rates[-1]
        denom = eps[-2] ** r - eps[-1] ** r
        if denom != 0:
            extrap = finals[-1] + (finals[-1] - finals[-2]) * (eps[-1] ** r / denom)
    return ContinuationReport(
        epsilons=eps,
        sup_distances=dists,
        rates=rates,
        monotone=monotone,
        extrapolated=extrap,
        final_fields=finals,
    )


# -- snapshots ----------------------------------------------------------------

def snapshot(state: SolutionState) -> bytes:
    return fieldio.pack_field(state.u, state.t)


def restore(
    data: bytes, grid: Grid, boundary_values: np.ndarray | None = None
) -> SolutionState:
    u, t = fieldio.unpack_field(data)
    fieldio.validate_against_grid(u, grid)
    if boundary_values is not None:
        bd = grid.boundary_mask()
        if np.max(np.abs(u[bd] - np.asarray(boundary_values)[bd])) != 0.0:
            raise fieldio.FieldFormatError("boundary values are not pinned to g")
    return SolutionState(grid, u, t)


# -- monitor CSV --------------------------------------------------------------

def write_monitors_csv(path, monitors: dict[str, np.ndarray]) -> None:
    cols = [monitors[c] for c in CSV_COLUMNS]
    with open(path, "w") as f:
        f.write(",".join(CSV_COLUMNS) + "\n")
        for row in zip(*cols):
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def read_monitors_csv(path) -> dict[str, np.ndarray]:
    with open(path) as f:
        header = f.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected monitor columns {header}")
        rows = [
            [float(v) for v in line.strip().split(",")] for line in f if line.strip()
        ]
    data = np.array(rows) if rows else np.empty((0, len(CSV_COLUMNS)))
    return {name: data[:, k] for k, name in enumerate(CSV_COLUMNS)}
