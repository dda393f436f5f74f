"""
Greedy measurement scheduling: after every measurement, place the next one
at the deepest trough (cool) or highest peak (heat) of rho_ee reachable
inside the interval window.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from errors import DomainError
from exact_bath import ExactBath, ExactTrace, require_zero_temperature
from master_equation import (
    MEPropagator,
    MeasurementSchedule,
    QubitPopulations,
    SimulationTrace,
    evolve,
    gibbs_populations,
    initial_from_temperature,
)
from spectrum import DEFAULT_COVERAGE, BathSpectrumSpec, InverseTemperature

logger = logging.getLogger(__name__)

# ---------------------------- Config ---------------------------------
GRID_POINTS = 400
GOLDEN_XTOL = 1e-4
DIRECTIONS = ("cool", "heat")
ENGINES = ("me", "exact")


@dataclass(frozen=True)
class ScheduleObjective:
    direction: str
    count: int
    window: Tuple[float, float]
    engine: str = "me"
    grid_points: int = GRID_POINTS
    n_modes: int = 40
    coverage: float = DEFAULT_COVERAGE
    max_quanta: int = 2

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise DomainError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if self.engine not in ENGINES:
            raise DomainError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        # count = 0 is the empty-schedule guard
        if self.count < 0:
            raise DomainError(f"count must be >= 0, got {self.count}")
        lo, hi = self.window
        if not 0 < lo < hi:
            raise DomainError(f"window needs 0 < dt_min < dt_max, got {self.window}")
        if self.grid_points < 3:
            raise DomainError(f"grid_points must be >= 3, got {self.grid_points}")

    def with_direction(self, direction: str) -> "ScheduleObjective":
        return replace(self, direction=direction)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.window[0], self.window[1], self.grid_points)

    @property
    def horizon(self) -> float:
        return self.count * self.window[1]

    def better(self, values: np.ndarray) -> int:
        """Index of the best value; ties go to the earliest."""
        return int(np.argmin(values) if self.direction == "cool" else np.argmax(values))

    def describe(self, t_c: float) -> str:
        return (
            f"extremal rho_ee deviation from Gibbs over a greedy run, K={self.count}, "
            f"window [{self.window[0]:g}, {self.window[1]:g}]/omega_a, horizon {self.horizon / t_c:g} t_c"
        )


@dataclass(frozen=True, eq=False)
class ScheduleResult:
    objective: ScheduleObjective
    schedule: MeasurementSchedule
    trace: Union[SimulationTrace, ExactTrace]
    event_rho_ee: np.ndarray
    reference_rho_ee: float
    initial_rho_ee: float

    @property
    def final_rho_ee(self) -> float:
        return float(self.event_rho_ee[-1]) if self.event_rho_ee.size else self.initial_rho_ee

    @property
    def extremal_rho_ee(self) -> float:
        if not self.event_rho_ee.size:
            return self.initial_rho_ee
        pick = np.min if self.objective.direction == "cool" else np.max
        return float(pick(self.event_rho_ee))

    @property
    def max_heat(self) -> float:
        if not self.event_rho_ee.size:
            return 0.0
        return float(np.max(self.event_rho_ee) - self.reference_rho_ee)

    @property
    def max_cool(self) -> float:
        if not self.event_rho_ee.size:
            return 0.0
        return float(self.reference_rho_ee - np.min(self.event_rho_ee))

    @property
    def intervals(self) -> np.ndarray:
        return self.schedule.intervals()

    def to_dict(self) -> dict:
        return {
            "direction": self.objective.direction,
            "engine": self.objective.engine,
            "count": self.objective.count,
            "window_over_inv_omega_a": list(self.objective.window),
            "intervals_over_inv_omega_a": self.intervals.tolist(),
            **self.schedule.to_dict(),
            "event_rho_ee": self.event_rho_ee.tolist(),
            "initial_rho_ee": self.initial_rho_ee,
            "final_rho_ee": self.final_rho_ee,
            "extremal_rho_ee": self.extremal_rho_ee,
            "gibbs_rho_ee": self.reference_rho_ee,
        }


# ---------------------------- Greedy step ----------------------------
def _refine(objective: ScheduleObjective, curve: Callable[[float], float], grid: np.ndarray,
            values: np.ndarray) -> Tuple[float, float]:
    """Grid optimum, polished by golden section when it is strictly bracketed."""
    k = objective.better(values)
    best_x, best_v = float(grid[k]), float(values[k])
    if 0 < k < grid.size - 1:
        sign = 1.0 if objective.direction == "cool" else -1.0
        if sign * values[k] < sign * values[k - 1] and sign * values[k] < sign * values[k + 1]:
            res = minimize_scalar(
                lambda x: sign * curve(x),
                bracket=(grid[k - 1], grid[k], grid[k + 1]),
                method="golden",
                tol=GOLDEN_XTOL / (2.0 * best_x),
            )
            x = float(res.x)
            if grid[k - 1] <= x <= grid[k + 1] and sign * res.fun < sign * best_v:
                best_x, best_v = x, sign * float(res.fun)
    return best_x, best_v


def _greedy_me(objective, initial, spec, beta_bath) -> ScheduleResult:
    propagator = MEPropagator(spec, beta_bath, objective.window[1])
    step = propagator.step_map(objective.window[1])
    grid = objective.grid
    a, b = step(grid)

    rho = initial.rho_ee
    intervals: List[float] = []
    values: List[float] = []
    for _ in range(objective.count):
        curve = lambda dt, r=rho: float(step.apply(r, dt))
        dt, rho = _refine(objective, curve, grid, a * rho + b)
        intervals.append(dt)
        values.append(rho)

    schedule = MeasurementSchedule.from_intervals(intervals)
    horizon = float(schedule.times[-1]) if intervals else objective.window[1]
    trace = evolve(initial, schedule, horizon, spec, beta_bath, propagator=propagator)
    return ScheduleResult(
        objective=objective,
        schedule=schedule,
        trace=trace,
        event_rho_ee=np.asarray(values),
        reference_rho_ee=gibbs_populations(beta_bath).rho_ee,
        initial_rho_ee=initial.rho_ee,
    )


def _greedy_exact(objective, initial, spec, beta_bath) -> ScheduleResult:
    require_zero_temperature(beta_bath.alpha)
    bath = ExactBath.from_spec(spec, objective.n_modes, objective.coverage, objective.max_quanta,
                               initial_rho_ee=initial.rho_ee)
    state = bath.product_state(initial.rho_ee)
    grid = objective.grid

    intervals: List[float] = []
    values: List[float] = []
    for _ in range(objective.count):
        curve = lambda dt, s=state: float(bath.populations_after(s, [dt])[0])
        dt, rho = _refine(objective, curve, grid, bath.populations_after(state, grid))
        state = bath.measure_impulsive(bath.evolve_unitary(state, dt))
        intervals.append(dt)
        values.append(rho)

    schedule = MeasurementSchedule.from_intervals(intervals)
    horizon = float(schedule.times[-1]) if intervals else objective.window[1]
    trace = bath.simulate(schedule, horizon, initial_rho_ee=initial.rho_ee)
    return ScheduleResult(
        objective=objective,
        schedule=schedule,
        trace=trace,
        event_rho_ee=np.asarray(values),
        reference_rho_ee=gibbs_populations(beta_bath).rho_ee,
        initial_rho_ee=initial.rho_ee,
    )


def greedy_schedule(objective: ScheduleObjective, initial: QubitPopulations, spec: BathSpectrumSpec,
                    beta_bath: InverseTemperature) -> ScheduleResult:
    run = _greedy_me if objective.engine == "me" else _greedy_exact
    result = run(objective, initial, spec, beta_bath)
    logger.info(
        f"greedy {objective.direction} ({objective.engine}): {objective.count} events, "
        f"final rho_ee={result.final_rho_ee:.6g}, Gibbs {result.reference_rho_ee:.6g}"
    )
    return result


def uniform_baseline(objective: ScheduleObjective, initial: QubitPopulations, spec: BathSpectrumSpec,
                     beta: InverseTemperature) -> Tuple[float, float]:
    """Best (interval, final rho_ee) over uniform K-event schedules on the window grid (ME engine)."""
    step = MEPropagator(spec, beta, objective.window[1]).step_map(objective.window[1])
    grid = objective.grid
    a, b = step(grid)
    rho = np.full(grid.size, initial.rho_ee)
    for _ in range(objective.count):
        rho = a * rho + b
    k = objective.better(rho)
    return float(grid[k]), float(rho[k])


# ---------------------------- Sweep ----------------------------------
@dataclass(frozen=True, eq=False)
class SweepTable:
    alphas: np.ndarray
    max_heat: np.ndarray
    max_cool: np.ndarray
    metadata: Dict[str, str] = field(default_factory=dict)

    COLUMNS = ("alpha [1]", "max_heat [1]", "max_cool [1]")

    def to_rows(self) -> np.ndarray:
        return np.column_stack([self.alphas, self.max_heat, self.max_cool])

    @property
    def critical_alpha(self) -> Optional[float]:
        """alpha where max cooling first changes sign, linearly interpolated."""
        mc = self.max_cool
        for k in range(mc.size - 1):
            if mc[k] == 0:
                return float(self.alphas[k])
            if mc[k] * mc[k + 1] < 0:
                a0, a1 = self.alphas[k], self.alphas[k + 1]
                return float(a0 + (a1 - a0) * mc[k] / (mc[k] - mc[k + 1]))
        return None


def sweep_threads(threads: Optional[int] = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.getenv("QZT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def temperature_sweep(objective: ScheduleObjective, alphas: Sequence[float], spec: BathSpectrumSpec,
                      threads: Optional[int] = None) -> SweepTable:
    """System and bath share alpha; one cooling and one heating greedy run per alpha."""
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas <= 0):
        raise DomainError("sweep temperatures need alpha > 0")

    def one(alpha: float) -> Tuple[float, float]:
        beta = InverseTemperature(alpha)
        initial = initial_from_temperature(alpha)
        heat = greedy_schedule(objective.with_direction("heat"), initial, spec, beta)
        cool = greedy_schedule(objective.with_direction("cool"), initial, spec, beta)
        return heat.max_heat, cool.max_cool

    workers = sweep_threads(threads)
    logger.info(f"temperature sweep over {alphas.size} alphas on {workers} thread(s)")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(one, alphas.tolist()))

    table = SweepTable(
        alphas=alphas,
        max_heat=np.array([r[0] for r in rows]),
        max_cool=np.array([r[1] for r in rows]),
        metadata={"definition": objective.describe(spec.t_c)},
    )
    crit = table.critical_alpha
    if crit is not None and not math.isnan(crit):
        logger.info(f"✅ critical alpha for oscillatory cooling ~ {crit:.4g}")
    else:
        logger.info("no sign change of max cooling in the scanned alphas")
    return table
