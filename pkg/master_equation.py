"""
Second-order population rate equations for the measured qubit.

    d rho_ee/dt = R_g(t') rho_gg - R_e(t') rho_ee

t' is the time since the last non-selective measurement. A measurement leaves
the (already diagonal) populations untouched and restarts t' at zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from errors import DomainError, IntegrationError, ScheduleError
from rates import RateTable, build_rate_table, default_markov_after
from spectrum import BathSpectrumSpec, InverseTemperature

logger = logging.getLogger(__name__)

# ---------------------------- Config ---------------------------------
ODE_METHOD = "DOP853"
ODE_RTOL = 1e-9
ODE_ATOL = 1e-12
SAMPLE_STEP = 0.05
ZENO_WINDOW = 0.1            # t' below this counts as the Zeno regime [1/omega_a]
MARKOV_WINDOW_TC = 5.0       # t' beyond this many t_c counts as Markovian
RANGE_SLACK = 1e-9

REGIMES = ("zeno", "oze", "markov")


# ---------------------------- Populations ----------------------------
@dataclass(frozen=True)
class QubitPopulations:
    rho_ee: float

    def __post_init__(self):
        if not (-1e-12 <= self.rho_ee <= 1 + 1e-12):
            raise DomainError(f"rho_ee must lie in [0, 1], got {self.rho_ee}")

    @property
    def rho_gg(self) -> float:
        return 1.0 - self.rho_ee

    @property
    def polarization(self) -> float:
        """rho_ee - rho_gg."""
        return 2.0 * self.rho_ee - 1.0


def initial_from_temperature(alpha_s: float) -> QubitPopulations:
    if math.isnan(alpha_s) or alpha_s < 0:
        raise DomainError(f"alpha_s must be in [0, inf], got {alpha_s}")
    return QubitPopulations((1.0 + math.tanh(-alpha_s / 2.0)) / 2.0)


def gibbs_populations(beta: InverseTemperature) -> QubitPopulations:
    return initial_from_temperature(beta.alpha)


# ---------------------------- Schedules ------------------------------
@dataclass(frozen=True)
class MeasurementEvent:
    time: float
    duration: float = 0.0

    @property
    def midpoint(self) -> float:
        return self.time + self.duration / 2.0

    @property
    def impulsive(self) -> bool:
        return self.duration == 0.0


@dataclass(frozen=True)
class MeasurementSchedule:
    events: Tuple[MeasurementEvent, ...] = ()

    def __post_init__(self):
        events = tuple(e if isinstance(e, MeasurementEvent) else MeasurementEvent(*e) for e in self.events)
        object.__setattr__(self, "events", events)
        for e in events:
            if e.time < 0 or e.duration < 0 or not math.isfinite(e.time):
                raise ScheduleError(f"invalid event (t={e.time}, tau={e.duration})")
        for prev, nxt in zip(events, events[1:]):
            if nxt.time <= prev.time:
                raise ScheduleError(f"event times must increase strictly: {prev.time} then {nxt.time}")
            if prev.duration >= nxt.time - prev.time:
                raise ScheduleError(
                    f"event at t={prev.time} lasts {prev.duration}, longer than the gap to t={nxt.time}"
                )

    @classmethod
    def uniform(cls, first: float, interval: float, count: int, duration: float = 0.0) -> "MeasurementSchedule":
        if count < 0:
            raise ScheduleError(f"count must be >= 0, got {count}")
        if count > 1 and interval <= 0:
            raise ScheduleError(f"interval must be > 0, got {interval}")
        return cls(tuple(MeasurementEvent(first + k * interval, duration) for k in range(count)))

    @classmethod
    def from_intervals(cls, intervals: Iterable[float], start: float = 0.0,
                       duration: float = 0.0) -> "MeasurementSchedule":
        """Events at start + cumulative sums of `intervals`."""
        times = start + np.cumsum(np.asarray(list(intervals), dtype=float))
        return cls(tuple(MeasurementEvent(float(t), duration) for t in times))

    def shifted(self, offset: float) -> "MeasurementSchedule":
        return MeasurementSchedule(tuple(MeasurementEvent(e.time + offset, e.duration) for e in self.events))

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[MeasurementEvent]:
        return iter(self.events)

    @property
    def times(self) -> np.ndarray:
        return np.array([e.time for e in self.events], dtype=float)

    def intervals(self, start: float = 0.0) -> np.ndarray:
        return np.diff(np.concatenate(([start], self.times)))

    def check_within(self, horizon: float) -> None:
        for e in self.events:
            if e.time + e.duration > horizon:
                raise ScheduleError(f"event at t={e.time} (tau={e.duration}) ends after the horizon {horizon}")

    def to_dict(self) -> dict:
        return {"events": [{"t": e.time, "tau": e.duration} for e in self.events]}


# ---------------------------- Trace ----------------------------------
@dataclass(frozen=True, eq=False)
class SimulationTrace:
    times: np.ndarray
    rho_ee: np.ndarray
    rho_ee_dot: np.ndarray
    since_reset: np.ndarray
    events: np.ndarray
    regime: Tuple[str, ...] = field(default=())

    @property
    def rho_gg(self) -> np.ndarray:
        return 1.0 - self.rho_ee

    def value_at(self, t) -> np.ndarray:
        return np.interp(t, self.times, self.rho_ee)

    def regime_codes(self) -> np.ndarray:
        return np.array([REGIMES.index(r) for r in self.regime], dtype=float)

    def to_rows(self) -> np.ndarray:
        return np.column_stack([self.times, self.rho_ee, self.rho_ee_dot, self.since_reset, self.regime_codes()])

    COLUMNS = ("t [1/omega_a]", "rho_ee [1]", "rho_ee_dot [omega_a]", "t_since_reset [1/omega_a]",
               "regime [0=zeno,1=oze,2=markov]")


def classify_regime(since_reset: np.ndarray, t_c: float) -> Tuple[str, ...]:
    out: List[str] = []
    for s in np.asarray(since_reset, dtype=float):
        if s < ZENO_WINDOW:
            out.append("zeno")
        elif s >= MARKOV_WINDOW_TC * t_c:
            out.append("markov")
        else:
            out.append("oze")
    return tuple(out)


# ---------------------------- Propagation ----------------------------
def held_at_boundary(rho_ee, rho_dot):
    """Zero the flow where it would push rho_ee out of [0, 1].

    Negative short-time rates can drive the bare rate equation below rho_ee = 0;
    the populations stop at the boundary instead.
    """
    rho_ee = np.asarray(rho_ee, dtype=float)
    rho_dot = np.asarray(rho_dot, dtype=float)
    outward = ((rho_ee <= 0.0) & (rho_dot < 0.0)) | ((rho_ee >= 1.0) & (rho_dot > 0.0))
    return np.where(outward, 0.0, rho_dot)


@dataclass(frozen=True, eq=False)
class AffineStepMap:
    """rho_ee(dt) = a(dt) rho_ee(0) + b(dt) for one inter-measurement interval."""

    solution: object
    t_max: float

    def __call__(self, dt):
        d = np.asarray(dt, dtype=float)
        if np.any(d < 0) or np.any(d > self.t_max * (1 + 1e-12)):
            raise DomainError(f"step map covers [0, {self.t_max}], got {dt}")
        ab = self.solution.sol(np.clip(d, 0.0, self.t_max))
        return ab[0], ab[1]

    def apply(self, rho_ee: float, dt):
        a, b = self(dt)
        return a * rho_ee + b


class MEPropagator:
    """Rate interpolator plus single-interval integration for one bath."""

    def __init__(self, spec: BathSpectrumSpec, beta: InverseTemperature, t_max: float,
                 markov_after: Optional[float] = None, table: Optional[RateTable] = None):
        self.spec = spec
        self.beta = beta
        self.markov_after = default_markov_after(spec) if markov_after is None else markov_after
        self.table = table if table is not None else build_rate_table(spec, beta, max(t_max, 1e-3), self.markov_after)
        self._rates = self.table.interpolator()

    def rates(self, since_reset: float) -> Tuple[float, float]:
        return self._rates(since_reset)

    def _rhs(self, clock_offset: float):
        def rhs(s, y):
            r_e, r_g = self._rates(s + clock_offset)
            return [float(held_at_boundary(y[0], r_g * (1.0 - y[0]) - r_e * y[0]))]
        return rhs

    def derivative(self, rho_ee: np.ndarray, since_reset: np.ndarray) -> np.ndarray:
        r_e, r_g = self._rates.rates(since_reset)
        return held_at_boundary(rho_ee, r_g * (1.0 - rho_ee) - r_e * rho_ee)

    def integrate(self, rho_ee: float, duration: float, t_eval: np.ndarray,
                  clock_offset: float = 0.0) -> np.ndarray:
        """rho_ee at local times t_eval in [0, duration], clock starting at clock_offset."""
        if duration <= 0:
            return np.full(np.size(t_eval), rho_ee)
        sol = solve_ivp(
            self._rhs(clock_offset), (0.0, duration), [rho_ee], method=ODE_METHOD,
            t_eval=t_eval, rtol=ODE_RTOL, atol=ODE_ATOL,
        )
        if not sol.success:
            raise IntegrationError(f"population ODE failed: {sol.message}")
        return sol.y[0]

    def rho_after(self, rho_ee: float, dt: float) -> float:
        if dt < 0:
            raise DomainError(f"dt must be >= 0, got {dt}")
        return float(self.integrate(rho_ee, dt, np.array([dt]))[-1]) if dt > 0 else rho_ee

    def step_map(self, dt_max: float) -> AffineStepMap:
        if dt_max <= 0:
            raise DomainError(f"dt_max must be > 0, got {dt_max}")

        def rhs(s, y):
            r_e, r_g = self._rates(s)
            total = r_e + r_g
            return [-total * y[0], r_g - total * y[1]]

        sol = solve_ivp(rhs, (0.0, dt_max), [1.0, 0.0], method=ODE_METHOD, dense_output=True,
                        rtol=ODE_RTOL, atol=ODE_ATOL)
        if not sol.success:
            raise IntegrationError(f"step-map ODE failed: {sol.message}")
        return AffineStepMap(solution=sol, t_max=dt_max)


def sample_step_for(spec: BathSpectrumSpec, requested: float = SAMPLE_STEP) -> float:
    """Resolve the omega0 + omega_a beat with at least eight samples per period."""
    return min(requested, math.pi / (4.0 * (spec.omega0 + spec.omega_a)))


def effective_event_times(schedule: MeasurementSchedule) -> np.ndarray:
    finite = [e for e in schedule if not e.impulsive]
    if finite:
        logger.warning(
            f"⚠️ {len(finite)} finite-duration event(s) treated as impulsive at their midpoints"
        )
    return np.array([e.midpoint for e in schedule], dtype=float)


def evolve(
    initial: QubitPopulations,
    schedule: MeasurementSchedule,
    horizon: float,
    spec: BathSpectrumSpec,
    beta_bath: InverseTemperature,
    sample_step: float = SAMPLE_STEP,
    rethermalize: bool = True,
    markov_after: Optional[float] = None,
    propagator: Optional[MEPropagator] = None,
) -> SimulationTrace:
    if horizon <= 0:
        raise DomainError(f"horizon must be > 0, got {horizon}")
    schedule.check_within(horizon)
    events = effective_event_times(schedule)
    resets = events if rethermalize else np.empty(0)
    edges = np.unique(np.concatenate(([0.0], resets, [horizon])))

    if propagator is None:
        longest = float(np.max(np.diff(edges)))
        propagator = MEPropagator(spec, beta_bath, longest, markov_after)

    step = sample_step_for(spec, sample_step)
    grid = np.unique(np.concatenate((np.arange(0.0, horizon, step), [horizon], events)))

    times: List[np.ndarray] = []
    values: List[np.ndarray] = []
    clocks: List[np.ndarray] = []
    rho = initial.rho_ee
    low, high = rho, rho
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        last = k == edges.size - 2
        pick = (grid >= a) & ((grid <= b) if last else (grid < b))
        local = grid[pick] - a
        full = np.concatenate((local, [b - a])) if not last else local
        traj = propagator.integrate(rho, b - a, full)
        low, high = min(low, float(np.min(traj))), max(high, float(np.max(traj)))
        # solver overshoot past the held boundary
        traj = np.clip(traj, 0.0, 1.0)
        rho = float(traj[-1])
        keep = local.size
        times.append(grid[pick])
        values.append(traj[:keep])
        clocks.append(local)

    if low < -RANGE_SLACK or high > 1 + RANGE_SLACK:
        logger.warning(
            f"⚠️ rho_ee overshot [0, 1] (raw range [{low:.4g}, {high:.4g}]) and was clipped; "
            f"coupling too strong for the second-order rates"
        )

    t = np.concatenate(times)
    rho_ee = np.concatenate(values)
    since_reset = np.concatenate(clocks)
    rho_dot = propagator.derivative(rho_ee, since_reset)

    return SimulationTrace(
        times=t,
        rho_ee=rho_ee,
        rho_ee_dot=rho_dot,
        since_reset=since_reset,
        events=events,
        regime=classify_regime(since_reset, spec.t_c),
    )
