"""
Qubit plus N discrete bath modes in a truncated Fock space, no rotating-wave
approximation.

    H = omega_a |e><e| + sum_l omega_l a_l^+ a_l + sigma_x (x) sum_l eta_l (a_l + a_l^+)

Basis states are (s, occupied mode indices) with at most `max_quanta` bath
quanta. sigma_x flips s and adds or removes one quantum, so s + sum(n) has a
fixed parity; starting from |g, vac> the dynamics stays in the even sector.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import expm_multiply

from errors import DomainError
from master_equation import MeasurementSchedule
from spectrum import BathSpectrumSpec, DiscreteBathModel, DEFAULT_COVERAGE, discretize

logger = logging.getLogger(__name__)

# ---------------------------- Config ---------------------------------
MAX_QUANTA = 2
DENSE_LIMIT = 2500           # dense eigendecomposition up to this dimension
DETECTOR_STEPS = 32          # Strang steps across one finite-duration measurement
PROFILE_WIDTH = 8.0          # h(t) ~ sech^2((t - tau/2) / (tau / PROFILE_WIDTH))
SAMPLE_STEP = 0.05
MODE_SAMPLE_STEP = 1.0

GROUND, EXCITED = 0, 1


# ---------------------------- Basis ----------------------------------
class TruncatedBasis:
    """States |s, n> with sum(n) <= max_quanta, optionally one parity sector of s + sum(n)."""

    def __init__(self, n_modes: int, max_quanta: int = MAX_QUANTA, parity: Optional[int] = None):
        if n_modes < 1:
            raise DomainError(f"n_modes must be >= 1, got {n_modes}")
        if max_quanta < 1:
            raise DomainError(f"max_quanta must be >= 1, got {max_quanta}")
        if parity not in (None, 0, 1):
            raise DomainError(f"parity must be None, 0 or 1, got {parity}")
        self.n_modes = n_modes
        self.max_quanta = max_quanta
        self.parity = parity

        states: List[Tuple[int, Tuple[int, ...]]] = []
        for s in (GROUND, EXCITED):
            for q in range(max_quanta + 1):
                if parity is not None and (s + q) % 2 != parity:
                    continue
                states.extend((s, occ) for occ in combinations_with_replacement(range(n_modes), q))
        self.states = states
        self.index: Dict[Tuple[int, Tuple[int, ...]], int] = {st: i for i, st in enumerate(states)}
        self.spins = np.array([s for s, _ in states], dtype=float)
        self.quanta = np.array([len(occ) for _, occ in states], dtype=int)

        rows, cols, vals = [], [], []
        for i, (_, occ) in enumerate(states):
            for mode in set(occ):
                rows.append(i)
                cols.append(mode)
                vals.append(occ.count(mode))
        self.counts = sparse.csr_matrix((vals, (rows, cols)), shape=(len(states), n_modes), dtype=float)

    @property
    def dimension(self) -> int:
        return len(self.states)

    @staticmethod
    def full_dimension(n_modes: int, max_quanta: int = MAX_QUANTA) -> int:
        return 2 * sum(math.comb(n_modes + q - 1, q) for q in range(max_quanta + 1))

    def vacuum(self, spin: int) -> int:
        key = (spin, ())
        if key not in self.index:
            raise DomainError(f"|{'eg'[spin == GROUND]}, vac> is outside the parity-{self.parity} sector")
        return self.index[key]

    def partner_pairs(self) -> Tuple[np.ndarray, np.ndarray]:
        """Index pairs (|e, n>, |g, n>) present in the basis."""
        e_idx, g_idx = [], []
        for i, (s, occ) in enumerate(self.states):
            if s == EXCITED and (GROUND, occ) in self.index:
                e_idx.append(i)
                g_idx.append(self.index[(GROUND, occ)])
        return np.array(e_idx, dtype=int), np.array(g_idx, dtype=int)


@dataclass(frozen=True, eq=False)
class HamiltonianParts:
    h_s: sparse.csr_matrix
    h_b: sparse.csr_matrix
    h_sb: sparse.csr_matrix

    @property
    def total(self) -> sparse.csr_matrix:
        return (self.h_s + self.h_b + self.h_sb).tocsr()


def build_hamiltonian(model: DiscreteBathModel, basis: TruncatedBasis, omega_a: float = 1.0) -> HamiltonianParts:
    if basis.n_modes != model.n_modes:
        raise DomainError(f"basis has {basis.n_modes} modes, bath model {model.n_modes}")
    dim = basis.dimension
    h_s = sparse.diags(omega_a * basis.spins, format="csr")
    h_b = sparse.diags(basis.counts @ model.omegas, format="csr")

    rows, cols, vals = [], [], []
    for i, (s, occ) in enumerate(basis.states):
        if len(occ) >= basis.max_quanta:
            continue
        for mode in range(model.n_modes):
            j = basis.index.get((1 - s, tuple(sorted(occ + (mode,)))))
            if j is None:
                continue
            amp = model.etas[mode] * math.sqrt(occ.count(mode) + 1)
            rows += [i, j]
            cols += [j, i]
            vals += [amp, amp]
    h_sb = sparse.csr_matrix((vals, (rows, cols)), shape=(dim, dim), dtype=float)
    logger.debug(f"hamiltonian: dim={dim}, {h_sb.nnz} coupling elements")
    return HamiltonianParts(h_s=h_s, h_b=h_b, h_sb=h_sb)


# ---------------------------- State ----------------------------------
@dataclass(frozen=True, eq=False)
class TotalState:
    rho: np.ndarray
    basis: TruncatedBasis = field(repr=False)

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))[0])


@dataclass(frozen=True)
class Observables:
    rho_ee: float
    mode_occupations: np.ndarray
    h_s: float
    h_b: float
    h_sb: float
    h_tot: float


def measure_impulsive(state: TotalState) -> TotalState:
    """Erase every |e><g| block, keep the bath blocks inside each system sector."""
    spins = state.basis.spins
    keep = spins[:, None] == spins[None, :]
    return TotalState(np.where(keep, state.rho, 0.0), state.basis)


def system_coherence(state: TotalState) -> complex:
    """Tr_B <e|rho|g>."""
    e_idx, g_idx = state.basis.partner_pairs()
    if e_idx.size == 0:
        return 0j
    return complex(np.sum(state.rho[e_idx, g_idx]))


def purity(state: TotalState) -> float:
    return float(np.sum(np.abs(state.rho) ** 2))


# ---------------------------- Propagation ----------------------------
class Propagator:
    """exp(-iHt) by dense eigendecomposition up to DENSE_LIMIT, Krylov action above."""

    def __init__(self, hamiltonian: sparse.csr_matrix, dense_limit: int = DENSE_LIMIT):
        self.hamiltonian = hamiltonian
        self.dense = hamiltonian.shape[0] <= dense_limit
        if self.dense:
            self.energies, self.vectors = eigh(hamiltonian.toarray())
        else:
            self.energies = self.vectors = None
            logger.info(f"dimension {hamiltonian.shape[0]} above {dense_limit}: Krylov propagation")

    def to_eigen(self, rho: np.ndarray) -> np.ndarray:
        return self.vectors.T @ rho @ self.vectors

    def from_eigen(self, rho_tilde: np.ndarray) -> np.ndarray:
        return self.vectors @ rho_tilde @ self.vectors.T

    def phases(self, dt: float) -> np.ndarray:
        u = np.exp(-1j * self.energies * dt)
        return np.outer(u, u.conj())

    def unitary(self, dt: float) -> np.ndarray:
        """Dense exp(-iH dt) in the computational basis."""
        if not self.dense:
            raise DomainError("dense unitary requested on the Krylov path")
        return (self.vectors * np.exp(-1j * self.energies * dt)) @ self.vectors.T

    def conjugate(self, rho: np.ndarray, dt: float) -> np.ndarray:
        """U rho U^+ with U = exp(-iH dt)."""
        if dt == 0:
            return rho
        if self.dense:
            return self.from_eigen(self.phases(dt) * self.to_eigen(rho))
        left = expm_multiply(-1j * dt * self.hamiltonian, rho)
        return expm_multiply(-1j * dt * self.hamiltonian, left.conj().T).conj().T


def detector_profile(tau: float, n_steps: int = DETECTOR_STEPS) -> np.ndarray:
    """Midpoint samples of h(t) on [0, tau], scaled so sum(h) * (tau / n_steps) = -pi / 2."""
    if tau <= 0:
        raise DomainError(f"tau must be > 0, got {tau}")
    delta = tau / n_steps
    mid = (np.arange(n_steps) + 0.5) * delta
    shape = -1.0 / np.cosh((mid - tau / 2) / (tau / PROFILE_WIDTH)) ** 2
    return shape * (-math.pi / 2) / (np.sum(shape) * delta)


# ---------------------------- System ---------------------------------
@dataclass(frozen=True, eq=False)
class ExactTrace:
    times: np.ndarray
    rho_ee: np.ndarray
    h_s: np.ndarray
    h_b: np.ndarray
    h_sb: np.ndarray
    h_tot: np.ndarray
    coherence: np.ndarray
    mode_times: np.ndarray
    mode_occupations: np.ndarray
    omegas: np.ndarray
    events: np.ndarray

    COLUMNS = ("t [1/omega_a]", "rho_ee [1]", "H_S [omega_a]", "H_B [omega_a]", "H_SB [omega_a]",
               "H_tot [omega_a]", "abs_coherence [1]")

    def to_rows(self) -> np.ndarray:
        return np.column_stack([self.times, self.rho_ee, self.h_s, self.h_b, self.h_sb, self.h_tot,
                                self.coherence])

    def mode_rows(self) -> np.ndarray:
        """Long format (t, mode index, omega, occupation)."""
        n_t, n_m = self.mode_occupations.shape
        return np.column_stack([
            np.repeat(self.mode_times, n_m),
            np.tile(np.arange(n_m, dtype=float), n_t),
            np.tile(self.omegas, n_t),
            self.mode_occupations.ravel(),
        ])

    MODE_COLUMNS = ("t [1/omega_a]", "mode [index]", "omega [omega_a]", "occupation [1]")


class ExactBath:
    def __init__(self, model: DiscreteBathModel, max_quanta: int = MAX_QUANTA, parity: Optional[int] = 0,
                 dense_limit: int = DENSE_LIMIT):
        self.model = model
        self.basis = TruncatedBasis(model.n_modes, max_quanta, parity)
        self.parts = build_hamiltonian(model, self.basis, model.spec.omega_a)
        self.hamiltonian = self.parts.total
        self.propagator = Propagator(self.hamiltonian, dense_limit)
        self._detector_cache: Dict[float, np.ndarray] = {}
        self._eigen_ops: Optional[Dict[str, np.ndarray]] = None
        logger.info(
            f"exact bath: {model.n_modes} modes, max_quanta={max_quanta}, "
            f"{'parity ' + str(parity) if parity is not None else 'full'} basis, dim={self.basis.dimension}"
        )

    @classmethod
    def from_spec(cls, spec: BathSpectrumSpec, n_modes: int, coverage: float = DEFAULT_COVERAGE,
                  max_quanta: int = MAX_QUANTA, initial_rho_ee: float = 0.0,
                  parity_sector: bool = True) -> "ExactBath":
        parity = 0 if parity_sector and initial_rho_ee == 0 else None
        return cls(discretize(spec, n_modes, coverage), max_quanta, parity)

    # -- states ---------------------------------------------------------
    def product_state(self, rho_ee: float = 0.0) -> TotalState:
        if not 0 <= rho_ee <= 1:
            raise DomainError(f"rho_ee must lie in [0, 1], got {rho_ee}")
        rho = np.zeros((self.basis.dimension,) * 2, dtype=complex)
        rho[self.basis.vacuum(GROUND), self.basis.vacuum(GROUND)] = 1.0 - rho_ee
        if rho_ee > 0:
            rho[self.basis.vacuum(EXCITED), self.basis.vacuum(EXCITED)] = rho_ee
        return TotalState(rho, self.basis)

    # -- operations -----------------------------------------------------
    def evolve_unitary(self, state: TotalState, dt: float) -> TotalState:
        if dt < 0:
            raise DomainError(f"dt must be >= 0, got {dt}")
        return TotalState(self.propagator.conjugate(state.rho, dt), self.basis)

    def measure_impulsive(self, state: TotalState) -> TotalState:
        return measure_impulsive(state)

    def detector_branch(self, tau: float) -> np.ndarray:
        """Unitary of the detector branch that picks up the CNOT phase, computational basis."""
        key = round(tau, 15)
        if key not in self._detector_cache:
            h = detector_profile(tau)
            delta = tau / h.size
            excited = self.basis.spins
            if self.propagator.dense:
                full = self.propagator.unitary(delta)
                half = self.propagator.unitary(delta / 2)
                u = half.copy()
                for k, hk in enumerate(h):
                    u = np.exp(-2j * hk * delta * excited)[:, None] * u
                    u = (half if k == h.size - 1 else full) @ u
            else:
                u = None
            self._detector_cache[key] = u
        return self._detector_cache[key]

    def _branch_krylov(self, rho: np.ndarray, tau: float) -> np.ndarray:
        h = detector_profile(tau)
        delta = tau / h.size
        rho = self.propagator.conjugate(rho, delta / 2)
        for k, hk in enumerate(h):
            d = np.exp(-2j * hk * delta * self.basis.spins)
            rho = d[:, None] * rho * d.conj()[None, :]
            rho = self.propagator.conjugate(rho, delta / 2 if k == h.size - 1 else delta)
        return rho

    def measure_finite(self, state: TotalState, tau: float) -> TotalState:
        """Detector attached in |0>, driven over [0, tau], traced out: two-branch average."""
        if tau <= 0:
            raise DomainError(f"tau must be > 0, got {tau}")
        free = self.propagator.conjugate(state.rho, tau)
        u = self.detector_branch(tau)
        if u is None:
            kicked = self._branch_krylov(state.rho, tau)
        else:
            kicked = u @ state.rho @ u.conj().T
        return TotalState(0.5 * (free + kicked), self.basis)

    def observables(self, state: TotalState) -> Observables:
        rho = state.rho
        diag = np.real(np.diag(rho))
        h_s = float(diag @ (self.model.spec.omega_a * self.basis.spins))
        h_b = float(diag @ self.parts.h_b.diagonal())
        h_sb = float(np.real(self.parts.h_sb.multiply(rho).sum()))
        return Observables(
            rho_ee=float(diag @ self.basis.spins),
            mode_occupations=self.basis.counts.T @ diag,
            h_s=h_s,
            h_b=h_b,
            h_sb=h_sb,
            h_tot=h_s + h_b + h_sb,
        )

    # -- eigenbasis fast path ------------------------------------------
    def _operators(self) -> Dict[str, np.ndarray]:
        if self._eigen_ops is None:
            v = self.propagator.vectors
            ops = {
                "p_e": (v.T * self.basis.spins) @ v,
                "h_b": (v.T * self.parts.h_b.diagonal()) @ v,
                "h_sb": v.T @ (self.parts.h_sb @ v),
            }
            e_idx, g_idx = self.basis.partner_pairs()
            if e_idx.size:
                # Tr(rho C) with C = sum_n |g,n><e,n|
                ops["coherence"] = v[g_idx].T @ v[e_idx]
            self._eigen_ops = ops
        return self._eigen_ops

    def _expect_eigen(self, name: str, rho_tilde: np.ndarray) -> complex:
        op = self._operators()[name]
        return np.sum(op.T * rho_tilde)

    def populations_after(self, state: TotalState, dts: np.ndarray) -> np.ndarray:
        """rho_ee(t0 + dt) under free evolution, for each dt."""
        dts = np.asarray(dts, dtype=float)
        if self.propagator.dense:
            rho_tilde = self.propagator.to_eigen(state.rho)
            weights = self._operators()["p_e"].T * rho_tilde
            u = np.exp(-1j * np.outer(dts, self.propagator.energies))
            return np.real(np.sum((u @ weights) * u.conj(), axis=1))
        return np.array([self.observables(self.evolve_unitary(state, dt)).rho_ee for dt in dts])

    def simulate(self, schedule: MeasurementSchedule, horizon: float, sample_step: float = SAMPLE_STEP,
                 mode_sample_step: float = MODE_SAMPLE_STEP, initial_rho_ee: float = 0.0,
                 finite: bool = False) -> ExactTrace:
        """Product state at t = 0, free evolution, measurements at the absolute schedule times."""
        if horizon <= 0:
            raise DomainError(f"horizon must be > 0, got {horizon}")
        schedule.check_within(horizon)
        if not self.propagator.dense:
            return self._simulate_krylov(schedule, horizon, sample_step, mode_sample_step, initial_rho_ee, finite)

        prop = self.propagator
        energies = prop.energies
        state = self.product_state(initial_rho_ee)
        rho_t = prop.to_eigen(state.rho)
        ops = self._operators()

        samples = np.unique(np.concatenate((np.arange(0.0, horizon, sample_step), [horizon])))
        mode_samples = set(np.round(np.arange(0.0, horizon + 1e-12, mode_sample_step), 12).tolist())
        plan = self._plan(schedule, finite)

        rec = {k: [] for k in ("t", "rho_ee", "h_s", "h_b", "h_sb", "h_tot", "coh")}
        mode_t, mode_n = [], []
        clock = 0.0
        ev = 0
        for t in samples:
            while ev < len(plan) and plan[ev][0] <= t:
                start, tau = plan[ev]
                rho_t = prop.phases(start - clock) * rho_t
                clock = start
                comp = prop.from_eigen(rho_t)
                if tau > 0:
                    comp = self.measure_finite(TotalState(comp, self.basis), tau).rho
                    clock = start + tau
                else:
                    comp = measure_impulsive(TotalState(comp, self.basis)).rho
                rho_t = prop.to_eigen(comp)
                ev += 1
            if t < clock:
                continue  # inside a finite-duration measurement
            rho_t = prop.phases(t - clock) * rho_t
            clock = t

            rho_ee = float(np.real(self._expect_eigen("p_e", rho_t)))
            h_b = float(np.real(self._expect_eigen("h_b", rho_t)))
            h_sb = float(np.real(self._expect_eigen("h_sb", rho_t)))
            h_tot = float(np.real(np.diag(rho_t)) @ energies)
            rec["t"].append(t)
            rec["rho_ee"].append(rho_ee)
            rec["h_s"].append(self.model.spec.omega_a * rho_ee)
            rec["h_b"].append(h_b)
            rec["h_sb"].append(h_sb)
            rec["h_tot"].append(h_tot)
            rec["coh"].append(abs(self._expect_eigen("coherence", rho_t)) if "coherence" in ops else 0.0)
            if round(float(t), 12) in mode_samples:
                diag = np.sum((prop.vectors @ rho_t.real) * prop.vectors, axis=1)
                mode_t.append(t)
                mode_n.append(self.basis.counts.T @ diag)

        return self._trace(rec, mode_t, mode_n, plan)

    def _plan(self, schedule: MeasurementSchedule, finite: bool) -> List[Tuple[float, float]]:
        plan = []
        for e in schedule:
            if finite and not e.impulsive:
                plan.append((e.time, e.duration))
            else:
                plan.append((e.midpoint, 0.0))
        return plan

    def _trace(self, rec, mode_t, mode_n, plan) -> ExactTrace:
        n_modes = self.model.n_modes
        return ExactTrace(
            times=np.asarray(rec["t"], dtype=float),
            rho_ee=np.asarray(rec["rho_ee"]),
            h_s=np.asarray(rec["h_s"]),
            h_b=np.asarray(rec["h_b"]),
            h_sb=np.asarray(rec["h_sb"]),
            h_tot=np.asarray(rec["h_tot"]),
            coherence=np.asarray(rec["coh"], dtype=float),
            mode_times=np.asarray(mode_t, dtype=float),
            mode_occupations=np.asarray(mode_n, dtype=float).reshape(len(mode_t), n_modes),
            omegas=self.model.omegas,
            events=np.array([p[0] for p in plan], dtype=float),
        )

    def _simulate_krylov(self, schedule, horizon, sample_step, mode_sample_step, initial_rho_ee, finite):
        state = self.product_state(initial_rho_ee)
        samples = np.unique(np.concatenate((np.arange(0.0, horizon, sample_step), [horizon])))
        mode_samples = set(np.round(np.arange(0.0, horizon + 1e-12, mode_sample_step), 12).tolist())
        plan = self._plan(schedule, finite)
        rec = {k: [] for k in ("t", "rho_ee", "h_s", "h_b", "h_sb", "h_tot", "coh")}
        mode_t, mode_n = [], []
        clock = 0.0
        ev = 0
        for t in samples:
            while ev < len(plan) and plan[ev][0] <= t:
                start, tau = plan[ev]
                state = self.evolve_unitary(state, start - clock)
                clock = start
                if tau > 0:
                    state = self.measure_finite(state, tau)
                    clock = start + tau
                else:
                    state = measure_impulsive(state)
                ev += 1
            if t < clock:
                continue
            state = self.evolve_unitary(state, t - clock)
            clock = t
            obs = self.observables(state)
            rec["t"].append(t)
            rec["rho_ee"].append(obs.rho_ee)
            rec["h_s"].append(obs.h_s)
            rec["h_b"].append(obs.h_b)
            rec["h_sb"].append(obs.h_sb)
            rec["h_tot"].append(obs.h_tot)
            rec["coh"].append(abs(system_coherence(state)))
            if round(float(t), 12) in mode_samples:
                mode_t.append(t)
                mode_n.append(obs.mode_occupations)
        return self._trace(rec, mode_t, mode_n, plan)


def require_zero_temperature(alpha_bath: float) -> None:
    if not math.isinf(alpha_bath):
        raise DomainError("the exact engine starts from the bath vacuum and needs alpha_bath = inf")
