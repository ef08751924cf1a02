#  Copyright 2024 The Fiberqutrit Team. All rights reserved.
#
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License.
"""
The two-step entangling protocol: step 1 maps |0>_A|g>_B to -|R>|R> and |1>_A|g>_B to -|L>|L> through the fiber,
step 2 flips the sign of |g>_A. Includes the parameter sweep and the CSV bundle behind the population and fidelity
figures.
"""

import itertools
import os
import time
from dataclasses import asdict, dataclass, field, replace
from functools import partial
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from tqdm.auto import tqdm

from optimum.utils import logging

from .dynamics import (
    CSV_FLOAT_FORMAT,
    IntegratorConfig,
    Trajectory,
    fidelity,
    integrate_lindblad,
    integrate_schrodinger,
)
from .hilbert import Basis, enumerate_basis
from .invariant import STEP2_MODES, PulseDesign, PulseSet, build_pulse_set
from .model import (
    CollapseOperator,
    SystemParams,
    TimeDependentHamiltonian,
    build_collapse_operators,
    build_H1,
    build_H2,
)
from .zeno import (
    BranchSubspace,
    ZenoDecomposition,
    branch_subspace,
    build_effective_model,
    zeno_decompose,
    zeno_leakage,
)


logger = logging.get_logger(__name__)

INITIAL_STATES = ("superposition", "branch_R", "branch_L", "ground")
BRANCH_LABELS = ("RR", "LL", "gg")


@dataclass(frozen=True)
class ProtocolSpec:
    """
    Everything a protocol run depends on.

    Args:
        params: Physical constants.
        design: Step-1 pulse design.
        integrator: Step and sampling settings, shared by both steps.
        initial_state: One of "superposition" ((|0> + |1> + |g>)_A |g>_B / sqrt(3)), "branch_R" (|0>_A|g>_B),
            "branch_L" (|1>_A|g>_B) or "ground" (|g>_A|g>_B).
        step2_duration: Duration of step 2, 2 t_f by default.
        step2_mode: "literal" or "rescaled" step-2 schedules.
        open_system: Integrate the master equation with the decay rates of `params`. When False the rates are ignored.
    """

    params: SystemParams
    design: PulseDesign
    integrator: IntegratorConfig
    initial_state: str = "superposition"
    step2_duration: Optional[float] = None
    step2_mode: str = "literal"
    open_system: bool = False

    def __post_init__(self):
        if self.initial_state not in INITIAL_STATES:
            raise ValueError(f"initial_state must be one of {', '.join(INITIAL_STATES)}, got {self.initial_state!r}")
        if self.step2_mode not in STEP2_MODES:
            raise ValueError(f"step2_mode must be one of {', '.join(STEP2_MODES)}, got {self.step2_mode!r}")
        if self.step2_duration is None:
            object.__setattr__(self, "step2_duration", 2 * self.design.t_f)
        elif self.step2_duration <= 0:
            raise ValueError(f"step2_duration must be positive, got {self.step2_duration}")

    @classmethod
    def default(cls, **kwargs) -> "ProtocolSpec":
        params = kwargs.pop("params", SystemParams())
        design = kwargs.pop("design", PulseDesign.from_params(params))
        integrator = kwargs.pop("integrator", IntegratorConfig.for_duration(params.t_f))
        return cls(params=params, design=design, integrator=integrator, **kwargs)

    def with_params(self, **changes) -> "ProtocolSpec":
        """
        Copy with some physical constants replaced, keeping the pulse design in sync with t_f, epsilon and the
        winding number. A new winding number without an explicit epsilon picks epsilon again.
        """
        if "winding_number" in changes and "epsilon" not in changes:
            changes["epsilon"] = None
        params = replace(self.params, **changes)
        design = replace(
            self.design,
            epsilon=params.epsilon,
            t_f=params.t_f,
            winding_number=params.winding_number,
            duration=None,
        )
        return replace(self, params=params, design=design)


@dataclass(frozen=True)
class ProtocolSystem:
    """Operators and reference states shared by the runs of one spec."""

    spec: ProtocolSpec
    basis: Basis
    pulses: PulseSet
    h1: TimeDependentHamiltonian
    h2: TimeDependentHamiltonian
    collapse_ops: Tuple[CollapseOperator, ...]
    subspaces: Dict[str, BranchSubspace]
    decompositions: Dict[str, ZenoDecomposition]

    @property
    def active_collapse_ops(self) -> Tuple[CollapseOperator, ...]:
        return self.collapse_ops if self.spec.open_system else ()

    def ket(self, atom_a: str, atom_b: str) -> np.ndarray:
        return self.basis.ket(atom_a, atom_b)

    def initial_state(self) -> np.ndarray:
        selector = self.spec.initial_state
        if selector == "superposition":
            return (self.ket("0", "g") + self.ket("1", "g") + self.ket("g", "g")) / np.sqrt(3)
        if selector == "branch_R":
            return self.ket("0", "g")
        if selector == "branch_L":
            return self.ket("1", "g")
        return self.ket("g", "g")

    def step1_target(self) -> np.ndarray:
        return (-self.ket("R", "R") - self.ket("L", "L") + self.ket("g", "g")) / np.sqrt(3)

    def entangled_target(self) -> np.ndarray:
        return (self.ket("R", "R") + self.ket("L", "L") + self.ket("g", "g")) / np.sqrt(3)

    def branch_kets(self) -> List[np.ndarray]:
        return [self.ket("R", "R"), self.ket("L", "L"), self.ket("g", "g")]


def build_protocol_system(spec: ProtocolSpec) -> ProtocolSystem:
    params = spec.params
    basis = enumerate_basis(params.level_scheme())
    pulses = build_pulse_set(spec.design, params, spec.step2_mode, spec.step2_duration)
    h1 = build_H1(params, pulses, basis)
    subspaces = {branch: branch_subspace(basis, branch) for branch in ("R", "L")}
    decompositions = {branch: zeno_decompose(h1.static_part, subspace) for branch, subspace in subspaces.items()}
    if not spec.open_system and not params.is_closed:
        logger.warning(
            f"gamma={params.gamma} and kappa={params.kappa} are ignored because open_system is disabled"
        )
    return ProtocolSystem(
        spec=spec,
        basis=basis,
        pulses=pulses,
        h1=h1,
        h2=build_H2(params, pulses, basis),
        collapse_ops=tuple(build_collapse_operators(params, basis)),
        subspaces=subspaces,
        decompositions=decompositions,
    )


@dataclass
class StepResult:
    trajectory: Trajectory
    report: Dict[str, Any] = field(default_factory=dict)

    @property
    def final_state(self) -> np.ndarray:
        """Final state on `trajectory.support`."""
        return self.trajectory.final_state

    @property
    def support(self) -> np.ndarray:
        return self.trajectory.support


def _evolve(
    system: ProtocolSystem, hamiltonian: TimeDependentHamiltonian, state: np.ndarray, span: np.ndarray
) -> Trajectory:
    config = system.spec.integrator
    if system.spec.open_system:
        rho = state if state.ndim == 2 else np.outer(state, state.conj())
        return integrate_lindblad(hamiltonian, system.active_collapse_ops, rho, span, config)
    if state.ndim == 2:
        raise ValueError("a closed-system run needs a state vector, got a density matrix")
    return integrate_schrodinger(hamiltonian, state, span, config)


def _sparse_state(vector: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    span = np.flatnonzero(np.abs(vector) > 0)
    return vector[span], span


def run_step1(spec: ProtocolSpec, system: Optional[ProtocolSystem] = None) -> StepResult:
    """
    Evolves the selected initial state under H1 over [0, t_f], with both branches in one run.

    The trajectory carries the populations of phi_1, phi_7 of each branch, of |g>_A|g>_B, the overlap with
    (-|RR> - |LL> + |gg>) / sqrt(3) and the Zeno leakage of each branch.
    """
    system = system or build_protocol_system(spec)
    state, span = _sparse_state(system.initial_state())
    trajectory = _evolve(system, system.h1, state, span)

    observables = {}
    for branch, subspace in system.subspaces.items():
        phi = subspace.states
        observables[f"P_phi1_{branch}"] = trajectory.expectation(phi[0])
        observables[f"P_phi7_{branch}"] = trajectory.expectation(phi[6])
    observables["P_gg"] = trajectory.expectation(system.ket("g", "g"))
    observables["F_step1"] = trajectory.expectation(system.step1_target())
    for branch, decomposition in system.decompositions.items():
        observables[f"leakage_{branch}"] = zeno_leakage(trajectory, decomposition)
    trajectory.add_observables(observables)

    report = {
        "step1_fidelity": float(observables["F_step1"][-1]),
        "step1_populations": {name: float(values[-1]) for name, values in observables.items() if name[0] == "P"},
        "peak_leakage": {branch: float(np.max(observables[f"leakage_{branch}"])) for branch in system.subspaces},
        "step1_diagnostics": dict(trajectory.diagnostics),
    }
    logger.info(f"Step 1 done: target fidelity {report['step1_fidelity']:.6f}")
    return StepResult(trajectory, report)


def step2_propagator(system: ProtocolSystem) -> np.ndarray:
    """
    Closed-system action of H2 on |g>_A, |e_R>_A, |R>_A (atom B in |g>, no photons): column j is the evolved j-th
    state expanded on the same three states.
    """
    kets = [system.ket(level, "g") for level in ("g", "eR", "R")]
    propagator = np.zeros((3, 3), dtype=complex)
    for column, ket in enumerate(kets):
        state, span = _sparse_state(ket)
        trajectory = integrate_schrodinger(system.h2, state, span, system.spec.integrator)
        for row, bra in enumerate(kets):
            propagator[row, column] = trajectory.amplitudes(bra)[-1]
    return propagator


def run_step2(
    spec: ProtocolSpec,
    state: Optional[np.ndarray] = None,
    span: Optional[np.ndarray] = None,
    system: Optional[ProtocolSystem] = None,
) -> StepResult:
    """
    Evolves `state` (given on the basis indices `span`) under H2 for the step-2 duration.

    Without a state, the ideal step-1 output (-|RR> - |LL> + |gg>) / sqrt(3) is used. The report carries the realized
    propagator on atom A's (g, e_R, R) manifold.
    """
    system = system or build_protocol_system(spec)
    if state is None:
        state, span = _sparse_state(system.step1_target())
    trajectory = _evolve(system, system.h2, np.asarray(state, dtype=complex), np.asarray(span))

    masks = {f"P_{label}_A": system.basis.level_mask("A", label) for label in ("g", "eR", "R", "L")}
    trajectory.add_observables(trajectory.populations(masks))
    propagator = step2_propagator(system)
    report = {
        "step2_propagator_real": propagator.real.tolist(),
        "step2_propagator_imag": propagator.imag.tolist(),
        "step2_diagnostics": dict(trajectory.diagnostics),
    }
    return StepResult(trajectory, report)


def _branch_block(trajectory: Trajectory, kets: Sequence[np.ndarray]) -> np.ndarray:
    """M[j, k] = <ket_j|rho|ket_k> at the final sample."""
    local = np.stack([np.asarray(ket)[trajectory.support] for ket in kets], axis=1)
    state = trajectory.final_state
    if state.ndim == 1:
        amplitudes = local.conj().T @ state
        return np.outer(amplitudes, amplitudes.conj())
    return local.conj().T @ state @ local


def phase_fitted_fidelity(block: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Largest fidelity with (e^{i a_1}|k_1> + e^{i a_2}|k_2> + e^{i a_3}|k_3>) / sqrt(3) over local phases, a_1 = 0.

    Returns the fidelity and the maximizing (a_2, a_3).
    """

    def negative_fidelity(phases):
        vector = np.exp(1j * np.concatenate([[0.0], phases])) / np.sqrt(3)
        return -float(np.real(vector.conj() @ block @ vector))

    start = np.angle(block[1:, 0])
    result = minimize(negative_fidelity, start, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
    best = result.x if result.fun <= negative_fidelity(start) else start
    return -negative_fidelity(best), np.angle(np.exp(1j * best))


@dataclass
class ProtocolReport:
    fidelity: float
    fitted_fidelity: float
    fitted_phases: Dict[str, float]
    branch_magnitudes: Dict[str, float]
    relative_phases: Dict[str, float]
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def run_protocol(spec: ProtocolSpec, system: Optional[ProtocolSystem] = None) -> Tuple[ProtocolReport, Trajectory]:
    """
    Step 1 followed by step 2, scored against (|RR> + |LL> + |gg>) / sqrt(3).

    Reports the raw fidelity with that state next to the phase-fitted fidelity (best local phases on the three
    branches), the realized branch magnitudes and the phases of LL and gg relative to RR.
    """
    system = system or build_protocol_system(spec)
    step1 = run_step1(spec, system)
    step2 = run_step2(spec, step1.final_state, step1.support, system)
    trajectory = step2.trajectory

    block = _branch_block(trajectory, system.branch_kets())
    fitted, phases = phase_fitted_fidelity(block)
    report = ProtocolReport(
        fidelity=fidelity(trajectory.final_state, system.entangled_target(), trajectory.support),
        fitted_fidelity=fitted,
        fitted_phases={"LL": float(phases[0]), "gg": float(phases[1])},
        branch_magnitudes={
            label: float(np.sqrt(max(block[k, k].real, 0.0))) for k, label in enumerate(BRANCH_LABELS)
        },
        relative_phases={label: float(np.angle(block[k, 0])) for k, label in enumerate(BRANCH_LABELS) if k},
        details={
            **step1.report,
            **step2.report,
            "open_system": spec.open_system,
            "params": asdict(spec.params),
        },
    )
    logger.info(f"Protocol done: fidelity {report.fidelity:.6f}, phase-fitted fidelity {report.fitted_fidelity:.6f}")
    return report, trajectory


@dataclass
class SweepResult:
    """
    Fidelity grids indexed [eta, gamma, kappa]. Failed points hold NaN and their error in `errors`.
    """

    etas: np.ndarray
    gammas: np.ndarray
    kappas: np.ndarray
    fidelity: np.ndarray
    fitted_fidelity: np.ndarray
    runtime: np.ndarray
    closed_fidelity: np.ndarray
    closed_fitted_fidelity: np.ndarray
    errors: Dict[Tuple[float, float, float], str] = field(default_factory=dict)

    def to_dataframe(self) -> pd.DataFrame:
        rows = []
        for (i, eta), (j, gamma), (k, kappa) in itertools.product(
            enumerate(self.etas), enumerate(self.gammas), enumerate(self.kappas)
        ):
            rows.append(
                {
                    "eta": eta,
                    "gamma": gamma,
                    "kappa": kappa,
                    "fidelity": self.fidelity[i, j, k],
                    "fitted_fidelity": self.fitted_fidelity[i, j, k],
                }
            )
        return pd.DataFrame(rows, columns=["eta", "gamma", "kappa", "fidelity", "fitted_fidelity"])

    def to_csv(self, path: str):
        self.to_dataframe().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)

    def monotonicity_report(self, slack: float = 0.005) -> Dict[str, Any]:
        """
        Checks that fidelity never rises with gamma at fixed kappa, nor with kappa at fixed gamma, and never exceeds
        the closed-system value, each up to `slack`.
        """
        report = {}
        for name, grid, closed in (
            ("raw", self.fidelity, self.closed_fidelity),
            ("fitted", self.fitted_fidelity, self.closed_fitted_fidelity),
        ):
            rise_gamma = np.diff(grid, axis=1) > slack
            rise_kappa = np.diff(grid, axis=2) > slack
            above_closed = grid > closed[:, None, None] + slack
            report[name] = {
                "non_increasing_in_gamma": not bool(np.any(rise_gamma)),
                "non_increasing_in_kappa": not bool(np.any(rise_kappa)),
                "bounded_by_closed": not bool(np.any(above_closed)),
                "max_rise_gamma": float(np.max(np.nan_to_num(np.diff(grid, axis=1), nan=0.0), initial=0.0)),
                "max_rise_kappa": float(np.max(np.nan_to_num(np.diff(grid, axis=2), nan=0.0), initial=0.0)),
            }
        report["failed_points"] = len(self.errors)
        return report


def _sweep_point(spec: ProtocolSpec, point: Tuple[float, float, float]) -> Tuple[float, float, float, Optional[str]]:
    eta, gamma, kappa = point
    start = time.perf_counter()
    try:
        point_spec = replace(spec.with_params(eta=eta, gamma=gamma, kappa=kappa), open_system=True)
        report, _ = run_protocol(point_spec)
        return report.fidelity, report.fitted_fidelity, time.perf_counter() - start, None
    except Exception as error:
        logger.warning(f"Sweep point eta={eta}, gamma={gamma}, kappa={kappa} failed: {error}")
        return np.nan, np.nan, time.perf_counter() - start, f"{type(error).__name__}: {error}"


def sweep(
    spec: ProtocolSpec,
    gammas: Sequence[float],
    kappas: Sequence[float],
    etas: Optional[Sequence[float]] = None,
    workers: int = 1,
    disable_tqdm: bool = True,
) -> SweepResult:
    """
    Open-system protocol fidelity over the (eta, gamma, kappa) grid, plus the closed-system reference for each eta.

    Points run in `workers` processes and are collected in grid order, so the CSV does not depend on scheduling.
    """
    etas = np.asarray([spec.params.eta] if etas is None else etas, dtype=float)
    gammas, kappas = np.asarray(gammas, dtype=float), np.asarray(kappas, dtype=float)
    # Only the final states are needed.
    spec = replace(spec, integrator=replace(spec.integrator, sample_every=2**31 - 1))
    points = list(itertools.product(etas, gammas, kappas))

    worker = partial(_sweep_point, spec)
    if workers > 1:
        with Pool(workers) as pool:
            results = list(tqdm(pool.imap(worker, points), total=len(points), disable=disable_tqdm, desc="sweep"))
    else:
        results = [worker(point) for point in tqdm(points, disable=disable_tqdm, desc="sweep")]

    shape = (etas.size, gammas.size, kappas.size)
    raw, fitted, runtime, messages = zip(*results)
    errors = {point: message for point, message in zip(points, messages) if message is not None}

    closed_raw, closed_fitted = [], []
    for eta in etas:
        try:
            report, _ = run_protocol(replace(spec.with_params(eta=eta), open_system=False))
        except Exception as error:
            logger.warning(f"Closed-system reference at eta={eta} failed: {error}")
            closed_raw.append(np.nan)
            closed_fitted.append(np.nan)
            continue
        closed_raw.append(report.fidelity)
        closed_fitted.append(report.fitted_fidelity)

    return SweepResult(
        etas=etas,
        gammas=gammas,
        kappas=kappas,
        fidelity=np.reshape(raw, shape),
        fitted_fidelity=np.reshape(fitted, shape),
        runtime=np.reshape(runtime, shape),
        closed_fidelity=np.asarray(closed_raw),
        closed_fitted_fidelity=np.asarray(closed_fitted),
        errors=errors,
    )


def pulse_timeline(pulses: PulseSet, samples: int = 1001) -> pd.DataFrame:
    """
    All schedules on the protocol clock [0, t_f + T2]: step-1 pulses vanish after t_f, step-2 pulses start at t_f.
    """
    t_f, step2 = pulses.step1_duration, pulses.step2_duration
    times = np.linspace(0.0, t_f + step2, samples)
    in_step1 = times <= t_f
    in_step2 = times >= t_f
    frame = pd.DataFrame({"t": times})
    for name, schedule in (
        ("Omega_A1", pulses.omega_a1),
        ("Omega_B1", pulses.omega_b1),
        ("Omega_A", pulses.omega_a),
        ("Omega_B", pulses.omega_b),
    ):
        frame[name] = np.where(in_step1, schedule(np.minimum(times, t_f)), 0.0)
    for name, schedule in (("Omega_g", pulses.omega_g), ("Omega_R", pulses.omega_r)):
        frame[name] = np.where(in_step2, schedule(np.clip(times - t_f, 0.0, step2)), 0.0)
    return frame


def zeno_check(spec: ProtocolSpec) -> Tuple[Dict[str, Any], pd.DataFrame]:
    """
    Zeno eigenvalues and dark states of both branches, and the leakage series of a closed run from |0>_A|g>_B.
    """
    closed = replace(spec, initial_state="branch_R", open_system=False)
    system = build_protocol_system(closed)
    summary = {
        branch: {
            "eigenvalues": decomposition.eigenvalues.tolist(),
            "dark_state": decomposition.dark_state.real.tolist(),
        }
        for branch, decomposition in system.decompositions.items()
    }
    step1 = run_step1(closed, system)
    frame = step1.trajectory.to_dataframe()[["t", "leakage_R", "P_phi1_R", "P_phi7_R"]]
    return summary, frame


def emit_figures(
    spec: ProtocolSpec,
    output_dir: str,
    gammas: Optional[Sequence[float]] = None,
    kappas: Optional[Sequence[float]] = None,
    workers: int = 1,
    samples: int = 1001,
    disable_tqdm: bool = True,
) -> Dict[str, str]:
    """
    Writes fig3.csv (schedules), fig4a.csv (step-1 populations), fig4b.csv (step-2 populations of atom A) and
    fig5.csv (fidelity against gamma for each kappa) into `output_dir`.
    """
    os.makedirs(output_dir, exist_ok=True)
    paths = {name: os.path.join(output_dir, f"{name}.csv") for name in ("fig3", "fig4a", "fig4b", "fig5")}
    closed = replace(spec, open_system=False)
    system = build_protocol_system(closed)
    t_f = system.pulses.step1_duration

    pulse_timeline(system.pulses, samples).to_csv(paths["fig3"], index=False, float_format=CSV_FLOAT_FORMAT)

    effective = integrate_schrodinger(
        build_effective_model(system.pulses), np.array([1.0, 0.0, 0.0], dtype=complex), config=spec.integrator
    )
    frame = pd.DataFrame(
        {
            "t": effective.times,
            "P_phi1_eff": np.abs(effective.states[:, 0]) ** 2,
            "P_phi7_eff": np.abs(effective.states[:, 2]) ** 2,
        }
    )
    for branch in ("R", "L"):
        branch_spec = replace(closed, initial_state=f"branch_{branch}")
        step1 = run_step1(branch_spec, replace(system, spec=branch_spec))
        for column in (f"P_phi1_{branch}", f"P_phi7_{branch}", f"leakage_{branch}"):
            frame[column] = step1.trajectory.observables[column]
    frame = frame.drop(columns=["leakage_L"])
    frame.to_csv(paths["fig4a"], index=False, float_format=CSV_FLOAT_FORMAT)

    ground = replace(closed, initial_state="ground")
    ground_system = replace(system, spec=ground)
    state, span = _sparse_state(ground_system.initial_state())
    step2 = run_step2(ground, state, span, ground_system)
    step2.trajectory.to_dataframe(time_offset=t_f)[["t", "P_g_A", "P_eR_A", "P_R_A"]].to_csv(
        paths["fig4b"], index=False, float_format=CSV_FLOAT_FORMAT
    )

    gammas = np.linspace(0.0, 0.1, 5) if gammas is None else gammas
    kappas = np.linspace(0.0, 1.0, 5) if kappas is None else kappas
    result = sweep(spec, gammas, kappas, workers=workers, disable_tqdm=disable_tqdm)
    result.to_dataframe().drop(columns=["eta"]).to_csv(paths["fig5"], index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info(f"Figure data written to {output_dir}")
    return paths
