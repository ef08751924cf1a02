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
Fixed-step RK4 integration of the Schroedinger and Lindblad equations, with observables on the result.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from tqdm.auto import tqdm

from optimum.utils import logging

from .model import CollapseOperator, TimeDependentHamiltonian


logger = logging.get_logger(__name__)

CSV_FLOAT_FORMAT = "%.11e"

ProjectorSpec = Union[np.ndarray, Sequence[int]]


class IntegrationError(RuntimeError):
    def __init__(self, message: str, step: int, time: float):
        self.step = step
        self.time = time
        super().__init__(f"{message} at step {step} (t={time:.6g})")


@dataclass(frozen=True)
class IntegratorConfig:
    """
    Args:
        dt: Requested step. The step actually used is shortened so that a whole number of steps ends the run exactly.
        sample_every: Number of steps between stored samples. The final state is always stored.
        norm_tolerance: Allowed drift of the state norm in unitary runs.
        trace_tolerance: Allowed drift of tr(rho) in Lindblad runs.
        hermiticity_tolerance: Allowed max |rho - rho^dagger| in Lindblad runs.
        positivity_tolerance: Allowed negative eigenvalue of rho at sampled times.
        restrict_to_support: Integrate on the basis states reachable from the initial state only.
        disable_tqdm: Hide the per-run progress bar.
    """

    dt: float
    sample_every: int = 100
    norm_tolerance: float = 1e-8
    trace_tolerance: float = 1e-6
    hermiticity_tolerance: float = 1e-8
    positivity_tolerance: float = 1e-6
    restrict_to_support: bool = True
    disable_tqdm: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.sample_every < 1:
            raise ValueError(f"sample_every must be at least 1, got {self.sample_every}")

    @classmethod
    def for_duration(cls, duration: float, steps: int = 20000, **kwargs) -> "IntegratorConfig":
        return cls(dt=duration / steps, **kwargs)

    def steps_for(self, duration: float) -> Tuple[int, float]:
        n_steps = max(1, math.ceil(duration / self.dt - 1e-9))
        return n_steps, duration / n_steps


@dataclass
class Trajectory:
    """
    Sampled solution of one integration.

    `states` are stored on the `support` basis indices only: shape (samples, len(support)) for state vectors and
    (samples, len(support), len(support)) for density matrices. Amplitudes outside the support are exactly zero.
    """

    times: np.ndarray
    states: np.ndarray
    support: np.ndarray
    dim: int
    kind: str
    observables: Dict[str, np.ndarray] = field(default_factory=dict)
    diagnostics: Dict[str, float] = field(default_factory=dict)

    @property
    def is_density(self) -> bool:
        return self.kind == "density"

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def full_state(self, sample: int = -1) -> np.ndarray:
        state = self.states[sample]
        if self.is_density:
            full = np.zeros((self.dim, self.dim), dtype=complex)
            full[np.ix_(self.support, self.support)] = state
        else:
            full = np.zeros(self.dim, dtype=complex)
            full[self.support] = state
        return full

    def amplitudes(self, vector: np.ndarray) -> np.ndarray:
        """<vector|psi(t)> per sample."""
        if self.is_density:
            raise ValueError("amplitudes are only defined for state-vector trajectories")
        return self.states @ np.asarray(vector, dtype=complex)[self.support].conj()

    def expectation(self, vector: np.ndarray) -> np.ndarray:
        """<vector|rho(t)|vector> (or |<vector|psi(t)>|^2) per sample."""
        local = np.asarray(vector, dtype=complex)[self.support]
        if self.is_density:
            return np.real(np.einsum("i,kij,j->k", local.conj(), self.states, local))
        return np.abs(self.states @ local.conj()) ** 2

    def populations(self, projectors: Mapping[str, ProjectorSpec]) -> Dict[str, np.ndarray]:
        return {
            name: np.array([populations(state, {name: spec}, self.support)[name] for state in self.states])
            for name, spec in projectors.items()
        }

    def add_observables(self, observables: Mapping[str, np.ndarray]):
        for name, values in observables.items():
            values = np.asarray(values, dtype=float)
            if values.shape != self.times.shape:
                raise ValueError(f"observable {name} has shape {values.shape}, expected {self.times.shape}")
            self.observables[name] = values

    def to_dataframe(self, time_offset: float = 0.0) -> pd.DataFrame:
        frame = pd.DataFrame({"t": self.times + time_offset})
        for name, values in self.observables.items():
            frame[name] = values
        return frame

    def to_csv(self, path: str, time_offset: float = 0.0):
        self.to_dataframe(time_offset).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)


def reachable_support(operators: Iterable[sp.spmatrix], initial_indices: Sequence[int], dim: int) -> np.ndarray:
    """
    Sorted basis indices reachable from `initial_indices` through the sparsity pattern of `operators`, where a
    nonzero entry (i, j) leads from j to i.

    The span of the result is invariant under every operator, so dynamics generated by them can be integrated on it
    without approximation.
    """
    pattern = sp.csr_matrix((dim, dim), dtype=float)
    for op in operators:
        pattern = pattern + abs(op).astype(float)
    pattern = (pattern > 0).astype(float).tocsr()

    reached = np.zeros(dim, dtype=bool)
    reached[np.asarray(initial_indices, dtype=int)] = True
    while True:
        grown = reached | (pattern @ reached.astype(float) > 0)
        if grown.sum() == reached.sum():
            break
        reached = grown
    support = np.flatnonzero(reached)
    logger.debug(f"Reachable support: {support.size} of {dim} basis states")
    return support


def _resolve_span(span: Optional[Sequence[int]], size: int, dim: int) -> np.ndarray:
    span = np.arange(dim) if span is None else np.asarray(span, dtype=int)
    if span.size != size:
        raise ValueError(f"initial state has {size} components but span lists {span.size} basis indices")
    if span.size and (span.min() < 0 or span.max() >= dim):
        raise ValueError(f"span indices must lie in [0, {dim})")
    return span


def _sample_steps(n_steps: int, sample_every: int) -> np.ndarray:
    steps = np.arange(0, n_steps + 1, sample_every)
    if steps[-1] != n_steps:
        steps = np.append(steps, n_steps)
    return steps


def _rk4_step(y: np.ndarray, t_index: int, dt: float, f: Callable[[int, np.ndarray], np.ndarray]) -> np.ndarray:
    """
    One classical RK4 step. `t_index` addresses a half-step grid: t_index + 1 is the midpoint of the step.
    """
    k1 = f(t_index, y)
    k2 = f(t_index + 1, y + 0.5 * dt * k1)
    k3 = f(t_index + 1, y + 0.5 * dt * k2)
    k4 = f(t_index + 2, y + dt * k3)
    return y + (k1 + 2 * k2 + 2 * k3 + k4) * (dt / 6)


def _integrate(
    f: Callable[[int, np.ndarray], np.ndarray],
    y0: np.ndarray,
    n_steps: int,
    dt: float,
    config: IntegratorConfig,
    description: str,
) -> Tuple[np.ndarray, np.ndarray]:
    sample_steps = _sample_steps(n_steps, config.sample_every)
    samples = np.empty((sample_steps.size,) + y0.shape, dtype=complex)
    samples[0] = y0
    next_sample = 1
    y = y0
    for step in tqdm(range(1, n_steps + 1), desc=description, disable=config.disable_tqdm):
        y = _rk4_step(y, 2 * (step - 1), dt, f)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state while integrating {description}", step, step * dt)
        if step == sample_steps[next_sample]:
            samples[next_sample] = y
            next_sample += 1
    return sample_steps * dt, samples


def _local_problem(
    hamiltonian: TimeDependentHamiltonian,
    collapse_ops: Sequence[CollapseOperator],
    initial_indices: np.ndarray,
    config: IntegratorConfig,
):
    if config.restrict_to_support:
        operators = list(hamiltonian.operators())
        for collapse in collapse_ops:
            operators.append(collapse.op)
            operators.append(collapse.op.conj().T @ collapse.op)
        support = reachable_support(operators, initial_indices, hamiltonian.dim)
    else:
        support = np.arange(hamiltonian.dim)
    if support.size < hamiltonian.dim:
        hamiltonian = hamiltonian.restrict(support)
        collapse_ops = [collapse.restrict(support) for collapse in collapse_ops]
    return support, hamiltonian, collapse_ops


def _tabulate(hamiltonian: TimeDependentHamiltonian, n_steps: int, dt: float) -> np.ndarray:
    half_grid = np.arange(2 * n_steps + 1) * (0.5 * dt)
    half_grid[-1] = n_steps * dt
    return hamiltonian.coefficients(half_grid)


def integrate_schrodinger(
    hamiltonian: TimeDependentHamiltonian,
    psi0: np.ndarray,
    span: Optional[Sequence[int]] = None,
    config: Optional[IntegratorConfig] = None,
    duration: Optional[float] = None,
) -> Trajectory:
    """
    Integrates i d|psi>/dt = H(t)|psi> over [0, duration] (the Hamiltonian's whole domain by default).

    Args:
        hamiltonian: The generator.
        psi0: Normalized initial amplitudes on the basis indices listed in `span` (all indices when None).
        span: Basis indices `psi0` is expressed on.
        config: Step and sampling settings. Defaults to 20000 steps over the run.
        duration: End of the run.

    Raises:
        PulseDomainError: if `duration` exceeds the Hamiltonian's domain.
        IntegrationError: on a non-finite state.
    """
    duration = hamiltonian.duration if duration is None else duration
    hamiltonian.check_window(duration)
    config = config or IntegratorConfig.for_duration(duration)
    psi0 = np.asarray(psi0, dtype=complex)
    span = _resolve_span(span, psi0.size, hamiltonian.dim)
    norm = np.linalg.norm(psi0)
    if abs(norm - 1) > config.norm_tolerance:
        raise ValueError(f"initial state must be normalized, got norm {norm:.12g}")

    occupied = np.abs(psi0) > 0
    support, local, _ = _local_problem(hamiltonian, (), span[occupied], config)
    y0 = np.zeros(support.size, dtype=complex)
    y0[np.searchsorted(support, span[occupied])] = psi0[occupied]
    n_steps, dt = config.steps_for(duration)
    coefficients = _tabulate(local, n_steps, dt)
    drives = [term.operator for term in local.drive_terms]
    static = local.static_part

    def f(t_index, psi):
        h_psi = static @ psi
        for k, drive in enumerate(drives):
            h_psi = h_psi + coefficients[k, t_index] * (drive @ psi)
        return -1j * h_psi

    logger.info(f"Integrating {local.label} on {support.size} states over [0, {duration:.6g}] in {n_steps} steps")
    times, states = _integrate(f, y0, n_steps, dt, config, local.label)
    trajectory = Trajectory(times, states, support, hamiltonian.dim, "state")
    norm_drift = float(np.max(np.abs(np.linalg.norm(states, axis=1) - 1)))
    trajectory.diagnostics["norm_drift"] = norm_drift
    if norm_drift > config.norm_tolerance:
        logger.warning(f"Norm drift {norm_drift:.3e} exceeds {config.norm_tolerance:.1e}; consider a smaller dt")
    return trajectory


def integrate_lindblad(
    hamiltonian: TimeDependentHamiltonian,
    collapse_ops: Sequence[CollapseOperator],
    rho0: np.ndarray,
    span: Optional[Sequence[int]] = None,
    config: Optional[IntegratorConfig] = None,
    duration: Optional[float] = None,
) -> Trajectory:
    """
    Integrates d rho/dt = -i[H, rho] + sum_k rate_k (L_k rho L_k^dagger - {L_k^dagger L_k, rho} / 2).

    The right-hand side is evaluated as -i H_nh rho + h.c. + sum_k rate_k L_k rho L_k^dagger with the non-Hermitian
    H_nh = H - (i / 2) sum_k rate_k L_k^dagger L_k, which needs one sparse-dense product per operator.

    Raises:
        ValueError: if `rho0` is not a square Hermitian unit-trace matrix matching `span`.
        PulseDomainError: if `duration` exceeds the Hamiltonian's domain.
        IntegrationError: on a non-finite state.
    """
    duration = hamiltonian.duration if duration is None else duration
    hamiltonian.check_window(duration)
    config = config or IntegratorConfig.for_duration(duration)
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.ndim != 2 or rho0.shape[0] != rho0.shape[1]:
        raise ValueError(f"rho0 must be a square matrix, got shape {rho0.shape}")
    for collapse in collapse_ops:
        if collapse.op.shape != (hamiltonian.dim, hamiltonian.dim):
            raise ValueError(
                f"collapse operator {collapse.label} has shape {collapse.op.shape}, expected {hamiltonian.dim}"
            )
    span = _resolve_span(span, rho0.shape[0], hamiltonian.dim)
    if np.max(np.abs(rho0 - rho0.conj().T)) > 1e-10:
        raise ValueError("rho0 must be Hermitian")
    if abs(np.trace(rho0) - 1) > config.trace_tolerance:
        raise ValueError(f"rho0 must have unit trace, got {np.trace(rho0).real:.12g}")

    active = [collapse for collapse in collapse_ops if collapse.rate > 0]
    occupied = np.any(np.abs(rho0) > 0, axis=1)
    support, local, active = _local_problem(hamiltonian, active, span[occupied], config)
    y0 = np.zeros((support.size, support.size), dtype=complex)
    position = np.searchsorted(support, span[occupied])
    y0[np.ix_(position, position)] = rho0[np.ix_(occupied, occupied)]

    n_steps, dt = config.steps_for(duration)
    coefficients = _tabulate(local, n_steps, dt)
    drives = [term.operator for term in local.drive_terms]
    damping = sp.csr_matrix((support.size, support.size), dtype=complex)
    jumps = []
    for collapse in active:
        damping = damping + collapse.rate * (collapse.op.conj().T @ collapse.op)
        jumps.append((collapse.rate, collapse.op))
    static = (local.static_part - 0.5j * damping).tocsr()

    def f(t_index, rho):
        h_rho = static @ rho
        for k, drive in enumerate(drives):
            h_rho = h_rho + coefficients[k, t_index] * (drive @ rho)
        coherent = -1j * h_rho
        out = coherent + coherent.conj().T
        for rate, op in jumps:
            out = out + rate * (op @ (op @ rho).conj().T)
        return out

    logger.info(
        f"Integrating the master equation of {local.label} with {len(active)} collapse operators on {support.size} "
        f"states over [0, {duration:.6g}] in {n_steps} steps"
    )
    times, states = _integrate(f, y0, n_steps, dt, config, local.label)
    trajectory = Trajectory(times, states, support, hamiltonian.dim, "density")
    _check_density_diagnostics(trajectory, config)
    return trajectory


def _check_density_diagnostics(trajectory: Trajectory, config: IntegratorConfig):
    states = trajectory.states
    trace_drift = float(np.max(np.abs(np.trace(states, axis1=1, axis2=2) - 1)))
    hermiticity = float(np.max(np.abs(states - np.conj(np.swapaxes(states, 1, 2)))))
    hermitian = 0.5 * (states + np.conj(np.swapaxes(states, 1, 2)))
    min_eigenvalue = float(np.min(np.linalg.eigvalsh(hermitian)))
    trajectory.diagnostics.update(
        trace_drift=trace_drift, hermiticity_drift=hermiticity, min_eigenvalue=min_eigenvalue
    )
    if trace_drift > config.trace_tolerance:
        logger.warning(f"Trace drift {trace_drift:.3e} exceeds {config.trace_tolerance:.1e}")
    if hermiticity > config.hermiticity_tolerance:
        logger.warning(f"Hermiticity drift {hermiticity:.3e} exceeds {config.hermiticity_tolerance:.1e}")
    if min_eigenvalue < -config.positivity_tolerance:
        logger.warning(f"Density matrix eigenvalue {min_eigenvalue:.3e} below -{config.positivity_tolerance:.1e}")


def _local_target(target: np.ndarray, support: Optional[np.ndarray]) -> np.ndarray:
    target = np.asarray(target, dtype=complex)
    return target if support is None else target[support]


def fidelity(state: np.ndarray, target: np.ndarray, support: Optional[np.ndarray] = None) -> float:
    """
    <target|rho|target> for a density matrix, |<target|psi>|^2 for a state vector.

    `state` may live on a subset `support` of basis indices, `target` is then given in the full basis.
    """
    state = np.asarray(state, dtype=complex)
    local = _local_target(target, support)
    if state.ndim == 2:
        return float(np.real(local.conj() @ state @ local))
    return float(np.abs(local.conj() @ state) ** 2)


def populations(
    state: np.ndarray, projectors: Mapping[str, ProjectorSpec], support: Optional[np.ndarray] = None
) -> Dict[str, float]:
    """
    Expectation of named projectors.

    A projector is given either as a state vector (float or complex dtype, projector |v><v|) or as a set of basis
    indices (integer dtype, or a boolean mask over the basis), in which case the populations of those configurations
    are summed.
    """
    state = np.asarray(state, dtype=complex)
    local_dim = state.shape[0]
    support_indices = np.arange(local_dim) if support is None else np.asarray(support)
    if state.ndim == 2:
        diagonal = np.real(np.diagonal(state))
    else:
        diagonal = np.abs(state) ** 2

    result = {}
    for name, spec in projectors.items():
        spec = np.asarray(spec)
        if spec.dtype == bool:
            result[name] = float(diagonal[spec[support_indices]].sum())
        elif np.issubdtype(spec.dtype, np.integer):
            result[name] = float(diagonal[np.isin(support_indices, spec)].sum())
        else:
            result[name] = fidelity(state, spec, support)
    return result


def convergence_order(
    hamiltonian: TimeDependentHamiltonian, psi0: np.ndarray, steps: Sequence[int], span: Optional[Sequence[int]] = None
) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Global-error exponent of the integrator: for each step count n, the distance between the final states obtained
    with n and 2n steps, and the slope of log(error) against log(dt).
    """
    duration = hamiltonian.duration
    dts, errors = [], []
    for n_steps in steps:
        finals = [
            integrate_schrodinger(
                hamiltonian, psi0, span, IntegratorConfig(dt=duration / n, sample_every=n), duration
            ).final_state
            for n in (n_steps, 2 * n_steps)
        ]
        dts.append(duration / n_steps)
        errors.append(np.linalg.norm(finals[0] - finals[1]))
    dts, errors = np.asarray(dts), np.asarray(errors)
    exponent = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    return dts, errors, exponent
