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
Lewis-Riesenfeld inverse engineering of the three-level effective model over (phi_1, psi_1, phi_7): auxiliary
parameters, pulse synthesis, the invariant and its eigenstates, Lewis-Riesenfeld phases and the analytic final state.
"""

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Optional, Tuple, Union

import numpy as np
from scipy.integrate import simpson

from optimum.utils import logging


if TYPE_CHECKING:
    from .model import SystemParams


logger = logging.get_logger(__name__)

ArrayLike = Union[float, np.ndarray]

STEP2_MODES = ("literal", "rescaled")
MIN_QUADRATURE_PANELS = 10_000


class PulseDomainError(ValueError):
    pass


class StencilDomainError(ValueError):
    pass


def choose_epsilon(winding_number: int) -> float:
    """
    Pulse parameter for which the accumulated phase pi / (2 sin(epsilon)) equals 2 * pi * winding_number.
    """
    if winding_number < 1:
        raise ValueError(f"winding_number must be a positive integer, got {winding_number}")
    return float(np.arcsin(1.0 / (4 * winding_number)))


@dataclass(frozen=True)
class PulseSchedule:
    """
    Real Rabi schedule `amplitude * sin(rate * t)` (or cosine) defined on [start, end].

    Schedules are plain data so they pickle cleanly into sweep workers. Evaluation accepts scalars and arrays and
    refuses times outside the domain, up to a relative slack of 1e-9.
    """

    name: str
    amplitude: float
    rate: float
    shape: str
    end: float
    start: float = 0.0

    def __post_init__(self):
        if self.shape not in ("sin", "cos"):
            raise ValueError(f"shape must be 'sin' or 'cos', got {self.shape!r}")
        if self.end < self.start:
            raise ValueError(f"{self.name} has an empty domain [{self.start}, {self.end}]")

    @property
    def domain(self) -> Tuple[float, float]:
        return self.start, self.end

    def check_domain(self, t: ArrayLike):
        t = np.asarray(t, dtype=float)
        tolerance = 1e-9 * max(1.0, abs(self.end))
        if t.size and (t.min() < self.start - tolerance or t.max() > self.end + tolerance):
            raise PulseDomainError(
                f"{self.name} evaluated on [{t.min():.6g}, {t.max():.6g}], outside its domain "
                f"[{self.start:.6g}, {self.end:.6g}]"
            )

    def __call__(self, t: ArrayLike) -> ArrayLike:
        self.check_domain(t)
        trig = np.sin if self.shape == "sin" else np.cos
        value = self.amplitude * trig(self.rate * np.asarray(t, dtype=float))
        return float(value) if np.ndim(value) == 0 else value

    def scaled(self, factor: float, name: Optional[str] = None) -> "PulseSchedule":
        return replace(self, amplitude=self.amplitude * factor, name=name or self.name)


@dataclass(frozen=True)
class PulseDesign:
    """
    Constant-nu parametrization of the invariant: nu(t) = epsilon, beta(t) = pi t / (2 t_f).

    Args:
        epsilon: Constant value of nu, in (0, pi / 2).
        t_f: Time at which beta reaches pi / 2.
        winding_number: Number of 2 pi windings the Lewis-Riesenfeld phase is designed to accumulate.
        chi: Scale of the invariant. Cancels in every observable.
        duration: End of the domain on which the design is evaluated. Defaults to `t_f`; the step-2 design runs past
            `t_f`.
    """

    epsilon: float
    t_f: float
    winding_number: int = 1
    chi: float = 1.0
    duration: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.epsilon < np.pi / 2:
            raise ValueError(f"epsilon must lie in (0, pi/2), got {self.epsilon}")
        if self.t_f <= 0:
            raise ValueError(f"t_f must be positive, got {self.t_f}")
        if self.winding_number < 1:
            raise ValueError(f"winding_number must be a positive integer, got {self.winding_number}")
        if self.chi <= 0:
            raise ValueError(f"chi must be positive, got {self.chi}")
        if self.duration is None:
            object.__setattr__(self, "duration", float(self.t_f))
        elif self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")

    @classmethod
    def from_params(cls, params: "SystemParams", chi: float = 1.0) -> "PulseDesign":
        return cls(epsilon=params.epsilon, t_f=params.t_f, winding_number=params.winding_number, chi=chi)

    @property
    def beta_dot(self) -> float:
        return np.pi / (2 * self.t_f)

    @property
    def amplitude(self) -> float:
        # beta_dot * cot(nu), the peak of both effective schedules
        return self.beta_dot / np.tan(self.epsilon)

    def check_time(self, t: ArrayLike):
        t = np.asarray(t, dtype=float)
        tolerance = 1e-9 * max(1.0, self.duration)
        if t.size and (t.min() < -tolerance or t.max() > self.duration + tolerance):
            raise PulseDomainError(
                f"design evaluated on [{t.min():.6g}, {t.max():.6g}], outside its domain [0, {self.duration:.6g}]"
            )

    def nu(self, t: ArrayLike) -> ArrayLike:
        return self.epsilon * np.ones_like(np.asarray(t, dtype=float))

    def nu_dot(self, t: ArrayLike) -> ArrayLike:
        return np.zeros_like(np.asarray(t, dtype=float))

    def beta(self, t: ArrayLike) -> ArrayLike:
        return self.beta_dot * np.asarray(t, dtype=float)

    def theta(self, t: ArrayLike) -> ArrayLike:
        """Closed-form Lewis-Riesenfeld phase beta(t) / sin(epsilon)."""
        return self.beta(t) / np.sin(self.epsilon)


@dataclass(frozen=True)
class PulseSet:
    omega_a1: PulseSchedule
    omega_b1: PulseSchedule
    omega_a: PulseSchedule
    omega_b: PulseSchedule
    omega_g: PulseSchedule
    omega_r: PulseSchedule
    design: PulseDesign
    step2_design: PulseDesign = field(repr=False)

    @property
    def step1_duration(self) -> float:
        return self.omega_a.end

    @property
    def step2_duration(self) -> float:
        return self.omega_g.end

    def scaled(self, factor: float) -> "PulseSet":
        return replace(
            self,
            omega_a1=self.omega_a1.scaled(factor),
            omega_b1=self.omega_b1.scaled(factor),
            omega_a=self.omega_a.scaled(factor),
            omega_b=self.omega_b.scaled(factor),
            omega_g=self.omega_g.scaled(factor),
            omega_r=self.omega_r.scaled(factor),
        )


def effective_pulses(design: PulseDesign) -> Tuple[PulseSchedule, PulseSchedule]:
    omega_a1 = PulseSchedule("Omega_A1", design.amplitude, design.beta_dot, "sin", end=design.duration)
    omega_b1 = PulseSchedule("Omega_B1", design.amplitude, design.beta_dot, "cos", end=design.duration)
    return omega_a1, omega_b1


def physical_pulses(design: PulseDesign, params: "SystemParams") -> Tuple[PulseSchedule, PulseSchedule]:
    """
    Laser schedules of the full model, Omega_{A,B}(t) = (Lambda / eta) * Omega_{A1,B1}(t).

    Raises:
        ValueError: if `params.eta` is zero, since the dark state then carries no fiber component and no finite laser
            amplitude realizes the effective coupling.
    """
    if params.eta <= 0:
        raise ValueError(f"physical pulses require eta > 0, got eta={params.eta}")
    factor = params.collective_coupling / params.eta
    omega_a1, omega_b1 = effective_pulses(design)
    return omega_a1.scaled(factor, name="Omega_A"), omega_b1.scaled(factor, name="Omega_B")


def step2_design(design: PulseDesign, mode: str = "literal", duration: Optional[float] = None) -> PulseDesign:
    duration = 2 * design.t_f if duration is None else duration
    if mode == "literal":
        return replace(design, duration=duration)
    if mode == "rescaled":
        return replace(design, t_f=duration, duration=duration)
    raise ValueError(f"step2 mode must be one of {', '.join(STEP2_MODES)}, got {mode!r}")


def step2_pulses(
    design: PulseDesign, mode: str = "literal", duration: Optional[float] = None
) -> Tuple[PulseSchedule, PulseSchedule]:
    """
    Step-2 schedules on atom A's (g, e_R, R) manifold, over [0, duration] (2 t_f by default).

    In "literal" mode the step-1 functional form is kept with the step-1 t_f, so Omega_R turns negative past t_f. In
    "rescaled" mode the period is stretched so that beta reaches pi / 2 exactly at the end of the step.
    """
    omega_g, omega_r = effective_pulses(step2_design(design, mode=mode, duration=duration))
    return replace(omega_g, name="Omega_g"), replace(omega_r, name="Omega_R")


def build_pulse_set(
    design: PulseDesign,
    params: "SystemParams",
    step2_mode: str = "literal",
    step2_duration: Optional[float] = None,
) -> PulseSet:
    omega_a1, omega_b1 = effective_pulses(design)
    omega_a, omega_b = physical_pulses(design, params)
    omega_g, omega_r = step2_pulses(design, mode=step2_mode, duration=step2_duration)
    return PulseSet(
        omega_a1=omega_a1,
        omega_b1=omega_b1,
        omega_a=omega_a,
        omega_b=omega_b,
        omega_g=omega_g,
        omega_r=omega_r,
        design=design,
        step2_design=step2_design(design, mode=step2_mode, duration=step2_duration),
    )


def effective_hamiltonian_matrix(omega_a1: ArrayLike, omega_b1: ArrayLike) -> np.ndarray:
    """
    Omega_A1 (|psi_1><phi_1| + h.c.) + Omega_B1 (|psi_1><phi_7| + h.c.) over (phi_1, psi_1, phi_7).

    Broadcasts over array inputs, returning shape (..., 3, 3).
    """
    omega_a1, omega_b1 = np.broadcast_arrays(np.asarray(omega_a1, dtype=float), np.asarray(omega_b1, dtype=float))
    matrix = np.zeros(omega_a1.shape + (3, 3), dtype=complex)
    matrix[..., 0, 1] = matrix[..., 1, 0] = omega_a1
    matrix[..., 2, 1] = matrix[..., 1, 2] = omega_b1
    return matrix


def _effective_drive(design: PulseDesign, params: Optional["SystemParams"], t: ArrayLike) -> Tuple[ArrayLike, ...]:
    omega_a1, omega_b1 = effective_pulses(design)
    if params is None or params.eta <= 0:
        return omega_a1(t), omega_b1(t)
    # Go through the laser amplitudes so the eta / Lambda projection onto the dark state is exercised.
    omega_a, omega_b = physical_pulses(design, params)
    ratio = params.eta / params.collective_coupling
    return ratio * omega_a(t), ratio * omega_b(t)


def _invariant_matrices(nu: np.ndarray, beta: np.ndarray, chi: float) -> np.ndarray:
    cn, sn, cb, sb = np.cos(nu), np.sin(nu), np.cos(beta), np.sin(beta)
    matrix = np.zeros(np.shape(nu) + (3, 3), dtype=complex)
    matrix[..., 0, 1] = matrix[..., 1, 0] = cn * sb
    matrix[..., 1, 2] = matrix[..., 2, 1] = cn * cb
    matrix[..., 2, 0] = 1j * sn
    matrix[..., 0, 2] = -1j * sn
    return chi * matrix


def _eigenstates(nu: np.ndarray, beta: np.ndarray) -> np.ndarray:
    # shape (..., 3 eigenstates [0, +, -], 3 components)
    cn, sn, cb, sb = np.cos(nu), np.sin(nu), np.cos(beta), np.sin(beta)
    states = np.zeros(np.shape(nu) + (3, 3), dtype=complex)
    states[..., 0, :] = np.stack([cn * cb, -1j * sn, -cn * sb], axis=-1)
    for row, sign in ((1, 1.0), (2, -1.0)):
        states[..., row, :] = np.stack(
            [sn * cb + sign * 1j * sb, 1j * cn, -sn * sb + sign * 1j * cb], axis=-1
        ) / np.sqrt(2)
    return states


def _eigenstate_derivatives(nu: np.ndarray, beta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of `_eigenstates` with respect to nu and beta."""
    cn, sn, cb, sb = np.cos(nu), np.sin(nu), np.cos(beta), np.sin(beta)
    d_nu = np.zeros(np.shape(nu) + (3, 3), dtype=complex)
    d_beta = np.zeros(np.shape(nu) + (3, 3), dtype=complex)
    d_nu[..., 0, :] = np.stack([-sn * cb, -1j * cn, sn * sb], axis=-1)
    d_beta[..., 0, :] = np.stack([-cn * sb, np.zeros_like(cn), -cn * cb], axis=-1)
    for row, sign in ((1, 1.0), (2, -1.0)):
        d_nu[..., row, :] = np.stack([cn * cb, -1j * sn, -cn * sb], axis=-1) / np.sqrt(2)
        d_beta[..., row, :] = np.stack(
            [-sn * sb + sign * 1j * cb, np.zeros_like(cn), -sn * cb - sign * 1j * sb], axis=-1
        ) / np.sqrt(2)
    return d_nu, d_beta


def invariant_matrix(design: PulseDesign, t: float) -> np.ndarray:
    design.check_time(t)
    return _invariant_matrices(design.nu(t), design.beta(t), design.chi)


def invariant_eigenstates(design: PulseDesign, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Eigenstates (Phi_0, Phi_+, Phi_-) of the invariant with eigenvalues (0, +chi, -chi), over (phi_1, psi_1, phi_7).
    """
    design.check_time(t)
    states = _eigenstates(design.nu(t), design.beta(t))
    return states[0], states[1], states[2]


def commutator_residual(
    invariant_fn: Callable[[float], np.ndarray],
    hamiltonian_fn: Callable[[float], np.ndarray],
    t: float,
    h: float,
) -> float:
    """
    max |i dI/dt - [H(t), I(t)]| with dI/dt taken by a centered difference of step `h`.
    """
    d_invariant = (invariant_fn(t + h) - invariant_fn(t - h)) / (2 * h)
    invariant = invariant_fn(t)
    hamiltonian = hamiltonian_fn(t)
    commutator = hamiltonian @ invariant - invariant @ hamiltonian
    return float(np.max(np.abs(1j * d_invariant - commutator)))


def invariant_residual(
    design: PulseDesign, params: Optional["SystemParams"], t: float, h: float = 1e-4
) -> float:
    """
    Residual of the invariance condition i dI/dt = [H_eff, I] at time `t`, vanishing as O(h^2).

    Raises:
        StencilDomainError: if [t - h, t + h] is not contained in the design's domain.
    """
    if h <= 0:
        raise ValueError(f"finite difference step must be positive, got {h}")
    if t - h < 0 or t + h > design.duration:
        raise StencilDomainError(
            f"stencil [{t - h:.6g}, {t + h:.6g}] leaves the design domain [0, {design.duration:.6g}]"
        )

    def hamiltonian_fn(s):
        return effective_hamiltonian_matrix(*_effective_drive(design, params, s))

    def invariant_fn(s):
        return invariant_matrix(design, s)

    return commutator_residual(invariant_fn, hamiltonian_fn, t, h)


def lr_phases(
    design: PulseDesign,
    params: Optional["SystemParams"],
    t: float,
    panels: int = MIN_QUADRATURE_PANELS,
) -> np.ndarray:
    """
    Lewis-Riesenfeld phases (theta_0, theta_+, theta_-) accumulated on [0, t].

    Each phase is the composite Simpson quadrature of <Phi_n| i d/dt - H_eff |Phi_n>, with at least 10^4 panels.
    """
    design.check_time(t)
    if t == 0:
        return np.zeros(3)
    panels = max(int(panels), MIN_QUADRATURE_PANELS)
    panels += panels % 2
    times = np.linspace(0.0, t, panels + 1)
    nu, beta = design.nu(times), design.beta(times)
    states = _eigenstates(nu, beta)
    d_nu, d_beta = _eigenstate_derivatives(nu, beta)
    d_states = design.nu_dot(times)[:, None, None] * d_nu + design.beta_dot * d_beta
    hamiltonian = effective_hamiltonian_matrix(*_effective_drive(design, params, times))

    geometric = 1j * np.einsum("kni,kni->kn", states.conj(), d_states)
    dynamical = np.einsum("kni,kij,knj->kn", states.conj(), hamiltonian, states)
    integrand = np.real(geometric - dynamical)
    return simpson(integrand, x=times, axis=0)


def lr_phase(design: PulseDesign, params: Optional["SystemParams"], t: float) -> float:
    """
    Positive Lewis-Riesenfeld phase theta(t) = -theta_+(t), equal to beta(t) / sin(epsilon) for the constant-nu design.
    """
    return float(-lr_phases(design, params, t)[1])


def lr_solution(design: PulseDesign, initial: np.ndarray, t: ArrayLike) -> np.ndarray:
    """
    Exact evolution sum_n C_n exp(i theta_n(t)) Phi_n(t) of a 3-component `initial` state, C_n = <Phi_n(0)|initial>.

    Returns shape (3,) for scalar `t`, else (len(t), 3).
    """
    design.check_time(t)
    initial = np.asarray(initial, dtype=complex)
    coefficients = _eigenstates(np.asarray(design.epsilon), np.asarray(0.0)).conj() @ initial
    theta = design.theta(t)
    phases = np.stack([np.zeros_like(theta), -theta, theta], axis=-1)
    states = _eigenstates(design.nu(t), design.beta(t))
    return np.einsum("...n,...ni->...i", coefficients * np.exp(1j * phases), states)


def analytic_final_state(epsilon: float, theta: float) -> np.ndarray:
    """
    Amplitudes over (phi_1, psi_1, phi_7) at beta = pi / 2 after starting from phi_1. theta = 2 N pi gives -phi_7.
    """
    se, ce = np.sin(epsilon), np.cos(epsilon)
    return np.array(
        [se * np.sin(theta), 1j * se * ce * (np.cos(theta) - 1), -(ce**2) - se**2 * np.cos(theta)],
        dtype=complex,
    )


def auxiliary_rates(
    nu: ArrayLike, beta: ArrayLike, omega_a1: ArrayLike, omega_b1: ArrayLike
) -> Tuple[ArrayLike, ArrayLike]:
    """
    (nu_dot, beta_dot) = (Omega_A1 cos(beta) - Omega_B1 sin(beta), tan(nu) (Omega_A1 sin(beta) + Omega_B1 cos(beta))).
    """
    nu_dot = omega_a1 * np.cos(beta) - omega_b1 * np.sin(beta)
    beta_dot = np.tan(nu) * (omega_a1 * np.sin(beta) + omega_b1 * np.cos(beta))
    return nu_dot, beta_dot


def pulses_from_auxiliary(
    nu: ArrayLike, beta: ArrayLike, nu_dot: ArrayLike, beta_dot: ArrayLike
) -> Tuple[ArrayLike, ArrayLike]:
    """Inverse of `auxiliary_rates`: effective Rabi frequencies that drive (nu, beta) along a prescribed path."""
    drive = beta_dot / np.tan(nu)
    omega_a1 = nu_dot * np.cos(beta) + drive * np.sin(beta)
    omega_b1 = -nu_dot * np.sin(beta) + drive * np.cos(beta)
    return omega_a1, omega_b1


def auxiliary_consistency(design: PulseDesign, samples: int = 1001) -> Tuple[float, float]:
    """
    Maximum pointwise residuals of the nu_dot and beta_dot auxiliary equations along the design's pulses.
    """
    times = np.linspace(0.0, design.duration, samples)
    omega_a1, omega_b1 = effective_pulses(design)
    a, b = omega_a1(times), omega_b1(times)
    nu, beta = design.nu(times), design.beta(times)
    nu_residual = design.nu_dot(times) - (a * np.cos(beta) - b * np.sin(beta))
    beta_residual = design.beta_dot / np.tan(nu) - (a * np.sin(beta) + b * np.cos(beta))
    return float(np.max(np.abs(nu_residual))), float(np.max(np.abs(beta_residual)))
