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
Hamiltonians and collapse operators of two atoms in cavities A and B joined by a fiber, in units of g.
"""

from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from optimum.utils import logging

from .hilbert import (
    Basis,
    LevelScheme,
    SparseOperator,
    atomic_projector,
    dag,
    mode_annihilation,
    mode_creation,
    zero_operator,
)
from .invariant import PulseDomainError, PulseSet, choose_epsilon


logger = logging.get_logger(__name__)

COUPLINGS = ("AL", "AR", "BL", "BR")


@dataclass(frozen=True)
class SystemParams:
    """
    Physical constants of the setup. Frequencies and rates are in units of the atom-cavity coupling.

    Args:
        g: Atom-cavity coupling, shared by the four cavity transitions unless overridden.
        eta: Cavity-fiber coupling. Zero decouples the fiber; pulses then cannot be synthesized.
        gamma: Spontaneous emission rate of each atomic decay channel.
        kappa: Photon leakage rate, identical for the four cavity modes and the two fiber modes.
        epsilon: Pulse parameter. Defaults to the root of pi / (2 sin(epsilon)) = 2 pi winding_number.
        t_f: Duration of step 1.
        winding_number: Number of 2 pi windings of the Lewis-Riesenfeld phase.
        n_max: Photon cutoff per mode.
        g_al, g_ar, g_bl, g_br: Per-transition overrides of `g`.
    """

    g: float = 1.0
    eta: float = 1.0
    gamma: float = 0.0
    kappa: float = 0.0
    epsilon: Optional[float] = None
    t_f: float = 15.0
    winding_number: int = 1
    n_max: int = 1
    g_al: Optional[float] = None
    g_ar: Optional[float] = None
    g_bl: Optional[float] = None
    g_br: Optional[float] = None

    def __post_init__(self):
        if self.g <= 0:
            raise ValueError(f"g must be positive, got {self.g}")
        if self.eta < 0:
            raise ValueError(f"eta must be non-negative, got {self.eta}")
        if self.gamma < 0 or self.kappa < 0:
            raise ValueError(f"decay rates must be non-negative, got gamma={self.gamma}, kappa={self.kappa}")
        if self.t_f <= 0:
            raise ValueError(f"t_f must be positive, got {self.t_f}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be at least 1, got {self.n_max}")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", choose_epsilon(self.winding_number))
        elif not 0.0 < self.epsilon < np.pi / 2:
            raise ValueError(f"epsilon must lie in (0, pi/2), got {self.epsilon}")

    @property
    def collective_coupling(self) -> float:
        """Lambda = sqrt(g^2 + 2 eta^2), the largest eigenvalue of the atom-cavity-fiber coupling."""
        return float(np.sqrt(self.g**2 + 2 * self.eta**2))

    @property
    def is_closed(self) -> bool:
        return self.gamma == 0 and self.kappa == 0

    def coupling(self, transition: str) -> float:
        if transition not in COUPLINGS:
            raise ValueError(f"unknown coupling {transition!r}, expected one of {', '.join(COUPLINGS)}")
        override = getattr(self, f"g_{transition.lower()}")
        return self.g if override is None else override

    def level_scheme(self) -> LevelScheme:
        return LevelScheme(n_max=self.n_max)


@dataclass(frozen=True)
class DriveTerm:
    operator: SparseOperator
    coefficient: Callable
    label: str = ""


@dataclass(frozen=True)
class TimeDependentHamiltonian:
    """
    H(t) = static_part + sum_k c_k(t) D_k on [0, duration], each D_k stored already Hermitian.

    Coefficient functions must accept arrays, so integrators can tabulate them once per run.
    """

    static_part: SparseOperator
    drive_terms: Tuple[DriveTerm, ...]
    duration: float
    label: str = field(default="H", compare=False)

    @property
    def dim(self) -> int:
        return self.static_part.shape[0]

    def check_window(self, duration: float):
        if duration > self.duration * (1 + 1e-9):
            raise PulseDomainError(
                f"{self.label} is defined on [0, {self.duration:.6g}] but evolution to t={duration:.6g} was requested"
            )

    def coefficients(self, times: np.ndarray) -> np.ndarray:
        """Drive coefficients tabulated on `times`, shape (number of drive terms, len(times))."""
        times = np.asarray(times, dtype=float)
        if not self.drive_terms:
            return np.zeros((0, times.size))
        return np.stack([np.broadcast_to(term.coefficient(times), times.shape) for term in self.drive_terms])

    def drive_part(self, t: float) -> SparseOperator:
        drive = sp.csr_matrix(self.static_part.shape, dtype=complex)
        for term in self.drive_terms:
            drive = drive + term.coefficient(t) * term.operator
        return drive.tocsr()

    def __call__(self, t: float) -> SparseOperator:
        return (self.static_part + self.drive_part(t)).tocsr()

    def operators(self) -> Iterator[SparseOperator]:
        yield self.static_part
        for term in self.drive_terms:
            yield term.operator

    def restrict(self, indices: Sequence[int]) -> "TimeDependentHamiltonian":
        """Same Hamiltonian on the coordinate subspace spanned by `indices`, assumed invariant."""
        indices = np.asarray(indices)

        def take(op):
            return op[indices][:, indices].tocsr()

        return TimeDependentHamiltonian(
            static_part=take(self.static_part),
            drive_terms=tuple(DriveTerm(take(t.operator), t.coefficient, t.label) for t in self.drive_terms),
            duration=self.duration,
            label=self.label,
        )


@dataclass(frozen=True)
class CollapseOperator:
    op: SparseOperator
    rate: float
    label: str = ""

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"collapse rate must be non-negative, got {self.rate} for {self.label}")

    def restrict(self, indices: Sequence[int]) -> "CollapseOperator":
        indices = np.asarray(indices)
        return CollapseOperator(self.op[indices][:, indices].tocsr(), self.rate, self.label)


def hermitian_part(op: SparseOperator) -> SparseOperator:
    """op + op^dagger."""
    return (op + dag(op)).tocsr()


def build_H_acf(params: SystemParams, basis: Basis) -> SparseOperator:
    """
    Atom-cavity-fiber coupling: g_ij a_ij |e_j><.|_i for each cavity transition, eta b_j (a_Aj^dag + a_Bj^dag) for
    each polarization j, plus Hermitian conjugates.
    """
    transitions = (
        ("AL", "A", "aAL", "eL", "L"),
        ("AR", "A", "aAR", "eR", "R"),
        ("BL", "B", "aBL", "eL", "g"),
        ("BR", "B", "aBR", "eR", "g"),
    )
    coupling = zero_operator(basis)
    for name, atom, mode, excited, ground in transitions:
        coupling = coupling + params.coupling(name) * (
            mode_annihilation(basis, mode) @ atomic_projector(basis, atom, excited, ground)
        )
    for polarization in ("L", "R"):
        fiber = mode_annihilation(basis, f"f{polarization}")
        cavities = mode_creation(basis, f"aA{polarization}") + mode_creation(basis, f"aB{polarization}")
        coupling = coupling + params.eta * (fiber @ cavities)
    coupling = hermitian_part(coupling)
    coupling.eliminate_zeros()
    return coupling


def atom_a_drive(basis: Basis) -> SparseOperator:
    return hermitian_part(atomic_projector(basis, "A", "eL", "1") + atomic_projector(basis, "A", "eR", "0"))


def atom_b_drive(basis: Basis) -> SparseOperator:
    return hermitian_part(atomic_projector(basis, "B", "eL", "L") + atomic_projector(basis, "B", "eR", "R"))


def build_H1(params: SystemParams, pulses: PulseSet, basis: Basis) -> TimeDependentHamiltonian:
    """
    Step-1 Hamiltonian H_acf + Omega_A(t) (|e_L><1| + |e_R><0|)_A + Omega_B(t) (|e_L><L| + |e_R><R|)_B + h.c.
    """
    return TimeDependentHamiltonian(
        static_part=build_H_acf(params, basis),
        drive_terms=(
            DriveTerm(atom_a_drive(basis), pulses.omega_a, "Omega_A"),
            DriveTerm(atom_b_drive(basis), pulses.omega_b, "Omega_B"),
        ),
        duration=pulses.step1_duration,
        label="H1",
    )


def build_H2(params: SystemParams, pulses: PulseSet, basis: Basis) -> TimeDependentHamiltonian:
    """
    Step-2 single-atom operation Omega_g(t) |e_R><g|_A + Omega_R(t) |e_R><R|_A + h.c., with no cavity coupling.
    """
    return TimeDependentHamiltonian(
        static_part=zero_operator(basis),
        drive_terms=(
            DriveTerm(hermitian_part(atomic_projector(basis, "A", "eR", "g")), pulses.omega_g, "Omega_g"),
            DriveTerm(hermitian_part(atomic_projector(basis, "A", "eR", "R")), pulses.omega_r, "Omega_R"),
        ),
        duration=pulses.step2_duration,
        label="H2",
    )


def three_level_hamiltonian(
    first: Callable, second: Callable, duration: float, label: str = "H"
) -> TimeDependentHamiltonian:
    """
    Lambda-system Hamiltonian first(t) (|1><0| + h.c.) + second(t) (|1><2| + h.c.) over three levels.
    """
    couple_first = np.zeros((3, 3), dtype=complex)
    couple_first[0, 1] = couple_first[1, 0] = 1.0
    couple_second = np.zeros((3, 3), dtype=complex)
    couple_second[2, 1] = couple_second[1, 2] = 1.0
    return TimeDependentHamiltonian(
        static_part=sp.csr_matrix((3, 3), dtype=complex),
        drive_terms=(
            DriveTerm(sp.csr_matrix(couple_first), first, getattr(first, "name", "first")),
            DriveTerm(sp.csr_matrix(couple_second), second, getattr(second, "name", "second")),
        ),
        duration=duration,
        label=label,
    )


def build_H2_three_level(pulses: PulseSet) -> TimeDependentHamiltonian:
    """Step-2 Hamiltonian on atom A's (g, e_R, R) manifold alone."""
    return three_level_hamiltonian(pulses.omega_g, pulses.omega_r, pulses.step2_duration, label="H2 (g, eR, R)")


def build_collapse_operators(params: SystemParams, basis: Basis) -> List[CollapseOperator]:
    """
    Photon leakage of the six modes at rate kappa, and one emission channel |h><e_j| per (ground h, excited e_j) pair:
    h in {0, 1, L, R} for atom A, h in {g, L, R} for atom B, each at rate gamma.
    """
    collapse_ops = [
        CollapseOperator(mode_annihilation(basis, mode), params.kappa, f"kappa_{mode}") for mode in basis.scheme.modes
    ]
    for atom, grounds in (("A", ("0", "1", "L", "R")), ("B", ("g", "L", "R"))):
        for excited in ("eL", "eR"):
            for ground in grounds:
                emission = atomic_projector(basis, atom, ground, excited)
                collapse_ops.append(CollapseOperator(emission, params.gamma, f"gamma_{atom}_{ground}_{excited}"))
    logger.debug(f"Built {len(collapse_ops)} collapse operators (gamma={params.gamma}, kappa={params.kappa})")
    return collapse_ops