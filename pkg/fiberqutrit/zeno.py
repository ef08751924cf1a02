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
Zeno subspaces of the atom-cavity-fiber coupling and the effective three-level dynamics they confine the drive to.
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Tuple

import numpy as np

from optimum.utils import logging

from .hilbert import Basis, BasisState, SparseOperator, restrict
from .invariant import PulseSet
from .model import TimeDependentHamiltonian, atom_a_drive, atom_b_drive, three_level_hamiltonian


if TYPE_CHECKING:
    from .dynamics import Trajectory


logger = logging.get_logger(__name__)

BRANCHES = ("R", "L")


class ZenoDecompositionError(RuntimeError):
    pass


@dataclass(frozen=True)
class BranchSubspace:
    """
    The seven configurations one polarization branch of step 1 runs through, in protocol order:
    laser excitation of atom A, emission into cavity A, the fiber, cavity B, absorption by atom B and the final
    laser transfer of atom B.
    """

    branch: str
    basis: Basis
    configurations: Tuple[BasisState, ...]
    indices: Tuple[int, ...]

    @property
    def states(self) -> List[np.ndarray]:
        return [self.basis.basis_vector(index) for index in self.indices]

    def __len__(self) -> int:
        return len(self.indices)


def branch_subspace(basis: Basis, branch: str) -> BranchSubspace:
    if basis.scheme.n_max < 1:
        raise ValueError(f"branch subspaces need at least one photon per mode, got n_max={basis.scheme.n_max}")
    if branch not in BRANCHES:
        raise ValueError(f"unknown branch {branch!r}, expected one of {', '.join(BRANCHES)}")
    start = "0" if branch == "R" else "1"
    excited = f"e{branch}"
    configurations = (
        basis.configuration(start, "g"),
        basis.configuration(excited, "g"),
        basis.configuration(branch, "g", **{f"aA{branch}": 1}),
        basis.configuration(branch, "g", **{f"f{branch}": 1}),
        basis.configuration(branch, "g", **{f"aB{branch}": 1}),
        basis.configuration(branch, excited),
        basis.configuration(branch, branch),
    )
    return BranchSubspace(
        branch=branch,
        basis=basis,
        configurations=configurations,
        indices=tuple(basis.index(configuration) for configuration in configurations),
    )


@dataclass(frozen=True)
class ZenoDecomposition:
    """
    Eigendecomposition of the atom-cavity-fiber coupling restricted to a branch.

    Vectors are expressed in branch coordinates (phi_1 ... phi_7). The three-fold null space is spanned by the
    columns of `eigenvectors` equal to phi_1, the dark state psi_1 and phi_7, in that order.
    """

    subspace: BranchSubspace
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    projectors: Tuple[Tuple[float, np.ndarray], ...]
    dark_state: np.ndarray

    @property
    def null_projector(self) -> np.ndarray:
        return self.effective_coordinates @ self.effective_coordinates.conj().T

    @property
    def effective_coordinates(self) -> np.ndarray:
        """(phi_1, psi_1, phi_7) as columns, in branch coordinates."""
        coordinates = np.zeros((7, 3), dtype=complex)
        coordinates[0, 0] = 1.0
        coordinates[:, 1] = self.dark_state
        coordinates[6, 2] = 1.0
        return coordinates

    def embed(self, coordinates: np.ndarray) -> np.ndarray:
        """Maps branch coordinates (first axis of length 7) into the full space."""
        vectors = np.zeros((self.subspace.basis.dim,) + np.shape(coordinates)[1:], dtype=complex)
        vectors[list(self.subspace.indices)] = coordinates
        return vectors

    @property
    def effective_basis(self) -> List[np.ndarray]:
        full = self.embed(self.effective_coordinates)
        return [full[:, k] for k in range(3)]


def _group_eigenvalues(eigenvalues: np.ndarray, tolerance: float) -> List[List[int]]:
    groups = [[0]]
    for k in range(1, len(eigenvalues)):
        if eigenvalues[k] - eigenvalues[groups[-1][-1]] > tolerance:
            groups.append([])
        groups[-1].append(k)
    return groups


def zeno_decompose(H_acf: SparseOperator, subspace: BranchSubspace, tolerance: float = 1e-9) -> ZenoDecomposition:
    """
    Numeric eigendecomposition of `H_acf` on the seven branch configurations.

    The dark state is what remains of the null-space projector once phi_1 and phi_7 are removed, normalized with
    <phi_2|psi_1> > 0 (or <phi_4|psi_1> < 0 when the fiber is decoupled).

    Raises:
        ZenoDecompositionError: if the eigensolver fails or the null space is not three-fold with phi_1 and phi_7 in
            it.
    """
    matrix = restrict(H_acf, subspace.states)
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as error:
        raise ZenoDecompositionError(f"eigensolver failed on the {subspace.branch} branch: {error}") from error

    groups = _group_eigenvalues(eigenvalues, tolerance)
    projectors = []
    null_group, null_projector = None, None
    for group in groups:
        vectors = eigenvectors[:, group]
        value = float(np.mean(eigenvalues[group]))
        projectors.append((value, vectors @ vectors.conj().T))
        if abs(value) < tolerance:
            null_group, null_projector = group, projectors[-1][1]
    logger.debug(
        f"{subspace.branch} branch eigenvalue groups: "
        + ", ".join(f"{value:.6g} (x{len(g)})" for (value, _), g in zip(projectors, groups))
    )
    if null_group is None or len(null_group) != 3:
        raise ZenoDecompositionError(
            f"expected a three-fold null space on the {subspace.branch} branch, eigenvalues are {eigenvalues}"
        )

    outer = np.zeros((7, 7), dtype=complex)
    outer[0, 0] = outer[6, 6] = 1.0
    if abs(null_projector[0, 0] - 1) > tolerance or abs(null_projector[6, 6] - 1) > tolerance:
        raise ZenoDecompositionError(f"phi_1 and phi_7 are not null vectors on the {subspace.branch} branch")
    remainder = null_projector - outer
    dark_state = remainder[:, np.argmax(np.linalg.norm(remainder, axis=0))]
    dark_state = dark_state / np.linalg.norm(dark_state)
    anchor = 1 if abs(dark_state[1]) > tolerance else 3
    dark_state = dark_state * np.exp(-1j * np.angle(dark_state[anchor]))
    if anchor == 3:
        dark_state = -dark_state

    eigenvectors = eigenvectors.copy()
    eigenvectors[:, null_group] = np.stack([outer[:, 0], dark_state, outer[:, 6]], axis=1)
    return ZenoDecomposition(
        subspace=subspace,
        matrix=matrix,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        projectors=tuple(projectors),
        dark_state=dark_state,
    )


def effective_hamiltonian(decomposition: ZenoDecomposition, pulses: PulseSet, t: float) -> np.ndarray:
    """
    Laser drive of step 1 projected onto the null space, over (phi_1, psi_1, phi_7).
    """
    basis = decomposition.subspace.basis
    span = decomposition.effective_basis
    drive = pulses.omega_a(t) * atom_a_drive(basis) + pulses.omega_b(t) * atom_b_drive(basis)
    return restrict(drive, span)


def build_effective_model(pulses: PulseSet) -> TimeDependentHamiltonian:
    """
    Three-level model Omega_A1 (|psi_1><phi_1| + h.c.) + Omega_B1 (|psi_1><phi_7| + h.c.) over (phi_1, psi_1, phi_7).
    """
    return three_level_hamiltonian(pulses.omega_a1, pulses.omega_b1, pulses.design.duration, label="H_eff")


def zeno_leakage(trajectory: "Trajectory", decomposition: ZenoDecomposition) -> np.ndarray:
    """
    Population of the branch outside the null space of its coupling, per sample. Other branches do not count.
    """
    indices = np.asarray(decomposition.subspace.indices)
    in_branch = trajectory.populations({"branch": indices})["branch"]
    kept = sum(trajectory.expectation(vector) for vector in decomposition.effective_basis)
    return in_branch - kept
