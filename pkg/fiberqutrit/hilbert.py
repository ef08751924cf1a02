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
Truncated tensor-product Hilbert space of the two-atom, two-cavity, one-fiber setup and the sparse operator algebra
built on top of it.
"""

from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from optimum.utils import logging


logger = logging.get_logger(__name__)

ATOM_A_LEVELS = ("0", "1", "g", "L", "R", "eL", "eR")
ATOM_B_LEVELS = ("g", "L", "R", "eL", "eR")
MODES = ("aAL", "aAR", "aBL", "aBR", "fL", "fR")
EXCITED_LEVELS = ("eL", "eR")

# All operators are complex CSR matrices over the enumerated basis.
SparseOperator = sp.csr_matrix


class UnknownLabelError(ValueError):
    pass


class NonOrthonormalSpanError(ValueError):
    def __init__(self, residual: float, tolerance: float):
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"span is not orthonormal: max |<v_i|v_j> - delta_ij| = {residual:.3e} exceeds tolerance {tolerance:.1e}"
        )


@dataclass(frozen=True)
class LevelScheme:
    atom_a_levels: Tuple[str, ...] = ATOM_A_LEVELS
    atom_b_levels: Tuple[str, ...] = ATOM_B_LEVELS
    modes: Tuple[str, ...] = MODES
    n_max: int = 1

    def __post_init__(self):
        for name in ("atom_a_levels", "atom_b_levels", "modes"):
            labels = getattr(self, name)
            if len(set(labels)) != len(labels):
                raise ValueError(f"{name} contains duplicate labels: {labels}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be at least 1, got {self.n_max}")

    def levels(self, atom: str) -> Tuple[str, ...]:
        if atom == "A":
            return self.atom_a_levels
        if atom == "B":
            return self.atom_b_levels
        raise UnknownLabelError(f"unknown atom {atom!r}, expected 'A' or 'B'")

    def level_index(self, atom: str, label: str) -> int:
        levels = self.levels(atom)
        if label not in levels:
            raise UnknownLabelError(f"unknown level {label!r} for atom {atom}, expected one of {', '.join(levels)}")
        return levels.index(label)

    def mode_index(self, mode: str) -> int:
        if mode not in self.modes:
            raise UnknownLabelError(f"unknown mode {mode!r}, expected one of {', '.join(self.modes)}")
        return self.modes.index(mode)

    @property
    def dim(self) -> int:
        return len(self.atom_a_levels) * len(self.atom_b_levels) * (self.n_max + 1) ** len(self.modes)


@dataclass(frozen=True)
class BasisState:
    atom_a: str
    atom_b: str
    occupations: Tuple[int, ...]


class Basis:
    """
    Lexicographic enumeration of every (atom A level, atom B level, occupation numbers) configuration.

    The ordering follows the declared field order of `LevelScheme`, last mode fastest, so the index of a configuration
    is a mixed-radix number and `index(states[i]) == i` holds by construction. Instances are read-only and can be
    shared between worker processes.
    """

    def __init__(self, scheme: LevelScheme):
        self.scheme = scheme
        self.shape = (len(scheme.atom_a_levels), len(scheme.atom_b_levels)) + (scheme.n_max + 1,) * len(scheme.modes)
        self.strides = np.array([int(np.prod(self.shape[k + 1 :])) for k in range(len(self.shape))], dtype=np.int64)
        digits = np.indices(self.shape).reshape(len(self.shape), -1).T
        digits.setflags(write=False)
        self.digits = digits
        self._states = None

    @property
    def dim(self) -> int:
        return self.digits.shape[0]

    def __len__(self) -> int:
        return self.dim

    def __getitem__(self, index: int) -> BasisState:
        row = self.digits[index]
        return BasisState(
            atom_a=self.scheme.atom_a_levels[row[0]],
            atom_b=self.scheme.atom_b_levels[row[1]],
            occupations=tuple(int(n) for n in row[2:]),
        )

    def __iter__(self) -> Iterator[BasisState]:
        return iter(self.states)

    @property
    def states(self) -> Tuple[BasisState, ...]:
        if self._states is None:
            self._states = tuple(self[i] for i in range(self.dim))
        return self._states

    def index(self, state: BasisState) -> int:
        if len(state.occupations) != len(self.scheme.modes):
            raise ValueError(
                f"expected {len(self.scheme.modes)} occupation numbers, got {state.occupations}"
            )
        for mode, n in zip(self.scheme.modes, state.occupations):
            if not 0 <= n <= self.scheme.n_max:
                raise ValueError(f"occupation {n} of mode {mode} is outside [0, {self.scheme.n_max}]")
        row = (
            self.scheme.level_index("A", state.atom_a),
            self.scheme.level_index("B", state.atom_b),
        ) + tuple(state.occupations)
        return int(np.dot(row, self.strides))

    def configuration(self, atom_a: str, atom_b: str, **photons: int) -> BasisState:
        """
        Builds a `BasisState` from level labels and keyword photon numbers, e.g. `configuration("R", "g", aAR=1)`.
        """
        occupations = [0] * len(self.scheme.modes)
        for mode, n in photons.items():
            occupations[self.scheme.mode_index(mode)] = n
        return BasisState(atom_a=atom_a, atom_b=atom_b, occupations=tuple(occupations))

    def basis_vector(self, index: int) -> np.ndarray:
        vector = np.zeros(self.dim, dtype=complex)
        vector[index] = 1.0
        return vector

    def ket(self, atom_a: str, atom_b: str, **photons: int) -> np.ndarray:
        return self.basis_vector(self.index(self.configuration(atom_a, atom_b, **photons)))

    def level_mask(self, atom: str, label: str) -> np.ndarray:
        position = 0 if atom == "A" else 1
        return self.digits[:, position] == self.scheme.level_index(atom, label)

    def excitations(self) -> np.ndarray:
        """Photon number plus the number of atoms sitting in an excited level, per basis state."""
        count = self.digits[:, 2:].sum(axis=1)
        for atom in ("A", "B"):
            for label in EXCITED_LEVELS:
                count = count + self.level_mask(atom, label)
        return count


def enumerate_basis(scheme: LevelScheme) -> Basis:
    basis = Basis(scheme)
    logger.debug(f"Enumerated {basis.dim} basis states with n_max={scheme.n_max}")
    return basis


def dag(op: Union[sp.spmatrix, np.ndarray]) -> Union[SparseOperator, np.ndarray]:
    if sp.issparse(op):
        return op.conj().T.tocsr()
    return np.asarray(op).conj().T


def identity(basis: Basis) -> SparseOperator:
    return sp.identity(basis.dim, dtype=complex, format="csr")


def zero_operator(basis: Basis) -> SparseOperator:
    return sp.csr_matrix((basis.dim, basis.dim), dtype=complex)


def atomic_projector(basis: Basis, atom: str, to: str, from_: str) -> SparseOperator:
    """
    Transition operator |to><from_| on one atom, identity on every other factor.
    """
    position = 0 if atom == "A" else 1
    to_index = basis.scheme.level_index(atom, to)
    from_index = basis.scheme.level_index(atom, from_)
    cols = np.flatnonzero(basis.digits[:, position] == from_index)
    rows = cols + (to_index - from_index) * basis.strides[position]
    data = np.ones(cols.size, dtype=complex)
    return sp.csr_matrix((data, (rows, cols)), shape=(basis.dim, basis.dim))


def mode_annihilation(basis: Basis, mode: str) -> SparseOperator:
    position = 2 + basis.scheme.mode_index(mode)
    occupation = basis.digits[:, position]
    cols = np.flatnonzero(occupation > 0)
    rows = cols - basis.strides[position]
    data = np.sqrt(occupation[cols]).astype(complex)
    return sp.csr_matrix((data, (rows, cols)), shape=(basis.dim, basis.dim))


def mode_creation(basis: Basis, mode: str) -> SparseOperator:
    return dag(mode_annihilation(basis, mode))


def restrict(
    op: Union[sp.spmatrix, np.ndarray], span: Sequence[np.ndarray], tolerance: float = 1e-10
) -> np.ndarray:
    """
    Matrix of `op` on an orthonormal set of vectors: M[i, j] = <span_i| op |span_j>.

    Raises:
        NonOrthonormalSpanError: if the Gram matrix of `span` deviates from the identity by more than `tolerance`.
    """
    vectors = np.column_stack([np.asarray(v, dtype=complex) for v in span])
    gram = vectors.conj().T @ vectors
    residual = float(np.max(np.abs(gram - np.eye(vectors.shape[1]))))
    if residual > tolerance:
        raise NonOrthonormalSpanError(residual, tolerance)
    return vectors.conj().T @ np.asarray(op @ vectors)
