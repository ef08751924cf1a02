# coding=utf-8
# Copyright 2024 The Fiberqutrit Team.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
import unittest

import numpy as np
import pytest

from fiberqutrit.hilbert import (
    BasisState,
    LevelScheme,
    NonOrthonormalSpanError,
    UnknownLabelError,
    atomic_projector,
    dag,
    enumerate_basis,
    identity,
    mode_annihilation,
    mode_creation,
    restrict,
)
from parameterized import parameterized


class BasisTester(unittest.TestCase):
    @parameterized.expand([("one_photon", 1, 2240), ("two_photons", 2, 7 * 5 * 3**6)])
    def test_dimension(self, test_name, n_max, expected_dim):
        basis = enumerate_basis(LevelScheme(n_max=n_max))
        self.assertEqual(basis.dim, expected_dim)
        self.assertEqual(len(basis), LevelScheme(n_max=n_max).dim)

    def test_index_round_trip(self):
        basis = enumerate_basis(LevelScheme())
        for i, state in enumerate(basis):
            self.assertEqual(basis.index(state), i)

    def test_enumeration_is_duplicate_free_and_stable(self):
        first = enumerate_basis(LevelScheme()).states
        second = enumerate_basis(LevelScheme()).states
        self.assertEqual(len(set(first)), len(first))
        self.assertEqual(first, second)

    def test_configuration(self):
        basis = enumerate_basis(LevelScheme())
        state = basis.configuration("R", "g", aAR=1)
        self.assertEqual(state, BasisState("R", "g", (0, 1, 0, 0, 0, 0)))
        ket = basis.ket("R", "g", aAR=1)
        self.assertEqual(np.count_nonzero(ket), 1)
        self.assertEqual(ket[basis.index(state)], 1.0)

    @parameterized.expand(
        [
            ("bad_level_a", lambda basis: basis.configuration("x", "g")),
            ("bad_level_b", lambda basis: basis.ket("0", "0")),
            ("bad_mode", lambda basis: basis.configuration("0", "g", aCR=1)),
            ("bad_atom", lambda basis: basis.scheme.levels("C")),
        ]
    )
    def test_unknown_labels(self, test_name, build):
        basis = enumerate_basis(LevelScheme())
        with pytest.raises(UnknownLabelError):
            state = build(basis)
            basis.index(state)

    def test_occupation_outside_cutoff(self):
        basis = enumerate_basis(LevelScheme())
        with pytest.raises(ValueError):
            basis.index(basis.configuration("0", "g", fR=2))

    def test_level_scheme_validation(self):
        with pytest.raises(ValueError):
            LevelScheme(atom_b_levels=("g", "g", "L"))
        with pytest.raises(ValueError):
            LevelScheme(n_max=0)

    def test_level_mask(self):
        basis = enumerate_basis(LevelScheme())
        mask = basis.level_mask("A", "R")
        self.assertEqual(mask.sum(), basis.dim // 7)
        self.assertTrue(mask[basis.index(basis.configuration("R", "L", fL=1))])
        self.assertFalse(mask[basis.index(basis.configuration("L", "R"))])

    def test_excitations(self):
        basis = enumerate_basis(LevelScheme())
        excitations = basis.excitations()
        self.assertEqual(excitations[basis.index(basis.configuration("0", "g"))], 0)
        self.assertEqual(excitations[basis.index(basis.configuration("eR", "g"))], 1)
        self.assertEqual(excitations[basis.index(basis.configuration("eL", "eR", aAL=1, fR=1))], 4)


class OperatorTester(unittest.TestCase):
    def setUp(self):
        self.basis = enumerate_basis(LevelScheme(n_max=2))

    def test_atomic_projector(self):
        op = atomic_projector(self.basis, "A", "eR", "0")
        state = op @ self.basis.ket("0", "L", fL=2)
        np.testing.assert_allclose(state, self.basis.ket("eR", "L", fL=2))
        np.testing.assert_allclose(op @ self.basis.ket("1", "L"), 0.0)
        self.assertEqual(op.nnz, self.basis.dim // 7)

    def test_atomic_projector_atom_b(self):
        op = atomic_projector(self.basis, "B", "R", "eR")
        np.testing.assert_allclose(op @ self.basis.ket("L", "eR", aBR=1), self.basis.ket("L", "R", aBR=1))

    def test_mode_ladder(self):
        a = mode_annihilation(self.basis, "aBL")
        np.testing.assert_allclose(a @ self.basis.ket("g", "g", aBL=2), np.sqrt(2) * self.basis.ket("g", "g", aBL=1))
        np.testing.assert_allclose(a @ self.basis.ket("g", "g"), 0.0)
        a_dag = mode_creation(self.basis, "aBL")
        np.testing.assert_allclose(
            a_dag @ self.basis.ket("g", "g", aBL=1), np.sqrt(2) * self.basis.ket("g", "g", aBL=2)
        )
        # Truncated at n_max.
        np.testing.assert_allclose(a_dag @ self.basis.ket("g", "g", aBL=2), 0.0)

    def test_modes_commute(self):
        a = mode_annihilation(self.basis, "fL")
        b = mode_creation(self.basis, "fR")
        self.assertEqual(abs(a @ b - b @ a).max(), 0.0)

    def test_dag(self):
        op = mode_annihilation(self.basis, "aAR")
        self.assertEqual(abs(dag(dag(op)) - op).max(), 0.0)
        dense = np.array([[1, 2j], [0, 1]])
        np.testing.assert_array_equal(dag(dense), np.array([[1, 0], [-2j, 1]]))

    def test_restrict(self):
        span = [self.basis.ket("0", "g"), self.basis.ket("eR", "g")]
        matrix = restrict(identity(self.basis), span)
        np.testing.assert_allclose(matrix, np.eye(2))
        flip = atomic_projector(self.basis, "A", "eR", "0")
        np.testing.assert_allclose(restrict(flip, span), np.array([[0, 0], [1, 0]]))

    def test_restrict_non_orthonormal(self):
        span = [self.basis.ket("0", "g"), (self.basis.ket("0", "g") + self.basis.ket("1", "g")) / np.sqrt(2)]
        with pytest.raises(NonOrthonormalSpanError) as error:
            restrict(identity(self.basis), span)
        self.assertAlmostEqual(error.value.residual, 1 / np.sqrt(2))
