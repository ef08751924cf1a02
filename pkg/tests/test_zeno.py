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

from fiberqutrit.dynamics import IntegratorConfig, integrate_schrodinger
from fiberqutrit.hilbert import enumerate_basis, zero_operator
from fiberqutrit.invariant import PulseDesign, build_pulse_set, effective_hamiltonian_matrix, lr_solution
from fiberqutrit.model import SystemParams, build_H1, build_H_acf
from fiberqutrit.zeno import (
    ZenoDecompositionError,
    branch_subspace,
    build_effective_model,
    effective_hamiltonian,
    zeno_decompose,
    zeno_leakage,
)
from parameterized import parameterized

from .utils import DARK_STATE_G_EQ_ETA, FAST_STEPS, ZENO_SPECTRUM_G_EQ_ETA


class BranchSubspaceTester(unittest.TestCase):
    def test_configurations(self):
        basis = enumerate_basis(SystemParams().level_scheme())
        subspace = branch_subspace(basis, "L")
        self.assertEqual(len(subspace), 7)
        self.assertEqual(subspace.configurations[0], basis.configuration("1", "g"))
        self.assertEqual(subspace.configurations[3], basis.configuration("L", "g", fL=1))
        self.assertEqual(subspace.configurations[6], basis.configuration("L", "L"))
        self.assertEqual(len(set(subspace.indices)), 7)

    def test_unknown_branch(self):
        basis = enumerate_basis(SystemParams().level_scheme())
        with pytest.raises(ValueError):
            branch_subspace(basis, "X")


class ZenoDecompositionTester(unittest.TestCase):
    @parameterized.expand([("R",), ("L",)])
    def test_spectrum_and_dark_state(self, branch):
        params = SystemParams()
        basis = enumerate_basis(params.level_scheme())
        decomposition = zeno_decompose(build_H_acf(params, basis), branch_subspace(basis, branch))
        np.testing.assert_allclose(decomposition.eigenvalues, ZENO_SPECTRUM_G_EQ_ETA, atol=1e-12)
        np.testing.assert_allclose(decomposition.dark_state, DARK_STATE_G_EQ_ETA, atol=1e-12)

    @parameterized.expand([("weak_fiber", 1.0, 0.5), ("strong_fiber", 1.0, 2.0), ("weak_cavity", 0.4, 1.0)])
    def test_dark_state_general_couplings(self, test_name, g, eta):
        params = SystemParams(g=g, eta=eta)
        basis = enumerate_basis(params.level_scheme())
        decomposition = zeno_decompose(build_H_acf(params, basis), branch_subspace(basis, "R"))
        expected = np.array([0, eta, 0, -g, 0, eta, 0]) / params.collective_coupling
        np.testing.assert_allclose(decomposition.dark_state, expected, atol=1e-12)
        self.assertEqual(int(np.sum(np.abs(decomposition.eigenvalues) < 1e-9)), 3)
        self.assertAlmostEqual(np.max(decomposition.eigenvalues), np.sqrt(g**2 + 2 * eta**2), places=12)

    def test_decoupled_fiber(self):
        params = SystemParams(eta=0.0)
        basis = enumerate_basis(params.level_scheme())
        decomposition = zeno_decompose(build_H_acf(params, basis), branch_subspace(basis, "R"))
        np.testing.assert_allclose(decomposition.dark_state, [0, 0, 0, -1, 0, 0, 0], atol=1e-12)

    def test_projectors(self):
        params = SystemParams()
        basis = enumerate_basis(params.level_scheme())
        decomposition = zeno_decompose(build_H_acf(params, basis), branch_subspace(basis, "R"))
        total = sum(projector for _, projector in decomposition.projectors)
        np.testing.assert_allclose(total, np.eye(7), atol=1e-12)
        self.assertEqual(len(decomposition.projectors), 5)
        _, null_projector = min(decomposition.projectors, key=lambda pair: abs(pair[0]))
        np.testing.assert_allclose(decomposition.null_projector, null_projector, atol=1e-12)
        coordinates = decomposition.effective_coordinates
        np.testing.assert_allclose(decomposition.matrix @ coordinates, 0.0, atol=1e-12)
        full = decomposition.effective_basis
        self.assertEqual(len(full), 3)
        self.assertEqual(full[0][basis.index(basis.configuration("0", "g"))], 1.0)

    def test_missing_null_space(self):
        basis = enumerate_basis(SystemParams().level_scheme())
        with pytest.raises(ZenoDecompositionError):
            zeno_decompose(zero_operator(basis), branch_subspace(basis, "R"))


class EffectiveModelTester(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.params = SystemParams(eta=0.7)
        cls.basis = enumerate_basis(cls.params.level_scheme())
        cls.pulses = build_pulse_set(PulseDesign.from_params(cls.params), cls.params)

    @parameterized.expand([("R",), ("L",)])
    def test_projected_drive(self, branch):
        decomposition = zeno_decompose(build_H_acf(self.params, self.basis), branch_subspace(self.basis, branch))
        for t in (0.0, 4.0, 11.0, 15.0):
            expected = effective_hamiltonian_matrix(self.pulses.omega_a1(t), self.pulses.omega_b1(t))
            np.testing.assert_allclose(effective_hamiltonian(decomposition, self.pulses, t), expected, atol=1e-12)

    def test_effective_transfer(self):
        model = build_effective_model(self.pulses)
        trajectory = integrate_schrodinger(model, np.array([1.0, 0.0, 0.0], dtype=complex))
        final = trajectory.final_state
        self.assertGreaterEqual(abs(final[2]) ** 2, 1 - 1e-8)
        self.assertLess(abs(final[2] + 1), 1e-4)
        oracle = lr_solution(self.pulses.design, np.array([1.0, 0.0, 0.0]), trajectory.times)
        np.testing.assert_allclose(trajectory.states, oracle, atol=1e-8)

    def test_leakage_of_full_model(self):
        h1 = build_H1(self.params, self.pulses, self.basis)
        subspace = branch_subspace(self.basis, "R")
        decomposition = zeno_decompose(h1.static_part, subspace)
        config = IntegratorConfig.for_duration(self.params.t_f, steps=FAST_STEPS, sample_every=20)
        trajectory = integrate_schrodinger(h1, np.array([1.0], dtype=complex), [subspace.indices[0]], config)
        leakage = zeno_leakage(trajectory, decomposition)
        self.assertEqual(leakage.shape, trajectory.times.shape)
        self.assertLess(abs(leakage[0]), 1e-12)
        self.assertTrue(np.all(leakage > -1e-10))
        self.assertLess(np.max(leakage), 0.5)
