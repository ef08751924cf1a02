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
import json
import os
import tempfile
import unittest
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from fiberqutrit.dynamics import integrate_schrodinger
from fiberqutrit.model import DriveTerm, TimeDependentHamiltonian
from fiberqutrit.protocol import (
    ProtocolSpec,
    SweepResult,
    build_protocol_system,
    emit_figures,
    phase_fitted_fidelity,
    pulse_timeline,
    run_protocol,
    run_step1,
    run_step2,
    step2_propagator,
    sweep,
    zeno_check,
)
from fiberqutrit.zeno import zeno_leakage
from parameterized import parameterized
from transformers.testing_utils import slow

from .utils import OPEN_CHECKPOINT_FIDELITY, OPEN_CHECKPOINT_FITTED_FIDELITY, fast_spec, phase_distance


class ProtocolSpecTester(unittest.TestCase):
    def test_defaults(self):
        spec = ProtocolSpec.default()
        self.assertEqual(spec.step2_duration, 2 * spec.params.t_f)
        self.assertEqual(spec.initial_state, "superposition")
        self.assertFalse(spec.open_system)
        self.assertEqual(spec.design.t_f, spec.params.t_f)

    @parameterized.expand(
        [
            ("initial_state", {"initial_state": "excited"}),
            ("step2_mode", {"step2_mode": "stretched"}),
            ("step2_duration", {"step2_duration": -1.0}),
        ]
    )
    def test_validation(self, test_name, kwargs):
        with pytest.raises(ValueError):
            ProtocolSpec.default(**kwargs)

    def test_with_params(self):
        spec = ProtocolSpec.default().with_params(t_f=30.0, eta=0.5)
        self.assertEqual(spec.params.eta, 0.5)
        self.assertEqual(spec.design.t_f, 30.0)
        self.assertEqual(spec.design.duration, 30.0)

    def test_with_params_new_winding_number(self):
        spec = ProtocolSpec.default().with_params(winding_number=2)
        self.assertAlmostEqual(spec.params.epsilon, np.arcsin(1 / 8), places=12)
        self.assertEqual(spec.design.epsilon, spec.params.epsilon)
        self.assertEqual(spec.design.winding_number, 2)

        pinned = ProtocolSpec.default().with_params(winding_number=2, epsilon=0.3)
        self.assertEqual(pinned.params.epsilon, 0.3)
        self.assertEqual(pinned.design.epsilon, 0.3)

    def test_initial_state_is_normalized(self):
        for initial_state in ("superposition", "branch_R", "branch_L", "ground"):
            system = build_protocol_system(fast_spec(initial_state=initial_state))
            self.assertAlmostEqual(np.linalg.norm(system.initial_state()), 1.0, places=14)


class StepTester(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.spec = fast_spec()
        cls.system = build_protocol_system(cls.spec)
        cls.step1 = run_step1(cls.spec, cls.system)

    def test_step1_swaps_branch_populations(self):
        observables = self.step1.trajectory.observables
        for branch in ("R", "L"):
            self.assertAlmostEqual(observables[f"P_phi1_{branch}"][0], 1 / 3, places=12)
            self.assertAlmostEqual(observables[f"P_phi7_{branch}"][0], 0.0, places=12)
            self.assertGreaterEqual(3 * observables[f"P_phi7_{branch}"][-1], 0.98)
            self.assertLess(3 * observables[f"P_phi1_{branch}"][-1], 0.02)
        self.assertGreaterEqual(self.step1.report["step1_fidelity"], 0.98)

    def test_step1_leaves_ground_untouched(self):
        np.testing.assert_allclose(self.step1.trajectory.observables["P_gg"], 1 / 3, atol=1e-10)

    def test_step1_leakage(self):
        observables = self.step1.trajectory.observables
        for branch in ("R", "L"):
            leakage = observables[f"leakage_{branch}"]
            self.assertLess(abs(leakage[0]), 1e-12)
            self.assertTrue(np.all(leakage > -1e-10))
            self.assertLess(leakage[-1], 0.01)
            self.assertLessEqual(self.step1.report["peak_leakage"][branch], 1 / 3 + 1e-12)

    def test_step1_linearity(self):
        superposition = self.step1.trajectory.full_state()
        parts = []
        for initial_state in ("branch_R", "branch_L", "ground"):
            spec = replace(self.spec, initial_state=initial_state)
            parts.append(run_step1(spec, replace(self.system, spec=spec)).trajectory.full_state())
        np.testing.assert_allclose(superposition, sum(parts) / np.sqrt(3), atol=1e-8)

    def test_longer_step1_raises_transfer(self):
        longer = self.spec.with_params(t_f=2 * self.spec.params.t_f)
        step1 = run_step1(longer)
        observables = step1.trajectory.observables
        self.assertGreater(observables["P_phi7_R"][-1], self.step1.trajectory.observables["P_phi7_R"][-1])

    def test_longer_step1_reduces_peak_leakage(self):
        spec = replace(self.spec, initial_state="branch_R")
        peak_leakage = [run_step1(spec.with_params(t_f=t_f)).report["peak_leakage"]["R"] for t_f in (15.0, 30.0, 60.0)]
        self.assertGreater(peak_leakage[0], peak_leakage[1])
        self.assertGreater(peak_leakage[1], peak_leakage[2])
        self.assertGreater(peak_leakage[2], 0.0)

    def test_no_leakage_without_pulses(self):
        def switched_off(t):
            return np.zeros_like(np.asarray(t, dtype=float))

        h1 = self.system.h1
        idle = TimeDependentHamiltonian(
            static_part=h1.static_part,
            drive_terms=tuple(DriveTerm(term.operator, switched_off, term.label) for term in h1.drive_terms),
            duration=h1.duration,
        )
        initial = self.system.initial_state()
        span = np.flatnonzero(np.abs(initial) > 0)
        trajectory = integrate_schrodinger(idle, initial[span], span, self.spec.integrator)
        for decomposition in self.system.decompositions.values():
            np.testing.assert_allclose(zeno_leakage(trajectory, decomposition), 0.0, atol=1e-12)

    def test_step2_propagator(self):
        propagator = step2_propagator(self.system)
        self.assertGreaterEqual(abs(propagator[0, 0]) ** 2, 0.999)
        self.assertLess(phase_distance(np.angle(propagator[0, 0]), np.pi), 0.01)
        self.assertGreaterEqual(abs(propagator[2, 2]) ** 2, 0.999)
        self.assertLess(phase_distance(np.angle(propagator[2, 2]), np.pi), 0.01)

    def test_step2_on_ideal_input(self):
        step2 = run_step2(self.spec, system=self.system)
        observables = step2.trajectory.observables
        np.testing.assert_allclose(observables["P_L_A"], 1 / 3, atol=1e-12)
        self.assertAlmostEqual(observables["P_g_A"][-1], 1 / 3, places=3)
        self.assertAlmostEqual(observables["P_R_A"][-1], 1 / 3, places=3)
        self.assertEqual(len(step2.report["step2_propagator_real"]), 3)


class ProtocolTester(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.spec = fast_spec()
        cls.report, cls.trajectory = run_protocol(cls.spec)

    def test_branch_magnitudes(self):
        for label in ("RR", "LL", "gg"):
            self.assertAlmostEqual(self.report.branch_magnitudes[label], 1 / np.sqrt(3), delta=0.01)

    def test_fidelities(self):
        self.assertGreaterEqual(self.report.fitted_fidelity, 0.96)
        self.assertLessEqual(self.report.fitted_fidelity, 1.0 + 1e-12)
        self.assertLess(self.report.fidelity, self.report.fitted_fidelity)
        self.assertGreaterEqual(self.report.fidelity, 0.0)

    def test_relative_phases(self):
        # Step 2 flips |R>_A but not |L>_A, and the two branches of step 1 are mirror images.
        self.assertLess(phase_distance(self.report.relative_phases["LL"], np.pi), 1e-3)
        self.assertLess(phase_distance(self.report.fitted_phases["LL"], self.report.relative_phases["LL"]), 1e-3)

    def test_report_is_serializable(self):
        payload = json.loads(json.dumps(self.report.to_dict()))
        self.assertIn("step1_fidelity", payload["details"])
        self.assertIn("step2_propagator_imag", payload["details"])
        self.assertFalse(payload["details"]["open_system"])

    def test_open_system_without_decay_matches_closed(self):
        report, trajectory = run_protocol(replace(self.spec, open_system=True))
        self.assertTrue(trajectory.is_density)
        self.assertAlmostEqual(report.fidelity, self.report.fidelity, delta=1e-6)
        self.assertAlmostEqual(report.fitted_fidelity, self.report.fitted_fidelity, delta=1e-6)


class PhaseFitTester(unittest.TestCase):
    def test_recovers_local_phases(self):
        vector = np.array([1.0, -1.0, 1j]) / np.sqrt(3)
        fitted, phases = phase_fitted_fidelity(np.outer(vector, vector.conj()))
        self.assertAlmostEqual(fitted, 1.0, places=8)
        self.assertLess(phase_distance(phases[0], np.pi), 1e-4)
        self.assertLess(phase_distance(phases[1], np.pi / 2), 1e-4)

    def test_mixed_block(self):
        fitted, _ = phase_fitted_fidelity(np.eye(3) / 3)
        self.assertAlmostEqual(fitted, 1 / 3, places=8)


class SweepTester(unittest.TestCase):
    def test_monotonicity_report(self):
        grid = np.array([[[0.9, 0.8], [0.85, 0.7]]])
        result = SweepResult(
            etas=np.array([1.0]),
            gammas=np.array([0.0, 0.1]),
            kappas=np.array([0.0, 1.0]),
            fidelity=grid,
            fitted_fidelity=grid.copy(),
            runtime=np.zeros_like(grid),
            closed_fidelity=np.array([0.9]),
            closed_fitted_fidelity=np.array([0.88]),
        )
        report = result.monotonicity_report()
        self.assertTrue(report["raw"]["non_increasing_in_gamma"])
        self.assertTrue(report["raw"]["non_increasing_in_kappa"])
        self.assertTrue(report["raw"]["bounded_by_closed"])
        self.assertFalse(report["fitted"]["bounded_by_closed"])
        self.assertEqual(report["failed_points"], 0)
        frame = result.to_dataframe()
        self.assertEqual(list(frame.columns), ["eta", "gamma", "kappa", "fidelity", "fitted_fidelity"])
        self.assertEqual(frame["fidelity"].tolist(), [0.9, 0.8, 0.85, 0.7])

    def test_failed_points_are_recorded(self):
        spec = fast_spec()
        result = sweep(spec, gammas=[0.0], kappas=[0.0], etas=[0.0, 1.0])
        self.assertTrue(np.isnan(result.fidelity[0, 0, 0]))
        self.assertTrue(np.isnan(result.closed_fidelity[0]))
        self.assertIn((0.0, 0.0, 0.0), result.errors)
        self.assertFalse(np.isnan(result.fidelity[1, 0, 0]))

    def test_decay_free_point_matches_closed_system(self):
        spec = fast_spec()
        result = sweep(spec, gammas=[0.0], kappas=[0.0])
        self.assertAlmostEqual(result.fidelity[0, 0, 0], result.closed_fidelity[0], delta=1e-6)
        self.assertAlmostEqual(result.fitted_fidelity[0, 0, 0], result.closed_fitted_fidelity[0], delta=1e-6)

    def test_deterministic_csv(self):
        spec = fast_spec()
        with tempfile.TemporaryDirectory() as tmp_dir:
            contents = []
            for run in range(2):
                path = os.path.join(tmp_dir, f"sweep_{run}.csv")
                sweep(spec, gammas=[0.0], kappas=[0.0]).to_csv(path)
                with open(path, "rb") as fp:
                    contents.append(fp.read())
        self.assertEqual(contents[0], contents[1])

    @slow
    def test_open_system_grid(self):
        spec = fast_spec()
        result = sweep(spec, gammas=[0.0, 0.05, 0.1], kappas=[0.0, 0.5, 1.0])
        self.assertEqual(len(result.errors), 0)
        self.assertTrue(np.all((result.fidelity >= 0) & (result.fidelity <= 1)))
        report = result.monotonicity_report()
        self.assertTrue(report["fitted"]["non_increasing_in_gamma"])
        self.assertTrue(report["fitted"]["non_increasing_in_kappa"])
        self.assertTrue(report["fitted"]["bounded_by_closed"])

    @slow
    def test_open_system_diagnostics(self):
        spec = fast_spec().with_params(gamma=0.1, kappa=1.0)
        report, _ = run_protocol(replace(spec, open_system=True))
        for key in ("step1_diagnostics", "step2_diagnostics"):
            diagnostics = report.details[key]
            self.assertLessEqual(diagnostics["trace_drift"], 1e-6)
            self.assertLessEqual(diagnostics["hermiticity_drift"], 1e-8)
            self.assertGreaterEqual(diagnostics["min_eigenvalue"], -1e-6)
        closed, _ = run_protocol(fast_spec())
        self.assertLess(report.fitted_fidelity, closed.fitted_fidelity)
        self.assertAlmostEqual(report.fidelity, OPEN_CHECKPOINT_FIDELITY, delta=0.02)
        self.assertAlmostEqual(report.fitted_fidelity, OPEN_CHECKPOINT_FITTED_FIDELITY, delta=0.02)


class FigureDataTester(unittest.TestCase):
    def test_pulse_timeline(self):
        system = build_protocol_system(fast_spec())
        frame = pulse_timeline(system.pulses, samples=301)
        self.assertEqual(
            list(frame.columns), ["t", "Omega_A1", "Omega_B1", "Omega_A", "Omega_B", "Omega_g", "Omega_R"]
        )
        self.assertEqual(frame["Omega_A1"].iloc[0], 0.0)
        self.assertAlmostEqual(frame["t"].iloc[-1], 45.0)
        before = frame["t"] < 15.0
        after = frame["t"] > 15.0
        self.assertTrue((frame.loc[before, "Omega_g"] == 0).all())
        self.assertTrue((frame.loc[after, "Omega_A"] == 0).all())

    def test_zeno_check(self):
        summary, frame = zeno_check(fast_spec())
        np.testing.assert_allclose(sorted(summary["R"]["eigenvalues"])[2:5], 0.0, atol=1e-12)
        self.assertEqual(list(frame.columns), ["t", "leakage_R", "P_phi1_R", "P_phi7_R"])
        self.assertLess(frame["leakage_R"].iloc[0], 1e-12)

    @slow
    def test_emit_figures(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            paths = emit_figures(fast_spec(), tmp_dir, gammas=[0.0, 0.1], kappas=[0.0, 1.0])
            frames = {name: pd.read_csv(path) for name, path in paths.items()}
        self.assertEqual(frames["fig3"]["Omega_A1"].iloc[0], 0.0)
        fig4a = frames["fig4a"]
        self.assertEqual(
            list(fig4a.columns),
            ["t", "P_phi1_eff", "P_phi7_eff", "P_phi1_R", "P_phi7_R", "leakage_R", "P_phi1_L", "P_phi7_L"],
        )
        self.assertAlmostEqual(fig4a["P_phi1_eff"].iloc[0], 1.0, places=8)
        self.assertAlmostEqual(fig4a["P_phi7_eff"].iloc[-1], 1.0, places=6)
        self.assertGreaterEqual(fig4a["P_phi7_R"].iloc[-1], 0.98)
        difference = np.sign(fig4a["P_phi1_eff"] - fig4a["P_phi7_eff"]).to_numpy()
        difference = difference[difference != 0]
        self.assertEqual(np.count_nonzero(np.diff(difference)), 1)
        self.assertAlmostEqual(frames["fig4b"]["t"].iloc[0], 15.0)
        self.assertEqual(list(frames["fig4b"].columns), ["t", "P_g_A", "P_eR_A", "P_R_A"])
        fig5 = frames["fig5"]
        self.assertEqual(list(fig5.columns), ["gamma", "kappa", "fidelity", "fitted_fidelity"])
        self.assertEqual(len(fig5), 4)
