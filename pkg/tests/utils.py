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

import numpy as np

from fiberqutrit import IntegratorConfig, ProtocolSpec, SystemParams


# 4000 steps over t_f keep the full-model runs to a few seconds.
FAST_STEPS = 4000

DEFAULT_T_F = 15.0
DEFAULT_EPSILON = float(np.arcsin(0.25))

# phi_1 ... phi_7 coordinates of the dark state for g = eta = 1.
DARK_STATE_G_EQ_ETA = np.array([0, 1, 0, -1, 0, 1, 0], dtype=complex) / np.sqrt(3)

ZENO_SPECTRUM_G_EQ_ETA = np.array([-np.sqrt(3), -1.0, 0.0, 0.0, 0.0, 1.0, np.sqrt(3)])


def fast_spec(**kwargs) -> ProtocolSpec:
    params = kwargs.pop("params", SystemParams())
    integrator = kwargs.pop("integrator", IntegratorConfig.for_duration(params.t_f, steps=FAST_STEPS))
    return ProtocolSpec.default(params=params, integrator=integrator, **kwargs)


def phase_distance(angle: float, target: float) -> float:
    """Distance between two angles on the circle."""
    return float(np.abs(np.angle(np.exp(1j * (angle - target)))))

# Protocol at gamma = 0.1, kappa = 1, eta = 1 through the master equation.
OPEN_CHECKPOINT_FIDELITY = 0.133
OPEN_CHECKPOINT_FITTED_FIDELITY = 0.140
