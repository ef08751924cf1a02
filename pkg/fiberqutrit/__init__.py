# flake8: noqa
# There's no way to ignore "F401 '...' imported but unused" warnings in this
# module, but to preserve other warnings. So, don't check this module at all.

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

from .dynamics import (
    IntegrationError,
    IntegratorConfig,
    Trajectory,
    convergence_order,
    fidelity,
    integrate_lindblad,
    integrate_schrodinger,
    populations,
    reachable_support,
)
from .hilbert import (
    Basis,
    BasisState,
    LevelScheme,
    NonOrthonormalSpanError,
    UnknownLabelError,
    atomic_projector,
    dag,
    enumerate_basis,
    mode_annihilation,
    mode_creation,
    restrict,
)
from .invariant import (
    PulseDesign,
    PulseDomainError,
    PulseSchedule,
    PulseSet,
    StencilDomainError,
    analytic_final_state,
    build_pulse_set,
    choose_epsilon,
    effective_pulses,
    invariant_eigenstates,
    invariant_matrix,
    invariant_residual,
    lr_phase,
    lr_phases,
    lr_solution,
    physical_pulses,
    step2_pulses,
)
from .model import (
    CollapseOperator,
    SystemParams,
    TimeDependentHamiltonian,
    build_collapse_operators,
    build_H1,
    build_H2,
    build_H_acf,
)
from .protocol import (
    ProtocolReport,
    ProtocolSpec,
    SweepResult,
    build_protocol_system,
    emit_figures,
    run_protocol,
    run_step1,
    run_step2,
    sweep,
)
from .protocol_configuration import ProtocolConfig
from .version import __version__
from .zeno import (
    BranchSubspace,
    ZenoDecomposition,
    ZenoDecompositionError,
    branch_subspace,
    build_effective_model,
    effective_hamiltonian,
    zeno_decompose,
    zeno_leakage,
)
