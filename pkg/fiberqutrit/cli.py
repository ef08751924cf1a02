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
Command-line entry point. Every command prints one JSON report on stdout and writes its CSV files under `--out`.
"""

import json
import os
import sys
from dataclasses import replace
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from optimum.utils import logging
from transformers import HfArgumentParser

from .dynamics import CSV_FLOAT_FORMAT
from .protocol import (
    ProtocolSpec,
    build_protocol_system,
    emit_figures,
    pulse_timeline,
    run_protocol,
    run_step1,
    run_step2,
    sweep,
    zeno_check,
)
from .protocol_args import COMMANDS, ProtocolArguments


logger = logging.get_logger(__name__)

DEFAULT_GAMMAS = np.linspace(0.0, 0.1, 5)
DEFAULT_KAPPAS = np.linspace(0.0, 1.0, 5)


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _output_path(args: ProtocolArguments, name: str) -> Optional[str]:
    if args.out is None:
        return None
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _spectrum(spec: ProtocolSpec, args: ProtocolArguments) -> Dict[str, Any]:
    system = build_protocol_system(replace(spec, open_system=False))
    report = {"collective_coupling": spec.params.collective_coupling, "dim": system.basis.dim}
    for branch, decomposition in system.decompositions.items():
        report[branch] = {
            "eigenvalues": decomposition.eigenvalues,
            "dark_state": decomposition.dark_state.real,
        }
    return report


def _zeno_check(spec: ProtocolSpec, args: ProtocolArguments) -> Dict[str, Any]:
    summary, frame = zeno_check(spec)
    summary["peak_leakage_R"] = float(frame["leakage_R"].max())
    summary["final_leakage_R"] = float(frame["leakage_R"].iloc[-1])
    path = _output_path(args, "zeno_check.csv")
    if path is not None:
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        summary["csv"] = path
    return summary


def _pulses(spec: ProtocolSpec, args: ProtocolArguments) -> Dict[str, Any]:
    system = build_protocol_system(replace(spec, open_system=False))
    pulses = system.pulses
    report = {
        "epsilon": spec.design.epsilon,
        "t_f": pulses.step1_duration,
        "step2_duration": pulses.step2_duration,
        "amplitudes": {
            schedule.name: schedule.amplitude
            for schedule in (
                pulses.omega_a1,
                pulses.omega_b1,
                pulses.omega_a,
                pulses.omega_b,
                pulses.omega_g,
                pulses.omega_r,
            )
        },
    }
    path = _output_path(args, "fig3.csv")
    if path is not None:
        pulse_timeline(pulses, args.samples).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        report["csv"] = path
    return report


def _step1(spec: ProtocolSpec, args: ProtocolArguments) -> Dict[str, Any]:
    result = run_step1(spec)
    path = _output_path(args, "step1.csv")
    if path is not None:
        result.trajectory.to_csv(path)
        result.report["csv"] = path
    return result.report


def _step2(spec: ProtocolSpec, args: ProtocolArguments) -> Dict[str, Any]:
    result = run_step2(spec)
    path = _output_path(args, "step2.csv")
    if path is not None:
        result.trajectory.to_csv(path, time_offset=spec.params.t_f)
        result.report["csv"] = path
    return result.report


def _protocol(spec: ProtocolSpec, args: ProtocolArguments) -> Dict[str, Any]:
    report, trajectory = run_protocol(spec)
    output = report.to_dict()
    path = _output_path(args, "protocol.csv")
    if path is not None:
        trajectory.to_csv(path, time_offset=spec.params.t_f)
        output["csv"] = path
    return output


def _sweep(spec: ProtocolSpec, args: ProtocolArguments) -> Dict[str, Any]:
    gammas = DEFAULT_GAMMAS if args.gammas is None else args.gammas
    kappas = DEFAULT_KAPPAS if args.kappas is None else args.kappas
    result = sweep(spec, gammas, kappas, etas=args.etas, workers=args.workers, disable_tqdm=args.disable_tqdm)
    report = {
        "etas": result.etas,
        "gammas": result.gammas,
        "kappas": result.kappas,
        "fidelity": result.fidelity,
        "fitted_fidelity": result.fitted_fidelity,
        "closed_fidelity": result.closed_fidelity,
        "closed_fitted_fidelity": result.closed_fitted_fidelity,
        "runtime": result.runtime,
        "monotonicity": result.monotonicity_report(),
        "errors": {
            f"eta={eta},gamma={gamma},kappa={kappa}": error for (eta, gamma, kappa), error in result.errors.items()
        },
    }
    path = _output_path(args, "sweep.csv")
    if path is not None:
        result.to_csv(path)
        report["csv"] = path
    return report


def _figures(spec: ProtocolSpec, args: ProtocolArguments) -> Dict[str, Any]:
    if args.out is None:
        raise ValueError("the figures command needs an output directory, pass --out")
    return emit_figures(
        spec,
        args.out,
        gammas=args.gammas,
        kappas=args.kappas,
        workers=args.workers,
        samples=args.samples,
        disable_tqdm=args.disable_tqdm,
    )


COMMAND_HANDLERS: Dict[str, Callable[[ProtocolSpec, ProtocolArguments], Dict[str, Any]]] = {
    "spectrum": _spectrum,
    "zeno-check": _zeno_check,
    "pulses": _pulses,
    "step1": _step1,
    "step2": _step2,
    "protocol": _protocol,
    "sweep": _sweep,
    "figures": _figures,
}


def build_parser() -> HfArgumentParser:
    parser = HfArgumentParser(ProtocolArguments, description="Fiber-coupled cavity qutrit entanglement simulator.")
    parser.add_argument("command", choices=COMMANDS, help="What to compute.")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args, namespace = parser.parse_args_into_dataclasses(args=argv)
        if args.log_level != -1:
            logging.set_verbosity(args.log_level)
        config = args.to_protocol_config()
        spec = config.to_protocol_spec()
        logger.info(f"Running {namespace.command} with {config.to_json_string()}")
        report = COMMAND_HANDLERS[namespace.command](spec, args)
    except Exception as error:
        logger.debug("Command failed", exc_info=True)
        sys.stderr.write(json.dumps({"error": type(error).__name__, "message": str(error)}) + "\n")
        return 1

    sys.stdout.write(json.dumps(report, default=_to_builtin, indent=2) + "\n")
    return 0
