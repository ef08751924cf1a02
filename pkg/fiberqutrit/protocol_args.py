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

import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from optimum.utils import logging

from .invariant import STEP2_MODES
from .protocol_configuration import ProtocolConfig


logger = logging.get_logger(__name__)
log_levels = logging.get_log_levels_dict().copy()
cli_log_levels = dict(**log_levels, passive=-1)

COMMANDS = ("spectrum", "zeno-check", "pulses", "step1", "step2", "protocol", "sweep", "figures")

# Command-line field -> config key.
FLAG_TO_CONFIG_KEY = {
    "eta": "eta",
    "epsilon": "epsilon",
    "tf": "t_f",
    "gamma": "gamma",
    "kappa": "kappa",
    "nmax": "n_max",
    "dt": "dt",
    "winding_number": "winding_number",
    "chi": "chi",
    "step2_mode": "step2_mode",
    "open_system": "open_system",
}


@dataclass
class ProtocolArguments:
    eta: Optional[float] = field(default=None, metadata={"help": "Cavity-fiber coupling, in units of g."})
    epsilon: Optional[float] = field(
        default=None, metadata={"help": "Pulse parameter. Defaults to arcsin(1 / (4 winding_number))."}
    )
    tf: Optional[float] = field(default=None, metadata={"help": "Duration of step 1, in units of 1/g."})
    gamma: Optional[float] = field(default=None, metadata={"help": "Atomic spontaneous emission rate per channel."})
    kappa: Optional[float] = field(default=None, metadata={"help": "Photon leakage rate of cavities and fiber."})
    nmax: Optional[int] = field(default=None, metadata={"help": "Photon cutoff per mode."})
    dt: Optional[float] = field(default=None, metadata={"help": "Integration step. Defaults to t_f / 20000."})
    winding_number: Optional[int] = field(
        default=None, metadata={"help": "Number of 2 pi windings of the Lewis-Riesenfeld phase."}
    )
    chi: Optional[float] = field(default=None, metadata={"help": "Scale of the invariant."})
    step2_mode: Optional[str] = field(
        default=None,
        metadata={"help": "Step-2 schedules: `literal` or `rescaled`.", "choices": STEP2_MODES},
    )
    open_system: Optional[bool] = field(
        default=None,
        metadata={"help": "Integrate the master equation. Defaults to true whenever gamma or kappa is positive."},
    )

    config: Optional[str] = field(
        default=None, metadata={"help": "Config file, JSON or flat `key = value` text."}
    )
    overrides: Optional[str] = field(
        default=None,
        metadata={
            "help": (
                "Override some config values, applied after the config file and before the flags above. Example: "
                "`eta=0.5,step2_duration=45`"
            )
        },
    )
    out: Optional[str] = field(
        default=None, metadata={"help": "Output directory for CSV files. Nothing is written when unset."}
    )

    gammas: Optional[List[float]] = field(default=None, metadata={"help": "Sweep values of gamma."})
    kappas: Optional[List[float]] = field(default=None, metadata={"help": "Sweep values of kappa."})
    etas: Optional[List[float]] = field(default=None, metadata={"help": "Sweep values of eta."})
    workers: int = field(default=1, metadata={"help": "Number of processes for sweeps."})
    samples: int = field(default=1001, metadata={"help": "Number of samples of the pulse timeline."})

    log_level: Optional[str] = field(
        default="passive",
        metadata={
            "help": (
                "Logger log level. Possible choices are the log levels as strings: 'debug', 'info', 'warning', "
                "'error' and 'critical', plus a 'passive' level which doesn't set anything."
            ),
            "choices": cli_log_levels.keys(),
        },
    )
    disable_tqdm: Optional[bool] = field(
        default=None, metadata={"help": "Whether or not to disable the tqdm progress bars."}
    )

    def __post_init__(self):
        # convert to int
        self.log_level = cli_log_levels[self.log_level]

        if self.out is not None:
            self.out = os.path.expanduser(self.out)
        if self.config is not None:
            self.config = os.path.expanduser(self.config)

        if self.disable_tqdm is None:
            self.disable_tqdm = logger.getEffectiveLevel() > logging.WARN

        if self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}")

    def config_updates(self) -> Dict[str, object]:
        """Config values set explicitly on the command line."""
        return {
            key: getattr(self, flag) for flag, key in FLAG_TO_CONFIG_KEY.items() if getattr(self, flag) is not None
        }

    def to_protocol_config(self) -> ProtocolConfig:
        """Defaults, then the config file, then `overrides`, then the explicit flags."""
        config = ProtocolConfig() if self.config is None else ProtocolConfig.from_file(self.config)
        if self.overrides:
            logger.info(f"Overriding protocol config: {self.overrides}")
            config.update_from_string(self.overrides)
        for key, value in self.config_updates().items():
            setattr(config, key, value)
        return config
