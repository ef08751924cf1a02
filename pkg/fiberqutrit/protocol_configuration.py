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

import json
import os
from typing import Optional, Union

from optimum.configuration_utils import BaseConfig
from optimum.utils import logging

from .dynamics import IntegratorConfig
from .invariant import PulseDesign
from .model import SystemParams
from .protocol import ProtocolSpec


logger = logging.get_logger(__name__)

PROTOCOL_CONFIG_NAME = "protocol_config.json"
DEFAULT_STEPS = 20000

# Fields that default to None and take a float once set.
OPTIONAL_FLOAT_FIELDS = ("epsilon", "g_al", "g_ar", "g_bl", "g_br", "dt", "step2_duration")

# Written by the serialization of the base class.
HF_CONFIG_KEYS = ("transformers_version", "model_type", "attn_implementation")


class ProtocolConfig(BaseConfig):
    """
    Flat configuration of a protocol run, every rate and frequency in units of g.

    `open_system=None` integrates the master equation whenever gamma or kappa is positive.
    """

    CONFIG_NAME = PROTOCOL_CONFIG_NAME
    FULL_CONFIGURATION_FILE = PROTOCOL_CONFIG_NAME

    def __init__(self, **kwargs):
        self.g = kwargs.pop("g", 1.0)
        self.eta = kwargs.pop("eta", 1.0)
        self.gamma = kwargs.pop("gamma", 0.0)
        self.kappa = kwargs.pop("kappa", 0.0)

        self.epsilon = kwargs.pop("epsilon", None)
        self.t_f = kwargs.pop("t_f", 15.0)
        self.winding_number = kwargs.pop("winding_number", 1)
        self.chi = kwargs.pop("chi", 1.0)
        self.n_max = kwargs.pop("n_max", 1)

        self.g_al = kwargs.pop("g_al", None)
        self.g_ar = kwargs.pop("g_ar", None)
        self.g_bl = kwargs.pop("g_bl", None)
        self.g_br = kwargs.pop("g_br", None)

        self.dt = kwargs.pop("dt", None)
        self.sample_every = kwargs.pop("sample_every", 100)
        self.restrict_to_support = kwargs.pop("restrict_to_support", True)

        self.step2_duration = kwargs.pop("step2_duration", None)
        self.step2_mode = kwargs.pop("step2_mode", "literal")
        self.initial_state = kwargs.pop("initial_state", "superposition")
        self.open_system = kwargs.pop("open_system", None)

        ignored = sorted(key for key in kwargs if not key.startswith("_") and key not in HF_CONFIG_KEYS)
        if ignored:
            logger.warning(f"Ignoring unknown protocol config keys: {', '.join(ignored)}")

    def update_from_string(self, update_str: str):
        """
        Updates attributes of this class with attributes from `update_str`.

        The expected format is ints, floats and strings as is, and for booleans use `true` or `false`. For example:
        "eta=0.5,gamma=0.01,open_system=true,step2_mode=rescaled". Fields currently set to `None` parse as floats,
        except `open_system` which parses as a boolean; the value `none` resets a field to `None`.

        The keys to change have to already exist in the config object.

        Args:
            update_str (`str`): String with attributes that should be updated for this class.

        """

        d = dict(x.split("=", 1) for x in update_str.split(",") if x.strip())
        for k, v in d.items():
            k, v = k.strip(), v.strip()
            if not hasattr(self, k):
                raise ValueError(f"key {k} isn't in the original config dict")

            old_v = getattr(self, k)
            if v.lower() == "none" and (old_v is None or k in OPTIONAL_FLOAT_FIELDS or k == "open_system"):
                v = None
            elif isinstance(old_v, bool) or k == "open_system":
                if v.lower() in ["true", "1", "y", "yes"]:
                    v = True
                elif v.lower() in ["false", "0", "n", "no"]:
                    v = False
                else:
                    raise ValueError(f"can't derive true or false from {v} (key {k})")
            elif isinstance(old_v, int) and not isinstance(old_v, bool) and k not in OPTIONAL_FLOAT_FIELDS:
                v = int(v)
            elif isinstance(old_v, float) or old_v is None:
                v = float(v)
            elif not isinstance(old_v, str):
                raise ValueError(
                    f"You can only update int, float, bool or string values in the config, got {v} for key {k}"
                )

            setattr(self, k, v)

    @classmethod
    def from_file(cls, path: Union[str, os.PathLike]) -> "ProtocolConfig":
        """
        Loads a JSON config (`.json` suffix) or a flat text file with one `key = value` per line. Blank lines and
        everything after `#` are ignored.
        """
        path = os.fspath(path)
        if path.endswith(".json"):
            return cls.from_json_file(path)
        config = cls()
        with open(path, "r", encoding="utf-8") as fp:
            for number, line in enumerate(fp, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{number}: expected `key = value`, got {line!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                config.update_from_string(f"{key}={value}")
        logger.info(f"Loaded protocol config from {path}")
        return config

    @property
    def is_open(self) -> bool:
        if self.open_system is None:
            return self.gamma > 0 or self.kappa > 0
        return bool(self.open_system)

    def to_system_params(self) -> SystemParams:
        return SystemParams(
            g=float(self.g),
            eta=float(self.eta),
            gamma=float(self.gamma),
            kappa=float(self.kappa),
            epsilon=None if self.epsilon is None else float(self.epsilon),
            t_f=float(self.t_f),
            winding_number=int(self.winding_number),
            n_max=int(self.n_max),
            g_al=self.g_al,
            g_ar=self.g_ar,
            g_bl=self.g_bl,
            g_br=self.g_br,
        )

    def to_pulse_design(self, params: Optional[SystemParams] = None) -> PulseDesign:
        params = params or self.to_system_params()
        return PulseDesign.from_params(params, chi=float(self.chi))

    def to_integrator_config(self, duration: Optional[float] = None) -> IntegratorConfig:
        """Step of `dt`, or `duration / 20000` (`duration` defaults to t_f) when `dt` is unset."""
        duration = self.t_f if duration is None else duration
        dt = duration / DEFAULT_STEPS if self.dt is None else self.dt
        return IntegratorConfig(
            dt=float(dt), sample_every=int(self.sample_every), restrict_to_support=bool(self.restrict_to_support)
        )

    def to_protocol_spec(self) -> ProtocolSpec:
        params = self.to_system_params()
        return ProtocolSpec(
            params=params,
            design=self.to_pulse_design(params),
            integrator=self.to_integrator_config(),
            initial_state=self.initial_state,
            step2_duration=self.step2_duration,
            step2_mode=self.step2_mode,
            open_system=self.is_open,
        )

    def to_json_string(self, use_diff: bool = False) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
