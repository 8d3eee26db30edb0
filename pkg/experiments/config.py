"""
Configuration management for the experiment runner.

Merges, in order, built-in defaults per subcommand, a JSON or YAML config
file, RRLAB_* environment overrides and command-line flags, then validates the
result against ExperimentConfig.
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

import structlog
import yaml
from pydantic import ValidationError as PydanticValidationError

from config.settings import get_settings
from services.exceptions import ConfigInvalidError

from .models import ExperimentConfig, Subcommand

logger = structlog.get_logger()

SUBCOMMAND_DEFAULTS: Dict[Subcommand, Dict[str, Any]] = {
    Subcommand.SCHUR_CATALOG: {"m_max": 50},
    Subcommand.TRACE: {"point": {"angle": "1/3"}, "N": 200},
    Subcommand.DIVERGE: {"kind": "S-minimal", "levels": 3},
    Subcommand.TEN_LIMITS: {"kind": "S-prime", "levels": 2},
    Subcommand.GENERAL_PROBE: {"kind": "S-diamond", "levels": 2},
    Subcommand.LIPSCHITZ: {"pairs": 10, "N": 200},
    Subcommand.GROWTH: {"m_values": [2, 3, 4, 6, 7, 11], "q_max": 20},
    Subcommand.K_RATE: {"m_values": [2, 3, 4, 6, 7, 11], "q_max": 20},
    Subcommand.PERTURB: {"m": 7, "k": 1, "perturbation": "1/1000000000000000000000000000000"},
    Subcommand.OUTSIDE: {"point": {"disk": ["1/10", "0"]}, "N": 200},
    Subcommand.MOD_PATTERN: {"point": {"stream": {"kind": "periodic", "preperiod": [1, 3],
                                                  "period": [2, 3, 2, 1, 1, 2, 3, 2, 1, 3, 3, 5]}},
                             "modulus": 5},
    Subcommand.BUILD_POINT: {"kind": "S-minimal", "levels": 4},
    Subcommand.SAMPLE_MEASURE: {"rule": "S", "depth": 10, "samples": 1000},
}

ENV_MAPPINGS = {
    "RRLAB_PRECISION_BITS": ("precision_bits", int),
    "RRLAB_GUARD_BITS": ("guard_bits", int),
    "RRLAB_SEED": ("seed", int),
    "RRLAB_OUTPUT_DIR": ("output_dir", str),
}


class ConfigurationManager:
    """Loads and validates experiment configurations"""

    def __init__(self, environ: Optional[Dict[str, str]] = None):
        self.environ = environ if environ is not None else os.environ

    def load(
        self,
        subcommand: Subcommand,
        config_path: Optional[Path] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ) -> ExperimentConfig:
        data = self._defaults(subcommand)
        if config_path is not None:
            file_data = self._load_file(Path(config_path))
            named = file_data.pop("subcommand", subcommand.value)
            if named != subcommand.value:
                raise ConfigInvalidError(
                    f"config file is for {named!r}, not {subcommand.value!r}"
                )
            data.update(file_data)
        data.update(self._environment_overrides())
        data.update({key: value for key, value in (overrides or {}).items() if value is not None})
        data["subcommand"] = subcommand.value
        config = self.validate(data)
        logger.info("configuration loaded", subcommand=subcommand.value,
                    precision_bits=config.precision_bits, seed=config.seed)
        return config

    def validate(self, data: Dict[str, Any]) -> ExperimentConfig:
        try:
            return ExperimentConfig.model_validate(data)
        except PydanticValidationError as exc:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in error['loc']) or 'config'}: {error['msg']}"
                for error in exc.errors()
            )
            logger.error("configuration invalid", problems=problems)
            raise ConfigInvalidError(problems) from exc

    def _defaults(self, subcommand: Subcommand) -> Dict[str, Any]:
        settings = get_settings()
        data: Dict[str, Any] = {
            "precision_bits": settings.PRECISION_BITS,
            "guard_bits": settings.GUARD_BITS,
            "seed": settings.SEED,
            "output_dir": settings.OUTPUT_DIR,
        }
        data.update(json.loads(json.dumps(SUBCOMMAND_DEFAULTS[subcommand])))
        return data

    def _load_file(self, path: Path) -> Dict[str, Any]:
        if not path.exists():
            raise ConfigInvalidError(f"config file not found: {path}")
        try:
            text = path.read_text(encoding="utf-8")
            if path.suffix in (".yaml", ".yml"):
                data = yaml.safe_load(text) or {}
            else:
                data = json.loads(text)
        except (json.JSONDecodeError, yaml.YAMLError) as exc:
            raise ConfigInvalidError(f"cannot parse {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigInvalidError(f"{path} must hold a mapping at the top level")
        return data

    def _environment_overrides(self) -> Dict[str, Any]:
        overrides: Dict[str, Any] = {}
        for env_var, (key, value_type) in ENV_MAPPINGS.items():
            raw = self.environ.get(env_var)
            if raw is None:
                continue
            try:
                overrides[key] = value_type(raw)
            except ValueError as exc:
                raise ConfigInvalidError(f"invalid value for {env_var}: {raw!r}") from exc
        return overrides


def config_schema() -> Dict[str, Any]:
    schema = ExperimentConfig.model_json_schema()
    schema["$id"] = get_settings().SCHEMA_VERSION
    return schema
