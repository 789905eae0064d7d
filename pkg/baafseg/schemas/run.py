"""
Resolved run configuration: defaults < config file < command-line flags.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field, ValidationError

from baafseg.core.config import settings
from baafseg.core.error_handling import ConfigError
from baafseg.schemas.data import SynthConfig
from baafseg.schemas.network import NetworkSpec, Variant
from baafseg.schemas.training import TrainConfig


class RunConfig(BaseModel):
    network: NetworkSpec = Field(default_factory=NetworkSpec)
    train: TrainConfig = Field(default_factory=TrainConfig)
    synth: SynthConfig = Field(default_factory=SynthConfig)

    data_dir: Optional[str] = None
    out_dir: Optional[str] = None
    kfold: Optional[int] = Field(default=None, ge=2)
    seeds: int = Field(default=3, ge=1)
    variants: List[Variant] = Field(default_factory=lambda: list(Variant))
    threads: int = Field(default_factory=lambda: settings.THREADS, ge=1)
    deterministic: bool = Field(default_factory=lambda: settings.DETERMINISTIC)

    @property
    def worker_threads(self) -> int:
        """Pool size for generation and metrics; 1 whenever the run is deterministic."""
        return 1 if self.deterministic else self.threads

    @classmethod
    def resolve(
        cls,
        config_file: Optional[Union[str, Path]] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ) -> "RunConfig":
        """Merge a JSON config file and dotted-key overrides onto the defaults.

        ``overrides`` keys are dotted paths such as ``"train.epochs"``; ``None``
        values are skipped so unset flags never mask the file.
        """
        document: Dict[str, Any] = {}
        if config_file is not None:
            try:
                document = json.loads(Path(config_file).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"Cannot read config file {config_file}: {e}") from e
            if not isinstance(document, dict):
                raise ConfigError(f"Config file {config_file} must hold a JSON object")

        for dotted, value in (overrides or {}).items():
            if value is None:
                continue
            node = document
            *parents, leaf = dotted.split(".")
            for key in parents:
                node = node.setdefault(key, {})
            node[leaf] = value

        try:
            return cls.model_validate(document)
        except ValidationError as e:
            raise ConfigError(f"Invalid run configuration: {e}") from e

    def snapshot(self, directory: Union[str, Path]) -> Path:
        path = Path(directory) / "config.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return path
