"""
Run configuration for wpultr.

One JSON file per run (YAML is accepted too, since it is read with
yaml.safe_load), then a .env file, then environment variables, then CLI flags.
Priority: CLI flags > environment variables > .env file > config file.
"""

import os
from dataclasses import fields
from pathlib import Path
from typing import Any

import yaml
from dotenv import load_dotenv

from wpultr.baselines.ranker import TrainHyper
from wpultr.causal.discovery import CausalConfig
from wpultr.core.errors import ConfigError, ValidationError
from wpultr.density.estimator import FitHyper
from wpultr.eval.report import EvalConfig
from wpultr.preprocess.transform import PreprocessConfig
from wpultr.simulate.scm import ClickCoefficients, ScmConfig
from wpultr.unbias.trainer import BalConfig

ENV_MAPPINGS = {
    "WPULTR_SEED": ("seed",),
    "WPULTR_OUT_DIR": ("out_dir",),
    "WPULTR_JOBS": ("jobs",),
}
INTEGER_KEYS = {"seed", "jobs"}

SECTIONS = {
    "scm": ScmConfig,
    "preprocess": PreprocessConfig,
    "causal": CausalConfig,
    "density": FitHyper,
    "unbias": BalConfig,
    "baselines": TrainHyper,
    "eval": EvalConfig,
}
NESTED = {("scm", "click_coeffs"): ClickCoefficients}
# BalConfig fields filled from other sections or globals, not from "unbias"
UNBIAS_DERIVED = {"preprocess", "causal", "density", "seed", "jobs"}
TOP_LEVEL = {"seed", "out_dir", "jobs", *SECTIONS}


def _key_lines(text: str) -> dict[str, int]:
    """Dotted key path -> 1-based line of the key in the source text."""
    lines: dict[str, int] = {}

    def walk(node, prefix: str) -> None:
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
                lines[path] = key_node.start_mark.line + 1
                walk(value_node, path)

    try:
        walk(yaml.compose(text), "")
    except yaml.YAMLError:
        pass
    return lines


class RunConfig:
    """Resolved configuration of one wpultr run."""

    def __init__(self, data: dict | None = None, source: Path | None = None,
                 key_lines: dict[str, int] | None = None):
        self._config: dict = dict(data or {})
        self.source = source
        self._key_lines = key_lines or {}
        self._check_keys()

    # ------------------------------------------------------------------
    # Loading
    # ------------------------------------------------------------------

    @classmethod
    def load(cls, path: str | Path | None = None, overrides: dict | None = None) -> "RunConfig":
        """
        Read a config file and apply .env, environment and explicit overrides.

        Raises:
            ConfigError: On a parse error (with line and column), an unknown
                key (with its dotted path) or a non-mapping document.
        """
        data: dict = {}
        key_lines: dict[str, int] = {}
        source = None
        if path is not None:
            source = Path(path)
            try:
                text = source.read_text(encoding="utf-8")
            except OSError as e:
                raise ConfigError(f"cannot read config {source}: {e}") from e
            try:
                loaded = yaml.safe_load(text)
            except yaml.YAMLError as e:
                mark = getattr(e, "problem_mark", None)
                line = mark.line + 1 if mark is not None else None
                where = f"{source}:{line}:{mark.column + 1}" if mark is not None else str(source)
                raise ConfigError(f"{where}: {getattr(e, 'problem', None) or e}", line=line) from e
            if loaded is None:
                loaded = {}
            if not isinstance(loaded, dict):
                raise ConfigError(f"{source}: top level must be an object")
            data = loaded
            key_lines = _key_lines(text)

        config = cls(data, source, key_lines)
        load_dotenv(override=False)
        config._apply_env_overrides()
        for key, value in (overrides or {}).items():
            if value is not None:
                config._set_nested((key,), value)
        return config

    def _apply_env_overrides(self) -> None:
        for env_var, path in ENV_MAPPINGS.items():
            value = os.environ.get(env_var)
            if value is not None:
                self._set_nested(path, value)

    def _set_nested(self, path: tuple, value: Any) -> None:
        current = self._config
        for key in path[:-1]:
            current = current.setdefault(key, {})
        if path[-1] in INTEGER_KEYS:
            try:
                value = int(value)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{path[-1]} must be an integer, got {value!r}", key=path[-1]) from e
        current[path[-1]] = value

    def _get_nested(self, path: tuple, default: Any = None) -> Any:
        current = self._config
        for key in path:
            if not isinstance(current, dict) or key not in current:
                return default
            current = current[key]
        return current

    def _error(self, message: str, key: str) -> ConfigError:
        line = self._key_lines.get(key)
        where = f"{self.source}:{line}: " if self.source and line else ""
        return ConfigError(f"{where}{message}", key=key, line=line)

    def _check_keys(self) -> None:
        for key in self._config:
            if key not in TOP_LEVEL:
                raise self._error(f"unknown key {key}", key)
        for name, cls in SECTIONS.items():
            section = self._config.get(name)
            if section is None:
                continue
            if not isinstance(section, dict):
                raise self._error(f"section {name} must be an object", name)
            allowed = {f.name for f in fields(cls)}
            if cls is BalConfig:
                allowed -= UNBIAS_DERIVED
            for key in section:
                if key not in allowed:
                    raise self._error(f"unknown key {name}.{key}", f"{name}.{key}")
        for (name, sub), cls in NESTED.items():
            nested = self._get_nested((name, sub))
            if isinstance(nested, dict):
                allowed = {f.name for f in fields(cls)}
                for key in nested:
                    if key not in allowed:
                        raise self._error(f"unknown key {name}.{sub}.{key}", f"{name}.{sub}.{key}")

    # ------------------------------------------------------------------
    # Typed accessors
    # ------------------------------------------------------------------

    @property
    def seed(self) -> int:
        seed = self._get_nested(("seed",))
        if seed is None:
            raise ConfigError("missing required key seed", key="seed")
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise self._error(f"seed must be an integer, got {seed!r}", "seed")
        return seed

    @property
    def out_dir(self) -> Path:
        return Path(self._get_nested(("out_dir",), "runs"))

    @property
    def jobs(self) -> int:
        return int(self._get_nested(("jobs",), 1))

    def _section(self, name: str, **extra):
        cls = SECTIONS[name]
        values = dict(self._get_nested((name,), {}) or {})
        if "seed" in {f.name for f in fields(cls)}:
            values.setdefault("seed", self.seed)
        values.update(extra)
        try:
            return cls(**values)
        except ValidationError as e:
            raise self._error(str(e), name) from e
        except (TypeError, ValueError) as e:
            raise self._error(f"invalid {name} section: {e}", name) from e

    def scm(self) -> ScmConfig:
        return self._section("scm")

    def preprocess(self) -> PreprocessConfig:
        return self._section("preprocess")

    def causal(self) -> CausalConfig:
        return self._section("causal")

    def density(self) -> FitHyper:
        return self._section("density")

    def baselines(self) -> TrainHyper:
        return self._section("baselines")

    def eval(self) -> EvalConfig:
        return self._section("eval")

    def unbias(self) -> BalConfig:
        return self._section(
            "unbias",
            preprocess=self.preprocess(),
            causal=self.causal(),
            density=self.density(),
            jobs=self.jobs,
        )

    def get(self, *path: str, default: Any = None) -> Any:
        """Get a raw config value by path."""
        return self._get_nested(path, default)

    def to_dict(self) -> dict:
        """
        Seed and sections, written as ``config.json`` next to artifacts.

        ``out_dir`` and ``jobs`` are left out; they do not affect results.
        """
        data = {"seed": self.seed}
        for name in SECTIONS:
            if name in self._config:
                data[name] = self._config[name]
        return data
