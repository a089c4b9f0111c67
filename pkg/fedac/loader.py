"""Experiment documents: YAML loading, --set overrides and validation with line numbers."""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Type, Union

import yaml
from pydantic import BaseModel, ValidationError

from fedac.errors import ConfigurationError
from fedac.models.config import (
    DataConfig,
    ExperimentConfig,
    ExperimentConfigFile,
    ModelConfig,
    OutputConfig,
    PartitionConfig,
    RunConfig,
    SyntheticTaskConfig,
)

logger = logging.getLogger(__name__)

# Sections searched, in order, when an override key has no section prefix
BARE_KEY_SECTIONS: List[Tuple[str, Type[BaseModel]]] = [
    ("run", RunConfig),
    ("data", DataConfig),
    ("model", ModelConfig),
    ("output", OutputConfig),
    ("data.partition", PartitionConfig),
    ("data.synthetic", SyntheticTaskConfig),
]

OVERRIDE_SOURCE = "--set"


def _line_marks(node: Optional[yaml.Node], prefix: str = "", marks: Optional[Dict[str, int]] = None) -> Dict[str, int]:
    """Dotted key path -> 1-based line of the key in the document."""
    marks = {} if marks is None else marks
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
            marks[path] = key_node.start_mark.line + 1
            _line_marks(value_node, path, marks)
    return marks


def read_document(path: Union[str, Path]) -> Tuple[dict, Dict[str, int]]:
    """Parse a YAML document into a mapping plus its key line numbers."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from e
    try:
        document = yaml.safe_load(text)
        marks = _line_marks(yaml.compose(text))
    except yaml.YAMLError as e:
        raise ConfigurationError(f"{path}: invalid YAML: {e}") from e
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return document, marks


def _field_key(model: Type[BaseModel], name: str) -> Optional[str]:
    """The document key for a field given by name or alias."""
    for field_name, info in model.model_fields.items():
        if name in (field_name, info.alias):
            return info.alias or field_name
    return None


def resolve_key(key: str) -> str:
    """Expand a bare override key to its dotted path."""
    if "." in key:
        return key
    for section, model in BARE_KEY_SECTIONS:
        field_key = _field_key(model, key)
        if field_key is not None:
            return f"{section}.{field_key}"
    raise ConfigurationError(f"unknown override key '{key}'")


def parse_override(item: str) -> Tuple[str, object]:
    if "=" not in item:
        raise ConfigurationError(f"override '{item}' must look like key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigurationError(f"override '{item}' has an empty key")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as e:
        raise ConfigurationError(f"override '{item}': cannot parse value: {e}") from e
    return resolve_key(key), value


def apply_overrides(document: dict, overrides: Iterable[str]) -> Tuple[dict, List[str]]:
    """Return a copy of document with overrides applied, plus the overridden paths."""
    document = yaml.safe_load(yaml.safe_dump(document)) or {}
    applied = []
    for item in overrides:
        path, value = parse_override(item)
        *parents, leaf = path.split(".")
        target = document
        for part in parents:
            child = target.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigurationError(f"override '{item}': '{part}' is not a section")
            target = child
        # A field may be spelled by name or alias; keep only one spelling
        if parents == ["run"] and leaf in ("lam", "lambda"):
            target.pop("lam", None)
            leaf = "lambda"
        target[leaf] = value
        applied.append(path)
        logger.debug("Override %s = %r", path, value)
    return document, applied


def _error_location(loc: tuple, marks: Dict[str, int], overridden: List[str], source: str) -> str:
    parts = [str(part) for part in loc if not isinstance(part, int)]
    dotted = ".".join(parts)
    for end in range(len(parts), 0, -1):
        path = ".".join(parts[:end])
        if path in overridden:
            return f"{dotted} ({OVERRIDE_SOURCE})"
        if path in marks:
            return f"{dotted} ({source}, line {marks[path]})"
    return f"{dotted} ({source})" if dotted else source


def validate_document(
    document: dict,
    marks: Optional[Dict[str, int]] = None,
    overridden: Optional[List[str]] = None,
    source: str = "<config>",
) -> ExperimentConfig:
    """Validate a document mapping; errors name the dotted key and YAML line."""
    marks = marks or {}
    overridden = overridden or []
    try:
        return ExperimentConfigFile.model_validate(document).to_experiment()
    except ValidationError as e:
        lines = [
            f"{_error_location(tuple(error['loc']), marks, overridden, source)}: {error['msg']}"
            for error in e.errors()
        ]
        raise ConfigurationError("invalid config:\n  " + "\n  ".join(lines)) from e


def load_experiment(
    path: Union[str, Path],
    overrides: Iterable[str] = (),
    seed: Optional[int] = None,
) -> ExperimentConfig:
    """Read, override and validate an experiment document."""
    overrides = list(overrides)
    if seed is not None:
        overrides.append(f"run.seed={seed}")
    document, marks = read_document(path)
    document, overridden = apply_overrides(document, overrides)
    config = validate_document(document, marks, overridden, source=str(path))
    logger.info("Loaded config %s (%d overrides)", path, len(overridden))
    return config
