"""
Scene config loading - JSON file + dotted `--set key.path=value` overrides -> SceneConfig
"""

import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

from pydantic import ValidationError

from ..lib.errors import ConfigError
from ..models.schema import SceneConfig

logger = logging.getLogger(__name__)

# keys that replace each other inside one block
EXCLUSIVE_KEYS = {
    ("stiffness_bound", "factor"): "k_max",
    ("stiffness_bound", "k_max"): "factor",
}


def parse_override(text: str) -> Tuple[List[str], Any]:
    """'a.b.c=value' -> (['a', 'b', 'c'], value); value parsed as JSON, else kept as a string"""
    if "=" not in text:
        raise ConfigError(f"override '{text}' is not of the form key.path=value")
    key, raw = text.split("=", 1)
    path = [part for part in key.strip().split(".") if part]
    if not path:
        raise ConfigError(f"override '{text}' has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def apply_overrides(document: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Copy of `document` with every override applied in order"""
    result = copy.deepcopy(document)
    for text in overrides:
        path, value = parse_override(text)
        node = result
        for depth, part in enumerate(path[:-1]):
            child = node.get(part)
            if not isinstance(child, dict):
                if child is not None and not isinstance(child, str):
                    raise ConfigError("cannot set a sub-key of a non-object value", ".".join(path[:depth + 1]))
                # a missing block or a string such as "disabled" becomes an object
                child = {}
                node[part] = child
            node = child
        leaf = path[-1]
        node[leaf] = value
        rival = EXCLUSIVE_KEYS.get(tuple(path[-2:]))
        if rival is not None:
            node.pop(rival, None)
        logger.debug("override %s = %r", ".".join(path), value)
    return result


def _error_key(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error.get("loc", ()))


def validate_document(document: Dict[str, Any]) -> SceneConfig:
    try:
        return SceneConfig.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first.get("msg", "invalid value"), _error_key(first) or None) from e


def load_scene_config(path, overrides: Sequence[str] = ()) -> SceneConfig:
    """
    Read, override and validate a scene config

    Raises:
        OSError: the file cannot be read
        ConfigError: malformed JSON, a bad override or a schema violation (names the key)
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e.msg} at line {e.lineno})") from e
    if not isinstance(document, dict):
        raise ConfigError(f"{path}: top level must be an object")
    config = validate_document(apply_overrides(document, overrides))
    logger.info("loaded scene config '%s' from %s (%d overrides)", config.name, path, len(overrides))
    return config
