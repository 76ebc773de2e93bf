"""
Loading, merging and hashing of experiment configurations.

Resolution order: ``config/defaults.json`` -> ``--config FILE`` ->
``--set dotted.key=value`` -> ``--seed`` / ``--out``. The merged document is
validated by ``RunConfigSerializer`` and identified by the SHA-256 of its
canonical JSON form.
"""

import copy
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from django.conf import settings

from sic.errors import ConfigError
from sic.serializers import validated
from sigmodel.serializers import DatasetSerializer, TxChainSerializer

from .serializers import RunConfigSerializer

logger = logging.getLogger(__name__)

# Where results land never changes what they are.
UNHASHED_KEYS = ('output_dir',)


def read_json(path, what: str) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc.strerror or exc}") from exc
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(document, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return document


def load_defaults() -> dict:
    return read_json(settings.SIC_DEFAULTS_FILE, 'defaults file')


def deep_merge(base: dict, override: dict) -> dict:
    """Recursive merge; dicts merge key by key, anything else replaces."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_override(text: str):
    """``a.b=value`` -> (['a', 'b'], value); the value is JSON when it parses, else a string."""
    key, sep, raw = text.partition('=')
    if not sep or not key.strip():
        raise ConfigError(f"--set expects dotted.key=value, got {text!r}")
    path = key.strip().split('.')
    if any(not part for part in path):
        raise ConfigError(f"empty component in --set key {key!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def apply_override(document: dict, path, value) -> dict:
    node = document
    for depth, part in enumerate(path[:-1]):
        child = node.get(part)
        if not isinstance(child, dict):
            dotted = '.'.join(path[:depth + 1])
            raise ConfigError(f"--set {'.'.join(path)}: {dotted} is not a section")
        node = child
    node[path[-1]] = value
    return document


def canonical_json(document: dict) -> str:
    return json.dumps(document, sort_keys=True, separators=(',', ':'))


def config_sha256(document: dict) -> str:
    hashed = {key: value for key, value in document.items() if key not in UNHASHED_KEYS}
    return hashlib.sha256(canonical_json(hashed).encode('utf-8')).hexdigest()


@dataclass(frozen=True)
class RunConfig:
    """A validated, merged experiment configuration."""

    document: dict
    values: dict
    sha256: str

    @property
    def seed(self) -> int:
        return self.values['seed']

    @property
    def output_dir(self) -> Path:
        if self.values['output_dir']:
            return Path(self.values['output_dir'])
        return Path(settings.SIC_OUTPUT_ROOT) / f"run-{self.sha256[:12]}"

    def section(self, name: str) -> dict:
        return self.values[name]

    def tx_chain(self):
        return TxChainSerializer.build(self.values['dataset']['tx_chain'], self.seed)

    def waveform(self):
        return DatasetSerializer.waveform(self.values['dataset'])

    def provenance(self, command: str) -> dict:
        return {'command': command, 'config_sha256': self.sha256, 'seed': self.seed}


def build_run_config(document: dict) -> RunConfig:
    values = validated(RunConfigSerializer, document, ConfigError, 'configuration')
    return RunConfig(document, values, config_sha256(document))


def resolve_config(config_path: Optional[str] = None, overrides: Iterable[str] = (),
                   seed: Optional[int] = None, out: Optional[str] = None) -> RunConfig:
    document = load_defaults()
    if config_path:
        document = deep_merge(document, read_json(config_path, 'config file'))
    for text in overrides or ():
        apply_override(document, *parse_override(text))
    if seed is not None:
        document['seed'] = seed
    if out is not None:
        document['output_dir'] = str(out)
    run_config = build_run_config(document)
    logger.debug(f"Resolved configuration {run_config.sha256[:12]} (seed {run_config.seed})")
    return run_config
