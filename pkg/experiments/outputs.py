"""
Writers for everything the commands emit.

Every CSV starts with a ``# config_sha256=<hash>`` line and every JSON file
carries a ``provenance`` block, so each number can be traced back to the
configuration that produced it.
"""

import json
import logging
from fractions import Fraction
from pathlib import Path

import numpy as np
import pandas as pd

from hwmodel.reports import fraction_text
from sic.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.10g'


def ensure_output_dir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc.strerror or exc}") from exc
    if not path.is_dir():
        raise ConfigError(f"output path {path} is not a directory")
    return path


def plain(value):
    """JSON-ready form of numpy scalars, fractions and nested containers."""
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(item) for item in value]
    if isinstance(value, Fraction):
        return fraction_text(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    return value


def write_csv(path, frame: pd.DataFrame, provenance: dict, index: bool = False) -> Path:
    path = Path(path)
    with open(path, 'w', newline='') as fh:
        fh.write(f"# config_sha256={provenance['config_sha256']}\n")
        frame.to_csv(fh, index=index, float_format=FLOAT_FORMAT, lineterminator='\n')
    logger.debug(f"Wrote {path}")
    return path


def read_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, comment='#')


def write_json(path, payload: dict, provenance: dict) -> Path:
    path = Path(path)
    document = dict(plain(payload))
    document['provenance'] = plain(provenance)
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + '\n')
    logger.debug(f"Wrote {path}")
    return path


def model_path(directory, key: str) -> Path:
    return Path(directory) / f"{key}.json"


def write_model(directory, key: str, canceller, model, provenance: dict) -> Path:
    return write_json(model_path(directory, key), {'kind': key, 'model': canceller.dump(model)}, provenance)


def read_model(path, key: str, canceller):
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(document, dict) or 'model' not in document:
        raise DataError(f"{path} is not a model file")
    if document.get('kind') != key:
        raise DataError(f"{path} holds a {document.get('kind')!r} model, expected {key!r}")
    return canceller.load(document['model'])
