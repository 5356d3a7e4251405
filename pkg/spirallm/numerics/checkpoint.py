"""Checkpoint envelope around a safetensors payload.

Byte layout::

    offset  size  field
    0       4     magic b"SLMC"
    4       4     format version, unsigned 32-bit little-endian
    8       4     N = config block length in bytes, unsigned 32-bit little-endian
    12      N     config block, UTF-8 JSON with sorted keys
    12+N    ...   safetensors payload: one record per parameter name
                  holding its shape and little-endian float32 data

The config block carries everything needed to rebuild the model around the
tensors (model config, vocabularies, stop words, training provenance).
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
from safetensors.numpy import load as st_load
from safetensors.numpy import save as st_save

from ..errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"SLMC"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sII")


def dumps(config: Dict[str, Any], tensors: Dict[str, np.ndarray]) -> bytes:
    block = json.dumps(config, sort_keys=True, ensure_ascii=False).encode("utf-8")
    payload = st_save(
        {name: np.ascontiguousarray(t, dtype="<f4") for name, t in sorted(tensors.items())}
    )
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(block)) + block + payload


def loads(buffer: bytes) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    if len(buffer) < _HEADER.size:
        raise CheckpointError("checkpoint is truncated before its header")
    magic, version, length = _HEADER.unpack_from(buffer)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version} (this build reads {FORMAT_VERSION})"
        )
    start = _HEADER.size
    if len(buffer) < start + length:
        raise CheckpointError("checkpoint is truncated inside its config block")
    try:
        config = json.loads(buffer[start : start + length].decode("utf-8"))
        tensors = st_load(bytes(buffer[start + length :]))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"unreadable config block: {e}") from e
    except Exception as e:
        raise CheckpointError(f"unreadable tensor payload: {e}") from e
    return config, tensors


def save_checkpoint(
    path: Union[str, Path], config: Dict[str, Any], tensors: Dict[str, np.ndarray]
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(config, tensors))
    logger.debug("Wrote checkpoint %s (%d tensors)", path, len(tensors))
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    logger.debug("Reading checkpoint %s", path)
    return loads(path.read_bytes())
