import json
import struct
from pathlib import Path
from typing import Any, BinaryIO, Dict, Mapping, Tuple, Union

import numpy as np

from sentibench.exceptions import CheckpointFormatException
from sentibench.logger import sentibench_logger

MAGIC = b"SBCK"
VERSION = 1


def save_checkpoint(path: Union[str, Path], arrays: Mapping[str, np.ndarray], metadata: Mapping[str, Any]) -> None:
    """Writes named arrays and JSON metadata into a single versioned file

    Args:
        path (Union[str, Path]): The checkpoint file
        arrays (Mapping[str, np.ndarray]): Parameter blocks, written in sorted name order
        metadata (Mapping[str, Any]): JSON-serializable description of the model

    Notes:
        - Layout: magic, uint32 version, uint64 metadata length, metadata, uint32 block count,
          then per block the uint32 name length, name, uint32 ndim, uint64 shape entries and
          the little-endian float64 data in row-major order.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    encoded_metadata = json.dumps(metadata, sort_keys=True).encode("utf-8")
    with path.open("wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<IQ", VERSION, len(encoded_metadata)))
        handle.write(encoded_metadata)
        handle.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            array = np.ascontiguousarray(arrays[name], dtype="<f8")
            encoded_name = name.encode("utf-8")
            handle.write(struct.pack("<I", len(encoded_name)))
            handle.write(encoded_name)
            handle.write(struct.pack("<I", array.ndim))
            handle.write(struct.pack(f"<{array.ndim}Q", *array.shape))
            handle.write(array.tobytes(order="C"))
    sentibench_logger.debug("Saving checkpoint succeeded", path=str(path), blocks=len(arrays))


def _read_exact(handle: BinaryIO, size: int, path: Path) -> bytes:
    data = handle.read(size)
    if len(data) != size:
        raise CheckpointFormatException(f"{path}: checkpoint is truncated")
    return data


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """Reads a file written by save_checkpoint

    Args:
        path (Union[str, Path]): The checkpoint file

    Returns:
        Tuple[Dict[str, np.ndarray], Dict[str, Any]]: The arrays by name and the metadata

    Raises:
        CheckpointFormatException: If the file is not a checkpoint, has an unknown version or is truncated
    """
    path = Path(path)
    arrays: Dict[str, np.ndarray] = {}
    with path.open("rb") as handle:
        if _read_exact(handle, len(MAGIC), path) != MAGIC:
            raise CheckpointFormatException(f"{path}: not a sentibench checkpoint")
        version, metadata_length = struct.unpack("<IQ", _read_exact(handle, 12, path))
        if version != VERSION:
            raise CheckpointFormatException(f"{path}: unsupported checkpoint version {version}")
        try:
            metadata = json.loads(_read_exact(handle, metadata_length, path).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as decode_error:
            raise CheckpointFormatException(f"{path}: metadata is not valid JSON") from decode_error
        (blocks,) = struct.unpack("<I", _read_exact(handle, 4, path))
        for _ in range(blocks):
            (name_length,) = struct.unpack("<I", _read_exact(handle, 4, path))
            name = _read_exact(handle, name_length, path).decode("utf-8")
            (ndim,) = struct.unpack("<I", _read_exact(handle, 4, path))
            shape = struct.unpack(f"<{ndim}Q", _read_exact(handle, 8 * ndim, path))
            count = int(np.prod(shape, dtype=np.int64))
            data = np.frombuffer(_read_exact(handle, 8 * count, path), dtype="<f8")
            arrays[name] = data.astype(np.float64).reshape(shape)
        if handle.read(1):
            raise CheckpointFormatException(f"{path}: trailing bytes after the last block")
    return arrays, metadata
