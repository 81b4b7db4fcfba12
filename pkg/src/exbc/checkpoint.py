"""Versioned checkpoint container with content integrity checking.

A checkpoint is an npz archive of named float arrays plus a JSON metadata
blob, a format version, and a SHA-256 digest over the array contents.  Loads
verify both version and digest before returning anything.
"""

import hashlib
import json

import numpy as np

from exbc.errors import CheckpointError

FORMAT_VERSION = 1


def _digest(arrays):
    h = hashlib.sha256()
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        h.update(name.encode())
        h.update(str(arr.dtype).encode())
        h.update(str(arr.shape).encode())
        h.update(arr.tobytes())
    return h.hexdigest()


def save_checkpoint(path, arrays, meta=None):
    """Write arrays (name -> ndarray) and a small metadata dict."""
    payload = {name: np.asarray(a) for name, a in arrays.items()}
    for name in payload:
        if name.startswith("__"):
            raise CheckpointError(f"array name {name!r} collides with reserved keys")
    np.savez_compressed(
        path,
        __version__=np.array(FORMAT_VERSION),
        __meta__=np.array(json.dumps(meta or {})),
        __digest__=np.array(_digest(payload)),
        **payload,
    )


def load_checkpoint(path):
    """Return (arrays, meta); raises CheckpointError on any inconsistency."""
    try:
        with np.load(path, allow_pickle=False) as data:
            files = dict(data)
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if "__version__" not in files or "__digest__" not in files:
        raise CheckpointError(f"{path}: not a checkpoint container")
    version = int(np.ravel(files.pop("__version__"))[0])
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {version}, expected {FORMAT_VERSION}"
        )
    stored = str(files.pop("__digest__"))
    meta = json.loads(str(files.pop("__meta__")))
    if _digest(files) != stored:
        raise CheckpointError(f"{path}: integrity check failed")
    return files, meta
