"""Artifact I/O: hashing, JSON, CSV, the binary matrix format and manifests."""

import hashlib
import json
import platform
import struct
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import StaleArtifactError
from .logger import get_logger

log = get_logger(__name__)

MAGIC = b"SDPNNMAT"
_HEADER = struct.Struct("<8sQQ")


def compute_hash(filepath):
    """SHA256 of a file."""
    h = hashlib.sha256()
    with open(filepath, "rb") as f:
        for chunk in iter(lambda: f.read(8192), b""):
            h.update(chunk)
    return h.hexdigest()


def array_hash(*arrays):
    """SHA256 over shapes and little-endian float64 bytes of each array."""
    h = hashlib.sha256()
    for a in arrays:
        if a is None:
            h.update(b"none")
            continue
        a = np.ascontiguousarray(a, dtype="<f8")
        h.update(repr(a.shape).encode("utf-8"))
        h.update(a.tobytes())
    return h.hexdigest()


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, default=_json_default), encoding="utf-8")
    return path


def load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def write_matrix(path, A):
    """Write ``A`` as magic + (rows, cols) header + row-major float64 payload."""
    A = np.ascontiguousarray(A, dtype="<f8")
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {A.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, A.shape[0], A.shape[1]))
        f.write(A.tobytes(order="C"))
    return path


def read_matrix(path):
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, rows, cols = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: not an sdpnn matrix file")
        data = np.frombuffer(f.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols).astype(np.float64)


def write_csv(path, rows, columns=None):
    """Write a list of dicts (or a DataFrame) with a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(rows, columns=columns)
    df.to_csv(path, index=False)
    return path


def environment_info():
    import scipy
    import sklearn

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "scikit-learn": sklearn.__version__,
    }


def build_manifest(command, config, artifacts, **extra):
    """Manifest with artifact hashes keyed by file name relative to their directory."""
    manifest = {
        "command": command,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config": config,
        "artifacts": {Path(p).name: compute_hash(p) for p in artifacts},
        "environment": environment_info(),
    }
    manifest.update(extra)
    return manifest


def verify_manifest_entry(manifest, path):
    """Raise StaleArtifactError unless ``path`` hashes to its manifest entry."""
    path = Path(path)
    expected = manifest.get("artifacts", {}).get(path.name)
    if expected is None:
        raise StaleArtifactError(f"{path.name} is not listed in the manifest")
    actual = compute_hash(path)
    if actual != expected:
        raise StaleArtifactError(
            f"{path.name} hash {actual[:12]} does not match manifest {expected[:12]}"
        )
    log.debug(f"{path.name}: hash OK")
    return actual
