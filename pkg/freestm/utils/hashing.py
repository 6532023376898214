import hashlib
import json
from pathlib import Path
from typing import Any, Mapping


def compute_config_hash(payload: Mapping[str, Any]) -> str:
    """SHA256 of the canonical JSON form (sorted keys, no whitespace)"""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def compute_file_hash(file_path: Path) -> str:
    """Compute SHA256 hash of a written result file"""
    sha256_hash = hashlib.sha256()
    with open(file_path, "rb") as f:
        for byte_block in iter(lambda: f.read(65536), b""):
            sha256_hash.update(byte_block)
    return sha256_hash.hexdigest()
