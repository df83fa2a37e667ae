"""Run manifests: every CLI invocation records its inputs, seeds, and the
content hash of each produced file, so a run can be re-executed and verified
byte for byte."""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, command: str, args: dict, seeds, outputs,
                   config_paths=()) -> Path:
    """Hash the outputs and write manifest.json into out_dir.

    The created timestamp is informational; reproducibility comparisons use
    the per-file hashes.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for output in sorted(Path(p) for p in outputs):
        entries.append({
            "path": str(output.relative_to(out_dir)
                        if output.is_relative_to(out_dir) else output),
            "sha256": sha256_file(output),
            "bytes": output.stat().st_size,
        })
    payload = {
        "format": "synloco-manifest",
        "version": 1,
        "command": command,
        "args": {k: str(v) for k, v in args.items() if v is not None},
        "seeds": list(seeds),
        "config_paths": [str(p) for p in config_paths],
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "outputs": entries,
    }
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
    return path


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def output_hashes(manifest: dict) -> dict:
    return {entry["path"]: entry["sha256"] for entry in manifest["outputs"]}
