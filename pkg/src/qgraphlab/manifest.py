"""Run manifests: what was computed, from which config, into which files.

The manifest records a content hash per output plus a result hash over
(kind, seed, output hashes). Timestamps and timing are recorded but kept
out of the result hash so identical reruns can be recognized by equality.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from pathlib import Path

MANIFEST_SCHEMA = "qgraphlab.manifest/1"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def hash_config(config_dict: dict) -> str:
    return hashlib.sha256(canonical_json(config_dict).encode()).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    kind: str
    config: dict
    config_hash: str
    seed: int | None
    code_version: str
    created_utc: str = ""
    outputs: list = field(default_factory=list)      # {path, sha256, bytes}
    input_hashes: dict = field(default_factory=dict)
    excluded_samples: dict = field(default_factory=dict)
    seed_trail: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    result_hash: str = ""
    schema: str = MANIFEST_SCHEMA

    def add_output(self, path, base_dir) -> None:
        path = Path(path)
        self.outputs.append({
            "path": str(path.relative_to(base_dir)),
            "sha256": sha256_file(path),
            "bytes": path.stat().st_size,
        })

    def finalize(self) -> None:
        self.created_utc = datetime.now(timezone.utc).isoformat()
        self.outputs.sort(key=lambda o: o["path"])
        core = {
            "kind": self.kind,
            "seed": self.seed,
            "outputs": [{"path": o["path"], "sha256": o["sha256"]}
                        for o in self.outputs],
        }
        self.result_hash = hashlib.sha256(
            canonical_json(core).encode()).hexdigest()


def write_manifest(manifest: RunManifest, out_dir) -> Path:
    manifest.finalize()
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(asdict(manifest), sort_keys=True, indent=2)
                    + "\n", encoding="utf-8")
    return path


def load_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
