"""Run manifests: enough provenance to replay any command.

A manifest records the command, the effective config (after flag
overrides), the seeds involved, every input and output file with its
sha256, the tool version, and timing.  Replaying the command with the
recorded config reproduces the data outputs byte for byte; manifests
themselves differ across reruns only in their timing fields.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import InputError, ParseError

MANIFEST_VERSION = 1


def sha256_file(path: str | Path) -> str:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"cannot hash missing file: {p}")
    digest = hashlib.sha256()
    with p.open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seeds: list[int] = field(default_factory=list)
    inputs: list[dict] = field(default_factory=list)
    outputs: list[dict] = field(default_factory=list)
    version: str = __version__
    started: str = ""
    elapsed_seconds: float = 0.0

    def __post_init__(self) -> None:
        if not self.started:
            self.started = datetime.now(timezone.utc).strftime(
                "%Y-%m-%dT%H:%M:%SZ")

    def add_input(self, path: str | Path) -> None:
        self.inputs.append({"path": str(path), "sha256": sha256_file(path)})

    def add_output(self, path: str | Path) -> None:
        self.outputs.append({"path": str(path), "sha256": sha256_file(path)})

    def to_dict(self) -> dict:
        return {
            "manifest_version": MANIFEST_VERSION,
            "tool": "driftguard",
            "version": self.version,
            "command": self.command,
            "config": self.config,
            "seeds": list(self.seeds),
            "inputs": sorted(self.inputs, key=lambda e: e["path"]),
            "outputs": sorted(self.outputs, key=lambda e: e["path"]),
            "started": self.started,
            "elapsed_seconds": self.elapsed_seconds,
        }


def write_manifest(manifest: RunManifest, path: str | Path) -> None:
    text = json.dumps(manifest.to_dict(), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_manifest(path: str | Path) -> RunManifest:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"manifest not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("manifest_version") != MANIFEST_VERSION:
        raise ParseError(f"{p}: not a recognized run manifest")
    missing = {"command", "config"} - doc.keys()
    if missing:
        raise ParseError(f"{p}: manifest missing fields {sorted(missing)}")
    return RunManifest(
        command=doc["command"],
        config=doc["config"],
        seeds=list(doc.get("seeds", [])),
        inputs=list(doc.get("inputs", [])),
        outputs=list(doc.get("outputs", [])),
        version=doc.get("version", ""),
        started=doc.get("started", ""),
        elapsed_seconds=float(doc.get("elapsed_seconds", 0.0)),
    )
