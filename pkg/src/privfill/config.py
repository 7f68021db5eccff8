"""JSON configuration, environment overrides, and run manifests."""

from __future__ import annotations

import hashlib
import json
import os
import stat
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

ENV_CONFIG = "TOOLKIT_CONFIG"
ENV_CACHE_DIR = "TOOLKIT_CACHE_DIR"
ENV_MODEL_ENDPOINT = "TOOLKIT_MODEL_ENDPOINT"

DEFAULTS = {
    "seed": 42,
    "backend": "stub:toy",
    "backend_retries": 0,
    "max_len": 512,
    "max_new_tokens": 32,
    "workers": 1,
    "cache_dir": None,
}


def load_config(path: str | Path | None = None) -> dict:
    """Defaults, then the JSON file (argument or $TOOLKIT_CONFIG), then env vars."""
    cfg = dict(DEFAULTS)
    path = path or os.environ.get(ENV_CONFIG)
    if path:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError(f"config {path} must hold a JSON object")
        cfg.update(data)
    if os.environ.get(ENV_CACHE_DIR):
        cfg["cache_dir"] = os.environ[ENV_CACHE_DIR]
    if os.environ.get(ENV_MODEL_ENDPOINT):
        cfg["backend"] = os.environ[ENV_MODEL_ENDPOINT]
    return cfg


def config_hash(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def timestamp() -> str:
    """UTC now, or $SOURCE_DATE_EPOCH when set for reproducible outputs."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    moment = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class RunManifest:
    command: str
    seed: int
    parameters: dict
    providers: dict
    inputs: dict
    outputs: dict
    started: str
    finished: str = ""
    budget: dict = field(default_factory=dict)
    config_hash: str = ""

    def __post_init__(self):
        if not self.config_hash:
            self.config_hash = config_hash(
                {"command": self.command, "seed": self.seed, "parameters": self.parameters, "providers": self.providers}
            )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def manifest_path(output: str | Path) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")


def write_manifest(output: str | Path, manifest: RunManifest) -> Path:
    """Write the manifest next to ``output`` and make it read-only."""
    path = manifest_path(output)
    if path.exists():
        path.chmod(stat.S_IWUSR | stat.S_IRUSR)
        path.unlink()
    path.write_text(manifest.to_json(), encoding="utf-8")
    path.chmod(stat.S_IRUSR | stat.S_IRGRP | stat.S_IROTH)
    return path
