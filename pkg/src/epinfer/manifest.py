"""Run manifests: enough provenance to reproduce any CLI run exactly."""

from __future__ import annotations

import datetime
import hashlib
import json
import os
import time

from . import __version__

MANIFEST_NAME = "manifest.json"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """Collects inputs/outputs during a command and writes them atomically."""

    def __init__(self, command: str, config: dict, seed: int | None):
        self.command = command
        self.config = config
        self.seed = seed
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        self._t0 = time.monotonic()
        self._started = datetime.datetime.now(datetime.timezone.utc)

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path) -> None:
        self.outputs[str(path)] = sha256_file(path)

    def write(self, out_dir) -> str:
        payload = {
            "schema": "epinfer-manifest-v1",
            "version": __version__,
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "started_utc": self._started.isoformat(),
            "wall_clock_sec": round(time.monotonic() - self._t0, 3),
        }
        path = os.path.join(out_dir, MANIFEST_NAME)
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
        return path
