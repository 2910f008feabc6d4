"""Run manifests: what was run, with which config, what it wrote."""

from __future__ import annotations

import json
import logging
import time
from contextlib import contextmanager
from pathlib import Path

from .. import __version__
from ..io import _jsonable

log = logging.getLogger("nlsinverse")


class RunManifest:
    def __init__(self, verb: str, config_hash: str, out_dir: Path, config: dict | None = None):
        self.verb = verb
        self.config_hash = config_hash
        self.out_dir = Path(out_dir)
        self.config = config or {}
        self.timings: dict = {}
        self.outputs: list = []
        self.diagnostics: dict = {}

    @property
    def path(self) -> Path:
        return self.out_dir / f"manifest_{self.verb}.json"

    def warn_if_rerun(self):
        """Warn when the previous manifest in ``out_dir`` has the same config hash."""
        if not self.path.exists():
            return False
        try:
            old = json.loads(self.path.read_text())
        except (OSError, json.JSONDecodeError):
            return False
        if old.get("config_hash") == self.config_hash:
            log.warning("identical config already run into %s (hash %s...); overwriting its outputs",
                        self.out_dir, self.config_hash[:12])
            return True
        return False

    @contextmanager
    def stage(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - start, 6)

    def add_output(self, path):
        self.outputs.append(str(Path(path)))
        return path

    def write(self) -> Path:
        missing = [p for p in self.outputs if not Path(p).exists()]
        if missing:
            raise FileNotFoundError(f"manifest lists missing outputs: {missing}")
        body = {
            "verb": self.verb,
            "config_hash": self.config_hash,
            "version": __version__,
            "config": self.config,
            "timings": self.timings,
            "outputs": sorted(self.outputs),
            "diagnostics": _jsonable(self.diagnostics),
        }
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(_jsonable(body), indent=2, sort_keys=True, default=str) + "\n")
        return self.path
