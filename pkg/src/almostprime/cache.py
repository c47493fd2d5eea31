"""Content-addressed result store: one JSON object per line in results.jsonl.

Keys are sha256 digests of the canonical JSON of (module, op, inputs). Later
lines win. Unreadable lines are skipped with a warning; any I/O failure turns
the cache off for the rest of the process instead of failing the run.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, List, Optional

log = logging.getLogger(__name__)

ENV_VAR = "ALMOSTPRIME_CACHE_DIR"
FILENAME = "results.jsonl"


def canonical_key(module: str, op: str, inputs: Any) -> str:
    blob = json.dumps({"module": module, "op": op, "inputs": inputs}, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


class ResultCache:
    def __init__(self, directory: Optional[os.PathLike] = None, enabled: bool = True):
        if directory is None:
            directory = os.environ.get(ENV_VAR) or Path.home() / ".cache" / "almostprime"
        self.path = Path(directory) / FILENAME
        self.enabled = enabled
        self.warnings: List[str] = []

    def _warn(self, msg: str) -> None:
        log.warning(msg)
        self.warnings.append(msg)

    def get(self, key: str) -> Optional[Any]:
        if not self.enabled:
            return None
        try:
            if not self.path.exists():
                return None
            text = self.path.read_text()
        except OSError as exc:
            self._warn(f"cache disabled: cannot read {self.path}: {exc}")
            self.enabled = False
            return None
        found = None
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                k, value = entry["key"], entry["value"]
            except (ValueError, KeyError, TypeError):
                self._warn(f"ignoring corrupt cache line {lineno} in {self.path}")
                continue
            if k == key:
                found = value
        return found

    def put(self, key: str, value: Any) -> None:
        if not self.enabled:
            return
        line = json.dumps({"key": key, "value": value}, sort_keys=True, separators=(",", ":"))
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a") as fh:
                fh.write(line + "\n")
        except OSError as exc:
            self._warn(f"cache disabled: cannot write {self.path}: {exc}")
            self.enabled = False
