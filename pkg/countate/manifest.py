"""
Run manifests: what a command was asked to do, how long each phase took and
which files it wrote.

"A manifest is just a to-do list that got done." — schema.cx
"""

from __future__ import annotations

import json
import logging
import time
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any

logger = logging.getLogger(__name__)


@dataclass
class RunManifest:
    """
    Record of one CLI invocation.

    ``status`` starts as ``"running"`` and ends as ``"ok"`` or ``"failed"``;
    a failed run keeps the error message.
    """

    command: str
    config: dict[str, Any]
    seed: int | None
    version: str
    phases: dict[str, float] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    status: str = "running"
    error: str | None = None
    created_at: str = field(default_factory=lambda: datetime.now().isoformat())

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        """Time a block in seconds; the time is recorded even if the block raises."""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.phases[name] = self.phases.get(name, 0.0) + time.perf_counter() - start

    def add_output(self, role: str, path: Path | str) -> None:
        self.outputs[role] = str(path)

    def succeed(self) -> None:
        self.status = "ok"
        self.error = None

    def fail(self, error: BaseException | str) -> None:
        self.status = "failed"
        self.error = str(error)

    @property
    def total_seconds(self) -> float:
        return sum(self.phases.values())

    def to_dict(self) -> dict[str, Any]:
        """Convert manifest to dictionary for JSON export."""
        return {
            "command": self.command,
            "version": self.version,
            "seed": self.seed,
            "status": self.status,
            "error": self.error,
            "created_at": self.created_at,
            "config": self.config,
            "phases_seconds": dict(self.phases),
            "total_seconds": self.total_seconds,
            "outputs": dict(self.outputs),
        }

    def write(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, default=str)
        logger.debug("Manifest written to %s", path)
        return path
