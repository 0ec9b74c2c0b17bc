from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import pandas as pd
from pydantic import BaseModel

logger = logging.getLogger(__name__)

INCOMPLETE = "INCOMPLETE"


class ArtifactWriter:
    """Single writer for everything a run leaves in its output directory."""

    def __init__(self, output_dir: Path):
        self.output_dir = Path(output_dir)
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = (self.output_dir / name).resolve()
        if self.output_dir.resolve() not in p.parents:
            raise ValueError(f"artifact {name!r} would land outside {self.output_dir}")
        return p

    def _record(self, p: Path) -> Path:
        self.written.append(p)
        logger.debug("wrote %s", p)
        return p

    def start(self, stage: str) -> None:
        """Create the directory and flag it incomplete until finish()."""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.mark_incomplete(stage, "run in progress")

    def json(self, name: str, payload: BaseModel | dict[str, Any]) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(payload, BaseModel):
            text = payload.model_dump_json(indent=2)
        else:
            text = json.dumps(payload, indent=2, sort_keys=True)
        p.write_text(text + "\n", encoding="utf-8")
        return self._record(p)

    def text(self, name: str, content: str) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(content, encoding="utf-8")
        return self._record(p)

    def csv(self, name: str, frame: pd.DataFrame) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(p, index=False, float_format="%.17g")
        return self._record(p)

    def mark_incomplete(self, stage: str, message: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        p = self.output_dir / INCOMPLETE
        p.write_text(f"stage: {stage}\n{message}\n", encoding="utf-8")
        return p

    def finish(self) -> None:
        (self.output_dir / INCOMPLETE).unlink(missing_ok=True)
        logger.info("%d artifacts written to %s", len(self.written), self.output_dir)
