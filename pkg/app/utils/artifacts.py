"""
Artifact writing - reports and trajectory CSVs land atomically

Files are written to a temporary sibling and renamed into place, so an
interrupted run never leaves a truncated file behind under the final name.
"""

import logging
import os
import tempfile
from pathlib import Path
from typing import Union

import pandas as pd
from pydantic import BaseModel

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]


def atomic_write_text(path: PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug("wrote %s", path)
    return path


def write_frame_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    return atomic_write_text(path, frame.to_csv(index=False))


def write_report(report: BaseModel, path: PathLike) -> Path:
    return atomic_write_text(path, report.model_dump_json(indent=2))
