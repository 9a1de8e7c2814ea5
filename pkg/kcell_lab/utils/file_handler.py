# kcell_lab/utils/file_handler.py
"""
Results file handling: campaign CSV (fixed column order, 17 significant
digits), JSON run summary and byte comparison for replays.
"""

import hashlib
import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from kcell_lab.core.config import get_settings
from kcell_lab.core.exceptions import ReplayMismatch
from kcell_lab.core.logging import LoggerManager
from kcell_lab.models.campaign import Campaign, ResultRow
from kcell_lab.models.geometry import body_label

logger = LoggerManager.get_logger(__name__)

CSV_COLUMNS = [
    "campaign_id", "experiment", "d", "body", "n", "reps",
    "mean_gap", "stderr", "trunc_count", "seed",
]


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


class ResultsFileHandler:
    """Writes and compares campaign result files"""

    def __init__(self, output_dir: Optional[Path] = None):
        self.settings = get_settings()
        self.output_dir = Path(output_dir or self.settings.OUTPUT_DIR)
        self.float_format = f"%.{self.settings.CSV_DIGITS}g"

    def _ensure_directories(self):
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def paths_for(self, campaign_id: str) -> Dict[str, Path]:
        return {
            "csv": self.output_dir / f"{campaign_id}.csv",
            "json": self.output_dir / f"{campaign_id}.json",
            "svg": self.output_dir / f"{campaign_id}.svg",
        }

    def rows_to_frame(self, campaign: Campaign, rows: Sequence[ResultRow], seed: int) -> pd.DataFrame:
        config = campaign.config
        label = body_label(campaign.body)
        records = [{
            "campaign_id": config.campaign_id,
            "experiment": row.label,
            "d": int(config.d),
            "body": label,
            "n": float(row.n),
            "reps": int(row.reps),
            "mean_gap": float(row.mean),
            "stderr": float(row.stderr),
            "trunc_count": int(row.trunc_count),
            "seed": str(seed),
        } for row in rows]
        return pd.DataFrame.from_records(records, columns=CSV_COLUMNS)

    def write_csv(self, frame: pd.DataFrame, path: Path) -> Path:
        """'.' decimal, LF line endings, floats with CSV_DIGITS significant digits"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=self.float_format, lineterminator="\n")
        logger.info(f"Wrote {len(frame)} rows to {path}")
        return path

    def write_summary(self, summary: Dict[str, Any], path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n",
                        encoding="utf-8")
        return path

    @staticmethod
    def file_digest(path: Path) -> str:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()

    @staticmethod
    def compare_bytes(expected: Path, got: Path):
        """Raise ReplayMismatch naming the first differing row (header = row 0)"""
        a = Path(expected).read_bytes()
        b = Path(got).read_bytes()
        if a == b:
            return
        lines_a = a.decode("utf-8", errors="replace").split("\n")
        lines_b = b.decode("utf-8", errors="replace").split("\n")
        for i in range(max(len(lines_a), len(lines_b))):
            la = lines_a[i] if i < len(lines_a) else "<missing>"
            lb = lines_b[i] if i < len(lines_b) else "<missing>"
            if la != lb:
                raise ReplayMismatch(i, la, lb)
        # same text, different bytes (encoding artefacts)
        raise ReplayMismatch(0, "<bytes>", "<bytes>")

    def get_file_info(self, path: Path) -> Optional[Dict[str, Any]]:
        path = Path(path)
        if not path.exists():
            return None
        stat = path.stat()
        return {
            "filename": path.name,
            "file_size": stat.st_size,
            "modified": datetime.fromtimestamp(stat.st_mtime).isoformat(),
            "sha256": self.file_digest(path),
        }
