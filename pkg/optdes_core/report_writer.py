"""
optdes 輸出寫入器 (Report Writer)
================================

JSON 與 CSV 產出物：

- JSON 使用 pydantic 序列化，浮點數以最短可還原表示輸出（無損往返）
- CSV 表頭 "d1,d2,boundary_value,predicted,confirmed"，浮點數 12 位有效數字
- 寫入檔案時另存 <out>.meta.json 旁檔（時間戳只出現在旁檔，資料本身可逐位元比對）

Author: RhombicDesign Kit
Version: 1.0
"""

import csv
import io
import json
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

from pydantic import BaseModel

from . import __version__
from .config import get_config
from .regions import RegionVerdict

CSV_HEADER = ("d1", "d2", "boundary_value", "predicted", "confirmed")

Payload = Union[BaseModel, Dict[str, Any]]


def format_float(value: float) -> str:
    return f"{value:.12g}"


def dump_json(payload: Payload, pretty: bool = False) -> str:
    indent = 2 if pretty else None
    if isinstance(payload, BaseModel):
        return payload.model_dump_json(indent=indent)
    return json.dumps(payload, indent=indent, ensure_ascii=False)


def build_meta(command: str, params: Dict[str, Any]) -> Dict[str, Any]:
    config = get_config()
    return {
        "tool": "optdes",
        "version": __version__,
        "command": command,
        "params": params,
        "tolerances": config.tolerances.model_dump(),
        "solver": config.solver.model_dump(),
        "generated_at": datetime.now().isoformat(timespec="seconds"),
    }


def meta_path(out: Path) -> Path:
    return out.with_name(out.name + ".meta.json")


def _write_meta(out: Path, meta: Optional[Dict[str, Any]]) -> None:
    if meta is None:
        return
    with open(meta_path(out), "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, ensure_ascii=False)


def write_json(
    payload: Payload,
    out: Optional[Path] = None,
    pretty: bool = False,
    meta: Optional[Dict[str, Any]] = None,
) -> None:
    """out 為 None 時寫到 stdout"""
    text = dump_json(payload, pretty)
    if out is None:
        sys.stdout.write(text + "\n")
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        f.write(text + "\n")
    _write_meta(out, meta)


def region_csv(verdicts: Iterable[RegionVerdict]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for v in verdicts:
        writer.writerow(
            (
                format_float(v.d1),
                format_float(v.d2),
                format_float(v.boundary_value),
                v.predicted,
                v.solver_confirmed or "",
            )
        )
    return buffer.getvalue()


def write_region_csv(
    verdicts: Iterable[RegionVerdict],
    out: Optional[Path] = None,
    meta: Optional[Dict[str, Any]] = None,
) -> None:
    text = region_csv(verdicts)
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    _write_meta(out, meta)
