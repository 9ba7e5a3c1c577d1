"""
optdes 設定載入器 (Config Loader)
================================

從 config.json 載入容許誤差與求解器預算，使用 lru_cache 快取解析結果，
避免在掃描迴圈中重複讀檔。環境變數 OPTDES_TOL 覆寫 KW 判定容許誤差。

Author: RhombicDesign Kit
Version: 1.0
"""

import functools
import json
import os
from pathlib import Path
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigError

DEFAULT_CONFIG_PATH = Path(__file__).with_name("config.json")
TOL_ENV_VAR = "OPTDES_TOL"


class Tolerances(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    equality: float = 1e-9
    singularity: float = 1e-12
    kw: float = Field(1e-7, gt=0)
    weight_sum: float = 1e-12
    cone_slack: float = Field(0.0, ge=0)
    boundary_band: float = Field(1e-10, ge=0)
    prune: float = 1e-8
    cluster_factor: float = Field(1.0, gt=0)


class SolverSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_sweeps: int = Field(500, ge=1)
    sweep_tol: float = 1e-12
    weight_tol: float = 1e-10
    max_weight_iter: int = Field(20000, ge=1)
    level_bounds: Tuple[float, float] = (1e-6, 1.0)
    level_starts: Tuple[float, ...] = (0.25, 0.6, 1.0)
    line_search_xatol: float = 1e-12
    oracle_max_iter: int = Field(100000, ge=1)
    oracle_kw_slack: float = 1e-7


class SweepSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    confirm_sweeps: int = Field(50, ge=1)
    d1_range: Tuple[float, float] = (0.1, 4.0)
    d2_range: Tuple[float, float] = (-2.0, 4.0)
    dense_grid: Dict[int, int] = Field(default_factory=lambda: {4: 33, 6: 9})
    dense_grid_default: int = Field(5, ge=2)
    refine_starts: int = Field(8, ge=1)

    def grid_points_for(self, k: int) -> int:
        """K 維稠密網格每軸點數：取第一個上限 >= k 的設定。"""
        for limit in sorted(self.dense_grid):
            if k <= limit:
                return self.dense_grid[limit]
        return self.dense_grid_default


class OptDesConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tolerances: Tolerances = Field(default_factory=Tolerances)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    sweep: SweepSettings = Field(default_factory=SweepSettings)


@functools.lru_cache(maxsize=8)
def _load_config_file(path: str) -> OptDesConfig:
    """讀取並驗證設定檔（快取：每個路徑只解析一次）"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"找不到設定檔: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"設定檔不是合法 JSON: {path}: {e}") from e

    try:
        return OptDesConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"設定檔欄位錯誤: {path}: {e}") from e


def _tolerance_override() -> Optional[float]:
    raw = os.environ.get(TOL_ENV_VAR)
    if raw is None or raw.strip() == "":
        return None
    try:
        value = float(raw)
    except ValueError as e:
        raise ConfigError(f"{TOL_ENV_VAR} 必須是數值，收到 {raw!r}") from e
    if not value > 0:
        raise ConfigError(f"{TOL_ENV_VAR} 必須為正數，收到 {raw!r}")
    return value


def get_config(path: Optional[str] = None) -> OptDesConfig:
    """
    取得目前有效的設定。

    檔案內容經 lru_cache 快取；OPTDES_TOL 於每次呼叫時重新讀取，
    因此測試可以用 monkeypatch 切換而不需清除快取。
    """
    config = _load_config_file(str(path or DEFAULT_CONFIG_PATH))
    override = _tolerance_override()
    if override is None:
        return config
    tolerances = config.tolerances.model_copy(update={"kw": override})
    return config.model_copy(update={"tolerances": tolerances})


def clear_config_cache() -> None:
    _load_config_file.cache_clear()
