"""
optdes 區域分類 (Regions)
========================

以判別多項式把參數點分成頂點區域與內點區域，並在 (d1/d0, d2/d0) 平面上
產生區域圖。最適區域只依賴 d1/d0 與 d2/d0，輸出一律正規化為 d0 = 1。

- region_map: 矩形網格掃描，可選擇以求解器確認每個格點
- conjecture_scan: 錐內網格上的 numeric_rhombic 掃描，記錄找不到最適菱形設計的格點

格點彼此獨立，jobs > 1 時以 ProcessPoolExecutor 平行評估，輸出依 (row, col) 排序。

Author: RhombicDesign Kit
Version: 1.0
"""

import math
import multiprocessing as mp
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from .config import get_config
from .designs import RhombicDesign
from .model_core import (
    DispersionSpec,
    boundary_poly,
    boundary_value,
    cone_contains,
    sym_inverse,
)
from .solvers import NumericOptions, SolveResult, numeric_rhombic, solve

Predicted = Literal["vertex", "non_vertex", "boundary", "excluded"]
Confirmed = Literal["vertex", "non_vertex", "none_found", "inconclusive"]

CellArgs = Tuple[int, int, int, float, float, float, bool, bool, int]


class RegionVerdict(BaseModel):
    """單一格點的分類結果；d1、d2、boundary_value 皆為 d0 = 1 的正規化值"""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    row: int
    col: int
    d1: float
    d2: float
    boundary_value: float
    predicted: Predicted
    solver_confirmed: Optional[Confirmed] = None
    support_orbits: int = 0
    spec: Optional[DispersionSpec] = None


class ScanSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int
    resolution: int
    cells: int
    failures: int
    inconclusive: int
    failure_fraction: float
    failure_locations: List[Tuple[float, float]] = Field(default_factory=list)
    consistent_with_conjecture: bool
    verdicts: List[RegionVerdict] = Field(default_factory=list)


def classify(spec: DispersionSpec) -> Predicted:
    """判別多項式的符號；|值| < boundary_band·d0² 視為邊界"""
    band = get_config().tolerances.boundary_band * spec.d0 * spec.d0
    value = boundary_poly(spec)
    if value <= -band:
        return "vertex"
    if value >= band:
        return "non_vertex"
    return "boundary"


def dinv_diagonal_gap(spec: DispersionSpec) -> float:
    """
    (D⁻¹)₀₀ - (D⁻¹)₁₁ = boundary_poly / (d0·(d1-d2)·(d1+(K-1)d2))。

    D 正定時與判別多項式同號；D 在錐邊界上奇異時拋出 SingularityError。
    """
    return 1.0 / spec.d0 - sym_inverse(spec.d1_pair).a1


def _confirmation(result: SolveResult) -> Confirmed:
    if result.is_optimal:
        design = result.design
        if isinstance(design, RhombicDesign) and design.is_vertex():
            return "vertex"
        return "non_vertex"
    if not result.converged or (result.kw is not None and result.kw.verdict == "borderline"):
        return "inconclusive"
    return "none_found"


def _on_cone_boundary(spec: DispersionSpec) -> bool:
    lam1, lam2 = spec.d1_pair.eigenvalues
    return min(lam1, lam2) <= get_config().tolerances.singularity * max(spec.d0, spec.d1)


def _evaluate_cell(args: CellArgs) -> RegionVerdict:
    """
    工作進程函數：評估單一格點。
    用於 ProcessPoolExecutor 的全域函數
    """
    row, col, k, d0, d1, d2, confirm, numeric_only, max_sweeps = args
    scale = d0 * d0
    if not cone_contains(k, d0, d1, d2):
        return RegionVerdict(
            row=row,
            col=col,
            d1=d1 / d0,
            d2=d2 / d0,
            boundary_value=boundary_value(k, d0, d1, d2) / scale,
            predicted="excluded",
        )

    spec = DispersionSpec(k=k, d0=d0, d1=d1, d2=d2)
    confirmed: Optional[Confirmed] = None
    support_orbits = 0
    if confirm and _on_cone_boundary(spec):
        # D 奇異或數值上奇異，不作求解確認
        confirmed = "inconclusive"
    elif confirm:
        options = NumericOptions(max_sweeps=max_sweeps)
        result = numeric_rhombic(spec, options) if numeric_only else solve(spec, options)
        confirmed = _confirmation(result)
        if isinstance(result.design, RhombicDesign):
            support_orbits = len(result.design.supported())

    return RegionVerdict(
        row=row,
        col=col,
        d1=d1 / d0,
        d2=d2 / d0,
        boundary_value=boundary_poly(spec) / scale,
        predicted=classify(spec),
        solver_confirmed=confirmed,
        support_orbits=support_orbits,
        spec=spec,
    )


def _run_cells(tasks: List[CellArgs], jobs: Optional[int], progress: bool, desc: str) -> List[RegionVerdict]:
    if jobs == 1:
        iterator = tqdm(tasks, desc=desc, unit="格", disable=not progress, file=sys.stderr)
        verdicts = [_evaluate_cell(task) for task in iterator]
    else:
        max_workers = jobs or min(mp.cpu_count(), 8)
        print(f"🔧 使用 {max_workers} 個並行進程評估 {len(tasks)} 個格點", file=sys.stderr)
        verdicts = []
        with ProcessPoolExecutor(max_workers=max_workers) as executor:
            futures = [executor.submit(_evaluate_cell, task) for task in tasks]
            with tqdm(total=len(tasks), desc=desc, unit="格", disable=not progress, file=sys.stderr) as pbar:
                for future in as_completed(futures):
                    verdicts.append(future.result())
                    pbar.update(1)
    return sorted(verdicts, key=lambda v: (v.row, v.col))


def _axis(bounds: Tuple[float, float], resolution: int) -> np.ndarray:
    lo, hi = bounds
    if resolution < 1:
        raise ValueError(f"resolution 必須 >= 1，收到 {resolution}")
    return np.linspace(lo, hi, resolution) if resolution > 1 else np.array([lo])


def region_map(
    k: int,
    d1_range: Optional[Tuple[float, float]] = None,
    d2_range: Optional[Tuple[float, float]] = None,
    resolution: int = 60,
    confirm: bool = False,
    jobs: Optional[int] = 1,
    progress: bool = False,
    d0: float = 1.0,
    max_sweeps: Optional[int] = None,
) -> List[RegionVerdict]:
    """
    在 d1 × d2 矩形網格上分類（row 對應 d1、col 對應 d2）。
    錐外格點標記 excluded；confirm 時以 solve 確認，每格交替輪數上限為 confirm_sweeps。
    """
    settings = get_config().sweep
    d1_values = _axis(d1_range or settings.d1_range, resolution)
    d2_values = _axis(d2_range or settings.d2_range, resolution)
    budget = max_sweeps or settings.confirm_sweeps
    tasks: List[CellArgs] = [
        (i, j, k, d0, float(d1), float(d2), confirm, False, budget)
        for i, d1 in enumerate(d1_values)
        for j, d2 in enumerate(d2_values)
    ]
    print(f"🔍 K={k} 區域圖: {resolution}×{resolution} 格點" + ("（求解器確認）" if confirm else ""), file=sys.stderr)
    return _run_cells(tasks, jobs, progress, f"📊 區域圖 K={k}")


def cone_grid(
    k: int, d1_range: Optional[Tuple[float, float]] = None, resolution: int = 40
) -> List[Tuple[int, int, float, float]]:
    """錐內網格：d2 = -d1/(K-1) + u·(d1 + d1/(K-1))，u = (j + 0.5)/n，不含錐邊界"""
    d1_values = _axis(d1_range or get_config().sweep.d1_range, resolution)
    cells = []
    for i, d1 in enumerate(d1_values):
        low = -d1 / (k - 1)
        for j in range(resolution):
            u = (j + 0.5) / resolution
            cells.append((i, j, float(d1), float(low + u * (d1 - low))))
    return cells


def conjecture_scan(
    k: int,
    resolution: int = 40,
    d1_range: Optional[Tuple[float, float]] = None,
    jobs: Optional[int] = 1,
    progress: bool = False,
    max_sweeps: Optional[int] = None,
) -> ScanSummary:
    """
    錐內網格上的 numeric_rhombic + kw_verify 掃描。

    偶數 K 預期沒有失敗格點；奇數 K 的失敗格點預期都落在 d2 > d1/2。
    找到的反例一律印出，不會被靜默略過。
    """
    budget = max_sweeps or get_config().sweep.confirm_sweeps
    tasks: List[CellArgs] = [
        (i, j, k, 1.0, d1, d2, True, True, budget) for i, j, d1, d2 in cone_grid(k, d1_range, resolution)
    ]
    print(f"🔍 K={k} 菱形設計掃描: {len(tasks)} 個錐內格點", file=sys.stderr)
    verdicts = _run_cells(tasks, jobs, progress, f"📊 掃描 K={k}")

    failures = [v for v in verdicts if v.solver_confirmed == "none_found"]
    inconclusive = sum(1 for v in verdicts if v.solver_confirmed == "inconclusive")
    if k % 2 == 0:
        consistent = not failures
    else:
        consistent = all(v.d2 > v.d1 / 2 for v in failures)

    for v in failures:
        side = "" if k % 2 == 1 and v.d2 > v.d1 / 2 else "（反例）"
        print(f"⚠️ 找不到最適菱形設計: d1={v.d1:.6g}, d2={v.d2:.6g}{side}", file=sys.stderr)
    if consistent:
        print(f"✅ K={k}: {len(failures)} 個失敗格點，與猜想一致", file=sys.stderr)
    else:
        print(f"❌ K={k}: 掃描結果與猜想不一致", file=sys.stderr)

    return ScanSummary(
        k=k,
        resolution=resolution,
        cells=len(verdicts),
        failures=len(failures),
        inconclusive=inconclusive,
        failure_fraction=len(failures) / len(verdicts) if verdicts else 0.0,
        failure_locations=[(v.d1, v.d2) for v in failures],
        consistent_with_conjecture=consistent,
        verdicts=verdicts,
    )


def consistency_violations(verdicts: List[RegionVerdict]) -> List[RegionVerdict]:
    """
    求解器確認結果與判別多項式矛盾的格點：
    含內點的最適設計必須落在 > 0 側，多軌道頂點最適設計必須落在 <= 0 側。
    邊界帶內與未確認的格點不列入。
    """
    violations = []
    for v in verdicts:
        if v.predicted in ("boundary", "excluded") or not math.isfinite(v.boundary_value):
            continue
        if v.solver_confirmed == "non_vertex" and v.predicted != "non_vertex":
            violations.append(v)
        elif v.solver_confirmed == "vertex" and v.support_orbits >= 2 and v.predicted != "vertex":
            violations.append(v)
    return violations
