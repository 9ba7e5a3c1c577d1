"""
RhombicDesign Kit Core
======================

隨機係數多元線性迴歸在 [-1,1]^K 上的 D-最適設計工具包。

模組列表:
- model_core: 模型參數、變異數函數、完全對稱矩陣代數
- designs: 離散設計與菱形設計
- information: 區塊資訊矩陣、log det、Γ
- equivalence: 敏感度函數與等價定理驗證
- solvers: 封閉解、數值菱形求解器、網格 oracle
- regions: 判別多項式與區域掃描
- report_writer: JSON / CSV 輸出
- cli: 命令列介面

Author: RhombicDesign Kit
Version: 1.0
"""

__version__ = "1.0"
__author__ = "RhombicDesign Kit"

__all__ = [
    "__version__",
    "__author__",
    "DispersionSpec",
    "SymPair",
    "DiscreteDesign",
    "RhombicDesign",
    "Orbit",
    "InfoBlocks",
    "GammaBlocks",
    "KWReport",
    "SolveResult",
    "NumericOptions",
    "RegionVerdict",
    "ScanSummary",
    "kw_verify",
    "solve",
    "region_map",
    "conjecture_scan",
]

from .model_core import DispersionSpec, SymPair
from .designs import DiscreteDesign, Orbit, RhombicDesign
from .information import GammaBlocks, InfoBlocks
from .equivalence import KWReport, kw_verify
from .solvers import NumericOptions, SolveResult, solve
from .regions import RegionVerdict, ScanSummary, conjecture_scan, region_map
