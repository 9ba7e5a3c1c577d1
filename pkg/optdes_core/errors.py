"""optdes 例外階層。CLI 依類別決定結束碼 (DomainError → 2, ConvergenceError → 3)。"""

from typing import Optional


class OptDesError(Exception):
    """所有 optdes 例外的基底類別"""


class DomainError(OptDesError, ValueError):
    """輸入超出定義域：點不在超立方體、參數不在模型錐、軌道索引錯誤、設計檔格式錯誤"""


class SingularityError(OptDesError, ArithmeticError):
    """完全對稱矩陣或資訊矩陣奇異、變異數非正"""


class ConvergenceError(OptDesError, RuntimeError):
    """迭代達到上限仍未滿足收斂條件"""

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class InconsistencyError(OptDesError, RuntimeError):
    """封閉解在其區域內找不到可行根（理論上不可達）"""


class ConfigError(OptDesError, ValueError):
    """設定檔或環境變數錯誤"""
