"""
optdes 模型核心 (Model Core)
===========================

隨機係數多元線性迴歸 Y = f(x)ᵀb + ε 在 [-1,1]^K 上的模型參數：

- DispersionSpec: 分散矩陣 D = diag(d0, D1)，D1 = (d1-d2)I + d2·11ᵀ
- SymPair: K×K 完全對稱矩陣 (a1-a2)I + a2·11ᵀ 的兩參數表示
- 迴歸向量 f(x) = (1, x_1, ..., x_K)ᵀ 與變異數函數 σ²(x) = f(x)ᵀ D f(x)

d0 已併入觀測誤差變異數 σ_ε²，不另外保存。熱路徑一律使用
(d0, SymPair(d1, d2)) 區塊形式，不建立稠密 D。

Author: RhombicDesign Kit
Version: 1.0
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .config import get_config
from .errors import DomainError, SingularityError

# 超立方體邊界的浮點容許量，僅吸收序列化誤差
_BOX_SLACK = 1e-12


@dataclass(frozen=True)
class SymPair:
    """完全對稱矩陣 (a1 - a2)·I + a2·11ᵀ，a1 為對角、a2 為非對角元素"""

    a1: float
    a2: float
    k: int

    @property
    def eigenvalues(self) -> Tuple[float, float]:
        """(a1 - a2, a1 + (K-1)·a2)，前者重數 K-1，後者重數 1"""
        return self.a1 - self.a2, self.a1 + (self.k - 1) * self.a2

    def is_invertible(self, tol: float = 0.0) -> bool:
        scale = max(abs(self.a1), abs(self.a2))
        lam1, lam2 = self.eigenvalues
        return abs(lam1) > tol * scale and abs(lam2) > tol * scale

    def dense(self) -> np.ndarray:
        return (self.a1 - self.a2) * np.eye(self.k) + self.a2 * np.ones((self.k, self.k))


class DispersionSpec(BaseModel):
    """分散矩陣參數 (K, d0, d1, d2)；建構時檢查是否位於模型錐內"""

    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=2)
    d0: float
    d1: float
    d2: float = 0.0

    @model_validator(mode="after")
    def _check_cone(self) -> "DispersionSpec":
        slack = get_config().tolerances.cone_slack
        if not cone_contains(self.k, self.d0, self.d1, self.d2, slack=slack):
            raise ValueError(
                f"(d0={self.d0}, d1={self.d1}, d2={self.d2}) 不在 K={self.k} 的模型錐內: "
                f"需要 d0>0, d1>0, -d1/(K-1) <= d2 <= d1"
            )
        return self

    @property
    def p(self) -> int:
        return self.k + 1

    @property
    def d1_pair(self) -> SymPair:
        return SymPair(self.d1, self.d2, self.k)

    @property
    def is_positive_definite(self) -> bool:
        lam1, lam2 = self.d1_pair.eigenvalues
        return self.d0 > 0 and lam1 > 0 and lam2 > 0

    def scaled(self, factor: float) -> "DispersionSpec":
        if not factor > 0:
            raise DomainError(f"縮放因子必須為正數，收到 {factor}")
        return DispersionSpec(k=self.k, d0=self.d0 * factor, d1=self.d1 * factor, d2=self.d2 * factor)

    def normalized(self) -> "DispersionSpec":
        """商形式：d0 = 1，區域分類只依賴 d1/d0 與 d2/d0"""
        return self.scaled(1.0 / self.d0)


def cone_contains(k: int, d0: float, d1: float, d2: float, slack: float = 0.0) -> bool:
    """模型錐 C_K: d0 > 0, d1 > 0, -d1/(K-1) <= d2 <= d1（邊界包含在內）"""
    if k < 2:
        return False
    if not all(math.isfinite(v) for v in (d0, d1, d2)):
        return False
    if d0 <= 0 or d1 <= 0:
        return False
    return -d1 / (k - 1) - slack <= d2 <= d1 + slack


def _as_point(x: Sequence[float], k: int = 0) -> np.ndarray:
    point = np.asarray(x, dtype=float)
    if point.ndim != 1:
        raise DomainError(f"設計點必須是一維向量，收到形狀 {point.shape}")
    if k and point.shape[0] != k:
        raise DomainError(f"設計點維度為 {point.shape[0]}，預期 K={k}")
    if not np.all(np.isfinite(point)) or np.any(np.abs(point) > 1.0 + _BOX_SLACK):
        raise DomainError(f"設計點 {point.tolist()} 不在 [-1,1]^K 內")
    return point


def regression_vector(x: Sequence[float], k: int = 0) -> np.ndarray:
    """f(x) = (1, x_1, ..., x_K)ᵀ"""
    point = _as_point(x, k)
    return np.concatenate(([1.0], point))


def variance_at(spec: DispersionSpec, x: Sequence[float]) -> float:
    """σ²(x) = d0 + d1·Σx_i² + 2·d2·Σ_{i<j} x_i x_j"""
    point = _as_point(x, spec.k)
    sq = float(point @ point)
    total = float(point.sum())
    return spec.d0 + spec.d1 * sq + spec.d2 * (total * total - sq)


def variance_many(spec: DispersionSpec, points: np.ndarray) -> np.ndarray:
    """對 (n, K) 點陣列逐列計算 σ²，不做邊界檢查"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    sq = np.einsum("ij,ij->i", points, points)
    total = points.sum(axis=1)
    return spec.d0 + spec.d1 * sq + spec.d2 * (total * total - sq)


def sym_inverse(m: SymPair, tol: float = -1.0) -> SymPair:
    """
    完全對稱矩陣的逆矩陣，仍為完全對稱：

        A⁻¹ = I/(a1-a2) - a2·11ᵀ / ((a1-a2)(a1+(K-1)a2))
    """
    if tol < 0:
        tol = get_config().tolerances.singularity
    if not m.is_invertible(tol):
        raise SingularityError(
            f"完全對稱矩陣 (a1={m.a1}, a2={m.a2}, K={m.k}) 奇異，特徵值 {m.eigenvalues}"
        )
    lam1, lam2 = m.eigenvalues
    off = -m.a2 / (lam1 * lam2)
    return SymPair(1.0 / lam1 + off, off, m.k)


def dispersion_matrix(spec: DispersionSpec) -> np.ndarray:
    """稠密 D，只用於交叉驗證與非不變設計"""
    dense = np.zeros((spec.p, spec.p))
    dense[0, 0] = spec.d0
    dense[1:, 1:] = spec.d1_pair.dense()
    return dense


def dispersion_inverse_blocks(spec: DispersionSpec) -> Tuple[float, SymPair]:
    """D⁻¹ 的區塊形式 (1/d0, D1⁻¹)；D 落在錐邊界時奇異"""
    return 1.0 / spec.d0, sym_inverse(spec.d1_pair)


def boundary_value(k: int, d0: float, d1: float, d2: float) -> float:
    """不檢查模型錐的判別多項式值，掃描時也用於錐外格點"""
    return (d1 - d2) * (d1 + (k - 1) * d2) - d0 * (d1 + (k - 2) * d2)


def boundary_poly(spec: DispersionSpec) -> float:
    """
    區域判別多項式 (d1-d2)(d1+(K-1)d2) - d0(d1+(K-2)d2)。

    <= 0 是頂點設計最適的必要條件，> 0 是內點設計最適的必要條件。
    """
    return boundary_value(spec.k, spec.d0, spec.d1, spec.d2)


def signed_permutation(x: Sequence[float], perm: Sequence[int], flip: bool = False) -> np.ndarray:
    """群作用 Sym(K) × {±1}：先依 perm 重排座標，再視 flip 做整體變號"""
    point = np.asarray(x, dtype=float)[list(perm)]
    return -point if flip else point
