"""
optdes 等價定理驗證器 (Equivalence Verifier)
==========================================

敏感度函數 ψ(x; ξ) = f(x)ᵀ Γ(ξ) f(x)，Γ = pD - M(ξ)⁻¹。
ξ 為 D-最適 ⇔ ψ 在整個 [-1,1]^K 上非負，且在支撐點上等於 0。

不變設計的 Γ 為區塊形式，ψ = γ0 + a‖x‖² + b·s²（a = γ1-γ2, b = γ2,
s = Σx_i），箱型約束下的全域最小值可以精確列舉求得。
非不變設計退回稠密網格 + L-BFGS-B 局部細化。

Author: RhombicDesign Kit
Version: 1.0
"""

import itertools
import math
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import optimize

from .config import get_config
from .designs import DiscreteDesign, is_invariant
from .errors import SingularityError
from .information import (
    GammaBlocks,
    blocks_from_dense,
    gamma_blocks,
    gamma_dense,
    info_dense,
    log_det_dense,
)
from .model_core import DispersionSpec, regression_vector

Verdict = Literal["optimal", "not_optimal", "borderline"]

# 稠密網格分塊大小，避免 33^4 網格一次展開
_CHUNK = 200_000
# 平手判定：相對於 max(1, |min|) 的比例
_TIE_RTOL = 1e-12


class SupportPsi(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: List[float]
    psi: float


class KWReport(BaseModel):
    """Kiefer-Wolfowitz 判定結果"""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    verdict: Verdict
    min_psi: float
    argmin: List[float]
    support: List[SupportPsi]
    tolerance: float
    log_det: float
    explanation: str = ""

    @property
    def is_optimal(self) -> bool:
        return self.verdict == "optimal"

    @property
    def max_support_abs(self) -> float:
        return max((abs(s.psi) for s in self.support), default=0.0)


def psi(gb: GammaBlocks, x: Sequence[float]) -> float:
    """ψ(x) = γ0 + (γ1-γ2)‖x‖² + γ2·(Σx_i)²"""
    point = regression_vector(x, gb.k)[1:]
    sq = float(point @ point)
    total = float(point.sum())
    return gb.g0 + (gb.g1 - gb.g2) * sq + gb.g2 * total * total


def psi_many(gb: GammaBlocks, points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    sq = np.einsum("ij,ij->i", points, points)
    total = points.sum(axis=1)
    return gb.g0 + (gb.g1 - gb.g2) * sq + gb.g2 * total * total


def psi_dense(gamma: np.ndarray, points: np.ndarray) -> np.ndarray:
    """一般 Γ 的 ψ，逐列計算 f(x)ᵀΓf(x)"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    regressors = np.hstack((np.ones((points.shape[0], 1)), points))
    return np.einsum("ij,jk,ik->i", regressors, gamma, regressors)


def _box_candidates(gb: GammaBlocks) -> List[Tuple[float, ...]]:
    """
    ψ 的 KKT 候選點（以排序後座標表示）。

    n₋ 個座標在 -1、n₊ 個在 +1，其餘 n_c 個自由座標共用 c，
    由 a·c + b·s = 0 得 c = -b(n₊-n₋)/(a + b·n_c)。分母為 0 時該族
    沿自由方向為常數，由邊界情形涵蓋。
    """
    k = gb.k
    a = gb.g1 - gb.g2
    b = gb.g2
    candidates = {tuple([0.0] * k)}
    for n_minus in range(k + 1):
        for n_plus in range(k + 1 - n_minus):
            n_free = k - n_minus - n_plus
            if n_free == 0:
                candidates.add(tuple([-1.0] * n_minus + [1.0] * n_plus))
                continue
            denom = a + b * n_free
            if denom == 0.0:
                continue
            c = -b * (n_plus - n_minus) / denom + 0.0
            if abs(c) > 1.0:
                continue
            candidates.add(tuple(sorted([-1.0] * n_minus + [c] * n_free + [1.0] * n_plus)))
    return sorted(candidates)


def min_psi_box(gb: GammaBlocks, k: Optional[int] = None) -> Tuple[float, np.ndarray]:
    """
    ψ 在 [-1,1]^K 上的精確全域最小值與最小點。

    候選數為 O(K²)；平手時取字典序最小的候選點，結果可重現。
    """
    if k is not None and k != gb.k:
        raise ValueError(f"K={k} 與 GammaBlocks.k={gb.k} 不符")
    candidates = _box_candidates(gb)
    values = psi_many(gb, np.array(candidates))
    best = float(values.min())
    cutoff = best + _TIE_RTOL * max(1.0, abs(best))
    argmin = next(c for c, v in zip(candidates, values) if v <= cutoff)
    point = np.array(argmin)
    return float(psi_many(gb, point)[0]), point


def _dense_grid_chunks(k: int, n: int):
    axis = np.linspace(-1.0, 1.0, n)
    batch: List[Tuple[float, ...]] = []
    for combo in itertools.product(axis, repeat=k):
        batch.append(combo)
        if len(batch) >= _CHUNK:
            yield np.array(batch)
            batch = []
    if batch:
        yield np.array(batch)


def min_psi_dense(
    gamma: np.ndarray,
    k: int,
    grid_points: Optional[int] = None,
    refine_starts: Optional[int] = None,
) -> Tuple[float, np.ndarray]:
    """完整 Γ 的盡力最小化：稠密網格掃描後，從最佳數點以 L-BFGS-B 細化"""
    settings = get_config().sweep
    n = grid_points or settings.grid_points_for(k)
    starts = refine_starts or settings.refine_starts

    best_points = np.empty((0, k))
    best_values = np.empty(0)
    for chunk in _dense_grid_chunks(k, n):
        values = psi_dense(gamma, chunk)
        pool_points = np.vstack((best_points, chunk))
        pool_values = np.concatenate((best_values, values))
        keep = np.argsort(pool_values, kind="stable")[:starts]
        best_points, best_values = pool_points[keep], pool_values[keep]

    def objective(x: np.ndarray) -> Tuple[float, np.ndarray]:
        f = np.concatenate(([1.0], x))
        gf = gamma @ f
        return float(f @ gf), 2.0 * gf[1:]

    point, value = best_points[0], float(best_values[0])
    for start in best_points:
        res = optimize.minimize(objective, start, jac=True, method="L-BFGS-B", bounds=[(-1.0, 1.0)] * k)
        candidate = np.clip(res.x, -1.0, 1.0)
        candidate_value = float(psi_dense(gamma, candidate)[0])
        if candidate_value < value:
            point, value = candidate, candidate_value
    return value, point


def vertex_conditions(gb: GammaBlocks, tol: float) -> bool:
    """頂點最適的結構：γ2 = 0、γ1 = -γ0/K、γ0 >= 0"""
    return abs(gb.g2) <= tol and abs(gb.g1 + gb.g0 / gb.k) <= tol and gb.g0 >= -tol


def nonvertex_condition(gb: GammaBlocks, tol: float) -> bool:
    """含內點的最適設計必須滿足 Γ = 0，亦即 M = D⁻¹/(K+1)"""
    return gb.max_abs <= tol


def _verdict(min_value: float, support_values: np.ndarray, tol: float) -> Verdict:
    if min_value >= -tol and np.all(np.abs(support_values) <= tol):
        return "optimal"
    if abs(min_value) < 10.0 * tol:
        return "borderline"
    return "not_optimal"


def kw_verify(spec: DispersionSpec, dd: DiscreteDesign, tolerance: Optional[float] = None) -> KWReport:
    """
    對任意離散設計做等價定理判定。

    資訊矩陣奇異時不拋例外，直接回傳 not_optimal 並附上說明。
    """
    tol = tolerance if tolerance is not None else get_config().tolerances.kw
    support = dd.support

    try:
        info = info_dense(spec, dd)
    except SingularityError as e:
        info, reason = None, str(e)
    else:
        reason = "資訊矩陣奇異（支撐不足以估計所有參數）"
    if info is None or not math.isfinite(log_det_dense(info)):
        return KWReport(
            verdict="not_optimal",
            min_psi=-math.inf,
            argmin=[0.0] * spec.k,
            support=[SupportPsi(x=list(x), psi=-math.inf) for x in support.tolist()],
            tolerance=tol,
            log_det=-math.inf,
            explanation=reason,
        )

    if is_invariant(dd):
        gb = gamma_blocks(spec, blocks_from_dense(info))
        min_value, argmin = min_psi_box(gb)
        support_values = psi_many(gb, support)
        method = "區塊 Γ，精確箱型最小化"
    else:
        gamma = gamma_dense(spec, info)
        min_value, argmin = min_psi_dense(gamma, spec.k)
        support_values = psi_dense(gamma, support)
        method = "稠密 Γ，網格 + L-BFGS-B（盡力而為）"

    lowest = int(np.argmin(support_values))
    if support_values[lowest] < min_value:
        min_value, argmin = float(support_values[lowest]), support[lowest].copy()

    verdict = _verdict(min_value, support_values, tol)
    if verdict == "optimal":
        explanation = f"{method}: min ψ >= -{tol:g} 且支撐點 ψ = 0"
    else:
        explanation = (
            f"{method}: min ψ = {min_value:.3e}, 支撐點 max|ψ| = {np.abs(support_values).max():.3e}"
        )

    return KWReport(
        verdict=verdict,
        min_psi=float(min_value),
        argmin=[float(c) for c in argmin],
        support=[SupportPsi(x=list(x), psi=float(v)) for x, v in zip(support.tolist(), support_values)],
        tolerance=tol,
        log_det=log_det_dense(info),
        explanation=explanation,
    )
