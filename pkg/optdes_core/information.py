"""
optdes 資訊矩陣 (Information)
============================

菱形設計的資訊矩陣為區塊形式 M = diag(m0, M1)，M1 = SymPair(m1, m2)，
因此 log det M = log m0 + (K-1)·log(m1-m2) + log(m1+(K-1)m2)，
完全不需要稠密 LU。稠密路徑 info_dense 只用於交叉驗證與任意設計。

Γ(ξ) = pD - M(ξ)⁻¹ 同樣保有區塊結構 (γ0, γ1, γ2)。

Author: RhombicDesign Kit
Version: 1.0
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .config import get_config
from .designs import DiscreteDesign, RhombicDesign, orbit_cross_moment
from .errors import SingularityError
from .model_core import DispersionSpec, SymPair, dispersion_matrix, sym_inverse, variance_many


@dataclass(frozen=True)
class InfoBlocks:
    """M(ξ) = diag(m0, (m1-m2)I + m2·11ᵀ)"""

    k: int
    m0: float
    m1: float
    m2: float

    @property
    def slope(self) -> SymPair:
        return SymPair(self.m1, self.m2, self.k)

    @property
    def factors(self) -> Tuple[float, float, float]:
        """行列式的三個因子 (m0, m1-m2, m1+(K-1)m2)"""
        lam1, lam2 = self.slope.eigenvalues
        return self.m0, lam1, lam2


@dataclass(frozen=True)
class GammaBlocks:
    """Γ(ξ) = diag(γ0, (γ1-γ2)I + γ2·11ᵀ)"""

    k: int
    g0: float
    g1: float
    g2: float

    def dense(self) -> np.ndarray:
        gamma = np.zeros((self.k + 1, self.k + 1))
        gamma[0, 0] = self.g0
        gamma[1:, 1:] = SymPair(self.g1, self.g2, self.k).dense()
        return gamma

    @property
    def max_abs(self) -> float:
        return max(abs(self.g0), abs(self.g1), abs(self.g2))


def orbit_coefficients(
    spec: DispersionSpec, ells: Sequence[int], levels: Sequence[float]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    每個軌道單位權重對三個行列式因子的貢獻 (α, β, γ)：

        m0 = Σ w·α,   m1 - m2 = Σ w·β,   m1 + (K-1)m2 = Σ w·γ

    其中 α = 1/σ², β = t²(1-c_ℓ)/σ², γ = t²(1+(K-1)c_ℓ)/σ²。
    """
    k = spec.k
    cross = np.array([orbit_cross_moment(k, int(ell)) for ell in ells])
    tau = np.asarray(levels, dtype=float) ** 2
    sigma2 = spec.d0 + tau * (k * spec.d1 + k * (k - 1) * cross * spec.d2)
    if np.any(sigma2 <= get_config().tolerances.singularity * max(spec.d0, 1.0)):
        raise SingularityError(f"軌道變異數非正: {sigma2.tolist()}")
    alpha = 1.0 / sigma2
    beta = tau * (1.0 - cross) * alpha
    gamma = tau * (1.0 + (k - 1) * cross) * alpha
    return alpha, beta, gamma


def blocks_from_factors(k: int, m0: float, lam1: float, lam2: float) -> InfoBlocks:
    return InfoBlocks(k=k, m0=m0, m1=(lam2 + (k - 1) * lam1) / k, m2=(lam2 - lam1) / k)


def info_blocks_rhombic(spec: DispersionSpec, rd: RhombicDesign) -> InfoBlocks:
    """菱形設計的區塊資訊矩陣（零權重軌道不影響結果）"""
    if rd.k != spec.k:
        raise ValueError(f"設計維度 K={rd.k} 與模型 K={spec.k} 不符")
    alpha, beta, gamma = orbit_coefficients(spec, rd.ells, rd.levels)
    w = rd.weights
    return blocks_from_factors(spec.k, float(w @ alpha), float(w @ beta), float(w @ gamma))


def info_dense(spec: DispersionSpec, dd: DiscreteDesign) -> np.ndarray:
    """M(ξ) = Σ ξ(x_j)·f(x_j)f(x_j)ᵀ/σ²(x_j)，(K+1)×(K+1) 稠密矩陣"""
    if dd.k != spec.k:
        raise ValueError(f"設計維度 K={dd.k} 與模型 K={spec.k} 不符")
    support = dd.support
    sigma2 = variance_many(spec, support)
    if np.any(sigma2 <= get_config().tolerances.singularity * max(spec.d0, 1.0)):
        raise SingularityError(f"支撐點變異數非正: {sigma2.tolist()}")
    regressors = np.hstack((np.ones((support.shape[0], 1)), support))
    scaled = regressors * (dd.weights / sigma2)[:, None]
    info = scaled.T @ regressors
    return 0.5 * (info + info.T)


def block_embed(ib: InfoBlocks) -> np.ndarray:
    dense = np.zeros((ib.k + 1, ib.k + 1))
    dense[0, 0] = ib.m0
    dense[1:, 1:] = ib.slope.dense()
    return dense


def blocks_from_dense(info: np.ndarray) -> InfoBlocks:
    """把不變設計的稠密資訊矩陣縮回 (m0, m1, m2)"""
    k = info.shape[0] - 1
    slope = info[1:, 1:]
    m1 = float(np.mean(np.diag(slope)))
    m2 = float((slope.sum() - np.trace(slope)) / (k * (k - 1))) if k > 1 else 0.0
    return InfoBlocks(k=k, m0=float(info[0, 0]), m1=m1, m2=m2)


def log_det(ib: InfoBlocks) -> float:
    """
    log det M = log m0 + (K-1)·log(m1-m2) + log(m1+(K-1)m2)。

    任一因子不為正（含相對於 singularity 容許量的數值零）時回傳 -inf，
    讓最佳化器把奇異設計當成最差值而不是例外。
    """
    m0, lam1, lam2 = ib.factors
    scale = max(abs(m0), abs(lam1), abs(lam2))
    floor = get_config().tolerances.singularity * scale
    if m0 <= floor or lam1 <= floor or lam2 <= floor:
        return -math.inf
    return math.log(m0) + (ib.k - 1) * math.log(lam1) + math.log(lam2)


def log_det_dense(info: np.ndarray) -> float:
    sign, value = np.linalg.slogdet(info)
    if sign <= 0:
        return -math.inf
    eigenvalues = np.linalg.eigvalsh(info)
    if eigenvalues[0] <= get_config().tolerances.singularity * max(eigenvalues[-1], 0.0):
        return -math.inf
    return float(value)


def target_info_blocks(spec: DispersionSpec) -> InfoBlocks:
    """非頂點最適設計的目標 M = D⁻¹/(K+1)；D 奇異時拋出 SingularityError"""
    p = spec.p
    inverse = sym_inverse(spec.d1_pair)
    return InfoBlocks(k=spec.k, m0=1.0 / (p * spec.d0), m1=inverse.a1 / p, m2=inverse.a2 / p)


def gamma_blocks(spec: DispersionSpec, ib: InfoBlocks) -> GammaBlocks:
    """γ0 = (K+1)d0 - 1/m0，(γ1, γ2) = (K+1)(d1, d2) - M1⁻¹"""
    if ib.m0 <= 0:
        raise SingularityError(f"m0={ib.m0} 不為正，資訊矩陣奇異")
    inverse = sym_inverse(ib.slope)
    p = spec.p
    return GammaBlocks(
        k=spec.k,
        g0=p * spec.d0 - 1.0 / ib.m0,
        g1=p * spec.d1 - inverse.a1,
        g2=p * spec.d2 - inverse.a2,
    )


def gamma_dense(spec: DispersionSpec, info: np.ndarray) -> np.ndarray:
    """非不變設計的完整 Γ = pD - M⁻¹"""
    if not math.isfinite(log_det_dense(info)):
        raise SingularityError("資訊矩陣奇異，無法計算 Γ")
    gamma = spec.p * dispersion_matrix(spec) - np.linalg.inv(info)
    return 0.5 * (gamma + gamma.T)


def directional_values(spec: DispersionSpec, info: np.ndarray, points: np.ndarray) -> np.ndarray:
    """等價定理的原始形式 f(x)ᵀM⁻¹f(x)/σ²(x)，D-最適時處處 <= p"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    regressors = np.hstack((np.ones((points.shape[0], 1)), points))
    solved = np.linalg.solve(info, regressors.T).T
    return np.einsum("ij,ij->i", regressors, solved) / variance_many(spec, points)


def det_k2_closed(spec: DispersionSpec, x0: float, x1: float, w: float) -> float:
    """
    K=2 菱形設計 ξ_{x0◇x1, w} 的封閉行列式：

        det M = 4·(w·σ²(-x1,x1) + (1-w)·σ²(x0,x0))·w(1-w)·x0²x1² / (σ²(x0,x0)·σ²(-x1,x1))²
    """
    if spec.k != 2:
        raise ValueError("det_k2_closed 只適用於 K=2")
    s0 = spec.d0 + 2 * spec.d1 * x0 * x0 + 2 * spec.d2 * x0 * x0
    s1 = spec.d0 + 2 * spec.d1 * x1 * x1 - 2 * spec.d2 * x1 * x1
    return 4.0 * (w * s1 + (1 - w) * s0) * w * (1 - w) * x0 * x0 * x1 * x1 / (s0 * s1) ** 2


def d_efficiency(log_det_design: float, log_det_reference: float, p: int) -> float:
    """D-效率 (det M / det M*)^{1/p}"""
    if not math.isfinite(log_det_design):
        return 0.0
    return math.exp((log_det_design - log_det_reference) / p)
