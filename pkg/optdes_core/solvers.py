"""
optdes 求解器 (Solvers)
======================

產生候選最適設計：

- closed_form_k2 / closed_form_k3: K=2、K=3 的封閉解（依區域條件選擇情形）
- numeric_rhombic: 任意 K 的菱形設計數值解（乘法權重演算法 + 位置線搜尋）
- grid_oracle: 均勻網格上的乘法演算法，獨立的暴力交叉驗證
- solve: 調度器，封閉解優先、數值解備援

所有回傳設計一律以 kw_verify 在整個超立方體上重新驗證；區域條件只用來
挑選公式，不作為最適性的證明。

Author: RhombicDesign Kit
Version: 1.0
"""

import math
from dataclasses import dataclass
from typing import Annotated, Callable, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import optimize
from scipy.cluster import hierarchy

from .config import get_config
from .designs import (
    DiscreteDesign,
    Orbit,
    RhombicDesign,
    is_uniform_factorial,
    orbit_cross_moment,
    orbit_size,
    to_discrete,
)
from .equivalence import KWReport, kw_verify
from .errors import ConvergenceError, DomainError, InconsistencyError, SingularityError
from .information import (
    blocks_from_factors,
    gamma_blocks,
    info_blocks_rhombic,
    log_det,
    log_det_dense,
    orbit_coefficients,
    target_info_blocks,
)
from .model_core import DispersionSpec, boundary_poly, variance_many

Method = Literal["closed_form_k2", "closed_form_k3", "numeric_rhombic", "oracle"]
Status = Literal["solved", "best_effort", "no_closed_form"]

# 位置視為頂點的容許量
_VERTEX_TOL = 1e-9


class SolveResult(BaseModel):
    """求解結果；status = solved 時 kw.verdict 必為 optimal"""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    method: Method
    status: Status
    region_label: str
    log_det: float
    design: Optional[Annotated[Union[RhombicDesign, DiscreteDesign], Field(discriminator="format")]] = None
    kw: Optional[KWReport] = None
    sweeps: int = 0
    converged: bool = True
    alternatives: List["SolveResult"] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)

    @property
    def is_optimal(self) -> bool:
        return self.kw is not None and self.kw.is_optimal


class NumericOptions(BaseModel):
    """numeric_rhombic 的預算；None 表示採用 config.json 的值"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    max_sweeps: Optional[int] = Field(None, ge=1)
    vertex_only: bool = False
    level_starts: Optional[Tuple[float, ...]] = None
    polish: bool = True
    tolerance: Optional[float] = Field(None, gt=0)


def side_label(spec: DispersionSpec) -> str:
    """依判別多項式的符號標示區域（帶寬內為 boundary）"""
    value = boundary_poly(spec)
    band = get_config().tolerances.boundary_band * spec.d0 * spec.d0
    if value <= -band:
        return "vertex_side"
    if value >= band:
        return "non_vertex_side"
    return "boundary"


def _finalize(
    spec: DispersionSpec,
    rd: RhombicDesign,
    method: Method,
    region_label: str,
    tolerance: Optional[float] = None,
    **extra,
) -> SolveResult:
    kw = kw_verify(spec, to_discrete(rd), tolerance)
    return SolveResult(
        method=method,
        status="solved" if kw.is_optimal else "best_effort",
        region_label=region_label,
        log_det=log_det(info_blocks_rhombic(spec, rd)),
        design=rd,
        kw=kw,
        **extra,
    )


def _sqrt_or_nan(value: float) -> float:
    return math.sqrt(value) if value >= 0 else math.nan


def _two_orbit_design(k: int, x0: float, x1: float, w: float) -> Optional[RhombicDesign]:
    """ℓ=0 權重 w、ℓ=1 權重 1-w；位置或權重不可行時回傳 None"""
    slack = 1e-12
    values = (x0, x1, w)
    if not all(math.isfinite(v) for v in values):
        return None
    if not (0.0 < x0 <= 1.0 + slack and 0.0 < x1 <= 1.0 + slack):
        return None
    if not (-slack <= w <= 1.0 + slack):
        return None
    w = min(max(w, 0.0), 1.0)
    return RhombicDesign(
        k=k,
        orbits=[
            Orbit(ell=0, level=min(x0, 1.0), weight=w),
            Orbit(ell=1, level=min(x1, 1.0), weight=1.0 - w),
        ],
    )


def _diagonal_case(spec: DispersionSpec, options: Optional[NumericOptions] = None) -> SolveResult:
    """d2 = 0：數值求解並檢查均勻全因子結構"""
    result = numeric_rhombic(spec, options)
    if isinstance(result.design, RhombicDesign):
        uniform = is_uniform_factorial(result.design)
        note = "對角 D：均勻 2^K 全因子結構" + ("成立" if uniform else "不成立")
        result = result.model_copy(update={"notes": result.notes + [note]})
    return result


def closed_form_k2(spec: DispersionSpec, tolerance: Optional[float] = None) -> SolveResult:
    """
    K=2 的封閉解，三個區域（邊界歸屬編號較小的情形）：

    (i)   d0 <= d1-|d2|：w = 1/2，x0 = √(d0/(d1+d2))，x1 = √(d0/(d1-d2))
    (ii)  d1-|d2| <= d0 <= (d1²-d2²)/d1：一個內點軌道 + 一個頂點軌道
    (iii) d0 >= (d1²-d2²)/d1：頂點設計，w 解二次方程
          12d2·w² - (12d2+4d1+2d0)·w + (2d2+2d1+d0) = 0
    """
    if spec.k != 2:
        raise DomainError(f"closed_form_k2 只適用於 K=2，收到 K={spec.k}")
    if spec.d2 == 0:
        return _diagonal_case(spec, NumericOptions(tolerance=tolerance))

    d0, d1, d2 = spec.d0, spec.d1, spec.d2
    lower = d1 - abs(d2)
    upper = (d1 * d1 - d2 * d2) / d1

    if d0 <= lower:
        rd = _two_orbit_design(2, math.sqrt(d0 / (d1 + d2)), math.sqrt(d0 / (d1 - d2)), 0.5)
        label = "k2_case_i"
    elif d0 <= upper:
        if d2 > 0:
            w = 2.0 / 3.0 - d0 / (6.0 * (d1 - d2))
            x0 = _sqrt_or_nan((d1 - d2) / (d1 + d2) * d0 / (2.0 * (d1 - d2) - d0))
            rd = _two_orbit_design(2, x0, 1.0, w)
        else:
            w = 1.0 / 3.0 + d0 / (6.0 * (d1 + d2))
            x1 = _sqrt_or_nan((d1 + d2) / (d1 - d2) * d0 / (2.0 * (d1 + d2) - d0))
            rd = _two_orbit_design(2, 1.0, x1, w)
        label = "k2_case_ii"
    else:
        return _k2_vertex_case(spec, tolerance)

    if rd is None:
        raise InconsistencyError(f"{label} 在 (d0={d0}, d1={d1}, d2={d2}) 得到不可行的位置或權重")
    return _finalize(spec, rd, "closed_form_k2", label, tolerance)


def _k2_vertex_case(spec: DispersionSpec, tolerance: Optional[float]) -> SolveResult:
    d0, d1, d2 = spec.d0, spec.d1, spec.d2
    coefficients = [12.0 * d2, -(12.0 * d2 + 4.0 * d1 + 2.0 * d0), 2.0 * d2 + 2.0 * d1 + d0]
    roots = np.roots(coefficients)
    admissible = sorted(
        float(r.real) for r in roots if abs(r.imag) <= 1e-12 and 0.0 < r.real < 1.0
    )
    if not admissible:
        raise InconsistencyError(
            f"k2_case_iii 的權重方程式在 (0,1) 內無根 (d0={d0}, d1={d1}, d2={d2})"
        )

    results = [
        _finalize(spec, _two_orbit_design(2, 1.0, 1.0, w), "closed_form_k2", "k2_case_iii", tolerance)
        for w in admissible
    ]
    return next((r for r in results if r.is_optimal), results[0])


def _k3_case_iv_weight(d0: float, d1: float, d2: float) -> float:
    denom = 64.0 * d2 * (d0 - 3.0 * d2 + 3.0 * d1)
    head = 3 * d0**2 + 22 * d0 * d2 + 18 * d0 * d1 - 120 * d2**2 + 66 * d2 * d1 + 27 * d1**2
    radicand = (d0 - 2 * d2 + 3 * d1) ** 2 * (
        d0**2 + 8 * d0 * d2 + 6 * d0 * d1 + 48 * d2**2 + 24 * d2 * d1 + 9 * d1**2
    )
    return (head - 3.0 * math.sqrt(radicand)) / denom


def _box_margin(rd: RhombicDesign) -> float:
    """內點位置離箱面 (1 - x) 與權重離單形邊界的最小距離"""
    margins = [1.0 - o.level for o in rd.orbits if o.level < 1.0 - _VERTEX_TOL]
    margins += [min(o.weight, 1.0 - o.weight) for o in rd.orbits]
    return min(margins)


def closed_form_k3(spec: DispersionSpec, tolerance: Optional[float] = None) -> SolveResult:
    """
    K=3 的封閉解。依序檢查 (i)、(ii)/(iii)、(iv) 的條件；
    d2 > d1/2 且 3d0 + 9d1 <= 22d2 為未涵蓋區域，回傳 no_closed_form。
    (i)–(iii) 的設計滿足 M(ξ*) = D⁻¹/4。
    """
    if spec.k != 3:
        raise DomainError(f"closed_form_k3 只適用於 K=3，收到 K={spec.k}")
    if spec.d2 == 0:
        return _diagonal_case(spec, NumericOptions(tolerance=tolerance))

    d0, d1, d2 = spec.d0, spec.d1, spec.d2
    notes: List[str] = []

    guard_i = (d0 < d1 + d2 and 0 < d2 < d1 / 2) or (
        d2 < 0 and d0 < (d1 + 2 * d2) ** 2 / (d1 - 2 * d2)
    )
    if guard_i:
        rd = _two_orbit_design(
            3, math.sqrt(d0 * (d1 - 2 * d2)) / (d1 + 2 * d2), math.sqrt(d0 / (d1 - 2 * d2)), 0.25
        )
        if rd is not None:
            return _finalize(spec, rd, "closed_form_k3", "k3_case_i", tolerance)
        notes.append("k3_case_i 條件成立但位置超出 [-1,1]，改查其他情形")

    if d2 < d1 / 2 and boundary_poly(spec) > 0:
        result = _k3_interior_pair(spec, tolerance)
        return result.model_copy(update={"notes": notes + result.notes})

    guard_iv = (d0 * (d1 + d2) >= (d1 - d2) * (d1 + 2 * d2) and d2 <= d1 / 2) or (
        d1 / 2 < d2 and 3 * d0 + 9 * d1 > 22 * d2
    )
    if guard_iv:
        rd = _two_orbit_design(3, 1.0, 1.0, _k3_case_iv_weight(d0, d1, d2))
        if rd is None:
            raise InconsistencyError(f"k3_case_iv 的權重不在 [0,1] (d0={d0}, d1={d1}, d2={d2})")
        return _finalize(spec, rd, "closed_form_k3", "k3_case_iv", tolerance, notes=notes)

    uncovered = d2 > d1 / 2 and 3 * d0 + 9 * d1 <= 22 * d2
    return SolveResult(
        method="closed_form_k3",
        status="no_closed_form",
        region_label="k3_uncovered" if uncovered else "k3_guard_gap",
        log_det=-math.inf,
        notes=notes,
    )


def _k3_interior_pair(spec: DispersionSpec, tolerance: Optional[float]) -> SolveResult:
    """(ii)/(iii) 共用同一區域；兩個設計各自驗證，邊界餘裕較大者為主結果"""
    d0, d1, d2 = spec.d0, spec.d1, spec.d2
    w_ii = (3 * d0 - 7 * d1 + 10 * d2) / (-16.0 * (d1 - d2))
    x0_ii = _sqrt_or_nan(d0 * (2 * d2 - d1) / ((d1 + 2 * d2) * (3 * d0 - 4 * d1 + 4 * d2)))
    w_iii = (d1 - 2 * d2) * (d0 + 3 * d1 + 6 * d2) / (16.0 * (d1 - d2) * (d1 + 2 * d2))
    x1_iii = _sqrt_or_nan(
        3 * d0 * (d1 + 2 * d2) / (2 * d0 * d2 - d0 * d1 - 8 * d2**2 + 4 * d2 * d1 + 4 * d1**2)
    )

    candidates = []
    for label, rd in (
        ("k3_case_ii", _two_orbit_design(3, x0_ii, 1.0, w_ii)),
        ("k3_case_iii", _two_orbit_design(3, 1.0, x1_iii, w_iii)),
    ):
        if rd is not None:
            candidates.append((label, rd, _finalize(spec, rd, "closed_form_k3", label, tolerance)))
    if not candidates:
        raise InconsistencyError(f"k3_case_ii 與 k3_case_iii 皆不可行 (d0={d0}, d1={d1}, d2={d2})")

    candidates.sort(key=lambda c: (not c[2].is_optimal, -_box_margin(c[1])))
    primary = candidates[0][2]
    others = [c[2] for c in candidates[1:]]
    notes = [f"{label}: {result.kw.verdict}" for label, _, result in candidates]
    return primary.model_copy(update={"alternatives": others, "notes": notes})


@dataclass
class _SweepState:
    levels: np.ndarray
    weights: np.ndarray
    log_det: float
    sweeps: int
    converged: bool


class _RhombicProblem:
    """固定 K 的菱形設計最佳化：每個軌道 ℓ = 0..⌊K/2⌋ 一個 (位置, 權重)"""

    def __init__(self, spec: DispersionSpec):
        self.spec = spec
        self.k = spec.k
        self.p = spec.p
        self.ells = np.arange(spec.k // 2 + 1)
        cross = np.array([orbit_cross_moment(spec.k, int(ell)) for ell in self.ells])
        self.cross = cross
        self.sizes = np.array([orbit_size(spec.k, int(ell)) for ell in self.ells], dtype=float)
        self.slope = spec.k * spec.d1 + spec.k * (spec.k - 1) * cross * spec.d2

    def coefficients(self, levels: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return orbit_coefficients(self.spec, self.ells, levels)

    def log_det(self, levels: np.ndarray, weights: np.ndarray) -> float:
        alpha, beta, gamma = self.coefficients(levels)
        return log_det(
            blocks_from_factors(self.k, float(weights @ alpha), float(weights @ beta), float(weights @ gamma))
        )

    def optimize_weights(
        self, levels: np.ndarray, weights: np.ndarray, tol: float, max_iter: int
    ) -> np.ndarray:
        """
        乘法演算法 w_ℓ ← w_ℓ·tr(M⁻¹M_ℓ)/p。三個因子的方向導數分別為
        α/m0、(K-1)β/λ1、γ/λ2，總和恰為 p，更新後自動保持在單形上。
        """
        alpha, beta, gamma = self.coefficients(levels)
        prune = get_config().tolerances.prune
        w = weights.copy()
        for _ in range(max_iter):
            m0, lam1, lam2 = w @ alpha, w @ beta, w @ gamma
            if m0 <= 0 or lam1 <= 0 or lam2 <= 0:
                break
            directional = alpha / m0 + (self.k - 1) * beta / lam1 + gamma / lam2
            updated = w * directional / self.p
            updated /= updated.sum()
            active = w > prune
            change = float(np.max(np.abs(updated[active] - w[active]) / w[active])) if active.any() else 0.0
            w = updated
            if change < tol:
                break
        return w

    def best_level(self, index: int, levels: np.ndarray, weights: np.ndarray) -> float:
        """單一軌道位置的有界線搜尋，並與 t = 1 精確比較"""
        solver = get_config().solver
        trial = levels.copy()

        def negative_log_det(t: float) -> float:
            trial[index] = t
            return -self.log_det(trial, weights)

        current = negative_log_det(levels[index])
        res = optimize.minimize_scalar(
            negative_log_det,
            bounds=solver.level_bounds,
            method="bounded",
            options={"xatol": solver.line_search_xatol},
        )
        best_t, best_value = float(res.x), float(res.fun)
        at_vertex = negative_log_det(1.0)
        if at_vertex <= best_value + 1e-14 * max(1.0, abs(best_value)):
            best_t, best_value = 1.0, at_vertex
        return best_t if best_value < current else float(levels[index])

    def coefficient_derivatives(self, levels: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """α、β、γ 對位置 t 的導數（τ = t²，d/dt = 2t·d/dτ）"""
        d0 = self.spec.d0
        sigma2 = d0 + levels**2 * self.slope
        chain = 2.0 * levels / sigma2**2
        return (
            -self.slope * chain,
            (1.0 - self.cross) * d0 * chain,
            (1.0 + (self.k - 1) * self.cross) * d0 * chain,
        )


def _alternate(problem: _RhombicProblem, start: float, options: NumericOptions) -> _SweepState:
    """交替執行權重最佳化與逐軌道位置線搜尋，直到一輪改善小於 sweep_tol"""
    solver = get_config().solver
    prune = get_config().tolerances.prune
    n = len(problem.ells)
    max_sweeps = options.max_sweeps or solver.max_sweeps

    levels = np.full(n, 1.0 if options.vertex_only else float(start))
    weights = np.full(n, 1.0 / n)
    current = -math.inf
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        weights = problem.optimize_weights(levels, weights, solver.weight_tol, solver.max_weight_iter)
        if not options.vertex_only:
            for i in range(n):
                if weights[i] > prune:
                    levels[i] = problem.best_level(i, levels, weights)
        value = problem.log_det(levels, weights)
        if value - current < solver.sweep_tol:
            return _SweepState(levels, weights, max(value, current), sweep, True)
        current = value
    return _SweepState(levels, weights, current, sweep, False)


def _target_factors(problem: _RhombicProblem) -> Optional[np.ndarray]:
    """D⁻¹/(K+1) 的三個行列式因子 (m0, λ1, λ2)；D 奇異時回傳 None"""
    try:
        target = np.array(target_info_blocks(problem.spec).factors)
    except SingularityError:
        return None
    return None if np.any(target <= 0) else target


def _target_residual(problem: _RhombicProblem, levels: np.ndarray, weights: np.ndarray, target: np.ndarray) -> float:
    alpha, beta, gamma = problem.coefficients(levels)
    factors = np.array([weights @ alpha, weights @ beta, weights @ gamma])
    return float(np.max(np.abs(factors / target - 1.0)))


def _polish_to_target(problem: _RhombicProblem, state: _SweepState) -> Optional[_SweepState]:
    """以 least_squares 解 M(ξ) = D⁻¹/(K+1)，未知數為支撐軌道的權重與內點位置"""
    target = _target_factors(problem)
    if target is None:
        return None

    supported = np.flatnonzero(state.weights > 0)
    free = [i for i in supported if state.levels[i] < 1.0 - _VERTEX_TOL]
    n_free = len(free)
    lower_level = get_config().solver.level_bounds[0]

    def unpack(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        levels = state.levels.copy()
        levels[free] = z[:n_free]
        weights = np.zeros_like(state.weights)
        weights[supported] = z[n_free:]
        return levels, weights

    def residual(z: np.ndarray) -> np.ndarray:
        levels, weights = unpack(z)
        alpha, beta, gamma = problem.coefficients(levels)
        factors = np.array([weights @ alpha, weights @ beta, weights @ gamma])
        return np.concatenate((factors / target - 1.0, [weights.sum() - 1.0]))

    def jacobian(z: np.ndarray) -> np.ndarray:
        levels, weights = unpack(z)
        coefficients = problem.coefficients(levels)
        derivatives = problem.coefficient_derivatives(levels)
        jac = np.zeros((4, z.size))
        for row in range(3):
            jac[row, :n_free] = weights[free] * derivatives[row][free] / target[row]
            jac[row, n_free:] = coefficients[row][supported] / target[row]
        jac[3, n_free:] = 1.0
        return jac

    z0 = np.concatenate((state.levels[free], state.weights[supported]))
    bounds = (
        np.concatenate(([lower_level] * n_free, [0.0] * supported.size)),
        np.concatenate(([1.0] * n_free, [1.0] * supported.size)),
    )
    res = optimize.least_squares(
        residual, z0, jac=jacobian, bounds=bounds, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15
    )
    levels, weights = unpack(res.x)
    weights = np.clip(weights, 0.0, None)
    weights /= weights.sum()
    return _SweepState(levels, weights, problem.log_det(levels, weights), state.sweeps, state.converged)


def _levels_for_weights(
    problem: _RhombicProblem, levels: np.ndarray, weights: np.ndarray, target: np.ndarray
) -> np.ndarray:
    """權重固定，以 least_squares 解位置使 M(ξ) = D⁻¹/(K+1)"""
    lower_level = get_config().solver.level_bounds[0]

    def residual(t: np.ndarray) -> np.ndarray:
        alpha, beta, gamma = problem.coefficients(t)
        return np.array([weights @ alpha, weights @ beta, weights @ gamma]) / target - 1.0

    def jacobian(t: np.ndarray) -> np.ndarray:
        return np.vstack([weights * d / scale for d, scale in zip(problem.coefficient_derivatives(t), target)])

    res = optimize.least_squares(
        residual,
        np.clip(levels, lower_level, 1.0),
        jac=jacobian,
        bounds=(lower_level, 1.0),
        method="trf",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
    )
    return res.x


def _select_representative(
    problem: _RhombicProblem, state: _SweepState, target: np.ndarray
) -> Optional[_SweepState]:
    """
    M(ξ) = D⁻¹/(K+1) 的解不唯一：tr(D·M) ≡ 1，三條因子方程式只有兩條獨立，
    兩個以上內點軌道時形成一族 log det 相同的設計。這裡固定挑選代表：

    1. 權重最接近每點等權 w_ℓ = N_ℓ/2^K（等權需要位置超過 1 時，該軌道停在頂點）
    2. K >= 4 剩下的自由度取位置最集中者（d2 = 0 時即共同位置的全因子設計）
    3. 權重與等權相差 1e-6 以內時直接取等權，位置再以 least_squares 解到機器精度

    結果不滿足目標方程式時回傳 None。
    """
    n = len(problem.ells)
    uniform = problem.sizes / problem.sizes.sum()
    lower_level = get_config().solver.level_bounds[0]

    def equations(levels: np.ndarray, weights: np.ndarray) -> np.ndarray:
        _, beta, gamma = problem.coefficients(levels)
        return np.array([weights @ beta / target[1] - 1.0, weights @ gamma / target[2] - 1.0])

    def equation_jacobian(levels: np.ndarray, weights: np.ndarray) -> np.ndarray:
        _, beta, gamma = problem.coefficients(levels)
        _, dbeta, dgamma = problem.coefficient_derivatives(levels)
        return np.array(
            [
                np.concatenate((weights * dbeta, beta)) / target[1],
                np.concatenate((weights * dgamma, gamma)) / target[2],
            ]
        )

    # m0 方程式由 tr(D·M) = 1 與權重和決定，不列入約束
    res = optimize.minimize(
        lambda z: (float(np.sum((z[n:] - uniform) ** 2)), np.concatenate((np.zeros(n), 2.0 * (z[n:] - uniform)))),
        np.concatenate((np.clip(state.levels, lower_level, 1.0), state.weights)),
        jac=True,
        method="SLSQP",
        bounds=[(lower_level, 1.0)] * n + [(0.0, 1.0)] * n,
        constraints=[
            {
                "type": "eq",
                "fun": lambda z: np.append(equations(z[:n], z[n:]), z[n:].sum() - 1.0),
                "jac": lambda z: np.vstack(
                    (equation_jacobian(z[:n], z[n:]), np.concatenate((np.zeros(n), np.ones(n))))
                ),
            }
        ],
        options={"ftol": 1e-15, "maxiter": 500},
    )
    levels = np.clip(res.x[:n], lower_level, 1.0)
    weights = np.clip(res.x[n:], 0.0, None)
    weights /= weights.sum()

    if n > 2:
        fixed = weights.copy()
        spread = optimize.minimize(
            lambda t: (
                float(uniform @ (t - uniform @ t) ** 2),
                2.0 * uniform * (t - uniform @ t),
            ),
            levels,
            jac=True,
            method="SLSQP",
            bounds=[(lower_level, 1.0)] * n,
            constraints=[
                {
                    "type": "eq",
                    "fun": lambda t: equations(t, fixed),
                    "jac": lambda t: equation_jacobian(t, fixed)[:, :n],
                }
            ],
            options={"ftol": 1e-15, "maxiter": 500},
        )
        levels = np.clip(spread.x, lower_level, 1.0)

    if np.max(np.abs(weights - uniform)) <= 1e-6:
        exact = _levels_for_weights(problem, levels, uniform, target)
        if _target_residual(problem, exact, uniform, target) <= 1e-10:
            return _SweepState(exact, uniform.copy(), problem.log_det(exact, uniform), state.sweeps, state.converged)

    levels = np.where(levels >= 1.0 - 1e-7, 1.0, levels)
    weights = np.where(weights < get_config().tolerances.prune, 0.0, weights)
    weights /= weights.sum()
    pinned = _polish_to_target(problem, _SweepState(levels, weights, state.log_det, state.sweeps, state.converged))
    if pinned is None or _target_residual(problem, pinned.levels, pinned.weights, target) > 1e-10:
        return None
    return pinned


def _polish_local(problem: _RhombicProblem, state: _SweepState) -> _SweepState:
    """目標 M 不可達時（有頂點軌道）以 SLSQP 聯合調整內點位置與權重"""
    supported = np.flatnonzero(state.weights > 0)
    free = [i for i in supported if state.levels[i] < 1.0 - _VERTEX_TOL]
    n_free = len(free)
    lower_level = get_config().solver.level_bounds[0]

    def unpack(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        levels = state.levels.copy()
        levels[free] = z[:n_free]
        weights = np.zeros_like(state.weights)
        weights[supported] = z[n_free:]
        return levels, weights

    def objective(z: np.ndarray) -> Tuple[float, np.ndarray]:
        levels, weights = unpack(z)
        alpha, beta, gamma = problem.coefficients(levels)
        m0, lam1, lam2 = weights @ alpha, weights @ beta, weights @ gamma
        if min(m0, lam1, lam2) <= 0:
            return math.inf, np.zeros_like(z)
        k = problem.k
        value = math.log(m0) + (k - 1) * math.log(lam1) + math.log(lam2)
        da, db, dg = problem.coefficient_derivatives(levels)
        grad_levels = weights * (da / m0 + (k - 1) * db / lam1 + dg / lam2)
        grad_weights = alpha / m0 + (k - 1) * beta / lam1 + gamma / lam2
        return -value, -np.concatenate((grad_levels[free], grad_weights[supported]))

    z0 = np.concatenate((state.levels[free], state.weights[supported]))
    res = optimize.minimize(
        objective,
        z0,
        jac=True,
        method="SLSQP",
        bounds=[(lower_level, 1.0)] * n_free + [(0.0, 1.0)] * supported.size,
        constraints=[{"type": "eq", "fun": lambda z: z[n_free:].sum() - 1.0}],
        options={"ftol": 1e-15, "maxiter": 500},
    )
    levels, weights = unpack(res.x)
    weights = np.clip(weights, 0.0, None)
    weights /= weights.sum()
    return _SweepState(levels, weights, problem.log_det(levels, weights), state.sweeps, state.converged)


def _polish_vertex(problem: _RhombicProblem, state: _SweepState) -> _SweepState:
    """所有支撐位置都在頂點：從均勻權重以嚴格容許量重跑乘法演算法"""
    n = len(problem.ells)
    levels = np.ones(n)
    weights = problem.optimize_weights(
        levels, np.full(n, 1.0 / n), 1e-14, 5 * get_config().solver.max_weight_iter
    )
    return _SweepState(levels, weights, problem.log_det(levels, weights), state.sweeps, state.converged)


def _gamma_size(problem: _RhombicProblem, state: _SweepState) -> float:
    alpha, beta, gamma = problem.coefficients(state.levels)
    w = state.weights
    ib = blocks_from_factors(problem.k, float(w @ alpha), float(w @ beta), float(w @ gamma))
    try:
        return gamma_blocks(problem.spec, ib).max_abs
    except SingularityError:
        return math.inf


def _prune(state: _SweepState) -> _SweepState:
    weights = np.where(state.weights < get_config().tolerances.prune, 0.0, state.weights)
    weights /= weights.sum()
    levels = np.where(state.levels >= 1.0 - _VERTEX_TOL, 1.0, state.levels)
    return _SweepState(levels, weights, state.log_det, state.sweeps, state.converged)


def numeric_rhombic(spec: DispersionSpec, options: Optional[NumericOptions] = None) -> SolveResult:
    """
    在菱形設計類別內最大化 log det M。

    位置從 level_starts 的每個值出發（權重均勻），交替最佳化後取最好的一組，
    再依支撐型態做最後修飾，最後在整個超立方體上執行 kw_verify。
    """
    if not spec.is_positive_definite:
        raise DomainError(f"numeric_rhombic 需要正定的 D，(d0={spec.d0}, d1={spec.d1}, d2={spec.d2}) 落在錐邊界上")
    options = options or NumericOptions()
    problem = _RhombicProblem(spec)
    starts = (1.0,) if options.vertex_only else (options.level_starts or get_config().solver.level_starts)

    best: Optional[_SweepState] = None
    for start in starts:
        state = _alternate(problem, start, options)
        if best is None or state.log_det > best.log_det:
            best = state
    assert best is not None
    best = _prune(best)

    notes = [f"{best.sweeps} 輪交替最佳化" + ("" if best.converged else "（達到上限）")]
    if options.polish:
        supported = best.weights > 0
        if np.any(best.levels[supported] < 1.0 - _VERTEX_TOL):
            polished = _polish_to_target(problem, best)
            if (
                polished is not None
                and polished.log_det >= best.log_det - 1e-12
                and _gamma_size(problem, polished) < _gamma_size(problem, best)
            ):
                best = _prune(polished)
                notes.append("least_squares 修飾至 M = D⁻¹/(K+1)")
            if _gamma_size(problem, best) > get_config().tolerances.equality:
                polished = _polish_local(problem, best)
                if polished.log_det > best.log_det:
                    best = _prune(polished)
                    notes.append("SLSQP 聯合修飾位置與權重")
            target = _target_factors(problem)
            if target is not None and _target_residual(problem, best.levels, best.weights, target) <= 1e-7:
                selected = _select_representative(problem, best, target)
                if selected is not None and selected.log_det >= best.log_det - 1e-9:
                    best = _prune(selected)
                    notes.append("最適設計族中取每點等權的代表")
        else:
            polished = _polish_vertex(problem, best)
            if polished.log_det >= best.log_det - 1e-12:
                best = _prune(polished)
                notes.append("頂點權重以嚴格容許量重新收斂")

    orbits = [
        Orbit(ell=int(ell), level=float(min(level, 1.0)), weight=float(weight))
        for ell, level, weight in zip(problem.ells, best.levels, best.weights)
        if weight > 0
    ]
    rd = RhombicDesign(k=spec.k, orbits=orbits)
    return _finalize(
        spec,
        rd,
        "numeric_rhombic",
        side_label(spec),
        options.tolerance,
        sweeps=best.sweeps,
        converged=best.converged,
        notes=notes,
    )


def _grid(k: int, n: int) -> np.ndarray:
    axis = np.linspace(-1.0, 1.0, n)
    mesh = np.meshgrid(*([axis] * k), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, k)


def _cluster(points: np.ndarray, weights: np.ndarray, radius: float) -> Tuple[np.ndarray, np.ndarray]:
    """單一連結、Chebyshev 距離的階層分群；合併點取加權平均"""
    if points.shape[0] == 1:
        return points, weights
    labels = hierarchy.fcluster(
        hierarchy.linkage(points, method="single", metric="chebyshev"), t=radius, criterion="distance"
    )
    merged_points, merged_weights = [], []
    for label in np.unique(labels):
        members = labels == label
        mass = weights[members].sum()
        merged_points.append(weights[members] @ points[members] / mass)
        merged_weights.append(mass)
    merged = np.array(merged_points)
    order = np.lexsort(merged.T[::-1])
    return merged[order], np.array(merged_weights)[order]


def grid_oracle(
    spec: DispersionSpec,
    grid_points_per_axis: int,
    max_iter: Optional[int] = None,
    tolerance: Optional[float] = None,
) -> SolveResult:
    """
    均勻網格上的乘法演算法，直到網格上 max d(x) <= p(1 + oracle_kw_slack)。

    每輪以 Harman-Pronzato 條件刪除不可能為支撐的點；收斂後刪除小權重、
    依網格間距分群。log_det 取自未分群的網格設計，為真最適值的下界。
    """
    n = int(grid_points_per_axis)
    if n < 2:
        raise DomainError(f"每軸網格點數至少為 2，收到 {n}")
    config = get_config()
    cap = max_iter or config.solver.oracle_max_iter
    p = spec.p

    grid = _grid(spec.k, n)
    sigma2 = variance_many(spec, grid)
    scaled = np.hstack((np.ones((grid.shape[0], 1)), grid)) / np.sqrt(sigma2)[:, None]
    weights = np.full(grid.shape[0], 1.0 / grid.shape[0])
    bound = p * (1.0 + config.solver.oracle_kw_slack)

    directional = np.empty(grid.shape[0])
    for _ in range(cap):
        info = (scaled * weights[:, None]).T @ scaled
        directional = np.einsum("ij,ij->i", scaled, np.linalg.solve(info, scaled.T).T)
        top = float(directional.max())
        if top <= bound:
            break
        eps = top - p
        threshold = p * (1.0 + eps / 2.0 - math.sqrt(eps * (4.0 + eps - 4.0 / p)) / 2.0)
        weights = weights * directional / p
        weights[directional < threshold] = 0.0
        weights /= weights.sum()
    else:
        raise ConvergenceError(
            f"grid_oracle 在 {cap} 次迭代後未收斂 (max d/p - 1 = {directional.max() / p - 1:.3e})",
            residual=float(directional.max() / p - 1.0),
        )

    weights = np.where(weights < config.tolerances.prune, 0.0, weights)
    weights /= weights.sum()
    grid_info = (scaled * weights[:, None]).T @ scaled
    keep = weights > 0
    radius = 2.0 / (n - 1) * config.tolerances.cluster_factor * (1.0 + 1e-9)
    points, masses = _cluster(grid[keep], weights[keep], radius)
    dd = DiscreteDesign.from_arrays(spec.k, points, masses / masses.sum())
    kw = kw_verify(spec, dd, tolerance)
    return SolveResult(
        method="oracle",
        status="solved" if kw.is_optimal else "best_effort",
        region_label=side_label(spec),
        log_det=log_det_dense(grid_info),
        design=dd,
        kw=kw,
        notes=[
            f"網格 {n}^{spec.k} 點，刪除權重 < {config.tolerances.prune:g}，分群半徑 {radius:.6g}",
            "log_det 為未分群網格設計的值（真最適值的下界）",
        ],
    )


_CLOSED_FORMS: dict = {2: closed_form_k2, 3: closed_form_k3}


def solve(spec: DispersionSpec, options: Optional[NumericOptions] = None) -> SolveResult:
    """
    調度器：K ∈ {2,3} 且 d2 ≠ 0 時先試封閉解；沒有封閉解、封閉解未通過驗證
    或公式不可行時改用 numeric_rhombic。d2 = 0 走對角情形。
    """
    if spec.d2 == 0:
        return _diagonal_case(spec, options)

    closed: Optional[SolveResult] = None
    notes: List[str] = []
    solver: Optional[Callable[..., SolveResult]] = _CLOSED_FORMS.get(spec.k)
    if solver is not None:
        try:
            closed = solver(spec, options.tolerance if options else None)
        except InconsistencyError as e:
            notes.append(f"封閉解不一致: {e}")
        else:
            if closed.status == "solved":
                return closed
            notes.append(f"封閉解 {closed.region_label}: {closed.status}，改用數值求解")

    numeric = numeric_rhombic(spec, options)
    if (
        closed is not None
        and closed.design is not None
        and not numeric.is_optimal
        and closed.log_det > numeric.log_det
    ):
        return closed.model_copy(update={"notes": closed.notes + notes})
    return numeric.model_copy(update={"notes": notes + numeric.notes})


SolveResult.model_rebuild()
