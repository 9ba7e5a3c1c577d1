"""
optdes 設計表示 (Designs)
========================

兩種近似設計：

- DiscreteDesign: 一般的 (點, 權重) 清單，驗證器與暴力 oracle 的輸入
- RhombicDesign: 在 Sym(K) × {±1} 作用下不變、支撐在空間對角線上（不含原點）
  的設計，以軌道 (ℓ, 位置 x_ℓ, 權重 w_ℓ) 壓縮表示

軌道 O_ℓ(t) 為所有座標絕對值為 t、恰有 ℓ 或 K-ℓ 個負號的點，
大小 N_ℓ = 2·C(K, ℓ)（ℓ ≠ K/2）或 C(K, ℓ)（ℓ = K/2）。

Author: RhombicDesign Kit
Version: 1.0
"""

import itertools
import math
from collections import defaultdict
from typing import Any, Dict, List, Literal, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .config import get_config
from .errors import DomainError
from .model_core import DispersionSpec

# 比對點座標時的小數位數（配合 1e-12 的相等容許量）
_KEY_DECIMALS = 12


class DesignPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: Tuple[float, ...]
    w: float = Field(ge=0.0)


class DiscreteDesign(BaseModel):
    """有限支撐的機率測度 ξ = Σ w_j δ_{x_j}"""

    model_config = ConfigDict(frozen=True)

    format: Literal["discrete"] = "discrete"
    k: int = Field(ge=1)
    points: List[DesignPoint] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_design(self) -> "DiscreteDesign":
        tol = get_config().tolerances.weight_sum
        seen = set()
        for point in self.points:
            if len(point.x) != self.k:
                raise ValueError(f"點 {point.x} 的維度不是 K={self.k}")
            if any(not math.isfinite(c) or abs(c) > 1.0 + 1e-12 for c in point.x):
                raise ValueError(f"點 {point.x} 不在 [-1,1]^K 內")
            key = _point_key(point.x)
            if key in seen:
                raise ValueError(f"支撐點重複: {point.x}")
            seen.add(key)
        total = math.fsum(p.w for p in self.points)
        if abs(total - 1.0) > tol:
            raise ValueError(f"權重總和為 {total!r}，必須為 1")
        return self

    @property
    def support(self) -> np.ndarray:
        return np.array([p.x for p in self.points], dtype=float).reshape(len(self.points), self.k)

    @property
    def weights(self) -> np.ndarray:
        return np.array([p.w for p in self.points], dtype=float)

    @classmethod
    def from_arrays(cls, k: int, points: np.ndarray, weights: Sequence[float]) -> "DiscreteDesign":
        return cls(
            k=k,
            points=[DesignPoint(x=tuple(float(c) for c in x), w=float(w)) for x, w in zip(points, weights)],
        )


class Orbit(BaseModel):
    model_config = ConfigDict(frozen=True)

    ell: int = Field(ge=0)
    level: float = Field(gt=0.0, le=1.0)
    weight: float = Field(ge=0.0)


class RhombicDesign(BaseModel):
    """菱形設計：每個軌道索引 ℓ 至多一個 (位置, 權重)"""

    model_config = ConfigDict(frozen=True)

    format: Literal["rhombic"] = "rhombic"
    k: int = Field(ge=2)
    orbits: List[Orbit] = Field(min_length=1)

    @field_validator("orbits")
    @classmethod
    def _sorted(cls, orbits: List[Orbit]) -> List[Orbit]:
        return sorted(orbits, key=lambda o: o.ell)

    @model_validator(mode="after")
    def _check_orbits(self) -> "RhombicDesign":
        k_tilde = self.k // 2
        ells = [o.ell for o in self.orbits]
        if any(ell > k_tilde for ell in ells):
            raise ValueError(f"軌道索引必須落在 [0, {k_tilde}]，收到 {ells}")
        if len(set(ells)) != len(ells):
            raise ValueError(f"同一軌道索引只能出現一次，收到 {ells}")
        total = math.fsum(o.weight for o in self.orbits)
        if abs(total - 1.0) > get_config().tolerances.weight_sum:
            raise ValueError(f"軌道權重總和為 {total!r}，必須為 1")
        return self

    @property
    def ells(self) -> np.ndarray:
        return np.array([o.ell for o in self.orbits], dtype=int)

    @property
    def levels(self) -> np.ndarray:
        return np.array([o.level for o in self.orbits], dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.array([o.weight for o in self.orbits], dtype=float)

    def supported(self) -> List[Orbit]:
        return [o for o in self.orbits if o.weight > 0]

    def is_vertex(self, tol: float = 1e-9) -> bool:
        """所有有權重的軌道都在頂點 (x_ℓ = 1)"""
        return all(o.level >= 1.0 - tol for o in self.supported())


Design = Union[RhombicDesign, DiscreteDesign]


def _point_key(x: Sequence[float]) -> Tuple[float, ...]:
    return tuple(round(float(c), _KEY_DECIMALS) + 0.0 for c in x)


def _check_orbit_index(k: int, ell: int) -> None:
    if k < 2:
        raise DomainError(f"維度 K 至少為 2，收到 {k}")
    if not 0 <= ell <= k // 2:
        raise DomainError(f"軌道索引 ℓ={ell} 超出 [0, {k // 2}]")


def orbit_size(k: int, ell: int) -> int:
    """N_ℓ = 2·C(K, ℓ)，當 ℓ = K/2 時為 C(K, ℓ)"""
    _check_orbit_index(k, ell)
    n = math.comb(k, ell)
    return n if 2 * ell == k else 2 * n


def orbit_cross_moment(k: int, ell: int) -> float:
    """
    軌道上 s_i·s_j (i ≠ j) 的平均符號乘積 c_ℓ = 1 - 4ℓ(K-ℓ)/(K(K-1))。

    軌道二階矩 (1/N_ℓ)Σ xxᵀ = t²·[(1-c_ℓ)I + c_ℓ·11ᵀ]。
    """
    _check_orbit_index(k, ell)
    return 1.0 - 4.0 * ell * (k - ell) / (k * (k - 1))


def orbit_variance(spec: DispersionSpec, ell: int, level: float) -> float:
    """軌道上 σ² 為常數: d0 + t²·(K·d1 + K(K-1)·c_ℓ·d2)"""
    k = spec.k
    c = orbit_cross_moment(k, ell)
    return spec.d0 + level * level * (k * spec.d1 + k * (k - 1) * c * spec.d2)


def expand_orbit(k: int, ell: int, level: float) -> np.ndarray:
    """
    展開軌道 O_ℓ(level) 為 (N_ℓ, K) 點陣列。

    順序固定：先依字典序列出負號位置組合的代表點（ℓ 個負號），
    再依相同順序列出其整體變號點。ℓ = K/2 時變號點已包含在組合中。
    """
    _check_orbit_index(k, ell)
    if not (0.0 < level <= 1.0):
        raise DomainError(f"軌道位置必須在 (0, 1]，收到 {level}")

    representatives = []
    for negatives in itertools.combinations(range(k), ell):
        point = np.full(k, float(level))
        point[list(negatives)] = -level
        representatives.append(point)
    block = np.array(representatives)
    if 2 * ell == k:
        return block
    return np.vstack((block, -block))


def to_discrete(rd: RhombicDesign) -> DiscreteDesign:
    """每個軌道點得到權重 w_ℓ / N_ℓ；零權重軌道在展開時略去"""
    points: List[np.ndarray] = []
    weights: List[float] = []
    for orbit in rd.supported():
        block = expand_orbit(rd.k, orbit.ell, orbit.level)
        points.extend(block)
        weights.extend([orbit.weight / block.shape[0]] * block.shape[0])
    if not points:
        raise DomainError("菱形設計沒有任何正權重軌道")
    return DiscreteDesign.from_arrays(rd.k, np.array(points), weights)


def is_invariant(dd: DiscreteDesign, tol: float = 1e-12) -> bool:
    """
    支撐與權重在所有座標置換與整體變號下保持不變。

    只需檢查生成元：相鄰對換 (i, i+1) 與整體變號。
    """
    mass: Dict[Tuple[float, ...], float] = {_point_key(p.x): p.w for p in dd.points}

    def maps_onto_itself(transform) -> bool:
        for key, weight in mass.items():
            image = _point_key(transform(np.array(key)))
            if abs(mass.get(image, -1.0) - weight) > tol:
                return False
        return True

    if not maps_onto_itself(lambda x: -x):
        return False
    for i in range(dd.k - 1):
        perm = list(range(dd.k))
        perm[i], perm[i + 1] = perm[i + 1], perm[i]
        if not maps_onto_itself(lambda x, perm=perm: x[perm]):
            return False
    return True


def group_orbits(dd: DiscreteDesign, tol: float = 1e-12) -> RhombicDesign:
    """to_discrete 的反操作：把不變且落在空間對角線上的離散設計分回軌道"""
    if dd.k < 2:
        raise DomainError("菱形設計需要 K >= 2")
    if not is_invariant(dd, tol):
        raise DomainError("離散設計在 Sym(K)×{±1} 下不是不變的")

    levels: Dict[int, List[float]] = defaultdict(list)
    weights: Dict[int, float] = defaultdict(float)
    for point in dd.points:
        x = np.asarray(point.x)
        level = float(np.abs(x).max())
        if level <= tol or np.any(np.abs(np.abs(x) - level) > tol):
            raise DomainError(f"點 {point.x} 不在空間對角線上（或為原點）")
        negatives = int(np.sum(x < 0))
        ell = min(negatives, dd.k - negatives)
        levels[ell].append(level)
        weights[ell] += point.w

    orbits = []
    for ell in sorted(levels):
        if max(levels[ell]) - min(levels[ell]) > tol:
            raise DomainError(f"軌道 ℓ={ell} 出現多個位置 {sorted(set(levels[ell]))}")
        orbits.append(Orbit(ell=ell, level=min(levels[ell][0], 1.0), weight=weights[ell]))
    return RhombicDesign(k=dd.k, orbits=orbits)


def is_uniform_factorial(rd: RhombicDesign, tol: float = 1e-6) -> bool:
    """
    對角 D (d2 = 0) 情形的結構：所有軌道共用同一位置，且 w_ℓ = N_ℓ / 2^K，
    亦即均勻的 2^K 全因子設計。
    """
    by_ell = {o.ell: o for o in rd.orbits}
    if set(by_ell) != set(range(rd.k // 2 + 1)):
        return False
    levels = [o.level for o in rd.orbits]
    if max(levels) - min(levels) > tol:
        return False
    total = 2.0 ** rd.k
    return all(abs(by_ell[ell].weight - orbit_size(rd.k, ell) / total) <= tol for ell in by_ell)


def vertex_design(k: int, weights: Sequence[float]) -> RhombicDesign:
    """頂點菱形設計：第 ℓ 個權重放在 O_ℓ(1)"""
    return RhombicDesign(
        k=k,
        orbits=[Orbit(ell=ell, level=1.0, weight=float(w)) for ell, w in enumerate(weights)],
    )


def design_from_dict(data: Dict[str, Any]) -> Design:
    """依 "format" 判別欄位解析設計 JSON；缺欄位時由 orbits / points 推斷"""
    if not isinstance(data, dict):
        raise DomainError("設計 JSON 必須是物件")
    fmt = data.get("format")
    if fmt is None:
        fmt = "rhombic" if "orbits" in data else "discrete"
    model = {"rhombic": RhombicDesign, "discrete": DiscreteDesign}.get(fmt)
    if model is None:
        raise DomainError(f"未知的設計格式 {fmt!r}")
    try:
        return model.model_validate({**data, "format": fmt})
    except ValidationError as e:
        raise DomainError(f"設計檔格式錯誤: {e}") from e


def design_to_dict(design: Design) -> Dict[str, Any]:
    if isinstance(design, RhombicDesign):
        return {
            "format": "rhombic",
            "k": design.k,
            "orbits": [{"ell": o.ell, "level": o.level, "weight": o.weight} for o in design.orbits],
        }
    return {
        "format": "discrete",
        "k": design.k,
        "points": [{"x": list(p.x), "w": p.w} for p in design.points],
    }
