"""
optdes Case 002: K=3 封閉解的資訊矩陣 = D⁻¹/4

情形 (i)、(ii)/(iii) 的設計必須精確達到 M(ξ*) = D⁻¹/4；
參考版本直接由 D 計算目標，候選版本由封閉解與數值解的設計計算。
"""

from optdes_core import DispersionSpec
from optdes_core.information import info_blocks_rhombic, target_info_blocks
from optdes_core.solvers import closed_form_k3, numeric_rhombic

name = "K3_TARGET_INFORMATION"
description = "K=3 情形 (i)–(iii)：M(ξ*) 與 D⁻¹/4 逐元素一致"
abs_tol = 1e-9

SPECS = [(1.0, 2.0, 0.4), (0.3, 2.0, -0.4), (1.0, 2.0, -0.4)]


def setup_data():
    return ([DispersionSpec(k=3, d0=d0, d1=d1, d2=d2) for d0, d1, d2 in SPECS],)


def _blocks(ib):
    return [ib.m0, ib.m1, ib.m2]


def reference_version(specs):
    return [_blocks(target_info_blocks(spec)) for spec in specs]


def closed_form_version(specs):
    return [_blocks(info_blocks_rhombic(spec, closed_form_k3(spec).design)) for spec in specs]


def numeric_version(specs):
    return [_blocks(info_blocks_rhombic(spec, numeric_rhombic(spec).design)) for spec in specs]


candidate_versions = {
    "closed_form_k3": closed_form_version,
    "numeric_rhombic": numeric_version,
}
