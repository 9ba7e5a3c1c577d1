"""
optdes Case 005: K=3 未涵蓋區域

d2 > d1/2 且 3d0 + 9d1 <= 22d2 的參數沒有封閉解，數值菱形求解器也找不到
通過等價定理的設計；其餘區域都有封閉解。
"""

from optdes_core import DispersionSpec
from optdes_core.solvers import closed_form_k3, numeric_rhombic

name = "K3_UNCOVERED"
description = "K=3 未涵蓋區域：無封閉解且數值菱形設計不通過驗證"

SPECS = [(1.0, 1.0, 0.9), (1.0, 2.0, 1.9), (0.5, 1.0, 0.8)]


def setup_data():
    return ([DispersionSpec(k=3, d0=d0, d1=d1, d2=d2) for d0, d1, d2 in SPECS],)


def reference_version(specs):
    return [["k3_uncovered", False] for _ in specs]


def closed_then_numeric(specs):
    return [[closed_form_k3(spec).region_label, numeric_rhombic(spec).is_optimal] for spec in specs]


candidate_versions = {
    "closed_form_k3+numeric_rhombic": closed_then_numeric,
}
