"""
optdes Case 003: 網格 oracle vs 封閉解

頂點最適的參數下，每軸 3 點與 5 點的網格都包含最適支撐，
oracle 的 log det 必須與封閉解一致。
"""

from optdes_core import DispersionSpec
from optdes_core.solvers import closed_form_k2, grid_oracle

name = "GRID_ORACLE"
description = "網格 oracle 在頂點區域重現 K=2 封閉解的 log det"
abs_tol = 1e-6

SPECS = [(2.0, 1.0, 0.5), (3.0, 1.0, -0.5)]


def setup_data():
    return ([DispersionSpec(k=2, d0=d0, d1=d1, d2=d2) for d0, d1, d2 in SPECS],)


def reference_version(specs):
    return [closed_form_k2(spec).log_det for spec in specs]


def oracle_grid3(specs):
    return [grid_oracle(spec, 3).log_det for spec in specs]


def oracle_grid5(specs):
    return [grid_oracle(spec, 5).log_det for spec in specs]


candidate_versions = {
    "grid_oracle_3": oracle_grid3,
    "grid_oracle_5": oracle_grid5,
}
