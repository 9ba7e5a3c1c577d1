"""
optdes Case 001: K=2 封閉解 vs 數值菱形求解器

三個區域各取一組參數，封閉解為參考，numeric_rhombic 與 solve 的
(位置, 權重, log det) 必須一致到 1e-6。
"""

from optdes_core import DispersionSpec
from optdes_core.solvers import closed_form_k2, numeric_rhombic, solve

name = "K2_CLOSED_FORM"
description = "K=2 三個區域的封閉解與數值解交叉驗證（位置、權重、log det）"
abs_tol = 1e-6

SPECS = [(1.0, 2.0, 0.5), (1.7, 2.0, 0.5), (1.7, 2.0, -0.5), (2.0, 1.0, 0.5)]


def setup_data():
    return ([DispersionSpec(k=2, d0=d0, d1=d1, d2=d2) for d0, d1, d2 in SPECS],)


def _summary(result):
    design = result.design
    return {
        "status": result.status,
        "log_det": result.log_det,
        "orbits": [[o.ell, o.level, o.weight] for o in design.supported()],
    }


def reference_version(specs):
    return [_summary(closed_form_k2(spec)) for spec in specs]


def numeric_version(specs):
    return [_summary(numeric_rhombic(spec)) for spec in specs]


def solve_version(specs):
    return [_summary(solve(spec)) for spec in specs]


candidate_versions = {
    "numeric_rhombic": numeric_version,
    "solve": solve_version,
}
