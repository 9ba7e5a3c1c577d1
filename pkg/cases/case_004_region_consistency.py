"""
optdes Case 004: 區域判別多項式與求解器一致性

求解器確認的內點最適設計必須落在判別多項式 > 0 側、多軌道頂點最適設計
落在 <= 0 側。參考結果為零個違反格點。
"""

from optdes_core.regions import consistency_violations, region_map

name = "REGION_CONSISTENCY"
description = "K=2、K=3 區域圖：求解器確認結果與判別多項式符號零矛盾"

RESOLUTION = 12


def setup_data():
    return (RESOLUTION,)


def reference_version(resolution):
    return [0, 0]


def confirmed_version(resolution):
    return [
        len(consistency_violations(region_map(k, resolution=resolution, confirm=True, jobs=None)))
        for k in (2, 3)
    ]


candidate_versions = {
    "region_map_confirm": confirmed_version,
}
