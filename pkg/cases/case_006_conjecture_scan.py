"""
optdes Case 006: 菱形設計掃描

K=4 的錐內網格預期沒有失敗格點；K=3、K=5 的失敗格點預期都落在 d2 > d1/2。
"""

from optdes_core.regions import conjecture_scan

name = "CONJECTURE_SCAN"
description = "K=3、4、5 錐內網格的菱形設計掃描與猜想一致"

RESOLUTION = 10


def setup_data():
    return (RESOLUTION,)


def reference_version(resolution):
    return [True, True, True]


def scan_version(resolution):
    return [conjecture_scan(k, resolution=resolution, jobs=None).consistent_with_conjecture for k in (3, 4, 5)]


candidate_versions = {
    "conjecture_scan": scan_version,
}
