#!/usr/bin/env python3
"""
optdes 驗收基準測試 (Acceptance Benchmark)
=========================================

從 cases/ 目錄動態載入驗收案例，每個案例提供：

- name, description
- setup_data(): 回傳傳給各版本的參數 tuple
- reference_version(*data): 參考結果（封閉解或精確目標值）
- candidate_versions: {版本名稱: 函式}，結果必須與參考結果一致
- 可選 abs_tol / rel_tol（預設 1e-6 / 1e-9）與 cleanup_data(*data)

每個版本重複計時取中位數，以容許誤差的深度比較驗證正確性並給出等級，
最後把報告寫到 benchmark_reports/。

Author: RhombicDesign Kit
Version: 1.0
"""

import argparse
import gc
import importlib.util
import json
import math
import statistics
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

# 系統監控庫導入
try:
    import psutil

    PSUTIL_AVAILABLE = True
except ImportError:
    psutil = None
    PSUTIL_AVAILABLE = False
    print("⚠️  建議安裝 psutil 以記錄記憶體用量: pip install psutil")

DEFAULT_ABS_TOL = 1e-6
DEFAULT_REL_TOL = 1e-9
REPEATS = 3


class OptDesBenchmark:
    """驗收案例執行器：計時、正確性比對、評等與報告"""

    def __init__(self, cases_dir: str = "cases", report_dir: str = "benchmark_reports"):
        self.cases_dir = Path(cases_dir)
        self.report_dir = Path(report_dir)
        self.test_cases: Dict[str, Dict[str, Any]] = {}
        print("📊 optdes 驗收基準測試啟動")
        print("=" * 60)

    def load_test_cases(self) -> bool:
        """載入 cases/ 下所有 case_*.py；缺少必要屬性的案例略過並警告"""
        self.test_cases = {}
        if not self.cases_dir.is_dir():
            print(f"❌ 錯誤: 案例目錄 '{self.cases_dir}' 不存在或不是一個目錄。")
            return False

        print(f"🔍 正在從 '{self.cases_dir}' 探索驗收案例...")
        for case_file in sorted(self.cases_dir.glob("case_*.py")):
            try:
                spec = importlib.util.spec_from_file_location(case_file.stem, case_file)
                if spec is None or spec.loader is None:
                    print(f"⚠️  警告: 無法為 '{case_file.name}' 創建模組規格。")
                    continue
                module = importlib.util.module_from_spec(spec)
                spec.loader.exec_module(module)

                case_name = getattr(module, "name", case_file.stem)
                setup_data = getattr(module, "setup_data", None)
                reference = getattr(module, "reference_version", None)
                if setup_data is None or reference is None:
                    print(f"⚠️  警告: 案例 '{case_file.name}' 缺少 setup_data 或 reference_version，略過。")
                    continue

                self.test_cases[case_name] = {
                    "name": case_name,
                    "description": getattr(module, "description", "無描述"),
                    "setup_data": setup_data,
                    "reference": reference,
                    "candidates": getattr(module, "candidate_versions", {}),
                    "abs_tol": getattr(module, "abs_tol", DEFAULT_ABS_TOL),
                    "rel_tol": getattr(module, "rel_tol", DEFAULT_REL_TOL),
                    "module": module,
                }
            except Exception as e:
                print(f"⚠️  警告: 載入案例 '{case_file.name}' 失敗: {e}")

        if not self.test_cases:
            print(f"❌ 錯誤: 在 '{self.cases_dir}' 中沒有找到任何有效的驗收案例。")
            return False
        print(f"✅ 成功載入 {len(self.test_cases)} 個驗收案例。")
        return True

    @staticmethod
    def _memory_mb() -> float:
        if not (PSUTIL_AVAILABLE and psutil):
            return 0.0
        try:
            return psutil.Process().memory_info().rss / 1024 / 1024
        except Exception as e:
            print(f"⚠️  psutil 監控錯誤: {e}")
            return 0.0

    def measure(self, func: Callable, *args) -> Dict[str, Any]:
        """單次執行的牆鐘時間、CPU 時間與記憶體變化"""
        gc.collect()
        memory_before = self._memory_mb()
        start_cpu = time.process_time()
        start = time.perf_counter()
        result, success, error_msg = None, False, None
        try:
            result = func(*args)
            success = True
        except Exception as e:
            error_msg = f"{type(e).__name__}: {e}"
        elapsed = time.perf_counter() - start
        return {
            "執行時間_秒": elapsed,
            "CPU時間_秒": time.process_time() - start_cpu,
            "記憶體變化_MB": self._memory_mb() - memory_before,
            "結果": result,
            "成功": success,
            "錯誤訊息": error_msg,
        }

    def _timed(self, func: Callable, data: tuple) -> Optional[Dict[str, Any]]:
        """重複 REPEATS 次取中位數時間；任何一次失敗即回報失敗"""
        runs = []
        for _ in range(REPEATS):
            run = self.measure(func, *data)
            if not run["成功"]:
                return run
            runs.append(run)
        summary = runs[0].copy()
        times = [r["執行時間_秒"] for r in runs]
        summary["執行時間_秒"] = statistics.median(times)
        summary["IQR_秒"] = (
            statistics.quantiles(times, n=4)[2] - statistics.quantiles(times, n=4)[0] if len(times) > 1 else 0.0
        )
        return summary

    def _deep_compare(self, obj1: Any, obj2: Any, abs_tol: float, rel_tol: float) -> bool:
        """遞迴比較，浮點數以 math.isclose、NumPy 陣列逐元素比較"""
        if isinstance(obj1, np.ndarray) or isinstance(obj2, np.ndarray):
            a, b = np.asarray(obj1, dtype=float), np.asarray(obj2, dtype=float)
            return a.shape == b.shape and bool(np.allclose(a, b, rtol=rel_tol, atol=abs_tol, equal_nan=True))
        if hasattr(obj1, "item"):
            obj1 = obj1.item()
        if hasattr(obj2, "item"):
            obj2 = obj2.item()

        numeric = (int, float)
        if isinstance(obj1, numeric) and isinstance(obj2, numeric) and not isinstance(obj1, bool):
            a, b = float(obj1), float(obj2)
            if math.isinf(a) or math.isinf(b):
                return a == b
            return math.isclose(a, b, rel_tol=rel_tol, abs_tol=abs_tol)
        if type(obj1) is not type(obj2):
            return False
        if isinstance(obj1, dict):
            if obj1.keys() != obj2.keys():
                return False
            return all(self._deep_compare(obj1[k], obj2[k], abs_tol, rel_tol) for k in obj1)
        if isinstance(obj1, (list, tuple)):
            if len(obj1) != len(obj2):
                return False
            return all(self._deep_compare(a, b, abs_tol, rel_tol) for a, b in zip(obj1, obj2))
        return obj1 == obj2

    @staticmethod
    def _grade(correct: bool, speedup: float) -> str:
        if not correct:
            return "F (結果不符)"
        thresholds = ((10.0, "A+ (卓越)"), (2.0, "A (優秀)"), (0.5, "B (一致)"), (0.05, "C (一致但較慢)"))
        return next((grade for threshold, grade in thresholds if speedup >= threshold), "D (一致但極慢)")

    def run_test_case(self, case_name: str) -> Optional[Dict[str, Any]]:
        target_key = next((k for k in self.test_cases if k.lower() == case_name.lower()), None)
        if target_key is None:
            print(f"❌ 找不到驗收案例: {case_name}")
            self.list_tests()
            return None

        case = self.test_cases[target_key]
        print(f"\n🔍 驗收案例: {case['name']}")
        print(f"📝 說明: {case['description']}")
        print("-" * 50)

        data = case["setup_data"]()
        reference = self._timed(case["reference"], data)
        if reference is None or not reference["成功"]:
            print(f"❌ 參考版本執行失敗: {reference and reference['錯誤訊息']}")
            return None
        print(f"📊 參考版本: {reference['執行時間_秒']:.6f} 秒")

        versions: Dict[str, Any] = {}
        for version_name, func in case["candidates"].items():
            run = self._timed(func, data)
            if run is None or not run["成功"]:
                print(f"❌ {version_name} 執行失敗: {run and run['錯誤訊息']}")
                versions[version_name] = {"成功": False, "錯誤訊息": run and run["錯誤訊息"], "grade": "F (執行失敗)"}
                continue
            correct = self._deep_compare(reference["結果"], run["結果"], case["abs_tol"], case["rel_tol"])
            speedup = reference["執行時間_秒"] / max(run["執行時間_秒"], 1e-9)
            grade = self._grade(correct, speedup)
            versions[version_name] = {
                "成功": True,
                "正確性": correct,
                "相對速度": speedup,
                "執行時間_秒": run["執行時間_秒"],
                "IQR_秒": run["IQR_秒"],
                "記憶體變化_MB": run["記憶體變化_MB"],
                "grade": grade,
            }
            icon = "✅" if correct else "❌"
            print(f"{icon} {version_name}: {run['執行時間_秒']:.6f} 秒 ({speedup:.2f}x) - {grade}")
            if not correct:
                print(f"  ⚠️  參考: {reference['結果']}")
                print(f"  ⚠️  候選: {run['結果']}")

        cleanup = getattr(case["module"], "cleanup_data", None)
        if cleanup is not None:
            cleanup(*data)

        return {
            "案例名稱": case["name"],
            "案例描述": case["description"],
            "容許誤差": {"abs_tol": case["abs_tol"], "rel_tol": case["rel_tol"]},
            "參考版本": {k: v for k, v in reference.items() if k != "結果"},
            "候選版本": versions,
            "全部正確": all(v.get("正確性", False) for v in versions.values()),
        }

    def _save_report(self, results: List[Dict[str, Any]]) -> Path:
        self.report_dir.mkdir(exist_ok=True)
        report_file = self.report_dir / f"optdes_benchmark_{int(time.time())}.json"
        with open(report_file, "w", encoding="utf-8") as f:
            json.dump(results, f, indent=2, ensure_ascii=False, default=str)
        return report_file

    def generate_summary_report(self, results: List[Dict[str, Any]]) -> None:
        if not results:
            print("📊 沒有有效的驗收結果可供生成報告。")
            return
        print("\n" + "=" * 60)
        print("📊 optdes 驗收總結")
        print("=" * 60)
        for result in results:
            icon = "✅" if result["全部正確"] else "❌"
            grades = ", ".join(f"{name}: {v['grade']}" for name, v in result["候選版本"].items())
            print(f"{icon} {result['案例名稱']:<32} {grades}")
        print(f"\n🎯 報告已保存: {self._save_report(results)}")
        print("=" * 60)

    def run_all_tests(self) -> List[Dict[str, Any]]:
        results = []
        for i, name in enumerate(self.test_cases, 1):
            print(f"\n🔬 執行驗收 {i}/{len(self.test_cases)}: {name}")
            result = self.run_test_case(name)
            if result:
                results.append(result)
        self.generate_summary_report(results)
        return results

    def list_tests(self) -> None:
        print("📋 可用的驗收案例:")
        for case_name, case in self.test_cases.items():
            print(f" - {case_name}: {case['description']}")


def main() -> None:
    parser = argparse.ArgumentParser(
        description="optdes 驗收基準測試 - 封閉解、數值解與網格 oracle 的交叉驗證",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
使用範例:
  python optdes_benchmark.py                      # 執行所有驗收案例
  python optdes_benchmark.py --list               # 列出所有驗收案例
  python optdes_benchmark.py --test K2_CLOSED_FORM # 執行特定案例
        """,
    )
    parser.add_argument("--list", "-l", action="store_true", help="列出所有可用的驗收案例")
    parser.add_argument("--test", "-t", type=str, help="執行指定的驗收案例")
    parser.add_argument("--cases-dir", "-d", default="cases", help="驗收案例目錄路徑")
    args = parser.parse_args()

    benchmark = OptDesBenchmark(args.cases_dir)
    if not benchmark.load_test_cases():
        return

    if args.list:
        benchmark.list_tests()
    elif args.test and args.test.upper() != "ALL":
        result = benchmark.run_test_case(args.test)
        if result:
            benchmark.generate_summary_report([result])
    else:
        print("🚀 執行所有驗收案例...")
        print("=" * 60)
        benchmark.run_all_tests()


if __name__ == "__main__":
    main()
