"""
optdes 命令列介面 (CLI)
======================

子命令：
- solve: 求解 D-最適設計，輸出 SolveResult JSON
- verify: 對設計檔做等價定理判定，輸出 KWReport JSON
- oracle: 網格 oracle，輸出 SolveResult JSON
- region-map: 區域圖 CSV
- scan: 菱形設計掃描 CSV

結束碼：0 成功、1 未知參數或其他錯誤、2 定義域錯誤（錐外參數、設計檔格式錯誤）、
3 未收斂。stdout 只輸出資料，進度與訊息寫到 stderr。

Author: RhombicDesign Kit
Version: 1.0
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, NoReturn, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .designs import DiscreteDesign, RhombicDesign, design_from_dict, group_orbits, to_discrete
from .equivalence import kw_verify
from .errors import ConvergenceError, DomainError, OptDesError
from .model_core import DispersionSpec
from .regions import conjecture_scan, region_map
from .report_writer import build_meta, write_json, write_region_csv
from .solvers import NumericOptions, SolveResult, grid_oracle, solve

Subcommand = Literal["solve", "verify", "oracle", "region-map", "scan"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2
EXIT_CONVERGENCE = 3


class UsageError(Exception):
    """argparse 解析失敗；訊息已印出"""


class _Parser(argparse.ArgumentParser):
    """未知參數時印出用法並以結束碼 1 離開，而不是 argparse 預設的 2"""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        print(f"❌ {self.prog}: {message}", file=sys.stderr)
        raise UsageError(message)


class CommandConfig(BaseModel):
    """解析後的命令列設定"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    subcommand: Subcommand
    k: Optional[int] = Field(None, ge=2)
    d0: Optional[float] = None
    d1: Optional[float] = None
    d2: float = 0.0
    input: Optional[Path] = None
    out: Optional[Path] = None
    format: Literal["rhombic", "discrete"] = "rhombic"
    grid: int = Field(41, ge=2)
    resolution: Optional[int] = Field(None, ge=1)
    tolerance: Optional[float] = Field(None, gt=0)
    confirm: bool = False
    jobs: Optional[int] = Field(None, ge=1)
    no_meta: bool = False
    max_sweeps: Optional[int] = Field(None, ge=1)
    d1_range: Optional[Tuple[float, float]] = None
    d2_range: Optional[Tuple[float, float]] = None
    pretty: bool = False

    def spec(self) -> DispersionSpec:
        if self.k is None or self.d0 is None or self.d1 is None:
            raise DomainError(f"{self.subcommand} 需要 --k、--d0、--d1")
        return DispersionSpec(k=self.k, d0=self.d0, d1=self.d1, d2=self.d2)

    def params(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", exclude={"out", "pretty", "no_meta"})


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="optdes", description="隨機係數迴歸的 D-最適設計工具")
    subparsers = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def add_spec(sub: argparse.ArgumentParser, required: bool) -> None:
        sub.add_argument("--k", type=int, required=required, help="迴歸變數個數 K")
        sub.add_argument("--d0", type=float, required=required, help="截距變異數（已併入誤差變異數）")
        sub.add_argument("--d1", type=float, required=required, help="斜率變異數")
        sub.add_argument("--d2", type=float, default=0.0, help="斜率共變異數（預設 0）")

    def add_output(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--out", type=Path, help="輸出檔；省略時寫到 stdout")
        sub.add_argument("--no-meta", action="store_true", help="不寫 <out>.meta.json 旁檔")

    solve_parser = subparsers.add_parser("solve", help="求解 D-最適設計")
    add_spec(solve_parser, True)
    add_output(solve_parser)
    solve_parser.add_argument("--format", choices=("rhombic", "discrete"), default="rhombic")
    solve_parser.add_argument("--tolerance", type=float)
    solve_parser.add_argument("--max-sweeps", type=int)
    solve_parser.add_argument("--pretty", action="store_true")

    verify_parser = subparsers.add_parser("verify", help="等價定理判定")
    add_spec(verify_parser, True)
    add_output(verify_parser)
    verify_parser.add_argument("--in", dest="input", type=Path, required=True, help="設計或 SolveResult JSON")
    verify_parser.add_argument("--tolerance", type=float)
    verify_parser.add_argument("--pretty", action="store_true")

    oracle_parser = subparsers.add_parser("oracle", help="網格 oracle")
    add_spec(oracle_parser, True)
    add_output(oracle_parser)
    oracle_parser.add_argument("--grid", type=int, default=41, help="每軸網格點數")
    oracle_parser.add_argument("--format", choices=("rhombic", "discrete"), default="discrete")
    oracle_parser.add_argument("--tolerance", type=float)
    oracle_parser.add_argument("--pretty", action="store_true")

    map_parser = subparsers.add_parser("region-map", help="區域圖 CSV")
    map_parser.add_argument("--k", type=int, required=True)
    add_output(map_parser)
    map_parser.add_argument("--resolution", type=int, default=60)
    map_parser.add_argument("--confirm", action="store_true")
    map_parser.add_argument("--jobs", type=int)
    map_parser.add_argument("--max-sweeps", type=int)
    map_parser.add_argument("--d1-range", type=float, nargs=2, metavar=("LO", "HI"))
    map_parser.add_argument("--d2-range", type=float, nargs=2, metavar=("LO", "HI"))

    scan_parser = subparsers.add_parser("scan", help="錐內菱形設計掃描 CSV")
    scan_parser.add_argument("--k", type=int, required=True)
    add_output(scan_parser)
    scan_parser.add_argument("--resolution", type=int, default=40)
    scan_parser.add_argument("--jobs", type=int)
    scan_parser.add_argument("--max-sweeps", type=int)
    scan_parser.add_argument("--d1-range", type=float, nargs=2, metavar=("LO", "HI"))

    return parser


def parse_command(argv: Sequence[str]) -> CommandConfig:
    namespace = build_parser().parse_args(list(argv))
    values = {key: value for key, value in vars(namespace).items() if value is not None}
    return CommandConfig.model_validate(values)


def _meta(config: CommandConfig) -> Optional[Dict[str, Any]]:
    if config.no_meta or config.out is None:
        return None
    return build_meta(config.subcommand, config.params())


def _load_design(path: Path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise DomainError(f"找不到設計檔: {path}") from e
    except json.JSONDecodeError as e:
        raise DomainError(f"設計檔不是合法 JSON: {path}: {e}") from e
    if isinstance(data, dict) and "method" in data and "design" in data:
        if data["design"] is None:
            raise DomainError(f"{path} 的 SolveResult 沒有設計")
        data = data["design"]
    return design_from_dict(data)


def _with_format(result: SolveResult, fmt: str) -> SolveResult:
    design = result.design
    if fmt == "discrete" and isinstance(design, RhombicDesign):
        return result.model_copy(update={"design": to_discrete(design)})
    if fmt == "rhombic" and isinstance(design, DiscreteDesign):
        try:
            grouped = group_orbits(design, tol=1e-9)
        except DomainError as e:
            return result.model_copy(update={"notes": result.notes + [f"無法分組為菱形設計: {e}"]})
        return result.model_copy(update={"design": grouped})
    return result


def _cmd_solve(config: CommandConfig) -> int:
    spec = config.spec()
    print(f"🔍 求解 K={spec.k}, d0={spec.d0}, d1={spec.d1}, d2={spec.d2}", file=sys.stderr)
    options = NumericOptions(max_sweeps=config.max_sweeps, tolerance=config.tolerance)
    result = _with_format(solve(spec, options), config.format)
    icon = "✅" if result.status == "solved" else "⚠️"
    print(f"{icon} {result.method} / {result.region_label}: {result.status}", file=sys.stderr)
    write_json(result, config.out, config.pretty, _meta(config))
    return EXIT_OK


def _cmd_verify(config: CommandConfig) -> int:
    spec = config.spec()
    design = _load_design(config.input)
    dd = to_discrete(design) if isinstance(design, RhombicDesign) else design
    report = kw_verify(spec, dd, config.tolerance)
    icon = "✅" if report.is_optimal else "⚠️"
    print(f"{icon} verdict={report.verdict}, min ψ={report.min_psi:.3e}", file=sys.stderr)
    write_json(report, config.out, config.pretty, _meta(config))
    return EXIT_OK


def _cmd_oracle(config: CommandConfig) -> int:
    spec = config.spec()
    print(f"🔍 網格 oracle: {config.grid}^{spec.k} 點", file=sys.stderr)
    result = _with_format(grid_oracle(spec, config.grid, tolerance=config.tolerance), config.format)
    print(f"📊 log det = {result.log_det:.12g}, verdict={result.kw.verdict}", file=sys.stderr)
    write_json(result, config.out, config.pretty, _meta(config))
    return EXIT_OK


def _cmd_region_map(config: CommandConfig) -> int:
    verdicts = region_map(
        config.k,
        d1_range=config.d1_range,
        d2_range=config.d2_range,
        resolution=config.resolution or 60,
        confirm=config.confirm,
        jobs=config.jobs,
        progress=True,
        max_sweeps=config.max_sweeps,
    )
    write_region_csv(verdicts, config.out, _meta(config))
    print(f"✅ 已寫出 {len(verdicts)} 個格點", file=sys.stderr)
    return EXIT_OK


def _cmd_scan(config: CommandConfig) -> int:
    summary = conjecture_scan(
        config.k,
        resolution=config.resolution or 40,
        d1_range=config.d1_range,
        jobs=config.jobs,
        progress=True,
        max_sweeps=config.max_sweeps,
    )
    meta = _meta(config)
    if meta is not None:
        meta["summary"] = summary.model_dump(mode="json", exclude={"verdicts"})
    write_region_csv(summary.verdicts, config.out, meta)
    print(
        f"📊 失敗 {summary.failures}/{summary.cells} ({summary.failure_fraction:.2%})，"
        f"未定 {summary.inconclusive}",
        file=sys.stderr,
    )
    return EXIT_OK


_COMMANDS = {
    "solve": _cmd_solve,
    "verify": _cmd_verify,
    "oracle": _cmd_oracle,
    "region-map": _cmd_region_map,
    "scan": _cmd_scan,
}


def run(argv: Sequence[str]) -> int:
    """執行一個子命令並回傳結束碼"""
    try:
        config = parse_command(argv)
    except UsageError:
        return EXIT_USAGE
    except ValidationError as e:
        print(f"❌ 參數錯誤: {e}", file=sys.stderr)
        return EXIT_DOMAIN

    try:
        return _COMMANDS[config.subcommand](config)
    except (DomainError, ValidationError) as e:
        print(f"❌ 定義域錯誤: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except ConvergenceError as e:
        print(f"❌ 未收斂 (residual={e.residual}): {e}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OptDesError as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(run(sys.argv[1:] if argv is None else argv))
