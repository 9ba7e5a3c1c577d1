#!/usr/bin/env python3
"""
optdes 主程式 (Main Entry)
=========================

命令列入口，轉交 optdes_core.cli 處理子命令：

  python optdes_main.py solve --k 2 --d0 1 --d1 2 --d2 0.5
  python optdes_main.py verify --in design.json --k 2 --d0 1 --d1 2 --d2 0.5
  python optdes_main.py oracle --k 2 --d0 1 --d1 2 --d2 0.5 --grid 41
  python optdes_main.py region-map --k 3 --resolution 100 --confirm --out k3.csv
  python optdes_main.py scan --k 4 --resolution 40 --jobs 8 --out k4_scan.csv

Author: RhombicDesign Kit
Version: 1.0
"""

from optdes_core.cli import main

if __name__ == "__main__":
    main()
