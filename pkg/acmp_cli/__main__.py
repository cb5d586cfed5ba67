"""
ACMP 命令行入口

允许通过 python -m acmp_cli 启动。
"""

import sys

from acmp_cli.main import main

sys.exit(main())
