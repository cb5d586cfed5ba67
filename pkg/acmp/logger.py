"""
ACMP 统一日志配置

所有日志输出到 stderr，stdout 留给命令行的 JSON 结果。
支持通过环境变量 ACMP_LOG_LEVEL 控制日志级别。

β 扫描的工作线程以 SWEEP_THREAD_PREFIX 命名，这些线程里打出的日志
会在消息前带上 `[线程名]`，便于区分并行网格点各自的积分过程。
"""

import logging
import os
import sys
import threading

# β 扫描线程池的线程名前缀
SWEEP_THREAD_PREFIX = "acmp-sweep"

_logger_lock = threading.Lock()


class WorkerTagFilter(logging.Filter):
    """给记录加上 worker 字段：扫描线程为 `[线程名] `，其他线程为空"""

    def filter(self, record: logging.LogRecord) -> bool:
        name = record.threadName or ""
        record.worker = f"[{name}] " if name.startswith(SWEEP_THREAD_PREFIX) else ""
        return True


def get_logger(name: str) -> logging.Logger:
    """
    获取统一配置的 Logger 实例

    Args:
        name: 日志名称（通常传 __name__）

    Returns:
        配置好的 Logger 实例
    """
    logger = logging.getLogger(f"acmp.{name}")

    # 扫描并行时多个线程会同时取 logger，加锁避免重复 handler
    with _logger_lock:
        if not logger.handlers:
            level = os.getenv("ACMP_LOG_LEVEL", "INFO").upper()
            logger.setLevel(getattr(logging, level, logging.INFO))
            logger.addFilter(WorkerTagFilter())

            handler = logging.StreamHandler(sys.stderr)
            handler.setLevel(getattr(logging, level, logging.INFO))
            handler.setFormatter(logging.Formatter(
                fmt="%(asctime)s | %(levelname)-7s | %(name)s | %(worker)s%(message)s",
                datefmt="%Y-%m-%d %H:%M:%S",
            ))
            logger.addHandler(handler)

    return logger
