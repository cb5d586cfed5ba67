"""
存储层

- BaseRunStore: 运行结果存储抽象
- CsvRunStore: CSV + JSON 文件实现
- graph_store: 边列表 / 标签 / 特征文件的读写
"""

from acmp.store.base_store import BaseRunStore
from acmp.store.csv_store import CsvRunStore
from acmp import config
from acmp.errors import ConfigError


def create_run_store() -> BaseRunStore:
    """创建并返回配置的 RunStore 实例"""
    if config.OUTPUT_FORMAT == "csv":
        return CsvRunStore()
    raise ConfigError("ACMP_OUTPUT_FORMAT 必须为 csv")
