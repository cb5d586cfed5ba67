"""
ACMP 命令行

子命令：
    simulate     按配置或预设模拟，写出 trajectory.csv / energy.csv / clusters.csv / run.json
    sweep-beta   同一配置下扫描 β，写出 sweep.csv
    gen-graph    生成两类随机图，写出边列表、标签、特征和 JSON 头
    flocking     双簇聚集：评估充分条件并模拟检查

使用方式：
    python -m acmp_cli simulate --preset fig4 --out runs/fig4
    python -m acmp_cli simulate --config my_run.json --beta 0.5 --t-end 20
    python -m acmp_cli sweep-beta --preset fig5 --jobs 4
    python -m acmp_cli gen-graph --n 100 --p-in 0.9 --p-out 0.1 --seed 1 --out graphs/syn
    python -m acmp_cli flocking --s 1 --d 0.1 --eta 0.1

退出码：0 成功（包括带爆破标记的运行），2 配置错误，3 运行错误。
出错时在 stdout 打印 {"error": ..., "detail": ...}。
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Optional

from pydantic import ValidationError

from acmp import config
from acmp.errors import AcmpError, ConfigError
from acmp.experiment_manager import ExperimentManager
from acmp.logger import get_logger
from acmp.models import ExperimentConfig, TwoClassGraphSpec
from acmp.presets import load_preset, preset_names

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


# ----------------------------------------------------------
# 参数解析
# ----------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON 配置文件（单个对象或对象列表）")
    parser.add_argument("--preset", choices=preset_names(), help="内置预设")
    parser.add_argument("--t-end", type=float, help="覆盖 solver.t_end")
    parser.add_argument("--beta", type=float, help="覆盖 params.beta")
    parser.add_argument("--alpha", type=float, help="覆盖 params.alpha")
    parser.add_argument("--delta", type=float, help="覆盖 params.delta")
    parser.add_argument("--method", choices=["euler", "midpoint", "rk4", "dopri5"], help="覆盖 solver.method")
    parser.add_argument("--seed", type=int, help="随机种子（默认取 ACMP_SEED）")
    parser.add_argument("--out", help="输出目录")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acmp", description="ACMP graph dynamics")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="运行模拟")
    _add_common(simulate)

    sweep = sub.add_parser("sweep-beta", help="β 扫描")
    _add_common(sweep)
    sweep.add_argument("--grid", help="逗号分隔的 β 网格，如 0,0.25,0.5")
    sweep.add_argument("--jobs", type=int, default=None, help=f"并行数（默认 {config.DEFAULT_JOBS}）")

    gen = sub.add_parser("gen-graph", help="生成两类随机图")
    gen.add_argument("--config", help="TwoClassGraphSpec 的 JSON 文件")
    gen.add_argument("--n", type=int, default=100)
    gen.add_argument("--p-in", type=float, default=0.9)
    gen.add_argument("--p-out", type=float, default=0.1)
    gen.add_argument("--sigma", type=float, default=2.0)
    gen.add_argument("--dim", type=int, default=2)
    gen.add_argument("--means", help="两类特征均值，逗号分隔；含负号时写成 --means=-0.5,0.5")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out", required=True, help="输出目录")

    flock = sub.add_parser("flocking", help="双簇聚集实验")
    _add_common(flock)
    flock.add_argument("--n1", type=int)
    flock.add_argument("--n2", type=int)
    flock.add_argument("--s", type=float)
    flock.add_argument("--d", type=float)
    flock.add_argument("--eta", type=float)
    return parser


# ----------------------------------------------------------
# 配置
# ----------------------------------------------------------

def _read_config_file(path: str) -> list[dict[str, Any]]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"配置文件不是合法 JSON: {e}") from e
    if isinstance(raw, dict):
        return [raw]
    if isinstance(raw, list) and all(isinstance(item, dict) for item in raw):
        return raw
    raise ConfigError("配置文件必须是对象或对象列表")


def load_configs(args: argparse.Namespace, default_preset: Optional[str] = None) -> list[ExperimentConfig]:
    """读取配置或预设，再应用命令行覆盖（覆盖后重新校验）"""
    if args.config and args.preset:
        raise ConfigError("--config 与 --preset 只能二选一")
    if args.config:
        raws = _read_config_file(args.config)
    elif args.preset or default_preset:
        raws = [cfg.model_dump(mode="json") for cfg in load_preset(args.preset or default_preset)]
    else:
        raise ConfigError("需要 --config 或 --preset")

    configs = []
    for raw in raws:
        cfg = ExperimentConfig.model_validate(raw)
        configs.append(ExperimentConfig.model_validate(_apply_overrides(cfg.model_dump(mode="json"), args)))
    return configs


def _apply_overrides(raw: dict[str, Any], args: argparse.Namespace) -> dict[str, Any]:
    if args.seed is not None:
        raw["seed"] = args.seed
    for flag, section, key in (
        ("t_end", "solver", "t_end"),
        ("method", "solver", "method"),
        ("beta", "params", "beta"),
        ("alpha", "params", "alpha"),
        ("delta", "params", "delta"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            raw.setdefault(section, {})[key] = value

    flocking_flags = {k: getattr(args, k, None) for k in ("n1", "n2", "s", "d", "eta")}
    if any(v is not None for v in flocking_flags.values()):
        section = raw.get("flocking") or {}
        section.update({k: v for k, v in flocking_flags.items() if v is not None})
        raw["flocking"] = section
    return raw


def _run_dirs(configs: list[ExperimentConfig], out: Optional[str]) -> list[Optional[Path]]:
    """单个配置直接写到 --out；多个配置各写到 --out/<name>"""
    if out is None:
        return [None] * len(configs)
    if len(configs) == 1:
        return [Path(out)]
    return [Path(out) / cfg.name for cfg in configs]


# ----------------------------------------------------------
# 子命令
# ----------------------------------------------------------

def cmd_simulate(args: argparse.Namespace, manager: ExperimentManager) -> dict[str, Any]:
    configs = load_configs(args)
    runs = []
    for cfg, run_dir in zip(configs, _run_dirs(configs, args.out)):
        summary = manager.simulate(cfg, run_dir)
        runs.append({
            "name": summary.name,
            "model": summary.model.value,
            "run_dir": str(manager.output_dir(cfg, run_dir)),
            "blow_up": summary.blow_up,
            "final_dirichlet": summary.final_dirichlet,
            "output_files": summary.output_files,
        })
    return {"command": "simulate", "runs": runs}


def cmd_sweep_beta(args: argparse.Namespace, manager: ExperimentManager) -> dict[str, Any]:
    configs = load_configs(args)
    grid = None
    if args.grid:
        try:
            grid = [float(v) for v in args.grid.split(",") if v.strip()]
        except ValueError as e:
            raise ConfigError(f"--grid 格式错误: {e}") from e

    sweeps = []
    for cfg, run_dir in zip(configs, _run_dirs(configs, args.out)):
        rows = manager.sweep_beta(cfg, grid=grid, jobs=args.jobs, out_dir=run_dir)
        sweeps.append({
            "name": cfg.name,
            "run_dir": str(manager.output_dir(cfg, run_dir)),
            "rows": [row.model_dump() for row in rows],
        })
    return {"command": "sweep-beta", "sweeps": sweeps}


def _parse_means(text: str) -> tuple[float, float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"--means 格式错误: {e}") from e
    if len(values) != 2:
        raise ConfigError(f"--means 需要恰好两个值，得到 {len(values)} 个")
    return values[0], values[1]


def cmd_gen_graph(args: argparse.Namespace, manager: ExperimentManager) -> dict[str, Any]:
    if args.config:
        raws = _read_config_file(args.config)
        if len(raws) != 1:
            raise ConfigError("gen-graph 只接受单个图配置")
        spec = TwoClassGraphSpec.model_validate(raws[0])
    else:
        fields: dict[str, Any] = {
            "n": args.n, "p_in": args.p_in, "p_out": args.p_out, "sigma": args.sigma, "dim": args.dim,
        }
        if args.means:
            fields["means"] = _parse_means(args.means)
        spec = TwoClassGraphSpec(**fields)
    paths = manager.generate_graph(spec, Path(args.out), seed=args.seed)
    return {"command": "gen-graph", "files": {k: str(v) for k, v in paths.items()}}


def cmd_flocking(args: argparse.Namespace, manager: ExperimentManager) -> dict[str, Any]:
    configs = load_configs(args, default_preset="flocking")
    if len(configs) != 1:
        raise ConfigError("flocking 只接受单个配置")
    cfg = configs[0]
    report = manager.flocking(cfg, Path(args.out) if args.out else None)
    return {"command": "flocking", "name": cfg.name, **report}


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep-beta": cmd_sweep_beta,
    "gen-graph": cmd_gen_graph,
    "flocking": cmd_flocking,
}


def _emit(payload: dict[str, Any]) -> None:
    sys.stdout.write(json.dumps(payload, ensure_ascii=False, default=str) + "\n")


def main(argv: Optional[list[str]] = None) -> int:
    """命令行主函数，返回退出码"""
    args = build_parser().parse_args(argv)
    logger.info("执行命令: %s", args.command)

    try:
        manager = ExperimentManager()
        payload = COMMANDS[args.command](args, manager)
    except ValidationError as e:
        logger.error("配置校验失败: %s", e)
        _emit({"error": "config_error", "detail": e.errors(include_url=False)})
        return EXIT_CONFIG
    except ConfigError as e:
        logger.error("配置错误: %s", e)
        _emit({"error": "config_error", "detail": str(e)})
        return EXIT_CONFIG
    except AcmpError as e:
        logger.error("运行错误 (%s): %s", type(e).__name__, e)
        _emit({"error": type(e).__name__, "detail": str(e)})
        return EXIT_RUNTIME
    except OSError as e:
        logger.error("文件读写失败: %s", e)
        _emit({"error": "io_error", "detail": str(e)})
        return EXIT_RUNTIME

    _emit(payload)
    logger.info("命令完成: %s", args.command)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
