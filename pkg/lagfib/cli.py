# -*- coding: utf-8 -*-
"""
lagfib command-line tool
拉格朗日纤维化数值实验的命令行接口
"""

import argparse
import sys
import os
import logging
from dataclasses import fields
from typing import Any, Dict, List, Optional

# 添加项目根目录到路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from common.errors import ErrorCode, LagfibError
from common.protocol import build_error, emit
from lagfib import __version__
from lagfib.config import RunConfig
from lagfib.router import Router
from lagfib.sweep import QUANTITIES

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

router = Router()


def setup_logging(debug: bool = False, level: Optional[str] = None,
                  log_file: Optional[str] = None):
    """
    配置日志

    日志只写 stderr（或 log_file），stdout 留给 JSON/CSV 结果。
    """
    if debug:
        resolved = logging.DEBUG
    else:
        resolved = getattr(logging, (level or "WARNING").upper(), logging.WARNING)
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(level=resolved, format=LOG_FORMAT, handlers=handlers, force=True)


def _register_default_handlers(target: Router):
    """注册默认的子命令处理器"""
    from lagfib.handlers import check, classification, geometry, lattice

    # 几何
    target.add_route("command", "discriminant", geometry.handle_discriminant, "Δ membership map")
    target.add_route("command", "sweep", geometry.handle_sweep, "parameter grid sweep")
    target.add_route("command", "flow", geometry.handle_flow, "Hamiltonian flow trajectory")

    # 周期格
    target.add_route("command", "alpha", lattice.handle_alpha, "singular period alpha")
    target.add_route("command", "periods", lattice.handle_periods, "period basis table")
    target.add_route("command", "monodromy", lattice.handle_monodromy, "monodromy matrices")

    # 分类与检查
    target.add_route("command", "classify", classification.handle_classify, "germ classification")
    target.add_route("command", "check", check.handle_check, "invariant suite")

    logger.debug(f"Registered commands: {target.names('command')}")


def _model_options() -> argparse.ArgumentParser:
    """各子命令共用的模型和容差参数，默认值 None 表示沿用配置"""
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group('模型与容差')
    group.add_argument('--family', choices=['hl', 'ff22'], help='纤维化族（默认hl）')
    group.add_argument('--n', type=int, help='维数（HL，默认3）')
    group.add_argument('--b', help='底点，如 1,0,0（负数开头写成 --b=-1,0,0）')
    group.add_argument('--eps', type=float, help='HL 截面参数 ε')
    group.add_argument('--ff-eps', dest='ff_eps', type=float, help='FF22 截面参数 ε')
    group.add_argument('--theta0', type=float, help='FF22 截面角 θ₀')
    group.add_argument('--tol-root', dest='tol_root', type=float, help='求根容差')
    group.add_argument('--tol-disc', dest='tol_disc', type=float, help='判别轨迹容差')
    group.add_argument('--quad-rel', dest='quad_rel', type=float, help='求积相对容差')
    group.add_argument('--ode-rel', dest='ode_rel', type=float, help='ODE 相对容差')
    group.add_argument('--ode-atol', dest='ode_atol', type=float, help='ODE 绝对容差')
    group.add_argument('--eval-policy', dest='eval_policy', choices=['strict', 'nan'],
                       help='表达式求值非有限时的处理')
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='lagfib',
        description='lagfib - 拉格朗日纤维化的判别轨迹、周期格、单值性与芽分类',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例:
  %(prog)s alpha --family hl --n 2 --b 1,0
  %(prog)s alpha --path leg2 --samples 17
  %(prog)s discriminant --axis b2:-2:2:11 --axis b3:-2:2:11 -f csv
  %(prog)s monodromy --family ff22 --radius 0.5
  %(prog)s classify --family ff22 --H "0" --Hp "flatbump(d)"
  %(prog)s check --only "alpha*"

环境变量:
  LAGFIB_THREADS  扫描进程池大小上限
        """
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--config', '-c',
                        help='配置文件路径（key=value 文本或 .yaml）')
    parser.add_argument('--debug', '-d', action='store_true',
                        help='启用调试输出')
    parser.add_argument('--format', '-f', choices=['json', 'csv'],
                        help='输出格式（默认json）')
    parser.add_argument('--output', '-o',
                        help='输出文件（默认stdout）')
    parser.add_argument('--seed', type=int,
                        help='随机种子（默认42）')
    parser.add_argument('--threads', type=int,
                        help='扫描进程数')

    parent = _model_options()
    subparsers = parser.add_subparsers(dest='command', help='可用命令')

    # discriminant命令
    parser_disc = subparsers.add_parser('discriminant', parents=[parent],
                                        help='网格上的 Δ 成员图')
    parser_disc.add_argument('--axis', dest='axes', action='append',
                             help='扫描轴 name:lo:hi:num，可重复')

    # sweep命令
    parser_sweep = subparsers.add_parser('sweep', parents=[parent], help='参数网格扫描')
    parser_sweep.add_argument('--quantity', choices=QUANTITIES, default='alpha',
                              help='扫描的量（默认alpha）')
    parser_sweep.add_argument('--axis', dest='axes', action='append',
                              help='扫描轴 name:lo:hi:num，可重复')

    # alpha命令
    parser_alpha = subparsers.add_parser('alpha', parents=[parent],
                                         help='奇异周期 α 及两种求法的比较')
    parser_alpha.add_argument('--path', help='沿趋近路径拟合爆破指数（leg1/leg2/leg3/vertex）')
    parser_alpha.add_argument('--t-min', dest='t_min', type=float, help='路径参数下限')
    parser_alpha.add_argument('--t-max', dest='t_max', type=float, help='路径参数上限')
    parser_alpha.add_argument('--samples', type=int, help='路径采样数')

    # periods命令
    parser_periods = subparsers.add_parser('periods', parents=[parent], help='周期基表')
    parser_periods.add_argument('--H', help='形变函数 H（默认0）')
    parser_periods.add_argument('--to', help='路径终点，起点为 --b')
    parser_periods.add_argument('--steps', type=int, help='路径段数（默认10）')
    parser_periods.add_argument('--method', choices=['quadrature', 'shooting'],
                                help='HL 多重时间求法（默认 quadrature）')
    parser_periods.add_argument('--closedness', type=float, metavar='H_STEP',
                                help='附加起点处 τ₁ 的闭性残差')

    # monodromy命令
    parser_mono = subparsers.add_parser('monodromy', parents=[parent], help='单值矩阵')
    parser_mono.add_argument('--loop', help='闭路，逗号分隔（leg1,leg2,leg3,composite,...）')
    parser_mono.add_argument('--radius', type=float, help='闭路半径')
    parser_mono.add_argument('--points', type=int, help='闭路采样点数 K')
    parser_mono.add_argument('--H', help='形变函数 H（默认0）')
    parser_mono.add_argument('--reverse', action='store_true', help='反向绕行')
    parser_mono.add_argument('--method', choices=['quadrature', 'shooting'],
                             help='HL 多重时间求法（默认 quadrature）')

    # flow命令
    parser_flow = subparsers.add_parser('flow', parents=[parent], help='导出哈密顿流轨迹')
    parser_flow.add_argument('--i', type=int, default=1, help='F_i 的下标（默认1）')
    parser_flow.add_argument('--t', type=float, default=1.0, help='终止时间（默认1）')
    parser_flow.add_argument('--z', help='起始相点坐标，默认取 --b 处的截面')
    parser_flow.add_argument('--section', help='起始截面（HL: plus/minus/zero，FF22: sigma1/sigma2）')
    parser_flow.add_argument('--method', choices=['auto', 'closed', 'ode'], default='auto',
                             help='流的求法')
    parser_flow.add_argument('--samples', type=int, help='采样点数')
    parser_flow.add_argument('--return-time', dest='return_time', action='store_true',
                             help='附加首次回归时间')

    # classify命令
    parser_cls = subparsers.add_parser('classify', parents=[parent], help='判定 (H, H′) 是否等价')
    parser_cls.add_argument('--H', help='形变函数 H')
    parser_cls.add_argument('--Hp', help='形变函数 H′')
    parser_cls.add_argument('--k-max', dest='k_max', type=int, help='平坦度检查的最高阶')
    parser_cls.add_argument('--denom-floor', dest='denom_floor', type=float,
                            help='Moser 场分母下限')
    parser_cls.add_argument('--samples', type=int, help='每条路径的采样数')
    parser_cls.add_argument('--tees', action='store_true',
                            help='对构造出的 φ 检查 φ*τ₀ − τ₀ 的平坦度')

    # check命令
    parser_check = subparsers.add_parser('check', parents=[parent], help='运行不变量检查')
    parser_check.add_argument('--only', action='append',
                              help='只运行匹配的检查项（通配符），可重复')

    return parser


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """命令行中与 RunConfig 同名的参数"""
    names = {f.name for f in fields(RunConfig)}
    return {name: value for name, value in vars(args).items()
            if name in names and value is not None}


def _csv_view(result: Dict[str, Any]) -> Dict[str, Any]:
    """无 records 的结果按行展开"""
    if "records" in result:
        return result
    for key in ("checks", "loops"):
        if key in result:
            return {"records": result[key]}
    return {"records": [result]}


def run_subcommand(config: RunConfig, command: str, context: Dict[str, Any]) -> int:
    """
    执行子命令并输出结果

    Returns:
        退出码（check 有失败项时为 1）
    """
    handler = router.match("command", command)
    if handler is None:
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Unknown command {command!r}",
                          data={"available": router.names("command")})
    context["config"] = config
    result = handler(context)

    meta = {"seed": config.seed, "config": config.to_dict()}
    if config.format == "csv":
        view = _csv_view(result)
        payload = emit(view, "csv", config.output, command, columns=result.get("columns"))
    else:
        payload = emit(result, "json", config.output, command, meta)
    if not config.output:
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()

    if command == "check" and not result["passed"]:
        logger.warning(f"Invariant suite failed: {result['summary']}")
        return LagfibError(ErrorCode.CHECK_FAILED).exit_code
    return 0


def main(argv: Optional[List[str]] = None):
    """主入口"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        sys.exit(1)

    # 配置日志
    setup_logging(args.debug)

    if not router.routes:
        _register_default_handlers(router)

    try:
        config = RunConfig.from_sources(args.config, config_overrides(args))
        if config.log_file or config.log_level.upper() != "WARNING":
            setup_logging(args.debug, config.log_level, config.log_file)
        context = {key: value for key, value in vars(args).items()
                   if key not in config_overrides(args)}
        code = run_subcommand(config, args.command, context)

    except LagfibError as e:
        sys.stderr.buffer.write(build_error(e, args.command))
        sys.stderr.flush()
        code = e.exit_code
    except KeyboardInterrupt:
        print("\nInterrupted", file=sys.stderr)
        code = 130
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        if args.debug:
            import traceback
            traceback.print_exc()
        code = LagfibError(ErrorCode.INTERNAL_ERROR).exit_code

    sys.exit(code)


if __name__ == '__main__':
    main()
