"""
时间积分

显式 Runge-Kutta 族：Euler、Midpoint、RK4（定步长）与 Dormand-Prince 5(4)（自适应）。
各方法用扩展 Butcher 表描述，共用同一个阶段循环。

采样约定：步长会被缩短以恰好落在每个采样时刻和 t_end 上，不做稠密输出插值，
因此记录下来的时间点是精确的。爆破（出现非有限值，或 sup 范数超过设定阈值）
不抛异常，而是截断轨迹并打标记。
"""

from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from acmp import config
from acmp.errors import MaxStepsExceededError, ObserverError, SolverError, StepUnderflowError
from acmp.logger import get_logger
from acmp.models import SolverMethod, SolverSpec, SolverStats

logger = get_logger(__name__)

RhsFunction = Callable[[np.ndarray], np.ndarray]
Observer = Callable[[float, np.ndarray], Any]


# ============================================================
# Butcher 表
# ============================================================

class ExplicitRungeKutta:
    """
    显式 RK 方法基类

    BT[k] 是计算第 k+1 个阶段所用的系数，最后一行 BT[s−1] 是解的权重；
    自适应方法额外给出局部截断误差系数 TR。
    """
    method: SolverMethod
    s: int = 1
    order: int = 1
    is_adaptive: bool = False
    BT: dict[int, list[float]] = {}
    TR: Optional[list[float]] = None

    def step(self, rhs: RhsFunction, y: np.ndarray, h: float) -> tuple[np.ndarray, Optional[np.ndarray]]:
        """走一步，返回 (新状态, 误差估计或 None)"""
        slopes = [rhs(y)]
        for k in range(self.s - 1):
            increment = sum(b * slope for b, slope in zip(self.BT[k], slopes) if b != 0)
            slopes.append(rhs(y + h * increment))

        weights = self.BT[self.s - 1]
        y_new = y + h * sum(b * slope for b, slope in zip(weights, slopes) if b != 0)

        if self.TR is None:
            return y_new, None
        error = h * sum(c * slope for c, slope in zip(self.TR, slopes) if c != 0)
        return y_new, error


class EulerMethod(ExplicitRungeKutta):
    method = SolverMethod.EULER
    s = 1
    order = 1
    BT = {0: [1.0]}


class MidpointMethod(ExplicitRungeKutta):
    method = SolverMethod.MIDPOINT
    s = 2
    order = 2
    BT = {
        0: [1/2],
        1: [0.0, 1.0],
    }


class RK4Method(ExplicitRungeKutta):
    """经典四阶 Runge-Kutta"""
    method = SolverMethod.RK4
    s = 4
    order = 4
    BT = {
        0: [1/2],
        1: [0.0, 1/2],
        2: [0.0, 0.0, 1.0],
        3: [1/6, 1/3, 1/3, 1/6],
    }


class DormandPrince54(ExplicitRungeKutta):
    """
    Dormand-Prince 5(4)，七阶段，五阶推进、内嵌四阶误差估计

    第七个阶段取在新解上（FSAL），这里每步仍重新计算全部七个阶段。
    """
    method = SolverMethod.DOPRI5
    s = 7
    order = 5
    is_adaptive = True
    BT = {
        0: [       1/5],
        1: [      3/40,        9/40],
        2: [     44/45,      -56/15,       32/9],
        3: [19372/6561, -25360/2187, 64448/6561, -212/729],
        4: [ 9017/3168,     -355/33, 46732/5247,   49/176, -5103/18656],
        5: [    35/384,           0,   500/1113,  125/192,  -2187/6784, 11/84],
        6: [    35/384,           0,   500/1113,  125/192,  -2187/6784, 11/84],
    }
    TR = [71/57600, 0, -71/16695, 71/1920, -17253/339200, 22/525, -1/40]


METHODS: dict[SolverMethod, type[ExplicitRungeKutta]] = {
    SolverMethod.EULER: EulerMethod,
    SolverMethod.MIDPOINT: MidpointMethod,
    SolverMethod.RK4: RK4Method,
    SolverMethod.DOPRI5: DormandPrince54,
}


def get_method(method: SolverMethod) -> ExplicitRungeKutta:
    return METHODS[SolverMethod(method)]()


# ============================================================
# 轨迹
# ============================================================

@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    采样轨迹

    times 严格递增，从 0 开始；正常结束时最后一个时刻为 t_end，
    爆破时截断在最后一个有限状态上（该时刻可能不在采样网格上），blow_up 为真。
    """
    times: np.ndarray
    states: np.ndarray
    stats: SolverStats

    @property
    def blow_up(self) -> bool:
        return self.stats.blow_up

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.times)


def sample_times(spec: SolverSpec) -> np.ndarray:
    """请求的采样时刻：0, Δ, 2Δ, ... 以及 t_end"""
    t_end = spec.t_end
    if spec.sample_every is None:
        return np.array([0.0, t_end])
    count = int(np.floor(t_end / spec.sample_every))
    times = spec.sample_every * np.arange(count + 1)
    times = times[times < t_end - 1e-12 * t_end]
    return np.append(times, t_end)


def error_norm(error: np.ndarray, y: np.ndarray, y_new: np.ndarray, atol: float, rtol: float) -> float:
    """按分量个数归一化的 RMS 误差范数"""
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((error / scale) ** 2)))


# ============================================================
# 积分主循环
# ============================================================

class _Integrator:
    """一次积分的可变状态，只在 integrate 内部使用"""

    def __init__(self, rhs: RhsFunction, x0, spec: SolverSpec, observer: Optional[Observer]):
        self.spec = spec
        self.method = get_method(spec.method)
        self.observer = observer
        self.observations: list[Any] = []
        self.stats = SolverStats(method=spec.method)
        self._rhs = rhs
        self.y = np.array(x0, dtype=float)
        self.t = 0.0
        self.times: list[float] = []
        self.states: list[np.ndarray] = []

    def rhs(self, y: np.ndarray) -> np.ndarray:
        self.stats.rhs_evaluations += 1
        return np.asarray(self._rhs(y), dtype=float)

    def record(self, t: float) -> None:
        state = self.y.copy()
        state.setflags(write=False)
        self.times.append(t)
        self.states.append(state)
        if self.observer is None:
            return
        try:
            self.observations.append(self.observer(t, state))
        except Exception as e:
            raise ObserverError(f"观察者在 t={t:g} 处失败: {e}") from e

    def check_step_budget(self) -> None:
        if self.stats.accepted_steps + self.stats.rejected_steps > self.spec.max_steps:
            raise MaxStepsExceededError(
                f"步数超过上限 {self.spec.max_steps}（t={self.t:g}）"
            )

    def flag_blow_up(self, t: float, reason: str) -> None:
        self.stats.blow_up = True
        self.stats.blow_up_time = t
        logger.warning("检测到爆破: t=%.6g, %s", t, reason)

    def over_threshold(self) -> bool:
        threshold = self.spec.blowup_threshold
        return threshold is not None and float(np.max(np.abs(self.y), initial=0.0)) > threshold

    def run(self) -> Trajectory:
        if not np.all(np.isfinite(self.y)):
            raise SolverError("初值含非有限分量")

        targets = sample_times(self.spec)
        self.record(0.0)
        if self.over_threshold():
            self.flag_blow_up(0.0, "初值已超过阈值")
            return self.finish()

        land_tol = 1e-12 * self.spec.t_end
        h = self.spec.step
        if self.method.is_adaptive:
            h = min(config.INITIAL_STEP_CAP, self.spec.t_end / 100.0)
        h_floor = config.STEP_UNDERFLOW_FACTOR * self.spec.t_end

        for target in targets[1:]:
            while True:
                clipped = self.t + h >= target - land_tol
                h_try = target - self.t if clipped else h
                with np.errstate(over="ignore", invalid="ignore"):
                    y_new, error = self.method.step(self.rhs, self.y, h_try)
                finite = bool(np.all(np.isfinite(y_new)))

                if not finite and error is None:
                    self.record_last_finite()
                    self.flag_blow_up(self.t + h_try, "出现非有限值")
                    return self.finish()

                if error is not None:
                    # 非有限的试探步按 err = ∞ 拒绝
                    if finite and np.all(np.isfinite(error)):
                        with np.errstate(over="ignore"):
                            err = error_norm(error, self.y, y_new, self.spec.atol, self.spec.rtol)
                    else:
                        err = np.inf
                    factor = self._step_factor(err)
                    if err > 1.0:
                        self.stats.rejected_steps += 1
                        self.check_step_budget()
                        h = h_try * factor
                        logger.debug("拒绝步: t=%.6g, h=%.3g, err=%.3g", self.t, h_try, err)
                        if h < h_floor:
                            if not finite:
                                # 任意小的步长都溢出：解在此处发散
                                self.record_last_finite()
                                self.flag_blow_up(self.t, "步长下限处仍出现非有限值")
                                return self.finish()
                            raise StepUnderflowError(
                                f"步长 {h:.3g} 低于下限 {h_floor:.3g}（t={self.t:g}）"
                            )
                        continue
                    h_next = h_try * factor
                    if clipped and factor >= 1.0:
                        h_next = max(h_next, h)
                    h = h_next

                self.stats.accepted_steps += 1
                self.check_step_budget()
                self.y = y_new
                self.t = target if clipped else self.t + h_try

                if self.over_threshold():
                    self.record(self.t)
                    self.flag_blow_up(self.t, f"sup 范数超过 {self.spec.blowup_threshold:g}")
                    return self.finish()
                if clipped:
                    self.record(self.t)
                    break

        return self.finish()

    def record_last_finite(self) -> None:
        """爆破截断前补记最后一个已接受的有限状态（若它不在采样时刻上）"""
        if self.t > self.times[-1]:
            self.record(self.t)

    def _step_factor(self, err: float) -> float:
        spec = self.spec
        if not np.isfinite(err):
            return spec.min_factor
        if err == 0.0:
            return spec.max_factor
        return min(spec.max_factor, max(spec.min_factor, spec.safety * err ** -0.2))

    def finish(self) -> Trajectory:
        self.stats.final_time = self.times[-1]
        times = np.array(self.times)
        states = np.stack(self.states)
        times.setflags(write=False)
        states.setflags(write=False)
        logger.info(
            "积分结束: method=%s, t=%.6g, 接受=%d, 拒绝=%d, rhs 次数=%d, 爆破=%s",
            self.spec.method.value, self.stats.final_time, self.stats.accepted_steps,
            self.stats.rejected_steps, self.stats.rhs_evaluations, self.stats.blow_up,
        )
        return Trajectory(times=times, states=states, stats=self.stats)


def integrate(rhs: RhsFunction, x0, spec: SolverSpec) -> Trajectory:
    """
    积分 ẋ = rhs(x)，从 t = 0 到 spec.t_end

    Raises:
        MaxStepsExceededError: 接受 + 拒绝步数超过 spec.max_steps
        StepUnderflowError: 自适应步长低于 1e−14·t_end
    """
    logger.info("开始积分: method=%s, t_end=%g", spec.method.value, spec.t_end)
    return _Integrator(rhs, x0, spec, observer=None).run()


def integrate_with_observer(
    rhs: RhsFunction, x0, spec: SolverSpec, observer: Observer
) -> tuple[Trajectory, list[Any]]:
    """
    同 integrate，并在每个采样时刻调用 observer(t, state)

    传给观察者的状态是只读的；观察者抛出的任何异常都包装成 ObserverError。
    返回的观察记录与轨迹采样点一一对应。
    """
    logger.info("开始积分（带观察者）: method=%s, t_end=%g", spec.method.value, spec.t_end)
    integrator = _Integrator(rhs, x0, spec, observer=observer)
    trajectory = integrator.run()
    return trajectory, integrator.observations
