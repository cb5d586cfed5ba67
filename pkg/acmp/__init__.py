"""
ACMP — 图上 Allen-Cahn 消息传递粒子系统的数值模拟库

提供图结构、耦合系数、右端项、ODE 积分器与诊断工具，
把吸引/排斥力与双势阱作用下的节点特征演化变成可执行、可检验的实验。
"""

__version__ = "0.1.1"
