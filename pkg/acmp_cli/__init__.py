"""ACMP 命令行"""
