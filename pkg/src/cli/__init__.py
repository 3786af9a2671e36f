from .commands import build_parser, cmd_compare, cmd_list, cmd_run, main

__all__ = ["build_parser", "cmd_compare", "cmd_list", "cmd_run", "main"]
