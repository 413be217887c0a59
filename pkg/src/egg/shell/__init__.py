"""The egg shell language."""
from .env import BUILTIN_COMMANDS, ShellEnv, format_display
from .parser import ParseError, delta_compile, pi_compile

__all__ = ["BUILTIN_COMMANDS", "ParseError", "ShellEnv", "delta_compile", "format_display", "pi_compile"]
