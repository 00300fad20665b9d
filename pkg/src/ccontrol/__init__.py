"""Compile coroutining control out of pure logic programs.

The toolchain abstractly interprets a program under an instantiation-based
selection rule, extracts a finite state graph of the resulting control
flow, and synthesizes an equivalent program that runs left-to-right --
either directly from the graph or by specializing a meta-interpreter.
"""

__version__ = "0.1.0"
