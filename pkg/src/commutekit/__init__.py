"""Interpreter and analysis toolkit for a small imperative language with ``commute`` blocks."""

__version__ = "0.1.0"
