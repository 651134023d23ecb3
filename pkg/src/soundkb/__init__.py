"""soundkb: mine sound concepts from text and relate them to acoustic scenes."""

__version__ = "0.1.0"
