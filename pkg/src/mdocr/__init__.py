"""Markdown-OCR evaluation and dataset toolkit."""

__version__ = "0.1.0"
