"""Jargon-aware simplification of short scientific texts with batched LLM prompts."""

__version__ = "0.1.0"
