"""Agent-based retrieval-augmented generation for deriving safety requirements."""

__version__ = "0.1.0"
