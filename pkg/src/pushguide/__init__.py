"""Pushing-guiding beam transfer of cold atoms between two magneto-optical traps."""

__version__ = "0.1.0"
