"""Package marker for workbench services."""

__all__ = []
