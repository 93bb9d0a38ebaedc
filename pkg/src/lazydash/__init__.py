"""Hierarchical hypergraph task and motion planning with lazy motion validation."""

__version__ = "0.1.0"
import logging as _logging
_logging.getLogger("lazydash").addHandler(_logging.NullHandler())
