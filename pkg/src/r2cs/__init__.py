"""Rank-two commutative semifields via F_q-linear sets in the internal points of a conic."""

from __future__ import annotations

__version__ = "0.1.0"

from .field import FieldTower, make_tower  # noqa: E402
from .conic import ConicFrame, GroupElement  # noqa: E402

__all__ = ["FieldTower", "make_tower", "ConicFrame", "GroupElement", "__version__"]
