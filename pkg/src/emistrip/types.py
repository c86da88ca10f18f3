"""Core detection domain types shared by the data and metrics layers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ParameterError


class ClassId(enum.Enum):
    """Closed set of target object classes."""

    PERSON = "person"
    CAR = "car"
    TRUCK = "truck"
    BUS = "bus"


CLASSES = tuple(ClassId)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box, top-left origin, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise ParameterError(f"box coordinates must be finite: {self}")
        if self.w <= 0 or self.h <= 0:
            raise ParameterError(f"box sides must be positive: {self}")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class GroundTruthObject:
    id: str
    box: BoundingBox
    class_id: ClassId


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    class_id: ClassId
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ParameterError(f"confidence must be in [0, 1], got {self.confidence}")
