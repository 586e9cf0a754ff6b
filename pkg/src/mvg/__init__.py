"""Multiview differential geometry of curves.

Projects space-curve differential geometry (tangent, curvature, curvature
derivative, torsion) into images, reconstructs it from two views, and
relates image curve motion to differential camera motion, with a synthetic
validation dataset and CLI (`mvg generate|verify|flow|plot`).
"""

from . import core, dataset, errors, motion, projection, reconstruction
from .core import (
    EPS,
    CameraPose,
    Eps,
    Frenet2,
    Frenet3,
    ImagePoint,
    frenet2_from_derivatives,
    frenet3_from_derivatives,
    project,
    world_to_camera,
)
from .motion import CameraMotion, CurveMotionState
from .projection import ImageCurveSample, SpaceCurveSample
from .reconstruction import ReconstructedPoint, ViewMeasurement

__all__ = [
    "EPS",
    "Eps",
    "CameraPose",
    "CameraMotion",
    "CurveMotionState",
    "Frenet2",
    "Frenet3",
    "ImagePoint",
    "ImageCurveSample",
    "SpaceCurveSample",
    "ViewMeasurement",
    "ReconstructedPoint",
    "core",
    "dataset",
    "errors",
    "motion",
    "projection",
    "reconstruction",
    "frenet2_from_derivatives",
    "frenet3_from_derivatives",
    "project",
    "world_to_camera",
]

__version__ = "0.1.0"
