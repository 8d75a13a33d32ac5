"""Finite-perimeter sets in planar domains and their transfer across piecewise-affine maps."""
from .geom import CurveKind, GeometryError, Orientation, PolyCurve, PolyLine
from .domain import PlanarDomain
from .perimeter import JordanDecomposition, PerimeterSet, decompose, perimeter, recompose
from .pwamap import PwaMap, hole_correspondence, inverse, lip_constant
from .quasiconvex import Region, geodesic, quasiconvexity_constant
from .transfer import TransferLedger, transfer_extension

__all__ = [
    "CurveKind",
    "GeometryError",
    "JordanDecomposition",
    "Orientation",
    "PerimeterSet",
    "PlanarDomain",
    "PolyCurve",
    "PolyLine",
    "PwaMap",
    "Region",
    "TransferLedger",
    "decompose",
    "geodesic",
    "hole_correspondence",
    "inverse",
    "lip_constant",
    "perimeter",
    "quasiconvexity_constant",
    "recompose",
    "transfer_extension",
]
__version__ = "0.1.0"
