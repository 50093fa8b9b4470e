"""Polygonal-mesh PDE workbench: mesh families, FEM/BFEM/VEM discretisations,
solvers and an efficiency benchmark harness."""

from polypde.mesh import Mesh2D, Provenance, QualityStats, polygon_area, polygon_centroid, quality_stats, validate
from polypde.domains import DOMAIN_IDS, Domain, classify_boundary, make_domain

__version__ = "0.1.0"

__all__ = [
    "DOMAIN_IDS",
    "Domain",
    "Mesh2D",
    "Provenance",
    "QualityStats",
    "classify_boundary",
    "make_domain",
    "polygon_area",
    "polygon_centroid",
    "quality_stats",
    "validate",
]
