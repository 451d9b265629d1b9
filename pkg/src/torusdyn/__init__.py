"""Robustly transitive singular torus endomorphisms: construction, probes,
and certified verification.

The package builds a three-stage family on the n-torus [-1, 1)^n:

  * a linear factor expanding the first m coordinates,
  * a blended slice map routing the expanding block through a finite family
    of fiber maps (an iterated function system on the remaining k circles),
  * a localized correction supported in a small metric ball that creates a
    persistent set of critical points while preserving a dominated
    cone/expansion structure outside controlled regions.

Subpackages split along that pipeline: `torus` (quotient geometry),
`profiles` (scalar building blocks), `ifs` (fiber families), `endo` (the
three maps and parameter validation), `tangent` (cones and expansion),
`singular` (critical set), `probes` (orbit statistics and transitivity
experiments), `rigor` (interval certificates), `config`/`cli` (front ends).
"""

from .endo import Params, System, build_system, default_params
from .torus import Box, TorusPoint, dist, reduce

__all__ = [
    "Box",
    "Params",
    "System",
    "TorusPoint",
    "build_system",
    "default_params",
    "dist",
    "reduce",
]

__version__ = "0.1.0"
