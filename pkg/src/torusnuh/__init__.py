"""Certified and Monte-Carlo checks of hyperbolicity for sheared torus endomorphisms."""

__version__ = "0.1.0"

from .certificate import Certificate, Verdict, merge
from .lattice import IntegerMatrix2
from .profile import ShearProfile, build_profile, two_point_profile
from .torus_map import MapSpec, family_map

__all__ = ["Certificate", "Verdict", "merge", "IntegerMatrix2", "ShearProfile", "build_profile",
           "two_point_profile", "MapSpec", "family_map", "__version__"]
