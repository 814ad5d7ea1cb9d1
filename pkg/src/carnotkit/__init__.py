"""Exact computations on Carnot manifolds: graded nilpotent groups, Carnot coordinates,
Carnot differentials and the tangent groupoid."""

from .weights import WeightSequence, dilate, weighted_degree
from .wpoly import WPoly, WPolyMap, WPolyVectorField
from .nilgroup import GradedNilpotentAlgebra, NilpotentGroup, dynkin_product, validate_algebra
from .carnot_structure import HFrame, bracket_coefficients, tangent_algebra_at, validate_filtration
from .coords import CoordinateChange, eps_carnot, exp_coordinates, is_carnot, is_privileged
from .carnot_map import CarnotMapJet, carnot_differential, frame_decompose, pansu_numeric
from .groupoid import GroupoidChart, Pair, TangentElem, TangentGroupoid

__version__ = "0.1.0"
