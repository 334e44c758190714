from fractions import Fraction
from typing import Annotated, Any, Literal

import numpy as np
from annotated_types import Ge
from numpy.typing import NDArray
from pydantic import PlainSerializer, PlainValidator


def _to_array(value: Any) -> NDArray[np.float64]:
    return np.asarray(value, dtype=np.float64)


def _to_fraction(value: Any) -> Fraction:
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


FloatArray = Annotated[
    NDArray[np.float64],
    PlainValidator(_to_array),
    PlainSerializer(lambda array: array.tolist(), return_type=list),
]
ExactRational = Annotated[
    Fraction,
    PlainValidator(_to_fraction),
    PlainSerializer(str, return_type=str),
]

Variance = Literal["covariant", "contravariant"]
SymmetryKind = Literal["symmetric", "antisymmetric", "pair_interchange"]
Lemma21Variant = Literal["general", "lcf", "div_weyl_free"]
Convention = Literal["exponential", "scalar", "paneitz"]
CriticalClass = Literal["interior-min", "interior-other", "boundary"]
QuadratureRule = Literal["trapezoid", "gauss-legendre"]
MetricName = Literal[
    "euclidean",
    "sphere",
    "hyperbolic",
    "cylinder",
    "flat_torus",
    "product_spheres",
    "circle_times_sphere",
]
ImmersionName = Literal[
    "round_sphere_in_rn1",
    "clifford_in_sn1",
    "geodesic_sphere_in_hn1",
]

Count = Annotated[int, Ge(0)]
Scale = Annotated[float, Ge(0)]
