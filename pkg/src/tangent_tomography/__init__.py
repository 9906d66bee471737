"""Recovering first-order perturbations of smooth convex bodies from small tangent sections and caps."""
from .asymptotics import (EpsilonGrid, LimitEstimate, MeasurementSeries, extract_limit,
                          invert_cap_intrinsic_limit, invert_cap_volume_limit, invert_section_limit,
                          sweep)
from .bodies import (Ball, BoundaryFrame, DupinForm, Ellipsoid, PolynomialFamily, SmoothStar,
                     SphericalPolynomial, StarBody, boundary_frame, dupin_hull, ground_truth_c,
                     radial_derivative_from_c)
from .errors import (ConfigError, DimensionMismatch, EpsilonTooLarge, NegativeSpeed,
                     NonConvexPoint, NotASymmetryOfK, PoorFit, UnsupportedCombination)
from .flats import AffineFlat, SubspacePencil, hyperplane_flats, tangent_flats
from .measures import (ConvexSample, EllipsoidSpec, FunctionalDescriptor, cap_body,
                       ellipsoid_intrinsic_volume, functional_value, intrinsic_volume,
                       paraboloid_cap_ratio, sandwich_check, section_body)
from .recovery import RecoveryReport, recover_field, santalo_first_order, symmetry_check

__version__ = "0.1.0"
