"""Antipodal symmetry certificates on B^3 for an even and an odd perturbation."""
import argparse

import numpy as np

from tangent_tomography import Ball, PolynomialFamily, SphericalPolynomial
from tangent_tomography.flats import hyperplane_flats
from tangent_tomography.measures import FunctionalDescriptor
from tangent_tomography.recovery import recover_field, symmetry_check
from tangent_tomography.spheres import direction_grid


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--directions", type=int, default=32, help="directions per hemisphere set")
    args = parser.parse_args()

    ball = Ball(dim=3)
    grid = direction_grid(3, args.directions)
    dirs = np.vstack([grid, -grid])
    flats = hyperplane_flats(ball, dirs)
    cases = {"even h = 0.2 + 0.1 u1^2": SphericalPolynomial(0.2, ((0.1, (2, 0, 0)),)),
             "odd  h = 0.2 + 0.1 u1": SphericalPolynomial(0.2, ((0.1, (1, 0, 0)),))}
    for name, h in cases.items():
        report = recover_field(PolynomialFamily(ball, h), flats, "sections",
                               FunctionalDescriptor("intrinsic_volume", 2))
        cert = symmetry_check(report, -np.eye(3), ball)
        print(f"{name}: passed={cert.passed} even={cert.even} max defect={cert.max_defect:.3e}")
        if not cert.passed:
            u1 = np.abs(dirs[cert.pairs[:, 0], 0])
            big = u1 >= 0.1
            ratio = cert.defects[big] / (0.2 * u1[big])
            print(f"  defect / (0.2 |u1|) in [{ratio.min():.4f}, {ratio.max():.4f}]")


if __name__ == "__main__":
    main()
