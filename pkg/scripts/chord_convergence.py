"""Print the chord-length sweep g(eps) / eps^(1/2) for the unit disc with rho^t = 1 + c t."""
import argparse

import numpy as np

from tangent_tomography import Ball, PolynomialFamily, SphericalPolynomial
from tangent_tomography.asymptotics import EpsilonGrid, extract_limit, invert_section_limit, sweep
from tangent_tomography.flats import hyperplane_flats
from tangent_tomography.measures import FunctionalDescriptor


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--c", type=float, default=0.5, help="constant normal speed")
    parser.add_argument("--angle", type=float, default=0.3, help="tangency direction (radians)")
    parser.add_argument("--count", type=int, default=9, help="number of grid points")
    args = parser.parse_args()

    ball = Ball(dim=2)
    family = PolynomialFamily(ball, SphericalPolynomial(args.c))
    u = np.array([[np.cos(args.angle), np.sin(args.angle)]])
    flat = hyperplane_flats(ball, u)[0]
    series = sweep(family, flat, FunctionalDescriptor("intrinsic_volume", 1),
                   EpsilonGrid(count=args.count))
    exact = 2 * np.sqrt(2 * args.c * series.epsilons + args.c ** 2 * series.epsilons ** 2)
    print(f"{'epsilon':>12} {'chord':>14} {'exact':>14} {'chord/sqrt(eps)':>16}")
    for e, g, x, y in zip(series.epsilons, series.values, exact, series.scaled):
        print(f"{e:12.3e} {g:14.10f} {x:14.10f} {y:16.10f}")
    est = extract_limit(series)
    c_hat = invert_section_limit(est, 2 * np.sqrt(2), 1)
    print(f"limit L = {est.limit:.6f} (exact {2 * np.sqrt(2 * args.c):.6f}), c_hat = {c_hat:.6f}")


if __name__ == "__main__":
    main()
