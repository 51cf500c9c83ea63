#!/usr/bin/env python3
"""Regenerate tests/fixtures/special_reference.json.

High-precision reference values (50-digit mpmath) for the scalar special
functions implemented in src/special.rs: log-gamma, regularized incomplete
gamma, erf/erfc, chi-square and normal tails, and log modified Bessel I.
"""

import json
import pathlib

import mpmath as mp

mp.mp.dps = 50

OUT = pathlib.Path(__file__).resolve().parent.parent / "crates" / "survanchor" / "tests" / "fixtures" / "special_reference.json"


def f(x):
    return float(x)


def main():
    fixtures = []

    for x in [0.1, 0.5, 1.0, 1.5, 2.0, 3.7, 10.0, 25.5, 100.0, 171.5, 500.0]:
        fixtures.append({"fn": "ln_gamma", "args": [x], "value": f(mp.loggamma(x))})

    gamma_grid = [
        (0.5, 0.1), (0.5, 1.0), (0.5, 4.0), (1.0, 0.5), (1.0, 2.0),
        (2.5, 0.3), (2.5, 2.5), (2.5, 9.0), (5.0, 1.0), (5.0, 5.0),
        (5.0, 20.0), (17.5, 10.0), (17.5, 17.5), (17.5, 40.0),
        (50.0, 35.0), (50.0, 50.0), (50.0, 80.0), (0.05, 0.01), (0.05, 2.0),
        (200.0, 180.0), (200.0, 240.0),
    ]
    for a, x in gamma_grid:
        p = mp.gammainc(a, 0, x, regularized=True)
        fixtures.append({"fn": "reg_gamma_p", "args": [a, x], "value": f(p)})
        fixtures.append({"fn": "reg_gamma_q", "args": [a, x], "value": f(1 - p)})

    for x in [0.0, 0.01, 0.1, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, -0.5, -2.0]:
        fixtures.append({"fn": "erf", "args": [x], "value": f(mp.erf(x))})
        fixtures.append({"fn": "erfc", "args": [x], "value": f(mp.erfc(x))})

    chi_grid = [
        (0.5, 1.0), (3.84, 1.0), (6.63, 1.0), (40.0, 1.0),
        (1.0, 2.0), (5.99, 2.0), (14.067, 7.0), (3.857, 1.0),
        (20.0, 12.0), (110.0, 100.0), (2.0, 5.0), (75.0, 3.0),
    ]
    for x, k in chi_grid:
        q = mp.gammainc(mp.mpf(k) / 2, mp.mpf(x) / 2, mp.inf, regularized=True)
        fixtures.append({"fn": "chi_square_sf", "args": [x, k], "value": f(q)})

    for z in [-4.0, -1.959963984540054, -1.0, 0.0, 0.5, 1.0, 1.644853626951472, 2.575829303548901, 4.0, 8.0]:
        sf = mp.ncdf(-mp.mpf(z))
        fixtures.append({"fn": "normal_sf", "args": [z], "value": f(sf)})

    bessel_grid = []
    for nu in [0.0, 0.5, 1.0, 1.5, 2.5, 4.0, 9.0, 11.5, 24.0]:
        for x in [1e-6, 0.01, 0.5, 1.0, 5.0, 20.0, 100.0, 450.0, 499.0, 501.0, 750.0, 1000.0, 1e4]:
            bessel_grid.append((nu, x))
    for nu, x in bessel_grid:
        v = mp.log(mp.besseli(nu, x))
        fixtures.append({"fn": "log_bessel_i", "args": [nu, x], "value": f(v)})

    OUT.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT, "w") as fh:
        json.dump(fixtures, fh, indent=1)
        fh.write("\n")
    print(f"wrote {len(fixtures)} fixtures to {OUT}")


if __name__ == "__main__":
    main()
