"""Smoke test for the periodlab_py extension.

Build and install it first, e.g.

    maturin develop -m crates/periodlab-py/Cargo.toml --features extension-module

or put the built cdylib on PYTHONPATH as periodlab_py.so.
"""

import json
import math

import periodlab_py as pl

ZETA2 = math.pi ** 2 / 6


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    close(pl.li([2], [0.5]), math.pi ** 2 / 12 - math.log(2) ** 2 / 2, 1e-10)
    close(pl.li_series([1, 1], [0.3, 0.5]), pl.li([1, 1], [0.3, 0.5]), 1e-10)
    close(pl.hyperlog([2]), math.log(0.5), 1e-12)

    m = json.loads(pl.punctured_line_periods(["1", "2"]))
    close(m["re"][0][1], math.log(2), 1e-10)
    close(m["im"][1][1], 2 * math.pi, 1e-10)

    disc = {"vars": ["x", "y"], "tree": {"leaf": {"poly": {"0,0": "1", "2,0": "-1", "0,2": "-1"}, "rel": ">="}},
            "box": [["-1", "1"], ["-1", "1"]]}
    area = {"vars": ["x", "y"], "num": {"0,0": "1"}, "den": {"0,0": "1"}}
    close(pl.naive_period(json.dumps(disc), json.dumps(area)), math.pi, 1e-8)

    lim = json.loads(pl.limit_mhs(-2, ["a1", "origin"]))
    re, im = lim["atoms"]["-ζ(2)"]
    close(complex(re, im), -ZETA2, 1e-4)

    close(pl.eisenstein(1, 1j, 3), 0, 1e-10)
    p, dp = pl.wp(1, 0.3 + 1.1j, 0.4 + 0.3j)
    g2 = 60 * pl.eisenstein(1, 0.3 + 1.1j, 2)
    g3 = 140 * pl.eisenstein(1, 0.3 + 1.1j, 3)
    close(dp * dp, 4 * p ** 3 - g2 * p - g3, 1e-8)
    close(pl.tau_invariant(1, 1j), 1j, 1e-15)

    try:
        pl.wp(1, 1j, 0)
    except ArithmeticError:
        pass
    else:
        raise AssertionError("wp at a lattice point must raise")
    try:
        pl.li([2], [0.5], tol=-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative tolerance must raise")
    print("periodlab_py smoke test: ok")


if __name__ == "__main__":
    main()
