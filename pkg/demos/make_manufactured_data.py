"""Regenerate the shipped manufactured-solution data files.

The target field is u*(x, y) = sin(pi x) sin(pi y) on the unit square with
32 cells per axis; the forcing h is computed with the same stencils the
solver uses, so u* is an exact discrete solution and a solve against this
data must recover it to solver tolerance.
"""

from pathlib import Path

import numpy as np

from gqc import GridFunction, GridSpec, ProblemData, build_operators, parse_coefficient
from gqc.oracle import manufactured_h
from gqc.problem import save_values_file

HERE = Path(__file__).parent
DATA = HERE / "configs" / "data"


def main() -> None:
    spec = GridSpec(2, ((0.0, 1.0), (0.0, 1.0)), (32, 32))
    ops = build_operators(spec)
    pts = spec.interior_points()
    u_star = GridFunction(spec, np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1]))
    problem = ProblemData(
        spec=spec,
        c=parse_coefficient("1", spec),
        mu=parse_coefficient("1", spec),
        h=parse_coefficient("0", spec),
        lam=-1.0,
    )
    h = manufactured_h(u_star, problem, ops)
    DATA.mkdir(parents=True, exist_ok=True)
    save_values_file(DATA / "h_manufactured_d2_n32.txt", h.values)
    save_values_file(DATA / "u_star_d2_n32.txt", u_star.values)
    print(f"wrote {DATA / 'h_manufactured_d2_n32.txt'}")
    print(f"wrote {DATA / 'u_star_d2_n32.txt'}")


if __name__ == "__main__":
    main()
