"""Tail sums over lattices and the constant that bounds them.

For an r-uniformly discrete set and s > d/2, the tail
S(x, R) = sum over |x - gamma| >= R of (1 + |x - gamma|^2)^(-s)
is bounded by C(d, s, eps, r, R) * (1 + R)^(d - 2s), uniformly in x.
This script computes both sides on Z and Z^2 and fits the empirical
decay exponent.
"""

import numpy as np

from wannloc import (
    default_epsilon,
    lattice,
    lemma_constant,
    tail_exponent_fit,
    tail_sum,
    verify_lemma,
)


def main():
    print("= closed form =")
    line = lattice(1, 16000)
    full = tail_sum(line, np.zeros(1), 0.0, 1.0)
    closed = np.pi / np.tanh(np.pi)
    print(f"sum over Z of (1+k^2)^-1  = {full:.7f}")
    print(f"pi * coth(pi)             = {closed:.7f}   (gap {abs(full - closed):.1e})")

    print("\n= bound vs brute force on Z^2 =")
    plane = lattice(2, 60)
    rng = np.random.default_rng(0)
    print(f"{'s':>4} {'R':>4} {'tail':>12} {'bound':>12} {'slack':>8}")
    for s in (1.1, 1.5, 2.0):
        for R in (1.0, 4.0, 8.0):
            x = rng.uniform(-0.5, 0.5, size=2)
            chk = verify_lemma(plane, x, R, s)
            print(f"{s:>4} {R:>4} {chk.tail:>12.5f} {chk.bound:>12.5f} {chk.bound / chk.tail:>8.1f}x")

    print("\n= the constant is explicit =")
    r, R, s = 0.5, 4.0, 1.5
    eps = default_epsilon(r, R)
    print(f"C(d=2, s={s}, eps={eps}, r={r}, R={R}) = {lemma_constant(2, s, eps, r, R):.4f}")

    print("\n= empirical tail exponent =")
    for ds, s, cutoffs in (
        (line, 1.0, (16.0, 32.0, 64.0, 128.0)),
        (lattice(2, 700), 2.0, (8.0, 16.0, 32.0, 64.0)),
    ):
        fit = tail_exponent_fit(ds, np.zeros(ds.points.shape[1]), cutoffs, s)
        print(
            f"d={ds.points.shape[1]} s={s}: fitted slope {fit.slope:+.3f}, "
            f"predicted d-2s = {fit.target:+.1f}"
        )


if __name__ == "__main__":
    main()
