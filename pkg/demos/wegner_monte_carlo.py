"""Monte Carlo eigenvalue counting across box sizes.

Three experiments on growing boxes.  First a wide window whose edges sit
in spectral gaps common to all sizes, so each box contributes exactly
one eigenvalue per unit volume with zero variance: volume scaling
without statistics.  Second the cumulative counting function per unit
volume, which agrees across sizes up to boundary corrections of order
1/L.  Third a narrow window, showing why tiny windows at this scale
track level positions rather than volume.
"""

from breather_lab.breather_field import MeasureSpec
from breather_lab.grid_operator import GridSpec
from breather_lab.wegner_mc import WegnerParams, ids_estimate, wegner_expectation

MEASURE = MeasureSpec(0.1, 0.4)


def run_cell(L, E, eps, n_samples):
    params = WegnerParams(
        b=20.0, E=E, epsilon=eps, measure=MEASURE, shape="ball",
        grid=GridSpec(d=1, L=L, n_h=16), n_samples=n_samples, master_seed=1,
    )
    return wegner_expectation(params, threads=4)


def main():
    print("wide window [0.2, 12.0], edges inside common spectral gaps:")
    print(f"{'L':>3} {'mean count':>11} {'mean / L':>9} {'stderr':>8}")
    for L in (3, 5, 7):
        rep = run_cell(L, 6.1, 5.9, 40)
        print(f"{L:>3} {rep.mean:>11.4f} {rep.mean / L:>9.4f} "
              f"{rep.stderr:>8.1e}")

    print("\ncumulative counting function per unit volume, 30 samples:")
    energies = [2.0, 6.0, 12.0, 20.0, 30.0, 45.0]
    table = ids_estimate([5, 7, 9], energies, MEASURE, "ball", 16, 30, 1)
    print(f"{'E':>5} " + " ".join(f"{'L = ' + str(L):>16}" for L in (5, 7, 9)))
    for e in energies:
        cols = []
        for p in table:
            if p.E == e:
                cols.append(f"{p.mean:8.4f} +-{p.stderr:6.4f}")
        print(f"{e:>5.0f} " + " ".join(cols))
    print("columns agree to O(1/L); at E = 12 the window edge falls in a")
    print("gap shared by all sizes and the agreement is exact")

    print("\nnarrow window [3.8, 4.2], 500 samples:")
    for L in (3, 5, 7):
        rep = run_cell(L, 4.0, 0.2, 500)
        print(f"  L = {L}: mean / L = {rep.mean / L:.4f} "
              f"+- {rep.stderr / L:.4f}")
    print("at this box size the levels are nearly rigid, so a narrow window")
    print("sees whichever level happens to sit inside it; per-volume counts")
    print("only equalize once windows span many level spacings")


if __name__ == "__main__":
    main()
