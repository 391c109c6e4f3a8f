"""The worm surface: a Levi-flat leaf whose holonomy blocks a good vector field.

Walks through the chain of computations that all see the same number 4 pi:
the period of alpha around the annulus leaf L(0), the germinal holonomy
measured by lifting the loop to nearby leaves, the monodromy of the leaf
label, the refusal of build_h, and the infeasibility certificate of the
discrete closed-form problem.
"""

import numpy as np

from levifold import ObstructionError, catalog
from levifold import currents as cu
from levifold.hfield import build_h
from levifold.holonomy import germinal_holonomy, loop_integral_alpha
from levifold.leaves import detect_spiral, leaf_loop_around, transversal_at
from levifold.surface import point


def main():
    worm = catalog("worm", {"R": 4.0})
    seed = point(0, 2)

    loop = leaf_loop_around(worm, seed, 1, ds=1e-2)
    period = loop_integral_alpha(worm, loop)
    print(f"L(0) loop: closure defect {loop.closure_defect:.1e}, period of alpha {period:.12f}")
    print(f"4 pi                                             {4 * np.pi:.12f}")

    # positive turns push neighbouring leaves out of |z| < 1, so lift along the reversed loop
    back = leaf_loop_around(worm, seed, -1, ds=1e-2)
    for off in (1e-3, 5e-4, 2.5e-4):
        r = germinal_holonomy(worm, back, off)
        print(f"lift offset {off:.1e}: log ratio {r.lift_log_ratio:+.9f}")

    sp = detect_spiral(worm, worm.chart.forward(1e-6, 2.0), max_turns=2, orientation=-1, ds=1e-2)
    print(f"leaf L(1e-6) under negative turns: {sp.kind}, rate {sp.rate:.4e} (e^-4pi = {np.exp(-4 * np.pi):.4e})")

    try:
        build_h(worm, worm.chart.forward([0.0], [3.0j]), transversal_at(worm, point(0, 2.5), 0.05))
    except ObstructionError as exc:
        print(f"build_h refused: period {exc.period:.9f}")

    mesh = cu.build_mesh(worm, (8, 16, 8))
    cert = cu.solve_closed_form(mesh)
    ok, res = cu.check_certificate(mesh, cert)
    print(f"mesh {len(mesh.points)} vertices, {len(mesh.seam_edges)} seam edges: "
          f"{type(cert).__name__}, verified {ok}, residual {res:.1e}, pairing {cert.pairing:.6f}")


if __name__ == "__main__":
    main()
