"""Constructing X = e^h L_n on obstruction-free surfaces.

On sheared_flat the defining function is e^g Re z, alpha restricted to each
leaf is dg, and integrating -alpha from a transversal recovers h = -g.  Two
pieces built on overlapping label bands are glued with leafwise constant
cutoffs and the resulting field is checked at random points.  Near a
strictly pseudoconvex point the constant field L_n(P) is used instead.
"""

import numpy as np

from levifold import catalog
from levifold import currents as cu
from levifold.hfield import (build_h, elliptic_fallback, partition_of_unity, patch_h, seed_grid,
                             verify_field)
from levifold.leaves import transversal_at
from levifold.surface import point


def main():
    s = catalog("sheared_flat")
    base = transversal_at(s, point(0, 0), 0.9, ds=1e-2)
    labels = np.linspace(-0.85, 0.85, 17)
    g = np.arange(-1.6, 1.6 + 1e-9, 0.2)
    W = (g[:, None] + 1j * g[None, :]).ravel()

    lo = build_h(s, seed_grid(s, labels[labels <= 0.35], W), base, interp_radius=0.25)
    hi = build_h(s, seed_grid(s, labels[labels >= -0.35], W), base, interp_radius=0.25)
    print(f"stored samples: {len(lo)} + {len(hi)}")
    print(f"max |h + g| on the lower band: {np.max(np.abs(lo.h + lo.points[:, 1] * lo.points[:, 2])):.1e}")

    field = patch_h([lo, hi], partition_of_unity(-0.85, 0.85, 2))
    rep = verify_field(s, field, 1e-5, samples=1000)
    print("patched field:", rep.to_dict())

    mesh = cu.build_mesh(s, (8, 8, 8))
    omega = cu.solve_closed_form(mesh)
    print(f"discrete closed form found: {cu.check_cochain(mesh, omega)}")

    sphere = catalog("sphere")
    fb = elliptic_fallback(sphere, point(1, 0), 0.5, 0.1)
    print("sphere fallback:", fb.to_dict())


if __name__ == "__main__":
    main()
