"""Complex tangencies of real 2-spheres and the count #e - #h = 2 - 2g."""

from levifold.tangency import (bishop_graph, bumped_sphere, classify_tangency, find_complex_tangencies,
                               gamma_sphere, index_check, tangency_winding_index, torus)


def show(gamma):
    pts = find_complex_tangencies(gamma)
    print(f"{gamma.name}: {len(pts)} tangencies, (e, h, genus, defect) = {index_check(gamma)}")
    for p in pts:
        r = classify_tangency(gamma, p)
        print(f"   at {p.round(4)}  lambda {r.lam:.4f}  {r.kind:10s}  winding {tangency_winding_index(gamma, p):+d}")


def main():
    for gamma in (gamma_sphere(), bumped_sphere(1.0), torus()):
        show(gamma)
    for lam in (0.0, 0.5, 2.0):
        show(bishop_graph(lam))


if __name__ == "__main__":
    main()
