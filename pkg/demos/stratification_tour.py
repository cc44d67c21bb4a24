"""Stratification tour: layered injectivity radii on the Grushin plane.

The determinant layers mu_j sort grid points by how degenerate the
horizontal distribution is; peeling the deepest stratum first and removing
a metric neighborhood around it yields per-stratum radii and a global
positive radius r_tilde0.
"""

import numpy as np

from ccbox import build_table, builtin_family, stratify

for name in ("heisenberg", "grushin", "martinet"):
    fam = builtin_family(name)
    table = build_table(fam)
    st = stratify(fam, table, grid=11)
    print(f"{name}: {len(st.points)} grid points, "
          f"stratify_c = {st.stratify_c:g}")
    for rec in st.strata:
        pts = st.points[rec["stratum_indices"]]
        print(f"  stratum k={rec['k']}: {len(pts)} points, "
              f"r_k = {rec['r_k']:.4g}")
        if len(pts) and fam.n == 2:
            print(f"    |x1| range on stratum: "
                  f"[{np.min(np.abs(pts[:, 0])):.3g}, "
                  f"{np.max(np.abs(pts[:, 0])):.3g}]")
    print(f"  r_tilde0 = {st.r_tilde0:.4g}\n")
