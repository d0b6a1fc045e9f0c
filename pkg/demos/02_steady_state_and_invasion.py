"""Single-species steady states and who can invade whom.

theta_d is the positive steady state of d*Lap(u) + u*(m - u) = 0. A rare
species with rate d' invades the resident theta_d exactly when the principal
eigenvalue of -d'*Lap - (m - theta_d) is negative.
"""

import numpy as np

from dispersal_lab import ModelParams, build_grid, solve_theta
from dispersal_lab.experiments import invasion_matrix

grid = build_grid(1.0, 401)
m = grid.field(1 + 0.5 * np.cos(np.pi * grid.nodes))

for d in (0.05, 0.2, 1.0, 5.0):
    theta = solve_theta(d, m)
    print(f"d={d:5.2f}: theta ranges over [{theta.min():.4f}, {theta.max():.4f}]")

# Large d flattens theta towards the mean of m; small d makes it track m.
ds = (0.2, 0.21, 0.4)
M = invasion_matrix(ModelParams(m, ds))
print("\ninvasion eigenvalues (row: invader, column: resident)")
for i, row in enumerate(M):
    print(f"  d={ds[i]:.2f}  " + "  ".join(f"{v:+.3e}" for v in row))

# Above the diagonal everything is negative: the slower species always gets in.
# Below it everything is positive: the faster one never does.
