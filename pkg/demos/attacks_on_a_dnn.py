"""
Attacking an undefended localizer
=================================

A plain dense network is trained on a synthetic building the size of the
third surveyed site (78 APs, an 88 m path). We then perturb the test scans
with FGSM, PGD and MIM and watch the localization error grow with the
budget and with the share of attacked APs.
"""

import numpy as np

from calloc.baselines import DNNTrainConfig, train_dnn
from calloc.data import building_config, generate_synthetic_building
from calloc.evaluation import EvalGrid, run_grid

ds = generate_synthetic_building(building_config(3))
print(f"{ds.name}: {ds.n_aps} APs, {ds.n_rps} RPs, {len(ds.train)} train and {len(ds.test)} test scans")

x = ds.train.normalized().astype(np.float32)
dnn = train_dnn(x, ds.labels(ds.train.rp_ids), ds.n_rps, DNNTrainConfig(epochs=100))

###############################################################################
# One grid cell per (attack, epsilon, share of APs). Epsilon is in normalized
# units, so 0.1 moves a reading by up to 10 dBm.

grid = EvalGrid(epsilons=(0.1, 0.3, 0.5), phis=(10, 50, 100), attacks=("fgsm", "pgd", "mim"))
reports = run_grid(dnn, ds, grid)
print(f"clean mean error: {reports[0].clean_mean_m:.2f} m")
for kind in grid.attacks:
    print(f"\n{kind}: mean error (m), rows eps, columns % of APs attacked")
    print("eps   " + "".join(f"{p:>8g}" for p in grid.phis))
    for eps in grid.epsilons:
        row = [r.mean_m for r in reports if r.attack == kind and r.eps == eps]
        print(f"{eps:<5g} " + "".join(f"{v:8.2f}" for v in row))
