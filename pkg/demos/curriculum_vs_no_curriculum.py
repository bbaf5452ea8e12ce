"""
Curriculum training of the attention localizer
==============================================

The attention model is trained twice on the same building: once through the
ten-lesson FGSM curriculum, once on clean scans only (the "NC" ablation) for
the same number of epochs. Both are then scored on clean test scans from six
phones and under a PGD attack on half of the APs.

Each training run takes well under a minute.
"""

import numpy as np

from calloc.attacks import AttackConfig, craft, select_target_aps
from calloc.curriculum import TrainerConfig, train_full
from calloc.data import building_config, generate_synthetic_building
from calloc.evaluation import localization_error

ds = generate_synthetic_building(building_config(3))
x = ds.test.normalized().astype(np.float32)
y = ds.labels(ds.test.rp_ids)
mask = select_target_aps(ds, 50, seed=0)
attack = AttackConfig(kind="pgd", epsilon=0.3, phi_percent=50)


def mean_error(model, inputs):
    return localization_error(ds.rp_ids[model.predict(inputs)], ds.test.rp_ids, ds).mean()


for curriculum in (True, False):
    model, log = train_full(ds, TrainerConfig(seed=0, curriculum=curriculum))
    label = "curriculum" if curriculum else "NC"
    reverts = log.records[-1]["reverts"]
    print(f"\n{label}: {len(log.records)} epochs over lessons {log.lessons()}, {reverts} reverts")
    print(f"  clean {mean_error(model, x):.2f} m, PGD(0.3, 50%) {mean_error(model, craft(model, x, y, attack, mask)):.2f} m")

    ###########################################################################
    # Clean error per phone. Training used only the OP3 scans.
    for device in ds.devices:
        sel = ds.test.devices == device
        err = localization_error(ds.rp_ids[model.predict(x[sel])], ds.test.rp_ids[sel], ds).mean()
        print(f"  {device:5s} {err:.2f} m")
