"""
Checking gradients against finite differences
=============================================

Every gradient in the package comes from a small reverse-mode tape. Here we
compare it with central differences on the full training loss of a freshly
initialized attention model (165 APs, 61 reference points), including the
input gradient that the attacks follow.
"""

from calloc.model import model_grad_check, reference_model

model = reference_model(seed=0)
print(model.param_count())

report = model_grad_check(model, n_samples=200)
print(f"max relative error {report.max_rel_error:.2e} over {report.n_checked} coordinates")
for name, err in sorted(report.per_tensor.items()):
    print(f"  {name:22s} {err:.2e}")
