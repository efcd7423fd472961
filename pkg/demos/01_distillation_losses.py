"""Distillation losses on toy tensors.

Run: python3 demos/01_distillation_losses.py
"""

import numpy as np

from mfkd.kd import KdConfig, kd_loss, mmd2, mmd2_subset, nst_loss, softmax_temp

rng = np.random.default_rng(0)

# A higher temperature flattens the teacher's output distribution.
teacher = np.array([[4.0, 1.0, 0.5, -2.0]])
for tau in (1.0, 4.0, 32.0):
    print(f"softmax at tau={tau:>4}: {np.round(softmax_temp(teacher, tau), 3)}")

# The classic loss mixes the label term and the softened teacher term.
student = rng.normal(size=(8, 4))
teachers = student + rng.normal(scale=0.5, size=(8, 4))
labels = rng.integers(0, 4, size=8)
for lam in (0.0, 0.5, 1.0):
    print(f"kd_loss lambda={lam}: {kd_loss(student, teachers, labels, KdConfig(tau=4.0, lam=lam)):.4f}")

# NST compares the channel distributions of feature maps. Rows are
# normalized, so rescaling a channel does not move the discrepancy.
ft = rng.normal(size=(16, 49))
fs_close = ft + rng.normal(scale=0.1, size=ft.shape)
fs_far = rng.normal(size=(16, 49))
print(f"mmd2 similar maps:   {mmd2(ft, fs_close):.5f}")
print(f"mmd2 unrelated maps: {mmd2(ft, fs_far):.5f}")
print(f"mmd2 after rescaling channels: {mmd2(ft * rng.uniform(0.1, 10, (16, 1)), fs_close):.5f}")

# A random half of the channels gives a cheaper estimate of the same quantity.
sub_t = rng.choice(16, 8, replace=False)
sub_s = rng.choice(16, 8, replace=False)
print(f"mmd2 on 8 of 16 channels: {mmd2_subset(ft, fs_far, sub_t, sub_s):.5f}")

print(f"nst_loss: {nst_loss(student[:1], labels[:1], [ft], [fs_far]):.4f}")
