"""
Diamond distance and the continuity bound
==========================================

The interval quantifier moves by at most d^2 times the summed diamond
distances between two processes at the interval ends. The audit below draws
random qubit channel pairs and compares both sides, once with d^2 and once
with the weaker factor d.
"""
import numpy as np

from nonmarkov.channel import (ChannelTrajectory, dephasing_channel, depolarizing_channel, identity_channel,
                               random_channel, unitary_channel)
from nonmarkov.measure import choi_trace_distance, continuity_check, diamond_distance

print("identity vs full depolarizing:", diamond_distance(identity_channel(2), depolarizing_channel(2)))
print("identity vs Z rotation:       ", diamond_distance(identity_channel(2), unitary_channel(np.diag([1, -1]))))
print("identity vs phase flip p=0.3: ", diamond_distance(identity_channel(2), dephasing_channel(0.3)))

rng = np.random.default_rng(0)
a, b = random_channel(2, rng), random_channel(2, rng)
print("random pair, diamond", diamond_distance(a, b), " Choi-state trace distance", choi_trace_distance(a, b))

for factor in ("d2", "d"):
    ratios = []
    for _ in range(30):
        ta = ChannelTrajectory([1.0, 2.0], [random_channel(2, rng), random_channel(2, rng)])
        tb = ChannelTrajectory([1.0, 2.0], [random_channel(2, rng), random_channel(2, rng)])
        chk = continuity_check(ta, tb, 1.0, 2.0, factor=factor)
        ratios.append(chk.lhs / chk.rhs)
    print(f"factor {factor}: worst lhs/rhs = {max(ratios):.4f} over 30 pairs")
