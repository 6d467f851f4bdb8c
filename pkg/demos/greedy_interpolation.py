"""
Greedy H-infinity interpolation
===============================

Each step interpolates the transfer function where the current error is
largest, then measures the new error. With symmetric matrices and a
one-sided real basis every intermediate model is stable.
"""

import numpy as np

from somor.hinf_greedy import InterpolationData, greedy_reduce, refine_interpolation
from somor.models import gen_triple_chain

# position outputs make the system symmetric: C_p = B^T, C_v = 0
sos = gen_triple_chain(g=20)
sos = sos.copy(Cp=sos.B.T.copy(), Cv=np.zeros_like(sos.Cv))

rom, data, trace = greedy_reduce(sos, 1e-4, r_max=40)
for rec in trace.records:
    print('iter %2d  omega %.4e  error %.3e  order %d' % (rec['iter'], rec['omega'], rec['error'],
                                                        rec['order']))

# moving the first three points lowers the error of the order-6 model a little
start = InterpolationData(data.points[:3])
better = refine_interpolation(sos, start, budget=60)
print('three points: error %.6e -> %.6e' % (better.meta['error_in'], better.meta['error_out']))
