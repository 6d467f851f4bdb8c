"""
Frequency-limited balancing with eight Gramian formulas
=======================================================

The Gramians of the companion form are restricted to a frequency band and
split into position and velocity blocks. The eight formulas pair these
blocks differently on the left and on the right, and they differ in
whether the reduced second-order model is stable.
"""

import numpy as np

from somor.limited_bt import Limit, limited_bt_all
from somor.models import gen_triple_chain
from somor.systems import error_sweep, sigma_sweep

# g=100 gives n=301; the full experiment uses g=400 (n=1201)
sos = gen_triple_chain(g=100)
band = Limit('frequency', 5e-3, 5e-2)
results = limited_bt_all(sos, band, r=10)

w = np.logspace(np.log10(band.lo), np.log10(band.hi), 200)
full = sigma_sweep(sos, w)
print('formula  stable  max rel err in band')
for name, (rom, _) in results.items():
    _, rel = error_sweep(full, sigma_sweep(rom, w), w)
    print('%-8s %-7s %.3e' % (name, rom.meta['stable'], rel.values.max()))
