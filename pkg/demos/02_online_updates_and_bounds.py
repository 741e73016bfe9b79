"""
Online updates and their mistake bounds
=======================================

Streams labelled points through the two per-bit learners, watching the
hinge-driven steps close margins, then checks the recorded mistake
counters against the relative bounds for a few competitors.
"""

import numpy as np

from streamhash import (
    gen_synthetic_multilabel,
    mistake_bound,
    run_streaming_pipeline,
    update_code_projection,
)

# -- one update, up close ----------------------------------------------------

w = np.zeros(8)
code = np.array([1, -1, 1, 1, -1, -1, 1, -1], dtype=np.int8)
target = 1
print(f"before: margin {target * (w @ code):+.3f}")
w2, tau = update_code_projection(w, code, target, aggressiveness=1.0)
print(f"after:  margin {target * (w2 @ code):+.3f} (step size tau={tau:.4f})")
# With a generous aggressiveness cap the step lands exactly on margin 1.
# A small cap clips the same step:
w3, tau3 = update_code_projection(w, code, target, aggressiveness=0.05)
print(f"clipped: margin {target * (w3 @ code):+.3f} (tau={tau3:.4f})")

# -- a whole stream, with the ledger recording -------------------------------

ds = gen_synthetic_multilabel(2300, 32, 6, seed=1)
pipe = run_streaming_pipeline(
    ds.features, ds.labels, 6, nbits=16, seed=1, record_stream=True
)
ledger = pipe.state.ledger
print(f"\nstreamed {ledger.rounds} points at {ledger.nbits} bits")
print(f"code-side mistakes per bit:    min {ledger.code_mistakes.min()} "
      f"max {ledger.code_mistakes.max()}")
print(f"feature-side mistakes per bit: min {ledger.feature_mistakes.min()} "
      f"max {ledger.feature_mistakes.max()}")
print(f"largest feature norm seen: {ledger.r_max:.2f}")

# The bound holds for any fixed competitor. The zero vector gives the
# loosest sensible one; a least-squares fit of the recorded stream gives
# a much tighter one.
codes, targets = ledger.code_stream()
zero_bound = mistake_bound(ledger, np.zeros(16), "code")
lsq = np.linalg.lstsq(codes.astype(float), targets.astype(float), rcond=None)[0]
lsq_bound = np.array([mistake_bound(ledger, lsq[:, j], "code")[j] for j in range(16)])
print(f"\nbit 0: {ledger.code_mistakes[0]} mistakes"
      f" <= lsq bound {lsq_bound[0]:.0f} <= zero bound {zero_bound[0]:.0f}")
print(f"bound holds on every bit: {bool(np.all(ledger.code_mistakes <= lsq_bound))}")
