"""
Fixed hash stage: fit, encode, pack, compare
============================================

Fits the data-dependent hash on a small warm-start sample, then looks at
what it produced: the rotation-fit error trace, sign codes, their packed
64-bit words, and Hamming distances between neighbours and strangers.
"""

import numpy as np

from streamhash import (
    encode,
    encode_batch,
    fit_pca_itq,
    gen_synthetic_multilabel,
    hamming,
    pack_code,
)

# A small clustered dataset: 4 classes in 16 dimensions.
ds = gen_synthetic_multilabel(400, 16, 4, seed=0)
print(f"dataset: {ds.features.shape[0]} points, dim {ds.features.shape[1]}")

# Fit the hash stage on the first 300 points (the warm start a stream
# would use). 8 bits, 50 rotation-refinement iterations.
model = fit_pca_itq(ds.features[:300], nbits=8, iters=50, seed=0)
print(f"error trace: starts {model.itq_errors[0]:.4f}, ends {model.itq_errors[-1]:.4f}")
print(f"trace is monotone: {bool(np.all(np.diff(model.itq_errors) <= 1e-9))}")
print(f"rotation orthogonality deviation: {model.itq_orth_devs.max():.2e}")

# Encode one point and the whole remainder.
h = encode(model, ds.features[300])
print(f"\nfirst streamed point encodes to {h}")
codes = encode_batch(model, ds.features[300:])
print(f"encoded remainder: {codes.shape[0]} codes of {codes.shape[1]} bits")

# Codes pack 64 bits per word; 8 bits fit in one word.
packed = pack_code(h)
print(f"packed words: {[hex(int(w)) for w in packed.words]}")

# Points sharing a label tend to collide; disjoint labels tend not to.
labels = ds.labels[300:]
same, diff = [], []
for i in range(len(codes)):
    for j in range(i + 1, len(codes)):
        d = hamming(pack_code(codes[i]), pack_code(codes[j]))
        (same if labels[i] & labels[j] else diff).append(d)
print(f"\nmean Hamming distance, shared label:   {np.mean(same):.2f}")
print(f"mean Hamming distance, disjoint labels: {np.mean(diff):.2f}")
