"""A tour of the eight prediction rules on a single probability vector.

Every rule maps class probabilities to a *set* of candidate labels.  Run
this script to see how each formulation trades the size of that set
against the chance of missing the true class.
"""

import numpy as np

from predsets import (
    predict_fscore,
    predict_hybrid_error,
    predict_hybrid_size,
    predict_penalized,
    predict_pointwise_error,
    predict_top_k,
    predict_with_threshold,
)

p = np.array([0.42, 0.23, 0.15, 0.11, 0.06, 0.03])

print("conditional probabilities:", p, "\n")

print("fixed-size rules")
for k in (1, 2, 3):
    labels = predict_top_k(p, k)
    print(f"  top-{k}:                 {labels.tolist()}")

print("\nadaptive size from a point-wise error budget")
for eps in (0.5, 0.2, 0.05):
    labels = predict_pointwise_error(p, eps, 0.0)
    mass = p[labels - 1].sum()
    print(
        f"  eps={eps:<5} -> {labels.tolist()} "
        f"(covered mass {mass:.2f} >= {1 - eps:.2f})"
    )

print("\nthresholding rules (penalized / calibrated cutoffs)")
for theta in (0.05, 0.12, 0.3):
    print(f"  cutoff {theta:<5} -> {predict_penalized(p, theta).tolist()}")
assert predict_with_threshold(p, 0.12).tolist() == predict_penalized(p, 0.12).tolist()

print("\nhybrids combine a cutoff with a hard cap or a coverage floor")
print("  cutoff 0.1 capped at k=2: ", predict_hybrid_size(p, 0.1, 2).tolist())
print(
    "  cutoff 0.3, eps=0.2, threshold reading:",
    predict_hybrid_error(p, 0.3, 0.2, "lemma-threshold").tolist(),
)
print(
    "  cutoff 0.3, eps=0.2, union reading:    ",
    predict_hybrid_error(p, 0.3, 0.2, "union-with-pointwise").tolist(),
)

print("\nF-score rule thresholds at the fitted root (see demo 02)")
print("  theta*=0.18 ->", predict_fscore(p, 0.18).tolist())
