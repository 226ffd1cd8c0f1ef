"""Core domain types and the two primitive set constructors.

Every prediction rule in this library is built from two operations on a
vector of conditional class probabilities ``p``:

* ``top_indices(p, k)`` -- the ``k`` labels with largest probability, and
* ``threshold_set(p, theta)`` -- all labels with probability ``>= theta``.

Labels are 1-based integers in ``{1, ..., L}``; label sets are returned as
ascending ``numpy`` integer arrays.  All functions here are pure: they never
mutate their inputs and identical inputs give bitwise-identical outputs, so
they are safe to call from any number of workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ClassCountMismatch,
    KOutOfRange,
    MissingLabels,
    NegativeEntry,
    SumOutOfTolerance,
    TooFewClasses,
)

DEFAULT_SUM_TOL = 1e-6

#: The single supported tie-breaking mode.  Ties between equal probabilities
#: are resolved toward the smaller label index, which makes every rule
#: deterministic even on score files that contain exact ties.
TIE_ASCENDING = "ascending-label-index"


@dataclass(frozen=True)
class TieBreakPolicy:
    """How equal probabilities are ordered.  Only one mode exists; it is
    recorded explicitly so that serialized classifiers are self-describing."""

    mode: str = TIE_ASCENDING

    def __post_init__(self):
        if self.mode != TIE_ASCENDING:
            raise ValueError(f"unsupported tie-break mode: {self.mode!r}")


def validate_probability_vector(
    raw, tol: float = DEFAULT_SUM_TOL
) -> np.ndarray:
    """Validate one sample's class-probability vector.

    Parameters
    ----------
    raw : array_like of shape (L,)
        Candidate probabilities.
    tol : float
        Absolute tolerance on ``|sum - 1|``.

    Returns
    -------
    np.ndarray
        Read-only float64 copy of ``raw``.  Entries are never renormalized:
        a vector that fails the checks raises instead of being silently
        repaired, because silent repair hides upstream calibration bugs.

    Raises
    ------
    TooFewClasses
        If fewer than two entries.
    NegativeEntry
        If any entry is below zero.
    SumOutOfTolerance
        If the entries do not sum to one within ``tol``.
    """
    p = np.array(raw, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise TooFewClasses(f"need at least 2 classes, got shape {p.shape}")
    if np.any(p < 0.0):
        bad = int(np.argmax(p < 0.0))
        raise NegativeEntry(f"entry {bad} is {p[bad]!r} < 0")
    s = float(p.sum())
    if abs(s - 1.0) > tol:
        raise SumOutOfTolerance(s, tol)
    p.flags.writeable = False
    return p


def descending_order(p: np.ndarray) -> np.ndarray:
    """Indices (0-based) of ``p`` sorted by decreasing value.

    Equal values keep ascending index order (stable sort), which is exactly
    the ascending-label-index tie policy.
    """
    return np.argsort(-np.asarray(p, dtype=np.float64), kind="stable")


def top_indices(
    p: np.ndarray, k: int, tie: TieBreakPolicy | None = None
) -> np.ndarray:
    """The ``k`` labels with largest probability.

    Among equal probabilities the smaller label index wins.  Returns a
    read-only ascending array of exactly ``k`` labels in ``{1, ..., L}``.
    """
    if tie is not None and tie.mode != TIE_ASCENDING:  # pragma: no cover
        raise ValueError(f"unsupported tie-break mode: {tie.mode!r}")
    p = np.asarray(p, dtype=np.float64)
    L = p.size
    if not (isinstance(k, (int, np.integer)) and 0 <= k <= L):
        raise KOutOfRange(f"k={k!r} outside [0, {L}]")
    labels = np.sort(descending_order(p)[: int(k)]) + 1
    labels.flags.writeable = False
    return labels


def threshold_set(p: np.ndarray, theta: float) -> np.ndarray:
    """All labels whose probability is ``>= theta`` (non-strict).

    ``theta = 0`` includes every label; any ``theta`` above the largest
    entry yields the empty set, which is a legal prediction.
    """
    p = np.asarray(p, dtype=np.float64)
    labels = np.flatnonzero(p >= float(theta)) + 1
    labels.flags.writeable = False
    return labels


# --- vectorized counterparts ----------------------------------------------
#
# Batch rules operate on an (n, L) matrix and return an (n, L) boolean
# membership mask: mask[i, ell-1] says whether label ell is predicted for
# row i.  They implement the same tie policy as the single-vector functions.


def topk_mask(P: np.ndarray, k: int) -> np.ndarray:
    """Boolean membership mask of the top-``k`` rule over rows of ``P``."""
    P = np.asarray(P, dtype=np.float64)
    n, L = P.shape
    if not 0 <= k <= L:
        raise KOutOfRange(f"k={k!r} outside [0, {L}]")
    order = np.argsort(-P, axis=1, kind="stable")
    mask = np.zeros((n, L), dtype=bool)
    if k > 0:
        rows = np.arange(n)[:, None]
        mask[rows, order[:, :k]] = True
    return mask


def threshold_mask(P: np.ndarray, theta: float) -> np.ndarray:
    """Boolean membership mask of the thresholding rule over rows of ``P``."""
    return np.asarray(P, dtype=np.float64) >= float(theta)


def mask_to_labels(mask_row: np.ndarray) -> np.ndarray:
    """Convert one boolean membership row to ascending 1-based labels."""
    return np.flatnonzero(mask_row) + 1


# --- score sets -------------------------------------------------------------

UNLABELED = 0  # labels are 1-based, so 0 marks a missing label


@dataclass
class ScoreSet:
    """A collection of per-sample probability vectors with optional labels.

    Fields
    ------
    ids : list of str
        One identifier per sample; preserved through file round-trips.
    probs : (n, L) float64 array
        Each row a validated probability vector.
    labels : (n,) int array
        True labels in ``{1, ..., L}``; ``0`` marks an unlabeled sample.
    logits : (n, L) float64 array or None
        Raw scores such that ``probs = softmax(logits / temperature)``.
    temperature : float
        The temperature the probabilities were produced with (1 = raw).
    meta : dict
        Free-form provenance (generator template, seed, embedded truth, ...).
    """

    ids: list[str]
    probs: np.ndarray
    labels: np.ndarray | None = None
    logits: np.ndarray | None = None
    temperature: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2 or self.probs.shape[1] < 2:
            raise TooFewClasses(
                f"probs must be (n, L) with L >= 2, got {self.probs.shape}"
            )
        n, L = self.probs.shape
        if len(self.ids) != n:
            raise ValueError(f"{len(self.ids)} ids for {n} rows")
        if np.any(self.probs < 0.0):
            i, j = np.argwhere(self.probs < 0.0)[0]
            raise NegativeEntry(
                f"probs[{i}, {j}] = {self.probs[i, j]!r} < 0"
            )
        sums = self.probs.sum(axis=1)
        off = np.abs(sums - 1.0)
        if np.any(off > DEFAULT_SUM_TOL):
            i = int(np.argmax(off))
            raise SumOutOfTolerance(float(sums[i]), DEFAULT_SUM_TOL)
        if self.labels is None:
            self.labels = np.zeros(n, dtype=np.int64)
        else:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ValueError("labels must be one integer per sample")
            bad = (self.labels < 0) | (self.labels > L)
            if np.any(bad):
                i = int(np.argmax(bad))
                raise ValueError(
                    f"label {self.labels[i]} at row {i} outside [1, {L}]"
                )
        if self.logits is not None:
            self.logits = np.asarray(self.logits, dtype=np.float64)
            if self.logits.shape != (n, L):
                raise ClassCountMismatch(
                    f"logits shape {self.logits.shape} != probs {self.probs.shape}"
                )
            expected = softmax(self.logits / float(self.temperature))
            if not np.allclose(expected, self.probs, atol=1e-6):
                raise ValueError(
                    "probs are not softmax(logits / temperature) "
                    f"at T={self.temperature!r}"
                )

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def L(self) -> int:
        return self.probs.shape[1]

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.labels != UNLABELED

    @property
    def fully_labeled(self) -> bool:
        return bool(np.all(self.labels != UNLABELED))

    def require_labels(self, what: str) -> np.ndarray:
        """Return the label array, raising if any sample is unlabeled."""
        if not self.fully_labeled:
            n_missing = int(np.sum(self.labels == UNLABELED))
            raise MissingLabels(
                f"{what} needs labels; {n_missing} of {self.n} samples "
                "are unlabeled"
            )
        return self.labels

    def subset(self, index: np.ndarray) -> "ScoreSet":
        """New ScoreSet holding the requested rows (copy, same metadata)."""
        index = np.asarray(index, dtype=np.int64)
        return ScoreSet(
            ids=[self.ids[i] for i in index],
            probs=self.probs[index].copy(),
            labels=self.labels[index].copy(),
            logits=None if self.logits is None else self.logits[index].copy(),
            temperature=self.temperature,
            meta=dict(self.meta),
        )


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with the usual max-shift for stability."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)
