"""The eight prediction rules and their parameter record.

Each rule maps a probability vector (plus fitted parameters) to a label
set.  Five of them are pure thresholding; the point-wise error rule is an
adaptive top-k; the hybrids intersect or combine the two primitives.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import (
    TieBreakPolicy,
    descending_order,
    threshold_mask,
    threshold_set,
    top_indices,
    topk_mask,
)
from .errors import (
    InvalidBeta,
    InvalidEpsilon,
    InvalidOffset,
    KbarOutOfRange,
    EbarOutOfRange,
    KOutOfRange,
    NegativeLambda,
    ParameterOrderViolation,
)


class Kind(str, enum.Enum):
    """The supported optimization formulations."""

    TOP_K = "top-k"
    POINTWISE_ERROR = "pointwise-error"
    PENALIZED = "penalized"
    AVERAGE_SIZE = "average-size"
    AVERAGE_ERROR = "average-error"
    HYBRID_SIZE = "hybrid-size"
    HYBRID_ERROR = "hybrid-error"
    F_SCORE = "f-score"


#: Combine modes for the hybrid error rule (see predict_hybrid_error).
MODE_LEMMA_THRESHOLD = "lemma-threshold"
MODE_UNION_POINTWISE = "union-with-pointwise"

#: Kinds whose rule uses a data-fitted threshold.
FITTED_KINDS = frozenset(
    {
        Kind.AVERAGE_SIZE,
        Kind.AVERAGE_ERROR,
        Kind.HYBRID_SIZE,
        Kind.HYBRID_ERROR,
        Kind.F_SCORE,
    }
)


@dataclass(frozen=True)
class FormulationSpec:
    """A formulation tag plus its parameters.

    Only the fields relevant to ``kind`` may be set:

    ==================  =============================================
    kind                parameters
    ==================  =============================================
    top-k               k in [0, L]
    pointwise-error     eps in [0, 1], offset in [0, eps]
    penalized           lam >= 0
    average-size        kbar in (0, L]
    average-error       ebar in (0, 1)
    hybrid-size         0 < kbar < k <= L
    hybrid-error        0 <= ebar < eps <= 1, mode
    f-score             beta > 0
    ==================  =============================================

    Bounds involving L are checked at fit/predict time, when L is known.
    """

    kind: Kind
    k: int | None = None
    eps: float | None = None
    offset: float = 0.0
    lam: float | None = None
    kbar: float | None = None
    ebar: float | None = None
    beta: float | None = None
    mode: str = MODE_LEMMA_THRESHOLD
    tie: TieBreakPolicy = field(default_factory=TieBreakPolicy)

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is Kind.TOP_K:
            self._need("k")
            if not (isinstance(self.k, (int, np.integer)) and self.k >= 0):
                raise KOutOfRange(f"k={self.k!r} must be an integer >= 0")
        elif kind is Kind.POINTWISE_ERROR:
            self._need("eps")
            _check_eps(self.eps)
            if not 0.0 <= self.offset <= self.eps:
                raise InvalidOffset(
                    f"offset={self.offset!r} outside [0, {self.eps!r}]"
                )
        elif kind is Kind.PENALIZED:
            self._need("lam")
            if self.lam < 0:
                raise NegativeLambda(f"lambda={self.lam!r} < 0")
        elif kind is Kind.AVERAGE_SIZE:
            self._need("kbar")
            if self.kbar <= 0:
                raise KbarOutOfRange(f"kbar={self.kbar!r} must be > 0")
        elif kind is Kind.AVERAGE_ERROR:
            self._need("ebar")
            if not 0.0 < self.ebar < 1.0:
                raise EbarOutOfRange(f"ebar={self.ebar!r} outside (0, 1)")
        elif kind is Kind.HYBRID_SIZE:
            self._need("kbar", "k")
            if not (isinstance(self.k, (int, np.integer)) and self.k >= 1):
                raise KOutOfRange(f"k={self.k!r} must be an integer >= 1")
            if not 0.0 < self.kbar:
                raise KbarOutOfRange(f"kbar={self.kbar!r} must be > 0")
            if not self.kbar < self.k:
                raise ParameterOrderViolation(
                    f"need kbar < k, got kbar={self.kbar!r}, k={self.k!r}"
                )
        elif kind is Kind.HYBRID_ERROR:
            self._need("ebar", "eps")
            _check_eps(self.eps)
            if not 0.0 <= self.ebar:
                raise EbarOutOfRange(f"ebar={self.ebar!r} must be >= 0")
            if not self.ebar < self.eps:
                raise ParameterOrderViolation(
                    f"need ebar < eps, got ebar={self.ebar!r}, eps={self.eps!r}"
                )
            if self.mode not in (MODE_LEMMA_THRESHOLD, MODE_UNION_POINTWISE):
                raise ValueError(f"unknown combine mode {self.mode!r}")
        elif kind is Kind.F_SCORE:
            self._need("beta")
            if not self.beta > 0:
                raise InvalidBeta(f"beta={self.beta!r} must be > 0")
        self._reject_stray_fields()

    _RELEVANT = {
        Kind.TOP_K: {"k"},
        Kind.POINTWISE_ERROR: {"eps", "offset"},
        Kind.PENALIZED: {"lam"},
        Kind.AVERAGE_SIZE: {"kbar"},
        Kind.AVERAGE_ERROR: {"ebar"},
        Kind.HYBRID_SIZE: {"kbar", "k"},
        Kind.HYBRID_ERROR: {"ebar", "eps", "mode"},
        Kind.F_SCORE: {"beta"},
    }

    def _reject_stray_fields(self):
        relevant = self._RELEVANT[self.kind]
        defaults = {"offset": 0.0, "mode": MODE_LEMMA_THRESHOLD}
        for name in ("k", "eps", "offset", "lam", "kbar", "ebar", "beta", "mode"):
            if name in relevant:
                continue
            if getattr(self, name) != defaults.get(name):
                raise ValueError(
                    f"{name} is not a parameter of {self.kind.value}"
                )

    def _need(self, *names):
        for name in names:
            if getattr(self, name) is None:
                raise ValueError(f"{self.kind.value} requires {name}")

    @property
    def needs_fit(self) -> bool:
        return self.kind in FITTED_KINDS

    def check_class_count(self, L: int) -> None:
        """Validate the L-dependent parameter bounds."""
        if self.kind is Kind.TOP_K and self.k > L:
            raise KOutOfRange(f"k={self.k} > L={L}")
        if self.kind is Kind.AVERAGE_SIZE and self.kbar > L:
            raise KbarOutOfRange(f"kbar={self.kbar!r} > L={L}")
        if self.kind is Kind.HYBRID_SIZE and self.k > L:
            raise KOutOfRange(f"k={self.k} > L={L}")


def _check_eps(eps):
    if not 0.0 <= eps <= 1.0:
        raise InvalidEpsilon(f"eps={eps!r} outside [0, 1]")


# --- the rules --------------------------------------------------------------


def predict_top_k(p: np.ndarray, k: int) -> np.ndarray:
    """Point-wise size control: the ``k`` most probable labels."""
    return top_indices(p, k)


def pointwise_error_cutoff(p: np.ndarray, eps: float, offset: float = 0.0) -> int:
    """Number of top labels needed to reach cumulative mass ``1 - eps + offset``.

    This is the adaptive set size of the point-wise error rule: the smallest
    ``k`` whose top-``k`` cumulative probability meets the target.  A size of
    zero is possible only when the target is not positive (``eps = 1`` with no
    offset); when floating-point shortfall leaves even the full sum below a
    target ``<= 1`` the full set is returned.
    """
    _check_eps(eps)
    if not 0.0 <= offset <= eps:
        raise InvalidOffset(f"offset={offset!r} outside [0, {eps!r}]")
    p = np.asarray(p, dtype=np.float64)
    target = 1.0 - eps + offset
    if target <= 0.0:
        return 0
    csum = np.cumsum(p[descending_order(p)])
    reached = np.flatnonzero(csum >= target)
    if reached.size == 0:
        return p.size
    return int(reached[0]) + 1


def predict_pointwise_error(
    p: np.ndarray, eps: float, offset: float = 0.0
) -> np.ndarray:
    """Point-wise error control: smallest top set with mass ``>= 1 - eps + offset``."""
    return top_indices(p, pointwise_error_cutoff(p, eps, offset))


def predict_penalized(p: np.ndarray, lam: float) -> np.ndarray:
    """Penalized rule: thresholding at the penalty weight ``lam``."""
    if lam < 0:
        raise NegativeLambda(f"lambda={lam!r} < 0")
    return threshold_set(p, lam)


def predict_with_threshold(p: np.ndarray, theta: float) -> np.ndarray:
    """Thresholding at a calibrated cutoff (average size / error rules)."""
    return threshold_set(p, theta)


def predict_hybrid_size(p: np.ndarray, theta: float, k: int) -> np.ndarray:
    """Hybrid size control: threshold set intersected with the top-``k`` set."""
    p = np.asarray(p, dtype=np.float64)
    if not 1 <= k <= p.size:
        raise KOutOfRange(f"k={k!r} outside [1, {p.size}]")
    out = np.intersect1d(threshold_set(p, theta), top_indices(p, k))
    out.flags.writeable = False
    return out


def predict_hybrid_error(
    p: np.ndarray,
    theta: float,
    eps: float,
    mode: str = MODE_LEMMA_THRESHOLD,
) -> np.ndarray:
    """Hybrid error control.

    ``mode="lemma-threshold"`` applies the stated closed form: thresholding
    at the calibrated cutoff.  ``mode="union-with-pointwise"`` unions that
    set with the point-wise error rule at ``eps``, which guarantees the
    point-wise constraint by construction.  Both are exposed because a pure
    threshold can violate the point-wise constraint on some distributions;
    the brute-force oracle reports how each mode behaves case by case.
    """
    base = threshold_set(p, theta)
    if mode == MODE_LEMMA_THRESHOLD:
        return base
    if mode == MODE_UNION_POINTWISE:
        out = np.union1d(base, predict_pointwise_error(p, eps, 0.0))
        out.flags.writeable = False
        return out
    raise ValueError(f"unknown combine mode {mode!r}")


def predict_fscore(p: np.ndarray, theta_star: float) -> np.ndarray:
    """F-score rule: thresholding at the fitted root ``theta_star``."""
    return threshold_set(p, theta_star)


# --- vectorized rules -------------------------------------------------------


def pointwise_error_mask(
    P: np.ndarray, eps: float, offset: float = 0.0
) -> np.ndarray:
    """Membership mask of the point-wise error rule over rows of ``P``."""
    _check_eps(eps)
    if not 0.0 <= offset <= eps:
        raise InvalidOffset(f"offset={offset!r} outside [0, {eps!r}]")
    P = np.asarray(P, dtype=np.float64)
    n, L = P.shape
    target = 1.0 - eps + offset
    mask = np.zeros((n, L), dtype=bool)
    if target <= 0.0:
        return mask
    order = np.argsort(-P, axis=1, kind="stable")
    rows = np.arange(n)[:, None]
    csum = np.cumsum(P[rows, order], axis=1)
    # cutoff = 1 + number of strict prefixes below the target, capped at L
    # (the cap absorbs float shortfall when the full sum should reach it)
    khat = np.minimum((csum < target).sum(axis=1) + 1, L)
    mask[rows, order] = np.arange(L)[None, :] < khat[:, None]
    return mask


def rule_mask(spec: FormulationSpec, P: np.ndarray, theta: float | None,
              offset: float | None = None) -> np.ndarray:
    """Membership mask of any formulation over rows of ``P``.

    ``theta`` is the fitted threshold for the kinds that use one;
    ``offset`` overrides the spec's point-wise offset when given.
    """
    kind = spec.kind
    if kind is Kind.TOP_K:
        return topk_mask(P, spec.k)
    if kind is Kind.POINTWISE_ERROR:
        off = spec.offset if offset is None else offset
        return pointwise_error_mask(P, spec.eps, off)
    if kind is Kind.PENALIZED:
        return threshold_mask(P, spec.lam)
    if kind in (Kind.AVERAGE_SIZE, Kind.AVERAGE_ERROR, Kind.F_SCORE):
        return threshold_mask(P, theta)
    if kind is Kind.HYBRID_SIZE:
        return threshold_mask(P, theta) & topk_mask(P, spec.k)
    if kind is Kind.HYBRID_ERROR:
        base = threshold_mask(P, theta)
        if spec.mode == MODE_UNION_POINTWISE:
            return base | pointwise_error_mask(P, spec.eps, 0.0)
        return base
    raise ValueError(f"unhandled kind {kind!r}")  # pragma: no cover
