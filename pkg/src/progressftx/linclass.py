"""Linear (minimum-Mahalanobis) classification on partially received features.

All functions here are pure: they never mutate the partial vector or the
model.  Entropies are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .statmodel import GmModel


@dataclass(frozen=True)
class PartialFeatureVector:
    """The features the server has received so far.

    ``values`` maps 1-based feature indices to received coefficients;
    ``received_set`` is the corresponding index set.  If ``received_set``
    is omitted it is derived from ``values``.  Treat instances as
    immutable; use :func:`with_features` to extend one.
    """

    values: dict[int, float]
    received_set: frozenset[int] = None  # type: ignore[assignment]

    def __post_init__(self):
        keys = frozenset(self.values)
        if self.received_set is None:
            object.__setattr__(self, "received_set", keys)
        elif frozenset(self.received_set) != keys:
            raise ValueError("received_set must equal the key set of values")
        else:
            object.__setattr__(self, "received_set", frozenset(self.received_set))
        if any(n < 1 for n in keys):
            raise ValueError("feature indices are 1-based")

    @staticmethod
    def empty() -> "PartialFeatureVector":
        return PartialFeatureVector(values={})

    @staticmethod
    def from_sample(features: np.ndarray, indices) -> "PartialFeatureVector":
        """Restrict a full feature vector to the given 1-based index set."""
        return PartialFeatureVector(
            values={int(n): float(features[int(n) - 1]) for n in indices})

    def sorted_indices(self) -> np.ndarray:
        return np.array(sorted(self.received_set), dtype=int)


def with_features(pfv: PartialFeatureVector, features: np.ndarray,
                  indices) -> PartialFeatureVector:
    """Return a new partial vector extended by the listed dimensions.

    ``features`` is the full sample vector the new coefficients are read
    from.  Indices already present must not reappear.
    """
    new_values = dict(pfv.values)
    for n in indices:
        n = int(n)
        if n in new_values:
            raise ValueError(f"feature {n} already received")
        new_values[n] = float(features[n - 1])
    return PartialFeatureVector(values=new_values)


def _half_sq_dists(pfv: PartialFeatureVector, model: GmModel) -> np.ndarray:
    """Half squared Mahalanobis distances to every class centroid, shape (L,)."""
    if not pfv.received_set:
        return np.zeros(model.n_classes)
    idx = pfv.sorted_indices()
    if idx[-1] > model.n_features:
        raise IndexError(f"feature index {idx[-1]} out of range (N={model.n_features})")
    pos = idx - 1
    x = np.array([pfv.values[int(n)] for n in idx])
    diff = x[None, :] - model.centroids[:, pos]
    return 0.5 * np.sum(diff * diff / model.variances[pos], axis=1)


def half_mahalanobis(pfv: PartialFeatureVector, model: GmModel, label: int) -> float:
    """Half squared Mahalanobis distance from the received features to one centroid.

    Equals ``0.5 * sum_{n in W} (x(n) - mu_label(n))**2 / C_nn``; zero when
    nothing has been received.
    """
    if not 1 <= label <= model.n_classes:
        raise ValueError(f"label must be in 1..{model.n_classes}")
    return float(_half_sq_dists(pfv, model)[label - 1])


def classify(pfv: PartialFeatureVector, model: GmModel) -> int:
    """Most likely class given the received features.

    Argmin of the half squared Mahalanobis distances; ties break toward
    the lowest class index.
    """
    return int(np.argmin(_half_sq_dists(pfv, model))) + 1


def posteriors(pfv: PartialFeatureVector, model: GmModel) -> np.ndarray:
    """Class posterior probabilities (uniform priors), shape (L,).

    Softmax of the negated distances, computed with max-subtraction so
    distance spreads up to ~700 do not overflow.
    """
    z = _half_sq_dists(pfv, model)
    w = np.exp(-(z - z.min()))
    return w / w.sum()


def _entropy_from_z(z: np.ndarray) -> float:
    zs = z - z.min()
    w = np.exp(-zs)
    s = w.sum()
    return float(np.log(s) + np.dot(zs, w) / s)


def entropy(pfv: PartialFeatureVector, model: GmModel) -> float:
    """Shannon entropy (nats) of the class posteriors.

    Evaluated in the log-sum-exp form
    ``log sum_l exp(-z_l) + (sum_l z_l exp(-z_l)) / (sum_l exp(-z_l))``,
    shifted by ``min(z)`` for stability.
    """
    return _entropy_from_z(_half_sq_dists(pfv, model))


def differential_distance(pfv: PartialFeatureVector, model: GmModel,
                          pair: tuple[int, int] = (1, 2)) -> float:
    """Difference of half squared distances ``z_l - z_l'`` for a class pair.

    Antisymmetric in the pair; for binary models the default pair (1, 2)
    is the sufficient statistic for the posterior.
    """
    l, lp = pair
    if l == lp:
        raise ValueError("class pair must be distinct")
    z = _half_sq_dists(pfv, model)
    if not (1 <= l <= len(z) and 1 <= lp <= len(z)):
        raise ValueError(f"pair {pair} out of range 1..{len(z)}")
    return float(z[l - 1] - z[lp - 1])


def binary_entropy(delta: float) -> float:
    """Posterior entropy (nats) of a binary classifier at differential distance delta.

    ``log(1 + exp(-delta)) + delta / (exp(delta) + 1)``, even in delta and
    strictly decreasing in ``|delta|`` from ``log 2`` toward 0.  Evaluated
    through ``|delta|`` so large magnitudes cannot overflow.
    """
    d = abs(float(delta))
    e = np.exp(-d)
    return float(np.log1p(e) + d * e / (1.0 + e))


def binary_entropy_arr(delta) -> np.ndarray:
    """Vectorized :func:`binary_entropy`."""
    d = np.abs(np.asarray(delta, dtype=float))
    e = np.exp(-d)
    return np.log1p(e) + d * e / (1.0 + e)
