"""Final selection: confidence threshold, PCA-reduced TSG distance, provider ranking."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import TSG, AlignmentError, ConsumerRequest, QosAttribute, rmse


class DegenerateInputError(ValueError):
    pass


class RankingMethod(str, enum.Enum):
    ACTUAL = "actual"
    COOPERATIVE = "cooperative"
    LQP_SHORT = "lqp-short"
    TRIAL_ONLY = "trial-only"
    ADVERTISEMENT_ONLY = "advertisement-only"


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Standardised PCA basis. ``components`` is (n attributes x n' components)."""

    attributes: tuple
    mean: np.ndarray
    scale: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    def project(self, matrix: np.ndarray) -> np.ndarray:
        return ((matrix - self.mean) / self.scale) @ self.components

    def reconstruct(self, scores: np.ndarray) -> np.ndarray:
        return scores @ self.components.T * self.scale + self.mean


def fit_pca(tsg: TSG, n_components: int | None = None, variance: float = 0.95,
            standardize: bool = True) -> PcaModel:
    """Principal axes of the (timestamps x attributes) matrix of ``tsg``.

    Without ``n_components`` the smallest count reaching ``variance`` of the
    explained variance is kept.
    """
    d = tsg.as_matrix()
    m, n = d.shape
    if m < 2:
        raise DegenerateInputError("PCA needs at least two timestamps")
    mean = d.mean(axis=0)
    sd = d.std(axis=0)
    if not np.any(sd > 0):
        raise DegenerateInputError("every attribute is constant")
    scale = np.where(sd > 0, sd, 1.0) if standardize else np.ones(n)
    z = (d - mean) / scale
    # eigen-decomposition of the covariance via SVD of the centred data
    _, s, vt = np.linalg.svd(z, full_matrices=False)
    var = s ** 2
    ratio = var / var.sum()
    # deterministic sign: largest loading of each axis positive
    signs = np.sign(vt[np.arange(vt.shape[0]), np.abs(vt).argmax(axis=1)])
    vt = vt * np.where(signs == 0, 1.0, signs)[:, None]
    if n_components is None:
        n_components = int(np.searchsorted(np.cumsum(ratio), variance - 1e-12) + 1)
    if not 1 <= n_components <= vt.shape[0]:
        raise ValueError(f"n_components={n_components} outside [1, {vt.shape[0]}]")
    return PcaModel(tsg.names, mean, scale, vt[:n_components].T.copy(), ratio[:n_components])


def transform_tsg(tsg: TSG, model: PcaModel) -> TSG:
    """Project a TSG onto a fitted basis; one synthetic series per component."""
    if tsg.names != model.attributes:
        if set(tsg.names) != set(model.attributes):
            raise AlignmentError(f"TSG attributes {tsg.names} do not match model {model.attributes}")
        tsg = tsg.select(model.attributes)
    scores = model.project(tsg.as_matrix())
    attrs = [QosAttribute(f"pc{i + 1}") for i in range(model.n_components)]
    if model.components.shape[0] == model.n_components and \
            np.array_equal(model.components, np.eye(model.n_components)):
        attrs = [QosAttribute(n) for n in model.attributes]
    return TSG.from_matrix(attrs, tsg.timestamps, scores)


def tsg_distance(a: TSG, b: TSG, ranges=None) -> float:
    """Sum of per-series RMSE; with ``ranges`` each term is divided by its range."""
    if a.names != b.names:
        raise AlignmentError(f"attribute mismatch {a.names} vs {b.names}")
    total = 0.0
    for i, (sa, sb) in enumerate(zip(a.series, b.series)):
        term = rmse(sa, sb)
        if ranges is not None:
            term /= ranges[i]
        total += term
    return total


def euclidean_distance(a: TSG, b: TSG) -> float:
    """RMS over timestamps of the Euclidean distance between attribute vectors."""
    if a.names != b.names:
        raise AlignmentError(f"attribute mismatch {a.names} vs {b.names}")
    if not np.array_equal(a.timestamps, b.timestamps):
        raise AlignmentError("TSGs are not aligned")
    return float(np.sqrt(np.mean(np.sum((a.as_matrix() - b.as_matrix()) ** 2, axis=1))))


@dataclass(frozen=True)
class RankingEntry:
    provider_id: str
    distance: float
    confidence: float | None
    rank: int


@dataclass
class RankingReport:
    entries: list
    method: RankingMethod
    discarded: list = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.entries

    @property
    def order(self) -> list:
        return [e.provider_id for e in self.entries]

    @property
    def selected(self) -> str | None:
        return self.entries[0].provider_id if self.entries else None

    def rank_of(self, provider_id: str) -> int | None:
        for e in self.entries:
            if e.provider_id == provider_id:
                return e.rank
        return None

    def to_json(self) -> dict:
        return {
            "method": self.method.value,
            "empty": self.empty,
            "entries": [{"provider": e.provider_id, "distance": e.distance,
                         "confidence": e.confidence, "rank": e.rank} for e in self.entries],
            "discarded": self.discarded,
        }


def rank_providers(consumer: ConsumerRequest, predictions, c_thres: float | None = None,
                   method: RankingMethod = RankingMethod.COOPERATIVE, use_pca: bool = True,
                   n_components: int | None = None, aggregate: str = "nrmse",
                   attributes=None) -> RankingReport:
    """Rank predictions by distance to the consumer's expectation, closest first.

    Only cooperative rankings apply ``c_thres``: providers whose most
    pessimistic confidence distance exceeds it are discarded. The PCA basis is
    fitted on the expectation (over the prediction timestamps) and shared by
    every provider. ``aggregate`` is ``"nrmse"`` (per-series RMSE over the
    expectation's range), ``"rmse"`` (plain sum of RMSE) or ``"euclidean"``
    (rotation-invariant RMS vector distance).
    """
    method = RankingMethod(method)
    if aggregate not in ("nrmse", "rmse", "euclidean"):
        raise ValueError(f"unknown aggregate {aggregate!r}")
    predictions = list(predictions)
    kept, discarded = [], []
    for p in predictions:
        conf = p.max_confidence
        if method is RankingMethod.COOPERATIVE and c_thres is not None and conf is not None \
                and conf > c_thres:
            discarded.append({"provider": p.provider_id, "confidence": conf})
        else:
            kept.append(p)

    scored = []
    basis = {}
    for p in kept:
        names = [n for n in (attributes or p.predicted.names) if n in consumer.expectation
                 and n in p.predicted]
        if not names:
            raise AlignmentError(f"prediction for {p.provider_id} shares no attribute with the expectation")
        key = (tuple(names), p.predicted.timestamps.tobytes())
        if key not in basis:
            expected = consumer.expectation.select(names).restrict(p.predicted.timestamps)
            basis[key] = _reference(expected, use_pca, n_components)
        model, ref, ranges = basis[key]
        pred = p.predicted.select(names)
        cand = transform_tsg(pred, model)
        if aggregate == "euclidean":
            d = euclidean_distance(ref, cand)
        else:
            d = tsg_distance(ref, cand, ranges if aggregate == "nrmse" else None)
        scored.append((d, p.provider_id, p.max_confidence))
    scored.sort(key=lambda s: (s[0], s[1]))
    entries = [RankingEntry(pid, d, c, i + 1) for i, (d, pid, c) in enumerate(scored)]
    return RankingReport(entries, method, discarded)


def _reference(expected: TSG, use_pca: bool, n_components):
    """Comparison basis, the expectation in that basis, and its per-series ranges.

    Without PCA the basis is the identity on standardised attributes, so both
    modes compare in the same units.
    """
    if use_pca:
        model = fit_pca(expected, n_components)
    else:
        full = fit_pca(expected, expected.as_matrix().shape[1])
        n = len(expected.attributes)
        model = PcaModel(full.attributes, full.mean, full.scale, np.eye(n),
                         np.full(n, np.nan))
    ref = transform_tsg(expected, model)
    ranges = []
    for s in ref.series:
        r = float(s.values.max() - s.values.min())
        ranges.append(r if r > 0 else 1.0)
    return model, ref, ranges


def spearman(order, reference) -> float:
    """Spearman rank correlation between two orderings of (a subset of) the same ids."""
    common = [pid for pid in reference if pid in order]
    if len(common) < 2:
        return float("nan")
    a = [order.index(pid) for pid in common]
    b = list(range(len(common)))
    rho = stats.spearmanr(a, b).statistic
    return float(rho)
