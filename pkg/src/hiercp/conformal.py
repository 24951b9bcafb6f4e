"""Split conformal calibration and nested set-valued prediction.

Every method is expressed as a *chain*: a strictly growing sequence of
class sets ending at the full class space, plus a score per entry. The
prediction at threshold ``tau`` is the last entry reached before the first
score above ``tau``; the nonconformity score of a label is the score of the
first entry that contains it.

Randomized scores interpolate between consecutive entries,
``mass(prev) + u * (mass(entry) - mass(prev))``, in calibration and in
inference alike. Some published pseudocode writes the calibration score as
``mass(entry) - u * (...)``, i.e. with ``1 - u``; both are uniform, but one
orientation everywhere keeps ``y in predict(tau) <=> score(y) <= tau`` exact
for a shared ``u``.

Naive (non-randomized) variants score calibration labels at the upper end of
their entry (``u = 1`` here, ``u = 0`` in the ``mass - u * delta`` form) and
predict at the lower end (``u = 0``). Their sets therefore contain the
randomized sets built from the same data, hence the over-coverage.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .ancestors import ancestor_sequence
from .hierarchy import Hierarchy, NodeSet, bits, cover_of_mask, path_to_root
from .probmodel import ProbabilityView, mode

METHODS = ("crsvp", "crsvp-r", "lac", "aps")
INF = math.inf


@dataclass(frozen=True)
class ConformalConfig:
    alpha: float
    method: str = "crsvp"
    r: int | None = None
    randomized: bool = True
    allow_empty: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.method == "crsvp-r" and (self.r is None or self.r < 1):
            raise ValueError("crsvp-r needs a budget r >= 1")

    @property
    def label(self) -> str:
        """Short name as used in result tables, e.g. ``ncrsvp-2`` or ``nps``."""
        if self.method == "lac":
            return "lac"
        if self.method == "aps":
            return "aps" if self.randomized else "nps"
        base = f"crsvp-{self.r}" if self.method == "crsvp-r" else "crsvp"
        return base if self.randomized else "n" + base


def config_from_label(label: str, alpha: float, **kw) -> ConformalConfig:
    """Inverse of :attr:`ConformalConfig.label`."""
    name = label.lower()
    if name == "lac":
        return ConformalConfig(alpha, "lac", randomized=False, **kw)
    if name in ("aps", "nps"):
        return ConformalConfig(alpha, "aps", randomized=name == "aps", **kw)
    randomized = not name.startswith("n")
    base = name if randomized else name[1:]
    if base == "crsvp":
        return ConformalConfig(alpha, "crsvp", randomized=randomized, **kw)
    if base.startswith("crsvp-") and base[6:].isdigit():
        return ConformalConfig(alpha, "crsvp-r", r=int(base[6:]), randomized=randomized, **kw)
    raise ValueError(f"unknown method label {label!r}")


@dataclass(frozen=True)
class CalibratedPredictor:
    config: ConformalConfig
    tau_star: float
    n_cal: int
    K: int | None = None

    def to_json(self) -> str:
        d = asdict(self.config)
        d["tau_star"] = "inf" if math.isinf(self.tau_star) else self.tau_star
        d["n_cal"] = self.n_cal
        if self.K is not None:
            d["K"] = self.K
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CalibratedPredictor":
        d = json.loads(text)
        tau = d.pop("tau_star")
        n_cal = d.pop("n_cal")
        K = d.pop("K", None)
        tau = INF if tau == "inf" else float(tau)
        return cls(ConformalConfig(**d), tau, int(n_cal), K)


@dataclass(frozen=True)
class Prediction:
    classes: tuple[int, ...]
    cover: NodeSet
    u: float = 0.0

    @property
    def size(self) -> int:
        return len(self.classes)

    @property
    def complexity(self) -> int:
        return len(self.cover)

    def __contains__(self, y) -> bool:
        return y in self.classes


@dataclass
class Chain:
    """Nested candidate sets of one instance under one method.

    ``lower``/``upper`` give the interpolation endpoints of each entry's
    score; ``fixed`` (LAC) replaces them with u-independent scores.
    """

    hierarchy: Hierarchy
    masks: list[int]
    upper: np.ndarray
    lower: np.ndarray
    covers: list[NodeSet | None]
    fixed: np.ndarray | None = None
    first_entry: np.ndarray = field(init=False)

    def __post_init__(self):
        first = np.full(self.hierarchy.K, -1, dtype=np.int64)
        seen = 0
        for k, m in enumerate(self.masks):
            new = m & ~seen
            if new:
                first[list(bits(new))] = k
            seen |= m
        self.first_entry = first

    def __len__(self):
        return len(self.masks)

    def scores(self, u: float) -> np.ndarray:
        if self.fixed is not None:
            return self.fixed
        s = self.lower + u * (self.upper - self.lower)
        # rounding must never push an entry's score above the next entry's
        return np.minimum(s, self.upper)

    def label_score(self, y: int, u: float) -> float:
        k = self.first_entry[y]
        if self.fixed is not None:
            return float(self.fixed[k])
        lo, hi = float(self.lower[k]), float(self.upper[k])
        return min(lo + u * (hi - lo), hi)

    def select(self, u: float, tau: float) -> int:
        """Index of the predicted entry; -1 for the empty set."""
        over = np.flatnonzero(self.scores(u) > tau)
        return int(over[0]) - 1 if over.size else len(self.masks) - 1

    def cover(self, k: int) -> NodeSet:
        if self.covers[k] is None:
            self.covers[k] = cover_of_mask(self.hierarchy, self.masks[k])
        return self.covers[k]

    def prediction(self, k: int, u: float = 0.0) -> Prediction:
        if k < 0:
            return Prediction((), (), u)
        return Prediction(bits(self.masks[k]), self.cover(k), u)


def _interp_chain(h: Hierarchy, masks, masses, covers, fixed=None) -> Chain:
    upper = np.asarray(masses, dtype=np.float64)
    lower = np.concatenate(([0.0], upper[:-1]))
    return Chain(h, list(masks), upper, lower, list(covers), fixed)


def crsvp_chain(h: Hierarchy, p: ProbabilityView) -> Chain:
    """Nodes on the path from the mode's leaf to the root (single-child chains collapsed)."""
    masks, masses, covers = [], [], []
    for v in path_to_root(h, h.leaf_of_class[mode(p)]):
        if masks and masks[-1] == h.masks[v]:
            covers[-1] = (v,)
            continue
        masks.append(h.masks[v])
        masses.append(p.node_masses[v])
        covers.append((v,))
    return _interp_chain(h, masks, masses, covers)


def crsvpr_chain(h: Hierarchy, p: ProbabilityView, r: int) -> Chain:
    seq = ancestor_sequence(h, p, r)
    return _interp_chain(h, [s.mask for s in seq], [s.mass for s in seq], [s.cover for s in seq])


def _prefix_masks(p: ProbabilityView) -> list[int]:
    out, m = [], 0
    for c in p.order.tolist():
        m |= 1 << c
        out.append(m)
    return out


def aps_chain(h: Hierarchy, p: ProbabilityView) -> Chain:
    """Prefixes of the ranked classes; entry k's lower end is the mass ranked before it."""
    ranked = p.leaf_mass[p.order]
    masses = [math.fsum(ranked[: k + 1]) for k in range(h.K)]
    return _interp_chain(h, _prefix_masks(p), masses, [None] * h.K)


def lac_chain(h: Hierarchy, p: ProbabilityView) -> Chain:
    ranked = p.leaf_mass[p.order]
    chain = _interp_chain(h, _prefix_masks(p), np.cumsum(ranked), [None] * h.K, fixed=1.0 - ranked)
    return chain


def build_chain(h: Hierarchy, p: ProbabilityView, config: ConformalConfig) -> Chain:
    if config.method == "crsvp":
        return crsvp_chain(h, p)
    if config.method == "crsvp-r":
        return crsvpr_chain(h, p, config.r)
    if config.method == "aps":
        return aps_chain(h, p)
    return lac_chain(h, p)


# -- calibration ---------------------------------------------------------------

def required_rank(n: int, alpha: float) -> int:
    """``ceil((1 - alpha) (n + 1))``, guarded against float round-up."""
    return math.ceil((1.0 - alpha) * (n + 1) - 1e-9)


def conformal_quantile(scores: Sequence[float], alpha: float) -> float:
    """Smallest threshold covering ``ceil((1-alpha)(N+1))`` scores; inf if that exceeds N."""
    s = np.sort(np.asarray(scores, dtype=np.float64))
    if s.size == 0:
        raise ValueError("need at least one calibration score")
    m = required_rank(s.size, alpha)
    if m > s.size:
        return INF
    return float(s[max(m, 1) - 1])


def uniform_draws(seed: int, n: int, stream: int = 0) -> np.ndarray:
    """Draw ``i`` depends only on ``(seed, stream, i)`` (counter-based Philox)."""
    bitgen = np.random.Philox(np.random.SeedSequence([int(seed) & (2**64 - 1), int(stream)]))
    return np.random.Generator(bitgen).random(n)


def calibration_draws(config: ConformalConfig, n: int, fixed_u: float | None = None) -> np.ndarray:
    if config.method == "lac":
        return np.zeros(n)
    if not config.randomized:
        return np.ones(n)
    if fixed_u is not None:
        return np.full(n, _check_u(fixed_u))
    return uniform_draws(config.seed, n, stream=0)


def inference_draws(config: ConformalConfig, n: int, fixed_u: float | None = None, stream: int = 1) -> np.ndarray:
    if config.method == "lac" or not config.randomized:
        return np.zeros(n)
    if fixed_u is not None:
        return np.full(n, _check_u(fixed_u))
    return uniform_draws(config.seed, n, stream=stream)


def _check_u(u: float) -> float:
    if not 0 <= u <= 1:
        raise ValueError(f"u must be in [0, 1], got {u}")
    return float(u)


def calibration_scores(h: Hierarchy, views: Sequence[ProbabilityView], labels: Sequence[int],
                       config: ConformalConfig, u=None) -> np.ndarray:
    if len(views) != len(labels):
        raise ValueError(f"{len(views)} probability rows but {len(labels)} labels")
    if u is None or not config.randomized:
        u = calibration_draws(config, len(views))
    u = np.broadcast_to(np.asarray(u, dtype=np.float64), (len(views),))
    return np.array([build_chain(h, p, config).label_score(int(y), float(ui))
                     for p, y, ui in zip(views, labels, u)])


def calibrate(h: Hierarchy, views: Sequence[ProbabilityView], labels: Sequence[int],
              config: ConformalConfig, u=None) -> CalibratedPredictor:
    """Threshold from a calibration set; ``u`` overrides the seeded draws."""
    scores = calibration_scores(h, views, labels, config, u)
    return CalibratedPredictor(config, conformal_quantile(scores, config.alpha), len(scores))


def predict(h: Hierarchy, p: ProbabilityView, predictor: CalibratedPredictor, u: float = 0.0,
            chain: Chain | None = None) -> Prediction:
    config = predictor.config
    if not config.randomized or config.method == "lac":
        u = 0.0
    chain = chain or build_chain(h, p, config)
    k = chain.select(u, predictor.tau_star)
    if k < 0 and not config.allow_empty:
        k = 0
    return chain.prediction(k, u)


def predict_batch(h: Hierarchy, views: Sequence[ProbabilityView], predictor: CalibratedPredictor,
                  u=None, stream: int = 1) -> list[Prediction]:
    if u is None:
        u = inference_draws(predictor.config, len(views), stream=stream)
    u = np.broadcast_to(np.asarray(u, dtype=np.float64), (len(views),))
    return [predict(h, p, predictor, float(ui)) for p, ui in zip(views, u)]


def score(h: Hierarchy, p: ProbabilityView, y: int, config: ConformalConfig, u: float = 0.0) -> float:
    """Calibration score of label ``y``; naive variants ignore ``u``."""
    if not config.randomized:
        u = 1.0
    return build_chain(h, p, config).label_score(y, u)


# -- per-method entry points ---------------------------------------------------

def crsvp_score(h: Hierarchy, p: ProbabilityView, y: int, u: float) -> float:
    return crsvp_chain(h, p).label_score(y, u)


def crsvp_calibrate(h, views, labels, config: ConformalConfig, u=None) -> CalibratedPredictor:
    return calibrate(h, views, labels, _with_method(config, "crsvp"), u)


def crsvp_predict(h, p, predictor: CalibratedPredictor, u: float) -> Prediction:
    return predict(h, p, predictor, u)


def crsvpr_score(h: Hierarchy, p: ProbabilityView, y: int, r: int, u: float) -> float:
    return crsvpr_chain(h, p, r).label_score(y, u)


def crsvpr_calibrate(h, views, labels, config: ConformalConfig, u=None) -> CalibratedPredictor:
    return calibrate(h, views, labels, _with_method(config, "crsvp-r"), u)


def crsvpr_predict(h, p, predictor: CalibratedPredictor, u: float) -> Prediction:
    return predict(h, p, predictor, u)


def aps_score(p: ProbabilityView, y: int, u: float) -> float:
    """Mass ranked strictly before ``y`` plus ``u`` times the mass of ``y``."""
    ranked = p.leaf_mass[p.order]
    k = int(p.rank[y])
    before = math.fsum(ranked[:k])
    return before + u * float(ranked[k])


def aps_calibrate(h, views, labels, config: ConformalConfig, u=None) -> CalibratedPredictor:
    return calibrate(h, views, labels, _with_method(config, "aps"), u)


def aps_predict(h, p, predictor: CalibratedPredictor, u: float) -> Prediction:
    return predict(h, p, predictor, u)


def lac_score(p: ProbabilityView, y: int) -> float:
    return 1.0 - float(p.leaf_mass[y])


def lac_calibrate(h, views, labels, config: ConformalConfig) -> CalibratedPredictor:
    return calibrate(h, views, labels, _with_method(config, "lac"))


def lac_predict(h, p, predictor: CalibratedPredictor) -> Prediction:
    return predict(h, p, predictor)


def _with_method(config: ConformalConfig, method: str) -> ConformalConfig:
    if config.method == method:
        return config
    d = asdict(config)
    d["method"] = method
    return ConformalConfig(**d)
