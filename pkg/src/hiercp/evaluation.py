"""Metrics, synthetic hierarchical data, and the resampled benchmark."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .conformal import (
    Chain,
    ConformalConfig,
    Prediction,
    build_chain,
    conformal_quantile,
    config_from_label,
    uniform_draws,
)
from .ancestors import BruteForceAncestors, solve_ancestors
from .hierarchy import Hierarchy, balanced_tree, random_tree, representation_complexity
from .probmodel import ProbabilityView, views_from_matrix

REPORT_COLUMNS = ("method", "coverage", "coverage_sd", "size", "size_sd", "repr_complexity", "repr_complexity_sd")


def _classes(pred) -> Sequence[int]:
    return pred.classes if isinstance(pred, Prediction) else tuple(pred)


def coverage(predictions: Sequence, labels: Sequence[int]) -> float:
    if len(predictions) != len(labels):
        raise ValueError(f"{len(predictions)} predictions but {len(labels)} labels")
    if not predictions:
        raise ValueError("empty batch")
    return sum(y in set(_classes(p)) for p, y in zip(predictions, labels)) / len(labels)


def average_size(predictions: Sequence) -> float:
    if not predictions:
        raise ValueError("empty batch")
    return sum(len(_classes(p)) for p in predictions) / len(predictions)


def average_complexity(h: Hierarchy, predictions: Sequence) -> float:
    if not predictions:
        raise ValueError("empty batch")
    return sum(representation_complexity(h, _classes(p)) for p in predictions) / len(predictions)


@dataclass
class Dataset:
    hierarchy: Hierarchy
    probs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.probs) != len(self.labels):
            raise ValueError(f"{len(self.probs)} probability rows but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    def views(self) -> list[ProbabilityView]:
        return views_from_matrix(self.hierarchy, self.probs)


@dataclass
class SyntheticDataset(Dataset):
    seed: int = 0
    concentration: float = 1.0


def generate_synthetic(K: int, arity: int, N: int, concentration: float, seed: int) -> SyntheticDataset:
    """Balanced tree; Dirichlet rows; each label drawn from its own row.

    The rows are the true conditional distributions, so a model reporting
    them is perfectly calibrated.
    """
    if K < 1 or arity < 2 or N < 1 or not concentration > 0:
        raise ValueError(f"invalid parameters K={K}, arity={arity}, N={N}, concentration={concentration}")
    h = balanced_tree(K, arity)
    rng = np.random.default_rng(seed)
    probs = rng.dirichlet(np.full(K, float(concentration)), size=N)
    probs /= probs.sum(axis=1, keepdims=True)
    cdf = np.cumsum(probs, axis=1)
    draws = rng.random(N)[:, None]
    labels = np.minimum((cdf <= draws).sum(axis=1), K - 1)
    # guard against landing on a zero-mass class through rounding at the cdf's top
    labels = np.where(probs[np.arange(N), labels] > 0, labels, probs.argmax(axis=1))
    return SyntheticDataset(h, probs, labels.astype(np.int64), seed, float(concentration))


@dataclass
class MethodResult:
    method: str
    coverage: list[float] = field(default_factory=list)
    size: list[float] = field(default_factory=list)
    complexity: list[float] = field(default_factory=list)
    max_complexity: int = 0
    tau: list[float] = field(default_factory=list)

    def summary(self) -> dict:
        def sd(x):
            return float(np.std(x, ddof=1)) if len(x) > 1 else 0.0

        return {
            "method": self.method,
            "coverage": float(np.mean(self.coverage)),
            "coverage_sd": sd(self.coverage),
            "size": float(np.mean(self.size)),
            "size_sd": sd(self.size),
            "repr_complexity": float(np.mean(self.complexity)),
            "repr_complexity_sd": sd(self.complexity),
        }

    def coverage_se(self) -> float:
        return self.summary()["coverage_sd"] / math.sqrt(len(self.coverage))


@dataclass
class MetricReport:
    results: dict[str, MethodResult]
    resamples: int
    alpha: float
    n_cal: int
    n_test: int

    def rows(self) -> list[dict]:
        return [r.summary() for r in self.results.values()]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"alpha": self.alpha, "resamples": self.resamples, "n_cal": self.n_cal,
                           "n_test": self.n_test, "methods": self.rows()}, indent=2)

    def __getitem__(self, method: str) -> MethodResult:
        return self.results[method]


class _PackedChains:
    """Chains of many instances padded into arrays for vectorized selection."""

    def __init__(self, chains: list[Chain], labels: np.ndarray):
        self.chains = chains
        n = len(chains)
        L = max(len(c) for c in chains)
        self.length = np.array([len(c) for c in chains])
        self.lower = np.zeros((n, L))
        self.upper = np.zeros((n, L))
        self.fixed = None
        if chains[0].fixed is not None:
            self.fixed = np.zeros((n, L))
        self.valid = np.arange(L)[None, :] < self.length[:, None]
        self.sizes = np.zeros((n, L))
        for i, c in enumerate(chains):
            k = len(c)
            self.lower[i, :k] = c.lower
            self.upper[i, :k] = c.upper
            if self.fixed is not None:
                self.fixed[i, :k] = c.fixed
            self.sizes[i, :k] = [m.bit_count() for m in c.masks]
        self.label_entry = np.array([c.first_entry[y] for c, y in zip(chains, labels)])
        self._complexity: dict[tuple[int, int], int] = {}

    def label_scores(self, idx: np.ndarray, u: np.ndarray) -> np.ndarray:
        k = self.label_entry[idx]
        if self.fixed is not None:
            return self.fixed[idx, k]
        lo, hi = self.lower[idx, k], self.upper[idx, k]
        return np.minimum(lo + u * (hi - lo), hi)

    def select(self, idx: np.ndarray, u: np.ndarray, tau: float) -> np.ndarray:
        if self.fixed is not None:
            s = self.fixed[idx]
        else:
            lo, hi = self.lower[idx], self.upper[idx]
            s = np.minimum(lo + u[:, None] * (hi - lo), hi)
        over = (s > tau) | ~self.valid[idx]
        over = np.concatenate([over, np.ones((len(idx), 1), dtype=bool)], axis=1)
        return over.argmax(axis=1) - 1

    def complexity(self, i: int, k: int) -> int:
        if k < 0:
            return 0
        key = (i, k)
        if key not in self._complexity:
            self._complexity[key] = len(self.chains[i].cover(k))
        return self._complexity[key]


def run_benchmark(dataset: Dataset, methods: Iterable[str], alpha: float = 0.1, resamples: int = 20,
                  seed: int = 0, n_cal: int | None = None, allow_empty: bool = True) -> MetricReport:
    """Repeated random calibration/test splits; per-method coverage, size and complexity.

    ``methods`` are table labels such as ``crsvp``, ``ncrsvp-2``, ``aps``,
    ``nps``, ``lac``. Each resample ``b`` uses a permutation and uniform draws
    keyed by ``(seed, b)`` and shared by all methods.
    """
    h = dataset.hierarchy
    N = len(dataset)
    n_cal = N // 2 if n_cal is None else n_cal
    if N < 2 or not 1 <= n_cal < N:
        raise ValueError(f"cannot split {N} instances into calibration ({n_cal}) and test sets")
    labels = np.asarray(dataset.labels)
    views = dataset.views()
    configs = {m: config_from_label(m, alpha, seed=seed, allow_empty=allow_empty) for m in methods}

    packed: dict[tuple, _PackedChains] = {}
    for cfg in configs.values():
        key = (cfg.method, cfg.r)
        if key not in packed:
            packed[key] = _PackedChains([build_chain(h, p, cfg) for p in views], labels)

    results = {m: MethodResult(m) for m in configs}
    for b in range(resamples):
        perm = np.random.default_rng(np.random.SeedSequence([seed, b])).permutation(N)
        cal, test = perm[:n_cal], perm[n_cal:]
        u_all = uniform_draws(seed, N, stream=b)
        for name, cfg in configs.items():
            pc = packed[(cfg.method, cfg.r)]
            if cfg.randomized:
                u_cal, u_test = u_all[cal], u_all[test]
            else:
                u_cal, u_test = np.ones(len(cal)), np.zeros(len(test))
            tau = conformal_quantile(pc.label_scores(cal, u_cal), alpha)
            k = pc.select(test, u_test, tau)
            if not cfg.allow_empty:
                k = np.maximum(k, 0)
            covered = [k_i >= 0 and bool(pc.chains[i].masks[k_i] >> int(labels[i]) & 1)
                       for i, k_i in zip(test.tolist(), k.tolist())]
            sizes = np.where(k >= 0, pc.sizes[test, np.maximum(k, 0)], 0.0)
            comps = [pc.complexity(i, k_i) for i, k_i in zip(test.tolist(), k.tolist())]
            res = results[name]
            res.coverage.append(float(np.mean(covered)))
            res.size.append(float(np.mean(sizes)))
            res.complexity.append(float(np.mean(comps)))
            res.max_complexity = max(res.max_complexity, max(comps))
            res.tau.append(tau)
    return MetricReport(results, resamples, alpha, n_cal, N - n_cal)


@dataclass
class OracleReport:
    trials: int
    matches: int
    comparisons: int
    mismatches: list = field(default_factory=list)


def oracle_check(K: int, trials: int, r_max: int = 4, seed: int = 0, max_arity: int = 4) -> OracleReport:
    """Compare the ancestor DP (pruned and plain) against brute force on random trees.

    Each trial draws a tree with 2..K leaves and a Dirichlet view, then checks
    every budget 1..r_max and every rank prefix as omega. A trial matches when
    all its comparisons agree on class set and cost.
    """
    rng = np.random.default_rng(seed)
    matches = comparisons = 0
    bad = []
    for t in range(trials):
        k = int(rng.integers(2, K + 1)) if K >= 2 else 1
        h = random_tree(k, rng, max_arity)
        p = ProbabilityView(h, rng.dirichlet(np.ones(k)))
        oracle = BruteForceAncestors(h, p, r_max)
        ok = True
        order = p.order.tolist()
        for r in range(1, r_max + 1):
            for j in range(k):
                omega = order[: j + 1]
                want = oracle.solve(omega, r)
                for prune in (True, False):
                    got = solve_ancestors(h, p, omega, r, prune=prune)
                    comparisons += 1
                    if got.mask != want.mask or abs(got.cost - want.cost) > 1e-12:
                        ok = False
                        bad.append((t, r, tuple(omega), prune, got.classes, want.classes))
        matches += ok
    return OracleReport(trials, matches, comparisons, bad)
