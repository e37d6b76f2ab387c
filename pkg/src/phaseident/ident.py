"""Sparse PDE identification on a feature system.

Candidate models come from Subspace Pursuit at each sparsity level, are
refined by trimming low-importance features, and are ranked by the
cross-validation estimation error (CEE): rows are split into two halves by
time-slice parity, a model is fitted on each half, and the CEE is the sum of
squared prediction errors of each half's fit on the other half.

All scoring runs on precomputed Gram matrices of the column-normalized
feature matrix, so a full sweep over sparsity levels costs one pass over the
data plus O(K^3) algebra per candidate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureSystem, N_FEATURES

_RANK_TOL = 1e-10


@dataclass(frozen=True)
class SparseModel:
    support: tuple[int, ...]          # indices into the 15-term dictionary
    coefficients: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(int(i) for i in self.support))
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if len(self.support) != c.size:
            raise ValueError("support/coefficient size mismatch")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficients")
        object.__setattr__(self, "coefficients", c)

    @property
    def sparsity(self) -> int:
        return len(self.support)

    @property
    def is_zero(self) -> bool:
        return self.sparsity == 0

    def dense(self) -> np.ndarray:
        c = np.zeros(N_FEATURES)
        c[list(self.support)] = self.coefficients
        return c


ZERO_MODEL = SparseModel((), np.zeros(0))


@dataclass(frozen=True)
class CEEReport:
    value: float
    split_sizes: tuple[int, int]
    model: SparseModel


@dataclass
class LstsqResult:
    coefficients: np.ndarray
    degenerate: bool


def least_squares(system: FeatureSystem, support) -> LstsqResult:
    """Restricted least squares via QR/SVD with a documented rank tolerance."""
    support = sorted(int(i) for i in support)
    if not support:
        raise ValueError("empty support")
    if system.n_rows < len(support):
        raise ValueError("fewer rows than support size")
    cols = system.matrix[:, support]
    coef, _, rank, _ = np.linalg.lstsq(cols, system.response, rcond=_RANK_TOL)
    return LstsqResult(coef, degenerate=rank < len(support))


class _Scorer:
    """Gram-matrix workspace for SP / trimming / CEE on one feature system."""

    def __init__(self, system: FeatureSystem):
        self.system = system
        F = system.matrix
        y = system.response
        self.norms = np.linalg.norm(F, axis=0)
        self.usable = self.norms > 0
        scale = np.where(self.usable, self.norms, 1.0)
        G = F / scale
        self.gram = G.T @ G
        self.gy = G.T @ y
        self.yy = float(y @ y)
        even = system.time_index % 2 == 0
        self.halves = []
        for half in (even, ~even):
            Gh = G[half]
            yh = y[half]
            self.halves.append(
                (Gh.T @ Gh, Gh.T @ yh, float(yh @ yh), int(half.sum()))
            )
        self.scale = scale

    def _solve(self, gram, rhs, support):
        idx = np.asarray(support, dtype=int)
        A = gram[np.ix_(idx, idx)]
        b = rhs[idx]
        try:
            c = np.linalg.solve(A, b)
            if np.all(np.isfinite(c)):
                return c
        except np.linalg.LinAlgError:
            pass
        return np.linalg.lstsq(A, b, rcond=_RANK_TOL)[0]

    def fit(self, support) -> np.ndarray:
        """Normalized-column coefficients of the full-data fit."""
        return self._solve(self.gram, self.gy, support)

    def fit_unnormalized(self, support) -> np.ndarray:
        return self.fit(support) / self.scale[list(support)]

    def residual_sq(self, support, coef) -> float:
        idx = np.asarray(support, dtype=int)
        r2 = self.yy - 2 * coef @ self.gy[idx] \
            + coef @ self.gram[np.ix_(idx, idx)] @ coef
        return max(float(r2), 0.0)

    def correlations(self, support=None, coef=None) -> np.ndarray:
        """|G^T residual| with zero-norm columns forced out of the ranking."""
        corr = self.gy.copy()
        if support is not None and len(support):
            idx = np.asarray(support, dtype=int)
            corr -= self.gram[:, idx] @ coef
        corr = np.abs(corr)
        corr[~self.usable] = -np.inf
        return corr

    def cee(self, support) -> float:
        (g1, b1, yy1, _), (g2, b2, yy2, _) = self.halves
        c1 = self._solve(g1, b1, support)
        c2 = self._solve(g2, b2, support)
        idx = np.asarray(support, dtype=int)
        err_on_2 = yy2 - 2 * c1 @ b2[idx] + c1 @ g2[np.ix_(idx, idx)] @ c1
        err_on_1 = yy1 - 2 * c2 @ b1[idx] + c2 @ g1[np.ix_(idx, idx)] @ c2
        return max(float(err_on_2 + err_on_1), 0.0)


def _top_k(values: np.ndarray, k: int) -> list[int]:
    # Stable: ties resolve toward the smaller feature index.
    order = np.argsort(-values, kind="stable")
    return sorted(int(i) for i in order[:k])


def subspace_pursuit(system: FeatureSystem, k: int,
                     scorer: _Scorer | None = None) -> SparseModel:
    """Subspace Pursuit for the k-sparse least-squares problem."""
    if not 1 <= k <= N_FEATURES:
        raise ValueError(f"sparsity k={k} out of range 1..{N_FEATURES}")
    if system.n_rows <= k:
        raise ValueError("not enough rows for the requested sparsity")
    sc = scorer or _Scorer(system)
    support = _top_k(sc.correlations(), k)
    coef = sc.fit(support)
    resid = sc.residual_sq(support, coef)
    for _ in range(100):
        if resid <= _RANK_TOL ** 2 * max(sc.yy, 1.0):
            break
        corr = sc.correlations(support, coef)
        expanded = sorted(set(support) | set(_top_k(corr, k)))
        c_exp = sc.fit(expanded)
        keep = np.argsort(-np.abs(c_exp), kind="stable")[:k]
        new_support = sorted(expanded[i] for i in keep)
        new_coef = sc.fit(new_support)
        new_resid = sc.residual_sq(new_support, new_coef)
        if new_resid >= resid * (1 - 1e-12):
            break
        support, coef, resid = new_support, new_coef, new_resid
    return SparseModel(tuple(support), sc.fit_unnormalized(support))


def trim(system: FeatureSystem, model: SparseModel, threshold: float,
         scorer: _Scorer | None = None) -> SparseModel:
    """Drop features whose normalized importance |c_k|*||f_k|| is below
    `threshold`, refit, and repeat.  The top-scoring feature always survives."""
    if model.is_zero:
        return model
    sc = scorer or _Scorer(system)
    support = list(model.support)
    coef = np.asarray(model.coefficients, dtype=float)
    while len(support) > 1:
        scores = np.abs(coef) * sc.norms[support]
        scores = scores / scores.max() if scores.max() > 0 else scores
        keep = [s for s, sc_i in zip(support, scores) if sc_i >= threshold]
        if not keep:
            keep = [support[int(np.argmax(scores))]]
        if len(keep) == len(support):
            break
        support = keep
        coef = sc.fit_unnormalized(support)
    return SparseModel(tuple(support), coef)


def cee(system: FeatureSystem, support, scorer: _Scorer | None = None) -> CEEReport:
    """Cross-validation estimation error over the even/odd time-slice split."""
    support = sorted(int(i) for i in support)
    sc = scorer or _Scorer(system)
    n1, n2 = sc.halves[0][3], sc.halves[1][3]
    if not support:
        # Zero model: prediction is identically zero on both halves.
        return CEEReport(sc.yy, (n1, n2), ZERO_MODEL)
    if min(n1, n2) < len(support):
        raise ValueError("a CEE half-split is smaller than the support")
    model = SparseModel(tuple(support), sc.fit_unnormalized(support))
    return CEEReport(sc.cee(support), (n1, n2), model)


def identify(system: FeatureSystem, k_max: int = 8,
             trim_threshold: float = 0.05) -> tuple[SparseModel, CEEReport]:
    """Best model over sparsity levels 1..k_max by minimum CEE.

    Ties break toward smaller sparsity; a zero response selects the zero
    model outright.
    """
    sc = _Scorer(system)
    if sc.yy == 0.0:
        return ZERO_MODEL, CEEReport(0.0, (sc.halves[0][3], sc.halves[1][3]),
                                     ZERO_MODEL)
    k_cap = min(k_max, int(np.sum(sc.usable)),
                (system.n_rows - 1) // 2, N_FEATURES)
    best: tuple[SparseModel, CEEReport] | None = None
    seen: dict[tuple[int, ...], float] = {}
    for k in range(1, k_cap + 1):
        model = trim(system, subspace_pursuit(system, k, sc), trim_threshold, sc)
        key = model.support
        if key in seen:
            continue
        report = cee(system, key, sc)
        seen[key] = report.value
        if best is None or report.value < best[1].value or (
            report.value == best[1].value
            and model.sparsity < best[0].sparsity
        ):
            best = (model, report)
    assert best is not None
    return best
