"""Best-subset selection by iterative splicing, with storm-level cross-validation.

The l0-constrained least-squares problem is attacked with a splicing
search: maintain an active set of size k, rank active terms by backward
sacrifice (loss increase from dropping them) and inactive terms by
forward sacrifice (squared residual correlation), and exchange the s
worst active for the s best inactive, s = k down to 1, accepting the
first exchange that reduces the loss beyond a relative threshold of
1e-8.  Columns are standardized to unit length for sacrifice
comparisons; reported coefficients are refit on the raw columns.

Because the polynomial feature library is heavily multicollinear, a
single splicing run from a marginal-correlation start can stall in a
local minimum.  The search therefore warm-starts along the sparsity path
(k = 1, 2, ...), keeps a small beam of candidate supports per level,
finishes each level with single-exchange polish sweeps, and adds seeded
perturbation restarts.  All of it runs against the precomputed Gram
matrix, so each candidate fit is a k-by-k solve regardless of row count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .sindy import RegressionSystem

SPLICE_REL_TOL = 1e-8


class _GramSystem:
    """Standardized-column Gram view of a regression system."""

    def __init__(self, design: np.ndarray, response: np.ndarray):
        norms = np.linalg.norm(design, axis=0)
        norms[norms == 0] = 1.0
        self.norms = norms
        ds = design / norms
        self.gram = ds.T @ ds
        self.corr = ds.T @ response
        self.total_ss = float(response @ response)
        self.p = design.shape[1]

    def fit(self, support) -> tuple[float, np.ndarray, np.ndarray]:
        """OLS on a support; returns (loss, sorted indices, std coefficients)."""
        idx = np.array(sorted(support), dtype=np.int64)
        g = self.gram[np.ix_(idx, idx)]
        b = self.corr[idx]
        try:
            coef = np.linalg.solve(g, b)
        except np.linalg.LinAlgError:
            coef, *_ = np.linalg.lstsq(g, b, rcond=None)
        return max(self.total_ss - float(b @ coef), 0.0), idx, coef

    def residual_corr(self, idx: np.ndarray, coef: np.ndarray) -> np.ndarray:
        return self.corr - self.gram[:, idx] @ coef


def _splice(gs: _GramSystem, active, k: int, max_iter: int = 100):
    """Spec splicing loop from a given active set; returns (support, loss)."""
    loss, idx, coef = gs.fit(active)
    for _ in range(max_iter):
        improved = False
        backward = coef ** 2                      # unit-norm columns
        forward = gs.residual_corr(idx, coef) ** 2
        forward[idx] = -np.inf
        worst_first = idx[np.argsort(backward)]
        best_first = np.argsort(forward)[::-1]
        for s in range(min(k, gs.p - k), 0, -1):
            cand = (set(idx.tolist()) - set(worst_first[:s].tolist())) \
                | set(int(i) for i in best_first[:s])
            if len(cand) != k:
                continue
            l2, i2, c2 = gs.fit(cand)
            if l2 < loss * (1.0 - SPLICE_REL_TOL):
                loss, idx, coef = l2, i2, c2
                improved = True
                break
        if not improved:
            break
    return set(idx.tolist()), loss


def _polish(gs: _GramSystem, support, loss: float, max_sweeps: int = 8):
    """Exhaustive single-exchange sweeps until no swap improves."""
    cur = set(support)
    for _ in range(max_sweeps):
        best, best_loss = None, loss
        for j in sorted(cur):
            without = cur - {j}
            for i in range(gs.p):
                if i in cur:
                    continue
                l2, *_ = gs.fit(without | {i})
                if l2 < best_loss * (1.0 - 1e-10):
                    best_loss, best = l2, without | {i}
        if best is None:
            return cur, loss
        cur, loss = best, best_loss
    return cur, loss


def _omp_start(gs: _GramSystem, k: int):
    active: set[int] = set()
    idx = np.array([], dtype=np.int64)
    coef = np.array([])
    for _ in range(k):
        fwd = (gs.residual_corr(idx, coef) if active else gs.corr) ** 2
        fwd[sorted(active)] = -np.inf
        active.add(int(np.argmax(fwd)))
        _, idx, coef = gs.fit(active)
    return active


def _restarts(gs: _GramSystem, k: int, best, best_loss, rng, n_restarts: int):
    for t in range(n_restarts):
        if k >= 2 and t % 3 == 2:
            cand = set(rng.choice(gs.p, size=k, replace=False).tolist())
        else:
            cur = set(best)
            r = int(rng.integers(1, min(4, k) + 1))
            drop = rng.choice(sorted(cur), size=r, replace=False)
            pool = [i for i in range(gs.p) if i not in cur]
            if len(pool) < r:
                continue
            add = rng.choice(pool, size=r, replace=False)
            cand = (cur - set(int(j) for j in drop)) | set(int(i) for i in add)
        sup, _ = _splice(gs, cand, k)
        sup, loss = _polish(gs, sup, gs.fit(sup)[0])
        if loss < best_loss * (1.0 - 1e-10):
            best, best_loss = sup, loss
    return best, best_loss


def _path_search(gs: _GramSystem, k_max: int, seed: int,
                 beam: int = 6, forward_candidates: int = 4,
                 restarts_per_level: int = 0, final_restarts: int = 120):
    """Warm-started beam search along k = 1..k_max.

    Returns {k: (support set, standardized loss)} with loss non-increasing
    in k (each level contains an extension of the previous level's best).
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(11,)))
    results: dict[int, tuple[set, float]] = {}
    order = np.argsort(gs.corr ** 2)[::-1]
    frontier = []
    seen = set()
    for i in order[: max(beam, 1)]:
        sup, loss = _polish(gs, {int(i)}, gs.fit({int(i)})[0])
        key = tuple(sorted(sup))
        if key not in seen:
            seen.add(key)
            frontier.append((loss, sup))
    frontier.sort(key=lambda t: t[0])
    frontier = frontier[:beam]
    results[1] = (frontier[0][1], frontier[0][0])

    for k in range(2, k_max + 1):
        level, seen_k = [], set()
        for _, sup in frontier:
            _, idx, coef = gs.fit(sup)
            fwd = gs.residual_corr(idx, coef) ** 2
            fwd[idx] = -np.inf
            for i in np.argsort(fwd)[::-1][:forward_candidates]:
                cand = set(sup) | {int(i)}
                s2, _ = _splice(gs, cand, k)
                s2, l2 = _polish(gs, s2, gs.fit(s2)[0])
                key = tuple(sorted(s2))
                if key not in seen_k:
                    seen_k.add(key)
                    level.append((l2, s2))
        if k == gs.p:
            full = set(range(gs.p))
            level = [(gs.fit(full)[0], full)]
        level.sort(key=lambda t: t[0])
        best_loss, best = level[0]
        n_extra = final_restarts if k == k_max else restarts_per_level
        if n_extra and k < gs.p:
            best, best_loss = _restarts(gs, k, best, best_loss, rng, n_extra)
            level.insert(0, (best_loss, best))
        results[k] = (best, best_loss)
        frontier = level[:beam]
    # classic starts at the final level, for good measure
    if k_max < gs.p:
        best, best_loss = results[k_max]
        for start in (set(int(i) for i in order[:k_max]), _omp_start(gs, k_max)):
            sup, _ = _splice(gs, start, k_max)
            sup, loss = _polish(gs, sup, gs.fit(sup)[0])
            if loss < best_loss * (1.0 - 1e-10):
                best, best_loss = sup, loss
        results[k_max] = (best, best_loss)
    return results


def splice_select(system: RegressionSystem, k: int, seed: int = 0):
    """Best k-term support and raw-column OLS coefficients on that support.

    Deterministic given the seed (which drives only the perturbation
    restarts of the search).
    """
    p = len(system.basis)
    if not 1 <= k <= p:
        raise ValidationError(f"k={k} outside [1, {p}]")
    gs = _GramSystem(system.design, system.response)
    if k == p:
        support = np.arange(p)
    else:
        results = _path_search(gs, k, seed)
        support = np.array(sorted(results[k][0]), dtype=np.int64)
    coef, *_ = np.linalg.lstsq(system.design[:, support], system.response, rcond=None)
    return support, coef


@dataclass
class SparsityPathEntry:
    k: int
    support: np.ndarray          # term indices into the basis
    coefficients: np.ndarray     # raw-column OLS on the support
    train_loss: float            # mean squared error on all rows
    cv_mean: float
    cv_se: float
    fold_losses: np.ndarray


@dataclass
class SparsityPath:
    entries: list[SparsityPathEntry]

    def entry(self, k: int) -> SparsityPathEntry:
        for e in self.entries:
            if e.k == k:
                return e
        raise ValidationError(f"k={k} not on the path")

    def one_se_k(self) -> int:
        """Smallest k whose CV mean is within one SE of the best CV mean."""
        means = np.array([e.cv_mean for e in self.entries])
        best = int(np.argmin(means))
        cut = means[best] + self.entries[best].cv_se
        for e in self.entries:
            if e.cv_mean <= cut:
                return e.k
        return self.entries[best].k


def _fold_assignments(storm_ids: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    storms = np.unique(np.asarray(storm_ids, dtype=str))
    if len(storms) < folds:
        raise ValidationError(f"{len(storms)} storms cannot fill {folds} folds")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(23,)))
    perm = rng.permutation(len(storms))
    return [storms[part] for part in np.array_split(perm, folds)]


def cv_path(system: RegressionSystem, k_values, folds: int = 5, seed: int = 0,
            beam: int = 4, forward_candidates: int = 3,
            restarts_per_level: int = 20) -> SparsityPath:
    """Sparsity path with cross-validated loss, folds split by storm.

    Rows of one storm share windows, so folding by row would leak; whole
    storms are held out instead.  Deterministic given the seed.
    """
    if folds < 2:
        raise ValidationError("need at least 2 folds")
    k_values = sorted(set(int(k) for k in k_values))
    if k_values[0] < 1 or k_values[-1] > len(system.basis):
        raise ValidationError(f"k values outside [1, {len(system.basis)}]")
    k_max = k_values[-1]

    fold_storms = _fold_assignments(system.storm_ids, folds, seed)
    row_ids = np.asarray(system.storm_ids, dtype=str)
    fold_masks = [np.isin(row_ids, storms) for storms in fold_storms]

    # per-fold paths on the training complement, evaluated on the fold
    fold_losses = np.zeros((len(k_values), folds))
    for f, mask in enumerate(fold_masks):
        d_tr, c_tr = system.design[~mask], system.response[~mask]
        d_va, c_va = system.design[mask], system.response[mask]
        gs = _GramSystem(d_tr, c_tr)
        sols = _path_search(
            gs, k_max, seed + 1000 + f, beam=beam,
            forward_candidates=forward_candidates,
            restarts_per_level=restarts_per_level,
            final_restarts=restarts_per_level,
        )
        for ki, k in enumerate(k_values):
            sup = np.array(sorted(sols[k][0]), dtype=np.int64)
            coef, *_ = np.linalg.lstsq(d_tr[:, sup], c_tr, rcond=None)
            resid = c_va - d_va[:, sup] @ coef
            fold_losses[ki, f] = float(resid @ resid) / max(len(c_va), 1)

    # full-data path for the reported supports and training losses
    gs_full = _GramSystem(system.design, system.response)
    sols_full = _path_search(
        gs_full, k_max, seed, beam=beam,
        forward_candidates=forward_candidates,
        restarts_per_level=restarts_per_level,
        final_restarts=max(restarts_per_level, 60),
    )
    entries = []
    for ki, k in enumerate(k_values):
        sup = np.array(sorted(sols_full[k][0]), dtype=np.int64)
        coef, *_ = np.linalg.lstsq(system.design[:, sup], system.response, rcond=None)
        resid = system.response - system.design[:, sup] @ coef
        entries.append(
            SparsityPathEntry(
                k=k,
                support=sup,
                coefficients=coef,
                train_loss=float(resid @ resid) / system.n_rows,
                cv_mean=float(fold_losses[ki].mean()),
                cv_se=float(fold_losses[ki].std(ddof=1) / np.sqrt(folds)),
                fold_losses=fold_losses[ki].copy(),
            )
        )
    return SparsityPath(entries)
