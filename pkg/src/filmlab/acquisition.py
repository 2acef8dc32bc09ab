"""Hypervolume, noisy expected hypervolume improvement, and batch
candidate selection over the parameter box.

Hypervolume is exact (sort-and-sweep in 2-D, a dimension sweep with a
2-D staircase in 3-D). The acquisition is a Monte-Carlo estimate of the
noisy expected hypervolume improvement: per draw, the observed outcomes
are re-sampled from the GP posterior, and per-draw improvements are
aggregated through a log-space smoothing (see `_softplus`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import CanonicalObjectives, ParameterSet, ParameterBounds, ReferencePoint
from .gp import GpModel, posterior_sample, predict

_INF = np.inf


@dataclass(frozen=True)
class HypervolumeProblem:
    front: list
    ref: ReferencePoint

    @property
    def m(self) -> int:
        return len(self.ref.values)


@dataclass(frozen=True)
class AcquisitionConfig:
    mc_samples: int = 128
    candidate_pool: int = 2048
    refine_top: int = 32
    refine_iters: int = 50
    tau: float = 1e-3
    q: int = 10
    min_distance: float = 1e-3  # normalized pairwise distinctness
    seed: int = 0

    def __post_init__(self):
        if self.mc_samples < 16:
            raise ValueError("mc_samples must be >= 16")
        if self.q < 1:
            raise ValueError("q must be >= 1")


def _as_matrix(front) -> np.ndarray:
    if isinstance(front, np.ndarray):
        return np.atleast_2d(front.astype(float))
    rows = [p.as_array() if isinstance(p, CanonicalObjectives)
            else np.asarray(p, dtype=float) for p in front]
    return np.atleast_2d(np.vstack(rows)) if rows else np.empty((0, 0))


def _insert_nondominated(F: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Add one point to an already non-dominated set, keeping it so."""
    if F.shape[0] and np.any(np.all(F >= z, axis=1) & np.any(F > z, axis=1)):
        return F
    keep = ~(np.all(z >= F, axis=1) & np.any(z > F, axis=1)) if F.shape[0] \
        else np.zeros(0, dtype=bool)
    return np.vstack([F[keep], z[None, :]])


def _nondominated(F: np.ndarray) -> np.ndarray:
    """Rows of F not dominated by any other row (maximization)."""
    n = F.shape[0]
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        if not keep[i]:
            continue
        ge = np.all(F >= F[i], axis=1)
        gt = np.any(F > F[i], axis=1)
        if np.any(ge & gt):
            keep[i] = False
    return F[keep]


def _hv2(F: np.ndarray, r: np.ndarray) -> float:
    F = np.maximum(F, r)
    F = _nondominated(F)
    order = np.argsort(-F[:, 0], kind="stable")
    F = F[order]
    vol, y_prev = 0.0, r[1]
    for x, y in F:
        if y > y_prev:
            vol += (x - r[0]) * (y - y_prev)
            y_prev = y
    return vol


def _hv3(F: np.ndarray, r: np.ndarray) -> float:
    F = np.maximum(F, r)
    F = _nondominated(F)
    order = np.lexsort((F[:, 0], F[:, 1], -F[:, 2]))
    F = F[order]
    vol = 0.0
    archive: list[np.ndarray] = []
    prev_z = None
    i, n = 0, F.shape[0]
    while i < n:
        z = F[i, 2]
        if prev_z is not None and archive:
            vol += _hv2(np.vstack(archive), r[:2]) * (prev_z - z)
        while i < n and F[i, 2] == z:
            archive.append(F[i, :2])
            i += 1
        prev_z = z
    if archive and prev_z is not None:
        vol += _hv2(np.vstack(archive), r[:2]) * (prev_z - r[2])
    return vol


def hypervolume(front, ref) -> float:
    """Exact hypervolume of `front` relative to `ref` (maximization).

    Points that do not dominate the reference point contribute zero.
    """
    r = ref.as_array() if isinstance(ref, ReferencePoint) else np.asarray(ref, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("reference point must be finite")
    F = _as_matrix(front)
    if F.size == 0:
        return 0.0
    if F.shape[1] != r.shape[0]:
        raise ValueError("front and reference point dimension mismatch")
    m = r.shape[0]
    if m == 2:
        return _hv2(F, r)
    if m == 3:
        return _hv3(F, r)
    raise ValueError(f"hypervolume supports 2 or 3 objectives, got {m}")


def hypervolume_problem(p: HypervolumeProblem) -> float:
    return hypervolume(p.front, p.ref)


# ---------------------------------------------------------------------------
# Box decomposition of the region not dominated by a front (above ref).
# Improvement of a point z then reduces to sums of clipped box volumes,
# which vectorizes over large candidate pools.

def _staircase_boxes_2d(F: np.ndarray, r: np.ndarray):
    """Disjoint boxes covering {y >= r} \\ dominated(F) for m=2."""
    F = np.maximum(F, r)
    F = _nondominated(F)
    order = np.argsort(-F[:, 0], kind="stable")
    F = F[order]
    L, U = [], []
    if F.shape[0] == 0:
        return [np.array([r[0], r[1]])], [np.array([_INF, _INF])]
    L.append(np.array([F[0, 0], r[1]]))
    U.append(np.array([_INF, _INF]))
    k = F.shape[0]
    for j in range(k):
        x_lo = F[j + 1, 0] if j + 1 < k else r[0]
        L.append(np.array([x_lo, F[j, 1]]))
        U.append(np.array([F[j, 0], _INF]))
    return L, U


def nondominated_boxes(F: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Decompose the non-dominated region into disjoint boxes (L, U).

    Returns lower and upper corners, shape (nb, m); upper corners may be
    +inf. A candidate z improves the front by
    sum_j prod_k max(0, min(z_k, U_jk) - L_jk).
    """
    m = r.shape[0]
    F = _nondominated(np.maximum(np.atleast_2d(F), r)) if F.size else np.empty((0, m))
    if m == 2:
        L, U = _staircase_boxes_2d(F, r)
        return np.vstack(L), np.vstack(U)
    if m != 3:
        raise ValueError("box decomposition supports 2 or 3 objectives")
    if F.shape[0] == 0:
        return r[None, :].copy(), np.full((1, 3), _INF)
    order = np.argsort(-F[:, 2], kind="stable")
    F = F[order]
    zs = F[:, 2]
    Ls, Us = [], []
    # layer above the topmost point: nothing dominated there
    Ls.append((r[0], r[1], zs[0]))
    Us.append((_INF, _INF, _INF))
    k = F.shape[0]
    stair: list[tuple[float, float]] = []  # 2-D staircase, x desc / y asc
    for t in range(k):
        x, y = F[t, 0], F[t, 1]
        if not any(sx >= x and sy >= y for sx, sy in stair):
            stair = [(sx, sy) for sx, sy in stair if not (sx <= x and sy <= y)]
            stair.append((x, y))
            stair.sort(key=lambda s: -s[0])
        z_hi = zs[t]
        z_lo = zs[t + 1] if t + 1 < k else r[2]
        if z_lo >= z_hi:  # tie or clipped layer: zero thickness
            continue
        Ls.append((stair[0][0], r[1], z_lo))
        Us.append((_INF, _INF, z_hi))
        for j, (sx, sy) in enumerate(stair):
            x_lo = stair[j + 1][0] if j + 1 < len(stair) else r[0]
            Ls.append((x_lo, sy, z_lo))
            Us.append((sx, _INF, z_hi))
    return np.array(Ls), np.array(Us)


def box_improvement(Z: np.ndarray, L: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Hypervolume gained by each candidate row of Z, given decomposition
    boxes (L, U) of the non-dominated region."""
    Z = np.atleast_2d(Z)
    edges = np.minimum(Z[:, None, :], U[None, :, :]) - L[None, :, :]
    np.maximum(edges, 0.0, out=edges)
    return edges.prod(axis=-1).sum(axis=-1)


try:  # compiled scoring kernel; the numpy path below is the reference
    import numba

    @numba.njit(parallel=True, fastmath=True, cache=True)
    def _score_kernel(Y, L, U, draw_of_box, tau):
        # Y: (S, n, m) candidate outcomes, (L, U): stacked boxes of all
        # draws, draw_of_box: owning draw per box. Returns per-candidate
        # mean over draws of the softplus-smoothed improvement.
        S, n, m = Y.shape
        B = L.shape[0]
        out = np.empty(n)
        for i in numba.prange(n):
            vals = np.zeros(S)
            for b in range(B):
                s = draw_of_box[b]
                prod = 1.0
                for k in range(m):
                    e = min(Y[s, i, k], U[b, k]) - L[b, k]
                    if e <= 0.0:
                        prod = 0.0
                        break
                    prod *= e
                vals[s] += prod
            acc = 0.0
            for s in range(S):
                v = vals[s]
                if v > 40.0 * tau:
                    acc += v
                else:
                    acc += tau * np.log1p(np.exp(v / tau))
            out[i] = acc / S
        return out
except ImportError:  # pragma: no cover
    _score_kernel = None


def _softplus(x: np.ndarray, tau: float) -> np.ndarray:
    """Log-space smoothing of max(x, 0).

    tau * log(exp(0/tau) + exp(x/tau)) = tau * log1p(exp(x/tau)):
    a log-sum-exp over {0, x} with temperature tau. For x >= 0 the bias
    over the exact value lies in (0, tau*log 2].
    """
    return tau * np.logaddexp(0.0, x / tau)


def _seed_for(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=tuple(key))


def _sample_fronts(models, observed_X, cfg, m):
    """Per-draw resampled observed outcomes: array (mc_samples, n_obs, m)."""
    draws = []
    for k, model in enumerate(models):
        s = posterior_sample(model, observed_X, cfg.mc_samples, _seed_for(cfg.seed, 1, k))
        draws.append(s)
    return np.stack(draws, axis=-1)


def nehvi(models, candidates, observed_X, ref, cfg: AcquisitionConfig) -> float:
    """Monte-Carlo noisy expected hypervolume improvement of a candidate
    batch, smoothed in log-space with temperature cfg.tau.

    Per draw the observed outcomes are re-sampled from the posterior and
    the candidate outcomes are drawn jointly across the batch; the
    improvement is HV(front U candidates) - HV(front).
    """
    r = ref.as_array() if isinstance(ref, ReferencePoint) else np.asarray(ref, dtype=float)
    m = r.shape[0]
    if len(models) != m:
        raise ValueError("one model per objective required")
    imp = nehvi_draws(models, candidates, observed_X, ref, cfg)
    return float(np.mean(_softplus(imp, cfg.tau)))


def nehvi_draws(models, candidates, observed_X, ref, cfg: AcquisitionConfig) -> np.ndarray:
    """Per-draw (unsmoothed) hypervolume improvements; mean is the plain
    MC estimate, spread gives the MC standard error."""
    r = ref.as_array() if isinstance(ref, ReferencePoint) else np.asarray(ref, dtype=float)
    m = r.shape[0]
    Xc = np.vstack([c.as_array() if isinstance(c, ParameterSet) else np.asarray(c, dtype=float)
                    for c in candidates])
    F_draws = _sample_fronts(models, observed_X, cfg, m)
    Z_draws = np.stack([posterior_sample(mod, Xc, cfg.mc_samples, _seed_for(cfg.seed, 2, k))
                        for k, mod in enumerate(models)], axis=-1)
    imp = np.empty(cfg.mc_samples)
    for s in range(cfg.mc_samples):
        base = hypervolume(F_draws[s], r)
        joint = hypervolume(np.vstack([F_draws[s], Z_draws[s]]), r)
        imp[s] = joint - base
    return imp


def initial_design(bounds: ParameterBounds, count: int, seed) -> list[ParameterSet]:
    """Latin-hypercube design: per dimension, `count` samples stratified
    into `count` equal bins. Deterministic per seed."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    d = 4
    U = np.empty((count, d))
    for j in range(d):
        perm = rng.permutation(count)
        U[:, j] = (perm + rng.uniform(size=count)) / count
    X = bounds.denormalize(U)
    return [ParameterSet.from_array(row) for row in X]


def _golden_refine(score_fn, P0: np.ndarray, iters: int) -> np.ndarray:
    """Coordinate-wise golden-section refinement of candidate rows in the
    unit cube; `iters` total interval shrinks split round-robin over the
    coordinates. score_fn maps (n, d) normalized rows to scores."""
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    P = P0.copy()
    n, d = P.shape
    per_coord = max(1, iters // d)
    for j in range(d):
        a = np.zeros(n)
        b = np.ones(n)
        for _ in range(per_coord):
            x1 = b - phi * (b - a)
            x2 = a + phi * (b - a)
            Pa = P.copy()
            Pa[:, j] = x1
            Pb = P.copy()
            Pb[:, j] = x2
            f = score_fn(np.vstack([Pa, Pb]))  # both probes, one call
            left = f[:n] >= f[n:]  # keep the better half (maximization)
            b[left] = x2[left]
            a[~left] = x1[~left]
        mid = 0.5 * (a + b)
        Pm = P.copy()
        Pm[:, j] = mid
        f = score_fn(np.vstack([Pm, P]))
        better = f[:n] >= f[n:]
        P[better, j] = mid[better]
    return P


class UntrainedModelError(ValueError):
    pass


def suggest_batch(models, bounds: ParameterBounds, ref, cfg: AcquisitionConfig) -> list[ParameterSet]:
    """Sequential-greedy batch of q candidates maximizing the noisy
    expected hypervolume improvement.

    Per greedy step the best pool candidate (random pool plus local
    golden-section refinement) is appended as a pending point: its
    per-draw sampled outcome joins each draw's front before the next
    step. Suggestions are pairwise distinct (normalized distance
    >= cfg.min_distance, enforced by rejection).
    """
    if not models or any(mod.n < 1 for mod in models):
        raise UntrainedModelError("suggest_batch requires trained models")
    r = ref.as_array() if isinstance(ref, ReferencePoint) else np.asarray(ref, dtype=float)
    m = r.shape[0]
    if len(models) != m:
        raise ValueError("one model per objective required")
    lo, hi = bounds.as_arrays()
    if np.any(hi <= lo):
        raise ValueError("infeasible bounds")
    d = lo.shape[0]
    S = cfg.mc_samples

    observed_X = bounds.denormalize(models[0].X) if models[0].bounds_lo is not None else models[0].X
    F_draws = _sample_fronts(models, observed_X, cfg, m)  # (S, n_obs, m)
    fronts = [_nondominated(F_draws[s]) for s in range(S)]
    boxes = [nondominated_boxes(fronts[s], r) for s in range(S)]

    rng = np.random.default_rng(_seed_for(cfg.seed, 3))
    # common random numbers: one outcome perturbation per (draw, objective),
    # shared across candidates so pool comparisons are low-variance
    zeta = rng.standard_normal((S, m))

    def outcomes(U):  # (n, d) normalized -> (S, n, m) sampled outcomes
        X = bounds.denormalize(U)
        mu = np.empty((U.shape[0], m))
        sd = np.empty((U.shape[0], m))
        for k, mod in enumerate(models):
            mean, var = predict(mod, X)
            mu[:, k] = mean
            sd[:, k] = np.sqrt(var)
        return mu[None, :, :] + sd[None, :, :] * zeta[:, None, :]

    def flatten_boxes():
        # stack all draws' boxes so candidate scoring is one tensor op
        L_all = np.vstack([b[0] for b in boxes])
        U_all = np.vstack([b[1] for b in boxes])
        counts = np.array([b[0].shape[0] for b in boxes])
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        return L_all, U_all, starts

    box_cache = {}

    def scores(U, chunk=256):
        Y = outcomes(U)  # (S, n, m)
        if "flat" not in box_cache:
            L_all, U_all, starts = flatten_boxes()
            # box j belongs to the draw whose slice of the stack contains it
            draw_of_box = np.searchsorted(starts, np.arange(L_all.shape[0]),
                                          side="right") - 1
            box_cache["flat"] = (L_all, U_all, starts, draw_of_box)
        L_all, U_all, starts, draw_of_box = box_cache["flat"]
        if _score_kernel is not None:
            return _score_kernel(np.ascontiguousarray(Y), L_all, U_all,
                                 draw_of_box, cfg.tau)
        n = U.shape[0]
        out = np.empty(n)
        for c0 in range(0, n, chunk):
            c1 = min(c0 + chunk, n)
            Yc = Y[:, c0:c1, :][draw_of_box]  # (total_boxes, nc, m)
            edges = np.minimum(Yc, U_all[:, None, :]) - L_all[:, None, :]
            np.maximum(edges, 0.0, out=edges)
            prod = edges.prod(axis=-1)  # (total_boxes, nc)
            vals = np.add.reduceat(prod, starts, axis=0)  # (S, nc)
            out[c0:c1] = np.mean(_softplus(vals, cfg.tau), axis=0)
        return out

    chosen: list[np.ndarray] = []
    for _ in range(cfg.q):
        pool = rng.uniform(size=(cfg.candidate_pool, d))
        sc = scores(pool)
        top = np.argsort(-sc, kind="stable")[: cfg.refine_top]
        refined = _golden_refine(scores, pool[top], cfg.refine_iters)
        allU = np.vstack([pool, refined])
        allsc = np.concatenate([sc, scores(refined)])
        order = np.argsort(-allsc, kind="stable")
        pick = None
        for idx in order:
            u = allU[idx]
            if all(np.linalg.norm(u - c) >= cfg.min_distance for c in chosen):
                pick = u
                break
        if pick is None:  # pool exhausted by rejection; fall back to random
            while pick is None:
                u = rng.uniform(size=d)
                if all(np.linalg.norm(u - c) >= cfg.min_distance for c in chosen):
                    pick = u
        chosen.append(pick)
        # absorb the pick as a pending point in every draw's front
        Yp = outcomes(pick[None, :])  # (S, 1, m)
        for s in range(S):
            fronts[s] = _insert_nondominated(fronts[s], Yp[s, 0])
            boxes[s] = nondominated_boxes(fronts[s], r)
        box_cache.clear()
    X = bounds.denormalize(np.vstack(chosen))
    return [ParameterSet.from_array(row) for row in X]
