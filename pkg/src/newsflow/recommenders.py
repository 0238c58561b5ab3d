"""The four slate strategies behind one per-turn interface.

Each strategy builds its per-turn snapshot in `begin_turn` (profiles, user
similarities) before any user selects, then answers `individual` queries as a
pure function of that snapshot, so the per-user order never matters.

`recommend_content`, `recommend_collaborative`, `recommend_nonrec` and
`recommend_all` are the direct, standalone forms of the same rules; the
engine classes are their vectorized equivalents.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .core import RngStream, normalize, simpson
from .simengine import SCENARIOS, ArticlePool, UserAgent, World

__all__ = [
    "Recommender",
    "ContentBaseRecommender",
    "CollaborativeRecommender",
    "NonRecommendationRecommender",
    "AllRecommender",
    "make_recommender",
    "recommend_content",
    "recommend_collaborative",
    "recommend_nonrec",
    "recommend_all",
]

NONREC_ELITE_POOL = 100  # articles kept by elite pre-selection from today's batch


def top_k_ranked(ids: np.ndarray, scores: np.ndarray, days: np.ndarray, k: int) -> np.ndarray:
    """Top-k ids by score descending; ties broken by newer day, then lower id."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0 or k <= 0:
        return np.empty(0, dtype=np.int64)
    if ids.size > k:
        # restrict the exact sort to the score boundary
        kth = np.partition(scores, ids.size - k)[ids.size - k]
        sel = np.flatnonzero(scores >= kth)
    else:
        sel = np.arange(ids.size)
    order = np.lexsort((ids[sel], -days[sel], -scores[sel]))
    return ids[sel[order[:k]]]


def _unread_window_mask(pool: ArticlePool, user: UserAgent) -> np.ndarray:
    mask = np.ones(len(pool), dtype=bool)
    hist = user.read_ids()
    in_window = hist[hist >= pool.start]
    mask[in_window - pool.start] = False
    return mask


def _uniform_unread(pool: ArticlePool, user: UserAgent, rng: RngStream, k: int,
                    exclude: np.ndarray | None = None) -> np.ndarray:
    """Uniform sample of unread pool articles (cold start / backfill)."""
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    cand = pool.ids[_unread_window_mask(pool, user)]
    if exclude is not None and exclude.size:
        cand = np.setdiff1d(cand, exclude, assume_unique=True)
    if cand.size == 0:
        return np.empty(0, dtype=np.int64)
    pick = rng.choice(cand, size=min(k, cand.size), replace=False)
    return np.asarray(pick, dtype=np.int64)


class Recommender:
    """Per-turn strategy interface used by the engine."""

    kind = ""

    def begin_turn(self, world: World) -> None:
        pass

    def individual(self, world: World, user: UserAgent, rng: RngStream,
                   k: int) -> np.ndarray:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# content-based recommendation
# ---------------------------------------------------------------------------

def recommend_content(user: UserAgent, pool: ArticlePool, k: int = 50,
                      rng: RngStream | None = None) -> np.ndarray:
    """Rank unread pool articles by similarity to the user's reading profile.

    The profile is the plain sum of every topic vector the user has read.
    An empty history falls back to a uniform random unread sample.
    """
    hist = user.read_ids()
    if hist.size == 0:
        if rng is None:
            raise ValueError("cold-start fallback needs an rng")
        return _uniform_unread(pool, user, rng, k)
    profile = normalize(pool.topics[hist].sum(axis=0))
    mask = _unread_window_mask(pool, user)
    scores = pool.window_topics[mask] @ profile
    return top_k_ranked(pool.ids[mask], scores, pool.window_days[mask], k)


class ContentBaseRecommender(Recommender):
    kind = "ContentBase"

    def __init__(self):
        self._profiles = None
        self._scores = None
        self._has_history = None
        self._cursor = 0

    def begin_turn(self, world: World) -> None:
        n = len(world.users)
        if self._profiles is None:
            self._profiles = np.zeros((n, world.config.n_categories))
        users, articles, self._cursor = world.read_events_since(self._cursor)
        if users.size:
            np.add.at(self._profiles, users, world.pool.topics[articles])
        sums = self._profiles.sum(axis=1)
        self._has_history = sums > 0.0
        normed = np.where(self._has_history[:, None],
                          self._profiles / np.where(sums > 0.0, sums, 1.0)[:, None], 0.0)
        self._scores = normed @ world.pool.window_topics.T

    def individual(self, world, user, rng, k):
        if not self._has_history[user.id]:
            return _uniform_unread(world.pool, user, rng, k)
        pool = world.pool
        mask = _unread_window_mask(pool, user)
        return top_k_ranked(pool.ids[mask], self._scores[user.id][mask],
                            pool.window_days[mask], k)


# ---------------------------------------------------------------------------
# collaborative filtering
# ---------------------------------------------------------------------------

def recommend_collaborative(user: UserAgent, users: list, pool: ArticlePool,
                            n: int = 20, k: int = 50,
                            rng: RngStream | None = None) -> np.ndarray:
    """Recommend unread articles most read by the n most similar users.

    Similarity is the Simpson overlap of full browsed-article sets; users with
    empty histories never count as neighbors. Candidates are ranked by how
    many neighbors read them; a shortfall is backfilled uniformly at random.
    """
    mine = set(user.read_ids().tolist())
    sims = []
    for other in users:
        if other.id == user.id or other.read_count == 0:
            continue
        sims.append((-simpson(mine, set(other.read_ids().tolist())), other.id))
    sims.sort()
    neighbor_ids = [uid for _, uid in sims[:n]]

    by_id = {u.id: u for u in users}
    counts: dict[int, int] = {}
    start = pool.start
    for nid in neighbor_ids:
        for aid in by_id[nid].read_ids():
            if aid >= start:
                counts[int(aid)] = counts.get(int(aid), 0) + 1
    unread = {int(a) for a in pool.ids[_unread_window_mask(pool, user)]}
    cand = np.asarray(sorted(a for a in counts if a in unread), dtype=np.int64)
    picked = top_k_ranked(cand, np.asarray([float(counts[a]) for a in cand]),
                          pool.days[cand] if cand.size else np.empty(0), k)
    if picked.size < k and rng is not None:
        extra = _uniform_unread(pool, user, rng, k - picked.size, exclude=picked)
        picked = np.concatenate([picked, extra])
    return picked


class CollaborativeRecommender(Recommender):
    kind = "Collaborative"

    def __init__(self):
        self._inter = None          # pairwise co-read counts
        self._sizes = None
        self._R = None              # user x article read incidence
        self._neighbors = None
        self._hist_snap = None
        self._cursor = 0

    def begin_turn(self, world: World) -> None:
        n = len(world.users)
        n_articles_cap = world.pool._topics.shape[0]
        if self._inter is None:
            self._inter = np.zeros((n, n), dtype=np.int32)
            self._sizes = np.zeros(n, dtype=np.int64)
            self._R = sp.csr_matrix((n, n_articles_cap), dtype=np.int32)
        elif self._R.shape[1] < n_articles_cap:
            self._R.resize((n, n_articles_cap))

        users, articles, self._cursor = world.read_events_since(self._cursor)
        if users.size:
            delta = sp.csr_matrix(
                (np.ones(users.size, dtype=np.int32), (users, articles)),
                shape=self._R.shape)
            self._inter += (self._R @ delta.T + delta @ self._R.T
                            + delta @ delta.T).toarray()
            self._R = self._R + delta
            self._sizes += np.bincount(users, minlength=n)

        mn = np.minimum.outer(self._sizes, self._sizes).astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            sims = np.where(mn > 0, self._inter / np.where(mn > 0, mn, 1.0), 0.0)
        sims[:, self._sizes == 0] = -1.0    # empty histories are not neighbors
        np.fill_diagonal(sims, -1.0)

        n_nbr = world.config.cf_neighbors
        self._neighbors = []
        for u in range(n):
            row = sims[u]
            valid = np.flatnonzero(row >= 0.0)
            if valid.size == 0:
                self._neighbors.append(np.empty(0, dtype=np.int64))
                continue
            take = min(n_nbr, valid.size)
            if valid.size > take:
                vals = row[valid]
                kth = np.partition(vals, valid.size - take)[valid.size - take]
                valid = valid[vals >= kth]
            order = np.lexsort((valid, -row[valid]))
            self._neighbors.append(valid[order[:take]].astype(np.int64))

        # history snapshot: views are stable against appends made this turn
        self._hist_snap = [u.read_ids() for u in world.users]

    def individual(self, world, user, rng, k):
        pool = world.pool
        nbrs = self._neighbors[user.id]
        picked = np.empty(0, dtype=np.int64)
        if nbrs.size:
            read_lists = [self._hist_snap[v] for v in nbrs if self._hist_snap[v].size]
            if read_lists:
                ids = np.concatenate(read_lists)
                ids = ids[ids >= pool.start]
                if ids.size:
                    counts = np.bincount(ids - pool.start, minlength=len(pool))
                    cand_mask = (counts > 0) & _unread_window_mask(pool, user)
                    slots = np.flatnonzero(cand_mask)
                    picked = top_k_ranked(slots + pool.start, counts[slots].astype(np.float64),
                                          pool.window_days[slots], k)
        if picked.size < k:
            extra = _uniform_unread(pool, user, rng, k - picked.size, exclude=picked)
            picked = np.concatenate([picked, extra])
        return picked


# ---------------------------------------------------------------------------
# non-recommendation (elite from today's batch, then random)
# ---------------------------------------------------------------------------

def recommend_nonrec(user: UserAgent, pool: ArticlePool, todays_ids: np.ndarray,
                     rng: RngStream, k: int = 50,
                     elite_pool: int = NONREC_ELITE_POOL) -> np.ndarray:
    """Sample k articles uniformly from the user's elite top of today's batch."""
    todays_ids = np.asarray(todays_ids, dtype=np.int64)
    if todays_ids.size == 0:
        return np.empty(0, dtype=np.int64)
    scores = pool.topics[todays_ids] @ user.interest
    top = top_k_ranked(todays_ids, scores, pool.days[todays_ids],
                       min(elite_pool, todays_ids.size))
    pick = rng.choice(top, size=min(k, top.size), replace=False)
    return np.asarray(pick, dtype=np.int64)


class NonRecommendationRecommender(Recommender):
    kind = "NonRecommendation"

    def __init__(self):
        self._todays = None
        self._scores = None

    def begin_turn(self, world: World) -> None:
        if world.todays_articles is None:
            raise ValueError("spawn_articles must run before begin_turn")
        self._todays = world.todays_articles
        interests = np.stack([u.interest for u in world.users])
        self._scores = interests @ world.pool.topics[self._todays].T

    def individual(self, world, user, rng, k):
        todays = self._todays
        top = top_k_ranked(todays, self._scores[user.id],
                           world.pool.days[todays],
                           min(NONREC_ELITE_POOL, todays.size))
        pick = rng.choice(top, size=min(k, top.size), replace=False)
        return np.asarray(pick, dtype=np.int64)


# ---------------------------------------------------------------------------
# full-pool presentation
# ---------------------------------------------------------------------------

def recommend_all(pool: ArticlePool) -> np.ndarray:
    """The whole candidate pool; slate assembly skips the shared-top union."""
    return pool.ids


class AllRecommender(Recommender):
    kind = "All"

    def individual(self, world, user, rng, k):
        return recommend_all(world.pool)


_KINDS = {
    "contentbase": ContentBaseRecommender,
    "collaborative": CollaborativeRecommender,
    "nonrecommendation": NonRecommendationRecommender,
    "all": AllRecommender,
}


def make_recommender(kind: str) -> Recommender:
    try:
        return _KINDS[kind.replace("-", "").replace("_", "").lower()]()
    except KeyError:
        raise ValueError(f"unknown recommender {kind!r}; expected one of {SCENARIOS}") from None
