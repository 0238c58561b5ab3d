"""World state and the daily turn procedure.

Each turn: new articles arrive, a shared top-50 plus per-user individual
articles form the slate, users pick reads by elite + roulette selection with
an evaluation threshold, and interests update from what was read.

Within a run turns are strictly sequential; inside a turn all per-turn
recommendation state is snapshotted before any user selects, and every user
owns a private RngStream, so per-user work is order-independent.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import RngStream, entropy_rows, normalize

SCENARIOS = ("ContentBase", "Collaborative", "NonRecommendation", "All")

__all__ = [
    "SCENARIOS",
    "SimConfig",
    "Article",
    "UserAgent",
    "ArticlePool",
    "World",
    "TurnRecord",
    "RunResult",
    "BatchResult",
    "init_world",
    "spawn_articles",
    "present_top",
    "assemble_slate",
    "select_articles",
    "update_interest",
    "step",
    "run",
    "run_batch",
]


@dataclass
class SimConfig:
    """Simulation parameters; defaults reproduce the reference setting."""

    turns: int = 45
    runs: int = 20
    n_users: int = 1000
    n_categories: int = 20
    pool_size: int = 5000
    articles_per_day: int = 1500
    presented_per_day: int = 100
    top_per_day: int = 50
    reads_per_day: int = 10
    elite_reads: int = 3
    cf_neighbors: int = 20
    th: float = 0.055
    w: float = 5.0
    r: float = 0.5
    recommender: str = "ContentBase"
    seed: int = 20170601
    max_failed_draws: int = 10
    random_mix: float = 0.0
    watch_category: int = 0
    article_topics: str = "dirichlet"
    article_alpha: float = 0.2
    update_gain: float = 0.05

    def validate(self):
        if self.n_categories < 2:
            raise ValueError("n_categories must be >= 2")
        if self.elite_reads > self.reads_per_day:
            raise ValueError("elite_reads must not exceed reads_per_day")
        if self.presented_per_day > self.pool_size:
            raise ValueError("presented_per_day must not exceed pool_size")
        if self.top_per_day > self.presented_per_day:
            raise ValueError("top_per_day must not exceed presented_per_day")
        if self.recommender not in SCENARIOS:
            raise ValueError(
                f"unknown recommender {self.recommender!r}; expected one of {SCENARIOS}"
            )
        for name in ("turns", "runs", "n_users", "pool_size", "articles_per_day",
                     "reads_per_day", "max_failed_draws"):
            if getattr(self, name) < (0 if name == "turns" else 1):
                raise ValueError(f"{name} must be positive")
        if self.elite_reads < 0:
            raise ValueError("elite_reads must be >= 0")
        if not 0.0 <= self.random_mix <= 1.0:
            raise ValueError("random_mix must be in [0, 1]")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError("r must be in [0, 1]")
        if self.th < 0.0 or self.w < 0.0:
            raise ValueError("th and w must be non-negative")
        if not 0 <= self.watch_category < self.n_categories:
            raise ValueError("watch_category out of range")
        if self.article_topics not in ("dirichlet", "onehot", "uniform"):
            raise ValueError("article_topics must be 'dirichlet', 'onehot' or 'uniform'")
        if self.article_alpha <= 0.0:
            raise ValueError("article_alpha must be positive")
        if self.update_gain <= 0.0:
            raise ValueError("update_gain must be positive")
        return self


@dataclass(frozen=True)
class Article:
    """Read-only view of one article; the topic vector never changes."""

    id: int
    published_day: int
    topic: np.ndarray
    readers: frozenset


class ArticlePool:
    """Append-only article archive exposing a rolling window of the newest
    `pool_size` articles.

    Topics of evicted articles stay addressable by id: interest profiles and
    interest updates need the topic of anything ever read. Rows are article
    ids, so ids are dense integers in creation order.
    """

    def __init__(self, pool_size: int, n_categories: int, capacity: int = 0):
        self.pool_size = pool_size
        self.n_categories = n_categories
        cap = max(capacity, pool_size, 1)
        self._topics = np.empty((cap, n_categories), dtype=np.float64)
        self._days = np.empty(cap, dtype=np.int64)
        self.n_articles = 0

    def __len__(self):
        return self.n_articles - self.start

    @property
    def start(self) -> int:
        """First article id still inside the rolling window."""
        return max(0, self.n_articles - self.pool_size)

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.start, self.n_articles, dtype=np.int64)

    @property
    def topics(self) -> np.ndarray:
        """Archive topic matrix; row index = article id."""
        return self._topics[: self.n_articles]

    @property
    def days(self) -> np.ndarray:
        return self._days[: self.n_articles]

    @property
    def window_topics(self) -> np.ndarray:
        return self._topics[self.start : self.n_articles]

    @property
    def window_days(self) -> np.ndarray:
        return self._days[self.start : self.n_articles]

    def append(self, topics: np.ndarray, day: int) -> np.ndarray:
        """Add articles published on `day`; returns their new ids."""
        topics = np.atleast_2d(np.asarray(topics, dtype=np.float64))
        n_new = topics.shape[0]
        need = self.n_articles + n_new
        if need > self._topics.shape[0]:
            cap = max(need, 2 * self._topics.shape[0])
            grown_t = np.empty((cap, self.n_categories), dtype=np.float64)
            grown_t[: self.n_articles] = self._topics[: self.n_articles]
            grown_d = np.empty(cap, dtype=np.int64)
            grown_d[: self.n_articles] = self._days[: self.n_articles]
            self._topics, self._days = grown_t, grown_d
        self._topics[self.n_articles : need] = topics
        self._days[self.n_articles : need] = day
        ids = np.arange(self.n_articles, need, dtype=np.int64)
        self.n_articles = need
        return ids


class UserAgent:
    """One simulated reader: a normalized interest vector plus full history."""

    __slots__ = ("id", "interest", "history", "reads_today", "_hist_ids", "_n_reads")

    def __init__(self, uid: int, interest: np.ndarray):
        self.id = uid
        self.interest = np.asarray(interest, dtype=np.float64)
        self.history: list[tuple[int, int]] = []
        self.reads_today: list[int] = []
        self._hist_ids = np.empty(64, dtype=np.int64)
        self._n_reads = 0

    @property
    def read_count(self) -> int:
        return self._n_reads

    def read_ids(self) -> np.ndarray:
        """Ids of every article this user has read, in read order."""
        return self._hist_ids[: self._n_reads]

    def record_reads(self, turn: int, article_ids) -> None:
        ids = np.asarray(article_ids, dtype=np.int64)
        self.reads_today = [int(a) for a in ids]
        for a in self.reads_today:
            self.history.append((turn, a))
        need = self._n_reads + ids.size
        if need > self._hist_ids.size:
            grown = np.empty(max(need, 2 * self._hist_ids.size), dtype=np.int64)
            grown[: self._n_reads] = self._hist_ids[: self._n_reads]
            self._hist_ids = grown
        self._hist_ids[self._n_reads : need] = ids
        self._n_reads = need


@dataclass
class TurnRecord:
    """Per-user metrics captured after the interest update of one turn."""

    day: int
    interest_entropy: np.ndarray
    argmax: np.ndarray
    watch_share: np.ndarray
    max_share: np.ndarray
    reads: int


@dataclass
class World:
    config: SimConfig
    day: int
    pool: ArticlePool
    users: list
    readers: list
    rng_world: RngStream
    rng_users: list
    records: list = field(default_factory=list)
    todays_top: Optional[np.ndarray] = None
    todays_articles: Optional[np.ndarray] = None
    _log_turn: list = field(default_factory=list)
    _log_user: list = field(default_factory=list)
    _log_article: list = field(default_factory=list)

    def article(self, aid: int) -> Article:
        topic = self.pool.topics[aid].copy()
        topic.flags.writeable = False
        return Article(int(aid), int(self.pool.days[aid]), topic,
                       frozenset(self.readers[aid]))

    def log_reads(self, uid: int, article_ids) -> None:
        for a in article_ids:
            self._log_turn.append(self.day)
            self._log_user.append(uid)
            self._log_article.append(int(a))

    def read_events_since(self, cursor: int):
        """New (user, article) read events after `cursor`; returns arrays and
        the advanced cursor. Recommenders use this to refresh per-turn state."""
        end = len(self._log_user)
        users = np.asarray(self._log_user[cursor:end], dtype=np.int64)
        articles = np.asarray(self._log_article[cursor:end], dtype=np.int64)
        return users, articles, end

    def read_log_array(self) -> np.ndarray:
        """(n_events, 3) array of turn, user id, article id."""
        return np.column_stack([
            np.asarray(self._log_turn, dtype=np.int64),
            np.asarray(self._log_user, dtype=np.int64),
            np.asarray(self._log_article, dtype=np.int64),
        ]) if self._log_user else np.empty((0, 3), dtype=np.int64)


def _normalized_uniform(rng: RngStream, shape) -> np.ndarray:
    """Rows drawn i.i.d. uniform(0,1), scaled to sum 1."""
    m = rng.uniform(0.0, 1.0, size=shape)
    sums = m.sum(axis=-1, keepdims=True)
    if np.any(sums <= 0.0):
        raise ValueError("degenerate uniform draw")
    return m / sums


def _article_topics(rng: RngStream, n: int, n_categories: int, mode: str,
                    alpha: float) -> np.ndarray:
    """Topic vectors for n new articles.

    "dirichlet": symmetric Dirichlet(alpha); alpha controls how concentrated
    article topics are, which in turn bounds how far interests can polarize.
    "onehot": a single uniformly drawn category per article (the alpha -> 0
    limit). "uniform": dense uniform-then-normalized vectors (every article
    then holds ~1/n of every category, which caps interest drift near the
    initial entropy).
    """
    if mode == "uniform":
        return _normalized_uniform(rng, (n, n_categories))
    if mode == "dirichlet":
        return rng.dirichlet(np.full(n_categories, alpha), size=n)
    topics = np.zeros((n, n_categories))
    topics[np.arange(n), rng.integers(0, n_categories, size=n)] = 1.0
    return topics


def world_stream_id(run_index: int) -> int:
    return run_index << 32


def user_stream_id(run_index: int, uid: int) -> int:
    return (run_index << 32) + uid + 1


def init_world(config: SimConfig, seed: Optional[int] = None, run_index: int = 0) -> World:
    """Fresh world: full article pool (all stamped day 0) and uniform-random
    normalized topics and interests; histories empty."""
    config.validate()
    seed = config.seed if seed is None else seed
    rng_world = RngStream(seed, world_stream_id(run_index))
    rng_users = [RngStream(seed, user_stream_id(run_index, u))
                 for u in range(config.n_users)]

    capacity = config.pool_size + config.turns * config.articles_per_day
    pool = ArticlePool(config.pool_size, config.n_categories, capacity)
    pool.append(_article_topics(rng_world, config.pool_size, config.n_categories,
                                config.article_topics, config.article_alpha), day=0)

    interests = _normalized_uniform(rng_world, (config.n_users, config.n_categories))
    users = [UserAgent(u, interests[u]) for u in range(config.n_users)]
    readers = [[] for _ in range(config.pool_size)]

    world = World(config=config, day=0, pool=pool, users=users, readers=readers,
                  rng_world=rng_world, rng_users=rng_users)
    world.records.append(_snapshot_record(world, reads=0))
    return world


def _snapshot_record(world: World, reads: int) -> TurnRecord:
    interests = np.stack([u.interest for u in world.users])
    return TurnRecord(
        day=world.day,
        interest_entropy=entropy_rows(interests),
        argmax=np.argmax(interests, axis=1).astype(np.int32),
        watch_share=interests[:, world.config.watch_category].copy(),
        max_share=interests.max(axis=1),
        reads=reads,
    )


def spawn_articles(world: World) -> World:
    """Append today's fresh articles; the rolling window drops the oldest."""
    cfg = world.config
    topics = _article_topics(world.rng_world, cfg.articles_per_day, cfg.n_categories,
                             cfg.article_topics, cfg.article_alpha)
    ids = world.pool.append(topics, day=world.day)
    world.readers.extend([] for _ in range(ids.size))
    world.todays_articles = ids
    return world


def present_top(world: World, rng: Optional[RngStream] = None) -> np.ndarray:
    """Shared top articles for this turn: uniform sample without replacement
    from the pool; every user sees the same list."""
    rng = world.rng_world if rng is None else rng
    ids = world.pool.ids
    if ids.size == 0:
        raise ValueError("article pool is empty")
    k = min(world.config.top_per_day, ids.size)
    world.todays_top = np.asarray(rng.choice(ids, size=k, replace=False), dtype=np.int64)
    return world.todays_top


def _uniform_sample(rng: RngStream, candidates: np.ndarray, k: int) -> np.ndarray:
    if k <= 0 or candidates.size == 0:
        return np.empty(0, dtype=np.int64)
    k = min(k, candidates.size)
    return np.asarray(rng.choice(candidates, size=k, replace=False), dtype=np.int64)


def assemble_slate(world: World, user: UserAgent, recommender, rng: RngStream) -> np.ndarray:
    """Union of the shared top articles and the strategy's individual picks,
    deduplicated and backfilled to `presented_per_day` distinct articles.

    Under the full-pool strategy the slate is simply the entire pool.
    """
    cfg = world.config
    if recommender.kind == "All":
        return world.pool.ids

    if world.todays_top is None:
        raise ValueError("present_top must run before slates are assembled")
    top = world.todays_top
    k_ind = cfg.presented_per_day - top.size
    n_random = int(round(cfg.random_mix * k_ind))
    parts = [top]
    if k_ind - n_random > 0:
        parts.append(recommender.individual(world, user, rng, k_ind - n_random))
    slate = np.unique(np.concatenate(parts))
    if n_random > 0:
        extra = _uniform_sample(rng, np.setdiff1d(world.pool.ids, slate, assume_unique=True),
                                n_random)
        slate = np.unique(np.concatenate([slate, extra]))
    shortfall = cfg.presented_per_day - slate.size
    if shortfall > 0:
        backfill = _uniform_sample(rng, np.setdiff1d(world.pool.ids, slate, assume_unique=True),
                                   shortfall)
        slate = np.unique(np.concatenate([slate, backfill]))
    return slate


def select_articles(world: World, user: UserAgent, slate: np.ndarray,
                    rng: RngStream) -> np.ndarray:
    """Pick today's reads from the slate.

    Candidates are the slate minus everything the user ever read. The elite
    phase takes the top `elite_reads` candidates at or above the threshold;
    the roulette phase draws the rest proportionally to evaluation over the
    not-yet-chosen candidates, rejecting below-threshold draws. After
    `max_failed_draws` consecutive rejections the turn's selection ends.

    Updates the user's history and the articles' reader sets.
    """
    cfg = world.config
    pool = world.pool
    slate = np.asarray(slate, dtype=np.int64)
    hist = user.read_ids()
    if hist.size:
        cand = slate[np.isin(slate, hist, assume_unique=False, invert=True)]
    else:
        cand = slate
    if cand.size == 0:
        user.reads_today = []
        return np.empty(0, dtype=np.int64)

    if cand.size > 512:
        evals = (pool.window_topics @ user.interest)[cand - pool.start]
    else:
        evals = pool.topics[cand] @ user.interest
    days = pool.days[cand]

    chosen: list[int] = []
    if cfg.elite_reads > 0:
        above = np.flatnonzero(evals >= cfg.th)
        if above.size:
            order = np.lexsort((cand[above], -days[above], -evals[above]))
            chosen = [int(i) for i in above[order[: cfg.elite_reads]]]

    remaining = cfg.reads_per_day - len(chosen)
    if remaining > 0 and cand.size > len(chosen):
        active = np.ones(cand.size, dtype=bool)
        active[chosen] = False
        act_idx = np.flatnonzero(active)
        cum = np.cumsum(evals[act_idx])
        failures = 0
        while remaining > 0 and act_idx.size > 0:
            total = cum[-1]
            if total <= 0.0:
                break
            pos = int(np.searchsorted(cum, rng.uniform(0.0, total), side="right"))
            if evals[act_idx[pos]] < cfg.th:
                failures += 1
                if failures >= cfg.max_failed_draws:
                    break
                continue
            failures = 0
            chosen.append(int(act_idx[pos]))
            remaining -= 1
            act_idx = np.delete(act_idx, pos)
            if act_idx.size:
                cum = np.cumsum(evals[act_idx])

    ids = cand[chosen]
    user.record_reads(world.day, ids)
    for a in ids:
        world.readers[a].append(user.id)
    world.log_reads(user.id, ids)
    return ids


def update_interest(user: UserAgent, read_topics, w: float, r: float,
                    gain: float = 1.0) -> UserAgent:
    """Fold this turn's read topics into the interest vector.

    Categories at or above the current mean weigh 1+r, the rest 1-r; the old
    interest is carried with weight w and the result renormalized. `gain`
    scales the read term against w and sets how much one day's reading can
    move the interest. No reads leave the interest unchanged.
    """
    read_topics = np.asarray(read_topics, dtype=np.float64)
    if read_topics.size == 0:
        return user
    read_topics = np.atleast_2d(read_topics)
    u_old = user.interest
    k = np.where(u_old >= u_old.mean(), 1.0 + r, 1.0 - r)
    user.interest = normalize(w * u_old + gain * k * read_topics.sum(axis=0))
    return user


def step(world: World, recommender) -> tuple[World, TurnRecord]:
    """One full turn: spawn, present, select, update, record."""
    cfg = world.config
    world.day += 1
    spawn_articles(world)
    present_top(world)
    recommender.begin_turn(world)

    reads_by_user = []
    total_reads = 0
    for user in world.users:
        rng = world.rng_users[user.id]
        slate = assemble_slate(world, user, recommender, rng)
        ids = select_articles(world, user, slate, rng)
        reads_by_user.append(ids)
        total_reads += ids.size

    for user, ids in zip(world.users, reads_by_user):
        if ids.size:
            update_interest(user, world.pool.topics[ids], cfg.w, cfg.r, cfg.update_gain)

    record = _snapshot_record(world, reads=total_reads)
    world.records.append(record)
    return world, record


@dataclass
class RunResult:
    """Per-turn, per-user metric arrays for one run; row 0 is the initial state."""

    config: SimConfig
    seed: int
    run_index: int
    entropy: np.ndarray
    argmax: np.ndarray
    watch_share: np.ndarray
    max_share: np.ndarray
    reads: np.ndarray
    read_log: Optional[np.ndarray] = None

    @property
    def n_turns(self) -> int:
        return self.entropy.shape[0] - 1

    @classmethod
    def from_world(cls, world: World, seed: int, run_index: int,
                   keep_read_log: bool = True) -> "RunResult":
        recs = world.records
        return cls(
            config=world.config,
            seed=seed,
            run_index=run_index,
            entropy=np.stack([r.interest_entropy for r in recs]),
            argmax=np.stack([r.argmax for r in recs]),
            watch_share=np.stack([r.watch_share for r in recs]),
            max_share=np.stack([r.max_share for r in recs]),
            reads=np.asarray([r.reads for r in recs], dtype=np.int64),
            read_log=world.read_log_array() if keep_read_log else None,
        )


def run(config: SimConfig, seed: Optional[int] = None, run_index: int = 0,
        keep_read_log: bool = True) -> RunResult:
    """Initialize a world and execute `config.turns` turns."""
    from .recommenders import make_recommender

    seed = config.seed if seed is None else seed
    world = init_world(config, seed=seed, run_index=run_index)
    recommender = make_recommender(config.recommender)
    for _ in range(config.turns):
        step(world, recommender)
    return RunResult.from_world(world, seed, run_index, keep_read_log)


def _run_job(args) -> RunResult:
    config, seed, run_index, keep_read_log = args
    return run(config, seed=seed, run_index=run_index, keep_read_log=keep_read_log)


@dataclass
class BatchResult:
    """Independent replications of one configuration."""

    config: SimConfig
    results: list

    @property
    def runs(self) -> int:
        return len(self.results)

    def per_run_entropy_mean(self) -> np.ndarray:
        """(runs, turns+1) mean interest entropy over users, per run and turn."""
        return np.stack([r.entropy.mean(axis=1) for r in self.results])

    def per_run_entropy_std(self) -> np.ndarray:
        return np.stack([r.entropy.std(axis=1) for r in self.results])

    def entropy_mean_series(self) -> np.ndarray:
        return self.per_run_entropy_mean().mean(axis=0)

    def entropy_std_series(self) -> np.ndarray:
        """Across-run std of the per-turn mean entropy."""
        return self.per_run_entropy_mean().std(axis=0)


def run_batch(config: SimConfig, seeds=None, workers: int = 1,
              keep_read_log: bool = False) -> BatchResult:
    """Execute `config.runs` independent runs (or one per explicit seed).

    Per-run variation comes from the run index in the stream id, keeping the
    configured seed fixed; results are aggregated in run order so the worker
    count never changes the outcome.
    """
    config.validate()
    if seeds is None:
        jobs = [(config, config.seed, i, keep_read_log) for i in range(config.runs)]
    else:
        jobs = [(config, int(s), 0, keep_read_log) for s in seeds]
    if workers is None:
        workers = 1
    if workers <= 1 or len(jobs) <= 1:
        results = [_run_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_run_job, jobs))
    return BatchResult(config=config, results=results)


def config_with(config: SimConfig, **overrides) -> SimConfig:
    return replace(config, **overrides).validate()
