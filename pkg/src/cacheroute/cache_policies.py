"""Cache replacement policies behind a single access contract.

Implements LRU, a static (never-updated) cache, and the two-stage id/content
cache in both its deterministic form (double misses always deflect to the
uncached path) and the probabilistic-forwarding variant parameterized by
``alpha``.  Every access returns a :class:`CacheOutcome`.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum


class OutcomeKind(Enum):
    HIT = "hit"
    MISS = "miss"
    DEFLECT_4G = "deflect4g"


@dataclass(frozen=True)
class CacheOutcome:
    kind: OutcomeKind
    inserted: bool


# Access functions return these shared instances; outcomes are immutable.
HIT = CacheOutcome(OutcomeKind.HIT, False)
MISS = CacheOutcome(OutcomeKind.MISS, False)
MISS_INSERTED = CacheOutcome(OutcomeKind.MISS, True)
DEFLECT_4G = CacheOutcome(OutcomeKind.DEFLECT_4G, False)


class LruState:
    """Bounded recency list; exposes contents most-recently-used first."""

    __slots__ = ("capacity", "_entries")

    def __init__(self, capacity: int, contents=()):
        if capacity < 1:
            raise ValueError("LRU capacity must be >= 1")
        self.capacity = capacity
        # internally keyed oldest -> newest so eviction pops from the front
        self._entries = OrderedDict()
        for fid in reversed(tuple(contents)):
            self._entries[fid] = None
        if len(self._entries) > capacity:
            raise ValueError("initial contents exceed capacity")

    def __contains__(self, file_id) -> bool:
        return file_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def contents(self) -> tuple:
        """Cache contents, most recently used first."""
        return tuple(reversed(self._entries))

    def snapshot(self) -> str:
        ids = ",".join(str(f) for f in self.contents())
        return f"lru capacity={self.capacity} contents=[{ids}]"


def lru_access(state: LruState, file_id, admit_on_miss: bool = True) -> CacheOutcome:
    """Access one file: hit moves it to the front, miss optionally admits it.

    On an admitting miss with a full cache the least-recently-used resident is
    evicted.
    """
    entries = state._entries
    if file_id in entries:
        entries.move_to_end(file_id)
        return HIT
    if not admit_on_miss:
        return MISS
    if len(entries) >= state.capacity:
        entries.popitem(last=False)
    entries[file_id] = None
    return MISS_INSERTED


class StaticState:
    """Fixed cache contents; accesses never modify the set."""

    __slots__ = ("contents",)

    def __init__(self, contents):
        self.contents = frozenset(contents)

    def __contains__(self, file_id) -> bool:
        return file_id in self.contents

    def __len__(self) -> int:
        return len(self.contents)

    def snapshot(self) -> str:
        ids = ",".join(str(f) for f in sorted(self.contents))
        return f"static contents=[{ids}]"


def static_access(state: StaticState, file_id) -> CacheOutcome:
    """Hit iff the file is in the fixed set; never inserts anything."""
    return HIT if file_id in state.contents else MISS


class TwoLruState:
    """Two-stage cache: an LRU id filter in front of an LRU content cache.

    The agent-side virtual content cache mirrors the real content cache
    (same membership, same recency order) after every operation.  ``alpha``
    is the probability that a request missing both stages is still forwarded
    to the content cache instead of being deflected to the uncached path.
    """

    __slots__ = ("id_cache", "content_cache", "virtual_content", "alpha")

    def __init__(self, content_capacity: int, id_capacity: int | None = None,
                 alpha: float = 1.0):
        if id_capacity is None:
            id_capacity = content_capacity  # equal sizes unless tuned explicitly
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        self.id_cache = LruState(id_capacity)
        self.content_cache = LruState(content_capacity)
        self.virtual_content = LruState(content_capacity)
        self.alpha = alpha

    def snapshot(self) -> str:
        ids = ",".join(str(f) for f in self.id_cache.contents())
        cont = ",".join(str(f) for f in self.content_cache.contents())
        virt = ",".join(str(f) for f in self.virtual_content.contents())
        return (
            f"two-lru alpha={self.alpha} id_capacity={self.id_cache.capacity} "
            f"content_capacity={self.content_cache.capacity} "
            f"id=[{ids}] content=[{cont}] virtual=[{virt}]"
        )


def _content_touch(state: TwoLruState, file_id) -> CacheOutcome:
    # The virtual cache receives the identical operation, keeping the mirror
    # invariant; its outcome necessarily equals the real one.
    outcome = lru_access(state.content_cache, file_id)
    lru_access(state.virtual_content, file_id)
    return outcome


def alpha_two_lru_access(state: TwoLruState, file_id, rng) -> CacheOutcome:
    """One request through the id filter, virtual check, and forwarding coin.

    Flow: the id cache is looked up and LRU-updated first (the id is admitted
    on an id miss in every branch, the lookup itself being an access).  An id
    hit forwards to the content cache (hit, or fetch-and-admit on miss).  On
    an id miss the virtual content cache decides: if the file is present it is
    a hit with timestamps refreshed in both content copies; if absent, the
    request is forwarded anyway with probability ``alpha`` (miss, fetched and
    admitted) and deflected to the uncached path otherwise.
    """
    id_hit = file_id in state.id_cache._entries
    lru_access(state.id_cache, file_id)
    if id_hit or file_id in state.virtual_content._entries:
        return _content_touch(state, file_id)
    alpha = state.alpha
    if alpha >= 1.0 or (alpha > 0.0 and rng.random() < alpha):
        return _content_touch(state, file_id)
    return DEFLECT_4G


def two_lru_access(state: TwoLruState, file_id) -> CacheOutcome:
    """Deterministic two-stage access: double misses always deflect."""
    id_hit = file_id in state.id_cache._entries
    lru_access(state.id_cache, file_id)
    if id_hit or file_id in state.virtual_content._entries:
        return _content_touch(state, file_id)
    return DEFLECT_4G
