"""Block activation policies and simulated bounded delays."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError
from .product_space import PrimalDualPoint

__all__ = ["SchedulePolicy", "DelayModel", "select_blocks", "POLICIES"]

POLICIES = ("rr", "random", "greedy")


@dataclass
class SchedulePolicy:
    """How the activation set I_k is chosen.

    ``safeguard`` is the staleness bound M: a block idle for M iterations is
    processed regardless of the policy. ``None`` picks the default (10 n for
    greedy, off otherwise); ``math.inf`` turns it off.
    """

    mode: str = "rr"
    blocks_per_iter: int = 1
    always_active: frozenset = field(default_factory=frozenset)
    safeguard: Optional[float] = None

    def __post_init__(self):
        if self.mode not in POLICIES:
            raise ParameterError(f"unknown policy {self.mode!r}; choose from {POLICIES}")
        if self.blocks_per_iter < 1:
            raise ParameterError("blocks_per_iter must be at least 1")
        if self.safeguard is not None and not self.safeguard >= 1:
            raise ParameterError("safeguard M must be at least 1")
        self.always_active = frozenset(self.always_active)

    def resolved_safeguard(self, n: int) -> float:
        if self.safeguard is not None:
            return self.safeguard
        return 10 * n if self.mode == "greedy" else math.inf


def select_blocks(
    policy: SchedulePolicy,
    k: int,
    last_processed: Sequence[int],
    scores: Optional[Sequence[float]] = None,
    rng: Optional[np.random.Generator] = None,
) -> list[int]:
    """Return the sorted activation set for iteration ``k`` (blocks are 0-based).

    ``last_processed[i]`` is the last iteration block ``i`` was processed
    (0 if never). Greedy ranks blocks by ascending score, lowest index first on
    ties; blocks idle for ``M`` or more iterations are taken first.
    """
    n = len(last_processed)
    selectable = [i for i in range(n) if i not in policy.always_active]
    chosen: list[int] = []
    if selectable:
        b = min(policy.blocks_per_iter, len(selectable))
        M = policy.resolved_safeguard(n)
        forced = sorted(
            (i for i in selectable if k - last_processed[i] >= M),
            key=lambda i: (last_processed[i], i),
        )
        if policy.mode == "rr":
            start = ((k - 1) * b) % len(selectable)
            ranking = [selectable[(start + j) % len(selectable)] for j in range(len(selectable))]
        elif policy.mode == "random":
            if rng is None:
                raise ParameterError("random policy needs a generator")
            ranking = [selectable[j] for j in rng.permutation(len(selectable))]
        else:
            if scores is None:
                raise ParameterError("greedy policy needs scores")
            ranking = sorted(selectable, key=lambda i: (scores[i], i))
        chosen = list(forced)
        for i in ranking:
            if len(chosen) >= b:
                break
            if i not in chosen:
                chosen.append(i)
    return sorted(set(chosen) | set(policy.always_active))


class DelayModel:
    """Keeps the last ``D + 1`` iterates and draws delayed indices d(i, k).

    ``d`` is uniform on ``{max(k - D, last_used + 1, 1), ..., k}`` so every
    block sees a point at most D iterations old and strictly newer than the
    one it used last time.
    """

    def __init__(self, n_blocks: int, max_delay: int = 0, rng: Optional[np.random.Generator] = None):
        if max_delay < 0:
            raise ParameterError("max_delay must be nonnegative")
        self.max_delay = int(max_delay)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.history: deque = deque(maxlen=self.max_delay + 1)
        self.last_used = [0] * n_blocks

    def record(self, k: int, p: PrimalDualPoint) -> None:
        """Store iterate ``p^k``; iterates must be recorded in order."""
        if self.history and self.history[-1][0] != k - 1:
            raise ParameterError(f"iterate {k} recorded out of order")
        self.history.append((k, p))

    def draw(self, i: int, k: int) -> int:
        lo = max(k - self.max_delay, self.last_used[i] + 1, 1)
        d = k if lo >= k else int(self.rng.integers(lo, k + 1))
        self.last_used[i] = d
        return d

    def delayed_point(self, i: int, k: int) -> tuple[PrimalDualPoint, int]:
        """Draw ``d(i, k)`` and return the stored iterate ``p^d`` with ``d``."""
        d = self.draw(i, k)
        first = self.history[0][0]
        return self.history[d - first][1], d
