"""Shared multicast machinery for MAN/YMA-style deliveries.

A delivery plan consists of one message per (t+1)-subset S of a user
universe. Each message is a signed sum of per-user blocks, and every block
is bilinear: a file-coefficient vector (demand or query row) times a formal
subfile-block index T = S \\ {j}. Messages therefore live in a formal
coordinate space indexed by (file, T); omission soundness and local
reconstruction of not-sent messages are plain rank/solve questions in that
space, independent of the concrete file symbols.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from ..errors import ReconstructionFailure
from ..gf import rref
from ..model import subset_index, subsets


def alternating_signs(size: int, q: int) -> tuple[int, ...]:
    """Default encoding coefficients: alternate +1/-1 by sorted position."""
    return tuple(1 if i % 2 == 0 else (q - 1) % q for i in range(size))


@lru_cache(maxsize=1 << 16)
def message_parts(s: tuple[int, ...]) -> tuple[tuple[int, tuple[int, ...]], ...]:
    """(member, remaining block index) pairs of a message subset."""
    return tuple((j, tuple(u for u in s if u != j)) for j in s)


def express_in_rowspan(rows: np.ndarray, targets: np.ndarray, q: int):
    """For each target vector, coefficients over rows (or None if outside span)."""
    m = rows.shape[0]
    k = targets.shape[0]
    if m == 0:
        return [
            (np.zeros(0, dtype=np.int64) if not np.any(targets[i] % q) else None)
            for i in range(k)
        ]
    aug = np.hstack([rows.T % q, targets.T % q])
    red, pivots = rref(aug, q, limit=m)
    r = len(pivots)
    out = []
    for i in range(k):
        if np.any(red[r:, m + i]):
            out.append(None)
            continue
        c = np.zeros(m, dtype=np.int64)
        for row_idx, col in enumerate(pivots):
            c[col] = red[row_idx, m + i]
        out.append(c)
    return out


@dataclass
class MulticastPlan:
    """All messages for one delivery, split into sent and omitted."""

    universe: tuple[int, ...]
    t: int
    q: int
    n_files: int
    blocks: list[tuple[int, ...]]  # formal subfile-block index universe
    a_rows: dict[int, np.ndarray]  # file-coefficient row per universe user
    leaders: list[int]
    signs: dict[tuple[int, ...], tuple[int, ...]]
    messages: list[tuple[int, ...]]
    sent: list[tuple[int, ...]]
    omitted: list[tuple[int, ...]]

    @property
    def dim(self) -> int:
        return self.n_files * len(self.blocks)

    def block_pos(self) -> dict[tuple[int, ...], int]:
        return subset_index(self.blocks)

    def formal_row(self, s: tuple[int, ...], pos=None) -> np.ndarray:
        pos = pos or self.block_pos()
        row = np.zeros((self.n_files, len(self.blocks)), dtype=np.int64)
        sign = self.signs[s]
        for i, (j, t_set) in enumerate(message_parts(s)):
            row[:, pos[t_set]] += sign[i] * self.a_rows[j]
        return np.mod(row.reshape(-1), self.q)

    def rows_for(self, message_list) -> np.ndarray:
        pos = self.block_pos()
        if not message_list:
            return np.zeros((0, self.dim), dtype=np.int64)
        return np.vstack([self.formal_row(s, pos) for s in message_list])


def build_plan(
    universe,
    t: int,
    a_rows: dict[int, np.ndarray],
    leaders: list[int],
    q: int,
    n_files: int,
    blocks: list[tuple[int, ...]] | None = None,
) -> MulticastPlan:
    universe = tuple(sorted(universe))
    messages = subsets(universe, t + 1)
    blocks = subsets(universe, t) if blocks is None else blocks
    leaders_set = set(leaders)
    sent = [s for s in messages if leaders_set.intersection(s)]
    omitted = [s for s in messages if not leaders_set.intersection(s)]
    signs = {s: alternating_signs(len(s), q) for s in messages}
    return MulticastPlan(
        universe=universe,
        t=t,
        q=q,
        n_files=n_files,
        blocks=blocks,
        a_rows={j: np.mod(np.asarray(v, dtype=np.int64), q) for j, v in a_rows.items()},
        leaders=list(leaders),
        signs=signs,
        messages=messages,
        sent=sent,
        omitted=omitted,
    )


_OMISSION_MEMO: dict = {}


def _pattern_key(plan: MulticastPlan):
    """Cache key for single-file demand patterns, or None when not cacheable.

    Reconstruction coefficients are invariant under relabeling files by
    first occurrence and under order-preserving renaming of the universe, so
    isomorphic demand patterns share one solve.
    """
    files = []
    for u in plan.universe:
        row = plan.a_rows[u]
        nz = np.flatnonzero(row)
        if nz.size != 1 or row[nz[0]] != 1:
            return None
        files.append(int(nz[0]))
    relabel: dict[int, int] = {}
    pattern = []
    for f in files:
        if f not in relabel:
            relabel[f] = len(relabel) + 1
        pattern.append(relabel[f])
    position = {u: i for i, u in enumerate(plan.universe)}
    leader_pos = tuple(sorted(position[u] for u in plan.leaders))
    signs = tuple(tuple(plan.signs[s]) for s in plan.messages)
    return (len(plan.universe), plan.t, plan.q, plan.n_files, tuple(pattern), leader_pos, signs)


def _query_pattern_key(plan: MulticastPlan):
    """Cache key for general (query) rows: the expansion over the leaders.

    Message rows live in the span of the leader rows tensored with the block
    coordinates, and that embedding is injective when leader rows are
    independent, so reconstruction coefficients depend on the rows only
    through each user's expansion coefficients over the leader rows.
    """
    if not plan.leaders:
        return None
    leader_rows = np.vstack([plan.a_rows[u] for u in plan.leaders])
    others = [u for u in plan.universe if u not in plan.leaders]
    if others:
        targets = np.vstack([plan.a_rows[u] for u in others])
        coeffs = express_in_rowspan(leader_rows, targets, plan.q)
        if any(c is None for c in coeffs):
            return None
        expansion = tuple(tuple(int(x) for x in c) for c in coeffs)
    else:
        expansion = ()
    position = {u: i for i, u in enumerate(plan.universe)}
    leader_pos = tuple(position[u] for u in plan.leaders)
    signs = tuple(tuple(plan.signs[s]) for s in plan.messages)
    return (len(plan.universe), plan.t, plan.q, leader_pos, expansion, signs)


def omission_coefficients(plan: MulticastPlan) -> list:
    """Per omitted message, coefficients over the sent messages (or None)."""
    if not plan.omitted:
        return []
    key = _pattern_key(plan) or _query_pattern_key(plan)
    if key is not None and key in _OMISSION_MEMO:
        return _OMISSION_MEMO[key]
    coeffs = express_in_rowspan(plan.rows_for(plan.sent), plan.rows_for(plan.omitted), plan.q)
    if key is not None:
        _OMISSION_MEMO[key] = coeffs
    return coeffs


def unsound_messages(plan: MulticastPlan) -> list[tuple[int, ...]]:
    """Omitted messages whose formal row is outside the span of sent rows."""
    return [s for s, c in zip(plan.omitted, omission_coefficients(plan)) if c is None]


def ensure_omission_sound(plan: MulticastPlan) -> MulticastPlan:
    """Certify that every omitted message is reconstructible from sent ones.

    The default alternating signs are expected to pass; if they do not, fall
    back to a bounded search over per-message sign patterns before giving up.
    """
    bad = unsound_messages(plan)
    if not bad:
        return plan
    patterns = list(itertools.product([1, plan.q - 1], repeat=plan.t + 1))
    for _ in range(3):
        improved = False
        for s in plan.sent:
            current = plan.signs[s]
            best_signs, best_bad = current, bad
            for pat in patterns:
                if pat == current:
                    continue
                trial = dict(plan.signs)
                trial[s] = pat
                trial_plan = replace(plan, signs=trial)
                trial_bad = unsound_messages(trial_plan)
                if len(trial_bad) < len(best_bad):
                    best_signs, best_bad = pat, trial_bad
            if best_signs is not plan.signs[s]:
                plan.signs[s] = best_signs
                bad = best_bad
                improved = True
            if not bad:
                return plan
        if not improved:
            break
    raise ReconstructionFailure(
        f"omitted messages {bad} not in the span of sent messages for any tried signs"
    )


def serialize_signs(plan: MulticastPlan) -> dict:
    return {",".join(map(str, s)): list(plan.signs[s]) for s in plan.messages}


def signs_from_side_info(raw: dict) -> dict[tuple[int, ...], tuple[int, ...]]:
    return {tuple(int(x) for x in k.split(",")): tuple(v) for k, v in raw.items()}


class ReconstructionContext:
    """Per-transcript cache: numeric values of sent and reconstructed messages.

    Decoding users rebuild omitted messages as the same linear combination of
    sent message values that expresses the omitted formal row; the expression
    only uses public side information.
    """

    def __init__(self, plan: MulticastPlan, sent_values: list[np.ndarray], piece: int):
        if len(sent_values) != len(plan.sent):
            raise ReconstructionFailure("payload does not match the delivery plan")
        self.plan = plan
        self.q = plan.q
        self.piece = piece
        self._values = {s: np.mod(v, plan.q) for s, v in zip(plan.sent, sent_values)}
        self._coeffs = None

    def _omitted_coeffs(self, s: tuple[int, ...]):
        if self._coeffs is None:
            self._coeffs = dict(zip(self.plan.omitted, omission_coefficients(self.plan)))
        return self._coeffs[s]

    def unsound(self) -> list[tuple[int, ...]]:
        return [s for s in self.plan.omitted if self._omitted_coeffs(s) is None]

    def value(self, s: tuple[int, ...]) -> np.ndarray:
        if s in self._values:
            return self._values[s]
        coeff = self._omitted_coeffs(s)
        if coeff is None:
            raise ReconstructionFailure(f"message for {s} is not reconstructible")
        acc = np.zeros(self.piece, dtype=np.int64)
        for c, sub in zip(coeff, self.plan.sent):
            if c:
                acc = acc + c * self._values[sub]
        val = np.mod(acc, self.q)
        self._values[s] = val
        return val
