"""Non-private hotplug schemes.

yma_plus   uncoded placement over all K users, offline users served with the
           first leader's demand.
ht1        MDS-coded placement at subpacketization C(K',t) with YMA-style
           delivery restricted to the active set.
ht2        single low-memory point for K' >= N: per-user coded slice of the
           file sum, two-step unlock-then-multicast delivery.
flex/ht3   per-user encoding blocks from one fat MDS matrix; multicast
           messages are built from decoding vectors common to the row spans
           of every participating user's block.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import numpy as np

from ..errors import (
    DecodingVectorNotFound,
    FieldTooSmall,
    SubpacketizationTooLarge,
    UnsupportedParams,
)
from ..gf import FieldMatrix, mat_nullspace, mat_solve, solve_with_cache
from ..mds import MdsSpec, vandermonde
from ..model import (
    DeliveryTranscript,
    DemandVector,
    FileLibrary,
    PlacementOutcome,
    SystemParams,
    TradeoffPoint,
    leader_set,
    subset_index,
    subsets,
)
from .base import Scheme, binom
from .multicast import (
    ReconstructionContext,
    build_plan,
    ensure_omission_sound,
    message_parts,
    serialize_signs,
    signs_from_side_info,
)


def unit_row(index: int, n: int) -> np.ndarray:
    row = np.zeros(n, dtype=np.int64)
    row[index - 1] = 1
    return row


def demand_rows(demand: DemandVector, n: int) -> np.ndarray:
    return np.vstack([unit_row(demand.demands[u], n) for u in demand.active])


@lru_cache(maxsize=4096)
def _cached_subsets(universe: tuple, t: int, user: int) -> list[tuple[int, ...]]:
    return [w for w in subsets(universe, t) if user in w]


def cached_subsets(universe, t: int, user: int) -> list[tuple[int, ...]]:
    return _cached_subsets(tuple(universe), t, user)


def _require(cond: bool, message: str, exc=UnsupportedParams):
    if not cond:
        raise exc(message)


def _sign_value(sign: int, q: int) -> int:
    return sign % q


class _MulticastDeliveryMixin:
    """Rebuilds the delivery plan from public side information."""

    def _plan_from_side(self, params: SystemParams, side: dict):
        q = params.q
        n = params.n_files
        universe = tuple(int(u) for u in side["universe"])
        t = int(side["t"])
        a_rows = {
            int(u): np.asarray(row, dtype=np.int64)
            for u, row in side["file_rows"].items()
        }
        blocks = [tuple(int(x) for x in key.split(",")) if key else () for key in side["blocks"]]
        plan = build_plan(universe, t, a_rows, [int(x) for x in side["leaders"]], q, n, blocks)
        plan.signs.update(signs_from_side_info(side["signs"]))
        leaders_set = set(plan.leaders)
        plan.sent = [s for s in plan.messages if leaders_set.intersection(s)]
        plan.omitted = [s for s in plan.messages if not leaders_set.intersection(s)]
        return plan

    def make_decode_context(self, params: SystemParams, meta: dict, transcript):
        # The plan attached at delivery time is a pure parse cache; decoding
        # from serialized side information alone must give the same plan
        # (covered by tests).
        plan = getattr(transcript, "_plan", None)
        if plan is None:
            plan = self._plan_from_side(params, transcript.side_info)
        piece = params.b_factor * meta.get("piece_factor", 1)
        values = [v for _, v in transcript.payload]
        return ReconstructionContext(plan, values, piece)

    @staticmethod
    def _plan_side_info(plan, extra: dict) -> dict:
        side = {
            "universe": list(plan.universe),
            "t": plan.t,
            "leaders": list(plan.leaders),
            "file_rows": {str(u): plan.a_rows[u].tolist() for u in plan.a_rows},
            "blocks": [",".join(map(str, b)) for b in plan.blocks],
            "signs": serialize_signs(plan),
        }
        side.update(extra)
        return side

    @staticmethod
    def _payload(plan, tables) -> list[tuple[str, np.ndarray]]:
        """Messages as signed sums of per-user block rows.

        tables[j] holds user j's block values aligned with plan.blocks.
        """
        pos = plan.block_pos()
        payload = []
        for s in plan.sent:
            sign = plan.signs[s]
            acc = None
            for i, (j, t_set) in enumerate(message_parts(s)):
                term = sign[i] * tables[j][pos[t_set]]
                acc = term if acc is None else acc + term
            payload.append(("X[%s]" % ",".join(map(str, s)), np.mod(acc, plan.q)))
        return payload

    @staticmethod
    def _attach(transcript, plan):
        transcript._plan = plan
        return transcript


class YmaPlusScheme(_MulticastDeliveryMixin, Scheme):
    """Uncoded placement with offline users assigned the first leader's demand."""

    name = "yma_plus"

    def validate(self, params):
        _require(params.t is not None, "yma_plus needs the parameter t")
        _require(0 <= params.t <= params.k_total, f"t={params.t} outside [0, K]")

    def subpacketization(self, params):
        return binom(params.k_total, params.t)

    def declared_point(self, params):
        k, ka, n, t = params.k_total, params.k_active, params.n_files, params.t
        r = min(ka, n)
        m = Fraction(n * binom(k - 1, t - 1), binom(k, t))
        load = Fraction(binom(k, t + 1) - binom(k - r, t + 1), binom(k, t))
        return TradeoffPoint(m, load)

    def place(self, params, library, seed=0, randomness=None):
        self.validate(params)
        k, n, t = params.k_total, params.n_files, params.t
        sub = self.subpacketization(params)
        blocks = library.blocks(sub)
        t_index = subset_index(subsets(k, t))
        caches = {}
        for u in range(1, k + 1):
            mine = [t_index[w] for w in cached_subsets(range(1, k + 1), t, u)]
            caches[u] = blocks[:, mine, :].copy().reshape(-1)
        meta = {"scheme": self.name, "t": t, "k": k, "piece_factor": 1}
        return PlacementOutcome(
            caches=caches,
            user_meta={u: {} for u in range(1, k + 1)},
            meta=meta,
            b_symbols=library.b_symbols,
            subpacketization=sub,
            server={"blocks": blocks},
        )

    def deliver(self, params, placement, demand):
        q, n, t, k = params.q, params.n_files, params.t, params.k_total
        active = list(demand.active)
        leaders = leader_set(demand_rows(demand, n), active, q)
        fake = demand.demands[leaders[0]]
        full = {u: demand.demands.get(u, fake) for u in range(1, k + 1)}
        a_rows = {u: unit_row(full[u], n) for u in full}
        plan = build_plan(range(1, k + 1), t, a_rows, leaders, q, n)
        plan = ensure_omission_sound(plan)
        blocks = placement.server["blocks"]
        tables = {u: blocks[full[u] - 1] for u in plan.universe}
        payload = self._payload(plan, tables)
        side = self._plan_side_info(
            plan,
            {
                "scheme": self.name,
                "active": active,
                "demands": {str(u): demand.demands[u] for u in active},
                "fake_demand": fake,
            },
        )
        return self._attach(DeliveryTranscript(payload, side), plan)

    def decode(self, params, meta, user, cache, user_meta, transcript, demanded_file, ctx=None):
        ctx = ctx or self.make_decode_context(params, meta, transcript)
        plan = ctx.plan
        q, n, t, k = params.q, params.n_files, params.t, params.k_total
        sub = binom(k, t)
        piece = ctx.piece
        mine = cached_subsets(range(1, k + 1), t, user)
        mine_pos = {w: i for i, w in enumerate(mine)}
        cached = cache.reshape(n, len(mine), piece)
        d_map = {j: int(np.flatnonzero(row)[0]) + 1 for j, row in plan.a_rows.items()}
        out = np.zeros((sub, piece), dtype=np.int64)
        t_index = subset_index(plan.blocks)
        for w in plan.blocks:
            if user in w:
                out[t_index[w]] = cached[demanded_file - 1, mine_pos[w], :]
                continue
            s = tuple(sorted((user,) + w))
            val = ctx.value(s).copy()
            for i, (j, w_j) in enumerate(message_parts(s)):
                if j == user:
                    continue
                val -= plan.signs[s][i] * cached[d_map[j] - 1, mine_pos[w_j], :]
            sign_u = plan.signs[s][s.index(user)]
            out[t_index[w]] = np.mod(val * sign_u, q)
        return out.reshape(-1)


class Ht1Scheme(_MulticastDeliveryMixin, Scheme):
    """MDS-coded placement; every file is recoverable from any K'-user view."""

    name = "ht1"

    def validate(self, params):
        _require(params.t is not None, "ht1 needs the parameter t")
        _require(0 <= params.t <= params.k_active, f"t={params.t} outside [0, K']")
        if params.q <= binom(params.k_total, params.t):
            raise FieldTooSmall(
                f"ht1 needs q > C(K,t) = {binom(params.k_total, params.t)}, got {params.q}"
            )

    def min_field(self, params):
        return binom(params.k_total, params.t) + 1

    def subpacketization(self, params):
        return binom(params.k_active, params.t)

    def declared_point(self, params):
        k, ka, n, t = params.k_total, params.k_active, params.n_files, params.t
        r = min(ka, n)
        m = Fraction(n * binom(k - 1, t - 1), binom(ka, t))
        load = Fraction(binom(ka, t + 1) - binom(ka - r, t + 1), binom(ka, t))
        return TradeoffPoint(m, load)

    def place(self, params, library, seed=0, randomness=None):
        self.validate(params)
        k, n, t = params.k_total, params.n_files, params.t
        sub = self.subpacketization(params)
        spec = MdsSpec(sub, binom(k, t), params.q)
        gen = vandermonde(spec)
        blocks = library.blocks(sub)
        coded = np.mod(np.einsum("ri,nip->nrp", gen.data, blocks), params.q)
        t_global = subsets(k, t)
        t_index = subset_index(t_global)
        caches = {}
        for u in range(1, k + 1):
            mine = [t_index[w] for w in cached_subsets(range(1, k + 1), t, u)]
            caches[u] = coded[:, mine, :].copy().reshape(-1)
        meta = {
            "scheme": self.name,
            "t": t,
            "k": k,
            "generator": gen.data,
            "piece_factor": 1,
            "mds_certificates": [(gen.data, sub)],
        }
        return PlacementOutcome(
            caches=caches,
            user_meta={u: {} for u in range(1, k + 1)},
            meta=meta,
            b_symbols=library.b_symbols,
            subpacketization=sub,
            server={"coded": coded, "t_index": t_index},
        )

    def deliver(self, params, placement, demand):
        q, n, t = params.q, params.n_files, params.t
        active = list(demand.active)
        leaders = leader_set(demand_rows(demand, n), active, q)
        a_rows = {u: unit_row(demand.demands[u], n) for u in active}
        plan = build_plan(active, t, a_rows, leaders, q, n)
        plan = ensure_omission_sound(plan)
        coded = placement.server["coded"]
        t_index = placement.server["t_index"]
        local = coded[:, [t_index[w] for w in plan.blocks], :]
        tables = {u: local[demand.demands[u] - 1] for u in active}
        payload = self._payload(plan, tables)
        side = self._plan_side_info(
            plan,
            {
                "scheme": self.name,
                "active": active,
                "demands": {str(u): demand.demands[u] for u in active},
            },
        )
        return self._attach(DeliveryTranscript(payload, side), plan)

    def decode(self, params, meta, user, cache, user_meta, transcript, demanded_file, ctx=None):
        ctx = ctx or self.make_decode_context(params, meta, transcript)
        plan = ctx.plan
        q, n, t, k = params.q, params.n_files, params.t, params.k_total
        sub = binom(params.k_active, t)
        piece = ctx.piece
        mine = cached_subsets(range(1, k + 1), t, user)
        mine_pos = {w: i for i, w in enumerate(mine)}
        cached = cache.reshape(n, len(mine), piece)
        active_t = plan.blocks  # Omega^t of the active set
        d_map = {j: int(np.flatnonzero(row)[0]) + 1 for j, row in plan.a_rows.items()}
        vals = np.zeros((len(active_t), piece), dtype=np.int64)
        for pos, w in enumerate(active_t):
            if user in w:
                vals[pos] = cached[demanded_file - 1, mine_pos[w], :]
                continue
            s = tuple(sorted((user,) + w))
            val = ctx.value(s).copy()
            for i, (j, w_j) in enumerate(message_parts(s)):
                if j == user:
                    continue
                val -= plan.signs[s][i] * cached[d_map[j] - 1, mine_pos[w_j], :]
            sign_u = plan.signs[s][s.index(user)]
            vals[pos] = np.mod(val * sign_u, q)
        gen = meta["generator"]
        global_index = subset_index(subsets(k, t))
        rows = [global_index[w] for w in active_t]
        solution = solve_with_cache(meta.setdefault("_solve_cache", {}), gen[rows, :], q, vals)
        if solution is None:
            raise DecodingVectorNotFound("MDS decoding system is inconsistent")
        return solution.reshape(-1)


class Ht2Scheme(Scheme):
    """Single corner point (1/K', N(1-1/K')) for K' >= N via coded file sum."""

    name = "ht2"

    def validate(self, params):
        _require(params.k_active >= params.n_files, "ht2 needs K' >= N")
        if params.q <= params.k_total:
            raise FieldTooSmall(f"ht2 needs q > K = {params.k_total}, got {params.q}")

    def min_field(self, params):
        return params.k_total + 1

    def subpacketization(self, params):
        return params.k_active

    def declared_point(self, params):
        ka, n = params.k_active, params.n_files
        return TradeoffPoint(Fraction(1, ka), Fraction(n) * (1 - Fraction(1, ka)))

    def place(self, params, library, seed=0, randomness=None):
        self.validate(params)
        k, ka = params.k_total, params.k_active
        gen = vandermonde(MdsSpec(ka, k, params.q))
        blocks = library.blocks(ka)
        total = np.mod(blocks.sum(axis=0), params.q)
        caches = {
            u: np.mod(gen.data[u - 1] @ total, params.q).reshape(-1)
            for u in range(1, k + 1)
        }
        meta = {
            "scheme": self.name,
            "rows": gen.data,
            "mds_certificates": [(gen.data, ka)],
        }
        return PlacementOutcome(
            caches=caches,
            user_meta={u: {} for u in range(1, k + 1)},
            meta=meta,
            b_symbols=library.b_symbols,
            subpacketization=ka,
            server={"blocks": blocks},
        )

    def deliver(self, params, placement, demand):
        q, n = params.q, params.n_files
        active = list(demand.active)
        rows = placement.meta["rows"]
        blocks = placement.server["blocks"]
        groups = {f: [u for u in active if demand.demands[u] == f] for f in range(1, n + 1)}
        side = {
            "scheme": self.name,
            "active": active,
            "demands": {str(u): demand.demands[u] for u in active},
        }
        if any(not groups[f] for f in groups):
            wanted = sorted(set(demand.demands.values()))
            payload = [(f"F[{f}]", blocks[f - 1].reshape(-1)) for f in wanted]
            side["branch"] = "whole"
            return DeliveryTranscript(payload, side)
        side["branch"] = "two-step"
        payload = []
        for u in active:
            for f in range(1, n + 1):
                if f != demand.demands[u]:
                    payload.append((f"s1[{u},{f}]", np.mod(rows[u - 1] @ blocks[f - 1], q)))
        for f in range(1, n + 1):
            lead = min(groups[f])
            for u in groups[f]:
                if u != lead:
                    combo = np.mod((rows[lead - 1] + rows[u - 1]) @ blocks[f - 1], q)
                    payload.append((f"s2[{f},{u}]", combo))
        return DeliveryTranscript(payload, side)

    def decode(self, params, meta, user, cache, user_meta, transcript, demanded_file, ctx=None):
        q, n, ka = params.q, params.n_files, params.k_active
        side = transcript.side_info
        values = dict(transcript.payload)
        if side["branch"] == "whole":
            return values[f"F[{demanded_file}]"].copy()
        active = [int(u) for u in side["active"]]
        demands = {int(u): int(f) for u, f in side["demands"].items()}
        rows = meta["rows"]
        # Unlock the own coded slice of the demanded file from the cache.
        own = cache.copy()
        for f in range(1, n + 1):
            if f != demanded_file:
                own -= values[f"s1[{user},{f}]"]
        own = np.mod(own, q)
        group = sorted(u for u in active if demands[u] == demanded_file)
        lead = group[0]
        slices = {user: own}
        if user != lead:
            slices[lead] = np.mod(values[f"s2[{demanded_file},{user}]"] - own, q)
        for u in group:
            if u not in slices:
                slices[u] = np.mod(values[f"s2[{demanded_file},{u}]"] - slices[lead], q)
        for u in active:
            if u not in group:
                slices[u] = values[f"s1[{u},{demanded_file}]"]
        rhs = np.vstack([slices[u][None, :] for u in active])
        solution = solve_with_cache(
            meta.setdefault("_solve_cache", {}), rows[[u - 1 for u in active], :], q, rhs
        )
        if solution is None:
            raise DecodingVectorNotFound("ht2 unlock system is inconsistent")
        return solution.reshape(-1)


def common_span_vectors(mats: list[np.ndarray], q: int, cap: int = 12) -> list[np.ndarray]:
    """Nonzero vectors lying in the row span of every matrix in mats.

    Solves the stacked system E_1^T l_1 = E_i^T l_i for all i; any nonzero
    solution yields a nonzero common vector because each block has full row
    rank. Candidates are nullspace basis vectors followed by pairwise sums.
    """
    if len(mats) == 1:
        return [row.copy() for row in mats[0]]
    r, width = mats[0].shape
    t = len(mats)
    system = np.zeros(((t - 1) * width, t * r), dtype=np.int64)
    first = mats[0].T % q
    for i in range(1, t):
        system[(i - 1) * width : i * width, :r] = first
        system[(i - 1) * width : i * width, i * r : (i + 1) * r] = (-mats[i].T) % q
    basis = mat_nullspace(FieldMatrix(system, q))
    raw = list(basis)
    for i in range(len(basis)):
        for j in range(i + 1, len(basis)):
            raw.append((basis[i] + basis[j]) % q)
    out = []
    for vec in raw[: max(cap, len(basis))]:
        candidate = np.mod(vec[:r] @ mats[0], q)
        if np.any(candidate):
            out.append(candidate)
    return out


class FlexScheme(_MulticastDeliveryMixin, Scheme):
    """Flexible-subpacketization scheme built from per-user encoding blocks."""

    name = "flex"

    def __init__(self, l_t: int | None = None):
        self.l_t = l_t

    def _effective(self, params) -> tuple[int, int]:
        t = params.t
        r = binom(params.k_active - 1, t - 1)
        if self.l_t is not None:
            return t, self.l_t
        return t, (r * t - 1) // (t - 1)

    def validate(self, params):
        ka = params.k_active
        _require(params.t is not None, "flex needs the parameter t")
        _require(ka >= 3 and 2 <= params.t <= ka - 1, f"flex needs t in [2, K'-1], got t={params.t}")
        t, l_t = self._effective(params)
        r = binom(ka - 1, t - 1)
        if not l_t * (t - 1) < r * t:
            raise SubpacketizationTooLarge(
                f"L_t={l_t} violates the strict bound L_t < C(K'-1,t-1) t/(t-1)"
            )
        _require(l_t >= 1, "subpacketization must be positive")
        if l_t > binom(ka, t):
            raise SubpacketizationTooLarge("L_t too large for the decoding stack")
        if params.q <= params.k_total * r:
            raise FieldTooSmall(
                f"flex needs q > K*C(K'-1,t-1) = {params.k_total * r}, got {params.q}"
            )

    def min_field(self, params):
        t, _ = self._effective(params)
        return params.k_total * binom(params.k_active - 1, t - 1) + 1

    def subpacketization(self, params):
        return self._effective(params)[1]

    def declared_point(self, params):
        ka, n = params.k_active, params.n_files
        t, l_t = self._effective(params)
        r = min(ka, n)
        m = Fraction(n * binom(ka - 1, t - 1), l_t)
        load = Fraction(binom(ka, t + 1) - binom(ka - r, t + 1), l_t)
        return TradeoffPoint(m, load)

    def place(self, params, library, seed=0, randomness=None):
        self.validate(params)
        k, ka = params.k_total, params.k_active
        t, l_t = self._effective(params)
        r = binom(ka - 1, t - 1)
        gen = vandermonde(MdsSpec(l_t, k * r, params.q))
        blocks = library.blocks(l_t)
        enc = {u: gen.data[(u - 1) * r : u * r, :] for u in range(1, k + 1)}
        caches = {
            u: np.mod(np.einsum("rl,nlp->nrp", enc[u], blocks), params.q).reshape(-1)
            for u in range(1, k + 1)
        }
        meta = {
            "scheme": self.name,
            "t": t,
            "l_t": l_t,
            "encoders": enc,
            "piece_factor": 1,
            "mds_certificates": [(gen.data, l_t)],
        }
        return PlacementOutcome(
            caches=caches,
            user_meta={u: {} for u in range(1, k + 1)},
            meta=meta,
            b_symbols=library.b_symbols,
            subpacketization=l_t,
            server={"blocks": blocks, "pvecs": {}},
        )

    def _decode_vectors(self, params, placement, active) -> dict[tuple[int, ...], np.ndarray]:
        """Pick one public decoding vector per t-subset of the active set.

        Every candidate lies in the span of each participating user's block;
        the chosen family must additionally keep [E_j; P_j] full rank for all
        active j. The first-candidate choice is deterministic and cached.
        """
        q = params.q
        t, l_t = self._effective(params)
        enc = placement.meta["encoders"]
        cache = placement.server["pvecs"]
        t_subsets = subsets(active, t)
        options = {}
        for t_set in t_subsets:
            if t_set not in cache:
                cache[t_set] = common_span_vectors([enc[u] for u in t_set], q)
                if not cache[t_set]:
                    raise DecodingVectorNotFound(f"no common span vector for {t_set}")
            options[t_set] = cache[t_set]
        choice = {t_set: 0 for t_set in t_subsets}

        def user_stack_ok(user) -> bool:
            rows = np.vstack(
                [enc[user]]
                + [
                    options[w][choice[w]][None, :]
                    for w in t_subsets
                    if user not in w
                ]
            )
            return _full_col_rank(rows, q, l_t)

        for user in active:
            if user_stack_ok(user):
                continue
            fixed = False
            for t_set in t_subsets:
                if user in t_set:
                    continue
                original = choice[t_set]
                for alt in range(len(options[t_set])):
                    choice[t_set] = alt
                    if user_stack_ok(user):
                        fixed = True
                        break
                if fixed:
                    break
                choice[t_set] = original
            if not fixed:
                raise DecodingVectorNotFound(
                    f"no decoding-vector family keeps [E_{user}; P_{user}] full rank"
                )
        return {t_set: options[t_set][choice[t_set]] for t_set in t_subsets}

    def deliver(self, params, placement, demand):
        q, n = params.q, params.n_files
        t, l_t = self._effective(params)
        active = list(demand.active)
        leaders = leader_set(demand_rows(demand, n), active, q)
        a_rows = {u: unit_row(demand.demands[u], n) for u in active}
        plan = build_plan(active, t, a_rows, leaders, q, n)
        plan = ensure_omission_sound(plan)
        pvecs = self._decode_vectors(params, placement, active)
        blocks = placement.server["blocks"]
        pvmat = np.vstack([pvecs[w] for w in plan.blocks])
        per_file = np.mod(np.einsum("wl,nlp->nwp", pvmat, blocks), q)
        tables = {u: per_file[demand.demands[u] - 1] for u in active}
        payload = self._payload(plan, tables)
        side = self._plan_side_info(
            plan,
            {
                "scheme": self.name,
                "active": active,
                "demands": {str(u): demand.demands[u] for u in active},
                "pvecs": {",".join(map(str, k)): v.tolist() for k, v in pvecs.items()},
            },
        )
        return self._attach(DeliveryTranscript(payload, side), plan)

    def decode(self, params, meta, user, cache, user_meta, transcript, demanded_file, ctx=None):
        ctx = ctx or self.make_decode_context(params, meta, transcript)
        plan = ctx.plan
        q, n = params.q, params.n_files
        t, l_t = self._effective(params)
        r = binom(params.k_active - 1, t - 1)
        piece = ctx.piece
        enc_user = meta["encoders"][user]
        cached = cache.reshape(n, r, piece)
        pvecs = {
            tuple(int(x) for x in key.split(",")): np.asarray(vec, dtype=np.int64)
            for key, vec in transcript.side_info["pvecs"].items()
        }
        enc_t = FieldMatrix(enc_user.T, q)
        span_coeff = meta.setdefault("_span_cache", {})

        def in_own_span(vec) -> np.ndarray:
            key = (user, vec.tobytes())
            if key not in span_coeff:
                lam = mat_solve(enc_t, vec)
                if lam is None:
                    raise DecodingVectorNotFound("decoding vector outside own span")
                span_coeff[key] = lam
            return span_coeff[key]

        d_map = {j: int(np.flatnonzero(row)[0]) + 1 for j, row in plan.a_rows.items()}
        rows = [enc_user]
        rhs = [cached[demanded_file - 1]]
        for w in plan.blocks:
            if user in w:
                continue
            s = tuple(sorted((user,) + w))
            val = ctx.value(s).copy()
            for i, (j, w_j) in enumerate(message_parts(s)):
                if j == user:
                    continue
                lam = in_own_span(pvecs[w_j])
                val -= plan.signs[s][i] * (lam @ cached[d_map[j] - 1])
            sign_u = plan.signs[s][s.index(user)]
            rows.append(pvecs[w][None, :])
            rhs.append(np.mod(val * sign_u, q)[None, :])
        solution = solve_with_cache(
            meta.setdefault("_solve_cache", {}), np.vstack(rows), q, np.vstack(rhs)
        )
        if solution is None:
            raise DecodingVectorNotFound("flex decoding stack inconsistent")
        return solution.reshape(-1)


def _full_col_rank(a: np.ndarray, q: int, want: int) -> bool:
    from ..gf import array_rank

    return array_rank(a, q) == want


class Ht3Scheme(FlexScheme):
    """Large-memory corner point: flex at t = K'-1 with subpacketization K'."""

    name = "ht3"

    def __init__(self):
        super().__init__(l_t=None)

    def _effective(self, params):
        return params.k_active - 1, params.k_active

    def validate(self, params):
        _require(params.k_active >= 3, "ht3 needs K' >= 3")
        ka = params.k_active
        r = binom(ka - 1, ka - 2)
        if params.q <= params.k_total * r:
            raise FieldTooSmall(
                f"ht3 needs q > K*(K'-1) = {params.k_total * r}, got {params.q}"
            )

    def min_field(self, params):
        return params.k_total * (params.k_active - 1) + 1

    def declared_point(self, params):
        ka, n = params.k_active, params.n_files
        return TradeoffPoint(Fraction(n * (ka - 1), ka), Fraction(1, ka))
