"""Demand-private hotplug schemes.

pk_plus    privacy keys over uncoded placement; delivery follows the query
           matrix, offline users inherit the first leader's query.
ht1_pk     privacy keys over the MDS-coded placement of ht1; extra coded
           keys cover the gap between MAN rows and the subpacketization.
ht3_pk     one multicast message built from per-user delivery vectors that
           live in every other active user's row span.
ht_vu      direct virtual-users construction at subpacketization K'(N-1)+1.
vu(inner)  generic lift of a non-private hotplug scheme at (NK', NK, N) to a
           private (K', K, N) scheme via per-user one-time-pad shifts.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from ..errors import (
    ConditionViolated,
    DecodingVectorNotFound,
    FieldTooSmall,
    InfeasibleXi,
    PhiNotFound,
    UnsupportedParams,
)
from ..gf import FieldMatrix, array_rank, mat_solve, solve_with_cache
from ..mds import MdsSpec, extension_row, vandermonde
from ..model import (
    DeliveryTranscript,
    DemandVector,
    PlacementOutcome,
    SystemParams,
    TradeoffPoint,
    leader_set,
    subset_index,
    subsets,
)
from .base import Scheme, binom
from .multicast import build_plan, ensure_omission_sound, message_parts
from .nonprivate import (
    _MulticastDeliveryMixin,
    _require,
    cached_subsets,
    common_span_vectors,
    unit_row,
)


def key_vector_space(n: int, q: int) -> list[tuple[int, ...]]:
    """All key vectors: length-n tuples over GF(q) whose entries sum to q-1."""
    out = []
    for head in itertools.product(range(q), repeat=n - 1):
        last = (q - 1 - sum(head)) % q
        out.append(head + (last,))
    return out


def _draw_key(n: int, q: int, rng) -> np.ndarray:
    head = rng.integers(0, q, size=n - 1)
    last = (q - 1 - int(head.sum())) % q
    return np.concatenate([head, [last]]).astype(np.int64)


def query_vector(p: np.ndarray, demanded_file: int, q: int) -> np.ndarray:
    return np.mod(p + unit_row(demanded_file, len(p)), q)


class PkPlusScheme(_MulticastDeliveryMixin, Scheme):
    """Privacy-keys scheme extended to offline users."""

    name = "pk_plus"
    is_private = True

    def validate(self, params):
        _require(params.t is not None, "pk_plus needs the parameter t")
        _require(0 <= params.t <= params.k_total, f"t={params.t} outside [0, K]")

    def subpacketization(self, params):
        return binom(params.k_total, params.t)

    def declared_point(self, params):
        k, ka, n, t = params.k_total, params.k_active, params.n_files, params.t
        r = min(ka, n - 1)
        m = 1 + Fraction(t, k) * (n - 1)
        load = Fraction(binom(k, t + 1) - binom(k - r, t + 1), binom(k, t))
        return TradeoffPoint(m, load)

    def randomness_space(self, params):
        return key_vector_space(params.n_files, params.q)

    def place(self, params, library, seed=0, randomness=None):
        self.validate(params)
        k, n, t, q = params.k_total, params.n_files, params.t, params.q
        sub = self.subpacketization(params)
        blocks = library.blocks(sub)
        w_index = subset_index(subsets(k, t))
        rng = np.random.default_rng(seed)
        caches, user_meta = {}, {}
        for u in range(1, k + 1):
            if randomness is not None:
                p = np.asarray(randomness[u], dtype=np.int64) % q
            else:
                p = _draw_key(n, q, rng)
            mine = [w_index[w] for w in cached_subsets(range(1, k + 1), t, u)]
            others = [w_index[w] for w in subsets(k, t) if u not in w]
            man = blocks[:, mine, :]
            keys = np.mod(np.einsum("n,nwp->wp", p, blocks[:, others, :]), q)
            caches[u] = np.concatenate([man.reshape(-1), keys.reshape(-1)])
            user_meta[u] = {"p": p}
        meta = {"scheme": self.name, "t": t, "k": k, "piece_factor": 1}
        return PlacementOutcome(
            caches=caches,
            user_meta=user_meta,
            meta=meta,
            b_symbols=library.b_symbols,
            subpacketization=sub,
            server={"blocks": blocks},
        )

    def deliver(self, params, placement, demand):
        q, n, t, k = params.q, params.n_files, params.t, params.k_total
        active = list(demand.active)
        queries = {
            u: query_vector(placement.user_meta[u]["p"], demand.demands[u], q)
            for u in active
        }
        rows = np.vstack([queries[u] for u in active])
        leaders = leader_set(rows, active, q)
        # Offline users inherit the first leader's query so the query matrix
        # rank (and with it the leader set) is capped by the active users.
        fallback = queries[leaders[0]] if leaders else np.zeros(n, dtype=np.int64)
        a_rows = {u: queries.get(u, fallback) for u in range(1, k + 1)}
        plan = build_plan(range(1, k + 1), t, a_rows, leaders, q, n)
        plan = ensure_omission_sound(plan)
        blocks = placement.server["blocks"]
        qmat = np.vstack([a_rows[u] for u in range(1, k + 1)])
        query_blocks = np.mod(np.einsum("kn,nwp->kwp", qmat, blocks), q)
        tables = {u: query_blocks[u - 1] for u in range(1, k + 1)}
        payload = self._payload(plan, tables)
        side = self._plan_side_info(plan, {"scheme": self.name, "active": active})
        return self._attach(DeliveryTranscript(payload, side), plan)

    def decode(self, params, meta, user, cache, user_meta, transcript, demanded_file, ctx=None):
        ctx = ctx or self.make_decode_context(params, meta, transcript)
        plan = ctx.plan
        q, n, t, k = params.q, params.n_files, params.t, params.k_total
        piece = ctx.piece
        mine = cached_subsets(range(1, k + 1), t, user)
        mine_pos = {w: i for i, w in enumerate(mine)}
        others = [w for w in subsets(k, t) if user not in w]
        other_pos = {w: i for i, w in enumerate(others)}
        man_size = n * len(mine) * piece
        man = cache[:man_size].reshape(n, len(mine), piece)
        keys = cache[man_size:].reshape(len(others), piece)
        out = np.zeros((binom(k, t), piece), dtype=np.int64)
        w_index = subset_index(subsets(k, t))
        users = list(plan.universe)
        qmat = np.vstack([plan.a_rows[j] for j in users])
        known = np.mod(np.einsum("kn,nwp->kwp", qmat, man), q)
        row_of = {j: i for i, j in enumerate(users)}
        for w in mine:
            out[w_index[w]] = man[demanded_file - 1, mine_pos[w], :]
        for w in others:
            s = tuple(sorted((user,) + w))
            val = ctx.value(s).copy()
            for i, (j, w_j) in enumerate(message_parts(s)):
                if j == user:
                    continue
                val -= plan.signs[s][i] * known[row_of[j], mine_pos[w_j], :]
            sign_u = plan.signs[s][s.index(user)]
            own_query_block = np.mod(val * sign_u, q)
            out[w_index[w]] = np.mod(own_query_block - keys[other_pos[w]], q)
        return out.reshape(-1)


class Ht1PkScheme(_MulticastDeliveryMixin, Scheme):
    """Privacy keys over MDS-coded placement at subpacketization C(K',t)."""

    name = "ht1_pk"
    is_private = True

    def validate(self, params):
        _require(params.t is not None, "ht1_pk needs the parameter t")
        _require(0 <= params.t <= params.k_active, f"t={params.t} outside [0, K']")
        if params.q <= binom(params.k_total, params.t):
            raise FieldTooSmall(
                f"ht1_pk needs q > C(K,t) = {binom(params.k_total, params.t)}, got {params.q}"
            )

    def min_field(self, params):
        return binom(params.k_total, params.t) + 1

    def subpacketization(self, params):
        return binom(params.k_active, params.t)

    def _eta(self, params) -> int:
        return max(
            0, binom(params.k_active, params.t) - binom(params.k_total - 1, params.t - 1)
        )

    def declared_point(self, params):
        k, ka, n, t = params.k_total, params.k_active, params.n_files, params.t
        r = min(ka, n - 1)
        sub = binom(ka, t)
        m = Fraction(n * binom(k - 1, t - 1) + self._eta(params), sub)
        load = Fraction(binom(ka, t + 1) - binom(ka - r, t + 1), sub)
        return TradeoffPoint(m, load)

    def randomness_space(self, params):
        return key_vector_space(params.n_files, params.q)

    def place(self, params, library, seed=0, randomness=None):
        self.validate(params)
        k, n, t, q = params.k_total, params.n_files, params.t, params.q
        sub = self.subpacketization(params)
        gen = vandermonde(MdsSpec(sub, binom(k, t), q))
        blocks = library.blocks(sub)
        coded = np.mod(np.einsum("ri,nip->nrp", gen.data, blocks), q)
        t_global = subsets(k, t)
        t_index = subset_index(t_global)
        eta = self._eta(params)
        rng = np.random.default_rng(seed)
        caches, user_meta = {}, {}
        for u in range(1, k + 1):
            if randomness is not None:
                p = np.asarray(randomness[u], dtype=np.int64) % q
            else:
                p = _draw_key(n, q, rng)
            mine = [t_index[w] for w in cached_subsets(range(1, k + 1), t, u)]
            man = coded[:, mine, :]
            xi_rows = self._pick_xi(gen.data, mine, t_global, t_index, u, eta, q)
            keys = np.mod(np.einsum("n,nrp->rp", p, coded[:, xi_rows, :]), q)
            caches[u] = np.concatenate([man.reshape(-1), keys.reshape(-1)])
            user_meta[u] = {"p": p, "xi": xi_rows}
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
            user_meta=user_meta,
            meta=meta,
            b_symbols=library.b_symbols,
            subpacketization=sub,
            server={"coded": coded, "t_index": t_index},
        )

    @staticmethod
    def _pick_xi(gen, mine, t_global, t_index, user, eta, q) -> list[int]:
        """Greedy lexicographic pick of extra key rows independent of the MAN rows."""
        if eta == 0:
            return []
        chosen: list[int] = []
        base = gen[mine, :]
        rank = array_rank(base, q)
        for w in t_global:
            if user in w:
                continue
            idx = t_index[w]
            trial = np.vstack([base] + [gen[[c], :] for c in chosen] + [gen[[idx], :]])
            r = array_rank(trial, q)
            if r > rank + len(chosen):
                chosen.append(idx)
                if len(chosen) == eta:
                    return chosen
        raise InfeasibleXi(f"could not find {eta} independent key rows for user {user}")

    def deliver(self, params, placement, demand):
        q, n, t = params.q, params.n_files, params.t
        active = list(demand.active)
        queries = {
            u: query_vector(placement.user_meta[u]["p"], demand.demands[u], q)
            for u in active
        }
        rows = np.vstack([queries[u] for u in active])
        leaders = leader_set(rows, active, q)
        plan = build_plan(active, t, queries, leaders, q, n)
        plan = ensure_omission_sound(plan)
        coded = placement.server["coded"]
        t_index = placement.server["t_index"]
        local = coded[:, [t_index[w] for w in plan.blocks], :]
        qmat = np.vstack([queries[u] for u in active])
        query_blocks = np.mod(np.einsum("kn,nwp->kwp", qmat, local), q)
        tables = {u: query_blocks[i] for i, u in enumerate(active)}
        payload = self._payload(plan, tables)
        side = self._plan_side_info(plan, {"scheme": self.name, "active": active})
        return self._attach(DeliveryTranscript(payload, side), plan)

    def decode(self, params, meta, user, cache, user_meta, transcript, demanded_file, ctx=None):
        ctx = ctx or self.make_decode_context(params, meta, transcript)
        plan = ctx.plan
        q, n, t, k = params.q, params.n_files, params.t, params.k_total
        piece = ctx.piece
        gen = meta["generator"]
        t_global = subsets(k, t)
        t_index = subset_index(t_global)
        mine = [w for w in t_global if user in w]
        mine_pos = {w: i for i, w in enumerate(mine)}
        man_size = n * len(mine) * piece
        man = cache[:man_size].reshape(n, len(mine), piece)
        keys = cache[man_size:].reshape(-1, piece)
        p = np.asarray(user_meta["p"], dtype=np.int64)
        q_self = query_vector(p, demanded_file, q)

        # Every key combination T(p, g) is reachable: MAN rows give T(p, g_T)
        # for T containing the user, the extra keys close the span.
        basis_rows = [gen[t_index[w], :] for w in mine] + [gen[i, :] for i in user_meta["xi"]]
        basis_vals = [np.mod(p @ man[:, mine_pos[w], :], q) for w in mine] + list(keys)
        basis = FieldMatrix(np.vstack(basis_rows).T if basis_rows else np.zeros((gen.shape[1], 0)), q)
        coeff_cache = meta.setdefault("_span_cache", {})

        def key_value(row) -> np.ndarray:
            ckey = (user, row.tobytes())
            coeff = coeff_cache.get(ckey)
            if coeff is None:
                coeff = mat_solve(basis, row)
                if coeff is None:
                    raise DecodingVectorNotFound("key row outside the cached key span")
                coeff_cache[ckey] = coeff
            acc = np.zeros(piece, dtype=np.int64)
            for c, v in zip(coeff, basis_vals):
                if c:
                    acc = acc + int(c) * v
            return np.mod(acc, q)

        active_t = plan.blocks
        users = list(plan.universe)
        qmat = np.vstack([plan.a_rows[j] for j in users])
        known = np.mod(np.einsum("kn,nwp->kwp", qmat, man), q)
        row_of = {j: i for i, j in enumerate(users)}
        vals = np.zeros((len(active_t), piece), dtype=np.int64)
        for pos, w in enumerate(active_t):
            if user in w:
                vals[pos] = man[demanded_file - 1, mine_pos[w], :]
                continue
            s = tuple(sorted((user,) + w))
            val = ctx.value(s).copy()
            for i, (j, w_j) in enumerate(message_parts(s)):
                if j == user:
                    continue
                val -= plan.signs[s][i] * known[row_of[j], mine_pos[w_j], :]
            sign_u = plan.signs[s][s.index(user)]
            query_block = np.mod(val * sign_u, q)
            vals[pos] = np.mod(query_block - key_value(gen[t_index[w], :]), q)
        rows = [t_index[w] for w in active_t]
        solution = solve_with_cache(meta.setdefault("_solve_cache", {}), gen[rows, :], q, vals)
        if solution is None:
            raise DecodingVectorNotFound("ht1_pk MDS system inconsistent")
        return solution.reshape(-1)


class Ht3PkScheme(Scheme):
    """Single-message private scheme at memory N - (N-1)/K'."""

    name = "ht3_pk"
    is_private = True

    def validate(self, params):
        _require(params.k_active >= 3, "ht3_pk needs K' >= 3")
        need = params.k_total * (params.k_active - 1) + 1
        if params.q <= need:
            raise FieldTooSmall(f"ht3_pk needs q > K(K'-1)+1 = {need}, got {params.q}")

    def min_field(self, params):
        return params.k_total * (params.k_active - 1) + 2

    def subpacketization(self, params):
        return params.k_active

    def declared_point(self, params):
        ka, n = params.k_active, params.n_files
        return TradeoffPoint(Fraction(n) - Fraction(n - 1, ka), Fraction(1, ka))

    def randomness_space(self, params):
        return key_vector_space(params.n_files, params.q)

    def place(self, params, library, seed=0, randomness=None):
        self.validate(params)
        k, ka, n, q = params.k_total, params.k_active, params.n_files, params.q
        spec = MdsSpec(ka, k * (ka - 1), q)
        gen = vandermonde(spec)
        xi = extension_row(spec)
        gblocks = {u: gen.data[(u - 1) * (ka - 1) : u * (ka - 1), :] for u in range(1, k + 1)}
        for u in range(1, k + 1):
            if array_rank(np.vstack([gblocks[u], xi[None, :]]), q) != ka:
                raise ConditionViolated(f"[G_{u}; xi] is rank deficient")
        for group in subsets(k, ka):
            stack = np.vstack([gblocks[u] for u in group])
            if array_rank(stack, q) != ka:
                raise ConditionViolated(f"stacked blocks for {group} are rank deficient")
        blocks = library.blocks(ka)
        coded = np.mod(np.einsum("ri,nip->nrp", gen.data, blocks), q)
        xi_coded = np.mod(np.einsum("i,nip->np", xi, blocks), q)
        rng = np.random.default_rng(seed)
        caches, user_meta = {}, {}
        for u in range(1, k + 1):
            if randomness is not None:
                p = np.asarray(randomness[u], dtype=np.int64) % q
            else:
                p = _draw_key(n, q, rng)
            man = coded[:, (u - 1) * (ka - 1) : u * (ka - 1), :]
            key = np.mod(np.einsum("n,np->p", p, xi_coded), q)
            caches[u] = np.concatenate([man.reshape(-1), key.reshape(-1)])
            user_meta[u] = {"p": p}
        meta = {
            "scheme": self.name,
            "generator": gen.data,
            "xi": xi,
            "mds_certificates": [(gen.data, ka)],
        }
        return PlacementOutcome(
            caches=caches,
            user_meta=user_meta,
            meta=meta,
            b_symbols=library.b_symbols,
            subpacketization=ka,
            server={"blocks": blocks, "phi_cache": {}},
        )

    def _phi_family(self, params, placement, active) -> dict[int, np.ndarray]:
        q, ka = params.q, params.k_active
        gen = placement.meta["generator"]
        cache = placement.server["phi_cache"]
        key = tuple(active)
        if key in cache:
            return cache[key]
        gblocks = {u: gen[(u - 1) * (ka - 1) : u * (ka - 1), :] for u in active}
        phi = {}
        for j in active:
            others = [gblocks[u] for u in active if u != j]
            candidates = common_span_vectors(others, q)
            pick = None
            for cand in candidates:
                if array_rank(np.vstack([gblocks[j], cand[None, :]]), q) == ka:
                    pick = cand
                    break
            if pick is None:
                raise PhiNotFound(f"no delivery vector for user {j} in {active}")
            phi[j] = pick
        cache[key] = phi
        return phi

    def deliver(self, params, placement, demand):
        q, n = params.q, params.n_files
        active = list(demand.active)
        phi = self._phi_family(params, placement, active)
        queries = {
            u: query_vector(placement.user_meta[u]["p"], demand.demands[u], q)
            for u in active
        }
        blocks = placement.server["blocks"]
        acc = np.zeros(blocks.shape[2], dtype=np.int64)
        for j in active:
            per_file = np.mod(np.einsum("l,nlp->np", phi[j], blocks), q)
            acc = acc + np.mod(np.einsum("n,np->p", queries[j], per_file), q)
        payload = [("X[%s]" % ",".join(map(str, active)), np.mod(acc, q))]
        side = {
            "scheme": self.name,
            "active": active,
            "queries": {str(u): queries[u].tolist() for u in active},
            "phi": {str(u): phi[u].tolist() for u in active},
        }
        return DeliveryTranscript(payload, side)

    def decode(self, params, meta, user, cache, user_meta, transcript, demanded_file, ctx=None):
        q, n, ka = params.q, params.n_files, params.k_active
        side = transcript.side_info
        active = [int(u) for u in side["active"]]
        queries = {int(u): np.asarray(v, dtype=np.int64) for u, v in side["queries"].items()}
        phi = {int(u): np.asarray(v, dtype=np.int64) for u, v in side["phi"].items()}
        gen = meta["generator"]
        xi = meta["xi"]
        gu = gen[(user - 1) * (ka - 1) : user * (ka - 1), :]
        piece = cache.size // (n * (ka - 1) + 1)
        man = cache[: n * (ka - 1) * piece].reshape(n, ka - 1, piece)
        key = cache[n * (ka - 1) * piece :]
        p = np.asarray(user_meta["p"], dtype=np.int64)
        span_cache = meta.setdefault("_span_cache", {})

        def own_span(vec):
            ckey = (user, vec.tobytes())
            lam = span_cache.get(ckey)
            if lam is None:
                lam = mat_solve(FieldMatrix(gu.T, q), vec)
                if lam is None:
                    raise PhiNotFound("interfering delivery vector outside own span")
                span_cache[ckey] = lam
            return lam

        total = transcript.payload[0][1].copy()
        for j in active:
            if j == user:
                continue
            lam = own_span(phi[j])
            block = np.mod(np.einsum("n,np->p", queries[j], np.mod(lam @ man, q)), q)
            total -= block
        total = np.mod(total, q)  # T(q_user, phi_user)
        coeff = mat_solve(FieldMatrix(np.vstack([gu, xi[None, :]]).T, q), phi[user])
        if coeff is None:
            raise PhiNotFound("own delivery vector outside [G_user; xi] span")
        own_key = np.zeros(piece, dtype=np.int64)
        for l in range(ka - 1):
            if coeff[l]:
                own_key = own_key + int(coeff[l]) * np.mod(p @ man[:, l, :], q)
        if coeff[ka - 1]:
            own_key = own_key + int(coeff[ka - 1]) * key
        desired = np.mod(total - own_key, q)  # T(e_d, phi_user)
        rhs = np.vstack([man[demanded_file - 1], desired[None, :]])
        solution = solve_with_cache(
            meta.setdefault("_solve_cache", {}), np.vstack([gu, phi[user][None, :]]), q, rhs
        )
        if solution is None:
            raise DecodingVectorNotFound("ht3_pk final system inconsistent")
        return solution.reshape(-1)


class HtVuScheme(Scheme):
    """Direct virtual-users construction at subpacketization K'(N-1)+1."""

    name = "ht_vu"
    is_private = True

    def validate(self, params):
        _require(params.n_files >= 2, "ht_vu needs at least two files to hide a demand")
        need = params.k_total * params.n_files
        if params.q <= need:
            raise FieldTooSmall(f"ht_vu needs q > K*N = {need}, got {params.q}")

    def min_field(self, params):
        return params.k_total * params.n_files + 1

    def subpacketization(self, params):
        return params.k_active * (params.n_files - 1) + 1

    def declared_point(self, params):
        sub = self.subpacketization(params)
        n = params.n_files
        return TradeoffPoint(Fraction(1, sub), Fraction(n) * (1 - Fraction(1, sub)))

    def randomness_space(self, params):
        return list(range(1, params.n_files + 1))

    @staticmethod
    def _row(user: int, slot: int, n: int) -> int:
        return (user - 1) * n + slot - 1  # zero-based row in the generator

    def place(self, params, library, seed=0, randomness=None):
        self.validate(params)
        k, n, q = params.k_total, params.n_files, params.q
        sub = self.subpacketization(params)
        gen = vandermonde(MdsSpec(sub, k * n, q))
        blocks = library.blocks(sub)
        total = np.mod(blocks.sum(axis=0), q)
        rng = np.random.default_rng(seed)
        caches, user_meta = {}, {}
        for u in range(1, k + 1):
            tau = int(randomness[u]) if randomness is not None else int(rng.integers(1, n + 1))
            row = gen.data[self._row(u, tau, n)]
            caches[u] = np.mod(row @ total, q).reshape(-1)
            user_meta[u] = {"tau": tau}
        meta = {
            "scheme": self.name,
            "generator": gen.data,
            "mds_certificates": [(gen.data, sub)],
        }
        return PlacementOutcome(
            caches=caches,
            user_meta=user_meta,
            meta=meta,
            b_symbols=library.b_symbols,
            subpacketization=sub,
            server={"blocks": blocks},
        )

    @staticmethod
    def _shifted_demand(slot: int, offset: int, n: int) -> int:
        return ((slot - offset - 1) % n) + 1

    def deliver(self, params, placement, demand):
        q, n = params.q, params.n_files
        active = list(demand.active)
        gen = placement.meta["generator"]
        blocks = placement.server["blocks"]
        offsets = {
            u: (placement.user_meta[u]["tau"] - demand.demands[u]) % n for u in active
        }
        payload = []
        for u in active:
            for slot in range(1, n + 1):
                hidden = self._shifted_demand(slot, offsets[u], n)
                row = gen[self._row(u, slot, n)]
                for f in range(1, n + 1):
                    if f != hidden:
                        payload.append(
                            (f"C[{u},{slot},{f}]", np.mod(row @ blocks[f - 1], q))
                        )
        side = {
            "scheme": self.name,
            "active": active,
            "offsets": {str(u): offsets[u] for u in active},
        }
        return DeliveryTranscript(payload, side)

    def decode(self, params, meta, user, cache, user_meta, transcript, demanded_file, ctx=None):
        q, n = params.q, params.n_files
        sub = self.subpacketization(params)
        side = transcript.side_info
        active = [int(u) for u in side["active"]]
        offsets = {int(u): int(o) for u, o in side["offsets"].items()}
        values = dict(transcript.payload)
        gen = meta["generator"]
        tau = user_meta["tau"]
        unlock = cache.copy()
        for f in range(1, n + 1):
            if f != demanded_file:
                unlock -= values[f"C[{user},{tau},{f}]"]
        unlock = np.mod(unlock, q)
        rows = [self._row(user, tau, n)]
        vals = [unlock]
        for u in active:
            for slot in range(1, n + 1):
                hidden = self._shifted_demand(slot, offsets[u], n)
                if hidden != demanded_file:
                    rows.append(self._row(u, slot, n))
                    vals.append(values[f"C[{u},{slot},{demanded_file}]"])
        if len(rows) != sub or len(set(rows)) != sub:
            raise DecodingVectorNotFound(
                f"collected {len(rows)} coded symbols, need exactly {sub} distinct ones"
            )
        solution = solve_with_cache(
            meta.setdefault("_solve_cache", {}), gen[rows, :], q, np.vstack(vals)
        )
        if solution is None:
            raise DecodingVectorNotFound("ht_vu MDS system inconsistent")
        return solution.reshape(-1)


class VirtualUsersScheme(Scheme):
    """Lift a non-private hotplug scheme at (NK', NK, N) to a private one."""

    is_private = True

    def __init__(self, inner: Scheme):
        self.inner = inner
        self.name = f"vu({inner.name})"

    def _expanded(self, params: SystemParams) -> SystemParams:
        return params.expanded_for_virtual_users()

    def validate(self, params):
        self.inner.validate(self._expanded(params))

    def min_field(self, params):
        return self.inner.min_field(self._expanded(params))

    def subpacketization(self, params):
        return self.inner.subpacketization(self._expanded(params))

    def declared_point(self, params):
        return self.inner.declared_point(self._expanded(params))

    def randomness_space(self, params):
        return list(range(1, params.n_files + 1))

    def _virtual(self, user: int, tau: int, n: int) -> int:
        return (user - 1) * n + tau

    def place(self, params, library, seed=0, randomness=None):
        self.validate(params)
        k, n = params.k_total, params.n_files
        expanded = self._expanded(params)
        inner_placement = self.inner.place(expanded, library)
        rng = np.random.default_rng(seed)
        caches, user_meta = {}, {}
        for u in range(1, k + 1):
            tau = int(randomness[u]) if randomness is not None else int(rng.integers(1, n + 1))
            caches[u] = inner_placement.caches[self._virtual(u, tau, n)]
            user_meta[u] = {"tau": tau}
        meta = {
            "scheme": self.name,
            "inner_meta": inner_placement.meta,
            "mds_certificates": inner_placement.meta.get("mds_certificates", []),
        }
        return PlacementOutcome(
            caches=caches,
            user_meta=user_meta,
            meta=meta,
            b_symbols=library.b_symbols,
            subpacketization=inner_placement.subpacketization,
            server={"inner_placement": inner_placement},
        )

    def deliver(self, params, placement, demand):
        n = params.n_files
        active = list(demand.active)
        offsets = {
            u: (placement.user_meta[u]["tau"] - demand.demands[u]) % n for u in active
        }
        virtual_active = []
        virtual_demands = {}
        for u in active:
            for slot in range(1, n + 1):
                vid = self._virtual(u, slot, n)
                virtual_active.append(vid)
                virtual_demands[vid] = HtVuScheme._shifted_demand(slot, offsets[u], n)
        inner_demand = DemandVector(tuple(virtual_active), virtual_demands)
        inner_tr = self.inner.deliver(
            self._expanded(params), placement.server["inner_placement"], inner_demand
        )
        side = {
            "scheme": self.name,
            "active": active,
            "offsets": {str(u): offsets[u] for u in active},
            "inner": inner_tr.side_info,
        }
        return DeliveryTranscript(inner_tr.payload, side)

    def make_decode_context(self, params, meta, transcript):
        inner_tr = DeliveryTranscript(transcript.payload, transcript.side_info["inner"])
        return self.inner.make_decode_context(
            self._expanded(params), meta["inner_meta"], inner_tr
        )

    def decode(self, params, meta, user, cache, user_meta, transcript, demanded_file, ctx=None):
        n = params.n_files
        tau = user_meta["tau"]
        vid = self._virtual(user, tau, n)
        inner_tr = DeliveryTranscript(transcript.payload, transcript.side_info["inner"])
        # The virtual user at the tau slot demands exactly the real file.
        return self.inner.decode(
            self._expanded(params),
            meta["inner_meta"],
            vid,
            cache,
            {},
            inner_tr,
            demanded_file,
            ctx=ctx,
        )
