"""Compiled twin of :class:`sophlearn.planner.TreeSearch`.

Mirrors the reference search term by term; node state that the reference
keeps in dictionaries lives here in small per-path arrays:

* ``ent_*``: one entry per in-tree (or root-window) observation credited to
  the counts.  The count delta of an entry is ``credit - base``; ``base`` is
  the part already contained in the root counts.
* ``path_pos``: cells entered along the path, for in-tree visit counts.

Memo keys are a pair of 64-bit hashes over the quantised node state.
"""

import math

import numpy as np
from numba import njit, types
from numba.typed import Dict

N_ACT = 5
N_RES = 4

OBJ_EFE = 0
OBJ_EFE_SMOOTH = 1
OBJ_REWARD = 2
OBJ_REWARD_UCB = 3

_OFFSET = 4611686018427387904


@njit(cache=True)
def digamma(x):
    """Recurrence up to x >= 6, then the asymptotic series (abs. error < 1e-14)."""
    r = 0.0
    while x < 6.0:
        r -= 1.0 / x
        x += 1.0
    f = 1.0 / (x * x)
    t = f * (-1.0 / 12 + f * (1.0 / 120 + f * (-1.0 / 252 + f * (1.0 / 240 + f * (-1.0 / 132 + f * (691.0 / 32760 - f / 12.0))))))
    return r + math.log(x) - 0.5 / x + t


@njit(cache=True)
def increment_kl(a_r, a_0, d):
    kl = (math.lgamma(a_0 + d) - math.lgamma(a_0) - math.lgamma(a_r + d) + math.lgamma(a_r)
          + d * (digamma(a_r + d) - digamma(a_0 + d)))
    return kl if kl > 0.0 else 0.0


@njit(cache=True)
def dirichlet_kl_col(a, b):
    """KL(Dir(a) || Dir(b)) for one column of outcome counts."""
    a0 = 0.0
    b0 = 0.0
    s = 0.0
    for i in range(a.shape[0]):
        a0 += a[i]
        b0 += b[i]
    s = math.lgamma(a0) - math.lgamma(b0)
    psi0 = digamma(a0)
    for i in range(a.shape[0]):
        s += math.lgamma(b[i]) - math.lgamma(a[i]) + (a[i] - b[i]) * (digamma(a[i]) - psi0)
    return s if s > 0.0 else 0.0


@njit(cache=True)
def _mix(h, v):
    h = (h ^ np.uint64(v + _OFFSET)) * np.uint64(0x100000001B3)
    h ^= h >> np.uint64(29)
    return h


@njit(cache=True)
def _quant(x, scale):
    return np.int64(np.round(x * scale))


@njit(cache=True)
def counts_column(pos, base_counts, ent_pos, ent_r, ent_credit, ent_base, n_ent, C):
    col = base_counts[:, pos, :].copy()
    for e in range(n_ent):
        if ent_pos[e] == pos:
            for c in range(C):
                col[ent_r[e], c] += ent_credit[e, c] - ent_base[e, c]
    return col


@njit(cache=True)
def resource_column(pos, learning, A_res, base_counts, ent_pos, ent_r, ent_credit, ent_base, n_ent, C):
    if not learning:
        return A_res[:, pos, :].copy()
    touched = False
    for e in range(n_ent):
        if ent_pos[e] == pos:
            touched = True
            break
    if not touched:
        return A_res[:, pos, :].copy()
    col = counts_column(pos, base_counts, ent_pos, ent_r, ent_credit, ent_base, n_ent, C)
    for c in range(C):
        s = 0.0
        for r in range(N_RES):
            s += col[r, c]
        for r in range(N_RES):
            col[r, c] /= s
    return col


@njit(cache=True)
def joint_rows(pos, A_r, A_ctx, ctx_rows, n_ctx_rows, C):
    """Likelihood rows ``L[o, c]`` and outcome labels for every joint observation at ``pos``."""
    nk = n_ctx_rows[pos]
    n_obs = N_RES * nk
    L = np.empty((n_obs, C))
    o_r = np.empty(n_obs, dtype=np.int64)
    o_k = np.empty(n_obs, dtype=np.int64)
    i = 0
    for r in range(N_RES):
        for j in range(nk):
            k = ctx_rows[pos, j]
            for c in range(C):
                L[i, c] = A_r[r, c] * A_ctx[k, pos, c]
            o_r[i] = r
            o_k[i] = k
            i += 1
    return L, o_r, o_k


@njit(cache=True)
def log_softmax(x):
    m = x.max()
    s = 0.0
    for i in range(x.shape[0]):
        s += math.exp(x[i] - m)
    return x - (m + math.log(s))


@njit(cache=True)
def preferences(clocks, limits, empty_reward, penalty):
    raw = np.empty(N_RES)
    raw[0] = empty_reward
    for i in range(3):
        raw[1 + i] = clocks[i]
    for i in range(3):
        if clocks[i] >= limits[i]:
            raw[0] = penalty
            raw[1 + i] = penalty
    return raw


@njit(cache=True)
def outcome_rewards(clocks, limits, empty_reward, penalty):
    raw = preferences(clocks, limits, empty_reward, penalty)
    for o in range(N_RES):
        for r in range(1, 4):
            if o != r and clocks[r - 1] + 1 >= limits[r - 1]:
                raw[o] = penalty
    return raw


@njit(cache=True)
def softmax_expectation(v, temperature):
    best = -np.inf
    for i in range(v.shape[0]):
        if np.isfinite(v[i]) and v[i] > best:
            best = v[i]
    if best == -np.inf:
        return -np.inf
    wsum = 0.0
    acc = 0.0
    for i in range(v.shape[0]):
        if np.isfinite(v[i]):
            w = math.exp((v[i] - best) / temperature)
            wsum += w
            acc += w * v[i]
    return acc / wsum


@njit(cache=True)
def tour_survival_one(start, clocks, M, Y, limits, seqs, cap, c):
    """Best capped survival over visit sequences from ``start`` in context ``c``."""
    S, V = seqs.shape
    best = -np.inf
    k = np.empty(3)
    for s in range(S):
        cur = start
        for i in range(3):
            k[i] = clocks[i]
        t = 0.0
        dead_at = np.inf
        for v in range(V):
            r = seqs[s, v]
            d = np.ceil(M[cur, r, c])
            if d < 1.0:
                d = 1.0
            room_other = np.inf
            for i in range(3):
                if i != r:
                    room = limits[i] - k[i]
                    if room < room_other:
                        room_other = room
            target = limits[r] - k[r]
            if room_other <= d or target < d:
                dead_at = t + min(room_other, target)
                break
            t += d
            for i in range(3):
                k[i] += d
            k[r] = 0.0
            cur = Y[cur, r, c]
        if dead_at < np.inf:
            end = dead_at
        else:
            slack = np.inf
            for i in range(3):
                if limits[i] - k[i] < slack:
                    slack = limits[i] - k[i]
            end = t + slack
        if end > cap:
            end = cap
        if end > best:
            best = end
    return best


@njit(cache=True)
def node_key(depth, pos, q, clocks, obs_r, obs_k, dead, learn_key, ent_pos, ent_r, ent_k, ent_filt, ent_credit,
             ent_base, n_ent, smooth, ucb, path_pos, n_path, scale):
    h1 = np.uint64(0xCBF29CE484222325)
    h2 = np.uint64(0x84222325CBF29CE4)
    vals = np.array([depth, pos, np.int64(clocks[0]), np.int64(clocks[1]), np.int64(clocks[2]), obs_r, obs_k,
                     1 if dead else 0], dtype=np.int64)
    for v in vals:
        h1 = _mix(h1, v)
        h2 = _mix(h2, v * 7919 + 1)
    for c in range(q.shape[0]):
        v = _quant(q[c], scale)
        h1 = _mix(h1, v)
        h2 = _mix(h2, v * 7919 + 3)
    if learn_key:
        for e in range(n_ent):
            h1 = _mix(h1, ent_pos[e])
            h2 = _mix(h2, ent_pos[e] * 31 + ent_r[e])
            h1 = _mix(h1, ent_r[e] * 101 + ent_k[e])
            for c in range(q.shape[0]):
                v = _quant(ent_credit[e, c] - ent_base[e, c], scale)
                h1 = _mix(h1, v)
                h2 = _mix(h2, v * 7919 + 5)
                if smooth:
                    w = _quant(ent_filt[e, c], scale)
                    u = _quant(ent_credit[e, c], scale)
                    h1 = _mix(h1, w)
                    h2 = _mix(h2, u * 7919 + 11)
    if ucb:
        srt = np.sort(path_pos[:n_path])
        for i in range(n_path):
            h1 = _mix(h1, srt[i] + 1000003)
            h2 = _mix(h2, srt[i] * 13 + 17)
    return (np.int64(h1 >> np.uint64(1)), np.int64(h2 >> np.uint64(1)))


@njit(cache=False)
def evaluate(depth, pos, q, clocks, obs_r, obs_k, dead,
             ent_pos, ent_r, ent_k, ent_filt, ent_credit, ent_base, n_ent, path_pos, n_path,
             # static model
             moves, A_res, base_counts, A_ctx, ctx_rows, n_ctx_rows, B, limits, empty_reward, penalty, c_pref,
             c_ucb, visits, t_global, M, Y, seqs,
             # static config
             objective, learning, horizon, thr, margin, temperature, bh, leaf_on, leaf_weight, leaf_cap,
             memo_on, scale, memo, counters, tour_memo, tour_base):
    counters[0] += 1
    C = q.shape[0]
    uses_efe = objective == OBJ_EFE or objective == OBJ_EFE_SMOOTH
    learn_tree = learning and objective != OBJ_EFE
    smooth = learning and objective == OBJ_EFE_SMOOTH
    out = np.empty(N_ACT)
    if dead:
        raw = preferences(clocks, limits, empty_reward, penalty)
        if uses_efe:
            dv = log_softmax(c_pref * raw)[0]
        else:
            dv = penalty
        for a in range(N_ACT):
            out[a] = dv * (horizon - depth + 1)
        return out

    extra = 0.0
    if depth > 0 and smooth and n_ent > 0:
        # retrospective re-credit of the smoothing window, on private copies
        ent_credit = ent_credit.copy()
        lo = n_ent - 1 - bh
        if lo < 0:
            lo = 0
        m = n_ent - lo
        liks = np.empty((m, C))
        for j in range(m):
            e = lo + j
            col = resource_column(ent_pos[e], learning, A_res, base_counts, ent_pos, ent_r, ent_credit, ent_base,
                                  n_ent, C)
            for c in range(C):
                liks[j, c] = col[ent_r[e], c] * A_ctx[ent_k[e], ent_pos[e], c]
        beta = np.ones(C)
        sm_all = np.empty((m, C))
        for j in range(m - 1, -1, -1):
            e = lo + j
            s = 0.0
            for c in range(C):
                sm_all[j, c] = ent_filt[e, c] * beta[c]
                s += sm_all[j, c]
            for c in range(C):
                sm_all[j, c] /= s
            nb = np.zeros(C)
            for c in range(C):
                for c2 in range(C):
                    nb[c] += B[c2, c] * liks[j, c2] * beta[c2]
            beta = nb
        touched = np.empty(m, dtype=np.int64)
        n_touched = 0
        befores = np.empty((m, N_RES, C))
        for j in range(m):
            e = lo + j
            changed = False
            for c in range(C):
                if sm_all[j, c] - ent_credit[e, c] != 0.0:
                    changed = True
            if changed:
                seen = False
                for i in range(n_touched):
                    if touched[i] == ent_pos[e]:
                        seen = True
                if not seen:
                    befores[n_touched] = counts_column(ent_pos[e], base_counts, ent_pos, ent_r, ent_credit, ent_base,
                                                       n_ent, C)
                    touched[n_touched] = ent_pos[e]
                    n_touched += 1
        for j in range(m):
            e = lo + j
            for c in range(C):
                ent_credit[e, c] = sm_all[j, c]
        for i in range(n_touched):
            after = counts_column(touched[i], base_counts, ent_pos, ent_r, ent_credit, ent_base, n_ent, C)
            for c in range(C):
                extra += dirichlet_kl_col(after[:, c], befores[i, :, c])

    q_next = B @ q
    raw = outcome_rewards(clocks, limits, empty_reward, penalty)
    log_pref = log_softmax(c_pref * raw)

    values = np.zeros(N_ACT)
    positions = np.empty(N_ACT, dtype=np.int64)
    for a in range(N_ACT):
        p = moves[pos, a]
        positions[a] = p
        done = -1
        for b in range(a):
            if positions[b] == p:
                done = b
                break
        if done >= 0:
            values[a] = values[done]
            continue
        A_r = resource_column(p, learning, A_res, base_counts, ent_pos, ent_r, ent_credit, ent_base, n_ent, C)
        q_res = A_r @ q_next
        v = 0.0
        if uses_efe:
            for r in range(N_RES):
                v += q_res[r] * log_pref[r]
            L, o_r, o_k = joint_rows(p, A_r, A_ctx, ctx_rows, n_ctx_rows, C)
            epi = 0.0
            nov = 0.0
            if learning:
                col = counts_column(p, base_counts, ent_pos, ent_r, ent_credit, ent_base, n_ent, C)
                tot = np.zeros(C)
                for c in range(C):
                    for r in range(N_RES):
                        tot[c] += col[r, c]
            for o in range(L.shape[0]):
                qo = 0.0
                for c in range(C):
                    qo += L[o, c] * q_next[c]
                if qo <= 0.0:
                    continue
                for c in range(C):
                    j = L[o, c] * q_next[c]
                    if j > 0.0:
                        epi += j * math.log(L[o, c] / qo)
                if learning:
                    kl = 0.0
                    for c in range(C):
                        kl += increment_kl(col[o_r[o], c], tot[c], L[o, c] * q_next[c] / qo)
                    nov += qo * kl
            if epi < 0.0:
                epi = 0.0
            v += epi + nov
        else:
            for r in range(N_RES):
                v += q_res[r] * raw[r]
            if objective == OBJ_REWARD_UCB:
                n_vis = visits[p]
                for i in range(n_path):
                    if path_pos[i] == p:
                        n_vis += 1
                t = t_global + depth + 1
                if t < 1:
                    t = 1
                v += c_ucb * math.sqrt(math.log(t) / max(n_vis, 1.0))
        values[a] = v

    if depth >= horizon:
        if leaf_on:
            sc = c_pref if uses_efe else 1.0
            for a in range(N_ACT):
                surv = 0.0
                tk = positions[a]
                for i in range(3):
                    tk = tk * tour_base + np.int64(clocks[i])
                if tk in tour_memo:
                    per_ctx = tour_memo[tk]
                else:
                    per_ctx = np.empty(C)
                    for c in range(C):
                        per_ctx[c] = tour_survival_one(positions[a], clocks + 1.0, M, Y, limits, seqs, leaf_cap, c)
                    tour_memo[tk] = per_ctx
                for c in range(C):
                    if q_next[c] > 0.0:
                        surv += q_next[c] * per_ctx[c]
                values[a] += sc * leaf_weight * (surv - leaf_cap)
        for a in range(N_ACT):
            out[a] = values[a] + extra
        return out

    best = -np.inf
    for a in range(N_ACT):
        if values[a] > best:
            best = values[a]
    # likely states are shared by every action
    n_states = 0
    states = np.empty(C, dtype=np.int64)
    for c in range(C):
        if q_next[c] >= thr and q_next[c] > 0.0:
            states[n_states] = c
            n_states += 1
    if n_states == 0:
        states[0] = np.argmax(q_next)
        n_states = 1
    mass = 0.0
    for i in range(n_states):
        mass += q_next[states[i]]

    E = ent_pos.shape[0]
    for a in range(N_ACT):
        if not (best - values[a] <= margin):
            out[a] = -np.inf
            continue
        p = positions[a]
        A_r = resource_column(p, learning, A_res, base_counts, ent_pos, ent_r, ent_credit, ent_base, n_ent, C)
        L, o_r, o_k = joint_rows(p, A_r, A_ctx, ctx_rows, n_ctx_rows, C)
        n_obs = L.shape[0]
        # (observation, weight) pairs in first-seen order
        pair_o = np.empty(n_states * n_obs, dtype=np.int64)
        pair_w = np.empty(n_states * n_obs)
        n_pairs = 0
        order = np.empty(n_obs, dtype=np.int64)
        n_order = 0
        for i in range(n_states):
            s = states[i]
            tot = 0.0
            cnt = 0
            for o in range(n_obs):
                keep = L[o, s] >= thr if thr > 0 else L[o, s] > 0
                if keep:
                    tot += L[o, s]
                    cnt += 1
            if cnt == 0:
                om = 0
                for o in range(n_obs):
                    if L[o, s] > L[om, s]:
                        om = o
            for o in range(n_obs):
                if cnt == 0:
                    if o != om:
                        continue
                    w = 1.0
                else:
                    keep = L[o, s] >= thr if thr > 0 else L[o, s] > 0
                    if not keep:
                        continue
                    w = L[o, s] / tot
                pair_o[n_pairs] = o
                pair_w[n_pairs] = q_next[s] / mass * w
                n_pairs += 1
                seen = False
                for j in range(n_order):
                    if order[j] == o:
                        seen = True
                if not seen:
                    order[n_order] = o
                    n_order += 1
        future = 0.0
        for jo in range(n_order):
            o = order[jo]
            post = L[o] * q_next
            s = post.sum()
            post = post / s
            r = o_r[o]
            kclocks = clocks.copy()
            for i in range(3):
                kclocks[i] = 0.0 if r == i + 1 else clocks[i] + 1.0
            kdead = False
            for i in range(3):
                if kclocks[i] >= limits[i]:
                    kdead = True
            c_ent = n_ent
            k_pos, k_r, k_k, k_filt, k_credit, k_base = ent_pos, ent_r, ent_k, ent_filt, ent_credit, ent_base
            if learn_tree and not kdead:
                k_pos = ent_pos.copy()
                k_r = ent_r.copy()
                k_k = ent_k.copy()
                k_filt = ent_filt.copy()
                k_credit = ent_credit.copy()
                k_base = ent_base.copy()
                k_pos[c_ent] = p
                k_r[c_ent] = r
                k_k[c_ent] = o_k[o]
                for c in range(C):
                    k_filt[c_ent, c] = post[c]
                    k_credit[c_ent, c] = post[c]
                    k_base[c_ent, c] = 0.0
                c_ent += 1
            k_path = path_pos
            k_np = n_path
            if objective == OBJ_REWARD_UCB:
                k_path = path_pos.copy()
                k_path[n_path] = p
                k_np = n_path + 1
            key = (np.int64(0), np.int64(0))
            if memo_on:
                key = node_key(depth + 1, p, post, kclocks, r, o_k[o], kdead, learn_tree, k_pos, k_r, k_k, k_filt,
                               k_credit, k_base, c_ent, smooth, objective == OBJ_REWARD_UCB, k_path, k_np, scale)
            for i in range(n_pairs):
                if pair_o[i] != o:
                    continue
                if memo_on and key in memo:
                    counters[1] += 1
                    cv = memo[key]
                else:
                    cv = evaluate(depth + 1, p, post, kclocks, r, o_k[o], kdead,
                                  k_pos, k_r, k_k, k_filt, k_credit, k_base, c_ent, k_path, k_np,
                                  moves, A_res, base_counts, A_ctx, ctx_rows, n_ctx_rows, B, limits, empty_reward,
                                  penalty, c_pref, c_ucb, visits, t_global, M, Y, seqs,
                                  objective, learning, horizon, thr, margin, temperature, bh, leaf_on, leaf_weight,
                                  leaf_cap, memo_on, scale, memo, counters, tour_memo, tour_base)
                    if memo_on:
                        memo[key] = cv
                future += pair_w[i] * softmax_expectation(cv, temperature)
        out[a] = values[a] + future
    for a in range(N_ACT):
        out[a] += extra
    return out


def new_memo():
    return Dict.empty(key_type=types.UniTuple(types.int64, 2), value_type=types.float64[::1])


def new_tour_memo():
    return Dict.empty(key_type=types.int64, value_type=types.float64[::1])
