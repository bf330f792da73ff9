"""Hot inner loops of the relocation dynamics, on plain arrays.

The iteration semantics are strictly sequential: agents act one at a time in
a seeded permutation and every occupancy change is visible to the agents
processed after them.  The loop bodies below use only table lookups and IEEE
arithmetic (all logarithms are precomputed into tables), so the
numba-compiled and plain-Python paths produce bit-identical results; tests
assert that equivalence.

Housing capacity is modeled as individual dwelling slots (slot_unit maps a
slot to its unit).  A "uniformly random vacant dwelling" is drawn by
rejection over slot indices, which is exactly uniform over currently vacant
slots and, unlike a cumulative scan over per-unit counts, keeps one agent's
move from perturbing the draws of every later agent.  Each draw consumes a
fixed-width row of pre-drawn uniforms regardless of outcome; the fallback
linear probe after ATTEMPTS rejections is unreachable in practice at the
vacancy rates the simulator runs at.

Unit diversity enters scores through the identity
    H = ln(N) - (sum_i n_i ln n_i) / N
so each unit carries just (N, sum n ln n), updated in O(1) per move.
"""

import os

import numpy as np

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def _njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


# Uniform draws per alternative-dwelling sample.  With occupancy rate q the
# probability of exhausting the row is q**ATTEMPTS (q=0.9 -> 3.4e-2 per draw,
# and the deterministic probe keeps even that case well-defined).
ATTEMPTS = 32


def _draw_vacant_slot(row, occupied, n_slots):
    """Uniform over vacant slots: rejection over slot indices, with a
    wrapping linear probe as the (practically unreachable) last resort."""
    for t in range(ATTEMPTS):
        s = int(row[t] * n_slots)
        if occupied[s] == 0:
            return s
    s = int(row[ATTEMPTS - 1] * n_slots)
    for _ in range(n_slots):
        s += 1
        if s == n_slots:
            s = 0
        if occupied[s] == 0:
            return s
    return -1


def _place_agents(
    uniforms,
    person_profile,
    person_owner,
    person_work,
    person_unit,
    person_slot,
    person_mode,
    slot_unit,
    occupied,
    counts,
    nsum,
    slog,
    vac,
    mode_best_idx,
    xlogx,
):
    """Drop each agent into a uniformly random vacant dwelling slot.

    Placement is sequential in person-id order; each placement fills the
    slot immediately.  uniforms[i] is agent i's row of draws.
    """
    n = person_profile.shape[0]
    n_slots = slot_unit.shape[0]
    for i in range(n):
        s = _draw_vacant_slot(uniforms[i], occupied, n_slots)
        unit = slot_unit[s]
        p = person_profile[i]
        person_slot[i] = s
        person_unit[i] = unit
        person_mode[i] = mode_best_idx[p, person_owner[i], unit, person_work[i]]
        occupied[s] = 1
        c = counts[unit, p]
        slog[unit] += xlogx[c + 1] - xlogx[c]
        counts[unit, p] = c + 1
        nsum[unit] += 1
        vac[unit] -= 1


def _run_iteration(
    perm,
    uniforms,
    person_profile,
    person_owner,
    person_work,
    person_unit,
    person_slot,
    person_mode,
    slot_unit,
    occupied,
    counts,
    nsum,
    slog,
    vac,
    hs_static,
    m_best,
    mode_best_idx,
    divn,
    xlogx,
    logn,
):
    """One relocation iteration; returns the number of movers.

    For each agent (in permutation order): draw one alternative dwelling
    uniformly over the currently vacant slots, score the current and the
    alternative unit (each under its own best available mode and with the
    evaluating agent excluded from the occupancy counts), and move exactly
    when the alternative scores strictly higher.
    """
    n = perm.shape[0]
    n_slots = slot_unit.shape[0]
    vac_total = n_slots
    for s in range(n_slots):
        vac_total -= occupied[s]
    movers = 0
    if vac_total == 0:
        return movers
    for k in range(n):
        i = perm[k]
        s_alt = _draw_vacant_slot(uniforms[k], occupied, n_slots)
        u_alt = slot_unit[s_alt]
        u_cur = person_unit[i]
        if u_alt == u_cur:
            continue
        p = person_profile[i]
        o = person_owner[i]
        w = person_work[i]

        c_p = counts[u_cur, p]
        n_cur = nsum[u_cur] - 1
        s_cur = slog[u_cur] - xlogx[c_p] + xlogx[c_p - 1]
        if n_cur > 0:
            h_cur = logn[n_cur] - s_cur / n_cur
        else:
            h_cur = 0.0

        n_alt = nsum[u_alt]
        if n_alt > 0:
            h_alt = logn[n_alt] - slog[u_alt] / n_alt
        else:
            h_alt = 0.0

        score_cur = hs_static[p, u_cur] + m_best[p, o, u_cur, w] + divn[p] * h_cur
        score_alt = hs_static[p, u_alt] + m_best[p, o, u_alt, w] + divn[p] * h_alt
        if score_alt > score_cur:
            occupied[person_slot[i]] = 0
            occupied[s_alt] = 1
            person_slot[i] = s_alt
            counts[u_cur, p] = c_p - 1
            nsum[u_cur] = n_cur
            slog[u_cur] = s_cur
            c2 = counts[u_alt, p]
            slog[u_alt] += xlogx[c2 + 1] - xlogx[c2]
            counts[u_alt, p] = c2 + 1
            nsum[u_alt] = n_alt + 1
            vac[u_cur] += 1
            vac[u_alt] -= 1
            person_unit[i] = u_alt
            person_mode[i] = mode_best_idx[p, o, u_alt, w]
            movers += 1
    return movers


_draw_vacant_slot = _njit(cache=True, nogil=True, inline="always")(_draw_vacant_slot) \
    if HAVE_NUMBA else _draw_vacant_slot
_place_agents_jit = _njit(cache=True, nogil=True)(_place_agents)
_run_iteration_jit = _njit(cache=True, nogil=True)(_run_iteration)

# RELOSIM_NO_JIT=1 forces the interpreted path (used by the equivalence tests
# and as an escape hatch; results are identical either way).
USE_JIT = HAVE_NUMBA and os.environ.get("RELOSIM_NO_JIT", "") != "1"


def place_agents(*args):
    fn = _place_agents_jit if USE_JIT else _place_agents
    return fn(*args)


def run_iteration(*args):
    fn = _run_iteration_jit if USE_JIT else _run_iteration
    return fn(*args)


def log_tables(max_count: int):
    """(x ln x, ln x) lookup tables for integer counts 0..max_count."""
    n = np.arange(max_count + 1, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        logn = np.where(n > 0, np.log(n), 0.0)
    xlogx = n * logn
    return xlogx, logn
