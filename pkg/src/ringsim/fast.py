"""Compiled twin of the ring engine and its checkers for long seed sweeps.

``run_fast`` executes exactly the event sequence the Python engine would
produce for the same configuration and seed (it consumes the same random
draws in the same order) and maintains the checkers' counters online, so a
10^6-tick run needs no trace. With ``record=True`` it also returns the event
stream, which the test-suite compares against the reference engine.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .protocols import RingConfig, build_ring
from .sim import ATOMIC, REGULAR, SAFE, Event, HLInfo, draw_array

# event codes
INVOKE, RESPOND, CS_ENTER, CS_EXIT, HL_BEGIN, HL_END = range(6)
EVENT_NAMES = ("invoke", "respond", "cs_enter", "cs_exit", "hl_begin", "hl_end")
# program counters (as in protocols)
RD, DECIDE, CS_OUT, WR, ARD, AWR = range(6)
# sub-machine phases (as in quasiatomic)
BEGIN, READ_A, READ_B, WRITE_A, WRITE_B, END, DONE = range(7)

VARIANT_CODE = {"atomic": 0, "two-reg": 1, "gray": 2}
SEM_CODE = {SAFE: 0, REGULAR: 1, ATOMIC: 2}
ADV_CODE = {"random": 0, "old": 1, "new": 2, "target": 3}
SCHED_CODE = {"rr": 0, "random": 1}

# processor state columns
(F_PC, F_X, F_Y, F_B, F_PH, F_I, F_FIRST, F_OK, F_PAIR, F_VAL, F_A, F_EFF, F_K,
 F_PK, F_PREG, F_PVAL, F_POLD, F_POVL, F_PHL, F_HID, F_HOPEN, F_HKIND, F_HPAIR) = range(23)
NF = 23

# link state columns
(L_WIN, L_WARG, L_BEGUN, L_OPEN, L_OPENARG, L_DONE, L_DONEARG, L_RIN, L_RACT, L_RFROZ, L_OLDIDX,
 L_OLDMASK, L_CONCLEN, L_FLOOR, L_C0, L_C1, L_C2, L_C3, L_C4, L_INV, L_MAXOV, L_INITMASK,
 L_FIRSTCONT, L_FIRSTINV) = range(24)
NL = 24

# result scalars
(R_LASTBAD, R_BROKEN_FROM, R_BROKEN_AT, R_MULTI, R_OVERLAP, R_FLASH, R_HOME, R_FIRSTHOME, R_ALLW,
 R_INCOH_HOME, R_INCOH_ALLW, R_FIRSTINCOH_HOME, R_FIRSTINCOH_ALLW, R_NCS) = range(14)
NR = 14


@njit(cache=True)
def _guard(i, x, y, K):
    if y < 0:
        return False, x
    if i != 0 and x != y:
        return True, y
    if i == 0 and y == x:
        return True, (x + 1) % K
    return False, x


@njit(cache=True)
def _gray_bit(x, k, b):
    g = x ^ (x >> 1)
    return (g >> (k - 1 - b)) & 1


@njit(cache=True)
def _decode(bits, k):
    v = 0
    acc = 0
    for b in range(k):
        acc ^= bits[b]
        v = (v << 1) | acc
    return v


@njit(cache=True)
def _request(S, X, pid, variant, n, K, kk, phi):
    """(op, reg, value, hl kind, hl pair, hl arg, hl result) of pid's next event.

    ``op`` uses the event codes, with INVOKE split as 0 = read, 1 = write
    (the low-level kind goes into ``value``'s companion ``hk`` slot).
    Returns op code in 0..5 where 0 means low-level op; hk holds 0 read / 1 write.
    """
    pc = S[pid, F_PC]
    if variant == 0:
        if pc == RD:
            return 0, (pid - 1) % n, -1, 0, -1, -1, -1
        if pc == DECIDE:
            ok, nx = _guard(pid, S[pid, F_X], S[pid, F_Y], K)
            if ok:
                return CS_ENTER, -1, -1, -1, -1, -1, -1
            return 0, pid, S[pid, F_X], 1, -1, -1, -1
        if pc == CS_OUT:
            return CS_EXIT, -1, -1, -1, -1, -1, -1
        return 0, pid, S[pid, F_X], 1, -1, -1, -1
    if pc == ARD or pc == AWR:
        ph = S[pid, F_PH]
        p = S[pid, F_PAIR]
        if ph == READ_A:
            return 0, 2 * p, -1, 0, -1, -1, -1
        if ph == READ_B:
            return 0, 2 * p + 1, -1, 0, -1, -1, -1
        if ph == WRITE_A:
            return 0, 2 * p, S[pid, F_VAL], 1, -1, -1, -1
        if ph == WRITE_B:
            return 0, 2 * p + 1, S[pid, F_VAL], 1, -1, -1, -1
        if pc == ARD:
            res = S[pid, F_FIRST] if S[pid, F_OK] == 1 else -1
            if ph == BEGIN:
                return HL_BEGIN, -1, -1, 1, p, S[pid, F_K], -1
            return HL_END, -1, -1, 1, p, S[pid, F_K], res
        if ph == BEGIN:
            return HL_BEGIN, -1, -1, 0, p, S[pid, F_VAL], -1
        return HL_END, -1, -1, 0, p, S[pid, F_VAL], S[pid, F_EFF]
    if pc == RD:
        b = S[pid, F_B] if variant == 2 else 0
        return 0, 2 * (pid * kk + b), -1, 0, -1, -1, -1
    if pc == DECIDE:
        ok, nx = _guard(pid, S[pid, F_X], S[pid, F_Y], K)
        if ok:
            return CS_ENTER, -1, -1, -1, -1, -1, -1
        if variant == 1:
            return HL_BEGIN, -1, -1, 0, pid, S[pid, F_X], -1
        return HL_BEGIN, -1, -1, 0, pid * kk + kk - 1, _gray_bit(S[pid, F_X], kk, kk - 1), -1
    return CS_EXIT, -1, -1, -1, -1, -1, -1


@njit(cache=True)
def _sub_advance(S, pid, is_read, resp):
    """Advance the embedded AWrite / AReadk; True when it reached DONE."""
    ph = S[pid, F_PH]
    if is_read:
        if ph == BEGIN:
            S[pid, F_PH] = READ_A
        elif ph == READ_A:
            if S[pid, F_I] == 0:
                S[pid, F_FIRST] = resp
            elif resp != S[pid, F_FIRST]:
                S[pid, F_OK] = 0
            S[pid, F_PH] = READ_B
        elif ph == READ_B:
            if resp != S[pid, F_FIRST]:
                S[pid, F_OK] = 0
            if S[pid, F_I] + 1 < S[pid, F_K]:
                S[pid, F_I] += 1
                S[pid, F_PH] = READ_A
            else:
                S[pid, F_PH] = END
        else:
            S[pid, F_PH] = DONE
    else:
        if ph == BEGIN:
            S[pid, F_PH] = READ_A
        elif ph == READ_A:
            S[pid, F_A] = resp
            S[pid, F_PH] = READ_B
        elif ph == READ_B:
            if S[pid, F_A] == S[pid, F_VAL] and resp == S[pid, F_VAL]:
                S[pid, F_EFF] = 0
                S[pid, F_PH] = END
            else:
                S[pid, F_EFF] = 1
                S[pid, F_PH] = WRITE_A
        elif ph == WRITE_A:
            S[pid, F_PH] = WRITE_B
        elif ph == WRITE_B:
            S[pid, F_PH] = END
        else:
            S[pid, F_PH] = DONE
    return S[pid, F_PH] == DONE


@njit(cache=True)
def _start_read(S, pid, pair, k):
    S[pid, F_PH] = BEGIN
    S[pid, F_I] = 0
    S[pid, F_FIRST] = -1
    S[pid, F_OK] = 1
    S[pid, F_PAIR] = pair
    S[pid, F_K] = k


@njit(cache=True)
def _start_write(S, pid, pair, val, phase):
    S[pid, F_PH] = phase
    S[pid, F_PAIR] = pair
    S[pid, F_VAL] = val
    S[pid, F_A] = -1
    S[pid, F_EFF] = 0


@njit(cache=True)
def _advance(S, X, Y, pid, resp, variant, n, K, kk, phi):
    pc = S[pid, F_PC]
    if variant == 0:
        if pc == RD:
            S[pid, F_PC] = DECIDE
            S[pid, F_Y] = resp
        elif pc == DECIDE:
            ok, nx = _guard(pid, S[pid, F_X], S[pid, F_Y], K)
            if ok:
                S[pid, F_PC] = CS_OUT
                S[pid, F_X] = nx
            else:
                S[pid, F_PC] = RD
        elif pc == CS_OUT:
            S[pid, F_PC] = WR
        else:
            S[pid, F_PC] = RD
        return
    if pc == ARD:
        if not _sub_advance(S, pid, True, resp):
            return
        res = S[pid, F_FIRST] if S[pid, F_OK] == 1 else -1
        if variant == 1:
            S[pid, F_PC] = DECIDE
            S[pid, F_Y] = res
            return
        b = S[pid, F_B]
        Y[pid, b] = res
        if b + 1 < kk:
            S[pid, F_B] = b + 1
            _start_read(S, pid, ((pid - 1) % n) * kk + b + 1, 2)
            return
        y = 0
        acc = 0
        for j in range(kk):
            if Y[pid, j] < 0:
                y = -1
                break
            acc ^= Y[pid, j]
            y = (y << 1) | acc
        S[pid, F_PC] = DECIDE
        S[pid, F_B] = 0
        S[pid, F_Y] = y % K if y >= 0 else -1
        return
    if pc == AWR:
        if not _sub_advance(S, pid, False, resp):
            return
        if variant == 2 and S[pid, F_B] > 0:
            b = S[pid, F_B] - 1
            S[pid, F_B] = b
            _start_write(S, pid, pid * kk + b, X[pid, b], BEGIN)
            return
        S[pid, F_PC] = RD
        S[pid, F_B] = 0
        return
    if pc == RD:
        if variant == 1:
            S[pid, F_PC] = ARD
            S[pid, F_X] = resp
            _start_read(S, pid, (pid - 1) % n, phi)
            return
        b = S[pid, F_B]
        X[pid, b] = resp
        if b + 1 < kk:
            S[pid, F_B] = b + 1
            return
        S[pid, F_PC] = ARD
        S[pid, F_B] = 0
        S[pid, F_X] = _decode(X[pid], kk) % K
        _start_read(S, pid, ((pid - 1) % n) * kk, 2)
        return
    if pc == DECIDE:
        ok, nx = _guard(pid, S[pid, F_X], S[pid, F_Y], K)
        if ok:
            S[pid, F_PC] = CS_OUT
            S[pid, F_X] = nx
            return
        S[pid, F_PC] = AWR
        if variant == 1:
            _start_write(S, pid, pid, S[pid, F_X], READ_A)
            return
        for j in range(kk):
            X[pid, j] = _gray_bit(S[pid, F_X], kk, j)
        S[pid, F_B] = kk - 1
        _start_write(S, pid, pid * kk + kk - 1, X[pid, kk - 1], READ_A)
        return
    # CS_OUT
    S[pid, F_PC] = AWR
    if variant == 1:
        _start_write(S, pid, pid, S[pid, F_X], BEGIN)
        return
    for j in range(kk):
        X[pid, j] = _gray_bit(S[pid, F_X], kk, j)
    S[pid, F_B] = kk - 1
    _start_write(S, pid, pid * kk + kk - 1, X[pid, kk - 1], BEGIN)


# -- online classifier (per link) ---------------------------------------------


@njit(cache=True)
def _lk_open(LS, CMIN, CMAX, l, arg):
    idx = LS[l, L_BEGUN] + 1
    LS[l, L_BEGUN] = idx
    LS[l, L_OPEN] = idx
    LS[l, L_OPENARG] = arg
    if LS[l, L_RACT] == 1 and LS[l, L_RFROZ] == 0:
        if CMIN[l, arg] < 0:
            CMIN[l, arg] = idx
        CMAX[l, arg] = idx
        LS[l, L_CONCLEN] += 1


@njit(cache=True)
def _lk_close(LS, FMAX, l):
    idx = LS[l, L_OPEN]
    arg = LS[l, L_OPENARG]
    if LS[l, L_RACT] == 1 and LS[l, L_RFROZ] == 0:
        if idx > FMAX[l, arg]:
            FMAX[l, arg] = idx
    LS[l, L_OPEN] = 0
    LS[l, L_OPENARG] = -1
    LS[l, L_DONE] = idx
    LS[l, L_DONEARG] = arg


@njit(cache=True)
def _lk_start_read(LS, CMIN, CMAX, FMAX, l, D):
    for v in range(D):
        CMIN[l, v] = -1
        CMAX[l, v] = -1
        FMAX[l, v] = -1
    if LS[l, L_DONE] > 0:
        LS[l, L_OLDIDX] = LS[l, L_DONE]
        LS[l, L_OLDMASK] = 1 << LS[l, L_DONEARG]
    else:
        LS[l, L_OLDIDX] = 0
        LS[l, L_OLDMASK] = LS[l, L_INITMASK]
    LS[l, L_CONCLEN] = 0
    if LS[l, L_OPEN] > 0:
        a = LS[l, L_OPENARG]
        CMIN[l, a] = LS[l, L_OPEN]
        CMAX[l, a] = LS[l, L_OPEN]
        LS[l, L_CONCLEN] = 1
    LS[l, L_RACT] = 1
    LS[l, L_RFROZ] = 0


@njit(cache=True)
def _lk_finish(LS, CMIN, CMAX, FMAX, l, result, tick):
    kind = 3
    lo = -1
    hi = -1
    if result >= 0:
        has = CMAX[l, result] >= 0
        if (LS[l, L_OLDMASK] >> result) & 1:
            kind = 0
            lo = LS[l, L_OLDIDX]
            hi = LS[l, L_OLDIDX]
            if has:
                lo = min(lo, CMIN[l, result])
                hi = max(hi, CMAX[l, result])
        elif not has:
            kind = 4
        else:
            lo = CMIN[l, result]
            hi = CMAX[l, result]
            kind = 1 if FMAX[l, result] >= 0 else 2
    LS[l, L_C0 + kind] += 1
    if kind == 4 and LS[l, L_FIRSTCONT] < 0:
        LS[l, L_FIRSTCONT] = tick
    if lo >= 0:
        if hi < LS[l, L_FLOOR]:
            LS[l, L_INV] += 1
            if LS[l, L_FIRSTINV] < 0:
                LS[l, L_FIRSTINV] = tick
        if lo > LS[l, L_FLOOR]:
            LS[l, L_FLOOR] = lo
    if LS[l, L_CONCLEN] > LS[l, L_MAXOV]:
        LS[l, L_MAXOV] = LS[l, L_CONCLEN]
    LS[l, L_RACT] = 0
    LS[l, L_RFROZ] = 0
    LS[l, L_CONCLEN] = 0


@njit(cache=True)
def _holders(vals, variant, n, K, kk):
    """Token count on the current register contents."""
    cnt = 0
    prev = -1
    first = -1
    bits = np.empty(kk, np.int64)
    for i in range(n + 1):
        j = i % n
        if variant == 0:
            o = vals[j]
        elif variant == 1:
            o = vals[2 * j]
        else:
            for b in range(kk):
                bits[b] = vals[2 * (j * kk + b)]
            o = _decode(bits, kk) % K
        if i == 0:
            first = o
        else:
            if j == 0:
                if prev == first:
                    cnt += 1
            elif prev != o:
                cnt += 1
        prev = o
    return cnt


@njit(cache=True)
def kernel(variant, n, K, kk, phi, sem, adv, adv_target, sched, B, T, L, init_vals, init_X, init_Y, init_x,
           init_y, draws, record, want_home):
    R = init_vals.shape[0]
    npairs = n * kk if variant != 0 else 0
    D = 2 if variant == 2 else K
    dom = D
    vals = init_vals.copy()
    cpend = np.zeros(R, np.int64)        # 1 while a write is in flight
    cpval = np.zeros(R, np.int64)
    S = np.full((n, NF), -1, np.int64)
    X = init_X.copy()
    Y = init_Y.copy()
    for p in range(n):
        S[p, F_PC] = RD
        S[p, F_X] = init_x[p]
        S[p, F_Y] = init_y[p]
        S[p, F_B] = 0
        S[p, F_HOPEN] = 0
    nlinks = npairs if variant != 0 else n
    LS = np.zeros((nlinks, NL), np.int64)
    CMIN = np.full((nlinks, D), -1, np.int64)
    CMAX = np.full((nlinks, D), -1, np.int64)
    FMAX = np.full((nlinks, D), -1, np.int64)
    for l in range(nlinks):
        LS[l, L_FLOOR] = -1
        LS[l, L_OPENARG] = -1
        LS[l, L_FIRSTCONT] = -1
        LS[l, L_FIRSTINV] = -1
        if variant == 0:
            LS[l, L_INITMASK] = 1 << init_vals[l]
        else:
            LS[l, L_INITMASK] = (1 << init_vals[2 * l]) | (1 << init_vals[2 * l + 1])
        LS[l, L_OLDMASK] = LS[l, L_INITMASK]
    unequal = np.zeros(max(npairs, 1), np.int64)
    awopen = np.zeros(max(npairs, 1), np.int64)
    n_uneq = 0
    for p in range(npairs):
        if vals[2 * p] != vals[2 * p + 1]:
            unequal[p] = 1
            n_uneq += 1
    n_incoh = n_uneq
    n_pend_w = 0
    # scheduler
    last = np.full(n, -1, np.int64)
    run_pid = -1
    run_len = 0
    starve = n * (B - 1) + 1
    di = 0
    # checkers
    res = np.full(NR, -1, np.int64)
    res[R_MULTI] = 0
    res[R_OVERLAP] = 0
    res[R_INCOH_HOME] = 0
    res[R_INCOH_ALLW] = 0
    res[R_NCS] = 0
    need = (T + 1) // 2
    last_bad = -1
    changed = True
    hold = -1
    in_cs = 0
    cs_tick = np.empty(T if T > 0 else 1, np.int64)
    cs_pid = np.empty(T if T > 0 else 1, np.int64)
    ncs = 0
    prev_cs = np.full(n, -1, np.int64)
    live_bad = -1
    # bottom progress
    grp = kk if variant == 2 else 1
    g_cnt = np.zeros(n, np.int64)
    g_bot = np.zeros(n, np.int64)
    b_run = np.zeros(n, np.int64)
    b_start = np.zeros(n, np.int64)
    b_lastok = np.zeros(n, np.int64)
    b_maxrun = np.zeros(n, np.int64)
    b_maxspan = np.zeros(n, np.int64)
    # coherence start (first full output write per processor)
    wdone = np.full(n, -1, np.int64)
    n_wdone = 0
    next_hl = 0
    home_found = False
    flash = -1
    # event log
    cap = T if record else 0
    E = np.full((cap, 13), -1, np.int64)

    for t in range(T):
        # -- scheduler (every processor is always enabled in a ring)
        if sched == 0:
            pid = run_pid + 1 if run_pid + 1 < n else 0
        else:
            pid = -1
            for p in range(n):
                if t - last[p] >= starve:
                    if pid < 0 or last[p] < last[pid]:
                        pid = p
            if pid < 0:
                if run_len >= B and run_pid >= 0 and n > 1:
                    j = draws[di] % (n - 1)
                    di += 1
                    pid = j if j < run_pid else j + 1
                else:
                    pid = draws[di] % n
                    di += 1
        if pid == run_pid:
            run_len += 1
        else:
            run_pid = pid
            run_len = 1
        last[pid] = t

        # -- step
        ev = -1
        ereg = -1
        ekind = -1
        evalue = -1
        ehl = -1
        eopen = 0
        eclose = 0
        ehk = -1
        epair = -1
        earg = -1
        eres = -1
        if S[pid, F_PK] >= 0:
            reg = S[pid, F_PREG]
            if S[pid, F_PK] == 0:
                if S[pid, F_POVL] == 0 or sem == 2:
                    value = vals[reg]
                elif sem == 1:
                    new = cpval[reg] if cpend[reg] == 1 else vals[reg]
                    old = S[pid, F_POLD]
                    if adv == 0:
                        value = old if draws[di] % 2 == 0 else new
                        di += 1
                    elif adv == 2:
                        value = new
                    elif adv == 3:
                        tv = adv_target % dom
                        value = tv if (tv == old or tv == new) else old
                    else:
                        value = old
                else:
                    if adv == 0:
                        value = draws[di] % dom
                        di += 1
                    elif adv == 1:
                        value = S[pid, F_POLD]
                    elif adv == 2:
                        value = cpval[reg] if cpend[reg] == 1 else vals[reg]
                    else:
                        value = adv_target % dom
                ekind = 0
            else:
                value = S[pid, F_PVAL]
                vals[reg] = value
                cpend[reg] = 0
                n_pend_w -= 1
                changed = True
                ekind = 1
                if variant != 0:
                    p2 = reg // 2
                    u = 1 if vals[2 * p2] != vals[2 * p2 + 1] else 0
                    if u != unequal[p2]:
                        unequal[p2] = u
                        n_uneq += 1 if u else -1
                        if awopen[p2] == 0:
                            n_incoh += 1 if u else -1
            ehl = S[pid, F_PHL]
            S[pid, F_PK] = -1
            _advance(S, X, Y, pid, value, variant, n, K, kk, phi)
            nop, _r, _v, _hk, _hp, _ha, _hr = _request(S, X, pid, variant, n, K, kk, phi)
            if ehl >= 0 and nop == HL_END:
                eclose = 1
            ev = RESPOND
            ereg = reg
            evalue = value
        else:
            op, reg, v, hk, hp, ha, hr = _request(S, X, pid, variant, n, K, kk, phi)
            if op == 0:
                ev = INVOKE
                ereg = reg
                ekind = hk
                if S[pid, F_HID] >= 0:
                    ehl = S[pid, F_HID]
                    if S[pid, F_HOPEN] == 0:
                        eopen = 1
                        S[pid, F_HOPEN] = 1
                S[pid, F_PK] = hk
                S[pid, F_PREG] = reg
                S[pid, F_PHL] = ehl
                S[pid, F_POVL] = 0
                if hk == 0:
                    S[pid, F_POLD] = vals[reg]
                    S[pid, F_POVL] = cpend[reg]
                else:
                    S[pid, F_PVAL] = v
                    evalue = v
                    cpend[reg] = 1
                    cpval[reg] = v
                    n_pend_w += 1
                    changed = True
                    for q in range(n):
                        if S[q, F_PK] == 0 and S[q, F_PREG] == reg:
                            S[q, F_POVL] = 1
            else:
                ev = op
                ehk = hk
                epair = hp
                earg = ha
                eres = hr
                if op == HL_BEGIN:
                    ehl = next_hl
                    next_hl += 1
                    S[pid, F_HID] = ehl
                    S[pid, F_HOPEN] = 0
                    S[pid, F_HKIND] = hk
                    S[pid, F_HPAIR] = hp
                    if hk == 0:
                        awopen[hp] = 1
                        if unequal[hp] == 1:
                            n_incoh -= 1
                elif op == HL_END:
                    ehl = S[pid, F_HID]
                    S[pid, F_HID] = -1
                    S[pid, F_HOPEN] = 0
                    if hk == 0:
                        awopen[hp] = 0
                        if unequal[hp] == 1:
                            n_incoh += 1
                elif op == CS_ENTER:
                    in_cs += 1
                    cs_tick[ncs] = t
                    cs_pid[ncs] = pid
                    ncs += 1
                    if t - L > prev_cs[pid]:
                        if t - L > live_bad:
                            live_bad = t - L
                    prev_cs[pid] = t
                else:
                    in_cs -= 1
                _advance(S, X, Y, pid, -1, variant, n, K, kk, phi)

        # -- online classifier
        if variant == 0:
            if ekind >= 0:
                if ekind == 1:
                    l = ereg
                    if ev == INVOKE:
                        _lk_open(LS, CMIN, CMAX, l, evalue)
                    else:
                        _lk_close(LS, FMAX, l)
                elif pid == (ereg + 1) % n:
                    l = ereg
                    if ev == INVOKE:
                        _lk_start_read(LS, CMIN, CMAX, FMAX, l, D)
                    else:
                        LS[l, L_RFROZ] = 1
                        _lk_finish(LS, CMIN, CMAX, FMAX, l, evalue, t)
        else:
            if ev == HL_BEGIN:
                if ehk == 0:
                    LS[epair, L_WIN] = 1
                    LS[epair, L_WARG] = earg
                else:
                    LS[epair, L_RIN] = 1
            elif ev == HL_END:
                if ehk == 0:
                    LS[epair, L_WIN] = 0
                else:
                    LS[epair, L_RIN] = 0
                    _lk_finish(LS, CMIN, CMAX, FMAX, epair, eres, t)
            elif (ev == INVOKE and eopen == 1) or (ev == RESPOND and eclose == 1):
                hp = S[pid, F_HPAIR]
                if S[pid, F_HKIND] == 0:
                    if ev == INVOKE:
                        _lk_open(LS, CMIN, CMAX, hp, LS[hp, L_WARG])
                    else:
                        _lk_close(LS, FMAX, hp)
                else:
                    if ev == INVOKE:
                        _lk_start_read(LS, CMIN, CMAX, FMAX, hp, D)
                    else:
                        LS[hp, L_RFROZ] = 1

        # -- bottom progress, on each completed input read
        if ev == HL_END and ehk == 1:
            g_cnt[pid] += 1
            if eres < 0:
                g_bot[pid] = 1
            if g_cnt[pid] == grp:
                if g_bot[pid] == 1:
                    if b_run[pid] == 0:
                        b_start[pid] = b_lastok[pid]
                    b_run[pid] += 1
                    if b_run[pid] > b_maxrun[pid]:
                        b_maxrun[pid] = b_run[pid]
                else:
                    if b_run[pid] > 0:
                        span = t - b_start[pid]
                        if span > b_maxspan[pid]:
                            b_maxspan[pid] = span
                    b_run[pid] = 0
                    b_lastok[pid] = t
                g_cnt[pid] = 0
                g_bot[pid] = 0

        # -- first complete output write per processor
        if ev == HL_END and ehk == 0 and wdone[pid] < 0 and epair == pid * kk:
            wdone[pid] = t
            n_wdone += 1
            if n_wdone == n:
                res[R_ALLW] = t

        # -- safety
        if changed:
            if n_pend_w > 0 or n_uneq > 0:
                hold = -1
            else:
                hold = _holders(vals, variant, n, K, kk)
            changed = False
        bad = False
        if hold >= 0 and hold != 1:
            bad = True
            res[R_MULTI] += 1
        if in_cs >= 2:
            bad = True
            res[R_OVERLAP] += 1
        if bad:
            if res[R_BROKEN_AT] < 0 and t - last_bad - 1 >= need:
                res[R_BROKEN_FROM] = last_bad + 1
                res[R_BROKEN_AT] = t
            last_bad = t

        # -- flash and home states
        if want_home and not home_found:
            isflash = True
            for p in range(n):
                q = p * kk
                if vals[2 * q] != 0 or vals[2 * q + 1] != 0 or X[p, 0] == 1 or Y[p, 0] == 1:
                    isflash = False
                    break
            ishome = True
            for b in range(kk):
                ref = vals[2 * b]
                for p in range(n):
                    q = p * kk + b
                    if vals[2 * q] != ref or vals[2 * q + 1] != ref or X[p, b] != ref or Y[p, b] != ref:
                        ishome = False
                        break
                if not ishome:
                    break
            if ishome and res[R_FIRSTHOME] < 0:
                res[R_FIRSTHOME] = t
            if flash < 0 and isflash:
                flash = t
                res[R_FLASH] = t
            if flash >= 0 and ishome:
                res[R_HOME] = t
                home_found = True

        # -- coherence
        if n_incoh > 0:
            if home_found:
                res[R_INCOH_HOME] += 1
                if res[R_FIRSTINCOH_HOME] < 0:
                    res[R_FIRSTINCOH_HOME] = t
            if res[R_ALLW] >= 0:
                res[R_INCOH_ALLW] += 1
                if res[R_FIRSTINCOH_ALLW] < 0:
                    res[R_FIRSTINCOH_ALLW] = t

        if record:
            E[t, 0] = pid
            E[t, 1] = ev
            E[t, 2] = ereg
            E[t, 3] = ekind
            E[t, 4] = evalue
            E[t, 5] = ehl
            E[t, 6] = eopen
            E[t, 7] = eclose
            E[t, 8] = ehk
            E[t, 9] = epair
            E[t, 10] = earg
            E[t, 11] = eres
            E[t, 12] = in_cs

    for p in range(n):
        if T - L > prev_cs[p] and T - L > live_bad:
            live_bad = T - L
        if b_run[p] > 0:
            span = T - b_start[p]
            if span > b_maxspan[p]:
                b_maxspan[p] = span
    res[R_LASTBAD] = last_bad
    res[R_NCS] = ncs
    bottom = np.stack((b_maxrun, b_maxspan))
    return res, live_bad, cs_tick[:ncs].copy(), cs_pid[:ncs].copy(), LS, bottom, E, di, vals, S, X, Y


# -- Python-side wrapper -------------------------------------------------------


class FastRun:
    """Raw kernel output for one run plus helpers that rebuild verdicts and events."""

    def __init__(self, cfg: RingConfig, seed: int, T: int, L: int, out, draws_used: int):
        (self.res, self.live_bad, self.cs_tick, self.cs_pid, self.links, bottom, self.E, used, self.vals,
         self.S, self.X, self.Y) = out
        self.cfg = cfg
        self.seed = seed
        self.T = T
        self.L = L
        self.bottom_runs = bottom[0].tolist()
        self.bottom_spans = bottom[1].tolist()
        self.draws_used = draws_used + int(used)

    def _tick(self, col: int):
        v = int(self.res[col])
        return None if v < 0 else v

    @property
    def flash_tick(self):
        return self._tick(R_FLASH)

    @property
    def home_tick(self):
        return self._tick(R_HOME)

    @property
    def first_home(self):
        return self._tick(R_FIRSTHOME)

    @property
    def all_written_tick(self):
        return self._tick(R_ALLW)

    def entries(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {p: [] for p in range(self.cfg.n)}
        for t, p in zip(self.cs_tick.tolist(), self.cs_pid.tolist()):
            out[p].append(t)
        return out

    def events(self) -> list[Event]:
        """The recorded event stream as engine ``Event`` objects."""
        out = []
        kinds = ("read", "write")
        hk = ("awrite", "areadk")
        for t, row in enumerate(self.E.tolist()):
            pid, ev, reg, kind, value, hl, op, cl, hkind, pair, arg, res, _ = row
            name = EVENT_NAMES[ev]
            hl_id = None if hl < 0 else hl
            if ev in (INVOKE, RESPOND):
                v = None if value < 0 else value
                out.append(Event(t, pid, name, reg, kinds[kind], v, hl_id, opens_span=bool(op),
                                 closes_span=bool(cl)))
            elif ev in (HL_BEGIN, HL_END):
                p = (2 * pair, 2 * pair + 1)
                if hkind == 0:
                    info = HLInfo("awrite", p, arg=arg, effective=bool(res) if ev == HL_END else None)
                else:
                    info = HLInfo("areadk", p, k=arg,
                                  result=(None if res < 0 else res) if ev == HL_END else None)
                out.append(Event(t, pid, name, p[0], hk[hkind], None, hl_id, info))
            else:
                out.append(Event(t, pid, name))
        return out


def _fast_params(cfg: RingConfig):
    if cfg.scheduler.variant not in SCHED_CODE:
        raise ValueError(f"compiled runner does not support the {cfg.scheduler.variant!r} scheduler")
    if cfg.adversary.variant not in ADV_CODE:
        raise ValueError(f"compiled runner does not support the {cfg.adversary.variant!r} adversary")
    if cfg.K > 62:
        raise ValueError("compiled runner needs K <= 62")
    kk = cfg.k_bits if cfg.variant == "gray" else 1
    return kk


def run_fast(cfg: RingConfig, seed: int, T: int, *, liveness: int | None = None, record: bool = False) -> FastRun:
    from .checker import liveness_window

    kk = _fast_params(cfg)
    ring = build_ring(cfg, seed, record=False)
    used = ring.rng.used
    draws = draw_array(seed, used + 2 * T + 8)[used:]
    n = cfg.n
    init_vals = np.asarray(ring.initial, dtype=np.int64)
    X = np.zeros((n, kk), np.int64)
    Y = np.zeros((n, kk), np.int64)
    if cfg.variant == "gray":
        for p, loc in enumerate(ring.initial_locals):
            X[p] = loc["X"]
            Y[p] = loc["Y"]
    xs = np.asarray([loc["x"] for loc in ring.initial_locals], np.int64)
    ys = np.asarray([loc["y"] for loc in ring.initial_locals], np.int64)
    L = liveness_window(T, liveness)
    out = kernel(VARIANT_CODE[cfg.variant], n, cfg.K, kk, cfg.phi, SEM_CODE[cfg.semantics],
                 ADV_CODE[cfg.adversary.variant], cfg.adversary.target, SCHED_CODE[cfg.scheduler.variant],
                 cfg.scheduler.fairness_bound, T, L, init_vals, X, Y, xs, ys, draws, record,
                 cfg.variant == "gray")
    return FastRun(cfg, seed, T, L, out, used)
