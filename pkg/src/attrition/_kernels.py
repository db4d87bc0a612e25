"""Hot-path Monte Carlo kernels.

Per-path RNG streams are xoshiro256** states derived with splitmix64 from
(seed, stream index), so results are independent of worker count and
scheduling.  Each path writes its own output slot; reductions happen outside
the parallel region.  Falls back to pure Python (slow, identical results)
when numba is unavailable.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap

    prange = range

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLD = np.uint64(0x9E3779B97F4A7C15)
_U53 = 1.0 / 9007199254740992.0  # 2^-53
_TWO_PI = 6.283185307179586

# stop-cause codes, shared with simulate.py
CAUSE_OWN_ATOM = 0
CAUSE_OWN_SET = 1
CAUSE_OPP_ATOM = 2
CAUSE_OPP_SET = 3
CAUSE_HORIZON = 4


@njit(inline="always", cache=True)
def _sm64(z):
    z = (z + _GOLD) & _M64
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _M64
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _M64
    return z ^ (z >> np.uint64(31))


@njit(inline="always", cache=True)
def _stream_init(seed, idx):
    z = (_sm64(np.uint64(seed)) + np.uint64(idx) * _GOLD) & _M64
    s0 = _sm64(z)
    s1 = _sm64(s0)
    s2 = _sm64(s1)
    s3 = _sm64(s2)
    return s0, s1, s2, s3


@njit(inline="always", cache=True)
def _next64(s0, s1, s2, s3):
    res = (s1 * np.uint64(5)) & _M64
    res = (((res << np.uint64(7)) | (res >> np.uint64(57))) * np.uint64(9)) & _M64
    t = (s1 << np.uint64(17)) & _M64
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = ((s3 << np.uint64(45)) | (s3 >> np.uint64(19))) & _M64
    return res, s0, s1, s2, s3


@njit(inline="always", cache=True)
def _uniform(s0, s1, s2, s3):
    """u in (0, 1]."""
    r, s0, s1, s2, s3 = _next64(s0, s1, s2, s3)
    return (np.float64(r >> np.uint64(11)) + 1.0) * _U53, s0, s1, s2, s3


@njit(inline="always", cache=True)
def _exponential(s0, s1, s2, s3):
    u, s0, s1, s2, s3 = _uniform(s0, s1, s2, s3)
    return -np.log(u), s0, s1, s2, s3


@njit(inline="always", cache=True)
def _normal_pair(s0, s1, s2, s3):
    u1, s0, s1, s2, s3 = _uniform(s0, s1, s2, s3)
    u2, s0, s1, s2, s3 = _uniform(s0, s1, s2, s3)
    rad = np.sqrt(-2.0 * np.log(u1))
    return rad * np.cos(_TWO_PI * u2), rad * np.sin(_TWO_PI * u2), s0, s1, s2, s3


@njit(inline="always", cache=True)
def _hazard(x, dens):
    """Poisson intensity of the symmetric density block.

    dens = [on, lo, hi, l_opp, K_opp, m, rb, rho_m, r].  The denominator
    G_opp - R_opp = m x/rb + K x^rho_m - l_opp uses the upper branch (the
    support never dips below the opponent's kink).
    """
    if dens[0] == 0.0 or x <= dens[1] or x > dens[2]:
        return 0.0
    l_opp = dens[3]
    K = dens[4]
    m = dens[5]
    rb = dens[6]
    rho_m = dens[7]
    r = dens[8]
    den = m * x / rb + K * x**rho_m - l_opp
    if den <= 1e-300:
        return 1e300
    return (r * l_opp - x) / den


@njit(inline="always", cache=True)
def _payoff_R(x, l, rb):
    return l - x / rb


@njit(inline="always", cache=True)
def _payoff_G(x, l, K, alpha, m, rb, rho_m):
    if x <= alpha:
        return l - x / rb
    return (m - 1.0) * x / rb + K * x**rho_m


@njit(cache=True, parallel=True, fastmath=True)
def run_profile_paths(
    seed,
    n_paths,
    antithetic,
    x0,
    dt,
    n_steps,
    b,
    sigma,
    r,
    q1,
    w1,
    e1,
    s1max,
    dens1,
    q2,
    w2,
    e2,
    s2max,
    dens2,
    l1,
    K1,
    al1,
    l2,
    K2,
    al2,
    m_mult,
    rb,
    rho_m,
    pay1,
    pay2,
    cause1,
    cause2,
    stop_time,
    stop_state,
    xT,
    acc1_out,
    acc2_out,
):
    mu_dt = (b - 0.5 * sigma * sigma) * dt
    sv = sigma * np.sqrt(dt)
    for p in prange(n_paths):
        stream = p // 2 if antithetic else p
        flip = -1.0 if (antithetic and (p & 1) == 1) else 1.0
        s0, s1, s2, s3 = _stream_init(seed, stream)
        E1, s0, s1, s2, s3 = _exponential(s0, s1, s2, s3)
        E2, s0, s1, s2, s3 = _exponential(s0, s1, s2, s3)

        x = x0
        acc1 = 0.0
        acc2 = 0.0
        have = False
        zc = 0.0
        done = False

        # a start inside a stopping set resolves at t = 0
        in1 = s1max > 0.0 and x <= s1max
        in2 = s2max > 0.0 and x <= s2max
        if in1 or in2:
            if in1 and in2:
                pay1[p] = _payoff_R(x, l1, rb)
                pay2[p] = _payoff_R(x, l2, rb)
                cause1[p] = CAUSE_OWN_SET
                cause2[p] = CAUSE_OWN_SET
            elif in1:
                pay1[p] = _payoff_R(x, l1, rb)
                pay2[p] = _payoff_G(x, l2, K2, al2, m_mult, rb, rho_m)
                cause1[p] = CAUSE_OWN_SET
                cause2[p] = CAUSE_OPP_SET
            else:
                pay2[p] = _payoff_R(x, l2, rb)
                pay1[p] = _payoff_G(x, l1, K1, al1, m_mult, rb, rho_m)
                cause2[p] = CAUSE_OWN_SET
                cause1[p] = CAUSE_OPP_SET
            stop_time[p] = 0.0
            stop_state[p] = x
            xT[p] = np.nan
            acc1_out[p] = 0.0
            acc2_out[p] = 0.0
            done = True

        if not done:
            for k in range(n_steps):
                if have:
                    z = zc
                    have = False
                else:
                    z, zc, s0, s1, s2, s3 = _normal_pair(s0, s1, s2, s3)
                    have = True
                x_new = x * np.exp(mu_dt + sv * (flip * z))
                sig2_dt = sigma * sigma * x_new * x_new * dt

                dA1 = 0.0
                qhit1 = -1.0
                for j in range(q1.shape[0]):
                    if abs(x_new - q1[j]) < e1[j]:
                        dA1 += w1[j] * sig2_dt / (2.0 * e1[j])
                        qhit1 = q1[j]
                if dens1[0] != 0.0:
                    lam = _hazard(x_new, dens1)
                    dA1 += lam * dt
                dA2 = 0.0
                qhit2 = -1.0
                for j in range(q2.shape[0]):
                    if abs(x_new - q2[j]) < e2[j]:
                        dA2 += w2[j] * sig2_dt / (2.0 * e2[j])
                        qhit2 = q2[j]
                if dens2[0] != 0.0:
                    lam = _hazard(x_new, dens2)
                    dA2 += lam * dt

                f1 = 3.0
                mech1 = -1
                if dA1 > 0.0 and acc1 + dA1 >= E1:
                    f1 = (E1 - acc1) / dA1
                    mech1 = 0
                if s1max > 0.0 and x_new <= s1max and 1.0 < f1:
                    f1 = 1.0
                    mech1 = 1
                f2 = 3.0
                mech2 = -1
                if dA2 > 0.0 and acc2 + dA2 >= E2:
                    f2 = (E2 - acc2) / dA2
                    mech2 = 0
                if s2max > 0.0 and x_new <= s2max and 1.0 < f2:
                    f2 = 1.0
                    mech2 = 1

                if f1 <= 1.0 or f2 <= 1.0:
                    fmin = f1 if f1 <= f2 else f2
                    tau = (k + fmin) * dt
                    disc = np.exp(-r * tau)
                    if f1 < f2:
                        state = s1max if mech1 == 1 else (qhit1 if qhit1 > 0.0 else x_new)
                        pay1[p] = disc * _payoff_R(state, l1, rb)
                        pay2[p] = disc * _payoff_G(state, l2, K2, al2, m_mult, rb, rho_m)
                        cause1[p] = CAUSE_OWN_SET if mech1 == 1 else CAUSE_OWN_ATOM
                        cause2[p] = CAUSE_OPP_SET if mech1 == 1 else CAUSE_OPP_ATOM
                    elif f2 < f1:
                        state = s2max if mech2 == 1 else (qhit2 if qhit2 > 0.0 else x_new)
                        pay2[p] = disc * _payoff_R(state, l2, rb)
                        pay1[p] = disc * _payoff_G(state, l1, K1, al1, m_mult, rb, rho_m)
                        cause2[p] = CAUSE_OWN_SET if mech2 == 1 else CAUSE_OWN_ATOM
                        cause1[p] = CAUSE_OPP_SET if mech2 == 1 else CAUSE_OPP_ATOM
                    else:
                        st1 = s1max if mech1 == 1 else (qhit1 if qhit1 > 0.0 else x_new)
                        st2 = s2max if mech2 == 1 else (qhit2 if qhit2 > 0.0 else x_new)
                        pay1[p] = disc * _payoff_R(st1, l1, rb)
                        pay2[p] = disc * _payoff_R(st2, l2, rb)
                        cause1[p] = CAUSE_OWN_SET if mech1 == 1 else CAUSE_OWN_ATOM
                        cause2[p] = CAUSE_OWN_SET if mech2 == 1 else CAUSE_OWN_ATOM
                    stop_time[p] = tau
                    stop_state[p] = x_new
                    xT[p] = np.nan
                    acc1_out[p] = E1 if (mech1 == 0 and f1 <= fmin) else acc1 + fmin * dA1
                    acc2_out[p] = E2 if (mech2 == 0 and f2 <= fmin) else acc2 + fmin * dA2
                    done = True
                    break
                acc1 += dA1
                acc2 += dA2
                x = x_new
            if not done:
                pay1[p] = 0.0
                pay2[p] = 0.0
                cause1[p] = CAUSE_HORIZON
                cause2[p] = CAUSE_HORIZON
                stop_time[p] = n_steps * dt
                stop_state[p] = np.nan
                xT[p] = x
                acc1_out[p] = acc1
                acc2_out[p] = acc2


@njit(cache=True, parallel=True, fastmath=True)
def run_sweep_paths(
    seed,
    n_paths,
    antithetic,
    x0,
    dt,
    n_steps,
    b,
    sigma,
    r,
    qo,
    wo,
    eo,
    somax,
    denso,
    thr,
    l_i,
    K_i,
    al_i,
    m_mult,
    rb,
    rho_m,
    pay,
    resolved,
    xT,
):
    mu_dt = (b - 0.5 * sigma * sigma) * dt
    sv = sigma * np.sqrt(dt)
    n_thr = thr.shape[0]
    for p in prange(n_paths):
        stream = p // 2 if antithetic else p
        flip = -1.0 if (antithetic and (p & 1) == 1) else 1.0
        s0, s1, s2, s3 = _stream_init(seed, stream)
        Eo, s0, s1, s2, s3 = _exponential(s0, s1, s2, s3)

        # thresholds at or above the start resolve immediately
        ptr = n_thr - 1
        while ptr >= 0 and thr[ptr] >= x0:
            pay[p, ptr] = _payoff_R(x0, l_i, rb)
            resolved[p, ptr] = 1
            ptr -= 1

        x = x0
        acco = 0.0
        have = False
        zc = 0.0
        finished = ptr < 0

        # an opponent starting inside its stopping set stops at t = 0
        if not finished and somax > 0.0 and x <= somax:
            g = _payoff_G(x, l_i, K_i, al_i, m_mult, rb, rho_m)
            for j in range(ptr + 1):
                pay[p, j] = g
                resolved[p, j] = 1
            finished = True

        if not finished:
            for k in range(n_steps):
                if have:
                    z = zc
                    have = False
                else:
                    z, zc, s0, s1, s2, s3 = _normal_pair(s0, s1, s2, s3)
                    have = True
                x_new = x * np.exp(mu_dt + sv * (flip * z))
                sig2_dt = sigma * sigma * x_new * x_new * dt

                dAo = 0.0
                qhit = -1.0
                for j in range(qo.shape[0]):
                    if abs(x_new - qo[j]) < eo[j]:
                        dAo += wo[j] * sig2_dt / (2.0 * eo[j])
                        qhit = qo[j]
                if denso[0] != 0.0:
                    dAo += _hazard(x_new, denso) * dt

                fo = 3.0
                mech = -1
                if dAo > 0.0 and acco + dAo >= Eo:
                    fo = (Eo - acco) / dAo
                    mech = 0
                if somax > 0.0 and x_new <= somax and 1.0 < fo:
                    fo = 1.0
                    mech = 1
                acco += dAo

                # thresholds crossed within this step, highest first
                while ptr >= 0 and x_new <= thr[ptr]:
                    fy = np.log(thr[ptr] / x) / np.log(x_new / x)
                    if fy <= fo:
                        tau_y = (k + fy) * dt
                        pay[p, ptr] = np.exp(-r * tau_y) * _payoff_R(thr[ptr], l_i, rb)
                        resolved[p, ptr] = 1
                        ptr -= 1
                    else:
                        break

                if fo <= 1.0:
                    state = somax if mech == 1 else (qhit if qhit > 0.0 else x_new)
                    tau = (k + fo) * dt
                    g = np.exp(-r * tau) * _payoff_G(
                        state, l_i, K_i, al_i, m_mult, rb, rho_m
                    )
                    for j in range(ptr + 1):
                        pay[p, j] = g
                        resolved[p, j] = 1
                    finished = True
                    break
                if ptr < 0:
                    finished = True
                    break
                x = x_new
        if finished:
            xT[p] = np.nan
        else:
            xT[p] = x
            for j in range(ptr + 1):
                pay[p, j] = 0.0
                resolved[p, j] = 0


@njit(cache=True, parallel=True, fastmath=True)
def run_green_paths(
    seed,
    n_paths,
    x_start,
    y_atom,
    lo,
    hi,
    dt_coarse,
    refine,
    c_band,
    b,
    sigma,
    n_steps_coarse,
    L_coarse,
    L_fine,
    exited,
):
    dt_f = dt_coarse / refine
    mu_dt = (b - 0.5 * sigma * sigma) * dt_f
    sv = sigma * np.sqrt(dt_f)
    eps_c = c_band * sigma * y_atom * np.sqrt(dt_coarse)
    eps_f = c_band * sigma * y_atom * np.sqrt(dt_f)
    for p in prange(n_paths):
        s0, s1, s2, s3 = _stream_init(seed, p)
        x = x_start
        lc = 0.0
        lf = 0.0
        fine_alive = True
        have = False
        zc = 0.0
        done = False
        for k in range(n_steps_coarse * refine):
            if have:
                z = zc
                have = False
            else:
                z, zc, s0, s1, s2, s3 = _normal_pair(s0, s1, s2, s3)
                have = True
            x = x * np.exp(mu_dt + sv * z)
            if fine_alive:
                if x <= lo or x >= hi:
                    fine_alive = False
                elif abs(x - y_atom) < eps_f:
                    lf += sigma * sigma * x * x * dt_f / (2.0 * eps_f)
            if (k + 1) % refine == 0:
                if x <= lo or x >= hi:
                    done = True
                    break
                if abs(x - y_atom) < eps_c:
                    lc += sigma * sigma * x * x * dt_coarse / (2.0 * eps_c)
        L_coarse[p] = lc
        L_fine[p] = lf
        exited[p] = 1 if done else 0
