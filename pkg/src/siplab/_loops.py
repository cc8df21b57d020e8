"""Hot inner loops of the event-driven simulator.

All functions here are njit-compatible plain Python operating on primitive
arrays; :func:`siplab.backend.maybe_njit` compiles them unless the
``SIPLAB_NO_NUMBA`` fallback is requested.  Randomness is consumed from a
pre-generated uniform buffer (five draws per proposed event) so that both
backends walk through the identical stream and produce bit-identical
trajectories.

Status codes returned by the loops: 0 = reached the requested end time,
1 = uniform buffer exhausted (caller refills and resumes).
"""

import math

import numpy as np

from .backend import maybe_njit

DRAWS_PER_PROPOSAL = 5


@maybe_njit(cache=True)
def event_loop(occ, parts, alpha, speed, probs, alias_prob, alias_idx,
               disp, M, d, t_now, t_end, max_occ, u, pos):
    """Advance the occupation process by thinning until ``t_end``.

    Proposals arrive at rate speed * N * (alpha + max_occ); a uniformly
    chosen particle attempts a kernel-distributed displacement and is
    accepted with probability (alpha + occ[dest]) / (alpha + max_occ).
    ``max_occ`` is a running upper bound, raised when a move creates a new
    maximum and never lowered mid-run.
    """
    N = parts.shape[0]
    K = alias_prob.shape[0]
    proposals = 0
    accepted = 0
    status = 1
    while True:
        if pos + DRAWS_PER_PROPOSAL > u.shape[0]:
            break
        rate = speed * N * (alpha + max_occ)
        dt = -math.log(u[pos]) / rate
        if t_now + dt > t_end:
            t_now = t_end
            pos += 1
            status = 0
            break
        t_now += dt
        i = int(u[pos + 1] * N)
        if i >= N:
            i = N - 1
        k = int(u[pos + 2] * K)
        if k >= K:
            k = K - 1
        if u[pos + 3] >= alias_prob[k]:
            k = alias_idx[k]
        x = parts[i]
        if d == 1:
            y = (x + disp[k, 0]) % M
        else:
            x0 = x // M
            x1 = x % M
            y = ((x0 + disp[k, 0]) % M) * M + (x1 + disp[k, 1]) % M
        proposals += 1
        if u[pos + 4] * (alpha + max_occ) < alpha + occ[y]:
            occ[x] -= 1
            occ[y] += 1
            parts[i] = y
            if occ[y] > max_occ:
                max_occ = occ[y]
            accepted += 1
        pos += DRAWS_PER_PROPOSAL
    return t_now, pos, max_occ, proposals, accepted, status


@maybe_njit(cache=True)
def carre_sum(occ, alpha, probs, disp, phi, M, d):
    """Unscaled carre-du-champ sum_{x,z} q(z) occ[x] (alpha+occ[x+z]) (phi[x+z]-phi[x])^2."""
    K = probs.shape[0]
    total = 0.0
    n_sites = occ.shape[0]
    for x in range(n_sites):
        nx = occ[x]
        if nx == 0:
            continue
        for k in range(K):
            if d == 1:
                y = (x + disp[k, 0]) % M
            else:
                x0 = x // M
                x1 = x % M
                y = ((x0 + disp[k, 0]) % M) * M + (x1 + disp[k, 1]) % M
            df = phi[y] - phi[x]
            total += probs[k] * nx * (alpha + occ[y]) * df * df
    return total


@maybe_njit(cache=True)
def _carre_delta(occ, alpha, probs, disp, phi, M, d, w, delta):
    # change of carre_sum when occ[w] changes by delta; uses q and g symmetry
    K = probs.shape[0]
    acc = 0.0
    for k in range(K):
        if d == 1:
            v = (w + disp[k, 0]) % M
        else:
            w0 = w // M
            w1 = w % M
            v = ((w0 + disp[k, 0]) % M) * M + (w1 + disp[k, 1]) % M
        df = phi[v] - phi[w]
        acc += probs[k] * df * df * (alpha + 2.0 * occ[v])
    return delta * acc


@maybe_njit(cache=True)
def event_loop_qv(occ, parts, alpha, speed, probs, alias_prob, alias_idx,
                  disp, M, d, t_now, t_end, max_occ, u, pos, phi, carre, qv):
    """Event loop that also integrates the carre-du-champ sum exactly in time.

    ``carre`` must hold carre_sum(occ, ...) on entry; ``qv`` accumulates
    integral of carre dt (both unscaled: multiply by speed/n^d outside).
    """
    N = parts.shape[0]
    K = alias_prob.shape[0]
    proposals = 0
    accepted = 0
    status = 1
    while True:
        if pos + DRAWS_PER_PROPOSAL > u.shape[0]:
            break
        rate = speed * N * (alpha + max_occ)
        dt = -math.log(u[pos]) / rate
        if t_now + dt > t_end:
            qv += carre * (t_end - t_now)
            t_now = t_end
            pos += 1
            status = 0
            break
        qv += carre * dt
        t_now += dt
        i = int(u[pos + 1] * N)
        if i >= N:
            i = N - 1
        k = int(u[pos + 2] * K)
        if k >= K:
            k = K - 1
        if u[pos + 3] >= alias_prob[k]:
            k = alias_idx[k]
        x = parts[i]
        if d == 1:
            y = (x + disp[k, 0]) % M
        else:
            x0 = x // M
            x1 = x % M
            y = ((x0 + disp[k, 0]) % M) * M + (x1 + disp[k, 1]) % M
        proposals += 1
        if u[pos + 4] * (alpha + max_occ) < alpha + occ[y]:
            carre += _carre_delta(occ, alpha, probs, disp, phi, M, d, x, -1.0)
            occ[x] -= 1
            carre += _carre_delta(occ, alpha, probs, disp, phi, M, d, y, 1.0)
            occ[y] += 1
            parts[i] = y
            if occ[y] > max_occ:
                max_occ = occ[y]
            accepted += 1
        pos += DRAWS_PER_PROPOSAL
    return t_now, pos, max_occ, proposals, accepted, status, carre, qv


@maybe_njit(cache=True)
def dual_walker_loop(positions, alpha, speed, alias_prob, alias_idx, disp,
                     M, d, t_now, t_end, u, pos):
    """Thinning loop for k <= 4 labeled inclusion walkers.

    Walker i jumps by r at rate speed * q(r) * (alpha + #{j != i at the
    destination}); the thinning bound is alpha + k - 1.
    """
    k_walkers = positions.shape[0]
    K = alias_prob.shape[0]
    bound = alpha + (k_walkers - 1)
    status = 1
    while True:
        if pos + DRAWS_PER_PROPOSAL > u.shape[0]:
            break
        rate = speed * k_walkers * bound
        dt = -math.log(u[pos]) / rate
        if t_now + dt > t_end:
            t_now = t_end
            pos += 1
            status = 0
            break
        t_now += dt
        i = int(u[pos + 1] * k_walkers)
        if i >= k_walkers:
            i = k_walkers - 1
        kk = int(u[pos + 2] * K)
        if kk >= K:
            kk = K - 1
        if u[pos + 3] >= alias_prob[kk]:
            kk = alias_idx[kk]
        x = positions[i]
        if d == 1:
            y = (x + disp[kk, 0]) % M
        else:
            x0 = x // M
            x1 = x % M
            y = ((x0 + disp[kk, 0]) % M) * M + (x1 + disp[kk, 1]) % M
        companions = 0
        for j in range(k_walkers):
            if j != i and positions[j] == y:
                companions += 1
        if u[pos + 4] * bound < alpha + companions:
            positions[i] = y
        pos += DRAWS_PER_PROPOSAL
    return t_now, pos, status
