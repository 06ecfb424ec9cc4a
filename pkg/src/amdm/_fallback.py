"""Pure numpy version of the integrator core.

Same contract as ``amdm._kernels.integrate``; used when the compiled
extension is unavailable or ``AMDM_BACKEND=python`` is set.
"""
import numpy as np


def _observe(theta):
    c = np.cos(theta).mean()
    s = np.sin(theta).mean()
    return s, np.hypot(c, s), np.arctan2(s, c)


def integrate(model, theta, vel, omega, K, dt, nsteps, rec_steps,
              ev_step, ev_osc, ev_amount, reassign, record_phases=False):
    # the caller checks the result for non-finite values, as with the compiled kernel
    with np.errstate(invalid="ignore", over="ignore"):
        return _integrate(model, theta, vel, omega, K, dt, nsteps, rec_steps,
                          ev_step, ev_osc, ev_amount, reassign, record_phases)


def _integrate(model, theta, vel, omega, K, dt, nsteps, rec_steps,
               ev_step, ev_osc, ev_amount, reassign, record_phases):
    n = theta.shape[0]
    nrec = rec_steps.shape[0]
    nev = ev_step.shape[0]
    x = np.empty(nrec)
    r = np.empty(nrec)
    psi = np.empty(nrec)
    ph = np.empty((nrec if record_phases else 0, n))
    omega_sq = omega * omega

    rec = 0
    ev = 0
    while rec < nrec and rec_steps[rec] == 0:
        x[rec], r[rec], psi[rec] = _observe(theta)
        if record_phases:
            ph[rec] = theta
        rec += 1

    for k in range(1, nsteps + 1):
        cs = np.cos(theta)
        sn = np.sin(theta)
        sc = cs.mean()
        ss = sn.mean()
        coup = K * (ss * cs - sc * sn)
        if model == 1:
            theta += dt * (omega + coup)
        else:
            vel += dt * (-omega_sq * theta + coup)
            theta += dt * vel

        while ev < nev and ev_step[ev] == k:
            j = ev_osc[ev]
            if reassign:
                theta[j] = ev_amount[ev]
            else:
                theta[j] += ev_amount[ev]
            ev += 1

        while rec < nrec and rec_steps[rec] == k:
            x[rec], r[rec], psi[rec] = _observe(theta)
            if record_phases:
                ph[rec] = theta
            rec += 1

    return x, r, psi, ph
