# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Kuramoto integrator loops.

Mirrors :mod:`amdm._fallback` exactly in algorithm; results agree with it
to rounding, not bitwise.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sqrt, atan2

cnp.import_array()


def integrate(int model,
              double[::1] theta,
              double[::1] vel,
              const double[::1] omega,
              double K,
              double dt,
              long nsteps,
              const long[::1] rec_steps,
              const long[::1] ev_step,
              const long[::1] ev_osc,
              const double[::1] ev_amount,
              int reassign,
              bint record_phases=False):
    """Advance the ensemble ``nsteps`` steps in place and record observables.

    model 1 is explicit Euler on the phase equation, model 2 semi-implicit
    Euler on the inertial equation. Events with ``ev_step == k`` are applied
    right after step ``k``; observables for ``rec_steps == k`` are taken after
    that.
    """
    cdef Py_ssize_t n = theta.shape[0]
    cdef Py_ssize_t nrec = rec_steps.shape[0]
    cdef Py_ssize_t nev = ev_step.shape[0]
    cdef Py_ssize_t i, j
    cdef long k
    cdef Py_ssize_t rec = 0, ev = 0
    cdef double c, s, sc, ss, inv_n = 1.0 / n, coup

    x_arr = np.empty(nrec)
    r_arr = np.empty(nrec)
    psi_arr = np.empty(nrec)
    ph_arr = np.empty((nrec if record_phases else 0, n))
    cdef double[::1] x = x_arr
    cdef double[::1] r = r_arr
    cdef double[::1] psi = psi_arr
    cdef double[:, ::1] ph = ph_arr
    cdef double[::1] cs = np.empty(n)
    cdef double[::1] sn = np.empty(n)

    k = 0
    while rec < nrec and rec_steps[rec] == 0:
        sc = 0.0
        ss = 0.0
        for i in range(n):
            sc += cos(theta[i])
            ss += sin(theta[i])
            if record_phases:
                ph[rec, i] = theta[i]
        sc *= inv_n
        ss *= inv_n
        x[rec] = ss
        r[rec] = sqrt(sc * sc + ss * ss)
        psi[rec] = atan2(ss, sc)
        rec += 1

    for k in range(1, nsteps + 1):
        sc = 0.0
        ss = 0.0
        for i in range(n):
            c = cos(theta[i])
            s = sin(theta[i])
            cs[i] = c
            sn[i] = s
            sc += c
            ss += s
        sc *= inv_n
        ss *= inv_n
        if model == 1:
            for i in range(n):
                coup = K * (ss * cs[i] - sc * sn[i])
                theta[i] = theta[i] + dt * (omega[i] + coup)
        else:
            for i in range(n):
                coup = K * (ss * cs[i] - sc * sn[i])
                vel[i] = vel[i] + dt * (-omega[i] * omega[i] * theta[i] + coup)
                theta[i] = theta[i] + dt * vel[i]

        while ev < nev and ev_step[ev] == k:
            j = ev_osc[ev]
            if reassign:
                theta[j] = ev_amount[ev]
            else:
                theta[j] = theta[j] + ev_amount[ev]
            ev += 1

        while rec < nrec and rec_steps[rec] == k:
            sc = 0.0
            ss = 0.0
            for i in range(n):
                sc += cos(theta[i])
                ss += sin(theta[i])
                if record_phases:
                    ph[rec, i] = theta[i]
            sc *= inv_n
            ss *= inv_n
            x[rec] = ss
            r[rec] = sqrt(sc * sc + ss * ss)
            psi[rec] = atan2(ss, sc)
            rec += 1

    return x_arr, r_arr, psi_arr, ph_arr
