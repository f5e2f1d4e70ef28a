"""Compiled inner loops for the parallel-tempering sampler.

Everything here is a plain-array mirror of the readable implementations in
`model`, `gp`, and `sampler.gibbs_sweep`; the test suite drives both routes
with identical pre-drawn randoms and checks they agree. All randomness is
passed in as arrays (drawn outside from per-chain streams), so a run is
deterministic regardless of how the work is scheduled.

Tempering layout: chain j targets  likelihood^(1/delta_j) * prior.  Only the
likelihood is tempered, which changes the conjugate blocks as follows:

* eta   | ... ~ N(Lam^-1 b, Lam^-1) with  Lam = P_eta + Y'Y/(delta*sg2),
        b = P_eta eta* + Y'gamma_tilde/(delta*sg2)  (likelihood sufficient
        statistics scaled by 1/delta);
* sg2   | ... ~ Inv-Ga(a_g + (T+1)/(2*delta), b_g + SSR/(2*delta));
* mu and sigma_beta2 condition only on the (untempered) process prior of
  beta_tilde, so their conditionals do not involve delta:
  mu  ~ N with precision  P_mu + X~' W X~  (AR(1)-whitened design), and
  sb2 ~ Inv-Ga(a_b + (T+1)/2, b_b + Q/2) with
  Q = e_0^2 + sum_{t>=1} e_t^2/(1-rho^2), e_t the AR(1) innovations.
"""

from __future__ import annotations

import math

from numba import njit

LOG2PI = math.log(2.0 * math.pi)

LINK_LOGIT = 0
LINK_PROBIT = 1
LINK_CLOGLOG = 2

LINK_CODES = {"logit": LINK_LOGIT, "probit": LINK_PROBIT, "cloglog": LINK_CLOGLOG}


@njit(cache=True)
def _ppnd16(p):
    """Wichura's AS 241 inverse standard-normal CDF (double precision)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    x = num / den
    return -x if q < 0.0 else x


@njit(cache=True)
def _link_fwd(p, kind):
    if kind == LINK_LOGIT:
        return math.log(p / (1.0 - p))
    elif kind == LINK_PROBIT:
        return _ppnd16(p)
    else:
        return math.log(-math.log1p(-p))


@njit(cache=True)
def _expit(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def _propagate(S, IU, ID, RR, t0, T, beta, ov_t, ov_beta, alpha, B, N):
    """Fill compartments for t0+1..T from the state at t0.

    beta[s] drives step s -> s+1, except step ov_t which uses ov_beta
    (site-proposal support). Returns False as soon as a compartment would
    go negative.
    """
    for s in range(t0, T):
        b = ov_beta if s == ov_t else beta[s]
        ninf = b * S[s] * (IU[s] + ID[s]) / N
        Sn = S[s] - ninf
        IUn = (1.0 - alpha) * IU[s] + ninf - B[s]
        IDn = (1.0 - alpha) * ID[s] + B[s]
        Rn = RR[s] + alpha * (IU[s] + ID[s])
        if Sn < 0.0 or IUn < 0.0 or IDn < 0.0 or Rn < 0.0:
            return False
        S[s + 1] = Sn
        IU[s + 1] = IUn
        ID[s + 1] = IDn
        RR[s + 1] = Rn
    return True


@njit(cache=True)
def _gamma_terms(IU, B, alpha, kind, eta_lin, sg2, lo, hi, gt_out, llt_out):
    """Transformed diagnosis rates and their normal log-density terms on [lo, hi]."""
    c = -0.5 * math.log(2.0 * math.pi * sg2)
    for t in range(lo, hi + 1):
        denom = (1.0 - alpha) * IU[t]
        if denom <= 0.0:
            return False
        g = B[t] / denom
        if g <= 0.0 or g >= 1.0:
            return False
        gtv = _link_fwd(g, kind)
        gt_out[t] = gtv
        r = gtv - eta_lin[t]
        llt_out[t] = c - 0.5 * r * r / sg2
    return True


@njit(cache=True)
def _refresh_llt(gt, eta_lin, sg2, T, llt_out):
    c = -0.5 * math.log(2.0 * math.pi * sg2)
    tot = 0.0
    for t in range(T + 1):
        r = gt[t] - eta_lin[t]
        llt_out[t] = c - 0.5 * r * r / sg2
        tot += llt_out[t]
    return tot


@njit(cache=True)
def _full_loglik(r0v, beta, alpha, B, N, I_D0, kind, eta_lin, sg2,
                 S, IU, ID, RR, gt, llt, T, use_fixed, fixed_gt):
    """Trajectory + likelihood from scratch; returns (feasible, total)."""
    IU0 = r0v * I_D0
    S0 = N - IU0 - I_D0
    if S0 < 0.0:
        return False, 0.0
    S[0] = S0
    IU[0] = IU0
    ID[0] = I_D0
    RR[0] = 0.0
    if use_fixed:
        # detached diagnosis-scale series: the trajectory is irrelevant
        for t in range(T + 1):
            gt[t] = fixed_gt[t]
        tot = _refresh_llt(gt, eta_lin, sg2, T, llt)
        return True, tot
    if not _propagate(S, IU, ID, RR, 0, T, beta, -1, 0.0, alpha, B, N):
        return False, 0.0
    if not _gamma_terms(IU, B, alpha, kind, eta_lin, sg2, 0, T, gt, llt):
        return False, 0.0
    tot = 0.0
    for t in range(T + 1):
        tot += llt[t]
    return True, tot


@njit(cache=True)
def _ar1_logpdf(bt, m, s2, rho, T):
    v = s2 * (1.0 - rho * rho)
    d0 = bt[0] - m[0]
    ll = -0.5 * (LOG2PI + math.log(s2)) - 0.5 * d0 * d0 / s2
    for t in range(1, T + 1):
        e = (bt[t] - m[t]) - rho * (bt[t - 1] - m[t - 1])
        ll += -0.5 * (LOG2PI + math.log(v)) - 0.5 * e * e / v
    return ll


@njit(cache=True)
def _chol(A, L, p):
    """Lower-triangular Cholesky of the p x p leading block; False if not PD."""
    for i in range(p):
        for j in range(i + 1):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if s <= 0.0:
                    return False
                L[i, i] = math.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    return True


@njit(cache=True)
def _conj_normal_draw(Lam, bvec, z, p, L, work, out):
    """Draw from N(Lam^-1 b, Lam^-1) given standard normals z.

    Uses x = mean + L^-T z with Lam = L L'. Returns False when Lam is not PD.
    """
    if not _chol(Lam, L, p):
        return False
    # forward solve L y = b
    for i in range(p):
        s = bvec[i]
        for k in range(i):
            s -= L[i, k] * work[k]
        work[i] = s / L[i, i]
    # back solve L' mean = y, reusing out for the mean
    for i in range(p - 1, -1, -1):
        s = work[i]
        for k in range(i + 1, p):
            s -= L[k, i] * out[k]
        out[i] = s / L[i, i]
    # perturbation: solve L' w = z and add
    for i in range(p - 1, -1, -1):
        s = z[i]
        for k in range(i + 1, p):
            s -= L[k, i] * work[k]
        work[i] = s / L[i, i]
    for i in range(p):
        out[i] += work[i]
    return True


@njit(cache=True)
def _eta_prior_delta(eta_j, shift, Peta, Peta_m, q):
    """Log prior ratio of eta when its first component moves by `shift`.

    With precision P and shift vector b = P eta*, the log density is
    -0.5 eta'P eta + eta'b + const, so moving eta_0 by s changes it by
    -s (P eta)_0 - 0.5 s^2 P_00 + s b_0.
    """
    pe0 = 0.0
    for a in range(q):
        pe0 += Peta[0, a] * eta_j[a]
    return -shift * pe0 - 0.5 * shift * shift * Peta[0, 0] + shift * Peta_m[0]


@njit(cache=True)
def _swap_rows1(a, j):
    tmp = a[j]
    a[j] = a[j + 1]
    a[j + 1] = tmp


@njit(cache=True)
def _swap_rows2(a, j):
    for t in range(a.shape[1]):
        tmp = a[j, t]
        a[j, t] = a[j + 1, t]
        a[j + 1, t] = tmp


@njit(cache=True)
def _sweep_chain(
    j, k, T, p, q,
    B, N, I_D0, X, Y, YtY, link_kind,
    nu1, nu2, a_sb, b_sb, rho_a, rho_b, a_al, b_al,
    Pmu, Pmu_m, Peta, Peta_m, b_sg,
    delta, ridge_r0,
    r0, bt, beta_cur, alpha_inv, mu, sb2, rho, eta, sg2,
    S, IU, ID, RR, gt, llt, eta_lin, ll,
    S2, IU2, ID2, R2, gt2, llt2, elin2, btp,
    sc_r0, sc_r0b, sc_r0c, sc_bt, sc_al, sc_rho, sc_rhob,
    zn_r0, un_r0, zn_r0b, un_r0b, zn_r0c, un_r0c, zn_bt, un_bt, zn_al, un_al, zn_mu, g_sb,
    zn_rho, un_rho, zn_rhob, un_rhob, zn_eta, g_sg,
    accw_r0, accw_r0b, accw_r0c, accw_bt, accw_al, accw_rho, accw_rhob,
    accT_r0, accT_r0b, accT_r0c, accT_bt, accT_al, accT_rho, accT_rhob, post,
    mvec, pwork1, pwork2, pmat, pmatL,
    use_fixed, fixed_gt,
):
    """One Metropolis-within-Gibbs sweep for chain j at iteration k of the block."""
    inv_delta = 1.0 / delta

    # process-prior mean, used by blocks 1, 2, 5, 6
    for t in range(T + 1):
        mvec[t] = 0.0
        for c in range(p):
            mvec[t] += X[t, c] * mu[j, c]

    # ---- block 1: r0 (two random walks on log r0) -------------------------
    # Scaling the undocumented pool by c = exp(step) shifts the transformed
    # diagnosis rates by about -log c, so both moves also shift the intercept
    # of eta by -step (when the first covariate column is one). Move 1a keeps
    # the transmission path fixed; robust everywhere, including hot chains
    # whose states sit near feasibility boundaries. Move 1b additionally
    # remaps the path so the whole pool scales by c (new infections become
    # c*newinf - (c-1)*B_t), the exact weakly-identified family, which walks
    # the cold posterior ridge in O(1) sweeps; the deterministic remap is
    # triangular in (log r0, beta_tilde), so its diagonal derivatives and the
    # process-prior ratio of the remapped path enter the acceptance.
    alpha = 1.0 / alpha_inv[j]

    # -- move 1a: level shift --
    z = zn_r0[j, k]
    step = sc_r0[j] * z
    r0p = r0[j] * math.exp(step)
    shift = -step if ridge_r0 else 0.0
    if step == 0.0:
        accw_r0[j] += 1
        if post:
            accT_r0[j] += 1
    else:
        for t in range(T + 1):
            elin2[j, t] = eta_lin[j, t] + shift * Y[t, 0]
        ok, llnew = _full_loglik(
            r0p, beta_cur[j], alpha, B, N, I_D0, link_kind,
            elin2[j], sg2[j], S2[j], IU2[j], ID2[j], R2[j], gt2[j], llt2[j],
            T, use_fixed, fixed_gt,
        )
        if ok:
            la = inv_delta * (llnew - ll[j])
            la += (nu1 - 1.0) * step - nu2 * (r0p - r0[j])
            la += step  # log transform Jacobian
            if ridge_r0:
                la += _eta_prior_delta(eta[j], shift, Peta, Peta_m, q)
            if la >= 0.0 or un_r0[j, k] < math.exp(la):
                r0[j] = r0p
                ll[j] = llnew
                if ridge_r0:
                    eta[j, 0] += shift
                    for t in range(T + 1):
                        eta_lin[j, t] = elin2[j, t]
                for t in range(T + 1):
                    S[j, t] = S2[j, t]
                    IU[j, t] = IU2[j, t]
                    ID[j, t] = ID2[j, t]
                    RR[j, t] = R2[j, t]
                    gt[j, t] = gt2[j, t]
                    llt[j, t] = llt2[j, t]
                accw_r0[j] += 1
                if post:
                    accT_r0[j] += 1

    # -- move 1b: pool-scaling remap --
    z = zn_r0b[j, k]
    step = sc_r0b[j] * z
    cfac = math.exp(step)
    r0p = r0[j] * cfac
    shift = -step if ridge_r0 else 0.0
    if step == 0.0:
        accw_r0b[j] += 1
        if post:
            accT_r0b[j] += 1
    elif use_fixed:
        # detached likelihood: plain prior walk on r0 (no trajectory to remap)
        la = (nu1 - 1.0) * step - nu2 * (r0p - r0[j]) + step
        if la >= 0.0 or un_r0b[j, k] < math.exp(la):
            r0[j] = r0p
            accw_r0b[j] += 1
            if post:
                accT_r0b[j] += 1
    else:
        feasible = True
        S2[j, 0] = N - r0p * I_D0 - I_D0
        R2[j, 0] = 0.0
        logjac = 0.0
        if S2[j, 0] <= 0.0:
            feasible = False
        if feasible:
            for t in range(T + 1):
                IU2[j, t] = cfac * IU[j, t]
                ID2[j, t] = ID[j, t]
                newinf = beta_cur[j, t] * S[j, t] * (IU[j, t] + ID[j, t]) / N
                newinf_p = cfac * newinf - (cfac - 1.0) * B[t]
                if newinf_p <= 0.0:
                    feasible = False
                    break
                beta_p = newinf_p * N / (S2[j, t] * (cfac * IU[j, t] + ID[j, t]))
                btp[j, t] = math.log(beta_p)
                elin2[j, t] = eta_lin[j, t] + shift * Y[t, 0]
                logjac += (
                    step
                    + math.log(S[j, t]) - math.log(S2[j, t])
                    + math.log(IU[j, t] + ID[j, t])
                    - math.log(cfac * IU[j, t] + ID[j, t])
                    + bt[j, t] - btp[j, t]
                )
                if t < T:
                    S2[j, t + 1] = S2[j, t] - newinf_p
                    R2[j, t + 1] = R2[j, t] + alpha * (IU2[j, t] + ID[j, t])
                    if S2[j, t + 1] <= 0.0:
                        feasible = False
                        break
        if feasible:
            feasible = _gamma_terms(
                IU2[j], B, alpha, link_kind, elin2[j], sg2[j], 0, T, gt2[j], llt2[j]
            )
        if feasible:
            llnew = 0.0
            for t in range(T + 1):
                llnew += llt2[j, t]
            la = inv_delta * (llnew - ll[j])
            la += (nu1 - 1.0) * step - nu2 * (r0p - r0[j])
            la += step  # log r0 transform Jacobian
            la += logjac  # beta_tilde remap Jacobian
            la += _ar1_logpdf(btp[j], mvec, sb2[j], rho[j], T)
            la -= _ar1_logpdf(bt[j], mvec, sb2[j], rho[j], T)
            if ridge_r0:
                la += _eta_prior_delta(eta[j], shift, Peta, Peta_m, q)
            if la >= 0.0 or un_r0b[j, k] < math.exp(la):
                r0[j] = r0p
                ll[j] = llnew
                if ridge_r0:
                    eta[j, 0] += shift
                for t in range(T + 1):
                    bt[j, t] = btp[j, t]
                    beta_cur[j, t] = math.exp(btp[j, t])
                    eta_lin[j, t] = elin2[j, t]
                    S[j, t] = S2[j, t]
                    IU[j, t] = IU2[j, t]
                    ID[j, t] = ID2[j, t]
                    RR[j, t] = R2[j, t]
                    gt[j, t] = gt2[j, t]
                    llt[j, t] = llt2[j, t]
                accw_r0b[j] += 1
                if post:
                    accT_r0b[j] += 1

    # -- move 1c: path-level remap at fixed initial pool --
    # same pool-scaling family as 1b but with I_U0 pinned: the pool path
    # scales by c for t >= 1 only, which trades the transmission level
    # against the diagnosis-rate level (eta) without touching r0. This is
    # the residual slow direction once 1b handles the r0 ridge.
    z = zn_r0c[j, k]
    step = sc_r0c[j] * z
    cfac = math.exp(step)
    alpha = 1.0 / alpha_inv[j]
    shift = -step if ridge_r0 else 0.0
    if step == 0.0:
        accw_r0c[j] += 1
        if post:
            accT_r0c[j] += 1
    elif not use_fixed:
        feasible = True
        S2[j, 0] = S[j, 0]
        IU2[j, 0] = IU[j, 0]
        ID2[j, 0] = ID[j, 0]
        R2[j, 0] = 0.0
        logjac = 0.0
        for t in range(T + 1):
            if t >= 1:
                IU2[j, t] = cfac * IU[j, t]
                ID2[j, t] = ID[j, t]
            newinf = beta_cur[j, t] * S[j, t] * (IU[j, t] + ID[j, t]) / N
            newinf_p = cfac * newinf - (cfac - 1.0) * B[t]
            if t == 0:
                newinf_p += (cfac - 1.0) * (1.0 - alpha) * IU[j, 0]
            if newinf_p <= 0.0:
                feasible = False
                break
            beta_p = newinf_p * N / (S2[j, t] * (IU2[j, t] + ID[j, t]))
            btp[j, t] = math.log(beta_p)
            elin2[j, t] = eta_lin[j, t] + shift * Y[t, 0]
            logjac += (
                step
                + math.log(S[j, t]) - math.log(S2[j, t])
                + math.log(IU[j, t] + ID[j, t]) - math.log(IU2[j, t] + ID[j, t])
                + bt[j, t] - btp[j, t]
            )
            if t < T:
                S2[j, t + 1] = S2[j, t] - newinf_p
                R2[j, t + 1] = R2[j, t] + alpha * (IU2[j, t] + ID[j, t])
                if S2[j, t + 1] <= 0.0:
                    feasible = False
                    break
        if feasible:
            feasible = _gamma_terms(
                IU2[j], B, alpha, link_kind, elin2[j], sg2[j], 0, T, gt2[j], llt2[j]
            )
        if feasible:
            llnew = 0.0
            for t in range(T + 1):
                llnew += llt2[j, t]
            la = inv_delta * (llnew - ll[j])
            la += logjac
            la += _ar1_logpdf(btp[j], mvec, sb2[j], rho[j], T)
            la -= _ar1_logpdf(bt[j], mvec, sb2[j], rho[j], T)
            if ridge_r0:
                la += _eta_prior_delta(eta[j], shift, Peta, Peta_m, q)
            if la >= 0.0 or un_r0c[j, k] < math.exp(la):
                ll[j] = llnew
                if ridge_r0:
                    eta[j, 0] += shift
                for t in range(T + 1):
                    bt[j, t] = btp[j, t]
                    beta_cur[j, t] = math.exp(btp[j, t])
                    eta_lin[j, t] = elin2[j, t]
                    S[j, t] = S2[j, t]
                    IU[j, t] = IU2[j, t]
                    ID[j, t] = ID2[j, t]
                    RR[j, t] = R2[j, t]
                    gt[j, t] = gt2[j, t]
                    llt[j, t] = llt2[j, t]
                accw_r0c[j] += 1
                if post:
                    accT_r0c[j] += 1

    # ---- block 2: beta_tilde single-site walks ----------------------------
    v = sb2[j] * (1.0 - rho[j] * rho[j])
    alpha = 1.0 / alpha_inv[j]
    for t in range(T + 1):
        z = zn_bt[j, k, t]
        site_prop = bt[j, t] + sc_bt[j, t] * z
        bold = bt[j, t]
        # prior terms touching site t (AR(1) neighbors)
        dp = 0.0
        if t == 0:
            d_new = site_prop - mvec[0]
            d_old = bold - mvec[0]
            dp += -0.5 * (d_new * d_new - d_old * d_old) / sb2[j]
            if T >= 1:
                e_new = (bt[j, 1] - mvec[1]) - rho[j] * d_new
                e_old = (bt[j, 1] - mvec[1]) - rho[j] * d_old
                dp += -0.5 * (e_new * e_new - e_old * e_old) / v
        else:
            prev = bt[j, t - 1] - mvec[t - 1]
            e_new = (site_prop - mvec[t]) - rho[j] * prev
            e_old = (bold - mvec[t]) - rho[j] * prev
            dp += -0.5 * (e_new * e_new - e_old * e_old) / v
            if t < T:
                nxt = bt[j, t + 1] - mvec[t + 1]
                f_new = nxt - rho[j] * (site_prop - mvec[t])
                f_old = nxt - rho[j] * (bold - mvec[t])
                dp += -0.5 * (f_new * f_new - f_old * f_old) / v
        # likelihood terms for s >= t+1 (beta_t first enters step t -> t+1)
        if use_fixed or t == T:
            la = dp
            ok = True
            dL = 0.0
        else:
            S2[j, t] = S[j, t]
            IU2[j, t] = IU[j, t]
            ID2[j, t] = ID[j, t]
            R2[j, t] = RR[j, t]
            ok = _propagate(
                S2[j], IU2[j], ID2[j], R2[j], t, T, beta_cur[j],
                t, math.exp(site_prop), alpha, B, N,
            )
            dL = 0.0
            if ok:
                ok = _gamma_terms(
                    IU2[j], B, alpha, link_kind, eta_lin[j], sg2[j],
                    t + 1, T, gt2[j], llt2[j],
                )
            if ok:
                for s in range(t + 1, T + 1):
                    dL += llt2[j, s] - llt[j, s]
            la = dp + inv_delta * dL
        if ok and (la >= 0.0 or un_bt[j, k, t] < math.exp(la)):
            bt[j, t] = site_prop
            beta_cur[j, t] = math.exp(site_prop)
            if not use_fixed and t < T:
                for s in range(t + 1, T + 1):
                    S[j, s] = S2[j, s]
                    IU[j, s] = IU2[j, s]
                    ID[j, s] = ID2[j, s]
                    RR[j, s] = R2[j, s]
                    gt[j, s] = gt2[j, s]
                    llt[j, s] = llt2[j, s]
                ll[j] += dL
            accw_bt[j, t] += 1
            if post:
                accT_bt[j] += 1

    # ---- block 3: alpha_inv, random walk on log(alpha_inv - 1) ------------
    z = zn_al[j, k]
    w_old = math.log(alpha_inv[j] - 1.0)
    w_new = w_old + sc_al[j] * z
    a_new = 1.0 + math.exp(w_new)
    ok, llnew = _full_loglik(
        r0[j], beta_cur[j], 1.0 / a_new, B, N, I_D0, link_kind,
        eta_lin[j], sg2[j], S2[j], IU2[j], ID2[j], R2[j], gt2[j], llt2[j],
        T, use_fixed, fixed_gt,
    )
    if ok:
        # truncated Ga(a_al, b_al) on alpha_inv (normalizer cancels) + Jacobian
        la = inv_delta * (llnew - ll[j])
        la += (a_al - 1.0) * (math.log(a_new) - math.log(alpha_inv[j]))
        la -= b_al * (a_new - alpha_inv[j])
        la += w_new - w_old
        if la >= 0.0 or un_al[j, k] < math.exp(la):
            alpha_inv[j] = a_new
            ll[j] = llnew
            for t in range(T + 1):
                S[j, t] = S2[j, t]
                IU[j, t] = IU2[j, t]
                ID[j, t] = ID2[j, t]
                RR[j, t] = R2[j, t]
                gt[j, t] = gt2[j, t]
                llt[j, t] = llt2[j, t]
            accw_al[j] += 1
            if post:
                accT_al[j] += 1

    # ---- block 4: mu, exact conjugate given (beta_tilde, sb2, rho) --------
    v = sb2[j] * (1.0 - rho[j] * rho[j])
    for a in range(p):
        pwork2[a] = Pmu_m[a]
        for b in range(p):
            pmat[a, b] = Pmu[a, b]
    w0 = 1.0 / sb2[j]
    for a in range(p):
        pwork2[a] += w0 * X[0, a] * bt[j, 0]
        for b in range(p):
            pmat[a, b] += w0 * X[0, a] * X[0, b]
    for t in range(1, T + 1):
        zt = bt[j, t] - rho[j] * bt[j, t - 1]
        for a in range(p):
            xa = X[t, a] - rho[j] * X[t - 1, a]
            pwork2[a] += xa * zt / v
            for b in range(p):
                xb = X[t, b] - rho[j] * X[t - 1, b]
                pmat[a, b] += xa * xb / v
    if _conj_normal_draw(pmat, pwork2, zn_mu[j, k], p, pmatL, pwork1, mvec[: p]):
        for a in range(p):
            mu[j, a] = mvec[a]
    for t in range(T + 1):
        mvec[t] = 0.0
        for c in range(p):
            mvec[t] += X[t, c] * mu[j, c]

    # ---- block 5: sigma_beta2, exact conjugate ----------------------------
    d0 = bt[j, 0] - mvec[0]
    Q = d0 * d0
    om = 1.0 - rho[j] * rho[j]
    for t in range(1, T + 1):
        e = (bt[j, t] - mvec[t]) - rho[j] * (bt[j, t - 1] - mvec[t - 1])
        Q += e * e / om
    sb2[j] = (b_sb + 0.5 * Q) / g_sb[j, k]

    # ---- block 6: rho (two random walks on logit rho) ---------------------
    # 6a keeps the path fixed (prior-side brake). 6b is the non-centered
    # variant: it remaps beta_tilde so the standardized AR(1) innovations are
    # preserved, for which the process-prior ratio and the triangular map
    # Jacobian cancel exactly, leaving only the likelihood of the remapped
    # path and the Beta prior in the ratio. Without 6b, rho and the path
    # roughness form a slowly-mixing cycle that tempering cannot help (only
    # the likelihood is tempered, not the process prior).
    z = zn_rho[j, k]
    w_old = math.log(rho[j] / (1.0 - rho[j]))
    rho_new = _expit(w_old + sc_rho[j] * z)
    if 1e-12 < rho_new < 1.0 - 1e-12:
        la = _ar1_logpdf(bt[j], mvec, sb2[j], rho_new, T)
        la -= _ar1_logpdf(bt[j], mvec, sb2[j], rho[j], T)
        la += (rho_a - 1.0) * (math.log(rho_new) - math.log(rho[j]))
        la += (rho_b - 1.0) * (math.log1p(-rho_new) - math.log1p(-rho[j]))
        la += math.log(rho_new) + math.log1p(-rho_new)
        la -= math.log(rho[j]) + math.log1p(-rho[j])
        if la >= 0.0 or un_rho[j, k] < math.exp(la):
            rho[j] = rho_new
            accw_rho[j] += 1
            if post:
                accT_rho[j] += 1

    # -- move 6b: innovation-preserving remap --
    z = zn_rhob[j, k]
    w_old = math.log(rho[j] / (1.0 - rho[j]))
    step = sc_rhob[j] * z
    rho_new = _expit(w_old + step)
    if step == 0.0:
        accw_rhob[j] += 1
        if post:
            accT_rhob[j] += 1
    elif 1e-12 < rho_new < 1.0 - 1e-12:
        kappa = math.sqrt((1.0 - rho_new * rho_new) / (1.0 - rho[j] * rho[j]))
        btp[j, 0] = bt[j, 0]
        for t in range(1, T + 1):
            e_t = (bt[j, t] - mvec[t]) - rho[j] * (bt[j, t - 1] - mvec[t - 1])
            btp[j, t] = mvec[t] + rho_new * (btp[j, t - 1] - mvec[t - 1]) + kappa * e_t
        if use_fixed:
            ok = True
            llnew = ll[j]
        else:
            alpha = 1.0 / alpha_inv[j]  # block 3 may have moved it
            ok = True
            S2[j, 0] = N - r0[j] * I_D0 - I_D0
            IU2[j, 0] = r0[j] * I_D0
            ID2[j, 0] = I_D0
            R2[j, 0] = 0.0
            for t in range(T):
                b_step = math.exp(btp[j, t])
                ninf = b_step * S2[j, t] * (IU2[j, t] + ID2[j, t]) / N
                Sn = S2[j, t] - ninf
                IUn = (1.0 - alpha) * IU2[j, t] + ninf - B[t]
                IDn = (1.0 - alpha) * ID2[j, t] + B[t]
                Rn = R2[j, t] + alpha * (IU2[j, t] + ID2[j, t])
                if Sn < 0.0 or IUn < 0.0 or IDn < 0.0 or Rn < 0.0:
                    ok = False
                    break
                S2[j, t + 1] = Sn
                IU2[j, t + 1] = IUn
                ID2[j, t + 1] = IDn
                R2[j, t + 1] = Rn
            if ok:
                ok = _gamma_terms(
                    IU2[j], B, alpha, link_kind, eta_lin[j], sg2[j], 0, T,
                    gt2[j], llt2[j],
                )
            if ok:
                llnew = 0.0
                for t in range(T + 1):
                    llnew += llt2[j, t]
        if ok:
            la = inv_delta * (llnew - ll[j])
            la += (rho_a - 1.0) * (math.log(rho_new) - math.log(rho[j]))
            la += (rho_b - 1.0) * (math.log1p(-rho_new) - math.log1p(-rho[j]))
            la += math.log(rho_new) + math.log1p(-rho_new)
            la -= math.log(rho[j]) + math.log1p(-rho[j])
            # process-prior ratio + remap Jacobian cancel exactly
            if la >= 0.0 or un_rhob[j, k] < math.exp(la):
                rho[j] = rho_new
                ll[j] = llnew
                for t in range(T + 1):
                    bt[j, t] = btp[j, t]
                    beta_cur[j, t] = math.exp(btp[j, t])
                if not use_fixed:
                    for t in range(T + 1):
                        S[j, t] = S2[j, t]
                        IU[j, t] = IU2[j, t]
                        ID[j, t] = ID2[j, t]
                        RR[j, t] = R2[j, t]
                        gt[j, t] = gt2[j, t]
                        llt[j, t] = llt2[j, t]
                accw_rhob[j] += 1
                if post:
                    accT_rhob[j] += 1

    # ---- block 7: eta, conjugate with likelihood stats scaled by 1/delta --
    scale = inv_delta / sg2[j]
    for a in range(q):
        pwork2[a] = Peta_m[a]
        for b in range(q):
            pmat[a, b] = Peta[a, b] + YtY[a, b] * scale
    for t in range(T + 1):
        for a in range(q):
            pwork2[a] += Y[t, a] * gt[j, t] * scale
    if _conj_normal_draw(pmat, pwork2, zn_eta[j, k], q, pmatL, pwork1, mvec[: q]):
        for a in range(q):
            eta[j, a] = mvec[a]
    for t in range(T + 1):
        eta_lin[j, t] = 0.0
        for a in range(q):
            eta_lin[j, t] += Y[t, a] * eta[j, a]

    # ---- block 8: sigma_gamma2, conjugate with 1/delta-scaled stats -------
    ssr = 0.0
    for t in range(T + 1):
        r = gt[j, t] - eta_lin[j, t]
        ssr += r * r
    sg2[j] = (b_sg + 0.5 * ssr * inv_delta) / g_sg[j, k]

    # eta / sg2 changed: refresh the stored likelihood terms
    ll[j] = _refresh_llt(gt[j], eta_lin[j], sg2[j], T, llt[j])


@njit(cache=True)
def run_block(
    iter0, K, burn_in, thin, adapt_window, adapt_on, swap_every,
    B, N, I_D0, X, Y, YtY, link_kind, T, p, q,
    nu1, nu2, a_sb, b_sb, rho_a, rho_b, a_al, b_al,
    Pmu, Pmu_m, Peta, Peta_m, b_sg,
    deltas, ridge_r0,
    r0, bt, beta_cur, alpha_inv, mu, sb2, rho, eta, sg2,
    S, IU, ID, RR, gt, llt, eta_lin, ll,
    S2, IU2, ID2, R2, gt2, llt2, elin2, btp,
    sc_r0, sc_r0b, sc_r0c, sc_bt, sc_al, sc_rho, sc_rhob,
    accw_r0, accw_r0b, accw_r0c, accw_bt, accw_al, accw_rho, accw_rhob,
    accT_r0, accT_r0b, accT_r0c, accT_bt, accT_al, accT_rho, accT_rhob,
    zn_r0, un_r0, zn_r0b, un_r0b, zn_r0c, un_r0c, zn_bt, un_bt, zn_al, un_al, zn_mu, g_sb,
    zn_rho, un_rho, zn_rhob, un_rhob, zn_eta, g_sg, un_swap,
    swap_acc, swap_att,
    rec_r0, rec_bt, rec_alinv, rec_mu, rec_sb2, rec_rho, rec_eta, rec_sg2,
    rec_ll, rec_pos,
    mwork, pwork1, pwork2, pmat, pmatL,
    use_fixed, fixed_gt,
):
    """Advance all chains through K iterations (sweeps, swaps, recording)."""
    J = r0.shape[0]
    for k in range(K):
        it = iter0 + k + 1
        post = it > burn_in
        for j in range(J):
            _sweep_chain(
                j, k, T, p, q,
                B, N, I_D0, X, Y, YtY, link_kind,
                nu1, nu2, a_sb, b_sb, rho_a, rho_b, a_al, b_al,
                Pmu, Pmu_m, Peta, Peta_m, b_sg,
                deltas[j], ridge_r0,
                r0, bt, beta_cur, alpha_inv, mu, sb2, rho, eta, sg2,
                S, IU, ID, RR, gt, llt, eta_lin, ll,
                S2, IU2, ID2, R2, gt2, llt2, elin2, btp,
                sc_r0, sc_r0b, sc_r0c, sc_bt, sc_al, sc_rho, sc_rhob,
                zn_r0, un_r0, zn_r0b, un_r0b, zn_r0c, un_r0c, zn_bt, un_bt, zn_al, un_al, zn_mu, g_sb,
                zn_rho, un_rho, zn_rhob, un_rhob, zn_eta, g_sg,
                accw_r0, accw_r0b, accw_r0c, accw_bt, accw_al, accw_rho, accw_rhob,
                accT_r0, accT_r0b, accT_r0c, accT_bt, accT_al, accT_rho, accT_rhob, post,
                mwork[j], pwork1[j], pwork2[j], pmat[j], pmatL[j],
                use_fixed, fixed_gt,
            )
        # adjacent-pair swap proposals, ascending (hot -> cold)
        if J > 1 and it % swap_every == 0:
            for j in range(J - 1):
                la = (1.0 / deltas[j] - 1.0 / deltas[j + 1]) * (ll[j + 1] - ll[j])
                if post:
                    swap_att[j] += 1
                if la >= 0.0 or un_swap[k, j] < math.exp(la):
                    if post:
                        swap_acc[j] += 1
                    _swap_rows1(r0, j)
                    _swap_rows2(bt, j)
                    _swap_rows2(beta_cur, j)
                    _swap_rows1(alpha_inv, j)
                    _swap_rows2(mu, j)
                    _swap_rows1(sb2, j)
                    _swap_rows1(rho, j)
                    _swap_rows2(eta, j)
                    _swap_rows1(sg2, j)
                    _swap_rows2(S, j)
                    _swap_rows2(IU, j)
                    _swap_rows2(ID, j)
                    _swap_rows2(RR, j)
                    _swap_rows2(gt, j)
                    _swap_rows2(llt, j)
                    _swap_rows2(eta_lin, j)
                    _swap_rows1(ll, j)
        # proposal-scale adaptation, burn-in only, frozen afterwards
        if adapt_on and it <= burn_in and it % adapt_window == 0:
            w = float(adapt_window)
            for j in range(J):
                f = math.exp(accw_r0[j] / w - 0.23)
                sc_r0[j] = min(max(sc_r0[j] * f, 1e-8), 1e4)
                accw_r0[j] = 0
                f = math.exp(accw_r0b[j] / w - 0.23)
                sc_r0b[j] = min(max(sc_r0b[j] * f, 1e-8), 1e4)
                accw_r0b[j] = 0
                f = math.exp(accw_r0c[j] / w - 0.23)
                sc_r0c[j] = min(max(sc_r0c[j] * f, 1e-8), 1e4)
                accw_r0c[j] = 0
                f = math.exp(accw_al[j] / w - 0.23)
                sc_al[j] = min(max(sc_al[j] * f, 1e-8), 1e4)
                accw_al[j] = 0
                f = math.exp(accw_rho[j] / w - 0.23)
                sc_rho[j] = min(max(sc_rho[j] * f, 1e-8), 1e4)
                accw_rho[j] = 0
                f = math.exp(accw_rhob[j] / w - 0.23)
                sc_rhob[j] = min(max(sc_rhob[j] * f, 1e-8), 1e4)
                accw_rhob[j] = 0
                for t in range(T + 1):
                    f = math.exp(accw_bt[j, t] / w - 0.44)
                    sc_bt[j, t] = min(max(sc_bt[j, t] * f, 1e-8), 1e4)
                    accw_bt[j, t] = 0
        # cold chain recording
        if post and (it - burn_in) % thin == 0:
            pos = rec_pos[0]
            cj = J - 1
            rec_r0[pos] = r0[cj]
            rec_alinv[pos] = alpha_inv[cj]
            rec_sb2[pos] = sb2[cj]
            rec_rho[pos] = rho[cj]
            rec_sg2[pos] = sg2[cj]
            rec_ll[pos] = ll[cj]
            for t in range(T + 1):
                rec_bt[pos, t] = bt[cj, t]
            for a in range(p):
                rec_mu[pos, a] = mu[cj, a]
            for a in range(q):
                rec_eta[pos, a] = eta[cj, a]
            rec_pos[0] = pos + 1
