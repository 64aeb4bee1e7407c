"""Deterministic nonlinear least-squares fits for decay and readout models.

A damped Gauss-Newton iteration with analytic Jacobians handles every
model, with closed-form heuristics for the initial guesses (dense
periodogram scan for frequencies, log-linear regression for exchange,
percentile moments for mixtures).  No stochastic optimizer is involved, so
identical inputs give identical fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GRAD_TOL = 1e-8
LN10 = math.log(10.0)


class FittingError(ValueError):
    pass


@dataclass
class FitResult:
    model: str
    params: dict[str, float]
    sigma: dict[str, float]
    residual_rms: float
    converged: bool
    extra: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "params": self.params,
            "sigma": self.sigma,
            "residual_rms": self.residual_rms,
            "converged": self.converged,
            **({"derived": self.extra} if self.extra else {}),
        }


def _norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def levenberg_marquardt(fun, p0, *, max_iter: int = 300, grad_tol: float = GRAD_TOL,
                        lam0: float = 1e-3):
    """Minimize ||r(p)||^2 where ``fun(p)`` returns (residuals, jacobian).

    Convergence means the cost-scaled gradient infinity norm dropped below
    ``grad_tol``.  Returns (params, covariance, rms, converged).
    """
    p = np.asarray(p0, dtype=float).copy()
    r, jac = fun(p)
    cost = float(r @ r)
    lam = lam0
    converged = False
    for _ in range(max_iter):
        g = jac.T @ r
        if np.abs(g).max() < grad_tol * (1.0 + cost):
            converged = True
            break
        jtj = jac.T @ jac
        accepted = False
        for _ in range(40):
            damped = jtj + lam * np.diag(np.clip(np.diag(jtj), 1e-12, None))
            try:
                step = np.linalg.solve(damped, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + step
            r_t, jac_t = fun(trial)
            cost_t = float(r_t @ r_t)
            if cost_t < cost:
                p, r, jac, cost = trial, r_t, jac_t, cost_t
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break
    m, k = jac.shape
    dof = max(m - k, 1)
    s2 = cost / dof
    try:
        cov = s2 * np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.full((k, k), np.nan)
    rms = math.sqrt(cost / m)
    return p, cov, rms, converged


def _sigma_dict(names, cov) -> dict[str, float]:
    diag = np.diag(cov)
    return {n: (math.sqrt(v) if v >= 0 else float("nan")) for n, v in zip(names, diag)}


def bloch_length(six_axis_expectations: dict[str, float]) -> float:
    """Euclidean Bloch-vector norm from the six signed-axis expectations."""
    comps = []
    for plus, minus in (("+x", "-x"), ("+y", "-y"), ("+z", "-z")):
        if plus not in six_axis_expectations or minus not in six_axis_expectations:
            raise FittingError(f"missing axis pair {plus}/{minus}")
        comps.append((six_axis_expectations[plus] - six_axis_expectations[minus]) / 2.0)
    return float(np.sqrt(sum(c * c for c in comps)))


def _periodogram_peak(t: np.ndarray, y: np.ndarray) -> float:
    """Dense deterministic frequency scan (works on non-uniform grids)."""
    span = t.max() - t.min()
    dt = np.diff(np.sort(t)).min()
    f_lo, f_hi = 0.25 / span, 0.5 / dt
    freqs = np.linspace(f_lo, f_hi, 4096)
    yc = y - y.mean()
    amp = np.abs(np.exp(-2j * np.pi * np.outer(freqs, t)) @ yc)
    return float(freqs[int(np.argmax(amp))])


def fit_rabi(durations, probabilities) -> FitResult:
    """A*exp(-t/T2Rabi)*cos(2 pi f t + phi) + c, frequency seeded spectrally."""
    t = np.asarray(durations, dtype=float)
    y = np.asarray(probabilities, dtype=float)
    if t.size < 8:
        raise FittingError("rabi fit needs at least 8 points")
    if t.size != y.size or np.unique(t).size < t.size:
        raise FittingError("degenerate duration grid")
    f0 = _periodogram_peak(t, y)
    c0 = float(y.mean())
    ph = np.exp(-2j * np.pi * f0 * t)
    zc = (y - c0) @ ph
    a0 = 2.0 * abs(zc) / t.size
    phi0 = math.atan2(zc.imag, zc.real)
    t0 = max(t.max() / 2.0, np.median(t))

    def fun(p):
        f, tau, a, phi, c = p
        env = np.exp(-t / tau)
        arg = 2.0 * np.pi * f * t + phi
        cosv = np.cos(arg)
        model = a * env * cosv + c
        jac = np.empty((t.size, 5))
        jac[:, 0] = -a * env * np.sin(arg) * 2.0 * np.pi * t
        jac[:, 1] = a * env * cosv * t / tau**2
        jac[:, 2] = env * cosv
        jac[:, 3] = -a * env * np.sin(arg)
        jac[:, 4] = 1.0
        return model - y, jac

    p, cov, rms, ok = levenberg_marquardt(fun, [f0, t0, a0, phi0, c0])
    names = ("f_rabi", "t2_rabi", "amplitude", "phase", "offset")
    params = dict(zip(names, (float(v) for v in p)))
    if abs(params["amplitude"]) < 1e-3:
        ok = False  # no oscillation to fit
    return FitResult("rabi", params, _sigma_dict(names, cov), rms, ok)


def _decay_fit(t, y, power_fixed: float | None, model_name: str) -> FitResult:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 6:
        raise FittingError(f"{model_name} fit needs at least 6 points")
    if power_fixed is None and t.size < 8:
        raise FittingError("free-exponent fit needs at least 8 points")
    c0 = float(min(y.min(), y[-1]))
    a0 = float(y[0] - c0)
    if abs(a0) < 1e-12:
        a0 = max(y.max() - y.min(), 1e-6)
    # first crossing of the 1/e level seeds the time constant
    level = c0 + a0 / math.e
    below = np.nonzero(y <= level)[0]
    t0 = float(t[below[0]]) if below.size else float(t.max() / 2.0)
    t0 = max(t0, 1e-3 * t.max() if t.max() > 0 else 1e-9)

    free_p = power_fixed is None

    def fun(pv):
        tau, a, c = pv[:3]
        p = pv[3] if free_p else power_fixed
        x = np.clip(t / tau, 1e-300, None)
        xp = x**p
        env = np.exp(-xp)
        model = a * env + c
        jac = np.empty((t.size, pv.size))
        jac[:, 0] = a * env * xp * p / tau
        jac[:, 1] = env
        jac[:, 2] = 1.0
        if free_p:
            with np.errstate(divide="ignore", invalid="ignore"):
                lnx = np.where(x > 0, np.log(x), 0.0)
            jac[:, 3] = -a * env * xp * lnx
        return model - y, jac

    p0 = [t0, a0, c0] + ([1.0] if free_p else [])
    p, cov, rms, ok = levenberg_marquardt(fun, p0)
    names = ["t2", "amplitude", "offset"] + (["power"] if free_p else [])
    params = dict(zip(names, (float(v) for v in p)))
    if not free_p:
        params["power"] = float(power_fixed)
    if abs(params["amplitude"]) < 1e-3:
        ok = False
    sig = _sigma_dict(names, cov)
    return FitResult(model_name, params, sig, rms, ok)


def fit_ramsey(taus, bloch_lengths) -> FitResult:
    """Gaussian free-induction decay A*exp(-(t/T2*)^2) + c."""
    res = _decay_fit(taus, bloch_lengths, 2.0, "ramsey")
    res.params["t2_star"] = res.params.pop("t2")
    res.sigma["t2_star"] = res.sigma.pop("t2")
    return res


def fit_hahn(taus, bloch_lengths, exponent: float | None = 1.0) -> FitResult:
    """Echo decay A*exp(-(t/T2)^p) + c with p fixed (default 1) or free."""
    res = _decay_fit(taus, bloch_lengths, exponent, "hahn")
    res.params["t2_hahn"] = res.params.pop("t2")
    res.sigma["t2_hahn"] = res.sigma.pop("t2")
    return res


def fit_exchange(dv_values, j_values) -> FitResult:
    """J = a*exp(b*dv) + c fitted in log space with positive a, c."""
    dv = np.asarray(dv_values, dtype=float)
    j = np.asarray(j_values, dtype=float)
    if np.any(j <= 0):
        raise FittingError("exchange rates must be positive")
    if dv.size == 2:
        # two exact points determine (a, b) with c = 0
        b = (math.log(j[1]) - math.log(j[0])) / (dv[1] - dv[0])
        a = j[0] * math.exp(-b * dv[0])
        return FitResult(
            "exchange", {"a": a, "b": b, "c": 0.0},
            {"a": 0.0, "b": 0.0, "c": 0.0}, 0.0, True,
            extra={"decades_per_volt": b / LN10},
        )
    if dv.size < 5:
        raise FittingError("exchange fit needs at least 5 points")
    if math.log10(j.max() / j.min()) < 1.0:
        raise FittingError("exchange data must span at least one decade")
    # log-linear regression seeds the exponential part
    bb, la = np.polyfit(dv, np.log(j), 1)
    logj = np.log(j)
    c_seed = max(j.min() * 1e-3, 1e-12)

    def fun(p):
        lna, b, lnc = p
        a, c = math.exp(lna), math.exp(lnc)
        model = a * np.exp(b * dv) + c
        r = np.log(model) - logj
        jac = np.empty((dv.size, 3))
        jac[:, 0] = a * np.exp(b * dv) / model
        jac[:, 1] = a * dv * np.exp(b * dv) / model
        jac[:, 2] = c / model
        return r, jac

    p, cov, rms, ok = levenberg_marquardt(fun, [la, bb, math.log(c_seed)])
    a, b, c = math.exp(p[0]), float(p[1]), math.exp(p[2])
    # delta-method sigmas for the exponentiated parameters
    sig = _sigma_dict(("lna", "b", "lnc"), cov)
    sigma = {"a": a * sig["lna"], "b": sig["b"], "c": c * sig["lnc"]}
    return FitResult("exchange", {"a": a, "b": b, "c": c}, sigma, rms, ok,
                     extra={"decades_per_volt": b / LN10})


def best_threshold(w: float, mu1: float, mu2: float, s1: float, s2: float) -> float:
    """Misclassification-minimizing boundary of a two-Gaussian mixture."""
    if mu1 > mu2:
        mu1, mu2, s1, s2, w = mu2, mu1, s2, s1, 1.0 - w
    if abs(s1 - s2) < 1e-12 * max(s1, s2):
        t = (mu1 + mu2) / 2.0
        if abs(w - 0.5) > 1e-12:
            t += s1**2 * math.log((1.0 - w) / w) / (mu2 - mu1)
        return t
    # stationary point of the weighted densities: quadratic in t
    a = 1.0 / s1**2 - 1.0 / s2**2
    b = -2.0 * (mu1 / s1**2 - mu2 / s2**2)
    c = (mu1**2 / s1**2 - mu2**2 / s2**2) - 2.0 * math.log((w * s2) / ((1.0 - w) * s1))
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return (mu1 + mu2) / 2.0
    roots = [(-b + math.sqrt(disc)) / (2 * a), (-b - math.sqrt(disc)) / (2 * a)]
    inside = [r for r in roots if mu1 < r < mu2]
    return inside[0] if inside else (mu1 + mu2) / 2.0


def mixture_misclassification(w, mu1, mu2, s1, s2, t) -> float:
    if mu1 > mu2:
        mu1, mu2, s1, s2, w = mu2, mu1, s2, s1, 1.0 - w
    return w * (1.0 - _norm_cdf((t - mu1) / s1)) + (1.0 - w) * _norm_cdf((t - mu2) / s2)


def fit_bimodal(signals, nbins: int = 80) -> FitResult:
    """Two-Gaussian mixture fit of raw SET signals, binned deterministically.

    Derived quantities: SNR = |mu2-mu1| / ((s1+s2)/2), the optimal
    classification threshold, and the charge fidelity 1 - misclassification
    at that threshold.
    """
    x = np.asarray(signals, dtype=float)
    if x.size < 1000:
        raise FittingError("bimodal fit needs at least 1000 samples")
    counts, edges = np.histogram(x, bins=nbins)
    centers = (edges[:-1] + edges[1:]) / 2.0
    width = edges[1] - edges[0]
    n = x.size

    med = np.median(x)
    lo, hi = x[x < med], x[x >= med]
    mu1_0, mu2_0 = float(lo.mean()), float(hi.mean())
    s1_0 = max(float(lo.std()), 1e-6 * (mu2_0 - mu1_0 + 1e-12))
    s2_0 = max(float(hi.std()), s1_0)

    def fun(p):
        wl, mu1, mu2, ls1, ls2 = p
        w = 1.0 / (1.0 + math.exp(-wl))
        s1, s2 = math.exp(ls1), math.exp(ls2)
        z1 = (centers - mu1) / s1
        z2 = (centers - mu2) / s2
        g1 = np.exp(-0.5 * z1**2) / (s1 * math.sqrt(2 * math.pi))
        g2 = np.exp(-0.5 * z2**2) / (s2 * math.sqrt(2 * math.pi))
        model = n * width * (w * g1 + (1 - w) * g2)
        jac = np.empty((centers.size, 5))
        dw = w * (1 - w)
        jac[:, 0] = n * width * (g1 - g2) * dw
        jac[:, 1] = n * width * w * g1 * z1 / s1
        jac[:, 2] = n * width * (1 - w) * g2 * z2 / s2
        jac[:, 3] = n * width * w * g1 * (z1**2 - 1.0)
        jac[:, 4] = n * width * (1 - w) * g2 * (z2**2 - 1.0)
        return model - counts, jac

    p0 = [0.0, mu1_0, mu2_0, math.log(s1_0), math.log(s2_0)]
    p, cov, rms, ok = levenberg_marquardt(fun, p0)
    w = 1.0 / (1.0 + math.exp(-p[0]))
    mu1, mu2 = float(p[1]), float(p[2])
    s1, s2 = math.exp(p[3]), math.exp(p[4])
    if abs(mu2 - mu1) < (s1 + s2) / 2.0:
        raise FittingError("modes closer than one sigma; data look unimodal")
    snr = abs(mu2 - mu1) / ((s1 + s2) / 2.0)
    thr = best_threshold(w, mu1, mu2, s1, s2)
    fid = 1.0 - mixture_misclassification(w, mu1, mu2, s1, s2, thr)
    names = ("weight_logit", "mu1", "mu2", "ln_sigma1", "ln_sigma2")
    sig = _sigma_dict(names, cov)
    params = {"mu1": mu1, "mu2": mu2, "sigma1": s1, "sigma2": s2, "weight": w}
    sigma = {"mu1": sig["mu1"], "mu2": sig["mu2"],
             "sigma1": s1 * sig["ln_sigma1"], "sigma2": s2 * sig["ln_sigma2"],
             "weight": w * (1 - w) * sig["weight_logit"]}
    return FitResult("bimodal", params, sigma, rms, ok,
                     extra={"snr": snr, "best_threshold": thr, "charge_fidelity": fid})
