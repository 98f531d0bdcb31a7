"""Error exponents for labeled and unlabeled detection.

Conventions
-----------
``lam`` vectors hold the m - 1 free coordinates; the reference symbol is the
last one and its coordinate is pinned to zero.  Gradients are returned as
full length-m probability vectors, Hessians as (m-1)x(m-1) matrices.

The unlabeled exponent is

    Omega(alpha) = min { Psi1(w) : Psi0(w) <= alpha },

where Psi_h is the convex conjugate of the class-averaged log-MGF psi_h.
The constraint is handled by scalarization: for s in (0, 1) the minimizer
of (1 - s) Psi1 + s Psi0 is the pmf w with
grad psi0((1 - s) eta) = grad psi1(-s eta) = w, found by Newton in eta, and
s is tuned by a bracketing root finder until Psi0(w) = alpha.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import DomainError, SolverError
from .probability import DistributionClass, HypothesisModel, Pmf, average_pmf, kl_divergence, paired_classes

OMEGA_FLOOR = 1e-9
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 200
CONSTRAINT_TOL = 1e-8
AVERAGE_TIE = 1e-12


def _as_classes(r) -> list[DistributionClass]:
    if isinstance(r, Pmf):
        return [DistributionClass(r, 1.0)]
    if isinstance(r, DistributionClass):
        return [DistributionClass(r.pmf, 1.0)]
    if isinstance(r, (list, tuple)) and r and isinstance(r[0], DistributionClass):
        return list(r)
    return [DistributionClass(Pmf(r), 1.0)]


class LogMgf:
    """Class-averaged log-MGF psi(lam) = sum_c w_c log sum_x r_c(x) exp(lam(x))."""

    def __init__(self, r):
        classes = _as_classes(r)
        self.weights = np.array([c.weight for c in classes])
        self.log_r = np.log(np.stack([c.pmf.probs for c in classes]))
        self.m = self.log_r.shape[1]
        self.mean = average_pmf(classes).probs

    def _full(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.m - 1,):
            raise DomainError(f"lambda must have {self.m - 1} free coordinates, got shape {lam.shape}")
        return np.append(lam, 0.0)

    def _tilted(self, lam):
        logits = self.log_r + self._full(lam)
        top = logits.max(axis=1, keepdims=True)
        e = np.exp(logits - top)
        z = e.sum(axis=1)
        return np.log(z) + top[:, 0], e / z[:, None]

    def value(self, lam) -> float:
        lse, _ = self._tilted(lam)
        return float(self.weights @ lse)

    def grad(self, lam) -> np.ndarray:
        _, tilted = self._tilted(lam)
        return self.weights @ tilted

    def hess(self, lam) -> np.ndarray:
        _, tilted = self._tilted(lam)
        return self._hess_from(tilted)

    def all(self, lam):
        lse, tilted = self._tilted(lam)
        return float(self.weights @ lse), self.weights @ tilted, self._hess_from(tilted)

    def _hess_from(self, tilted) -> np.ndarray:
        t = tilted[:, :-1]
        g = self.weights @ t
        return np.diag(g) - (t * self.weights[:, None]).T @ t

    def iid_lambda(self, omega: np.ndarray) -> np.ndarray:
        """Maximizer of the conjugate when the classes are replaced by their average."""
        rb = self.mean
        return np.log(omega[:-1] * rb[-1] / (rb[:-1] * omega[-1]))


# --- single-pmf and class-averaged log-MGF -----------------------------------

def phi(lam, r) -> float:
    return LogMgf(r).value(lam)


def grad_phi(lam, r) -> np.ndarray:
    return LogMgf(r).grad(lam)


def hess_phi(lam, r) -> np.ndarray:
    return LogMgf(r).hess(lam)


def psi(lam, classes: Sequence[DistributionClass]) -> float:
    return LogMgf(classes).value(lam)


def grad_psi(lam, classes: Sequence[DistributionClass]) -> np.ndarray:
    return LogMgf(classes).grad(lam)


def hess_psi(lam, classes: Sequence[DistributionClass]) -> np.ndarray:
    return LogMgf(classes).hess(lam)


# --- Legendre transform -------------------------------------------------------

def _interior(omega) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    if w.ndim != 1 or np.any(w < 0) or abs(w.sum() - 1) > 1e-6:
        raise DomainError(f"omega must be a probability vector, got {w!r}")
    w = np.maximum(w, OMEGA_FLOOR)
    return w / w.sum()


def _conjugate(omega: np.ndarray, f: LogMgf, lam0=None) -> tuple[float, np.ndarray]:
    """Damped Newton ascent of lam . omega' - psi(lam)."""
    target = omega[:-1]
    lam = f.iid_lambda(omega) if lam0 is None else np.array(lam0, dtype=float)
    val, g, h = f.all(lam)
    obj = lam @ target - val
    for it in range(NEWTON_MAX_ITER):
        resid = target - g[:-1]
        if np.max(np.abs(resid)) < NEWTON_TOL:
            return obj, lam
        step = np.linalg.solve(h, resid)
        slope = resid @ step
        t = 1.0
        while True:
            cand = lam + t * step
            cval, cg, ch = f.all(cand)
            cobj = cand @ target - cval
            # near the optimum the objective gain drops below rounding, so a
            # smaller gradient residual is also accepted
            if (cobj >= obj + 1e-4 * t * slope
                    or np.max(np.abs(target - cg[:-1])) < np.max(np.abs(resid))
                    or t < 1e-12):
                break
            t *= 0.5
        lam, val, g, h, obj = cand, cval, cg, ch, cobj
    raise SolverError(
        "Legendre transform did not converge",
        iterations=NEWTON_MAX_ITER, residual=float(np.max(np.abs(target - g[:-1]))), omega=omega.tolist(),
    )


def legendre_psi(omega, classes, lam0=None, return_lambda: bool = False):
    """sup over lam of lam . omega' - psi(lam); zero exactly at the averaged pmf."""
    f = classes if isinstance(classes, LogMgf) else LogMgf(classes)
    w = _interior(omega)
    if w.size != f.m:
        raise DomainError(f"omega has {w.size} entries, alphabet has {f.m}")
    value, lam = _conjugate(w, f, lam0)
    value = max(value, 0.0)
    return (value, lam) if return_lambda else value


# --- exponents ----------------------------------------------------------------

def averaged_model(model: HypothesisModel, h1: bool = True, h0: bool = True) -> HypothesisModel:
    """Replace the class lists of the chosen hypotheses by their average pmf (iid data)."""
    def avg(classes, flag):
        return [DistributionClass(average_pmf(classes), 1.0)] if flag else list(classes)

    return HypothesisModel(avg(model.h1_classes, h1), avg(model.h0_classes, h0))


class UnlabeledExponent:
    """Omega(alpha) for one model, reusing Newton warm starts across calls."""

    def __init__(self, model: HypothesisModel):
        self.f1 = LogMgf(list(model.h1_classes))
        self.f0 = LogMgf(list(model.h0_classes))
        self.p_bar = self.f1.mean
        self.q_bar = self.f0.mean
        # s = 0 end: w = p_bar;  s = 1 end: w = q_bar
        self.alpha_star, lam0_p = _conjugate(_interior(self.p_bar), self.f0)
        self.omega_zero, lam1_q = _conjugate(_interior(self.q_bar), self.f1)
        if np.max(np.abs(self.p_bar - self.q_bar)) < AVERAGE_TIE:
            # equal averages: the type carries no exponential evidence
            self.alpha_star = self.omega_zero = 0.0
        self.alpha_star = max(self.alpha_star, 0.0)
        self.omega_zero = max(self.omega_zero, 0.0)
        self._eta_lo = lam0_p
        self._eta_hi = -lam1_q
        self._eta = None

    def tilted_point(self, s: float):
        """(w, Psi0(w), Psi1(w)) for the minimizer of (1-s) Psi1 + s Psi0."""
        if s <= 0.0:
            return self.p_bar, self.alpha_star, 0.0
        if s >= 1.0:
            return self.q_bar, 0.0, self.omega_zero
        eta = self._eta if self._eta is not None else (1 - s) * self._eta_lo + s * self._eta_hi
        f0, f1 = self.f0, self.f1

        def state(e):
            l0, l1 = (1 - s) * e, -s * e
            v0, g0, h0 = f0.all(l0)
            v1, g1, h1 = f1.all(l1)
            # merit: squared residual of the stationarity condition
            r = g0[:-1] - g1[:-1]
            return l0, l1, v0, g0, h0, v1, g1, h1, float(r @ r)

        st = state(eta)
        for it in range(NEWTON_MAX_ITER):
            l0, l1, v0, g0, h0, v1, g1, h1, merit = st
            resid = g0[:-1] - g1[:-1]
            if np.max(np.abs(resid)) < 1e-15:
                break
            step = -np.linalg.solve((1 - s) * h0 + s * h1, resid)
            t = 1.0
            while True:
                cand = state(eta + t * step)
                if cand[-1] <= (1 - 1e-4 * t) * merit or t < 1e-10:
                    break
                t *= 0.5
            if cand[-1] >= merit:
                break
            eta = eta + t * step
            st = cand
        l0, l1, v0, g0, h0, v1, g1, h1, obj = st
        resid = float(np.max(np.abs(g0 - g1)))
        if resid > 1e-9:
            raise SolverError("tilted-point Newton did not converge", s=s, residual=resid)
        self._eta = eta
        psi0_val = max(float(l0 @ g0[:-1] - v0), 0.0)
        psi1_val = max(float(l1 @ g1[:-1] - v1), 0.0)
        return g0, psi0_val, psi1_val

    def __call__(self, alpha: float) -> float:
        return self.solve(alpha)[0]

    def solve(self, alpha: float) -> tuple[float, np.ndarray]:
        """(Omega(alpha), minimizing pmf)."""
        if alpha < 0:
            raise DomainError(f"alpha must be positive, got {alpha!r}")
        if alpha >= self.alpha_star:
            return 0.0, self.p_bar
        if alpha == 0:
            return self.omega_zero, self.q_bar

        def gap(s):
            return self.tilted_point(s)[1] - alpha

        try:
            s_star = brentq(gap, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        except (ValueError, RuntimeError) as exc:
            raise SolverError(f"multiplier search failed: {exc}", alpha=alpha) from None
        w, c0, c1 = self.tilted_point(s_star)
        if abs(c0 - alpha) > CONSTRAINT_TOL:
            raise SolverError("constraint residual too large", alpha=alpha, residual=abs(c0 - alpha), s=s_star)
        return c1, w


def omega_unlabeled(alpha: float, model: HypothesisModel) -> float:
    return UnlabeledExponent(model)(alpha)


class LabeledExponent:
    """Omega_lab(alpha) over the product of per-class simplices."""

    def __init__(self, model: HypothesisModel):
        p_cls, q_cls = paired_classes(model.h1_classes, model.h0_classes)
        self.weights = np.array([c.weight for c in p_cls])
        self.log_p = np.log(np.stack([c.pmf.probs for c in p_cls]))
        self.log_q = np.log(np.stack([c.pmf.probs for c in q_cls]))
        # endpoints taken from the same evaluation the root search brackets with
        self.alpha_star = self.tilted_point(0.0)[1]
        self.omega_zero = self.tilted_point(1.0)[2]

    def tilted_point(self, s: float):
        logits = (1 - s) * self.log_p + s * self.log_q
        log_w = logits - logsumexp(logits, axis=1)[:, None]
        w = np.exp(log_w)
        d0 = float(self.weights @ (w * (log_w - self.log_q)).sum(axis=1))
        d1 = float(self.weights @ (w * (log_w - self.log_p)).sum(axis=1))
        return w, max(d0, 0.0), max(d1, 0.0)

    def __call__(self, alpha: float) -> float:
        if alpha < 0:
            raise DomainError(f"alpha must be positive, got {alpha!r}")
        if alpha >= self.alpha_star:
            return 0.0
        if alpha <= self.tilted_point(1.0)[1]:
            # at or below the rounding floor of Psi0(q) = 0
            return self.omega_zero
        s_star = brentq(lambda s: self.tilted_point(s)[1] - alpha, 0.0, 1.0,
                        xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        _, c0, c1 = self.tilted_point(s_star)
        if abs(c0 - alpha) > CONSTRAINT_TOL:
            raise SolverError("constraint residual too large", alpha=alpha, residual=abs(c0 - alpha))
        return c1


def omega_labeled(alpha: float, model: HypothesisModel) -> float:
    return LabeledExponent(model)(alpha)


@dataclass(frozen=True, eq=False)
class ExponentCurve:
    alphas: np.ndarray
    omegas: np.ndarray
    omega_zero: float
    alpha_star: float
    labeled: np.ndarray | None = None
    iid_bound: np.ndarray | None = None

    def check(self, slack: float = 1e-8) -> None:
        """Raise if the sampled curve is not nonincreasing and convex."""
        d = np.diff(self.omegas)
        if np.any(d > slack):
            raise SolverError("exponent curve is not nonincreasing", worst=float(d.max()))
        a = self.alphas
        if a.size >= 3:
            slopes = d / np.diff(a)
            second = np.diff(slopes)
            scale = np.maximum(1.0, np.abs(slopes[1:]))
            if np.any(second < -slack * scale):
                raise SolverError("exponent curve is not convex", worst=float(second.min()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["alpha", "omega_unlabeled", "omega_labeled", "omega_iid_bound"])
        for i, a in enumerate(self.alphas):
            row = [a, self.omegas[i],
                   self.labeled[i] if self.labeled is not None else float("nan"),
                   self.iid_bound[i] if self.iid_bound is not None else float("nan")]
            writer.writerow([f"{v:.12g}" for v in row])
        return buf.getvalue()


def default_alpha_grid(alpha_star: float, points: int = 200) -> np.ndarray:
    if not alpha_star > 0:
        raise DomainError("the averaged pmfs coincide, so Omega is identically zero; pass an explicit grid")
    return np.geomspace(alpha_star / 1000, 1.2 * alpha_star, points)


def exponent_curve(
    model: HypothesisModel,
    alpha_grid=None,
    labeled: bool = True,
    iid_bound: bool = True,
    check: bool = True,
) -> ExponentCurve:
    solver = UnlabeledExponent(model)
    alphas = default_alpha_grid(solver.alpha_star) if alpha_grid is None else np.asarray(alpha_grid, dtype=float)
    if np.any(alphas <= 0):
        raise DomainError("alpha grid must be positive")
    omegas = np.array([solver(a) for a in alphas])
    lab = None
    if labeled:
        lsolver = LabeledExponent(model)
        lab = np.array([lsolver(a) for a in alphas])
    bound = None
    if iid_bound:
        bsolver = UnlabeledExponent(averaged_model(model))
        bound = np.array([bsolver(a) for a in alphas])
    curve = ExponentCurve(alphas, omegas, solver.omega_zero, solver.alpha_star, lab, bound)
    if check:
        curve.check()
    return curve
