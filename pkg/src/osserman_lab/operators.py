"""Pucci extremal operators, a library of second-order operators F and
Hamiltonians H, and randomized checkers for the structure conditions they
are supposed to satisfy (gradient-growth bounds, x-shift modulus,
convexity-type bound, and the sublinearization inequality with the
gamma-tilde constant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import SymMatrix

MARGIN_TOL = 1e-9
_PMAX = 1e3  # sampling range for gradient magnitudes (log-uniform)


class MetadataError(ValueError):
    """A checker was asked for a condition whose constants H does not carry."""


@dataclass(frozen=True)
class EllipticityPair:
    lam: float
    Lam: float

    def __post_init__(self):
        if not (0 < self.lam <= self.Lam):
            raise ValueError("need 0 < lam <= Lam")


@dataclass(frozen=True)
class CheckReport:
    condition: str
    samples: int
    worst_margin: float
    witness: dict
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.worst_margin >= -MARGIN_TOL


@dataclass(frozen=True)
class OperatorF:
    """Second-order operator (x, X) -> real, normalized so F(x, 0) = 0.

    The evaluator is vectorized: x has shape (N, n), X has shape (N, n, n).
    """

    evaluator: Callable
    ellipticity: EllipticityPair
    tag: str

    def __call__(self, x, X):
        return self.evaluator(np.asarray(x, dtype=float), np.asarray(X, dtype=float))


@dataclass(frozen=True)
class HamiltonianH:
    """Gradient Hamiltonian (x, p) -> real with H(x, 0) = 0 and its constants.

    growth = (m, gamma1, gamma_m) are valid both for the two-point bound
        |H(x,p) - H(x,q)| <= (gamma1 + gamma_m(|p|^{m-1}+|q|^{m-1}))|p-q|
    and for the shifted form |H(x,p+q) - H(y,p)| with the modulus
    omega(t) = modulus_coeff * t on the x-shift.
    convexity = (c_lower, A, sigma0) when H satisfies the convexity-type
    bound H(x,p) - sigma H(x, p/sigma) <= (1-sigma)(-c_lower|p|^m + A).
    """

    evaluator: Callable
    m: float
    gamma1: float
    gamma_m: float
    convexity: Optional[tuple] = None   # (c_lower, A, sigma0)
    sign: str = "neither"               # 'convex', 'concave', 'neither'
    modulus_coeff: float = 0.0
    tag: str = "custom"
    params: dict = field(default_factory=dict)
    claims: tuple = ()

    def __call__(self, x, p):
        return self.evaluator(np.asarray(x, dtype=float), np.asarray(p, dtype=float))


# ---------------------------------------------------------------------------
# Pucci operators
# ---------------------------------------------------------------------------

def pucci(X: SymMatrix, ell: EllipticityPair, extremal: str = "+") -> float:
    """Closed-form Pucci extremal operator from the eigenvalues of X."""
    eigs = X.eigenvalues()
    pos = eigs[eigs > 0].sum()
    neg = eigs[eigs < 0].sum()
    if extremal == "+":
        return float(ell.Lam * pos + ell.lam * neg)
    if extremal == "-":
        return float(ell.lam * pos + ell.Lam * neg)
    raise ValueError("extremal must be '+' or '-'")


def pucci_batch(eigs: np.ndarray, lam: float, Lam: float, extremal: str = "+") -> np.ndarray:
    """Pucci from precomputed eigenvalues, batched over the leading axis."""
    pos = np.clip(eigs, 0.0, None).sum(axis=-1)
    neg = np.clip(eigs, None, 0.0).sum(axis=-1)
    if extremal == "+":
        return Lam * pos + lam * neg
    return lam * pos + Lam * neg


def _admissible_coeffs_2d(rng, samples: int, lam: float, Lam: float,
                          endpoint_bias: float = 0.5):
    """Random admissible A = Q diag(d1,d2) Q^T reduced to quadratic-form
    coefficients: Tr(AX) = M @ (x11, x12, x22) for upper-triangle X."""
    theta = rng.uniform(0.0, np.pi, samples)
    d = rng.uniform(lam, Lam, (samples, 2))
    snap = rng.random((samples, 2)) < endpoint_bias
    ends = np.where(rng.random((samples, 2)) < 0.5, lam, Lam)
    d = np.where(snap, ends, d)
    c, s = np.cos(theta), np.sin(theta)
    # q1 = (c, s), q2 = (-s, c)
    m11 = d[:, 0] * c * c + d[:, 1] * s * s
    m22 = d[:, 0] * s * s + d[:, 1] * c * c
    m12 = 2.0 * c * s * (d[:, 0] - d[:, 1])
    return np.stack([m11, m12, m22], axis=1)


def pucci_bruteforce(X: SymMatrix, ell: EllipticityPair, samples: int,
                     rng=None, extremal: str = "+") -> float:
    """Monte-Carlo sup/inf of Tr(AX) over admissible A = Q D Q^T.

    A lower bound on P+ (upper bound on P-) that converges as samples grow.
    """
    if samples < 1:
        raise ValueError("samples >= 1 required")
    rng = np.random.default_rng(rng)
    if X.n == 2:
        M = _admissible_coeffs_2d(rng, samples, ell.lam, ell.Lam)
        vals = M @ np.array(X.upper)
    else:
        mats = rng.standard_normal((samples, X.n, X.n))
        Q, _ = np.linalg.qr(mats)
        d = rng.uniform(ell.lam, ell.Lam, (samples, X.n))
        A = np.einsum("sik,sk,sjk->sij", Q, d, Q)
        vals = np.einsum("sij,ji->s", A, X.matrix())
    return float(vals.max() if extremal == "+" else vals.min())


def pucci_bruteforce_sweep(X_upper: np.ndarray, ell: EllipticityPair,
                           samples: int, rng=None) -> np.ndarray:
    """Brute-force P+ for a batch of 2x2 matrices sharing one sample set.

    X_upper has shape (N, 3) with rows (x11, x12, x22).
    """
    rng = np.random.default_rng(rng)
    M = _admissible_coeffs_2d(rng, samples, ell.lam, ell.Lam)
    return (M @ np.asarray(X_upper, dtype=float).T).max(axis=0)


# ---------------------------------------------------------------------------
# Operator library
# ---------------------------------------------------------------------------

def _batch_eigs(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    n = X.shape[-1]
    if n == 1:
        return X[..., 0, :]
    if n == 2:
        a, b, c = X[..., 0, 0], X[..., 0, 1], X[..., 1, 1]
        mean = 0.5 * (a + c)
        rad = np.hypot(0.5 * (a - c), b)
        return np.stack([mean - rad, mean + rad], axis=-1)
    return np.linalg.eigvalsh(X)


def pucci_plus_operator(ell: EllipticityPair) -> OperatorF:
    def ev(x, X):
        return pucci_batch(_batch_eigs(X), ell.lam, ell.Lam, "+")
    return OperatorF(evaluator=ev, ellipticity=ell, tag="pucci_plus")


def pucci_minus_operator(ell: EllipticityPair) -> OperatorF:
    def ev(x, X):
        return pucci_batch(_batch_eigs(X), ell.lam, ell.Lam, "-")
    return OperatorF(evaluator=ev, ellipticity=ell, tag="pucci_minus")


def laplacian_operator() -> OperatorF:
    def ev(x, X):
        return np.trace(np.asarray(X, dtype=float), axis1=-2, axis2=-1)
    return OperatorF(evaluator=ev, ellipticity=EllipticityPair(1.0, 1.0), tag="laplacian")


def weighted_trace_operator(weights: Sequence[float],
                            declared: Optional[EllipticityPair] = None) -> OperatorF:
    """F(x, X) = sum_i w_i X_ii. Elliptic with pair (min w, max w)."""
    w = np.asarray(weights, dtype=float)
    if declared is None:
        declared = EllipticityPair(float(w.min()), float(w.max()))

    def ev(x, X):
        diag = np.diagonal(np.asarray(X, dtype=float), axis1=-2, axis2=-1)
        return diag @ w
    return OperatorF(evaluator=ev, ellipticity=declared, tag="weighted_trace")


def check_uniform_ellipticity(F: OperatorF, samples: int, rng=None,
                              n: int = 2, scale: float = 1.0) -> CheckReport:
    """Randomized check of the Pucci-envelope form of uniform ellipticity:
    P-(Y-X) <= F(x,Y) - F(x,X) <= P+(Y-X) at the operator's declared pair.
    """
    if samples < 1:
        raise ValueError("samples >= 1 required")
    rng = np.random.default_rng(rng)
    ell = F.ellipticity
    worst = np.inf
    witness: dict = {}
    for start in range(0, samples, 200_000):
        count = min(200_000, samples - start)
        x = rng.uniform(-10.0, 10.0, (count, n))
        X = rng.standard_normal((count, n, n)) * scale
        Y = rng.standard_normal((count, n, n)) * scale
        X = 0.5 * (X + np.swapaxes(X, -1, -2))
        Y = 0.5 * (Y + np.swapaxes(Y, -1, -2))
        diff = F(x, Y) - F(x, X)
        eigs = _batch_eigs(Y - X)
        upper = pucci_batch(eigs, ell.lam, ell.Lam, "+") - diff
        lower = diff - pucci_batch(eigs, ell.lam, ell.Lam, "-")
        margins = np.minimum(upper, lower)
        k = int(np.argmin(margins))
        if margins[k] < worst:
            worst = float(margins[k])
            witness = {"x": x[k].tolist(), "X": X[k].tolist(), "Y": Y[k].tolist()}
    return CheckReport(condition="uniform_ellipticity", samples=samples,
                       worst_margin=worst, witness=witness)


# ---------------------------------------------------------------------------
# Coefficient helper (bounded uniformly continuous, Lipschitz in x)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Coeff:
    """c(x) = c0 + amp * sin(freq * sum(x)); constant when amp = 0."""

    c0: float
    amp: float = 0.0
    freq: float = 1.0

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.amp == 0.0:
            return np.full(x.shape[:-1], self.c0)
        return self.c0 + self.amp * np.sin(self.freq * x.sum(axis=-1))

    @property
    def sup(self) -> float:
        return self.c0 + abs(self.amp)

    @property
    def inf(self) -> float:
        return self.c0 - abs(self.amp)

    @property
    def sup_abs(self) -> float:
        return max(abs(self.sup), abs(self.inf))

    def lipschitz(self, n: int) -> float:
        return abs(self.amp) * abs(self.freq) * math.sqrt(n)


def _as_coeff(value) -> Coeff:
    if isinstance(value, Coeff):
        return value
    if isinstance(value, dict):
        return Coeff(**value)
    return Coeff(c0=float(value))


# ---------------------------------------------------------------------------
# Hamiltonian library
# ---------------------------------------------------------------------------

def _young_constant(alpha: float, beta: float, l: float, m: float) -> float:
    """Smallest C with alpha r^l <= beta r^m + C for r >= 0 (1 <= l < m)."""
    if alpha == 0.0:
        return 0.0
    rstar = (alpha * l / (beta * m)) ** (1.0 / (m - l))
    return alpha * rstar ** l - beta * rstar ** m


# Convexity-type constants for the nonconvex rational-factor Hamiltonian
# c * ((|p|^2-1)^2 - 1)/(|p|^2+1): pinned by dense maximization of
# (H(x,p) - sigma H(x,p/sigma))/(1-sigma) + 0.5|p|^2 over sigma in [0.5,1),
# |p| in [0,1e4] (see tests for the re-derivation sweep).
_RATIONAL_C_LOWER_FACTOR = 0.5
_RATIONAL_A_FACTOR = 3.0


def hamiltonian_library(tag: str, **params) -> HamiltonianH:
    """Construct a library Hamiltonian with its derived structure constants."""
    n = int(params.pop("n", 2))
    if tag == "zero":
        m = float(params.pop("m", 2.0))

        def ev(x, p):
            return np.zeros(np.asarray(p, dtype=float).shape[:-1])
        return HamiltonianH(evaluator=ev, m=m, gamma1=0.0, gamma_m=0.0,
                            convexity=(0.0, 0.0, 0.5), sign="convex",
                            tag=tag, params={"m": m},
                            claims=("lipschitz_structure", "shift_modulus",
                                    "convexity_type", "sublinearization"))

    if tag == "prototype":
        c1 = _as_coeff(params.pop("c1", 0.0))
        cm = _as_coeff(params.pop("cm", 1.0))
        m = float(params.pop("m", 2.0))
        if not (m == 1.0 or 1.0 < m <= 2.0):
            raise ValueError("prototype needs m = 1 or m in (1, 2]")

        def ev(x, p):
            r = np.linalg.norm(np.asarray(p, dtype=float), axis=-1)
            return c1(x) * r + cm(x) * r ** m

        gamma1 = c1.sup_abs
        gamma_m = 2.0 * m * cm.sup_abs if m > 1 else 0.0
        if m == 1:
            gamma1 = c1.sup_abs + cm.sup_abs
        convexity = None
        sign = "neither"
        claims = ["lipschitz_structure", "shift_modulus"]
        if m > 1 and cm.inf > 0:
            convexity = (0.95 * (m - 1) * cm.inf, 0.0, 0.5)
            sign = "convex"
            claims += ["convexity_type", "sublinearization"]
        return HamiltonianH(evaluator=ev, m=m, gamma1=gamma1, gamma_m=gamma_m,
                            convexity=convexity, sign=sign,
                            modulus_coeff=c1.lipschitz(n) + cm.lipschitz(n),
                            tag=tag, params={"c1": c1, "cm": cm, "m": m},
                            claims=tuple(claims))

    if tag == "two_power":
        c = _as_coeff(params.pop("c", 1.0))
        a = _as_coeff(params.pop("a", 0.5))
        m = float(params.pop("m", 2.0))
        l = float(params.pop("l", 1.5))
        sigma0 = float(params.pop("sigma0", 0.5))
        if not (1.0 < m <= 2.0 and 1.0 <= l < m):
            raise ValueError("two_power needs 1 < m <= 2 and 1 <= l < m")
        if c.inf <= 0:
            raise ValueError("two_power needs inf c > 0")

        def ev(x, p):
            r = np.linalg.norm(np.asarray(p, dtype=float), axis=-1)
            return c(x) * r ** m + a(x) * r ** l

        gamma1 = 2.0 * l * a.sup_abs
        gamma_m = 2.0 * m * c.sup + 2.0 * l * a.sup_abs
        c_lower = 0.5 * (m - 1) * c.inf
        A = _young_constant(a.sup_abs * abs(l - 1.0) / sigma0 ** l, c_lower, l, m)
        return HamiltonianH(evaluator=ev, m=m, gamma1=gamma1, gamma_m=gamma_m,
                            convexity=(c_lower, A, sigma0), sign="convex",
                            modulus_coeff=c.lipschitz(n) + a.lipschitz(n),
                            tag=tag,
                            params={"c": c, "a": a, "m": m, "l": l, "sigma0": sigma0},
                            claims=("lipschitz_structure", "shift_modulus",
                                    "convexity_type", "sublinearization"))

    if tag == "rational_factor":
        c = _as_coeff(params.pop("c", 1.0))
        if c.inf <= 0:
            raise ValueError("rational_factor needs inf c > 0")

        def ev(x, p):
            r2 = (np.asarray(p, dtype=float) ** 2).sum(axis=-1)
            return c(x) * ((r2 - 1.0) ** 2 - 1.0) / (r2 + 1.0)

        return HamiltonianH(
            evaluator=ev, m=2.0,
            gamma1=1.5 * c.sup_abs, gamma_m=3.0 * c.sup_abs,
            convexity=(_RATIONAL_C_LOWER_FACTOR * c.inf,
                       _RATIONAL_A_FACTOR * c.sup, 0.5),
            sign="convex", modulus_coeff=2.0 * c.lipschitz(n),
            tag=tag, params={"c": c},
            claims=("lipschitz_structure", "shift_modulus",
                    "convexity_type", "sublinearization"))

    if tag == "sup_inf":
        groups = params.pop("matrices")
        m = float(params.pop("m", 2.0))
        if not 1.0 < m <= 2.0:
            raise ValueError("sup_inf needs m in (1, 2]")
        mats = [[np.asarray(S, dtype=float) for S in grp] for grp in groups]
        all_eigs = np.concatenate([np.linalg.eigvalsh(S) for grp in mats for S in grp])
        nu = float(all_eigs.min())
        big = float(all_eigs.max())
        if nu <= 0:
            raise ValueError("sup_inf needs all matrices >= nu I with nu > 0")

        def ev(x, p):
            p = np.asarray(p, dtype=float)
            forms = np.stack([
                np.stack([np.einsum("...i,ij,...j->...", p, S, p) for S in grp],
                         axis=0).min(axis=0)
                for grp in mats], axis=0)
            return (forms.max(axis=0)) ** (m / 2.0)

        return HamiltonianH(
            evaluator=ev, m=m, gamma1=0.0, gamma_m=2.0 * m * big ** (m / 2.0),
            convexity=(0.95 * (m - 1.0) * nu ** (m / 2.0), 0.0, 0.5),
            sign="convex", tag=tag, params={"m": m, "nu": nu, "max_eig": big},
            claims=("lipschitz_structure", "shift_modulus",
                    "convexity_type", "sublinearization"))

    raise ValueError(f"unknown Hamiltonian tag {tag!r}")


def negate_hamiltonian(H: HamiltonianH) -> HamiltonianH:
    """-H, used for the concave-Hamiltonian experiments."""
    sign = {"convex": "concave", "concave": "convex"}.get(H.sign, "neither")

    def ev(x, p):
        return -H(x, p)
    claims = tuple(c for c in H.claims if c in ("lipschitz_structure", "shift_modulus"))
    return HamiltonianH(evaluator=ev, m=H.m, gamma1=H.gamma1, gamma_m=H.gamma_m,
                        convexity=H.convexity, sign=sign,
                        modulus_coeff=H.modulus_coeff,
                        tag="negated_" + H.tag, params=H.params, claims=claims)


# ---------------------------------------------------------------------------
# Structure-condition checkers
# ---------------------------------------------------------------------------

def _sample_vectors(rng, count: int, n: int, rmax: float = _PMAX) -> np.ndarray:
    """Random vectors with log-uniform magnitude in [1e-6, rmax], plus a
    sprinkle of exact zeros."""
    u = rng.standard_normal((count, n))
    u /= np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1e-300)
    r = 10.0 ** rng.uniform(-6.0, np.log10(rmax), count)
    vecs = u * r[:, None]
    vecs[rng.random(count) < 0.01] = 0.0
    return vecs


def _sample_sigma(rng, count: int, sigma0: float) -> np.ndarray:
    """sigma in (sigma0, 1), emphasizing the sigma -> 1 end."""
    u = rng.uniform(0.0, 8.0, count)
    return 1.0 - (1.0 - sigma0) * 10.0 ** (-u)


def tilde_gamma_value(gamma_m: float, m: float, c_lower: float) -> float:
    """gamma_m + (m-1)^{m-1} gamma_m^m / (m^m c_lower^{m-1}); 0 when gamma_m=0."""
    if m <= 1.0:
        raise ValueError("tilde gamma requires m > 1")
    if gamma_m == 0.0:
        return 0.0
    if c_lower <= 0.0:
        raise ValueError("tilde gamma requires c_lower > 0")
    return gamma_m + (m - 1.0) ** (m - 1.0) * gamma_m ** m / (m ** m * c_lower ** (m - 1.0))


_CONDITIONS = ("lipschitz_structure", "shift_modulus", "convexity_type",
               "sublinearization")


def check_hamiltonian(H: HamiltonianH, condition: str, samples: int,
                      rng=None, n: int = 2) -> CheckReport:
    """Randomized margin sweep for one structure condition.

    Margins are (bound - quantity); negative below -1e-9 flags a violation.
    """
    if condition not in _CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    if samples < 1:
        raise ValueError("samples >= 1 required")
    if condition in ("convexity_type", "sublinearization") and H.convexity is None:
        raise MetadataError(f"{H.tag} carries no convexity constants")
    rng = np.random.default_rng(rng)
    m, g1, gm = H.m, H.gamma1, H.gamma_m
    worst = np.inf
    witness: dict = {}
    for start in range(0, samples, 200_000):
        count = min(200_000, samples - start)
        x = rng.uniform(-10.0, 10.0, (count, n))
        p = _sample_vectors(rng, count, n)
        q = _sample_vectors(rng, count, n)
        pn = np.linalg.norm(p, axis=1)
        qn = np.linalg.norm(q, axis=1)

        if condition == "lipschitz_structure":
            bound = (g1 + gm * (pn ** (m - 1.0) + qn ** (m - 1.0))) \
                * np.linalg.norm(p - q, axis=1)
            margins = bound - np.abs(H(x, p) - H(x, q))
            data = {"x": x, "p": p, "q": q}
        elif condition == "shift_modulus":
            y = x + _sample_vectors(rng, count, n, rmax=10.0)
            bound = H.modulus_coeff * np.linalg.norm(x - y, axis=1) * (pn ** m + 1.0) \
                + (g1 + gm * (pn ** (m - 1.0) + qn ** (m - 1.0))) * qn
            margins = bound - np.abs(H(x, p + q) - H(y, p))
            data = {"x": x, "y": y, "p": p, "q": q}
        elif condition == "convexity_type":
            c_lower, A, sigma0 = H.convexity
            sigma = _sample_sigma(rng, count, sigma0)
            quantity = H(x, p) - sigma * H(x, p / sigma[:, None])
            margins = (1.0 - sigma) * (-c_lower * pn ** m + A) - quantity
            data = {"x": x, "p": p, "sigma": sigma}
        else:  # sublinearization
            c_lower, A, sigma0 = H.convexity
            if m <= 1.0:
                raise MetadataError("sublinearization requires m > 1")
            tg = tilde_gamma_value(gm, m, c_lower) if gm > 0 else 0.0
            sigma = _sample_sigma(rng, count, sigma0)
            quantity = H(x, p + q) - sigma * H(x, p / sigma[:, None])
            bound = tg * (1.0 - sigma) ** (1.0 - m) * qn ** m + g1 * qn \
                + (1.0 - sigma) * A
            margins = bound - quantity
            data = {"x": x, "p": p, "q": q, "sigma": sigma}

        k = int(np.argmin(margins))
        if margins[k] < worst:
            worst = float(margins[k])
            witness = {key: np.asarray(val[k]).tolist() for key, val in data.items()}
    return CheckReport(condition=condition, samples=samples,
                       worst_margin=worst, witness=witness)


def interpolation_check(m: float, samples: int, rng=None) -> CheckReport:
    """Margin sweep of r^m <= (2-m) r + (m-1) r^2 for m in [1, 2], r >= 0."""
    if not 1.0 <= m <= 2.0:
        raise ValueError("m must lie in [1, 2]")
    rng = np.random.default_rng(rng)
    r = np.concatenate([10.0 ** rng.uniform(-8.0, 8.0, samples), [0.0, 1.0]])
    margins = (2.0 - m) * r + (m - 1.0) * r * r - r ** m
    k = int(np.argmin(margins))
    return CheckReport(condition="interpolation", samples=len(r),
                       worst_margin=float(margins[k]), witness={"r": float(r[k])})


def empirical_increment_constant(m: float, samples: int, rng=None, n: int = 2) -> float:
    """Empirical C(m) with |p+q|^m - |p|^m <= C (|p|^{m-1}+|q|^{m-1}) |q|,
    found by maximizing the ratio over random pairs."""
    rng = np.random.default_rng(rng)
    best = 0.0
    for start in range(0, samples, 200_000):
        count = min(200_000, samples - start)
        p = _sample_vectors(rng, count, n)
        q = _sample_vectors(rng, count, n)
        qn = np.linalg.norm(q, axis=1)
        ok = qn > 0
        pn = np.linalg.norm(p, axis=1)
        num = np.linalg.norm(p + q, axis=1) ** m - pn ** m
        den = (pn ** (m - 1.0) + qn ** (m - 1.0)) * qn
        ratio = num[ok] / den[ok]
        best = max(best, float(ratio.max()))
    return best
