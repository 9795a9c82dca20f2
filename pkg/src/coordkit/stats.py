"""Inferential machinery: metric records, z-scoring, random-intercept
linear mixed-effects models, and the paired Wilcoxon signed-rank test.

The LMEM is the single-grouping-factor random-intercept model fitted by
profiled REML: the variance ratio lambda = sigma_u^2 / sigma_e^2 is the
only free nonlinear parameter, found by golden-section search; the GLS
solve per lambda uses the closed-form block inverse per group. P-values
are Wald (normal approximation), matching a Coef./p-value/CI table shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

Z_975 = 1.959963984540054


class ZeroVarianceError(ValueError):
    """Standardization requested on a constant sample."""


class DegenerateAnalysisError(ValueError):
    """Analysis cannot run (rank deficiency, too few groups, all-zero diffs)."""


@dataclass(frozen=True)
class MetricRecord:
    """One long-format outcome row feeding the statistics stage."""

    session: str
    slice_index: int
    unit: str
    condition: str
    metric: str
    value: float
    joint: str = ""
    scope: str = ""
    stream: str = ""

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("metric value must be finite")


@dataclass(frozen=True)
class LmemFit:
    """Fixed-effect table plus variance components of a random-intercept fit."""

    names: tuple[str, ...]
    coef: np.ndarray
    se: np.ndarray
    pvalues: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    group_variance: float
    residual_variance: float
    variance_ratio: float
    n_obs: int
    n_groups: int

    def coef_named(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    def pvalue_named(self, name: str) -> float:
        return float(self.pvalues[self.names.index(name)])


def zscore(values) -> np.ndarray:
    """Standardize to mean 0, std 1 (population denominator n)."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("zscore needs at least two values")
    std = x.std()
    if std == 0:
        raise ZeroVarianceError("cannot standardize a zero-variance sample")
    return (x - x.mean()) / std


def _group_blocks(groups: Sequence) -> list[np.ndarray]:
    labels = np.asarray(groups)
    uniq = np.unique(labels)
    return [np.flatnonzero(labels == g) for g in uniq]


def profiled_reml_objective(
    y: np.ndarray, X: np.ndarray, groups: Sequence, lam: float
) -> float:
    """-2 * profiled REML log-likelihood (up to a constant) at variance
    ratio ``lam``; the quantity the fit minimizes."""
    blocks = _group_blocks(groups)
    n, p = X.shape
    A = np.zeros((p, p))
    b = np.zeros(p)
    yy = 0.0
    logdet_v = 0.0
    for idx in blocks:
        Xg, yg = X[idx], y[idx]
        ng = idx.size
        c = lam / (1.0 + lam * ng)
        xs, ys = Xg.sum(axis=0), yg.sum()
        A += Xg.T @ Xg - c * np.outer(xs, xs)
        b += Xg.T @ yg - c * xs * ys
        yy += yg @ yg - c * ys * ys
        logdet_v += math.log1p(lam * ng)
    beta = np.linalg.solve(A, b)
    rss = max(yy - b @ beta, 1e-300)
    sign, logdet_a = np.linalg.slogdet(A)
    if sign <= 0:
        raise DegenerateAnalysisError("design matrix is rank deficient")
    return (n - p) * math.log(rss / (n - p)) + logdet_v + logdet_a


def _gls_solve(y, X, blocks, lam):
    n, p = X.shape
    A = np.zeros((p, p))
    b = np.zeros(p)
    yy = 0.0
    for idx in blocks:
        Xg, yg = X[idx], y[idx]
        c = lam / (1.0 + lam * idx.size)
        xs, ys = Xg.sum(axis=0), yg.sum()
        A += Xg.T @ Xg - c * np.outer(xs, xs)
        b += Xg.T @ yg - c * xs * ys
        yy += yg @ yg - c * ys * ys
    beta = np.linalg.solve(A, b)
    rss = max(yy - b @ beta, 0.0)
    sigma2 = rss / (n - p)
    cov = sigma2 * np.linalg.inv(A)
    return beta, sigma2, cov


def _golden_minimize(f, lo, hi, tol=1e-8):
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol * (1.0 + b):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def fit_lmem_arrays(
    y: np.ndarray,
    X: np.ndarray,
    groups: Sequence,
    names: Sequence[str],
) -> LmemFit:
    """Random-intercept LMEM on an explicit design matrix.

    Profiles the REML criterion over the variance ratio with an expanding
    bracket plus golden-section search (tol 1e-8), then reports Wald
    statistics at the optimum.
    """
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    blocks = _group_blocks(groups)
    n, p = X.shape
    if len(blocks) < 2:
        raise DegenerateAnalysisError("need at least two groups")
    if n <= p:
        raise DegenerateAnalysisError("more parameters than observations")
    if np.linalg.matrix_rank(X) < p:
        raise DegenerateAnalysisError("design matrix is rank deficient")

    def objective(lam: float) -> float:
        return profiled_reml_objective(y, X, groups, lam)

    # expanding geometric bracket around the minimizer
    grid = [0.0] + [10.0**k for k in range(-6, 7)]
    values = [objective(g) for g in grid]
    k = int(np.argmin(values))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    lam = _golden_minimize(objective, lo, hi)
    if objective(0.0) <= objective(lam):
        lam = 0.0

    beta, sigma2, cov = _gls_solve(y, X, blocks, lam)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, beta / se, np.inf)
    pvalues = np.array([math.erfc(abs(v) / math.sqrt(2.0)) for v in z])
    return LmemFit(
        names=tuple(names),
        coef=beta,
        se=se,
        pvalues=pvalues,
        ci_low=beta - Z_975 * se,
        ci_high=beta + Z_975 * se,
        group_variance=lam * sigma2,
        residual_variance=sigma2,
        variance_ratio=lam,
        n_obs=n,
        n_groups=len(blocks),
    )


def _parse_formula(formula: str) -> tuple[list[str], str]:
    lhs, rhs = (part.strip() for part in formula.split("~", 1))
    if lhs != "value":
        raise ValueError("formula must model 'value'")
    terms: list[str] = []
    random_unit: Optional[str] = None
    for raw in rhs.split("+"):
        term = raw.strip()
        if term.startswith("(") and term.endswith(")"):
            inner = term[1:-1].strip()
            one, _, unit = inner.partition("|")
            if one.strip() != "1" or not unit.strip():
                raise ValueError(f"unsupported random term {term!r}")
            random_unit = unit.strip()
        elif "*" in term:
            a, b = (t.strip() for t in term.split("*", 1))
            terms.extend([a, b, f"{a}:{b}"])
        elif term:
            terms.append(term)
    if random_unit is None:
        raise ValueError("formula requires a random intercept term (1|unit)")
    return terms, random_unit


def build_design(
    records: Sequence[MetricRecord],
    formula: str = "value ~ condition + (1|unit)",
    joint_reference: Optional[str] = None,
) -> tuple[np.ndarray, np.ndarray, list[str], list[str]]:
    """Long-format records -> (y, X, group labels, coefficient names).

    Treatment coding: 'baseline' is the condition reference; the joint
    reference defaults to the alphabetically first level.
    """
    terms, random_unit = _parse_formula(formula)
    if random_unit not in ("unit", "session"):
        raise ValueError(f"unknown grouping field {random_unit!r}")
    y = np.array([r.value for r in records], dtype=np.float64)
    groups = [getattr(r, random_unit) for r in records]

    columns: list[np.ndarray] = [np.ones(len(records))]
    names: list[str] = ["Intercept"]
    cond = np.array([0.0 if r.condition == "baseline" else 1.0 for r in records])
    joint_levels = sorted({r.joint for r in records})
    if joint_reference is None and joint_levels:
        joint_reference = joint_levels[0]
    dummies = {
        lvl: np.array([1.0 if r.joint == lvl else 0.0 for r in records])
        for lvl in joint_levels
        if lvl != joint_reference
    }
    for term in terms:
        if term == "condition":
            columns.append(cond)
            names.append("condition[intervened]")
        elif term == "joint":
            for lvl, col in dummies.items():
                columns.append(col)
                names.append(f"joint[{lvl}]")
        elif term in ("condition:joint", "joint:condition"):
            for lvl, col in dummies.items():
                columns.append(cond * col)
                names.append(f"condition[intervened]:joint[{lvl}]")
        else:
            raise ValueError(f"unsupported fixed term {term!r}")
    X = np.column_stack(columns)
    return y, X, groups, names


def fit_lmem(
    records: Sequence[MetricRecord],
    formula: str = "value ~ condition + (1|unit)",
    joint_reference: Optional[str] = None,
) -> LmemFit:
    """Fit ``value ~ condition [...] + (1|unit)`` on metric records."""
    y, X, groups, names = build_design(records, formula, joint_reference)
    return fit_lmem_arrays(y, X, groups, names)


def _average_ranks(magnitudes: np.ndarray) -> np.ndarray:
    order = np.argsort(magnitudes, kind="stable")
    ranks = np.empty(magnitudes.size, dtype=np.float64)
    ranks[order] = np.arange(1, magnitudes.size + 1)
    for value in np.unique(magnitudes):
        mask = magnitudes == value
        if mask.sum() > 1:
            ranks[mask] = ranks[mask].mean()
    return ranks


def wilcoxon_signed_rank(paired_diffs) -> tuple[float, float]:
    """Paired Wilcoxon signed-rank test, two-sided.

    W = min(positive rank sum, negative rank sum) with average ranks for
    ties. The p-value is exact (full sign enumeration over the observed
    rank multiset) for n <= 12, and a tie-corrected normal approximation
    (no continuity correction) otherwise.
    """
    diffs = np.asarray(paired_diffs, dtype=np.float64)
    diffs = diffs[diffs != 0]
    n = diffs.size
    if n == 0:
        raise DegenerateAnalysisError("all paired differences are zero")
    ranks = _average_ranks(np.abs(diffs))
    w_pos = float(ranks[diffs > 0].sum())
    w_neg = float(ranks[diffs < 0].sum())
    w = min(w_pos, w_neg)

    if n <= 12:
        # distribution of 2*W- over all 2^n sign patterns via subset-sum DP
        doubled = np.rint(2 * ranks).astype(int)
        total = int(doubled.sum())
        counts = np.zeros(total + 1, dtype=np.float64)
        counts[0] = 1.0
        for r in doubled:
            shifted = np.zeros_like(counts)
            shifted[r:] = counts[: counts.size - r]
            counts = counts + shifted
        w2 = int(round(2 * w))
        below = counts[: w2 + 1].sum()
        above = counts[total - w2 :].sum()
        overlap = counts[w2] if w2 == total - w2 else 0.0
        p = (below + above - overlap) / 2.0**n
    else:
        ties = np.unique(np.abs(diffs), return_counts=True)[1]
        mean_w = n * (n + 1) / 4.0
        var_w = n * (n + 1) * (2 * n + 1) / 24.0 - float(((ties**3 - ties).sum())) / 48.0
        z = (w - mean_w) / math.sqrt(var_w)
        p = math.erfc(-z / math.sqrt(2.0))
    return w, float(min(p, 1.0))
