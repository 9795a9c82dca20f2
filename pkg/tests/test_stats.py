import itertools

import numpy as np
import pytest

from coordkit.stats import (
    DegenerateAnalysisError,
    MetricRecord,
    ZeroVarianceError,
    build_design,
    fit_lmem,
    fit_lmem_arrays,
    profiled_reml_objective,
    wilcoxon_signed_rank,
    zscore,
)


def test_zscore_closed_form():
    out = zscore([1.0, 2.0, 3.0])
    assert np.allclose(out, [-1.22474487, 0.0, 1.22474487], atol=1e-8)


def test_zscore_zero_variance():
    with pytest.raises(ZeroVarianceError):
        zscore([5.0, 5.0, 5.0])


def test_zscore_idempotent():
    rng = np.random.default_rng(1)
    x = rng.normal(3.0, 2.5, size=50)
    once = zscore(x)
    twice = zscore(once)
    assert np.max(np.abs(twice - once)) < 1e-12


def simulate(
    seed, n_groups=40, per_group=20, sigma_u=0.3, sigma_e=0.2, beta=(1.0, 0.5)
):
    rng = np.random.default_rng(seed)
    rows = []
    for g in range(n_groups):
        u = rng.normal(0, sigma_u)
        for k in range(per_group):
            cond = k % 2
            y = beta[0] + beta[1] * cond + u + rng.normal(0, sigma_e)
            rows.append(
                MetricRecord(
                    session="s",
                    slice_index=k,
                    unit=f"g{g}",
                    condition="intervened" if cond else "baseline",
                    metric="m",
                    value=y,
                )
            )
    return rows


def test_lmem_recovers_known_effect():
    fit = fit_lmem(simulate(42))
    beta = fit.coef_named("condition[intervened]")
    assert abs(beta - 0.5) < 0.05
    i = fit.names.index("condition[intervened]")
    assert fit.ci_low[i] <= 0.5 <= fit.ci_high[i]
    assert fit.pvalue_named("condition[intervened]") < 1e-6
    assert fit.group_variance == pytest.approx(0.09, rel=0.5)
    assert fit.residual_variance == pytest.approx(0.04, rel=0.25)


def test_lmem_degenerates_to_ols():
    records = simulate(7, sigma_u=0.0)
    fit = fit_lmem(records)
    y, X, _, _ = build_design(records)
    ols = np.linalg.lstsq(X, y, rcond=None)[0]
    assert np.max(np.abs(fit.coef - ols)) < 1e-6


def test_lmem_balanced_equals_mean_difference():
    rng = np.random.default_rng(3)
    rows = []
    for g in range(4):
        for k in range(10):
            for cond in (0, 1):
                rows.append(
                    MetricRecord(
                        session="s",
                        slice_index=k,
                        unit=f"g{g}",
                        condition="intervened" if cond else "baseline",
                        metric="m",
                        value=float(rng.normal(cond * 0.8, 1.0)),
                    )
                )
    fit = fit_lmem(rows)
    values = np.array([r.value for r in rows])
    conds = np.array([r.condition == "intervened" for r in rows])
    diff = values[conds].mean() - values[~conds].mean()
    assert fit.coef_named("condition[intervened]") == pytest.approx(diff, abs=1e-8)


def test_lmem_variance_ratio_is_local_minimum():
    records = simulate(11)
    fit = fit_lmem(records)
    y, X, groups, _ = build_design(records)
    best = profiled_reml_objective(y, X, groups, fit.variance_ratio)
    for lam in np.linspace(0.0, fit.variance_ratio * 4 + 1.0, 60):
        assert profiled_reml_objective(y, X, groups, lam) >= best - 1e-6


def test_lmem_group_relabel_invariance():
    records = simulate(13)
    relabeled = [
        MetricRecord(
            session=r.session,
            slice_index=r.slice_index,
            unit=f"zz{hash(r.unit) % 1000}_{r.unit}",
            condition=r.condition,
            metric=r.metric,
            value=r.value,
        )
        for r in records
    ]
    a = fit_lmem(records)
    b = fit_lmem(relabeled)
    assert np.max(np.abs(a.coef - b.coef)) < 1e-6


def test_lmem_matches_statsmodels():
    import pandas as pd
    import statsmodels.formula.api as smf

    records = simulate(17, n_groups=12, per_group=14, sigma_u=0.5, sigma_e=0.4)
    fit = fit_lmem(records)
    df = pd.DataFrame(
        {
            "value": [r.value for r in records],
            "cond": [1.0 if r.condition == "intervened" else 0.0 for r in records],
            "unit": [r.unit for r in records],
        }
    )
    sm_fit = smf.mixedlm("value ~ cond", df, groups=df["unit"]).fit(reml=True)
    assert fit.coef_named("condition[intervened]") == pytest.approx(
        sm_fit.params["cond"], abs=1e-4
    )
    assert fit.group_variance == pytest.approx(
        sm_fit.cov_re.values[0, 0], rel=1e-2, abs=1e-4
    )


def test_lmem_joint_interaction_design():
    rng = np.random.default_rng(19)
    rows = []
    for g in range(6):
        for joint in ("LeftHand", "RightHand"):
            for cond in (0, 1):
                for k in range(5):
                    rows.append(
                        MetricRecord(
                            session="s",
                            slice_index=k,
                            unit=f"g{g}",
                            condition="intervened" if cond else "baseline",
                            metric="m",
                            value=float(rng.normal()),
                            joint=joint,
                        )
                    )
    fit = fit_lmem(
        rows, "value ~ condition * joint + (1|unit)", joint_reference="RightHand"
    )
    assert "joint[LeftHand]" in fit.names
    assert "condition[intervened]:joint[LeftHand]" in fit.names
    assert len(fit.names) == 4


def test_lmem_requires_two_groups():
    rows = simulate(23, n_groups=1)
    with pytest.raises(DegenerateAnalysisError):
        fit_lmem(rows)


def brute_force_wilcoxon(diffs):
    diffs = np.asarray(diffs, float)
    diffs = diffs[diffs != 0]
    n = diffs.size
    mags = np.abs(diffs)
    order = np.argsort(mags, kind="stable")
    ranks = np.empty(n)
    ranks[order] = np.arange(1, n + 1)
    for v in np.unique(mags):
        m = mags == v
        if m.sum() > 1:
            ranks[m] = ranks[m].mean()
    w_obs = min(ranks[diffs > 0].sum(), ranks[diffs < 0].sum())
    count = 0
    for signs in itertools.product((1, -1), repeat=n):
        signs = np.array(signs)
        w = min(ranks[signs > 0].sum(), ranks[signs < 0].sum())
        if w <= w_obs + 1e-12:
            count += 1
    return w_obs, count / 2.0**n


def test_wilcoxon_example_123():
    w, p = wilcoxon_signed_rank([1.0, 2.0, 3.0])
    assert w == 0.0
    assert p == pytest.approx(0.25)


def test_wilcoxon_tied_pair():
    w, p = wilcoxon_signed_rank([1.0, -1.0])
    assert w == pytest.approx(1.5)
    assert p == pytest.approx(1.0)


def test_wilcoxon_all_zero_error():
    with pytest.raises(DegenerateAnalysisError):
        wilcoxon_signed_rank([0.0, 0.0])


def test_wilcoxon_matches_enumeration():
    rng = np.random.default_rng(29)
    for n in range(1, 11):
        for _ in range(5):
            diffs = np.round(rng.normal(0.2, 1.0, size=n), 1)
            if not np.any(diffs != 0):
                continue
            w, p = wilcoxon_signed_rank(diffs)
            w_ref, p_ref = brute_force_wilcoxon(diffs)
            assert w == pytest.approx(w_ref)
            assert p == pytest.approx(p_ref, abs=1e-12)


def test_wilcoxon_scale_invariant_and_sign_flip():
    rng = np.random.default_rng(31)
    diffs = rng.normal(0.3, 1.0, size=9)
    w1, p1 = wilcoxon_signed_rank(diffs)
    w2, p2 = wilcoxon_signed_rank(diffs * 37.5)
    assert (w1, p1) == (w2, p2)
    w3, p3 = wilcoxon_signed_rank(-diffs)
    assert w3 == w1  # min of the swapped pair
    assert p3 == p1


def test_wilcoxon_normal_approx_matches_scipy():
    from scipy.stats import wilcoxon as scipy_wilcoxon

    rng = np.random.default_rng(37)
    diffs = rng.normal(0.4, 1.0, size=40)
    w, p = wilcoxon_signed_rank(diffs)
    ref = scipy_wilcoxon(diffs, correction=False, mode="approx")
    assert w == pytest.approx(ref.statistic)
    assert p == pytest.approx(ref.pvalue, rel=1e-10)
