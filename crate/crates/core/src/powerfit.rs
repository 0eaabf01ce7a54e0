//! Power-law estimation for positive `(x, y)` data.
//!
//! The main estimator is ordinary least squares on `(ln x, ln y)`: a power
//! law `y = C·x^a` is a straight line with slope `a` and intercept `ln C` on
//! log-log axes. A continuous maximum-likelihood tail estimator is also
//! provided as a cross-check for value distributions.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::RatingSnapshot;

/// Which relation a fit instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `H = C_h·r^α`
    HostsVsRank,
    /// `S = C_s·r^β`
    HitsVsRank,
    /// `S = C_{s/h}·H^γ`
    HitsVsHosts,
}

impl Relation {
    pub fn is_rank_relation(self) -> bool {
        matches!(self, Relation::HostsVsRank | Relation::HitsVsRank)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::HostsVsRank => "hosts_vs_rank",
            Relation::HitsVsRank => "hits_vs_rank",
            Relation::HitsVsHosts => "hits_vs_hosts",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    LoglogOls,
    MleTail,
}

/// Fitted exponent and prefactor plus diagnostics.
///
/// For `MleTail` fits `r_squared` holds `1 - D` where `D` is the
/// Kolmogorov-Smirnov distance between the empirical and fitted tail CDFs;
/// it is not a coefficient of determination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub exponent_stderr: f64,
    pub r_squared: f64,
    pub n_used: usize,
    pub n_excluded: usize,
    pub method: FitMethod,
    pub relation: Relation,
}

impl PowerLawFit {
    /// `prefactor · x^exponent`
    pub fn eval(&self, x: f64) -> f64 {
        self.prefactor * x.powf(self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("insufficient data: {usable} usable points, need at least 2")]
    InsufficientData { usable: usize },
    #[error("degenerate abscissa: all {n} usable x values are equal")]
    DegenerateAbscissa { n: usize },
    #[error("degenerate data: every value equals x_min")]
    DegenerateData,
    #[error("x_min must be positive and finite, got {0}")]
    InvalidXMin(f64),
}

fn usable(x: f64, y: f64) -> bool {
    x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()
}

/// Least squares on `(ln x, ln y)`.
///
/// Pairs with a non-positive (or non-finite) coordinate are dropped and
/// counted in `n_excluded`. Constant `y` gives `r_squared = 1`, since the
/// fitted line then reproduces every point.
pub fn fit_loglog_ols(pairs: &[(f64, f64)], relation: Relation) -> Result<PowerLawFit, FitError> {
    let logs: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|&&(x, y)| usable(x, y))
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = logs.len();
    if n < 2 {
        return Err(FitError::InsufficientData { usable: n });
    }
    let nf = n as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / nf;

    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(lx, ly) in &logs {
        let dx = lx - mean_x;
        let dy = ly - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(FitError::DegenerateAbscissa { n });
    }

    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = logs
        .iter()
        .map(|&(lx, ly)| {
            let r = ly - (intercept + slope * lx);
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    let exponent_stderr = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };

    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        exponent_stderr,
        r_squared,
        n_used: n,
        n_excluded: pairs.len() - n,
        method: FitMethod::LoglogOls,
        relation,
    })
}

/// Continuous power-law tail MLE, `α̂ = 1 + n / Σ ln(x_i / x_min)` over the
/// values `x_i ≥ x_min`.
///
/// The exponent is reported positive, as the exponent of the density
/// `p(x) ∝ x^(-α̂)`. `relation` tags which column the values came from.
pub fn fit_mle_tail(
    values: &[f64],
    x_min: f64,
    relation: Relation,
) -> Result<PowerLawFit, FitError> {
    if !(x_min > 0.0 && x_min.is_finite()) {
        return Err(FitError::InvalidXMin(x_min));
    }
    let mut tail: Vec<f64> = values
        .iter()
        .copied()
        .filter(|&v| v >= x_min && v.is_finite())
        .collect();
    let n = tail.len();
    if n < 2 {
        return Err(FitError::InsufficientData { usable: n });
    }
    let log_sum: f64 = tail.iter().map(|&v| (v / x_min).ln()).sum();
    if log_sum <= 0.0 {
        return Err(FitError::DegenerateData);
    }
    let nf = n as f64;
    let alpha = 1.0 + nf / log_sum;
    let tail_exp = alpha - 1.0;

    // Kolmogorov-Smirnov distance against F(x) = 1 - (x / x_min)^-(α-1).
    tail.sort_by(f64::total_cmp);
    let ks = tail
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let model = 1.0 - (v / x_min).powf(-tail_exp);
            let lo = i as f64 / nf;
            let hi = (i + 1) as f64 / nf;
            (model - lo).abs().max((hi - model).abs())
        })
        .fold(0.0_f64, f64::max);

    Ok(PowerLawFit {
        exponent: alpha,
        prefactor: tail_exp * x_min.powf(tail_exp),
        exponent_stderr: tail_exp / nf.sqrt(),
        r_squared: (1.0 - ks).clamp(0.0, 1.0),
        n_used: n,
        n_excluded: values.len() - n,
        method: FitMethod::MleTail,
        relation,
    })
}

/// The `(x, y)` pairs a relation reads from a snapshot, one per site, in
/// list order.
pub fn relation_pairs(snapshot: &RatingSnapshot, relation: Relation) -> Vec<(f64, f64)> {
    snapshot
        .entries()
        .iter()
        .map(|e| match relation {
            Relation::HostsVsRank => (e.rank as f64, e.hosts),
            Relation::HitsVsRank => (e.rank as f64, e.hits),
            Relation::HitsVsHosts => (e.hosts, e.hits),
        })
        .collect()
}

/// Returns true when a site's pair enters a fit of `relation`.
pub(crate) fn pair_is_usable(pair: (f64, f64)) -> bool {
    usable(pair.0, pair.1)
}

pub fn fit_relation(
    snapshot: &RatingSnapshot,
    relation: Relation,
) -> Result<PowerLawFit, FitError> {
    fit_loglog_ols(&relation_pairs(snapshot, relation), relation)
}

pub fn fit_hosts_vs_rank(snapshot: &RatingSnapshot) -> Result<PowerLawFit, FitError> {
    fit_relation(snapshot, Relation::HostsVsRank)
}

pub fn fit_hits_vs_rank(snapshot: &RatingSnapshot) -> Result<PowerLawFit, FitError> {
    fit_relation(snapshot, Relation::HitsVsRank)
}

pub fn fit_hits_vs_hosts(snapshot: &RatingSnapshot) -> Result<PowerLawFit, FitError> {
    fit_relation(snapshot, Relation::HitsVsHosts)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::corpus::{RankKey, SiteEntry};
    use crate::test_support::fig1;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Raw-sum normal equations; a different arithmetic path from the
    /// centered sums used by the estimator.
    fn closed_form(pairs: &[(f64, f64)]) -> (f64, f64) {
        let n = pairs.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for &(x, y) in pairs {
            let (lx, ly) = (x.ln(), y.ln());
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        (slope, (sy - slope * sx) / n)
    }

    fn snapshot(entries: Vec<(f64, f64)>) -> RatingSnapshot {
        let entries = entries
            .into_iter()
            .enumerate()
            .map(|(i, (h, s))| SiteEntry::new(i as u32 + 1, format!("s{i}"), h, s))
            .collect();
        RatingSnapshot::new("t", "p", RankKey::Hosts, entries).unwrap()
    }

    #[test]
    fn exact_inverse_law() {
        let fit = fit_loglog_ols(
            &[(1.0, 100.0), (2.0, 50.0), (4.0, 25.0)],
            Relation::HostsVsRank,
        )
        .unwrap();
        assert!(close(fit.exponent, -1.0, 1e-12));
        assert!(close(fit.prefactor, 100.0, 1e-10));
        assert!(close(fit.r_squared, 1.0, 1e-12));
        assert_eq!((fit.n_used, fit.n_excluded), (3, 0));
        assert_eq!(fit.method, FitMethod::LoglogOls);
    }

    #[test]
    fn constant_data_has_zero_slope() {
        let fit =
            fit_loglog_ols(&[(1.0, 5.0), (2.0, 5.0), (3.0, 5.0)], Relation::HitsVsRank).unwrap();
        assert!(close(fit.exponent, 0.0, 1e-15));
        assert!(close(fit.prefactor, 5.0, 1e-12));
        assert_eq!(fit.r_squared, 1.0);
        assert_eq!(fit.exponent_stderr, 0.0);
    }

    #[test]
    fn errors() {
        assert_eq!(
            fit_loglog_ols(&[(1.0, 1.0), (2.0, 0.0), (0.0, 3.0)], Relation::HitsVsHosts),
            Err(FitError::InsufficientData { usable: 1 })
        );
        assert_eq!(
            fit_loglog_ols(&[(3.0, 1.0), (3.0, 2.0)], Relation::HitsVsHosts),
            Err(FitError::DegenerateAbscissa { n: 2 })
        );
    }

    #[test]
    fn excluded_points_are_counted() {
        let fit = fit_loglog_ols(
            &[(1.0, 8.0), (2.0, 4.0), (3.0, 0.0), (4.0, 2.0)],
            Relation::HitsVsRank,
        )
        .unwrap();
        assert_eq!((fit.n_used, fit.n_excluded), (3, 1));
        assert!(close(fit.exponent, -1.0, 1e-12));
    }

    // Frozen from an independent 50-digit OLS over the Fig. 1 columns.
    #[test]
    fn fig1_fixture() {
        let s = fig1();
        let h = fit_hosts_vs_rank(&s).unwrap();
        assert!(close(h.exponent, -1.1606301133555266, 1e-9));
        assert!(close(h.prefactor, 394.32017768034069, 1e-9));
        assert!(close(h.r_squared, 0.93882527821818141, 1e-9));
        assert!(close(h.exponent_stderr, 0.10474720782096311, 1e-9));

        let b = fit_hits_vs_rank(&s).unwrap();
        assert!(close(b.exponent, -2.1552553748675083, 1e-9));
        assert!(close(b.prefactor, 5900.2088131401685, 1e-8));
        assert!(close(b.r_squared, 0.89718572373737363, 1e-9));

        let g = fit_hits_vs_hosts(&s).unwrap();
        assert!(close(g.exponent, 1.7099366935860703, 1e-9));
        assert!(close(g.prefactor, 0.1660300422829916, 1e-9));
        assert!(close(g.r_squared, 0.81030373150676638, 1e-9));
        assert!(close(g.exponent_stderr, 0.29250986204363174, 1e-9));
    }

    #[test]
    fn fig1_rerank_by_hits_is_smoother() {
        let s = fig1();
        let before = fit_hits_vs_rank(&s).unwrap();
        let after = fit_hits_vs_rank(&s.rerank(RankKey::Hits)).unwrap();
        assert!(close(after.r_squared, 0.97802519616207764, 1e-9));
        assert!(close(after.exponent, -2.2502593832756614, 1e-9));
        assert!(after.r_squared > before.r_squared);
    }

    #[test]
    fn snapshot_wrappers() {
        let exact: Vec<(f64, f64)> = (1..=100)
            .map(|r| {
                let r = r as f64;
                (300.0 * r.powf(-0.8), 1000.0 * r.powi(-2))
            })
            .collect();
        let s = snapshot(exact);
        let h = fit_hosts_vs_rank(&s).unwrap();
        assert!(close(h.exponent, -0.8, 1e-9));
        assert!(close(h.prefactor, 300.0, 1e-6));
        assert_eq!(h.relation, Relation::HostsVsRank);
        let b = fit_hits_vs_rank(&s).unwrap();
        assert!(close(b.exponent, -2.0, 1e-9));
        assert!(close(b.prefactor, 1000.0, 1e-6));
        assert!(close(b.r_squared, 1.0, 1e-12));

        let zero_hosts = snapshot(vec![(0.0, 5.0), (0.0, 4.0), (0.0, 3.0)]);
        assert_eq!(
            fit_hosts_vs_rank(&zero_hosts),
            Err(FitError::InsufficientData { usable: 0 })
        );
        let flat_hosts = snapshot(vec![(7.0, 5.0), (7.0, 4.0), (7.0, 3.0)]);
        assert_eq!(
            fit_hits_vs_hosts(&flat_hosts),
            Err(FitError::DegenerateAbscissa { n: 3 })
        );
    }

    #[test]
    fn hits_vs_hosts_substitution_identity() {
        let s = snapshot(
            (1..=30)
                .map(|r| {
                    let r = r as f64;
                    (100.0 / r, 1000.0 / (r * r))
                })
                .collect(),
        );
        let g = fit_hits_vs_hosts(&s).unwrap();
        assert!(close(g.exponent, 2.0, 1e-9));
        assert!(close(g.prefactor, 0.1, 1e-9));
    }

    #[test]
    fn mle_analytic() {
        let e = std::f64::consts::E;
        let fit = fit_mle_tail(&[1.0, e, e * e], 1.0, Relation::HostsVsRank).unwrap();
        assert!(close(fit.exponent, 2.0, 1e-12));
        assert!(close(fit.exponent_stderr, 1.0 / 3f64.sqrt(), 1e-12));
        assert!(close(fit.prefactor, 1.0, 1e-12));
        assert_eq!(fit.method, FitMethod::MleTail);
        assert!((0.0..=1.0).contains(&fit.r_squared));
    }

    #[test]
    fn mle_errors() {
        assert_eq!(
            fit_mle_tail(&[1.0, 1.0, 1.0], 1.0, Relation::HitsVsRank),
            Err(FitError::DegenerateData)
        );
        assert_eq!(
            fit_mle_tail(&[0.5, 3.0], 1.0, Relation::HitsVsRank),
            Err(FitError::InsufficientData { usable: 1 })
        );
        assert_eq!(
            fit_mle_tail(&[1.0, 3.0], 0.0, Relation::HitsVsRank),
            Err(FitError::InvalidXMin(0.0))
        );
        let fit = fit_mle_tail(&[0.5, 1.0, 3.0, 9.0], 1.0, Relation::HitsVsRank).unwrap();
        assert_eq!((fit.n_used, fit.n_excluded), (3, 1));
    }

    #[test]
    fn mle_recovers_seeded_pareto() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Pareto};
        // density exponent 2.5 is Pareto shape 1.5
        let dist = Pareto::new(1.0, 1.5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2025);
        let xs: Vec<f64> = (0..1000).map(|_| dist.sample(&mut rng)).collect();
        let fit = fit_mle_tail(&xs, 1.0, Relation::HitsVsRank).unwrap();
        assert!((fit.exponent - 2.5).abs() < 3.0 * fit.exponent_stderr);
        assert!(fit.r_squared > 0.9);
    }

    fn pairs_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-2.0f64..4.0, -2.0f64..4.0), 3..=12)
            .prop_map(|v| {
                v.into_iter()
                    .map(|(a, b)| (10f64.powf(a), 10f64.powf(b)))
                    .collect::<Vec<_>>()
            })
            .prop_filter("need spread in ln x", |v| {
                let (lo, hi) = v.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| {
                    (lo.min(p.0.ln()), hi.max(p.0.ln()))
                });
                hi - lo >= 1.0
            })
    }

    proptest! {
        #[test]
        fn exact_law_recovery(alpha in -3.0f64..-0.1, c in 0.1f64..1e4, n in 10usize..200) {
            let pairs: Vec<_> = (1..=n).map(|r| (r as f64, c * (r as f64).powf(alpha))).collect();
            let fit = fit_loglog_ols(&pairs, Relation::HostsVsRank).unwrap();
            prop_assert!(close(fit.exponent, alpha, 1e-9));
            prop_assert!(close(fit.r_squared, 1.0, 1e-12));
            prop_assert!((fit.prefactor / c - 1.0).abs() < 1e-9);
        }

        #[test]
        fn matches_closed_form(pairs in pairs_strategy()) {
            let fit = fit_loglog_ols(&pairs, Relation::HitsVsHosts).unwrap();
            let (slope, intercept) = closed_form(&pairs);
            let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
            prop_assert!(rel(fit.exponent, slope), "{} vs {}", fit.exponent, slope);
            prop_assert!(rel(fit.prefactor.ln(), intercept));
        }

        #[test]
        fn y_scale_covariance(pairs in pairs_strategy(), k in 0.01f64..100.0) {
            let base = fit_loglog_ols(&pairs, Relation::HitsVsHosts).unwrap();
            let scaled: Vec<_> = pairs.iter().map(|&(x, y)| (x, y * k)).collect();
            let fit = fit_loglog_ols(&scaled, Relation::HitsVsHosts).unwrap();
            prop_assert!(close(fit.exponent, base.exponent, 1e-9));
            prop_assert!(close(fit.r_squared, base.r_squared, 1e-9));
            prop_assert!((fit.prefactor / (k * base.prefactor) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn x_scale_covariance(pairs in pairs_strategy(), m in 0.01f64..100.0) {
            let base = fit_loglog_ols(&pairs, Relation::HitsVsHosts).unwrap();
            let scaled: Vec<_> = pairs.iter().map(|&(x, y)| (x * m, y)).collect();
            let fit = fit_loglog_ols(&scaled, Relation::HitsVsHosts).unwrap();
            prop_assert!(close(fit.exponent, base.exponent, 1e-9));
            let expected = base.prefactor * m.powf(-base.exponent);
            prop_assert!((fit.prefactor / expected - 1.0).abs() < 1e-8);
        }

        #[test]
        fn permutation_invariance(pairs in pairs_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let base = fit_loglog_ols(&pairs, Relation::HitsVsHosts).unwrap();
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let fit = fit_loglog_ols(&shuffled, Relation::HitsVsHosts).unwrap();
            prop_assert!(close(fit.exponent, base.exponent, 1e-9));
            prop_assert!(close(fit.prefactor.ln(), base.prefactor.ln(), 1e-9));
            prop_assert!(close(fit.r_squared, base.r_squared, 1e-9));
        }

        #[test]
        fn mle_formula(xs in prop::collection::vec(1.0f64..1e3, 2..50)) {
            prop_assume!(xs.iter().any(|&x| x > 1.0));
            let fit = fit_mle_tail(&xs, 1.0, Relation::HitsVsRank).unwrap();
            let expected = 1.0 + xs.len() as f64 / xs.iter().map(|x| x.ln()).sum::<f64>();
            prop_assert!((fit.exponent / expected - 1.0).abs() <= 1e-12);
        }
    }
}
