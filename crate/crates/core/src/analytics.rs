//! Using fitted laws: per-site deviation scoring, pages per host, and
//! forward/inverse prediction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::RatingSnapshot;
use crate::powerfit::{pair_is_usable, relation_pairs, FitMethod, PowerLawFit, Relation};

pub const DEFAULT_THRESHOLD: f64 = 2.0;

/// Residual spreads at or below this (natural-log units) are rounding noise
/// from an exact fit and are treated as zero.
pub const RESIDUAL_STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("fit covers {fit} points but the snapshot has {snapshot} usable {relation} pairs")]
    FitMismatch {
        relation: Relation,
        fit: usize,
        snapshot: usize,
    },
    #[error("expected a {expected} fit, got {found}")]
    WrongRelation {
        expected: &'static str,
        found: Relation,
    },
    #[error("a log-log OLS fit is required, got an MLE tail fit")]
    WrongMethod,
    #[error("{what} must be positive and finite, got {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("exponent is zero, rank cannot be recovered from the value")]
    NonInvertible,
    #[error("total hosts is zero, pages per host is undefined")]
    UndefinedAggregate,
}

fn positive(what: &'static str, value: f64) -> Result<f64, AnalyticsError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(AnalyticsError::Domain { what, value })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteResidual {
    pub rank: u32,
    pub label: String,
    pub observed: f64,
    pub predicted: f64,
    pub log_residual: f64,
    pub zscore: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub relation: Relation,
    pub per_site: Vec<SiteResidual>,
    pub residual_std: f64,
    /// Ranks with `|zscore| > threshold`, ascending.
    pub flagged: Vec<u32>,
    pub threshold: f64,
}

/// Scores every site that entered `fit` by its log residual
/// `ln(observed) - ln(predicted)`, standardized by the population standard
/// deviation of all residuals.
///
/// `fit` must be a log-log fit of this snapshot's pairs for `fit.relation`;
/// a different usable-point count is reported as a mismatch.
pub fn score_anomalies(
    snapshot: &RatingSnapshot,
    fit: &PowerLawFit,
    threshold: f64,
) -> Result<AnomalyReport, AnalyticsError> {
    if fit.method != FitMethod::LoglogOls {
        return Err(AnalyticsError::WrongMethod);
    }
    positive("threshold", threshold)?;

    let mut per_site: Vec<SiteResidual> = snapshot
        .entries()
        .iter()
        .zip(relation_pairs(snapshot, fit.relation))
        .filter(|(_, pair)| pair_is_usable(*pair))
        .map(|(e, (x, y))| {
            let predicted = fit.eval(x);
            SiteResidual {
                rank: e.rank,
                label: e.label.clone(),
                observed: y,
                predicted,
                log_residual: y.ln() - predicted.ln(),
                zscore: 0.0,
            }
        })
        .collect();
    if per_site.len() != fit.n_used {
        return Err(AnalyticsError::FitMismatch {
            relation: fit.relation,
            fit: fit.n_used,
            snapshot: per_site.len(),
        });
    }

    let n = per_site.len() as f64;
    let mean = per_site.iter().map(|s| s.log_residual).sum::<f64>() / n;
    let var = per_site
        .iter()
        .map(|s| (s.log_residual - mean).powi(2))
        .sum::<f64>()
        / n;
    let mut residual_std = var.sqrt();
    if residual_std <= RESIDUAL_STD_FLOOR {
        residual_std = 0.0;
    }

    let mut flagged = Vec::new();
    if residual_std > 0.0 {
        for s in &mut per_site {
            s.zscore = s.log_residual / residual_std;
            if s.zscore.abs() > threshold {
                flagged.push(s.rank);
            }
        }
    }
    flagged.sort_unstable();

    Ok(AnomalyReport {
        relation: fit.relation,
        per_site,
        residual_std,
        flagged,
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PagesPerHost {
    /// `(rank, hits / hosts)`; `None` where hosts is zero.
    pub per_site: Vec<(u32, Option<f64>)>,
    pub total_hits: f64,
    pub total_hosts: f64,
    /// `total_hits / total_hosts`
    pub aggregate: f64,
}

/// Per-site average number of viewed pages, `S/H`, and the ratio of totals.
pub fn pages_per_host(snapshot: &RatingSnapshot) -> Result<PagesPerHost, AnalyticsError> {
    let per_site = snapshot
        .entries()
        .iter()
        .map(|e| (e.rank, (e.hosts > 0.0).then(|| e.hits / e.hosts)))
        .collect();
    let total_hits: f64 = snapshot.entries().iter().map(|e| e.hits).sum();
    let total_hosts: f64 = snapshot.entries().iter().map(|e| e.hosts).sum();
    if total_hosts == 0.0 {
        return Err(AnalyticsError::UndefinedAggregate);
    }
    Ok(PagesPerHost {
        per_site,
        total_hits,
        total_hosts,
        aggregate: total_hits / total_hosts,
    })
}

fn ols_with(fit: &PowerLawFit, ok: bool, expected: &'static str) -> Result<(), AnalyticsError> {
    if !ok {
        return Err(AnalyticsError::WrongRelation {
            expected,
            found: fit.relation,
        });
    }
    if fit.method != FitMethod::LoglogOls {
        return Err(AnalyticsError::WrongMethod);
    }
    Ok(())
}

/// Expected hits for a site with `hosts` unique hosts: `C_{s/h}·hosts^γ`.
pub fn predict_hits(hosts: f64, relation_fit: &PowerLawFit) -> Result<f64, AnalyticsError> {
    ols_with(
        relation_fit,
        relation_fit.relation == Relation::HitsVsHosts,
        "hits_vs_hosts",
    )?;
    Ok(relation_fit.eval(positive("hosts", hosts)?))
}

/// Value of a rank law at a (possibly fractional) rank.
pub fn predict_by_rank(rank: f64, fit: &PowerLawFit) -> Result<f64, AnalyticsError> {
    ols_with(fit, fit.relation.is_rank_relation(), "rank")?;
    Ok(fit.eval(positive("rank", rank)?))
}

/// Rank at which a rank law reaches `value`: `(value / C)^(1/exponent)`.
pub fn invert_rank(value: f64, fit: &PowerLawFit) -> Result<f64, AnalyticsError> {
    ols_with(fit, fit.relation.is_rank_relation(), "rank")?;
    let value = positive("value", value)?;
    if fit.exponent == 0.0 {
        return Err(AnalyticsError::NonInvertible);
    }
    Ok((value / fit.prefactor).powf(1.0 / fit.exponent))
}
