//! Hits-vs-hosts law obtained by eliminating rank between the two rank laws.
//!
//! From `H = C_h·r^α` the rank is `r = (H / C_h)^(1/α)`. Substituting into
//! `S = C_s·r^β` gives
//!
//! ```text
//! S = C_s·C_h^(-β/α) · H^(β/α) = C_{s/h}·H^γ
//! ```
//!
//! The derived `γ` and `C_{s/h}` are reported next to a direct fit of hits
//! against hosts. Their disagreement measures how far the data are from
//! obeying both rank laws at once.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::RatingSnapshot;
use crate::powerfit::{self, FitError, FitMethod, PowerLawFit, Relation};

pub const DEFAULT_LINEARITY_TOL: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedRelation {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_derived: f64,
    pub prefactor_derived: f64,
    pub gamma_direct: f64,
    pub prefactor_direct: f64,
    pub gamma_discrepancy: f64,
    pub linear_regime: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelationError {
    #[error("hosts-vs-rank exponent is zero; rank cannot be eliminated")]
    ZeroAlpha,
    #[error("{role} fit must be {expected}, got {found}")]
    RelationMismatch {
        role: &'static str,
        expected: Relation,
        found: Relation,
    },
    #[error("{role} fit must be a log-log OLS fit")]
    MethodMismatch { role: &'static str },
    #[error("linearity tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("{relation} fit failed: {source}")]
    Fit {
        relation: Relation,
        #[source]
        source: FitError,
    },
}

fn check(fit: &PowerLawFit, role: &'static str, expected: Relation) -> Result<(), RelationError> {
    if fit.relation != expected {
        return Err(RelationError::RelationMismatch {
            role,
            expected,
            found: fit.relation,
        });
    }
    if fit.method != FitMethod::LoglogOls {
        return Err(RelationError::MethodMismatch { role });
    }
    Ok(())
}

/// Whether `gamma` is within `tol` of one, i.e. hits grow linearly with hosts.
pub fn is_linear(gamma: f64, tol: f64) -> bool {
    (gamma - 1.0).abs() <= tol
}

pub fn derive_relation(
    host_fit: &PowerLawFit,
    hit_fit: &PowerLawFit,
    direct_fit: &PowerLawFit,
    linearity_tol: f64,
) -> Result<DerivedRelation, RelationError> {
    check(host_fit, "host", Relation::HostsVsRank)?;
    check(hit_fit, "hit", Relation::HitsVsRank)?;
    check(direct_fit, "direct", Relation::HitsVsHosts)?;
    if !(linearity_tol > 0.0 && linearity_tol.is_finite()) {
        return Err(RelationError::InvalidTolerance(linearity_tol));
    }
    let alpha = host_fit.exponent;
    if alpha == 0.0 {
        return Err(RelationError::ZeroAlpha);
    }
    let beta = hit_fit.exponent;
    let gamma_derived = beta / alpha;
    let prefactor_derived = hit_fit.prefactor * host_fit.prefactor.powf(-gamma_derived);
    Ok(DerivedRelation {
        alpha,
        beta,
        gamma_derived,
        prefactor_derived,
        gamma_direct: direct_fit.exponent,
        prefactor_direct: direct_fit.prefactor,
        gamma_discrepancy: (gamma_derived - direct_fit.exponent).abs(),
        linear_regime: is_linear(gamma_derived, linearity_tol),
    })
}

/// Runs the three log-log fits on `snapshot` and derives the relation.
pub fn derive_from_snapshot(
    snapshot: &RatingSnapshot,
    linearity_tol: f64,
) -> Result<DerivedRelation, RelationError> {
    let fit = |relation| {
        powerfit::fit_relation(snapshot, relation)
            .map_err(|source| RelationError::Fit { relation, source })
    };
    derive_relation(
        &fit(Relation::HostsVsRank)?,
        &fit(Relation::HitsVsRank)?,
        &fit(Relation::HitsVsHosts)?,
        linearity_tol,
    )
}
