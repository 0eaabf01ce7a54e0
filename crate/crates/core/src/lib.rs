//! Power-law analysis of website rating snapshots.
//!
//! A rating snapshot lists sites by rank `r` together with their unique
//! hosts `H` and page hits `S`. This crate fits the two rank laws
//! `H = C_h·r^α` and `S = C_s·r^β`, eliminates the rank between them to get
//! `S = C_{s/h}·H^γ` with `γ = β/α`, and compares that derived law against
//! a direct fit of hits against hosts. On top of the fits it provides
//! log-residual anomaly scoring, load prediction, a seeded synthetic
//! snapshot generator and log-log SVG plots.
//!
//! ```
//! use ratelaw::{corpus, powerfit, relation};
//!
//! let csv = "rank,label,hosts,hits\n1,a,100,1000\n2,b,50,250\n3,c,25,62\n";
//! let snap = corpus::parse_snapshot(csv, corpus::Format::Csv, corpus::RankKey::Hosts).unwrap();
//! let derived = relation::derive_from_snapshot(&snap, relation::DEFAULT_LINEARITY_TOL).unwrap();
//! assert!(derived.gamma_derived > 1.0);
//! let hosts = powerfit::fit_hosts_vs_rank(&snap).unwrap();
//! assert!(hosts.exponent < 0.0);
//! ```

pub mod analytics;
pub mod cli;
pub mod corpus;
pub mod plotio;
pub mod powerfit;
pub mod relation;
pub mod synth;

pub use analytics::{AnomalyReport, PagesPerHost, SiteResidual};
pub use corpus::{Format, RankKey, RatingSnapshot, SiteEntry};
pub use powerfit::{FitMethod, PowerLawFit, Relation};
pub use relation::DerivedRelation;
pub use synth::SynthSpec;
