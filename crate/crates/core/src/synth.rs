//! Seeded synthetic snapshots drawn from the two rank laws.
//!
//! For each rank `r` in `1..=n_sites`:
//!
//! ```text
//! hosts_r = c_h · r^alpha · exp(eps_r)
//! hits_r  = c_s · r^beta  · exp(delta_r)
//! ```
//!
//! with `eps_r`, `delta_r` independent `N(0, noise_sigma²)` draws, taken in
//! that order per rank from a ChaCha8 stream seeded by `seed`. With
//! `integerize` values are rounded half away from zero and clamped to at
//! least 1. The result is re-ranked by hosts so that noise cannot break the
//! snapshot ordering.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{RankKey, RatingSnapshot, SiteEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_sites: u32,
    pub alpha: f64,
    pub c_h: f64,
    pub beta: f64,
    pub c_s: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub integerize: bool,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidSpec(msg));
        if self.n_sites < 1 {
            return bad("n_sites must be at least 1".into());
        }
        if !(self.alpha.is_finite() && self.beta.is_finite()) {
            return bad("exponents must be finite".into());
        }
        if !(self.c_h > 0.0 && self.c_h.is_finite()) {
            return bad(format!("c_h must be positive, got {}", self.c_h));
        }
        if !(self.c_s > 0.0 && self.c_s.is_finite()) {
            return bad(format!("c_s must be positive, got {}", self.c_s));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            ));
        }
        Ok(())
    }
}

pub fn generate(spec: &SynthSpec) -> Result<RatingSnapshot, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
    let finish = |v: f64| {
        if spec.integerize {
            v.round().max(1.0)
        } else {
            v
        }
    };

    let mut entries = Vec::with_capacity(spec.n_sites as usize);
    for r in 1..=spec.n_sites {
        let rf = r as f64;
        let mut hosts = spec.c_h * rf.powf(spec.alpha);
        let mut hits = spec.c_s * rf.powf(spec.beta);
        if spec.noise_sigma > 0.0 {
            hosts *= noise.sample(&mut rng).exp();
            hits *= noise.sample(&mut rng).exp();
        }
        if !(hosts.is_finite() && hits.is_finite()) {
            return Err(SynthError::InvalidSpec(format!(
                "values overflow at rank {r}"
            )));
        }
        entries.push(SiteEntry::new(
            r,
            format!("site-{r}"),
            finish(hosts),
            finish(hits),
        ));
    }

    // Labels keep the generating rank; the snapshot rank follows hosts order.
    Ok(sort_into_snapshot(entries, spec.seed))
}

fn sort_into_snapshot(mut entries: Vec<SiteEntry>, seed: u64) -> RatingSnapshot {
    entries.sort_by(|a, b| b.hosts.total_cmp(&a.hosts));
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i as u32 + 1;
    }
    RatingSnapshot::new("synthetic", format!("seed-{seed}"), RankKey::Hosts, entries)
        .expect("sorted entries satisfy snapshot invariants")
}
