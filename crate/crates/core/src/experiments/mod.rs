//! Scenario harness for the three evaluations: batch fidelity against batch
//! size, the fidelity CDF of a single-request stream, and fidelity against load
//! for batched streams with a finite buffer.
//!
//! Every sweep point runs `replications` independent simulations seeded
//! `seed, seed + 1, ...`. The same seeds are used for every policy, so policy
//! differences are estimated from paired runs.

mod fig1;
mod fig2;
mod fig3;
pub mod output;
pub mod plot;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::scheduling::PolicyKind;
use crate::sim::{run, BufferCap, RunMetrics, SimConfig, TieBreak};
use crate::stats::Estimate;

pub use fig1::run_fig1;
pub use fig2::{run_fig2, AnchorCheck, Fig2Result, StepRow};
pub use fig3::{run_fig3, ScaledConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: Figure,
    pub batch_sizes: Vec<usize>,
    pub loads: Vec<f64>,
    pub lambda_es: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    /// Noise, horizon, warmup, seed and tie-breaking are taken from here.
    pub base: SimConfig,
    pub scaled: Vec<ScaledConfig>,
    pub replications: usize,
    pub out: Option<PathBuf>,
    /// Score pushed-out requests as fidelity 0 instead of leaving them out.
    pub drops_as_zero: bool,
}

impl ExperimentSpec {
    pub fn fig1() -> Self {
        let mut base = SimConfig::single_batch(1, 50.0, PolicyKind::Fqf, 1);
        base.tie_break = TieBreak::Shuffled;
        Self {
            name: Figure::Fig1,
            batch_sizes: vec![1, 2, 4, 6, 8, 10],
            loads: Vec::new(),
            lambda_es: vec![50.0, 200.0],
            policies: vec![PolicyKind::Yqf, PolicyKind::Fqf],
            base,
            scaled: Vec::new(),
            replications: 20_000,
            out: None,
            drops_as_zero: false,
        }
    }

    pub fn fig2() -> Self {
        Self {
            name: Figure::Fig2,
            batch_sizes: vec![1],
            loads: Vec::new(),
            lambda_es: vec![100.0],
            policies: PolicyKind::ALL.to_vec(),
            base: SimConfig::stream(90.0, 100.0, PolicyKind::Fqf, 1),
            scaled: Vec::new(),
            replications: 30,
            out: None,
            drops_as_zero: false,
        }
    }

    pub fn fig3() -> Self {
        let mut base = SimConfig::batched_stream(1.0, 25.0, 1, 5, PolicyKind::Fqf, 1);
        base.tie_break = TieBreak::Shuffled;
        base.horizon = crate::sim::Horizon::Departures(50_000);
        base.warmup = 5_000;
        Self {
            name: Figure::Fig3,
            batch_sizes: Vec::new(),
            loads: vec![0.5, 0.7, 0.9, 1.1, 1.3, 1.5],
            lambda_es: Vec::new(),
            policies: vec![PolicyKind::Yqf, PolicyKind::Fqf],
            base,
            scaled: vec![
                ScaledConfig { lambda_e: 25.0, batch_size: 1, buffer: 5 },
                ScaledConfig { lambda_e: 100.0, batch_size: 4, buffer: 20 },
            ],
            replications: 30,
            out: None,
            drops_as_zero: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("{}: {msg}", self.name.name())));
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        if self.policies.is_empty() {
            return bad("policy list is empty");
        }
        match self.name {
            Figure::Fig1 if self.batch_sizes.is_empty() || self.lambda_es.is_empty() => {
                bad("batch size and rate lists must be non-empty")
            }
            Figure::Fig3 if self.loads.is_empty() || self.scaled.is_empty() => bad("load and config lists must be non-empty"),
            _ => Ok(()),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.replications as u64).map(|r| self.base.seed.wrapping_add(r)).collect()
    }
}

/// One (sweep point, policy) summary over all replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub batch_size: usize,
    pub lambda_e: f64,
    pub lambda_r: Option<f64>,
    pub load: Option<f64>,
    pub buffer: String,
    pub policy: String,
    pub mean: f64,
    pub ci95: f64,
    pub drop_rate: f64,
    /// Departures scored, summed over replications.
    pub n: u64,
    pub replications: usize,
    pub seed_digest: String,
}

/// Paired difference `minuend - subtrahend` at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub experiment: String,
    pub batch_size: usize,
    pub lambda_e: f64,
    pub lambda_r: Option<f64>,
    pub load: Option<f64>,
    pub buffer: String,
    pub minuend: String,
    pub subtrahend: String,
    pub mean: f64,
    pub ci95: f64,
    pub replications: usize,
    pub seed_digest: String,
}

impl GapRow {
    pub fn estimate(&self) -> Estimate {
        Estimate { mean: self.mean, ci95: self.ci95, n: self.replications }
    }
}

impl ResultRow {
    pub fn estimate(&self) -> Estimate {
        Estimate { mean: self.mean, ci95: self.ci95, n: self.replications }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub rows: Vec<ResultRow>,
    pub gaps: Vec<GapRow>,
}

impl Table {
    pub fn row(&self, policy: PolicyKind, pred: impl Fn(&ResultRow) -> bool) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.policy == policy.name() && pred(r))
    }

    pub fn gap(&self, pred: impl Fn(&GapRow) -> bool) -> Option<&GapRow> {
        self.gaps.iter().find(|g| pred(g))
    }
}

/// Short SHA-256 digest of a seed list.
pub fn seed_digest(seeds: &[u64]) -> String {
    let mut h = Sha256::new();
    for s in seeds {
        h.update(s.to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

pub(crate) fn buffer_label(b: BufferCap) -> String {
    match b {
        BufferCap::Infinite => "inf".into(),
        BufferCap::Finite(n) => n.to_string(),
    }
}

/// What one replication contributes to a row.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RepSummary {
    pub mean: f64,
    pub drop_rate: f64,
    pub n: u64,
}

impl RepSummary {
    fn of(m: &RunMetrics, drops_as_zero: bool) -> Self {
        let mean = if drops_as_zero { m.mean_fidelity_with_drops() } else { m.mean_fidelity() };
        Self { mean, drop_rate: m.drop_rate(), n: m.fidelity_samples.len() as u64 }
    }
}

/// Runs every config in `points` under every policy and seed, in parallel,
/// returning summaries indexed `[point][policy][replication]`.
pub(crate) fn sweep(
    points: &[SimConfig],
    policies: &[PolicyKind],
    seeds: &[u64],
    drops_as_zero: bool,
) -> Result<Vec<Vec<Vec<RepSummary>>>> {
    for p in points {
        p.validate()?;
    }
    let jobs: Vec<(usize, usize, u64)> = (0..points.len())
        .flat_map(|i| (0..policies.len()).flat_map(move |j| seeds.iter().map(move |&s| (i, j, s))))
        .collect();
    let flat: Vec<RepSummary> = jobs
        .par_iter()
        .map(|&(i, j, seed)| {
            let cfg = SimConfig { policy: policies[j], seed, trace: false, ..points[i].clone() };
            run(&cfg).map(|m| RepSummary::of(&m, drops_as_zero))
        })
        .collect::<Result<_>>()?;
    let mut it = flat.into_iter();
    Ok(points
        .iter()
        .map(|_| policies.iter().map(|_| it.by_ref().take(seeds.len()).collect()).collect())
        .collect())
}

pub(crate) struct Coords {
    pub batch_size: usize,
    pub lambda_e: f64,
    pub lambda_r: Option<f64>,
    pub load: Option<f64>,
    pub buffer: String,
}

/// Rows and FQF-YQF gaps for one sweep point.
pub(crate) fn summarize(
    experiment: &str,
    c: &Coords,
    policies: &[PolicyKind],
    reps: &[Vec<RepSummary>],
    digest: &str,
) -> (Vec<ResultRow>, Vec<GapRow>) {
    let rows = policies
        .iter()
        .zip(reps)
        .map(|(p, rs)| {
            let means: Vec<f64> = rs.iter().map(|r| r.mean).collect();
            let est = Estimate::from_samples(&means);
            ResultRow {
                experiment: experiment.into(),
                batch_size: c.batch_size,
                lambda_e: c.lambda_e,
                lambda_r: c.lambda_r,
                load: c.load,
                buffer: c.buffer.clone(),
                policy: p.name().into(),
                mean: est.mean,
                ci95: est.ci95,
                drop_rate: rs.iter().map(|r| r.drop_rate).sum::<f64>() / rs.len() as f64,
                n: rs.iter().map(|r| r.n).sum(),
                replications: rs.len(),
                seed_digest: digest.into(),
            }
        })
        .collect();
    let idx = |k: PolicyKind| policies.iter().position(|&p| p == k);
    let mut gaps = Vec::new();
    let pairs = [(PolicyKind::Fqf, PolicyKind::Yqf), (PolicyKind::Fqf, PolicyKind::Oqf), (PolicyKind::Yqf, PolicyKind::Oqf)];
    for (a, b) in pairs {
        let (Some(i), Some(j)) = (idx(a), idx(b)) else { continue };
        let diffs: Vec<f64> = reps[i].iter().zip(&reps[j]).map(|(x, y)| x.mean - y.mean).collect();
        let est = Estimate::from_samples(&diffs);
        gaps.push(GapRow {
            experiment: experiment.into(),
            batch_size: c.batch_size,
            lambda_e: c.lambda_e,
            lambda_r: c.lambda_r,
            load: c.load,
            buffer: c.buffer.clone(),
            minuend: a.name().into(),
            subtrahend: b.name().into(),
            mean: est.mean,
            ci95: est.ci95,
            replications: diffs.len(),
            seed_digest: digest.into(),
        });
    }
    (rows, gaps)
}
