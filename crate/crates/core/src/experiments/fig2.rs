use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{buffer_label, seed_digest, summarize, Coords, ExperimentSpec, RepSummary, Table};
use crate::analytics::{success_prob, SyndromeHistory};
use crate::error::Result;
use crate::scheduling::PolicyKind;
use crate::sim::{run, SimConfig};
use crate::stats::EmpiricalCdf;

/// Width of the bins used to locate CDF steps.
pub const STEP_BIN: f64 = 0.001;
/// Minimum share of samples in one bin for it to count as a step.
pub const STEP_MASS: f64 = 0.01;
/// Steps are matched to `Pr[e'|(0, x)]` within this distance.
pub const STEP_WINDOW: f64 = 0.005;

/// A bin where a policy's CDF rises by at least [`STEP_MASS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub policy: String,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub mass: f64,
}

/// Whether a step sits near the no-error probability after `minus_rounds`
/// `-1` outcomes and no `+1`s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorCheck {
    pub policy: String,
    pub minus_rounds: u64,
    pub target: f64,
    /// Heaviest bin inside the window.
    pub best_mass: f64,
    pub found: bool,
}

#[derive(Debug, Clone)]
pub struct Fig2Result {
    pub table: Table,
    pub cdfs: Vec<(PolicyKind, EmpiricalCdf)>,
    pub steps: Vec<StepRow>,
    pub anchors: Vec<AnchorCheck>,
}

impl Fig2Result {
    pub fn cdf(&self, policy: PolicyKind) -> Option<&EmpiricalCdf> {
        self.cdfs.iter().find(|(p, _)| *p == policy).map(|(_, c)| c)
    }
}

/// Per-departure fidelity distribution of a single-request stream, pooled over
/// replications, for each policy.
pub fn run_fig2(spec: &ExperimentSpec) -> Result<Fig2Result> {
    spec.validate()?;
    let base = SimConfig { trace: false, ..spec.base.clone() };
    base.validate()?;
    let seeds = spec.seeds();
    let digest = seed_digest(&seeds);
    let jobs: Vec<(PolicyKind, u64)> = spec.policies.iter().flat_map(|&p| seeds.iter().map(move |&s| (p, s))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(policy, seed)| run(&SimConfig { policy, seed, ..base.clone() }))
        .collect::<Result<Vec<_>>>()?;

    let mut reps = Vec::new();
    let mut cdfs = Vec::new();
    for (policy, chunk) in spec.policies.iter().zip(runs.chunks(seeds.len())) {
        reps.push(chunk.iter().map(|m| RepSummary::of(m, spec.drops_as_zero)).collect::<Vec<_>>());
        let pooled: Vec<f64> = chunk.iter().flat_map(|m| m.fidelity_samples.iter().copied()).collect();
        cdfs.push((*policy, EmpiricalCdf::new(pooled)));
    }
    let c = Coords {
        batch_size: base.batch_size,
        lambda_e: base.lambda_e,
        lambda_r: Some(base.lambda_r),
        load: Some(base.load()?),
        buffer: buffer_label(base.buffer),
    };
    let (rows, gaps) = summarize("fig2", &c, &spec.policies, &reps, &digest);

    let probs = base.noise.round_probs();
    let mut steps = Vec::new();
    let mut anchors = Vec::new();
    for (policy, cdf) in &cdfs {
        for (lo, hi, mass) in cdf.steep_bins(0.5, 1.0, STEP_BIN, STEP_MASS).into_iter().rev() {
            steps.push(StepRow { policy: policy.name().into(), bin_lo: lo, bin_hi: hi, mass });
        }
        for x in 0..3 {
            let target = success_prob(&SyndromeHistory::new(0, x), &probs);
            let best_mass = anchor_mass(cdf, target);
            anchors.push(AnchorCheck {
                policy: policy.name().into(),
                minus_rounds: x,
                target,
                best_mass,
                found: best_mass >= STEP_MASS,
            });
        }
    }
    Ok(Fig2Result { table: Table { rows, gaps }, cdfs, steps, anchors })
}

/// Largest bin mass among [`STEP_BIN`]-wide bins inside `target ± STEP_WINDOW`,
/// clipped at 1.
pub fn anchor_mass(cdf: &EmpiricalCdf, target: f64) -> f64 {
    let hi = (target + STEP_WINDOW).min(1.0);
    let lo = target - STEP_WINDOW;
    cdf.steep_bins(lo, hi, STEP_BIN, 0.0).iter().map(|b| b.2).fold(0.0, f64::max)
}
