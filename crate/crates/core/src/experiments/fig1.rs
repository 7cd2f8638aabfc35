use super::{buffer_label, seed_digest, summarize, sweep, Coords, ExperimentSpec, Table};
use crate::error::Result;
use crate::sim::SimConfig;

/// Average no-error probability of a single batch, per batch size and EPR rate.
pub fn run_fig1(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let mut points = Vec::new();
    for &lambda_e in &spec.lambda_es {
        for &b in &spec.batch_sizes {
            let mut cfg = SimConfig::single_batch(b, lambda_e, spec.base.policy, spec.base.seed);
            cfg.noise = spec.base.noise;
            cfg.tie_break = spec.base.tie_break;
            points.push(cfg);
        }
    }
    let seeds = spec.seeds();
    let digest = seed_digest(&seeds);
    let reps = sweep(&points, &spec.policies, &seeds, false)?;
    let mut table = Table { rows: Vec::new(), gaps: Vec::new() };
    for (cfg, rs) in points.iter().zip(&reps) {
        let c = Coords {
            batch_size: cfg.batch_size,
            lambda_e: cfg.lambda_e,
            lambda_r: None,
            load: None,
            buffer: buffer_label(cfg.buffer),
        };
        let (rows, gaps) = summarize("fig1", &c, &spec.policies, rs, &digest);
        table.rows.extend(rows);
        table.gaps.extend(gaps);
    }
    Ok(table)
}
