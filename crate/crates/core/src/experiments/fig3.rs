use serde::{Deserialize, Serialize};

use super::{buffer_label, seed_digest, summarize, sweep, Coords, ExperimentSpec, Table};
use crate::error::Result;
use crate::sim::{BufferCap, SimConfig};

/// EPR rate, batch size and buffer scaled together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledConfig {
    pub lambda_e: f64,
    pub batch_size: usize,
    pub buffer: usize,
}

/// Mean no-error probability against load for batched arrivals into a finite
/// buffer. The batch rate at load `rho` is `rho * lambda_e / b`.
pub fn run_fig3(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let mut points = Vec::new();
    for sc in &spec.scaled {
        for &rho in &spec.loads {
            let lambda_r = rho * sc.lambda_e / sc.batch_size as f64;
            points.push(SimConfig {
                lambda_r,
                lambda_e: sc.lambda_e,
                batch_size: sc.batch_size,
                buffer: BufferCap::Finite(sc.buffer),
                ..spec.base.clone()
            });
        }
    }
    let seeds = spec.seeds();
    let digest = seed_digest(&seeds);
    let reps = sweep(&points, &spec.policies, &seeds, spec.drops_as_zero)?;
    let mut table = Table { rows: Vec::new(), gaps: Vec::new() };
    for (cfg, rs) in points.iter().zip(&reps) {
        let c = Coords {
            batch_size: cfg.batch_size,
            lambda_e: cfg.lambda_e,
            lambda_r: Some(cfg.lambda_r),
            load: Some(cfg.load()?),
            buffer: buffer_label(cfg.buffer),
        };
        let (rows, gaps) = summarize("fig3", &c, &spec.policies, rs, &digest);
        table.rows.extend(rows);
        table.gaps.extend(gaps);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Horizon;

    #[test]
    fn load_sets_batch_rate() {
        let mut s = ExperimentSpec::fig3();
        s.loads = vec![1.2];
        s.replications = 2;
        s.base.horizon = Horizon::Departures(600);
        s.base.warmup = 100;
        let t = run_fig3(&s).unwrap();
        assert_eq!(t.rows.len(), 4);
        let b4 = t.rows.iter().find(|r| r.batch_size == 4).unwrap();
        assert!((b4.lambda_r.unwrap() - 30.0).abs() < 1e-12);
        assert!((b4.load.unwrap() - 1.2).abs() < 1e-12);
        assert_eq!(b4.buffer, "20");
        assert!(t.rows.iter().all(|r| r.drop_rate > 0.0));
    }

    #[test]
    fn drops_as_zero_lowers_the_mean() {
        let mut s = ExperimentSpec::fig3();
        s.loads = vec![1.5];
        s.scaled.truncate(1);
        s.replications = 2;
        s.base.horizon = Horizon::Departures(2_000);
        s.base.warmup = 200;
        let kept = run_fig3(&s).unwrap();
        s.drops_as_zero = true;
        let zeroed = run_fig3(&s).unwrap();
        for (a, b) in kept.rows.iter().zip(&zeroed.rows) {
            assert!(b.mean < a.mean);
        }
    }
}
