//! End-to-end acceptance checks. Each criterion prints one PASS / FAIL line;
//! the process exits non-zero if any fails.
//!
//! Run with `cargo test --release --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use fqf_sim::experiments::{run_fig1, run_fig2, run_fig3, ExperimentSpec, Table};
use fqf_sim::oracle::{sweep_interchange, verify_batch_optimality};
use fqf_sim::sim::Horizon;
use fqf_sim::{
    cond_error_given_minus, cond_error_given_plus, phase_flip_prob, run, success_prob, CondErrorProbs, PolicyKind,
    SimConfig, SyndromeHistory,
};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn anchors() -> Verdict {
    let p = phase_flip_prob(50.0, 0.003).unwrap();
    let plus = cond_error_given_plus(p).unwrap();
    let minus = cond_error_given_minus(p).unwrap();
    let probs = CondErrorProbs::from_flip_prob(p).unwrap();
    let s1 = success_prob(&SyndromeHistory::new(0, 1), &probs);
    let s2 = success_prob(&SyndromeHistory::new(0, 2), &probs);
    let ok = (p - 0.069).abs() <= 0.001
        && (plus - 0.00042).abs() <= 5e-5
        && minus == p
        && (s1 - 0.93).abs() <= 0.005
        && (s2 - 0.87).abs() <= 0.005;
    verdict(ok, format!("p = {p:.6}, Pr[e|+1] = {plus:.3e}, Pr[e|-1] = {minus:.6}, P(0,1) = {s1:.5}, P(0,2) = {s2:.5}"))
}

/// Per-round joint law of (syndrome, logical flip) from the three physical
/// qubits: a trivial syndrome means zero or three flips, a logical error
/// survives correction when two or three qubits flipped.
fn round_law(p: f64) -> [[f64; 2]; 2] {
    let mut law = [[0.0; 2]; 2];
    for pattern in 0u32..8 {
        let w = pattern.count_ones() as i32;
        let pr = p.powi(w) * (1.0 - p).powi(3 - w);
        let trivial = usize::from(w == 0 || w == 3);
        let logical = usize::from(w >= 2);
        law[trivial][logical] += pr;
    }
    law
}

fn likelihood_enumeration() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut histories = 0usize;
    for p in [0.05, 0.069, 0.2, 0.4] {
        let law = round_law(p);
        let probs = CondErrorProbs::from_flip_prob(p).unwrap();
        for n in 0..=8u32 {
            for outcomes in 0u32..(1 << n) {
                // Bit r set means round r reported +1.
                let mut total = 0.0;
                let mut even = 0.0;
                for flips in 0u32..(1 << n) {
                    let mut pr = 1.0;
                    for r in 0..n {
                        let trivial = (outcomes >> r & 1) as usize;
                        let logical = (flips >> r & 1) as usize;
                        pr *= law[trivial][logical];
                    }
                    total += pr;
                    if flips.count_ones() % 2 == 0 {
                        even += pr;
                    }
                }
                let plus = outcomes.count_ones() as u64;
                let h = SyndromeHistory::new(plus, n as u64 - plus);
                worst = worst.max((success_prob(&h, &probs) - even / total).abs());
                histories += 1;
            }
        }
    }
    verdict(worst <= 1e-12, format!("{histories} ordered histories, max |closed form - enumeration| = {worst:.2e}"))
}

fn batch_optimality() -> Verdict {
    let r = verify_batch_optimality(2024, 1000, 5, 8, (0.01, 0.45), 1e-12);
    verdict(
        r.hindsight_passed(),
        format!(
            "FQF attains the permutation maximum in {}/{} instances, worst shortfall {:.3e} \
             (exact expectation over future syndromes: FQF optimal in {}/{}, worst shortfall {:.1e})",
            r.hindsight_matches, r.instances, r.worst_hindsight_gap, r.expected_matches, r.instances, r.worst_expected_gap
        ),
    )
}

fn interchange() -> Verdict {
    let ps: Vec<f64> = (0..25).map(|i| 0.01 + 0.02 * i as f64).collect();
    let r = sweep_interchange(&ps, 12).unwrap();
    verdict(
        r.passed(1e-12),
        format!(
            "{} cases, {} non-positive, min gap {:.3e}, max |raw - factored| {:.2e}",
            r.cases, r.non_positive, r.min_gap, r.max_abs_diff
        ),
    )
}

fn monte_carlo_consistency() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for policy in PolicyKind::ALL {
        let mut cfg = SimConfig::stream(90.0, 100.0, policy, 77);
        cfg.horizon = Horizon::Departures(210_000);
        cfg.warmup = 10_000;
        let m = run(&cfg).unwrap();
        let n = m.fidelity_samples.len() as f64;
        let f = m.mean_fidelity();
        let sigma = (f * (1.0 - f) / n).sqrt();
        let diff = m.mean_realized() - f;
        ok &= diff.abs() <= 3.0 * sigma;
        parts.push(format!("{policy}: {:+.2} sigma", diff / sigma));
    }
    verdict(ok, format!("200000 departures per policy; realized minus predicted: {}", parts.join(", ")))
}

fn cdf_steps_and_ordering() -> Verdict {
    let spec = ExperimentSpec::fig2();
    let r = run_fig2(&spec).unwrap();
    let missing: Vec<String> =
        r.anchors.iter().filter(|a| !a.found).map(|a| format!("{}@(0,{})", a.policy, a.minus_rounds)).collect();
    let est = |p: PolicyKind| r.table.row(p, |_| true).unwrap().estimate();
    let (fqf, yqf, oqf) = (est(PolicyKind::Fqf), est(PolicyKind::Yqf), est(PolicyKind::Oqf));
    let ordered = fqf.mean >= yqf.mean && yqf.mean >= oqf.mean;
    let separated = fqf.above(&oqf);
    let weakest = r.anchors.iter().map(|a| a.best_mass).fold(f64::INFINITY, f64::min);
    verdict(
        missing.is_empty() && ordered && separated,
        format!(
            "{} reps; steps missing: {:?} (weakest step mass {weakest:.4}); FQF {:.5}±{:.5}, YQF {:.5}±{:.5}, OQF {:.5}±{:.5}",
            spec.replications, missing, fqf.mean, fqf.ci95, yqf.mean, yqf.ci95, oqf.mean, oqf.ci95
        ),
    )
}

fn fqf_yqf(t: &Table, b: usize, lambda_e: f64, load: Option<f64>) -> fqf_sim::stats::Estimate {
    t.gap(|g| {
        g.minuend == "fqf"
            && g.subtrahend == "yqf"
            && g.batch_size == b
            && g.lambda_e == lambda_e
            && load.is_none_or(|l| g.load.is_some_and(|x| (x - l).abs() < 1e-9))
    })
    .unwrap_or_else(|| panic!("no gap row for b={b} lambda_e={lambda_e} load={load:?}"))
    .estimate()
}

fn batch_trends() -> Verdict {
    let mut spec = ExperimentSpec::fig1();
    spec.batch_sizes = vec![2, 4, 6, 8, 10];
    let t = run_fig1(&spec).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for &le in &spec.lambda_es {
        let gaps: Vec<_> = spec.batch_sizes.iter().map(|&b| fqf_yqf(&t, b, le, None)).collect();
        let positive = spec.batch_sizes.iter().zip(&gaps).filter(|(&b, _)| b >= 4).all(|(_, g)| g.positive());
        let monotone = gaps.windows(2).all(|w| w[1].mean >= w[0].mean);
        ok &= positive && monotone;
        let shown: Vec<String> = gaps.iter().map(|g| format!("{:.5}±{:.5}", g.mean, g.ci95)).collect();
        parts.push(format!("lambda_e={le}: [{}]", shown.join(", ")));
    }
    let lo = fqf_yqf(&t, 10, spec.lambda_es[0], None);
    let hi = fqf_yqf(&t, 10, spec.lambda_es[1], None);
    ok &= hi.mean < lo.mean;
    verdict(ok, format!("{} reps; FQF-YQF gap by b in {{2,4,6,8,10}}: {}", spec.replications, parts.join("; ")))
}

fn load_trends() -> Verdict {
    let mut spec = ExperimentSpec::fig3();
    spec.loads = vec![0.5, 1.1, 1.3];
    spec.replications = 20;
    spec.base.horizon = Horizon::Departures(30_000);
    spec.base.warmup = 3_000;
    let t = run_fig3(&spec).unwrap();
    let low = fqf_yqf(&t, 4, 100.0, Some(0.5));
    let high = fqf_yqf(&t, 4, 100.0, Some(1.3));
    let b4 = fqf_yqf(&t, 4, 100.0, Some(1.1));
    let b1 = fqf_yqf(&t, 1, 25.0, Some(1.1));
    verdict(
        high.above(&low) && b4.mean > b1.mean,
        format!(
            "{} reps; b=4 gap at rho 0.5 {:.5}±{:.5}, at 1.3 {:.5}±{:.5}; at rho 1.1 b=4 {:.5}±{:.5} vs b=1 {:.5}±{:.5}",
            spec.replications, low.mean, low.ci95, high.mean, high.ci95, b4.mean, b4.ci95, b1.mean, b1.ci95
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("numeric anchors", anchors),
        ("likelihood vs parity enumeration", likelihood_enumeration),
        ("FQF batch optimality by enumeration", batch_optimality),
        ("interchange inequality", interchange),
        ("Monte Carlo self-consistency", monte_carlo_consistency),
        ("stream CDF steps and policy ordering", cdf_steps_and_ordering),
        ("batch size and EPR rate trends", batch_trends),
        ("load and batching trends", load_trends),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let status = if v.passed { "PASS" } else { "FAIL" };
        println!("criterion {} {status} {name} ({:.1}s): {}", i + 1, start.elapsed().as_secs_f64(), v.detail);
        failed += usize::from(!v.passed);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
