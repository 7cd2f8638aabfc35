use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use fqf_sim::experiments::output::{ensure_dir, write_csv, write_csv_with_header, write_results, Manifest};
use fqf_sim::experiments::plot::{line_chart, Series};
use fqf_sim::experiments::{run_fig1, run_fig2, run_fig3, ExperimentSpec, ScaledConfig, Table};
use fqf_sim::oracle::{sweep_interchange, verify_batch_optimality};
use fqf_sim::sim::TieBreak;
use fqf_sim::{run, BufferCap, Horizon, NoiseParams, PolicyKind, Scenario, SimConfig};

#[derive(Parser)]
#[command(name = "fqf-sim", version, about = "Syndrome-aware teleportation scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Batch fidelity against batch size for two EPR rates.
    Fig1(FigArgs),
    /// Fidelity CDF of a single-request stream.
    Fig2(FigArgs),
    /// Fidelity against load for batched arrivals into a finite buffer.
    Fig3(FigArgs),
    /// One simulation from a free-form configuration.
    Run(RunArgs),
    /// Exhaustive checks of FQF batch optimality and the interchange inequality.
    VerifyTheorem(VerifyArgs),
}

/// Settings shared by every simulation command. A config file given with
/// `--config` takes precedence over these flags.
#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Settings {
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda_r: Option<f64>,
    #[arg(long)]
    lambda_e: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Buffer capacity in qubits, or `inf`.
    #[arg(long)]
    #[serde(default, deserialize_with = "number_or_text")]
    buffer: Option<String>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    /// Departures to simulate, or seconds with an `s` suffix (`2.5s`).
    #[arg(long)]
    #[serde(default, deserialize_with = "number_or_text")]
    horizon: Option<String>,
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// single_batch, stream or batched_stream (`run` only).
    #[arg(long)]
    scenario: Option<String>,
    /// Comma-separated batch sizes (fig1).
    #[arg(long, value_delimiter = ',')]
    batch_sizes: Option<Vec<usize>>,
    /// Comma-separated EPR rates (fig1).
    #[arg(long, value_delimiter = ',')]
    lambda_es: Option<Vec<f64>>,
    /// Comma-separated loads (fig3).
    #[arg(long, value_delimiter = ',')]
    loads: Option<Vec<f64>>,
    /// Comma-separated policy names.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    /// Score pushed-out requests as fidelity 0.
    #[arg(long)]
    drops_as_zero: Option<bool>,
}

impl Settings {
    fn overlay(self, file: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: file.$f.or(self.$f)),* } };
        }
        pick!(
            tau, gamma, lambda_r, lambda_e, batch_size, buffer, policy, seed, replications, horizon, warmup, out,
            scenario, batch_sizes, lambda_es, loads, policies, drops_as_zero
        )
    }

    fn resolve(self, config: Option<&Path>) -> Result<Settings> {
        let Some(path) = config else { return Ok(self) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: Settings = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(self.overlay(file))
    }

    fn apply_noise(&self, noise: &mut NoiseParams) {
        if let Some(t) = self.tau {
            noise.tau = t;
        }
        if let Some(g) = self.gamma {
            noise.gamma = g;
        }
    }

    /// Overrides on a base config, leaving scenario-specific axes alone.
    fn apply_base(&self, cfg: &mut SimConfig) -> Result<()> {
        self.apply_noise(&mut cfg.noise);
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(h) = &self.horizon {
            cfg.horizon = parse_horizon(h)?;
        }
        if let Some(w) = self.warmup {
            cfg.warmup = w;
        }
        Ok(())
    }

    fn policy_list(&self) -> Result<Option<Vec<PolicyKind>>> {
        let names = match (&self.policies, &self.policy) {
            (Some(list), _) => list.clone(),
            (None, Some(one)) => vec![one.clone()],
            (None, None) => return Ok(None),
        };
        Ok(Some(names.iter().map(|n| n.parse()).collect::<Result<_, _>>()?))
    }
}

#[derive(Args)]
struct FigArgs {
    #[command(flatten)]
    settings: Settings,
    /// TOML file whose keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write an SVG plot.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    settings: Settings,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value_t = 5)]
    max_k: usize,
    #[arg(long, default_value_t = 8)]
    max_rounds: u64,
    #[arg(long, default_value_t = 0.01)]
    p_min: f64,
    #[arg(long, default_value_t = 0.45)]
    p_max: f64,
    /// Largest syndrome count in the interchange grid.
    #[arg(long, default_value_t = 12)]
    max_count: u64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn number_or_text<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(u64),
        Text(String),
    }
    Ok(Option::<Raw>::deserialize(d)?.map(|r| match r {
        Raw::Int(n) => n.to_string(),
        Raw::Text(s) => s,
    }))
}

fn parse_horizon(s: &str) -> Result<Horizon> {
    let s = s.trim();
    if let Some(secs) = s.strip_suffix('s') {
        let t: f64 = secs.parse().with_context(|| format!("bad horizon {s:?}"))?;
        Ok(Horizon::Seconds(t))
    } else {
        Ok(Horizon::Departures(s.parse().with_context(|| format!("bad horizon {s:?}"))?))
    }
}

fn parse_buffer(s: &str) -> Result<BufferCap> {
    match s.trim() {
        "inf" | "infinite" => Ok(BufferCap::Infinite),
        n => Ok(BufferCap::Finite(n.parse().with_context(|| format!("bad buffer {s:?}"))?)),
    }
}

fn parse_scenario(s: &str) -> Result<Scenario> {
    match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "single_batch" | "batch" => Ok(Scenario::SingleBatch),
        "stream" => Ok(Scenario::Stream),
        "batched_stream" => Ok(Scenario::BatchedStream),
        other => bail!("unknown scenario {other:?}"),
    }
}

fn fig_spec(which: &str, s: &Settings) -> Result<ExperimentSpec> {
    let mut spec = match which {
        "fig1" => ExperimentSpec::fig1(),
        "fig2" => ExperimentSpec::fig2(),
        _ => ExperimentSpec::fig3(),
    };
    s.apply_base(&mut spec.base)?;
    if let Some(r) = s.replications {
        spec.replications = r;
    }
    if let Some(p) = s.policy_list()? {
        spec.policies = p;
    }
    spec.drops_as_zero = s.drops_as_zero.unwrap_or(false);
    spec.out = Some(s.out.clone().unwrap_or_else(|| PathBuf::from("results").join(which)));
    match which {
        "fig1" => {
            if s.lambda_r.is_some() || s.buffer.is_some() || s.loads.is_some() {
                bail!("fig1 takes no arrival rate, buffer or load: a single batch arrives at t = 0");
            }
            if let Some(b) = s.batch_size {
                spec.batch_sizes = vec![b];
            }
            if let Some(v) = &s.batch_sizes {
                spec.batch_sizes = v.clone();
            }
            if let Some(l) = s.lambda_e {
                spec.lambda_es = vec![l];
            }
            if let Some(v) = &s.lambda_es {
                spec.lambda_es = v.clone();
            }
        }
        "fig2" => {
            if let Some(l) = s.lambda_r {
                spec.base.lambda_r = l;
            }
            if let Some(l) = s.lambda_e {
                spec.base.lambda_e = l;
            }
            if let Some(b) = &s.buffer {
                spec.base.buffer = parse_buffer(b)?;
            }
            if s.batch_size.is_some_and(|b| b != 1) {
                bail!("fig2 is a single-request stream; batch size must be 1");
            }
        }
        _ => {
            if s.lambda_r.is_some() {
                bail!("fig3 derives the arrival rate from --loads");
            }
            if let Some(l) = &s.loads {
                spec.loads = l.clone();
            }
            if s.lambda_e.is_some() || s.batch_size.is_some() || s.buffer.is_some() {
                let d = spec.scaled[0];
                let buffer = match s.buffer.as_deref().map(parse_buffer).transpose()? {
                    Some(BufferCap::Finite(n)) => n,
                    Some(BufferCap::Infinite) => bail!("fig3 needs a finite buffer"),
                    None => d.buffer,
                };
                spec.scaled = vec![ScaledConfig {
                    lambda_e: s.lambda_e.unwrap_or(d.lambda_e),
                    batch_size: s.batch_size.unwrap_or(d.batch_size),
                    buffer,
                }];
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn print_table(t: &Table) {
    println!("{:>4} {:>8} {:>8} {:>6} {:>6} {:>10} {:>10} {:>8}", "b", "lambda_e", "load", "buf", "policy", "mean", "ci95", "drops");
    for r in &t.rows {
        let load = r.load.map_or("-".into(), |l| format!("{l:.2}"));
        println!(
            "{:>4} {:>8} {:>8} {:>6} {:>6} {:>10.6} {:>10.6} {:>8.4}",
            r.batch_size, r.lambda_e, load, r.buffer, r.policy, r.mean, r.ci95, r.drop_rate
        );
    }
    for g in &t.gaps {
        let load = g.load.map_or("-".into(), |l| format!("{l:.2}"));
        println!(
            "gap {}-{} b={} lambda_e={} load={}: {:+.6} ± {:.6}",
            g.minuend, g.subtrahend, g.batch_size, g.lambda_e, load, g.mean, g.ci95
        );
    }
}

fn fig(which: &str, args: FigArgs) -> Result<()> {
    let settings = args.settings.resolve(args.config.as_deref())?;
    let spec = fig_spec(which, &settings)?;
    let dir = spec.out.clone().expect("set by fig_spec");
    ensure_dir(&dir)?;
    let mut manifest = Manifest::new(&spec);
    let table = match which {
        "fig1" => run_fig1(&spec)?,
        "fig3" => run_fig3(&spec)?,
        _ => {
            let r = run_fig2(&spec)?;
            let mut grid = Vec::new();
            for (p, cdf) in &r.cdfs {
                for (x, f) in cdf.on_grid(0.5, 1.0, 2001) {
                    grid.push(CdfRow { policy: p.name(), fidelity: x, cdf: f });
                }
            }
            write_csv(&dir.join("cdf.csv"), &grid)?;
            write_csv_with_header(&dir.join("steps.csv"), &["policy", "bin_lo", "bin_hi", "mass"], &r.steps)?;
            write_csv(&dir.join("anchors.csv"), &r.anchors)?;
            manifest = manifest
                .with_file("cdf.csv", &["policy", "fidelity", "cdf"])
                .with_file("steps.csv", &["policy", "bin_lo", "bin_hi", "mass"])
                .with_file("anchors.csv", &["policy", "minus_rounds", "target", "best_mass", "found"]);
            for a in &r.anchors {
                println!(
                    "{} step near Pr[e'|(0,{})] = {:.4}: {} (mass {:.4})",
                    a.policy,
                    a.minus_rounds,
                    a.target,
                    if a.found { "found" } else { "absent" },
                    a.best_mass
                );
            }
            if args.svg {
                let series: Vec<Series> = r
                    .cdfs
                    .iter()
                    .map(|(p, cdf)| Series { label: p.name().into(), points: cdf.on_grid(0.5, 1.0, 1001) })
                    .collect();
                write_svg(&dir, &mut manifest, line_chart("Fidelity CDF", "Pr[no error]", "CDF", &series))?;
            }
            r.table
        }
    };
    write_results(&dir, &table.rows, &table.gaps)?;
    if args.svg && which != "fig2" {
        let series = chart_series(which, &table);
        let x = if which == "fig1" { "batch size" } else { "load" };
        write_svg(&dir, &mut manifest, line_chart("Mean fidelity", x, "Pr[no error]", &series))?;
    }
    manifest.write(&dir)?;
    print_table(&table);
    println!("wrote {}", dir.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct CdfRow {
    policy: &'static str,
    fidelity: f64,
    cdf: f64,
}

fn write_svg(dir: &Path, manifest: &mut Manifest, svg: String) -> Result<()> {
    fqf_sim::experiments::output::write_text(&dir.join("plot.svg"), &svg)?;
    manifest.files.push(fqf_sim::experiments::output::FileEntry { file: "plot.svg".into(), columns: Vec::new() });
    Ok(())
}

fn chart_series(which: &str, t: &Table) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for r in &t.rows {
        let (label, x) = if which == "fig1" {
            (format!("{} lambda_e={}", r.policy, r.lambda_e), r.batch_size as f64)
        } else {
            (format!("{} b={}", r.policy, r.batch_size), r.load.unwrap_or(0.0))
        };
        match out.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((x, r.mean)),
            None => out.push(Series { label, points: vec![(x, r.mean)] }),
        }
    }
    out
}

fn run_config(s: &Settings) -> Result<SimConfig> {
    let scenario = s.scenario.as_deref().map(parse_scenario).transpose()?.unwrap_or(Scenario::Stream);
    let policy: PolicyKind = s.policy.as_deref().unwrap_or("fqf").parse()?;
    let seed = s.seed.unwrap_or(1);
    let lambda_e = s.lambda_e.unwrap_or(100.0);
    let b = s.batch_size.unwrap_or(1);
    let mut cfg = match scenario {
        Scenario::SingleBatch => SimConfig::single_batch(b, lambda_e, policy, seed),
        Scenario::Stream => SimConfig { batch_size: b, ..SimConfig::stream(s.lambda_r.unwrap_or(90.0), lambda_e, policy, seed) },
        Scenario::BatchedStream => SimConfig::batched_stream(s.lambda_r.unwrap_or(20.0), lambda_e, b, 5 * b, policy, seed),
    };
    if scenario != Scenario::Stream {
        cfg.tie_break = TieBreak::Shuffled;
    }
    s.apply_base(&mut cfg)?;
    if let Some(buf) = &s.buffer {
        cfg.buffer = parse_buffer(buf)?;
    }
    cfg.trace = s.out.is_some();
    cfg.validate()?;
    Ok(cfg)
}

#[derive(serde::Serialize)]
struct ServiceRow {
    qubit: u64,
    arrival_time: f64,
    time: f64,
    n_plus: u64,
    n_minus: u64,
    final_round: &'static str,
    fidelity: f64,
    no_error: bool,
}

fn run_one(args: RunArgs) -> Result<()> {
    let settings = args.settings.resolve(args.config.as_deref())?;
    let cfg = run_config(&settings)?;
    let m = run(&cfg)?;
    let summary = serde_json::json!({
        "config": cfg,
        "departures": m.departures,
        "scored": m.fidelity_samples.len(),
        "mean_fidelity": m.mean_fidelity(),
        "mean_realized": m.mean_realized(),
        "mean_fidelity_with_drops": m.mean_fidelity_with_drops(),
        "arrivals": m.arrivals_count,
        "pushouts": m.pushout_count,
        "drop_rate": m.drop_rate(),
        "end_time": m.end_time,
        "time_avg_occupancy": m.time_avg_occupancy,
        "max_occupancy": m.max_occupancy,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let Some(path) = &settings.out {
        let rows: Vec<ServiceRow> = m
            .services
            .iter()
            .map(|s| ServiceRow {
                qubit: s.qubit.0,
                arrival_time: s.arrival_time,
                time: s.time,
                n_plus: s.history.n_plus,
                n_minus: s.history.n_minus,
                final_round: match s.final_round {
                    None => "",
                    Some(fqf_sim::Outcome::Plus) => "+",
                    Some(fqf_sim::Outcome::Minus) => "-",
                },
                fidelity: s.fidelity,
                no_error: s.no_error,
            })
            .collect();
        write_csv(path, &rows)?;
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<bool> {
    if !(0.0 < a.p_min && a.p_min < a.p_max && a.p_max < 0.5) {
        bail!("need 0 < p_min < p_max < 0.5");
    }
    if a.max_k == 0 {
        bail!("max-k must be at least 1");
    }
    let t = verify_batch_optimality(a.seed, a.instances, a.max_k, a.max_rounds, (a.p_min, a.p_max), a.tol);
    let ps: Vec<f64> = (0..25).map(|i| 0.01 + 0.02 * i as f64).collect();
    let x = sweep_interchange(&ps, a.max_count)?;
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!(
        "{} FQF equals the hindsight maximum over all orders: {}/{} instances, worst gap {:.3e}",
        verdict(t.hindsight_passed()),
        t.hindsight_matches,
        t.instances,
        t.worst_hindsight_gap
    );
    println!(
        "{} FQF equals the optimal expected total: {}/{} instances, worst gap {:.3e}",
        verdict(t.expected_passed()),
        t.expected_matches,
        t.instances,
        t.worst_expected_gap
    );
    println!(
        "{} interchange gap positive and equal to its factored form: {} cases, {} non-positive, min gap {:.3e}, max |raw - factored| {:.3e}",
        verdict(x.passed(a.tol)),
        x.cases,
        x.non_positive,
        x.min_gap,
        x.max_abs_diff
    );
    Ok(t.hindsight_passed() && t.expected_passed() && x.passed(a.tol))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fig1(a) => fig("fig1", a).map(|_| true),
        Command::Fig2(a) => fig("fig2", a).map(|_| true),
        Command::Fig3(a) => fig("fig3", a).map(|_| true),
        Command::Run(a) => run_one(a).map(|_| true),
        Command::VerifyTheorem(a) => verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
