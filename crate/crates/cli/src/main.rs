//! `pm-bandits`: run experiments, query the oracle, estimate gap exponents,
//! benchmark anytime policies and render SVG figures.

mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pm_bandits::config::ExperimentConfig;
use pm_bandits::distortion::Distortion;
use pm_bandits::envs::ArmModel;
use pm_bandits::harness::{self, BenchSpec, Experiment};
use pm_bandits::oracle::{beta_bar_estimate, beta_bar_reference, gap_report, optimal_mixture};
use pm_bandits::simplex::GridSpec;
use svg::{Chart, Scale, Series};

#[derive(Parser)]
#[command(
    name = "pm-bandits",
    version,
    about = "Preference-metric mixture bandits"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output path stem; `.csv` and `.json` are appended.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Etc,
    Ucb,
}

#[derive(Subcommand)]
enum Command {
    /// Run every policy at every horizon and write CSV plus JSON sidecar.
    Run(Common),
    /// Like `run`, but requires at least two horizons.
    Sweep(Common),
    /// Print the optimal mixture and the top grid levels as JSON.
    Oracle {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = GridArg::Etc)]
        grid: GridArg,
    },
    /// Estimate `log δ13(ε) / log ε` along decreasing resolutions.
    Beta {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.03, 0.01, 0.003, 0.001])]
        eps: Vec<f64>,
        /// CSV destination; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wall-clock time for each policy to reach regret thresholds.
    Bench {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e-2, 1e-3, 1e-4])]
        thresholds: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 10_000_000)]
        cap: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG figures.
    #[command(subcommand)]
    Plot(PlotCmd),
}

#[derive(Subcommand)]
enum PlotCmd {
    /// Mean regret against horizon, one series per policy.
    Regret {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Distorted complement CDFs `h(1 − Q(x))` under inverted-S distortions.
    Distort {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 2.0])]
        betas: Vec<f64>,
    },
    /// Gap-exponent ratios against resolution, from `beta` CSVs.
    Beta {
        #[arg(long, required = true)]
        csv: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    pm_bandits::Error::Config(msg.into()).into()
}

fn load(path: &Path) -> Result<(ExperimentConfig, String)> {
    Ok(ExperimentConfig::load(path)?)
}

fn default_stem(config: &Path) -> PathBuf {
    let name = config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    PathBuf::from("pm-bandits-out").join(name)
}

fn cmd_run(c: Common, require_sweep: bool) -> Result<()> {
    let (mut cfg, raw) = load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.trials {
        cfg.trials = n;
    }
    if let Some(o) = c.out {
        cfg.output = Some(o);
    }
    cfg.validate()?;
    let exp = Experiment::from_config(&cfg)?;
    if require_sweep && exp.horizons.len() < 2 {
        return Err(config_error("a sweep needs at least two horizons"));
    }
    let (curve, traces) = harness::run_experiment(&exp)?;
    let stem = cfg
        .output
        .clone()
        .unwrap_or_else(|| default_stem(&c.config));
    // The sidecar echoes the effective config; the hash covers the file as read.
    let files = harness::persist(&stem, &cfg, &raw, &curve, &traces)?;
    println!(
        "{:<16} {:>10} {:>14} {:>12}",
        "policy", "T", "mean regret", "se"
    );
    for p in &curve.points {
        println!(
            "{:<16} {:>10} {:>14.6e} {:>12.3e}",
            p.policy, p.horizon, p.mean, p.se
        );
    }
    for n in &curve.notes {
        eprintln!("note: {n}");
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_oracle(config: &Path, eps: f64, grid: GridArg) -> Result<()> {
    let (cfg, _) = load(config)?;
    let inst = cfg.build_instance()?;
    let d = cfg.build_distortion()?;
    let spec = match grid {
        GridArg::Etc => GridSpec::etc(inst.k(), eps),
        GridArg::Ucb => GridSpec::ucb(inst.k(), eps),
    };
    let (alpha, v) = optimal_mixture(&inst, &d)?;
    let report = gap_report(&inst, &d, &spec)?;
    let out = serde_json::json!({
        "distortion": d.name(),
        "eps": eps,
        "alpha_star": alpha,
        "v_star": v,
        "solitary": inst.solitary_values(&d)?,
        "report": report,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cmd_beta(config: &Path, eps: &[f64], out: Option<PathBuf>) -> Result<()> {
    let (cfg, _) = load(config)?;
    let inst = cfg.build_instance()?;
    let d = cfg.build_distortion()?;
    let points = beta_bar_estimate(&inst, &d, eps).map_err(|e| match e {
        pm_bandits::Error::Domain(m) => config_error(m),
        other => other.into(),
    })?;
    let mut w = match &out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            csv::Writer::from_writer(Box::new(std::fs::File::create(p)?) as Box<dyn std::io::Write>)
        }
        None => csv::Writer::from_writer(Box::new(std::io::stdout()) as Box<dyn std::io::Write>),
    };
    w.write_record(["distortion", "eps", "delta13", "ratio"])?;
    for p in &points {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([d.name(), p.eps.to_string(), opt(p.delta13), opt(p.ratio)])?;
        if let Some(msg) = &p.warning {
            eprintln!("warning: {msg}");
        }
    }
    w.flush()?;
    if let Some(p) = out {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_bench(
    config: &Path,
    thresholds: Vec<f64>,
    trials: usize,
    cap: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    let (cfg, _) = load(config)?;
    let inst = cfg.build_instance()?;
    let d = cfg.build_distortion()?;
    if cfg.policies.is_empty() {
        return Err(config_error("policies must not be empty"));
    }
    let spec = BenchSpec {
        thresholds,
        trials,
        seed: cfg.seed,
        cap,
        ..BenchSpec::default()
    };
    let rows = harness::bench_time(&inst, &d, &cfg.policies, &spec)?;
    println!(
        "{:>10} {:<16} {:>12} {:>10}",
        "threshold", "policy", "seconds", "T"
    );
    for r in &rows {
        let secs = r
            .seconds
            .map_or("unreachable".to_string(), |s| format!("{s:.4}"));
        let t = r.horizon.map_or("-".to_string(), |t| t.to_string());
        println!(
            "{:>10.1e} {:<16} {:>12} {:>10}",
            r.threshold, r.policy, secs, t
        );
    }
    if let Some(p) = out {
        harness::write_bench_csv(&p, &rows)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn write_svg(path: &Path, chart: &Chart) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, chart.render()).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn plot_regret(csv: &Path, out: &Path) -> Result<()> {
    let rows = harness::read_csv(csv)?;
    if rows.is_empty() {
        return Err(config_error(format!("{}: no rows", csv.display())));
    }
    let summary = harness::summarize_rows(&rows);
    let mut names: Vec<String> = Vec::new();
    for (p, ..) in &summary {
        if !names.contains(p) {
            names.push(p.clone());
        }
    }
    let series = names
        .iter()
        .map(|n| {
            let pts: Vec<_> = summary.iter().filter(|s| &s.0 == n).collect();
            Series {
                name: n.clone(),
                points: pts.iter().map(|s| (s.1 as f64, s.2)).collect(),
                errors: Some(pts.iter().map(|s| s.3).collect()),
                dashed: false,
            }
        })
        .collect();
    let chart = Chart {
        title: "Mean regret against horizon".into(),
        x_label: "horizon T".into(),
        y_label: "regret".into(),
        x_scale: Scale::Log10,
        series,
        annotations: Vec::new(),
    };
    write_svg(out, &chart)
}

fn plot_distort(out: &Path, betas: &[f64]) -> Result<()> {
    let normal = ArmModel::Gaussian {
        mu: 0.0,
        sigma: 1.0,
    }
    .cdf_fn();
    let expo = ArmModel::ShiftedExponential {
        c: 0.0,
        lambda: 1.0,
    }
    .cdf_fn();
    let lognormal = {
        let n = normal.clone();
        move |x: f64| if x <= 0.0 { 0.0 } else { n(x.ln()) }
    };
    let curves: [(&str, &dyn Fn(f64) -> f64); 3] = [
        ("gaussian", &*normal),
        ("exponential", &*expo),
        ("lognormal", &lognormal),
    ];
    let xs: Vec<f64> = (0..=400).map(|i| -3.0 + 9.0 * i as f64 / 400.0).collect();
    let mut series = Vec::new();
    for &b in betas {
        let d = Distortion::inverted_s(b)?;
        for (name, q) in &curves {
            series.push(Series {
                name: format!("{name}, beta={b}"),
                points: xs.iter().map(|&x| (x, d.h(1.0 - q(x)))).collect(),
                errors: None,
                dashed: b != betas[0],
            });
        }
    }
    let chart = Chart {
        title: "Inverted-S distorted complement CDFs".into(),
        x_label: "x".into(),
        y_label: "h(1 - Q(x))".into(),
        x_scale: Scale::Linear,
        series,
        annotations: Vec::new(),
    };
    write_svg(out, &chart)
}

fn plot_beta(csvs: &[PathBuf], out: &Path) -> Result<()> {
    let mut series: Vec<Series> = Vec::new();
    let mut annotations = Vec::new();
    for path in csvs {
        let mut r = csv::Reader::from_path(path)
            .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let headers = r
            .headers()
            .map_err(|e| config_error(e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["distortion", "eps", "delta13", "ratio"] {
            return Err(config_error(format!("{}: not a beta CSV", path.display())));
        }
        for rec in r.records() {
            let rec = rec.map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            let name = rec[0].to_string();
            let eps: f64 = rec[1]
                .parse()
                .map_err(|_| config_error(format!("{}: bad eps", path.display())))?;
            if rec[3].is_empty() {
                continue;
            }
            let ratio: f64 = rec[3]
                .parse()
                .map_err(|_| config_error(format!("{}: bad ratio", path.display())))?;
            match series.iter_mut().find(|s| s.name == name) {
                Some(s) => s.points.push((eps, ratio)),
                None => series.push(Series::line(name, vec![(eps, ratio)])),
            }
        }
    }
    for s in &series {
        let Some(&(eps, last)) = s.points.iter().min_by(|a, b| a.0.total_cmp(&b.0)) else {
            continue;
        };
        let reference = reference_for(&s.name).map_or("n/a".to_string(), |(lo, hi)| {
            if lo == hi {
                format!("{lo}")
            } else {
                format!("[{lo}, {hi}]")
            }
        });
        annotations.push(format!(
            "{}: {last:.3} at eps={eps} (ref {reference})",
            s.name
        ));
    }
    let chart = Chart {
        title: "Gap exponent estimates".into(),
        x_label: "eps".into(),
        y_label: "log d13 / log eps".into(),
        x_scale: Scale::Log10,
        series,
        annotations,
    };
    write_svg(out, &chart)
}

/// Published range for a distortion printed by [`Distortion::name`].
fn reference_for(name: &str) -> Option<(f64, f64)> {
    let arg = |key: &str| -> Option<f64> {
        let start = name.find(key)? + key.len();
        name[start..].trim_end_matches(')').parse().ok()
    };
    let d = match name.split('(').next()? {
        "mean" => Distortion::mean(),
        "gini" => Distortion::gini(),
        "mean_median" => Distortion::mean_median(),
        "wang_rtd" => Distortion::wang_rtd(),
        "inter_es" => Distortion::inter_es(0.5).ok()?,
        "dual_power" => Distortion::dual_power(arg("s=")?).ok()?,
        "quadratic" => Distortion::quadratic(arg("s=")?).ok()?,
        "cvar" => Distortion::cvar(arg("c=")?).ok()?,
        "pht" => Distortion::pht(arg("s=")?).ok()?,
        _ => return None,
    };
    beta_bar_reference(&d)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Command::Run(c) => cmd_run(c, false),
        Command::Sweep(c) => cmd_run(c, true),
        Command::Oracle { config, eps, grid } => cmd_oracle(&config, eps, grid),
        Command::Beta { config, eps, out } => cmd_beta(&config, &eps, out),
        Command::Bench {
            config,
            thresholds,
            trials,
            cap,
            out,
        } => cmd_bench(&config, thresholds, trials, cap, out),
        Command::Plot(PlotCmd::Regret { csv, out }) => plot_regret(&csv, &out),
        Command::Plot(PlotCmd::Distort { out, betas }) => plot_distort(&out, &betas),
        Command::Plot(PlotCmd::Beta { csv, out }) => plot_beta(&csv, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let config = e.chain().any(|c| {
                c.downcast_ref::<pm_bandits::Error>()
                    .is_some_and(|e| e.is_config())
            });
            eprintln!("error: {e:#}");
            if config {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
