//! Seeded trial execution, regret against the oracle mixture, horizon
//! sweeps, wall-clock benchmarks and CSV/JSON persistence.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{content_hash, ExperimentConfig};
use crate::distortion::Distortion;
use crate::envs::{trial_rng, BanditInstance, InstanceEvaluator, POLICY_STREAM, REWARD_STREAM};
use crate::error::{config, domain, Error, Result};
use crate::oracle::optimal_mixture;
use crate::policies::{Algorithm, PhaseEvent, Policy, PolicyConfig};
use crate::simplex::MixtureWeights;

/// Environment variable capping trial concurrency.
pub const THREADS_ENV: &str = "PM_BANDITS_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub t: u64,
    pub arm: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub policy: String,
    pub horizon: u64,
    pub trial: u64,
    pub seed: u64,
    pub counts: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<Vec<Round>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<PhaseEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Random streams of one trial.
pub struct TrialRngs {
    pub reward: ChaCha8Rng,
    pub policy: ChaCha8Rng,
}

impl TrialRngs {
    pub fn new(seed: u64, trial: u64) -> Self {
        TrialRngs {
            reward: trial_rng(seed, trial, REWARD_STREAM),
            policy: trial_rng(seed, trial, POLICY_STREAM),
        }
    }
}

/// Plays `policy` until `Σ τ = until`.
pub fn advance(
    policy: &mut dyn Policy,
    inst: &BanditInstance,
    rngs: &mut TrialRngs,
    until: u64,
    mut rounds: Option<&mut Vec<Round>>,
) {
    let mut t: u64 = policy.counts().iter().sum();
    while t < until {
        let arm = policy.select(&mut rngs.policy);
        let reward = inst.arms()[arm].sample(&mut rngs.reward);
        policy.observe(arm, reward);
        t += 1;
        if let Some(r) = rounds.as_deref_mut() {
            r.push(Round { t, arm, reward });
        }
    }
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub instance: BanditInstance,
    pub distortion: Distortion,
    pub policies: Vec<PolicyConfig>,
    pub horizons: Vec<u64>,
    pub trials: usize,
    pub seed: u64,
    pub record_rounds: bool,
}

impl Experiment {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Experiment {
            instance: cfg.build_instance()?,
            distortion: cfg.build_distortion()?,
            policies: cfg.policies.clone(),
            horizons: cfg.horizons.clone(),
            trials: cfg.trials,
            seed: cfg.seed,
            record_rounds: cfg.record_rounds,
        })
    }

    /// One trial of `policy` at `horizon`, on substreams `(seed, trial)`.
    pub fn run_trial(&self, policy: &PolicyConfig, horizon: u64, trial: u64) -> Result<RunTrace> {
        let mut p = policy.build(&self.instance, &self.distortion, horizon)?;
        let mut rngs = TrialRngs::new(self.seed, trial);
        let mut rounds = self
            .record_rounds
            .then(|| Vec::with_capacity(horizon as usize));
        advance(
            p.as_mut(),
            &self.instance,
            &mut rngs,
            horizon,
            rounds.as_mut(),
        );
        Ok(RunTrace {
            policy: policy.label(),
            horizon,
            trial,
            seed: self.seed,
            counts: p.counts().to_vec(),
            rounds,
            events: p.events().to_vec(),
            notes: p.notes().to_vec(),
        })
    }
}

/// `V(α*) − V(τ/T)` with the optimum computed once.
pub struct RegretEvaluator {
    d: Distortion,
    eval: InstanceEvaluator,
    pub alpha_star: MixtureWeights,
    pub v_star: f64,
}

impl RegretEvaluator {
    pub fn new(inst: &BanditInstance, d: &Distortion) -> Result<Self> {
        let (alpha_star, v_star) = optimal_mixture(inst, d)?;
        Ok(RegretEvaluator {
            d: d.clone(),
            eval: inst.evaluator(),
            alpha_star,
            v_star,
        })
    }

    pub fn achieved(&self, counts: &[u64]) -> Result<f64> {
        let t: u64 = counts.iter().sum();
        if t == 0 {
            return Err(domain("no rounds played"));
        }
        let w: Vec<f64> = counts.iter().map(|&n| n as f64 / t as f64).collect();
        self.eval.value(&self.d, &w)
    }

    pub fn regret(&self, counts: &[u64]) -> Result<f64> {
        Ok(self.v_star - self.achieved(counts)?)
    }
}

pub fn evaluate_regret(trace: &RunTrace, inst: &BanditInstance, d: &Distortion) -> Result<f64> {
    RegretEvaluator::new(inst, d)?.regret(&trace.counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub policy: String,
    pub horizon: u64,
    pub mean: f64,
    pub se: f64,
    pub regrets: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
}

impl CurvePoint {
    fn from_trials(policy: String, horizon: u64, regrets: Vec<f64>, counts: Vec<Vec<u64>>) -> Self {
        let (mean, se) = mean_se(&regrets);
        CurvePoint {
            policy,
            horizon,
            mean,
            se,
            regrets,
            counts,
        }
    }
}

/// Mean and standard error `sd/√n` (sample deviation; 0 for one value).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    pub seed: u64,
    pub k: usize,
    pub v_star: f64,
    pub points: Vec<CurvePoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl RegretCurve {
    pub fn point(&self, policy: &str, horizon: u64) -> Option<&CurvePoint> {
        self.points
            .iter()
            .find(|p| p.policy == policy && p.horizon == horizon)
    }
}

/// Thread pool honoring [`THREADS_ENV`].
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| {
            config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))
        })?;
        if n == 0 {
            return Err(config(format!("{THREADS_ENV} must be positive")));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Numeric {
        message: e.to_string(),
        partial: f64::NAN,
    })
}

/// Every `(policy, horizon, trial)` of an experiment, traces included.
pub fn run_experiment(exp: &Experiment) -> Result<(RegretCurve, Vec<RunTrace>)> {
    if exp.policies.is_empty() {
        return Err(config("policies must not be empty"));
    }
    for p in &exp.policies {
        p.validate()?;
    }
    let ev = RegretEvaluator::new(&exp.instance, &exp.distortion)?;
    let mut tasks = Vec::new();
    for (pi, _) in exp.policies.iter().enumerate() {
        for &h in &exp.horizons {
            for trial in 0..exp.trials as u64 {
                tasks.push((pi, h, trial));
            }
        }
    }
    let pool = thread_pool()?;
    let results: Vec<(RunTrace, f64)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(pi, h, trial)| {
                let tr = exp.run_trial(&exp.policies[pi], h, trial)?;
                let r = ev.regret(&tr.counts)?;
                Ok((tr, r))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut points = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    for chunk in results.chunks(exp.trials) {
        let first = &chunk[0].0;
        for n in chunk.iter().flat_map(|(t, _)| &t.notes) {
            let line = format!("{} T={}: {n}", first.policy, first.horizon);
            if !notes.contains(&line) {
                notes.push(line);
            }
        }
        points.push(CurvePoint::from_trials(
            first.policy.clone(),
            first.horizon,
            chunk.iter().map(|x| x.1).collect(),
            chunk.iter().map(|x| x.0.counts.clone()).collect(),
        ));
    }
    let traces = results.into_iter().map(|x| x.0).collect();
    Ok((
        RegretCurve {
            seed: exp.seed,
            k: exp.instance.k(),
            v_star: ev.v_star,
            points,
            notes,
        },
        traces,
    ))
}

/// Regret per horizon per policy.
pub fn sweep(exp: &Experiment) -> Result<RegretCurve> {
    if exp.horizons.len() < 2 {
        return Err(config("a sweep needs at least two horizons"));
    }
    Ok(run_experiment(exp)?.0)
}

/// One CSV row: `policy,T,trial,regret,tau_1..tau_K,seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub policy: String,
    pub horizon: u64,
    pub trial: u64,
    pub regret: f64,
    pub counts: Vec<u64>,
    pub seed: u64,
}

pub fn write_csv(path: &Path, curve: &RegretCurve) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "policy".to_string(),
        "T".into(),
        "trial".into(),
        "regret".into(),
    ];
    header.extend((1..=curve.k).map(|i| format!("tau_{i}")));
    header.push("seed".into());
    w.write_record(&header)?;
    for p in &curve.points {
        for (trial, (r, c)) in p.regrets.iter().zip(&p.counts).enumerate() {
            let mut rec = vec![
                p.policy.clone(),
                p.horizon.to_string(),
                trial.to_string(),
                r.to_string(),
            ];
            rec.extend(c.iter().map(u64::to_string));
            rec.push(curve.seed.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let k = headers.iter().filter(|h| h.starts_with("tau_")).count();
    let expect_len = 5 + k;
    if headers.len() != expect_len
        || &headers[0] != "policy"
        || &headers[1] != "T"
        || &headers[3] != "regret"
        || &headers[expect_len - 1] != "seed"
    {
        return Err(config(format!(
            "{}: not a regret CSV (header {:?})",
            path.display(),
            headers
        )));
    }
    let bad =
        |line: usize, what: &str| config(format!("{}: line {line}: bad {what}", path.display()));
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != expect_len {
            return Err(bad(line, "field count"));
        }
        rows.push(CsvRow {
            policy: rec[0].to_string(),
            horizon: rec[1].parse().map_err(|_| bad(line, "T"))?,
            trial: rec[2].parse().map_err(|_| bad(line, "trial"))?,
            regret: rec[3].parse().map_err(|_| bad(line, "regret"))?,
            counts: (0..k)
                .map(|j| rec[4 + j].parse().map_err(|_| bad(line, "tau")))
                .collect::<Result<_>>()?,
            seed: rec[4 + k].parse().map_err(|_| bad(line, "seed"))?,
        });
    }
    Ok(rows)
}

/// Mean and standard error per `(policy, T)`, in first-appearance order.
pub fn summarize_rows(rows: &[CsvRow]) -> Vec<(String, u64, f64, f64)> {
    let mut keys: Vec<(String, u64)> = Vec::new();
    for r in rows {
        let key = (r.policy.clone(), r.horizon);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(p, h)| {
            let xs: Vec<f64> = rows
                .iter()
                .filter(|r| r.policy == p && r.horizon == h)
                .map(|r| r.regret)
                .collect();
            let (m, se) = mean_se(&xs);
            (p, h, m, se)
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    tool: &'static str,
    version: &'static str,
    config_hash: String,
    csv: String,
    rows: usize,
    v_star: f64,
    config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    notes: &'a [String],
    #[serde(skip_serializing_if = "Vec::is_empty")]
    phase_events: Vec<TrialEvents<'a>>,
}

#[derive(Debug, Serialize)]
struct TrialEvents<'a> {
    policy: &'a str,
    horizon: u64,
    trial: u64,
    events: &'a [PhaseEvent],
}

/// `<stem>.csv` and `<stem>.json`.
pub fn output_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let s = stem.as_os_str().to_string_lossy();
    (
        PathBuf::from(format!("{s}.csv")),
        PathBuf::from(format!("{s}.json")),
    )
}

/// Writes the CSV, the JSON sidecar and, when rounds were recorded, a
/// per-round CSV. Returns the written paths.
pub fn persist(
    stem: &Path,
    cfg: &ExperimentConfig,
    raw_config: &str,
    curve: &RegretCurve,
    traces: &[RunTrace],
) -> Result<Vec<PathBuf>> {
    let (csv_path, json_path) = output_paths(stem);
    write_csv(&csv_path, curve)?;
    let side = Sidecar {
        tool: "pm-bandits",
        version: env!("CARGO_PKG_VERSION"),
        config_hash: content_hash(raw_config.as_bytes()),
        csv: csv_path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        rows: curve.points.iter().map(|p| p.regrets.len()).sum(),
        v_star: curve.v_star,
        config: cfg,
        notes: &curve.notes,
        phase_events: traces
            .iter()
            .filter(|t| !t.events.is_empty())
            .map(|t| TrialEvents {
                policy: &t.policy,
                horizon: t.horizon,
                trial: t.trial,
                events: &t.events,
            })
            .collect(),
    };
    std::fs::write(&json_path, serde_json::to_string_pretty(&side)? + "\n")?;
    let mut out = vec![csv_path, json_path];
    if traces.iter().any(|t| t.rounds.is_some()) {
        let path = PathBuf::from(format!("{}.rounds.csv", stem.as_os_str().to_string_lossy()));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["policy", "T", "trial", "t", "arm", "reward"])?;
        for tr in traces {
            for r in tr.rounds.iter().flatten() {
                w.write_record([
                    tr.policy.clone(),
                    tr.horizon.to_string(),
                    tr.trial.to_string(),
                    r.t.to_string(),
                    (r.arm + 1).to_string(),
                    r.reward.to_string(),
                ])?;
            }
        }
        w.flush()?;
        out.push(path);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    /// Strictly decreasing regret thresholds.
    pub thresholds: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// First checkpoint; later ones double.
    pub start: u64,
    /// Largest horizon tried.
    pub cap: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            thresholds: vec![1e-2, 1e-3, 1e-4],
            trials: 10,
            seed: 0,
            start: 1_000,
            cap: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub threshold: f64,
    pub policy: String,
    /// Mean wall-clock per trial to reach the threshold; `None` when
    /// unreachable within the cap.
    pub seconds: Option<f64>,
    pub horizon: Option<u64>,
    pub regret: Option<f64>,
}

fn checkpoints(start: u64, cap: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut t = start.max(2);
    while t < cap {
        out.push(t);
        t = t.saturating_mul(2);
    }
    out.push(cap);
    out
}

fn is_anytime(a: Algorithm) -> bool {
    matches!(
        a,
        Algorithm::Uniform | Algorithm::Cirt | Algorithm::FixedAnytime
    )
}

/// Grows the horizon along doubling checkpoints until the mean regret over
/// `trials` falls below each threshold, recording wall-clock time. Anytime
/// policies continue one run per trial across checkpoints; horizon-aware
/// ones restart at each checkpoint. Trials run sequentially.
pub fn bench_time(
    inst: &BanditInstance,
    d: &Distortion,
    policies: &[PolicyConfig],
    spec: &BenchSpec,
) -> Result<Vec<BenchRow>> {
    if spec.thresholds.is_empty() || spec.thresholds.windows(2).any(|w| w[1] >= w[0]) {
        return Err(config(
            "thresholds must be non-empty and strictly decreasing",
        ));
    }
    if spec.trials < 1 || spec.cap < 2 {
        return Err(config(
            "bench needs at least one trial and a cap of at least 2",
        ));
    }
    let ev = RegretEvaluator::new(inst, d)?;
    let plan = checkpoints(spec.start, spec.cap);
    let mut rows = Vec::new();
    for pc in policies {
        pc.validate()?;
        let mut found: Vec<Option<(f64, u64, f64)>> = vec![None; spec.thresholds.len()];
        let anytime = is_anytime(pc.algorithm);
        let mut live: Vec<(Box<dyn Policy>, TrialRngs, f64)> = Vec::new();
        if anytime {
            for trial in 0..spec.trials as u64 {
                live.push((
                    pc.build(inst, d, spec.cap)?,
                    TrialRngs::new(spec.seed, trial),
                    0.0,
                ));
            }
        }
        for &t in &plan {
            let mut regrets = Vec::with_capacity(spec.trials);
            let mut secs = 0.0;
            if anytime {
                for (p, rngs, elapsed) in live.iter_mut() {
                    let clock = Instant::now();
                    advance(p.as_mut(), inst, rngs, t, None);
                    *elapsed += clock.elapsed().as_secs_f64();
                    secs += *elapsed;
                    regrets.push(ev.regret(p.counts())?);
                }
            } else {
                for trial in 0..spec.trials as u64 {
                    let clock = Instant::now();
                    let mut p = pc.build(inst, d, t)?;
                    let mut rngs = TrialRngs::new(spec.seed, trial);
                    advance(p.as_mut(), inst, &mut rngs, t, None);
                    secs += clock.elapsed().as_secs_f64();
                    regrets.push(ev.regret(p.counts())?);
                }
            }
            let mean = regrets.iter().sum::<f64>() / regrets.len() as f64;
            for (slot, &thr) in found.iter_mut().zip(&spec.thresholds) {
                if slot.is_none() && mean < thr {
                    *slot = Some((secs / spec.trials as f64, t, mean));
                }
            }
            if found.iter().all(Option::is_some) {
                break;
            }
        }
        for (slot, &thr) in found.iter().zip(&spec.thresholds) {
            rows.push(BenchRow {
                threshold: thr,
                policy: pc.label(),
                seconds: slot.map(|s| s.0),
                horizon: slot.map(|s| s.1),
                regret: slot.map(|s| s.2),
            });
        }
    }
    Ok(rows)
}

pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["threshold", "policy", "seconds", "T", "regret"])?;
    let opt = |x: Option<String>| x.unwrap_or_else(|| "unreachable".into());
    for r in rows {
        w.write_record([
            r.threshold.to_string(),
            r.policy.clone(),
            opt(r.seconds.map(|s| s.to_string())),
            opt(r.horizon.map(|s| s.to_string())),
            opt(r.regret.map(|s| s.to_string())),
        ])?;
    }
    w.flush()?;
    Ok(())
}
