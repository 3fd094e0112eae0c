//! Experiment runner: named experiments, flat key=value configs with
//! command-line overrides, deterministic seeding, CSV emission.
//!
//! Every Monte Carlo task derives its RNG stream from `(master_seed,
//! sweep index, task index)`, never from scheduling order, so a run is
//! byte-identical across repetitions and thread counts.

use crate::analytic::throughput_analytic;
use crate::estimation::{em_estimate, EmConfig, PreambleBank};
use crate::fec::CodeSpec;
use crate::galois::FieldSpec;
use crate::mac::{
    decode_slot, splitmix64, CoefficientPolicy, Feedback, PhyConfig, Protocol, ProtocolConfig,
    RunConfig, SlotUser, TrafficModel,
};
use crate::waveform::{
    synthesize_collision, Burst, ChannelParams, PulseShape, SamplingStrategy, MAX_FREQ_OFFSET,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("simulation failed: {0}")]
    Run(String),
}

fn cfg_err(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    ThroughputNoFeedback,
    ThroughputArq,
    Energy,
    Fer,
    EstimationMse,
    AsyncFer,
    AnalyticSweep,
}

impl Experiment {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        Ok(match name {
            "throughput-nofeedback" => Self::ThroughputNoFeedback,
            "throughput-arq" => Self::ThroughputArq,
            "energy" => Self::Energy,
            "fer" => Self::Fer,
            "estimation-mse" => Self::EstimationMse,
            "async-fer" => Self::AsyncFer,
            "analytic-sweep" => Self::AnalyticSweep,
            other => {
                return Err(cfg_err(
                    "experiment",
                    format!("unknown experiment name `{other}`"),
                ))
            }
        })
    }
}

/// Parsed experiment parameters. Every field has a default so a config
/// file only names what it changes.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub slots: usize,
    pub n: u8,
    pub policy: CoefficientPolicy,
    pub backlog: usize,
    pub g_grid: Vec<f64>,
    pub ebn0_grid: Vec<f64>,
    pub esn0_grid: Vec<f64>,
    pub delta_t_max: f64,
    pub strategy: SamplingStrategy,
    /// Monte Carlo repetitions per sweep point (slots or codewords).
    pub trials: usize,
    /// Measured frames per protocol run.
    pub frames: usize,
    /// Independent runs per sweep point (the standard error is computed
    /// across runs).
    pub runs: usize,
    /// Collision size for PHY experiments.
    pub k: usize,
    pub info_bits: usize,
    pub partial_recovery: bool,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::AnalyticSweep,
            slots: 100,
            n: 8,
            policy: CoefficientPolicy::Uniform,
            backlog: 50,
            g_grid: (1..=10).map(|i| i as f64 / 10.0).collect(),
            ebn0_grid: Vec::new(),
            esn0_grid: Vec::new(),
            delta_t_max: 0.0,
            strategy: SamplingStrategy::MeanDelay,
            trials: 2000,
            frames: 20,
            runs: 10,
            k: 2,
            info_bits: 744,
            partial_recovery: true,
            master_seed: 1,
        }
    }
}

/// Parse the flat key=value config text; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            cfg_err(
                "config",
                format!("line {}: expected key=value, got `{line}`", lineno + 1),
            )
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| cfg_err(key, format!("cannot parse `{value}`")))
}

fn parse_grid(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .map(|v| parse_num(key, v.trim()))
        .collect()
}

fn parse_strategy(key: &str, value: &str, delta_t_max: f64) -> Result<SamplingStrategy, CliError> {
    Ok(match value {
        "md" => SamplingStrategy::MeanDelay,
        "ml" => SamplingStrategy::MeanLlr,
        "ms" => SamplingStrategy::MeanSample,
        "us" => SamplingStrategy::UniformSampling { delta_t_max },
        "ec" => SamplingStrategy::EquivalentChannel,
        other => {
            return Err(cfg_err(
                key,
                format!("unknown strategy `{other}` (expected md|ml|ms|us|ec)"),
            ))
        }
    })
}

impl ExperimentConfig {
    /// Build a config from parsed key=value pairs; unknown keys are
    /// rejected by name.
    pub fn from_kv(map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut policy_name = String::from("uniform");
        let mut p: Option<f64> = None;
        let mut d: Option<usize> = None;
        let mut strategy_name: Option<String> = None;
        for (key, value) in map {
            match key.as_str() {
                "experiment" => cfg.experiment = Experiment::parse(value)?,
                "slots" => cfg.slots = parse_num(key, value)?,
                "n" => cfg.n = parse_num(key, value)?,
                "policy" => policy_name = value.clone(),
                "p" => p = Some(parse_num(key, value)?),
                "d" => d = Some(parse_num(key, value)?),
                "backlog" => cfg.backlog = parse_num(key, value)?,
                "g_grid" => cfg.g_grid = parse_grid(key, value)?,
                "ebn0_grid" => cfg.ebn0_grid = parse_grid(key, value)?,
                "esn0_grid" => cfg.esn0_grid = parse_grid(key, value)?,
                "delta_t_max" => cfg.delta_t_max = parse_num(key, value)?,
                "strategy" => strategy_name = Some(value.clone()),
                "trials" => cfg.trials = parse_num(key, value)?,
                "frames" => cfg.frames = parse_num(key, value)?,
                "runs" => cfg.runs = parse_num(key, value)?,
                "k" => cfg.k = parse_num(key, value)?,
                "info_bits" => cfg.info_bits = parse_num(key, value)?,
                "partial_recovery" => {
                    cfg.partial_recovery = match value.as_str() {
                        "1" | "true" => true,
                        "0" | "false" => false,
                        other => {
                            return Err(cfg_err(key, format!("expected 0/1, got `{other}`")))
                        }
                    }
                }
                "master_seed" => cfg.master_seed = parse_num(key, value)?,
                other => return Err(cfg_err(other, "unknown config key")),
            }
        }
        cfg.policy = match policy_name.as_str() {
            "uniform" => CoefficientPolicy::Uniform,
            "prob" => CoefficientPolicy::FixedProbability(
                p.ok_or_else(|| cfg_err("p", "policy=prob requires p"))?,
            ),
            "replicas" => CoefficientPolicy::FixedReplicas(
                d.ok_or_else(|| cfg_err("d", "policy=replicas requires d"))?,
            ),
            other => return Err(cfg_err("policy", format!("unknown policy `{other}`"))),
        };
        if let Some(name) = strategy_name {
            cfg.strategy = parse_strategy("strategy", &name, cfg.delta_t_max)?;
        }
        Ok(cfg)
    }

    /// Cross-field consistency diagnostics. An empty list means the
    /// config is runnable.
    pub fn validate(&self) -> Vec<String> {
        let mut diags = Vec::new();
        if self.slots == 0 {
            diags.push("slots: must be >= 1".into());
        }
        if self.n == 0 || self.n > 16 {
            diags.push("n: field exponent must be in 1..=16".into());
        }
        if let CoefficientPolicy::FixedReplicas(d) = self.policy {
            if d > self.slots {
                diags.push(format!("d: replicas exceed slots ({d} > {})", self.slots));
            }
        }
        if let CoefficientPolicy::FixedProbability(p) = self.policy {
            if !(0.0..=1.0).contains(&p) {
                diags.push("p: transmit probability outside [0, 1]".into());
            }
        }
        let needs_ebn0 = matches!(self.experiment, Experiment::Fer | Experiment::AsyncFer);
        if needs_ebn0 && self.ebn0_grid.is_empty() {
            diags.push("ebn0_grid: this experiment requires an Eb/N0 grid".into());
        }
        if self.experiment == Experiment::EstimationMse && self.esn0_grid.is_empty() {
            diags.push("esn0_grid: estimation-mse requires an Es/N0 grid".into());
        }
        if matches!(
            self.experiment,
            Experiment::Fer | Experiment::AsyncFer | Experiment::EstimationMse
        ) && self.k > crate::xorllr::MAX_COLLISION_SIZE
        {
            diags.push(format!(
                "k: collision size exceeds the LLR cap of {}",
                crate::xorllr::MAX_COLLISION_SIZE
            ));
        }
        if self.g_grid.is_empty()
            && matches!(
                self.experiment,
                Experiment::ThroughputNoFeedback
                    | Experiment::ThroughputArq
                    | Experiment::Energy
                    | Experiment::AnalyticSweep
            )
        {
            diags.push("g_grid: this experiment requires a load grid".into());
        }
        if self.trials == 0 || self.frames == 0 || self.runs == 0 {
            diags.push("trials/frames/runs: must be >= 1".into());
        }
        diags
    }
}

/// One output row: a sweep point, a metric, its value, the standard
/// error across Monte Carlo repetitions, and the repetition count.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep: String,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep,metric,value,stderr,trials\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.sweep, r.metric, r.value, r.stderr, r.trials
            )
            .expect("string write");
        }
        out
    }
}

/// Seed for the RNG stream of task `task` at sweep point `sweep`.
fn task_seed(master: u64, sweep: u64, task: u64) -> u64 {
    let mut state = master ^ 0xA076_1D64_78BD_642F;
    let mut out = splitmix64(&mut state);
    state ^= sweep.wrapping_mul(0xE703_7ED1_A0B4_28DB);
    out ^= splitmix64(&mut state);
    state ^= task.wrapping_mul(0x8EBC_6AF0_9C88_C6E3);
    out ^ splitmix64(&mut state)
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn format_g(g: f64) -> String {
    format!("G={g}")
}

fn protocol_cfg(cfg: &ExperimentConfig, feedback: Feedback) -> Result<ProtocolConfig, CliError> {
    Ok(ProtocolConfig {
        slots: cfg.slots,
        field: FieldSpec::with_default_poly(cfg.n)
            .map_err(|e| cfg_err("n", e.to_string()))?,
        policy: cfg.policy,
        backlog: cfg.backlog,
        feedback,
        ideal_phy: true,
        partial_recovery: cfg.partial_recovery,
        message_blocks: 1,
    })
}

/// Throughput/energy sweeps over the load grid; standard errors across
/// `runs` independent runs per point.
fn run_throughput(
    cfg: &ExperimentConfig,
    feedback: Feedback,
) -> Result<ExperimentResult, CliError> {
    let proto = protocol_cfg(cfg, feedback)?;
    let tasks: Vec<(usize, usize)> = (0..cfg.g_grid.len())
        .flat_map(|si| (0..cfg.runs).map(move |r| (si, r)))
        .collect();
    let metrics: Vec<Result<crate::mac::Metrics, String>> = tasks
        .par_iter()
        .map(|&(si, r)| {
            let run = RunConfig {
                protocol: Protocol::Ncdp,
                cfg: proto.clone(),
                phy: None,
                traffic: TrafficModel::new(cfg.g_grid[si]).map_err(|e| e.to_string())?,
                frames: cfg.frames,
            };
            let mut rng =
                ChaCha8Rng::seed_from_u64(task_seed(cfg.master_seed, si as u64, r as u64));
            crate::mac::simulate(&run, &mut rng).map_err(|e| e.to_string())
        })
        .collect();
    let mut result = ExperimentResult::default();
    for (si, &g) in cfg.g_grid.iter().enumerate() {
        let mut phis = Vec::new();
        let mut upsilons = Vec::new();
        let mut etas = Vec::new();
        for (t, m) in tasks.iter().zip(&metrics) {
            if t.0 != si {
                continue;
            }
            let m = m.as_ref().map_err(|e| CliError::Run(e.clone()))?;
            phis.push(m.phi);
            upsilons.push(m.upsilon);
            if m.eta.is_finite() {
                etas.push(m.eta);
            }
        }
        let sweep = format_g(g);
        for (name, values) in [("phi", &phis), ("upsilon", &upsilons), ("eta", &etas)] {
            if values.is_empty() {
                continue;
            }
            let (mean, se) = mean_stderr(values);
            result.rows.push(ResultRow {
                sweep: sweep.clone(),
                metric: name.into(),
                value: mean,
                stderr: se,
                trials: values.len() as u64,
            });
        }
        eprintln!("done {sweep}");
    }
    Ok(result)
}

fn random_slot_users<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    payload_len: usize,
    delta_t_max: f64,
    rng: &mut R,
) -> Vec<SlotUser> {
    use std::f64::consts::PI;
    let mut preambles: Vec<usize> = Vec::new();
    while preambles.len() < cfg.k {
        let c = rng.gen_range(1..=crate::waveform::PREAMBLE_WORDS);
        if !preambles.contains(&c) {
            preambles.push(c);
        }
    }
    (0..cfg.k)
        .map(|i| SlotUser {
            preamble: preambles[i],
            payload_bits: (0..payload_len).map(|_| rng.gen_range(0..2u8)).collect(),
            channel: ChannelParams {
                amplitude: 1.0,
                freq_offset: rng.gen_range(0.0..=MAX_FREQ_OFFSET),
                phase: rng.gen_range(-PI..=PI),
                rel_delay: if delta_t_max > 0.0 {
                    rng.gen_range(0.0..=delta_t_max)
                } else {
                    0.0
                },
            },
        })
        .collect()
}

fn fer_point(
    cfg: &ExperimentConfig,
    phy: &PhyConfig,
    sweep_index: u64,
    payload_len: usize,
) -> Result<(f64, f64), CliError> {
    let fails: Vec<Result<u64, String>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(task_seed(cfg.master_seed, sweep_index, t));
            let users = random_slot_users(cfg, payload_len, cfg.delta_t_max, &mut rng);
            let out = decode_slot(&users, phy, &mut rng).map_err(|e| e.to_string())?;
            Ok(match out.payload {
                Some(p) if p == out.truth => 0,
                _ => 1,
            })
        })
        .collect();
    let mut failures = 0u64;
    for f in fails {
        failures += f.map_err(CliError::Run)?;
    }
    let fer = failures as f64 / cfg.trials as f64;
    let se = (fer * (1.0 - fer) / cfg.trials as f64).sqrt();
    Ok((fer, se))
}

fn run_fer(cfg: &ExperimentConfig) -> Result<ExperimentResult, CliError> {
    let code = CodeSpec::new(cfg.info_bits).map_err(|e| cfg_err("info_bits", e.to_string()))?;
    let crc = crate::fec::CrcSpec::default();
    let payload_len = code.info_bits - crc.width;
    let mut result = ExperimentResult::default();
    for (si, &ebn0) in cfg.ebn0_grid.iter().enumerate() {
        let phy = PhyConfig {
            code,
            crc,
            ebn0_db: ebn0,
            strategy: cfg.strategy,
            delta_t_max: cfg.delta_t_max,
            include_preamble: false,
            ..PhyConfig::default()
        };
        let (fer, se) = fer_point(cfg, &phy, si as u64, payload_len)?;
        result.rows.push(ResultRow {
            sweep: format!("EbN0={ebn0}"),
            metric: "fer".into(),
            value: fer,
            stderr: se,
            trials: cfg.trials as u64,
        });
        eprintln!("done EbN0={ebn0}");
    }
    Ok(result)
}

/// Strategy comparison at a fixed SNR (the first grid entry) with
/// asynchronous arrivals. The ideal baseline is the same k-sample
/// receiver with every relative delay forced to zero.
fn run_async_fer(cfg: &ExperimentConfig) -> Result<ExperimentResult, CliError> {
    let code = CodeSpec::new(cfg.info_bits).map_err(|e| cfg_err("info_bits", e.to_string()))?;
    let crc = crate::fec::CrcSpec::default();
    let payload_len = code.info_bits - crc.width;
    let ebn0 = cfg.ebn0_grid[0];
    let strategies: Vec<(&str, SamplingStrategy, f64)> = vec![
        ("ideal", SamplingStrategy::MeanSample, 0.0),
        ("md", SamplingStrategy::MeanDelay, cfg.delta_t_max),
        ("ml", SamplingStrategy::MeanLlr, cfg.delta_t_max),
        ("ms", SamplingStrategy::MeanSample, cfg.delta_t_max),
        (
            "us",
            SamplingStrategy::UniformSampling {
                delta_t_max: cfg.delta_t_max,
            },
            cfg.delta_t_max,
        ),
        ("ec", SamplingStrategy::EquivalentChannel, cfg.delta_t_max),
    ];
    let mut result = ExperimentResult::default();
    for (si, (name, strategy, delta)) in strategies.iter().enumerate() {
        let phy = PhyConfig {
            code,
            crc,
            ebn0_db: ebn0,
            strategy: *strategy,
            delta_t_max: *delta,
            include_preamble: false,
            ..PhyConfig::default()
        };
        let sub = ExperimentConfig {
            delta_t_max: *delta,
            ..cfg.clone()
        };
        let (fer, se) = fer_point(&sub, &phy, si as u64, payload_len)?;
        result.rows.push(ResultRow {
            sweep: format!("strategy={name}"),
            metric: "fer".into(),
            value: fer,
            stderr: se,
            trials: cfg.trials as u64,
        });
        eprintln!("done strategy={name}");
    }
    Ok(result)
}

fn run_estimation_mse(cfg: &ExperimentConfig) -> Result<ExperimentResult, CliError> {
    use std::f64::consts::PI;
    let shape = PulseShape::default();
    let em = EmConfig::default();
    let mut result = ExperimentResult::default();
    for (si, &esn0) in cfg.esn0_grid.iter().enumerate() {
        let n0 = 10f64.powf(-esn0 / 10.0);
        let per_slot: Vec<Result<(f64, f64, f64), String>> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(task_seed(cfg.master_seed, si as u64, t));
                let bank = PreambleBank::new();
                let mut preambles: Vec<usize> = Vec::new();
                while preambles.len() < cfg.k {
                    let c = rng.gen_range(1..=crate::waveform::PREAMBLE_WORDS);
                    if !preambles.contains(&c) {
                        preambles.push(c);
                    }
                }
                // lognormal amplitudes, 1 dB spread
                let db = Normal::new(0.0, 1.0).expect("valid normal");
                let truth: Vec<ChannelParams> = (0..cfg.k)
                    .map(|_| ChannelParams {
                        amplitude: 10f64.powf(db.sample(&mut rng) / 20.0),
                        freq_offset: rng.gen_range(0.0..=MAX_FREQ_OFFSET),
                        phase: rng.gen_range(-PI..=PI),
                        rel_delay: 0.0,
                    })
                    .collect();
                let bursts: Vec<(Burst, ChannelParams)> = preambles
                    .iter()
                    .zip(&truth)
                    .map(|(&p, &ch)| Ok((Burst::new(p, &[])?, ch)))
                    .collect::<Result<_, crate::waveform::WaveformError>>()
                    .map_err(|e| e.to_string())?;
                let slot = synthesize_collision(&bursts, n0, &shape, &mut rng)
                    .map_err(|e| e.to_string())?;
                let est = em_estimate(&slot, &preambles, &bank, &em, &mut rng)
                    .map_err(|e| e.to_string())?;
                let mut sq = (0.0, 0.0, 0.0);
                for (e, t) in est.estimates.iter().zip(&truth) {
                    sq.0 += (e.amplitude - t.amplitude).powi(2);
                    sq.1 += (e.freq_offset - t.freq_offset).powi(2);
                    let mut dphi = e.phase - t.phase;
                    while dphi > PI {
                        dphi -= 2.0 * PI;
                    }
                    while dphi < -PI {
                        dphi += 2.0 * PI;
                    }
                    sq.2 += dphi.powi(2);
                }
                let kf = cfg.k as f64;
                Ok((sq.0 / kf, sq.1 / kf, sq.2 / kf))
            })
            .collect();
        let mut amp = Vec::new();
        let mut freq = Vec::new();
        let mut phase = Vec::new();
        for r in per_slot {
            let (a, f, p) = r.map_err(CliError::Run)?;
            amp.push(a);
            freq.push(f);
            phase.push(p);
        }
        let sweep = format!("EsN0={esn0}");
        for (name, values) in [
            ("mse_amplitude", &amp),
            ("mse_freq", &freq),
            ("mse_phase", &phase),
        ] {
            let (mean, se) = mean_stderr(values);
            result.rows.push(ResultRow {
                sweep: sweep.clone(),
                metric: name.into(),
                value: mean,
                stderr: se,
                trials: values.len() as u64,
            });
        }
        eprintln!("done {sweep}");
    }
    Ok(result)
}

fn run_analytic(cfg: &ExperimentConfig) -> ExperimentResult {
    let rows = cfg
        .g_grid
        .iter()
        .map(|&g| ResultRow {
            sweep: format_g(g),
            metric: "phi_analytic".into(),
            value: throughput_analytic(g, cfg.slots, cfg.n),
            stderr: 0.0,
            trials: 0,
        })
        .collect();
    ExperimentResult { rows }
}

/// Execute the configured experiment. Deterministic given the config and
/// master seed.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentResult, CliError> {
    let diags = cfg.validate();
    if !diags.is_empty() {
        return Err(cfg_err("config", diags.join("; ")));
    }
    match cfg.experiment {
        Experiment::AnalyticSweep => Ok(run_analytic(cfg)),
        Experiment::ThroughputNoFeedback => run_throughput(cfg, Feedback::None),
        Experiment::ThroughputArq | Experiment::Energy => run_throughput(cfg, Feedback::Arq),
        Experiment::Fer => run_fer(cfg),
        Experiment::AsyncFer => run_async_fer(cfg),
        Experiment::EstimationMse => run_estimation_mse(cfg),
    }
}

/// Full entry point used by the binary: load the config file, apply
/// `--set` overrides and the optional seed, run, and return the CSV.
pub fn run_from_file(
    path: &str,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut map = parse_kv(&text)?;
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| cfg_err("--set", format!("expected key=value, got `{item}`")))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    if let Some(s) = seed {
        map.insert("master_seed".into(), s.to_string());
    }
    let cfg = ExperimentConfig::from_kv(&map)?;
    Ok(run(&cfg)?.to_csv())
}
