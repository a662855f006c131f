//! CLI entry points: JSON config loading, deterministic Monte-Carlo sweeps
//! for the sum-rate and energy-efficiency comparisons, beam-pattern and
//! path-loss diagnostics, and CSV output.
//!
//! Reproducibility contract: (config, seed) fully determines every output
//! byte. Each trial owns a private random stream derived from
//! (seed, trial_index), trials may run on any number of worker threads, and
//! results are gathered into a table indexed by trial so completion order
//! never affects the aggregate.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    self, AbsorptionTable, ChannelSet, SystemConfig, UserPath, C64,
};
use crate::error::{Error, Result};
use crate::metrics::{self, PowerProfile};
use crate::precoders::{PrecoderOutput, Scheme};

/// Give up on a trial after this many singular draws in a row.
const MAX_ATTEMPTS_PER_TRIAL: u64 = 64;

/// Sine-angle resolution of the beam-pattern dump.
const PATTERN_GRID_POINTS: usize = 1024;

/// Grid used for beam-peak searches (over sin in [-1, 1]).
pub const BEAM_PEAK_GRID_POINTS: usize = 8192;

// ============================================================================
// Sweep specification and config file
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    SumrateSweep,
    EeSweep,
    Beampattern,
    Pathloss,
}

impl SweepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepKind::SumrateSweep => "sumrate-sweep",
            SweepKind::EeSweep => "ee-sweep",
            SweepKind::Beampattern => "beampattern",
            SweepKind::Pathloss => "pathloss",
        }
    }
}

/// What to sweep and which schemes to compare. Populated from the config
/// file; `kind` and `output_path` come from the CLI invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub snr_grid_db: Vec<f64>,
    pub user_grid: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub operating_snr_db: f64,
    pub output_path: Option<PathBuf>,
    pub distances_m: Vec<f64>,
    pub beam_sin_angle: f64,
    pub beam_distance_m: f64,
    pub absorption_table_path: Option<PathBuf>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            kind: SweepKind::SumrateSweep,
            snr_grid_db: (-5..=10).map(|i| (2 * i) as f64).collect(),
            user_grid: vec![1, 2, 4, 8],
            schemes: vec![
                Scheme::Digital,
                Scheme::HybridFullPs,
                Scheme::HybridSubPs,
                Scheme::HybridFullTd,
                Scheme::HybridSubTd,
                Scheme::DelayPhase,
            ],
            operating_snr_db: -20.0,
            output_path: None,
            distances_m: vec![10.0, 100.0],
            beam_sin_angle: 0.5,
            beam_distance_m: 10.0,
            absorption_table_path: None,
        }
    }
}

/// On-disk JSON schema. Every key is optional; omitted keys take the
/// full-scale defaults. Unknown keys are rejected.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    n_antennas: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_rf: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_users: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_subcarriers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    carrier_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidth_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_td_per_rf: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    schemes: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    snr_grid_db: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    user_grid: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    operating_snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    apply_pathloss: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    power: Option<PowerProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    absorption_table_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window_threshold_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distances_m: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beam_sin_angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beam_distance_m: Option<f64>,
}

impl ConfigFile {
    fn resolve(self) -> Result<(SystemConfig, SweepSpec)> {
        let defaults = SystemConfig::default();
        let spec_defaults = SweepSpec::default();
        let config = SystemConfig {
            n_antennas: self.n_antennas.unwrap_or(defaults.n_antennas),
            n_rf: self.n_rf.unwrap_or(defaults.n_rf),
            n_users: self.n_users.unwrap_or(defaults.n_users),
            n_subcarriers: self.n_subcarriers.unwrap_or(defaults.n_subcarriers),
            carrier_hz: self.carrier_hz.unwrap_or(defaults.carrier_hz),
            bandwidth_hz: self.bandwidth_hz.unwrap_or(defaults.bandwidth_hz),
            n_td_per_rf: self.n_td_per_rf.unwrap_or(defaults.n_td_per_rf),
            seed: self.seed.unwrap_or(defaults.seed),
            power_profile: self.power.unwrap_or(defaults.power_profile),
            trials: self.trials.unwrap_or(defaults.trials),
            apply_pathloss: self.apply_pathloss.unwrap_or(defaults.apply_pathloss),
            window_threshold_db: self
                .window_threshold_db
                .unwrap_or(defaults.window_threshold_db),
        };
        config.validate()?;
        let schemes = match self.schemes {
            Some(names) => names
                .iter()
                .map(|s| s.parse::<Scheme>())
                .collect::<Result<Vec<_>>>()?,
            None => spec_defaults.schemes.clone(),
        };
        let spec = SweepSpec {
            kind: SweepKind::SumrateSweep,
            snr_grid_db: self.snr_grid_db.unwrap_or(spec_defaults.snr_grid_db),
            user_grid: self.user_grid.unwrap_or(spec_defaults.user_grid),
            schemes,
            operating_snr_db: self
                .operating_snr_db
                .unwrap_or(spec_defaults.operating_snr_db),
            output_path: None,
            distances_m: self.distances_m.unwrap_or(spec_defaults.distances_m),
            beam_sin_angle: self.beam_sin_angle.unwrap_or(spec_defaults.beam_sin_angle),
            beam_distance_m: self
                .beam_distance_m
                .unwrap_or(spec_defaults.beam_distance_m),
            absorption_table_path: self.absorption_table_path.map(PathBuf::from),
        };
        if !spec.beam_sin_angle.is_finite() || spec.beam_sin_angle.abs() > 1.0 {
            return Err(Error::invalid_config("beam_sin_angle", "must lie in [-1, 1]"));
        }
        if spec.beam_distance_m <= 0.0 || spec.beam_distance_m.is_nan() {
            return Err(Error::invalid_config("beam_distance_m", "must be > 0"));
        }
        for d in &spec.distances_m {
            if *d <= 0.0 || d.is_nan() {
                return Err(Error::invalid_config("distances_m", "distances must be > 0"));
            }
        }
        Ok((config, spec))
    }

    fn from_resolved(config: &SystemConfig, spec: &SweepSpec) -> ConfigFile {
        ConfigFile {
            n_antennas: Some(config.n_antennas),
            n_rf: Some(config.n_rf),
            n_users: Some(config.n_users),
            n_subcarriers: Some(config.n_subcarriers),
            carrier_hz: Some(config.carrier_hz),
            bandwidth_hz: Some(config.bandwidth_hz),
            n_td_per_rf: Some(config.n_td_per_rf),
            trials: Some(config.trials),
            seed: Some(config.seed),
            schemes: Some(spec.schemes.iter().map(|s| s.as_str().to_string()).collect()),
            snr_grid_db: Some(spec.snr_grid_db.clone()),
            user_grid: Some(spec.user_grid.clone()),
            operating_snr_db: Some(spec.operating_snr_db),
            apply_pathloss: Some(config.apply_pathloss),
            power: Some(config.power_profile),
            absorption_table_path: spec
                .absorption_table_path
                .as_ref()
                .map(|p| p.display().to_string()),
            window_threshold_db: Some(config.window_threshold_db),
            distances_m: Some(spec.distances_m.clone()),
            beam_sin_angle: Some(spec.beam_sin_angle),
            beam_distance_m: Some(spec.beam_distance_m),
        }
    }
}

/// Load and validate a JSON config; omitted keys fall back to the
/// full-scale defaults (N=1024, f_c=350 GHz, B=20 GHz, M=128, K_d=32,
/// 100 trials).
pub fn load_config(path: &Path) -> Result<(SystemConfig, SweepSpec)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let file: ConfigFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        source: e,
    })?;
    file.resolve()
}

/// Parse and validate a config from a JSON string (same schema as
/// [`load_config`]).
pub fn parse_config_str(json: &str) -> Result<(SystemConfig, SweepSpec)> {
    let file: ConfigFile = serde_json::from_str(json).map_err(|e| Error::Parse {
        path: "<inline json>".into(),
        source: e,
    })?;
    file.resolve()
}

/// Canonical single-line JSON echo of a resolved (config, spec) pair; used
/// for CSV metadata and round-trip checks.
pub fn config_json(config: &SystemConfig, spec: &SweepSpec) -> String {
    serde_json::to_string(&ConfigFile::from_resolved(config, spec))
        .expect("config serializes")
}

/// The private random stream of one Monte-Carlo trial.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial_index.to_le_bytes());
    key[16..24].copy_from_slice(b"terabeam");
    ChaCha12Rng::from_seed(key)
}

// ============================================================================
// Sweep results
// ============================================================================

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub metric_mean: f64,
    pub metric_std: f64,
    pub n_trials: u64,
    pub n_resamples: u64,
}

/// Tabular sweep output plus the metadata block that reproduces it. Wall
/// time is reported on stdout only, never in the CSV, so output files stay
/// byte-identical for a given (config, seed).
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub metric_label: &'static str,
    pub sweep_label: &'static str,
    pub rows: Vec<SweepRow>,
    pub config_echo: String,
    pub seed: u64,
    pub version: &'static str,
    pub wall_time_s: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Checks a scheme can run at all under the given geometry, before any
/// channels are drawn.
fn validate_scheme_config(scheme: Scheme, config: &SystemConfig) -> Result<()> {
    let (n, k) = (config.n_antennas, config.n_users);
    match scheme {
        Scheme::Digital => {
            if k > n {
                return Err(Error::invalid_config(
                    "n_users",
                    format!("fully-digital ZF needs K <= N ({k} > {n})"),
                ));
            }
        }
        Scheme::Analog => {
            if k != 1 {
                return Err(Error::invalid_config(
                    "schemes",
                    "analog beamforming serves exactly one user",
                ));
            }
        }
        Scheme::HybridFullPs | Scheme::HybridFullTd => {
            if config.n_rf != k {
                return Err(Error::invalid_config(
                    "n_rf",
                    "two-stage hybrid precoding requires n_rf == n_users",
                ));
            }
        }
        Scheme::HybridSubPs | Scheme::HybridSubTd => {
            if config.n_rf != k {
                return Err(Error::invalid_config(
                    "n_rf",
                    "two-stage hybrid precoding requires n_rf == n_users",
                ));
            }
            if n % k != 0 {
                return Err(Error::invalid_config(
                    "n_antennas",
                    format!("sub-connected structure needs N divisible by K ({n} % {k})"),
                ));
            }
        }
        Scheme::DelayPhase => {
            if config.n_rf != k {
                return Err(Error::invalid_config(
                    "n_rf",
                    "delay-phase precoding requires n_rf == n_users",
                ));
            }
            if config.n_td_per_rf == 0 || n % config.n_td_per_rf != 0 {
                return Err(Error::invalid_config(
                    "n_td_per_rf",
                    format!(
                        "delay-phase needs K_d >= 1 and N divisible by K_d ({n} % {})",
                        config.n_td_per_rf
                    ),
                ));
            }
        }
    }
    Ok(())
}

fn load_table(spec: &SweepSpec) -> Result<AbsorptionTable> {
    match &spec.absorption_table_path {
        Some(path) => AbsorptionTable::from_file(path),
        None => Ok(AbsorptionTable::default_table()),
    }
}

/// One trial's channel realization: draw users from the trial stream until
/// every scheme accepts the draw, counting resamples.
fn draw_paired_channels(
    config: &SystemConfig,
    schemes: &[Scheme],
    table: Option<&AbsorptionTable>,
    rng: &mut ChaCha12Rng,
) -> Result<(ChannelSet, Vec<PrecoderOutput>, u64)> {
    let mut resamples = 0u64;
    loop {
        let users = channel::sample_users(config, rng);
        let mut channels = channel::gen_channel(config, &users)?;
        if let Some(t) = table {
            channel::apply_path_loss(&mut channels, t)?;
        }
        let mut outputs = Vec::with_capacity(schemes.len());
        let mut singular = false;
        for scheme in schemes {
            match scheme.compute(&channels, config) {
                Ok(p) => outputs.push(p),
                Err(Error::SingularChannel { .. }) => {
                    singular = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if !singular {
            return Ok((channels, outputs, resamples));
        }
        resamples += 1;
        if resamples >= MAX_ATTEMPTS_PER_TRIAL {
            return Err(Error::ResampleBudget {
                resamples,
                trials: 1,
            });
        }
    }
}

fn run_trials<T, F>(threads: usize, trials: usize, run_one: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(|| {
        use rayon::prelude::*;
        (0..trials as u64)
            .into_par_iter()
            .map(&run_one)
            .collect::<Result<Vec<T>>>()
    })
}

fn check_resample_budget(total_resamples: u64, trials: usize) -> Result<()> {
    if total_resamples as f64 > 0.1 * trials as f64 {
        return Err(Error::ResampleBudget {
            resamples: total_resamples,
            trials: trials as u64,
        });
    }
    Ok(())
}

/// Achievable sum-rate against SNR. All schemes in a
/// trial see the identical channel realization, and every SNR point reuses
/// that trial's cross products.
pub fn run_sumrate_sweep(
    config: &SystemConfig,
    spec: &SweepSpec,
    threads: usize,
) -> Result<SweepResult> {
    let started = Instant::now();
    config.validate()?;
    if spec.schemes.is_empty() {
        return Err(Error::invalid_config("schemes", "at least one scheme required"));
    }
    if spec.snr_grid_db.is_empty() {
        return Err(Error::invalid_config("snr_grid_db", "grid must be non-empty"));
    }
    for &scheme in &spec.schemes {
        validate_scheme_config(scheme, config)?;
    }
    let table = if config.apply_pathloss {
        Some(load_table(spec)?)
    } else {
        None
    };

    // rates[trial][scheme][snr]
    let per_trial = run_trials(threads, config.trials, |t| {
        let mut rng = trial_rng(config.seed, t);
        let (channels, outputs, resamples) =
            draw_paired_channels(config, &spec.schemes, table.as_ref(), &mut rng)?;
        let rates: Vec<Vec<f64>> = outputs
            .iter()
            .map(|p| {
                let cross = metrics::cross_products(&channels, p);
                spec.snr_grid_db
                    .iter()
                    .map(|&snr| metrics::sum_rate_from_cross(&cross, snr).sum_rate_bpshz)
                    .collect()
            })
            .collect();
        Ok((rates, resamples))
    })?;

    let total_resamples: u64 = per_trial.iter().map(|(_, r)| r).sum();
    check_resample_budget(total_resamples, config.trials)?;

    let mut rows = Vec::with_capacity(spec.schemes.len() * spec.snr_grid_db.len());
    for (si, scheme) in spec.schemes.iter().enumerate() {
        for (gi, &snr) in spec.snr_grid_db.iter().enumerate() {
            let samples: Vec<f64> = per_trial.iter().map(|(r, _)| r[si][gi]).collect();
            let (mean, std) = mean_std(&samples);
            rows.push(SweepRow {
                scheme: *scheme,
                sweep_value: snr,
                metric_mean: mean,
                metric_std: std,
                n_trials: config.trials as u64,
                n_resamples: total_resamples,
            });
        }
    }
    Ok(SweepResult {
        kind: SweepKind::SumrateSweep,
        metric_label: "sum_rate_bpshz",
        sweep_label: "snr_db",
        rows,
        config_echo: config_json(config, spec),
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Energy efficiency against the number of users.
/// The RF-chain count tracks K at every grid point; analog beamforming only
/// participates at K = 1.
pub fn run_ee_sweep(config: &SystemConfig, spec: &SweepSpec, threads: usize) -> Result<SweepResult> {
    let started = Instant::now();
    config.validate()?;
    if spec.schemes.is_empty() {
        return Err(Error::invalid_config("schemes", "at least one scheme required"));
    }
    if spec.user_grid.is_empty() {
        return Err(Error::invalid_config("user_grid", "grid must be non-empty"));
    }
    let table = if config.apply_pathloss {
        Some(load_table(spec)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    for &k in &spec.user_grid {
        let config_k = SystemConfig {
            n_users: k,
            n_rf: k,
            ..config.clone()
        };
        config_k.validate()?;
        let schemes_k: Vec<Scheme> = spec
            .schemes
            .iter()
            .copied()
            .filter(|s| k == 1 || *s != Scheme::Analog)
            .collect();
        if schemes_k.is_empty() {
            return Err(Error::invalid_config(
                "schemes",
                format!("no scheme in the list can serve {k} users"),
            ));
        }
        for &scheme in &schemes_k {
            validate_scheme_config(scheme, &config_k)?;
        }

        // ee[trial][scheme]
        let per_trial = run_trials(threads, config_k.trials, |t| {
            let mut rng = trial_rng(config_k.seed, t);
            let (channels, outputs, resamples) =
                draw_paired_channels(&config_k, &schemes_k, table.as_ref(), &mut rng)?;
            let ee: Vec<f64> = outputs
                .iter()
                .map(|p| {
                    let report = metrics::sum_rate(&channels, p, spec.operating_snr_db);
                    metrics::energy_efficiency(&report, &p.hardware, &config_k)
                })
                .collect();
            Ok((ee, resamples))
        })?;

        let total_resamples: u64 = per_trial.iter().map(|(_, r)| r).sum();
        check_resample_budget(total_resamples, config_k.trials)?;

        for (si, scheme) in schemes_k.iter().enumerate() {
            let samples: Vec<f64> = per_trial.iter().map(|(e, _)| e[si]).collect();
            let (mean, std) = mean_std(&samples);
            rows.push(SweepRow {
                scheme: *scheme,
                sweep_value: k as f64,
                metric_mean: mean,
                metric_std: std,
                n_trials: config_k.trials as u64,
                n_resamples: total_resamples,
            });
        }
    }
    Ok(SweepResult {
        kind: SweepKind::EeSweep,
        metric_label: "energy_efficiency_gbps_per_w",
        sweep_label: "n_users",
        rows,
        config_echo: config_json(config, spec),
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

// ============================================================================
// Beam-pattern diagnostic
// ============================================================================

#[derive(Debug, Clone, PartialEq)]
pub struct BeampatternSummary {
    pub freq_hz: f64,
    pub peak_sin_angle: f64,
    pub peak_magnitude: f64,
    pub gain_to_user: f64,
}

#[derive(Debug, Clone)]
pub struct BeampatternResult {
    pub scheme: Scheme,
    pub user: UserPath,
    /// (freq_hz, sin_angle, magnitude) over the full plotting grid.
    pub pattern: Vec<(f64, f64, f64)>,
    pub summary: Vec<BeampatternSummary>,
    pub config_echo: String,
    pub seed: u64,
    pub version: &'static str,
    pub wall_time_s: f64,
}

/// Beam pattern of one scheme serving one user: the full magnitude grid per
/// subcarrier plus a per-subcarrier summary (peak location, gain toward the
/// true direction).
pub fn run_beampattern(
    config: &SystemConfig,
    spec: &SweepSpec,
    scheme: Scheme,
    user: &UserPath,
) -> Result<BeampatternResult> {
    let started = Instant::now();
    let config_1 = SystemConfig {
        n_users: 1,
        n_rf: 1,
        ..config.clone()
    };
    config_1.validate()?;
    validate_scheme_config(scheme, &config_1)?;
    let channels = channel::gen_channel(&config_1, std::slice::from_ref(user))?;
    let precoder = scheme.compute(&channels, &config_1)?;
    let gains = metrics::array_gain_profile(&precoder, user, &config_1)?;

    let grid = metrics::sin_grid(PATTERN_GRID_POINTS);
    let mut pattern = Vec::with_capacity(config_1.n_subcarriers * grid.len());
    let mut summary = Vec::with_capacity(config_1.n_subcarriers);
    for (m, &f) in channels.subcarrier_hz.iter().enumerate() {
        let col = precoder.f_matrices[m].column(0).into_owned();
        let mags = metrics::array_pattern(&col, f, config_1.carrier_hz, &grid);
        for (s, mag) in grid.iter().zip(&mags) {
            pattern.push((f, *s, *mag));
        }
        let peak_sin_angle = metrics::beam_peak(&col, f, &config_1, BEAM_PEAK_GRID_POINTS)?;
        let peak_magnitude =
            metrics::array_pattern(&col, f, config_1.carrier_hz, &[peak_sin_angle])[0];
        summary.push(BeampatternSummary {
            freq_hz: f,
            peak_sin_angle,
            peak_magnitude,
            gain_to_user: gains[m],
        });
    }
    Ok(BeampatternResult {
        scheme,
        user: *user,
        pattern,
        summary,
        config_echo: config_json(config, spec),
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

// ============================================================================
// Path-loss diagnostic
// ============================================================================

#[derive(Debug, Clone)]
pub struct PathlossResult {
    /// (freq_hz, distance_m, pathloss_db, in_window)
    pub rows: Vec<(f64, f64, f64, bool)>,
    /// Per-distance window lists from `available_window`.
    pub windows: Vec<(f64, Vec<(f64, f64)>)>,
    pub threshold_db: f64,
    pub config_echo: String,
    pub version: &'static str,
}

/// Dense path-loss sweep over the table coverage for each distance, with
/// window membership flags.
pub fn run_pathloss(
    config: &SystemConfig,
    spec: &SweepSpec,
    table: &AbsorptionTable,
    distances: &[f64],
) -> Result<PathlossResult> {
    if distances.is_empty() {
        return Err(Error::invalid_config("distances_m", "at least one distance required"));
    }
    let mut rows = Vec::with_capacity(distances.len() * table.segments.len());
    let mut windows = Vec::with_capacity(distances.len());
    for &d in distances {
        let ws = channel::available_window(d, table, config.window_threshold_db)?;
        for s in &table.segments {
            let f = 0.5 * (s.f_lo_hz + s.f_hi_hz);
            let pl = channel::path_loss_db(f, d, table)?;
            let in_window = ws.iter().any(|&(lo, hi)| lo <= f && f <= hi);
            rows.push((f, d, pl, in_window));
        }
        windows.push((d, ws));
    }
    Ok(PathlossResult {
        rows,
        windows,
        threshold_db: config.window_threshold_db,
        config_echo: config_json(config, spec),
        version: env!("CARGO_PKG_VERSION"),
    })
}

// ============================================================================
// CSV output
// ============================================================================

/// Floats print with 9 significant digits.
fn sig9(x: f64) -> String {
    if x == 0.0 {
        "0.00000000e0".to_string()
    } else {
        format!("{:.8e}", x)
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Fixed-column sweep CSV: metadata as `#` comment lines, then
/// `scheme,sweep_value,metric_mean,metric_std,n_trials,n_resamples`.
pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# terabeam v{}\n", result.version));
    out.push_str(&format!("# kind: {}\n", result.kind.as_str()));
    out.push_str(&format!("# metric: {}\n", result.metric_label));
    out.push_str(&format!("# sweep: {}\n", result.sweep_label));
    out.push_str(&format!("# seed: {}\n", result.seed));
    out.push_str(&format!("# config: {}\n", result.config_echo));
    out.push_str("scheme,sweep_value,metric_mean,metric_std,n_trials,n_resamples\n");
    for row in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.scheme.as_str(),
            sig9(row.sweep_value),
            sig9(row.metric_mean),
            sig9(row.metric_std),
            row.n_trials,
            row.n_resamples
        ));
    }
    write_atomic(path, &out)
}

/// Beam-pattern CSV: `pattern` rows carry the plotting grid, `summary` rows
/// carry per-subcarrier peak location and gain toward the user.
pub fn write_beampattern_csv(result: &BeampatternResult, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# terabeam v{}\n", result.version));
    out.push_str("# kind: beampattern\n");
    out.push_str(&format!("# scheme: {}\n", result.scheme.as_str()));
    out.push_str(&format!(
        "# user: sin_angle={} distance_m={}\n",
        sig9(result.user.sin_angle),
        sig9(result.user.distance_m)
    ));
    out.push_str(&format!("# seed: {}\n", result.seed));
    out.push_str(&format!("# config: {}\n", result.config_echo));
    out.push_str("row_type,freq_hz,sin_angle,magnitude,user_sin_angle,gain_to_user\n");
    for (f, s, mag) in &result.pattern {
        out.push_str(&format!(
            "pattern,{},{},{},,\n",
            sig9(*f),
            sig9(*s),
            sig9(*mag)
        ));
    }
    for s in &result.summary {
        out.push_str(&format!(
            "summary,{},{},{},{},{}\n",
            sig9(s.freq_hz),
            sig9(s.peak_sin_angle),
            sig9(s.peak_magnitude),
            sig9(result.user.sin_angle),
            sig9(s.gain_to_user)
        ));
    }
    write_atomic(path, &out)
}

/// Path-loss CSV: `freq_hz,distance_m,pathloss_db,in_window` with the
/// detected windows echoed as comment lines.
pub fn write_pathloss_csv(result: &PathlossResult, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# terabeam v{}\n", result.version));
    out.push_str("# kind: pathloss\n");
    out.push_str(&format!("# threshold_db: {}\n", sig9(result.threshold_db)));
    for (d, ws) in &result.windows {
        let list: Vec<String> = ws
            .iter()
            .map(|(lo, hi)| format!("{}..{}", sig9(*lo), sig9(*hi)))
            .collect();
        out.push_str(&format!(
            "# windows distance_m={}: {}\n",
            sig9(*d),
            list.join(" ")
        ));
    }
    out.push_str(&format!("# config: {}\n", result.config_echo));
    out.push_str("freq_hz,distance_m,pathloss_db,in_window\n");
    for (f, d, pl, in_window) in &result.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            sig9(*f),
            sig9(*d),
            sig9(*pl),
            u8::from(*in_window)
        ));
    }
    write_atomic(path, &out)
}

/// Build the single diagnostic user for `beampattern` from the spec.
pub fn beam_user(spec: &SweepSpec) -> UserPath {
    UserPath {
        gain: C64::new(1.0, 0.0),
        sin_angle: spec.beam_sin_angle,
        distance_m: spec.beam_distance_m,
    }
}
