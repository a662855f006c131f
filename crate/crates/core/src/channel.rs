//! User geometry, frequency-dependent array responses, Saleh-Valenzuela LoS
//! channels, and the distance-dependent path-loss / bandwidth-window model.
//!
//! The array is a uniform linear array with half-wavelength spacing at the
//! carrier, so element `n` at frequency `f` sees the incremental phase
//! `-pi * n * (f / f_c) * sin(theta)`. Everything here is a pure function of
//! its inputs plus an explicit seeded random stream.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::PowerProfile;

/// Complex sample type used throughout the simulator.
pub type C64 = Complex<f64>;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// sin(60 degrees): half-width of the angular sector users are drawn from.
pub const SIN_SECTOR: f64 = 0.866_025_403_784_438_6;

/// Top-level system parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Number of ULA elements N.
    pub n_antennas: usize,
    /// Number of RF chains.
    pub n_rf: usize,
    /// Number of single-antenna users K.
    pub n_users: usize,
    /// Number of subcarriers M.
    pub n_subcarriers: usize,
    /// Carrier frequency f_c in Hz.
    pub carrier_hz: f64,
    /// Total bandwidth B in Hz.
    pub bandwidth_hz: f64,
    /// Time-delayers per RF chain (delay-phase structure).
    pub n_td_per_rf: usize,
    /// Base seed for the Monte-Carlo streams.
    pub seed: u64,
    /// Hardware power model.
    pub power_profile: PowerProfile,
    /// Monte-Carlo trials per sweep point.
    pub trials: usize,
    /// Fold distance-dependent path loss into the generated channels.
    pub apply_pathloss: bool,
    /// Window threshold in dB above free space for `available_window`.
    pub window_threshold_db: f64,
}

impl Default for SystemConfig {
    /// 1024-element array, 20 GHz at 350 GHz, 4 users, 32 TDs per RF chain.
    fn default() -> Self {
        SystemConfig {
            n_antennas: 1024,
            n_rf: 4,
            n_users: 4,
            n_subcarriers: 128,
            carrier_hz: 350e9,
            bandwidth_hz: 20e9,
            n_td_per_rf: 32,
            seed: 1,
            power_profile: PowerProfile::default(),
            trials: 100,
            apply_pathloss: false,
            window_threshold_db: 10.0,
        }
    }
}

impl SystemConfig {
    /// Subcarrier grid centered on the carrier with spacing B/M:
    /// `f_m = f_c + B * (m - (M-1)/2) / M`.
    pub fn subcarrier_frequencies(&self) -> Vec<f64> {
        let m = self.n_subcarriers as f64;
        (0..self.n_subcarriers)
            .map(|i| self.carrier_hz + self.bandwidth_hz * (i as f64 - (m - 1.0) / 2.0) / m)
            .collect()
    }

    /// Structural validation; scheme-specific divisibility rules are checked
    /// by the individual precoders.
    pub fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 {
            return Err(Error::invalid_config("n_antennas", "must be positive"));
        }
        if self.n_rf == 0 {
            return Err(Error::invalid_config("n_rf", "must be positive"));
        }
        if self.n_users == 0 {
            return Err(Error::invalid_config("n_users", "must be positive"));
        }
        if self.n_subcarriers == 0 {
            return Err(Error::invalid_config("n_subcarriers", "must be positive"));
        }
        if self.trials == 0 {
            return Err(Error::invalid_config("trials", "must be positive"));
        }
        if !(self.carrier_hz.is_finite() && self.carrier_hz > 0.0) {
            return Err(Error::invalid_config("carrier_hz", "must be finite and positive"));
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(Error::invalid_config("bandwidth_hz", "must be finite and positive"));
        }
        if self.bandwidth_hz >= 2.0 * self.carrier_hz {
            return Err(Error::invalid_config(
                "bandwidth_hz",
                "fractional bandwidth must stay below 100% (B < 2*f_c)",
            ));
        }
        if self.n_rf > self.n_antennas {
            return Err(Error::invalid_config("n_rf", "cannot exceed n_antennas"));
        }
        if !self.window_threshold_db.is_finite() {
            return Err(Error::invalid_config("window_threshold_db", "must be finite"));
        }
        self.power_profile.validate()?;
        Ok(())
    }
}

/// Per-user line-of-sight path: complex gain, sine of the physical departure
/// angle, and link distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserPath {
    pub gain: C64,
    pub sin_angle: f64,
    pub distance_m: f64,
}

/// A generated channel realization: M matrices of shape K x N plus the
/// subcarrier grid and the user list that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub matrices: Vec<DMatrix<C64>>,
    pub subcarrier_hz: Vec<f64>,
    pub users: Vec<UserPath>,
    pub carrier_hz: f64,
}

impl ChannelSet {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.ncols())
    }

    pub fn n_subcarriers(&self) -> usize {
        self.matrices.len()
    }
}

/// Unit-norm ULA steering vector `a(theta, f)` with entries
/// `(1/sqrt(N)) * exp(-i * pi * n * (f/f_c) * sin(theta))` for n = 0..N-1.
pub fn array_response(
    n_antennas: usize,
    sin_angle: f64,
    freq_hz: f64,
    carrier_hz: f64,
) -> Result<DVector<C64>> {
    if n_antennas == 0 {
        return Err(Error::InvalidInput("n_antennas must be >= 1".into()));
    }
    if !sin_angle.is_finite() || !freq_hz.is_finite() || !carrier_hz.is_finite() {
        return Err(Error::InvalidInput("array_response inputs must be finite".into()));
    }
    if sin_angle.abs() > 1.0 {
        return Err(Error::InvalidInput(format!(
            "|sin_angle| must be <= 1, got {sin_angle}"
        )));
    }
    if freq_hz <= 0.0 || carrier_hz <= 0.0 {
        return Err(Error::InvalidInput("frequencies must be positive".into()));
    }
    let scale = 1.0 / (n_antennas as f64).sqrt();
    let rate = std::f64::consts::PI * (freq_hz / carrier_hz) * sin_angle;
    Ok(DVector::from_fn(n_antennas, |n, _| {
        C64::from_polar(scale, -rate * n as f64)
    }))
}

/// Saleh-Valenzuela channel with a single LoS path per user: row k of the
/// subcarrier-m matrix is `sqrt(N) * g_k * a(theta_k, f_m)^H`.
pub fn gen_channel(config: &SystemConfig, users: &[UserPath]) -> Result<ChannelSet> {
    config.validate()?;
    if users.len() != config.n_users {
        return Err(Error::DimensionMismatch(format!(
            "config expects {} users, got {}",
            config.n_users,
            users.len()
        )));
    }
    for (k, u) in users.iter().enumerate() {
        if u.sin_angle.abs() > 1.0 || !u.sin_angle.is_finite() {
            return Err(Error::InvalidInput(format!(
                "user {k}: |sin_angle| must be <= 1"
            )));
        }
        if u.distance_m <= 0.0 || u.distance_m.is_nan() {
            return Err(Error::InvalidInput(format!("user {k}: distance must be > 0")));
        }
    }

    let n = config.n_antennas;
    let sqrt_n = (n as f64).sqrt();
    let freqs = config.subcarrier_frequencies();
    let mut matrices = Vec::with_capacity(freqs.len());
    for &f in &freqs {
        let mut h = DMatrix::<C64>::zeros(users.len(), n);
        for (k, u) in users.iter().enumerate() {
            let a = array_response(n, u.sin_angle, f, config.carrier_hz)?;
            let g = u.gain * sqrt_n;
            for i in 0..n {
                h[(k, i)] = g * a[i].conj();
            }
        }
        matrices.push(h);
    }
    Ok(ChannelSet {
        matrices,
        subcarrier_hz: freqs,
        users: users.to_vec(),
        carrier_hz: config.carrier_hz,
    })
}

/// Draw K users from the seeded stream: unit-variance circularly-symmetric
/// complex Gaussian gains, sin(angle) uniform on [-sin60, sin60], distance
/// uniform on [10, 100] m. Draw order per user is fixed (gain re, gain im,
/// angle, distance) so streams stay reproducible.
pub fn sample_users<R: Rng>(config: &SystemConfig, rng: &mut R) -> Vec<UserPath> {
    (0..config.n_users)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let gain = C64::new(re, im) / 2.0_f64.sqrt();
            let sin_angle = rng.gen_range(-SIN_SECTOR..SIN_SECTOR);
            let distance_m = rng.gen_range(10.0..100.0);
            UserPath {
                gain,
                sin_angle,
                distance_m,
            }
        })
        .collect()
}

// ============================================================================
// Absorption table and path loss
// ============================================================================

/// One piecewise-constant absorption segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionSegment {
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
    pub k_abs_db_per_m: f64,
}

/// Piecewise-constant molecular absorption in dB/m over a frequency band.
///
/// The bundled default table is a parametric fit (free-space baseline plus
/// three Gaussian absorption bands sampled on 1 GHz segments over 0.1-1 THz);
/// it ships as `data/absorption_default.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionTable {
    pub segments: Vec<AbsorptionSegment>,
}

static DEFAULT_TABLE_JSON: &str = include_str!("../data/absorption_default.json");

impl AbsorptionTable {
    /// The calibrated default table shipped with the crate.
    pub fn default_table() -> AbsorptionTable {
        let table: AbsorptionTable =
            serde_json::from_str(DEFAULT_TABLE_JSON).expect("bundled absorption table parses");
        table.validate().expect("bundled absorption table is well formed");
        table
    }

    pub fn from_json_str(json: &str) -> Result<AbsorptionTable> {
        let table: AbsorptionTable = serde_json::from_str(json).map_err(|e| Error::Parse {
            path: "<inline json>".into(),
            source: e,
        })?;
        table.validate()?;
        Ok(table)
    }

    pub fn from_file(path: &Path) -> Result<AbsorptionTable> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let table: AbsorptionTable = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            source: e,
        })?;
        table.validate()?;
        Ok(table)
    }

    /// Segments must be sorted, contiguous, non-overlapping and nonnegative.
    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::MalformedTable("no segments".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.f_lo_hz.is_finite() && s.f_hi_hz.is_finite() && s.f_lo_hz < s.f_hi_hz) {
                return Err(Error::MalformedTable(format!(
                    "segment {i}: requires f_lo < f_hi, got [{}, {}]",
                    s.f_lo_hz, s.f_hi_hz
                )));
            }
            if !(s.k_abs_db_per_m.is_finite() && s.k_abs_db_per_m >= 0.0) {
                return Err(Error::MalformedTable(format!(
                    "segment {i}: k_abs must be finite and >= 0"
                )));
            }
            if i > 0 {
                let prev_hi = self.segments[i - 1].f_hi_hz;
                let gap = (s.f_lo_hz - prev_hi).abs();
                if gap > 1e-6 * s.f_lo_hz.abs().max(1.0) {
                    return Err(Error::MalformedTable(format!(
                        "segments {} and {i} are not contiguous ({prev_hi} vs {})",
                        i - 1,
                        s.f_lo_hz
                    )));
                }
            }
        }
        Ok(())
    }

    /// Covered band as (lo, hi) in Hz.
    pub fn coverage(&self) -> (f64, f64) {
        (
            self.segments.first().map_or(0.0, |s| s.f_lo_hz),
            self.segments.last().map_or(0.0, |s| s.f_hi_hz),
        )
    }

    /// Absorption coefficient at `freq_hz`, from the segment containing it.
    pub fn k_abs_at(&self, freq_hz: f64) -> Result<f64> {
        let (lo, hi) = self.coverage();
        if !(freq_hz >= lo && freq_hz <= hi) {
            return Err(Error::OutOfCoverage {
                freq_hz,
                lo_hz: lo,
                hi_hz: hi,
            });
        }
        // Binary search on segment lower edges.
        let idx = self
            .segments
            .partition_point(|s| s.f_lo_hz <= freq_hz)
            .saturating_sub(1);
        Ok(self.segments[idx].k_abs_db_per_m)
    }
}

/// Free-space path loss `20*log10(4*pi*f*D/c)` in dB.
pub fn free_space_path_loss_db(freq_hz: f64, distance_m: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * freq_hz * distance_m / SPEED_OF_LIGHT).log10()
}

/// Total path loss: free space plus molecular absorption `k_abs(f) * D`.
pub fn path_loss_db(freq_hz: f64, distance_m: f64, table: &AbsorptionTable) -> Result<f64> {
    if distance_m <= 0.0 || distance_m.is_nan() {
        return Err(Error::InvalidInput("distance must be > 0".into()));
    }
    let k = table.k_abs_at(freq_hz)?;
    Ok(free_space_path_loss_db(freq_hz, distance_m) + k * distance_m)
}

/// Maximal contiguous frequency intervals where the absorption excess over
/// free space stays within `threshold_db`, i.e. `k_abs(f) * D <= threshold`.
/// Intervals come back sorted ascending and non-overlapping; an empty list is
/// a valid result.
pub fn available_window(
    distance_m: f64,
    table: &AbsorptionTable,
    threshold_db: f64,
) -> Result<Vec<(f64, f64)>> {
    if distance_m <= 0.0 || distance_m.is_nan() {
        return Err(Error::InvalidInput("distance must be > 0".into()));
    }
    if !threshold_db.is_finite() {
        return Err(Error::InvalidInput("threshold must be finite".into()));
    }
    let mut windows: Vec<(f64, f64)> = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for s in &table.segments {
        if s.k_abs_db_per_m * distance_m <= threshold_db {
            open = match open {
                Some((lo, _)) => Some((lo, s.f_hi_hz)),
                None => Some((s.f_lo_hz, s.f_hi_hz)),
            };
        } else if let Some(w) = open.take() {
            windows.push(w);
        }
    }
    if let Some(w) = open {
        windows.push(w);
    }
    Ok(windows)
}

/// Greedy distance-aware subband allocation: users sorted by descending
/// distance pick, in turn, the unallocated subcarrier with the lowest path
/// loss at their distance, round-robin until all M subcarriers are assigned.
/// Returns one index list per user (original user order); lists are disjoint
/// and their union is exactly 0..M-1.
pub fn allocate_subbands(
    users: &[UserPath],
    config: &SystemConfig,
    table: &AbsorptionTable,
) -> Result<Vec<Vec<usize>>> {
    if users.is_empty() {
        return Err(Error::InvalidInput("at least one user required".into()));
    }
    let freqs = config.subcarrier_frequencies();
    // Per-user loss on every subcarrier; errors if the grid leaves coverage.
    let mut losses = vec![vec![0.0f64; freqs.len()]; users.len()];
    for (k, u) in users.iter().enumerate() {
        for (m, &f) in freqs.iter().enumerate() {
            losses[k][m] = path_loss_db(f, u.distance_m, table)?;
        }
    }

    let mut order: Vec<usize> = (0..users.len()).collect();
    order.sort_by(|&a, &b| {
        users[b]
            .distance_m
            .partial_cmp(&users[a].distance_m)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut taken = vec![false; freqs.len()];
    let mut remaining = freqs.len();
    let mut allocations = vec![Vec::new(); users.len()];
    while remaining > 0 {
        for &k in &order {
            if remaining == 0 {
                break;
            }
            let mut best: Option<(usize, f64)> = None;
            for m in 0..freqs.len() {
                if taken[m] {
                    continue;
                }
                let loss = losses[k][m];
                if best.is_none_or(|(_, b)| loss < b) {
                    best = Some((m, loss));
                }
            }
            if let Some((m, _)) = best {
                taken[m] = true;
                remaining -= 1;
                allocations[k].push(m);
            }
        }
    }
    Ok(allocations)
}

/// Scale every channel row by the linear path-loss amplitude at that user's
/// distance and subcarrier. Only invoked when `apply_pathloss` is set.
pub fn apply_path_loss(channels: &mut ChannelSet, table: &AbsorptionTable) -> Result<()> {
    let users = channels.users.clone();
    for (m, h) in channels.matrices.iter_mut().enumerate() {
        let f = channels.subcarrier_hz[m];
        for (k, u) in users.iter().enumerate() {
            let loss_db = path_loss_db(f, u.distance_m, table)?;
            let amp = 10f64.powf(-loss_db / 20.0);
            for i in 0..h.ncols() {
                h[(k, i)] *= amp;
            }
        }
    }
    Ok(())
}
