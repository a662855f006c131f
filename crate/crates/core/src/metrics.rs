//! SINR, achievable sum-rate, beam patterns and beam-split diagnostics,
//! hardware power accounting, and energy efficiency.
//!
//! The SNR convention: total transmit power is normalized to 1 per
//! subcarrier, so SNR in dB maps to noise variance `10^(-SNR/10)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, SystemConfig, UserPath, C64};
use crate::error::{Error, Result};
use crate::precoders::{HardwareDescriptor, PrecoderOutput};

/// Per-component hardware power in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerProfile {
    pub baseband_w: f64,
    pub rf_chain_w: f64,
    pub ps_w: f64,
    pub td_w: f64,
    pub transmit_w: f64,
}

impl Default for PowerProfile {
    /// 250 mW baseband, 250 mW per RF chain, 30 mW per PS, 80 mW per TD,
    /// 2.5 W transmit.
    fn default() -> Self {
        PowerProfile {
            baseband_w: 0.25,
            rf_chain_w: 0.25,
            ps_w: 0.03,
            td_w: 0.08,
            transmit_w: 2.5,
        }
    }
}

impl PowerProfile {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("power.baseband_w", self.baseband_w),
            ("power.rf_chain_w", self.rf_chain_w),
            ("power.ps_w", self.ps_w),
            ("power.td_w", self.td_w),
            ("power.transmit_w", self.transmit_w),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid_config(name, "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Achievable-rate breakdown for one channel/precoder pair at one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub per_user_rate_bpshz: Vec<f64>,
    pub sum_rate_bpshz: f64,
    pub per_subcarrier_rates: Vec<f64>,
}

/// SINR of user k on subcarrier m under the given noise variance.
pub fn sinr(
    channels: &ChannelSet,
    precoder: &PrecoderOutput,
    user: usize,
    subcarrier: usize,
    noise_var: f64,
) -> f64 {
    let h = &channels.matrices[subcarrier];
    let f = &precoder.f_matrices[subcarrier];
    let k_total = f.ncols();
    let mut signal = 0.0;
    let mut interference = 0.0;
    for j in 0..k_total {
        let mut y = C64::new(0.0, 0.0);
        for i in 0..h.ncols() {
            y += h[(user, i)] * f[(i, j)];
        }
        if j == user {
            signal = y.norm_sqr();
        } else {
            interference += y.norm_sqr();
        }
    }
    signal / (interference + noise_var)
}

/// Per-subcarrier K x K cross matrices `Y_m = H_m * F_m`; the rate at any SNR
/// follows from these without touching the N-dimensional arrays again.
pub fn cross_products(channels: &ChannelSet, precoder: &PrecoderOutput) -> Vec<DMatrix<C64>> {
    channels
        .matrices
        .iter()
        .zip(&precoder.f_matrices)
        .map(|(h, f)| h * f)
        .collect()
}

/// Sum rate from precomputed cross matrices:
/// `(1/M) * sum_m sum_k log2(1 + SINR(k, m))`.
pub fn sum_rate_from_cross(cross: &[DMatrix<C64>], snr_db: f64) -> RateReport {
    let noise_var = 10f64.powf(-snr_db / 10.0);
    let m_total = cross.len();
    let k_total = cross.first().map_or(0, |y| y.nrows());
    let mut per_user = vec![0.0; k_total];
    let mut per_subcarrier = vec![0.0; m_total];
    for (m, y) in cross.iter().enumerate() {
        for k in 0..k_total {
            let signal = y[(k, k)].norm_sqr();
            let interference: f64 = (0..k_total)
                .filter(|&j| j != k)
                .map(|j| y[(k, j)].norm_sqr())
                .sum();
            let rate = (1.0 + signal / (interference + noise_var)).log2();
            per_user[k] += rate / m_total as f64;
            per_subcarrier[m] += rate;
        }
    }
    let sum_rate_bpshz = per_subcarrier.iter().sum::<f64>() / m_total as f64;
    debug_assert!(
        (sum_rate_bpshz - per_user.iter().sum::<f64>()).abs()
            <= 1e-9 * sum_rate_bpshz.abs().max(1e-30)
    );
    RateReport {
        per_user_rate_bpshz: per_user,
        sum_rate_bpshz,
        per_subcarrier_rates: per_subcarrier,
    }
}

/// Achievable sum rate of a precoder on a channel realization at `snr_db`.
pub fn sum_rate(channels: &ChannelSet, precoder: &PrecoderOutput, snr_db: f64) -> RateReport {
    sum_rate_from_cross(&cross_products(channels, precoder), snr_db)
}

/// Normalized array gain toward the user's true direction on every
/// subcarrier: `|a(theta, f_m)^H f_m| / ||f_m||` for a single-column
/// precoder. Values live in [0, 1].
pub fn array_gain_profile(
    precoder: &PrecoderOutput,
    user: &UserPath,
    config: &SystemConfig,
) -> Result<Vec<f64>> {
    let freqs = config.subcarrier_frequencies();
    if freqs.len() != precoder.f_matrices.len() {
        return Err(Error::DimensionMismatch(format!(
            "config has {} subcarriers, precoder has {}",
            freqs.len(),
            precoder.f_matrices.len()
        )));
    }
    if precoder.f_matrices.first().map_or(0, |f| f.ncols()) != 1 {
        return Err(Error::InvalidInput(
            "array_gain_profile expects a single-user (one-column) precoder".into(),
        ));
    }
    let n = precoder.f_matrices[0].nrows();
    let mut gains = Vec::with_capacity(freqs.len());
    for (m, &f) in freqs.iter().enumerate() {
        let col = precoder.f_matrices[m].column(0);
        let norm = col.norm();
        if norm == 0.0 {
            gains.push(0.0);
            continue;
        }
        let a = crate::channel::array_response(n, user.sin_angle, f, config.carrier_hz)?;
        let inner: C64 = a.iter().zip(col.iter()).map(|(ai, wi)| ai.conj() * wi).sum();
        gains.push(inner.norm() / norm);
    }
    Ok(gains)
}

/// `|a(theta', f)^H w|` over a list of sine-angles. Shared by beam-peak
/// search and the beam-pattern diagnostic.
pub fn array_pattern(
    weights: &DVector<C64>,
    freq_hz: f64,
    carrier_hz: f64,
    sin_angles: &[f64],
) -> Vec<f64> {
    let n = weights.len();
    let scale = 1.0 / (n as f64).sqrt();
    sin_angles
        .iter()
        .map(|&s| {
            // incremental rotation instead of n trig calls per element
            let step = Complex::from_polar(1.0, std::f64::consts::PI * (freq_hz / carrier_hz) * s);
            let mut rot = C64::new(1.0, 0.0);
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                acc += rot * weights[i];
                rot *= step;
            }
            (acc * scale).norm()
        })
        .collect()
}

/// Sine-angle of the beam peak: argmax of `|a(theta', f)^H w|` over a uniform
/// grid on [-1, 1] with at least 1024 points. Ties resolve to the lowest
/// grid index.
pub fn beam_peak(
    weights: &DVector<C64>,
    freq_hz: f64,
    config: &SystemConfig,
    grid_points: usize,
) -> Result<f64> {
    if grid_points < 1024 {
        return Err(Error::InvalidInput(format!(
            "beam_peak grid must have >= 1024 points, got {grid_points}"
        )));
    }
    let grid = sin_grid(grid_points);
    let pattern = array_pattern(weights, freq_hz, config.carrier_hz, &grid);
    let mut best = 0usize;
    for (i, v) in pattern.iter().enumerate() {
        if *v > pattern[best] {
            best = i;
        }
    }
    Ok(grid[best])
}

/// Uniform sine-angle grid over [-1, 1], endpoints included.
pub fn sin_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| -1.0 + 2.0 * i as f64 / (points - 1) as f64)
        .collect()
}

/// Total front-end power: baseband + RF chains + PSs + TDs.
pub fn hardware_power(hardware: &HardwareDescriptor, profile: &PowerProfile) -> f64 {
    hardware.n_baseband as f64 * profile.baseband_w
        + hardware.n_rf_used as f64 * profile.rf_chain_w
        + hardware.n_ps as f64 * profile.ps_w
        + hardware.n_td as f64 * profile.td_w
}

/// Rate-over-power ratio in Gbps/W: `rate * B / (P_transmit + P_hardware)`.
pub fn energy_efficiency(
    rate: &RateReport,
    hardware: &HardwareDescriptor,
    config: &SystemConfig,
) -> f64 {
    let gbps = rate.sum_rate_bpshz * config.bandwidth_hz / 1e9;
    gbps / (config.power_profile.transmit_w + hardware_power(hardware, &config.power_profile))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gen_channel, C64};
    use crate::precoders::{
        self, fully_digital_zf, hybrid_full_ps, hybrid_full_td, Scheme,
    };
    use nalgebra::DMatrix;

    fn user(sin_angle: f64) -> UserPath {
        UserPath {
            gain: C64::new(1.0, 0.0),
            sin_angle,
            distance_m: 20.0,
        }
    }

    fn config(n: usize, k: usize, m: usize) -> SystemConfig {
        SystemConfig {
            n_antennas: n,
            n_rf: k,
            n_users: k,
            n_subcarriers: m,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn sinr_zero_precoder_column_is_zero() {
        let cfg = config(8, 1, 2);
        let ch = gen_channel(&cfg, &[user(0.1)]).unwrap();
        let zero = PrecoderOutput {
            f_matrices: vec![DMatrix::<C64>::zeros(8, 1); 2],
            hardware: Scheme::Digital.hardware(8, 1, 0),
            scheme_name: "digital".into(),
        };
        assert_eq!(sinr(&ch, &zero, 0, 0, 1.0), 0.0);
    }

    #[test]
    fn sinr_matched_single_user() {
        // K=1, N=16, g=1, matched beam, SNR 0 dB: SINR = 16, rate = log2(17).
        let cfg = config(16, 1, 4);
        let ch = gen_channel(&cfg, &[user(0.3)]).unwrap();
        let out = fully_digital_zf(&ch).unwrap();
        for m in 0..4 {
            let s = sinr(&ch, &out, 0, m, 1.0);
            assert!((s - 16.0).abs() < 1e-9, "m={m}: {s}");
        }
        let report = sum_rate(&ch, &out, 0.0);
        assert!((report.sum_rate_bpshz - 17f64.log2()).abs() < 1e-9);
    }

    #[test]
    fn sum_rate_zero_channel_is_zero() {
        let cfg = config(8, 1, 3);
        let mut ch = gen_channel(&cfg, &[user(0.2)]).unwrap();
        let out = fully_digital_zf(&ch).unwrap();
        for h in &mut ch.matrices {
            h.fill(C64::new(0.0, 0.0));
        }
        let report = sum_rate(&ch, &out, 10.0);
        assert_eq!(report.sum_rate_bpshz, 0.0);
    }

    #[test]
    fn sum_rate_single_user_analytic() {
        let cfg = config(64, 1, 8);
        let g = C64::new(0.6, -0.3);
        let u = UserPath {
            gain: g,
            sin_angle: -0.25,
            distance_m: 30.0,
        };
        let ch = gen_channel(&cfg, &[u]).unwrap();
        let out = fully_digital_zf(&ch).unwrap();
        for snr_db in [-5.0, 0.0, 12.0] {
            let report = sum_rate(&ch, &out, snr_db);
            let want = (1.0 + 64.0 * g.norm_sqr() * 10f64.powf(snr_db / 10.0)).log2();
            assert!(
                (report.sum_rate_bpshz - want).abs() < 1e-9,
                "snr {snr_db}: {} vs {want}",
                report.sum_rate_bpshz
            );
        }
    }

    #[test]
    fn sum_rate_monotone_in_snr() {
        let cfg = config(32, 2, 4);
        let ch = gen_channel(&cfg, &[user(0.4), user(-0.3)]).unwrap();
        let out = fully_digital_zf(&ch).unwrap();
        let low = sum_rate(&ch, &out, 0.0).sum_rate_bpshz;
        let high = sum_rate(&ch, &out, 10.0).sum_rate_bpshz;
        assert!(high > low);
    }

    #[test]
    fn rate_report_is_internally_consistent() {
        let cfg = config(32, 3, 6);
        let ch = gen_channel(&cfg, &[user(0.4), user(-0.3), user(0.75)]).unwrap();
        let out = fully_digital_zf(&ch).unwrap();
        let report = sum_rate(&ch, &out, 10.0);
        let from_users: f64 = report.per_user_rate_bpshz.iter().sum();
        let from_subcarriers =
            report.per_subcarrier_rates.iter().sum::<f64>() / report.per_subcarrier_rates.len() as f64;
        let tol = 1e-9 * report.sum_rate_bpshz.abs();
        assert!((report.sum_rate_bpshz - from_users).abs() <= tol);
        assert!((report.sum_rate_bpshz - from_subcarriers).abs() <= tol);
    }

    #[test]
    fn sum_rate_invariant_under_column_phase_rotation() {
        let cfg = config(32, 2, 4);
        let ch = gen_channel(&cfg, &[user(0.4), user(-0.3)]).unwrap();
        let mut out = fully_digital_zf(&ch).unwrap();
        let base = sum_rate(&ch, &out, 10.0).sum_rate_bpshz;
        let rot = C64::from_polar(1.0, 1.234);
        for f in &mut out.f_matrices {
            for i in 0..f.nrows() {
                f[(i, 1)] *= rot;
            }
        }
        let rotated = sum_rate(&ch, &out, 10.0).sum_rate_bpshz;
        assert!((rotated - base).abs() <= 1e-9 * base);
    }

    #[test]
    fn gain_profile_full_td_is_flat_one() {
        let cfg = config(64, 1, 9);
        let u = user(0.57);
        let ch = gen_channel(&cfg, &[u]).unwrap();
        let out = hybrid_full_td(&ch).unwrap();
        for g in array_gain_profile(&out, &u, &cfg).unwrap() {
            assert!((g - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gain_profile_full_ps_broadside_is_flat_one() {
        let cfg = config(64, 1, 9);
        let u = user(0.0);
        let ch = gen_channel(&cfg, &[u]).unwrap();
        let out = hybrid_full_ps(&ch).unwrap();
        for g in array_gain_profile(&out, &u, &cfg).unwrap() {
            assert!((g - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gain_profile_full_ps_band_edge_split_is_severe() {
        // N=1024, sin=0.5, 20 GHz at 350 GHz: band-edge gain collapses below
        // 0.1 and matches the Dirichlet closed form.
        let cfg = config(1024, 1, 8);
        let u = user(0.5);
        let ch = gen_channel(&cfg, &[u]).unwrap();
        let out = hybrid_full_ps(&ch).unwrap();
        let gains = array_gain_profile(&out, &u, &cfg).unwrap();
        let edge = gains[0];
        assert!(edge < 0.1, "edge gain {edge}");
        let delta = ch.subcarrier_hz[0] / cfg.carrier_hz - 1.0;
        let x = std::f64::consts::PI * delta * 0.5 / 2.0;
        let closed = ((1024.0 * x).sin() / (1024.0 * x.sin())).abs();
        assert!((edge - closed).abs() < 1e-9, "{edge} vs {closed}");
    }

    #[test]
    fn beam_peak_examples() {
        let cfg = config(256, 1, 2);
        let design = 0.5;
        let w = crate::channel::array_response(256, design, cfg.carrier_hz, cfg.carrier_hz)
            .unwrap();
        let step = 2.0 / 8191.0;

        let at_carrier = beam_peak(&w, cfg.carrier_hz, &cfg, 8192).unwrap();
        assert!((at_carrier - design).abs() <= step);

        // 2% above the carrier the peak migrates to sin/1.02
        let shifted = beam_peak(&w, 1.02 * cfg.carrier_hz, &cfg, 8192).unwrap();
        assert!((shifted - design / 1.02).abs() <= step, "peak {shifted}");

        // true-time-delay weights keep the peak pinned at every frequency
        for f in [cfg.carrier_hz * 0.98, cfg.carrier_hz, cfg.carrier_hz * 1.02] {
            let ttd = precoders::ttd_full_column(256, design, f, cfg.carrier_hz);
            let peak = beam_peak(&ttd, f, &cfg, 8192).unwrap();
            assert!((peak - design).abs() <= step, "f={f}: peak {peak}");
        }
    }

    #[test]
    fn beam_peak_law_across_band() {
        let cfg = config(512, 1, 2);
        let design = -0.44;
        let w = crate::channel::array_response(512, design, cfg.carrier_hz, cfg.carrier_hz)
            .unwrap();
        let step = 2.0 / 8191.0;
        for i in 0..9 {
            let f = cfg.carrier_hz - cfg.bandwidth_hz / 2.0
                + cfg.bandwidth_hz * i as f64 / 8.0;
            let peak = beam_peak(&w, f, &cfg, 8192).unwrap();
            assert!(
                (peak * (f / cfg.carrier_hz) - design).abs() <= (f / cfg.carrier_hz) * step + 1e-12,
                "f={f}: peak {peak}"
            );
        }
    }

    #[test]
    fn beam_peak_rejects_small_grid() {
        let cfg = config(16, 1, 2);
        let w = crate::channel::array_response(16, 0.0, cfg.carrier_hz, cfg.carrier_hz).unwrap();
        assert!(beam_peak(&w, cfg.carrier_hz, &cfg, 512).is_err());
    }

    #[test]
    fn hardware_power_examples() {
        let profile = PowerProfile::default();
        let full_ps = Scheme::HybridFullPs.hardware(1024, 4, 0);
        assert!((hardware_power(&full_ps, &profile) - 124.13).abs() < 1e-9);
        let dpp = Scheme::DelayPhase.hardware(1024, 4, 32);
        assert!((hardware_power(&dpp, &profile) - 134.37).abs() < 1e-9);
        let zero = HardwareDescriptor {
            n_rf_used: 0,
            n_ps: 0,
            n_td: 0,
            n_baseband: 0,
        };
        assert_eq!(hardware_power(&zero, &profile), 0.0);
    }

    #[test]
    fn hardware_power_totals_at_full_scale() {
        let profile = PowerProfile::default();
        let wants = [
            (Scheme::HybridSubPs, 31.97),
            (Scheme::HybridSubTd, 83.17),
            (Scheme::HybridFullPs, 124.13),
            (Scheme::DelayPhase, 134.37),
            (Scheme::HybridFullTd, 328.93),
        ];
        let mut prev = 0.0;
        for (scheme, want) in wants {
            let got = hardware_power(&scheme.hardware(1024, 4, 32), &profile);
            assert!((got - want).abs() < 1e-9, "{scheme}: {got} vs {want}");
            assert!(got > prev);
            prev = got;
        }
    }

    #[test]
    fn energy_efficiency_examples() {
        let cfg = SystemConfig::default();
        let hw = Scheme::HybridSubPs.hardware(1024, 4, 32); // 31.97 W
        let zero_rate = RateReport {
            per_user_rate_bpshz: vec![0.0; 4],
            sum_rate_bpshz: 0.0,
            per_subcarrier_rates: vec![0.0; 128],
        };
        assert_eq!(energy_efficiency(&zero_rate, &hw, &cfg), 0.0);

        let rate = RateReport {
            per_user_rate_bpshz: vec![10.0; 4],
            sum_rate_bpshz: 40.0,
            per_subcarrier_rates: vec![40.0; 128],
        };
        // 40 bps/Hz * 20 GHz = 800 Gbps over 2.5 + 31.97 = 34.47 W
        let ee = energy_efficiency(&rate, &hw, &cfg);
        assert!((ee - 800.0 / 34.47).abs() < 1e-9, "ee {ee}");

        let mut doubled = cfg.clone();
        doubled.power_profile.baseband_w *= 2.0;
        doubled.power_profile.rf_chain_w *= 2.0;
        doubled.power_profile.ps_w *= 2.0;
        doubled.power_profile.td_w *= 2.0;
        doubled.power_profile.transmit_w *= 2.0;
        assert!(energy_efficiency(&rate, &hw, &doubled) < ee);
    }
}
