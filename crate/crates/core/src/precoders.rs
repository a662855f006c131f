//! The six precoder architectures and the shared zero-forcing /
//! power-normalization core.
//!
//! Every scheme returns per-subcarrier effective N x K precoding matrices
//! under a unit total transmit power constraint (Frobenius norm 1 per
//! subcarrier) plus a hardware descriptor counting RF chains, phase shifters
//! and time-delayers. Phase-shifter weights are frequency-flat and designed
//! at the carrier; time-delayer weights contribute `-2*pi*f*t` phase and so
//! track the subcarrier exactly.

use nalgebra::{DMatrix, DVector};

use crate::channel::{array_response, ChannelSet, SystemConfig, C64};
use crate::error::{Error, Result};

/// Gram condition number above which a channel draw counts as singular.
pub const GRAM_COND_LIMIT: f64 = 1e12;

/// Component counts of the analog/digital front end behind a precoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HardwareDescriptor {
    pub n_rf_used: usize,
    pub n_ps: usize,
    pub n_td: usize,
    /// 1 when a baseband digital stage exists, 0 otherwise.
    pub n_baseband: usize,
}

/// Per-subcarrier effective precoding matrices plus the hardware that would
/// realize them.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderOutput {
    /// M matrices, each N x K, Frobenius norm 1.
    pub f_matrices: Vec<DMatrix<C64>>,
    pub hardware: HardwareDescriptor,
    pub scheme_name: String,
}

// ============================================================================
// Scheme registry
// ============================================================================

/// The precoder architectures the runner knows about. The string forms are
/// the exact labels used in config files and CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Digital,
    Analog,
    HybridFullPs,
    HybridSubPs,
    HybridFullTd,
    HybridSubTd,
    DelayPhase,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Digital,
        Scheme::Analog,
        Scheme::HybridFullPs,
        Scheme::HybridSubPs,
        Scheme::HybridFullTd,
        Scheme::HybridSubTd,
        Scheme::DelayPhase,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Digital => "digital",
            Scheme::Analog => "analog",
            Scheme::HybridFullPs => "hybrid-full-ps",
            Scheme::HybridSubPs => "hybrid-sub-ps",
            Scheme::HybridFullTd => "hybrid-full-td",
            Scheme::HybridSubTd => "hybrid-sub-td",
            Scheme::DelayPhase => "delay-phase",
        }
    }

    /// Component counts from the wiring rules alone, without running the
    /// precoder. `n_td_per_rf` only matters for the delay-phase structure.
    pub fn hardware(
        &self,
        n_antennas: usize,
        n_users: usize,
        n_td_per_rf: usize,
    ) -> HardwareDescriptor {
        let (n, k, kd) = (n_antennas, n_users, n_td_per_rf);
        match self {
            Scheme::Digital => HardwareDescriptor {
                n_rf_used: n,
                n_ps: 0,
                n_td: 0,
                n_baseband: 1,
            },
            Scheme::Analog => HardwareDescriptor {
                n_rf_used: 1,
                n_ps: n,
                n_td: 0,
                n_baseband: 0,
            },
            Scheme::HybridFullPs => HardwareDescriptor {
                n_rf_used: k,
                n_ps: k * n,
                n_td: 0,
                n_baseband: 1,
            },
            Scheme::HybridSubPs => HardwareDescriptor {
                n_rf_used: k,
                n_ps: n,
                n_td: 0,
                n_baseband: 1,
            },
            Scheme::HybridFullTd => HardwareDescriptor {
                n_rf_used: k,
                n_ps: 0,
                n_td: k * n,
                n_baseband: 1,
            },
            Scheme::HybridSubTd => HardwareDescriptor {
                n_rf_used: k,
                n_ps: 0,
                n_td: n,
                n_baseband: 1,
            },
            Scheme::DelayPhase => HardwareDescriptor {
                n_rf_used: k,
                n_ps: k * n,
                n_td: k * kd,
                n_baseband: 1,
            },
        }
    }

    /// Run this scheme on a channel realization.
    pub fn compute(&self, channels: &ChannelSet, config: &SystemConfig) -> Result<PrecoderOutput> {
        let k = channels.n_users();
        match self {
            Scheme::Digital => fully_digital_zf(channels),
            Scheme::Analog => analog_beamforming(channels),
            Scheme::HybridFullPs | Scheme::HybridSubPs | Scheme::HybridFullTd
            | Scheme::HybridSubTd | Scheme::DelayPhase => {
                if config.n_rf != k {
                    return Err(Error::invalid_config(
                        "n_rf",
                        format!("two-stage precoding requires n_rf == n_users ({} != {k})", config.n_rf),
                    ));
                }
                match self {
                    Scheme::HybridFullPs => hybrid_full_ps(channels),
                    Scheme::HybridSubPs => hybrid_sub_ps(channels),
                    Scheme::HybridFullTd => hybrid_full_td(channels),
                    Scheme::HybridSubTd => hybrid_sub_td(channels),
                    Scheme::DelayPhase => delay_phase(channels, config.n_td_per_rf),
                    _ => unreachable!(),
                }
            }
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Scheme> {
        Scheme::ALL
            .iter()
            .copied()
            .find(|scheme| scheme.as_str() == s)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

// ============================================================================
// Shared digital core
// ============================================================================

/// Zero-forcing precoder `H^H (H H^H)^-1` for a K x R effective channel with
/// K <= R. Fails with the offending Gram condition number when the channel is
/// rank deficient.
pub fn zf_digital(h_eff: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let (k, r) = (h_eff.nrows(), h_eff.ncols());
    if k == 0 || r == 0 || k > r {
        return Err(Error::DimensionMismatch(format!(
            "zero-forcing needs K <= R, got {k} x {r}"
        )));
    }
    let gram = h_eff * h_eff.adjoint();
    let cond = hermitian_condition(&gram);
    if !cond.is_finite() || cond > GRAM_COND_LIMIT {
        return Err(Error::SingularChannel { cond });
    }
    let inv = gram
        .lu()
        .try_inverse()
        .ok_or(Error::SingularChannel { cond })?;
    Ok(h_eff.adjoint() * inv)
}

/// Condition number of a Hermitian PSD matrix, via the real symmetric
/// embedding [[Re, -Im], [Im, Re]] (same spectrum, doubled multiplicity).
fn hermitian_condition(gram: &DMatrix<C64>) -> f64 {
    let k = gram.nrows();
    let mut real = DMatrix::<f64>::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            let v = gram[(i, j)];
            real[(i, j)] = v.re;
            real[(i + k, j + k)] = v.re;
            real[(i, j + k)] = -v.im;
            real[(i + k, j)] = v.im;
        }
    }
    let eigenvalues = real.symmetric_eigen().eigenvalues;
    let max = eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 || !min.is_finite() || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Scale a matrix to unit Frobenius norm (per-subcarrier total power 1).
pub fn normalize_power(f_raw: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let norm = f_raw.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidInput(
            "cannot power-normalize an all-zero precoding matrix".into(),
        ));
    }
    Ok(f_raw.unscale(norm))
}

// ============================================================================
// Analog beamformer builders (also used directly by diagnostics and tests)
// ============================================================================

/// Full-connected PS beamformer: column k is the carrier steering vector of
/// user k, entries of constant modulus 1/sqrt(N).
pub fn full_ps_analog(channels: &ChannelSet) -> Result<DMatrix<C64>> {
    let n = channels.n_antennas();
    let k = channels.n_users();
    let mut a = DMatrix::<C64>::zeros(n, k);
    for (j, u) in channels.users.iter().enumerate() {
        let col = array_response(n, u.sin_angle, channels.carrier_hz, channels.carrier_hz)?;
        a.set_column(j, &col);
    }
    Ok(a)
}

/// Sub-connected PS beamformer: RF chain k drives the contiguous subarray of
/// P = N/K elements starting at k*P, with carrier phases indexed by the
/// global element label and constant modulus 1/sqrt(P) on its block.
pub fn sub_ps_analog(channels: &ChannelSet) -> Result<DMatrix<C64>> {
    let n = channels.n_antennas();
    let k = channels.n_users();
    if !n.is_multiple_of(k) {
        return Err(Error::DimensionMismatch(format!(
            "sub-connected structure needs N divisible by K ({n} % {k} != 0)"
        )));
    }
    let p = n / k;
    let scale = 1.0 / (p as f64).sqrt();
    let pi = std::f64::consts::PI;
    let mut a = DMatrix::<C64>::zeros(n, k);
    for (j, u) in channels.users.iter().enumerate() {
        for idx in j * p..(j + 1) * p {
            a[(idx, j)] = C64::from_polar(scale, -pi * idx as f64 * u.sin_angle);
        }
    }
    Ok(a)
}

/// True-time-delay column: element n carries delay `n*sin/(2*f_c)` plus a
/// common nonnegative offset, realized at frequency f as phase `-2*pi*f*t_n`.
pub fn ttd_full_column(n_antennas: usize, sin_angle: f64, freq_hz: f64, carrier_hz: f64) -> DVector<C64> {
    let scale = 1.0 / (n_antennas as f64).sqrt();
    let base = sin_angle / (2.0 * carrier_hz);
    let offset = if sin_angle < 0.0 {
        -((n_antennas - 1) as f64) * base
    } else {
        0.0
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    DVector::from_fn(n_antennas, |n, _| {
        let t = n as f64 * base + offset;
        C64::from_polar(scale, -two_pi * freq_hz * t)
    })
}

/// Sub-connected TTD beamformer at one subcarrier: exact per-element delays
/// on each user's contiguous subarray.
pub fn ttd_sub_analog(channels: &ChannelSet, freq_hz: f64) -> Result<DMatrix<C64>> {
    let n = channels.n_antennas();
    let k = channels.n_users();
    if !n.is_multiple_of(k) {
        return Err(Error::DimensionMismatch(format!(
            "sub-connected structure needs N divisible by K ({n} % {k} != 0)"
        )));
    }
    let p = n / k;
    let scale = 1.0 / (p as f64).sqrt();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = DMatrix::<C64>::zeros(n, k);
    for (j, u) in channels.users.iter().enumerate() {
        let base = u.sin_angle / (2.0 * channels.carrier_hz);
        let block = j * p..(j + 1) * p;
        let min_delay = block
            .clone()
            .map(|idx| idx as f64 * base)
            .fold(f64::INFINITY, f64::min);
        let offset = if min_delay < 0.0 { -min_delay } else { 0.0 };
        for idx in block {
            let t = idx as f64 * base + offset;
            a[(idx, j)] = C64::from_polar(scale, -two_pi * freq_hz * t);
        }
    }
    Ok(a)
}

/// Delay-phase composite column for one user at one subcarrier: the PS layer
/// applies carrier phases indexed within each TD group, the TD layer applies
/// group delays `l*P*sin/(2*f_c)` (shifted nonnegative), and the two multiply
/// elementwise into a constant-modulus unit-norm column.
///
/// The group-level carrier phase lives on the TD side, so only the
/// within-group beam-split residual survives; with one TD per antenna this
/// degenerates to exact true-time-delay steering.
pub fn delay_phase_column(
    n_antennas: usize,
    n_td_per_rf: usize,
    sin_angle: f64,
    freq_hz: f64,
    carrier_hz: f64,
) -> Result<DVector<C64>> {
    if n_td_per_rf == 0 || !n_antennas.is_multiple_of(n_td_per_rf) {
        return Err(Error::DimensionMismatch(format!(
            "delay-phase needs N divisible by K_d ({n_antennas} % {n_td_per_rf})"
        )));
    }
    let p = n_antennas / n_td_per_rf;
    let scale = 1.0 / (n_antennas as f64).sqrt();
    let pi = std::f64::consts::PI;
    let two_pi = 2.0 * pi;
    let group_base = (p as f64) * sin_angle / (2.0 * carrier_hz);
    let offset = if sin_angle < 0.0 {
        -((n_td_per_rf - 1) as f64) * group_base
    } else {
        0.0
    };
    let mut col = DVector::<C64>::zeros(n_antennas);
    for l in 0..n_td_per_rf {
        let t_group = l as f64 * group_base + offset;
        let td_phase = -two_pi * freq_hz * t_group;
        for q in 0..p {
            let ps_phase = -pi * q as f64 * sin_angle;
            col[l * p + q] = C64::from_polar(scale, ps_phase + td_phase);
        }
    }
    Ok(col)
}

// ============================================================================
// The six architectures
// ============================================================================

/// Shared second stage: per-subcarrier ZF on the effective channel through
/// the analog beamformer, then power normalization of the composite.
fn two_stage<F>(
    channels: &ChannelSet,
    mut analog_at: F,
    hardware: HardwareDescriptor,
    scheme_name: &str,
) -> Result<PrecoderOutput>
where
    F: FnMut(usize) -> Result<DMatrix<C64>>,
{
    let mut f_matrices = Vec::with_capacity(channels.n_subcarriers());
    for m in 0..channels.n_subcarriers() {
        let a = analog_at(m)?;
        let h_eff = &channels.matrices[m] * &a;
        let d = zf_digital(&h_eff)?;
        f_matrices.push(normalize_power(&(a * d))?);
    }
    Ok(PrecoderOutput {
        f_matrices,
        hardware,
        scheme_name: scheme_name.to_string(),
    })
}

/// Single-RF-chain analog beamforming: one carrier-frequency beam toward the
/// single user's physical direction, identical on every subcarrier.
pub fn analog_beamforming(channels: &ChannelSet) -> Result<PrecoderOutput> {
    if channels.n_users() != 1 {
        return Err(Error::InvalidInput(format!(
            "analog beamforming serves exactly one user, got {}",
            channels.n_users()
        )));
    }
    let n = channels.n_antennas();
    let w = array_response(
        n,
        channels.users[0].sin_angle,
        channels.carrier_hz,
        channels.carrier_hz,
    )?;
    let f = DMatrix::from_columns(&[w]);
    Ok(PrecoderOutput {
        f_matrices: vec![f; channels.n_subcarriers()],
        hardware: HardwareDescriptor {
            n_rf_used: 1,
            n_ps: n,
            n_td: 0,
            n_baseband: 0,
        },
        scheme_name: Scheme::Analog.as_str().to_string(),
    })
}

/// Full-connected PS hybrid: carrier steering per user, then per-subcarrier ZF.
pub fn hybrid_full_ps(channels: &ChannelSet) -> Result<PrecoderOutput> {
    let a = full_ps_analog(channels)?;
    let hw = Scheme::HybridFullPs.hardware(channels.n_antennas(), channels.n_users(), 0);
    two_stage(channels, |_| Ok(a.clone()), hw, Scheme::HybridFullPs.as_str())
}

/// Sub-connected PS hybrid: block-diagonal carrier steering, then ZF.
pub fn hybrid_sub_ps(channels: &ChannelSet) -> Result<PrecoderOutput> {
    let a = sub_ps_analog(channels)?;
    let hw = Scheme::HybridSubPs.hardware(channels.n_antennas(), channels.n_users(), 0);
    two_stage(channels, |_| Ok(a.clone()), hw, Scheme::HybridSubPs.as_str())
}

/// Full-connected TTD hybrid: exact per-subcarrier steering per user.
pub fn hybrid_full_td(channels: &ChannelSet) -> Result<PrecoderOutput> {
    let n = channels.n_antennas();
    let k = channels.n_users();
    let hw = Scheme::HybridFullTd.hardware(n, k, 0);
    two_stage(
        channels,
        |m| {
            let f = channels.subcarrier_hz[m];
            let cols: Vec<DVector<C64>> = channels
                .users
                .iter()
                .map(|u| ttd_full_column(n, u.sin_angle, f, channels.carrier_hz))
                .collect();
            Ok(DMatrix::from_columns(&cols))
        },
        hw,
        Scheme::HybridFullTd.as_str(),
    )
}

/// Sub-connected TTD hybrid: exact per-subcarrier steering on each subarray.
pub fn hybrid_sub_td(channels: &ChannelSet) -> Result<PrecoderOutput> {
    let hw = Scheme::HybridSubTd.hardware(channels.n_antennas(), channels.n_users(), 0);
    two_stage(
        channels,
        |m| ttd_sub_analog(channels, channels.subcarrier_hz[m]),
        hw,
        Scheme::HybridSubTd.as_str(),
    )
}

/// Delay-phase precoding: a small TD network between each RF chain and the
/// full PS layer compensates the group-level beam split, then per-subcarrier
/// ZF cancels inter-user interference.
pub fn delay_phase(channels: &ChannelSet, n_td_per_rf: usize) -> Result<PrecoderOutput> {
    let n = channels.n_antennas();
    let k = channels.n_users();
    if n_td_per_rf == 0 || !n.is_multiple_of(n_td_per_rf) {
        return Err(Error::DimensionMismatch(format!(
            "delay-phase needs K_d >= 1 and N divisible by K_d ({n} % {n_td_per_rf})"
        )));
    }
    let hw = Scheme::DelayPhase.hardware(n, k, n_td_per_rf);
    two_stage(
        channels,
        |m| {
            let f = channels.subcarrier_hz[m];
            let cols: Vec<DVector<C64>> = channels
                .users
                .iter()
                .map(|u| delay_phase_column(n, n_td_per_rf, u.sin_angle, f, channels.carrier_hz))
                .collect::<Result<_>>()?;
            Ok(DMatrix::from_columns(&cols))
        },
        hw,
        Scheme::DelayPhase.as_str(),
    )
}

/// Classical fully-digital ZF: one RF chain per antenna, per-subcarrier
/// pseudoinverse of the raw channel.
pub fn fully_digital_zf(channels: &ChannelSet) -> Result<PrecoderOutput> {
    let n = channels.n_antennas();
    let k = channels.n_users();
    if k > n {
        return Err(Error::DimensionMismatch(format!(
            "fully-digital ZF needs K <= N, got {k} > {n}"
        )));
    }
    let mut f_matrices = Vec::with_capacity(channels.n_subcarriers());
    for h in &channels.matrices {
        f_matrices.push(normalize_power(&zf_digital(h)?)?);
    }
    Ok(PrecoderOutput {
        f_matrices,
        hardware: HardwareDescriptor {
            n_rf_used: n,
            n_ps: 0,
            n_td: 0,
            n_baseband: 1,
        },
        scheme_name: Scheme::Digital.as_str().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gen_channel, sample_users, UserPath};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

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

    fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<C64> {
        DMatrix::from_fn(rows, cols, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    /// Independent oracle: direct summation of conj(a(theta, f)) . w with
    /// explicitly written element phases.
    fn brute_force_gain(weights: &DVector<C64>, sin_angle: f64, freq: f64, carrier: f64) -> f64 {
        let n = weights.len();
        let scale = 1.0 / (n as f64).sqrt();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            let phase = std::f64::consts::PI * i as f64 * (freq / carrier) * sin_angle;
            acc += C64::from_polar(scale, phase) * weights[i];
        }
        acc.norm()
    }

    /// Dirichlet-kernel magnitude |sin(n*pi*x/2) / (n*sin(pi*x/2))|.
    fn dirichlet(n: usize, x: f64) -> f64 {
        let half = std::f64::consts::PI * x / 2.0;
        if half.sin().abs() < 1e-300 {
            1.0
        } else {
            ((n as f64 * half).sin() / (n as f64 * half.sin())).abs()
        }
    }

    // ---------------------------------------------------------------- zf core

    #[test]
    fn zf_identity_is_identity() {
        let eye = DMatrix::<C64>::identity(3, 3);
        let w = zf_digital(&eye).unwrap();
        assert!((w - DMatrix::<C64>::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn zf_single_row_is_matched_filter() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let h = random_matrix(&mut rng, 1, 5);
        let w = zf_digital(&h).unwrap();
        let norm_sq: f64 = h.iter().map(|v| v.norm_sqr()).sum();
        for i in 0..5 {
            let want = h[(0, i)].conj() / norm_sq;
            assert!((w[(i, 0)] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn zf_cancels_interference() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let h = random_matrix(&mut rng, 3, 6);
        let w = zf_digital(&h).unwrap();
        let prod = &h * &w;
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    assert!((prod[(i, j)] - C64::new(1.0, 0.0)).norm() < 1e-9);
                } else {
                    assert!(prod[(i, j)].norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn zf_reports_singularity_with_condition_number() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let row = random_matrix(&mut rng, 1, 6);
        let mut h = DMatrix::<C64>::zeros(2, 6);
        h.set_row(0, &row.row(0));
        h.set_row(1, &row.row(0));
        match zf_digital(&h) {
            Err(Error::SingularChannel { cond }) => assert!(cond > GRAM_COND_LIMIT),
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn zf_condition_boundary() {
        // Gram [[1, c], [c, 1]] has condition (1+c)/(1-c); steer c so the
        // condition number lands well below and well above the 1e12 limit.
        let h_with_cond = |cond: f64| {
            let c = (cond - 1.0) / (cond + 1.0);
            let s = (1.0 - c * c).sqrt();
            let mut h = DMatrix::<C64>::zeros(2, 3);
            h[(0, 0)] = C64::new(1.0, 0.0);
            h[(1, 0)] = C64::new(c, 0.0);
            h[(1, 1)] = C64::new(s, 0.0);
            h
        };
        let ok = zf_digital(&h_with_cond(1e10)).unwrap();
        let residual = (&h_with_cond(1e10) * &ok - DMatrix::<C64>::identity(2, 2)).norm();
        assert!(residual < 1e-3, "residual {residual}");
        match zf_digital(&h_with_cond(1e13)) {
            Err(Error::SingularChannel { cond }) => assert!(cond > 1e12),
            other => panic!("expected singularity above the limit, got {other:?}"),
        }
    }

    #[test]
    fn zf_rejects_wide_input() {
        let h = DMatrix::<C64>::identity(4, 2);
        assert!(matches!(zf_digital(&h), Err(Error::DimensionMismatch(_))));
    }

    // ------------------------------------------------------------- normalize

    #[test]
    fn normalize_halves_norm_two_input() {
        let f = DMatrix::<C64>::identity(4, 4).scale(1.0);
        // identity 4x4 has Frobenius norm 2
        let out = normalize_power(&f).unwrap();
        for i in 0..4 {
            assert!((out[(i, i)] - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn normalize_idempotent_and_unit() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let f = random_matrix(&mut rng, 6, 3);
        let once = normalize_power(&f).unwrap();
        assert!((once.norm() - 1.0).abs() < 1e-12);
        let twice = normalize_power(&once).unwrap();
        assert!((&twice - &once).norm() < 1e-15);
    }

    #[test]
    fn normalize_rejects_zero() {
        let f = DMatrix::<C64>::zeros(3, 2);
        assert!(normalize_power(&f).is_err());
    }

    // ------------------------------------------------------- analog beamforming

    #[test]
    fn analog_gain_is_one_at_carrier() {
        let cfg = config(64, 1, 5);
        let ch = gen_channel(&cfg, &[user(0.37)]).unwrap();
        let out = analog_beamforming(&ch).unwrap();
        let w = out.f_matrices[0].column(0).into_owned();
        let g = brute_force_gain(&w, 0.37, cfg.carrier_hz, cfg.carrier_hz);
        assert!((g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn analog_hardware_counts() {
        let cfg = config(1024, 1, 2);
        let ch = gen_channel(&cfg, &[user(0.2)]).unwrap();
        let out = analog_beamforming(&ch).unwrap();
        assert_eq!(
            out.hardware,
            HardwareDescriptor {
                n_rf_used: 1,
                n_ps: 1024,
                n_td: 0,
                n_baseband: 0
            }
        );
    }

    #[test]
    fn analog_band_edge_matches_dirichlet_and_brute_force() {
        let cfg = config(256, 1, 3);
        let ch = gen_channel(&cfg, &[user(0.3)]).unwrap();
        let out = analog_beamforming(&ch).unwrap();
        let w = out.f_matrices[0].column(0).into_owned();
        let f_edge = cfg.carrier_hz * (1.0 + cfg.bandwidth_hz / (2.0 * cfg.carrier_hz));
        let delta = f_edge / cfg.carrier_hz - 1.0;
        let brute = brute_force_gain(&w, 0.3, f_edge, cfg.carrier_hz);
        let closed = dirichlet(256, delta * 0.3);
        assert!((brute - closed).abs() < 1e-9, "{brute} vs {closed}");
    }

    #[test]
    fn analog_rejects_multiuser() {
        let cfg = config(16, 2, 2);
        let ch = gen_channel(&cfg, &[user(0.1), user(-0.4)]).unwrap();
        assert!(analog_beamforming(&ch).is_err());
    }

    // ------------------------------------------------------------- hybrid PS

    #[test]
    fn full_ps_single_user_matches_analog_at_carrier() {
        // M=3 puts subcarrier 1 exactly on the carrier.
        let cfg = config(64, 1, 3);
        let ch = gen_channel(&cfg, &[user(0.5)]).unwrap();
        let out = hybrid_full_ps(&ch).unwrap();
        let w = out.f_matrices[1].column(0).into_owned();
        let g = brute_force_gain(&w, 0.5, ch.subcarrier_hz[1], cfg.carrier_hz);
        assert!((g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_ps_hardware_counts() {
        let cfg = config(1024, 4, 2);
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let users = sample_users(&cfg, &mut rng);
        let ch = gen_channel(&cfg, &users).unwrap();
        let out = hybrid_full_ps(&ch).unwrap();
        assert_eq!(out.hardware.n_ps, 4096);
        assert_eq!(out.hardware.n_rf_used, 4);
    }

    #[test]
    fn full_ps_zero_forces_interference() {
        let cfg = config(64, 2, 3);
        let ch = gen_channel(&cfg, &[user(0.5), user(-0.5)]).unwrap();
        let out = hybrid_full_ps(&ch).unwrap();
        let h = &ch.matrices[1];
        let f = &out.f_matrices[1];
        let y = h * f;
        let signal = y[(0, 0)].norm_sqr();
        let interference = y[(0, 1)].norm_sqr();
        assert!(interference < 1e-16 * signal, "i/s = {}", interference / signal);
    }

    #[test]
    fn full_ps_propagates_singularity_for_coincident_users() {
        let cfg = config(32, 2, 2);
        let ch = gen_channel(&cfg, &[user(0.25), user(0.25)]).unwrap();
        assert!(matches!(
            hybrid_full_ps(&ch),
            Err(Error::SingularChannel { .. })
        ));
    }

    #[test]
    fn sub_ps_column_gain_is_half_for_four_users() {
        let cfg = config(256, 4, 2);
        let users = vec![user(0.1), user(0.3), user(-0.2), user(0.6)];
        let ch = gen_channel(&cfg, &users).unwrap();
        let a = sub_ps_analog(&ch).unwrap();
        for (j, u) in users.iter().enumerate() {
            let g = brute_force_gain(
                &a.column(j).into_owned(),
                u.sin_angle,
                cfg.carrier_hz,
                cfg.carrier_hz,
            );
            assert!((g - 0.5).abs() < 1e-12, "user {j}: gain {g}");
        }
    }

    #[test]
    fn sub_ps_hardware_counts_independent_of_users() {
        for k in [2usize, 4] {
            let cfg = config(1024, k, 2);
            let mut rng = ChaCha12Rng::seed_from_u64(15 + k as u64);
            let users = sample_users(&cfg, &mut rng);
            let ch = gen_channel(&cfg, &users).unwrap();
            let out = hybrid_sub_ps(&ch).unwrap();
            assert_eq!(out.hardware.n_ps, 1024);
            assert_eq!(out.hardware.n_td, 0);
        }
    }

    #[test]
    fn sub_ps_single_user_reduces_to_analog() {
        let cfg = config(32, 1, 4);
        let ch = gen_channel(&cfg, &[user(-0.33)]).unwrap();
        let sub = hybrid_sub_ps(&ch).unwrap();
        let analog = analog_beamforming(&ch).unwrap();
        for m in 0..4 {
            // identical up to the global phase absorbed by the digital stage
            let ratio = sub.f_matrices[m][(0, 0)] / analog.f_matrices[m][(0, 0)];
            assert!((ratio.norm() - 1.0).abs() < 1e-12);
            let diff = (&sub.f_matrices[m] - &analog.f_matrices[m].map(|v| v * ratio)).norm();
            assert!(diff < 1e-12);
        }
    }

    // ------------------------------------------------------------- hybrid TD

    #[test]
    fn full_td_single_user_gain_one_everywhere() {
        let cfg = config(128, 1, 9);
        let ch = gen_channel(&cfg, &[user(0.71)]).unwrap();
        let out = hybrid_full_td(&ch).unwrap();
        for m in 0..9 {
            let w = out.f_matrices[m].column(0).into_owned();
            let g = brute_force_gain(&w, 0.71, ch.subcarrier_hz[m], cfg.carrier_hz);
            assert!((g - 1.0).abs() < 1e-12, "subcarrier {m}: gain {g}");
        }
    }

    #[test]
    fn full_td_hardware_counts() {
        let cfg = config(1024, 4, 2);
        let mut rng = ChaCha12Rng::seed_from_u64(16);
        let users = sample_users(&cfg, &mut rng);
        let ch = gen_channel(&cfg, &users).unwrap();
        let out = hybrid_full_td(&ch).unwrap();
        assert_eq!(out.hardware.n_td, 4096);
        assert_eq!(out.hardware.n_ps, 0);
    }

    #[test]
    fn full_td_beats_full_ps_on_paired_trials() {
        let cfg = config(64, 2, 16);
        let mut sum_td = 0.0;
        let mut sum_ps = 0.0;
        for trial in 0..100 {
            let mut rng = ChaCha12Rng::seed_from_u64(1000 + trial);
            let users = sample_users(&cfg, &mut rng);
            let ch = match gen_channel(&cfg, &users) {
                Ok(ch) => ch,
                Err(_) => continue,
            };
            let td = match hybrid_full_td(&ch) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let ps = match hybrid_full_ps(&ch) {
                Ok(p) => p,
                Err(_) => continue,
            };
            for snr in [0.0, 10.0] {
                sum_td += crate::metrics::sum_rate(&ch, &td, snr).sum_rate_bpshz;
                sum_ps += crate::metrics::sum_rate(&ch, &ps, snr).sum_rate_bpshz;
            }
        }
        assert!(sum_td >= sum_ps, "TD {sum_td} vs PS {sum_ps}");
    }

    #[test]
    fn sub_td_single_user_equals_full_td() {
        let cfg = config(64, 1, 5);
        let ch = gen_channel(&cfg, &[user(0.42)]).unwrap();
        let sub = hybrid_sub_td(&ch).unwrap();
        let full = hybrid_full_td(&ch).unwrap();
        for m in 0..5 {
            assert!((&sub.f_matrices[m] - &full.f_matrices[m]).norm() < 1e-12);
        }
    }

    #[test]
    fn sub_td_column_gain_flat_across_band() {
        let cfg = config(256, 4, 8);
        let users = vec![user(0.55), user(-0.15), user(0.8), user(-0.6)];
        let ch = gen_channel(&cfg, &users).unwrap();
        for m in 0..8 {
            let a = ttd_sub_analog(&ch, ch.subcarrier_hz[m]).unwrap();
            for (j, u) in users.iter().enumerate() {
                let g = brute_force_gain(
                    &a.column(j).into_owned(),
                    u.sin_angle,
                    ch.subcarrier_hz[m],
                    cfg.carrier_hz,
                );
                assert!((g - 0.5).abs() < 1e-12, "m={m} user {j}: gain {g}");
            }
        }
    }

    #[test]
    fn sub_td_hardware_counts() {
        let cfg = config(1024, 4, 2);
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let users = sample_users(&cfg, &mut rng);
        let ch = gen_channel(&cfg, &users).unwrap();
        let out = hybrid_sub_td(&ch).unwrap();
        assert_eq!(out.hardware.n_td, 1024);
    }

    // ------------------------------------------------------------ delay-phase

    #[test]
    fn delay_phase_td_count_reduction() {
        let cfg = config(1024, 4, 2);
        let mut rng = ChaCha12Rng::seed_from_u64(18);
        let users = sample_users(&cfg, &mut rng);
        let ch = gen_channel(&cfg, &users).unwrap();
        let out = delay_phase(&ch, 32).unwrap();
        assert_eq!(out.hardware.n_td, 128);
        assert_eq!(out.hardware.n_ps, 4096);
    }

    #[test]
    fn delay_phase_one_td_per_antenna_is_exact() {
        let cfg = config(64, 1, 7);
        let ch = gen_channel(&cfg, &[user(0.66)]).unwrap();
        let out = delay_phase(&ch, 64).unwrap();
        for m in 0..7 {
            let w = out.f_matrices[m].column(0).into_owned();
            let g = brute_force_gain(&w, 0.66, ch.subcarrier_hz[m], cfg.carrier_hz);
            assert!((g - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn delay_phase_band_edge_matches_within_group_dirichlet() {
        let n = 1024;
        let k_d = 32;
        let p = n / k_d;
        let cfg = config(n, 1, 3);
        let sin_angle = 0.5;
        let f_edge = cfg.carrier_hz + cfg.bandwidth_hz / 2.0;
        let delta = f_edge / cfg.carrier_hz - 1.0;
        let w = delay_phase_column(n, k_d, sin_angle, f_edge, cfg.carrier_hz).unwrap();
        let brute = brute_force_gain(&w, sin_angle, f_edge, cfg.carrier_hz);
        let closed = dirichlet(p, delta * sin_angle);
        assert!((brute - closed).abs() < 1e-9, "{brute} vs {closed}");
    }

    #[test]
    fn delay_phase_endpoints_match_ps_and_td_columns() {
        let cfg = config(64, 1, 5);
        let ch = gen_channel(&cfg, &[user(-0.44)]).unwrap();
        let a_ps = full_ps_analog(&ch).unwrap();
        for m in 0..5 {
            let f = ch.subcarrier_hz[m];
            let k1 = delay_phase_column(64, 1, -0.44, f, cfg.carrier_hz).unwrap();
            assert!((&k1 - &a_ps.column(0).into_owned()).norm() < 1e-12);
            let kn = delay_phase_column(64, 64, -0.44, f, cfg.carrier_hz).unwrap();
            let td = ttd_full_column(64, -0.44, f, cfg.carrier_hz);
            assert!((&kn - &td).norm() < 1e-12);
        }
    }

    #[test]
    fn delay_phase_gain_monotone_in_td_count() {
        let n = 256;
        let cfg = config(n, 1, 17);
        let sin_angle = 0.62;
        let freqs = cfg.subcarrier_frequencies();
        let mut prev: Option<Vec<f64>> = None;
        for k_d in [1usize, 4, 32, 256] {
            let gains: Vec<f64> = freqs
                .iter()
                .map(|&f| {
                    let w = delay_phase_column(n, k_d, sin_angle, f, cfg.carrier_hz).unwrap();
                    brute_force_gain(&w, sin_angle, f, cfg.carrier_hz)
                })
                .collect();
            if let Some(p) = &prev {
                for (m, (lo, hi)) in p.iter().zip(&gains).enumerate() {
                    assert!(hi >= &(lo - 1e-12), "K_d={k_d} m={m}: {hi} < {lo}");
                }
            }
            prev = Some(gains);
        }
    }

    #[test]
    fn delay_phase_rejects_bad_divisibility() {
        let cfg = config(10, 1, 2);
        let ch = gen_channel(&cfg, &[user(0.2)]).unwrap();
        assert!(delay_phase(&ch, 4).is_err());
        assert!(delay_phase(&ch, 0).is_err());
    }

    // ---------------------------------------------------------- fully digital

    #[test]
    fn digital_single_user_is_matched_filter() {
        let cfg = config(32, 1, 4);
        let ch = gen_channel(&cfg, &[user(0.12)]).unwrap();
        let out = fully_digital_zf(&ch).unwrap();
        for m in 0..4 {
            let h = &ch.matrices[m];
            let norm: f64 = h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            for i in 0..32 {
                let want = h[(0, i)].conj() / norm;
                assert!((out.f_matrices[m][(i, 0)] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn digital_interference_below_threshold() {
        let cfg = config(32, 3, 4);
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let users = sample_users(&cfg, &mut rng);
        let ch = gen_channel(&cfg, &users).unwrap();
        let out = fully_digital_zf(&ch).unwrap();
        for m in 0..4 {
            let y = &ch.matrices[m] * &out.f_matrices[m];
            for i in 0..3 {
                let sig = y[(i, i)].norm();
                for j in 0..3 {
                    if i != j {
                        assert!(y[(i, j)].norm() < 1e-10 * sig);
                    }
                }
            }
        }
    }

    #[test]
    fn digital_hardware_counts() {
        let cfg = config(1024, 2, 1);
        let mut rng = ChaCha12Rng::seed_from_u64(20);
        let users = sample_users(&cfg, &mut rng);
        let ch = gen_channel(&cfg, &users).unwrap();
        let out = fully_digital_zf(&ch).unwrap();
        assert_eq!(out.hardware.n_rf_used, 1024);
        assert_eq!(out.hardware.n_ps, 0);
        assert_eq!(out.hardware.n_td, 0);
    }

    // --------------------------------------------------------- shared invariants

    #[test]
    fn all_schemes_emit_unit_frobenius_matrices() {
        let cfg = config(32, 2, 5);
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let users = sample_users(&cfg, &mut rng);
        let ch = gen_channel(&cfg, &users).unwrap();
        let single_cfg = config(32, 1, 5);
        let ch1 = gen_channel(&single_cfg, &users[..1]).unwrap();
        for scheme in Scheme::ALL {
            let out = match scheme {
                Scheme::Analog => scheme.compute(&ch1, &single_cfg).unwrap(),
                _ => scheme.compute(&ch, &cfg).unwrap(),
            };
            for f in &out.f_matrices {
                assert!(
                    (f.norm() - 1.0).abs() < 1e-12,
                    "{scheme}: Frobenius {}",
                    f.norm()
                );
            }
        }
    }

    #[test]
    fn analog_layers_are_constant_modulus() {
        let cfg = config(64, 4, 3);
        let users = vec![user(0.1), user(0.35), user(-0.5), user(0.72)];
        let ch = gen_channel(&cfg, &users).unwrap();

        let spread = |mags: Vec<f64>| {
            let max = mags.iter().cloned().fold(f64::MIN, f64::max);
            let min = mags.iter().cloned().fold(f64::MAX, f64::min);
            max - min
        };

        let a = full_ps_analog(&ch).unwrap();
        assert!(spread(a.iter().map(|v| v.norm()).collect()) < 1e-12);

        let s = sub_ps_analog(&ch).unwrap();
        let on_support: Vec<f64> = s.iter().map(|v| v.norm()).filter(|&m| m > 1e-15).collect();
        assert!(spread(on_support) < 1e-12);

        for u in &users {
            let d =
                delay_phase_column(64, 8, u.sin_angle, cfg.carrier_hz * 1.01, cfg.carrier_hz)
                    .unwrap();
            assert!(spread(d.iter().map(|v| v.norm()).collect()) < 1e-12);
        }
    }

    #[test]
    fn full_ps_gain_peaks_only_at_carrier() {
        // odd M so one subcarrier sits exactly on f_c
        let cfg = config(128, 1, 9);
        let ch = gen_channel(&cfg, &[user(0.5)]).unwrap();
        let out = hybrid_full_ps(&ch).unwrap();
        let gains: Vec<f64> = (0..9)
            .map(|m| {
                brute_force_gain(
                    &out.f_matrices[m].column(0).into_owned(),
                    0.5,
                    ch.subcarrier_hz[m],
                    cfg.carrier_hz,
                )
            })
            .collect();
        assert!((gains[4] - 1.0).abs() < 1e-12);
        assert!(gains[0] < gains[4]);
        assert!(gains[8] < gains[4]);
    }

    #[test]
    fn scheme_labels_round_trip() {
        for scheme in Scheme::ALL {
            let parsed: Scheme = scheme.as_str().parse().unwrap();
            assert_eq!(parsed, scheme);
        }
        assert!(matches!(
            "no-such-scheme".parse::<Scheme>(),
            Err(Error::UnknownScheme(_))
        ));
    }
}
