//! SINR, throughput, power and energy-efficiency for one channel realization.
//!
//! Totals are accumulated cluster-major, UE-minor, left to right, so a report
//! and a hand summation in the same order agree bit-for-bit.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::channel::{effective_channel, ChannelRealization};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    /// UAVs, one per cluster.
    pub clusters: usize,
    pub ues_per_cluster: usize,
    pub elements: usize,
    pub bandwidth_hz: f64,
    pub p_max_w: f64,
    /// IRS plus UAV circuit power, counted once.
    pub p_fixed_w: f64,
    /// Noise power in watts.
    pub noise_w: f64,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.ues_per_cluster == 0 || self.elements == 0 {
            return Err(Error::Config("N, M and K must all be at least 1".into()));
        }
        for (name, v) in [
            ("bandwidth", self.bandwidth_hz),
            ("p_max", self.p_max_w),
            ("p_fixed", self.p_fixed_w),
            ("noise power", self.noise_w),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn ue_count(&self) -> usize {
        self.clusters * self.ues_per_cluster
    }
}

/// Transmit power per UAV in watts, `0 ≤ p ≤ P_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerAllocation(Vec<f64>);

impl PowerAllocation {
    pub fn new(powers: Vec<f64>, p_max: f64) -> Result<Self> {
        if let Some(bad) = powers.iter().find(|p| !(p.is_finite() && (0.0..=p_max).contains(*p))) {
            return Err(Error::Config(format!("power {bad} outside [0, {p_max}]")));
        }
        Ok(Self(powers))
    }

    pub fn uniform(n: usize, p: f64) -> Self {
        Self(vec![p; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// IRS phase shifts in radians, stored reduced to `[0, 2π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseShifts(Vec<f64>);

impl PhaseShifts {
    pub fn new(theta: Vec<f64>) -> Self {
        Self(theta.into_iter().map(|t| t.rem_euclid(2.0 * PI)).collect())
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    /// `sinr[n][m]`, dimensionless.
    pub sinr: Vec<Vec<f64>>,
    /// `rate[n][m]` in bits/s.
    pub rate: Vec<Vec<f64>>,
    pub total_rate: f64,
    pub total_power: f64,
    /// bits/s/W.
    pub ee: f64,
    bandwidth_hz: f64,
}

impl MetricsReport {
    /// EE divided by bandwidth, in bits/Hz/J.
    pub fn ee_normalized(&self) -> f64 {
        self.ee / self.bandwidth_hz
    }

    pub fn csv_header(clusters: usize, ues: usize) -> String {
        let mut s = String::from("step,total_rate_bps,total_power_w,ee_bps_per_w,ee_bits_per_hz_per_j");
        for prefix in ["sinr", "rate"] {
            for n in 0..clusters {
                for m in 0..ues {
                    let _ = write!(s, ",{prefix}_{n}_{m}");
                }
            }
        }
        s
    }

    pub fn csv_row(&self, step: usize) -> String {
        let mut s = format!("{step},{},{},{},{}", self.total_rate, self.total_power, self.ee, self.ee_normalized());
        for table in [&self.sinr, &self.rate] {
            for v in table.iter().flatten() {
                let _ = write!(s, ",{v}");
            }
        }
        s
    }
}

fn check_dims(
    cfg: &NetworkConfig,
    ch: &ChannelRealization,
    powers: &PowerAllocation,
    phases: &PhaseShifts,
) -> Result<()> {
    let mismatch = |expected, got| Err(Error::LengthMismatch { expected, got });
    if ch.clusters() != cfg.clusters {
        return mismatch(cfg.clusters, ch.clusters());
    }
    if ch.ues_per_cluster() != cfg.ues_per_cluster {
        return mismatch(cfg.ues_per_cluster, ch.ues_per_cluster());
    }
    if powers.len() != cfg.clusters {
        return mismatch(cfg.clusters, powers.len());
    }
    if phases.len() != cfg.elements {
        return mismatch(cfg.elements, phases.len());
    }
    Ok(())
}

/// Cascaded gain `|H_i Φ h_nm|²` for every transmitting UAV `i` at UE `(n, m)`.
fn cascaded_gains(ch: &ChannelRealization, phases: &PhaseShifts, n: usize, m: usize) -> Result<Vec<f64>> {
    let h_ue = &ch.ag[n][m];
    ch.aa
        .iter()
        .map(|h_uav| effective_channel(h_uav, phases.as_slice(), h_ue).map(|g: Complex64| g.norm_sqr()))
        .collect()
}

fn sinr_from_gains(gains: &[f64], powers: &[f64], n: usize, noise: f64) -> f64 {
    let mut interference = 0.0;
    for (i, (g, p)) in gains.iter().zip(powers).enumerate() {
        if i != n {
            interference += p * g;
        }
    }
    powers[n] * gains[n] / (interference + noise)
}

/// SINR at UE `m` of cluster `n`. Interference from UAV `i` travels through
/// `H_i Φ h_nm`: the victim's own IRS channel.
pub fn sinr(
    cfg: &NetworkConfig,
    ch: &ChannelRealization,
    powers: &PowerAllocation,
    phases: &PhaseShifts,
    n: usize,
    m: usize,
) -> Result<f64> {
    check_dims(cfg, ch, powers, phases)?;
    if n >= cfg.clusters {
        return Err(Error::IndexOutOfRange { what: "cluster", index: n, limit: cfg.clusters });
    }
    if m >= cfg.ues_per_cluster {
        return Err(Error::IndexOutOfRange { what: "ue", index: m, limit: cfg.ues_per_cluster });
    }
    let gains = cascaded_gains(ch, phases, n, m)?;
    Ok(sinr_from_gains(&gains, powers.as_slice(), n, cfg.noise_w))
}

/// Shannon rate `B log2(1 + γ)` in bits/s.
pub fn rate(cfg: &NetworkConfig, sinr: f64) -> Result<f64> {
    if sinr < 0.0 || sinr.is_nan() {
        return Err(Error::NegativeSinr(sinr));
    }
    Ok(cfg.bandwidth_hz * sinr.ln_1p() / std::f64::consts::LN_2)
}

pub fn total_power(cfg: &NetworkConfig, powers: &PowerAllocation) -> f64 {
    powers.as_slice().iter().fold(0.0, |acc, p| acc + p) + cfg.p_fixed_w
}

/// Per-UE SINR and rate plus all totals.
pub fn report(
    cfg: &NetworkConfig,
    ch: &ChannelRealization,
    powers: &PowerAllocation,
    phases: &PhaseShifts,
) -> Result<MetricsReport> {
    check_dims(cfg, ch, powers, phases)?;
    let mut sinr = Vec::with_capacity(cfg.clusters);
    let mut rates = Vec::with_capacity(cfg.clusters);
    let mut total_rate = 0.0;
    for n in 0..cfg.clusters {
        let mut s_row = Vec::with_capacity(cfg.ues_per_cluster);
        let mut r_row = Vec::with_capacity(cfg.ues_per_cluster);
        for m in 0..cfg.ues_per_cluster {
            let gains = cascaded_gains(ch, phases, n, m)?;
            let s = sinr_from_gains(&gains, powers.as_slice(), n, cfg.noise_w);
            let r = rate(cfg, s)?;
            total_rate += r;
            s_row.push(s);
            r_row.push(r);
        }
        sinr.push(s_row);
        rates.push(r_row);
    }
    let total_power = total_power(cfg, powers);
    if total_power <= 0.0 {
        return Err(Error::ZeroTotalPower);
    }
    Ok(MetricsReport {
        sinr,
        rate: rates,
        total_rate,
        total_power,
        ee: total_rate / total_power,
        bandwidth_hz: cfg.bandwidth_hz,
    })
}

pub fn total_rate(
    cfg: &NetworkConfig,
    ch: &ChannelRealization,
    powers: &PowerAllocation,
    phases: &PhaseShifts,
) -> Result<f64> {
    report(cfg, ch, powers, phases).map(|r| r.total_rate)
}

/// Total throughput over total consumed power, bits/s/W.
pub fn energy_efficiency(
    cfg: &NetworkConfig,
    ch: &ChannelRealization,
    powers: &PowerAllocation,
    phases: &PhaseShifts,
) -> Result<f64> {
    report(cfg, ch, powers, phases).map(|r| r.ee)
}
