//! Geometry and channel generation between the UAVs, the IRS and the UEs.
//!
//! The IRS is a uniform linear array along the global x-axis. All K elements
//! share one position for path loss; only the steering phase progression
//! depends on the element index.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Node position in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn ground(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

pub type ComplexVector = Vec<Complex64>;

/// Large-scale and array parameters. All gains are linear.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelParams {
    pub beta0: f64,
    /// Path-loss exponent of the UAV-IRS link.
    pub kappa1: f64,
    /// Path-loss exponent of the IRS-UE link.
    pub kappa2: f64,
    /// Rician factor of the IRS-UE link.
    pub rician: f64,
    pub d_over_lambda: f64,
    pub elements: usize,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.beta0 > 0.0
            && self.kappa1 > 0.0
            && self.kappa2 > 0.0
            && self.rician >= 0.0
            && self.d_over_lambda > 0.0
            && self.elements >= 1
            && [self.beta0, self.kappa1, self.kappa2, self.rician, self.d_over_lambda].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid channel parameters {self:?}")))
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn nonzero_distance(a: Vec3, b: Vec3) -> Result<f64> {
    let d = distance(a, b);
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::ZeroDistance(a.as_array()))
    }
}

/// Element `k` is `exp(-j 2π (d/λ) k cos)`.
pub fn steering_vector(cos_angle: f64, elements: usize, d_over_lambda: f64) -> Result<ComplexVector> {
    if !(-1.0..=1.0).contains(&cos_angle) {
        return Err(Error::CosineOutOfRange(cos_angle));
    }
    let step = -2.0 * PI * d_over_lambda * cos_angle;
    Ok((0..elements)
        .map(|k| if k == 0 { Complex64::new(1.0, 0.0) } else { Complex64::from_polar(1.0, step * k as f64) })
        .collect())
}

/// Cosine of the angle of arrival at the IRS array axis.
pub fn aoa_cosine(uav: Vec3, irs: Vec3) -> Result<f64> {
    let d = nonzero_distance(uav, irs)?;
    Ok(((uav.x - irs.x) / d).clamp(-1.0, 1.0))
}

/// Cosine of the angle of departure from the IRS array axis.
pub fn aod_cosine(irs: Vec3, ue: Vec3) -> Result<f64> {
    let d = nonzero_distance(irs, ue)?;
    Ok(((ue.x - irs.x) / d).clamp(-1.0, 1.0))
}

/// Pure line-of-sight air-to-air channel from a UAV to every IRS element.
pub fn aa_channel(uav: Vec3, irs: Vec3, p: &ChannelParams) -> Result<ComplexVector> {
    let d = nonzero_distance(uav, irs)?;
    let amplitude = (p.beta0 * d.powf(-p.kappa1)).sqrt();
    let a = steering_vector(aoa_cosine(uav, irs)?, p.elements, p.d_over_lambda)?;
    Ok(a.into_iter().map(|v| v * amplitude).collect())
}

/// Deterministic part of the IRS-UE channel: path-loss scaled, Rician-weighted
/// LoS steering vector. Combine with [`ag_channel_from_parts`] to add NLoS.
pub fn ag_los(irs: Vec3, ue: Vec3, p: &ChannelParams) -> Result<ComplexVector> {
    let d = nonzero_distance(irs, ue)?;
    let amplitude = (p.beta0 * d.powf(-p.kappa2)).sqrt();
    let los_weight = (p.rician / (1.0 + p.rician)).sqrt();
    let a = steering_vector(aod_cosine(irs, ue)?, p.elements, p.d_over_lambda)?;
    Ok(a.into_iter().map(|v| v * (amplitude * los_weight)).collect())
}

/// Scale of the NLoS term: `sqrt(β0 d^-κ2) · sqrt(1/(1+β1))`.
pub fn ag_nlos_scale(irs: Vec3, ue: Vec3, p: &ChannelParams) -> Result<f64> {
    let d = nonzero_distance(irs, ue)?;
    Ok((p.beta0 * d.powf(-p.kappa2)).sqrt() * (1.0 / (1.0 + p.rician)).sqrt())
}

/// One CN(0, 1) sample: independent real and imaginary parts with variance 1/2.
pub fn complex_normal(rng: &mut RngStream) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re = rng.standard_normal() * s;
    let im = rng.standard_normal() * s;
    Complex64::new(re, im)
}

pub fn ag_channel_from_parts(los: &[Complex64], nlos_scale: f64, nlos: &[Complex64]) -> ComplexVector {
    los.iter().zip(nlos).map(|(l, n)| l + n * nlos_scale).collect()
}

/// Rician air-to-ground channel from the IRS to one UE with a fresh NLoS draw.
pub fn ag_channel(irs: Vec3, ue: Vec3, p: &ChannelParams, rng: &mut RngStream) -> Result<ComplexVector> {
    let los = ag_los(irs, ue, p)?;
    let scale = ag_nlos_scale(irs, ue, p)?;
    let nlos: Vec<Complex64> = (0..p.elements).map(|_| complex_normal(rng)).collect();
    Ok(ag_channel_from_parts(&los, scale, &nlos))
}

/// `Σ_k H_k e^{jθ_k} h_k`: the cascaded UAV→IRS→UE scalar channel.
pub fn effective_channel(uav_irs: &[Complex64], phases: &[f64], irs_ue: &[Complex64]) -> Result<Complex64> {
    let k = uav_irs.len();
    for len in [phases.len(), irs_ue.len()] {
        if len != k {
            return Err(Error::LengthMismatch { expected: k, got: len });
        }
    }
    Ok(uav_irs
        .iter()
        .zip(phases)
        .zip(irs_ue)
        .map(|((h_aa, &theta), h_ag)| h_aa * Complex64::from_polar(1.0, theta) * h_ag)
        .sum())
}

/// Phases that co-phase every term of [`effective_channel`], wrapped to `[0, 2π)`.
pub fn alignment_phases(uav_irs: &[Complex64], irs_ue: &[Complex64]) -> Vec<f64> {
    uav_irs.iter().zip(irs_ue).map(|(a, b)| (-(a.arg() + b.arg())).rem_euclid(2.0 * PI)).collect()
}

/// Channels for one time step. `ag[n][m]` is the IRS channel to UE `m` of cluster `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub aa: Vec<ComplexVector>,
    pub ag: Vec<Vec<ComplexVector>>,
}

impl ChannelRealization {
    pub fn clusters(&self) -> usize {
        self.aa.len()
    }

    pub fn ues_per_cluster(&self) -> usize {
        self.ag.first().map_or(0, Vec::len)
    }

    pub fn elements(&self) -> usize {
        self.aa.first().map_or(0, Vec::len)
    }

    /// Draw a complete realization for fixed node positions.
    pub fn draw(uavs: &[Vec3], irs: Vec3, ues: &[Vec<Vec3>], p: &ChannelParams, rng: &mut RngStream) -> Result<Self> {
        let aa = uavs.iter().map(|&u| aa_channel(u, irs, p)).collect::<Result<Vec<_>>>()?;
        let mut ag = Vec::with_capacity(ues.len());
        for cluster in ues {
            let row = cluster.iter().map(|&ue| ag_channel(irs, ue, p, rng)).collect::<Result<Vec<_>>>()?;
            ag.push(row);
        }
        Ok(Self { aa, ag })
    }
}
