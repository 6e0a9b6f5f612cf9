// SPDX-License-Identifier: Apache-2.0

//! Surrogate diffusion backbone.
//!
//! The forward process is `Z(t) = (1 - t) X0 + t eps` with `eps ~ N(0, I)`. For data drawn
//! from a Gaussian (mixture) prompt target the denoising velocity has a closed form:
//!
//! ```text
//! a = 1 - t,  D = a^2 sigma^2 + t^2
//! E[X0  | z] = mu + (a sigma^2 / D) (z - a mu)
//! E[eps | z] = (t / D) (z - a mu)
//! v(z, t)    = E[eps | z] - E[X0 | z]
//! ```
//!
//! `v` points from data towards noise, so sampling integrates it with negative time steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::semantic_space::{Latent, PromptEmbedding};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScheduleKind {
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub kind: NoiseScheduleKind,
}

impl NoiseSchedule {
    pub fn linear() -> Self {
        Self {
            kind: NoiseScheduleKind::Linear,
        }
    }

    /// Noise weight at time `t`; `lambda(0) = 0`, `lambda(1) = 1`.
    pub fn lambda(&self, t: f64) -> f64 {
        match self.kind {
            NoiseScheduleKind::Linear => t,
        }
    }
}

/// `(1 - lambda(t)) z0 + lambda(t) eps`
pub fn forward_diffuse(z0: &[f64], t: f64, eps: &[f64], sched: &NoiseSchedule) -> Result<Latent> {
    linalg::check_dim(z0.len(), eps.len())?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeOutOfRange(t));
    }
    let l = sched.lambda(t);
    let values = z0
        .iter()
        .zip(eps)
        .map(|(x, e)| (1.0 - l) * x + l * e)
        .collect();
    Latent::new(values, t)
}

/// How a prompt embedding maps onto a data distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromptParams {
    pub amplitude: f64,
    pub stddev: f64,
}

impl Default for PromptParams {
    fn default() -> Self {
        Self {
            amplitude: 4.0,
            stddev: 0.25,
        }
    }
}

impl PromptParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::InvalidConfig("amplitude must be positive".into()));
        }
        if !(self.stddev.is_finite() && self.stddev > 0.0) {
            return Err(Error::InvalidConfig("stddev must be positive".into()));
        }
        Ok(())
    }
}

/// Isotropic Gaussian mixture the surrogate was "trained" on for one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTarget {
    components: Vec<(f64, Vec<f64>)>,
    stddev: f64,
}

impl PromptTarget {
    pub fn gaussian(mean: Vec<f64>, stddev: f64) -> Result<Self> {
        Self::mixture(vec![(1.0, mean)], stddev)
    }

    /// Weights must be positive and sum to one.
    pub fn mixture(components: Vec<(f64, Vec<f64>)>, stddev: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidConfig("mixture has no components".into()));
        }
        if !(stddev.is_finite() && stddev > 0.0) {
            return Err(Error::InvalidConfig("stddev must be positive".into()));
        }
        let dim = components[0].1.len();
        let mut total = 0.0;
        for (w, mean) in &components {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::InvalidConfig(
                    "mixture weights must be positive".into(),
                ));
            }
            linalg::check_dim(dim, mean.len())?;
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { components, stddev })
    }

    /// The unconditional target, `N(0, I)`.
    pub fn standard_normal(dimension: usize) -> Self {
        Self {
            components: vec![(1.0, vec![0.0; dimension])],
            stddev: 1.0,
        }
    }

    /// `N(amplitude * p, stddev^2 I)`, or the unconditional target for the null prompt.
    pub fn from_prompt(prompt: &PromptEmbedding, params: &PromptParams) -> Self {
        if prompt.is_null() {
            Self::standard_normal(prompt.values.len())
        } else {
            Self {
                components: vec![(1.0, linalg::scale(&prompt.values, params.amplitude))],
                stddev: params.stddev,
            }
        }
    }

    pub fn dimension(&self) -> usize {
        self.components[0].1.len()
    }

    pub fn stddev(&self) -> f64 {
        self.stddev
    }

    pub fn components(&self) -> &[(f64, Vec<f64>)] {
        &self.components
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dimension()];
        for (w, mu) in &self.components {
            linalg::axpy(&mut m, *w, mu);
        }
        m
    }
}

/// Pluggable denoiser `D(z, t, C)`.
pub trait VelocityModel: Sync {
    fn conditional_velocity(&self, z: &[f64], t: f64, target: &PromptTarget) -> Result<Vec<f64>>;
}

/// Exact posterior velocity for Gaussian-mixture targets under the linear schedule.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactGaussianVelocity {
    pub schedule: NoiseSchedule,
}

impl ExactGaussianVelocity {
    pub fn new(schedule: NoiseSchedule) -> Self {
        Self { schedule }
    }
}

impl VelocityModel for ExactGaussianVelocity {
    fn conditional_velocity(&self, z: &[f64], t: f64, target: &PromptTarget) -> Result<Vec<f64>> {
        linalg::check_dim(target.dimension(), z.len())?;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::TimeOutOfRange(t));
        }
        let lam = self.schedule.lambda(t);
        let a = 1.0 - lam;
        let s2 = target.stddev * target.stddev;
        let d = a * a * s2 + lam * lam;

        // responsibilities from the time-t marginal N(a mu_k, D I)
        let logits: Vec<f64> = target
            .components
            .iter()
            .map(|(w, mu)| {
                let r2: f64 = z.iter().zip(mu).map(|(zi, mi)| (zi - a * mi).powi(2)).sum();
                w.ln() - r2 / (2.0 * d)
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();

        let gain = (lam - a * s2) / d;
        let mut v = vec![0.0; z.len()];
        for ((_, mu), w) in target.components.iter().zip(&weights) {
            let r = w / total;
            for i in 0..z.len() {
                v[i] += r * (gain * (z[i] - a * mu[i]) - mu[i]);
            }
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    pub scale_src: f64,
    pub scale_tar: f64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            scale_src: 2.0,
            scale_tar: 5.5,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale_src >= 0.0 && self.scale_tar >= 0.0)
            || !self.scale_src.is_finite()
            || !self.scale_tar.is_finite()
        {
            return Err(Error::InvalidConfig("guidance scales must be >= 0".into()));
        }
        Ok(())
    }
}

/// Classifier-free guidance: `v_uncond + scale (v_cond - v_uncond)`.
pub fn guided_velocity(
    model: &dyn VelocityModel,
    z: &[f64],
    t: f64,
    prompt: &PromptEmbedding,
    scale: f64,
    params: &PromptParams,
) -> Result<Vec<f64>> {
    guided_velocity_for(
        model,
        z,
        t,
        &PromptTarget::from_prompt(prompt, params),
        scale,
    )
}

/// Classifier-free guidance against an explicit conditional target.
pub fn guided_velocity_for(
    model: &dyn VelocityModel,
    z: &[f64],
    t: f64,
    target: &PromptTarget,
    scale: f64,
) -> Result<Vec<f64>> {
    let uncond = model.conditional_velocity(z, t, &PromptTarget::standard_normal(z.len()))?;
    let cond = model.conditional_velocity(z, t, target)?;
    Ok(uncond
        .iter()
        .zip(&cond)
        .map(|(u, c)| u + scale * (c - u))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ExactGaussianVelocity {
        ExactGaussianVelocity::default()
    }

    #[test]
    fn forward_diffuse_endpoints_and_midpoint() {
        let s = NoiseSchedule::linear();
        let z0 = [1.0, 0.0];
        let eps = [0.0, 1.0];
        assert_eq!(forward_diffuse(&z0, 0.0, &eps, &s).unwrap().values, z0);
        assert_eq!(forward_diffuse(&z0, 1.0, &eps, &s).unwrap().values, eps);
        assert_eq!(
            forward_diffuse(&z0, 0.5, &eps, &s).unwrap().values,
            vec![0.5, 0.5]
        );
        assert!(matches!(
            forward_diffuse(&z0, 0.5, &[1.0], &s),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn standard_normal_target_has_zero_velocity_at_half() {
        let v = model()
            .conditional_velocity(&[0.3, -2.0, 7.0], 0.5, &PromptTarget::standard_normal(3))
            .unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn time_zero_is_rejected() {
        assert!(matches!(
            model().conditional_velocity(&[0.0], 0.0, &PromptTarget::standard_normal(1)),
            Err(Error::TimeOutOfRange(_))
        ));
    }

    #[test]
    fn single_gaussian_closed_form() {
        // mu = (2, 0), sigma = 0.25, z = (1, 0.3), t = 0.7 worked by hand:
        // a = 0.3, D = 0.09 * 0.0625 + 0.49 = 0.495625
        // gain = (0.7 - 0.3 * 0.0625) / D = 0.68125 / 0.495625
        let target = PromptTarget::gaussian(vec![2.0, 0.0], 0.25).unwrap();
        let v = model()
            .conditional_velocity(&[1.0, 0.3], 0.7, &target)
            .unwrap();
        let gain = 0.68125 / 0.495625;
        let expected = [gain * (1.0 - 0.6) - 2.0, gain * 0.3];
        assert!((v[0] - expected[0]).abs() < 1e-12);
        assert!((v[1] - expected[1]).abs() < 1e-12);
    }

    #[test]
    fn far_mixture_reduces_to_nearest_component() {
        let t = 0.4;
        let mu1 = vec![10.0, 0.0];
        let mu2 = vec![-10.0, 0.0];
        let mix = PromptTarget::mixture(vec![(0.5, mu1.clone()), (0.5, mu2)], 0.25).unwrap();
        let single = PromptTarget::gaussian(mu1.clone(), 0.25).unwrap();
        let z = [(1.0 - t) * mu1[0] + 0.01, 0.02];
        let a = model().conditional_velocity(&z, t, &mix).unwrap();
        let b = model().conditional_velocity(&z, t, &single).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn mixture_validation() {
        assert!(PromptTarget::mixture(vec![(0.4, vec![0.0]), (0.4, vec![1.0])], 1.0).is_err());
        assert!(PromptTarget::mixture(vec![(1.0, vec![0.0])], 0.0).is_err());
        assert!(PromptTarget::mixture(vec![(-1.0, vec![0.0]), (2.0, vec![1.0])], 1.0).is_err());
    }

    #[test]
    fn guidance_scales() {
        let m = model();
        let p = PromptEmbedding {
            values: vec![0.6, 0.8],
            tokens: vec![],
        };
        let params = PromptParams::default();
        let z = [0.7, -0.2];
        let t = 0.35;
        let u = m
            .conditional_velocity(&z, t, &PromptTarget::standard_normal(2))
            .unwrap();
        let c = m
            .conditional_velocity(&z, t, &PromptTarget::from_prompt(&p, &params))
            .unwrap();
        let one = guided_velocity(&m, &z, t, &p, 1.0, &params).unwrap();
        let zero = guided_velocity(&m, &z, t, &p, 0.0, &params).unwrap();
        let two = guided_velocity(&m, &z, t, &p, 2.0, &params).unwrap();
        for i in 0..2 {
            assert!((one[i] - c[i]).abs() < 1e-12);
            assert_eq!(zero[i], u[i]);
            assert!((two[i] - (2.0 * c[i] - u[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_in_z_for_single_gaussian() {
        let m = model();
        let target = PromptTarget::gaussian(vec![1.0, -1.0, 0.5], 0.3).unwrap();
        let z1 = [0.2, 0.4, -1.0];
        let z2 = [-2.0, 1.5, 0.3];
        let alpha = 0.3;
        let mix: Vec<f64> = z1
            .iter()
            .zip(&z2)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        let t = 0.6;
        let v1 = m.conditional_velocity(&z1, t, &target).unwrap();
        let v2 = m.conditional_velocity(&z2, t, &target).unwrap();
        let vm = m.conditional_velocity(&mix, t, &target).unwrap();
        for i in 0..3 {
            assert!((vm[i] - (alpha * v1[i] + (1.0 - alpha) * v2[i])).abs() < 1e-12);
        }
    }
}
