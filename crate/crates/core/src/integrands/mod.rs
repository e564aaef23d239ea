//! Convex integrands `F : ℝ^m → [0, ∞]` with conjugates, recession
//! functions and proximal maps.

mod delta;
mod subsolution;

pub use subsolution::{make_subsolution, Subsolution};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Slack used when testing membership in the domain of an indicator.
pub(crate) const DOMAIN_TOL: f64 = 1e-12;

/// Growth constants: `α₂|h|^p - β₂ ≤ F(h) ≤ α₁|h|^p + β₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub p: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrand {
    EuclideanNorm,
    PowerP {
        p: f64,
        scale: f64,
    },
    Quadratic {
        mu: f64,
    },
    /// `F(h) = (Σ a_j h_j²)^{1/2}`.
    AnisotropicNorm {
        weights: Vec<f64>,
    },
    /// `M_μF(h) + κ/2 |h|² - shift`, with `M_μ` the Moreau envelope.
    MoreauRegularized {
        base: Box<Integrand>,
        mu: f64,
        kappa: f64,
        shift: f64,
    },
    /// `δ|h| + inf_q (|h - q|/δ + F(q))`.
    DeltaRegularized {
        base: Box<Integrand>,
        delta: f64,
    },
}

impl Integrand {
    pub fn euclidean_norm() -> Self {
        Integrand::EuclideanNorm
    }

    pub fn power_p(p: f64, scale: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return invalid("power_p needs p ≥ 1");
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return invalid("power_p needs a positive scale");
        }
        Ok(Integrand::PowerP { p, scale })
    }

    pub fn quadratic(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return invalid("quadratic needs μ > 0");
        }
        Ok(Integrand::Quadratic { mu })
    }

    pub fn anisotropic_norm(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return invalid("anisotropic_norm needs positive weights");
        }
        Ok(Integrand::AnisotropicNorm { weights })
    }

    /// `M_μF + κ/2|·|²`, shifted so that its value at the origin is zero.
    pub fn moreau_regularized(base: Integrand, mu: f64, kappa: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) || !(kappa >= 0.0 && kappa.is_finite()) {
            return invalid("moreau_regularized needs μ > 0 and κ ≥ 0");
        }
        if !base.supports_prox() {
            return Err(Error::Unsupported(
                "Moreau envelope needs the proximal map of its base".into(),
            ));
        }
        let dim = base.dimension().unwrap_or(1);
        let zero = vec![0.0; dim];
        let p = base.prox_primal_vec(mu, &zero);
        let shift = base.evaluate(&p) + norm_sq(&p) / (2.0 * mu);
        Ok(Integrand::MoreauRegularized {
            base: Box::new(base),
            mu,
            kappa,
            shift,
        })
    }

    pub fn delta_regularized(base: Integrand, delta: f64) -> Result<Self> {
        delta_regularize(&base, delta)
    }

    /// Fixed argument dimension, if the kind has one.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            Integrand::AnisotropicNorm { weights } => Some(weights.len()),
            Integrand::MoreauRegularized { base, .. } | Integrand::DeltaRegularized { base, .. } => {
                base.dimension()
            }
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Integrand::EuclideanNorm => "euclidean_norm",
            Integrand::PowerP { .. } => "power_p",
            Integrand::Quadratic { .. } => "quadratic",
            Integrand::AnisotropicNorm { .. } => "anisotropic_norm",
            Integrand::MoreauRegularized { .. } => "moreau_regularized",
            Integrand::DeltaRegularized { .. } => "delta_regularized",
        }
    }

    /// Depends on `|h|` only.
    pub fn is_radial(&self) -> bool {
        match self {
            Integrand::EuclideanNorm | Integrand::PowerP { .. } | Integrand::Quadratic { .. } => true,
            Integrand::AnisotropicNorm { weights } => weights.iter().all(|a| *a == weights[0]),
            Integrand::MoreauRegularized { base, .. } | Integrand::DeltaRegularized { base, .. } => {
                base.is_radial()
            }
        }
    }

    /// `F(h) = Σ_d f(h_d)` for a one-variable `f`.
    pub fn is_separable(&self) -> bool {
        match self {
            Integrand::Quadratic { .. } => true,
            Integrand::PowerP { p, .. } => *p == 2.0,
            Integrand::MoreauRegularized { base, .. } => base.is_separable(),
            _ => false,
        }
    }

    pub fn is_smooth(&self) -> bool {
        match self {
            Integrand::Quadratic { .. } | Integrand::MoreauRegularized { .. } => true,
            Integrand::PowerP { p, .. } => *p > 1.0,
            _ => false,
        }
    }

    pub fn is_one_homogeneous(&self) -> bool {
        match self {
            Integrand::EuclideanNorm | Integrand::AnisotropicNorm { .. } => true,
            Integrand::PowerP { p, .. } => *p == 1.0,
            _ => false,
        }
    }

    /// Whether [`Integrand::prox_primal`] is available.
    pub fn supports_prox(&self) -> bool {
        match self {
            Integrand::DeltaRegularized { base, .. } => base.is_radial(),
            Integrand::MoreauRegularized { base, .. } => base.supports_prox(),
            _ => true,
        }
    }

    pub fn growth(&self) -> Growth {
        match self {
            Integrand::EuclideanNorm => Growth {
                p: 1.0,
                alpha1: 1.0,
                beta1: 0.0,
                alpha2: 1.0,
                beta2: 0.0,
            },
            Integrand::PowerP { p, scale } => Growth {
                p: *p,
                alpha1: *scale,
                beta1: 0.0,
                alpha2: *scale,
                beta2: 0.0,
            },
            Integrand::Quadratic { mu } => Growth {
                p: 2.0,
                alpha1: 0.5 * mu,
                beta1: 0.0,
                alpha2: 0.5 * mu,
                beta2: 0.0,
            },
            Integrand::AnisotropicNorm { weights } => {
                let max = weights.iter().copied().fold(0.0, f64::max);
                let min = weights.iter().copied().fold(f64::INFINITY, f64::min);
                Growth {
                    p: 1.0,
                    alpha1: max.sqrt(),
                    beta1: 0.0,
                    alpha2: min.sqrt(),
                    beta2: 0.0,
                }
            }
            Integrand::MoreauRegularized { mu, kappa, shift, .. } => Growth {
                p: 2.0,
                alpha1: 0.5 / mu + 0.5 * kappa,
                beta1: 0.0,
                alpha2: 0.5 * kappa,
                beta2: shift.max(0.0),
            },
            Integrand::DeltaRegularized { delta, .. } => Growth {
                p: 1.0,
                alpha1: delta + 1.0 / delta,
                beta1: 0.0,
                alpha2: *delta,
                beta2: 0.0,
            },
        }
    }

    /// `F(h)`; `+∞` outside the domain.
    pub fn evaluate(&self, h: &[f64]) -> f64 {
        match self {
            Integrand::EuclideanNorm => norm(h),
            Integrand::PowerP { p, scale } => scale * norm(h).powf(*p),
            Integrand::Quadratic { mu } => 0.5 * mu * norm_sq(h),
            Integrand::AnisotropicNorm { weights } => weighted_norm(weights, h),
            Integrand::MoreauRegularized {
                base,
                mu,
                kappa,
                shift,
            } => {
                let p = base.prox_primal_vec(*mu, h);
                let d: f64 = h.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
                base.evaluate(&p) + d / (2.0 * mu) + 0.5 * kappa * norm_sq(h) - shift
            }
            Integrand::DeltaRegularized { base, delta } => delta::value(base, *delta, h),
        }
    }

    /// `F*(q) = sup_h ⟨q, h⟩ - F(h)`.
    pub fn conjugate(&self, q: &[f64]) -> f64 {
        match self {
            Integrand::EuclideanNorm => indicator(norm(q) <= 1.0 + DOMAIN_TOL),
            Integrand::PowerP { p, scale } => {
                let r = norm(q);
                if *p == 1.0 {
                    indicator(r <= scale * (1.0 + DOMAIN_TOL))
                } else {
                    let pc = p / (p - 1.0);
                    (p - 1.0) * scale * (r / (scale * p)).powf(pc)
                }
            }
            Integrand::Quadratic { mu } => norm_sq(q) / (2.0 * mu),
            Integrand::AnisotropicNorm { weights } => {
                indicator(ellipse_level(weights, q) <= 1.0 + DOMAIN_TOL)
            }
            Integrand::MoreauRegularized {
                base,
                mu,
                kappa,
                shift,
            } => {
                if *kappa == 0.0 {
                    return base.conjugate(q) + 0.5 * mu * norm_sq(q) + shift;
                }
                let lam = kappa / (1.0 + mu * kappa);
                let scaled: Vec<f64> = q.iter().map(|v| v / (1.0 + mu * kappa)).collect();
                let p = base.prox_conjugate_vec(lam, &scaled);
                let d: f64 = q.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
                base.conjugate(&p) + 0.5 * mu * norm_sq(&p) + d / (2.0 * kappa) + shift
            }
            Integrand::DeltaRegularized { base, delta } => delta::conjugate(base, *delta, q),
        }
    }

    /// `F^∞(h) = lim_{t→∞} F(th)/t`.
    pub fn recession(&self, h: &[f64]) -> f64 {
        let r = norm(h);
        let superlinear = |r: f64| if r == 0.0 { 0.0 } else { f64::INFINITY };
        match self {
            Integrand::EuclideanNorm => r,
            Integrand::PowerP { p, scale } => {
                if *p == 1.0 {
                    scale * r
                } else {
                    superlinear(r)
                }
            }
            Integrand::Quadratic { .. } => superlinear(r),
            Integrand::AnisotropicNorm { weights } => weighted_norm(weights, h),
            Integrand::MoreauRegularized { base, kappa, .. } => {
                if *kappa > 0.0 {
                    superlinear(r)
                } else {
                    base.recession(h)
                }
            }
            Integrand::DeltaRegularized { base, delta } => {
                if base.is_radial() {
                    let slope = base.radial_slope_at_infinity();
                    (delta + slope.min(1.0 / delta)) * r
                } else {
                    numeric_recession(|v| self.evaluate(v), h)
                }
            }
        }
    }

    /// `lim F(r e)/r` for radial kinds.
    fn radial_slope_at_infinity(&self) -> f64 {
        let dim = self.dimension().unwrap_or(1);
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        self.recession(&e)
    }

    /// `argmin_z ½|z - h|² + τF(z)`.
    pub fn prox_primal(&self, tau: f64, h: &[f64]) -> Result<Vec<f64>> {
        if !(tau > 0.0) {
            return invalid("prox step must be positive");
        }
        if !self.supports_prox() {
            return Err(Error::Unsupported(
                "proximal map of a delta-regularised non-radial integrand".into(),
            ));
        }
        Ok(self.prox_primal_vec(tau, h))
    }

    /// `argmin_p ½|p - q|² + σF*(p)`.
    pub fn prox_conjugate(&self, sigma: f64, q: &[f64]) -> Result<Vec<f64>> {
        if !(sigma > 0.0) {
            return invalid("prox step must be positive");
        }
        if !self.supports_prox() {
            return Err(Error::Unsupported(
                "proximal map of a delta-regularised non-radial integrand".into(),
            ));
        }
        Ok(self.prox_conjugate_vec(sigma, q))
    }

    pub(crate) fn prox_primal_vec(&self, tau: f64, h: &[f64]) -> Vec<f64> {
        let mut out = h.to_vec();
        self.prox_primal_in_place(tau, &mut out);
        out
    }

    pub(crate) fn prox_conjugate_vec(&self, sigma: f64, q: &[f64]) -> Vec<f64> {
        let mut out = q.to_vec();
        self.prox_conjugate_in_place(sigma, &mut out);
        out
    }

    pub(crate) fn prox_primal_in_place(&self, tau: f64, h: &mut [f64]) {
        match self {
            Integrand::EuclideanNorm => {
                let r = norm(h);
                let f = if r > tau { 1.0 - tau / r } else { 0.0 };
                h.iter_mut().for_each(|v| *v *= f);
            }
            Integrand::PowerP { p, scale } => {
                let r = norm(h);
                if r > 0.0 {
                    let rho = power_radial_prox(*p, *scale, tau, r);
                    h.iter_mut().for_each(|v| *v *= rho / r);
                }
            }
            Integrand::Quadratic { mu } => {
                h.iter_mut().for_each(|v| *v /= 1.0 + tau * mu);
            }
            Integrand::AnisotropicNorm { weights } => {
                let mut scaled: Vec<f64> = h.iter().map(|v| v / tau).collect();
                project_ellipse(weights, &mut scaled);
                for (v, s) in h.iter_mut().zip(&scaled) {
                    *v -= tau * s;
                }
            }
            Integrand::MoreauRegularized { base, mu, kappa, .. } => {
                let denom = 1.0 + tau * kappa;
                let lam = tau / denom;
                h.iter_mut().for_each(|v| *v /= denom);
                let mut p = h.to_vec();
                base.prox_primal_in_place(mu + lam, &mut p);
                let theta = lam / (mu + lam);
                for (v, pv) in h.iter_mut().zip(&p) {
                    *v += theta * (pv - *v);
                }
            }
            Integrand::DeltaRegularized { base, delta } => {
                delta::prox_radial(base, *delta, tau, h);
            }
        }
    }

    pub(crate) fn prox_conjugate_in_place(&self, sigma: f64, q: &mut [f64]) {
        match self {
            Integrand::EuclideanNorm => project_ball(1.0, q),
            Integrand::PowerP { p, scale } if *p == 1.0 => project_ball(*scale, q),
            Integrand::Quadratic { mu } => {
                q.iter_mut().for_each(|v| *v /= 1.0 + sigma / mu);
            }
            Integrand::AnisotropicNorm { weights } => project_ellipse(weights, q),
            _ => {
                // Moreau: prox_{σF*}(q) = q - σ prox_{F/σ}(q/σ)
                let mut z: Vec<f64> = q.iter().map(|v| v / sigma).collect();
                self.prox_primal_in_place(1.0 / sigma, &mut z);
                for (v, zv) in q.iter_mut().zip(&z) {
                    *v -= sigma * zv;
                }
            }
        }
    }

    /// `∇F(h)` for differentiable kinds.
    pub fn gradient(&self, h: &[f64]) -> Result<Vec<f64>> {
        match self {
            Integrand::Quadratic { mu } => Ok(h.iter().map(|v| mu * v).collect()),
            Integrand::PowerP { p, scale } if *p > 1.0 => {
                let r = norm(h);
                if r == 0.0 {
                    return Ok(vec![0.0; h.len()]);
                }
                let f = scale * p * r.powf(p - 2.0);
                Ok(h.iter().map(|v| f * v).collect())
            }
            Integrand::MoreauRegularized { base, mu, kappa, .. } => {
                let p = base.prox_primal_vec(*mu, h);
                Ok(h.iter()
                    .zip(&p)
                    .map(|(v, pv)| (v - pv) / mu + kappa * v)
                    .collect())
            }
            _ => invalid(format!("{} is not differentiable", self.kind_name())),
        }
    }

    /// Minimum of `F` on the unit sphere and a direction attaining it,
    /// for one-homogeneous kinds.
    pub fn spherical_minimum(&self, dim: usize) -> Result<(f64, Vec<f64>)> {
        let mut e = vec![0.0; dim];
        match self {
            Integrand::EuclideanNorm => {
                e[0] = 1.0;
                Ok((1.0, e))
            }
            Integrand::PowerP { p, scale } if *p == 1.0 => {
                e[0] = 1.0;
                Ok((*scale, e))
            }
            Integrand::AnisotropicNorm { weights } => {
                if weights.len() != dim {
                    return invalid("anisotropic weights do not match the dimension");
                }
                let (k, a) = weights
                    .iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |acc, (k, &a)| if a < acc.1 { (k, a) } else { acc });
                e[k] = 1.0;
                Ok((a.sqrt(), e))
            }
            _ => invalid(format!("{} is not one-homogeneous", self.kind_name())),
        }
    }

    /// Checks the argument dimension against a grid dimension.
    pub fn check_dimension(&self, dim: usize) -> Result<()> {
        match self.dimension() {
            Some(d) if d != dim => invalid(format!(
                "integrand expects {d}-dimensional arguments, grid has dimension {dim}"
            )),
            _ => Ok(()),
        }
    }
}

/// `F_δ(p) = δ|p| + inf_q(|p - q|/δ + F(q))`.
pub fn delta_regularize(base: &Integrand, delta: f64) -> Result<Integrand> {
    if !(delta > 0.0 && delta.is_finite()) {
        return invalid("δ must be positive");
    }
    if base.dimension().unwrap_or(1) > 2 && !base.is_radial() {
        return invalid("sampled inf-convolution supports arguments of dimension ≤ 2");
    }
    Ok(Integrand::DeltaRegularized {
        base: Box::new(base.clone()),
        delta,
    })
}

/// `F_n = M_{1/n}F + |·|²/(2n)`, normalised to vanish at the origin.
pub fn smooth_approx(base: &Integrand, n: u32) -> Result<Integrand> {
    if n == 0 {
        return invalid("smoothing index must be at least 1");
    }
    let eps = 1.0 / n as f64;
    Integrand::moreau_regularized(base.clone(), eps, eps)
}

fn indicator(inside: bool) -> f64 {
    if inside {
        0.0
    } else {
        f64::INFINITY
    }
}

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

fn weighted_norm(weights: &[f64], h: &[f64]) -> f64 {
    weights
        .iter()
        .zip(h)
        .map(|(a, v)| a * v * v)
        .sum::<f64>()
        .sqrt()
}

fn ellipse_level(weights: &[f64], q: &[f64]) -> f64 {
    weights.iter().zip(q).map(|(a, v)| v * v / a).sum()
}

pub(crate) fn project_ball(radius: f64, q: &mut [f64]) {
    let r = norm(q);
    if r > radius {
        let f = radius / r;
        q.iter_mut().for_each(|v| *v *= f);
    }
}

/// Euclidean projection onto `{p : Σ p_j²/a_j ≤ 1}`.
pub(crate) fn project_ellipse(weights: &[f64], q: &mut [f64]) {
    if ellipse_level(weights, q) <= 1.0 {
        return;
    }
    // p_j = a_j q_j / (a_j + λ) with λ the root of a convex decreasing
    // function; Newton from λ = 0 increases monotonically to it.
    let psi = |lam: f64| -> (f64, f64) {
        let mut f = -1.0;
        let mut df = 0.0;
        for (a, v) in weights.iter().zip(q.iter()) {
            let s = a + lam;
            f += v * v * a / (s * s);
            df -= 2.0 * v * v * a / (s * s * s);
        }
        (f, df)
    };
    let mut lam = 0.0;
    for _ in 0..200 {
        let (f, df) = psi(lam);
        if f.abs() <= 1e-15 || df == 0.0 {
            break;
        }
        let next = lam - f / df;
        if !(next > lam) {
            break;
        }
        lam = next;
    }
    for (a, v) in weights.iter().zip(q.iter_mut()) {
        *v *= a / (a + lam);
    }
    let level = ellipse_level(weights, q);
    if level > 1.0 {
        let f = level.sqrt();
        q.iter_mut().for_each(|v| *v /= f);
    }
}

/// Root of `ρ - r + τ s p ρ^{p-1} = 0` on `[0, r]`.
fn power_radial_prox(p: f64, scale: f64, tau: f64, r: f64) -> f64 {
    if p == 1.0 {
        return (r - tau * scale).max(0.0);
    }
    if p == 2.0 {
        return r / (1.0 + 2.0 * tau * scale);
    }
    let c = tau * scale * p;
    let phi = |rho: f64| rho - r + c * rho.powf(p - 1.0);
    let (mut lo, mut hi) = (0.0_f64, r);
    let mut rho = r / (1.0 + c * r.powf(p - 2.0).min(1e300));
    if !(rho > 0.0 && rho < r) {
        rho = 0.5 * r;
    }
    for _ in 0..200 {
        let f = phi(rho);
        if f > 0.0 {
            hi = rho;
        } else {
            lo = rho;
        }
        let df = 1.0 + c * (p - 1.0) * rho.powf(p - 2.0);
        let mut next = rho - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - rho).abs() <= 1e-16 * r.max(1e-300) {
            rho = next;
            break;
        }
        rho = next;
    }
    rho
}

/// `lim F(2^k h)/2^k` for `k = 10..30`; `+∞` when the ratios keep
/// growing geometrically.
pub(crate) fn numeric_recession(f: impl Fn(&[f64]) -> f64, h: &[f64]) -> f64 {
    if norm(h) == 0.0 {
        return 0.0;
    }
    let mut prev = f64::NAN;
    let mut growth = 0;
    for k in 10..=30 {
        let t = (k as f64).exp2();
        let th: Vec<f64> = h.iter().map(|v| v * t).collect();
        let ratio = f(&th) / t;
        if !ratio.is_finite() {
            return f64::INFINITY;
        }
        if prev.is_finite() {
            if (ratio - prev).abs() <= 1e-9 * (1.0 + ratio.abs()) {
                return ratio;
            }
            if ratio > 1.5 * prev && prev > 0.0 {
                growth += 1;
                if growth >= 3 {
                    return f64::INFINITY;
                }
            } else {
                growth = 0;
            }
        }
        prev = ratio;
    }
    prev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(Integrand::EuclideanNorm.evaluate(&[0.0, 0.0]), 0.0);
        let pw = Integrand::power_p(2.0, 0.5).unwrap();
        assert!((pw.evaluate(&[3.0, 4.0]) - 12.5).abs() < 1e-12);
        let an = Integrand::anisotropic_norm(vec![1.0, 4.0]).unwrap();
        assert!((an.evaluate(&[1.0, 1.0]) - 5f64.sqrt()).abs() < 1e-14);
        let q = Integrand::quadratic(1.0).unwrap();
        assert!((q.conjugate(&[2.0, 0.0]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn prox_examples() {
        let n = Integrand::EuclideanNorm;
        assert_eq!(n.prox_primal(1.0, &[3.0, 0.0]).unwrap(), vec![2.0, 0.0]);
        assert_eq!(n.prox_conjugate(1.0, &[0.0, 3.0]).unwrap(), vec![0.0, 1.0]);
        let q = Integrand::quadratic(1.0).unwrap();
        assert_eq!(q.prox_primal(1.0, &[2.0, 4.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(q.prox_conjugate(1.0, &[2.0, 4.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn power_prox_residual() {
        for p in [1.2, 1.5, 3.0] {
            let f = Integrand::power_p(p, 0.7).unwrap();
            let h = [0.8, -1.3];
            let z = f.prox_primal(0.9, &h).unwrap();
            let r = norm(&z);
            let res = r - norm(&h) + 0.9 * 0.7 * p * r.powf(p - 1.0);
            assert!(res.abs() < 1e-10, "p={p} res={res}");
        }
    }

    #[test]
    fn ellipse_projection_is_on_boundary() {
        let mut q = vec![3.0, -2.0];
        project_ellipse(&[1.0, 4.0], &mut q);
        let lvl = ellipse_level(&[1.0, 4.0], &q);
        assert!((lvl - 1.0).abs() < 1e-12);
    }

    #[test]
    fn huber_plus_quadratic() {
        let f = smooth_approx(&Integrand::EuclideanNorm, 1).unwrap();
        for r in [0.0, 0.3, 1.0, 2.5] {
            let huber = if r <= 1.0 { 0.5 * r * r } else { r - 0.5 };
            assert!((f.evaluate(&[r]) - huber - 0.5 * r * r).abs() < 1e-12);
        }
    }

    #[test]
    fn moreau_conjugate_matches_scan() {
        let f = smooth_approx(&Integrand::EuclideanNorm, 2).unwrap();
        for q in [0.0, 0.4, 1.7] {
            let scan = (-40000..=40000)
                .map(|k| {
                    let h = k as f64 * 1e-3;
                    q * h - f.evaluate(&[h])
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((f.conjugate(&[q]) - scan).abs() < 1e-5, "q={q}");
        }
    }
}
