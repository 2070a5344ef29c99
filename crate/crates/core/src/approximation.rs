//! Moment-matched approximations of the SNR loss distribution.
//!
//! Three families are fitted:
//!
//! * `a₁χ²(ν′) + a₂`, three cumulants of a central weighted chi-square sum;
//! * `aχ²(ν)`, two cumulants of the same sum;
//! * `aχ²(ν)/χ²(μ)`, three cumulants of the Student-type form `Q`.
//!
//! The last two lead to `ℓ ≈ [1 + a_eff χ²(ν)/χ²(μ)]⁻¹`, represented by
//! [`LossDistribution`], whose density is a generalised beta.

use serde::Serialize;
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::mismatch::{cumulants_q, CumulantTriple, QuadraticFormSpec};
use crate::quadrature::{composite_gauss_legendre, integrate};
use crate::sampling::{Chi2Sampler, RngStream};

/// `a₁χ²(ν′) + a₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PearsonFit {
    pub a1: f64,
    pub nu: f64,
    pub a2: f64,
}

impl PearsonFit {
    /// First three cumulants of `a₁χ²(ν′) + a₂`.
    pub fn cumulants(&self) -> CumulantTriple {
        CumulantTriple {
            k1: self.a1 * self.nu + self.a2,
            k2: 2.0 * self.a1.powi(2) * self.nu,
            k3: 8.0 * self.a1.powi(3) * self.nu,
        }
    }
}

/// Three-moment fit from `c_s = Σᵢ λᵢˢ(hᵢ + sδᵢ)`.
///
/// Matching `(κ₁, κ₂, κ₃) = (c₁, 2c₂, 8c₃)` gives `a₁ = c₃/c₂`,
/// `ν′ = c₂³/c₃²` and `a₂ = c₁ - c₂²/c₃`.
pub fn pearson_three_moment(c1: f64, c2: f64, c3: f64) -> Result<PearsonFit> {
    if !(c2 > 0.0) || !(c3 > 0.0) {
        return Err(Error::NonPositiveCumulant(format!("c2 = {c2}, c3 = {c3}")));
    }
    Ok(PearsonFit {
        a1: c3 / c2,
        nu: c2.powi(3) / (c3 * c3),
        a2: c1 - c2 * c2 / c3,
    })
}

/// `aχ²(ν)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaledChi2Fit {
    pub a: f64,
    pub nu: f64,
}

pub fn scaled_chi2_two_moment(c1: f64, c2: f64) -> Result<ScaledChi2Fit> {
    if !(c1 > 0.0) || !(c2 > 0.0) {
        return Err(Error::NonPositiveCumulant(format!("c1 = {c1}, c2 = {c2}")));
    }
    Ok(ScaledChi2Fit {
        a: c2 / c1,
        nu: c1 * c1 / c2,
    })
}

/// `aχ²(ν)/χ²(μ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaledFFit {
    pub a: f64,
    pub nu: f64,
    pub mu: f64,
}

impl ScaledFFit {
    /// Cumulants of `aY/W`, `Y ~ χ²(ν)`, `W ~ χ²(μ)`; needs `μ > 6`.
    pub fn cumulants(&self) -> CumulantTriple {
        scaled_f_cumulants(self.a, self.nu, self.mu)
    }
}

pub fn scaled_f_cumulants(a: f64, nu: f64, mu: f64) -> CumulantTriple {
    let e1 = 1.0 / (mu - 2.0);
    let e2 = e1 / (mu - 4.0);
    let e3 = e2 / (mu - 6.0);
    let an = a * nu;
    CumulantTriple {
        k1: an * e1,
        k2: a * a * nu * (nu + 2.0) * e2 - an * an * e1 * e1,
        k3: a.powi(3) * nu * (nu + 2.0) * (nu + 4.0) * e3
            - 3.0 * a.powi(3) * nu * nu * (nu + 2.0) * e1 * e2
            + 2.0 * (an * e1).powi(3),
    }
}

fn degeneracy(k: &CumulantTriple) -> (f64, f64) {
    let det = k.k1 * k.k3 - 2.0 * k.k2 * k.k2;
    let scale = (k.k1 * k.k3).abs().max(k.k2 * k.k2);
    (det, scale)
}

/// Closed-form solution of the three cumulant equations.
pub fn scaled_f_closed_form(k: &CumulantTriple) -> ScaledFFit {
    let (k1, k2, k3) = (k.k1, k.k2, k.k3);
    let den = k1 * k3 - 2.0 * k2 * k2;
    let num_a = k2 * k3 + 4.0 * k1 * k2 * k2 - k1 * k1 * k3;
    let num_m = k1 * k3 + k1 * k1 * k2 - k2 * k2;
    ScaledFFit {
        a: num_a / den,
        nu: 4.0 * k1 * num_m / num_a,
        mu: 2.0 + 4.0 * num_m / den,
    }
}

/// Solves `A η = b` for `η = (μ, aν, a)` by Gaussian elimination with
/// partial pivoting.
pub fn scaled_f_linear_solve(k: &CumulantTriple) -> Result<ScaledFFit> {
    let (k1, k2, k3) = (k.k1, k.k2, k.k3);
    let m2 = k2 + k1 * k1;
    let t3 = k3 + 3.0 * k1 * k2 + k1.powi(3);
    let mut a = [
        [k1, -1.0, 0.0, 2.0 * k1],
        [m2, -k1, -2.0 * k1, 4.0 * m2],
        [t3, -m2, -4.0 * m2, 6.0 * t3],
    ];
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        a.swap(col, pivot);
        if a[col][col] == 0.0 {
            return Err(Error::DegenerateCumulants {
                det: degeneracy(k).0,
            });
        }
        for row in (col + 1)..3 {
            let f = a[row][col] / a[col][col];
            let pivot = a[col];
            for (x, p) in a[row][col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * p;
            }
        }
    }
    let mut eta = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = a[row][3];
        for c in (row + 1)..3 {
            s -= a[row][c] * eta[c];
        }
        eta[row] = s / a[row][row];
    }
    Ok(ScaledFFit {
        a: eta[2],
        nu: eta[1] / eta[2],
        mu: eta[0],
    })
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Three-cumulant scaled-F fit. The closed form is cross-checked against
/// the linear-system solve and the fitted family's own cumulants.
pub fn scaled_f_fit(k: &CumulantTriple) -> Result<ScaledFFit> {
    if !(k.k2 > 0.0) {
        return Err(Error::NonPositiveCumulant(format!("k2 = {}", k.k2)));
    }
    let (det, scale) = degeneracy(k);
    if det.abs() <= 1e-10 * scale {
        return Err(Error::DegenerateCumulants { det });
    }
    let fit = scaled_f_closed_form(k);
    if !(fit.a > 0.0) || !(fit.nu > 0.0) || !(fit.mu > 6.0) {
        return Err(Error::InvalidFit(format!(
            "a = {}, nu = {}, mu = {} (need a, nu > 0 and mu > 6)",
            fit.a, fit.nu, fit.mu
        )));
    }
    let lin = scaled_f_linear_solve(k)?;
    let worst = rel_diff(fit.a, lin.a)
        .max(rel_diff(fit.nu, lin.nu))
        .max(rel_diff(fit.mu, lin.mu));
    if worst > 1e-9 {
        return Err(Error::InvalidFit(format!(
            "closed form and linear solve disagree by {worst:e}"
        )));
    }
    let back = fit.cumulants();
    if !(back.k1 * back.k3 > 2.0 * back.k2 * back.k2) {
        return Err(Error::InvalidFit(
            "fitted family violates k1*k3 > 2*k2^2".into(),
        ));
    }
    Ok(fit)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    ExactBeta,
    ExactMpdr,
    ExactSurprise,
    FittedGer,
    FittedGeneral,
}

/// `ℓ = [1 + a_eff χ²(ν)/χ²(μ)]⁻¹`, with `ν` and `μ` stored as real
/// degrees of freedom.
///
/// The density uses half degrees of freedom `ν̃ = ν/2`, `μ̃ = μ/2`:
///
/// ```text
/// p(ℓ) = a^μ̃ Γ(ν̃+μ̃) / (Γ(ν̃)Γ(μ̃)) · ℓ^{μ̃-1} (1-ℓ)^{ν̃-1} / (1 + (a-1)ℓ)^{ν̃+μ̃}
/// ```
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossDistribution {
    pub a_eff: f64,
    pub nu: f64,
    pub mu: f64,
    pub kind: LossKind,
    #[serde(skip)]
    ln_norm: f64,
}

impl LossDistribution {
    pub fn new(a_eff: f64, nu: f64, mu: f64, kind: LossKind) -> Result<Self> {
        if !(a_eff > 0.0 && a_eff.is_finite()) || !(nu > 0.0) || !(mu > 0.0) {
            return Err(Error::InvalidFit(format!(
                "a_eff = {a_eff}, nu = {nu}, mu = {mu}"
            )));
        }
        let (hn, hm) = (0.5 * nu, 0.5 * mu);
        let ln_norm = hm * a_eff.ln() + ln_gamma(hn + hm) - ln_gamma(hn) - ln_gamma(hm);
        Ok(Self {
            a_eff,
            nu,
            mu,
            kind,
            ln_norm,
        })
    }

    /// No mismatch: `(1, 2(N-1), 2(K-N+2))`.
    pub fn exact_beta(n: usize, k: usize) -> Result<Self> {
        check_sizes(n, k)?;
        Self::new(
            1.0,
            2.0 * (n as f64 - 1.0),
            denom_dof(n, k),
            LossKind::ExactBeta,
        )
    }

    /// `Σ_t = γΣ + Pvvᴴ`: `a = 1 + γ⁻¹ P vᴴΣ⁻¹v`.
    pub fn exact_mpdr(gamma: f64, soi_snr: f64, n: usize, k: usize) -> Result<Self> {
        check_sizes(n, k)?;
        if !(gamma > 0.0) || !(soi_snr >= 0.0) {
            return Err(Error::InvalidFit(format!(
                "gamma = {gamma}, P vᴴΣ⁻¹v = {soi_snr}"
            )));
        }
        Self::new(
            1.0 + soi_snr / gamma,
            2.0 * (n as f64 - 1.0),
            denom_dof(n, k),
            LossKind::ExactMpdr,
        )
    }

    pub fn ln_pdf(&self, l: f64) -> Result<f64> {
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::OutOfSupport(l));
        }
        Ok(self.ln_pdf_unchecked(l))
    }

    fn ln_pdf_unchecked(&self, l: f64) -> f64 {
        let (hn, hm) = (0.5 * self.nu, 0.5 * self.mu);
        self.ln_norm + (hm - 1.0) * l.ln() + (hn - 1.0) * (-l).ln_1p()
            - (hn + hm) * ((self.a_eff - 1.0) * l).ln_1p()
    }

    pub fn pdf(&self, l: f64) -> Result<f64> {
        self.ln_pdf(l).map(f64::exp)
    }

    /// `P(ℓ ≤ x) = I_z(μ̃, ν̃)` with `z = a x / (1 + (a-1) x)`.
    pub fn cdf(&self, l: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::OutOfSupport(l));
        }
        Ok(self.cdf_unchecked(l))
    }

    fn cdf_unchecked(&self, l: f64) -> f64 {
        if l <= 0.0 {
            return 0.0;
        }
        if l >= 1.0 {
            return 1.0;
        }
        let z = (self.a_eff * l / (1.0 + (self.a_eff - 1.0) * l)).clamp(0.0, 1.0);
        beta_reg(0.5 * self.mu, 0.5 * self.nu, z)
    }

    /// Bisection on the cdf to `1e-9`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::OutOfSupport(p));
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if self.cdf_unchecked(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `E[ℓ] = ∫₀¹ (1 - F(x)) dx` by adaptive quadrature.
    pub fn mean(&self) -> f64 {
        integrate(|x| 1.0 - self.cdf_unchecked(x), 0.0, 1.0, 1e-12, 1e-11, 400).value
    }

    pub fn sampler(&self) -> Result<LossSampler> {
        Ok(LossSampler {
            a_eff: self.a_eff,
            num: Chi2Sampler::new(self.nu)?,
            den: Chi2Sampler::new(self.mu)?,
        })
    }
}

fn check_sizes(n: usize, k: usize) -> Result<()> {
    if n < 2 || k < n {
        return Err(Error::InsufficientSamples {
            k,
            n,
            reason: "need N >= 2 and K >= N",
        });
    }
    Ok(())
}

fn denom_dof(n: usize, k: usize) -> f64 {
    2.0 * (k as f64 - n as f64 + 2.0)
}

/// Draws from `[1 + a χ²(ν)/χ²(μ)]⁻¹`.
#[derive(Clone, Copy, Debug)]
pub struct LossSampler {
    a_eff: f64,
    num: Chi2Sampler,
    den: Chi2Sampler,
}

impl LossSampler {
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let x = self.num.sample(rng);
        let y = self.den.sample(rng);
        y / (y + self.a_eff * x)
    }
}

/// Which fitted or exact parameters to turn into a [`LossDistribution`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FitSource {
    ExactBeta,
    ExactMpdr {
        gamma: f64,
        soi_snr: f64,
    },
    /// Two-moment fit of the GER numerator; `μ = 2(K-N+2)`.
    Ger(ScaledChi2Fit),
    /// Scaled-F fit of `Q`, denominator already embedded.
    General(ScaledFFit),
    /// Scaled-F fit of the two-eigenvalue surprise form.
    Surprise(ScaledFFit),
}

pub fn assemble_loss(fit: FitSource, omega21: f64, k: usize, n: usize) -> Result<LossDistribution> {
    if !(omega21 > 0.0) {
        return Err(Error::InvalidFit(format!("Ω₂.₁ = {omega21}")));
    }
    match fit {
        FitSource::ExactBeta => LossDistribution::exact_beta(n, k),
        FitSource::ExactMpdr { gamma, soi_snr } => {
            LossDistribution::exact_mpdr(gamma, soi_snr, n, k)
        }
        FitSource::Ger(f) => {
            check_sizes(n, k)?;
            LossDistribution::new(f.a / omega21, f.nu, denom_dof(n, k), LossKind::FittedGer)
        }
        FitSource::General(f) => {
            LossDistribution::new(f.a / omega21, f.nu, f.mu, LossKind::FittedGeneral)
        }
        FitSource::Surprise(f) => {
            LossDistribution::new(f.a / omega21, f.nu, f.mu, LossKind::ExactSurprise)
        }
    }
}

/// Loss law implied by the Pearson fit of the GER numerator:
/// `ℓ = [1 + (a₁χ²(ν′) + a₂)/(λ V)]⁻¹`, `V ~ χ²(p)`.
///
/// No closed-form density exists; cdf and pdf are integrals over the
/// numerator chi-square `X`. They use a fixed composite Gauss-Legendre rule in
/// `w = X^{1/m}`, `m = max(2, 4/ν′)`, between the `1e-17` tail quantiles,
/// where the weighted integrand is smooth.
#[derive(Clone, Debug)]
pub struct PearsonLoss {
    pub fit: PearsonFit,
    pub lambda: f64,
    pub denom_dof: f64,
    /// Numerator abscissae and density-weighted rule weights.
    nodes: Vec<(f64, f64)>,
}

impl PearsonLoss {
    pub fn new(fit: PearsonFit, lambda: f64, denom_dof: f64) -> Result<Self> {
        if !(fit.a1 > 0.0) || !(fit.nu > 0.0) || !(lambda > 0.0) || !(denom_dof > 0.0) {
            return Err(Error::InvalidFit(format!(
                "{fit:?}, lambda = {lambda}, p = {denom_dof}"
            )));
        }
        let chi = ChiSquared::new(fit.nu).map_err(|e| Error::InvalidFit(e.to_string()))?;
        let m = (4.0 / fit.nu).max(2.0);
        let lo = chi.inverse_cdf(1e-17).powf(1.0 / m);
        let hi = chi.inverse_cdf(1.0 - 1e-16).powf(1.0 / m);
        let (ws, gw) = composite_gauss_legendre(lo, hi, 32, 8);
        let mut nodes: Vec<(f64, f64)> = ws
            .iter()
            .zip(&gw)
            .map(|(w, g)| {
                let x = w.powf(m);
                (x, g * chi.pdf(x) * m * x / w)
            })
            .collect();
        let total: f64 = nodes.iter().map(|n| n.1).sum();
        for n in nodes.iter_mut() {
            n.1 /= total;
        }
        Ok(Self {
            fit,
            lambda,
            denom_dof,
            nodes,
        })
    }

    fn denom_cdf(&self, t: f64) -> f64 {
        chi2_cdf(self.denom_dof, t)
    }

    pub fn cdf(&self, l: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::OutOfSupport(l));
        }
        if l == 0.0 {
            return Ok(0.0);
        }
        if l == 1.0 {
            return Ok(1.0);
        }
        // ℓ ≤ x  ⇔  V ≤ (a₁X + a₂)/c,  c = λ(1/x - 1)
        let c = self.lambda * (1.0 / l - 1.0);
        let total: f64 = self
            .nodes
            .iter()
            .map(|(x, w)| w * self.denom_cdf(((self.fit.a1 * x + self.fit.a2) / c).max(0.0)))
            .sum();
        Ok(total.clamp(0.0, 1.0))
    }

    pub fn pdf(&self, l: f64) -> Result<f64> {
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::OutOfSupport(l));
        }
        let c = self.lambda * (1.0 / l - 1.0);
        let hp = 0.5 * self.denom_dof;
        let ln_norm = -hp * 2f64.ln() - ln_gamma(hp);
        let total: f64 = self
            .nodes
            .iter()
            .map(|(x, w)| {
                let t = (self.fit.a1 * x + self.fit.a2) / c;
                if t <= 0.0 {
                    return 0.0;
                }
                let f = (ln_norm + (hp - 1.0) * t.ln() - 0.5 * t).exp();
                w * f * t / (l * (1.0 - l))
            })
            .sum();
        Ok(total)
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<f64> {
        let x = Chi2Sampler::new(self.fit.nu)?.sample(rng);
        let v = Chi2Sampler::new(self.denom_dof)?.sample(rng);
        Ok(1.0 / (1.0 + (self.fit.a1 * x + self.fit.a2) / (self.lambda * v)))
    }
}

/// Real chi-square cdf; finite Poisson sum when `dof/2` is an integer.
pub fn chi2_cdf(dof: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let half = 0.5 * dof;
    if half.fract() == 0.0 && half <= 200.0 {
        let y = 0.5 * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..half as usize {
            term *= y / j as f64;
            sum += term;
        }
        (1.0 - (-y).exp() * sum).clamp(0.0, 1.0)
    } else {
        gamma_lr(half, 0.5 * x)
    }
}

/// Exact surprise-interference law
/// `ℓ = [1 + (χ²(2(N-2)) + (1 + qᴴΣ_t⁻¹q) χ²(2)) / χ²(2(K-N+2))]⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurpriseDistribution {
    pub q_power: f64,
    pub n: usize,
    pub k: usize,
}

impl SurpriseDistribution {
    pub fn quadratic_form(&self) -> QuadraticFormSpec {
        let m = self.n - 1;
        let mut weights = vec![1.0; m];
        weights[0] = 1.0 + self.q_power;
        QuadraticFormSpec::new(
            weights,
            vec![2.0; m],
            vec![0.0; m],
            denom_dof(self.n, self.k),
            1.0,
        )
        .expect("validated sizes")
    }

    /// Scaled-F fit of the exact form (kind `ExactSurprise`); reduces to
    /// the beta law when `qᴴΣ_t⁻¹q = 0`.
    pub fn fitted(&self) -> Result<LossDistribution> {
        if self.q_power == 0.0 {
            return LossDistribution::exact_beta(self.n, self.k);
        }
        let fit = scaled_f_fit(&cumulants_q(&self.quadratic_form())?)?;
        assemble_loss(FitSource::Surprise(fit), 1.0, self.k, self.n)
    }

    pub fn pearson(&self) -> Result<PearsonFit> {
        let spec = self.quadratic_form();
        pearson_three_moment(spec.c(1), spec.c(2), spec.c(3))
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let num = if self.n > 2 {
            Chi2Sampler::new(2.0 * (self.n as f64 - 2.0))
                .expect("positive")
                .sample(rng)
        } else {
            0.0
        };
        let two = Chi2Sampler::new(2.0).expect("positive").sample(rng);
        let v = Chi2Sampler::new(denom_dof(self.n, self.k))
            .expect("positive")
            .sample(rng);
        1.0 / (1.0 + (num + (1.0 + self.q_power) * two) / v)
    }
}

pub fn exact_surprise_distribution(
    q_power: f64,
    k: usize,
    n: usize,
) -> Result<SurpriseDistribution> {
    if !(q_power >= 0.0) {
        return Err(Error::NegativePower(q_power));
    }
    check_sizes(n, k)?;
    Ok(SurpriseDistribution { q_power, n, k })
}
