//! Whitened/rotated image `Ω` of the operating covariance in training
//! coordinates, and the quadratic form it induces.
//!
//! With `V_⊥` spanning the complement of `v` and `F_t = chol(V_⊥ᴴ Σ_t V_⊥)`:
//!
//! ```text
//! Ω₁₁ = F_t⁻¹ V_⊥ᴴ Σ V_⊥ F_t⁻ᴴ
//! Ω₁₂ = F_t⁻¹ V_⊥ᴴ Σ Σ_t⁻¹ v / (vᴴ Σ_t⁻¹ v)^{1/2}
//! Ω₂₂ = vᴴ Σ_t⁻¹ Σ Σ_t⁻¹ v / (vᴴ Σ_t⁻¹ v)
//! ```
//!
//! and the loss is `ℓ = [1 + Ω₂.₁⁻¹ Q]⁻¹` with
//! `Q = V⁻¹ Σᵢ λᵢ χ²(2, V δᵢ)`, `V ~ χ²(2(K-N+2))`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, herm_eig, inner, norm, orth_complement, HermitianMatrix, C64};
use crate::scenarios::ScenarioPair;

/// Relative threshold on `‖Ω₁₂‖` for declaring the GER.
pub const GER_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct OmegaDecomposition {
    pub omega11: HermitianMatrix,
    pub omega12: Vec<C64>,
    pub omega22: f64,
    /// Schur complement `Ω₂₂ - Ω₁₂ᴴ Ω₁₁⁻¹ Ω₁₂`.
    pub omega21: f64,
    /// Eigenvalues of `Ω₁₁`, descending.
    pub lambda: Vec<f64>,
    pub delta: Vec<f64>,
    /// `Ω₁₁⁻¹ Ω₁₂`.
    pub tbar12: Vec<C64>,
    /// `(vᴴΣ_t⁻¹v)/(vᴴΣ⁻¹v)`.
    pub lambda_ger: f64,
    pub is_ger: bool,
}

impl OmegaDecomposition {
    pub fn dim(&self) -> usize {
        self.lambda.len() + 1
    }
}

pub fn build_omega(pair: &ScenarioPair) -> Result<OmegaDecomposition> {
    let n = pair.dim();
    if n < 2 {
        return Err(Error::InvalidScenario("N must be at least 2".into()));
    }
    let v = pair.v();
    let sigma = pair.sigma();
    let vp = orth_complement(v)?;

    let f_t = cholesky(&pair.sigma_t().congruence(&vp))?;
    let a11 = sigma.congruence(&vp);
    let half = f_t.solve_lower_matrix(a11.as_matrix());
    let omega11 = HermitianMatrix::hermitian_part(&f_t.solve_lower_matrix(&half.conj_transpose()));

    let s = cholesky(pair.sigma_t())?.solve_vec(v);
    let vst = inner(v, &s).re;
    let sigma_s = sigma.mul_vec(&s);
    let omega12: Vec<C64> = f_t
        .solve_lower(&vp.conj_transpose_mul_vec(&sigma_s))
        .into_iter()
        .map(|z| z / vst.sqrt())
        .collect();
    let omega22 = inner(&s, &sigma_s).re / vst;

    let eig = herm_eig(&omega11)?;
    let lambda = eig.eigenvalues.clone();
    let delta: Vec<f64> = lambda
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let ui = eig.eigenvectors.column(i);
            (inner(&ui, &omega12) / *l).norm_sqr()
        })
        .collect();

    let tbar12 = cholesky(&omega11)?.solve_vec(&omega12);
    let omega21 = omega22 - inner(&omega12, &tbar12).re;

    let vsv = inner(v, &cholesky(sigma)?.solve_vec(v)).re;
    let lambda_ger = vst / vsv;

    let is_ger =
        norm(&omega12) <= GER_TOL * omega11.as_matrix().frobenius_norm().sqrt() * omega22.sqrt();

    Ok(OmegaDecomposition {
        omega11,
        omega12,
        omega22,
        omega21,
        lambda,
        delta,
        tbar12,
        lambda_ger,
        is_ger,
    })
}

/// `Q = V⁻¹ Σᵢ λᵢ χ²(hᵢ, V δᵢ)` with `V ~ χ²(p)`; the loss applies
/// `scale = Ω₂.₁⁻¹` to `Q`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadraticFormSpec {
    pub weights: Vec<f64>,
    pub dof: Vec<f64>,
    pub noncentrality: Vec<f64>,
    pub denom_dof: f64,
    pub scale: f64,
}

impl QuadraticFormSpec {
    pub fn new(
        weights: Vec<f64>,
        dof: Vec<f64>,
        noncentrality: Vec<f64>,
        denom_dof: f64,
        scale: f64,
    ) -> Result<Self> {
        if weights.len() != dof.len() || weights.len() != noncentrality.len() {
            return Err(Error::DimensionMismatch(
                "quadratic form term lists differ in length".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidScenario(
                "negative quadratic form weight".into(),
            ));
        }
        if let Some(d) = noncentrality.iter().find(|d| !(**d >= 0.0)) {
            return Err(Error::NegativeNoncentrality(*d));
        }
        if let Some(h) = dof.iter().find(|h| !(**h > 0.0)) {
            return Err(Error::InvalidDof(*h));
        }
        if !(denom_dof > 0.0) {
            return Err(Error::InvalidDof(denom_dof));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "scale = {scale} must be positive"
            )));
        }
        Ok(Self {
            weights,
            dof,
            noncentrality,
            denom_dof,
            scale,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_central(&self) -> bool {
        self.noncentrality.iter().all(|d| *d == 0.0)
    }

    /// `c_s = Σᵢ λᵢˢ (hᵢ + s δᵢ)`, i.e. `κ_s / (2^{s-1}(s-1)!)` of the
    /// numerator with `V` held at one.
    pub fn c(&self, s: i32) -> f64 {
        self.weights
            .iter()
            .zip(&self.dof)
            .zip(&self.noncentrality)
            .map(|((l, h), d)| l.powi(s) * (h + s as f64 * d))
            .sum()
    }
}

pub fn to_quadratic_form(
    omega: &OmegaDecomposition,
    k: usize,
    n: usize,
) -> Result<QuadraticFormSpec> {
    if k < n {
        return Err(Error::InsufficientSamples {
            k,
            n,
            reason: "the representation needs K >= N",
        });
    }
    if omega.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "Ω has dimension {}, scenario has N = {n}",
            omega.dim()
        )));
    }
    let m = omega.lambda.len();
    let noncentrality = if omega.is_ger {
        vec![0.0; m]
    } else {
        omega.delta.clone()
    };
    QuadraticFormSpec::new(
        omega.lambda.clone(),
        vec![2.0; m],
        noncentrality,
        2.0 * (k as f64 - n as f64 + 2.0),
        1.0 / omega.omega21,
    )
}

/// `c_s = 2(Tr((Σ_t⁻¹Σ)ˢ) - λˢ)` for a GER pair.
pub fn ger_cs(pair: &ScenarioPair, s: u32) -> Result<f64> {
    let omega = build_omega(pair)?;
    if !omega.is_ger {
        return Err(Error::NotGer);
    }
    if !(1..=3).contains(&s) {
        return Err(Error::InvalidScenario(format!(
            "cumulant order {s} outside 1..=3"
        )));
    }
    // G_t⁻¹ Σ G_t⁻ᴴ is similar to Σ_t⁻¹Σ.
    let g = cholesky(pair.sigma_t())?;
    let half = g.solve_lower_matrix(pair.sigma().as_matrix());
    let m = g.solve_lower_matrix(&half.conj_transpose());
    let mut power = m.clone();
    for _ in 1..s {
        power = power.matmul(&m);
    }
    let trace: f64 = (0..m.rows()).map(|i| power[(i, i)].re).sum();
    Ok(2.0 * (trace - omega.lambda_ger.powi(s as i32)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CumulantTriple {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl CumulantTriple {
    pub fn scaled(&self, t: f64) -> Self {
        Self {
            k1: t * self.k1,
            k2: t * t * self.k2,
            k3: t * t * t * self.k3,
        }
    }
}

/// `E[V⁻ᵏ]` for `V ~ χ²(p)`, finite for `p > 2k`.
pub fn inverse_chi2_moment(p: f64, k: u32) -> f64 {
    (1..=k).map(|i| 1.0 / (p - 2.0 * i as f64)).product()
}

/// Exact first three cumulants of `Q` (before the `Ω₂.₁⁻¹` scale).
pub fn cumulants_q(spec: &QuadraticFormSpec) -> Result<CumulantTriple> {
    let p = spec.denom_dof;
    if !(p > 6.0) {
        return Err(Error::InsufficientSamples {
            k: (p / 2.0) as usize,
            n: 0,
            reason: "the third cumulant needs a denominator dof above 6 (K > N + 1)",
        });
    }
    let e1 = inverse_chi2_moment(p, 1);
    let e2 = inverse_chi2_moment(p, 2);
    let e3 = inverse_chi2_moment(p, 3);

    let sum = |pow: i32, by_dof: bool| -> f64 {
        spec.weights
            .iter()
            .zip(&spec.dof)
            .zip(&spec.noncentrality)
            .map(|((l, h), d)| l.powi(pow) * if by_dof { *h } else { *d })
            .sum()
    };
    let s1h = sum(1, true);
    let s2h = sum(2, true);
    let s3h = sum(3, true);
    let s1d = sum(1, false);
    let s2d = sum(2, false);
    let s3d = sum(3, false);

    let k1 = s1d + e1 * s1h;
    let k2 = (2.0 * s2h + s1h * s1h) * e2 + 4.0 * e1 * s2d - s1h * s1h * e1 * e1;
    let k3 = (8.0 * s3h + s1h.powi(3) + 6.0 * s1h * s2h) * e3
        + (24.0 * s3d + 12.0 * s1h * s2d) * e2
        - 3.0 * (s1h.powi(3) + 2.0 * s1h * s2h) * e1 * e2
        - 12.0 * s1h * s2d * e1 * e1
        + 2.0 * s1h.powi(3) * e1.powi(3);
    Ok(CumulantTriple { k1, k2, k3 })
}
