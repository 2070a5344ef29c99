//! Construction of `(Σ, Σ_t, v)` triples: the uniform-linear-array
//! interference environment and the covariance mismatch families applied to
//! it.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, herm_eig, inner, norm, orth_complement, solve_hermitian, ComplexMatrix,
    HermitianMatrix, C64,
};
use crate::sampling::{sample_wishart, RngStream, WishartSpec};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Half-wavelength ULA steering vector, unit norm.
pub fn steering_vector(theta_deg: f64, n: usize) -> Vec<C64> {
    let phase = std::f64::consts::PI * theta_deg.to_radians().sin();
    let amp = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|k| C64::from_polar(amp, phase * k as f64))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArrayScenario {
    pub n: usize,
    pub k: usize,
    pub soi_angle_deg: f64,
    pub interference_angles_deg: Vec<f64>,
    /// dB above unit-power thermal noise.
    pub interference_powers_db: Vec<f64>,
    /// Linear SoI power (used by the MPDR family).
    pub soi_power: f64,
}

impl Default for ArrayScenario {
    /// 16-element array, K = 2N, SoI at broadside and three interferers at
    /// -12°, 9° and 25° with powers 35, 25 and 30 dB.
    fn default() -> Self {
        Self {
            n: 16,
            k: 32,
            soi_angle_deg: 0.0,
            interference_angles_deg: vec![-12.0, 9.0, 25.0],
            interference_powers_db: vec![35.0, 25.0, 30.0],
            soi_power: 0.0,
        }
    }
}

impl ArrayScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidScenario(format!("N = {} < 2", self.n)));
        }
        if self.k < self.n {
            return Err(Error::InsufficientSamples {
                k: self.k,
                n: self.n,
                reason: "the sample covariance needs K >= N",
            });
        }
        if self.interference_angles_deg.len() != self.interference_powers_db.len() {
            return Err(Error::InvalidScenario(
                "interference angle and power lists differ in length".into(),
            ));
        }
        let finite = self
            .interference_angles_deg
            .iter()
            .chain(&self.interference_powers_db)
            .chain([&self.soi_angle_deg, &self.soi_power])
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidScenario("non-finite angle or power".into()));
        }
        if self.soi_power < 0.0 {
            return Err(Error::NegativePower(self.soi_power));
        }
        Ok(())
    }

    pub fn steering(&self) -> Vec<C64> {
        steering_vector(self.soi_angle_deg, self.n)
    }
}

/// `Σ = I + Σ_k 10^{p_k/10} v(θ_k) v(θ_k)ᴴ`.
pub fn interference_covariance(sc: &ArrayScenario) -> Result<HermitianMatrix> {
    sc.validate()?;
    let mut sigma = HermitianMatrix::identity(sc.n);
    for (&theta, &p) in sc
        .interference_angles_deg
        .iter()
        .zip(&sc.interference_powers_db)
    {
        sigma = sigma.rank_one_update(db_to_linear(p), &steering_vector(theta, sc.n));
    }
    Ok(sigma)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MismatchKind {
    None,
    Mpdr { gamma: f64, power: f64 },
    Surprise { q: Vec<[f64; 2]>, enforce_ger: bool },
    GerBlockDiag { gamma: f64 },
    EigPerturb { alpha: Vec<f64> },
    InvWishart { gamma: f64, dof: usize },
}

impl MismatchKind {
    pub fn name(&self) -> &'static str {
        match self {
            MismatchKind::None => "none",
            MismatchKind::Mpdr { .. } => "mpdr",
            MismatchKind::Surprise { .. } => "surprise",
            MismatchKind::GerBlockDiag { .. } => "ger_blockdiag",
            MismatchKind::EigPerturb { .. } => "eigenvalue",
            MismatchKind::InvWishart { .. } => "inverse_wishart",
        }
    }
}

/// Operating covariance `Σ`, training covariance `Σ_t` and unit steering
/// vector `v`. Both matrices are checked positive definite on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioPair {
    sigma: HermitianMatrix,
    sigma_t: HermitianMatrix,
    v: Vec<C64>,
    kind: MismatchKind,
}

impl ScenarioPair {
    pub fn new(
        sigma: HermitianMatrix,
        sigma_t: HermitianMatrix,
        v: Vec<C64>,
        kind: MismatchKind,
    ) -> Result<Self> {
        if sigma.dim() != sigma_t.dim() || sigma.dim() != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "Σ is {n}x{n}, Σ_t is {m}x{m}, v has {} entries",
                v.len(),
                n = sigma.dim(),
                m = sigma_t.dim()
            )));
        }
        let nv = norm(&v);
        if (nv - 1.0).abs() > 1e-12 {
            return Err(Error::NotUnitNorm { norm: nv });
        }
        cholesky(&sigma)?;
        cholesky(&sigma_t)?;
        Ok(Self {
            sigma,
            sigma_t,
            v,
            kind,
        })
    }

    /// No mismatch: `Σ_t = Σ`.
    pub fn matched(sigma: HermitianMatrix, v: Vec<C64>) -> Result<Self> {
        Self::new(sigma.clone(), sigma, v, MismatchKind::None)
    }

    pub fn sigma(&self) -> &HermitianMatrix {
        &self.sigma
    }

    pub fn sigma_t(&self) -> &HermitianMatrix {
        &self.sigma_t
    }

    pub fn v(&self) -> &[C64] {
        &self.v
    }

    pub fn kind(&self) -> &MismatchKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// Angle (radians) between `Σ_t⁻¹v` and `Σ⁻¹v`; zero under the GER.
    pub fn ger_angle(&self) -> Result<f64> {
        let a = cholesky(&self.sigma_t)?.solve_vec(&self.v);
        let b = cholesky(&self.sigma)?.solve_vec(&self.v);
        let proj = inner(&b, &a) / inner(&b, &b).re;
        let resid: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x - proj * y).collect();
        Ok((norm(&resid) / norm(&a)).clamp(0.0, 1.0).asin())
    }

    /// SHA-256 over the bit patterns of `Σ`, `Σ_t` and `v`.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim() as u64).to_le_bytes());
        let parts = self
            .sigma
            .as_matrix()
            .data()
            .iter()
            .chain(self.sigma_t.as_matrix().data())
            .chain(&self.v);
        for z in parts {
            h.update(z.re.to_bits().to_le_bytes());
            h.update(z.im.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Training data contain the SoI: `Σ_t = γΣ + P v vᴴ`.
pub fn mpdr_mismatch(
    sigma: &HermitianMatrix,
    v: &[C64],
    power: f64,
    gamma: f64,
) -> Result<ScenarioPair> {
    if !(power >= 0.0) {
        return Err(Error::NegativePower(power));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidScenario(format!(
            "gamma = {gamma} must be positive"
        )));
    }
    let sigma_t = sigma.scale(gamma).rank_one_update(power, v);
    ScenarioPair::new(
        sigma.clone(),
        sigma_t,
        v.to_vec(),
        MismatchKind::Mpdr { gamma, power },
    )
}

/// SoI power `P` such that `P·vᴴΣ⁻¹v` equals `snr` (linear).
pub fn mpdr_power_for_snr(sigma: &HermitianMatrix, v: &[C64], snr: f64) -> Result<f64> {
    let w = cholesky(sigma)?.solve_vec(v);
    Ok(snr / inner(v, &w).re)
}

/// `sqrt(10^{p/10})·v(θ)`: an interferer of the given power at angle `θ`.
pub fn interferer_vector(theta_deg: f64, power_db: f64, n: usize) -> Vec<C64> {
    let amp = db_to_linear(power_db).sqrt();
    steering_vector(theta_deg, n)
        .into_iter()
        .map(|z| z * amp)
        .collect()
}

/// Surprise interference present in the operating data only:
/// `Σ = Σ_t + q qᴴ`.
///
/// With `enforce_ger`, `q_raw` is projected orthogonally to `s = Σ_t⁻¹v`,
/// which is equivalent to `qᴴΣ⁻¹v = 0`.
pub fn surprise_interference(
    sigma_t: &HermitianMatrix,
    v: &[C64],
    q_raw: &[C64],
    enforce_ger: bool,
) -> Result<ScenarioPair> {
    if q_raw.len() != v.len() {
        return Err(Error::DimensionMismatch("q and v differ in length".into()));
    }
    let q: Vec<C64> = if enforce_ger {
        let s = cholesky(sigma_t)?.solve_vec(v);
        let c = inner(&s, q_raw) / inner(&s, &s).re;
        let q: Vec<C64> = q_raw.iter().zip(&s).map(|(x, y)| x - c * y).collect();
        let raw = norm(q_raw);
        if raw > 0.0 && norm(&q) < 1e-10 * raw {
            return Err(Error::DegenerateQ);
        }
        q
    } else {
        q_raw.to_vec()
    };
    let sigma = sigma_t.rank_one_update(1.0, &q);
    ScenarioPair::new(
        sigma,
        sigma_t.clone(),
        v.to_vec(),
        MismatchKind::Surprise {
            q: q.iter().map(|z| [z.re, z.im]).collect(),
            enforce_ger,
        },
    )
}

/// `Q_v = [V_⊥ v]`.
fn rotation_with_v_last(v: &[C64]) -> Result<ComplexMatrix> {
    let vp = orth_complement(v)?;
    let n = v.len();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        if j + 1 < n {
            vp[(i, j)]
        } else {
            v[i]
        }
    }))
}

fn inverse(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    Ok(HermitianMatrix::hermitian_part(&solve_hermitian(
        a,
        &ComplexMatrix::identity(a.dim()),
    )?))
}

/// GER-preserving congruence: with `G = chol(Q_vᴴ Σ Q_v)`,
/// `Σ_t = Q_v G blockdiag(W₁₁⁻¹, W₂₂⁻¹) Gᴴ Q_vᴴ`.
pub fn ger_blockdiag_mismatch(
    sigma: &HermitianMatrix,
    v: &[C64],
    w11: &HermitianMatrix,
    w22: f64,
    gamma: f64,
) -> Result<ScenarioPair> {
    let n = v.len();
    if w11.dim() + 1 != n {
        return Err(Error::DimensionMismatch(format!(
            "W11 must be {}x{}, got {}x{}",
            n - 1,
            n - 1,
            w11.dim(),
            w11.dim()
        )));
    }
    if !(w22 > 0.0) {
        return Err(Error::InvalidScenario(format!(
            "W22 = {w22} must be positive"
        )));
    }
    let qv = rotation_with_v_last(v)?;
    let g = cholesky(&sigma.congruence(&qv))?;
    let w11_inv = inverse(w11)?;
    let d = ComplexMatrix::from_fn(n, n, |i, j| {
        if i + 1 < n && j + 1 < n {
            w11_inv.as_matrix()[(i, j)]
        } else if i + 1 == n && j + 1 == n {
            C64::new(1.0 / w22, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let a = g.lower().matmul(&d).matmul(&g.lower().conj_transpose());
    let sigma_t = HermitianMatrix::hermitian_part(&qv.matmul(&a).matmul(&qv.conj_transpose()));
    ScenarioPair::new(
        sigma.clone(),
        sigma_t,
        v.to_vec(),
        MismatchKind::GerBlockDiag { gamma },
    )
}

/// Random GER pair: `W₁₁ ~ CW(dof₁₁, I/(γ(dof₁₁-N+1)))` and
/// `W₂₂ = Gamma(shape,1)/(γ(shape-1))`, so that `E[W₁₁⁻¹] = γI` and
/// `E[W₂₂⁻¹] = γ`.
pub fn random_ger_blockdiag(
    sigma: &HermitianMatrix,
    v: &[C64],
    gamma: f64,
    w11_dof: usize,
    w22_shape: f64,
    rng: &mut RngStream,
) -> Result<ScenarioPair> {
    let m = v.len() - 1;
    if w11_dof <= m {
        return Err(Error::InvalidDof(w11_dof as f64));
    }
    if !(w22_shape > 1.0) {
        return Err(Error::InvalidDof(w22_shape));
    }
    let scale = HermitianMatrix::identity(m).scale(1.0 / (gamma * (w11_dof - m) as f64));
    let w11 = sample_wishart(&WishartSpec::new(w11_dof, scale)?, rng)?;
    let g = crate::sampling::Chi2Sampler::new(2.0 * w22_shape)?.sample(rng) * 0.5;
    let w22 = g / (gamma * (w22_shape - 1.0));
    ger_blockdiag_mismatch(sigma, v, &w11, w22, gamma)
}

/// `Σ_t = U diag(α_n λ_n(Σ)) Uᴴ` on the eigenbasis of `Σ`, eigenvalues in
/// descending order.
pub fn eigenvalue_mismatch(
    sigma: &HermitianMatrix,
    v: &[C64],
    alpha: &[f64],
) -> Result<ScenarioPair> {
    let n = sigma.dim();
    if alpha.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "need {n} alphas, got {}",
            alpha.len()
        )));
    }
    if alpha.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidScenario("alpha must be positive".into()));
    }
    let eig = herm_eig(sigma)?;
    let u = &eig.eigenvectors;
    let scaled = ComplexMatrix::from_fn(n, n, |i, j| u[(i, j)] * (alpha[j] * eig.eigenvalues[j]));
    let sigma_t = HermitianMatrix::hermitian_part(&scaled.matmul(&u.conj_transpose()));
    ScenarioPair::new(
        sigma.clone(),
        sigma_t,
        v.to_vec(),
        MismatchKind::EigPerturb {
            alpha: alpha.to_vec(),
        },
    )
}

/// `α_n` with `10 log₁₀ α_n ~ U[lo, hi]`.
pub fn random_alpha(n: usize, range_db: (f64, f64), rng: &mut RngStream) -> Vec<f64> {
    (0..n)
        .map(|_| db_to_linear(rng.uniform_range(range_db.0, range_db.1)))
        .collect()
}

/// `Σ_t = G W⁻¹ Gᴴ` with `G = chol(Σ)` and a given `W`.
pub fn inverse_wishart_from(
    sigma: &HermitianMatrix,
    v: &[C64],
    w: &HermitianMatrix,
    gamma: f64,
    dof: usize,
) -> Result<ScenarioPair> {
    let g = cholesky(sigma)?;
    let w_inv = inverse(w)?;
    let sigma_t = HermitianMatrix::hermitian_part(
        &g.lower()
            .matmul(w_inv.as_matrix())
            .matmul(&g.lower().conj_transpose()),
    );
    ScenarioPair::new(
        sigma.clone(),
        sigma_t,
        v.to_vec(),
        MismatchKind::InvWishart { gamma, dof },
    )
}

/// `W ~ CW(dof, (γ/dof)·I)`, hence `E[W] = γI`, and `Σ_t = G W⁻¹ Gᴴ`.
pub fn inverse_wishart_mismatch(
    sigma: &HermitianMatrix,
    v: &[C64],
    gamma: f64,
    dof: usize,
    rng: &mut RngStream,
) -> Result<ScenarioPair> {
    let n = sigma.dim();
    if dof < n {
        return Err(Error::InvalidDof(dof as f64));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidScenario(format!(
            "gamma = {gamma} must be positive"
        )));
    }
    let spec = WishartSpec::new(dof, HermitianMatrix::identity(n).scale(gamma / dof as f64))?;
    let w = sample_wishart(&spec, rng)?;
    inverse_wishart_from(sigma, v, &w, gamma, dof)
}
