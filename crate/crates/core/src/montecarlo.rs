//! Monte Carlo draws of the SNR loss and goodness-of-fit statistics.
//!
//! Two samplers are provided. [`DirectSampler`] forms the sample covariance
//! of `K` training snapshots and evaluates the loss ratio; it never inverts
//! `S_t`. [`RepresentationSampler`] draws from the stochastic representation
//! `ℓ = [1 + scale·V⁻¹Σλᵢχ²(hᵢ, Vδᵢ)]⁻¹`.

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::approximation::LossDistribution;
use crate::error::{Error, Result};
use crate::linalg::{
    backward_substitute_adjoint, cholesky, cholesky_in_place, forward_substitute, pd_threshold,
    ComplexMatrix, C64,
};
use crate::mismatch::QuadraticFormSpec;
use crate::sampling::{noncentral_chi2_two, Chi2Sampler, RngStream};
use crate::scenarios::ScenarioPair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    DirectScm,
    Representation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub sampler: SamplerKind,
    pub seed: u64,
    pub trials: usize,
    pub scenario_digest: String,
}

impl SampleSet {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Single-column CSV with a `loss` header.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 25 + 8);
        out.push_str("loss\n");
        for v in &self.values {
            out.push_str(&format!("{v:.16e}\n"));
        }
        out
    }
}

/// Per-scenario state for the direct SCM path.
///
/// With `Σ_t = G_t G_tᴴ` and `S_t = G_t W G_tᴴ`, `W = ZZᴴ` white Wishart,
/// writing `ṽ = G_t⁻¹v`, `y = W⁻¹ṽ` and `M = G_t⁻¹ΣG_t⁻ᴴ` gives
/// `ℓ = (ṽᴴy)² / ((vᴴΣ⁻¹v)·yᴴMy)`.
#[derive(Clone, Debug)]
pub struct DirectSampler {
    n: usize,
    k: usize,
    vt: Vec<C64>,
    m: ComplexMatrix,
    v_sinv_v: f64,
}

impl DirectSampler {
    pub fn new(pair: &ScenarioPair, k: usize) -> Result<Self> {
        let n = pair.dim();
        if k < n {
            return Err(Error::InsufficientSamples {
                k,
                n,
                reason: "the sample covariance is singular for K < N",
            });
        }
        let gt = cholesky(pair.sigma_t())?;
        let vt = gt.solve_lower(pair.v());
        let half = gt.solve_lower_matrix(pair.sigma().as_matrix());
        let m = gt.solve_lower_matrix(&half.conj_transpose());
        let v_sinv_v = cholesky(pair.sigma())?
            .solve_vec(pair.v())
            .iter()
            .zip(pair.v())
            .map(|(a, b)| (b.conj() * a).re)
            .sum();
        Ok(Self {
            n,
            k,
            vt,
            m,
            v_sinv_v,
        })
    }

    pub fn draw(&self, rng: &mut RngStream, scratch: &mut DirectScratch) -> Result<f64> {
        let (n, k) = (self.n, self.k);
        for z in scratch.z.iter_mut() {
            *z = rng.complex_normal();
        }
        // lower triangle of W = ZZᴴ
        for i in 0..n {
            let zi = &scratch.z[i * k..(i + 1) * k];
            for j in 0..=i {
                let zj = &scratch.z[j * k..(j + 1) * k];
                let mut s = C64::new(0.0, 0.0);
                for t in 0..k {
                    s += zi[t] * zj[t].conj();
                }
                scratch.w[i * n + j] = s;
                scratch.w[j * n + i] = s.conj();
            }
        }
        let trace: f64 = (0..n).map(|i| scratch.w[i * n + i].re).sum();
        cholesky_in_place(&mut scratch.w, n, pd_threshold(trace, n))
            .map_err(|_| Error::SingularScm)?;
        scratch.y.copy_from_slice(&self.vt);
        forward_substitute(&scratch.w, n, &mut scratch.y);
        backward_substitute_adjoint(&scratch.w, n, &mut scratch.y);
        let num: f64 = self
            .vt
            .iter()
            .zip(&scratch.y)
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        let my = self.m.mul_vec(&scratch.y);
        let den: f64 = scratch
            .y
            .iter()
            .zip(&my)
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        let l = num * num / (self.v_sinv_v * den);
        if !(l > 0.0 && l <= 1.0 + 1e-12) {
            return Err(Error::SingularScm);
        }
        Ok(l.min(1.0 - f64::EPSILON))
    }

    pub fn scratch(&self) -> DirectScratch {
        DirectScratch {
            z: vec![C64::new(0.0, 0.0); self.n * self.k],
            w: vec![C64::new(0.0, 0.0); self.n * self.n],
            y: vec![C64::new(0.0, 0.0); self.n],
        }
    }

    pub fn draws(&self, trials: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
        let mut scratch = self.scratch();
        (0..trials).map(|_| self.draw(rng, &mut scratch)).collect()
    }
}

/// Reusable buffers for [`DirectSampler::draw`].
#[derive(Clone, Debug)]
pub struct DirectScratch {
    z: Vec<C64>,
    w: Vec<C64>,
    y: Vec<C64>,
}

pub fn simulate_loss_direct(
    pair: &ScenarioPair,
    k: usize,
    trials: usize,
    rng: &mut RngStream,
) -> Result<SampleSet> {
    let values = DirectSampler::new(pair, k)?.draws(trials, rng)?;
    Ok(SampleSet {
        values,
        sampler: SamplerKind::DirectScm,
        seed: rng.seed(),
        trials,
        scenario_digest: pair.digest(),
    })
}

enum Term {
    /// `h = 2`: `(z₁ + √(Vδ))² + z₂²`.
    Two { weight: f64, delta: f64 },
    /// `h ≥ 1`: `(z + √(Vδ))² + χ²(h - 1)`.
    Shifted {
        weight: f64,
        delta: f64,
        rest: Option<Chi2Sampler>,
    },
    /// `h < 1`: Poisson mixture of central chi-squares.
    Mixture { weight: f64, delta: f64, dof: f64 },
}

pub struct RepresentationSampler {
    terms: Vec<Term>,
    denom: Chi2Sampler,
    scale: f64,
}

impl RepresentationSampler {
    pub fn new(spec: &QuadraticFormSpec) -> Result<Self> {
        let terms = spec
            .weights
            .iter()
            .zip(&spec.dof)
            .zip(&spec.noncentrality)
            .map(|((&weight, &h), &delta)| {
                Ok(if h == 2.0 {
                    Term::Two { weight, delta }
                } else if h >= 1.0 {
                    let rest = if h > 1.0 {
                        Some(Chi2Sampler::new(h - 1.0)?)
                    } else {
                        None
                    };
                    Term::Shifted {
                        weight,
                        delta,
                        rest,
                    }
                } else {
                    Term::Mixture {
                        weight,
                        delta,
                        dof: h,
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            terms,
            denom: Chi2Sampler::new(spec.denom_dof)?,
            scale: spec.scale,
        })
    }

    /// One draw of `Q` (before `scale`).
    pub fn draw_q(&self, rng: &mut RngStream) -> f64 {
        let v = self.denom.sample(rng);
        let mut total = 0.0;
        for t in &self.terms {
            total += match *t {
                Term::Two { weight, delta } => {
                    weight * noncentral_chi2_two((v * delta).sqrt(), rng)
                }
                Term::Shifted {
                    weight,
                    delta,
                    ref rest,
                } => {
                    let z = rng.standard_normal() + (v * delta).sqrt();
                    weight * (z * z + rest.as_ref().map_or(0.0, |r| r.sample(rng)))
                }
                Term::Mixture { weight, delta, dof } => {
                    let lam = 0.5 * v * delta;
                    let j = if lam > 0.0 {
                        Poisson::new(lam).map(|p| p.sample(rng)).unwrap_or(0.0)
                    } else {
                        0.0
                    };
                    weight
                        * Chi2Sampler::new(dof + 2.0 * j)
                            .expect("positive dof")
                            .sample(rng)
                }
            };
        }
        total / v
    }

    pub fn draw(&self, rng: &mut RngStream) -> f64 {
        let l = 1.0 / (1.0 + self.scale * self.draw_q(rng));
        l.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
    }
}

/// SHA-256 over the bit patterns of a quadratic form spec.
pub fn spec_digest(spec: &QuadraticFormSpec) -> String {
    let mut h = Sha256::new();
    for x in spec
        .weights
        .iter()
        .chain(&spec.dof)
        .chain(&spec.noncentrality)
    {
        h.update(x.to_bits().to_le_bytes());
    }
    h.update(spec.denom_dof.to_bits().to_le_bytes());
    h.update(spec.scale.to_bits().to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn simulate_loss_representation(
    spec: &QuadraticFormSpec,
    trials: usize,
    rng: &mut RngStream,
) -> Result<SampleSet> {
    let s = RepresentationSampler::new(spec)?;
    Ok(SampleSet {
        values: (0..trials).map(|_| s.draw(rng)).collect(),
        sampler: SamplerKind::Representation,
        seed: rng.seed(),
        trials,
        scenario_digest: spec_digest(spec),
    })
}

/// `trials` draws of `Q` itself.
pub fn simulate_q(
    spec: &QuadraticFormSpec,
    trials: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let s = RepresentationSampler::new(spec)?;
    Ok((0..trials).map(|_| s.draw_q(rng)).collect())
}

/// Splits `trials` over streams `0..shards` of `seed`, runs them in
/// parallel and concatenates in stream order.
pub fn run_sharded<F>(seed: u64, shards: usize, trials: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(&mut RngStream, usize) -> Result<Vec<f64>> + Sync,
{
    let shards = shards.max(1);
    let base = trials / shards;
    let extra = trials % shards;
    let parts: Vec<Result<Vec<f64>>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = RngStream::new(seed, s as u64);
            f(&mut rng, base + usize::from(s < extra))
        })
        .collect();
    let mut out = Vec::with_capacity(trials);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn simulate_direct_sharded(
    pair: &ScenarioPair,
    k: usize,
    trials: usize,
    seed: u64,
    shards: usize,
) -> Result<SampleSet> {
    let sampler = DirectSampler::new(pair, k)?;
    let values = run_sharded(seed, shards, trials, |rng, t| sampler.draws(t, rng))?;
    Ok(SampleSet {
        values,
        sampler: SamplerKind::DirectScm,
        seed,
        trials,
        scenario_digest: pair.digest(),
    })
}

pub fn simulate_representation_sharded(
    spec: &QuadraticFormSpec,
    trials: usize,
    seed: u64,
    shards: usize,
) -> Result<SampleSet> {
    let sampler = RepresentationSampler::new(spec)?;
    let values = run_sharded(seed, shards, trials, |rng, t| {
        Ok((0..t).map(|_| sampler.draw(rng)).collect())
    })?;
    Ok(SampleSet {
        values,
        sampler: SamplerKind::Representation,
        seed,
        trials,
        scenario_digest: spec_digest(spec),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function `Q(λ) = 2Σ(-1)^{j-1}e^{-2j²λ²}`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// `sup |F̂ - F|` for samples against a reference cdf.
pub fn ks_statistic(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let f = cdf(xi);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

pub fn ks_one_sample(values: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let statistic = ks_statistic(values, cdf);
    KsResult {
        statistic,
        p_value: ks_p(statistic, values.len() as f64),
    }
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    KsResult {
        statistic: d,
        p_value: ks_p(d, na * nb / (na + nb)),
    }
}

/// Unbiased cumulant estimates through order three with delta-method
/// standard errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KStatistics {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub se1: f64,
    pub se2: f64,
    pub se3: f64,
}

pub fn k_statistics(values: &[f64]) -> Result<KStatistics> {
    let n = values.len();
    if n < 100 {
        return Err(Error::TooFewSamples { got: n, need: 100 });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let mut m = [0.0; 7];
    for &x in values {
        let d = x - mean;
        let mut p = d * d;
        for item in m.iter_mut().skip(2) {
            *item += p;
            p *= d;
        }
    }
    for item in m.iter_mut() {
        *item /= nf;
    }
    let (m2, m3, m4, m6) = (m[2], m[3], m[4], m[6]);
    let k2 = nf / (nf - 1.0) * m2;
    let k3 = nf * nf / ((nf - 1.0) * (nf - 2.0)) * m3;
    Ok(KStatistics {
        k1: mean,
        k2,
        k3,
        se1: (m2 / nf).sqrt(),
        se2: ((m4 - m2 * m2).max(0.0) / nf).sqrt(),
        se3: ((m6 - m3 * m3 - 6.0 * m4 * m2 + 9.0 * m2.powi(3)).max(0.0) / nf).sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins on `[0, 1]`; the value `1` falls in the last bin.
    pub fn unit(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let mut counts = vec![0u64; bins];
        for &v in values {
            let b = ((v * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self {
            edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
            counts,
        }
    }

    pub fn density(&self) -> Vec<f64> {
        let total: u64 = self.counts.iter().sum();
        let w = self.edges[1] - self.edges[0];
        self.counts
            .iter()
            .map(|&c| c as f64 / (total as f64 * w))
            .collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalSummary {
    pub trials: usize,
    pub mean: f64,
    pub histogram: Histogram,
    pub cumulants: KStatistics,
    pub ks: Option<KsResult>,
}

pub const DEFAULT_BINS: usize = 200;

pub fn empirical_summary(
    s: &SampleSet,
    bins: usize,
    reference: Option<&LossDistribution>,
) -> Result<EmpiricalSummary> {
    let cumulants = k_statistics(&s.values)?;
    let ks =
        reference.map(|d| ks_one_sample(&s.values, |x| d.cdf(x.clamp(0.0, 1.0)).unwrap_or(0.0)));
    Ok(EmpiricalSummary {
        trials: s.values.len(),
        mean: cumulants.k1,
        histogram: Histogram::unit(&s.values, bins),
        cumulants,
        ks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximation::LossDistribution;
    use crate::linalg::HermitianMatrix;
    use crate::mismatch::{build_omega, cumulants_q, to_quadratic_form};
    use crate::scenarios::{interference_covariance, mpdr_mismatch, ArrayScenario};

    fn default_pair() -> ScenarioPair {
        let sc = ArrayScenario::default();
        ScenarioPair::matched(interference_covariance(&sc).unwrap(), sc.steering()).unwrap()
    }

    #[test]
    fn direct_no_mismatch_matches_beta() {
        let pair = default_pair();
        let mut rng = RngStream::new(11, 0);
        let s = simulate_loss_direct(&pair, 32, 20_000, &mut rng).unwrap();
        assert!(s.values.iter().all(|v| *v > 0.0 && *v < 1.0));
        let d = LossDistribution::exact_beta(16, 32).unwrap();
        let ks = ks_one_sample(&s.values, |x| d.cdf(x).unwrap());
        assert!(ks.statistic < 0.015, "{ks:?}");
    }

    #[test]
    fn direct_two_by_two() {
        let pair = ScenarioPair::matched(
            HermitianMatrix::identity(2),
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        )
        .unwrap();
        let mut rng = RngStream::new(5, 0);
        let s = simulate_loss_direct(&pair, 2, 50_000, &mut rng).unwrap();
        assert!((s.mean() - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn fixed_seed_reproducible() {
        let pair = default_pair();
        let a = simulate_loss_direct(&pair, 32, 200, &mut RngStream::new(3, 0)).unwrap();
        let b = simulate_loss_direct(&pair, 32, 200, &mut RngStream::new(3, 0)).unwrap();
        assert_eq!(a, b);
        let c = simulate_direct_sharded(&pair, 32, 500, 3, 4).unwrap();
        let d = simulate_direct_sharded(&pair, 32, 500, 3, 4).unwrap();
        assert_eq!(c, d);
        assert_eq!(c.values.len(), 500);
    }

    #[test]
    fn direct_rejects_short_training() {
        assert!(matches!(
            DirectSampler::new(&default_pair(), 15),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn representation_matches_direct_no_mismatch() {
        let pair = default_pair();
        let spec = to_quadratic_form(&build_omega(&pair).unwrap(), 32, 16).unwrap();
        let a = simulate_representation_sharded(&spec, 20_000, 1, 2).unwrap();
        let b = simulate_direct_sharded(&pair, 32, 20_000, 2, 2).unwrap();
        let ks = ks_two_sample(&a.values, &b.values);
        assert!(ks.p_value > 0.001, "{ks:?}");
    }

    #[test]
    fn representation_mpdr_matches_exact() {
        let sc = ArrayScenario::default();
        let sigma = interference_covariance(&sc).unwrap();
        let v = sc.steering();
        let snr = crate::scenarios::mpdr_power_for_snr(&sigma, &v, 10.0).unwrap();
        let pair = mpdr_mismatch(&sigma, &v, snr, 1.0).unwrap();
        let spec = to_quadratic_form(&build_omega(&pair).unwrap(), 32, 16).unwrap();
        let s = simulate_representation(&spec, 20_000, 4);
        let d = LossDistribution::exact_mpdr(1.0, 10.0, 16, 32).unwrap();
        let ks = ks_one_sample(&s, |x| d.cdf(x).unwrap());
        assert!(ks.p_value > 0.001, "{ks:?}");
    }

    fn simulate_representation(spec: &QuadraticFormSpec, t: usize, seed: u64) -> Vec<f64> {
        simulate_loss_representation(spec, t, &mut RngStream::new(seed, 0))
            .unwrap()
            .values
    }

    #[test]
    fn representation_unit_case_is_beta_construction() {
        let spec =
            QuadraticFormSpec::new(vec![1.0; 15], vec![2.0; 15], vec![0.0; 15], 36.0, 1.0).unwrap();
        let s = simulate_representation(&spec, 20_000, 8);
        let d = LossDistribution::exact_beta(16, 32).unwrap();
        assert!(ks_one_sample(&s, |x| d.cdf(x).unwrap()).p_value > 0.001);
    }

    #[test]
    fn noncentral_and_fractional_terms() {
        let spec = QuadraticFormSpec::new(
            vec![1.5, 0.7, 0.3],
            vec![2.0, 3.0, 0.5],
            vec![0.4, 0.2, 0.3],
            20.0,
            1.0,
        )
        .unwrap();
        let k = cumulants_q(&spec).unwrap();
        let q = simulate_q(&spec, 200_000, &mut RngStream::new(9, 0)).unwrap();
        let est = k_statistics(&q).unwrap();
        assert!((est.k1 - k.k1).abs() < 4.0 * est.se1, "{est:?} vs {k:?}");
        assert!((est.k2 - k.k2).abs() < 4.0 * est.se2, "{est:?} vs {k:?}");
    }

    #[test]
    fn ks_uniform_calibration() {
        let mut rng = RngStream::new(1, 0);
        let u: Vec<f64> = (0..10_000).map(|_| rng.uniform()).collect();
        let ks = ks_one_sample(&u, |x| x.clamp(0.0, 1.0));
        assert!(ks.statistic < 1.63 / 100.0);
        let s = SampleSet {
            values: u,
            sampler: SamplerKind::Representation,
            seed: 1,
            trials: 10_000,
            scenario_digest: String::new(),
        };
        let sum = empirical_summary(&s, 50, None).unwrap();
        assert_eq!(sum.histogram.counts.iter().sum::<u64>(), 10_000);
        assert_eq!(sum.histogram.edges.len(), 51);
        assert!(sum.ks.is_none());
    }

    #[test]
    fn ks_two_sample_detects_shift() {
        let mut rng = RngStream::new(2, 0);
        let a: Vec<f64> = (0..5000).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = (0..5000).map(|_| rng.uniform() + 0.1).collect();
        assert!(ks_two_sample(&a, &b).p_value < 1e-6);
        let c: Vec<f64> = (0..5000).map(|_| rng.uniform()).collect();
        assert!(ks_two_sample(&a, &c).p_value > 0.001);
        assert_eq!(ks_two_sample(&a, &a).statistic, 0.0);
    }

    #[test]
    fn kolmogorov_values() {
        // Q(1.36) ≈ 0.0494, Q(1.63) ≈ 0.0098
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 5e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn k_statistics_exponential() {
        // Exp(1): cumulants (1, 1, 2)
        let mut rng = RngStream::new(6, 0);
        let x: Vec<f64> = (0..200_000).map(|_| -(1.0 - rng.uniform()).ln()).collect();
        let k = k_statistics(&x).unwrap();
        assert!((k.k1 - 1.0).abs() < 4.0 * k.se1);
        assert!((k.k2 - 1.0).abs() < 4.0 * k.se2);
        assert!((k.k3 - 2.0).abs() < 4.0 * k.se3);
        assert!(matches!(
            k_statistics(&x[..50]),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn summary_against_beta() {
        let pair = default_pair();
        let s = simulate_direct_sharded(&pair, 32, 10_000, 21, 1).unwrap();
        let d = LossDistribution::exact_beta(16, 32).unwrap();
        let sum = empirical_summary(&s, DEFAULT_BINS, Some(&d)).unwrap();
        assert!(sum.ks.unwrap().statistic < 1.36 / 100.0 * 1.5);
        assert_eq!(sum.histogram.counts.len(), 200);
        assert!(s.to_csv().starts_with("loss\n"));
    }
}
