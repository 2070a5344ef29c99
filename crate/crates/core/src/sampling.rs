//! Seedable random streams and the samplers built on them.
//!
//! Chi-square variates follow the real convention throughout; a complex
//! chi-square with `p` degrees of freedom and non-centrality `δ` is drawn as
//! `0.5 · χ²(2p, 2δ)`.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, ComplexMatrix, HermitianMatrix, C64};

/// A ChaCha8 keystream keyed by `seed` and positioned on stream `stream_id`.
///
/// Streams with the same seed and different ids never overlap, so Monte
/// Carlo shards can each own one.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// `count` fresh streams with ids `first, first+1, ...` under this seed.
    pub fn family(seed: u64, first: u64, count: usize) -> Vec<RngStream> {
        (0..count as u64)
            .map(|i| RngStream::new(seed, first + i))
            .collect()
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Circular complex normal with `E|z|² = 1`.
    #[inline]
    pub fn complex_normal(&mut self) -> C64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let re = self.standard_normal();
        let im = self.standard_normal();
        Complex64::new(s * re, s * im)
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// `n x k` matrix of i.i.d. unit-power circular complex normals.
pub fn sample_white_matrix(n: usize, k: usize, rng: &mut RngStream) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, k, |_, _| rng.complex_normal())
}

/// `X = chol(Σ)·Z`, columns i.i.d. `CN(0, Σ)`.
pub fn sample_complex_gaussian_matrix(
    n: usize,
    k: usize,
    sigma: &HermitianMatrix,
    rng: &mut RngStream,
) -> Result<ComplexMatrix> {
    if sigma.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{}, requested {n} rows",
            sigma.dim(),
            sigma.dim()
        )));
    }
    let g = cholesky(sigma)?;
    Ok(g.lower().matmul(&sample_white_matrix(n, k, rng)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WishartSpec {
    dof: usize,
    scale: HermitianMatrix,
}

impl WishartSpec {
    pub fn new(dof: usize, scale: HermitianMatrix) -> Result<Self> {
        if dof < scale.dim() {
            return Err(Error::InvalidDof(dof as f64));
        }
        cholesky(&scale)?;
        Ok(Self { dof, scale })
    }

    pub fn dim(&self) -> usize {
        self.scale.dim()
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn scale(&self) -> &HermitianMatrix {
        &self.scale
    }
}

/// `W = X Xᴴ` with `X` a `p x n` complex Gaussian matrix of covariance `scale`.
pub fn sample_wishart(spec: &WishartSpec, rng: &mut RngStream) -> Result<HermitianMatrix> {
    let x = sample_complex_gaussian_matrix(spec.dim(), spec.dof, &spec.scale, rng)?;
    Ok(HermitianMatrix::hermitian_part(
        &x.matmul(&x.conj_transpose()),
    ))
}

/// Central chi-square with real, possibly fractional, degrees of freedom.
#[derive(Clone, Copy, Debug)]
pub struct Chi2Sampler {
    dof: f64,
    gamma: Gamma<f64>,
}

impl Chi2Sampler {
    pub fn new(dof: f64) -> Result<Self> {
        if !(dof > 0.0 && dof.is_finite()) {
            return Err(Error::InvalidDof(dof));
        }
        let gamma = Gamma::new(0.5 * dof, 2.0).map_err(|_| Error::InvalidDof(dof))?;
        Ok(Self { dof, gamma })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.gamma.sample(rng)
    }
}

pub fn sample_chi2(dof: f64, rng: &mut RngStream) -> Result<f64> {
    Ok(Chi2Sampler::new(dof)?.sample(rng))
}

/// Non-central chi-square with even `dof`, drawn as `dof/2` complex scalars
/// `2|g + m|²` with the whole mean placed on the first one.
pub fn sample_noncentral_chi2(dof: u32, delta: f64, rng: &mut RngStream) -> Result<f64> {
    if dof == 0 || !dof.is_multiple_of(2) {
        return Err(Error::InvalidDof(dof as f64));
    }
    if !(delta >= 0.0) {
        return Err(Error::NegativeNoncentrality(delta));
    }
    let shift = delta.sqrt();
    let mut total = noncentral_chi2_two(shift, rng);
    for _ in 1..dof / 2 {
        total += noncentral_chi2_two(0.0, rng);
    }
    Ok(total)
}

/// `χ²(2, shift²)` as `(z₁ + shift)² + z₂²`.
#[inline]
pub(crate) fn noncentral_chi2_two(shift: f64, rng: &mut RngStream) -> f64 {
    let a = rng.standard_normal() + shift;
    let b = rng.standard_normal();
    a * a + b * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve_hermitian;
    use crate::montecarlo::ks_two_sample;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let mut c = RngStream::new(7, 4);
        let xa: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..8).map(|_| c.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn gaussian_unit_power() {
        let mut rng = RngStream::new(1, 0);
        let sigma = HermitianMatrix::identity(3);
        let trials = 100_000;
        let mut acc = [0.0; 3];
        for _ in 0..trials {
            let x = sample_complex_gaussian_matrix(3, 1, &sigma, &mut rng).unwrap();
            for (i, a) in acc.iter_mut().enumerate() {
                *a += x[(i, 0)].norm_sqr();
            }
        }
        for a in acc {
            assert!((a / trials as f64 - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn gaussian_diagonal_covariance() {
        let mut rng = RngStream::new(2, 0);
        let d = [2.0, 0.5, 5.0];
        let sigma = HermitianMatrix::from_real_diagonal(&d);
        let x = sample_complex_gaussian_matrix(3, 100_000, &sigma, &mut rng).unwrap();
        for (i, di) in d.iter().enumerate() {
            let m: f64 = (0..x.cols()).map(|j| x[(i, j)].norm_sqr()).sum::<f64>() / x.cols() as f64;
            assert!((m / di - 1.0).abs() < 0.02, "{m} vs {di}");
        }
    }

    #[test]
    fn gaussian_deterministic() {
        let sigma = HermitianMatrix::from_real_diagonal(&[1.0, 3.0]);
        let a = sample_complex_gaussian_matrix(2, 5, &sigma, &mut RngStream::new(9, 1)).unwrap();
        let b = sample_complex_gaussian_matrix(2, 5, &sigma, &mut RngStream::new(9, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wishart_mean() {
        let mut rng = RngStream::new(3, 0);
        let spec = WishartSpec::new(6, HermitianMatrix::identity(3)).unwrap();
        let draws = 10_000;
        let mut acc = ComplexMatrix::zeros(3, 3);
        for _ in 0..draws {
            acc = acc.add(sample_wishart(&spec, &mut rng).unwrap().as_matrix());
        }
        let mean = acc.scale(1.0 / draws as f64);
        for i in 0..3 {
            assert!((mean[(i, i)].re / 6.0 - 1.0).abs() < 0.05);
            for j in 0..3 {
                if i != j {
                    assert!(mean[(i, j)].norm() < 0.3);
                }
            }
        }
    }

    #[test]
    fn wishart_scalar_is_complex_chi2() {
        let mut rng = RngStream::new(4, 0);
        let spec = WishartSpec::new(5, HermitianMatrix::identity(1)).unwrap();
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_wishart(&spec, &mut rng).unwrap().as_matrix()[(0, 0)].re)
            .collect();
        let (m, _) = mean_var(&xs);
        assert!((m / 5.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn inverse_wishart_mean() {
        // E[W⁻¹] = scale⁻¹/(n - p)
        let mut rng = RngStream::new(5, 0);
        let mut scale = ComplexMatrix::identity(2);
        scale[(0, 0)] = C64::new(2.0, 0.0);
        scale[(0, 1)] = C64::new(0.3, 0.4);
        scale[(1, 0)] = C64::new(0.3, -0.4);
        let scale = HermitianMatrix::new(scale).unwrap();
        let spec = WishartSpec::new(8, scale.clone()).unwrap();
        let draws = 100_000;
        let mut acc = ComplexMatrix::zeros(2, 2);
        for _ in 0..draws {
            let w = sample_wishart(&spec, &mut rng).unwrap();
            acc = acc.add(&solve_hermitian(&w, &ComplexMatrix::identity(2)).unwrap());
        }
        let mean = acc.scale(1.0 / draws as f64);
        let expected = solve_hermitian(&scale, &ComplexMatrix::identity(2))
            .unwrap()
            .scale(1.0 / 6.0);
        for i in 0..2 {
            assert!((mean[(i, i)].re / expected[(i, i)].re - 1.0).abs() < 0.05);
        }
        assert!((mean[(0, 1)] - expected[(0, 1)]).norm() < 0.05 * expected[(0, 0)].re);
    }

    #[test]
    fn wishart_spec_rejects_low_dof() {
        assert!(matches!(
            WishartSpec::new(2, HermitianMatrix::identity(3)),
            Err(Error::InvalidDof(_))
        ));
    }

    #[test]
    fn chi2_moments() {
        let mut rng = RngStream::new(6, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_chi2(2.0, &mut rng).unwrap())
            .collect();
        let (m, _) = mean_var(&xs);
        assert!((m / 2.0 - 1.0).abs() < 0.02);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_chi2(30.0, &mut rng).unwrap())
            .collect();
        let (m, v) = mean_var(&xs);
        assert!((m / 30.0 - 1.0).abs() < 0.02);
        assert!((v / 60.0 - 1.0).abs() < 0.05);
        // fractional dof
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_chi2(0.7, &mut rng).unwrap())
            .collect();
        let (m, v) = mean_var(&xs);
        assert!((m / 0.7 - 1.0).abs() < 0.03);
        assert!((v / 1.4 - 1.0).abs() < 0.06);
    }

    #[test]
    fn chi2_rejects_bad_dof() {
        let mut rng = RngStream::new(0, 0);
        assert!(matches!(
            sample_chi2(0.0, &mut rng),
            Err(Error::InvalidDof(_))
        ));
        assert!(matches!(
            sample_chi2(-1.0, &mut rng),
            Err(Error::InvalidDof(_))
        ));
        assert!(sample_chi2(f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn chi2_deterministic() {
        let a = sample_chi2(3.3, &mut RngStream::new(11, 2)).unwrap();
        let b = sample_chi2(3.3, &mut RngStream::new(11, 2)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn noncentral_reduces_to_central() {
        let mut r1 = RngStream::new(12, 0);
        let mut r2 = RngStream::new(12, 1);
        let a: Vec<f64> = (0..100_000)
            .map(|_| sample_noncentral_chi2(4, 0.0, &mut r1).unwrap())
            .collect();
        let b: Vec<f64> = (0..100_000)
            .map(|_| sample_chi2(4.0, &mut r2).unwrap())
            .collect();
        let ks = ks_two_sample(&a, &b);
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn noncentral_mean() {
        let mut rng = RngStream::new(13, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_noncentral_chi2(2, 4.0, &mut rng).unwrap())
            .collect();
        let (m, v) = mean_var(&xs);
        assert!((m / 6.0 - 1.0).abs() < 0.02);
        // Var = 2(k + 2δ)
        assert!((v / 20.0 - 1.0).abs() < 0.05);
        let a = sample_noncentral_chi2(2, 0.0, &mut RngStream::new(1, 1)).unwrap();
        let b = sample_noncentral_chi2(2, 0.0, &mut RngStream::new(1, 1)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn noncentral_rejects_bad_input() {
        let mut rng = RngStream::new(0, 0);
        assert!(matches!(
            sample_noncentral_chi2(3, 1.0, &mut rng),
            Err(Error::InvalidDof(_))
        ));
        assert!(matches!(
            sample_noncentral_chi2(2, -1.0, &mut rng),
            Err(Error::NegativeNoncentrality(_))
        ));
    }
}
