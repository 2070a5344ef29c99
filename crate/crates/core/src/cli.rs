//! Command-line front end and the analysis pipeline behind it.
//!
//! Every command is a pure function of the scenario config and the seed.
//! Random scenario draws use stream `SCENARIO_STREAM + r` for realization `r`;
//! Monte Carlo trials are split over a fixed number of shards so that the
//! output does not depend on the thread count.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::approximation::{
    assemble_loss, exact_surprise_distribution, pearson_three_moment, scaled_chi2_two_moment,
    scaled_f_fit, FitSource, LossDistribution, PearsonFit, PearsonLoss, ScaledChi2Fit, ScaledFFit,
};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, C64};
use crate::mismatch::{
    build_omega, cumulants_q, to_quadratic_form, CumulantTriple, QuadraticFormSpec,
};
use crate::montecarlo::{
    ks_one_sample, ks_two_sample, run_sharded, DirectSampler, Histogram, KsResult,
    RepresentationSampler, DEFAULT_BINS,
};
use crate::sampling::RngStream;
use crate::scenarios::{
    db_to_linear, eigenvalue_mismatch, interference_covariance, interferer_vector,
    inverse_wishart_mismatch, mpdr_mismatch, mpdr_power_for_snr, random_alpha,
    random_ger_blockdiag, surprise_interference, ArrayScenario, MismatchKind, ScenarioPair,
};

/// First stream id used for scenario draws.
pub const SCENARIO_STREAM: u64 = 1 << 40;
/// Stream offsets of the two samplers for realization `r`: `(r + 1) << 20`
/// plus this offset plus the shard index.
const DIRECT_OFFSET: u64 = 0;
const REPRESENTATION_OFFSET: u64 = 1 << 19;
const EXACT_OFFSET: u64 = 1 << 18;

pub const DEFAULT_SHARDS: usize = 8;

fn default_n() -> usize {
    16
}
fn default_k() -> usize {
    32
}
fn default_angles() -> Vec<f64> {
    ArrayScenario::default().interference_angles_deg
}
fn default_powers() -> Vec<f64> {
    ArrayScenario::default().interference_powers_db
}
fn default_snr_db() -> f64 {
    10.0
}
fn default_surprise_angle() -> f64 {
    14.0
}
fn default_true() -> bool {
    true
}
fn default_range() -> [f64; 2] {
    [-6.0, 6.0]
}

/// JSON scenario description. Powers and `γ` are given in dB.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub soi_angle_deg: f64,
    #[serde(default = "default_angles")]
    pub interference_angles_deg: Vec<f64>,
    #[serde(default = "default_powers")]
    pub interference_powers_db: Vec<f64>,
    #[serde(default)]
    pub mismatch: MismatchConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MismatchConfig {
    // a struct variant so that stray keys are rejected
    None {},
    /// `Σ_t = γΣ + P v vᴴ`, with `P vᴴΣ⁻¹v` given in dB.
    Mpdr {
        #[serde(default)]
        gamma_db: f64,
        #[serde(default = "default_snr_db")]
        soi_snr_db: f64,
    },
    /// `Σ = Σ_t + q qᴴ`, `q` a steering vector of the given power.
    Surprise {
        #[serde(default = "default_surprise_angle")]
        angle_deg: f64,
        power_db: f64,
        #[serde(default = "default_true")]
        enforce_ger: bool,
    },
    /// Random GER-preserving block congruence. `γ` is fixed by `gamma_db`
    /// or drawn uniformly in dB from `gamma_range_db`.
    GerBlockdiag {
        #[serde(default)]
        gamma_db: Option<f64>,
        #[serde(default = "default_range")]
        gamma_range_db: [f64; 2],
        #[serde(default)]
        w11_dof: Option<usize>,
        #[serde(default)]
        w22_shape: Option<f64>,
    },
    /// `Σ_t` shares the eigenvectors of `Σ`; eigenvalues scaled by `α`,
    /// given or drawn with `10 log₁₀ α ~ U[range_db]`.
    Eigenvalue {
        #[serde(default)]
        alpha: Option<Vec<f64>>,
        #[serde(default = "default_range")]
        range_db: [f64; 2],
    },
    /// `Σ_t = G W⁻¹ Gᴴ`, `E[W] = γI`.
    InverseWishart {
        #[serde(default)]
        gamma_db: Option<f64>,
        #[serde(default = "default_range")]
        gamma_range_db: [f64; 2],
        #[serde(default)]
        dof: Option<usize>,
    },
}

impl Default for MismatchConfig {
    fn default() -> Self {
        Self::None {}
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.array()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn array(&self) -> ArrayScenario {
        ArrayScenario {
            n: self.n,
            k: self.k,
            soi_angle_deg: self.soi_angle_deg,
            interference_angles_deg: self.interference_angles_deg.clone(),
            interference_powers_db: self.interference_powers_db.clone(),
            soi_power: 0.0,
        }
    }

    /// SHA-256 of the config with defaults filled in.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("serializable");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Whether building the pair consumes random numbers.
    pub fn is_random(&self) -> bool {
        match &self.mismatch {
            MismatchConfig::GerBlockdiag { .. } | MismatchConfig::InverseWishart { .. } => true,
            MismatchConfig::Eigenvalue { alpha, .. } => alpha.is_none(),
            _ => false,
        }
    }

    /// Builds realization `r` of the scenario.
    pub fn build(&self, seed: u64, r: u64) -> Result<ScenarioPair> {
        let sc = self.array();
        let sigma = interference_covariance(&sc)?;
        let v = sc.steering();
        let mut rng = RngStream::new(seed, SCENARIO_STREAM + r);
        let n = self.n;
        let draw_gamma = |fixed: Option<f64>, range: [f64; 2], rng: &mut RngStream| {
            db_to_linear(fixed.unwrap_or_else(|| rng.uniform_range(range[0], range[1])))
        };
        match &self.mismatch {
            MismatchConfig::None {} => ScenarioPair::matched(sigma, v),
            MismatchConfig::Mpdr {
                gamma_db,
                soi_snr_db,
            } => {
                let p = mpdr_power_for_snr(&sigma, &v, db_to_linear(*soi_snr_db))?;
                mpdr_mismatch(&sigma, &v, p, db_to_linear(*gamma_db))
            }
            MismatchConfig::Surprise {
                angle_deg,
                power_db,
                enforce_ger,
            } => surprise_interference(
                &sigma,
                &v,
                &interferer_vector(*angle_deg, *power_db, n),
                *enforce_ger,
            ),
            MismatchConfig::GerBlockdiag {
                gamma_db,
                gamma_range_db,
                w11_dof,
                w22_shape,
            } => {
                let g = draw_gamma(*gamma_db, *gamma_range_db, &mut rng);
                random_ger_blockdiag(
                    &sigma,
                    &v,
                    g,
                    w11_dof.unwrap_or(2 * (n - 1)),
                    w22_shape.unwrap_or(2.0),
                    &mut rng,
                )
            }
            MismatchConfig::Eigenvalue { alpha, range_db } => {
                let a = match alpha {
                    Some(a) => a.clone(),
                    None => random_alpha(n, (range_db[0], range_db[1]), &mut rng),
                };
                eigenvalue_mismatch(&sigma, &v, &a)
            }
            MismatchConfig::InverseWishart {
                gamma_db,
                gamma_range_db,
                dof,
            } => {
                let g = draw_gamma(*gamma_db, *gamma_range_db, &mut rng);
                inverse_wishart_mismatch(&sigma, &v, g, dof.unwrap_or(2 * n), &mut rng)
            }
        }
    }
}

/// A loss law the report can evaluate.
#[derive(Clone, Debug)]
pub enum Reference {
    Loss(LossDistribution),
    Pearson(PearsonLoss),
}

impl Reference {
    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            Reference::Loss(d) => d.cdf(x).unwrap_or(f64::NAN),
            Reference::Pearson(p) => p.cdf(x).unwrap_or(f64::NAN),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Reference::Loss(d) => d.pdf(x).unwrap_or(0.0),
            Reference::Pearson(p) => p.pdf(x).unwrap_or(0.0),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Reference::Loss(d) => d.mean(),
            Reference::Pearson(_) => {
                crate::quadrature::integrate(|x| 1.0 - self.cdf(x), 0.0, 1.0, 1e-10, 1e-10, 200)
                    .value
            }
        }
    }
}

/// Everything derived analytically from one scenario pair.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub pair: ScenarioPair,
    pub n: usize,
    pub k: usize,
    pub lambda_ger: f64,
    pub is_ger: bool,
    pub ger_angle: f64,
    pub spec: QuadraticFormSpec,
    pub cumulants: Option<CumulantTriple>,
    pub c: [f64; 3],
    pub pearson: Option<PearsonFit>,
    pub scaled_chi2: Option<ScaledChi2Fit>,
    pub scaled_f: Option<ScaledFFit>,
    pub scaled_f_error: Option<Error>,
    /// Named laws in report order.
    pub references: Vec<(String, Reference)>,
    /// Exact surprise-interference power `qᴴΣ_t⁻¹q`, when applicable.
    pub surprise_power: Option<f64>,
}

impl Analysis {
    pub fn reference(&self, name: &str) -> Option<&Reference> {
        self.references
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| r)
    }

    /// The law used for `pdf_approx`: scaled F if fitted, else scaled χ².
    pub fn primary(&self) -> Option<&Reference> {
        self.reference("scaled_f")
            .or_else(|| self.reference("scaled_chi2"))
    }

    pub fn exact(&self) -> Option<&Reference> {
        self.reference("exact")
    }
}

pub fn analyze_pair(pair: ScenarioPair, k: usize) -> Result<Analysis> {
    let n = pair.dim();
    let omega = build_omega(&pair)?;
    let spec = to_quadratic_form(&omega, k, n)?;
    let ger_angle = pair.ger_angle()?;
    let cumulants = match cumulants_q(&spec) {
        Ok(c) => Some(c),
        Err(Error::InsufficientSamples { .. }) => None,
        Err(e) => return Err(e),
    };
    let c = [spec.c(1), spec.c(2), spec.c(3)];
    let p = spec.denom_dof;
    let mut references = Vec::new();
    let mut surprise_power = None;
    match pair.kind() {
        MismatchKind::None => {
            references.push((
                "exact".to_string(),
                Reference::Loss(assemble_loss(FitSource::ExactBeta, 1.0, k, n)?),
            ));
        }
        MismatchKind::Mpdr { gamma, power } => {
            let w = cholesky(pair.sigma())?.solve_vec(pair.v());
            let snr = power * pair.sigma().quadratic_form(&w);
            let d = assemble_loss(
                FitSource::ExactMpdr {
                    gamma: *gamma,
                    soi_snr: snr,
                },
                1.0,
                k,
                n,
            )?;
            references.push(("exact".to_string(), Reference::Loss(d)));
        }
        MismatchKind::Surprise { q, .. } if omega.is_ger => {
            let q: Vec<C64> = q.iter().map(|z| C64::new(z[0], z[1])).collect();
            let s = cholesky(pair.sigma_t())?.solve_vec(&q);
            surprise_power = Some(
                q.iter()
                    .zip(&s)
                    .map(|(a, b)| (a.conj() * b).re)
                    .sum::<f64>()
                    .max(0.0),
            );
        }
        _ => {}
    }
    let (mut pearson, mut scaled_chi2) = (None, None);
    if omega.is_ger {
        let pf = pearson_three_moment(c[0], c[1], c[2])?;
        let sf = scaled_chi2_two_moment(c[0], c[1])?;
        references.push((
            "scaled_chi2".to_string(),
            Reference::Loss(assemble_loss(FitSource::Ger(sf), omega.omega21, k, n)?),
        ));
        references.push((
            "pearson".to_string(),
            Reference::Pearson(PearsonLoss::new(pf, omega.omega21, p)?),
        ));
        pearson = Some(pf);
        scaled_chi2 = Some(sf);
    }
    let (scaled_f, scaled_f_error) = match cumulants.as_ref().map(scaled_f_fit) {
        Some(Ok(f)) => {
            references.push((
                "scaled_f".to_string(),
                Reference::Loss(assemble_loss(FitSource::General(f), omega.omega21, k, n)?),
            ));
            (Some(f), None)
        }
        Some(Err(e)) => (None, Some(e)),
        None => (None, None),
    };
    Ok(Analysis {
        pair,
        n,
        k,
        lambda_ger: omega.lambda_ger,
        is_ger: omega.is_ger,
        ger_angle,
        spec,
        cumulants,
        c,
        pearson,
        scaled_chi2,
        scaled_f,
        scaled_f_error,
        references,
        surprise_power,
    })
}

fn rel_ok(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionReport {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_eff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<crate::approximation::LossKind>,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KsEntry {
    pub sampler: String,
    pub reference: String,
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Validation {
    pub trials: usize,
    pub ks_threshold: f64,
    pub p_threshold: f64,
    pub direct_mean: f64,
    pub representation_mean: f64,
    pub entries: Vec<KsEntry>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuntimeInfo {
    pub version: &'static str,
    pub shards: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportBundle {
    pub config_digest: String,
    pub scenario_digest: String,
    pub seed: u64,
    pub mismatch: String,
    pub n: usize,
    pub k: usize,
    pub lambda_ger: f64,
    pub is_ger: bool,
    pub ger_angle_rad: f64,
    pub weights: Vec<f64>,
    pub noncentrality: Vec<f64>,
    pub c: [f64; 3],
    pub cumulants: Option<CumulantTriple>,
    pub pearson: Option<PearsonFit>,
    pub scaled_chi2: Option<ScaledChi2Fit>,
    pub scaled_f: Option<ScaledFFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaled_f_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surprise_power: Option<f64>,
    pub distributions: Vec<DistributionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<Validation>,
    pub runtime: RuntimeInfo,
}

impl ReportBundle {
    pub fn new(cfg: &ScenarioConfig, seed: u64, a: &Analysis, shards: usize) -> Self {
        let distributions = a
            .references
            .iter()
            .map(|(name, r)| {
                let (a_eff, nu, mu, kind) = match r {
                    Reference::Loss(d) => (Some(d.a_eff), Some(d.nu), Some(d.mu), Some(d.kind)),
                    Reference::Pearson(_) => (None, None, None, None),
                };
                DistributionReport {
                    name: name.clone(),
                    a_eff,
                    nu,
                    mu,
                    kind,
                    mean: r.mean(),
                }
            })
            .collect();
        Self {
            config_digest: cfg.digest(),
            scenario_digest: a.pair.digest(),
            seed,
            mismatch: a.pair.kind().name().to_string(),
            n: a.n,
            k: a.k,
            lambda_ger: a.lambda_ger,
            is_ger: a.is_ger,
            ger_angle_rad: a.ger_angle,
            weights: a.spec.weights.clone(),
            noncentrality: a.spec.noncentrality.clone(),
            c: a.c,
            cumulants: a.cumulants,
            pearson: a.pearson,
            scaled_chi2: a.scaled_chi2,
            scaled_f: a.scaled_f,
            scaled_f_error: a.scaled_f_error.as_ref().map(|e| e.to_string()),
            surprise_power: a.surprise_power,
            distributions,
            validation: None,
            runtime: RuntimeInfo {
                version: env!("CARGO_PKG_VERSION"),
                shards,
            },
        }
    }

    /// Re-checks the cumulant match of every fit.
    pub fn revalidate(&self) -> Result<()> {
        let [c1, c2, c3] = self.c;
        if let Some(p) = &self.pearson {
            let k = p.cumulants();
            if !(rel_ok(k.k1, c1, 1e-10)
                && rel_ok(k.k2, 2.0 * c2, 1e-10)
                && rel_ok(k.k3, 8.0 * c3, 1e-10))
            {
                return Err(Error::InvalidFit(format!(
                    "Pearson fit does not match c = {:?}",
                    self.c
                )));
            }
        }
        if let Some(s) = &self.scaled_chi2 {
            if !(rel_ok(s.a * s.nu, c1, 1e-12) && rel_ok(s.a * s.a * s.nu, c2, 1e-12)) {
                return Err(Error::InvalidFit(format!(
                    "scaled chi-square fit does not match c = {:?}",
                    self.c
                )));
            }
        }
        if let (Some(f), Some(k)) = (&self.scaled_f, &self.cumulants) {
            let g = f.cumulants();
            if !(rel_ok(g.k1, k.k1, 1e-9) && rel_ok(g.k2, k.k2, 1e-9) && rel_ok(g.k3, k.k3, 1e-9)) {
                return Err(Error::InvalidFit(format!(
                    "scaled F fit does not match {k:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.revalidate()?;
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

fn stream_base(r: u64) -> u64 {
    (r + 1) << 20
}

/// Direct SCM draws for realization `r`.
pub fn direct_draws(
    pair: &ScenarioPair,
    k: usize,
    trials: usize,
    seed: u64,
    r: u64,
    shards: usize,
) -> Result<Vec<f64>> {
    let s = DirectSampler::new(pair, k)?;
    let base = stream_base(r) + DIRECT_OFFSET;
    run_sharded(seed, shards, trials, |rng, t| {
        let mut rng = RngStream::new(rng.seed(), base + rng.stream_id());
        s.draws(t, &mut rng)
    })
}

pub fn representation_draws(
    spec: &QuadraticFormSpec,
    trials: usize,
    seed: u64,
    r: u64,
    shards: usize,
) -> Result<Vec<f64>> {
    let s = RepresentationSampler::new(spec)?;
    let base = stream_base(r) + REPRESENTATION_OFFSET;
    run_sharded(seed, shards, trials, |rng, t| {
        let mut rng = RngStream::new(rng.seed(), base + rng.stream_id());
        Ok((0..t).map(|_| s.draw(&mut rng)).collect())
    })
}

fn surprise_exact_draws(
    a: &Analysis,
    power: f64,
    trials: usize,
    seed: u64,
    r: u64,
    shards: usize,
) -> Result<Vec<f64>> {
    let d = exact_surprise_distribution(power, a.k, a.n)?;
    let base = stream_base(r) + EXACT_OFFSET;
    run_sharded(seed, shards, trials, |rng, t| {
        let mut rng = RngStream::new(rng.seed(), base + rng.stream_id());
        Ok((0..t).map(|_| d.sample(&mut rng)).collect())
    })
}

pub struct ValidateOptions {
    pub trials: usize,
    pub ks_threshold: f64,
    pub p_threshold: f64,
    pub shards: usize,
}

pub fn validate(a: &Analysis, seed: u64, r: u64, opts: &ValidateOptions) -> Result<Validation> {
    if opts.trials < 10_000 {
        return Err(Error::TooFewSamples {
            got: opts.trials,
            need: 10_000,
        });
    }
    let direct = direct_draws(&a.pair, a.k, opts.trials, seed, r, opts.shards)?;
    let repr = representation_draws(&a.spec, opts.trials, seed, r, opts.shards)?;
    let mut entries = Vec::new();
    let one = |sampler: &str, name: &str, ks: KsResult| KsEntry {
        sampler: sampler.to_string(),
        reference: name.to_string(),
        statistic: ks.statistic,
        p_value: ks.p_value,
        pass: ks.statistic < opts.ks_threshold,
    };
    for (name, rf) in &a.references {
        entries.push(one(
            "direct_scm",
            name,
            ks_one_sample(&direct, |x| rf.cdf(x)),
        ));
        entries.push(one(
            "representation",
            name,
            ks_one_sample(&repr, |x| rf.cdf(x)),
        ));
    }
    let two = |sampler: &str, name: &str, ks: KsResult| KsEntry {
        sampler: sampler.to_string(),
        reference: name.to_string(),
        statistic: ks.statistic,
        p_value: ks.p_value,
        pass: ks.p_value > opts.p_threshold,
    };
    entries.push(two(
        "direct_scm",
        "representation",
        ks_two_sample(&direct, &repr),
    ));
    if let Some(q) = a.surprise_power {
        let exact = surprise_exact_draws(a, q, opts.trials, seed, r, opts.shards)?;
        entries.push(two(
            "direct_scm",
            "exact_surprise",
            ks_two_sample(&direct, &exact),
        ));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(Validation {
        trials: opts.trials,
        ks_threshold: opts.ks_threshold,
        p_threshold: opts.p_threshold,
        direct_mean: mean(&direct),
        representation_mean: mean(&repr),
        pass: entries.iter().all(|e| e.pass),
        entries,
    })
}

/// `%.17g`-style: 17 significant digits, scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SamplerChoice {
    Direct,
    Representation,
}

#[derive(Debug, Parser)]
#[command(
    name = "snrloss",
    version,
    about = "SNR loss distribution under covariance mismatch"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args, Clone)]
pub struct Common {
    /// Scenario config (JSON); defaults to the built-in array without mismatch.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Fixed shard count for Monte Carlo runs.
    #[arg(long, default_value_t = DEFAULT_SHARDS)]
    pub shards: usize,
    /// Scenario realization index for random mismatch families.
    #[arg(long, default_value_t = 0)]
    pub realization: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit all applicable approximations and report parameters.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate densities on an equally spaced grid in (0, 1).
    Pdf {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 512)]
        grid: usize,
        /// Add an empirical density from this many direct draws.
        #[arg(long, default_value_t = 0)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        /// `key=v1,v2,...` over a mismatch parameter; one column per value.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Draw loss samples.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        #[arg(long, value_enum, default_value_t = SamplerChoice::Direct)]
        sampler: SamplerChoice,
    },
    /// Compare both samplers with every fitted or exact law.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0.02)]
        ks_threshold: f64,
        #[arg(long, default_value_t = 0.001)]
        p_threshold: f64,
    },
    /// One row per realization (and sweep value) with fitted parameters.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        realizations: u64,
        /// Empirical mean from this many direct draws per row.
        #[arg(long, default_value_t = 0)]
        trials: usize,
        #[arg(long)]
        sweep: Option<String>,
    },
}

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: Error,
}

impl From<Error> for CliError {
    fn from(error: Error) -> Self {
        let code = match &error {
            Error::Config(_) => 4,
            Error::DegenerateCumulants { .. }
            | Error::InvalidFit(_)
            | Error::NonPositiveCumulant(_) => 3,
            _ => 1,
        };
        Self { code, error }
    }
}

pub struct Outcome {
    pub code: i32,
    pub output: String,
    pub messages: Vec<String>,
}

fn load_config(common: &Common) -> Result<ScenarioConfig> {
    match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            ScenarioConfig::from_json(&text)
        }
        None => Ok(ScenarioConfig::default()),
    }
}

/// Parses `key=v1,v2`.
pub fn parse_sweep(text: &str) -> Result<(String, Vec<f64>)> {
    let (key, vals) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("sweep '{text}' is not key=v1,v2,...")))?;
    let vals = vals
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("sweep value '{s}': {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((key.trim().to_string(), vals))
}

/// Copy of `cfg` with `key` set to `value`, looked up first in the
/// mismatch block and then at the top level.
pub fn with_override(cfg: &ScenarioConfig, key: &str, value: f64) -> Result<ScenarioConfig> {
    let mut doc = serde_json::to_value(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let top = ["n", "k", "soi_angle_deg"];
    let target = if top.contains(&key) {
        &mut doc
    } else {
        doc.get_mut("mismatch")
            .expect("serialized config has a mismatch block")
    };
    let num = if key == "n" || key == "k" || key.ends_with("dof") {
        serde_json::Value::from(value as u64)
    } else {
        serde_json::Value::from(value)
    };
    target
        .as_object_mut()
        .expect("object")
        .insert(key.to_string(), num);
    ScenarioConfig::from_json(&doc.to_string())
}

fn write_output(common: &Common, text: &str) -> Result<()> {
    match &common.out {
        Some(p) => std::fs::write(p, text).map_err(Error::from),
        None => Ok(()),
    }
}

fn finish(
    common: &Common,
    output: String,
    code: i32,
    messages: Vec<String>,
) -> std::result::Result<Outcome, CliError> {
    write_output(common, &output)?;
    let output = if common.out.is_some() {
        String::new()
    } else {
        output
    };
    Ok(Outcome {
        code,
        output,
        messages,
    })
}

pub fn execute(cli: Cli) -> std::result::Result<Outcome, CliError> {
    match cli.command {
        Command::Analyze { common } => {
            let cfg = load_config(&common)?;
            let a = analyze_pair(cfg.build(common.seed, common.realization)?, cfg.k)?;
            let report = ReportBundle::new(&cfg, common.seed, &a, common.shards);
            let text = match common.format.unwrap_or(Format::Json) {
                Format::Json => report.to_json()?,
                Format::Csv => analyze_csv(&report)?,
            };
            finish(&common, text, 0, Vec::new())
        }
        Command::Validate {
            common,
            trials,
            ks_threshold,
            p_threshold,
        } => {
            let cfg = load_config(&common)?;
            let a = analyze_pair(cfg.build(common.seed, common.realization)?, cfg.k)?;
            let opts = ValidateOptions {
                trials,
                ks_threshold,
                p_threshold,
                shards: common.shards,
            };
            let v = validate(&a, common.seed, common.realization, &opts)?;
            let pass = v.pass;
            let mut report = ReportBundle::new(&cfg, common.seed, &a, common.shards);
            report.validation = Some(v);
            let code = if pass { 0 } else { 2 };
            finish(&common, report.to_json()?, code, Vec::new())
        }
        Command::Simulate {
            common,
            trials,
            bins,
            sampler,
        } => {
            let cfg = load_config(&common)?;
            let a = analyze_pair(cfg.build(common.seed, common.realization)?, cfg.k)?;
            let values = match sampler {
                SamplerChoice::Direct => direct_draws(
                    &a.pair,
                    a.k,
                    trials,
                    common.seed,
                    common.realization,
                    common.shards,
                )?,
                SamplerChoice::Representation => representation_draws(
                    &a.spec,
                    trials,
                    common.seed,
                    common.realization,
                    common.shards,
                )?,
            };
            let set = crate::montecarlo::SampleSet {
                values,
                sampler: match sampler {
                    SamplerChoice::Direct => crate::montecarlo::SamplerKind::DirectScm,
                    SamplerChoice::Representation => crate::montecarlo::SamplerKind::Representation,
                },
                seed: common.seed,
                trials,
                scenario_digest: a.pair.digest(),
            };
            let text = match common.format.unwrap_or(Format::Csv) {
                Format::Csv => set.to_csv(),
                Format::Json => {
                    let reference = match a.exact().or(a.primary()) {
                        Some(Reference::Loss(d)) => Some(*d),
                        _ => None,
                    };
                    let summary =
                        crate::montecarlo::empirical_summary(&set, bins, reference.as_ref())?;
                    serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?
                }
            };
            finish(&common, text, 0, Vec::new())
        }
        Command::Pdf {
            common,
            grid,
            trials,
            bins,
            sweep,
        } => {
            let cfg = load_config(&common)?;
            let text = match sweep {
                None => pdf_table(&cfg, &common, grid, trials, bins)?,
                Some(s) => pdf_sweep_table(&cfg, &common, grid, &s)?,
            };
            finish(&common, text, 0, Vec::new())
        }
        Command::Sweep {
            common,
            realizations,
            trials,
            sweep,
        } => {
            let cfg = load_config(&common)?;
            let (text, skipped) =
                sweep_table(&cfg, &common, realizations, trials, sweep.as_deref())?;
            let messages = if skipped > 0 {
                vec![format!(
                    "skipped {skipped} rows with degenerate or unfittable cumulants"
                )]
            } else {
                Vec::new()
            };
            finish(&common, text, 0, messages)
        }
    }
}

fn analyze_csv(r: &ReportBundle) -> Result<String> {
    r.revalidate()?;
    let mut out = String::from("name,a_eff,nu,mu,mean\n");
    for d in &r.distributions {
        let f = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            d.name,
            f(d.a_eff),
            f(d.nu),
            f(d.mu),
            fmt17(d.mean)
        ));
    }
    Ok(out)
}

fn grid_points(grid: usize) -> Vec<f64> {
    (1..=grid).map(|i| i as f64 / (grid as f64 + 1.0)).collect()
}

fn emit_columns(names: &[String], cols: &[Vec<f64>], format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut out = names.join(",");
            out.push('\n');
            for i in 0..cols[0].len() {
                let row: Vec<String> = cols.iter().map(|c| fmt17(c[i])).collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
            Ok(out)
        }
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> = names
                .iter()
                .zip(cols)
                .map(|(n, c)| (n.clone(), serde_json::Value::from(c.clone())))
                .collect();
            serde_json::to_string_pretty(&map).map_err(|e| Error::Io(e.to_string()))
        }
    }
}

fn pdf_table(
    cfg: &ScenarioConfig,
    common: &Common,
    grid: usize,
    trials: usize,
    bins: usize,
) -> Result<String> {
    let a = analyze_pair(cfg.build(common.seed, common.realization)?, cfg.k)?;
    let xs = grid_points(grid);
    let mut names = vec!["l".to_string()];
    let mut cols = vec![xs.clone()];
    let primary = a.primary().ok_or_else(|| {
        Error::InvalidFit(format!(
            "no approximation available: {:?}",
            a.scaled_f_error
        ))
    })?;
    names.push("pdf_approx".into());
    cols.push(xs.iter().map(|&x| primary.pdf(x)).collect());
    if let Some(e) = a.exact() {
        names.push("pdf_exact".into());
        cols.push(xs.iter().map(|&x| e.pdf(x)).collect());
    }
    if a.is_ger {
        for name in ["pearson", "scaled_chi2"] {
            if let Some(r) = a.reference(name) {
                names.push(format!("pdf_{name}"));
                cols.push(xs.iter().map(|&x| r.pdf(x)).collect());
            }
        }
    }
    if trials > 0 {
        let draws = direct_draws(
            &a.pair,
            a.k,
            trials,
            common.seed,
            common.realization,
            common.shards,
        )?;
        let h = Histogram::unit(&draws, bins);
        let dens = h.density();
        names.push("pdf_empirical".into());
        cols.push(
            xs.iter()
                .map(|&x| dens[((x * bins as f64) as usize).min(bins - 1)])
                .collect(),
        );
    }
    emit_columns(&names, &cols, common.format.unwrap_or(Format::Csv))
}

fn pdf_sweep_table(
    cfg: &ScenarioConfig,
    common: &Common,
    grid: usize,
    sweep: &str,
) -> Result<String> {
    let (key, vals) = parse_sweep(sweep)?;
    let xs = grid_points(grid);
    let mut names = vec!["l".to_string()];
    let mut cols = vec![xs.clone()];
    for v in vals {
        let c = with_override(cfg, &key, v)?;
        let a = analyze_pair(c.build(common.seed, common.realization)?, c.k)?;
        let r = a
            .exact()
            .or(a.primary())
            .ok_or_else(|| Error::InvalidFit(format!("no approximation for {key}={v}")))?;
        names.push(format!("{key}={v}"));
        cols.push(xs.iter().map(|&x| r.pdf(x)).collect());
    }
    emit_columns(&names, &cols, common.format.unwrap_or(Format::Csv))
}

fn sweep_table(
    cfg: &ScenarioConfig,
    common: &Common,
    realizations: u64,
    trials: usize,
    sweep: Option<&str>,
) -> Result<(String, usize)> {
    let points: Vec<(Option<(String, f64)>, ScenarioConfig)> = match sweep {
        None => vec![(None, cfg.clone())],
        Some(s) => {
            let (key, vals) = parse_sweep(s)?;
            vals.into_iter()
                .map(|v| Ok((Some((key.clone(), v)), with_override(cfg, &key, v)?)))
                .collect::<Result<_>>()?
        }
    };
    let mut out = String::from("param,value,realization,a_eff,nu,mu,loss_mean");
    if trials > 0 {
        out.push_str(",empirical_mean");
    }
    out.push('\n');
    let mut skipped = 0;
    for (param, c) in &points {
        for r in 0..realizations {
            let a = analyze_pair(c.build(common.seed, r)?, c.k)?;
            let Some(Reference::Loss(d)) = a.exact().or(a.reference("scaled_f")).or(a.primary())
            else {
                skipped += 1;
                continue;
            };
            let (pname, pval) = match param {
                Some((k, v)) => (k.clone(), fmt17(*v)),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "{pname},{pval},{r},{},{},{},{}",
                fmt17(d.a_eff),
                fmt17(d.nu),
                fmt17(d.mu),
                fmt17(d.mean())
            ));
            if trials > 0 {
                let draws = direct_draws(&a.pair, a.k, trials, common.seed, r, common.shards)?;
                out.push_str(&format!(
                    ",{}",
                    fmt17(draws.iter().sum::<f64>() / trials as f64)
                ));
            }
            out.push('\n');
        }
    }
    Ok((out, skipped))
}

/// Parses arguments, runs the command and prints results; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(o) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(o.output.as_bytes());
            for m in o.messages {
                eprintln!("{m}");
            }
            o.code
        }
        Err(e) => {
            let body = serde_json::json!({"error": e.error.code(), "message": e.error.to_string()});
            eprintln!("{body}");
            e.code
        }
    }
}
