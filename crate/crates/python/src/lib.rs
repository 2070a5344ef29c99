//! Python bindings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use snrloss::approximation::{self, LossKind};
use snrloss::cli::{self as pipeline, ReportBundle, ScenarioConfig, ValidateOptions};
use snrloss::mismatch::CumulantTriple;
use snrloss::montecarlo;
use snrloss::sampling::RngStream;

fn err(e: snrloss::Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.code()))
}

/// `ℓ = [1 + a_eff χ²(ν)/χ²(μ)]⁻¹`.
#[pyclass(name = "LossDistribution", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLoss(approximation::LossDistribution);

#[pymethods]
impl PyLoss {
    #[new]
    fn new(a_eff: f64, nu: f64, mu: f64) -> PyResult<Self> {
        approximation::LossDistribution::new(a_eff, nu, mu, LossKind::FittedGeneral)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn exact_beta(n: usize, k: usize) -> PyResult<Self> {
        approximation::LossDistribution::exact_beta(n, k)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn exact_mpdr(gamma: f64, soi_snr: f64, n: usize, k: usize) -> PyResult<Self> {
        approximation::LossDistribution::exact_mpdr(gamma, soi_snr, n, k)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn a_eff(&self) -> f64 {
        self.0.a_eff
    }

    #[getter]
    fn nu(&self) -> f64 {
        self.0.nu
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu
    }

    fn pdf(&self, x: f64) -> PyResult<f64> {
        self.0.pdf(x).map_err(err)
    }

    fn cdf(&self, x: f64) -> PyResult<f64> {
        self.0.cdf(x).map_err(err)
    }

    fn quantile(&self, p: f64) -> PyResult<f64> {
        self.0.quantile(p).map_err(err)
    }

    fn mean(&self) -> f64 {
        self.0.mean()
    }

    #[pyo3(signature = (trials, seed = 1))]
    fn sample(&self, trials: usize, seed: u64) -> PyResult<Vec<f64>> {
        let s = self.0.sampler().map_err(err)?;
        let mut rng = RngStream::new(seed, 0);
        Ok((0..trials).map(|_| s.sample(&mut rng)).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "LossDistribution(a_eff={}, nu={}, mu={})",
            self.0.a_eff, self.0.nu, self.0.mu
        )
    }
}

/// `(a, nu, mu)` of the three-cumulant scaled-F fit.
#[pyfunction]
fn scaled_f_fit(k1: f64, k2: f64, k3: f64) -> PyResult<(f64, f64, f64)> {
    let f = approximation::scaled_f_fit(&CumulantTriple { k1, k2, k3 }).map_err(err)?;
    Ok((f.a, f.nu, f.mu))
}

/// `(a1, nu, a2)` of the three-moment shifted chi-square fit.
#[pyfunction]
fn pearson_three_moment(c1: f64, c2: f64, c3: f64) -> PyResult<(f64, f64, f64)> {
    let f = approximation::pearson_three_moment(c1, c2, c3).map_err(err)?;
    Ok((f.a1, f.nu, f.a2))
}

#[pyfunction]
fn scaled_chi2_two_moment(c1: f64, c2: f64) -> PyResult<(f64, f64)> {
    let f = approximation::scaled_chi2_two_moment(c1, c2).map_err(err)?;
    Ok((f.a, f.nu))
}

fn config(json: &str) -> PyResult<ScenarioConfig> {
    ScenarioConfig::from_json(json).map_err(err)
}

/// JSON report of all fits for a scenario config.
#[pyfunction]
#[pyo3(signature = (config_json = "{}", seed = 1, realization = 0))]
fn analyze(config_json: &str, seed: u64, realization: u64) -> PyResult<String> {
    let cfg = config(config_json)?;
    let a =
        pipeline::analyze_pair(cfg.build(seed, realization).map_err(err)?, cfg.k).map_err(err)?;
    ReportBundle::new(&cfg, seed, &a, pipeline::DEFAULT_SHARDS)
        .to_json()
        .map_err(err)
}

/// Loss draws from the direct SCM sampler or the representation sampler.
#[pyfunction]
#[pyo3(signature = (config_json = "{}", trials = 10_000, seed = 1, sampler = "direct", realization = 0))]
fn simulate(
    config_json: &str,
    trials: usize,
    seed: u64,
    sampler: &str,
    realization: u64,
) -> PyResult<Vec<f64>> {
    let cfg = config(config_json)?;
    let a =
        pipeline::analyze_pair(cfg.build(seed, realization).map_err(err)?, cfg.k).map_err(err)?;
    let shards = pipeline::DEFAULT_SHARDS;
    match sampler {
        "direct" => {
            pipeline::direct_draws(&a.pair, a.k, trials, seed, realization, shards).map_err(err)
        }
        "representation" => {
            pipeline::representation_draws(&a.spec, trials, seed, realization, shards).map_err(err)
        }
        other => Err(PyValueError::new_err(format!("unknown sampler '{other}'"))),
    }
}

/// JSON report with KS checks of both samplers against every fitted law.
#[pyfunction]
#[pyo3(signature = (config_json = "{}", trials = 100_000, seed = 1, ks_threshold = 0.02, p_threshold = 0.001))]
fn validate(
    config_json: &str,
    trials: usize,
    seed: u64,
    ks_threshold: f64,
    p_threshold: f64,
) -> PyResult<String> {
    let cfg = config(config_json)?;
    let a = pipeline::analyze_pair(cfg.build(seed, 0).map_err(err)?, cfg.k).map_err(err)?;
    let opts = ValidateOptions {
        trials,
        ks_threshold,
        p_threshold,
        shards: pipeline::DEFAULT_SHARDS,
    };
    let mut report = ReportBundle::new(&cfg, seed, &a, opts.shards);
    report.validation = Some(pipeline::validate(&a, seed, 0, &opts).map_err(err)?);
    report.to_json().map_err(err)
}

/// `(statistic, p_value)`.
#[pyfunction]
fn ks_two_sample(a: Vec<f64>, b: Vec<f64>) -> (f64, f64) {
    let r = montecarlo::ks_two_sample(&a, &b);
    (r.statistic, r.p_value)
}

#[pymodule]
fn snrloss_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLoss>()?;
    m.add_function(wrap_pyfunction!(scaled_f_fit, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_three_moment, m)?)?;
    m.add_function(wrap_pyfunction!(scaled_chi2_two_moment, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    Ok(())
}
