//! Parametric model families: loss, loss minimizer, forward simulation and,
//! where needed, fits with one coordinate pinned.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathkit::lasso::{lasso_cd, GramProblem, LassoOptions};
use crate::mathkit::linalg::{dot, DesignMatrix, Qr};
use crate::mathkit::rng::StreamRng;
use crate::mathkit::sampling::{von_mises_sample, wrap_angle};
use crate::mathkit::soft_threshold;

/// A design matrix with lazily computed factorizations shared by every
/// dataset built on it.
pub struct Design {
    matrix: DesignMatrix,
    qr: OnceLock<std::result::Result<Qr, (usize, f64)>>,
    gram: OnceLock<Vec<f64>>,
    profile_dirs: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

impl fmt::Debug for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Design")
            .field("n", &self.matrix.nrows())
            .field("p", &self.matrix.ncols())
            .finish_non_exhaustive()
    }
}

impl Design {
    pub fn new(matrix: DesignMatrix) -> Self {
        Self {
            matrix,
            qr: OnceLock::new(),
            gram: OnceLock::new(),
            profile_dirs: Mutex::new(HashMap::new()),
        }
    }

    pub fn matrix(&self) -> &DesignMatrix {
        &self.matrix
    }

    pub fn qr(&self) -> Result<&Qr> {
        match self.qr.get_or_init(|| {
            Qr::new(&self.matrix).map_err(|e| match e {
                Error::RankDeficient { column, pivot } => (column, pivot),
                _ => (usize::MAX, f64::NAN),
            })
        }) {
            Ok(qr) => Ok(qr),
            Err((column, pivot)) => Err(Error::RankDeficient { column: *column, pivot: *pivot }),
        }
    }

    pub fn gram(&self) -> &[f64] {
        self.gram.get_or_init(|| self.matrix.gram())
    }

    /// `(X'X)⁻¹ e_j / [(X'X)⁻¹]_jj`: moving along it changes coordinate `j`
    /// by one unit while keeping the other least-squares normal equations.
    pub fn profile_direction(&self, j: usize) -> Result<Arc<Vec<f64>>> {
        if j >= self.matrix.ncols() {
            return Err(Error::Domain(format!("coordinate {j} out of range")));
        }
        if let Some(d) = self.profile_dirs.lock().expect("profile cache poisoned").get(&j) {
            return Ok(Arc::clone(d));
        }
        let col = self.qr()?.xtx_inv_col(j);
        let djj = col[j];
        let dir = Arc::new(col.into_iter().map(|v| v / djj).collect::<Vec<_>>());
        self.profile_dirs
            .lock()
            .expect("profile cache poisoned")
            .insert(j, Arc::clone(&dir));
        Ok(dir)
    }
}

/// Observations `y` with an optional fixed design.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub x: Option<Arc<Design>>,
    pub meta: Arc<str>,
}

impl Dataset {
    pub fn scalar(y: Vec<f64>, meta: &str) -> Self {
        Self { y, x: None, meta: meta.into() }
    }

    pub fn regression(x: DesignMatrix, y: Vec<f64>, meta: &str) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Domain(format!(
                "design has {} rows but response has {}",
                x.nrows(),
                y.len()
            )));
        }
        Ok(Self { y, x: Some(Arc::new(Design::new(x))), meta: meta.into() })
    }

    /// Same design and label, new response.
    pub fn with_response(&self, y: Vec<f64>) -> Self {
        debug_assert_eq!(y.len(), self.y.len());
        Self { y, x: self.x.clone(), meta: Arc::clone(&self.meta) }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn design(&self) -> Result<&Design> {
        self.x
            .as_deref()
            .ok_or_else(|| Error::Domain("model needs a design matrix".into()))
    }

    /// Rows picked by `idx` (repeats allowed); the design, if any, is rebuilt.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let y = idx.iter().map(|&i| self.y[i]).collect();
        let x = self
            .x
            .as_ref()
            .map(|d| Arc::new(Design::new(d.matrix().select_rows(idx))));
        Self { y, x, meta: Arc::clone(&self.meta) }
    }
}

/// One parametric family.
pub trait Model: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn param_dim(&self, data: &Dataset) -> usize;

    fn loss(&self, data: &Dataset, theta: &[f64]) -> f64;

    /// Loss minimizer.
    fn fit(&self, data: &Dataset) -> Result<Vec<f64>>;

    /// Loss minimizer; iterative solvers may start from `hint`.
    fn fit_near(&self, data: &Dataset, hint: &[f64]) -> Result<Vec<f64>> {
        let _ = hint;
        self.fit(data)
    }

    /// Draw a dataset of the template's size (and design) from `P_θ`.
    fn simulate(&self, theta: &[f64], template: &Dataset, rng: &mut StreamRng) -> Result<Dataset>;

    fn supports_profile(&self) -> bool {
        false
    }

    /// Loss minimizer with coordinate `j` held at `value`.
    fn profile_fit(&self, data: &Dataset, j: usize, value: f64) -> Result<Vec<f64>> {
        let _ = (data, j, value);
        Err(Error::UnsupportedProfile(self.name()))
    }

    fn profile_fit_near(&self, data: &Dataset, j: usize, value: f64, hint: &[f64]) -> Result<Vec<f64>> {
        let _ = hint;
        self.profile_fit(data, j, value)
    }
}

pub type ModelRef = Arc<dyn Model>;

fn require_nonempty(data: &Dataset) -> Result<()> {
    if data.y.is_empty() {
        Err(Error::EmptySample("dataset has no observations".into()))
    } else {
        Ok(())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn rss(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> f64 {
    let fit = x.mul_vec(beta);
    y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `Xβ + σε` with standard normal `ε`.
pub fn gaussian_response(x: &DesignMatrix, beta: &[f64], sigma: f64, rng: &mut StreamRng) -> Vec<f64> {
    let mut y = x.mul_vec(beta);
    for v in &mut y {
        *v += sigma * rng.sample::<f64, _>(StandardNormal);
    }
    y
}

/// `N(θ, variance)` with known variance.
#[derive(Clone, Debug)]
pub struct GaussianMean {
    pub variance: f64,
}

impl GaussianMean {
    pub fn new(variance: f64) -> Result<Self> {
        if variance > 0.0 && variance.is_finite() {
            Ok(Self { variance })
        } else {
            Err(Error::Domain(format!("variance must be positive, got {variance}")))
        }
    }
}

impl Model for GaussianMean {
    fn name(&self) -> &'static str {
        "gaussian_mean"
    }

    fn param_dim(&self, _: &Dataset) -> usize {
        1
    }

    fn loss(&self, data: &Dataset, theta: &[f64]) -> f64 {
        0.5 * data.y.iter().map(|y| (y - theta[0]).powi(2)).sum::<f64>() / self.variance
    }

    fn fit(&self, data: &Dataset) -> Result<Vec<f64>> {
        require_nonempty(data)?;
        Ok(vec![mean(&data.y)])
    }

    fn simulate(&self, theta: &[f64], template: &Dataset, rng: &mut StreamRng) -> Result<Dataset> {
        let sd = self.variance.sqrt();
        let y = (0..template.n())
            .map(|_| theta[0] + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(template.with_response(y))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma {
    Known(f64),
    Unknown,
}

/// Gaussian linear regression `y = Xβ + σε` on a fixed design. With unknown
/// σ the parameter is `(β, σ)`.
#[derive(Clone, Debug)]
pub struct LinReg {
    pub sigma: Sigma,
}

impl LinReg {
    pub fn known(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(Self { sigma: Sigma::Known(sigma) })
        } else {
            Err(Error::Domain(format!("sigma must be positive, got {sigma}")))
        }
    }

    pub fn unknown() -> Self {
        Self { sigma: Sigma::Unknown }
    }

    fn with_scale(&self, data: &Dataset, beta: Vec<f64>) -> Result<Vec<f64>> {
        match self.sigma {
            Sigma::Known(_) => Ok(beta),
            Sigma::Unknown => {
                let x = data.design()?.matrix();
                let n = data.n();
                if n <= x.ncols() {
                    return Err(Error::Degenerate(format!("unknown sigma needs n > p (n = {n})")));
                }
                let s2 = rss(x, &data.y, &beta) / n as f64;
                if s2 <= 0.0 {
                    return Err(Error::Degenerate("zero residual sum of squares".into()));
                }
                let mut theta = beta;
                theta.push(s2.sqrt());
                Ok(theta)
            }
        }
    }
}

impl Model for LinReg {
    fn name(&self) -> &'static str {
        match self.sigma {
            Sigma::Known(_) => "linreg_known_sigma",
            Sigma::Unknown => "linreg_unknown_sigma",
        }
    }

    fn param_dim(&self, data: &Dataset) -> usize {
        let p = data.x.as_ref().map_or(0, |d| d.matrix().ncols());
        match self.sigma {
            Sigma::Known(_) => p,
            Sigma::Unknown => p + 1,
        }
    }

    fn loss(&self, data: &Dataset, theta: &[f64]) -> f64 {
        let x = data.design().expect("regression data").matrix();
        let p = x.ncols();
        let r = rss(x, &data.y, &theta[..p]);
        match self.sigma {
            Sigma::Known(s) => 0.5 * r / (s * s),
            Sigma::Unknown => {
                let s = theta[p];
                if !(s > 0.0) {
                    return f64::INFINITY;
                }
                let n = data.n() as f64;
                n * s.ln() + 0.5 * r / (s * s) + 0.5 * n * (2.0 * std::f64::consts::PI).ln()
            }
        }
    }

    fn fit(&self, data: &Dataset) -> Result<Vec<f64>> {
        let beta = data.design()?.qr()?.solve(&data.y)?;
        self.with_scale(data, beta)
    }

    fn simulate(&self, theta: &[f64], template: &Dataset, rng: &mut StreamRng) -> Result<Dataset> {
        let x = template.design()?.matrix();
        let p = x.ncols();
        let sigma = match self.sigma {
            Sigma::Known(s) => s,
            Sigma::Unknown => theta[p],
        };
        Ok(template.with_response(gaussian_response(x, &theta[..p], sigma, rng)))
    }

    fn supports_profile(&self) -> bool {
        true
    }

    fn profile_fit(&self, data: &Dataset, j: usize, value: f64) -> Result<Vec<f64>> {
        let design = data.design()?;
        let p = design.matrix().ncols();
        let beta_hat = design.qr()?.solve(&data.y)?;
        if j == p && self.sigma == Sigma::Unknown {
            let mut theta = beta_hat;
            theta.push(value);
            return Ok(theta);
        }
        let dir = design.profile_direction(j)?;
        let shift = value - beta_hat[j];
        let mut beta: Vec<f64> = beta_hat.iter().zip(dir.iter()).map(|(b, d)| b + shift * d).collect();
        beta[j] = value;
        self.with_scale(data, beta)
    }
}

/// Lasso with a fixed noise variance used only for simulation. The loss is
/// the penalized objective the solver minimizes.
#[derive(Clone, Debug)]
pub struct Lasso {
    pub lambda: f64,
    pub sigma2: f64,
    pub options: LassoOptions,
}

impl Lasso {
    pub fn new(lambda: f64, sigma2: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda must be non-negative, got {lambda}")));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
        }
        Ok(Self { lambda, sigma2, options: LassoOptions::default() })
    }

    fn solve(&self, data: &Dataset, start: Option<&[f64]>, pin: Option<(usize, f64)>) -> Result<Vec<f64>> {
        let design = data.design()?;
        let x = design.matrix();
        if data.n() != x.nrows() {
            return Err(Error::Domain("design and response lengths differ".into()));
        }
        let xty = x.t_mul_vec(&data.y);
        let prob = GramProblem { gram: design.gram(), xty: &xty, yty: dot(&data.y, &data.y) };
        Ok(lasso_cd(prob, self.lambda, start, pin, self.options)?.beta)
    }
}

impl Model for Lasso {
    fn name(&self) -> &'static str {
        "lasso"
    }

    fn param_dim(&self, data: &Dataset) -> usize {
        data.x.as_ref().map_or(0, |d| d.matrix().ncols())
    }

    fn loss(&self, data: &Dataset, theta: &[f64]) -> f64 {
        let x = data.design().expect("regression data").matrix();
        0.5 * rss(x, &data.y, theta) + self.lambda * theta.iter().map(|b| b.abs()).sum::<f64>()
    }

    fn fit(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.solve(data, None, None)
    }

    fn fit_near(&self, data: &Dataset, hint: &[f64]) -> Result<Vec<f64>> {
        self.solve(data, Some(hint), None)
    }

    fn simulate(&self, theta: &[f64], template: &Dataset, rng: &mut StreamRng) -> Result<Dataset> {
        let x = template.design()?.matrix();
        Ok(template.with_response(gaussian_response(x, theta, self.sigma2.sqrt(), rng)))
    }

    fn supports_profile(&self) -> bool {
        true
    }

    fn profile_fit(&self, data: &Dataset, j: usize, value: f64) -> Result<Vec<f64>> {
        self.solve(data, None, Some((j, value)))
    }

    fn profile_fit_near(&self, data: &Dataset, j: usize, value: f64, hint: &[f64]) -> Result<Vec<f64>> {
        self.solve(data, Some(hint), Some((j, value)))
    }
}

/// Penalty scaling for the soft-thresholded mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdConvention {
    /// Loss `½Σ(y−θ)² + λ|θ|`; minimizer thresholds `ȳ` at `λ/n`.
    Displayed,
    /// Loss `½Σ(y−θ)² + nλ|θ|`; minimizer `sign(ȳ)(|ȳ| − λ)₊`.
    MeanScale,
}

/// `N(θ, 1)` mean with an L1 penalty.
#[derive(Clone, Debug)]
pub struct SoftThreshMean {
    pub lambda: f64,
    pub convention: ThresholdConvention,
}

impl SoftThreshMean {
    pub fn new(lambda: f64, convention: ThresholdConvention) -> Result<Self> {
        if lambda >= 0.0 && lambda.is_finite() {
            Ok(Self { lambda, convention })
        } else {
            Err(Error::Domain(format!("lambda must be non-negative, got {lambda}")))
        }
    }

    fn penalty_weight(&self, n: usize) -> f64 {
        match self.convention {
            ThresholdConvention::Displayed => self.lambda,
            ThresholdConvention::MeanScale => self.lambda * n as f64,
        }
    }
}

impl Model for SoftThreshMean {
    fn name(&self) -> &'static str {
        "softthresh_mean"
    }

    fn param_dim(&self, _: &Dataset) -> usize {
        1
    }

    fn loss(&self, data: &Dataset, theta: &[f64]) -> f64 {
        let t = theta[0];
        0.5 * data.y.iter().map(|y| (y - t).powi(2)).sum::<f64>() + self.penalty_weight(data.n()) * t.abs()
    }

    fn fit(&self, data: &Dataset) -> Result<Vec<f64>> {
        require_nonempty(data)?;
        let n = data.n() as f64;
        Ok(vec![soft_threshold(mean(&data.y), self.penalty_weight(data.n()) / n)])
    }

    fn simulate(&self, theta: &[f64], template: &Dataset, rng: &mut StreamRng) -> Result<Dataset> {
        let y = (0..template.n())
            .map(|_| theta[0] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(template.with_response(y))
    }
}

/// Von Mises location with known concentration; angles in `[0, 2π)`.
#[derive(Clone, Debug)]
pub struct VonMises {
    pub kappa: f64,
}

impl VonMises {
    pub fn new(kappa: f64) -> Result<Self> {
        if kappa > 0.0 && kappa.is_finite() {
            Ok(Self { kappa })
        } else {
            Err(Error::Domain(format!("kappa must be positive, got {kappa}")))
        }
    }
}

impl Model for VonMises {
    fn name(&self) -> &'static str {
        "von_mises"
    }

    fn param_dim(&self, _: &Dataset) -> usize {
        1
    }

    fn loss(&self, data: &Dataset, theta: &[f64]) -> f64 {
        -self.kappa * data.y.iter().map(|y| (y - theta[0]).cos()).sum::<f64>()
    }

    fn fit(&self, data: &Dataset) -> Result<Vec<f64>> {
        require_nonempty(data)?;
        let s: f64 = data.y.iter().map(|y| y.sin()).sum();
        let c: f64 = data.y.iter().map(|y| y.cos()).sum();
        if s.hypot(c) <= 1e-12 * data.n() as f64 {
            return Err(Error::Degenerate("zero resultant length; circular mean undefined".into()));
        }
        Ok(vec![wrap_angle(s.atan2(c))])
    }

    fn simulate(&self, theta: &[f64], template: &Dataset, rng: &mut StreamRng) -> Result<Dataset> {
        Ok(template.with_response(von_mises_sample(theta[0], self.kappa, template.n(), rng)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathkit::linalg::{least_squares, Standardization};
    use crate::mathkit::rng::RngStream;
    use proptest::prelude::*;
    use rand::Rng;

    fn regression_data(n: usize, p: usize, seed: u64) -> (Dataset, Vec<f64>) {
        let mut rng = RngStream::new(seed).rng();
        let data: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = DesignMatrix::from_col_major(n, p, data).unwrap();
        x.standardize(Standardization::Sample).unwrap();
        let beta: Vec<f64> = (0..p).map(|j| if j == 0 { 3.0 } else { 0.5 * (j % 3) as f64 - 0.5 }).collect();
        let y = gaussian_response(&x, &beta, 1.0, &mut rng);
        (Dataset::regression(x, y, "sim").unwrap(), beta)
    }

    /// Every model's fit must beat `count` random points in a ball.
    fn check_minimizer(model: &dyn Model, data: &Dataset, radius: f64, count: usize, seed: u64) {
        let hat = model.fit(data).unwrap();
        let best = model.loss(data, &hat);
        let mut rng = RngStream::new(seed).rng();
        for _ in 0..count {
            let theta: Vec<f64> = hat.iter().map(|h| h + radius * (2.0 * rng.random::<f64>() - 1.0)).collect();
            assert!(model.loss(data, &theta) >= best - 1e-8, "{}", model.name());
        }
    }

    #[test]
    fn gaussian_mean_examples() {
        let m = GaussianMean::new(1.0).unwrap();
        let d = Dataset::scalar(vec![1.0, 2.0, 3.0], "t");
        assert_eq!(m.fit(&d).unwrap(), vec![2.0]);
        assert!(GaussianMean::new(0.0).is_err());
        assert!(m.fit(&Dataset::scalar(vec![], "e")).is_err());
    }

    #[test]
    fn every_model_minimizes_its_loss() {
        let mut rng = RngStream::new(1).rng();
        let ys: Vec<f64> = (0..40).map(|_| 1.0 + rng.sample::<f64, _>(StandardNormal)).collect();
        let scalar = Dataset::scalar(ys, "s");
        check_minimizer(&GaussianMean::new(2.0).unwrap(), &scalar, 1.0, 1000, 2);
        check_minimizer(&SoftThreshMean::new(0.2, ThresholdConvention::Displayed).unwrap(), &scalar, 1.0, 1000, 3);
        check_minimizer(&SoftThreshMean::new(0.2, ThresholdConvention::MeanScale).unwrap(), &scalar, 1.0, 1000, 4);
        let angles = Dataset::scalar(von_mises_sample(2.0, 2.0, 30, &mut rng).unwrap(), "vm");
        check_minimizer(&VonMises::new(2.0).unwrap(), &angles, 1.0, 1000, 5);
        let (reg, _) = regression_data(60, 6, 6);
        check_minimizer(&LinReg::known(1.0).unwrap(), &reg, 0.3, 1000, 7);
        check_minimizer(&LinReg::unknown(), &reg, 0.1, 1000, 8);
        check_minimizer(&Lasso::new(5.0, 1.0).unwrap(), &reg, 0.3, 1000, 9);
    }

    #[test]
    fn small_perturbations_never_improve() {
        let (reg, _) = regression_data(60, 6, 10);
        let models: Vec<Box<dyn Model>> = vec![
            Box::new(LinReg::known(1.0).unwrap()),
            Box::new(LinReg::unknown()),
            Box::new(Lasso::new(5.0, 1.0).unwrap()),
        ];
        let mut rng = RngStream::new(11).rng();
        for m in &models {
            let hat = m.fit(&reg).unwrap();
            let best = m.loss(&reg, &hat);
            for _ in 0..100 {
                let mut d: Vec<f64> = hat.iter().map(|_| rng.sample(StandardNormal)).collect();
                let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                d.iter_mut().for_each(|v| *v *= 1e-3 / norm);
                let theta: Vec<f64> = hat.iter().zip(&d).map(|(a, b)| a + b).collect();
                assert!(m.loss(&reg, &theta) >= best - 1e-8);
            }
        }
    }

    #[test]
    fn gaussian_t_matches_closed_form() {
        let m = GaussianMean::new(1.0).unwrap();
        let d = Dataset::scalar(vec![0.5, 1.5, 2.0, -0.25], "t");
        let ybar = m.fit(&d).unwrap()[0];
        for theta in [-1.0, 0.0, 0.7, 3.0] {
            let t = m.loss(&d, &[ybar]) - m.loss(&d, &[theta]);
            assert!((t + 2.0 * (ybar - theta).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_translation_consistency() {
        let m = GaussianMean::new(1.0).unwrap();
        let y: Vec<f64> = (0..16).map(|i| f64::from(i) / 8.0 - 1.0).collect();
        let shifted: Vec<f64> = y.iter().map(|v| v + 3.0).collect();
        for theta in [0.5, -0.25, 1.125] {
            let a = m.loss(&Dataset::scalar(y.clone(), "a"), &[theta]);
            let b = m.loss(&Dataset::scalar(shifted.clone(), "b"), &[theta + 3.0]);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn gaussian_simulate_then_fit() {
        let m = GaussianMean::new(1.0).unwrap();
        let template = Dataset::scalar(vec![0.0; 100_000], "tpl");
        let hits = (0..100)
            .filter(|&s| {
                let mut rng = RngStream::new(s).rng();
                let d = m.simulate(&[1.0], &template, &mut rng).unwrap();
                (m.fit(&d).unwrap()[0] - 1.0).abs() < 0.02
            })
            .count();
        assert!(hits >= 95, "{hits}");
    }

    #[test]
    fn simulate_is_deterministic() {
        let (reg, beta) = regression_data(30, 3, 12);
        let m = LinReg::known(1.0).unwrap();
        let a = m.simulate(&beta, &reg, &mut RngStream::new(5).rng()).unwrap();
        let b = m.simulate(&beta, &reg, &mut RngStream::new(5).rng()).unwrap();
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn linreg_noiseless_recovery() {
        let (reg, beta) = regression_data(50, 5, 13);
        let m = LinReg::known(1e-8).unwrap();
        let sim = m.simulate(&beta, &reg, &mut RngStream::new(1).rng()).unwrap();
        for (a, b) in m.fit(&sim).unwrap().iter().zip(&beta) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(m.loss(&reg, &m.fit(&reg).unwrap()) <= m.loss(&reg, &beta));
    }

    #[test]
    fn linreg_unknown_sigma_mle() {
        let (reg, _) = regression_data(50, 5, 14);
        let theta = LinReg::unknown().fit(&reg).unwrap();
        let x = reg.design().unwrap().matrix();
        let b = least_squares(x, &reg.y).unwrap();
        let s2 = rss(x, &reg.y, &b) / 50.0;
        assert!((theta[5] * theta[5] - s2).abs() < 1e-10);
    }

    #[test]
    fn linreg_profile_matches_restricted_least_squares() {
        let (reg, _) = regression_data(40, 4, 15);
        let m = LinReg::known(1.0).unwrap();
        let x = reg.design().unwrap().matrix();
        for value in [-1.0, 0.0, 2.5] {
            let prof = m.profile_fit(&reg, 1, value).unwrap();
            let others = x.select_columns(&[0, 2, 3]);
            let adj: Vec<f64> = reg.y.iter().zip(x.col(1)).map(|(y, c)| y - value * c).collect();
            let b = least_squares(&others, &adj).unwrap();
            assert!((prof[1] - value).abs() < 1e-12);
            for (k, &j) in [0, 2, 3].iter().enumerate() {
                assert!((prof[j] - b[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lasso_reduces_to_least_squares() {
        let (reg, _) = regression_data(60, 6, 16);
        let a = Lasso::new(0.0, 1.0).unwrap().fit(&reg).unwrap();
        let b = LinReg::known(1.0).unwrap().fit(&reg).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-6);
        }
    }

    #[test]
    fn lasso_profile_at_optimum() {
        let (reg, _) = regression_data(100, 30, 17);
        let m = Lasso::new(20.1, 1.0).unwrap();
        let full = m.fit(&reg).unwrap();
        let prof = m.profile_fit(&reg, 0, full[0]).unwrap();
        for (a, b) in full.iter().zip(&prof) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn softthresh_conventions() {
        let y: Vec<f64> = vec![1.3, 0.9, 1.1, 0.7];
        let d = Dataset::scalar(y, "s");
        let ybar = 1.0;
        let verbatim = SoftThreshMean::new(0.2, ThresholdConvention::MeanScale).unwrap();
        assert!((verbatim.fit(&d).unwrap()[0] - (ybar - 0.2)).abs() < 1e-12);
        let displayed = SoftThreshMean::new(0.2, ThresholdConvention::Displayed).unwrap();
        assert!((displayed.fit(&d).unwrap()[0] - (ybar - 0.05)).abs() < 1e-12);
        let small = Dataset::scalar(vec![0.1, -0.05], "s");
        assert_eq!(verbatim.fit(&small).unwrap()[0], 0.0);
        let zero = SoftThreshMean::new(0.0, ThresholdConvention::MeanScale).unwrap();
        assert!((zero.fit(&d).unwrap()[0] - ybar).abs() < 1e-12);
    }

    #[test]
    fn von_mises_fit_cases() {
        let m = VonMises::new(2.0).unwrap();
        assert!((m.fit(&Dataset::scalar(vec![1.234], "one")).unwrap()[0] - 1.234).abs() < 1e-12);
        let antipodal = Dataset::scalar(vec![0.0, std::f64::consts::PI], "anti");
        assert!(matches!(m.fit(&antipodal), Err(Error::Degenerate(_))));
        assert!(matches!(m.profile_fit(&antipodal, 0, 1.0), Err(Error::UnsupportedProfile(_))));
    }

    #[test]
    fn von_mises_local_minimizer() {
        let m = VonMises::new(2.0).unwrap();
        for s in 0..100 {
            let mut rng = RngStream::new(s).rng();
            let d = Dataset::scalar(von_mises_sample(1.0, 2.0, 9, &mut rng).unwrap(), "vm");
            let hat = m.fit(&d).unwrap()[0];
            assert!(m.loss(&d, &[hat]) <= m.loss(&d, &[hat + 0.1]));
            assert!(m.loss(&d, &[hat]) <= m.loss(&d, &[hat - 0.1]));
        }
    }

    #[test]
    fn regression_rows_must_match() {
        let x = DesignMatrix::identity(3);
        assert!(Dataset::regression(x, vec![1.0, 2.0], "bad").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn select_rows_keeps_pairs(seed in 0u64..1000) {
            let (reg, _) = regression_data(12, 3, seed);
            let idx = [3usize, 3, 0, 11, 7];
            let sub = reg.select_rows(&idx);
            let xs = sub.design().unwrap().matrix();
            for (k, &i) in idx.iter().enumerate() {
                prop_assert_eq!(sub.y[k], reg.y[i]);
                prop_assert_eq!(xs.row(k), reg.design().unwrap().matrix().row(i));
            }
        }
    }
}
