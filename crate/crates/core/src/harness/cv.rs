//! K-fold cross-validation of the Lasso penalty.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mathkit::lasso::{lasso_cd, GramProblem, LassoOptions};
use crate::mathkit::linalg::{dot, DesignMatrix};
use crate::mathkit::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvResult {
    pub lambda: f64,
    pub grid: Vec<f64>,
    /// Mean held-out squared error per grid value.
    pub mse: Vec<f64>,
    pub folds: usize,
}

/// `count` values spaced evenly in log scale over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Penalty minimizing the mean held-out squared error. Rows are shuffled by
/// `stream` and dealt round-robin into folds. The penalty is rescaled by
/// `n_train/n` on each training split so it keeps its per-observation weight.
pub fn cv_lambda(x: &DesignMatrix, y: &[f64], folds: usize, grid: &[f64], stream: &RngStream) -> Result<CvResult> {
    let n = x.nrows();
    if folds < 2 {
        return Err(Error::Config(format!("cross-validation needs >= 2 folds, got {folds}")));
    }
    if grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    if folds > n {
        return Err(Error::Config(format!("{folds} folds for {n} rows")));
    }
    if y.len() != n {
        return Err(Error::Domain(format!("response has {} rows, design {n}", y.len())));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream.rng());
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }

    // Largest penalty first so each fit warm-starts from a sparser one.
    let mut by_size: Vec<usize> = (0..grid.len()).collect();
    by_size.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));

    let mut sse = vec![0.0; grid.len()];
    for k in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != k).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == k).collect();
        let xt = x.select_rows(&train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let xv = x.select_rows(&test);
        let gram = xt.gram();
        let xty = xt.t_mul_vec(&yt);
        let prob = GramProblem { gram: &gram, xty: &xty, yty: dot(&yt, &yt) };
        let shrink = train.len() as f64 / n as f64;
        let mut start: Option<Vec<f64>> = None;
        for &g in &by_size {
            let sol = lasso_cd(prob, grid[g] * shrink, start.as_deref(), None, LassoOptions::default())?;
            let pred = xv.mul_vec(&sol.beta);
            sse[g] += test.iter().zip(&pred).map(|(&i, f)| (y[i] - f).powi(2)).sum::<f64>();
            start = Some(sol.beta);
        }
    }
    let mse: Vec<f64> = sse.iter().map(|s| s / n as f64).collect();
    // Ties go to the larger penalty.
    let best = by_size
        .iter()
        .copied()
        .min_by(|&a, &b| mse[a].total_cmp(&mse[b]))
        .expect("nonempty grid");
    Ok(CvResult { lambda: grid[best], grid: grid.to_vec(), mse, folds })
}
