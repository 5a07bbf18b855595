//! Multivariate normal MLE, Gaussian mixture EM, density evaluation, peak
//! values, and Mahalanobis distance.
//!
//! All density math happens in log space; `density` and `peak_density`
//! exponentiate at the boundary. Covariances use MLE (1/N) normalization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, solve_lower, Matrix};
use crate::stream;

const LN_2PI: f64 = 1.8378770664093453;

/// Multivariate normal with cached Cholesky factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRepr", into = "GaussianRepr")]
pub struct GaussianModel {
    mu: Vec<f64>,
    sigma: Matrix,
    chol: Matrix,
    log_det: f64,
    dim: usize,
}

/// Serialized form: mean plus row-major covariance. The factorization is
/// rebuilt on load, which reproduces identical bits for identical sigma.
#[derive(Serialize, Deserialize)]
struct GaussianRepr {
    dim: usize,
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl TryFrom<GaussianRepr> for GaussianModel {
    type Error = Error;
    fn try_from(raw: GaussianRepr) -> Result<Self> {
        let sigma = Matrix::from_vec(raw.dim, raw.dim, raw.sigma)?;
        GaussianModel::new(raw.mu, sigma)
    }
}

impl From<GaussianModel> for GaussianRepr {
    fn from(m: GaussianModel) -> GaussianRepr {
        GaussianRepr {
            dim: m.dim,
            mu: m.mu,
            sigma: m.sigma.data().to_vec(),
        }
    }
}

impl GaussianModel {
    pub fn new(mu: Vec<f64>, sigma: Matrix) -> Result<Self> {
        let dim = mu.len();
        if sigma.rows() != dim || sigma.cols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: sigma.rows(),
            });
        }
        if dim == 0 {
            return Err(Error::Config("zero-dimensional model".into()));
        }
        if !sigma.is_symmetric(1e-9) {
            return Err(Error::Config("covariance is not symmetric".into()));
        }
        let chol = cholesky(&sigma).map_err(|pivot| singular_pair(&sigma, pivot))?;
        let log_det = 2.0 * (0..dim).map(|i| chol.get(i, i).ln()).sum::<f64>();
        Ok(GaussianModel {
            mu,
            sigma,
            chol,
            log_det,
            dim,
        })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn chol(&self) -> &Matrix {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Squared Mahalanobis distance via triangular solve against the
    /// Cholesky factor; no explicit inverse is formed.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let diff: Vec<f64> = x.iter().zip(&self.mu).map(|(a, b)| a - b).collect();
        let z = solve_lower(&self.chol, &diff);
        Ok(z.iter().map(|v| v * v).sum())
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let t2 = self.mahalanobis_sq(x)?;
        Ok(-0.5 * (self.dim as f64 * LN_2PI + self.log_det + t2))
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    /// Log of the density maximum, attained at the mean.
    pub fn log_peak_density(&self) -> f64 {
        -0.5 * (self.dim as f64 * LN_2PI + self.log_det)
    }

    /// Density maximum M = (2 pi)^(-d/2) |Sigma|^(-1/2).
    pub fn peak_density(&self) -> f64 {
        self.log_peak_density().exp()
    }
}

fn singular_pair(sigma: &Matrix, pivot: usize) -> Error {
    // Name the most correlated pair involving the failing pivot.
    let mut best = (0usize, pivot.max(1));
    let mut best_corr = -1.0;
    for i in 0..sigma.rows() {
        if i == pivot {
            continue;
        }
        let denom = (sigma.get(i, i) * sigma.get(pivot, pivot)).sqrt();
        let corr = if denom > 0.0 {
            (sigma.get(i, pivot) / denom).abs()
        } else {
            1.0
        };
        if corr > best_corr {
            best_corr = corr;
            best = (i.min(pivot), i.max(pivot));
        }
    }
    Error::SingularCovariance {
        i: best.0,
        j: best.1,
    }
}

fn column_means(x: &Matrix) -> Vec<f64> {
    let n = x.rows();
    let d = x.cols();
    let mut mu = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mu.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for m in &mut mu {
        *m /= n as f64;
    }
    mu
}

/// MLE covariance (1/N) around `mu`, optionally weighted, plus `reg` on the
/// diagonal. `weights` must sum to `norm`.
fn covariance(x: &Matrix, mu: &[f64], weights: Option<&[f64]>, norm: f64, reg: f64) -> Matrix {
    let d = x.cols();
    let mut sigma = Matrix::zeros(d, d);
    let mut diff = vec![0.0; d];
    for i in 0..x.rows() {
        let w = weights.map_or(1.0, |ws| ws[i]);
        for (dv, (xv, mv)) in diff.iter_mut().zip(x.row(i).iter().zip(mu)) {
            *dv = xv - mv;
        }
        for a in 0..d {
            for b in a..d {
                let v = sigma.get(a, b) + w * diff[a] * diff[b];
                sigma.set(a, b, v);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = sigma.get(a, b) / norm;
            sigma.set(a, b, v);
            sigma.set(b, a, v);
        }
    }
    for a in 0..d {
        sigma.set(a, a, sigma.get(a, a) + reg);
    }
    sigma
}

/// Default diagonal regularization: 1e-6 x mean sample variance.
pub fn default_reg_covar(x: &Matrix) -> f64 {
    let mu = column_means(x);
    let d = x.cols();
    let mut mean_var = 0.0;
    for j in 0..d {
        let mut v = 0.0;
        for i in 0..x.rows() {
            let diff = x.get(i, j) - mu[j];
            v += diff * diff;
        }
        mean_var += v / x.rows() as f64;
    }
    1e-6 * (mean_var / d as f64)
}

/// Fit a multivariate normal by MLE with the default regularization.
pub fn fit_gaussian(x: &Matrix) -> Result<GaussianModel> {
    fit_gaussian_reg(x, default_reg_covar(x))
}

/// Fit a multivariate normal by MLE with `reg` added to the covariance
/// diagonal.
pub fn fit_gaussian_reg(x: &Matrix, reg: f64) -> Result<GaussianModel> {
    let (n, d) = (x.rows(), x.cols());
    if n < d + 1 {
        return Err(Error::NotEnoughRows { need: d + 1, got: n });
    }
    let mu = column_means(x);
    let sigma = covariance(x, &mu, None, n as f64, reg);
    GaussianModel::new(mu, sigma)
}

/// Gaussian mixture with component peaks available per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmRepr", into = "GmmRepr")]
pub struct GmmModel {
    components: Vec<GaussianModel>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GmmRepr {
    dim: usize,
    weights: Vec<f64>,
    components: Vec<GaussianRepr>,
}

impl TryFrom<GmmRepr> for GmmModel {
    type Error = Error;
    fn try_from(raw: GmmRepr) -> Result<Self> {
        let components: Result<Vec<GaussianModel>> =
            raw.components.into_iter().map(GaussianModel::try_from).collect();
        GmmModel::new(components?, raw.weights)
    }
}

impl From<GmmModel> for GmmRepr {
    fn from(m: GmmModel) -> GmmRepr {
        GmmRepr {
            dim: m.dim(),
            weights: m.weights,
            components: m.components.into_iter().map(GaussianRepr::from).collect(),
        }
    }
}

impl GmmModel {
    pub fn new(components: Vec<GaussianModel>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::Config("mixture weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        let dim = components[0].dim();
        if components.iter().any(|c| c.dim() != dim) {
            return Err(Error::Config("mixture components disagree on dimension".into()));
        }
        Ok(GmmModel { components, weights })
    }

    pub fn p(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn components(&self) -> &[GaussianModel] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn component(&self, k: usize) -> Result<&GaussianModel> {
        self.components.get(k).ok_or(Error::ComponentIndex {
            k,
            p: self.components.len(),
        })
    }

    /// Unweighted component density f_k(x); mixture weights excluded.
    pub fn component_density(&self, k: usize, x: &[f64]) -> Result<f64> {
        self.component(k)?.density(x)
    }

    /// Full mixture density sum_k w_k f_k(x).
    pub fn mixture_density(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (c, w) in self.components.iter().zip(&self.weights) {
            total += w * c.density(x)?;
        }
        Ok(total)
    }

    /// Total mixture log-likelihood of the rows of `x`.
    pub fn log_likelihood(&self, x: &Matrix) -> f64 {
        let mut ll = 0.0;
        let mut terms = vec![0.0; self.p()];
        for i in 0..x.rows() {
            for (t, (c, w)) in terms.iter_mut().zip(self.components.iter().zip(&self.weights)) {
                *t = w.ln() + c.log_density(x.row(i)).expect("dims fixed");
            }
            ll += log_sum_exp(&terms);
        }
        ll
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// EM settings. The tolerance is on the relative log-likelihood change.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub n_init: usize,
    pub reg_covar: f64,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 200,
            tol: 1e-6,
            n_init: 1,
            reg_covar: 1e-6,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be > 0".into()));
        }
        if self.n_init < 1 {
            return Err(Error::Config("n_init must be >= 1".into()));
        }
        if self.reg_covar < 0.0 {
            return Err(Error::Config("reg_covar must be >= 0".into()));
        }
        Ok(())
    }
}

/// Outcome of [`fit_gmm_full`]: the chosen model plus the per-iteration
/// log-likelihood trace of every initialization run.
#[derive(Clone, Debug)]
pub struct GmmFit {
    pub model: GmmModel,
    pub log_likelihood: f64,
    pub traces: Vec<Vec<f64>>,
    pub best_run: usize,
}

/// Fit a Gaussian mixture by EM; best of `cfg.n_init` seeded runs.
pub fn fit_gmm(x: &Matrix, p: usize, cfg: &EmConfig) -> Result<GmmModel> {
    Ok(fit_gmm_full(x, p, cfg)?.model)
}

pub fn fit_gmm_full(x: &Matrix, p: usize, cfg: &EmConfig) -> Result<GmmFit> {
    cfg.validate()?;
    let (n, d) = (x.rows(), x.cols());
    if p < 1 {
        return Err(Error::Config("p must be >= 1".into()));
    }
    if n < p * (d + 1) {
        return Err(Error::NotEnoughRows {
            need: p * (d + 1),
            got: n,
        });
    }

    let mut best: Option<(GmmModel, f64, usize)> = None;
    let mut traces = Vec::with_capacity(cfg.n_init);
    for run in 0..cfg.n_init {
        let (model, trace) = em_run(x, p, cfg, run as u64)?;
        let ll = *trace.last().expect("at least one iteration");
        if best.as_ref().is_none_or(|(_, b, _)| ll > *b) {
            best = Some((model, ll, run));
        }
        traces.push(trace);
    }
    let (model, log_likelihood, best_run) = best.expect("n_init >= 1");
    Ok(GmmFit {
        model,
        log_likelihood,
        traces,
        best_run,
    })
}

fn em_run(x: &Matrix, p: usize, cfg: &EmConfig, run: u64) -> Result<(GmmModel, Vec<f64>)> {
    let (n, d) = (x.rows(), x.cols());
    let mut rng = stream::rng("em.init", cfg.seed, &run.to_le_bytes());

    // k-means++ seeding, 10 Lloyd iterations, pooled covariance.
    let centers = kmeans(x, p, &mut rng);
    let pooled_mu = column_means(x);
    let pooled = covariance(x, &pooled_mu, None, n as f64, cfg.reg_covar);

    let mut means = centers.clone();
    let mut sigmas = vec![pooled.clone(); p];
    let mut weights = {
        let counts = assign_counts(x, &centers);
        counts.iter().map(|&c| c.max(1) as f64).collect::<Vec<f64>>()
    };
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let mut models: Vec<GaussianModel> = means
        .iter()
        .zip(&sigmas)
        .map(|(m, s)| GaussianModel::new(m.clone(), s.clone()))
        .collect::<Result<_>>()?;

    let mut trace = Vec::new();
    let mut resp = vec![0.0; n * p];
    let mut reseeded = vec![false; p];
    let mut prev_ll = f64::NEG_INFINITY;

    for _iter in 0..cfg.max_iters {
        // E-step
        let mut ll = 0.0;
        let mut terms = vec![0.0; p];
        for i in 0..n {
            for (k, t) in terms.iter_mut().enumerate() {
                *t = weights[k].ln() + models[k].log_density(x.row(i))?;
            }
            let norm = log_sum_exp(&terms);
            ll += norm;
            for k in 0..p {
                resp[i * p + k] = (terms[k] - norm).exp();
            }
        }
        trace.push(ll);

        let rel_change = (ll - prev_ll).abs() / ll.abs().max(1.0);
        if prev_ll.is_finite() && rel_change < cfg.tol {
            break;
        }
        prev_ll = ll;

        // M-step
        for k in 0..p {
            let col: Vec<f64> = (0..n).map(|i| resp[i * p + k]).collect();
            let mass: f64 = col.iter().sum();
            if mass < 1e-8 {
                if reseeded[k] {
                    return Err(Error::EmptyComponent { k });
                }
                reseeded[k] = true;
                let pick = rng.random_range(0..n);
                means[k] = x.row(pick).to_vec();
                sigmas[k] = pooled.clone();
                weights[k] = 1.0 / p as f64;
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                models[k] = GaussianModel::new(means[k].clone(), sigmas[k].clone())?;
                continue;
            }
            weights[k] = mass / n as f64;
            let mut mu = vec![0.0; d];
            for i in 0..n {
                let w = col[i];
                for (m, v) in mu.iter_mut().zip(x.row(i)) {
                    *m += w * v;
                }
            }
            mu.iter_mut().for_each(|m| *m /= mass);
            let sigma = covariance(x, &mu, Some(&col), mass, cfg.reg_covar);
            means[k] = mu;
            sigmas[k] = sigma;
            models[k] = GaussianModel::new(means[k].clone(), sigmas[k].clone())?;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
    }

    Ok((GmmModel::new(models, weights)?, trace))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans(x: &Matrix, p: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = x.rows();
    // k-means++ seeding
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(p);
    centers.push(x.row(rng.random_range(0..n)).to_vec());
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), &centers[0])).collect();
    while centers.len() < p {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(x.row(next).to_vec());
        for i in 0..n {
            d2[i] = d2[i].min(sq_dist(x.row(i), centers.last().unwrap()));
        }
    }
    // Lloyd iterations
    for _ in 0..10 {
        let mut sums = vec![vec![0.0; x.cols()]; p];
        let mut counts = vec![0usize; p];
        for i in 0..n {
            let k = nearest(x.row(i), &centers);
            counts[k] += 1;
            for (s, v) in sums[k].iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for k in 0..p {
            if counts[k] == 0 {
                // empty cluster: restart from the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(x.row(a), &centers[nearest(x.row(a), &centers)]);
                        let db = sq_dist(x.row(b), &centers[nearest(x.row(b), &centers)]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centers[k] = x.row(far).to_vec();
            } else {
                for (c, s) in centers[k].iter_mut().zip(&sums[k]) {
                    *c = s / counts[k] as f64;
                }
            }
        }
    }
    centers
}

fn nearest(row: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(row, c);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

fn assign_counts(x: &Matrix, centers: &[Vec<f64>]) -> Vec<usize> {
    let mut counts = vec![0usize; centers.len()];
    for i in 0..x.rows() {
        counts[nearest(x.row(i), centers)] += 1;
    }
    counts
}

/// Either density family, as stored in model files and experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityModel {
    Gaussian(GaussianModel),
    Gmm(GmmModel),
}

impl DensityModel {
    pub fn dim(&self) -> usize {
        match self {
            DensityModel::Gaussian(g) => g.dim(),
            DensityModel::Gmm(g) => g.dim(),
        }
    }
}
