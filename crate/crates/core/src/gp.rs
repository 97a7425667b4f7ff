//! Gaussian process regression with a constant x RBF kernel plus white noise.
//!
//! Inputs and outputs are standardized internally; hyperparameters live in
//! the standardized space and are fitted by maximizing the log marginal
//! likelihood with projected gradient ascent in log space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;
const NOISE_FLOOR: f64 = 1e-8;
const REFINE_STEPS: usize = 100;

/// `c² exp(-Σ_d (x_d - x'_d)² / (2 ℓ_d²)) + σ_n² [x ≡ x']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub amplitude: f64,
    /// One entry (isotropic) or one per input dimension.
    pub lengths: Vec<f64>,
    pub noise: f64,
}

impl Kernel {
    fn length(&self, d: usize) -> f64 {
        if self.lengths.len() == 1 {
            self.lengths[0]
        } else {
            self.lengths[d]
        }
    }

    /// Noise-free part of the kernel.
    pub fn correlation(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for d in 0..a.len() {
            let l = self.length(d);
            s += (a[d] - b[d]).powi(2) / (l * l);
        }
        self.amplitude * self.amplitude * (-0.5 * s).exp()
    }

    fn to_log(&self, fit_noise: bool) -> Vec<f64> {
        let mut t = vec![self.amplitude.ln()];
        t.extend(self.lengths.iter().map(|l| l.ln()));
        if fit_noise {
            t.push(self.noise.ln());
        }
        t
    }

    fn from_log(t: &[f64], n_lengths: usize, fixed_noise: Option<f64>) -> Self {
        Kernel {
            amplitude: t[0].exp(),
            lengths: t[1..1 + n_lengths].iter().map(|v| v.exp()).collect(),
            noise: fixed_noise.unwrap_or_else(|| t[1 + n_lengths].exp()),
        }
    }
}

/// Hyperparameter box in standardized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub amplitude: (f64, f64),
    pub length: (f64, f64),
    pub noise: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        HyperBounds {
            amplitude: (1e-2, 1e2),
            length: (1e-2, 1e3),
            noise: (NOISE_FLOOR, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    /// One length scale for all inputs; otherwise one per input (ARD).
    pub isotropic: bool,
    pub n_restarts: usize,
    pub seed: u64,
    pub bounds: HyperBounds,
    /// Keep σ_n fixed at this value (standardized units) instead of fitting it.
    pub fixed_noise: Option<f64>,
    pub max_iter: usize,
    /// Add σ_n² to the predictive variance.
    pub include_noise: bool,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            isotropic: true,
            n_restarts: 5,
            seed: 0,
            bounds: HyperBounds::default(),
            fixed_noise: None,
            max_iter: 300,
            include_noise: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: f64,
    pub std: f64,
}

impl Scaler {
    fn fit(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count().max(1) as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        Scaler {
            mean,
            std: if std > 1e-300 { std } else { 1.0 },
        }
    }

    fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }
}

/// Everything needed to rebuild a fitted model; the Cholesky factor is recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpState {
    pub kernel: Kernel,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub x_scalers: Vec<Scaler>,
    pub y_scaler: Scaler,
    pub jitter: f64,
    pub include_noise: bool,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Likelihood at each optimizer start (heuristic first); empty for fixed kernels.
    #[serde(default)]
    pub start_log_likelihoods: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GpModel {
    state: GpState,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

fn covariance(x: &[Vec<f64>], k: &Kernel, jitter: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = k.correlation(&x[i], &x[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m[(i, i)] = k.amplitude * k.amplitude * (1.0 + jitter) + k.noise * k.noise;
    }
    m
}

/// Cholesky with jitter escalation; returns the factor and the jitter used.
/// Jitter is relative to the signal variance c².
fn factor(x: &[Vec<f64>], k: &Kernel) -> Option<(Cholesky<f64, Dyn>, f64)> {
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * 1.000001 {
        if let Some(c) = Cholesky::new(covariance(x, k, jitter)) {
            return Some((c, jitter));
        }
        jitter *= 10.0;
    }
    None
}

/// Refines the solution of `K α = y` for the covariance without jitter by
/// conjugate gradients preconditioned with the jittered factor. The jitter
/// otherwise shows up as a mean error of δ·|α| at the training points,
/// which is large when K is nearly singular. Keeps the iterate with the
/// smallest true residual.
fn refine(chol: &Cholesky<f64, Dyn>, k: &DMatrix<f64>, y: &DVector<f64>, alpha: DVector<f64>) -> DVector<f64> {
    let mut x = alpha;
    let mut r = y - k * &x;
    let (mut best, mut best_norm) = (x.clone(), r.norm());
    let mut z = chol.solve(&r);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for _ in 0..REFINE_STEPS.min(2 * y.len() + 2) {
        let kp = k * &p;
        let pkp = p.dot(&kp);
        if !(pkp > 0.0) || !(rz > 0.0) {
            break;
        }
        let a = rz / pkp;
        x += a * &p;
        r = y - k * &x;
        let norm = r.norm();
        if norm < best_norm {
            best.copy_from(&x);
            best_norm = norm;
        }
        z = chol.solve(&r);
        let rz_next = r.dot(&z);
        p = &z + (rz_next / rz) * &p;
        rz = rz_next;
    }
    best
}

fn lml_from_factor(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> (f64, DVector<f64>) {
    let alpha = chol.solve(y);
    let n = y.len() as f64;
    let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    let l = -0.5 * y.dot(&alpha) - 0.5 * logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    (l, alpha)
}

/// Log marginal likelihood and its gradient w.r.t. `(ln c, ln ℓ.., [ln σ_n])`
/// on already standardized data, with a fixed relative diagonal `jitter`.
pub fn log_likelihood_and_gradient(
    x: &[Vec<f64>],
    y: &[f64],
    kernel: &Kernel,
    fit_noise: bool,
    jitter: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = x.len();
    let k = covariance(x, kernel, jitter);
    let chol = Cholesky::new(k).ok_or_else(|| Error::Singular("GP covariance not positive definite".into()))?;
    let yv = DVector::from_column_slice(y);
    let (l, alpha) = lml_from_factor(&chol, &yv);
    // W = α αᵀ − K⁻¹
    let w = &alpha * alpha.transpose() - chol.inverse();
    let c2 = kernel.amplitude * kernel.amplitude;
    let n_len = kernel.lengths.len();
    let mut grad = vec![0.0; 1 + n_len + usize::from(fit_noise)];
    for i in 0..n {
        for j in 0..n {
            let r = if i == j { c2 * (1.0 + jitter) } else { kernel.correlation(&x[i], &x[j]) };
            let wij = w[(i, j)];
            grad[0] += 0.5 * wij * 2.0 * r;
            if i != j {
                if n_len == 1 {
                    let l2 = kernel.lengths[0].powi(2);
                    let s: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b).powi(2)).sum();
                    grad[1] += 0.5 * wij * r * s / l2;
                } else {
                    for d in 0..n_len {
                        let l2 = kernel.lengths[d].powi(2);
                        grad[1 + d] += 0.5 * wij * r * (x[i][d] - x[j][d]).powi(2) / l2;
                    }
                }
            }
        }
    }
    if fit_noise {
        let s2 = kernel.noise * kernel.noise;
        grad[1 + n_len] = (0..n).map(|i| 0.5 * w[(i, i)] * 2.0 * s2).sum();
    }
    Ok((l, grad))
}

fn median_pairwise_distance(x: &[Vec<f64>]) -> f64 {
    let mut d = Vec::new();
    for i in 0..x.len() {
        for j in 0..i {
            d.push(x[i].iter().zip(&x[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = d[d.len() / 2];
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

struct Problem<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    n_len: usize,
    fixed_noise: Option<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Problem<'_> {
    fn kernel(&self, t: &[f64]) -> Kernel {
        Kernel::from_log(t, self.n_len, self.fixed_noise)
    }

    fn clamp(&self, t: &mut [f64]) {
        for (v, (lo, hi)) in t.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    fn value(&self, t: &[f64]) -> Option<(f64, Vec<f64>)> {
        let k = self.kernel(t);
        let (_, jitter) = factor(self.x, &k)?;
        log_likelihood_and_gradient(self.x, self.y, &k, self.fixed_noise.is_none(), jitter)
            .ok()
            .filter(|(l, g)| l.is_finite() && g.iter().all(|v| v.is_finite()))
    }

    /// Projected gradient ascent with Armijo backtracking.
    fn ascend(&self, mut t: Vec<f64>, max_iter: usize) -> Option<(Vec<f64>, f64, usize)> {
        self.clamp(&mut t);
        let (mut l, mut g) = self.value(&t)?;
        let mut step = 1.0;
        let mut it = 0;
        while it < max_iter {
            it += 1;
            let mut accepted = None;
            for _ in 0..40 {
                let mut cand: Vec<f64> = t.iter().zip(&g).map(|(a, b)| a + step * b).collect();
                self.clamp(&mut cand);
                let dir: f64 = cand.iter().zip(&t).zip(&g).map(|((c, a), b)| (c - a) * b).sum();
                if dir <= 0.0 {
                    break;
                }
                if let Some((lc, gc)) = self.value(&cand) {
                    if lc >= l + 1e-4 * dir {
                        accepted = Some((cand, lc, gc));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((cand, lc, gc)) = accepted else { break };
            let moved: f64 = cand.iter().zip(&t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let gain = lc - l;
            t = cand;
            l = lc;
            g = gc;
            step = (step * 2.0).min(1e3);
            if gain <= 1e-10 * (1.0 + l.abs()) || moved < 1e-10 {
                break;
            }
        }
        Some((t, l, it))
    }
}

/// Fits a GP to inputs `x` (n rows of d) and targets `y`.
pub fn gp_fit(x: &[Vec<f64>], y: &[f64], config: &GpConfig) -> Result<GpModel> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidArgument("GP needs at least one training point".into()));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            context: "GP targets",
            expected: n,
            got: y.len(),
        });
    }
    let dim = x[0].len();
    for row in x {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "GP inputs",
                expected: dim,
                got: row.len(),
            });
        }
        ensure_finite(row, "GP inputs")?;
    }
    ensure_finite(y, "GP targets")?;
    let b = &config.bounds;
    for (lo, hi) in [b.amplitude, b.length, b.noise] {
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidArgument(format!("GP bounds ({lo}, {hi}) must be positive and ordered")));
        }
    }

    let x_scalers: Vec<Scaler> = (0..dim).map(|d| Scaler::fit(x.iter().map(move |r| r[d]))).collect();
    let y_scaler = Scaler::fit(y.iter().copied());
    let xs: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().zip(&x_scalers).map(|(v, s)| s.apply(*v)).collect())
        .collect();
    let ys: Vec<f64> = y.iter().map(|v| y_scaler.apply(*v)).collect();

    let n_len = if config.isotropic { 1 } else { dim.max(1) };
    let fixed_noise = config.fixed_noise;
    let mut lo = vec![b.amplitude.0.ln()];
    let mut hi = vec![b.amplitude.1.ln()];
    lo.extend(std::iter::repeat_n(b.length.0.ln(), n_len));
    hi.extend(std::iter::repeat_n(b.length.1.ln(), n_len));
    if fixed_noise.is_none() {
        lo.push(b.noise.0.max(NOISE_FLOOR).ln());
        hi.push(b.noise.1.max(NOISE_FLOOR).ln());
    }
    let problem = Problem {
        x: &xs,
        y: &ys,
        n_len,
        fixed_noise,
        lo,
        hi,
    };

    let y_sd = {
        let m = ys.iter().sum::<f64>() / n as f64;
        let v = (ys.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        if v > 0.0 {
            v
        } else {
            1.0
        }
    };
    let heuristic = Kernel {
        amplitude: y_sd,
        lengths: vec![median_pairwise_distance(&xs); n_len],
        noise: fixed_noise.unwrap_or(1e-3 * y_sd),
    };
    let mut starts = vec![heuristic.to_log(fixed_noise.is_none())];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.n_restarts {
        starts.push(
            problem
                .lo
                .iter()
                .zip(&problem.hi)
                .map(|(l, h)| if h > l { rng.random_range(*l..*h) } else { *l })
                .collect(),
        );
    }

    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let mut start_lml = Vec::with_capacity(starts.len());
    for mut s in starts {
        problem.clamp(&mut s);
        start_lml.push(problem.value(&s).map_or(f64::NEG_INFINITY, |v| v.0));
        if let Some((t, l, it)) = problem.ascend(s, config.max_iter) {
            if best.as_ref().is_none_or(|b| l > b.1) {
                best = Some((t, l, it));
            }
        }
    }
    let (t, l, it) = best.ok_or_else(|| {
        Error::Numerical(format!("GP covariance could not be factorized even with jitter {JITTER_MAX:e}"))
    })?;
    let kernel = problem.kernel(&t);
    log::debug!("GP fit: lml {l:.4} after {it} iterations, kernel {kernel:?}");
    GpModel::from_state(GpState {
        kernel,
        x: xs,
        y: ys,
        x_scalers,
        y_scaler,
        jitter: 0.0,
        include_noise: config.include_noise,
        log_likelihood: l,
        iterations: it,
        start_log_likelihoods: start_lml,
    })
}

/// Builds a model with fixed hyperparameters (standardization still applied).
pub fn gp_with_kernel(x: &[Vec<f64>], y: &[f64], kernel: Kernel, include_noise: bool) -> Result<GpModel> {
    if x.is_empty() || y.len() != x.len() {
        return Err(Error::InvalidArgument("GP needs matching non-empty inputs and targets".into()));
    }
    let dim = x[0].len();
    let x_scalers: Vec<Scaler> = (0..dim).map(|d| Scaler::fit(x.iter().map(move |r| r[d]))).collect();
    let y_scaler = Scaler::fit(y.iter().copied());
    let xs = x
        .iter()
        .map(|r| r.iter().zip(&x_scalers).map(|(v, s)| s.apply(*v)).collect())
        .collect();
    let ys = y.iter().map(|v| y_scaler.apply(*v)).collect();
    GpModel::from_state(GpState {
        kernel,
        x: xs,
        y: ys,
        x_scalers,
        y_scaler,
        jitter: 0.0,
        include_noise,
        log_likelihood: f64::NAN,
        iterations: 0,
        start_log_likelihoods: Vec::new(),
    })
}

impl GpModel {
    pub fn from_state(mut state: GpState) -> Result<Self> {
        let (chol, jitter) = factor(&state.x, &state.kernel).ok_or_else(|| {
            Error::Numerical(format!("GP covariance could not be factorized even with jitter {JITTER_MAX:e}"))
        })?;
        state.jitter = jitter;
        let yv = DVector::from_column_slice(&state.y);
        let (l, alpha) = lml_from_factor(&chol, &yv);
        if state.log_likelihood.is_nan() {
            state.log_likelihood = l;
        }
        let alpha = refine(&chol, &covariance(&state.x, &state.kernel, 0.0), &yv, alpha);
        Ok(GpModel { state, chol, alpha })
    }

    pub fn state(&self) -> &GpState {
        &self.state
    }

    pub fn kernel(&self) -> &Kernel {
        &self.state.kernel
    }

    pub fn input_dim(&self) -> usize {
        self.state.x_scalers.len()
    }

    pub fn log_likelihood(&self) -> f64 {
        self.state.log_likelihood
    }

    /// Kernel amplitude² in output units.
    pub fn signal_variance(&self) -> f64 {
        (self.state.kernel.amplitude * self.state.y_scaler.std).powi(2)
    }

    /// Predictive mean and variance (output units) at one query.
    pub fn predict_one(&self, q: &[f64]) -> Result<(f64, f64)> {
        if q.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "GP query",
                expected: self.input_dim(),
                got: q.len(),
            });
        }
        ensure_finite(q, "GP query")?;
        let s = &self.state;
        let qs: Vec<f64> = q.iter().zip(&s.x_scalers).map(|(v, sc)| sc.apply(*v)).collect();
        let kstar = DVector::from_iterator(s.x.len(), s.x.iter().map(|xi| s.kernel.correlation(xi, &qs)));
        let mean = kstar.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kstar)
            .ok_or_else(|| Error::Singular("GP Cholesky factor is singular".into()))?;
        let c2 = s.kernel.amplitude * s.kernel.amplitude;
        let mut var = c2 - v.dot(&v);
        if s.include_noise {
            var += s.kernel.noise * s.kernel.noise;
        }
        if var < 0.0 {
            if var >= -1e-10 * c2 {
                var = 0.0;
            } else {
                return Err(Error::Numerical(format!("negative predictive variance {var:e}")));
            }
        }
        let sd = s.y_scaler.std;
        Ok((mean * sd + s.y_scaler.mean, var * sd * sd))
    }

    pub fn predict(&self, queries: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut means = Vec::with_capacity(queries.len());
        let mut vars = Vec::with_capacity(queries.len());
        for q in queries {
            let (m, v) = self.predict_one(q)?;
            means.push(m);
            vars.push(v);
        }
        Ok((means, vars))
    }
}
