//! Synthetic heterogeneous data: LMC draws on a dense lattice, Gaussian and
//! Bernoulli observations, and Cox events by thinning.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{
    ClassificationTask, Domain, HeterogeneousDataset, PointProcessTask, RegressionTask, TaskKind,
};
use crate::error::{Error, Result};
use crate::kernel::{cholesky_with_jitter, JitterPolicy, LmcHyperparams, RbfParams};
use crate::rng::{self, Stream, RNG_ID};
use crate::special::sigmoid;

/// Values on an endpoint-inclusive lattice, evaluated off-grid by
/// multilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    axes: Vec<Vec<f64>>,
    /// Row-major, first axis slowest.
    values: Vec<f64>,
}

fn lattice_axes(domain: &Domain, counts: &[usize]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .enumerate()
        .map(|(d, &n)| {
            let (lo, hi) = (domain.lower()[d], domain.upper()[d]);
            (0..n)
                .map(|k| {
                    if k + 1 == n {
                        hi
                    } else {
                        lo + (hi - lo) * k as f64 / (n - 1) as f64
                    }
                })
                .collect()
        })
        .collect()
}

impl GridFunction {
    pub fn new(domain: &Domain, counts: &[usize], values: Vec<f64>) -> Result<Self> {
        if counts.len() != domain.dims() || counts.iter().any(|&n| n < 2) {
            return Err(Error::InvalidArgument(
                "lattice needs at least 2 points per dimension".into(),
            ));
        }
        let total: usize = counts.iter().product();
        if values.len() != total {
            return Err(Error::Dimension {
                expected: total,
                got: values.len(),
            });
        }
        Ok(GridFunction {
            axes: lattice_axes(domain, counts),
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Interpolated value; points outside the lattice are clamped onto it.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let dims = self.axes.len();
        let mut base = Vec::with_capacity(dims);
        let mut frac = Vec::with_capacity(dims);
        for (axis, &v) in self.axes.iter().zip(x) {
            let n = axis.len();
            let (lo, hi) = (axis[0], axis[n - 1]);
            let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0) * (n - 1) as f64;
            let k = (t.floor() as usize).min(n - 2);
            base.push(k);
            frac.push(t - k as f64);
        }
        let mut total = 0.0;
        for corner in 0..(1usize << dims) {
            let mut weight = 1.0;
            let mut index = 0;
            for d in 0..dims {
                let up = (corner >> (dims - 1 - d)) & 1;
                weight *= if up == 1 { frac[d] } else { 1.0 - frac[d] };
                index = index * self.axes[d].len() + base[d] + up;
            }
            if weight != 0.0 {
                total += weight * self.values[index];
            }
        }
        total
    }
}

/// Draws each basis GP `f_q ~ GP(0, k_q)` on the lattice `grid_n`.
///
/// The RBF kernel factorizes over dimensions, so the lattice covariance is a
/// Kronecker product of per-axis matrices and its Cholesky factor is the
/// Kronecker product of theirs.
pub fn sample_basis_functions(
    domain: &Domain,
    grid_n: &[usize],
    kernels: &[RbfParams],
    seed: u64,
) -> Result<Vec<GridFunction>> {
    if grid_n.len() != domain.dims() || grid_n.iter().any(|&n| n < 2) {
        return Err(Error::InvalidArgument(
            "basis lattice needs at least 2 points per dimension".into(),
        ));
    }
    let axes = lattice_axes(domain, grid_n);
    let total: usize = grid_n.iter().product();
    kernels
        .iter()
        .enumerate()
        .map(|(q, k)| {
            let factors = axes
                .iter()
                .map(|axis| {
                    let n = axis.len();
                    let cov = DMatrix::from_fn(n, n, |a, b| {
                        let d = axis[a] - axis[b];
                        (-0.5 * k.theta1 * d * d).exp()
                    });
                    cholesky_with_jitter(&cov, &JitterPolicy::default()).map(|(ch, _)| ch.l())
                })
                .collect::<Result<Vec<_>>>()?;
            let mut rng = rng::stream_indexed(seed, Stream::BasisFunctions, q as u64);
            let z: Vec<f64> = (0..total)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let scale = k.theta0.sqrt();
            let values = kron_apply(&factors, &z)
                .into_iter()
                .map(|v| v * scale)
                .collect();
            GridFunction::new(domain, grid_n, values)
        })
        .collect()
}

/// `(L_1 ⊗ … ⊗ L_D) z` for `z` stored with the first axis slowest.
fn kron_apply(factors: &[DMatrix<f64>], z: &[f64]) -> Vec<f64> {
    let mut cur = z.to_vec();
    let sizes: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
    for (d, l) in factors.iter().enumerate() {
        let n = sizes[d];
        let inner: usize = sizes[d + 1..].iter().product();
        let outer: usize = sizes[..d].iter().product();
        let mut next = vec![0.0; cur.len()];
        for o in 0..outer {
            for i in 0..inner {
                for a in 0..n {
                    let mut acc = 0.0;
                    for b in 0..=a {
                        acc += l[(a, b)] * cur[(o * n + b) * inner + i];
                    }
                    next[(o * n + a) * inner + i] = acc;
                }
            }
        }
        cur = next;
    }
    cur
}

/// What to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub domain: Domain,
    /// Task types in global order (regression, classification, point process).
    pub kinds: Vec<TaskKind>,
    pub hyperparams: LmcHyperparams,
    /// Intensity upper bound of each Cox task.
    pub lambda_bar: Vec<f64>,
    pub regression_samples: usize,
    pub classification_samples: usize,
    /// Dense lattice for the basis draws and the ground-truth curves.
    pub grid_counts: Vec<usize>,
}

impl SimConfig {
    fn check(&self) -> Result<()> {
        let mut sorted = self.kinds.clone();
        sorted.sort_by_key(|k| *k as u8);
        if sorted != self.kinds || self.kinds.is_empty() {
            return Err(Error::InvalidArgument(
                "task kinds must be non-empty and ordered regression, classification, point_process".into(),
            ));
        }
        let count = |kind| self.kinds.iter().filter(|k| **k == kind).count();
        self.hyperparams
            .check_layout(self.kinds.len(), count(TaskKind::Regression))?;
        if self.lambda_bar.len() != count(TaskKind::PointProcess) {
            return Err(Error::Dimension {
                expected: count(TaskKind::PointProcess),
                got: self.lambda_bar.len(),
            });
        }
        if self.lambda_bar.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(
                "intensity bounds must be positive and finite".into(),
            ));
        }
        if self.grid_counts.len() != self.domain.dims() {
            return Err(Error::Dimension {
                expected: self.domain.dims(),
                got: self.grid_counts.len(),
            });
        }
        Ok(())
    }
}

/// The generating functions of a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub domain: Domain,
    pub grid_counts: Vec<usize>,
    /// Lattice points, first dimension slowest.
    pub grid: Vec<Vec<f64>>,
    pub kinds: Vec<TaskKind>,
    /// Latent `g_i` on the grid.
    pub latent: Vec<Vec<f64>>,
    /// Reported function on the grid: `g`, `s(g)` or `λ̄ s(g)`.
    pub functions: Vec<Vec<f64>>,
    pub lambda_bar: Vec<f64>,
    pub hyperparams: LmcHyperparams,
    pub regression_samples: usize,
    pub classification_samples: usize,
    pub seed: u64,
    pub rng_id: String,
}

fn uniform_point(domain: &Domain, rng: &mut ChaCha8Rng) -> Vec<f64> {
    domain
        .lower()
        .iter()
        .zip(domain.upper())
        .map(|(lo, hi)| rng.random_range(*lo..*hi))
        .collect()
}

/// Lewis-Shedler thinning: `Poisson(λ̄ |X|)` uniform candidates, each kept
/// with probability `accept(x)`.
pub fn thin_poisson(
    domain: &Domain,
    lambda_bar: f64,
    accept: impl Fn(&[f64]) -> f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let mean = lambda_bar * domain.volume();
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("positive mean").sample(rng) as usize
    } else {
        0
    };
    let mut events = Vec::new();
    for _ in 0..count {
        let x = uniform_point(domain, rng);
        let u: f64 = rng.random();
        if u < accept(&x) {
            events.push(x);
        }
    }
    events
}

impl GroundTruth {
    pub fn latent_function(&self, task: usize) -> Result<GridFunction> {
        let values = self.latent.get(task).ok_or(Error::TaskIndex {
            index: task,
            count: self.latent.len(),
        })?;
        GridFunction::new(&self.domain, &self.grid_counts, values.clone())
    }

    /// Observations of every task drawn from the true functions. With `test`
    /// set, every stream is moved under `Stream::TestDraw` so the draw is
    /// independent of the training data.
    fn draw(&self, seed: u64, test: bool) -> Result<HeterogeneousDataset> {
        let latent: Vec<GridFunction> = (0..self.kinds.len())
            .map(|i| self.latent_function(i))
            .collect::<Result<_>>()?;
        let stream = |purpose: Stream, i: usize| {
            if test {
                rng::stream_indexed(seed, Stream::TestDraw, ((purpose as u64) << 16) | i as u64)
            } else {
                rng::stream_indexed(seed, purpose, i as u64)
            }
        };
        let mut regression = Vec::new();
        let mut classification = Vec::new();
        let mut point_process = Vec::new();
        let mut cox = 0;
        for (i, kind) in self.kinds.iter().enumerate() {
            let g = &latent[i];
            match kind {
                TaskKind::Regression => {
                    let mut rng = stream(Stream::Regression, i);
                    let noise =
                        Normal::new(0.0, self.hyperparams.noise_vars[regression.len()].sqrt())
                            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                    let inputs: Vec<Vec<f64>> = (0..self.regression_samples)
                        .map(|_| uniform_point(&self.domain, &mut rng))
                        .collect();
                    let outputs = inputs
                        .iter()
                        .map(|x| g.eval(x) + noise.sample(&mut rng))
                        .collect();
                    regression.push(RegressionTask { inputs, outputs });
                }
                TaskKind::Classification => {
                    let mut rng = stream(Stream::Classification, i);
                    let inputs: Vec<Vec<f64>> = (0..self.classification_samples)
                        .map(|_| uniform_point(&self.domain, &mut rng))
                        .collect();
                    let labels = inputs
                        .iter()
                        .map(|x| {
                            let u: f64 = rng.random();
                            if u < sigmoid(g.eval(x)) {
                                1.0
                            } else {
                                -1.0
                            }
                        })
                        .collect();
                    classification.push(ClassificationTask { inputs, labels });
                }
                TaskKind::PointProcess => {
                    let mut rng = stream(Stream::PointProcess, i);
                    let events = thin_poisson(
                        &self.domain,
                        self.lambda_bar[cox],
                        |x| sigmoid(g.eval(x)),
                        &mut rng,
                    );
                    point_process.push(PointProcessTask { events });
                    cox += 1;
                }
            }
        }
        HeterogeneousDataset::new(
            self.domain.clone(),
            regression,
            classification,
            point_process,
        )
    }

    /// A fresh dataset from the same functions, independent of the training
    /// draw.
    pub fn draw_test_set(&self, seed: u64) -> Result<HeterogeneousDataset> {
        self.draw(seed, true)
    }
}

/// Simulates a dataset and returns it with its ground truth.
pub fn simulate_dataset(
    config: &SimConfig,
    seed: u64,
) -> Result<(HeterogeneousDataset, GroundTruth)> {
    config.check()?;
    let hyp = &config.hyperparams;
    let basis = sample_basis_functions(&config.domain, &config.grid_counts, &hyp.kernels, seed)?;
    let grid = config.domain.lattice(&config.grid_counts)?;
    let mut latent = Vec::with_capacity(config.kinds.len());
    let mut functions = Vec::with_capacity(config.kinds.len());
    let mut cox = 0;
    for (i, kind) in config.kinds.iter().enumerate() {
        let g: Vec<f64> = (0..grid.len())
            .map(|p| {
                basis
                    .iter()
                    .zip(&hyp.weights[i])
                    .map(|(f, w)| w * f.values()[p])
                    .sum()
            })
            .collect();
        let f = match kind {
            TaskKind::Regression => g.clone(),
            TaskKind::Classification => g.iter().map(|v| sigmoid(*v)).collect(),
            TaskKind::PointProcess => {
                let lam = config.lambda_bar[cox];
                cox += 1;
                g.iter().map(|v| lam * sigmoid(*v)).collect()
            }
        };
        latent.push(g);
        functions.push(f);
    }
    let truth = GroundTruth {
        domain: config.domain.clone(),
        grid_counts: config.grid_counts.clone(),
        grid,
        kinds: config.kinds.clone(),
        latent,
        functions,
        lambda_bar: config.lambda_bar.clone(),
        hyperparams: hyp.clone(),
        regression_samples: config.regression_samples,
        classification_samples: config.classification_samples,
        seed,
        rng_id: RNG_ID.to_string(),
    };
    let dataset = truth.draw(seed, false)?;
    Ok((dataset, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Domain {
        Domain::interval(0.0, 100.0).unwrap()
    }

    #[test]
    fn interpolation_reproduces_nodes_and_linear_functions() {
        let d = Domain::new(vec![0.0, 0.0], vec![4.0, 2.0]).unwrap();
        let pts = d.lattice(&[5, 3]).unwrap();
        let values: Vec<f64> = pts.iter().map(|p| 2.0 * p[0] - 3.0 * p[1] + 1.0).collect();
        let f = GridFunction::new(&d, &[5, 3], values.clone()).unwrap();
        for (p, v) in pts.iter().zip(&values) {
            assert!((f.eval(p) - v).abs() < 1e-12);
        }
        for p in [[0.3, 1.7], [3.9, 0.1], [2.5, 1.0]] {
            assert!((f.eval(&p) - (2.0 * p[0] - 3.0 * p[1] + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn kron_apply_matches_dense() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 2.0]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.2, 1.5, 0.0, -0.3, 0.4, 0.7]);
        let z: Vec<f64> = (0..6).map(|k| k as f64 * 0.37 - 1.0).collect();
        let dense = a.kronecker(&b) * nalgebra::DVector::from_column_slice(&z);
        let fast = kron_apply(&[a, b], &z);
        for (x, y) in dense.iter().zip(&fast) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn basis_draw_is_deterministic() {
        let k = [RbfParams::new(1.0, 0.01).unwrap()];
        let a = sample_basis_functions(&line(), &[100], &k, 3).unwrap();
        let b = sample_basis_functions(&line(), &[100], &k, 3).unwrap();
        assert_eq!(a, b);
        let c = sample_basis_functions(&line(), &[100], &k, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rough_kernel_gives_uncorrelated_neighbours() {
        let k = [RbfParams::new(1.0, 1e3).unwrap()];
        for seed in 0..20 {
            let f = &sample_basis_functions(&line(), &[500], &k, seed).unwrap()[0];
            let v = f.values();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
            let lag: f64 = v.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
            assert!(
                (lag / var).abs() < 0.2,
                "seed {seed}: lag-1 autocorrelation {}",
                lag / var
            );
        }
    }

    #[test]
    fn basis_draws_are_centred() {
        let theta0 = 2.0;
        let k = [RbfParams::new(theta0, 0.01).unwrap()];
        let seeds = 200;
        let mut sums = vec![0.0; 50];
        for seed in 0..seeds {
            let f = &sample_basis_functions(&line(), &[50], &k, seed).unwrap()[0];
            for (s, v) in sums.iter_mut().zip(f.values()) {
                *s += v;
            }
        }
        let bound = 3.0 / (seeds as f64).sqrt() * theta0.sqrt();
        for s in sums {
            assert!((s / seeds as f64).abs() < bound);
        }
    }

    #[test]
    fn thinning_counts() {
        let d = line();
        let lambda = 0.5;
        let reps = 500;
        let expected = lambda * d.volume();
        let bound = 3.0 * (expected / reps as f64).sqrt();
        let mean_count = |accept: f64| {
            (0..reps)
                .map(|r| {
                    let mut rng = rng::stream_indexed(11, Stream::PointProcess, r);
                    thin_poisson(&d, lambda, |_| accept, &mut rng).len() as f64
                })
                .sum::<f64>()
                / reps as f64
        };
        assert!((mean_count(1.0) - expected).abs() < bound);
        assert!((mean_count(sigmoid(0.0)) - expected / 2.0).abs() < bound);
    }
}
