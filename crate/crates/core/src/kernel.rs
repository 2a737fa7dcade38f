//! RBF base kernels, linear-model-of-coregionalization covariances and the
//! shared inducing grid.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};

/// `k(x, x') = theta0 * exp(-theta1 / 2 * |x - x'|^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfParams {
    pub theta0: f64,
    pub theta1: f64,
}

impl RbfParams {
    pub fn new(theta0: f64, theta1: f64) -> Result<Self> {
        if !(theta0 > 0.0 && theta1 > 0.0 && theta0.is_finite() && theta1.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "RBF parameters must be positive and finite, got ({theta0}, {theta1})"
            )));
        }
        Ok(RbfParams { theta0, theta1 })
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.theta0 * (-0.5 * self.theta1 * sq_dist(x, y)).exp()
    }
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn rbf(params: &RbfParams, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(params.eval(x, y))
}

/// Kernel parameters, mixing weights and regression noise variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmcHyperparams {
    /// One RBF kernel per basis function (Q of them).
    pub kernels: Vec<RbfParams>,
    /// Mixing weights, one row of length Q per task in global task order.
    pub weights: Vec<Vec<f64>>,
    /// One noise variance per regression task.
    pub noise_vars: Vec<f64>,
}

impl LmcHyperparams {
    pub fn new(
        kernels: Vec<RbfParams>,
        weights: Vec<Vec<f64>>,
        noise_vars: Vec<f64>,
    ) -> Result<Self> {
        let hyp = LmcHyperparams {
            kernels,
            weights,
            noise_vars,
        };
        hyp.check()?;
        Ok(hyp)
    }

    pub fn num_basis(&self) -> usize {
        self.kernels.len()
    }

    pub fn num_tasks(&self) -> usize {
        self.weights.len()
    }

    pub fn check(&self) -> Result<()> {
        if self.kernels.is_empty() {
            return Err(Error::InvalidArgument(
                "need at least one basis kernel".into(),
            ));
        }
        for k in &self.kernels {
            RbfParams::new(k.theta0, k.theta1)?;
        }
        let q = self.kernels.len();
        if let Some(row) = self.weights.iter().find(|r| r.len() != q) {
            return Err(Error::Dimension {
                expected: q,
                got: row.len(),
            });
        }
        if self.weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "mixing weights must be finite".into(),
            ));
        }
        if let Some(s) = self.noise_vars.iter().find(|s| s.is_nan() || **s <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise variances must be positive, got {s}"
            )));
        }
        Ok(())
    }

    /// Checks the layout against a dataset with `tasks` tasks of which
    /// `regression` are regression tasks.
    pub fn check_layout(&self, tasks: usize, regression: usize) -> Result<()> {
        self.check()?;
        if self.weights.len() != tasks {
            return Err(Error::Dimension {
                expected: tasks,
                got: self.weights.len(),
            });
        }
        if self.noise_vars.len() != regression {
            return Err(Error::Dimension {
                expected: regression,
                got: self.noise_vars.len(),
            });
        }
        Ok(())
    }

    /// `cov[g_i(x), g_j(x')] = Σ_q w_iq w_jq k_q(x, x')`.
    pub fn cross_cov(&self, i: usize, j: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        let n = self.num_tasks();
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::TaskIndex {
                    index: idx,
                    count: n,
                });
            }
        }
        if x.len() != y.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                got: y.len(),
            });
        }
        Ok(self.cross_cov_unchecked(i, j, x, y))
    }

    #[inline]
    pub(crate) fn cross_cov_unchecked(&self, i: usize, j: usize, x: &[f64], y: &[f64]) -> f64 {
        let (wi, wj) = (&self.weights[i], &self.weights[j]);
        self.kernels
            .iter()
            .enumerate()
            .map(|(q, k)| wi[q] * wj[q] * k.eval(x, y))
            .sum()
    }

    /// Prior variance of `g_i(x)`; constant for stationary kernels.
    pub fn task_variance(&self, i: usize) -> f64 {
        self.kernels
            .iter()
            .zip(&self.weights[i])
            .map(|(k, w)| w * w * k.theta0)
            .sum()
    }

    /// Flips each basis column so its first nonzero weight is positive.
    /// `w_q` and `-w_q` give the same covariance.
    pub fn canonicalize_signs(&mut self) {
        for q in 0..self.num_basis() {
            let first = self.weights.iter().map(|r| r[q]).find(|w| *w != 0.0);
            if first.is_some_and(|w| w < 0.0) {
                for row in &mut self.weights {
                    row[q] = -row[q];
                }
            }
        }
    }
}

/// Diagonal jitter schedule: start at `initial` times the mean diagonal and
/// multiply by ten until `max` before giving up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterPolicy {
    pub initial: f64,
    pub max: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy {
            initial: 1e-6,
            max: 1e-2,
        }
    }
}

impl JitterPolicy {
    pub fn starting_at(initial: f64) -> Self {
        JitterPolicy {
            initial,
            ..Default::default()
        }
    }

    fn schedule(&self) -> impl Iterator<Item = f64> + '_ {
        let mut next = Some(self.initial);
        std::iter::from_fn(move || {
            let cur = next?;
            let following = if cur == 0.0 { 1e-6 } else { cur * 10.0 };
            next = (following <= self.max * (1.0 + 1e-12)).then_some(following);
            Some(cur)
        })
    }
}

/// Cholesky factor of `a + rel * mean(diag(a)) * I` for the first relative
/// jitter in the schedule that succeeds. Returns the factor and the relative
/// jitter that worked.
pub fn cholesky_with_jitter(
    a: &DMatrix<f64>,
    policy: &JitterPolicy,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = a.nrows();
    let mean_diag = if n == 0 {
        1.0
    } else {
        a.diagonal().mean().abs().max(1e-300)
    };
    let mut last = policy.initial;
    for rel in policy.schedule() {
        last = rel;
        let mut m = a.clone();
        if rel > 0.0 {
            for k in 0..n {
                m[(k, k)] += rel * mean_diag;
            }
        }
        if let Some(ch) = Cholesky::new(m) {
            return Ok((ch, rel));
        }
    }
    Err(Error::Cholesky {
        jitter: last * mean_diag,
    })
}

/// `log |A|` from a Cholesky factor.
pub fn log_det(ch: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Uniform inducing lattice shared by all tasks with its block prior
/// covariance and Cholesky factors.
#[derive(Debug, Clone)]
pub struct InducingGrid {
    domain: Domain,
    counts: Vec<usize>,
    points: Vec<Vec<f64>>,
    hyp: LmcHyperparams,
    /// Σ_q (w_q w_qᵀ) ⊗ K_q, without jitter.
    k_mm: DMatrix<f64>,
    jitter_rel: f64,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    block_chols: Vec<Cholesky<f64, Dyn>>,
}

/// Evaluates `K_q` on a point set for each basis kernel.
fn basis_matrices(hyp: &LmcHyperparams, points: &[Vec<f64>]) -> Vec<DMatrix<f64>> {
    let m = points.len();
    hyp.kernels
        .iter()
        .map(|k| DMatrix::from_fn(m, m, |a, b| k.eval(&points[a], &points[b])))
        .collect()
}

/// Shared-input LMC covariance `Σ_q (w_q w_qᵀ) ⊗ K_q`.
pub fn kronecker_covariance(hyp: &LmcHyperparams, points: &[Vec<f64>]) -> DMatrix<f64> {
    let m = points.len();
    let tasks = hyp.num_tasks();
    let base = basis_matrices(hyp, points);
    let mut k = DMatrix::zeros(m * tasks, m * tasks);
    for (q, kq) in base.iter().enumerate() {
        for i in 0..tasks {
            for j in 0..tasks {
                let c = hyp.weights[i][q] * hyp.weights[j][q];
                if c == 0.0 {
                    continue;
                }
                let mut block = k.view_mut((i * m, j * m), (m, m));
                block.zip_apply(kq, |dst, src| *dst += c * src);
            }
        }
    }
    k
}

impl InducingGrid {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Number of inducing inputs M.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn num_tasks(&self) -> usize {
        self.hyp.num_tasks()
    }

    pub fn hyperparams(&self) -> &LmcHyperparams {
        &self.hyp
    }

    /// Noise variances do not enter the prior covariance, so they can be
    /// replaced without refactoring.
    pub fn set_noise_vars(&mut self, noise_vars: Vec<f64>) {
        self.hyp.noise_vars = noise_vars;
    }

    pub fn k_mm(&self) -> &DMatrix<f64> {
        &self.k_mm
    }

    /// `K_mm + jitter I`, the prior covariance actually used.
    pub fn k_mm_jittered(&self) -> DMatrix<f64> {
        let mut k = self.k_mm.clone();
        for d in 0..k.nrows() {
            k[(d, d)] += self.jitter;
        }
        k
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn jitter_rel(&self) -> f64 {
        self.jitter_rel
    }

    pub fn chol(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    pub fn block_chol(&self, task: usize) -> &Cholesky<f64, Dyn> {
        &self.block_chols[task]
    }

    /// Diagonal block `K^i_mm + jitter I` of task `i`.
    pub fn block(&self, task: usize) -> DMatrix<f64> {
        let m = self.len();
        let mut b = self.k_mm.view((task * m, task * m), (m, m)).into_owned();
        for d in 0..m {
            b[(d, d)] += self.jitter;
        }
        b
    }

    /// Same lattice, new hyperparameters. The jitter search starts from this
    /// grid's level.
    pub fn with_hyperparams(&self, hyp: LmcHyperparams) -> Result<Self> {
        let policy = JitterPolicy::starting_at(self.jitter_rel);
        Self::assemble(
            self.domain.clone(),
            self.counts.clone(),
            self.points.clone(),
            hyp,
            &policy,
        )
    }

    fn assemble(
        domain: Domain,
        counts: Vec<usize>,
        points: Vec<Vec<f64>>,
        hyp: LmcHyperparams,
        policy: &JitterPolicy,
    ) -> Result<Self> {
        hyp.check()?;
        let k_mm = kronecker_covariance(&hyp, &points);
        let (chol, jitter_rel) = cholesky_with_jitter(&k_mm, policy)?;
        let mean_diag = if k_mm.nrows() == 0 {
            1.0
        } else {
            k_mm.diagonal().mean().abs().max(1e-300)
        };
        let jitter = jitter_rel * mean_diag;
        let m = points.len();
        let mut block_chols = Vec::with_capacity(hyp.num_tasks());
        for i in 0..hyp.num_tasks() {
            let mut b = k_mm.view((i * m, i * m), (m, m)).into_owned();
            for d in 0..m {
                b[(d, d)] += jitter;
            }
            // A principal block of a PD matrix is PD, but an all-zero weight
            // row can still leave a block at exactly `jitter` (or zero).
            let ch = Cholesky::new(b).ok_or(Error::Cholesky { jitter })?;
            block_chols.push(ch);
        }
        Ok(InducingGrid {
            domain,
            counts,
            points,
            hyp,
            k_mm,
            jitter_rel,
            jitter,
            chol,
            block_chols,
        })
    }

    /// `k^i(x_m, x)` for each inducing input, as an M×N matrix over `xs`.
    pub fn task_cross(&self, task: usize, xs: &[Vec<f64>]) -> DMatrix<f64> {
        let m = self.len();
        let w = &self.hyp.weights[task];
        let coef: Vec<f64> = w.iter().map(|v| v * v).collect();
        DMatrix::from_fn(m, xs.len(), |a, n| {
            self.hyp
                .kernels
                .iter()
                .zip(&coef)
                .map(|(k, c)| c * k.eval(&self.points[a], &xs[n]))
                .sum()
        })
    }
}

/// Builds the endpoint-inclusive inducing lattice and factors its covariance.
pub fn build_inducing_grid(
    domain: &Domain,
    counts: &[usize],
    hyp: &LmcHyperparams,
    jitter: &JitterPolicy,
) -> Result<InducingGrid> {
    if counts.iter().any(|&c| c < 2) {
        return Err(Error::InvalidArgument(
            "inducing grid needs at least 2 points per dimension".into(),
        ));
    }
    let points = domain.lattice(counts)?;
    InducingGrid::assemble(domain.clone(), counts.to_vec(), points, hyp.clone(), jitter)
}

/// Solves `(K_mm + jitter I) X = B`.
pub fn chol_solve(grid: &InducingGrid, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = grid.chol.l_dirty().nrows();
    if b.nrows() != n {
        return Err(Error::Dimension {
            expected: n,
            got: b.nrows(),
        });
    }
    Ok(grid.chol.solve(b))
}

/// Solves against task `i`'s diagonal block `K^i_mm + jitter I`.
pub fn block_solve(grid: &InducingGrid, task: usize, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if task >= grid.num_tasks() {
        return Err(Error::TaskIndex {
            index: task,
            count: grid.num_tasks(),
        });
    }
    if b.nrows() != grid.len() {
        return Err(Error::Dimension {
            expected: grid.len(),
            got: b.nrows(),
        });
    }
    Ok(grid.block_chols[task].solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn hyp_two_tasks() -> LmcHyperparams {
        LmcHyperparams::new(
            vec![
                RbfParams::new(1.0, 0.01).unwrap(),
                RbfParams::new(2.0, 0.1).unwrap(),
            ],
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
            vec![0.1],
        )
        .unwrap()
    }

    #[test]
    fn rbf_values() {
        let p = RbfParams::new(1.0, 0.001).unwrap();
        assert_eq!(rbf(&p, &[3.0], &[3.0]).unwrap(), 1.0);
        let p = RbfParams::new(2.0, 0.1).unwrap();
        assert_relative_eq!(
            rbf(&p, &[0.0], &[1.0]).unwrap(),
            2.0 * (-0.05f64).exp(),
            epsilon = 1e-15
        );
        assert_eq!(
            rbf(&p, &[0.3, 1.0], &[2.0, -1.0]).unwrap(),
            rbf(&p, &[2.0, -1.0], &[0.3, 1.0]).unwrap()
        );
        assert!(rbf(&p, &[0.0], &[0.0, 1.0]).is_err());
        assert!(RbfParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn cross_cov_values() {
        let h = LmcHyperparams::new(
            vec![RbfParams::new(1.5, 0.2).unwrap()],
            vec![vec![1.0], vec![1.0]],
            vec![],
        )
        .unwrap();
        assert_eq!(
            h.cross_cov(0, 1, &[1.0], &[2.0]).unwrap(),
            h.kernels[0].eval(&[1.0], &[2.0])
        );
        let h = LmcHyperparams::new(
            vec![
                RbfParams::new(1.0, 0.001).unwrap(),
                RbfParams::new(1.0, 0.001).unwrap(),
            ],
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
            vec![],
        )
        .unwrap();
        assert_relative_eq!(
            h.cross_cov(0, 1, &[4.0], &[4.0]).unwrap(),
            0.18,
            epsilon = 1e-15
        );
        assert_eq!(
            h.cross_cov(0, 1, &[1.0], &[7.0]).unwrap(),
            h.cross_cov(1, 0, &[7.0], &[1.0]).unwrap()
        );
        assert!(matches!(
            h.cross_cov(0, 2, &[0.0], &[0.0]),
            Err(Error::TaskIndex { index: 2, .. })
        ));
    }

    #[test]
    fn lattice_spacing() {
        let d = Domain::interval(0.0, 100.0).unwrap();
        let h = hyp_two_tasks();
        let g = build_inducing_grid(&d, &[30], &h, &JitterPolicy::default()).unwrap();
        assert_eq!(g.len(), 30);
        assert_eq!(g.points()[0], vec![0.0]);
        assert_eq!(g.points()[29], vec![100.0]);
        assert_relative_eq!(g.points()[1][0], 100.0 / 29.0, epsilon = 1e-12);

        let d2 = Domain::new(vec![0.0, 0.0], vec![100.0, 50.0]).unwrap();
        let g2 = build_inducing_grid(&d2, &[10, 5], &h, &JitterPolicy::default()).unwrap();
        assert_eq!(g2.len(), 50);
        assert_eq!(g2.k_mm().nrows(), 100);
        assert!(build_inducing_grid(&d, &[1], &h, &JitterPolicy::default()).is_err());
    }

    #[test]
    fn rank_deficient_kronecker_rescued_by_jitter() {
        let d = Domain::interval(0.0, 10.0).unwrap();
        let h = LmcHyperparams::new(
            vec![RbfParams::new(1.0, 1.0).unwrap()],
            vec![vec![1.0], vec![1.0]],
            vec![],
        )
        .unwrap();
        let g = build_inducing_grid(&d, &[8], &h, &JitterPolicy::starting_at(0.0)).unwrap();
        let m = 8;
        let k = g.k_mm();
        for a in 0..m {
            for b in 0..m {
                assert_eq!(k[(a, b)], k[(a + m, b)]);
                assert_eq!(k[(a, b)], k[(a + m, b + m)]);
            }
        }
        assert!(g.jitter_rel() > 0.0);
    }

    #[test]
    fn solve_against_dense_inverse() {
        let d = Domain::interval(0.0, 20.0).unwrap();
        // short lengthscales keep the dense inverse itself accurate
        let h = LmcHyperparams::new(
            vec![
                RbfParams::new(1.0, 1.0).unwrap(),
                RbfParams::new(2.0, 0.5).unwrap(),
            ],
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
            vec![0.1],
        )
        .unwrap();
        let g = build_inducing_grid(&d, &[15], &h, &JitterPolicy::default()).unwrap();
        let kj = g.k_mm_jittered();
        let x = chol_solve(&g, &kj).unwrap();
        assert!((x - DMatrix::identity(30, 30)).abs().max() < 1e-6);
        let zero = chol_solve(&g, &DMatrix::zeros(30, 2)).unwrap();
        assert_eq!(zero.abs().max(), 0.0);
        let b = DMatrix::from_fn(30, 3, |a, c| ((a * 7 + c * 3) % 11) as f64 - 5.0);
        let dense = kj.clone().try_inverse().unwrap() * &b;
        let got = chol_solve(&g, &b).unwrap();
        assert!((dense - got).abs().max() < 1e-8);
        assert!(chol_solve(&g, &DMatrix::zeros(29, 1)).is_err());
        assert!(block_solve(&g, 0, &DMatrix::zeros(15, 1)).is_ok());
        assert!(block_solve(&g, 2, &DMatrix::zeros(15, 1)).is_err());
    }

    #[test]
    fn canonical_signs() {
        let mut h = hyp_two_tasks();
        h.weights = vec![vec![-0.9, 0.0], vec![0.1, -0.9]];
        h.canonicalize_signs();
        assert_eq!(h.weights, vec![vec![0.9, 0.0], vec![-0.1, 0.9]]);
    }

    fn arb_setup() -> impl Strategy<Value = (LmcHyperparams, Vec<Vec<f64>>)> {
        (1usize..3, 1usize..4, 2usize..8).prop_flat_map(|(q, tasks, m)| {
            (
                proptest::collection::vec((0.1f64..3.0, 0.01f64..2.0), q),
                proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, q), tasks),
                proptest::collection::vec(proptest::collection::vec(0.0f64..10.0, 2), m),
            )
                .prop_map(|(ks, w, pts)| {
                    let kernels = ks
                        .into_iter()
                        .map(|(a, b)| RbfParams::new(a, b).unwrap())
                        .collect();
                    (LmcHyperparams::new(kernels, w, vec![]).unwrap(), pts)
                })
        })
    }

    proptest! {
        #[test]
        fn kronecker_matches_blockwise((h, pts) in arb_setup()) {
            let k = kronecker_covariance(&h, &pts);
            let m = pts.len();
            for i in 0..h.num_tasks() {
                for j in 0..h.num_tasks() {
                    for a in 0..m {
                        for b in 0..m {
                            let direct = h.cross_cov(i, j, &pts[a], &pts[b]).unwrap();
                            prop_assert!((k[(i * m + a, j * m + b)] - direct).abs() < 1e-12);
                        }
                    }
                }
            }
        }

        #[test]
        fn covariance_is_psd((h, pts) in arb_setup()) {
            let k = kronecker_covariance(&h, &pts);
            prop_assert!((&k - k.transpose()).abs().max() == 0.0);
            let eig = k.symmetric_eigen().eigenvalues;
            let max = eig.max().max(0.0);
            prop_assert!(eig.min() >= -1e-8 * max.max(1e-300));
        }

        #[test]
        fn weight_scaling_is_quadratic((h, pts) in arb_setup(), s in -3.0f64..3.0) {
            let mut hs = h.clone();
            for row in &mut hs.weights {
                for w in row.iter_mut() {
                    *w *= s;
                }
            }
            let k = kronecker_covariance(&h, &pts);
            let ks = kronecker_covariance(&hs, &pts);
            let diff = (ks - k * (s * s)).abs().max();
            prop_assert!(diff <= 1e-12 * (1.0 + s * s));
        }
    }
}
