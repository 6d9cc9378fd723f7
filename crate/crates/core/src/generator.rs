//! Parametric candidate distributions with reparameterized sampling and
//! pathwise gradients of discriminator expectations.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetMeta, Points};
use crate::discriminator::{DiscriminatorParams, FeatureFamily, Readout};
use crate::error::{shape_err, Result};
use crate::rng::seeded;

/// Smallest allowed diagonal entry of a second-moment factor.
pub const DIAG_FLOOR: f64 = 1e-8;
/// Smallest allowed regression noise scale.
pub const NOISE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Mean,
    SecondMoment,
    Regression,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::SecondMoment => "second_moment",
            Self::Regression => "regression",
        }
    }
}

/// A point estimate: a vector (mean, regression coefficients) or a matrix
/// (second moment).
#[derive(Debug, Clone, PartialEq)]
pub enum Estimate {
    Vector(Vec<f64>),
    Matrix(DMatrix<f64>),
}

impl Estimate {
    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Self::Vector(v) => Some(v),
            Self::Matrix(_) => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            Self::Matrix(m) => Some(m),
            Self::Vector(_) => None,
        }
    }

    /// Entries, row-major for matrices.
    pub fn to_flat(&self) -> Vec<f64> {
        match self {
            Self::Vector(v) => v.clone(),
            Self::Matrix(m) => m.transpose().as_slice().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum GeneratorParams {
    /// `q = N(theta, I)`.
    Mean { theta: Vec<f64> },
    /// `q = law of L z`, `L` lower triangular stored row-major `d x d`.
    SecondMoment { l: Vec<f64>, d: usize },
    /// `x` from the pool, `y = theta^T x + noise_scale * z`.
    Regression { theta: Vec<f64>, noise_scale: f64 },
}

impl GeneratorParams {
    pub fn task(&self) -> Task {
        match self {
            Self::Mean { .. } => Task::Mean,
            Self::SecondMoment { .. } => Task::SecondMoment,
            Self::Regression { .. } => Task::Regression,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Mean { theta } | Self::Regression { theta, .. } => theta.len(),
            Self::SecondMoment { d, .. } => *d,
        }
    }

    /// Second-moment generator from a lower-triangular factor.
    pub fn from_factor(l: &DMatrix<f64>) -> Result<Self> {
        if !l.is_square() {
            return shape_err("factor must be square");
        }
        let d = l.nrows();
        let mut flat = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                flat[i * d + j] = l[(i, j)];
            }
        }
        let mut p = Self::SecondMoment { l: flat, d };
        p.project();
        Ok(p)
    }

    pub fn factor(&self) -> Option<DMatrix<f64>> {
        match self {
            Self::SecondMoment { l, d } => Some(DMatrix::from_row_slice(*d, *d, l)),
            _ => None,
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        match self {
            Self::Mean { theta } => theta.clone(),
            Self::SecondMoment { l, .. } => l.clone(),
            Self::Regression { theta, noise_scale } => {
                let mut v = theta.clone();
                v.push(*noise_scale);
                v
            }
        }
    }

    pub fn set_flat(&mut self, src: &[f64]) {
        match self {
            Self::Mean { theta } => theta.copy_from_slice(src),
            Self::SecondMoment { l, .. } => l.copy_from_slice(src),
            Self::Regression { theta, noise_scale } => {
                let d = theta.len();
                theta.copy_from_slice(&src[..d]);
                *noise_scale = src[d];
            }
        }
    }

    /// Keeps `L` lower triangular with diagonal at least [`DIAG_FLOOR`] and
    /// the noise scale at least [`NOISE_FLOOR`].
    pub fn project(&mut self) {
        match self {
            Self::Mean { .. } => {}
            Self::SecondMoment { l, d } => {
                let d = *d;
                for i in 0..d {
                    for j in i + 1..d {
                        l[i * d + j] = 0.0;
                    }
                    l[i * d + i] = l[i * d + i].max(DIAG_FLOOR);
                }
            }
            Self::Regression { noise_scale, .. } => *noise_scale = noise_scale.max(NOISE_FLOOR),
        }
    }
}

/// Base noise shared by every generator evaluation within one optimization
/// run. `z` is `m x d` for the mean and second-moment tasks and `m x 1` for
/// regression, where `x` holds the covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePool {
    pub z: Points,
    pub x: Option<Points>,
}

/// `m` standard-normal rows in dimension `d`, drawn in antithetic pairs
/// (so the pool mean is exactly zero) and whitened to unit second moment
/// when `m > d`.
fn balanced_normal(m: usize, d: usize, seed: u64) -> Points {
    let mut rng = seeded(seed);
    let mut z = Points::zeros(m, d);
    for i in 0..m / 2 {
        for j in 0..d {
            let v: f64 = rng.sample(StandardNormal);
            z.row_mut(2 * i)[j] = v;
            z.row_mut(2 * i + 1)[j] = -v;
        }
    }
    // An odd pool keeps a zero row last.
    if m > d + 1 {
        let mat = z.to_matrix();
        let s = mat.transpose() * &mat / m as f64;
        let eig = s.symmetric_eigen();
        let min = eig.eigenvalues.min();
        if min > 1e-8 * eig.eigenvalues.max() {
            let inv_sqrt = DVector::from_iterator(d, eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()));
            let w = &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
            let white = mat * w;
            for i in 0..m {
                for j in 0..d {
                    z.row_mut(i)[j] = white[(i, j)];
                }
            }
        }
    }
    z
}

impl NoisePool {
    /// Gaussian pool for the mean and second-moment generators.
    pub fn gaussian(m: usize, d: usize, seed: u64) -> Result<Self> {
        if m == 0 || d == 0 {
            return shape_err("pool needs at least one row and column");
        }
        Ok(Self {
            z: balanced_normal(m, d, seed),
            x: None,
        })
    }

    /// Regression pool: covariates taken from `data` (a seeded shuffle,
    /// cycled when `m > n`) and one noise column.
    pub fn regression(data: &Dataset, m: usize, seed: u64) -> Result<Self> {
        if m == 0 || data.n() == 0 {
            return shape_err("pool needs at least one row");
        }
        let mut order: Vec<usize> = (0..data.n()).collect();
        order.shuffle(&mut seeded(seed ^ 0xC0_7A_81));
        let idx: Vec<usize> = (0..m).map(|i| order[i % order.len()]).collect();
        Ok(Self {
            z: balanced_normal(m, 1, seed),
            x: Some(data.points.select(&idx)),
        })
    }

    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.nrows() == 0
    }

    fn check(&self, params: &GeneratorParams) -> Result<()> {
        let ok = match params {
            GeneratorParams::Mean { theta } => self.x.is_none() && self.z.ncols() == theta.len(),
            GeneratorParams::SecondMoment { d, l } => self.x.is_none() && self.z.ncols() == *d && l.len() == d * d,
            GeneratorParams::Regression { theta, .. } => {
                self.z.ncols() == 1 && self.x.as_ref().is_some_and(|x| x.ncols() == theta.len())
            }
        };
        if ok {
            Ok(())
        } else {
            shape_err("noise pool does not match the generator")
        }
    }
}

/// Samples of the candidate distribution on the fixed pool.
pub fn generate(params: &GeneratorParams, pool: &NoisePool) -> Result<Dataset> {
    pool.check(params)?;
    let m = pool.len();
    let meta = DatasetMeta {
        seed: None,
        description: format!("generated:{}", params.task().name()),
    };
    let ds = match params {
        GeneratorParams::Mean { theta } => {
            let mut pts = pool.z.clone();
            for i in 0..m {
                for (x, t) in pts.row_mut(i).iter_mut().zip(theta) {
                    *x += t;
                }
            }
            Dataset {
                points: pts,
                responses: None,
                corrupted_mask: None,
                meta,
            }
        }
        GeneratorParams::SecondMoment { l, d } => {
            let d = *d;
            let mut pts = Points::zeros(m, d);
            for i in 0..m {
                let z = pool.z.row(i);
                let out = pts.row_mut(i);
                for (r, o) in out.iter_mut().enumerate() {
                    *o = (0..=r).map(|c| l[r * d + c] * z[c]).sum();
                }
            }
            Dataset {
                points: pts,
                responses: None,
                corrupted_mask: None,
                meta,
            }
        }
        GeneratorParams::Regression { theta, noise_scale } => {
            let x = pool.x.as_ref().expect("checked");
            let y = (0..m)
                .map(|i| crate::linalg::dot(theta, x.row(i)) + noise_scale * pool.z.row(i)[0])
                .collect();
            Dataset {
                points: x.clone(),
                responses: Some(y),
                corrupted_mask: None,
                meta,
            }
        }
    };
    Ok(ds)
}

/// Batch mean of the discriminator readout over generated samples and its
/// pathwise gradient with respect to the generator parameters.
pub fn generator_grad(
    params: &GeneratorParams,
    pool: &NoisePool,
    disc: &DiscriminatorParams,
    family: FeatureFamily,
    readout: Readout,
) -> Result<(f64, GeneratorParams)> {
    let samples = generate(params, pool)?;
    crate::discriminator::check_batch(disc, family, &samples)?;
    let m = pool.len();
    let d = params.dim();
    let inv = 1.0 / m as f64;
    let mut grad = params.clone();
    grad.set_flat(&vec![0.0; params.to_flat().len()]);
    let mut gx = vec![0.0; d];
    let mut value = 0.0;
    for i in 0..m {
        let x = samples.points.row(i);
        let y = samples.response(i);
        let (val, gy) = disc.input_grad(family, x, y, readout, &mut gx);
        value += inv * val;
        match (&mut grad, params) {
            (GeneratorParams::Mean { theta: g }, _) => {
                for (gi, v) in g.iter_mut().zip(&gx) {
                    *gi += inv * v;
                }
            }
            (GeneratorParams::SecondMoment { l: g, .. }, _) => {
                let z = pool.z.row(i);
                for r in 0..d {
                    let c = inv * gx[r];
                    if c != 0.0 {
                        for k in 0..=r {
                            g[r * d + k] += c * z[k];
                        }
                    }
                }
            }
            (GeneratorParams::Regression { theta: g, noise_scale: gs }, _) => {
                let c = inv * gy;
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi += c * xi;
                }
                *gs += c * pool.z.row(i)[0];
            }
        }
    }
    Ok((value, grad))
}

/// The task estimate implied by the candidate distribution.
pub fn extract_estimate(params: &GeneratorParams) -> Estimate {
    match params {
        GeneratorParams::Mean { theta } | GeneratorParams::Regression { theta, .. } => Estimate::Vector(theta.clone()),
        GeneratorParams::SecondMoment { .. } => {
            let l = params.factor().expect("second-moment generator");
            let m = &l * l.transpose();
            // Symmetrize away rounding.
            Estimate::Matrix((&m + m.transpose()) * 0.5)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discriminator::OneLayerParams;
    use crate::rng::seeded;

    #[test]
    fn identity_generators_reproduce_pool() {
        let pool = NoisePool::gaussian(6, 3, 1).unwrap();
        let g = generate(&GeneratorParams::Mean { theta: vec![0.0; 3] }, &pool).unwrap();
        assert_eq!(g.points, pool.z);
        let eye = GeneratorParams::from_factor(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(generate(&eye, &pool).unwrap().points, pool.z);
        let zero = NoisePool {
            z: Points::zeros(1, 3),
            x: None,
        };
        let g = generate(&GeneratorParams::Mean { theta: vec![1.0; 3] }, &zero).unwrap();
        assert_eq!(g.points.row(0), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn pool_is_balanced() {
        let pool = NoisePool::gaussian(1000, 4, 7).unwrap();
        let means = pool.z.column_means();
        assert!(means.iter().all(|m| m.abs() < 1e-15));
        let mat = pool.z.to_matrix();
        let s = mat.transpose() * &mat / 1000.0;
        assert!((s - DMatrix::identity(4, 4)).amax() < 1e-12);
        let theta = vec![1.0, -2.0, 0.5, 3.0];
        let g = generate(&GeneratorParams::Mean { theta: theta.clone() }, &pool).unwrap();
        for (m, t) in g.points.column_means().iter().zip(&theta) {
            assert!((m - t).abs() < 1e-14);
        }
    }

    #[test]
    fn estimates() {
        assert_eq!(
            extract_estimate(&GeneratorParams::Mean { theta: vec![2.0, 3.0] }),
            Estimate::Vector(vec![2.0, 3.0])
        );
        let eye = GeneratorParams::from_factor(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(extract_estimate(&eye).as_matrix().unwrap(), &DMatrix::identity(2, 2));
        let l = GeneratorParams::from_factor(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]))).unwrap();
        assert_eq!(
            extract_estimate(&l).as_matrix().unwrap(),
            &DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]))
        );
    }

    #[test]
    fn midpoint_gradient() {
        let pool = NoisePool {
            z: Points::zeros(1, 3),
            x: None,
        };
        let disc = DiscriminatorParams::OneLayer(OneLayerParams {
            v: vec![1.0, 0.0, 0.0],
            v2: vec![],
            t: 0.0,
        });
        let (_, g) = generator_grad(&GeneratorParams::Mean { theta: vec![0.0; 3] }, &pool, &disc, FeatureFamily::Mean, Readout::Prob).unwrap();
        assert_eq!(g.to_flat(), vec![0.25, 0.0, 0.0]);

        let mut rng = seeded(3);
        let DiscriminatorParams::TwoLayer(mut two) = DiscriminatorParams::random(FeatureFamily::Mean, 3, Some(4), None, &mut rng) else {
            unreachable!()
        };
        two.w = vec![0.0; 4];
        let pool = NoisePool::gaussian(10, 3, 2).unwrap();
        let (_, g) = generator_grad(
            &GeneratorParams::Mean { theta: vec![0.3; 3] },
            &pool,
            &DiscriminatorParams::TwoLayer(two),
            FeatureFamily::Mean,
            Readout::Prob,
        )
        .unwrap();
        assert!(g.to_flat().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn projection_keeps_factor_lower_triangular() {
        let mut p = GeneratorParams::SecondMoment {
            l: vec![-1.0, 5.0, 2.0, 0.0],
            d: 2,
        };
        p.project();
        assert_eq!(p.to_flat(), vec![DIAG_FLOOR, 0.0, 2.0, DIAG_FLOOR]);
        let m = extract_estimate(&p);
        let m = m.as_matrix().unwrap();
        assert_eq!(m, &m.transpose());
        assert!(m.clone().symmetric_eigenvalues().min() >= -1e-10);
    }

    #[test]
    fn regression_pool_uses_observed_covariates() {
        let data = Dataset::with_responses(Points::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 3.0]]).unwrap(), vec![0.0; 3]).unwrap();
        let pool = NoisePool::regression(&data, 3, 5).unwrap();
        let mut rows: Vec<Vec<f64>> = pool.x.as_ref().unwrap().rows().map(<[f64]>::to_vec).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rows, vec![vec![0.0, 2.0], vec![1.0, 0.0], vec![3.0, 3.0]]);
        let p = GeneratorParams::Regression {
            theta: vec![1.0, 1.0],
            noise_scale: 0.0,
        };
        let g = generate(&p, &pool).unwrap();
        for i in 0..3 {
            assert_eq!(g.response(i), g.points.row(i).iter().sum::<f64>());
        }
        assert!(generate(&GeneratorParams::Mean { theta: vec![0.0; 2] }, &pool).is_err());
    }
}
