//! Clean sample generation and TV-epsilon replacement corruption.

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rand_distr::{Cauchy, ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetMeta, Points};
use crate::error::{domain_err, shape_err, Error, Result};
use crate::linalg::norm2;
use crate::rng::{seeded, Rng};

/// Largest contamination level accepted by [`corrupt`].
pub const MAX_EPS: f64 = 0.45;

/// Noise added to regression responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResponseNoise {
    Gaussian { scale: f64 },
    StudentT { dof: f64 },
}

impl ResponseNoise {
    fn draw(&self, rng: &mut Rng) -> f64 {
        match *self {
            Self::Gaussian { scale } => scale * rng.sample::<f64, _>(StandardNormal),
            Self::StudentT { dof } => {
                let z: f64 = rng.sample(StandardNormal);
                let w = ChiSquared::new(dof).expect("dof validated").sample(rng);
                z * (dof / w).sqrt()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Gaussian { scale } => scale * scale,
            Self::StudentT { dof } => dof / (dof - 2.0),
        }
    }
}

/// Distribution of clean samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CleanFamily {
    /// `N(mu, sigma^2 I)`.
    GaussianIso { mu: Vec<f64>, sigma: f64 },
    /// Elliptical multivariate t with identity scale matrix.
    StudentT { mu: Vec<f64>, dof: f64 },
    /// Independent Laplace coordinates.
    SubExpLaplace { mu: Vec<f64>, scale: f64 },
    /// `y = theta^T x + noise` with `x` drawn from `x_family`.
    LinearModel {
        theta: Vec<f64>,
        x_family: Box<CleanFamily>,
        noise: ResponseNoise,
    },
}

impl CleanFamily {
    pub fn gaussian(d: usize, sigma: f64) -> Self {
        Self::GaussianIso {
            mu: vec![0.0; d],
            sigma,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::GaussianIso { mu, .. } | Self::StudentT { mu, .. } | Self::SubExpLaplace { mu, .. } => mu.len(),
            Self::LinearModel { x_family, .. } => x_family.dim(),
        }
    }

    pub fn is_regression(&self) -> bool {
        matches!(self, Self::LinearModel { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::GaussianIso { sigma, .. } if !(*sigma > 0.0) => domain_err("sigma must be positive"),
            Self::StudentT { dof, .. } if !(*dof > 2.0) => {
                domain_err("Student-t needs dof > 2 for a finite covariance")
            }
            Self::SubExpLaplace { scale, .. } if !(*scale > 0.0) => domain_err("Laplace scale must be positive"),
            Self::LinearModel { theta, x_family, noise } => {
                if x_family.is_regression() {
                    return domain_err("covariate family cannot itself be a linear model");
                }
                x_family.validate()?;
                if theta.len() != x_family.dim() {
                    return shape_err("theta and covariate dimension differ");
                }
                match noise {
                    ResponseNoise::Gaussian { scale } if !(*scale > 0.0) => {
                        domain_err("noise scale must be positive")
                    }
                    ResponseNoise::StudentT { dof } if !(*dof > 2.0) => domain_err("noise dof must exceed 2"),
                    _ => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    /// Population mean of the covariates.
    pub fn mean(&self) -> Vec<f64> {
        match self {
            Self::GaussianIso { mu, .. } | Self::StudentT { mu, .. } | Self::SubExpLaplace { mu, .. } => mu.clone(),
            Self::LinearModel { x_family, .. } => x_family.mean(),
        }
    }

    /// Per-coordinate variance of the covariates (all families are isotropic).
    pub fn coordinate_variance(&self) -> f64 {
        match self {
            Self::GaussianIso { sigma, .. } => sigma * sigma,
            Self::StudentT { dof, .. } => dof / (dof - 2.0),
            Self::SubExpLaplace { scale, .. } => 2.0 * scale * scale,
            Self::LinearModel { x_family, .. } => x_family.coordinate_variance(),
        }
    }

    /// Population `E[x x^T]` of the covariates.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let mu = self.mean();
        let d = mu.len();
        let mut m = DMatrix::identity(d, d) * self.coordinate_variance();
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] += mu[i] * mu[j];
            }
        }
        m
    }

    pub fn is_gaussian_design(&self) -> bool {
        match self {
            Self::GaussianIso { .. } => true,
            Self::LinearModel { x_family, .. } => x_family.is_gaussian_design(),
            _ => false,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::GaussianIso { sigma, .. } => format!("gaussian(sigma={sigma})"),
            Self::StudentT { dof, .. } => format!("student_t(dof={dof})"),
            Self::SubExpLaplace { scale, .. } => format!("laplace(scale={scale})"),
            Self::LinearModel { x_family, noise, .. } => {
                format!("linear_model(x={}, noise={noise:?})", x_family.describe())
            }
        }
    }

    fn draw_point(&self, rng: &mut Rng, out: &mut [f64]) {
        match self {
            Self::GaussianIso { mu, sigma } => {
                for (o, m) in out.iter_mut().zip(mu) {
                    *o = m + sigma * rng.sample::<f64, _>(StandardNormal);
                }
            }
            Self::StudentT { mu, dof } => {
                let w = ChiSquared::new(*dof).expect("dof validated").sample(rng);
                let s = (dof / w).sqrt();
                for (o, m) in out.iter_mut().zip(mu) {
                    *o = m + s * rng.sample::<f64, _>(StandardNormal);
                }
            }
            Self::SubExpLaplace { mu, scale } => {
                for (o, m) in out.iter_mut().zip(mu) {
                    let u: f64 = rng.random::<f64>() - 0.5;
                    *o = m - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
                }
            }
            Self::LinearModel { x_family, .. } => x_family.draw_point(rng, out),
        }
    }
}

/// Draws `n` i.i.d. samples from `family` in dimension `d`.
pub fn sample_clean(family: &CleanFamily, n: usize, d: usize, seed: u64) -> Result<Dataset> {
    family.validate()?;
    if family.dim() != d {
        return shape_err(format!("family has dimension {}, requested {d}", family.dim()));
    }
    if n == 0 {
        return shape_err("sample size must be at least 1");
    }
    let mut rng = seeded(seed);
    let mut points = Points::zeros(n, d);
    let mut responses = family.is_regression().then(|| Vec::with_capacity(n));
    for i in 0..n {
        let row = points.row_mut(i);
        family.draw_point(&mut rng, row);
        if let (CleanFamily::LinearModel { theta, noise, .. }, Some(y)) = (family, responses.as_mut()) {
            let signal: f64 = theta.iter().zip(row.iter()).map(|(t, x)| t * x).sum();
            y.push(signal + noise.draw(&mut rng));
        }
    }
    Ok(Dataset {
        points,
        responses,
        corrupted_mask: Some(vec![false; n]),
        meta: DatasetMeta {
            seed: Some(seed),
            description: family.describe(),
        },
    })
}

/// Shape of the corruption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackKind {
    /// All corrupted rows sit at `mean_clean + magnitude * direction`
    /// (first axis when `direction` is absent).
    PointMass {
        #[serde(default)]
        direction: Option<Vec<f64>>,
        magnitude: f64,
    },
    /// Gaussian blob of radius `spread` centred `offset` along the first axis.
    Cluster { offset: f64, spread: f64 },
    /// Negates the responses of the corrupted rows (regression only).
    SignFlipResponses,
    /// Standard Cauchy coordinates around a centre `radius` along the first axis.
    MixtureTail { radius: f64 },
}

impl AttackKind {
    /// Scalar size of the attack for reporting (`R`), zero when it has none.
    pub fn magnitude(&self) -> f64 {
        match *self {
            Self::PointMass { magnitude, .. } => magnitude,
            Self::Cluster { offset, .. } => offset,
            Self::SignFlipResponses => 0.0,
            Self::MixtureTail { radius } => radius,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::PointMass { .. } => "point_mass",
            Self::Cluster { .. } => "cluster",
            Self::SignFlipResponses => "sign_flip",
            Self::MixtureTail { .. } => "mixture_tail",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub eps: f64,
}

/// Number of rows replaced at contamination level `eps`: `ceil(eps * n)`,
/// computed so that products such as `0.1 * 5000` are not pushed up by
/// rounding.
pub fn corrupted_count(eps: f64, n: usize) -> usize {
    let raw = eps * n as f64;
    let nearest = raw.round();
    if (raw - nearest).abs() <= 1e-9 * raw.max(1.0) {
        nearest as usize
    } else {
        raw.ceil() as usize
    }
}

/// Replaces exactly `ceil(eps n)` uniformly chosen rows according to
/// `attack`. Untouched rows are copied verbatim.
///
/// Point-mass, cluster and tail attacks on regression data move the
/// covariates and set the response of the corrupted rows to zero.
pub fn corrupt(clean: &Dataset, attack: &AttackSpec, seed: u64) -> Result<Dataset> {
    clean.validate()?;
    let eps = attack.eps;
    if !(0.0..=MAX_EPS).contains(&eps) {
        return domain_err(format!("contamination level must lie in [0, {MAX_EPS}], got {eps}"));
    }
    let n = clean.n();
    let d = clean.d();
    let count = corrupted_count(eps, n);
    if 2 * count > n {
        return domain_err(format!("{count} corrupted rows exceed half of n = {n}"));
    }
    if matches!(attack.kind, AttackKind::SignFlipResponses) && !clean.is_regression() {
        return Err(Error::Config("sign-flip attack needs a regression dataset".into()));
    }

    let mut out = clean.clone();
    let mut mask = clean.corrupted_mask.clone().unwrap_or_else(|| vec![false; n]);
    if count == 0 {
        out.corrupted_mask = Some(mask);
        return Ok(out);
    }

    let mut rng = seeded(seed);
    let mut chosen = sample_indices(&mut rng, n, count).into_vec();
    chosen.sort_unstable();
    let center = clean.points.column_means();
    let first_axis = |scale: f64| {
        let mut c = center.clone();
        c[0] += scale;
        c
    };

    match &attack.kind {
        AttackKind::PointMass { direction, magnitude } => {
            let dir = match direction {
                Some(v) => {
                    if v.len() != d {
                        return shape_err("attack direction has the wrong dimension");
                    }
                    let nv = norm2(v);
                    if nv == 0.0 {
                        return domain_err("attack direction must be nonzero");
                    }
                    v.iter().map(|x| x / nv).collect()
                }
                None => {
                    let mut e = vec![0.0; d];
                    e[0] = 1.0;
                    e
                }
            };
            let target: Vec<f64> = center.iter().zip(&dir).map(|(c, u)| c + magnitude * u).collect();
            for &i in &chosen {
                out.points.row_mut(i).copy_from_slice(&target);
            }
        }
        AttackKind::Cluster { offset, spread } => {
            let c = first_axis(*offset);
            for &i in &chosen {
                for (o, m) in out.points.row_mut(i).iter_mut().zip(&c) {
                    *o = m + spread * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
        AttackKind::MixtureTail { radius } => {
            let c = first_axis(*radius);
            let cauchy = Cauchy::new(0.0, 1.0).expect("valid Cauchy");
            for &i in &chosen {
                for (o, m) in out.points.row_mut(i).iter_mut().zip(&c) {
                    *o = m + cauchy.sample(&mut rng);
                }
            }
        }
        AttackKind::SignFlipResponses => {
            let y = out.responses.as_mut().expect("checked above");
            for &i in &chosen {
                y[i] = -y[i];
            }
        }
    }
    if !matches!(attack.kind, AttackKind::SignFlipResponses) {
        if let Some(y) = out.responses.as_mut() {
            for &i in &chosen {
                y[i] = 0.0;
            }
        }
    }
    for &i in &chosen {
        mask[i] = true;
    }
    out.corrupted_mask = Some(mask);
    out.meta.description = format!("{} + {}(eps={eps})", clean.meta.description, attack.kind.name());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dist2, least_squares};

    fn point_mass(eps: f64, r: f64) -> AttackSpec {
        AttackSpec {
            kind: AttackKind::PointMass {
                direction: None,
                magnitude: r,
            },
            eps,
        }
    }

    #[test]
    fn clean_shape_and_bookkeeping() {
        let ds = sample_clean(&CleanFamily::gaussian(2, 1.0), 4, 2, 7).unwrap();
        assert_eq!((ds.n(), ds.d()), (4, 2));
        assert_eq!(ds.corrupted_mask.as_deref(), Some(&[false; 4][..]));
        assert_eq!(ds.meta.seed, Some(7));
        assert!(sample_clean(&CleanFamily::gaussian(3, 1.0), 4, 2, 7).is_err());
    }

    #[test]
    fn clean_gaussian_mean_within_clt_band() {
        let mu = vec![1.5];
        let fam = CleanFamily::GaussianIso { mu: mu.clone(), sigma: 2.0 };
        let n = 100_000;
        let ds = sample_clean(&fam, n, 1, 11).unwrap();
        let m = ds.points.column_means()[0];
        assert!((m - 1.5).abs() <= 4.0 * 2.0 / (n as f64).sqrt(), "mean {m}");
    }

    #[test]
    fn clean_linear_model_ols_recovers_theta() {
        let theta = vec![1.0, -2.0, 0.5];
        let fam = CleanFamily::LinearModel {
            theta: theta.clone(),
            x_family: Box::new(CleanFamily::gaussian(3, 1.0)),
            noise: ResponseNoise::Gaussian { scale: 1.0 },
        };
        let ds = sample_clean(&fam, 100_000, 3, 5).unwrap();
        let (est, _) = least_squares(&ds.design(), &ds.response_vector().unwrap(), 1e-6).unwrap();
        assert!(dist2(est.as_slice(), &theta) <= 0.05);
    }

    #[test]
    fn heavy_tailed_families_have_expected_spread() {
        let n = 200_000;
        let t = sample_clean(&CleanFamily::StudentT { mu: vec![0.0], dof: 5.0 }, n, 1, 3).unwrap();
        let var_t = t.points.column(0).iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((var_t - 5.0 / 3.0).abs() < 0.1, "t variance {var_t}");
        let l = sample_clean(&CleanFamily::SubExpLaplace { mu: vec![0.0], scale: 1.0 }, n, 1, 3).unwrap();
        let var_l = l.points.column(0).iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((var_l - 2.0).abs() < 0.05, "laplace variance {var_l}");
    }

    #[test]
    fn zero_eps_is_identity() {
        let ds = sample_clean(&CleanFamily::gaussian(3, 1.0), 20, 3, 1).unwrap();
        let out = corrupt(&ds, &point_mass(0.0, 10.0), 2).unwrap();
        assert_eq!(out.points, ds.points);
        assert_eq!(out.corrupted_count(), 0);
    }

    #[test]
    fn point_mass_replaces_exact_count() {
        let ds = sample_clean(&CleanFamily::gaussian(3, 1.0), 10, 3, 1).unwrap();
        let out = corrupt(&ds, &point_mass(0.2, 5.0), 2).unwrap();
        assert_eq!(out.corrupted_count(), 2);
        let mut target = ds.points.column_means();
        target[0] += 5.0;
        let mask = out.corrupted_mask.as_ref().unwrap();
        for i in 0..10 {
            if mask[i] {
                assert_eq!(out.points.row(i), &target[..]);
            } else {
                assert_eq!(out.points.row(i), ds.points.row(i));
            }
        }
    }

    #[test]
    fn point_mass_shifts_the_empirical_mean_by_eps_r() {
        let d = 10;
        let ds = sample_clean(&CleanFamily::gaussian(d, 1.0), 5000, d, 9).unwrap();
        let out = corrupt(&ds, &point_mass(0.1, 100.0), 4).unwrap();
        let err = norm2(&out.points.column_means());
        assert!((err - 10.0).abs() <= 1.5, "mean error {err}");
    }

    #[test]
    fn count_is_not_inflated_by_rounding() {
        assert_eq!(corrupted_count(0.1, 5000), 500);
        assert_eq!(corrupted_count(0.2, 10), 2);
        assert_eq!(corrupted_count(0.05, 30), 2);
        assert_eq!(corrupted_count(0.0, 30), 0);
        assert_eq!(corrupted_count(0.45, 3), 2);
    }

    #[test]
    fn attack_validation() {
        let ds = sample_clean(&CleanFamily::gaussian(2, 1.0), 10, 2, 1).unwrap();
        assert!(corrupt(&ds, &point_mass(0.5, 1.0), 1).is_err());
        assert!(corrupt(&ds, &point_mass(-0.1, 1.0), 1).is_err());
        let flip = AttackSpec {
            kind: AttackKind::SignFlipResponses,
            eps: 0.1,
        };
        assert!(corrupt(&ds, &flip, 1).is_err());
    }

    #[test]
    fn sign_flip_negates_only_masked_responses() {
        let fam = CleanFamily::LinearModel {
            theta: vec![1.0, 1.0],
            x_family: Box::new(CleanFamily::gaussian(2, 1.0)),
            noise: ResponseNoise::Gaussian { scale: 0.5 },
        };
        let ds = sample_clean(&fam, 50, 2, 3).unwrap();
        let out = corrupt(&ds, &AttackSpec { kind: AttackKind::SignFlipResponses, eps: 0.1 }, 8).unwrap();
        let (y0, y1) = (ds.responses.unwrap(), out.responses.unwrap());
        let mask = out.corrupted_mask.unwrap();
        assert_eq!(mask.iter().filter(|&&b| b).count(), 5);
        for i in 0..50 {
            assert_eq!(y1[i], if mask[i] { -y0[i] } else { y0[i] });
        }
        assert_eq!(out.points, ds.points);
    }

    #[test]
    fn other_attacks_are_deterministic() {
        let ds = sample_clean(&CleanFamily::gaussian(3, 1.0), 40, 3, 1).unwrap();
        for kind in [
            AttackKind::Cluster { offset: 8.0, spread: 0.5 },
            AttackKind::MixtureTail { radius: 20.0 },
        ] {
            let spec = AttackSpec { kind, eps: 0.1 };
            let a = corrupt(&ds, &spec, 5).unwrap();
            let b = corrupt(&ds, &spec, 5).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.corrupted_count(), 4);
        }
    }
}
