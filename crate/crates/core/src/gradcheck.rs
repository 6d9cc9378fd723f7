//! Central finite-difference checks of the analytic discriminator and
//! generator gradients.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::dataset::{Dataset, DatasetMeta, Points};
use crate::discriminator::{grad_params, DiscriminatorParams, FeatureFamily, Readout};
use crate::error::Result;
use crate::generator::{generate, generator_grad, GeneratorParams, NoisePool};
use crate::rng::{derive_seed, seeded, Rng};

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-5;
/// Gradients smaller than this in every coordinate are compared absolutely.
const NORM_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckRow {
    /// `discriminator` or `generator`.
    pub target: String,
    pub layers: usize,
    pub family: String,
    pub readout: String,
    pub instances: usize,
    pub max_rel_err: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub rows: Vec<GradCheckRow>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

/// `|a - f|_inf / max(|a|_inf, |f|_inf)`.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = analytic.iter().zip(numeric).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    diff / inf(analytic).max(inf(numeric)).max(NORM_FLOOR)
}

/// Central differences of `f` at `x`.
pub fn central_diff(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + FD_STEP;
            let hi = f(&probe);
            probe[i] = x[i] - FD_STEP;
            let lo = f(&probe);
            probe[i] = x[i];
            (hi - lo) / (2.0 * FD_STEP)
        })
        .collect()
}

fn families() -> [FeatureFamily; 3] {
    [
        FeatureFamily::Mean,
        FeatureFamily::SecondMoment,
        FeatureFamily::Regression { radius: 2.0 },
    ]
}

fn readout_name(r: Readout) -> &'static str {
    match r {
        Readout::Prob => "prob",
        Readout::LogProb => "log_prob",
        Readout::LogOneMinusProb => "log_one_minus_prob",
    }
}

fn random_batch(rng: &mut Rng, n: usize, d: usize, regression: bool) -> Dataset {
    let flat: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    let responses = regression.then(|| (0..n).map(|_| rng.sample(StandardNormal)).collect());
    Dataset {
        points: Points::from_flat(n, d, flat).expect("sized"),
        responses,
        corrupted_mask: None,
        meta: DatasetMeta::default(),
    }
}

fn random_disc(rng: &mut Rng, family: FeatureFamily, d: usize, layers: usize) -> DiscriminatorParams {
    let width = (layers == 2).then(|| rng.random_range(1..=4));
    let mut p = DiscriminatorParams::random(family, d, width, None, rng);
    // Offsets near the feature scale keep every sigmoid away from saturation.
    match &mut p {
        DiscriminatorParams::OneLayer(u) => u.t = rng.random_range(-1.0..1.0),
        DiscriminatorParams::TwoLayer(p) => p.units.iter_mut().for_each(|u| u.t = rng.random_range(-1.0..1.0)),
    }
    p
}

fn check_disc_instance(rng: &mut Rng, family: FeatureFamily, layers: usize, readout: Readout) -> Result<f64> {
    let d = rng.random_range(1..=4);
    let n = rng.random_range(1..=6);
    let batch = random_batch(rng, n, d, family.is_regression());
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let params = random_disc(rng, family, d, layers);
    let (_, g) = grad_params(&params, family, &batch, Some(&weights), readout)?;
    let total: f64 = weights.iter().sum();
    let mut probe = params.clone();
    let numeric = central_diff(&params.to_flat(), |x| {
        probe.set_flat(x);
        (0..n)
            .map(|i| weights[i] * probe.eval(family, batch.points.row(i), batch.response(i), readout))
            .sum::<f64>()
            / total
    });
    Ok(rel_err(&g.to_flat(), &numeric))
}

fn random_generator(rng: &mut Rng, family: FeatureFamily, d: usize) -> GeneratorParams {
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    match family {
        FeatureFamily::Mean => GeneratorParams::Mean {
            theta: (0..d).map(|_| 0.5 * normal()).collect(),
        },
        FeatureFamily::SecondMoment => {
            let mut l = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..i {
                    l[i * d + j] = 0.3 * normal();
                }
                l[i * d + i] = 0.5 + 0.5 * normal().abs();
            }
            GeneratorParams::SecondMoment { l, d }
        }
        FeatureFamily::Regression { .. } => GeneratorParams::Regression {
            theta: (0..d).map(|_| 0.5 * normal()).collect(),
            noise_scale: 0.5 + 0.5 * normal().abs(),
        },
    }
}

fn check_gen_instance(rng: &mut Rng, family: FeatureFamily, layers: usize, readout: Readout) -> Result<f64> {
    let d = rng.random_range(1..=4);
    let m = rng.random_range(1..=6);
    let seed = rng.random();
    let pool = if family.is_regression() {
        NoisePool::regression(&random_batch(rng, m, d, true), m, seed)?
    } else {
        NoisePool::gaussian(m, d, seed)?
    };
    let gen = random_generator(rng, family, d);
    let disc = random_disc(rng, family, d, layers);
    let (_, g) = generator_grad(&gen, &pool, &disc, family, readout)?;
    let mut probe = gen.clone();
    let numeric = central_diff(&gen.to_flat(), |x| {
        probe.set_flat(x);
        let s = generate(&probe, &pool).expect("pool matches");
        (0..s.n())
            .map(|i| disc.eval(family, s.points.row(i), s.response(i), readout))
            .sum::<f64>()
            / s.n() as f64
    });
    Ok(rel_err(&g.to_flat(), &numeric))
}

/// Runs `instances` random checks for every target, layer count, feature
/// family and readout. One-layer discriminators are checked with the plain
/// readout only; two-layer ones with all three.
pub fn check_gradients(instances: usize, seed: u64) -> Result<GradCheckReport> {
    let mut rows = Vec::new();
    let mut stream = 0u64;
    for target in ["discriminator", "generator"] {
        for layers in [1usize, 2] {
            let readouts: &[Readout] = if layers == 1 {
                &[Readout::Prob]
            } else {
                &[Readout::Prob, Readout::LogProb, Readout::LogOneMinusProb]
            };
            for family in families() {
                for &readout in readouts {
                    stream += 1;
                    let mut rng = seeded(derive_seed(seed, stream));
                    let mut worst = 0.0f64;
                    for _ in 0..instances {
                        let e = if target == "discriminator" {
                            check_disc_instance(&mut rng, family, layers, readout)?
                        } else {
                            check_gen_instance(&mut rng, family, layers, readout)?
                        };
                        // NaN must fail the row.
                        worst = if e.is_nan() { f64::NAN } else { worst.max(e) };
                    }
                    rows.push(GradCheckRow {
                        target: target.to_string(),
                        layers,
                        family: family.name().to_string(),
                        readout: readout_name(readout).to_string(),
                        instances,
                        max_rel_err: worst,
                        passed: worst <= REL_TOL,
                    });
                }
            }
        }
    }
    Ok(GradCheckReport {
        step: FD_STEP,
        tolerance: REL_TOL,
        rows,
    })
}
