//! The min-max projection estimator for the mean, second-moment and
//! regression tasks, classical baselines, and task losses.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contamination::{sample_clean, CleanFamily};
use crate::dataset::Dataset;
use crate::discriminator::{batch_mean, FeatureFamily, Readout};
use crate::discriminator::{DiscriminatorParams, OneLayerParams};
use crate::distance::{ascend_objectives, guided_direction, objectives, run_ascent, scan_offset, AscentConfig, AscentState, DistanceKind, Objective};
use crate::error::{domain_err, shape_err, Error, Result};
use crate::generator::{extract_estimate, generate, generator_grad, Estimate, GeneratorParams, NoisePool, Task};
use crate::linalg::{least_squares, median, norm2, spectral_norm_symmetric};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimaxConfig {
    pub outer_steps: usize,
    pub disc_steps_per_outer: usize,
    /// Generator rate; outer step `k` uses `gen_step_size / sqrt(k)`.
    pub gen_step_size: f64,
    /// Discriminator rate, decayed like the generator rate.
    pub disc_step_size: f64,
    pub restarts_outer: usize,
    /// Noise pool size; `None` uses the sample size.
    pub pool_size: Option<usize>,
    pub distance: DistanceKind,
    /// Hidden width of two-layer discriminators.
    pub width: usize,
    /// Contamination level assumed by the trimmed initializers, which trim
    /// a fraction `2 * eps`.
    pub eps: f64,
    /// Regression discriminator directions are clipped to this multiple of
    /// the initial coefficient norm.
    pub regression_radius_factor: f64,
    /// Fraction of final outer steps whose generator iterates are averaged.
    pub average_fraction: f64,
    /// Ascent used to score each restart's final candidate.
    pub final_ascent: AscentConfig,
    pub seed: u64,
}

impl Default for MinimaxConfig {
    fn default() -> Self {
        Self {
            outer_steps: 500,
            disc_steps_per_outer: 5,
            gen_step_size: 0.05,
            disc_step_size: 0.1,
            restarts_outer: 3,
            pool_size: None,
            distance: DistanceKind::A1,
            width: 8,
            eps: 0.1,
            regression_radius_factor: 10.0,
            average_fraction: 0.25,
            final_ascent: AscentConfig {
                restarts: 3,
                steps: 100,
                ..AscentConfig::default()
            },
            seed: 0,
        }
    }
}

impl MinimaxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_steps == 0 || self.disc_steps_per_outer == 0 || self.restarts_outer == 0 || self.width == 0 {
            return domain_err("minimax counts must be positive");
        }
        if self.pool_size == Some(0) {
            return domain_err("pool size must be positive");
        }
        for (name, v) in [("gen_step_size", self.gen_step_size), ("disc_step_size", self.disc_step_size)] {
            if !(v > 0.0 && v.is_finite()) {
                return domain_err(format!("{name} must be positive"));
            }
        }
        if !(0.0..=crate::contamination::MAX_EPS).contains(&self.eps) {
            return domain_err("eps must lie in [0, 0.45]");
        }
        if !(0.0..=1.0).contains(&self.average_fraction) {
            return domain_err("average_fraction must lie in [0, 1]");
        }
        if !(self.regression_radius_factor > 0.0) {
            return domain_err("regression_radius_factor must be positive");
        }
        self.final_ascent.validate()
    }

    fn ascent(&self) -> AscentConfig {
        AscentConfig {
            width: self.width,
            ..self.final_ascent.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub estimate: Estimate,
    pub generator: GeneratorParams,
    pub final_distance_value: f64,
    /// Discriminator objective after each completed outer step of the
    /// selected restart.
    pub trajectory: Vec<f64>,
    /// Index of the selected restart.
    pub restart: usize,
    /// Final distance of every restart, `None` for aborted ones.
    pub restart_distances: Vec<Option<f64>>,
    pub config: MinimaxConfig,
    pub wall_time_ms: f64,
}

/// Optional membership penalty on the generator: returns the penalty value
/// and its gradient (same shape as the parameters).
pub type PenaltyFn = Arc<dyn Fn(&GeneratorParams) -> (f64, Vec<f64>) + Send + Sync>;

fn check_data(task: Task, data: &Dataset) -> Result<()> {
    data.validate()?;
    if data.n() == 0 {
        return shape_err("empty data");
    }
    if !data.is_finite() {
        return Err(Error::Domain("data contain NaN or infinite values".into()));
    }
    if (task == Task::Regression) != data.is_regression() {
        return shape_err("responses are required for regression and only for regression");
    }
    if data.n() < data.d() + 10 {
        log::warn!("n = {} is small relative to d = {}", data.n(), data.d());
    }
    Ok(())
}

/// Rows in lexicographic order, so nothing downstream depends on the
/// input order.
fn canonical(data: &Dataset) -> Dataset {
    let mut idx: Vec<usize> = (0..data.n()).collect();
    idx.sort_by(|&a, &b| {
        let ra = data.points.row(a).iter().chain(data.responses.as_ref().map(|y| &y[a]));
        let rb = data.points.row(b).iter().chain(data.responses.as_ref().map(|y| &y[b]));
        ra.zip(rb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    data.select(&idx)
}

fn trim_fraction(eps: f64) -> f64 {
    (2.0 * eps).min(crate::contamination::MAX_EPS)
}

/// Symmetric trimmed mean: drops `floor(fraction * n)` values from each end.
pub fn trimmed_mean(values: &[f64], fraction: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let k = ((fraction * n as f64) + 1e-9).floor() as usize;
    let k = k.min((n - 1) / 2);
    let kept = &v[k..n - k];
    kept.iter().sum::<f64>() / kept.len() as f64
}

fn second_moment_entries(data: &Dataset, reduce: impl Fn(&[f64]) -> f64) -> DMatrix<f64> {
    let d = data.d();
    let mut m = DMatrix::zeros(d, d);
    let mut buf = vec![0.0; data.n()];
    for i in 0..d {
        for j in 0..=i {
            for (b, row) in buf.iter_mut().zip(data.points.rows()) {
                *b = row[i] * row[j];
            }
            let v = reduce(&buf);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Least squares on the rows with the smallest absolute residuals,
/// repeated until the retained set stops changing (at most 20 rounds).
/// Returns the coefficients, the retained rows and whether a ridge was
/// needed.
fn trimmed_ols(data: &Dataset, fraction: f64) -> Result<(Vec<f64>, Vec<usize>, bool)> {
    let y = data.response_vector().ok_or_else(|| Error::Shape("regression needs responses".into()))?;
    let x = data.design();
    let (mut theta, mut ridged) = least_squares(&x, &y, 1e-6)?;
    let n = data.n();
    let drop = ((fraction * n as f64) + 1e-9).floor() as usize;
    let keep_n = (n - drop.min(n - 1)).max(1);
    let mut kept: Vec<usize> = (0..n).collect();
    if drop == 0 {
        return Ok((theta.as_slice().to_vec(), kept, ridged));
    }
    for _ in 0..20 {
        let resid = &y - &x * &theta;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| resid[a].abs().total_cmp(&resid[b].abs()).then(a.cmp(&b)));
        let mut next: Vec<usize> = order[..keep_n].to_vec();
        next.sort_unstable();
        if next == kept {
            break;
        }
        kept = next;
        let xs = DMatrix::from_fn(kept.len(), x.ncols(), |i, j| x[(kept[i], j)]);
        let ys = DVector::from_iterator(kept.len(), kept.iter().map(|&i| y[i]));
        let (t, r) = least_squares(&xs, &ys, 1e-6)?;
        theta = t;
        ridged |= r;
    }
    Ok((theta.as_slice().to_vec(), kept, ridged))
}

/// Comparison estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Baseline {
    EmpiricalMean,
    CoordinateMedian,
    TrimmedMean { fraction: f64 },
    Ols,
    TrimmedOls { fraction: f64 },
    EmpiricalSecondMoment,
    TrimmedSecondMoment { fraction: f64 },
}

impl Baseline {
    pub fn task(&self) -> Task {
        match self {
            Self::EmpiricalMean | Self::CoordinateMedian | Self::TrimmedMean { .. } => Task::Mean,
            Self::Ols | Self::TrimmedOls { .. } => Task::Regression,
            Self::EmpiricalSecondMoment | Self::TrimmedSecondMoment { .. } => Task::SecondMoment,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::EmpiricalMean => "empirical_mean".into(),
            Self::CoordinateMedian => "coordinate_median".into(),
            Self::TrimmedMean { fraction } => format!("trimmed_mean({fraction})"),
            Self::Ols => "ols".into(),
            Self::TrimmedOls { fraction } => format!("trimmed_ols({fraction})"),
            Self::EmpiricalSecondMoment => "empirical_second_moment".into(),
            Self::TrimmedSecondMoment { fraction } => format!("trimmed_second_moment({fraction})"),
        }
    }
}

pub fn baseline(kind: Baseline, data: &Dataset) -> Result<Estimate> {
    check_data(kind.task(), data)?;
    let fraction = match kind {
        Baseline::TrimmedMean { fraction } | Baseline::TrimmedOls { fraction } | Baseline::TrimmedSecondMoment { fraction } => fraction,
        _ => 0.0,
    };
    if !(0.0..=crate::contamination::MAX_EPS).contains(&fraction) {
        return domain_err("trim fraction must lie in [0, 0.45]");
    }
    let columns = || (0..data.d()).map(|j| data.points.column(j));
    Ok(match kind {
        Baseline::EmpiricalMean => Estimate::Vector(data.points.column_means()),
        Baseline::CoordinateMedian => Estimate::Vector(columns().map(|c| median(&c)).collect()),
        Baseline::TrimmedMean { fraction } => Estimate::Vector(columns().map(|c| trimmed_mean(&c, fraction)).collect()),
        Baseline::Ols => {
            let y = data.response_vector().expect("checked");
            let (theta, ridged) = least_squares(&data.design(), &y, 1e-6)?;
            if ridged {
                log::warn!("singular design; ridge fallback used");
            }
            Estimate::Vector(theta.as_slice().to_vec())
        }
        Baseline::TrimmedOls { fraction } => Estimate::Vector(trimmed_ols(data, fraction)?.0),
        Baseline::EmpiricalSecondMoment => {
            let n = data.n() as f64;
            Estimate::Matrix(second_moment_entries(data, |v| v.iter().sum::<f64>() / n))
        }
        Baseline::TrimmedSecondMoment { fraction } => Estimate::Matrix(second_moment_entries(data, |v| trimmed_mean(v, fraction))),
    })
}

/// Initial candidate from contamination-resistant statistics.
fn initial_generator(task: Task, data: &Dataset, eps: f64) -> Result<GeneratorParams> {
    let frac = trim_fraction(eps);
    Ok(match task {
        Task::Mean => GeneratorParams::Mean {
            theta: baseline(Baseline::CoordinateMedian, data)?.to_flat(),
        },
        Task::SecondMoment => {
            let m = baseline(Baseline::TrimmedSecondMoment { fraction: frac }, data)?;
            let m = m.as_matrix().expect("matrix estimate").clone();
            let d = m.nrows();
            let l = match m.clone().cholesky() {
                Some(ch) => ch.l(),
                None => {
                    log::debug!("trimmed second moment not positive definite; diagonal start");
                    DMatrix::from_fn(d, d, |i, j| if i == j { m[(i, i)].max(0.0).sqrt() } else { 0.0 })
                }
            };
            GeneratorParams::from_factor(&l)?
        }
        Task::Regression => {
            let (theta, kept, ridged) = trimmed_ols(data, frac)?;
            if ridged {
                log::warn!("singular design; ridge fallback used");
            }
            let ss: f64 = kept
                .iter()
                .map(|&i| {
                    let r = data.response(i) - crate::linalg::dot(&theta, data.points.row(i));
                    r * r
                })
                .sum();
            let mut p = GeneratorParams::Regression {
                theta,
                noise_scale: (ss / kept.len() as f64).sqrt(),
            };
            p.project();
            p
        }
    })
}

fn family_for(task: Task, init: &GeneratorParams, cfg: &MinimaxConfig) -> FeatureFamily {
    match task {
        Task::Mean => FeatureFamily::Mean,
        Task::SecondMoment => FeatureFamily::SecondMoment,
        Task::Regression => {
            let theta = init.to_flat();
            let norm = norm2(&theta[..theta.len() - 1]);
            FeatureFamily::Regression {
                radius: cfg.regression_radius_factor * norm.max(1.0),
            }
        }
    }
}

struct RestartOutcome {
    generator: GeneratorParams,
    trajectory: Vec<f64>,
    distance: f64,
}

/// Plain projected gradient step on the generator. Unlike the normalized
/// discriminator update, this keeps vanishing tail gradients (from
/// discriminators that isolate far outliers) from moving the candidate.
fn descend(params: &mut GeneratorParams, grad: &[f64], rate: f64) {
    let mut x = params.to_flat();
    for (xi, gi) in x.iter_mut().zip(grad) {
        *xi -= rate * gi;
    }
    params.set_flat(&x);
    params.project();
}

fn score_objectives(kind: DistanceKind) -> Vec<Objective> {
    objectives(kind, if kind == DistanceKind::A3 { Readout::LogProb } else { Readout::Prob }, 1.0)
}

/// Gradient-norm cap for the discriminator steps inside the loop.
const DISC_CLIP: f64 = 1.0;

const TIE_TOL: f64 = 1e-12;
/// Outer steps between discriminator refreshes.
const REFRESH_EVERY: usize = 10;

/// Replace a one-layer discriminator by its mirror image or by the guided
/// direction when one of those, with a rescanned offset, scores higher.
/// Local ascent alone stays on whichever tail it found first.
fn refresh(disc: &mut AscentState, obj: Objective, family: FeatureFamily, q: &Dataset, data: &Dataset) -> Result<()> {
    let DiscriminatorParams::OneLayer(u) = &disc.params else {
        return Ok(());
    };
    let mut cands = vec![OneLayerParams {
        v: u.v2.clone(),
        v2: u.v.clone(),
        t: u.t,
    }];
    if !family.is_regression() {
        cands[0] = OneLayerParams {
            v: u.v.iter().map(|x| -x).collect(),
            v2: Vec::new(),
            t: u.t,
        };
        if let Some(dir) = guided_direction(family, q, data) {
            let r = norm2(&u.v).max(1.0);
            for s in [1.0, -1.0] {
                cands.push(OneLayerParams {
                    v: dir.iter().map(|x| s * r * x).collect(),
                    v2: Vec::new(),
                    t: 0.0,
                });
            }
        }
    }
    let mut best = (obj.value_grad(&disc.params, family, q, data)?.0, None);
    for mut c in cands {
        if let Some((v, t)) = scan_offset(obj, &c, family, q, data) {
            if v > best.0 {
                c.t = t;
                best = (v, Some(c));
            }
        }
    }
    if let Some(c) = best.1 {
        let mut p = DiscriminatorParams::OneLayer(c);
        p.project(family);
        *disc = AscentState::plain(p, DISC_CLIP);
    }
    Ok(())
}

/// Objective maximized by the discriminator against `(generated, data)`.
fn disc_objective(kind: DistanceKind) -> Objective {
    match kind {
        DistanceKind::A1 | DistanceKind::A2 => Objective::AbsDiff {
            readout: Readout::Prob,
            scale: 1.0,
        },
        DistanceKind::A3 => Objective::LogScore,
    }
}

#[allow(clippy::too_many_arguments)]
fn run_restart(
    r: usize,
    task: Task,
    data: &Dataset,
    init: &GeneratorParams,
    family: FeatureFamily,
    cfg: &MinimaxConfig,
    penalty: Option<&PenaltyFn>,
) -> Result<Option<RestartOutcome>> {
    let seed = derive_seed(cfg.seed, r as u64);
    let m = cfg.pool_size.unwrap_or(data.n());
    let pool = match task {
        Task::Regression => NoisePool::regression(data, m, seed)?,
        _ => NoisePool::gaussian(m, data.d(), seed)?,
    };
    let kind = cfg.distance;
    let obj = disc_objective(kind);
    let ascent = cfg.ascent();
    let center = matches!(task, Task::Regression).then(|| {
        let f = init.to_flat();
        f[..f.len() - 1].to_vec()
    });
    let mut gen = init.clone();
    let q0 = generate(&gen, &pool)?;
    // Start from a best response so early generator steps follow a real
    // discrepancy rather than an arbitrary initial discriminator.
    let warm = ascend_objectives(kind, &score_objectives(kind), family, &q0, data, &ascent, center.as_deref(), derive_seed(seed, 1))?.1;
    let mut disc = AscentState::plain(warm, DISC_CLIP);
    let avg_from = cfg.outer_steps - ((cfg.average_fraction * cfg.outer_steps as f64).round() as usize).min(cfg.outer_steps);
    let mut avg = vec![0.0; gen.to_flat().len()];
    let mut avg_count = 0usize;
    let mut trajectory = Vec::with_capacity(cfg.outer_steps);

    for k in 1..=cfg.outer_steps {
        let decay = (k as f64).sqrt();
        let q = generate(&gen, &pool)?;
        if k % REFRESH_EVERY == 0 {
            refresh(&mut disc, obj, family, &q, data)?;
        }
        let mut last = f64::NAN;
        for _ in 0..cfg.disc_steps_per_outer {
            match disc.step(obj, family, &q, data, cfg.disc_step_size / decay)? {
                Some(v) => last = v,
                None => {
                    log::warn!("restart {r}: non-finite discriminator gradient at outer step {k}; restart aborted");
                    return Ok(None);
                }
            }
        }
        // Generator side: A1/A2 descend |E_q g - E_data g|, A3 descends E_q log g.
        let readout = if kind == DistanceKind::A3 { Readout::LogProb } else { Readout::Prob };
        let (vq, g) = generator_grad(&gen, &pool, &disc.params, family, readout)?;
        let sign = if kind == DistanceKind::A3 {
            1.0
        } else {
            let vp = batch_mean(&disc.params, family, data, readout);
            last = (vq - vp).abs();
            // Rounding-level gaps carry no direction.
            if last <= TIE_TOL {
                0.0
            } else {
                (vq - vp).signum()
            }
        };
        let mut grad: Vec<f64> = g.to_flat().into_iter().map(|x| sign * x).collect();
        if let Some(pen) = penalty {
            let (_, pg) = pen(&gen);
            for (a, b) in grad.iter_mut().zip(pg) {
                *a += b;
            }
        }
        if grad.iter().any(|x| !x.is_finite()) || !last.is_finite() {
            log::warn!("restart {r}: non-finite generator gradient at outer step {k}; restart aborted");
            return Ok(None);
        }
        descend(&mut gen, &grad, cfg.gen_step_size / decay);
        if log::log_enabled!(log::Level::Trace) && k % 25 == 0 {
            log::trace!("restart {r} step {k}: objective {last:.5} generator {:?} discriminator {:?}", gen.to_flat(), disc.params.to_flat());
        }
        trajectory.push(last);
        if k > avg_from {
            for (a, x) in avg.iter_mut().zip(gen.to_flat()) {
                *a += x;
            }
            avg_count += 1;
        }
    }
    if avg_count > 0 {
        avg.iter_mut().for_each(|a| *a /= avg_count as f64);
        gen.set_flat(&avg);
        gen.project();
    }

    // Score the final candidate: warm-started ascent plus fresh restarts.
    let q = generate(&gen, &pool)?;
    let fresh = ascend_objectives(kind, &score_objectives(kind), family, &q, data, &ascent, center.as_deref(), derive_seed(seed, 2))?.0;
    let warm = run_ascent(&mut disc, obj, family, &q, data, ascent.steps, cfg.disc_step_size, 0.0)?.0;
    let distance = fresh.max(warm);
    if !distance.is_finite() {
        return Ok(None);
    }
    Ok(Some(RestartOutcome {
        generator: gen,
        trajectory,
        distance,
    }))
}

/// Alternating min-max estimation on `data` for `task`. Restarts run in
/// parallel; the restart with the smallest final distance is returned
/// (lowest index on ties).
pub fn minimax(task: Task, data: &Dataset, cfg: &MinimaxConfig, penalty: Option<&PenaltyFn>) -> Result<EstimationResult> {
    let start = Instant::now();
    cfg.validate()?;
    check_data(task, data)?;
    let data = canonical(data);
    // Ascent over (v, t) is not shift-covariant (the v-gradient carries the
    // raw x), so the mean task runs centred at the coordinate median.
    let center: Option<Vec<f64>> = (task == Task::Mean).then(|| (0..data.d()).map(|j| median(&data.points.column(j))).collect());
    let (data, penalty) = match &center {
        Some(c) => {
            let neg: Vec<f64> = c.iter().map(|v| -v).collect();
            let pen = penalty.map(|f| {
                let (f, c) = (f.clone(), c.clone());
                Arc::new(move |g: &GeneratorParams| f(&uncentred(g, &c))) as PenaltyFn
            });
            (data.translated(&neg)?, pen)
        }
        None => (data, penalty.cloned()),
    };
    let init = initial_generator(task, &data, cfg.eps)?;
    let family = family_for(task, &init, cfg);
    let outcomes: Vec<Result<Option<RestartOutcome>>> = (0..cfg.restarts_outer)
        .into_par_iter()
        .map(|r| run_restart(r, task, &data, &init, family, cfg, penalty.as_ref()))
        .collect();
    let mut best: Option<(usize, RestartOutcome)> = None;
    let mut distances = Vec::with_capacity(outcomes.len());
    for (r, o) in outcomes.into_iter().enumerate() {
        let o = o?;
        distances.push(o.as_ref().map(|o| o.distance));
        if let Some(o) = o {
            if best.as_ref().is_none_or(|(_, b)| o.distance < b.distance) {
                best = Some((r, o));
            }
        }
    }
    let (restart, mut best) = best.ok_or_else(|| Error::Numerical("every restart aborted on non-finite values".into()))?;
    if let Some(c) = &center {
        best.generator = uncentred(&best.generator, c);
    }
    Ok(EstimationResult {
        estimate: extract_estimate(&best.generator),
        generator: best.generator,
        final_distance_value: best.distance,
        trajectory: best.trajectory,
        restart,
        restart_distances: distances,
        config: cfg.clone(),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn uncentred(g: &GeneratorParams, center: &[f64]) -> GeneratorParams {
    match g {
        GeneratorParams::Mean { theta } => GeneratorParams::Mean {
            theta: theta.iter().zip(center).map(|(t, c)| t + c).collect(),
        },
        other => other.clone(),
    }
}

pub fn robust_mean(data: &Dataset, cfg: &MinimaxConfig) -> Result<EstimationResult> {
    minimax(Task::Mean, data, cfg, None)
}

pub fn robust_second_moment(data: &Dataset, cfg: &MinimaxConfig) -> Result<EstimationResult> {
    minimax(Task::SecondMoment, data, cfg, None)
}

pub fn robust_regression(data: &Dataset, cfg: &MinimaxConfig) -> Result<EstimationResult> {
    minimax(Task::Regression, data, cfg, None)
}

/// Known clean distribution against which estimates are scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub family: CleanFamily,
    /// Seed for the Monte Carlo fallback.
    pub seed: u64,
}

/// Draws used when the regression excess loss has no closed form here.
pub const LOSS_MC_DRAWS: usize = 100_000;

/// Task loss of `estimate`: l2 error of the mean, spectral error of the
/// second moment, or excess predictive loss for regression.
pub fn evaluate_loss(task: Task, estimate: &Estimate, truth: &TruthSpec) -> Result<f64> {
    let fam = &truth.family;
    match task {
        Task::Mean => {
            if fam.is_regression() {
                return Err(Error::Unsupported("mean loss needs a covariate family".into()));
            }
            let est = estimate.as_vector().ok_or_else(|| Error::Shape("vector estimate expected".into()))?;
            let mu = fam.mean();
            if est.len() != mu.len() {
                return shape_err("estimate dimension mismatch");
            }
            Ok(crate::linalg::dist2(est, &mu))
        }
        Task::SecondMoment => {
            if fam.is_regression() {
                return Err(Error::Unsupported("second-moment loss needs a covariate family".into()));
            }
            let est = estimate.as_matrix().ok_or_else(|| Error::Shape("matrix estimate expected".into()))?;
            let truth_m = fam.second_moment();
            if est.shape() != truth_m.shape() {
                return shape_err("estimate dimension mismatch");
            }
            spectral_norm_symmetric(&(est - truth_m), 1e-8)
        }
        Task::Regression => {
            let CleanFamily::LinearModel { theta, x_family, .. } = fam else {
                return Err(Error::Unsupported("regression loss needs a linear model".into()));
            };
            let est = estimate.as_vector().ok_or_else(|| Error::Shape("vector estimate expected".into()))?;
            if est.len() != theta.len() {
                return shape_err("estimate dimension mismatch");
            }
            let delta = DVector::from_iterator(theta.len(), est.iter().zip(theta).map(|(a, b)| a - b));
            // Noise is independent and centred, so the excess loss is
            // E[(x^T delta)^2].
            if fam.is_gaussian_design() {
                let s = x_family.second_moment();
                Ok((delta.transpose() * s * &delta)[(0, 0)].max(0.0))
            } else {
                let xs = sample_clean(x_family, LOSS_MC_DRAWS, theta.len(), truth.seed)?;
                let total: f64 = xs
                    .points
                    .rows()
                    .map(|x| {
                        let p = crate::linalg::dot(x, delta.as_slice());
                        p * p
                    })
                    .sum();
                Ok(total / LOSS_MC_DRAWS as f64)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contamination::{corrupt, AttackKind, AttackSpec, ResponseNoise};
    use crate::dataset::Points;

    fn quick() -> MinimaxConfig {
        MinimaxConfig {
            outer_steps: 120,
            restarts_outer: 2,
            ..MinimaxConfig::default()
        }
    }

    #[test]
    fn baseline_examples() {
        let d = Dataset::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![10.0, 10.0]]).unwrap();
        assert_eq!(baseline(Baseline::CoordinateMedian, &d).unwrap(), Estimate::Vector(vec![0.0, 0.0]));
        let d = Dataset::from_rows(&[vec![0.0], vec![0.0], vec![9.0]]).unwrap();
        assert_eq!(baseline(Baseline::TrimmedMean { fraction: 1.0 / 3.0 }, &d).unwrap(), Estimate::Vector(vec![0.0]));
        assert!(baseline(Baseline::TrimmedMean { fraction: 0.5 }, &d).is_err());

        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] - 3.0 * r[1]).collect();
        let d = Dataset::with_responses(Points::from_rows(&rows).unwrap(), y).unwrap();
        let t = baseline(Baseline::Ols, &d).unwrap().to_flat();
        assert!((t[0] - 2.0).abs() < 1e-10 && (t[1] + 3.0).abs() < 1e-10);
    }

    #[test]
    fn loss_examples() {
        let truth = TruthSpec {
            family: CleanFamily::gaussian(2, 1.0),
            seed: 0,
        };
        assert_eq!(evaluate_loss(Task::Mean, &Estimate::Vector(vec![0.0, 0.0]), &truth).unwrap(), 0.0);
        assert_eq!(evaluate_loss(Task::Mean, &Estimate::Vector(vec![3.0, 4.0]), &truth).unwrap(), 5.0);
        let eye = Estimate::Matrix(DMatrix::identity(2, 2));
        assert_eq!(evaluate_loss(Task::SecondMoment, &eye, &truth).unwrap(), 0.0);
        let lin = TruthSpec {
            family: CleanFamily::LinearModel {
                theta: vec![1.0, -1.0],
                x_family: Box::new(CleanFamily::gaussian(2, 1.0)),
                noise: ResponseNoise::Gaussian { scale: 1.0 },
            },
            seed: 0,
        };
        let l = evaluate_loss(Task::Regression, &Estimate::Vector(vec![1.5, -1.0]), &lin).unwrap();
        assert!((l - 0.25).abs() < 1e-15);
        assert!(evaluate_loss(Task::Regression, &Estimate::Vector(vec![1.0]), &lin).is_err());
        assert!(evaluate_loss(Task::Regression, &eye, &truth).is_err());
    }

    #[test]
    fn single_point_mean() {
        let d = Dataset::from_rows(&[vec![1.5, -2.0]]).unwrap();
        let r = robust_mean(&d, &quick()).unwrap();
        let est = r.estimate.to_flat();
        assert!(crate::linalg::dist2(&est, &[1.5, -2.0]) < 0.05, "{est:?}");
        assert_eq!(r.trajectory.len(), 120);
    }

    #[test]
    fn zero_data_second_moment() {
        let d = Dataset::new(Points::zeros(50, 3)).unwrap();
        let r = robust_second_moment(&d, &quick()).unwrap();
        let m = r.estimate.as_matrix().unwrap();
        assert!(m.amax() < 1e-3, "{m}");
    }

    #[test]
    fn degenerate_regression_is_finite() {
        let clean = sample_clean(
            &CleanFamily::LinearModel {
                theta: vec![1.0; 4],
                x_family: Box::new(CleanFamily::gaussian(4, 1.0)),
                noise: ResponseNoise::Gaussian { scale: 1.0 },
            },
            4,
            4,
            3,
        )
        .unwrap();
        let r = robust_regression(&clean, &quick()).unwrap();
        assert!(r.estimate.to_flat().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn rejects_bad_input() {
        let mut d = Dataset::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        d.points.row_mut(0)[0] = f64::NAN;
        assert!(robust_mean(&d, &quick()).is_err());
        let d = Dataset::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(robust_regression(&d, &quick()).is_err());
    }

    #[test]
    fn point_mass_does_not_capture_estimate() {
        let clean = sample_clean(&CleanFamily::gaussian(3, 1.0), 600, 3, 4).unwrap();
        let dirty = corrupt(
            &clean,
            &AttackSpec {
                kind: AttackKind::PointMass {
                    direction: None,
                    magnitude: 50.0,
                },
                eps: 0.1,
            },
            5,
        )
        .unwrap();
        let r = robust_mean(&dirty, &quick()).unwrap();
        assert!(norm2(&r.estimate.to_flat()) < 1.0);
        assert!(r.restart_distances.iter().flatten().all(|v| *v >= r.final_distance_value));
    }

    #[test]
    fn row_order_does_not_matter() {
        let data = sample_clean(&CleanFamily::gaussian(2, 1.0), 80, 2, 9).unwrap();
        let mut idx: Vec<usize> = (0..80).collect();
        idx.reverse();
        let a = robust_mean(&data, &quick()).unwrap();
        let b = robust_mean(&data.select(&idx), &quick()).unwrap();
        assert_eq!(a.estimate, b.estimate);
    }
}
