//! Adversarial distances between two sample sets, estimated by multi-restart
//! projected gradient ascent over discriminator parameters, plus an exact
//! one-dimensional oracle for the smoothed KS distance.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::discriminator::{check_batch, grad_params, DiscriminatorParams, FeatureFamily, OneLayerParams, Readout, SmoothingCdf, SmoothingKind};
use crate::error::{domain_err, shape_err, Result};
use crate::linalg::norm2;
use crate::rng::{derive_seed, seeded, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AscentConfig {
    pub restarts: usize,
    pub steps: usize,
    /// Initial step size; step `k` uses `step_size / sqrt(k)`.
    pub step_size: f64,
    /// Grid size for oracle scans.
    pub grid_t: usize,
    /// Steps stop early once the objective moves less than this over a
    /// window of 20 steps. Zero disables early stopping.
    pub tolerance: f64,
    /// Hidden width for the two-layer distances.
    pub width: usize,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            steps: 300,
            step_size: 0.1,
            grid_t: 4001,
            tolerance: 0.0,
            width: 8,
        }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.steps == 0 || self.grid_t < 2 || self.width == 0 {
            return domain_err("ascent counts must be positive");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) || !(self.tolerance >= 0.0) {
            return domain_err("ascent step size must be positive and tolerance nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistanceKind {
    /// One-layer, `sup |E_p g1 - E_q g1|`.
    A1,
    /// Two-layer, `sup |E_p g2 - E_q g2|`.
    A2,
    /// Two-layer log score, `sup E_p log g2 + E_q log(1 - g2)`.
    A3,
}

impl DistanceKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::A1 => "A1",
            Self::A2 => "A2",
            Self::A3 => "A3",
        }
    }

    pub fn width(&self, cfg: &AscentConfig) -> Option<usize> {
        match self {
            Self::A1 => None,
            Self::A2 | Self::A3 => Some(cfg.width),
        }
    }

    /// Readout defining the bounded `d2` component.
    pub fn d2_readout(&self) -> Readout {
        match self {
            Self::A1 | Self::A2 => Readout::Prob,
            Self::A3 => Readout::LogOneMinusProb,
        }
    }
}

/// Smooth objective maximized by the ascent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// `scale * sign * (E_p r - E_q r)`.
    Diff { readout: Readout, sign: f64, scale: f64 },
    /// `scale * |E_p r - E_q r|`, with the subgradient at zero taken as
    /// that of the positive branch.
    AbsDiff { readout: Readout, scale: f64 },
    /// `E_p log g + E_q log(1 - g)`.
    LogScore,
}

impl Objective {
    pub fn value_grad(
        &self,
        params: &DiscriminatorParams,
        family: FeatureFamily,
        p: &Dataset,
        q: &Dataset,
    ) -> Result<(f64, DiscriminatorParams)> {
        let (ra, rb) = match *self {
            Self::Diff { readout, .. } | Self::AbsDiff { readout, .. } => (readout, readout),
            Self::LogScore => (Readout::LogProb, Readout::LogOneMinusProb),
        };
        let (vp, gp) = grad_params(params, family, p, None, ra)?;
        let (vq, gq) = grad_params(params, family, q, None, rb)?;
        let c = match *self {
            Self::Diff { sign, scale, .. } => sign * scale,
            Self::AbsDiff { scale, .. } => {
                if vp >= vq {
                    scale
                } else {
                    -scale
                }
            }
            Self::LogScore => 1.0,
        };
        let diff = !matches!(self, Self::LogScore);
        let combine = |a: f64, b: f64| if diff { c * (a - b) } else { a + b };
        let mut g = gp.to_flat();
        for (gi, bi) in g.iter_mut().zip(gq.to_flat()) {
            *gi = combine(*gi, bi);
        }
        let mut grad = gp;
        grad.set_flat(&g);
        Ok((combine(vp, vq), grad))
    }
}

/// Projected ascent state over discriminator parameters: Adam, or plain
/// gradient steps with the gradient norm clipped at `clip`.
#[derive(Debug, Clone)]
pub struct AscentState {
    pub params: DiscriminatorParams,
    m: Vec<f64>,
    v: Vec<f64>,
    k: usize,
    clip: Option<f64>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AscentState {
    pub fn new(params: DiscriminatorParams) -> Self {
        let len = params.flat_len();
        Self {
            params,
            m: vec![0.0; len],
            v: vec![0.0; len],
            k: 0,
            clip: None,
        }
    }

    pub fn plain(params: DiscriminatorParams, clip: f64) -> Self {
        Self {
            clip: Some(clip),
            ..Self::new(params)
        }
    }

    /// One ascent step at the given rate. Returns the objective at the
    /// parameters before the step, or `None` when the gradient is not
    /// finite (parameters are left unchanged).
    pub fn step(&mut self, obj: Objective, family: FeatureFamily, p: &Dataset, q: &Dataset, rate: f64) -> Result<Option<f64>> {
        let (val, grad) = obj.value_grad(&self.params, family, p, q)?;
        let g = grad.to_flat();
        if !val.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Ok(None);
        }
        self.k += 1;
        let mut x = self.params.to_flat();
        if let Some(clip) = self.clip {
            let scale = rate * (clip / norm2(&g)).min(1.0);
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi += scale * gi;
            }
            self.params.set_flat(&x);
            self.params.project(family);
            return Ok(Some(val));
        }
        let k = self.k as f64;
        let (c1, c2) = (1.0 - BETA1.powf(k), 1.0 - BETA2.powf(k));
        for i in 0..x.len() {
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g[i];
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g[i] * g[i];
            x[i] += rate * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
        }
        self.params.set_flat(&x);
        self.params.project(family);
        Ok(Some(val))
    }
}

/// Feature range of one unit over both sample sets, used to place offsets.
fn feature_range(params: &DiscriminatorParams, unit: usize, family: FeatureFamily, sets: [&Dataset; 2]) -> (f64, f64) {
    let u = match params {
        DiscriminatorParams::OneLayer(u) => u,
        DiscriminatorParams::TwoLayer(p) => &p.units[unit],
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in sets {
        for i in 0..s.n() {
            let f = u.feature(family, s.points.row(i), s.response(i));
            lo = lo.min(f);
            hi = hi.max(f);
        }
    }
    (lo, hi)
}

const T_SCAN: usize = 64;

/// Best offset for a one-layer unit on a grid of [`T_SCAN`] values spanning
/// the feature range of both sets. Features are computed once, so the scan
/// costs one sigmoid per sample and grid point. Returns `None` for the log
/// score, which needs two layers.
pub fn scan_offset(obj: Objective, unit: &OneLayerParams, family: FeatureFamily, p: &Dataset, q: &Dataset) -> Option<(f64, f64)> {
    let (readout, sign, scale, abs) = match obj {
        Objective::Diff { readout, sign, scale } => (readout, sign, scale, false),
        Objective::AbsDiff { readout, scale } => (readout, 1.0, scale, true),
        Objective::LogScore => return None,
    };
    let feats = |s: &Dataset| -> Vec<f64> { (0..s.n()).map(|i| unit.feature(family, s.points.row(i), s.response(i))).collect() };
    let (fp, fq) = (feats(p), feats(q));
    let lo = fp.iter().chain(&fq).copied().fold(f64::INFINITY, f64::min);
    let hi = fp.iter().chain(&fq).copied().fold(f64::NEG_INFINITY, f64::max);
    let (a, b) = (-hi - 1.0, -lo + 1.0);
    let mean = |f: &[f64], t: f64| f.iter().map(|x| readout.apply(x + t).0).sum::<f64>() / f.len() as f64;
    let mut best: Option<(f64, f64)> = None;
    for j in 0..T_SCAN {
        let t = a + (b - a) * j as f64 / (T_SCAN - 1) as f64;
        let d = mean(&fp, t) - mean(&fq, t);
        let v = scale * if abs { d.abs() } else { sign * d };
        if best.is_none_or(|(bv, _)| v > bv) {
            best = Some((v, t));
        }
    }
    best
}

/// Direction along which `p` and `q` differ most visibly: the mean
/// difference for the mean family, the leading eigenvector of the
/// second-moment difference for the second-moment family. `None` when the
/// difference vanishes or the family has no such summary.
pub fn guided_direction(family: FeatureFamily, p: &Dataset, q: &Dataset) -> Option<Vec<f64>> {
    let dir = match family {
        FeatureFamily::Mean => {
            let (a, b) = (p.points.column_means(), q.points.column_means());
            a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<f64>>()
        }
        FeatureFamily::SecondMoment => {
            let moment = |s: &Dataset| {
                let m = s.points.to_matrix();
                m.transpose() * &m / s.n() as f64
            };
            let diff = moment(p) - moment(q);
            let eig = diff.symmetric_eigen();
            let k = eig.eigenvalues.iamax();
            eig.eigenvectors.column(k).iter().copied().collect()
        }
        FeatureFamily::Regression { .. } => return None,
    };
    let n = norm2(&dir);
    (n > 0.0 && n.is_finite()).then(|| dir.into_iter().map(|x| x / n).collect())
}

/// Random initialization with offsets placed inside the empirical feature
/// range. One-layer offsets are chosen by a coarse scan of the objective;
/// two-layer offsets are drawn uniformly from the range. With `guide`, the
/// (first) unit starts along that direction; for one layer both signs are
/// scanned.
#[allow(clippy::too_many_arguments)]
pub fn initial_params(
    kind: DistanceKind,
    obj: Objective,
    family: FeatureFamily,
    p: &Dataset,
    q: &Dataset,
    cfg: &AscentConfig,
    center: Option<&[f64]>,
    guide: Option<&[f64]>,
    rng: &mut Rng,
) -> Result<DiscriminatorParams> {
    let mut params = DiscriminatorParams::random(family, p.d(), kind.width(cfg), center, rng);
    if let Some(g) = guide {
        match &mut params {
            DiscriminatorParams::OneLayer(u) => u.v.copy_from_slice(g),
            DiscriminatorParams::TwoLayer(tp) => tp.units[0].v.copy_from_slice(g),
        }
    }
    match &mut params {
        DiscriminatorParams::OneLayer(u) => {
            let mut best = (f64::NEG_INFINITY, u.clone());
            let signs: &[f64] = if guide.is_some() { &[1.0, -1.0] } else { &[1.0] };
            for &sign in signs {
                let mut cand = u.clone();
                cand.v.iter_mut().for_each(|x| *x *= sign);
                cand.v2.iter_mut().for_each(|x| *x *= sign);
                if let Some((v, t)) = scan_offset(obj, &cand, family, p, q) {
                    if v > best.0 {
                        cand.t = t;
                        best = (v, cand);
                    }
                }
            }
            *u = best.1;
        }
        DiscriminatorParams::TwoLayer(_) => {
            let ranges: Vec<(f64, f64)> = (0..cfg.width).map(|j| feature_range(&params, j, family, [p, q])).collect();
            if let DiscriminatorParams::TwoLayer(tp) = &mut params {
                for (u, (lo, hi)) in tp.units.iter_mut().zip(ranges) {
                    u.t = if hi > lo { -rng.random_range(lo..=hi) } else { -lo };
                }
            }
        }
    }
    Ok(params)
}

/// Runs `steps` of ascent from `state` with rate `lr / sqrt(k)` at step
/// `k`, returning the best objective
/// value seen and the parameters attaining it.
#[allow(clippy::too_many_arguments)]
pub fn run_ascent(
    state: &mut AscentState,
    obj: Objective,
    family: FeatureFamily,
    p: &Dataset,
    q: &Dataset,
    steps: usize,
    lr: f64,
    tolerance: f64,
) -> Result<(f64, DiscriminatorParams)> {
    let mut best = (f64::NEG_INFINITY, state.params.clone());
    let mut history: Vec<f64> = Vec::new();
    for k in 1..=steps {
        let before = state.params.clone();
        match state.step(obj, family, p, q, lr / (k as f64).sqrt())? {
            Some(v) => {
                if v > best.0 {
                    best = (v, before);
                }
                history.push(v);
                if tolerance > 0.0 && history.len() > 20 {
                    let old = history[history.len() - 21];
                    if (v - old).abs() < tolerance {
                        break;
                    }
                }
            }
            None => break,
        }
    }
    let (v, _) = obj.value_grad(&state.params, family, p, q)?;
    if v.is_finite() && v > best.0 {
        best = (v, state.params.clone());
    }
    Ok(best)
}

fn check_pair(family: FeatureFamily, p: &Dataset, q: &Dataset) -> Result<()> {
    if p.n() == 0 || q.n() == 0 {
        return shape_err("sample sets must be nonempty");
    }
    if p.d() != q.d() {
        return shape_err(format!("dimension mismatch: {} vs {}", p.d(), q.d()));
    }
    let probe = DiscriminatorParams::OneLayer(crate::discriminator::OneLayerParams::zeros(family, p.d()));
    check_batch(&probe, family, p)?;
    check_batch(&probe, family, q)
}

pub fn objectives(kind: DistanceKind, readout: Readout, scale: f64) -> Vec<Objective> {
    match kind {
        DistanceKind::A3 if readout == Readout::LogProb => vec![Objective::LogScore],
        _ => [1.0, -1.0]
            .into_iter()
            .map(|sign| Objective::Diff { readout, sign, scale })
            .collect(),
    }
}

/// Multi-restart ascent over the given objectives; every restart uses its
/// own seed stream and every objective within a restart the same stream.
/// Restart 0 starts along [`guided_direction`] when there is one.
/// Ties keep the earliest (restart, objective).
#[allow(clippy::too_many_arguments)]
pub fn ascend_objectives(
    kind: DistanceKind,
    objs: &[Objective],
    family: FeatureFamily,
    p: &Dataset,
    q: &Dataset,
    cfg: &AscentConfig,
    center: Option<&[f64]>,
    seed: u64,
) -> Result<(f64, DiscriminatorParams)> {
    cfg.validate()?;
    check_pair(family, p, q)?;
    let guide = guided_direction(family, p, q);
    let guide = guide.as_deref();
    let runs: Vec<Result<(f64, DiscriminatorParams)>> = (0..cfg.restarts)
        .into_par_iter()
        .flat_map_iter(|r| {
            objs.iter().map(move |&obj| {
                let mut rng = seeded(derive_seed(seed, r as u64));
                let init = initial_params(kind, obj, family, p, q, cfg, center, guide.filter(|_| r == 0), &mut rng)?;
                let mut state = AscentState::new(init);
                run_ascent(&mut state, obj, family, p, q, cfg.steps, cfg.step_size, cfg.tolerance)
            })
        })
        .collect();
    let mut best: Option<(f64, DiscriminatorParams)> = None;
    for run in runs {
        let (v, params) = run?;
        if best.as_ref().is_none_or(|b| v > b.0) {
            best = Some((v, params));
        }
    }
    let (v, params) = best.expect("at least one restart");
    if !v.is_finite() {
        return Err(crate::Error::Numerical("every ascent restart diverged".into()));
    }
    Ok((v, params))
}

/// Estimates `A(p, q)`; a lower bound on the supremum. The returned
/// parameters satisfy the constraints exactly.
pub fn estimate_distance(
    kind: DistanceKind,
    family: FeatureFamily,
    p: &Dataset,
    q: &Dataset,
    cfg: &AscentConfig,
    seed: u64,
) -> Result<(f64, DiscriminatorParams)> {
    let readout = match kind {
        DistanceKind::A3 => Readout::LogProb,
        _ => Readout::Prob,
    };
    ascend_objectives(kind, &objectives(kind, readout, 1.0), family, p, q, cfg, None, seed)
}

/// `sup |E_a d2 - E_b d2|` where `d2` is the bounded half-scaled component
/// of the distance: `g/2` for A1 and A2, `log(1 - g2)/2` for A3.
pub fn abar_deviation(kind: DistanceKind, family: FeatureFamily, a: &Dataset, b: &Dataset, cfg: &AscentConfig, seed: u64) -> Result<f64> {
    let objs = objectives(kind, kind.d2_readout(), 0.5);
    ascend_objectives(kind, &objs, family, a, b, cfg, None, seed).map(|(v, _)| v.max(0.0))
}

/// Finite discrete distribution on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDist1D {
    atoms: Vec<f64>,
    masses: Vec<f64>,
}

impl DiscreteDist1D {
    /// Sorts atoms and merges duplicates. Masses must be nonnegative and
    /// sum to one within 1e-12.
    pub fn new(atoms: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if atoms.len() != masses.len() || atoms.is_empty() {
            return shape_err("atoms and masses must be nonempty and of equal length");
        }
        if atoms.iter().any(|a| !a.is_finite()) || masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return domain_err("atoms must be finite and masses nonnegative");
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return domain_err(format!("masses sum to {total}, not 1"));
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(masses).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out_a: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut out_m: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, m) in pairs {
            if out_a.last() == Some(&a) {
                *out_m.last_mut().unwrap() += m;
            } else {
                out_a.push(a);
                out_m.push(m);
            }
        }
        Ok(Self { atoms: out_a, masses: out_m })
    }

    pub fn point(x: f64) -> Self {
        Self {
            atoms: vec![x],
            masses: vec![1.0],
        }
    }

    /// Uniform weights over the given values.
    pub fn empirical(values: &[f64]) -> Result<Self> {
        let m = 1.0 / values.len() as f64;
        let masses = vec![m; values.len()];
        let total: f64 = masses.iter().sum();
        // Renormalize the rounding of 1/n away.
        let masses = masses.into_iter().map(|x| x / total).collect();
        Self::new(values.to_vec(), masses)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().zip(&self.masses).map(|(a, m)| m * f(*a)).sum()
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|a| *a <= x);
        self.masses[..k].iter().sum::<f64>().min(1.0)
    }

    pub fn negated(&self) -> Self {
        Self {
            atoms: self.atoms.iter().rev().map(|a| -a).collect(),
            masses: self.masses.iter().rev().copied().collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max(&self) -> f64 {
        *self.atoms.last().unwrap()
    }
}

/// Maximizer of a one-dimensional scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    pub t: f64,
}

/// Padding (in sigmoid widths) around the atom range for oracle scans.
pub const ORACLE_PAD: f64 = 40.0;

/// Maximizes `h` over an equispaced grid, then refines around the best
/// grid point by golden-section search.
pub fn scan_max(h: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> OracleValue {
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = OracleValue {
        value: f64::NEG_INFINITY,
        t: lo,
    };
    for j in 0..points {
        let t = lo + step * j as f64;
        let v = h(t);
        if v > best.value {
            best = OracleValue { value: v, t };
        }
    }
    let (mut a, mut b) = ((best.t - step).max(lo), (best.t + step).min(hi));
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (h(c), h(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = h(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = h(d);
        }
    }
    for (t, v) in [(c, fc), (d, fd)] {
        if v > best.value {
            best = OracleValue { value: v, t };
        }
    }
    best
}

/// `sup_t |E_p T(X + t) - E_q T(X + t)|` for one-dimensional discrete laws
/// with the identity feature. For the step function the supremum is taken
/// exactly over atom boundaries (classical KS); otherwise over a grid of
/// `grid` offsets spanning the atom range padded by [`ORACLE_PAD`], refined
/// around the best point.
pub fn smoothed_ks_oracle_1d(p: &DiscreteDist1D, q: &DiscreteDist1D, t: SmoothingCdf, grid: usize) -> Result<OracleValue> {
    if grid < 2 {
        return domain_err("oracle grid needs at least two points");
    }
    if t.kind == SmoothingKind::Step {
        // E T(X + t) = P(X >= -t); the sup of |F_p - F_q| over atoms is the
        // same as over left limits.
        let mut best = OracleValue { value: 0.0, t: 0.0 };
        for &a in p.atoms().iter().chain(q.atoms()) {
            let v = (p.cdf(a) - q.cdf(a)).abs();
            if v > best.value {
                best = OracleValue { value: v, t: -a };
            }
        }
        return Ok(best);
    }
    let lo = -p.max().max(q.max()) - ORACLE_PAD;
    let hi = -p.min().min(q.min()) + ORACLE_PAD;
    let h = |s: f64| (p.expect(|x| t.eval(x + s)) - q.expect(|x| t.eval(x + s))).abs();
    Ok(scan_max(h, lo, hi, grid))
}

/// One-layer distance between one-dimensional laws with `v` restricted to
/// `{-1, +1}`: the larger of the sigmoid oracle on `(p, q)` and on the
/// reflected pair.
pub fn a1_oracle_1d(p: &DiscreteDist1D, q: &DiscreteDist1D, grid: usize) -> Result<f64> {
    let plus = smoothed_ks_oracle_1d(p, q, SmoothingCdf::T1, grid)?;
    let minus = smoothed_ks_oracle_1d(&p.negated(), &q.negated(), SmoothingCdf::T1, grid)?;
    Ok(plus.value.max(minus.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contamination::{sample_clean, CleanFamily};
    use crate::dataset::Points;

    fn one_d(xs: &[f64]) -> Dataset {
        Dataset::new(Points::from_flat(xs.len(), 1, xs.to_vec()).unwrap()).unwrap()
    }

    fn quick() -> AscentConfig {
        AscentConfig {
            restarts: 3,
            steps: 150,
            ..AscentConfig::default()
        }
    }

    #[test]
    fn oracle_examples() {
        let d0 = DiscreteDist1D::point(0.0);
        let d1 = DiscreteDist1D::point(1.0);
        assert_eq!(smoothed_ks_oracle_1d(&d0, &d0, SmoothingCdf::T1, 4001).unwrap().value, 0.0);
        let o = smoothed_ks_oracle_1d(&d0, &d1, SmoothingCdf::T1, 4001).unwrap();
        assert!((o.value - 0.25f64.tanh()).abs() < 1e-12, "{o:?}");
        assert!((o.t + 0.5).abs() < 1e-6);
        assert_eq!(smoothed_ks_oracle_1d(&d0, &d1, SmoothingCdf::STEP, 4001).unwrap().value, 1.0);
    }

    #[test]
    fn discrete_dist_validation() {
        assert!(DiscreteDist1D::new(vec![0.0, 1.0], vec![0.5, 0.4]).is_err());
        assert!(DiscreteDist1D::new(vec![0.0], vec![-1.0]).is_err());
        let d = DiscreteDist1D::new(vec![2.0, 0.0, 2.0], vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(d.atoms(), &[0.0, 2.0]);
        assert_eq!(d.masses(), &[0.5, 0.5]);
        assert_eq!(d.cdf(1.0), 0.5);
        assert_eq!(d.mean(), 1.0);
    }

    #[test]
    fn identical_sets_give_zero() {
        let s = sample_clean(&CleanFamily::gaussian(3, 1.0), 40, 3, 5).unwrap();
        let (v, _) = estimate_distance(DistanceKind::A1, FeatureFamily::Mean, &s, &s, &quick(), 1).unwrap();
        assert_eq!(v, 0.0);
        let (v, _) = estimate_distance(DistanceKind::A2, FeatureFamily::Mean, &s, &s, &quick(), 1).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(abar_deviation(DistanceKind::A3, FeatureFamily::Mean, &s, &s, &quick(), 1).unwrap(), 0.0);
    }

    #[test]
    fn two_points_match_oracle() {
        let (v, params) = estimate_distance(DistanceKind::A1, FeatureFamily::Mean, &one_d(&[0.0]), &one_d(&[10.0]), &quick(), 3).unwrap();
        let expected = sigmoid_gap(5.0);
        assert!((v - expected).abs() < 1e-3, "{v} vs {expected}");
        assert!(params.satisfies_constraints(FeatureFamily::Mean));
    }

    fn sigmoid_gap(x: f64) -> f64 {
        crate::discriminator::sigmoid(x) - crate::discriminator::sigmoid(-x)
    }

    #[test]
    fn log_score_on_identical_sets() {
        let s = sample_clean(&CleanFamily::gaussian(2, 1.0), 50, 2, 8).unwrap();
        let (v, _) = estimate_distance(DistanceKind::A3, FeatureFamily::Mean, &s, &s, &quick(), 2).unwrap();
        assert!((v + 2.0 * 2f64.ln()).abs() < 1e-3, "{v}");
    }

    #[test]
    fn symmetric_in_arguments() {
        let a = sample_clean(&CleanFamily::gaussian(2, 1.0), 30, 2, 1).unwrap();
        let b = sample_clean(&CleanFamily::gaussian(2, 2.0), 30, 2, 2).unwrap();
        for kind in [DistanceKind::A1, DistanceKind::A2] {
            let (ab, _) = estimate_distance(kind, FeatureFamily::Mean, &a, &b, &quick(), 4).unwrap();
            let (ba, _) = estimate_distance(kind, FeatureFamily::Mean, &b, &a, &quick(), 4).unwrap();
            assert_eq!(ab, ba);
        }
    }

    #[test]
    fn more_restarts_never_lower() {
        let a = sample_clean(&CleanFamily::gaussian(3, 1.0), 30, 3, 11).unwrap();
        let b = sample_clean(&CleanFamily::gaussian(3, 1.5), 30, 3, 12).unwrap();
        let mut last = f64::NEG_INFINITY;
        for restarts in [1, 2, 4] {
            let cfg = AscentConfig { restarts, ..quick() };
            let (v, _) = estimate_distance(DistanceKind::A2, FeatureFamily::Mean, &a, &b, &cfg, 9).unwrap();
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn shape_errors() {
        let a = one_d(&[0.0]);
        let b = Dataset::new(Points::zeros(1, 2)).unwrap();
        assert!(estimate_distance(DistanceKind::A1, FeatureFamily::Mean, &a, &b, &quick(), 0).is_err());
        assert!(estimate_distance(DistanceKind::A1, FeatureFamily::Regression { radius: 1.0 }, &a, &a, &quick(), 0).is_err());
    }

    #[test]
    fn single_outlier_moves_abar_little() {
        let s = sample_clean(&CleanFamily::gaussian(2, 1.0), 100, 2, 21).unwrap();
        let mut t = s.clone();
        t.points.row_mut(0)[0] = 1e6;
        let v = abar_deviation(DistanceKind::A1, FeatureFamily::Mean, &s, &t, &quick(), 3).unwrap();
        assert!(v <= 0.01 + 1e-12, "{v}");
    }
}
