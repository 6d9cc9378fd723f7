//! One- and two-layer sigmoid discriminators over the mean, second-moment
//! and regression feature families.
//!
//! A one-layer unit computes `sigmoid(f(x) + t)`; the two-layer network
//! computes `sigmoid(sum_j w_j g1_j(x))` with `||w||_1 <= 1`. A [`Readout`]
//! selects the network output itself or one of the log scores.

mod projection;
mod smoothing;

pub use projection::{project_l1_ball, project_l2_ball};
pub use smoothing::{SmoothingCdf, SmoothingKind};

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{shape_err, Result};
use crate::linalg::{dot, norm2};
use crate::rng::Rng;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log(sigmoid(x))` without underflow.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

/// Feature map `f` feeding each sigmoid unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureFamily {
    /// `f(x) = v^T x`, `||v||_2 <= 1`.
    Mean,
    /// `f(x) = (v^T x)^2`, `||v||_2 <= 1`.
    SecondMoment,
    /// `f(x, y) = (y - v1^T x)^2 - (y - v2^T x)^2` with `v1, v2` clipped to
    /// the ball of the given radius.
    Regression { radius: f64 },
}

impl FeatureFamily {
    pub fn is_regression(&self) -> bool {
        matches!(self, Self::Regression { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::SecondMoment => "second_moment",
            Self::Regression { .. } => "regression",
        }
    }

    fn radius(&self) -> f64 {
        match *self {
            Self::Regression { radius } => radius,
            _ => 1.0,
        }
    }
}

/// Parameters of one sigmoid unit. `v2` is empty except for the regression
/// family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneLayerParams {
    pub v: Vec<f64>,
    pub v2: Vec<f64>,
    pub t: f64,
}

impl OneLayerParams {
    pub fn zeros(family: FeatureFamily, d: usize) -> Self {
        Self {
            v: vec![0.0; d],
            v2: if family.is_regression() { vec![0.0; d] } else { Vec::new() },
            t: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    fn flat_len(&self) -> usize {
        self.v.len() + self.v2.len() + 1
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.v);
        out.extend_from_slice(&self.v2);
        out.push(self.t);
    }

    fn read_flat(&mut self, src: &[f64]) -> usize {
        let (d1, d2) = (self.v.len(), self.v2.len());
        self.v.copy_from_slice(&src[..d1]);
        self.v2.copy_from_slice(&src[d1..d1 + d2]);
        self.t = src[d1 + d2];
        d1 + d2 + 1
    }

    /// `f(x, y)` for this unit.
    #[inline]
    pub fn feature(&self, family: FeatureFamily, x: &[f64], y: f64) -> f64 {
        match family {
            FeatureFamily::Mean => dot(&self.v, x),
            FeatureFamily::SecondMoment => {
                let p = dot(&self.v, x);
                p * p
            }
            FeatureFamily::Regression { .. } => {
                let r1 = y - dot(&self.v, x);
                let r2 = y - dot(&self.v2, x);
                r1 * r1 - r2 * r2
            }
        }
    }

    /// Adds `scale * d(f + t)/d(params)` into `grad`.
    #[inline]
    fn accumulate_param_grad(&self, family: FeatureFamily, x: &[f64], y: f64, scale: f64, grad: &mut Self) {
        match family {
            FeatureFamily::Mean => {
                for (g, xi) in grad.v.iter_mut().zip(x) {
                    *g += scale * xi;
                }
            }
            FeatureFamily::SecondMoment => {
                let c = scale * 2.0 * dot(&self.v, x);
                for (g, xi) in grad.v.iter_mut().zip(x) {
                    *g += c * xi;
                }
            }
            FeatureFamily::Regression { .. } => {
                let c1 = -2.0 * scale * (y - dot(&self.v, x));
                let c2 = 2.0 * scale * (y - dot(&self.v2, x));
                for ((g1, g2), xi) in grad.v.iter_mut().zip(grad.v2.iter_mut()).zip(x) {
                    *g1 += c1 * xi;
                    *g2 += c2 * xi;
                }
            }
        }
        grad.t += scale;
    }

    /// Adds `scale * df/dx` into `gx` and returns `scale * df/dy`.
    #[inline]
    fn accumulate_input_grad(&self, family: FeatureFamily, x: &[f64], y: f64, scale: f64, gx: &mut [f64]) -> f64 {
        match family {
            FeatureFamily::Mean => {
                for (g, vi) in gx.iter_mut().zip(&self.v) {
                    *g += scale * vi;
                }
                0.0
            }
            FeatureFamily::SecondMoment => {
                let c = scale * 2.0 * dot(&self.v, x);
                for (g, vi) in gx.iter_mut().zip(&self.v) {
                    *g += c * vi;
                }
                0.0
            }
            FeatureFamily::Regression { .. } => {
                let r1 = y - dot(&self.v, x);
                let r2 = y - dot(&self.v2, x);
                for ((g, a), b) in gx.iter_mut().zip(&self.v).zip(&self.v2) {
                    *g += scale * (-2.0 * r1 * a + 2.0 * r2 * b);
                }
                scale * 2.0 * (r1 - r2)
            }
        }
    }

    fn project(&mut self, family: FeatureFamily) {
        let r = family.radius();
        project_l2_ball(&mut self.v, r);
        project_l2_ball(&mut self.v2, r);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerParams {
    pub w: Vec<f64>,
    pub units: Vec<OneLayerParams>,
}

impl TwoLayerParams {
    pub fn zeros(family: FeatureFamily, d: usize, width: usize) -> Self {
        Self {
            w: vec![0.0; width],
            units: (0..width).map(|_| OneLayerParams::zeros(family, d)).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.w.len()
    }
}

/// Either network shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layers", rename_all = "snake_case")]
pub enum DiscriminatorParams {
    OneLayer(OneLayerParams),
    TwoLayer(TwoLayerParams),
}

/// What the network reports: its probability output `g`, `log g` or
/// `log(1 - g)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    Prob,
    LogProb,
    LogOneMinusProb,
}

impl Readout {
    /// Value and derivative with respect to the pre-activation `s`.
    #[inline]
    pub(crate) fn apply(self, s: f64) -> (f64, f64) {
        match self {
            Self::Prob => {
                let g = sigmoid(s);
                (g, g * (1.0 - g))
            }
            Self::LogProb => (log_sigmoid(s), sigmoid(-s)),
            Self::LogOneMinusProb => (log_sigmoid(-s), -sigmoid(s)),
        }
    }
}

impl DiscriminatorParams {
    pub fn dim(&self) -> usize {
        match self {
            Self::OneLayer(p) => p.dim(),
            Self::TwoLayer(p) => p.units.first().map_or(0, OneLayerParams::dim),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.set_flat(&vec![0.0; z.flat_len()]);
        z
    }

    pub fn flat_len(&self) -> usize {
        match self {
            Self::OneLayer(p) => p.flat_len(),
            Self::TwoLayer(p) => p.w.len() + p.units.iter().map(OneLayerParams::flat_len).sum::<usize>(),
        }
    }

    /// Parameters in a fixed order: one layer `[v, v2, t]`; two layers
    /// `[w, unit_0, unit_1, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        match self {
            Self::OneLayer(p) => p.write_flat(&mut out),
            Self::TwoLayer(p) => {
                out.extend_from_slice(&p.w);
                p.units.iter().for_each(|u| u.write_flat(&mut out));
            }
        }
        out
    }

    pub fn set_flat(&mut self, src: &[f64]) {
        match self {
            Self::OneLayer(p) => {
                p.read_flat(src);
            }
            Self::TwoLayer(p) => {
                let l = p.w.len();
                p.w.copy_from_slice(&src[..l]);
                let mut off = l;
                for u in &mut p.units {
                    off += u.read_flat(&src[off..]);
                }
            }
        }
    }

    /// Network output under `readout` at one point.
    pub fn eval(&self, family: FeatureFamily, x: &[f64], y: f64, readout: Readout) -> f64 {
        readout.apply(self.pre_activation(family, x, y)).0
    }

    #[inline]
    fn pre_activation(&self, family: FeatureFamily, x: &[f64], y: f64) -> f64 {
        match self {
            Self::OneLayer(p) => p.feature(family, x, y) + p.t,
            Self::TwoLayer(p) => p
                .w
                .iter()
                .zip(&p.units)
                .map(|(w, u)| w * sigmoid(u.feature(family, x, y) + u.t))
                .sum(),
        }
    }

    /// Adds `scale * d(readout)/d(params)` at one point into `grad` and
    /// returns the readout value.
    fn accumulate_point(
        &self,
        family: FeatureFamily,
        x: &[f64],
        y: f64,
        readout: Readout,
        scale: f64,
        grad: &mut Self,
        scratch: &mut Vec<f64>,
    ) -> f64 {
        match (self, grad) {
            (Self::OneLayer(p), Self::OneLayer(g)) => {
                let (val, ds) = readout.apply(p.feature(family, x, y) + p.t);
                p.accumulate_param_grad(family, x, y, scale * ds, g);
                val
            }
            (Self::TwoLayer(p), Self::TwoLayer(g)) => {
                scratch.clear();
                scratch.extend(p.units.iter().map(|u| sigmoid(u.feature(family, x, y) + u.t)));
                let s: f64 = p.w.iter().zip(scratch.iter()).map(|(w, h)| w * h).sum();
                let (val, ds) = readout.apply(s);
                let c = scale * ds;
                for (j, (u, gu)) in p.units.iter().zip(g.units.iter_mut()).enumerate() {
                    let h = scratch[j];
                    g.w[j] += c * h;
                    let inner = c * p.w[j] * h * (1.0 - h);
                    if inner != 0.0 {
                        u.accumulate_param_grad(family, x, y, inner, gu);
                    }
                }
                val
            }
            _ => unreachable!("gradient buffer shape matches parameters"),
        }
    }

    /// Readout value at one point; `d(readout)/dx` is written into `gx` and
    /// `d(readout)/dy` returned alongside.
    pub fn input_grad(&self, family: FeatureFamily, x: &[f64], y: f64, readout: Readout, gx: &mut [f64]) -> (f64, f64) {
        gx.iter_mut().for_each(|g| *g = 0.0);
        match self {
            Self::OneLayer(p) => {
                let (val, ds) = readout.apply(p.feature(family, x, y) + p.t);
                let gy = p.accumulate_input_grad(family, x, y, ds, gx);
                (val, gy)
            }
            Self::TwoLayer(p) => {
                let hs: Vec<f64> = p.units.iter().map(|u| sigmoid(u.feature(family, x, y) + u.t)).collect();
                let s: f64 = p.w.iter().zip(&hs).map(|(w, h)| w * h).sum();
                let (val, ds) = readout.apply(s);
                let mut gy = 0.0;
                for ((u, w), h) in p.units.iter().zip(&p.w).zip(&hs) {
                    let c = ds * w * h * (1.0 - h);
                    if c != 0.0 {
                        gy += u.accumulate_input_grad(family, x, y, c, gx);
                    }
                }
                (val, gy)
            }
        }
    }

    /// Projects onto the constraint set: unit-ball (or clip-ball) `v`'s and
    /// `||w||_1 <= 1`. Offsets are unconstrained.
    pub fn project(&mut self, family: FeatureFamily) {
        match self {
            Self::OneLayer(p) => p.project(family),
            Self::TwoLayer(p) => {
                project_l1_ball(&mut p.w, 1.0);
                p.units.iter_mut().for_each(|u| u.project(family));
            }
        }
    }

    pub fn satisfies_constraints(&self, family: FeatureFamily) -> bool {
        let r = family.radius() * (1.0 + 1e-12);
        let unit_ok = |u: &OneLayerParams| norm2(&u.v) <= r && norm2(&u.v2) <= r;
        match self {
            Self::OneLayer(p) => unit_ok(p),
            Self::TwoLayer(p) => p.w.iter().map(|w| w.abs()).sum::<f64>() <= 1.0 + 1e-12 && p.units.iter().all(unit_ok),
        }
    }

    /// Random initialization: directions uniform on the sphere (shifted by
    /// `center` when given, for the regression family), offsets zero, and
    /// `w` uniform on the l1 sphere scaled by one half.
    pub fn random(family: FeatureFamily, d: usize, width: Option<usize>, center: Option<&[f64]>, rng: &mut Rng) -> Self {
        let unit = |rng: &mut Rng| {
            let mut u = OneLayerParams::zeros(family, d);
            let draw = |rng: &mut Rng, out: &mut Vec<f64>| {
                for o in out.iter_mut() {
                    *o = rng.sample(StandardNormal);
                }
                let n = norm2(out).max(1e-300);
                out.iter_mut().for_each(|o| *o /= n);
                if let Some(c) = center {
                    for (o, ci) in out.iter_mut().zip(c) {
                        *o += ci;
                    }
                }
            };
            draw(rng, &mut u.v);
            if family.is_regression() {
                draw(rng, &mut u.v2);
            }
            u
        };
        let mut params = match width {
            None => Self::OneLayer(unit(rng)),
            Some(l) => {
                let units = (0..l).map(|_| unit(rng)).collect();
                // Uniform on the simplex via normalized exponentials, random signs.
                let mut w: Vec<f64> = (0..l).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
                let s: f64 = w.iter().sum();
                for wi in &mut w {
                    *wi = 0.5 * *wi / s * if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
                Self::TwoLayer(TwoLayerParams { w, units })
            }
        };
        params.project(family);
        params
    }

    /// Sets every offset `t` (all units) to `t`.
    pub fn set_offsets(&mut self, t: f64) {
        match self {
            Self::OneLayer(p) => p.t = t,
            Self::TwoLayer(p) => p.units.iter_mut().for_each(|u| u.t = t),
        }
    }
}

/// Checks that `batch` is compatible with `params` and `family`.
pub fn check_batch(params: &DiscriminatorParams, family: FeatureFamily, batch: &Dataset) -> Result<()> {
    if batch.d() != params.dim() {
        return shape_err(format!("batch dimension {} vs discriminator {}", batch.d(), params.dim()));
    }
    if family.is_regression() != batch.is_regression() {
        return shape_err("regression features need responses (and only regression features use them)");
    }
    if batch.n() == 0 {
        return shape_err("empty batch");
    }
    Ok(())
}

/// Weighted batch mean of the readout and its gradient with respect to
/// every discriminator parameter. With `weights = None` all samples weigh
/// the same.
pub fn grad_params(
    params: &DiscriminatorParams,
    family: FeatureFamily,
    batch: &Dataset,
    weights: Option<&[f64]>,
    readout: Readout,
) -> Result<(f64, DiscriminatorParams)> {
    check_batch(params, family, batch)?;
    if let Some(w) = weights {
        if w.len() != batch.n() {
            return shape_err("one weight per sample required");
        }
    }
    let total: f64 = weights.map_or(batch.n() as f64, |w| w.iter().sum());
    let mut grad = params.zeros_like();
    let mut scratch = Vec::new();
    let mut value = 0.0;
    for i in 0..batch.n() {
        let wi = weights.map_or(1.0, |w| w[i]) / total;
        if wi == 0.0 {
            continue;
        }
        let x = batch.points.row(i);
        let y = batch.response(i);
        value += wi * params.accumulate_point(family, x, y, readout, wi, &mut grad, &mut scratch);
    }
    Ok((value, grad))
}

/// Batch mean of the readout.
pub fn batch_mean(params: &DiscriminatorParams, family: FeatureFamily, batch: &Dataset, readout: Readout) -> f64 {
    let n = batch.n() as f64;
    (0..batch.n())
        .map(|i| params.eval(family, batch.points.row(i), batch.response(i), readout))
        .sum::<f64>()
        / n
}

/// `g1 = sigmoid(f(x) + t)`.
pub fn g1_eval(params: &OneLayerParams, family: FeatureFamily, x: &[f64], y: f64) -> Result<f64> {
    if x.len() != params.dim() {
        return shape_err("point dimension mismatch");
    }
    Ok(sigmoid(params.feature(family, x, y) + params.t))
}

/// `g2 = sigmoid(sum_j w_j g1_j)`.
pub fn g2_eval(params: &TwoLayerParams, family: FeatureFamily, x: &[f64], y: f64) -> Result<f64> {
    if params.units.iter().any(|u| u.dim() != x.len()) || params.units.len() != params.w.len() {
        return shape_err("point dimension or width mismatch");
    }
    let s: f64 = params
        .w
        .iter()
        .zip(&params.units)
        .map(|(w, u)| w * sigmoid(u.feature(family, x, y) + u.t))
        .sum();
    Ok(sigmoid(s))
}
