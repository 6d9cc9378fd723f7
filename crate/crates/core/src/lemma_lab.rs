//! Small-instance numerical checks of the structural results behind the
//! estimators: the smoothed mean-cross lemma, validity of the smoothing
//! CDFs, the three conditions of the projection theorem, and sampled
//! resilience diagnostics.
//!
//! Every check returns a serializable report with its margins and, where
//! something fails, a witness.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::discriminator::{log_sigmoid, sigmoid, softplus, FeatureFamily, OneLayerParams, SmoothingCdf, SmoothingKind};
pub use crate::distance::DiscreteDist1D;
use crate::distance::{estimate_distance, guided_direction, scan_max, smoothed_ks_oracle_1d, AscentConfig, DistanceKind};
use crate::error::{domain_err, shape_err, Result};
use crate::generator::Task;
use crate::linalg::{least_squares, norm2};
use crate::rng::{derive_seed, seeded};

/// Grid size for the smoothed KS oracle.
pub const ORACLE_GRID: usize = 4001;
/// Slack for the stochastic-dominance comparison.
pub const DOMINANCE_TOL: f64 = 1e-9;
/// Slack for the mean-gap inequality.
pub const MEAN_TOL: f64 = 1e-9;
/// Tail mass below which a continuous noise law is truncated.
pub const TRUNCATION: f64 = 1e-12;
/// Quadrature cell width for continuous noise laws.
pub const QUAD_STEP: f64 = 1.0 / 1024.0;
/// Deletions closer than this to the whole mass leave nothing measurable
/// and count as a failed precondition.
pub const PRECONDITION_MARGIN: f64 = 1e-9;
/// Number of survival-function evaluation points for continuous noise.
const DOMINANCE_GRID: usize = 20001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The lemma's precondition `|a| eps < 1` does not hold.
    Inconclusive,
}

/// `P(X - Z >= s)` for discrete `X` computed atom by atom from the CDF of
/// `Z`, without forming the convolution.
pub fn difference_upper_tail(x: &DiscreteDist1D, z_cdf: impl Fn(f64) -> f64, s: f64) -> f64 {
    x.atoms().iter().zip(x.masses()).map(|(a, m)| m * z_cdf(a - s)).sum()
}

/// Law of `X - Z` for independent discrete `X` and `Z`.
pub fn difference_law(x: &DiscreteDist1D, z: &DiscreteDist1D) -> Result<DiscreteDist1D> {
    let mut atoms = Vec::with_capacity(x.len() * z.len());
    let mut masses = Vec::with_capacity(x.len() * z.len());
    for (a, m) in x.atoms().iter().zip(x.masses()) {
        for (b, w) in z.atoms().iter().zip(z.masses()) {
            atoms.push(a - b);
            masses.push(m * w);
        }
    }
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    DiscreteDist1D::new(atoms, masses)
}

/// Survival function `P(Y >= s)` of a discrete law.
fn survival(d: &DiscreteDist1D, s: f64) -> f64 {
    let k = d.atoms().partition_point(|a| *a < s);
    d.masses()[k..].iter().sum::<f64>().min(1.0)
}

/// Continuous noise with CDF `a T + b`, truncated where either tail holds
/// less than [`TRUNCATION`]. Partial expectations use Simpson's rule on
/// cells of width [`QUAD_STEP`]; the sigmoid has closed forms.
struct ContinuousNoise {
    t: SmoothingCdf,
    lo: f64,
    hi: f64,
    /// `cum[k] = int_lo^{lo + k h} F`.
    cum: Vec<f64>,
}

impl ContinuousNoise {
    fn new(t: SmoothingCdf) -> Self {
        let mut lo = -1.0;
        while t.cdf(lo) >= TRUNCATION {
            lo *= 2.0;
        }
        let mut hi = 1.0;
        while 1.0 - t.cdf(hi) >= TRUNCATION {
            hi *= 2.0;
        }
        let cum = if t.kind == SmoothingKind::Sigmoid {
            Vec::new()
        } else {
            let cells = ((hi - lo) / QUAD_STEP).round() as usize;
            let mut cum = Vec::with_capacity(cells + 1);
            cum.push(0.0);
            for k in 0..cells {
                let a = lo + k as f64 * QUAD_STEP;
                let next = cum[k] + simpson(|z| t.cdf(z), a, a + QUAD_STEP);
                cum.push(next);
            }
            cum
        };
        Self { t, lo, hi, cum }
    }

    fn cdf(&self, z: f64) -> f64 {
        self.t.cdf(z)
    }

    /// `int_-inf^c F`.
    fn integral(&self, c: f64) -> f64 {
        if self.t.kind == SmoothingKind::Sigmoid {
            return softplus(c);
        }
        if c <= self.lo {
            return 0.0;
        }
        if c >= self.hi {
            return self.cum[self.cum.len() - 1] + (c - self.hi);
        }
        let k = ((c - self.lo) / QUAD_STEP).floor() as usize;
        let a = self.lo + k as f64 * QUAD_STEP;
        self.cum[k] + simpson(|z| self.t.cdf(z), a, c)
    }

    /// `E[Z; Z <= c] = c F(c) - int_-inf^c F`.
    fn lower_partial(&self, c: f64) -> f64 {
        if self.t.kind == SmoothingKind::Sigmoid {
            // Also valid far in the tails, where the general form cancels.
            return c * sigmoid(c) - softplus(c);
        }
        c * self.cdf(c) - self.integral(c)
    }

    fn mean(&self) -> f64 {
        if self.t.kind == SmoothingKind::Sigmoid {
            return 0.0;
        }
        self.hi - self.integral(self.hi)
    }

    fn quantile(&self, u: f64) -> f64 {
        bisect(|z| self.cdf(z) - u, self.lo - 64.0, self.hi + 64.0)
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

/// Root of an increasing function on `[lo, hi]`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest mean shift of a discrete law under deletion of `delta` mass
/// (renormalized): the larger of deleting the bottom and the top.
fn discrete_deletion_shift(z: &DiscreteDist1D, delta: f64) -> f64 {
    if delta <= 0.0 {
        return 0.0;
    }
    let mean = z.mean();
    let trim = |atoms: &mut dyn Iterator<Item = (f64, f64)>| {
        let mut left = delta;
        let mut removed = 0.0;
        for (a, m) in atoms {
            let take = m.min(left);
            removed += take * a;
            left -= take;
            if left <= 0.0 {
                break;
            }
        }
        (mean - removed) / (1.0 - delta) - mean
    };
    let pairs: Vec<(f64, f64)> = z.atoms().iter().copied().zip(z.masses().iter().copied()).collect();
    let bottom = trim(&mut pairs.iter().copied());
    let top = trim(&mut pairs.iter().rev().copied());
    bottom.abs().max(top.abs())
}

/// Largest mean shift of the noise law `Z` of `t` under deletion of
/// `delta` mass. This is the tightest radius for which `Z` is resilient at
/// `delta`.
pub fn noise_deletion_shift(t: SmoothingCdf, delta: f64) -> f64 {
    if delta <= 0.0 {
        return 0.0;
    }
    if t.kind == SmoothingKind::Step {
        return discrete_deletion_shift(&DiscreteDist1D::point(0.0), delta);
    }
    let z = ContinuousNoise::new(t);
    let mean = z.mean();
    let q_lo = z.quantile(delta);
    let q_hi = z.quantile(1.0 - delta);
    let bottom = (delta * mean - z.lower_partial(q_lo)) / (1.0 - delta);
    let top = (z.lower_partial(q_hi) - (1.0 - delta) * mean) / (1.0 - delta);
    bottom.abs().max(top.abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanCrossReport {
    pub smoothing: String,
    pub verdict: Verdict,
    /// Smoothed KS distance between `p` and `q` in units of `T`.
    pub eps: f64,
    /// `|a|` of the affine map turning `T` into a CDF.
    pub scale: f64,
    /// Deleted mass `|a| eps`.
    pub deletion: f64,
    pub dominance_holds: bool,
    /// Smallest `P_rq(Y >= s) - P_rp(Y >= s)` over the checked points.
    pub dominance_margin: f64,
    /// Point attaining the dominance margin.
    pub dominance_witness: f64,
    /// `E_rp[X] - E_rq[X]`.
    pub mean_gap: f64,
    /// `E_rq[X] - E_rp[X]`, the gap with the roles of the two deletions
    /// exchanged. Not bounded in general.
    pub reverse_gap: f64,
    /// `E_rp[Z] - E_rq[Z]`.
    pub noise_gap: f64,
    /// Exact worst-case deletion shift of `Z` at `deletion`.
    pub rho_exact: f64,
    /// `c_Z deletion ln(1 + 1/deletion)`.
    pub rho_nominal: f64,
    pub mean_holds: bool,
    /// Whether `mean_gap <= 2 rho_nominal`.
    pub nominal_bound_holds: bool,
    /// Masses of the two deleted laws after renormalization.
    pub mass_p: f64,
    pub mass_q: f64,
}

impl MeanCrossReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Deletions on the joint law of `(X, Z)` for discrete `Z`. Atoms are
/// `(y = x - z, x, z, mass)`.
struct JointDeletion {
    mean_x: f64,
    mean_z: f64,
    law: DiscreteDist1D,
    mass: f64,
}

fn joint_delete(x: &DiscreteDist1D, z: &DiscreteDist1D, delta: f64, top: bool) -> Result<JointDeletion> {
    let mut atoms: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(x.len() * z.len());
    for (a, m) in x.atoms().iter().zip(x.masses()) {
        for (b, w) in z.atoms().iter().zip(z.masses()) {
            atoms.push((a - b, *a, *b, m * w));
        }
    }
    atoms.sort_by(|l, r| if top { r.0.total_cmp(&l.0) } else { l.0.total_cmp(&r.0) });
    // Remove `delta` mass from the front, group by group; a partially
    // removed group loses the same fraction of each of its atoms.
    let mut left = delta;
    let mut i = 0;
    while i < atoms.len() && left > 0.0 {
        let mut j = i;
        while j < atoms.len() && atoms[j].0 == atoms[i].0 {
            j += 1;
        }
        let group: f64 = atoms[i..j].iter().map(|a| a.3).sum();
        let take = group.min(left);
        let keep = if group > 0.0 { 1.0 - take / group } else { 1.0 };
        atoms[i..j].iter_mut().for_each(|a| a.3 *= keep);
        left -= take;
        i = j;
    }
    let kept: f64 = atoms.iter().map(|a| a.3).sum();
    if kept <= 0.0 {
        return domain_err("deletion removed all mass");
    }
    let mean_x = atoms.iter().map(|a| a.1 * a.3).sum::<f64>() / kept;
    let mean_z = atoms.iter().map(|a| a.2 * a.3).sum::<f64>() / kept;
    let (ys, ms): (Vec<f64>, Vec<f64>) = atoms.iter().filter(|a| a.3 > 0.0).map(|a| (a.0, a.3 / kept)).unzip();
    let mass: f64 = ms.iter().sum();
    let total_ms: Vec<f64> = ms.iter().map(|m| m / mass).collect();
    Ok(JointDeletion {
        mean_x,
        mean_z,
        law: DiscreteDist1D::new(ys, total_ms)?,
        mass,
    })
}

/// Checks the smoothed mean-cross lemma on one pair of one-dimensional
/// discrete laws.
///
/// With `eps` the smoothed KS distance under `T` and `delta = |a| eps`,
/// the top `delta` of the law of `X - Z` under `p` and the bottom `delta`
/// under `q` are deleted (on the joint law of `(X, Z)`). The check passes
/// when the `q` remainder stochastically dominates the `p` remainder and
/// `E_rp[X] - E_rq[X] <= 2 rho(delta)`, with `rho` the exact worst-case
/// deletion shift of `Z`.
pub fn verify_mean_cross(p: &DiscreteDist1D, q: &DiscreteDist1D, t: SmoothingCdf) -> Result<MeanCrossReport> {
    let eps = smoothed_ks_oracle_1d(p, q, t, ORACLE_GRID)?.value;
    let (a, _) = t.affine();
    let scale = a.abs();
    let delta = scale * eps;
    let mut report = MeanCrossReport {
        smoothing: t.name().to_string(),
        verdict: Verdict::Inconclusive,
        eps,
        scale,
        deletion: delta,
        dominance_holds: false,
        dominance_margin: f64::NAN,
        dominance_witness: f64::NAN,
        mean_gap: f64::NAN,
        reverse_gap: f64::NAN,
        noise_gap: f64::NAN,
        rho_exact: f64::NAN,
        rho_nominal: f64::NAN,
        mean_holds: false,
        nominal_bound_holds: false,
        mass_p: f64::NAN,
        mass_q: f64::NAN,
    };
    if delta >= 1.0 - PRECONDITION_MARGIN {
        return Ok(report);
    }
    let (rp_x, rq_x, rp_z, rq_z, margin, witness, mass_p, mass_q);
    if t.kind == SmoothingKind::Step {
        let z = DiscreteDist1D::point(0.0);
        let rp = joint_delete(p, &z, delta, true)?;
        let rq = joint_delete(q, &z, delta, false)?;
        let mut best = (f64::INFINITY, f64::NAN);
        for &s in rp.law.atoms().iter().chain(rq.law.atoms()) {
            let m = survival(&rq.law, s) - survival(&rp.law, s);
            if m < best.0 {
                best = (m, s);
            }
        }
        (margin, witness) = best;
        (rp_x, rq_x, rp_z, rq_z) = (rp.mean_x, rq.mean_x, rp.mean_z, rq.mean_z);
        (mass_p, mass_q) = (rp.mass, rq.mass);
    } else {
        let z = ContinuousNoise::new(t);
        let tail_p = |y: f64| difference_upper_tail(p, |c| z.cdf(c), y);
        let tail_q = |y: f64| difference_upper_tail(q, |c| z.cdf(c), y);
        let lo = p.min().min(q.min()) - z.hi - 1.0;
        let hi = p.max().max(q.max()) - z.lo + 1.0;
        // Top of p~: P(Y > y) = delta. Bottom of q~: P(Y < y) = delta.
        let (y_top, y_bot) = if delta > 0.0 {
            (bisect(|y| delta - tail_p(y), lo, hi), bisect(|y| (1.0 - tail_q(y)) - delta, lo, hi))
        } else {
            (f64::INFINITY, f64::NEG_INFINITY)
        };
        let ez = z.mean();
        let pairs = |d: &DiscreteDist1D| -> Vec<(f64, f64)> { d.atoms().iter().copied().zip(d.masses().iter().copied()).collect() };
        // Deleted from p: {z < x - y_top}; from q: {z > x - y_bot}.
        let (mut dx_p, mut dz_p) = (0.0, 0.0);
        if delta > 0.0 {
            for (x, m) in pairs(p) {
                dx_p += m * x * z.cdf(x - y_top);
                dz_p += m * z.lower_partial(x - y_top);
            }
        }
        let (mut dx_q, mut dz_q) = (0.0, 0.0);
        if delta > 0.0 {
            for (x, m) in pairs(q) {
                dx_q += m * x * (1.0 - z.cdf(x - y_bot));
                dz_q += m * (ez - z.lower_partial(x - y_bot));
            }
        }
        rp_x = (p.mean() - dx_p) / (1.0 - delta);
        rq_x = (q.mean() - dx_q) / (1.0 - delta);
        rp_z = (ez - dz_p) / (1.0 - delta);
        rq_z = (ez - dz_q) / (1.0 - delta);
        let mut best = (f64::INFINITY, f64::NAN);
        for k in 0..DOMINANCE_GRID {
            let s = lo + (hi - lo) * k as f64 / (DOMINANCE_GRID - 1) as f64;
            let sp = (tail_p(s) - delta).max(0.0) / (1.0 - delta);
            let sq = tail_q(s).min(1.0 - delta) / (1.0 - delta);
            if sq - sp < best.0 {
                best = (sq - sp, s);
            }
        }
        (margin, witness) = best;
        (mass_p, mass_q) = (1.0, 1.0);
    }
    let rho_exact = noise_deletion_shift(t, delta);
    let rho_nominal = t.rho_z(delta);
    report.dominance_margin = margin;
    report.dominance_witness = witness;
    report.dominance_holds = margin >= -DOMINANCE_TOL;
    report.mean_gap = rp_x - rq_x;
    report.reverse_gap = rq_x - rp_x;
    report.noise_gap = rp_z - rq_z;
    report.rho_exact = rho_exact;
    report.rho_nominal = rho_nominal;
    report.mean_holds = report.mean_gap <= 2.0 * rho_exact + MEAN_TOL;
    report.nominal_bound_holds = report.mean_gap <= 2.0 * rho_nominal + MEAN_TOL;
    report.mass_p = mass_p;
    report.mass_q = mass_q;
    report.verdict = if report.dominance_holds && report.mean_holds {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassicalReport {
    pub eps: f64,
    pub dominance_holds: bool,
    pub mean_p: f64,
    pub mean_q: f64,
    pub passed: bool,
}

/// The unsmoothed argument: with `eps` the KS distance, deleting the top
/// `eps` of `p` and the bottom `eps` of `q` leaves a `q` remainder that
/// dominates the `p` remainder, so `E_rp[X] <= E_rq[X]`.
pub fn classical_mean_cross(p: &DiscreteDist1D, q: &DiscreteDist1D) -> Result<ClassicalReport> {
    let mut support: Vec<f64> = p.atoms().iter().chain(q.atoms()).copied().collect();
    support.sort_by(f64::total_cmp);
    support.dedup();
    let tail = |d: &DiscreteDist1D, s: f64| -> f64 {
        d.atoms().iter().zip(d.masses()).filter(|(a, _)| **a >= s).map(|(_, m)| m).sum::<f64>()
    };
    let eps = support.iter().map(|&s| (tail(p, s) - tail(q, s)).abs()).fold(0.0, f64::max);
    if eps >= 1.0 - PRECONDITION_MARGIN {
        return domain_err("distributions are disjoint");
    }
    // Remaining masses per atom after deleting `eps` from one end.
    let trim = |d: &DiscreteDist1D, from_top: bool| -> Vec<f64> {
        let mut left = eps;
        let mut m = d.masses().to_vec();
        let order: Vec<usize> = if from_top { (0..m.len()).rev().collect() } else { (0..m.len()).collect() };
        for i in order {
            let take = m[i].min(left);
            m[i] -= take;
            left -= take;
        }
        m.iter().map(|x| x / (1.0 - eps)).collect()
    };
    let (mp, mq) = (trim(p, true), trim(q, false));
    let surv = |d: &DiscreteDist1D, m: &[f64], s: f64| -> f64 { d.atoms().iter().zip(m).filter(|(a, _)| **a >= s).map(|(_, w)| w).sum() };
    let dominance_holds = support.iter().all(|&s| surv(p, &mp, s) <= surv(q, &mq, s) + DOMINANCE_TOL);
    let mean = |d: &DiscreteDist1D, m: &[f64]| -> f64 { d.atoms().iter().zip(m).map(|(a, w)| a * w).sum() };
    let (mean_p, mean_q) = (mean(p, &mp), mean(q, &mq));
    Ok(ClassicalReport {
        eps,
        dominance_holds,
        mean_p,
        mean_q,
        passed: dominance_holds && mean_p <= mean_q + MEAN_TOL,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CdfReport {
    pub smoothing: String,
    pub a: f64,
    pub b: f64,
    pub monotone: bool,
    /// `a T + b` at the two ends of the grid.
    pub limits: (f64, f64),
    pub limits_ok: bool,
    /// `T` itself at the two ends of the grid.
    pub raw_endpoints: (f64, f64),
    /// For `T2`: whether the raw endpoints are `1/2` and `e/(e+1)`.
    pub t2_endpoints_ok: Option<bool>,
    pub passed: bool,
}

/// Tolerance for CDF limits and the `T2` endpoints.
pub const CDF_TOL: f64 = 1e-10;

/// `n` points evenly spaced on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn check_cdf_validity(t: SmoothingCdf, grid: &[f64]) -> Result<CdfReport> {
    if grid.len() < 2 {
        return shape_err("grid needs at least two points");
    }
    let (a, b) = t.affine();
    let vals: Vec<f64> = grid.iter().map(|&x| a * t.eval(x) + b).collect();
    let monotone = vals.windows(2).all(|w| w[1] >= w[0]);
    let limits = (vals[0], vals[vals.len() - 1]);
    let limits_ok = limits.0.abs() <= CDF_TOL && (limits.1 - 1.0).abs() <= CDF_TOL;
    let raw_endpoints = (t.eval(grid[0]), t.eval(grid[grid.len() - 1]));
    let t2_endpoints_ok = (t.kind == SmoothingKind::SigmoidOfSigmoid).then(|| {
        let e = std::f64::consts::E;
        (raw_endpoints.0 - 0.5).abs() <= CDF_TOL && (raw_endpoints.1 - e / (e + 1.0)).abs() <= CDF_TOL
    });
    Ok(CdfReport {
        smoothing: t.name().to_string(),
        a,
        b,
        monotone,
        limits,
        limits_ok,
        raw_endpoints,
        t2_endpoints_ok,
        passed: monotone && limits_ok && t2_endpoints_ok.unwrap_or(true),
    })
}

/// Ranges of the log readouts of a two-layer discriminator whose outer
/// weights lie in the unit l1 ball, so that `g2` ranges over
/// `[sigmoid(-1), sigmoid(1)]`.
#[derive(Debug, Clone, Serialize)]
pub struct LogRangeReport {
    pub g2: (f64, f64),
    pub log_g2: (f64, f64),
    pub log_one_minus_g2: (f64, f64),
    /// With nonnegative outer weights `g2` lies in `[1/2, e/(e+1)]`.
    pub g2_nonnegative_weights: (f64, f64),
    pub log_g2_nonnegative_weights: (f64, f64),
    pub log_one_minus_g2_nonnegative_weights: (f64, f64),
}

pub fn log_readout_ranges() -> LogRangeReport {
    let (lo, hi) = (sigmoid(-1.0), sigmoid(1.0));
    LogRangeReport {
        g2: (lo, hi),
        log_g2: (log_sigmoid(-1.0), log_sigmoid(1.0)),
        log_one_minus_g2: (log_sigmoid(-1.0), log_sigmoid(1.0)),
        g2_nonnegative_weights: (0.5, hi),
        log_g2_nonnegative_weights: (0.5f64.ln(), log_sigmoid(1.0)),
        log_one_minus_g2_nonnegative_weights: (log_sigmoid(-1.0), 0.5f64.ln()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub smoothing: String,
    pub c_z: f64,
    /// Largest `P(|Z| >= t) - exp(-t / c_Z)` over the grid.
    pub worst_excess: f64,
    pub worst_t: f64,
    pub holds: bool,
    /// Largest `max(P(Z <= -t), P(Z >= t)) exp(t)`: the one-sided bound at
    /// unit scale holds when this is at most 1.
    pub one_sided_unit_ratio: f64,
}

/// Two-sided tail bound `P(|Z| >= t) <= exp(-t / c_Z)` for every `t >= 0`
/// in `grid`.
pub fn check_tail_bound(t: SmoothingCdf, grid: &[f64]) -> TailReport {
    let mut worst = (f64::NEG_INFINITY, f64::NAN);
    let mut ratio = 0.0f64;
    for &s in grid.iter().filter(|s| **s >= 0.0) {
        let (lo, hi) = (t.lower_tail(s), t.upper_tail(s));
        let excess = (lo + hi).min(1.0) - t.tail_bound(s);
        if excess > worst.0 {
            worst = (excess, s);
        }
        ratio = ratio.max(lo.max(hi) * s.exp());
    }
    TailReport {
        smoothing: t.name().to_string(),
        c_z: t.tail_scale(),
        worst_excess: worst.0,
        worst_t: worst.1,
        holds: worst.0 <= 0.0,
        one_sided_unit_ratio: ratio,
    }
}

/// Smoothing function matched to a distance kind.
pub fn smoothing_for(kind: DistanceKind) -> SmoothingCdf {
    match kind {
        DistanceKind::A1 => SmoothingCdf::T1,
        DistanceKind::A2 => SmoothingCdf::T2,
        DistanceKind::A3 => SmoothingCdf::T3,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RangeCondition {
    /// Range of the unscaled second-argument output.
    pub d2_unscaled: (f64, f64),
    /// `max |d2|` at scale 1/2.
    pub half_scale_max: f64,
    pub holds_at_half_scale: bool,
    /// Largest scale with `max |d2| <= 1/2`.
    pub valid_scale: f64,
    /// Largest `|d2|` seen on sampled discriminators and data at
    /// `valid_scale`.
    pub observed_max: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImplicationCondition {
    pub pairs: usize,
    /// Per pair: `A(q, p) - A(p, p)` and the sampled smoothed KS distance.
    pub samples: Vec<(f64, f64)>,
    /// Smallest `C` with `KS <= C (A(q, p) - A(p, p))` on every pair.
    pub c_hat: f64,
    pub finite: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub distance: String,
    pub family: String,
    pub smoothing: String,
    pub range: RangeCondition,
    pub implication: ImplicationCondition,
    pub tail: TailReport,
}

/// Random unit directions used by the sampled smoothed KS distance.
const KS_DIRECTIONS: usize = 64;
const KS_GRID: usize = 257;

/// Lower bound on the smoothed KS distance over the feature family, from
/// the guided direction plus random unit directions (both signs of the
/// feature), each with its offset optimized by a scan.
pub fn sampled_smoothed_ks(family: FeatureFamily, t: SmoothingCdf, p: &Dataset, q: &Dataset, seed: u64) -> Result<f64> {
    if p.d() != q.d() || p.is_regression() != q.is_regression() || family.is_regression() != p.is_regression() {
        return shape_err("sample sets do not match each other or the family");
    }
    let d = p.d();
    let mut rng = seeded(seed);
    let unit = |rng: &mut crate::rng::Rng| -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let n = norm2(&v);
            if n > 0.0 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    };
    let mut units: Vec<OneLayerParams> = Vec::new();
    if let Some(g) = guided_direction(family, p, q) {
        units.push(OneLayerParams { v: g, v2: Vec::new(), t: 0.0 });
    }
    for _ in 0..KS_DIRECTIONS {
        let v = unit(&mut rng);
        let v2 = if family.is_regression() { unit(&mut rng) } else { Vec::new() };
        units.push(OneLayerParams { v, v2, t: 0.0 });
    }
    let mut best = 0.0f64;
    for u in &units {
        let feats = |s: &Dataset| -> Vec<f64> { (0..s.n()).map(|i| u.feature(family, s.points.row(i), s.response(i))).collect() };
        let (fp, fq) = (feats(p), feats(q));
        for sign in [1.0, -1.0] {
            let lo = fp.iter().chain(&fq).map(|f| sign * f).fold(f64::INFINITY, f64::min);
            let hi = fp.iter().chain(&fq).map(|f| sign * f).fold(f64::NEG_INFINITY, f64::max);
            let mean = |f: &[f64], s: f64| f.iter().map(|x| t.eval(sign * x + s)).sum::<f64>() / f.len() as f64;
            let h = |s: f64| (mean(&fp, s) - mean(&fq, s)).abs();
            best = best.max(scan_max(h, -hi - 40.0, -lo + 40.0, KS_GRID).value);
        }
    }
    Ok(best)
}

/// Checks the three conditions of the projection theorem for `kind`.
///
/// 1. The second-argument discriminator output, rescaled, is bounded by
///    1/2. Reported at scale 1/2 and at the largest valid scale.
/// 2. `A(q, p) - A(p, p) <= e` implies smoothed KS `<= C e`, estimated on
///    the given pairs `(q, p)`.
/// 3. The tail bound of the matching noise law on `[0, 50]`.
pub fn check_theorem_conditions(kind: DistanceKind, family: FeatureFamily, pairs: &[(Dataset, Dataset)], cfg: &AscentConfig, seed: u64) -> Result<TheoremReport> {
    let t = smoothing_for(kind);
    // Condition 1.
    let ranges = log_readout_ranges();
    let d2_unscaled = match kind {
        DistanceKind::A1 | DistanceKind::A2 => (0.0, 1.0),
        DistanceKind::A3 => ranges.log_one_minus_g2,
    };
    let max_abs = d2_unscaled.0.abs().max(d2_unscaled.1.abs());
    let half_scale_max = 0.5 * max_abs;
    let valid_scale = 0.5 / max_abs;
    let mut rng = seeded(seed);
    let mut observed = 0.0f64;
    let readout = kind.d2_readout();
    let width = kind.width(cfg);
    for (q, p) in pairs {
        for _ in 0..8 {
            let disc = crate::discriminator::DiscriminatorParams::random(family, p.d(), width, None, &mut rng);
            for s in [p, q] {
                for i in 0..s.n() {
                    let v = valid_scale * disc.eval(family, s.points.row(i), s.response(i), readout);
                    observed = observed.max(v.abs());
                }
            }
        }
    }
    let range = RangeCondition {
        d2_unscaled,
        half_scale_max,
        holds_at_half_scale: half_scale_max <= 0.5,
        valid_scale,
        observed_max: observed,
        holds: valid_scale * max_abs <= 0.5 && observed <= 0.5,
    };

    // Condition 2.
    let mut samples = Vec::with_capacity(pairs.len());
    let mut c_hat = 0.0f64;
    for (i, (q, p)) in pairs.iter().enumerate() {
        let s = seed.wrapping_add(i as u64);
        let a_qp = estimate_distance(kind, family, q, p, cfg, s)?.0;
        let a_pp = match kind {
            DistanceKind::A3 => estimate_distance(kind, family, p, p, cfg, s)?.0,
            _ => 0.0,
        };
        let gap = a_qp - a_pp;
        let ks = sampled_smoothed_ks(family, t, q, p, s)?;
        samples.push((gap, ks));
        if gap > 1e-12 {
            c_hat = c_hat.max(ks / gap);
        } else if ks > 1e-9 {
            c_hat = f64::INFINITY;
        }
    }
    let implication = ImplicationCondition {
        pairs: pairs.len(),
        samples,
        c_hat,
        finite: c_hat.is_finite(),
    };

    // Condition 3.
    let tail = check_tail_bound(t, &linspace(0.0, 50.0, 501));
    Ok(TheoremReport {
        distance: kind.name().to_string(),
        family: family.name().to_string(),
        smoothing: t.name().to_string(),
        range,
        implication,
        tail,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ResilienceRow {
    pub eps: f64,
    pub budget: f64,
    /// Largest shift found over the sampled deletions.
    pub worst_shift: f64,
    /// `budget - worst_shift`; negative means a violation.
    pub margin: f64,
    /// Index of the direction attaining the worst shift (0 and 1 are the
    /// data-driven ones when present).
    pub witness: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResilienceReport {
    pub task: String,
    pub directions: usize,
    pub rows: Vec<ResilienceRow>,
    pub passed: bool,
}

/// Largest increase of the mean of `values` obtained by deleting `eps`
/// mass (fractionally) from the bottom, renormalized.
fn deletion_increase(sorted: &[f64], eps: f64) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let mut left = eps * n;
    let mut removed = 0.0;
    for &v in sorted {
        let take = left.min(1.0);
        removed += take * v;
        left -= take;
        if left <= 0.0 {
            break;
        }
    }
    let kept = n * (1.0 - eps);
    if kept <= 0.0 {
        return f64::INFINITY;
    }
    (sorted.iter().sum::<f64>() - removed) / kept - mean
}

/// Sampled check of `E_r[f] - E_p[f] <= budget(eps)` over deletions `r` of
/// the empirical law of `samples`.
///
/// For each direction `v` the function family is `f = v^T x` (mean),
/// `f = +-(v^T x)^2` (second moment), or for regression the normalized
/// `(v^T x)^2 / E(v^T x)^2` together with the normalized squared OLS
/// residual. Each `f` and `-f` is pushed up by deleting its lowest `eps`
/// mass. Directions are the leading covariance eigenvector, the
/// median-to-mean direction, and `n_deletions` random unit vectors.
pub fn resilience_membership_sampled(
    samples: &Dataset,
    task: Task,
    budget: &dyn Fn(f64) -> f64,
    eps_grid: &[f64],
    n_deletions: usize,
    seed: u64,
) -> Result<ResilienceReport> {
    if eps_grid.is_empty() || eps_grid.iter().any(|e| !(*e > 0.0 && *e <= 0.5)) {
        return domain_err("eps grid must be nonempty and inside (0, 0.5]");
    }
    if samples.n() == 0 {
        return shape_err("empty sample");
    }
    if (task == Task::Regression) != samples.is_regression() {
        return shape_err("regression needs responses");
    }
    let (n, d) = (samples.n(), samples.d());
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    let x = samples.points.to_matrix();
    let means = samples.points.column_means();
    let centered = nalgebra::DMatrix::from_fn(n, d, |i, j| x[(i, j)] - means[j]);
    let cov = centered.transpose() * &centered / n as f64;
    let eig = cov.symmetric_eigen();
    dirs.push(eig.eigenvectors.column(eig.eigenvalues.imax()).iter().copied().collect());
    let med: Vec<f64> = (0..d).map(|j| crate::linalg::median(&samples.points.column(j))).collect();
    let shift: Vec<f64> = means.iter().zip(&med).map(|(a, b)| a - b).collect();
    if norm2(&shift) > 0.0 {
        let s = norm2(&shift);
        dirs.push(shift.into_iter().map(|v| v / s).collect());
    }
    let mut rng = seeded(seed);
    for _ in 0..n_deletions {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let s = norm2(&v);
        if s > 0.0 {
            dirs.push(v.into_iter().map(|x| x / s).collect());
        }
    }
    // Value columns to test, each tagged with its direction index.
    let mut columns: Vec<(usize, Vec<f64>)> = Vec::new();
    let proj = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| crate::linalg::dot(v, samples.points.row(i))).collect() };
    match task {
        Task::Mean => {
            for (k, v) in dirs.iter().enumerate() {
                let f = proj(v);
                columns.push((k, f.iter().map(|x| -x).collect()));
                columns.push((k, f));
            }
        }
        Task::SecondMoment => {
            for (k, v) in dirs.iter().enumerate() {
                let f: Vec<f64> = proj(v).into_iter().map(|x| x * x).collect();
                columns.push((k, f.iter().map(|x| -x).collect()));
                columns.push((k, f));
            }
        }
        Task::Regression => {
            for (k, v) in dirs.iter().enumerate() {
                let f: Vec<f64> = proj(v).into_iter().map(|x| x * x).collect();
                let m = f.iter().sum::<f64>() / n as f64;
                let f: Vec<f64> = if m > 0.0 { f.into_iter().map(|x| x / m).collect() } else { f };
                columns.push((k, f.iter().map(|x| -x).collect()));
                columns.push((k, f));
            }
            let (theta, _) = least_squares(&samples.design(), &samples.response_vector().expect("checked"), 0.0)?;
            let r: Vec<f64> = (0..n)
                .map(|i| {
                    let e = samples.response(i) - crate::linalg::dot(theta.as_slice(), samples.points.row(i));
                    e * e
                })
                .collect();
            let m = r.iter().sum::<f64>() / n as f64;
            let r: Vec<f64> = if m > 0.0 { r.into_iter().map(|x| x / m).collect() } else { r };
            columns.push((dirs.len(), r.iter().map(|x| -x).collect()));
            columns.push((dirs.len(), r));
        }
    }
    for (_, c) in columns.iter_mut() {
        c.sort_by(f64::total_cmp);
    }
    let mut rows = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let b = budget(eps);
        let mut worst = (f64::NEG_INFINITY, 0usize);
        for (k, c) in &columns {
            let s = deletion_increase(c, eps);
            if s > worst.0 {
                worst = (s, *k);
            }
        }
        rows.push(ResilienceRow {
            eps,
            budget: b,
            worst_shift: worst.0,
            margin: b - worst.0,
            witness: worst.1,
        });
    }
    let passed = rows.iter().all(|r| r.margin >= 0.0);
    Ok(ResilienceReport {
        task: task.name().to_string(),
        directions: dirs.len(),
        rows,
        passed,
    })
}

/// Random discrete law with `1..=max_atoms` atoms in `[-3, 3]` and random
/// masses.
pub fn random_discrete(rng: &mut crate::rng::Rng, max_atoms: usize) -> DiscreteDist1D {
    let k = rng.random_range(1..=max_atoms);
    let atoms: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let masses: Vec<f64> = raw.iter().map(|m| m / total).collect();
    DiscreteDist1D::new(atoms, masses).expect("valid by construction")
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub smoothing: String,
    pub instances: usize,
    pub passed: usize,
    pub failed: usize,
    pub inconclusive: usize,
    /// First failing report, if any.
    pub witness: Option<MeanCrossReport>,
}

/// `verify_mean_cross` on `instances` random pairs with up to `max_atoms`
/// atoms each.
pub fn mean_cross_sweep(t: SmoothingCdf, instances: usize, max_atoms: usize, seed: u64) -> Result<SweepReport> {
    let mut rng = seeded(seed);
    let mut out = SweepReport {
        smoothing: t.name().to_string(),
        instances,
        passed: 0,
        failed: 0,
        inconclusive: 0,
        witness: None,
    };
    for _ in 0..instances {
        let p = random_discrete(&mut rng, max_atoms);
        let q = random_discrete(&mut rng, max_atoms);
        let r = verify_mean_cross(&p, &q, t)?;
        match r.verdict {
            Verdict::Pass => out.passed += 1,
            Verdict::Inconclusive => out.inconclusive += 1,
            Verdict::Fail => {
                out.failed += 1;
                if out.witness.is_none() {
                    out.witness = Some(r);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct StepAgreementReport {
    /// Pairs on which both checks ran.
    pub instances: usize,
    pub agreed: usize,
    /// Pairs skipped because their supports are disjoint (`eps = 1`).
    pub skipped: usize,
    /// Largest difference between the two KS distances.
    pub max_eps_diff: f64,
    /// First pair where the two disagree, as (p atoms, p masses, q atoms,
    /// q masses).
    pub witness: Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)>,
}

impl StepAgreementReport {
    pub fn passed(&self) -> bool {
        self.agreed == self.instances
    }
}

/// Draws random pairs until `instances` of them have overlapping supports,
/// and compares the step-smoothed mean-cross check with the classical one:
/// same KS distance, same dominance verdict, same overall verdict, no noise
/// contribution.
pub fn step_classical_sweep(instances: usize, max_atoms: usize, seed: u64) -> Result<StepAgreementReport> {
    let mut rng = seeded(seed);
    let mut out = StepAgreementReport {
        instances,
        agreed: 0,
        skipped: 0,
        max_eps_diff: 0.0,
        witness: None,
    };
    let mut done = 0;
    while done < instances {
        if out.skipped > 100 * instances.max(1) {
            return domain_err("too many disjoint pairs");
        }
        let p = random_discrete(&mut rng, max_atoms);
        let q = random_discrete(&mut rng, max_atoms);
        let r = verify_mean_cross(&p, &q, SmoothingCdf::STEP)?;
        if r.verdict == Verdict::Inconclusive {
            out.skipped += 1;
            continue;
        }
        done += 1;
        let c = classical_mean_cross(&p, &q)?;
        let diff = (r.eps - c.eps).abs();
        out.max_eps_diff = out.max_eps_diff.max(diff);
        if diff <= 1e-12 && r.dominance_holds == c.dominance_holds && r.passed() == c.passed && r.noise_gap == 0.0 {
            out.agreed += 1;
        } else if out.witness.is_none() {
            out.witness = Some((p.atoms().to_vec(), p.masses().to_vec(), q.atoms().to_vec(), q.masses().to_vec()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaSuiteReport {
    pub mean_cross: SweepReport,
    pub step_classical: StepAgreementReport,
    pub cdf: Vec<CdfReport>,
    pub tails: Vec<TailReport>,
    pub log_ranges: LogRangeReport,
    pub conditions: Vec<TheoremReport>,
    pub passed: bool,
}

/// The full suite at the sizes used by the acceptance run: 200 sigmoid
/// mean-cross pairs and 100 step/classical pairs with at most 6 atoms,
/// CDF validity and tail bounds of every smoothing function, and the
/// theorem conditions of each distance on shifted Gaussian pairs.
pub fn verify_lemmas(seed: u64) -> Result<LemmaSuiteReport> {
    let mean_cross = mean_cross_sweep(SmoothingCdf::T1, 200, 6, derive_seed(seed, 0))?;
    let step_classical = step_classical_sweep(100, 6, derive_seed(seed, 1))?;
    let grid = linspace(-50.0, 50.0, 10001);
    let cdf = SmoothingCdf::all_smooth().into_iter().map(|t| check_cdf_validity(t, &grid)).collect::<Result<Vec<_>>>()?;
    let tails: Vec<TailReport> = SmoothingCdf::all_smooth().into_iter().map(|t| check_tail_bound(t, &linspace(0.0, 50.0, 501))).collect();
    let fam = crate::contamination::CleanFamily::gaussian(2, 1.0);
    let pairs: Vec<(Dataset, Dataset)> = (0..3u64)
        .map(|i| -> Result<(Dataset, Dataset)> {
            let p = crate::contamination::sample_clean(&fam, 80, 2, derive_seed(seed, 10 + i))?;
            let q = crate::contamination::sample_clean(&fam, 80, 2, derive_seed(seed, 20 + i))?.translated(&[0.25 * (i + 1) as f64, 0.0])?;
            Ok((q, p))
        })
        .collect::<Result<_>>()?;
    let cfg = AscentConfig {
        restarts: 2,
        steps: 80,
        ..AscentConfig::default()
    };
    let conditions = [DistanceKind::A1, DistanceKind::A2, DistanceKind::A3]
        .into_iter()
        .map(|k| check_theorem_conditions(k, FeatureFamily::Mean, &pairs, &cfg, derive_seed(seed, 30)))
        .collect::<Result<Vec<_>>>()?;
    let passed = mean_cross.passed == mean_cross.instances
        && step_classical.passed()
        && cdf.iter().all(|r| r.passed)
        && tails.iter().all(|r| r.holds)
        && conditions.iter().all(|c| c.range.holds && c.implication.finite && c.tail.holds);
    Ok(LemmaSuiteReport {
        mean_cross,
        step_classical,
        cdf,
        tails,
        log_ranges: log_readout_ranges(),
        conditions,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contamination::{sample_clean, CleanFamily};
    use crate::dataset::Points;

    fn dd(atoms: &[f64], masses: &[f64]) -> DiscreteDist1D {
        DiscreteDist1D::new(atoms.to_vec(), masses.to_vec()).unwrap()
    }

    #[test]
    fn identical_point_masses() {
        let d0 = DiscreteDist1D::point(0.0);
        for t in [SmoothingCdf::STEP, SmoothingCdf::T1, SmoothingCdf::T2] {
            let r = verify_mean_cross(&d0, &d0, t).unwrap();
            assert_eq!(r.eps, 0.0);
            assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
            assert!(r.mean_gap.abs() < 1e-12);
        }
    }

    #[test]
    fn disjoint_step_is_inconclusive() {
        let r = verify_mean_cross(&DiscreteDist1D::point(0.0), &DiscreteDist1D::point(1.0), SmoothingCdf::STEP).unwrap();
        assert_eq!(r.eps, 1.0);
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn sigmoid_sweep_small() {
        let s = mean_cross_sweep(SmoothingCdf::T1, 20, 6, 1).unwrap();
        assert_eq!(s.failed, 0, "{:?}", s.witness);
    }

    #[test]
    fn smoother_sweeps_small() {
        for t in [SmoothingCdf::T2, SmoothingCdf::T3] {
            let s = mean_cross_sweep(t, 10, 4, 2).unwrap();
            assert_eq!(s.failed, 0, "{:?}", s.witness);
        }
    }

    #[test]
    fn reverse_gap_is_not_bounded() {
        // Deleting the top of p and the bottom of a near copy separates
        // the means in the exchanged direction only.
        let p = dd(&[-1.0, 0.0, 1.0], &[0.3, 0.4, 0.3]);
        let q = dd(&[-1.0, 0.0, 1.2], &[0.3, 0.4, 0.3]);
        let r = verify_mean_cross(&p, &q, SmoothingCdf::STEP).unwrap();
        assert!(r.passed());
        assert!((r.eps - 0.3).abs() < 1e-12);
        assert!((r.reverse_gap - (0.36 + 0.3) / 0.7).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn step_matches_classical() {
        let mut rng = seeded(9);
        for _ in 0..30 {
            let p = random_discrete(&mut rng, 6);
            let q = random_discrete(&mut rng, 6);
            let r = verify_mean_cross(&p, &q, SmoothingCdf::STEP).unwrap();
            if r.verdict == Verdict::Inconclusive {
                continue;
            }
            let c = classical_mean_cross(&p, &q).unwrap();
            assert!((r.eps - c.eps).abs() < 1e-12);
            assert_eq!(r.dominance_holds, c.dominance_holds);
            assert_eq!(r.passed(), c.passed);
            assert!(r.noise_gap.abs() < 1e-15);
        }
    }

    #[test]
    fn step_sweep_counts_overlapping_pairs() {
        let r = step_classical_sweep(40, 6, 2).unwrap();
        assert_eq!(r.instances, 40);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn full_suite_passes() {
        let r = verify_lemmas(11).unwrap();
        assert!(r.passed, "{}", serde_json::to_string_pretty(&r).unwrap());
        assert_eq!(r.conditions.len(), 3);
        assert!(!r.conditions[2].range.holds_at_half_scale);
    }

    #[test]
    fn deleted_laws_have_unit_mass() {
        let mut rng = seeded(4);
        for _ in 0..20 {
            let p = random_discrete(&mut rng, 6);
            let q = random_discrete(&mut rng, 6);
            let r = verify_mean_cross(&p, &q, SmoothingCdf::STEP).unwrap();
            if r.verdict != Verdict::Inconclusive {
                assert!((r.mass_p - 1.0).abs() < 1e-12 && (r.mass_q - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn convolution_two_ways() {
        let mut rng = seeded(5);
        for _ in 0..20 {
            let x = random_discrete(&mut rng, 6);
            let z = random_discrete(&mut rng, 4);
            let y = difference_law(&x, &z).unwrap();
            for s in linspace(-7.0, 7.0, 141) {
                let direct = survival(&y, s);
                let formula = difference_upper_tail(&x, |c| z.cdf(c), s);
                assert!((direct - formula).abs() < 1e-8, "{s}: {direct} vs {formula}");
            }
        }
    }

    #[test]
    fn generic_quadrature_matches_closed_forms() {
        // T2 noise through the Simpson table against direct integration.
        let z = ContinuousNoise::new(SmoothingCdf::T2);
        for c in [-5.0, -1.0, 0.0, 0.3, 4.0] {
            let cells = 200_000;
            let h = (c - z.lo) / cells as f64;
            let direct: f64 = (0..cells).map(|k| simpson(|x| z.cdf(x), z.lo + k as f64 * h, z.lo + (k + 1) as f64 * h)).sum();
            assert!((z.integral(c) - direct).abs() < 1e-9, "{c}");
        }
        // Logistic mean is zero; the generic formula agrees with it.
        let t1 = ContinuousNoise::new(SmoothingCdf::T1);
        assert!((t1.hi - (t1.integral(t1.hi))).abs() < 1e-9);
    }

    #[test]
    fn logistic_shift_against_nominal_radius() {
        // Deleting the bottom eps of a logistic variable moves its mean by
        // about eps (ln(1/eps) + 1): more than eps ln(1 + 1/eps), within
        // twice that.
        for delta in [0.01, 0.05, 0.1] {
            let exact = noise_deletion_shift(SmoothingCdf::T1, delta);
            let nominal = SmoothingCdf::T1.rho_z(delta);
            assert!(exact > 0.5 * nominal && exact <= nominal, "{delta}: {exact} vs {nominal}");
            // By symmetry both ends give -E[Z; Z <= q] / (1 - delta).
            let q = (delta / (1.0 - delta)).ln();
            let partial = q * sigmoid(q) - softplus(q);
            assert!((exact - (-partial) / (1.0 - delta)).abs() < 1e-12);
        }
    }

    #[test]
    fn cdf_validity_of_all_smoothers() {
        let grid = linspace(-50.0, 50.0, 10001);
        for t in SmoothingCdf::all_smooth() {
            let r = check_cdf_validity(t, &grid).unwrap();
            assert!(r.passed, "{r:?}");
        }
        let r = check_cdf_validity(SmoothingCdf::T2, &grid).unwrap();
        assert_eq!(r.t2_endpoints_ok, Some(true));
        let r = check_cdf_validity(SmoothingCdf::T3, &grid).unwrap();
        assert!((r.raw_endpoints.0 - 0.5f64.ln()).abs() < 1e-10);
        assert!((r.raw_endpoints.1 + 0.3133).abs() < 1e-4);
    }

    #[test]
    fn log_ranges() {
        let r = log_readout_ranges();
        assert!((r.log_g2_nonnegative_weights.0 + 0.6931).abs() < 1e-4);
        assert!((r.log_g2_nonnegative_weights.1 + 0.3133).abs() < 1e-4);
        // The bracket [-0.7, -0.3] holds for log g2, not for log(1 - g2).
        assert!(r.log_one_minus_g2_nonnegative_weights.0 < -0.7);
    }

    #[test]
    fn sigmoid_tail_bound() {
        let r = check_tail_bound(SmoothingCdf::T1, &linspace(0.0, 50.0, 501));
        assert!(r.holds, "{r:?}");
        assert_eq!(r.c_z, 2.0);
        // One-sided at unit scale: 1 / (1 + e^t) <= e^-t, tight as t grows.
        assert!(r.one_sided_unit_ratio <= 1.0 + 1e-12 && r.one_sided_unit_ratio > 0.99, "{r:?}");
        // Unit scale two-sided fails: 2 / (1 + e^t) > e^-t for t > 0.
        assert!(2.0 / (1.0 + 1f64.exp()) > (-1f64).exp());
        for t in [SmoothingCdf::T2, SmoothingCdf::T3] {
            let r = check_tail_bound(t, &linspace(0.0, 50.0, 501));
            assert!(r.holds, "{r:?}");
        }
    }

    #[test]
    fn theorem_conditions_a1() {
        let fam = CleanFamily::gaussian(2, 1.0);
        let pairs: Vec<(Dataset, Dataset)> = (0..3)
            .map(|i| {
                let p = sample_clean(&fam, 60, 2, i).unwrap();
                let q = p.translated(&[0.3 * i as f64, 0.0]).unwrap();
                (q, sample_clean(&fam, 60, 2, 100 + i).unwrap())
            })
            .collect();
        let cfg = AscentConfig {
            restarts: 2,
            steps: 60,
            ..AscentConfig::default()
        };
        let r = check_theorem_conditions(DistanceKind::A1, FeatureFamily::Mean, &pairs, &cfg, 1).unwrap();
        assert!(r.range.holds && r.range.holds_at_half_scale);
        assert!(r.implication.finite, "{:?}", r.implication);
        assert!(r.tail.holds);
        let r3 = check_theorem_conditions(DistanceKind::A3, FeatureFamily::Mean, &pairs[..1], &cfg, 1).unwrap();
        assert!(!r3.range.holds_at_half_scale);
        assert!(r3.range.holds);
    }

    #[test]
    fn resilience_gaussian_passes() {
        let s = sample_clean(&CleanFamily::gaussian(5, 1.0), 10_000, 5, 3).unwrap();
        let budget = |e: f64| 2.0 * e * (2.0 * (1.0 / e).ln()).sqrt();
        let r = resilience_membership_sampled(&s, Task::Mean, &budget, &[0.01, 0.05, 0.1, 0.2], 20, 1).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn resilience_outlier_violates() {
        let mut s = sample_clean(&CleanFamily::gaussian(5, 1.0), 10_000, 5, 3).unwrap();
        s.points.row_mut(0)[0] = 1e6;
        let budget = |e: f64| 2.0 * e * (2.0 * (1.0 / e).ln()).sqrt();
        let r = resilience_membership_sampled(&s, Task::Mean, &budget, &[1e-4, 0.1], 5, 1).unwrap();
        assert!(!r.passed);
        assert!(r.rows[0].margin < 0.0);
    }

    #[test]
    fn resilience_constant_data() {
        let s = Dataset::new(Points::from_flat(50, 2, vec![1.5; 100]).unwrap()).unwrap();
        let budget = |e: f64| e;
        let r = resilience_membership_sampled(&s, Task::Mean, &budget, &[0.1, 0.5], 5, 1).unwrap();
        assert!(r.passed);
        for row in &r.rows {
            assert!((row.margin - row.budget).abs() < 1e-12);
        }
    }
}
