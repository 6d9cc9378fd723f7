//! Smoothing functions `T` for which `a T(x) + b` is the CDF of a noise
//! variable `Z`.

use serde::{Deserialize, Serialize};

use super::{log_sigmoid, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingKind {
    /// `T(x) = 1{x >= 0}`, the CDF of `Z = 0`; recovers the unsmoothed
    /// generalized KS distance.
    Step,
    /// `T1 = sigmoid(x)`.
    Sigmoid,
    /// `T2 = sigmoid(sigmoid(x))`, range `(1/2, e/(e+1))`.
    SigmoidOfSigmoid,
    /// `T3 = log sigmoid(sigmoid(x))`.
    LogSigmoidOfSigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingCdf {
    pub kind: SmoothingKind,
}

impl SmoothingCdf {
    pub const STEP: Self = Self { kind: SmoothingKind::Step };
    pub const T1: Self = Self { kind: SmoothingKind::Sigmoid };
    pub const T2: Self = Self {
        kind: SmoothingKind::SigmoidOfSigmoid,
    };
    pub const T3: Self = Self {
        kind: SmoothingKind::LogSigmoidOfSigmoid,
    };

    pub fn all_smooth() -> [Self; 3] {
        [Self::T1, Self::T2, Self::T3]
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SmoothingKind::Step => "step",
            SmoothingKind::Sigmoid => "T1",
            SmoothingKind::SigmoidOfSigmoid => "T2",
            SmoothingKind::LogSigmoidOfSigmoid => "T3",
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            SmoothingKind::Step => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SmoothingKind::Sigmoid => sigmoid(x),
            SmoothingKind::SigmoidOfSigmoid => sigmoid(sigmoid(x)),
            SmoothingKind::LogSigmoidOfSigmoid => log_sigmoid(sigmoid(x)),
        }
    }

    /// `(T(-inf), T(+inf))`.
    pub fn range(&self) -> (f64, f64) {
        match self.kind {
            SmoothingKind::Step | SmoothingKind::Sigmoid => (0.0, 1.0),
            SmoothingKind::SigmoidOfSigmoid => (0.5, sigmoid(1.0)),
            SmoothingKind::LogSigmoidOfSigmoid => (0.5f64.ln(), log_sigmoid(1.0)),
        }
    }

    /// `(a, b)` with `a T(-inf) + b = 0` and `a T(+inf) + b = 1`.
    pub fn affine(&self) -> (f64, f64) {
        let (lo, hi) = self.range();
        let a = 1.0 / (hi - lo);
        (a, -a * lo)
    }

    /// `P(Z <= x) = a T(x) + b`, clamped to `[0, 1]` against rounding.
    #[inline]
    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            SmoothingKind::Step | SmoothingKind::Sigmoid => self.eval(x),
            _ => {
                let (a, b) = self.affine();
                (a * self.eval(x) + b).clamp(0.0, 1.0)
            }
        }
    }

    /// `P(Z <= -t)`.
    pub fn lower_tail(&self, t: f64) -> f64 {
        self.cdf(-t)
    }

    /// `P(Z >= t)`. For the continuous kinds this is `1 - cdf(t)`; computed
    /// directly for the sigmoid to avoid cancellation.
    pub fn upper_tail(&self, t: f64) -> f64 {
        match self.kind {
            SmoothingKind::Step => {
                if t <= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SmoothingKind::Sigmoid => sigmoid(-t),
            _ => 1.0 - self.cdf(t),
        }
    }

    /// Sub-exponential scale `c_Z` used in the tail bound
    /// `P(|Z| >= t) <= exp(-t / c_Z)` and the radius
    /// `rho_Z(eps) = c_Z eps ln(1 + 1/eps)`.
    ///
    /// For the logistic law `P(|Z| >= t) = 2 / (1 + e^t)`, which is at most
    /// `e^(-t/2)` because `(e^(t/2) - 1)^2 >= 0`; no smaller constant works
    /// near `t = 0`.
    pub fn tail_scale(&self) -> f64 {
        match self.kind {
            SmoothingKind::Step => 0.0,
            SmoothingKind::Sigmoid => 2.0,
            SmoothingKind::SigmoidOfSigmoid | SmoothingKind::LogSigmoidOfSigmoid => 10.0,
        }
    }

    pub fn rho_z(&self, eps: f64) -> f64 {
        if eps <= 0.0 {
            return 0.0;
        }
        self.tail_scale() * eps * (1.0 / eps).ln_1p()
    }

    pub fn tail_bound(&self, t: f64) -> f64 {
        let c = self.tail_scale();
        if c == 0.0 {
            return if t > 0.0 { 0.0 } else { 1.0 };
        }
        (-t / c).exp()
    }
}
