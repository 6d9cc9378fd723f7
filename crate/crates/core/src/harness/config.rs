use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contamination::{AttackKind, CleanFamily, ResponseNoise, MAX_EPS};
use crate::distance::DistanceKind;
use crate::error::{Error, Result};
use crate::estimator::{Baseline, MinimaxConfig};
use crate::generator::Task;

/// A sweep read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: Task,
    pub family: FamilySpec,
    pub attacks: Vec<AttackKind>,
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub estimators: Vec<EstimatorSpec>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the command line takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub minimax: MinimaxConfig,
    /// Fraction used by the trimmed baselines.
    #[serde(default = "default_trim")]
    pub trim_fraction: f64,
    /// Also write `records.jsonl`.
    #[serde(default)]
    pub jsonl: bool,
}

fn default_trim() -> f64 {
    0.2
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&s).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.attacks.is_empty() || self.eps.is_empty() || self.n.is_empty() || self.d.is_empty() {
            return bad("attacks, eps, n and d must all be nonempty".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimators".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if let Some(e) = self.eps.iter().find(|e| !(0.0..=MAX_EPS).contains(*e)) {
            return bad(format!("eps {e} outside [0, {MAX_EPS}]"));
        }
        if self.n.contains(&0) || self.d.contains(&0) {
            return bad("n and d must be positive".into());
        }
        if !(0.0..=MAX_EPS).contains(&self.trim_fraction) {
            return bad(format!("trim_fraction {} outside [0, {MAX_EPS}]", self.trim_fraction));
        }
        if (self.task == Task::Regression) != matches!(self.family, FamilySpec::LinearModel { .. }) {
            return bad(format!("family {} does not fit task {}", self.family.kind(), self.task.name()));
        }
        for a in &self.attacks {
            if matches!(a, AttackKind::SignFlipResponses) && self.task != Task::Regression {
                return bad("sign_flip_responses needs the regression task".into());
            }
            if let AttackKind::PointMass { direction: Some(dir), .. } = a {
                if let Some(&d) = self.d.iter().find(|&&d| d != dir.len()) {
                    return bad(format!("point_mass direction has length {} but d = {d}", dir.len()));
                }
            }
        }
        for e in &self.estimators {
            if e.task() != self.task {
                return bad(format!("estimator {} does not fit task {}", e.name(self.task), self.task.name()));
            }
        }
        for &d in &self.d {
            self.family.build(self.task, d)?;
        }
        Ok(())
    }

    /// Baseline with this sweep's trimming fraction.
    pub fn baseline(&self, b: BaselineKind) -> Baseline {
        let fraction = self.trim_fraction;
        match b {
            BaselineKind::EmpiricalMean => Baseline::EmpiricalMean,
            BaselineKind::CoordinateMedian => Baseline::CoordinateMedian,
            BaselineKind::TrimmedMean => Baseline::TrimmedMean { fraction },
            BaselineKind::Ols => Baseline::Ols,
            BaselineKind::TrimmedOls => Baseline::TrimmedOls { fraction },
            BaselineKind::EmpiricalSecondMoment => Baseline::EmpiricalSecondMoment,
            BaselineKind::TrimmedSecondMoment => Baseline::TrimmedSecondMoment { fraction },
        }
    }
}

/// Clean distribution, instantiated per dimension. Location parameters
/// are scalars repeated over all coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Gaussian {
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default)]
        mean: f64,
    },
    StudentT {
        dof: f64,
        #[serde(default)]
        mean: f64,
    },
    Laplace {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        mean: f64,
    },
    LinearModel {
        #[serde(default = "one")]
        theta: f64,
        design: Box<FamilySpec>,
        noise: ResponseNoise,
    },
}

fn one() -> f64 {
    1.0
}

impl FamilySpec {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::StudentT { .. } => "student_t",
            Self::Laplace { .. } => "laplace",
            Self::LinearModel { .. } => "linear_model",
        }
    }

    pub fn build(&self, task: Task, d: usize) -> Result<CleanFamily> {
        let fam = match self {
            Self::Gaussian { sigma, mean } => CleanFamily::GaussianIso { mu: vec![*mean; d], sigma: *sigma },
            Self::StudentT { dof, mean } => CleanFamily::StudentT { mu: vec![*mean; d], dof: *dof },
            Self::Laplace { scale, mean } => CleanFamily::SubExpLaplace { mu: vec![*mean; d], scale: *scale },
            Self::LinearModel { theta, design, noise } => {
                if task != Task::Regression {
                    return Err(Error::Config("linear_model needs the regression task".into()));
                }
                CleanFamily::LinearModel {
                    theta: vec![*theta; d],
                    x_family: Box::new(design.build(Task::Mean, d)?),
                    noise: noise.clone(),
                }
            }
        };
        fam.validate().map_err(|e| Error::Config(format!("family: {e}")))?;
        Ok(fam)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    EmpiricalMean,
    CoordinateMedian,
    TrimmedMean,
    Ols,
    TrimmedOls,
    EmpiricalSecondMoment,
    TrimmedSecondMoment,
}

const BASELINES: [(BaselineKind, &str, Task); 7] = [
    (BaselineKind::EmpiricalMean, "EmpiricalMean", Task::Mean),
    (BaselineKind::CoordinateMedian, "CoordinateMedian", Task::Mean),
    (BaselineKind::TrimmedMean, "TrimmedMean", Task::Mean),
    (BaselineKind::Ols, "Ols", Task::Regression),
    (BaselineKind::TrimmedOls, "TrimmedOls", Task::Regression),
    (BaselineKind::EmpiricalSecondMoment, "EmpiricalSecondMoment", Task::SecondMoment),
    (BaselineKind::TrimmedSecondMoment, "TrimmedSecondMoment", Task::SecondMoment),
];

/// An estimator named in a sweep: `Robust{Mean,SecondMoment,Regression}-{A1,A2,A3}`
/// or one of the baseline names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EstimatorSpec {
    Robust { task: Task, distance: DistanceKind },
    Baseline(BaselineKind),
}

fn task_word(task: Task) -> &'static str {
    match task {
        Task::Mean => "Mean",
        Task::SecondMoment => "SecondMoment",
        Task::Regression => "Regression",
    }
}

impl EstimatorSpec {
    pub fn task(&self) -> Task {
        match *self {
            Self::Robust { task, .. } => task,
            Self::Baseline(b) => BASELINES.iter().find(|x| x.0 == b).map(|x| x.2).expect("listed"),
        }
    }

    /// Name used in records. `_task` is accepted for symmetry with callers
    /// that only hold the sweep task.
    pub fn name(&self, _task: Task) -> String {
        self.to_string()
    }

    pub fn parse(s: &str) -> Result<Self> {
        if let Some((head, dist)) = s.strip_prefix("Robust").and_then(|r| r.split_once('-')) {
            let task = [Task::Mean, Task::SecondMoment, Task::Regression]
                .into_iter()
                .find(|t| task_word(*t) == head);
            let distance = match dist {
                "A1" => Some(DistanceKind::A1),
                "A2" => Some(DistanceKind::A2),
                "A3" => Some(DistanceKind::A3),
                _ => None,
            };
            if let (Some(task), Some(distance)) = (task, distance) {
                return Ok(Self::Robust { task, distance });
            }
        }
        BASELINES
            .iter()
            .find(|x| x.1 == s)
            .map(|x| Self::Baseline(x.0))
            .ok_or_else(|| Error::Config(format!("unknown estimator {s:?}")))
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Robust { task, distance } => write!(f, "Robust{}-{}", task_word(task), distance.name()),
            Self::Baseline(b) => f.write_str(BASELINES.iter().find(|x| x.0 == b).expect("listed").1),
        }
    }
}

impl TryFrom<String> for EstimatorSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Self::parse(&s)
    }
}

impl From<EstimatorSpec> for String {
    fn from(e: EstimatorSpec) -> String {
        e.to_string()
    }
}
