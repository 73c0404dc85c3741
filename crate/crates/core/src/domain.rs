//! Shared value types: observations, composite samples, scenario
//! descriptions and result records.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::seeds::{derive_seed, tag};
use crate::{Error, Result};

/// Population label `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Population {
    Target,
    Trial,
    Observational,
}

impl Population {
    pub fn code(self) -> u8 {
        match self {
            Population::Target => 0,
            Population::Trial => 1,
            Population::Observational => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Population::Target),
            1 => Some(Population::Trial),
            2 => Some(Population::Observational),
            _ => None,
        }
    }
}

/// Binary treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Arm::Control),
            1 => Some(Arm::Treated),
            _ => None,
        }
    }
}

/// One record `(X, S, S·A, S·Y)` together with the hidden covariate `U`.
///
/// `U` is only reachable through [`Observation::oracle_u`]; estimators work
/// on [`ObservedSample`], which never carries it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    x: f64,
    u: Option<f64>,
    s: Population,
    response: Option<(Arm, f64)>,
}

impl Observation {
    pub fn target(x: f64, u: f64) -> Self {
        Self { x, u: Some(u), s: Population::Target, response: None }
    }

    pub fn trial(x: f64, u: f64, arm: Arm, y: f64) -> Self {
        Self { x, u: Some(u), s: Population::Trial, response: Some((arm, y)) }
    }

    pub fn observational(x: f64, u: f64, arm: Arm, y: f64) -> Self {
        Self { x, u: Some(u), s: Population::Observational, response: Some((arm, y)) }
    }

    /// Validating constructor used by the CSV reader.
    pub fn try_new(
        x: f64,
        u: Option<f64>,
        s: Population,
        arm: Option<Arm>,
        y: Option<f64>,
    ) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::invalid("x must be finite"));
        }
        let response = match (s, arm, y) {
            (Population::Target, None, None) => None,
            (Population::Target, _, _) => {
                return Err(Error::invalid("target records carry no treatment or outcome"))
            }
            (_, Some(a), Some(y)) => Some((a, y)),
            _ => return Err(Error::invalid("treatment and outcome must both be present")),
        };
        Ok(Self { x, u, s, response })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn s(&self) -> Population {
        self.s
    }

    pub fn arm(&self) -> Option<Arm> {
        self.response.map(|(a, _)| a)
    }

    pub fn y(&self) -> Option<f64> {
        self.response.map(|(_, y)| y)
    }

    /// Hidden covariate. For data-generating and oracle code only.
    pub fn oracle_u(&self) -> Option<f64> {
        self.u
    }

    pub fn observed(&self) -> Observed {
        Observed { x: self.x, s: self.s, arm: self.arm(), y: self.y() }
    }
}

/// The estimator-visible part of an [`Observation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observed {
    pub x: f64,
    pub s: Population,
    pub arm: Option<Arm>,
    pub y: Option<f64>,
}

fn count(records: impl Iterator<Item = Population>) -> (usize, usize) {
    records.fold((0, 0), |(n1, n0), s| match s {
        Population::Trial => (n1 + 1, n0),
        Population::Target => (n1, n0 + 1),
        Population::Observational => (n1, n0),
    })
}

/// Ordered list of records with trial and target counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSample {
    records: Vec<Observation>,
    n1: usize,
    n0: usize,
}

impl CompositeSample {
    pub fn new(records: Vec<Observation>) -> Self {
        let (n1, n0) = count(records.iter().map(|r| r.s));
        Self { records, n1, n0 }
    }

    /// Trial records followed by target records.
    pub fn from_parts(trial: &[Observation], target: &[Observation]) -> Self {
        let mut records = Vec::with_capacity(trial.len() + target.len());
        records.extend_from_slice(trial);
        records.extend_from_slice(target);
        Self::new(records)
    }

    pub fn records(&self) -> &[Observation] {
        &self.records
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records with label `s` (and arm `a` when given), in order.
    pub fn partition(&self, s: Population, a: Option<Arm>) -> Vec<Observation> {
        self.records
            .iter()
            .filter(|r| r.s == s && a.is_none_or(|a| r.arm() == Some(a)))
            .copied()
            .collect()
    }

    /// Estimator view with `U` stripped.
    pub fn observed(&self) -> ObservedSample {
        ObservedSample {
            records: self.records.iter().map(Observation::observed).collect(),
            n1: self.n1,
            n0: self.n0,
        }
    }

    /// Writes the `x,u,s,a,y` schema. The `u` cell is left empty unless
    /// `include_u` is set.
    pub fn write_csv<W: Write>(&self, writer: W, include_u: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "u", "s", "a", "y"])?;
        for r in &self.records {
            let u = match (include_u, r.u) {
                (true, Some(u)) => u.to_string(),
                _ => String::new(),
            };
            let a = r.arm().map(|a| a.index().to_string()).unwrap_or_default();
            let y = r.y().map(|y| y.to_string()).unwrap_or_default();
            w.write_record([r.x.to_string(), u, r.s.code().to_string(), a, y])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(reader);
        let headers = rd.headers()?.clone();
        let expected = ["x", "u", "s", "a", "y"];
        if headers.len() != expected.len() || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Parse(format!("expected header x,u,s,a,y, got {headers:?}")));
        }
        let mut records = Vec::new();
        for (line, row) in rd.records().enumerate() {
            let row = row?;
            let cell = |i: usize| row.get(i).unwrap_or("").trim();
            let num = |i: usize| -> Result<Option<f64>> {
                let c = cell(i);
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse::<f64>()
                        .map(Some)
                        .map_err(|e| Error::Parse(format!("row {}: column {i}: {e}", line + 1)))
                }
            };
            let x = num(0)?.ok_or_else(|| Error::Parse(format!("row {}: missing x", line + 1)))?;
            let s = cell(2)
                .parse::<u8>()
                .ok()
                .and_then(Population::from_code)
                .ok_or_else(|| Error::Parse(format!("row {}: bad population label", line + 1)))?;
            let a = match cell(3) {
                "" => None,
                c => Some(
                    c.parse::<usize>()
                        .ok()
                        .and_then(Arm::from_index)
                        .ok_or_else(|| Error::Parse(format!("row {}: bad treatment", line + 1)))?,
                ),
            };
            let obs = Observation::try_new(x, num(1)?, s, a, num(4)?)
                .map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))?;
            records.push(obs);
        }
        Ok(Self::new(records))
    }
}

/// Composite sample as seen by estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSample {
    records: Vec<Observed>,
    n1: usize,
    n0: usize,
}

impl ObservedSample {
    pub fn new(records: Vec<Observed>) -> Self {
        let (n1, n0) = count(records.iter().map(|r| r.s));
        Self { records, n1, n0 }
    }

    pub fn records(&self) -> &[Observed] {
        &self.records
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn partition(&self, s: Population, a: Option<Arm>) -> Vec<Observed> {
        self.records
            .iter()
            .filter(|r| r.s == s && a.is_none_or(|a| r.arm == Some(a)))
            .copied()
            .collect()
    }

    /// Covariates and outcomes of the trial arm `D_{1,a}`.
    pub fn trial_arm(&self, arm: Arm) -> (Vec<f64>, Vec<f64>) {
        self.records
            .iter()
            .filter(|r| r.s == Population::Trial && r.arm == Some(arm))
            .filter_map(|r| r.y.map(|y| (r.x, y)))
            .unzip()
    }

    pub fn target_x(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.s == Population::Target).map(|r| r.x).collect()
    }
}

/// Squared-exponential length-scale. `Inactive` is the infinite length-scale:
/// the SE factor along that axis is identically one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LengthScale {
    Active(f64),
    Inactive,
}

impl LengthScale {
    pub fn is_inactive(self) -> bool {
        matches!(self, LengthScale::Inactive)
    }
}

impl fmt::Display for LengthScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LengthScale::Active(l) => write!(f, "{l}"),
            LengthScale::Inactive => f.write_str("inf"),
        }
    }
}

/// Linear + squared-exponential kernel hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub alpha_x: f64,
    pub alpha_u: f64,
    pub l_x: LengthScale,
    pub l_u: LengthScale,
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_x >= 0.0 && self.alpha_u >= 0.0) {
            return Err(Error::invalid("kernel linear weights must be nonnegative"));
        }
        for l in [self.l_x, self.l_u] {
            if let LengthScale::Active(v) = l {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::invalid("active length-scales must be positive and finite"));
                }
            }
        }
        Ok(())
    }
}

/// Fifth-order polynomial outcome surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmOutcomeParams {
    pub beta0: f64,
    pub beta_x: [f64; 5],
    pub beta_u: [f64; 5],
    pub beta_xu: [f64; 5],
    pub gamma: f64,
}

/// Fifth-order polynomial inside a logistic link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmLogitParams {
    pub c0: f64,
    pub c_x: [f64; 5],
    pub c_u: [f64; 5],
    pub c_xu: [f64; 5],
    pub gamma: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DgpSpec {
    Gp { fom: [KernelParams; 2], ps: KernelParams, pa: KernelParams },
    Glm { fom: [GlmOutcomeParams; 2], ps: GlmLogitParams, pa: GlmLogitParams },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredictorKind {
    Learned,
    IidNoise,
}

/// Seeds of the independent random streams that make up one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldSeeds {
    pub fom: [u64; 2],
    pub ps: u64,
    pub pa: u64,
    pub os: u64,
    pub target: u64,
    pub predictor: u64,
}

impl WorldSeeds {
    pub fn from_master(master: u64) -> Self {
        let d = |label: &str| derive_seed(master, &[tag(label)]);
        Self {
            fom: [d("fom0"), d("fom1")],
            ps: d("ps"),
            pa: d("pa"),
            os: d("os"),
            target: d("target"),
            predictor: d("predictor"),
        }
    }
}

/// Full description of one synthetic world and its sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub dgp: DgpSpec,
    pub n1: usize,
    pub n0: usize,
    pub n_os: usize,
    pub noise_sigma: f64,
    pub predictor_kind: PredictorKind,
    pub master_seed: u64,
    pub grid_size: usize,
    pub seeds: WorldSeeds,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n0 == 0 || self.n_os == 0 {
            return Err(Error::invalid("sample sizes must be positive"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be nonnegative"));
        }
        if let DgpSpec::Gp { fom, ps, pa } = &self.dgp {
            for k in fom.iter().chain([ps, pa]) {
                k.validate()?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    Om,
    OsOm,
    Abc,
    Aom,
    Ipw,
    Dr,
    DrAbc,
    DrPa,
    OmCategorical,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 8] = [
        EstimatorKind::Om,
        EstimatorKind::OsOm,
        EstimatorKind::Abc,
        EstimatorKind::Aom,
        EstimatorKind::Ipw,
        EstimatorKind::Dr,
        EstimatorKind::DrAbc,
        EstimatorKind::DrPa,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Om => "OM",
            EstimatorKind::OsOm => "OS-OM",
            EstimatorKind::Abc => "ABC",
            EstimatorKind::Aom => "AOM",
            EstimatorKind::Ipw => "IPW",
            EstimatorKind::Dr => "DR",
            EstimatorKind::DrAbc => "DR-ABC",
            EstimatorKind::DrPa => "DR-PA",
            EstimatorKind::OmCategorical => "OM-CAT",
        }
    }

    /// Whether the estimator consumes the observational predictor.
    pub fn uses_predictor(self) -> bool {
        matches!(
            self,
            EstimatorKind::OsOm
                | EstimatorKind::Abc
                | EstimatorKind::Aom
                | EstimatorKind::DrAbc
                | EstimatorKind::DrPa
        )
    }

    /// Whether the estimator needs a fitted participation model.
    pub fn uses_weights(self) -> bool {
        matches!(
            self,
            EstimatorKind::Ipw | EstimatorKind::Dr | EstimatorKind::DrAbc | EstimatorKind::DrPa
        )
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        [EstimatorKind::OmCategorical]
            .into_iter()
            .chain(EstimatorKind::ALL)
            .find(|k| k.label() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown estimator '{s}'")))
    }
}

/// One point estimate of the target mean potential outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub estimator: EstimatorKind,
    pub degree: usize,
    pub point_estimate: f64,
    pub arm: Arm,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Monte Carlo bias / variance / MSE over replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub bias: f64,
    /// Unbiased sample variance of the estimates.
    pub variance: f64,
    pub mse: f64,
    pub n_replications: usize,
    pub n_failures: usize,
}
