//! Synthetic worlds and cohort sampling.
//!
//! A [`World`] holds the two outcome surfaces `FOM_a(x, u)`, the trial
//! participation model and the observational treatment model. Cohorts are
//! drawn with `X, U ~ Uniform[-1, 1]`.

mod glm;
mod gp;
mod kernel;
mod noise;

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use glm::{glm_logit_prob, glm_outcome, sample_glm_params, GlmRow};
pub use gp::{lattice, sample_gp, GridFunction, DEFAULT_GRID_SIZE};
pub use kernel::{kernel_eval, se_factor};
pub use noise::{noise_predictor, NoisePredictor};

use crate::domain::{
    Arm, CompositeSample, DgpSpec, GlmLogitParams, GlmOutcomeParams, KernelParams, LengthScale,
    Observation, ScenarioSpec,
};
use crate::regression::sigmoid;
use crate::seeds::rng_from;
use crate::{Error, Result};

/// Probability floor and ceiling applied to GP-driven logits.
pub const PROB_CLIP: (f64, f64) = (0.1, 0.9);

/// Acceptance draws allowed per requested record before giving up.
const MAX_DRAWS_PER_RECORD: usize = 1000;

/// `median{sigmoid(l), 0.1, 0.9}`.
pub fn clipped_sigmoid(l: f64) -> f64 {
    sigmoid(l).clamp(PROB_CLIP.0, PROB_CLIP.1)
}

/// Closed-form surface, mostly for tests and oracles.
#[derive(Clone)]
pub struct Analytic(pub Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>);

impl fmt::Debug for Analytic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Analytic(..)")
    }
}

#[derive(Debug, Clone)]
pub enum Surface {
    Grid(GridFunction),
    Glm(GlmOutcomeParams),
    Analytic(Analytic),
}

impl Surface {
    pub fn analytic(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Surface::Analytic(Analytic(Arc::new(f)))
    }

    pub fn constant(c: f64) -> Self {
        Surface::analytic(move |_, _| c)
    }

    pub fn eval(&self, x: f64, u: f64) -> f64 {
        match self {
            Surface::Grid(g) => g.eval(x, u),
            Surface::Glm(p) => glm_outcome(p, x, u),
            Surface::Analytic(f) => (f.0)(x, u),
        }
    }
}

/// A probability model on `(x, u)`.
#[derive(Debug, Clone)]
pub enum Propensity {
    /// Logit surface passed through [`clipped_sigmoid`].
    Clipped(Surface),
    /// Unclipped polynomial logistic model.
    Glm(GlmLogitParams),
}

impl Propensity {
    pub fn prob(&self, x: f64, u: f64) -> f64 {
        match self {
            Propensity::Clipped(s) => clipped_sigmoid(s.eval(x, u)),
            Propensity::Glm(p) => glm_logit_prob(p, x, u),
        }
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub fom: [Surface; 2],
    pub ps: Propensity,
    pub pa: Propensity,
    pub noise_sigma: f64,
}

impl World {
    pub fn from_spec(spec: &ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let s = &spec.seeds;
        Ok(match &spec.dgp {
            DgpSpec::Gp { fom, ps, pa } => {
                let g = spec.grid_size;
                World {
                    fom: [
                        Surface::Grid(sample_gp(&fom[0], g, s.fom[0])?),
                        Surface::Grid(sample_gp(&fom[1], g, s.fom[1])?),
                    ],
                    ps: Propensity::Clipped(Surface::Grid(sample_gp(ps, g, s.ps)?)),
                    pa: Propensity::Clipped(Surface::Grid(sample_gp(pa, g, s.pa)?)),
                    noise_sigma: spec.noise_sigma,
                }
            }
            DgpSpec::Glm { fom, ps, pa } => World {
                fom: [Surface::Glm(fom[0]), Surface::Glm(fom[1])],
                ps: Propensity::Glm(*ps),
                pa: Propensity::Glm(*pa),
                noise_sigma: spec.noise_sigma,
            },
        })
    }

    pub fn outcome(&self, arm: Arm, x: f64, u: f64) -> f64 {
        self.fom[arm.index()].eval(x, u)
    }

    pub fn participation_prob(&self, x: f64, u: f64) -> f64 {
        self.ps.prob(x, u)
    }

    pub fn os_treatment_prob(&self, x: f64, u: f64) -> f64 {
        self.pa.prob(x, u)
    }

    fn observe<R: Rng + ?Sized>(&self, arm: Arm, x: f64, u: f64, rng: &mut R) -> f64 {
        let mut y = self.outcome(arm, x, u);
        if self.noise_sigma > 0.0 {
            y += self.noise_sigma * rng.sample::<f64, _>(StandardNormal);
        }
        y
    }
}

pub fn participation_prob(world: &World, x: f64, u: f64) -> f64 {
    world.participation_prob(x, u)
}

fn draw_cap(n: usize) -> usize {
    MAX_DRAWS_PER_RECORD.saturating_mul(n).saturating_add(1_000_000)
}

/// Exact-count rejection sampling of trial and target members from the
/// eligible cohort.
pub fn sample_cohorts<R: Rng + ?Sized>(
    world: &World,
    n1: usize,
    n0: usize,
    rng: &mut R,
) -> Result<(Vec<Observation>, Vec<Observation>)> {
    let mut trial = Vec::with_capacity(n1);
    let mut target = Vec::with_capacity(n0);
    let cap = draw_cap(n1 + n0);
    let mut draws = 0usize;
    while trial.len() < n1 || target.len() < n0 {
        draws += 1;
        if draws > cap {
            return Err(Error::Generation(format!(
                "rejection sampling exhausted {cap} draws ({} trial, {} target accepted)",
                trial.len(),
                target.len()
            )));
        }
        let x: f64 = rng.random_range(-1.0..=1.0);
        let u: f64 = rng.random_range(-1.0..=1.0);
        let s = rng.random::<f64>() < world.participation_prob(x, u);
        if s && trial.len() < n1 {
            let arm = if rng.random_bool(0.5) { Arm::Treated } else { Arm::Control };
            let y = world.observe(arm, x, u, rng);
            trial.push(Observation::trial(x, u, arm, y));
        } else if !s && target.len() < n0 {
            target.push(Observation::target(x, u));
        }
    }
    Ok((trial, target))
}

pub fn generate_trial_target(world: &World, n1: usize, n0: usize, seed: u64) -> Result<CompositeSample> {
    if n1 == 0 || n0 == 0 {
        return Err(Error::invalid("n1 and n0 must be positive"));
    }
    let (trial, target) = sample_cohorts(world, n1, n0, &mut rng_from(seed))?;
    Ok(CompositeSample::from_parts(&trial, &target))
}

/// Trial members only, drawn from `P(X, U | S = 1)`.
pub fn generate_trial(world: &World, n1: usize, seed: u64) -> Result<Vec<Observation>> {
    Ok(sample_cohorts(world, n1, 0, &mut rng_from(seed))?.0)
}

/// Target members only, drawn from `P(X, U | S = 0)`.
pub fn generate_target(world: &World, n0: usize, seed: u64) -> Result<Vec<Observation>> {
    Ok(sample_cohorts(world, 0, n0, &mut rng_from(seed))?.1)
}

pub fn generate_os(world: &World, n_os: usize, seed: u64) -> Result<Vec<Observation>> {
    if n_os == 0 {
        return Err(Error::invalid("n_os must be positive"));
    }
    let mut rng = rng_from(seed);
    Ok((0..n_os)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..=1.0);
            let u: f64 = rng.random_range(-1.0..=1.0);
            let arm = if rng.random::<f64>() < world.os_treatment_prob(x, u) {
                Arm::Treated
            } else {
                Arm::Control
            };
            let y = world.observe(arm, x, u, &mut rng);
            Observation::observational(x, u, arm, y)
        })
        .collect())
}

/// Writes `x,u,fom0,fom1,ps,pa` over the `G x G` lattice; `ps` and `pa` are
/// probabilities.
pub fn write_world_csv<W: Write>(world: &World, grid_size: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "u", "fom0", "fom1", "ps", "pa"])?;
    let pts = lattice(grid_size);
    for &x in &pts {
        for &u in &pts {
            w.write_record([
                x.to_string(),
                u.to_string(),
                world.outcome(Arm::Control, x, u).to_string(),
                world.outcome(Arm::Treated, x, u).to_string(),
                world.participation_prob(x, u).to_string(),
                world.os_treatment_prob(x, u).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Hidden-confounding settings of the OS treatment model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Confounding {
    None,
    Weak,
    Strong,
}

impl Confounding {
    pub const ALL: [Confounding; 3] = [Confounding::None, Confounding::Weak, Confounding::Strong];

    pub fn label(self) -> &'static str {
        match self {
            Confounding::None => "none",
            Confounding::Weak => "weak",
            Confounding::Strong => "strong",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// `(l_u, alpha_u)` of the treatment kernel.
    pub fn pa_u_params(self) -> (LengthScale, f64) {
        match self {
            Confounding::None => (LengthScale::Inactive, 0.0),
            Confounding::Weak => (LengthScale::Active(0.5), 0.0),
            Confounding::Strong => (LengthScale::Active(0.5), 10.0),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Confounding::ALL.into_iter().find(|c| c.label() == s.trim().to_ascii_lowercase())
    }
}

/// Kernel settings of the GP benchmark that are not varied by the grid.
pub mod gp_defaults {
    use super::*;

    pub const FOM_ALPHA_X: f64 = 1.0;
    pub const FOM_ALPHA_U: f64 = 3.0;
    pub const FOM_L_U: f64 = 2.0;
    pub const FOM0_L_X: f64 = 0.5;
    pub const PA_ALPHA_X: f64 = 1.0;
    pub const PA_L_X: f64 = 1.0;

    pub fn fom_kernel(l_x: f64) -> KernelParams {
        KernelParams {
            alpha_x: FOM_ALPHA_X,
            alpha_u: FOM_ALPHA_U,
            l_x: LengthScale::Active(l_x),
            l_u: LengthScale::Active(FOM_L_U),
        }
    }

    pub fn ps_kernel() -> KernelParams {
        KernelParams { alpha_x: 10.0, alpha_u: 0.0, l_x: LengthScale::Active(1.0), l_u: LengthScale::Inactive }
    }

    pub fn pa_kernel(conf: Confounding) -> KernelParams {
        let (l_u, alpha_u) = conf.pa_u_params();
        KernelParams { alpha_x: PA_ALPHA_X, alpha_u, l_x: LengthScale::Active(PA_L_X), l_u }
    }

    pub fn gp_dgp(l_x_fom1: f64, conf: Confounding) -> DgpSpec {
        DgpSpec::Gp {
            fom: [fom_kernel(FOM0_L_X), fom_kernel(l_x_fom1)],
            ps: ps_kernel(),
            pa: pa_kernel(conf),
        }
    }
}
