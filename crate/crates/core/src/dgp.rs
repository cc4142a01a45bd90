//! Data-generating worlds.
//!
//! Two fully specified worlds are provided. The discrete world has binary
//! `Z, X, A, Y, R` and a finite support that the [`crate::exact`] module can
//! enumerate. The continuous world has a Gaussian covariate and a Gaussian
//! outcome with a constant treatment effect. In both, `X` is the only
//! partially observed variable and its response indicator `R` depends on
//! `(Z, A, Y)` alone, so missingness is at random.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Treatment probabilities must stay inside `(EPS, 1 - EPS)`.
pub const POSITIVITY_EPS: f64 = 0.01;

/// A logit large enough that `expit` rounds to exactly 1.
pub const ALWAYS_LOGIT: f64 = 50.0;

#[inline]
pub fn expit(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[inline]
pub(crate) fn bit(v: f64) -> u8 {
    u8::from(v != 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldKind {
    Discrete,
    Continuous,
}

/// Binary world: `Z -> X|Z -> A|Z,X -> Y|Z,X,A -> R|Z,A,Y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteWorldParams {
    /// P(Z = 1).
    pub p_z: f64,
    /// P(X = 1 | Z = z) for z = 0, 1.
    pub p_x_given_z: [f64; 2],
    /// Logit of e(z, x): intercept, z, x, z*x.
    pub ps_coeffs: [f64; 4],
    /// Logit of P(Y = 1 | z, x, a): intercept, z, x, a, x*a.
    pub outcome_coeffs: [f64; 5],
    /// Logit of P(R = 1 | z, a, y): intercept, z, a, y.
    pub response_coeffs: [f64; 4],
}

impl DiscreteWorldParams {
    /// The confounded default: `X` drives both treatment and outcome, and
    /// whether `X` is observed depends on all of `Z`, `A` and `Y`.
    pub fn default_preset() -> Self {
        Self {
            p_z: 0.5,
            p_x_given_z: [0.3, 0.6],
            ps_coeffs: [-1.0, 0.4, 1.6, 0.4],
            outcome_coeffs: [-1.0, 0.4, 1.5, 0.8, 0.6],
            response_coeffs: [1.0, -0.4, -1.2, -1.2],
        }
    }

    /// Default preset with every `X` coefficient doubled.
    pub fn strong_confounding() -> Self {
        let mut p = Self::default_preset();
        p.ps_coeffs[2] *= 2.0;
        p.ps_coeffs[3] *= 2.0;
        p.outcome_coeffs[2] *= 2.0;
        p.outcome_coeffs[4] *= 2.0;
        p
    }

    /// `X` has no effect on treatment or outcome.
    pub fn no_confounding() -> Self {
        let mut p = Self::default_preset();
        p.ps_coeffs[2] = 0.0;
        p.ps_coeffs[3] = 0.0;
        p.outcome_coeffs[2] = 0.0;
        p.outcome_coeffs[4] = 0.0;
        p
    }

    /// Default preset with `X` always observed.
    pub fn no_missing() -> Self {
        Self {
            response_coeffs: [ALWAYS_LOGIT, 0.0, 0.0, 0.0],
            ..Self::default_preset()
        }
    }

    /// Missingness driven almost entirely by the outcome.
    pub fn outcome_driven_missingness() -> Self {
        Self {
            response_coeffs: [1.5, 0.0, 0.0, -2.5],
            ..Self::default_preset()
        }
    }

    /// Missingness depending on `Z` only.
    pub fn covariate_driven_missingness() -> Self {
        Self {
            response_coeffs: [1.0, -1.2, 0.0, 0.0],
            ..Self::default_preset()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let open = |name: String, p: f64| {
            if p.is_finite() && p > 0.0 && p < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {p} is not a probability in (0, 1)")))
            }
        };
        open("p_z".into(), self.p_z)?;
        for z in 0..2 {
            open(format!("p_x_given_z[{z}]"), self.p_x_given_z[z])?;
        }
        let finite = self
            .ps_coeffs
            .iter()
            .chain(&self.outcome_coeffs)
            .chain(&self.response_coeffs)
            .all(|c| c.is_finite());
        if !finite {
            return Err(Error::Config("coefficients must be finite".into()));
        }
        for z in 0..2u8 {
            for x in 0..2u8 {
                let e = self.propensity(z, f64::from(x));
                if !(e > POSITIVITY_EPS && e < 1.0 - POSITIVITY_EPS) {
                    return Err(Error::Config(format!(
                        "positivity: e(z={z}, x={x}) = {e} outside ({POSITIVITY_EPS}, {})",
                        1.0 - POSITIVITY_EPS
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn x_prob(&self, z: u8) -> f64 {
        self.p_x_given_z[z as usize]
    }

    /// Linear predictor of the treatment model. `x` may be fractional.
    pub fn ps_logit(&self, z: u8, x: f64) -> f64 {
        let [g0, gz, gx, gzx] = self.ps_coeffs;
        let z = f64::from(z);
        g0 + gz * z + gx * x + gzx * z * x
    }

    /// e(z, x) = P(A = 1 | Z = z, X = x).
    pub fn propensity(&self, z: u8, x: f64) -> f64 {
        expit(self.ps_logit(z, x))
    }

    pub fn outcome_prob(&self, z: u8, x: u8, a: u8) -> f64 {
        let [b0, bz, bx, ba, bxa] = self.outcome_coeffs;
        let (z, x, a) = (f64::from(z), f64::from(x), f64::from(a));
        expit(b0 + bz * z + bx * x + ba * a + bxa * x * a)
    }

    pub fn response_prob(&self, z: u8, a: u8, y: u8) -> f64 {
        let [d0, dz, da, dy] = self.response_coeffs;
        expit(d0 + dz * f64::from(z) + da * f64::from(a) + dy * f64::from(y))
    }

    /// Sum over (z, x) of P(z, x) [P(Y=1|z,x,1) - P(Y=1|z,x,0)].
    pub fn true_ate(&self) -> f64 {
        let mut ate = 0.0;
        for z in 0..2u8 {
            let pz = if z == 1 { self.p_z } else { 1.0 - self.p_z };
            for x in 0..2u8 {
                let px = if x == 1 { self.x_prob(z) } else { 1.0 - self.x_prob(z) };
                ate += pz * px * (self.outcome_prob(z, x, 1) - self.outcome_prob(z, x, 0));
            }
        }
        ate
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianCovariate {
    pub intercept: f64,
    pub slope: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearOutcome {
    /// Constant treatment effect t.
    pub effect: f64,
    pub intercept: f64,
    pub z_slope: f64,
    pub x_slope: f64,
    pub sd: f64,
}

fn half() -> f64 {
    0.5
}

/// Gaussian world with binary `Z`:
/// `X | Z ~ N(a0 + a1 Z, sx^2)`, `logit e = g0 + g1 Z + g2 X`,
/// `Y = t A + b0 + b1 Z + b2 X + N(0, sy^2)`, `logit P(R=1) = d0 + d1 Z + d2 A + d3 Y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousWorldParams {
    #[serde(default = "half")]
    pub p_z: f64,
    pub x_given_z: GaussianCovariate,
    pub ps_coeffs: [f64; 3],
    pub outcome: LinearOutcome,
    pub response_coeffs: [f64; 4],
}

impl ContinuousWorldParams {
    pub fn default_preset() -> Self {
        Self {
            p_z: 0.5,
            x_given_z: GaussianCovariate {
                intercept: 0.0,
                slope: 0.8,
                sd: 1.0,
            },
            ps_coeffs: [-0.4, 0.5, 0.8],
            outcome: LinearOutcome {
                effect: 1.0,
                intercept: 0.0,
                z_slope: 0.5,
                x_slope: 1.0,
                sd: 1.0,
            },
            response_coeffs: [1.2, -0.4, -0.6, -0.5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_z > 0.0 && self.p_z < 1.0) {
            return Err(Error::Config(format!("p_z = {} is not in (0, 1)", self.p_z)));
        }
        if !(self.x_given_z.sd > 0.0 && self.x_given_z.sd.is_finite()) {
            return Err(Error::Config(format!("x_given_z.sd = {} must be positive", self.x_given_z.sd)));
        }
        if !(self.outcome.sd > 0.0 && self.outcome.sd.is_finite()) {
            return Err(Error::Config(format!("outcome.sd = {} must be positive", self.outcome.sd)));
        }
        let o = &self.outcome;
        let finite = [self.x_given_z.intercept, self.x_given_z.slope, o.effect, o.intercept, o.z_slope, o.x_slope]
            .iter()
            .chain(&self.ps_coeffs)
            .chain(&self.response_coeffs)
            .all(|c| c.is_finite());
        if !finite {
            return Err(Error::Config("coefficients must be finite".into()));
        }
        Ok(())
    }

    pub fn x_mean(&self, z: f64) -> f64 {
        self.x_given_z.intercept + self.x_given_z.slope * z
    }

    pub fn ps_logit(&self, z: f64, x: f64) -> f64 {
        let [g0, gz, gx] = self.ps_coeffs;
        g0 + gz * z + gx * x
    }

    pub fn propensity(&self, z: f64, x: f64) -> f64 {
        expit(self.ps_logit(z, x))
    }

    /// E[Y | z, x, a].
    pub fn outcome_mean(&self, z: f64, x: f64, a: u8) -> f64 {
        let o = &self.outcome;
        o.effect * f64::from(a) + o.intercept + o.z_slope * z + o.x_slope * x
    }

    pub fn response_prob(&self, z: f64, a: u8, y: f64) -> f64 {
        let [d0, dz, da, dy] = self.response_coeffs;
        expit(d0 + dz * z + da * f64::from(a) + dy * y)
    }

    pub fn true_ate(&self) -> f64 {
        self.outcome.effect
    }
}

/// Either world, as read from configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum World {
    Discrete(DiscreteWorldParams),
    Continuous(ContinuousWorldParams),
}

/// Names accepted by [`World::preset`].
pub const PRESET_NAMES: &[&str] = &[
    "default",
    "strong",
    "no_confounding",
    "no_missing",
    "y_missing",
    "z_missing",
    "continuous",
];

impl World {
    pub fn preset(name: &str) -> Result<World> {
        Ok(match name {
            "default" => World::Discrete(DiscreteWorldParams::default_preset()),
            "strong" => World::Discrete(DiscreteWorldParams::strong_confounding()),
            "no_confounding" => World::Discrete(DiscreteWorldParams::no_confounding()),
            "no_missing" => World::Discrete(DiscreteWorldParams::no_missing()),
            "y_missing" => World::Discrete(DiscreteWorldParams::outcome_driven_missingness()),
            "z_missing" => World::Discrete(DiscreteWorldParams::covariate_driven_missingness()),
            "continuous" => World::Continuous(ContinuousWorldParams::default_preset()),
            other => {
                return Err(Error::Config(format!(
                    "unknown preset '{other}' (expected one of {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn kind(&self) -> WorldKind {
        match self {
            World::Discrete(_) => WorldKind::Discrete,
            World::Continuous(_) => WorldKind::Continuous,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            World::Discrete(p) => p.validate(),
            World::Continuous(p) => p.validate(),
        }
    }

    pub fn true_ate(&self) -> Result<f64> {
        true_ate(self)
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        self.generate_unmasked(n, seed).map(|(ds, _)| ds)
    }

    /// The sample together with the covariate before masking.
    pub fn generate_unmasked(&self, n: usize, seed: u64) -> Result<(Dataset, Vec<f64>)> {
        match self {
            World::Discrete(p) => generate_discrete_unmasked(p, n, seed),
            World::Continuous(p) => generate_continuous_unmasked(p, n, seed),
        }
    }
}

/// One observed sample. `x[i]` is present exactly when `r[i] == 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub kind: WorldKind,
    pub z: Vec<f64>,
    pub x: Vec<Option<f64>>,
    pub a: Vec<u8>,
    pub y: Vec<f64>,
    pub r: Vec<u8>,
}

impl Dataset {
    pub fn empty(kind: WorldKind) -> Self {
        Self {
            kind,
            z: Vec::new(),
            x: Vec::new(),
            a: Vec::new(),
            y: Vec::new(),
            r: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.r.iter().filter(|&&r| r == 0).count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if [self.x.len(), self.a.len(), self.y.len(), self.r.len()].iter().any(|&l| l != n) {
            return Err(Error::Size("dataset columns differ in length".into()));
        }
        for i in 0..n {
            if (self.r[i] == 1) != self.x[i].is_some() {
                return Err(Error::Config(format!("row {i}: x must be present iff r = 1")));
            }
            if self.a[i] > 1 || self.r[i] > 1 {
                return Err(Error::Config(format!("row {i}: a and r must be binary")));
            }
        }
        Ok(())
    }

    /// Writes `z,x,a,y,r` with an empty field for missing `x`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["z", "x", "a", "y", "r"])?;
        for i in 0..self.n() {
            let x = self.x[i].map(|v| v.to_string()).unwrap_or_default();
            out.write_record([
                self.z[i].to_string(),
                x,
                self.a[i].to_string(),
                self.y[i].to_string(),
                self.r[i].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// How the two potential outcomes are jointly drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `Y0` and `Y1` independent given `(Z, X)`.
    ConditionallyIndependent,
}

/// A dataset that also carries both potential outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialDataset {
    pub data: Dataset,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub coupling: Coupling,
}

#[inline]
fn bernoulli<R: Rng>(rng: &mut R, p: f64) -> u8 {
    u8::from(rng.random::<f64>() < p)
}

pub fn generate_discrete(params: &DiscreteWorldParams, n: usize, seed: u64) -> Result<Dataset> {
    generate_discrete_unmasked(params, n, seed).map(|(ds, _)| ds)
}

/// As [`generate_discrete`], also returning every covariate value before
/// masking.
pub fn generate_discrete_unmasked(params: &DiscreteWorldParams, n: usize, seed: u64) -> Result<(Dataset, Vec<f64>)> {
    params.validate()?;
    let mut rng = rng::stream(seed, &[tag::GENERATE]);
    let mut ds = Dataset::empty(WorldKind::Discrete);
    let mut full = Vec::with_capacity(n);
    for _ in 0..n {
        let z = bernoulli(&mut rng, params.p_z);
        let x = bernoulli(&mut rng, params.x_prob(z));
        let a = bernoulli(&mut rng, params.propensity(z, f64::from(x)));
        let y = bernoulli(&mut rng, params.outcome_prob(z, x, a));
        let r = bernoulli(&mut rng, params.response_prob(z, a, y));
        ds.z.push(f64::from(z));
        ds.x.push((r == 1).then_some(f64::from(x)));
        ds.a.push(a);
        ds.y.push(f64::from(y));
        ds.r.push(r);
        full.push(f64::from(x));
    }
    Ok((ds, full))
}

pub fn generate_continuous(params: &ContinuousWorldParams, n: usize, seed: u64) -> Result<Dataset> {
    generate_continuous_unmasked(params, n, seed).map(|(ds, _)| ds)
}

pub fn generate_continuous_unmasked(params: &ContinuousWorldParams, n: usize, seed: u64) -> Result<(Dataset, Vec<f64>)> {
    params.validate()?;
    let mut rng = rng::stream(seed, &[tag::GENERATE]);
    let mut ds = Dataset::empty(WorldKind::Continuous);
    let mut full = Vec::with_capacity(n);
    for _ in 0..n {
        let z = f64::from(bernoulli(&mut rng, params.p_z));
        let ex: f64 = StandardNormal.sample(&mut rng);
        let x = params.x_mean(z) + params.x_given_z.sd * ex;
        let a = bernoulli(&mut rng, params.propensity(z, x));
        let ey: f64 = StandardNormal.sample(&mut rng);
        let y = params.outcome_mean(z, x, a) + params.outcome.sd * ey;
        let r = bernoulli(&mut rng, params.response_prob(z, a, y));
        ds.z.push(z);
        ds.x.push((r == 1).then_some(x));
        ds.a.push(a);
        ds.y.push(y);
        ds.r.push(r);
        full.push(x);
    }
    Ok((ds, full))
}

/// Discrete sample with both potential outcomes; `y` follows from SUTVA.
pub fn generate_potential_discrete(
    params: &DiscreteWorldParams,
    n: usize,
    seed: u64,
) -> Result<PotentialDataset> {
    params.validate()?;
    let mut rng = rng::stream(seed, &[tag::GENERATE, 1]);
    let mut data = Dataset::empty(WorldKind::Discrete);
    let mut y0s = Vec::with_capacity(n);
    let mut y1s = Vec::with_capacity(n);
    for _ in 0..n {
        let z = bernoulli(&mut rng, params.p_z);
        let x = bernoulli(&mut rng, params.x_prob(z));
        let a = bernoulli(&mut rng, params.propensity(z, f64::from(x)));
        let y0 = bernoulli(&mut rng, params.outcome_prob(z, x, 0));
        let y1 = bernoulli(&mut rng, params.outcome_prob(z, x, 1));
        let y = if a == 1 { y1 } else { y0 };
        let r = bernoulli(&mut rng, params.response_prob(z, a, y));
        data.z.push(f64::from(z));
        data.x.push((r == 1).then_some(f64::from(x)));
        data.a.push(a);
        data.y.push(f64::from(y));
        data.r.push(r);
        y0s.push(f64::from(y0));
        y1s.push(f64::from(y1));
    }
    Ok(PotentialDataset {
        data,
        y0: y0s,
        y1: y1s,
        coupling: Coupling::ConditionallyIndependent,
    })
}

pub fn true_ate(world: &World) -> Result<f64> {
    world.validate()?;
    Ok(match world {
        World::Discrete(p) => p.true_ate(),
        World::Continuous(p) => p.true_ate(),
    })
}
