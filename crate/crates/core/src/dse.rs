// SPDX-License-Identifier: Apache-2.0

//! Dynamic semantic editing: a discrete integrator that accumulates guided velocity
//! differences between a target and a source branch into an edit latent.
//!
//! For step `k` of `T` the velocities are queried at `t_q = 1 - (k - 1) / T`:
//!
//! ```text
//! Z_src(t_q) = (1 - t_q) Z0 + t_q eps_k
//! Z_tar(t_q) = z_edit + Z_src(t_q) - Z0
//! dV         = V_tar(Z_tar) - V_src(Z_src)
//! z_edit    <- z_edit - alpha_k dV
//! ```
//!
//! The minus sign integrates from `t = 1` down to `t = 0`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instruction_parser::EditPlan;
use crate::linalg;
use crate::run_dir::csv_table;
use crate::semantic_space::{ConceptVocabulary, PromptEmbedding};
use crate::velocity_model::{
    forward_diffuse, guided_velocity_for, GuidanceConfig, NoiseSchedule, PromptParams,
    PromptTarget, VelocityModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Uniform,
    Decayed,
    Custom,
}

impl ScheduleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleKind::Uniform => "uniform",
            ScheduleKind::Decayed => "decayed",
            ScheduleKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ScheduleKind::Uniform),
            "decayed" => Ok(ScheduleKind::Decayed),
            "custom" => Ok(ScheduleKind::Custom),
            other => Err(Error::InvalidConfig(format!("unknown schedule {other:?}"))),
        }
    }
}

/// Per-step editing gains `alpha_1..alpha_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub kind: ScheduleKind,
    pub gains: Vec<f64>,
}

impl AlphaSchedule {
    pub fn custom(gains: Vec<f64>) -> Result<Self> {
        let s = Self {
            kind: ScheduleKind::Custom,
            gains,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gains.is_empty() {
            return Err(Error::InvalidConfig("alpha schedule is empty".into()));
        }
        if let Some(g) = self.gains.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(Error::InvalidConfig(format!(
                "alpha gain {g} outside [0, 1]"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

pub fn make_alpha_schedule(kind: ScheduleKind, steps: usize) -> Result<AlphaSchedule> {
    if steps == 0 {
        return Err(Error::InvalidConfig("T must be at least 1".into()));
    }
    let base = 1.0 / steps as f64;
    let gains = match kind {
        ScheduleKind::Uniform => vec![base; steps],
        ScheduleKind::Decayed => {
            if !steps.is_multiple_of(3) {
                return Err(Error::InvalidConfig(format!(
                    "decayed schedule needs T divisible by 3, got {steps}"
                )));
            }
            let third = steps / 3;
            (0..steps)
                .map(|i| match i / third {
                    0 => base,
                    1 => 0.6 * base,
                    _ => 0.3 * base,
                })
                .collect()
        }
        ScheduleKind::Custom => {
            return Err(Error::InvalidConfig(
                "custom schedules are built from explicit gains".into(),
            ))
        }
    };
    Ok(AlphaSchedule { kind, gains })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DseConfig {
    pub steps: usize,
    pub schedule: AlphaSchedule,
    pub guidance: GuidanceConfig,
    pub prompt: PromptParams,
    pub noise: NoiseSchedule,
    pub seed: u64,
}

impl Default for DseConfig {
    fn default() -> Self {
        Self {
            steps: 30,
            schedule: make_alpha_schedule(ScheduleKind::Decayed, 30).expect("30 divisible by 3"),
            guidance: GuidanceConfig::default(),
            prompt: PromptParams::default(),
            noise: NoiseSchedule::linear(),
            seed: 0,
        }
    }
}

impl DseConfig {
    pub fn with_schedule(mut self, kind: ScheduleKind) -> Result<Self> {
        self.schedule = make_alpha_schedule(kind, self.steps)?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("T must be at least 1".into()));
        }
        self.schedule.validate()?;
        if self.schedule.len() != self.steps {
            return Err(Error::InvalidConfig(format!(
                "alpha schedule has {} gains for T = {}",
                self.schedule.len(),
                self.steps
            )));
        }
        self.guidance.validate()?;
        self.prompt.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    /// Grid time after the step, `1 - k / T`.
    pub t: f64,
    /// Time at which this step's velocities were evaluated.
    pub t_query: f64,
    /// Source and target branch latents at `t`, diffused with this step's noise draw.
    pub z_src_t: Vec<f64>,
    pub z_tar_t: Vec<f64>,
    pub z_edit: Vec<f64>,
    pub delta_v: Vec<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    Completed,
    EarlyStop,
}

impl HaltReason {
    pub fn as_str(self) -> &'static str {
        match self {
            HaltReason::Completed => "completed",
            HaltReason::EarlyStop => "early_stop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub config: DseConfig,
    pub z_src0: Vec<f64>,
    pub target_direction: Vec<f64>,
    /// Step 0 is the initialization record.
    pub steps: Vec<StepRecord>,
    pub halt: HaltReason,
}

impl Trajectory {
    /// Number of integration steps taken (the initialization record is not counted).
    pub fn num_steps(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn final_latent(&self) -> &[f64] {
        &self.steps.last().expect("trajectory has step 0").z_edit
    }

    pub fn scores(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.score).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trajectory serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("trajectory", e))
    }

    pub fn to_csv(&self) -> String {
        csv_table(
            &[
                "k",
                "t",
                "score",
                "dv_norm",
                "cos_to_source",
                "cos_to_target",
            ],
            self.steps.iter().map(|s| {
                (
                    s.k,
                    s.t,
                    s.score,
                    linalg::norm(&s.delta_v),
                    cosine_or_zero(&s.z_edit, &self.z_src0),
                    cosine_or_zero(&s.z_edit, &self.target_direction),
                )
            }),
        )
    }
}

fn cosine_or_zero(a: &[f64], b: &[f64]) -> f64 {
    linalg::cosine(a, b).unwrap_or(0.0)
}

/// `5 (cos + 1)` with an undefined cosine treated as 0.
pub fn score_against(z: &[f64], direction: &[f64]) -> f64 {
    5.0 * (cosine_or_zero(z, direction) + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Halt,
}

/// Hook invoked with every record, including the initialization record.
pub trait StepObserver {
    fn observe(&mut self, record: &StepRecord) -> Control;
}

impl<F: FnMut(&StepRecord) -> Control> StepObserver for F {
    fn observe(&mut self, record: &StepRecord) -> Control {
        self(record)
    }
}

/// Observer that never halts.
pub struct NoObserver;

impl StepObserver for NoObserver {
    fn observe(&mut self, _: &StepRecord) -> Control {
        Control::Continue
    }
}

/// The noise draws `eps_1..eps_T` used by a run with `seed`.
pub fn noise_sequence(seed: u64, steps: usize, dimension: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps)
        .map(|_| {
            (0..dimension)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        })
        .collect()
}

/// Conditioning of one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub target: PromptTarget,
    pub scale: f64,
}

/// Resumable integrator state.
pub struct DseState<'a> {
    model: &'a dyn VelocityModel,
    config: &'a DseConfig,
    z_src0: Vec<f64>,
    src: Branch,
    tar: Branch,
    direction: Vec<f64>,
    noise: Vec<Vec<f64>>,
    z_edit: Vec<f64>,
    k: usize,
}

impl<'a> DseState<'a> {
    /// `direction` is the vector scores are measured against.
    pub fn new(
        model: &'a dyn VelocityModel,
        config: &'a DseConfig,
        z_src0: Vec<f64>,
        src: Branch,
        tar: Branch,
        direction: Vec<f64>,
    ) -> Result<Self> {
        config.validate()?;
        let d = z_src0.len();
        linalg::check_dim(d, src.target.dimension())?;
        linalg::check_dim(d, tar.target.dimension())?;
        linalg::check_dim(d, direction.len())?;
        Ok(Self {
            model,
            config,
            noise: noise_sequence(config.seed, config.steps, d),
            z_edit: z_src0.clone(),
            z_src0,
            src,
            tar,
            direction,
            k: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_done(&self) -> bool {
        self.k >= self.config.steps
    }

    pub fn z_edit(&self) -> &[f64] {
        &self.z_edit
    }

    pub fn initial_record(&self) -> StepRecord {
        StepRecord {
            k: 0,
            t: 1.0,
            t_query: 1.0,
            z_src_t: self.z_src0.clone(),
            z_tar_t: self.z_src0.clone(),
            z_edit: self.z_src0.clone(),
            delta_v: vec![0.0; self.z_src0.len()],
            score: score_against(&self.z_src0, &self.direction),
        }
    }

    fn branch_target(&self, z_src_t: &[f64]) -> Vec<f64> {
        self.z_edit
            .iter()
            .zip(z_src_t)
            .zip(&self.z_src0)
            .map(|((e, s), z0)| e + (s - z0))
            .collect()
    }

    pub fn step(&mut self) -> Result<StepRecord> {
        if self.is_done() {
            return Err(Error::InvalidConfig(format!(
                "all {} steps already taken",
                self.config.steps
            )));
        }
        let steps = self.config.steps as f64;
        let k = self.k + 1;
        let t_query = 1.0 - (k - 1) as f64 / steps;
        let eps = &self.noise[k - 1];
        let z_src_t = forward_diffuse(&self.z_src0, t_query, eps, &self.config.noise)?.values;
        let z_tar_t = self.branch_target(&z_src_t);
        let v_src = guided_velocity_for(
            self.model,
            &z_src_t,
            t_query,
            &self.src.target,
            self.src.scale,
        )?;
        let v_tar = guided_velocity_for(
            self.model,
            &z_tar_t,
            t_query,
            &self.tar.target,
            self.tar.scale,
        )?;
        let delta_v = linalg::sub(&v_tar, &v_src);
        linalg::axpy(
            &mut self.z_edit,
            -self.config.schedule.gains[k - 1],
            &delta_v,
        );
        self.k = k;
        let t = 1.0 - k as f64 / steps;
        let z_src_t = forward_diffuse(&self.z_src0, t, eps, &self.config.noise)?.values;
        let z_tar_t = self.branch_target(&z_src_t);
        Ok(StepRecord {
            k,
            t,
            t_query,
            z_src_t,
            z_tar_t,
            z_edit: self.z_edit.clone(),
            delta_v,
            score: score_against(&self.z_edit, &self.direction),
        })
    }
}

/// Runs up to `T` steps, stopping early when the observer asks to.
pub fn run_dse_branches(
    model: &dyn VelocityModel,
    z_src0: &[f64],
    src: Branch,
    tar: Branch,
    direction: Vec<f64>,
    config: &DseConfig,
    observer: &mut dyn StepObserver,
) -> Result<Trajectory> {
    let mut state = DseState::new(model, config, z_src0.to_vec(), src, tar, direction)?;
    let first = state.initial_record();
    let mut halt = HaltReason::Completed;
    let mut steps = Vec::with_capacity(config.steps + 1);
    let mut control = observer.observe(&first);
    steps.push(first);
    while !state.is_done() {
        if control == Control::Halt {
            halt = HaltReason::EarlyStop;
            break;
        }
        let rec = state.step()?;
        control = observer.observe(&rec);
        steps.push(rec);
    }
    if control == Control::Halt && halt == HaltReason::Completed && state.k() < config.steps {
        halt = HaltReason::EarlyStop;
    }
    Ok(Trajectory {
        seed: config.seed,
        config: config.clone(),
        z_src0: z_src0.to_vec(),
        target_direction: state.direction.clone(),
        steps,
        halt,
    })
}

/// DSE between two prompt embeddings; scores are measured against `c_tar`.
pub fn run_dse(
    model: &dyn VelocityModel,
    z_src0: &[f64],
    c_src: &PromptEmbedding,
    c_tar: &PromptEmbedding,
    config: &DseConfig,
    observer: &mut dyn StepObserver,
) -> Result<Trajectory> {
    if c_tar.is_null() {
        return Err(Error::NullPrompt);
    }
    let src = Branch {
        target: PromptTarget::from_prompt(c_src, &config.prompt),
        scale: config.guidance.scale_src,
    };
    let tar = Branch {
        target: PromptTarget::from_prompt(c_tar, &config.prompt),
        scale: config.guidance.scale_tar,
    };
    run_dse_branches(
        model,
        z_src0,
        src,
        tar,
        c_tar.values.clone(),
        config,
        observer,
    )
}

/// Embeds the plan's captions and runs DSE between them.
pub fn run_dse_plan(
    model: &dyn VelocityModel,
    vocab: &ConceptVocabulary,
    z_src0: &[f64],
    plan: &EditPlan,
    config: &DseConfig,
    observer: &mut dyn StepObserver,
) -> Result<Trajectory> {
    let c_src = vocab.embed_prompt(&plan.caption_src)?;
    let c_tar = vocab.embed_prompt(&plan.caption_tar)?;
    run_dse(model, z_src0, &c_src, &c_tar, config, observer)
}
