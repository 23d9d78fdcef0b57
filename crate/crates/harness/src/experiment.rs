use crate::seeds::SeedPlan;
use crate::Result;
use hiact_controller::{rollout, RolloutTrace, TrialResult};
use hiact_demonstrator::{build_dataset, Dataset, SCALED_PROFILE};
use hiact_policy::{train, ChunkPolicyDriver, ModelParams, PolicyConfig, TrainLog};
use hiact_sim_env::EnvConfig;
use rayon::prelude::*;

/// One cell of the ablation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSpec {
    pub name: String,
    pub haptic: bool,
    pub recovery_samples: bool,
}

/// An object the policy is evaluated on. Size multipliers are the ratio
/// of the object's longest dimension to the 8.9 mm reference seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectVariant {
    pub name: String,
    pub size_multiplier: f64,
    pub contrast: f64,
}

/// The object set used for the generalization sweep; longest dimensions
/// in millimetres against the 8.9 mm reference. The soybean analogue also
/// drops visual contrast (its color nearly matches the table).
pub fn default_variants() -> Vec<ObjectVariant> {
    let mm = |longest: f64| longest / 8.9;
    let v = |name: &str, mult: f64, contrast: f64| ObjectVariant {
        name: name.to_string(),
        size_multiplier: mult,
        contrast,
    };
    vec![
        v("control", 1.0, 1.0),
        v("dried_blueberry", mm(10.31), 1.0),
        v("frozen_blueberry", mm(13.26), 1.0),
        v("dried_cranberry", mm(13.40), 1.0),
        v("soybean", mm(13.86), 0.1),
        v("coffee_bean", mm(14.42), 1.0),
        v("almond", mm(23.38), 1.0),
    ]
}

/// Evaluation protocol shared by every condition and variant.
#[derive(Debug, Clone, Copy)]
pub struct EvalSettings {
    pub n_trials: u32,
    pub p_slip: f64,
    pub ensembling_rate: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { n_trials: 100, p_slip: 0.3, ensembling_rate: 0.1 }
    }
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub label: String,
    pub haptic: bool,
    pub recovery: bool,
    pub size_multiplier: f64,
    pub contrast: f64,
    pub trials: u32,
    pub pick_rate: f64,
    pub delivery_rate: f64,
    pub mean_grasp_attempts: f64,
    pub loop_failure_rate: f64,
    pub eval_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn row(&self, label: &str) -> &ResultRow {
        self.rows
            .iter()
            .find(|r| r.label == label)
            .unwrap_or_else(|| panic!("no row labelled {label}"))
    }
}

/// Everything the grid produces: the table, the trained models, their
/// training logs, and one trace per condition for force-profile export.
pub struct GridOutcome {
    pub table: ResultsTable,
    pub conditions: Vec<ConditionSpec>,
    pub models: Vec<ModelParams>,
    pub logs: Vec<TrainLog>,
    pub dataset: Dataset,
    /// (label, trace) of the first delivered trial per condition.
    pub sample_traces: Vec<(String, RolloutTrace)>,
}

impl GridOutcome {
    pub fn model_for(&self, haptic: bool, recovery: bool) -> &ModelParams {
        let idx = self
            .conditions
            .iter()
            .position(|c| c.haptic == haptic && c.recovery_samples == recovery)
            .expect("all four grid conditions present");
        &self.models[idx]
    }

    pub fn log_for(&self, haptic: bool, recovery: bool) -> &TrainLog {
        let idx = self
            .conditions
            .iter()
            .position(|c| c.haptic == haptic && c.recovery_samples == recovery)
            .expect("all four grid conditions present");
        &self.logs[idx]
    }
}

#[derive(Debug, Clone)]
pub struct GridOptions {
    /// (success, recovery) demonstration counts for the training pool.
    pub profile: (u32, u32),
    pub eval: EvalSettings,
    /// Base policy config; haptic_enabled and rng_seed are set per condition.
    pub policy: PolicyConfig,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            profile: SCALED_PROFILE,
            eval: EvalSettings::default(),
            policy: PolicyConfig::default(),
        }
    }
}

struct EvalOutcome {
    results: Vec<TrialResult>,
    first_delivered: Option<RolloutTrace>,
}

/// Evaluate a model on `n_trials` paired episodes. Trials run in parallel
/// with per-trial RNG streams and merge in index order, so the outcome is
/// independent of scheduling.
fn evaluate(
    params: &ModelParams,
    plan: &SeedPlan,
    eval: &EvalSettings,
    variant: &ObjectVariant,
) -> Result<EvalOutcome> {
    let trials: Vec<(TrialResult, RolloutTrace)> = (0..eval.n_trials)
        .into_par_iter()
        .map(|trial| {
            let cfg = EnvConfig {
                p_slip: eval.p_slip,
                seed_size_multiplier: variant.size_multiplier,
                seed_contrast: variant.contrast,
                rng_seed: plan.eval_trial(trial),
                ..EnvConfig::default()
            };
            let mut driver = ChunkPolicyDriver::new(params, eval.ensembling_rate)
                .expect("model params validated at training time");
            rollout(cfg, &mut driver)
        })
        .collect::<std::result::Result<_, _>>()?;

    let first_delivered = trials
        .iter()
        .find(|(r, _)| r.delivery_success)
        .map(|(_, trace)| trace.clone());
    Ok(EvalOutcome { results: trials.into_iter().map(|(r, _)| r).collect(), first_delivered })
}

fn summarize(
    label: &str,
    spec: Option<&ConditionSpec>,
    variant: &ObjectVariant,
    results: &[TrialResult],
    eval_seed: u64,
) -> ResultRow {
    let n = results.len().max(1) as f64;
    ResultRow {
        label: label.to_string(),
        haptic: spec.map_or(true, |s| s.haptic),
        recovery: spec.map_or(true, |s| s.recovery_samples),
        size_multiplier: variant.size_multiplier,
        contrast: variant.contrast,
        trials: results.len() as u32,
        pick_rate: results.iter().filter(|r| r.pick_success).count() as f64 / n,
        delivery_rate: results.iter().filter(|r| r.delivery_success).count() as f64 / n,
        mean_grasp_attempts: results.iter().map(|r| r.grasp_attempts as f64).sum::<f64>() / n,
        loop_failure_rate: results.iter().filter(|r| r.loop_failure).count() as f64 / n,
        eval_seed,
    }
}

/// Train and evaluate the four {haptic, recovery} conditions.
///
/// Both recovery arms train on the identical success pool (the recovery
/// arm adds the staged-slip episodes), all four share a training seed, and
/// every condition faces the same evaluation episodes, so differences in
/// the table are attributable to the condition alone.
pub fn run_grid(master_seed: u64, options: &GridOptions) -> Result<GridOutcome> {
    let plan = SeedPlan::new(master_seed);
    let (n_success, n_recovery) = options.profile;
    let dataset = build_dataset(n_success, n_recovery, plan.dataset())?;
    let dataset_no_recovery = dataset.without_recovery();

    let conditions = vec![
        ConditionSpec { name: "haptic_recovery".into(), haptic: true, recovery_samples: true },
        ConditionSpec { name: "haptic_no_recovery".into(), haptic: true, recovery_samples: false },
        ConditionSpec { name: "act_recovery".into(), haptic: false, recovery_samples: true },
        ConditionSpec { name: "act_no_recovery".into(), haptic: false, recovery_samples: false },
    ];

    let control = ObjectVariant { name: "control".into(), size_multiplier: 1.0, contrast: 1.0 };
    let mut models = Vec::with_capacity(4);
    let mut logs = Vec::with_capacity(4);
    let mut rows = Vec::with_capacity(4);
    let mut sample_traces = Vec::new();

    for spec in &conditions {
        let cfg = PolicyConfig {
            haptic_enabled: spec.haptic,
            rng_seed: plan.training(),
            ..options.policy.clone()
        };
        let data = if spec.recovery_samples { &dataset } else { &dataset_no_recovery };
        let (params, log) = train(data, &cfg)?;

        let outcome = if options.eval.n_trials > 0 {
            evaluate(&params, &plan, &options.eval, &control)?
        } else {
            EvalOutcome { results: vec![], first_delivered: None }
        };
        rows.push(summarize(&spec.name, Some(spec), &control, &outcome.results, plan.eval_trial(0)));
        if let Some(trace) = outcome.first_delivered {
            sample_traces.push((spec.name.clone(), trace));
        }
        models.push(params);
        logs.push(log);
    }

    Ok(GridOutcome {
        table: ResultsTable { rows },
        conditions,
        models,
        logs,
        dataset,
        sample_traces,
    })
}

/// Evaluate one trained model across object variants on paired episodes.
pub fn run_generalization(
    params: &ModelParams,
    master_seed: u64,
    eval: &EvalSettings,
    variants: &[ObjectVariant],
) -> Result<ResultsTable> {
    let plan = SeedPlan::new(master_seed);
    let mut rows = Vec::with_capacity(variants.len());
    for variant in variants {
        let outcome = if eval.n_trials > 0 {
            evaluate(params, &plan, eval, variant)?
        } else {
            EvalOutcome { results: vec![], first_delivered: None }
        };
        rows.push(summarize(&variant.name, None, variant, &outcome.results, plan.eval_trial(0)));
    }
    Ok(ResultsTable { rows })
}
