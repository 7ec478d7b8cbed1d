//! Experiment orchestration behind the `indegree` binary.
//!
//! [`run`] dispatches an [`ExperimentConfig`] to its subcommand and writes
//! every artifact under the configured output directory. JSON reports are
//! wrapped as `{"config": ..., "result": ...}`; CSV logs start with a
//! `# {config}` comment line. Model and mask files keep their interchange
//! formats and are referenced from the accompanying report.

pub mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};

use indegree_core::bayesnet::{AncestralSampler, DenseSampler};
use indegree_core::calibration::{self, CalibrationTarget, Constants};
use indegree_core::divergence::{chi2, hellinger_sq, kl, tv, RestrictedPair};
use indegree_core::estimators::{
    geometric_target, high_prob_risk_experiment, sample_size_for, two_level_target, RiskExperiment,
};
use indegree_core::hardness::{
    minimax_experiment, AddKLearner, EmpiricalLearner, IgnorantLearner, MinimaxConfig, MinimaxLearner,
    NearProperLearner,
};
use indegree_core::learner::{identify_support, mass_shift, pair_masses};
use indegree_core::{
    choose_k, enumerate_dags, near_proper_learn, test_degree, test_graph, Assignment, BayesNetModel, Dag,
    DenseDistribution, LearnerConfig, Sampler, Seed, SupportMask, TesterConfig, Verdict,
};
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use config::*;
pub use config::{Cli, Command, ExperimentConfig};
use output::Outputs;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] indegree_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "invalid-config",
            CliError::Core(indegree_core::Error::Calibration(_)) => "calibration",
            CliError::Core(_) => "domain",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } | CliError::Json(_) => "parse",
            CliError::Csv(_) => "csv",
        }
    }

    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Result of a successful run.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    /// One-line human summary.
    pub summary: String,
    pub files: Vec<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = read(path)?;
        serde_json::from_str(&text).map_err(|source| CliError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Run one experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let seed = Seed(cfg.seed);
    let mut out = Outputs::new(cfg)?;
    let (code, summary) = match &cfg.command {
        Command::Sample(a) => sample(a, seed, &mut out)?,
        Command::Learn(a) => learn(a, seed, &mut out)?,
        Command::Test(a) => test(a, seed, &mut out)?,
        Command::Minimax(a) => minimax(a, seed, &mut out)?,
        Command::Risk(a) => risk(a, seed, &mut out)?,
        Command::Support(a) => support(a, seed, &mut out)?,
        Command::Distances(a) => distances(a, &mut out)?,
        Command::Calibrate(a) => calibrate(a, seed, &mut out)?,
        Command::EnumerateDags(a) => enumerate(a, &mut out)?,
    };
    Ok(Outcome {
        exit_code: code,
        summary,
        files: out.into_files(),
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| CliError::Config(format!("--{flag} is required")))
}

/// A distribution given either as a net or as a dense vector.
enum Model {
    Net(BayesNetModel),
    Dense(DenseDistribution),
}

enum AnySampler<'a> {
    Net(AncestralSampler<'a>),
    Dense(DenseSampler),
}

impl Sampler for AnySampler<'_> {
    fn n(&self) -> usize {
        match self {
            AnySampler::Net(s) => s.n(),
            AnySampler::Dense(s) => s.n(),
        }
    }

    fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Assignment {
        match self {
            AnySampler::Net(s) => s.draw(rng),
            AnySampler::Dense(s) => s.draw(rng),
        }
    }
}

impl Model {
    fn load(path: &Path) -> Result<Model> {
        let text = read(path)?;
        let v: Value = parse(path, &text)?;
        if v.get("mass").is_some() {
            Ok(Model::Dense(parse(path, &text)?))
        } else {
            Ok(Model::Net(parse(path, &text)?))
        }
    }

    fn n(&self) -> Result<usize> {
        match self {
            Model::Net(m) => Ok(m.n()),
            Model::Dense(d) => d
                .n_bits()
                .ok_or_else(|| CliError::Config("dense distribution length is not a power of two".into())),
        }
    }

    fn sampler(&self) -> Result<AnySampler<'_>> {
        Ok(match self {
            Model::Net(m) => AnySampler::Net(m.sampler()),
            Model::Dense(d) => AnySampler::Dense(d.sampler()?),
        })
    }

    fn dense(&self) -> Result<DenseDistribution> {
        Ok(match self {
            Model::Net(m) => m.exact_distribution()?,
            Model::Dense(d) => d.clone(),
        })
    }
}

/// A graph file: `n` and `parents`, optionally with `cpt`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    n: usize,
    parents: Vec<Vec<usize>>,
    #[serde(default)]
    cpt: Option<Vec<Vec<f64>>>,
}

fn load_graph(path: &Path) -> Result<(Dag, Option<BayesNetModel>)> {
    let text = read(path)?;
    let g: GraphFile = parse(path, &text)?;
    if g.parents.len() != g.n {
        return Err(CliError::Config(format!(
            "{}: n = {} but {} parent lists",
            path.display(),
            g.n,
            g.parents.len()
        )));
    }
    let dag = Dag::new(g.parents)?;
    let model = match g.cpt {
        Some(cpt) => Some(BayesNetModel::new(dag.clone(), cpt)?),
        None => None,
    };
    Ok((dag, model))
}

fn learner_config(a: &LearnerArgs) -> Result<LearnerConfig> {
    let cfg = LearnerConfig {
        epsilon: a.eps,
        c: a.c,
        m1_multiplier: a.m1_mult,
        m2_multiplier: a.m2_mult,
        k_override: a.k,
        degree_bound: a.degree,
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

/// Truth and graph for `learn` and `support`.
fn truth_and_graph(truth: &Option<PathBuf>, graph: &Option<PathBuf>) -> Result<(Model, Dag)> {
    match (truth, graph) {
        (Some(t), g) => {
            let model = Model::load(t)?;
            let dag = match (g, &model) {
                (Some(g), _) => load_graph(g)?.0,
                (None, Model::Net(m)) => m.dag.clone(),
                (None, Model::Dense(_)) => {
                    return Err(CliError::Config("--graph is required with a dense truth".into()))
                }
            };
            if dag.n != model.n()? {
                return Err(CliError::Config(format!(
                    "graph has {} nodes, truth has {}",
                    dag.n,
                    model.n()?
                )));
            }
            Ok((model, dag))
        }
        (None, Some(g)) => match load_graph(g)? {
            (dag, Some(m)) => Ok((Model::Net(m), dag)),
            (_, None) => Err(CliError::Config(
                "--truth is required when the graph file has no cpt".into(),
            )),
        },
        (None, None) => Err(CliError::Config("--truth or --graph is required".into())),
    }
}

fn sample(a: &SampleArgs, seed: Seed, out: &mut Outputs) -> Result<(i32, String)> {
    let model = Model::load(required(&a.model, "model")?)?;
    let n = model.n()?;
    let samples = model.sampler()?.draw_many(a.m, &mut seed.rng());
    let rows = samples
        .iter()
        .enumerate()
        .map(|(i, x)| vec![i.to_string(), x.0.to_string(), x.to_bit_string(n)]);
    out.csv(
        "samples.csv",
        json!({ "n": n, "m": a.m }),
        &["index", "assignment", "bits"],
        rows,
    )?;
    Ok((EXIT_OK, format!("wrote {} samples of {n} bits", a.m)))
}

fn learn(a: &LearnArgs, seed: Seed, out: &mut Outputs) -> Result<(i32, String)> {
    let (truth, dag) = truth_and_graph(&a.truth, &a.graph)?;
    let cfg = learner_config(&a.learner)?;
    let learned = near_proper_learn(&truth.sampler()?, &dag, &cfg, seed)?;
    let model_path = out.raw("model.json", &learned.q.to_json())?;
    let mask_path = out.raw("mask.json", &learned.mask.to_json())?;
    let shifted = match mass_shift(&learned.q, &learned.mask) {
        Ok(s) => Some(out.raw("shifted_model.json", &s.to_json())?),
        Err(indegree_core::Error::DegenerateMask { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let mut result = json!({
        "model": model_path,
        "mask": mask_path,
        "shifted_model": shifted,
        "excluded_pairs": learned.mask.excluded().len(),
        "support_samples": learned.support_samples,
        "learning_samples": learned.learning_samples,
        "k": learned.k,
    });
    if let Ok(p) = truth.dense() {
        let q = learned.q.exact_distribution()?;
        let inside = learned.mask.indicator()?;
        let pair = RestrictedPair::new(p.mass(), q.mass(), &inside)?;
        result["restricted_chi2"] = json!(pair.chi2()?);
        result["support_mass"] = json!(pair.p_mass());
    }
    let resolved = json!({ "learner": cfg, "d": cfg.degree(&dag)? });
    out.json("learn_report.json", resolved, &result)?;
    Ok((
        EXIT_OK,
        format!(
            "learned on {} nodes from {} samples, {} excluded pairs",
            dag.n,
            learned.total_samples(),
            learned.mask.excluded().len()
        ),
    ))
}

fn tester_config(a: &TestArgs) -> Result<TesterConfig> {
    let cfg = TesterConfig {
        learner: learner_config(&a.learner)?,
        gamma: a.gamma.unwrap_or(calibration::committed().gamma.value),
        m_multiplier: a.m_mult,
        mode: a.mode,
        c_amp: a.c_amp,
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn test(a: &TestArgs, seed: Seed, out: &mut Outputs) -> Result<(i32, String)> {
    let cfg = tester_config(a)?;
    match (&a.graph, a.all_degree) {
        (Some(_), None) => {
            let (truth, dag) = truth_and_graph(&a.truth, &a.graph)?;
            let report = test_graph(&truth.sampler()?, &dag, &cfg, seed)?;
            out.json("test_report.json", json!({ "tester": cfg }), &report)?;
            Ok((exit_for(report.verdict), report.summary()))
        }
        (None, Some(d)) => {
            let truth = Model::load(required(&a.truth, "truth")?)?;
            let n = truth.n()?;
            let report = test_degree(&truth.sampler()?, n, d, &cfg, seed)?;
            out.json("test_report.json", json!({ "tester": cfg }), &report)?;
            let summary = format!(
                "{} n={n} d={d} eps={} graphs_tested={} reps={}{}",
                if report.verdict == Verdict::Accept {
                    "ACCEPT"
                } else {
                    "REJECT"
                },
                cfg.epsilon(),
                report.tested.len(),
                report.reps,
                report
                    .accepting_graph
                    .as_ref()
                    .map(|g| format!(" accepting_parents={:?}", g.parents))
                    .unwrap_or_default()
            );
            Ok((exit_for(report.verdict), summary))
        }
        _ => Err(CliError::Config(
            "exactly one of --graph or --all-degree is required".into(),
        )),
    }
}

fn exit_for(v: Verdict) -> i32 {
    match v {
        Verdict::Accept => EXIT_OK,
        Verdict::Reject => EXIT_REJECT,
    }
}

fn minimax(a: &MinimaxArgs, seed: Seed, out: &mut Outputs) -> Result<(i32, String)> {
    let learner: Box<dyn MinimaxLearner> = match a.learner {
        LearnerKind::Ignorant => Box::new(IgnorantLearner),
        LearnerKind::Addk => Box::new(AddKLearner { k: a.k }),
        LearnerKind::Empirical => Box::new(EmpiricalLearner),
        LearnerKind::Nearproper => Box::new(NearProperLearner {
            config: LearnerConfig::default(),
        }),
    };
    let cfg = MinimaxConfig {
        n: a.n,
        epsilon: a.eps,
        eps0: a.eps0,
        m_samples: a.m,
        trials: a.trials,
    };
    let report = minimax_experiment(learner.as_ref(), &cfg, seed)?;
    let resolved = json!({ "eps0": report.eps0, "m": report.m_samples, "learner": report.learner });
    let rows = report.trials.iter().map(|t| {
        vec![
            t.trial.to_string(),
            t.seed.0.to_string(),
            indegree_core::numeric::fmt_f64(t.chi2),
            t.no_rare_sample.to_string(),
            t.restricted_chi2
                .map(indegree_core::numeric::fmt_f64)
                .unwrap_or_default(),
            t.support_mass.map(indegree_core::numeric::fmt_f64).unwrap_or_default(),
        ]
    });
    out.csv(
        "minimax_trials.csv",
        resolved.clone(),
        &[
            "trial",
            "seed",
            "chi2",
            "no_rare_sample",
            "restricted_chi2",
            "support_mass",
        ],
        rows,
    )?;
    let mut summary = serde_json::to_value(&report)?;
    summary.as_object_mut().expect("object").remove("trials");
    out.json("minimax_summary.json", resolved, &summary)?;
    Ok((
        EXIT_OK,
        format!(
            "{} learner, n={}, m={}: mean risk {:.4}, median {:.4}, no-rare fraction {:.3} (expected {:.3})",
            report.learner,
            report.n,
            report.m_samples,
            report.mean,
            report.median,
            report.no_rare_fraction,
            report.no_rare_expected
        ),
    ))
}

fn risk(a: &RiskArgs, seed: Seed, out: &mut Outputs) -> Result<(i32, String)> {
    let (target_name, p) = match &a.target_file {
        Some(path) => (path.display().to_string(), {
            let text = read(path)?;
            parse::<DenseDistribution>(path, &text)?
        }),
        None => (
            format!("{:?}", a.target).to_lowercase(),
            match a.target {
                RiskTarget::Uniform => DenseDistribution::uniform(a.size),
                RiskTarget::Geometric => geometric_target(a.size, 0.9)?,
                RiskTarget::TwoLevel => two_level_target(a.size, 0.9)?,
            },
        ),
    };
    let c = a.c.unwrap_or(calibration::committed().addk_c.value);
    let exp = RiskExperiment {
        n_samples: a
            .n_samples
            .unwrap_or_else(|| sample_size_for(p.len(), a.eps, a.delta, c)),
        k: match a.k {
            Some(k) => k,
            None => choose_k(a.delta, a.c_k)?,
        },
        trials: a.trials,
        delta: a.delta,
        bound_multiple: a.bound_mult.unwrap_or(c),
    };
    let report = high_prob_risk_experiment(&p, &exp, seed)?;
    let resolved = json!({ "target": target_name, "c": c, "experiment": exp });
    let rows = report.trials.iter().map(|t| {
        vec![
            t.trial.to_string(),
            t.seed.0.to_string(),
            indegree_core::numeric::fmt_f64(t.chi2),
        ]
    });
    out.csv(
        "risk_trials.csv",
        resolved.clone(),
        &["trial_index", "seed", "chi2"],
        rows,
    )?;
    let exceed_eps = report.trials.iter().filter(|t| t.chi2 > a.eps).count() as f64 / report.trials.len() as f64;
    let mut summary = serde_json::to_value(&report)?;
    let obj = summary.as_object_mut().expect("object");
    obj.remove("trials");
    obj.insert("exceed_eps_fraction".into(), json!(exceed_eps));
    out.json("risk_summary.json", resolved, &summary)?;
    Ok((
        EXIT_OK,
        format!(
            "add-K (K={}) on {target_name}, N={}: (1-δ)-quantile {:.5}, mean {:.5}, exceed {:.4}",
            exp.k, exp.n_samples, report.quantile, report.mean, report.exceed_fraction
        ),
    ))
}

fn support(a: &SupportArgs, seed: Seed, out: &mut Outputs) -> Result<(i32, String)> {
    let (truth, dag) = truth_and_graph(&a.truth, &a.graph)?;
    let cfg = learner_config(&a.learner)?;
    let d = cfg.degree(&dag)?;
    let mask = identify_support(&truth.sampler()?, &dag, &cfg, seed)?;
    let mask_path = out.raw("mask.json", &mask.to_json())?;
    let mut result = json!({
        "mask": mask_path,
        "excluded": mask.excluded(),
        "samples": cfg.support_samples(dag.n, d),
        "threshold": cfg.threshold(dag.n, d),
    });
    if let Ok(p) = truth.dense() {
        result["support_mass"] = json!(mask.mass_of(&p)?);
        result["sandwich_holds"] = json!(indegree_core::learner::sandwich_holds(
            &mask,
            &pair_masses(&p, &dag)?,
            &cfg
        )?);
    }
    out.json("support_report.json", json!({ "learner": cfg, "d": d }), &result)?;
    Ok((EXIT_OK, format!("{} excluded pairs", mask.excluded().len())))
}

fn distances(a: &DistancesArgs, out: &mut Outputs) -> Result<(i32, String)> {
    let p_model = Model::load(required(&a.p, "p")?)?;
    let q_model = Model::load(required(&a.q, "q")?)?;
    let p = p_model.dense()?;
    let q = q_model.dense()?;
    if p.len() != q.len() {
        return Err(indegree_core::Error::DimensionMismatch(p.len(), q.len()).into());
    }
    let mut result = json!({
        "tv": tv(p.mass(), q.mass()),
        "hellinger_sq": hellinger_sq(p.mass(), q.mass()),
        "kl": extended(kl(p.mass(), q.mass())),
        "chi2": extended(chi2(p.mass(), q.mass())),
    });
    if let Some(path) = &a.mask {
        let Model::Net(q_net) = &q_model else {
            return Err(CliError::Config("--mask needs q to be a net file".into()));
        };
        let mask = SupportMask::from_json(&q_net.dag, &read(path)?)?;
        let inside = mask.indicator()?;
        let pair = RestrictedPair::new(p.mass(), q.mass(), &inside)?;
        let (on, off) = indegree_core::divergence::hellinger_sq_split(p.mass(), q.mass(), &inside);
        result["restricted"] = json!({
            "chi2": pair.chi2()?,
            "chi2_expanded": pair.chi2_expanded()?,
            "one_plus_chi2_form": pair.one_plus_chi2_form()?,
            "tv": pair.tv(),
            "p_mass": pair.p_mass(),
            "q_mass": pair.q_mass(),
            "hellinger_sq_on": on,
            "hellinger_sq_off": off,
        });
    }
    out.json("distances.json", json!({}), &result)?;
    Ok((
        EXIT_OK,
        format!(
            "tv={:.6} hellinger_sq={:.6} kl={:.6} chi2={:.6}",
            tv(p.mass(), q.mass()),
            hellinger_sq(p.mass(), q.mass()),
            kl(p.mass(), q.mass()),
            chi2(p.mass(), q.mass())
        ),
    ))
}

/// JSON has no infinities; spell them as strings.
fn extended(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(indegree_core::numeric::fmt_f64(v))
    }
}

fn calibrate(a: &CalibrateArgs, seed: Seed, out: &mut Outputs) -> Result<(i32, String)> {
    let budget = a.budget.unwrap_or(a.target.default_budget());
    let record = calibration::calibrate(a.target, budget, seed)?;
    out.json(
        &format!("calibration_{}.json", a.target.name()),
        json!({ "target": a.target, "budget": budget }),
        &record,
    )?;
    if let Some(path) = &a.update {
        let text = read(path)?;
        let mut constants: Constants = parse(path, &text)?;
        constants.set(a.target, record.clone());
        let body = serde_json::to_string_pretty(&constants)? + "\n";
        fs::write(path, body).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok((
        EXIT_OK,
        format!("{} = {} from {budget} runs", a.target.name(), record.value),
    ))
}

fn enumerate(a: &EnumerateArgs, out: &mut Outputs) -> Result<(i32, String)> {
    let dags: Vec<Dag> = enumerate_dags(a.n, a.d)?.collect();
    out.json("dags.json", json!({}), &dags)?;
    Ok((
        EXIT_OK,
        format!("{} graphs on {} nodes with in-degree <= {}", dags.len(), a.n, a.d),
    ))
}

/// Targets accepted by `calibrate`, for help output.
pub fn calibration_targets() -> Vec<&'static str> {
    CalibrationTarget::ALL.iter().map(|t| t.name()).collect()
}
