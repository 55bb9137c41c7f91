use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use toposcale::competition::{
    compete, curate_sft, evaluate_strategy, PlantedScorer, Scorer, SelectionResult,
    StrategyRegistry, StrategyReport,
};
use toposcale::dataset::Dataset;
use toposcale::generation::{
    plant_world, simulate_dataset, synthetic_problems, HttpGenerator, MockGenerator,
    ResponseGenerator, SyntheticWorld,
};
use toposcale::jsonl::{read_jsonl, write_jsonl};
use toposcale::metrics::{build_report, MetricReport, TrmEval};
use toposcale::tag::{annotate_dataset, segment_difficulty, tier_counts};
use toposcale::trm::{build_training_set, evaluate, split_problem_ids, train, TrmModel};
use toposcale::{Problem, TopoAnnotation, Topology};

use crate::config::{Paths, PipelineConfig};

/// Outcome of a command that did not hit a configuration or validation error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Some requests failed; their records are missing from the output.
    Partial { failed: usize },
    /// Every request failed.
    Total { failed: usize },
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Partial { .. } => 2,
            Status::Total { .. } => 3,
        }
    }

    fn worst(self, other: Status) -> Status {
        if other.exit_code() > self.exit_code() {
            other
        } else {
            self
        }
    }
}

pub struct Ctx {
    pub cfg: PipelineConfig,
    pub paths: Paths,
}

fn require(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} file {} does not exist", path.display());
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn load_problems(ctx: &Ctx) -> Result<Vec<Problem>> {
    require(&ctx.paths.problems, "problems")?;
    Ok(read_jsonl(&ctx.paths.problems)?)
}

fn load_dataset(ctx: &Ctx, with_annotations: bool) -> Result<Dataset> {
    require(&ctx.paths.problems, "problems")?;
    require(&ctx.paths.responses, "responses")?;
    let annotations = if with_annotations {
        require(&ctx.paths.annotations, "annotations")?;
        Some(ctx.paths.annotations.as_path())
    } else {
        None
    };
    Ok(Dataset::load(&ctx.paths.problems, &ctx.paths.responses, annotations)?)
}

fn load_model(ctx: &Ctx) -> Result<TrmModel> {
    require(&ctx.paths.model, "model")?;
    TrmModel::load(&ctx.paths.model).with_context(|| format!("loading {}", ctx.paths.model.display()))
}

pub fn make_problems(ctx: &Ctx) -> Result<Status> {
    let g = &ctx.cfg.generation;
    if g.problems == 0 {
        bail!("generation.problems must be >= 1");
    }
    let problems = synthetic_problems(g.problems, g.seed);
    write_jsonl(&ctx.paths.problems, &problems)?;
    println!("wrote {} problems to {}", problems.len(), ctx.paths.problems.display());
    Ok(Status::Success)
}

pub fn generate(ctx: &Ctx) -> Result<Status> {
    let problems = load_problems(ctx)?;
    let g = &ctx.cfg.generation;
    let params = g.params();
    let run = match &ctx.cfg.endpoint {
        None => {
            let world = plant_world(&problems, &g.profile, g.seed)?;
            world.save(&ctx.paths.world)?;
            MockGenerator { world: &world }.generate(&problems, &params, g.seed)?
        }
        Some(endpoint) => {
            let run = HttpGenerator {
                endpoint: endpoint.clone(),
            }
            .generate(&problems, &params, g.seed)?;
            write_jsonl(&ctx.paths.errors, &run.failures)?;
            run
        }
    };
    write_jsonl(&ctx.paths.responses, &run.records)?;
    for t in Topology::ALL {
        let n = run.records.iter().filter(|r| r.topology == t).count();
        println!("{t}: {n} responses");
    }
    let failed = run.failures.len();
    Ok(if failed == 0 {
        Status::Success
    } else {
        eprintln!("{failed} requests failed; see {}", ctx.paths.errors.display());
        if run.records.is_empty() {
            Status::Total { failed }
        } else {
            Status::Partial { failed }
        }
    })
}

pub fn annotate(ctx: &Ctx) -> Result<Status> {
    let mut d = load_dataset(ctx, false)?;
    annotate_dataset(&mut d)?;
    write_jsonl(&ctx.paths.responses, &d.responses)?;
    write_jsonl(&ctx.paths.annotations, &d.annotations)?;
    let correct = d.responses.iter().filter(|r| r.hard_label == Some(1)).count();
    println!(
        "annotated {} responses ({} correct) over {} problems",
        d.responses.len(),
        correct,
        d.annotations.len()
    );
    Ok(Status::Success)
}

pub fn segment(ctx: &Ctx) -> Result<Status> {
    require(&ctx.paths.annotations, "annotations")?;
    let annotations: Vec<TopoAnnotation> = read_jsonl(&ctx.paths.annotations)?;
    let segmented = segment_difficulty(&annotations, &ctx.cfg.segment)?;
    write_jsonl(&ctx.paths.annotations, &segmented)?;
    let mut csv = String::from("tier,problems\n");
    for (tier, n) in tier_counts(&segmented) {
        println!("{tier}: {n}");
        writeln!(csv, "{tier},{n}")?;
    }
    write_text(&ctx.paths.reports.join("tiers.csv"), &csv)?;
    Ok(Status::Success)
}

pub fn train_trm(ctx: &Ctx) -> Result<Status> {
    let d = load_dataset(ctx, true)?;
    let (train_ids, _) = split_problem_ids(&d.problems);
    if train_ids.is_empty() {
        bail!("training split is empty");
    }
    let set = build_training_set(&d, Some(&train_ids), &ctx.cfg.trm)?;
    let out = train(&set, &ctx.cfg.trm)?;
    out.model.save(&ctx.paths.model)?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in out.loss_trace.iter().enumerate() {
        writeln!(csv, "{},{l}", i + 1)?;
    }
    write_text(&ctx.paths.reports.join("train_loss.csv"), &csv)?;
    println!(
        "trained on {} problems ({} regression items, {} pairs); final loss {:.6}",
        train_ids.len(),
        set.regression.len(),
        set.pairs.len(),
        out.loss_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(Status::Success)
}

fn holdout_eval(ctx: &Ctx, model: &TrmModel, d: &Dataset) -> Result<TrmEval> {
    let (_, test_ids) = split_problem_ids(&d.problems);
    if test_ids.is_empty() {
        bail!("held-out split is empty");
    }
    Ok(evaluate(model, d, &test_ids, ctx.cfg.trm.pairs_per_problem, ctx.cfg.trm.seed)?)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

pub fn eval_trm(ctx: &Ctx) -> Result<Status> {
    let model = load_model(ctx)?;
    let d = load_dataset(ctx, true)?;
    let eval = holdout_eval(ctx, &model, &d)?;
    write_json(&ctx.paths.reports.join("trm_eval.json"), &eval)?;
    println!("spearman_rho: {}", fmt_opt(eval.spearman_rho));
    println!("pairwise_accuracy: {}", fmt_opt(eval.pairwise_accuracy));
    Ok(Status::Success)
}

pub fn compete_cmd(ctx: &Ctx) -> Result<Status> {
    if !ctx.paths.model.is_file() {
        bail!(
            "compete needs a trained reward model; {} does not exist",
            ctx.paths.model.display()
        );
    }
    let model = load_model(ctx)?;
    let d = load_dataset(ctx, false)?;
    let mut selections: Vec<SelectionResult> = Vec::new();
    for (pid, rs) in d.responses_by_problem() {
        let problem = d.problem(pid).expect("references checked");
        selections.push(compete(problem, &rs, &model, ctx.cfg.compete.aggregate)?);
    }
    write_jsonl(&ctx.paths.selections, &selections)?;
    for t in Topology::ALL {
        let n = selections.iter().filter(|s| s.winning_topology == t).count();
        println!("{t} wins {n} problems");
    }
    Ok(Status::Success)
}

pub fn curate(ctx: &Ctx) -> Result<Status> {
    let model = load_model(ctx)?;
    let d = load_dataset(ctx, true)?;
    let out = curate_sft(&d, &model, &ctx.cfg.curate)?;
    write_jsonl(&ctx.paths.sft, &out.records)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    for (tier, ids) in &out.sampled {
        let n = out.records.iter().filter(|r| r.difficulty == *tier).count();
        println!("{tier}: {} problems sampled, {n} records", ids.len());
    }
    Ok(Status::Success)
}

#[derive(Serialize)]
struct FullReport<'a> {
    dataset: &'a MetricReport,
    tiers: BTreeMap<String, usize>,
    strategies: &'a [StrategyReport],
}

fn strategy_row(r: &StrategyReport) -> String {
    let share = &r.selection_share;
    format!(
        "{},{},{},{},{},{},{}",
        r.strategy,
        r.report.overall_accuracy,
        r.report.answer_accuracy.map_or(String::new(), |a| a.to_string()),
        share[Topology::CoT],
        share[Topology::ToT],
        share[Topology::GoT],
        r.report.mean_response_length
    )
}

/// Strategy rows for the mock world's tuned generator, scored by `scorer`.
fn hybrid_report(ctx: &Ctx, world: &SyntheticWorld, problems: &[Problem], scorer: &dyn Scorer) -> Result<StrategyReport> {
    let tuned = world.tuned(ctx.cfg.generation.tuning_gain)?;
    let g = &ctx.cfg.generation;
    let d = simulate_dataset(&tuned, problems, &g.params(), g.seed)?;
    let s = StrategyRegistry::default().build("rewarding", Some(scorer), ctx.cfg.compete.aggregate)?;
    let mut r = evaluate_strategy(&d, s.as_ref())?;
    r.strategy = "hybrid".into();
    Ok(r)
}

pub fn report(ctx: &Ctx) -> Result<Status> {
    let d = load_dataset(ctx, true)?;
    let model = if ctx.paths.model.is_file() {
        Some(load_model(ctx)?)
    } else {
        None
    };
    let trm_eval = match &model {
        Some(m) => holdout_eval(ctx, m, &d).ok(),
        None => None,
    };
    let dataset_report = build_report(&d, trm_eval.as_ref())?;

    let registry = StrategyRegistry::default();
    let scorer = model.as_ref().map(|m| m as &dyn Scorer);
    let mut names = vec!["fixed-cot", "fixed-tot", "fixed-got"];
    if scorer.is_some() {
        names.push("rewarding");
    }
    names.push("oracle");
    let mut strategies = Vec::new();
    for name in names {
        let s = registry.build(name, scorer, ctx.cfg.compete.aggregate)?;
        strategies.push(evaluate_strategy(&d, s.as_ref())?);
    }

    // mock runs also report the planted-scorer ceiling and the tuned world
    if ctx.cfg.endpoint.is_none() && ctx.paths.world.is_file() {
        let world = SyntheticWorld::load(&ctx.paths.world)?;
        let planted = PlantedScorer { world: &world };
        let s = registry.build("rewarding", Some(&planted), ctx.cfg.compete.aggregate)?;
        let mut r = evaluate_strategy(&d, s.as_ref())?;
        r.strategy = "rewarding-planted".into();
        strategies.push(r);
        if let (Some(m), true) = (&model, ctx.cfg.generation.tuning_gain > 0.0) {
            strategies.push(hybrid_report(ctx, &world, &d.problems, m)?);
        }
    }

    let tiers = tier_counts(&d.annotations)
        .into_iter()
        .map(|(t, n)| (t.to_string(), n))
        .collect();
    let full = FullReport {
        dataset: &dataset_report,
        tiers,
        strategies: &strategies,
    };
    write_json(&ctx.paths.reports.join("report.json"), &full)?;
    write_text(&ctx.paths.reports.join("report.csv"), &dataset_report.to_csv())?;
    let mut table =
        String::from("strategy,accuracy,answer_accuracy,share_cot,share_tot,share_got,mean_response_length\n");
    for r in &strategies {
        table.push_str(&strategy_row(r));
        table.push('\n');
    }
    write_text(&ctx.paths.reports.join("strategies.csv"), &table)?;

    println!("{:<18} {:>9} {:>9}", "strategy", "accuracy", "answers");
    for r in &strategies {
        println!(
            "{:<18} {:>9.4} {:>9}",
            r.strategy,
            r.report.overall_accuracy,
            fmt_opt(r.report.answer_accuracy)
        );
    }
    if let Some(e) = trm_eval {
        println!(
            "reward model: spearman_rho {} pairwise_accuracy {}",
            fmt_opt(e.spearman_rho),
            fmt_opt(e.pairwise_accuracy)
        );
    }
    Ok(Status::Success)
}

type Stage = fn(&Ctx) -> Result<Status>;

/// Every stage in order, creating synthetic problems first when the problems
/// file is missing and no endpoint is configured.
pub fn pipeline(ctx: &Ctx) -> Result<Status> {
    let mut status = Status::Success;
    if !ctx.paths.problems.is_file() && ctx.cfg.endpoint.is_none() {
        make_problems(ctx)?;
    }
    let stages: [(&str, Stage); 8] = [
        ("generate", generate),
        ("annotate", annotate),
        ("segment", segment),
        ("train-trm", train_trm),
        ("eval-trm", eval_trm),
        ("compete", compete_cmd),
        ("curate", curate),
        ("report", report),
    ];
    for (name, stage) in stages {
        let s = stage(ctx).with_context(|| format!("stage {name}"))?;
        if let Status::Total { .. } = s {
            return Ok(s);
        }
        status = status.worst(s);
    }
    Ok(status)
}
