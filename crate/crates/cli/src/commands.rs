use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;

use evasion_core::harness::episode::{run_episode, write_trajectory_csv, RunOptions};
use evasion_core::harness::scenario::{sample_scenario, ScenarioBounds, ScenarioSpec};
use evasion_core::harness::studies::{law_comparison, roll_at_range, roll_condition};
use evasion_core::harness::sweep::{success_ratio_sweep, SweepGrid};
use evasion_core::harness::task::{Task, TaskEnv};
use evasion_core::learner::train::{decile_means, write_curve_csv};
use evasion_core::learner::{train as train_policy, CheckpointMeta, PolicyParameters};
use evasion_core::missile::GuidanceLaw;
use evasion_core::report::write_json;
use evasion_core::strategy::{
    BundleManifest, Controller, MultiStage, NoOp, ScriptedTurn, SinglePolicy, StrategyBundle,
};

use crate::config::{config_error, RunConfig};
use crate::{Common, Scripted, StrategyArgs, Study};

fn resolve(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
        cfg.eval.seed = seed;
    }
    if let Some(jobs) = common.jobs {
        cfg.eval.jobs = Some(jobs);
    }
    Ok(cfg)
}

fn out_dir(common: &Common, default: &str) -> anyhow::Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from(default));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn load_checkpoint(path: &Path) -> anyhow::Result<PolicyParameters> {
    if !path.exists() {
        return Err(config_error(format!("checkpoint {} does not exist", path.display())));
    }
    Ok(PolicyParameters::load(path)?.0)
}

fn run_options(cfg: &RunConfig) -> RunOptions {
    RunOptions {
        sim: cfg.task.sim.clone(),
        decision_interval: cfg.task.decision_interval,
        ..RunOptions::default()
    }
}

#[derive(Serialize)]
struct TrainSummary {
    task: Task,
    seed: u64,
    episodes: u64,
    updates: usize,
    warm_start: Option<PathBuf>,
    first_decile_reward: Option<f64>,
    last_decile_reward: Option<f64>,
    config_hash: String,
}

fn config_hash(cfg: &RunConfig) -> String {
    let mut h = cfg.train.digest();
    h.truncate(16);
    h
}

pub fn train(task: Task, episodes: Option<u64>, warm_start: Option<PathBuf>, common: &Common) -> anyhow::Result<()> {
    let mut cfg = resolve(common)?;
    if let Some(n) = episodes {
        cfg.train.episodes = n;
    }
    cfg.validate()?;
    if task == Task::ShortDistance && warm_start.is_none() {
        return Err(config_error(
            "short-distance training starts from the steep-turn policy; pass --warm-start <steep-turn checkpoint>",
        ));
    }
    let init = match &warm_start {
        Some(path) => {
            let p = load_checkpoint(path)?;
            let hidden = &p.actor.sizes()[1..p.actor.sizes().len() - 1];
            if hidden != cfg.train.network.hidden.as_slice() {
                return Err(config_error(format!(
                    "warm-start network has hidden layers {hidden:?}, config expects {:?}",
                    cfg.train.network.hidden
                )));
            }
            Some(p)
        }
        None => None,
    };
    let out = out_dir(common, &format!("runs/{task}"))?;
    cfg.echo(&out)?;

    let mut envs = (0..cfg.train.envs)
        .map(|_| TaskEnv::new(task, cfg.task.clone(), cfg.train.seed))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| config_error(e.to_string()))?;
    let started = Instant::now();
    let total = cfg.train.episodes;
    let log_every = (total / 20).max(1);
    let mut window = Vec::new();
    let mut done = 0u64;
    let result = train_policy(&mut envs, &cfg.train, init, |row| {
        window.push(row.accumulated_reward);
        done += 1;
        if done.is_multiple_of(log_every) || done == total {
            let mean = window.iter().sum::<f64>() / window.len() as f64;
            log::info!(
                "{task}: episode {}/{total}, mean reward {mean:.1} over last {}, {:.0}s",
                done,
                window.len(),
                started.elapsed().as_secs_f64()
            );
            window.clear();
        }
    })?;

    let meta = CheckpointMeta {
        task: task.to_string(),
        seed: cfg.train.seed,
        config_hash: config_hash(&cfg),
        episodes: cfg.train.episodes,
    };
    result.params.save(&out.join("policy.json"), &meta)?;
    write_curve_csv(&out.join("curve.csv"), &result.curve)?;
    let deciles = decile_means(&result.curve, 0.1);
    write_json(
        &out.join("summary.json"),
        &TrainSummary {
            task,
            seed: cfg.train.seed,
            episodes: cfg.train.episodes,
            updates: result.updates.len(),
            warm_start,
            first_decile_reward: deciles.map(|d| d.0),
            last_decile_reward: deciles.map(|d| d.1),
            config_hash: meta.config_hash.clone(),
        },
    )?;
    println!("wrote {}", out.join("policy.json").display());
    Ok(())
}

pub fn bundle(large: &Path, small: &Path, short: &Path, common: &Common) -> anyhow::Result<()> {
    let path = common.out.clone().unwrap_or_else(|| PathBuf::from("bundle.toml"));
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(base).with_context(|| format!("creating {}", base.display()))?;
    // Store paths relative to the manifest when possible.
    let rel = |p: &Path| -> anyhow::Result<PathBuf> {
        if !p.exists() {
            return Err(config_error(format!("checkpoint {} does not exist", p.display())));
        }
        let abs_p = std::fs::canonicalize(p)?;
        let abs_base = std::fs::canonicalize(base)?;
        Ok(abs_p.strip_prefix(&abs_base).map(Path::to_path_buf).unwrap_or(abs_p))
    };
    let manifest = BundleManifest {
        large_azimuth: rel(large)?,
        small_azimuth: rel(small)?,
        short_distance: rel(short)?,
        thresholds: Default::default(),
    };
    manifest.write(&path)?;
    // Fail now rather than at evaluation time if a checkpoint is unreadable.
    StrategyBundle::load(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn strategies(args: &StrategyArgs) -> anyhow::Result<Vec<Box<dyn Controller>>> {
    let mut out: Vec<Box<dyn Controller>> = Vec::new();
    if let Some(path) = &args.bundle {
        if !path.exists() {
            return Err(config_error(format!("bundle {} does not exist", path.display())));
        }
        let bundle = StrategyBundle::load(path).map_err(|e| config_error(format!("bundle {}: {e}", path.display())))?;
        out.push(Box::new(MultiStage::new(bundle)));
    }
    for spec in &args.policies {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| config_error(format!("--policy expects NAME=PATH, got {spec:?}")))?;
        out.push(Box::new(SinglePolicy::new(name, load_checkpoint(Path::new(path))?)));
    }
    for s in &args.scripted {
        match s {
            Scripted::Noop => out.push(Box::new(NoOp)),
            Scripted::Turn => out.push(Box::new(ScriptedTurn::new(85.0))),
        }
    }
    if out.is_empty() {
        return Err(config_error("no strategy given; use --bundle, --policy or --scripted"));
    }
    Ok(out)
}

pub fn eval(
    args: &StrategyArgs,
    grid: Option<String>,
    paired: Option<bool>,
    law: Option<GuidanceLaw>,
    common: &Common,
) -> anyhow::Result<()> {
    let mut cfg = resolve(common)?;
    if let Some(g) = grid {
        cfg.eval.grid = g;
    }
    if let Some(p) = paired {
        cfg.eval.paired = p;
    }
    if law.is_some() {
        cfg.eval.law = law;
    }
    cfg.validate()?;
    let mut grid = SweepGrid::resolve(&cfg.eval.grid).map_err(|e| config_error(e.to_string()))?;
    if let Some(law) = cfg.eval.law {
        grid.bounds.law = law;
    }
    let controllers = strategies(args)?;
    let out = out_dir(common, "runs/eval")?;
    cfg.echo(&out)?;

    let started = Instant::now();
    let result = success_ratio_sweep(
        &grid,
        &controllers,
        cfg.eval.paired,
        cfg.eval.seed,
        &run_options(&cfg),
        cfg.eval.jobs,
    )?;
    log::info!("sweep finished in {:.0}s", started.elapsed().as_secs_f64());
    result.write_csv(&out.join("sweep.csv"))?;
    let summary = result.summary();
    write_json(&out.join("summary.json"), &summary)?;
    for s in &summary.strategies {
        println!(
            "{:<16} success ratio {:.4} ({}/{})",
            s.name, s.success_ratio, s.totals.successes, s.totals.n
        );
    }
    Ok(())
}

fn single(args: &StrategyArgs) -> anyhow::Result<Box<dyn Controller>> {
    let mut all = strategies(args)?;
    if all.len() != 1 {
        return Err(config_error("exactly one strategy is required"));
    }
    Ok(all.remove(0))
}

pub fn replay(
    args: &StrategyArgs,
    scenario: Option<u64>,
    validation: bool,
    law: Option<GuidanceLaw>,
    common: &Common,
) -> anyhow::Result<()> {
    let mut cfg = resolve(common)?;
    if law.is_some() {
        cfg.eval.law = law;
    }
    cfg.validate()?;
    let mut controller = single(args)?;
    let out = out_dir(common, "runs/replay")?;
    cfg.echo(&out)?;

    let bounds = ScenarioBounds {
        law: cfg.eval.law.unwrap_or_default(),
        ..ScenarioBounds::default()
    };
    let spec = if validation {
        ScenarioSpec::steep_turn_validation().with_law(bounds.law, &bounds)
    } else {
        sample_scenario(scenario.unwrap_or(cfg.eval.seed), &bounds, None)
    };
    let options = RunOptions {
        record: true,
        ..run_options(&cfg)
    };
    let mut record = run_episode(&spec, controller.as_mut(), &options);
    write_trajectory_csv(&out.join("trajectory.csv"), &record)?;
    record.rows.clear();
    write_json(&out.join("episode.json"), &record)?;
    println!(
        "{}: {} after {} steps, min range {:.2} m",
        record.strategy,
        record.outcome.name(),
        record.steps,
        record.min_range
    );
    if let Some(err) = record.error {
        anyhow::bail!("episode aborted: {err}");
    }
    Ok(())
}

pub fn study(
    kind: Study,
    args: &StrategyArgs,
    scenarios: Option<usize>,
    law: Option<GuidanceLaw>,
    common: &Common,
) -> anyhow::Result<()> {
    let mut cfg = resolve(common)?;
    if let Some(n) = scenarios {
        cfg.eval.scenarios = n;
    }
    if law.is_some() {
        cfg.eval.law = law;
    }
    cfg.validate()?;
    let controller = single(args)?;
    let out = out_dir(common, "runs/study")?;
    cfg.echo(&out)?;

    let bounds = ScenarioBounds {
        law: cfg.eval.law.unwrap_or_default(),
        ..ScenarioBounds::default()
    };
    let options = run_options(&cfg);
    let (n, seed, jobs) = (cfg.eval.scenarios, cfg.eval.seed, cfg.eval.jobs);
    match kind {
        Study::RollAtRange => {
            let r = roll_at_range(controller.as_ref(), &bounds, n, seed, &options, jobs)?;
            write_json(&out.join("roll_at_range.json"), &r)?;
            println!(
                "{} of {} runs reached {} m; {:.3} of those within 15 deg of +-85 deg",
                r.rolls_deg.iter().flatten().count(),
                n,
                r.probe_range,
                r.near_85_fraction
            );
        }
        Study::RollCondition => {
            let r = roll_condition(
                controller.as_ref(),
                &bounds,
                &[-85.0, 0.0, 85.0],
                n,
                seed,
                &options,
                jobs,
            )?;
            write_json(&out.join("roll_condition.json"), &r)?;
            for row in &r.rows {
                println!(
                    "roll {:>6.1} deg: success ratio {:.4}",
                    row.initial_roll_deg, row.success_ratio
                );
            }
        }
        Study::Law => {
            let r = law_comparison(controller.as_ref(), &bounds, n, seed, &options, jobs)?;
            write_json(&out.join("law_comparison.json"), &r)?;
            println!(
                "pn {:.4}  apn {:.4}  over {} paired scenarios",
                r.pn_ratio, r.apn_ratio, r.n
            );
        }
    }
    Ok(())
}
