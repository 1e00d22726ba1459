//! The four subcommands: train, eval, compare, gen-synthetic.
//!
//! Every command writes a `manifest.json` into its output directory first,
//! so a run can always be reproduced from its own outputs even if it later
//! fails. All file contents are deterministic functions of the resolved
//! config (and, for eval, the checkpoint).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::Value;

use sir_core::data::{generate_synthetic, load_checkpoint, save_checkpoint};
use sir_core::metrics::{build_report, write_trec_run, RankedRunReport};
use sir_core::sir::{run_strategy, write_log_header};
use sir_core::{Error, Result, ScorerParams};

use crate::cli::{CommonArgs, CompareArgs, EvalArgs};
use crate::config::{load_config, DataConfig, RunConfig};
use crate::dataset::{
    derived_eval_spec, eval_data, prefix_split_ids, ranked_run, train_blocks, write_split,
};
use crate::manifest::write_manifest;

/// Fixed cutoffs of the cross-strategy comparison table. `compare.csv` has a
/// stable schema so downstream tooling can diff tables across experiments;
/// per-run `metrics.csv` files honour the configurable cutoffs instead.
const COMPARE_HEADER: &str = "strategy,selection,K_schedule,mrr@10,mrr@100,map@20,ndcg@20";

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    let file =
        File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    Ok(BufWriter::new(file))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn flush(mut writer: BufWriter<File>, what: &str) -> Result<()> {
    writer.flush().map_err(|e| Error::io(format!("flushing {what}"), e))
}

/// Evaluate `params` on the configured eval split and write `metrics.csv`
/// and `run.trec` into `out`. Returns the report for console display.
fn evaluate_into(
    cfg: &RunConfig,
    params: &ScorerParams,
    out: &Path,
    run_tag: &str,
) -> Result<RankedRunReport> {
    let eval = eval_data(cfg)?;
    let run = ranked_run(params, &eval)?;
    let report = build_report(
        &run,
        &eval.qrels,
        &cfg.cutoffs.mrr,
        &cfg.cutoffs.map,
        &cfg.cutoffs.ndcg,
    );
    write_text(&out.join("metrics.csv"), &report.to_csv())?;
    let mut trec = create_file(&out.join("run.trec"))?;
    write_trec_run(&run, run_tag, &mut trec)?;
    flush(trec, "run.trec")?;
    Ok(report)
}

pub fn cmd_train(args: &CommonArgs) -> Result<()> {
    let (cfg, resolved) = load_config(&args.config, &args.set, args.seed)?;
    create_out_dir(&args.out)?;
    let run_id = write_manifest(&args.out, "train", &resolved, &[])?;
    let (blocks, note) = train_blocks(&cfg)?;
    println!("run {run_id}: training {} on {note}", cfg.strategy);

    let mut log = create_file(&args.out.join("loss.csv"))?;
    write_log_header(&mut log)?;
    let outcome = run_strategy(&cfg.sir(), &blocks, &mut log)?;
    flush(log, "loss.csv")?;

    for (i, params) in outcome.compressors.iter().enumerate() {
        save_checkpoint(params, &args.out.join(format!("compressor-{}.sirc", i + 1)))?;
    }
    save_checkpoint(outcome.classifier(), &args.out.join("classifier.sirc"))?;
    println!(
        "finished after {} updates; saved {} checkpoint(s) plus classifier.sirc",
        outcome.updates,
        outcome.compressors.len()
    );

    let report = evaluate_into(&cfg, outcome.classifier(), &args.out, &format!("sir-{run_id}"))?;
    print!("{}", report.to_csv());
    println!("outputs in {}", args.out.display());
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let common = &args.common;
    let (cfg, resolved) = load_config(&common.config, &common.set, common.seed)?;
    let params = load_checkpoint(&args.checkpoint)?;

    // The checkpoint must match the configured architecture; the stored
    // init seed is irrelevant once weights are trained, so it may differ.
    let (got, want) = (&params.hyper, &cfg.scorer);
    if (got.vocab_buckets, got.embed_dim, got.hidden_dim)
        != (want.vocab_buckets, want.embed_dim, want.hidden_dim)
    {
        return Err(Error::Config(format!(
            "checkpoint architecture (buckets={}, embed={}, hidden={}) does not match \
             config scorer (buckets={}, embed={}, hidden={})",
            got.vocab_buckets,
            got.embed_dim,
            got.hidden_dim,
            want.vocab_buckets,
            want.embed_dim,
            want.hidden_dim
        )));
    }

    create_out_dir(&common.out)?;
    let checkpoint_note = Value::String(args.checkpoint.display().to_string());
    let run_id = write_manifest(
        &common.out,
        "eval",
        &resolved,
        &[("checkpoint", checkpoint_note)],
    )?;
    println!("run {run_id}: evaluating {}", args.checkpoint.display());
    let report = evaluate_into(&cfg, &params, &common.out, &format!("sir-{run_id}"))?;
    print!("{}", report.to_csv());
    println!("outputs in {}", common.out.display());
    Ok(())
}

/// Clear the fields a compare run is allowed to vary, leaving everything
/// that must match (data, scorer, optimizer, budgets, seeds).
fn comparable_view(resolved: &Value) -> Value {
    let mut view = resolved.clone();
    if let Some(obj) = view.as_object_mut() {
        obj.remove("strategy");
        if let Some(schedule) = obj.get_mut("schedule").and_then(Value::as_object_mut) {
            schedule.remove("selection_mode");
            schedule.remove("k_per_level");
        }
    }
    view
}

pub fn cmd_compare(args: &CompareArgs) -> Result<()> {
    if args.configs.len() < 2 {
        return Err(Error::Config(
            "compare needs at least two --config files".into(),
        ));
    }
    let mut variants = Vec::new();
    for path in &args.configs {
        variants.push(load_config(path, &args.set, args.seed)?);
    }

    let baseline = comparable_view(&variants[0].1);
    for (i, (_, resolved)) in variants.iter().enumerate().skip(1) {
        if comparable_view(resolved) != baseline {
            return Err(Error::Config(format!(
                "config #{} ({}) differs from config #1 outside the comparable fields \
                 (strategy, schedule.selection_mode, schedule.k_per_level)",
                i + 1,
                args.configs[i].display()
            )));
        }
    }

    create_out_dir(&args.out)?;
    let resolved_all = Value::Array(variants.iter().map(|(_, v)| v.clone()).collect());
    let run_id = write_manifest(&args.out, "compare", &resolved_all, &[])?;

    // The comparable fields pin the data section, so every variant trains
    // and evaluates on literally the same blocks and split.
    let (blocks, note) = train_blocks(&variants[0].0)?;
    let eval = eval_data(&variants[0].0)?;
    println!(
        "run {run_id}: comparing {} variants on {note}",
        variants.len()
    );

    let mut table = String::from(COMPARE_HEADER);
    table.push('\n');
    for (i, (cfg, _)) in variants.iter().enumerate() {
        let mut log = create_file(&args.out.join(format!("loss-{}.csv", i + 1)))?;
        write_log_header(&mut log)?;
        let outcome = run_strategy(&cfg.sir(), &blocks, &mut log)?;
        flush(log, "variant loss log")?;

        let run = ranked_run(outcome.classifier(), &eval)?;
        let report = build_report(&run, &eval.qrels, &[10, 100], &[20], &[20]);
        let cell = |metric: &str, cutoff: usize| {
            report
                .value(metric, cutoff)
                .expect("fixed cutoffs are always present")
        };
        let k_schedule = if cfg.schedule.k_per_level.is_empty() {
            "-".to_string()
        } else {
            cfg.schedule
                .k_per_level
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join("-")
        };
        table.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
            cfg.strategy,
            cfg.schedule.selection_mode,
            k_schedule,
            cell("mrr", 10),
            cell("mrr", 100),
            cell("map", 20),
            cell("ndcg", 20)
        ));
        println!(
            "  variant {}/{}: {} done ({} updates)",
            i + 1,
            variants.len(),
            cfg.strategy,
            outcome.updates
        );
    }
    write_text(&args.out.join("compare.csv"), &table)?;
    print!("{table}");
    println!("outputs in {}", args.out.display());
    Ok(())
}

pub fn cmd_gen_synthetic(args: &CommonArgs) -> Result<()> {
    let (cfg, resolved) = load_config(&args.config, &args.set, args.seed)?;
    let DataConfig::Synthetic(synth) = &cfg.data else {
        return Err(Error::Config(
            "gen-synthetic requires a config whose data section is `synthetic`".into(),
        ));
    };

    create_out_dir(&args.out)?;
    let run_id = write_manifest(&args.out, "gen-synthetic", &resolved, &[])?;
    let train = generate_synthetic(&synth.train, cfg.scorer.vocab_buckets)?;
    let eval_spec = synth
        .eval
        .clone()
        .unwrap_or_else(|| derived_eval_spec(&synth.train));
    // The eval split's ids get an `e` prefix so its corpus file can be
    // concatenated with the train corpus without id collisions.
    let eval = prefix_split_ids(
        &generate_synthetic(&eval_spec, cfg.scorer.vocab_buckets)?,
        "e",
    )?;
    write_split(&args.out, "", &train)?;
    write_split(&args.out, "eval.", &eval)?;
    println!(
        "run {run_id}: wrote {} train and {} eval queries to {}",
        train.queries.len(),
        eval.queries.len(),
        args.out.display()
    );
    Ok(())
}
