//! Release gate for the ranker. Each test asserts one release criterion end
//! to end and prints a single `ACCEPTANCE n/8 <name>: PASS|FAIL` line (visible
//! under `--nocapture`; the harness's own ok/FAILED line mirrors it).
//!
//! Every tolerance, seed, and budget is pinned in this file, deliberately
//! not configurable. The training-based criteria (4 and 5) are fully
//! deterministic: fixed seeds make reruns land on identical metrics.

use std::collections::BTreeSet;
use std::fs;
use std::panic::AssertUnwindSafe;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;

use sir_core::data::{
    generate_synthetic, load_candidates, load_checkpoint, load_corpus, load_qrels, load_queries,
    save_checkpoint, SyntheticSpec,
};
use sir_core::metrics::{map_at_k, mrr_at_k, ndcg_at_k, Qrels};
use sir_core::scorer::{encode, score_block, ParamNodes};
use sir_core::sir::{
    cascade_loss, compress_block, compress_dataset, contrastive_loss, cpr, run_strategy,
    select_negatives, softmax_scores, top_k_by_score, CompressorSchedule, OptimizerHyper,
    ProbVector, Sample, SampleId, ScoreVector, SelectionMode, SirConfig, StrategyKind,
    TrainingBlock,
};
use sir_core::{Error, Node, ScorerHyper, ScorerParams, Tensor};

use sir_cli::config::{DataConfig, RunConfig, SyntheticDataConfig};
use sir_cli::dataset::{eval_data, ranked_run, train_blocks};

// ----- pinned tolerances and budgets -----

/// Central finite-difference step.
const FD_EPS: f64 = 1e-5;
/// Max allowed relative error between analytic and FD gradients.
const GRAD_TOL: f64 = 1e-4;
/// Seeded draws per loss in the gradient suite.
const GRAD_DRAWS: u64 = 20;
/// Gradient suite wall-clock budget.
const GRAD_BUDGET_SECS: u64 = 60;
/// Exact-agreement tolerance for metric and probability oracles.
const EXACT_TOL: f64 = 1e-12;
/// Random score vectors / blocks / histories per oracle check.
const ORACLE_SAMPLES: usize = 1000;
/// Required planted-difficulty lift of selected negatives, in levels.
const CURRICULUM_MARGIN: f64 = 0.5;
/// Curriculum suite wall-clock budget.
const CURRICULUM_BUDGET_SECS: u64 = 300;
/// Held-out MRR@10 each trainable strategy must reach.
const LEARNABILITY_TARGET: f64 = 0.90;
/// ... within this many optimizer updates.
const LEARNABILITY_UPDATE_CAP: u64 = 2000;
/// ... for at least this many of the three seeds.
const LEARNABILITY_SEEDS_NEEDED: usize = 2;
/// Ceiling for the untrained-baseline MRR@10.
const UNTRAINED_BASELINE_CAP: f64 = 0.5;
/// Closed-form loss agreement tolerance.
const CLOSED_FORM_TOL: f64 = 1e-9;

const MASTER_SEEDS: [u64; 3] = [101, 202, 303];

fn gate(number: u32, name: &str, body: impl FnOnce()) {
    let result = std::panic::catch_unwind(AssertUnwindSafe(body));
    let verdict = if result.is_ok() { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {number}/8 {name}: {verdict}");
    if let Err(panic) = result {
        std::panic::resume_unwind(panic);
    }
}

// ----- shared construction helpers -----

fn tiny_hyper(seed: u64) -> ScorerHyper {
    ScorerHyper {
        vocab_buckets: 64,
        embed_dim: 4,
        hidden_dim: 4,
        seed,
    }
}

fn random_text(rng: &mut Pcg64, len: usize) -> String {
    (0..len)
        .map(|_| format!("w{}", rng.random_range(0..120_u32)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_block(rng: &mut Pcg64, negatives: usize) -> TrainingBlock {
    let buckets = 64;
    let query = random_text(rng, 6);
    let mut samples = vec![Sample::positive(
        SampleId(0),
        "pos",
        encode(&format!("{query} {}", random_text(rng, 3)), buckets),
    )];
    for j in 0..negatives {
        samples.push(Sample::negative(
            SampleId(j as u32 + 1),
            format!("neg{j}"),
            encode(&random_text(rng, 8), buckets),
            None,
        ));
    }
    TrainingBlock::new("q".into(), encode(&query, buckets), samples).unwrap()
}

fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6)
}

// ===== 1. gradient suite =====

/// For each tensor: every coordinate of the small ones, and for the
/// embedding table the 12 largest-gradient coordinates plus 6 seeded-random
/// ones. Returns the worst relative error and the count of checked
/// coordinates with non-negligible analytic gradient.
fn check_gradients(
    params: &ScorerParams,
    loss: &dyn Fn(&ScorerParams) -> f64,
    analytic: &[Tensor],
    rng: &mut Pcg64,
) -> (f64, usize) {
    let mut worst = 0.0_f64;
    let mut live = 0;
    for (t, (_, tensor)) in params.tensors().iter().enumerate() {
        let n = tensor.numel();
        let mut coords: Vec<usize> = if n <= 32 {
            (0..n).collect()
        } else {
            let mut by_grad: Vec<usize> = (0..n).collect();
            by_grad.sort_by(|&a, &b| {
                analytic[t].data()[b]
                    .abs()
                    .total_cmp(&analytic[t].data()[a].abs())
            });
            let mut picked: Vec<usize> = by_grad[..12].to_vec();
            picked.extend((0..6).map(|_| rng.random_range(0..n)));
            picked
        };
        coords.sort_unstable();
        coords.dedup();
        for c in coords {
            let mut plus = params.clone();
            plus.tensors_mut()[t].1.data_mut()[c] += FD_EPS;
            let mut minus = params.clone();
            minus.tensors_mut()[t].1.data_mut()[c] -= FD_EPS;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * FD_EPS);
            let a = analytic[t].data()[c];
            if a.abs() > 1e-8 {
                live += 1;
            }
            worst = worst.max(rel_err(a, fd));
        }
    }
    (worst, live)
}

fn analytic_grads(params: &ScorerParams, build: &dyn Fn(&ParamNodes) -> Node) -> Vec<Tensor> {
    let nodes = ParamNodes::new(params);
    build(&nodes).backward();
    nodes.grads()
}

fn loss_value(params: &ScorerParams, build: &dyn Fn(&ParamNodes) -> Node) -> f64 {
    build(&ParamNodes::new(params)).item()
}

/// Realize the cascade's selection once with the base parameters so the
/// finite-difference loss is smooth: the selected indices are constants of
/// the loss, which is the training-time gradient contract.
fn frozen_levels(params: &ScorerParams, block: &TrainingBlock, ks: &[usize]) -> Vec<TrainingBlock> {
    let nodes = ParamNodes::constant(params);
    let mut rng = Pcg64::seed_from_u64(0);
    let mut levels = vec![block.clone()];
    for &k in ks {
        let scores = score_block(&nodes, levels.last().unwrap()).unwrap();
        let selected = select_negatives(&scores, k, SelectionMode::TopK, &mut rng).unwrap();
        levels.push(compress_block(levels.last().unwrap(), &selected).unwrap());
    }
    levels
}

fn cascade_total(nodes: &ParamNodes, levels: &[TrainingBlock], strategy: StrategyKind) -> Node {
    let mut level_probs = Vec::new();
    let mut cpr_probs = Vec::new();
    for block in levels {
        let probs = softmax_scores(&score_block(nodes, block).unwrap());
        let surviving: Vec<SampleId> = probs.ids().to_vec();
        level_probs.push(probs);
        if strategy == StrategyKind::V4 {
            cpr_probs.push(cpr(&level_probs, &surviving).unwrap());
        }
    }
    cascade_loss(strategy, &level_probs, &cpr_probs).unwrap().total
}

#[test]
fn criterion_1_gradients_match_finite_differences() {
    gate(1, "gradient-suite", || {
        let started = Instant::now();

        // Single-level contrastive loss.
        for draw in 0..GRAD_DRAWS {
            let mut rng = Pcg64::seed_from_u64(1_100 + draw);
            let params = ScorerParams::init(&tiny_hyper(1_200 + draw)).unwrap();
            let block = random_block(&mut rng, 5);
            let build = |nodes: &ParamNodes| {
                contrastive_loss(&softmax_scores(&score_block(nodes, &block).unwrap())).unwrap()
            };
            let grads = analytic_grads(&params, &build);
            let (worst, live) =
                check_gradients(&params, &|p| loss_value(p, &build), &grads, &mut rng);
            assert!(worst <= GRAD_TOL, "contrastive draw {draw}: max rel err {worst}");
            assert!(live >= 20, "contrastive draw {draw}: only {live} live coordinates");
        }

        // V3 joint loss over a two-level cascade with frozen selection.
        for draw in 0..GRAD_DRAWS {
            let mut rng = Pcg64::seed_from_u64(1_300 + draw);
            let params = ScorerParams::init(&tiny_hyper(1_400 + draw)).unwrap();
            let block = random_block(&mut rng, 6);
            let levels = frozen_levels(&params, &block, &[3]);
            let build = |nodes: &ParamNodes| cascade_total(nodes, &levels, StrategyKind::V3);
            let grads = analytic_grads(&params, &build);
            let (worst, live) =
                check_gradients(&params, &|p| loss_value(p, &build), &grads, &mut rng);
            assert!(worst <= GRAD_TOL, "V3 draw {draw}: max rel err {worst}");
            assert!(live >= 20, "V3 draw {draw}: only {live} live coordinates");
        }

        // V4 CPR loss over a three-level cascade with frozen selection.
        for draw in 0..GRAD_DRAWS {
            let mut rng = Pcg64::seed_from_u64(1_500 + draw);
            let params = ScorerParams::init(&tiny_hyper(1_600 + draw)).unwrap();
            let block = random_block(&mut rng, 6);
            let levels = frozen_levels(&params, &block, &[4, 2]);
            let build = |nodes: &ParamNodes| cascade_total(nodes, &levels, StrategyKind::V4);
            let grads = analytic_grads(&params, &build);
            let (worst, live) =
                check_gradients(&params, &|p| loss_value(p, &build), &grads, &mut rng);
            assert!(worst <= GRAD_TOL, "V4 draw {draw}: max rel err {worst}");
            assert!(live >= 20, "V4 draw {draw}: only {live} live coordinates");
        }

        let elapsed = started.elapsed();
        assert!(
            elapsed.as_secs() < GRAD_BUDGET_SECS,
            "gradient suite took {elapsed:?}, budget {GRAD_BUDGET_SECS}s"
        );
    });
}

// ===== 2. oracle suite =====

fn ref_reciprocal_rank(ranking: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    ranking
        .iter()
        .take(k)
        .position(|d| relevant.contains(d))
        .map_or(0.0, |i| 1.0 / (i as f64 + 1.0))
}

fn ref_average_precision(ranking: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, doc) in ranking.iter().take(k).enumerate() {
        if relevant.contains(doc) {
            hits += 1;
            sum += hits as f64 / (i as f64 + 1.0);
        }
    }
    let denom = relevant.len().min(k);
    if denom == 0 {
        0.0
    } else {
        sum / denom as f64
    }
}

fn ref_ndcg(ranking: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, d)| relevant.contains(*d))
        .map(|(i, _)| 1.0 / (i as f64 + 2.0).log2())
        .sum();
    // Ideal ordering of this ranking's own candidates: all its relevant
    // docs first, truncated at k.
    let present = ranking.iter().filter(|d| relevant.contains(*d)).count();
    let idcg: f64 = (0..present.min(k)).map(|i| 1.0 / (i as f64 + 2.0).log2()).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

#[test]
fn criterion_2_selection_metrics_and_cpr_match_oracles() {
    gate(2, "oracle-suite", || {
        // (a) top-K equals a brute-force sort on random score vectors.
        let mut rng = Pcg64::seed_from_u64(2_100);
        for _ in 0..ORACLE_SAMPLES {
            let n = rng.random_range(2..40usize);
            let ids: Vec<SampleId> = (0..n as u32).map(SampleId).collect();
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let k = rng.random_range(1..=n);

            let got = top_k_by_score(&ids, &values, k);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
            let want: Vec<SampleId> = order[..k].iter().map(|&i| ids[i]).collect();
            assert_eq!(got, want, "top-{k} of {values:?}");
        }

        // (b) metrics equal brute-force references on every ranking of up
        // to 8 candidates. Binary relevance means a metric at cutoff k is a
        // function of which ranks hold relevant docs, so enumerating all
        // relevance masks per length IS enumerating all rankings.
        for n in 1..=8usize {
            let ranking: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
            for mask in 0u32..(1 << n) {
                let relevant: BTreeSet<String> = (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| format!("d{i}"))
                    .collect();
                let mut qrels = Qrels::new();
                for doc in &relevant {
                    qrels.add("q", doc.clone());
                }
                let run = vec![("q".to_string(), ranking.clone())];
                for k in [1usize, 2, 3, 5, 8, 20] {
                    let (mrr, map, ndcg) = (
                        mrr_at_k(&run, &qrels, k),
                        map_at_k(&run, &qrels, k),
                        ndcg_at_k(&run, &qrels, k),
                    );
                    if mask == 0 {
                        for m in [&mrr, &map, &ndcg] {
                            assert_eq!((m.evaluated, m.skipped), (0, 1));
                            assert_eq!(m.value, 0.0);
                        }
                        continue;
                    }
                    assert!(
                        (mrr.value - ref_reciprocal_rank(&ranking, &relevant, k)).abs()
                            <= EXACT_TOL,
                        "mrr@{k} n={n} mask={mask:b}"
                    );
                    assert!(
                        (map.value - ref_average_precision(&ranking, &relevant, k)).abs()
                            <= EXACT_TOL,
                        "map@{k} n={n} mask={mask:b}"
                    );
                    assert!(
                        (ndcg.value - ref_ndcg(&ranking, &relevant, k)).abs() <= EXACT_TOL,
                        "ndcg@{k} n={n} mask={mask:b}"
                    );
                }
            }
        }

        // (c) CPR vectors are probability distributions: sum to one.
        let mut rng = Pcg64::seed_from_u64(2_200);
        for _ in 0..ORACLE_SAMPLES {
            let levels = rng.random_range(1..=4usize);
            let mut size = rng.random_range(2..=10usize);
            let mut ids: Vec<SampleId> = (0..size as u32).map(SampleId).collect();
            let mut history: Vec<ProbVector> = Vec::new();
            for _ in 0..levels {
                let logits: Vec<f64> = (0..size).map(|_| rng.random_range(-4.0..4.0)).collect();
                let scores = ScoreVector::new(
                    ids.clone(),
                    Node::constant(Tensor::from_vec(logits)),
                )
                .unwrap();
                history.push(softmax_scores(&scores));
                if size > 2 {
                    // Next level keeps the positive plus a strict subset.
                    size = rng.random_range(2..size);
                    ids = ids[..size].to_vec();
                }
            }
            let current = history.last().unwrap().ids().to_vec();
            let conditional = cpr(&history, &current).unwrap();
            let sum: f64 = conditional.values().iter().sum();
            assert!(
                (sum - 1.0).abs() <= EXACT_TOL,
                "CPR sums to {sum} over {levels} levels"
            );
        }
    });
}

// ===== 3. rank equivalence =====

fn softmax_plain(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

#[test]
fn criterion_3_selection_is_rank_equivalent_across_normalizations() {
    gate(3, "rank-equivalence", || {
        let mut rng = Pcg64::seed_from_u64(3_100);
        for _ in 0..ORACLE_SAMPLES {
            let negatives = rng.random_range(2..30usize);
            let logits: Vec<f64> = (0..negatives + 1)
                .map(|_| rng.random_range(-6.0..6.0))
                .collect();
            let ids: Vec<SampleId> = (0..=negatives as u32).map(SampleId).collect();
            let k = rng.random_range(1..=negatives);

            let neg_ids = &ids[1..];
            let neg_logits = &logits[1..];

            let by_raw = top_k_by_score(neg_ids, neg_logits, k);
            let with_positive = softmax_plain(&logits);
            let by_softmax_all = top_k_by_score(neg_ids, &with_positive[1..], k);
            let negatives_only = softmax_plain(neg_logits);
            let by_softmax_neg = top_k_by_score(neg_ids, &negatives_only, k);

            assert_eq!(by_raw, by_softmax_all, "softmax-with-positive reordered top-{k}");
            assert_eq!(by_raw, by_softmax_neg, "negatives-only softmax reordered top-{k}");
        }
    });
}

// ===== 4. curriculum =====

fn curriculum_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        num_queries: 200,
        negatives_per_query: 23,
        vocab_size: 400,
        overlap_per_level: vec![0.0, 0.17, 0.33, 0.5],
        positive_overlap: 0.8,
        query_len: 20,
        seed,
    }
}

fn mean_planted_difficulty<'a>(blocks: impl Iterator<Item = &'a TrainingBlock>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for block in blocks {
        for neg in block.negatives() {
            sum += neg.planted_difficulty.expect("synthetic negatives carry difficulty") as f64;
            count += 1;
        }
    }
    sum / count as f64
}

#[test]
fn criterion_4_selected_negatives_are_harder_than_average() {
    gate(4, "curriculum", || {
        let started = Instant::now();
        let mut lifts = Vec::new();
        for (i, &seed) in MASTER_SEEDS.iter().enumerate() {
            let spec = curriculum_spec(seed + 2);
            let data = generate_synthetic(&spec, 1024).unwrap();
            let config = SirConfig {
                strategy: StrategyKind::V3,
                schedule: CompressorSchedule {
                    k_per_level: vec![8],
                    selection_mode: SelectionMode::TopK,
                    rng_seed: seed + 1,
                },
                epochs: 40,
                batch_blocks: 8,
                max_updates: None,
                optimizer: OptimizerHyper {
                    lr: 0.01,
                    ..OptimizerHyper::default()
                },
                scorer: ScorerHyper {
                    vocab_buckets: 1024,
                    embed_dim: 16,
                    hidden_dim: 16,
                    seed,
                },
            };
            let outcome = run_strategy(&config, &data.blocks, &mut std::io::sink()).unwrap();

            let mut rng = Pcg64::seed_from_u64(seed + 1);
            let selected = compress_dataset(
                outcome.classifier(),
                &data.blocks,
                8,
                SelectionMode::TopK,
                &mut rng,
            )
            .unwrap();

            let all_mean = mean_planted_difficulty(data.blocks.iter());
            let selected_mean = mean_planted_difficulty(selected.iter());
            println!(
                "  curriculum seed {}/3: all-negatives mean {all_mean:.3}, \
                 selected mean {selected_mean:.3}",
                i + 1
            );
            lifts.push(selected_mean - all_mean);
        }
        let avg_lift = lifts.iter().sum::<f64>() / lifts.len() as f64;
        assert!(
            avg_lift >= CURRICULUM_MARGIN,
            "average difficulty lift {avg_lift:.3} < {CURRICULUM_MARGIN} (per-seed {lifts:?})"
        );
        let elapsed = started.elapsed();
        assert!(
            elapsed.as_secs() < CURRICULUM_BUDGET_SECS,
            "curriculum suite took {elapsed:?}, budget {CURRICULUM_BUDGET_SECS}s"
        );
    });
}

// ===== 5. learnability =====

fn learnability_config(strategy: StrategyKind, master_seed: u64) -> RunConfig {
    let mut cfg = RunConfig {
        strategy,
        schedule: CompressorSchedule {
            k_per_level: vec![3],
            selection_mode: SelectionMode::TopK,
            rng_seed: 0,
        },
        epochs: 60,
        batch_blocks: 8,
        max_updates: Some(LEARNABILITY_UPDATE_CAP),
        optimizer: OptimizerHyper {
            lr: 0.01,
            ..OptimizerHyper::default()
        },
        scorer: ScorerHyper {
            vocab_buckets: 1024,
            embed_dim: 16,
            hidden_dim: 16,
            seed: 0,
        },
        data: DataConfig::Synthetic(SyntheticDataConfig {
            train: SyntheticSpec {
                num_queries: 128,
                negatives_per_query: 7,
                vocab_size: 400,
                // Separable: positive copies 0.8 of the query's tokens, the
                // hardest negative only 0.5.
                overlap_per_level: vec![0.0, 0.17, 0.33, 0.5],
                positive_overlap: 0.8,
                query_len: 20,
                seed: 0,
            },
            eval: None,
        }),
        cutoffs: Default::default(),
    };
    cfg.apply_master_seed(master_seed);
    cfg
}

fn held_out_mrr_at_10(cfg: &RunConfig, params: &ScorerParams) -> f64 {
    let eval = eval_data(cfg).unwrap();
    let run = ranked_run(params, &eval).unwrap();
    let id_run: Vec<(String, Vec<String>)> = run
        .into_iter()
        .map(|(qid, ranked)| (qid, ranked.into_iter().map(|(d, _)| d).collect()))
        .collect();
    let metric = mrr_at_k(&id_run, &eval.qrels, 10);
    assert_eq!(metric.skipped, 0, "held-out split must have judgments for every query");
    metric.value
}

#[test]
fn criterion_5_trainable_strategies_learn_separable_data() {
    gate(5, "learnability", || {
        // Untrained baseline: the seed-initialized scorer must be near
        // chance on the held-out split, for every seed.
        for &seed in &MASTER_SEEDS {
            let cfg = learnability_config(StrategyKind::V3, seed);
            let untrained = ScorerParams::init(&cfg.scorer).unwrap();
            let baseline = held_out_mrr_at_10(&cfg, &untrained);
            assert!(
                baseline <= UNTRAINED_BASELINE_CAP,
                "untrained baseline MRR@10 {baseline:.3} exceeds {UNTRAINED_BASELINE_CAP} \
                 (seed {seed})"
            );
        }

        for strategy in [
            StrategyKind::V1,
            StrategyKind::V2,
            StrategyKind::V3,
            StrategyKind::V4,
        ] {
            let mut reached = 0usize;
            let mut observed = Vec::new();
            for &seed in &MASTER_SEEDS {
                let cfg = learnability_config(strategy, seed);
                let (blocks, _) = train_blocks(&cfg).unwrap();
                let outcome = run_strategy(&cfg.sir(), &blocks, &mut std::io::sink()).unwrap();
                assert!(
                    outcome.updates <= LEARNABILITY_UPDATE_CAP,
                    "{strategy} used {} updates, cap {LEARNABILITY_UPDATE_CAP}",
                    outcome.updates
                );
                let mrr = held_out_mrr_at_10(&cfg, outcome.classifier());
                observed.push(mrr);
                if mrr >= LEARNABILITY_TARGET {
                    reached += 1;
                }
            }
            println!("  learnability {strategy}: held-out MRR@10 per seed {observed:?}");
            assert!(
                reached >= LEARNABILITY_SEEDS_NEEDED,
                "{strategy} reached MRR@10 >= {LEARNABILITY_TARGET} on only {reached}/3 seeds \
                 ({observed:?})"
            );
        }
    });
}

// ===== 6. determinism =====

fn run_sir(args: &[&str]) -> std::process::Output {
    let exe = env!("CARGO_BIN_EXE_sir");
    Command::new(exe)
        .args(args)
        .output()
        .expect("spawning the sir binary")
}

fn assert_same_bytes(a: &Path, b: &Path, name: &str) {
    let left = fs::read(a.join(name)).unwrap_or_else(|e| panic!("reading {name} from A: {e}"));
    let right = fs::read(b.join(name)).unwrap_or_else(|e| panic!("reading {name} from B: {e}"));
    assert!(left == right, "{name} differs between reruns");
}

#[test]
fn criterion_6_reruns_from_one_manifest_are_byte_identical() {
    gate(6, "determinism", || {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("cfg.json");
        // V1 so the run writes two compressor checkpoints, not just one.
        let cfg = serde_json::json!({
            "strategy": "V1",
            "schedule": { "k_per_level": [3], "selection_mode": "top_k", "rng_seed": 0 },
            "epochs": 2,
            "batch_blocks": 8,
            "scorer": { "vocab_buckets": 512, "embed_dim": 8, "hidden_dim": 8, "seed": 0 },
            "data": { "synthetic": { "train": {
                "num_queries": 24,
                "negatives_per_query": 7,
                "vocab_size": 400,
                "overlap_per_level": [0.0, 0.17, 0.33, 0.5],
                "positive_overlap": 0.8,
                "seed": 0
            } } }
        });
        fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();

        let initial = dir.path().join("initial");
        let out = run_sir(&[
            "train",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            initial.to_str().unwrap(),
            "--seed",
            "9",
        ]);
        assert!(
            out.status.success(),
            "initial train failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );

        let manifest = initial.join("manifest.json");
        let rerun_a = dir.path().join("rerun-a");
        let rerun_b = dir.path().join("rerun-b");
        for rerun in [&rerun_a, &rerun_b] {
            let out = run_sir(&[
                "train",
                "--config",
                manifest.to_str().unwrap(),
                "--out",
                rerun.to_str().unwrap(),
            ]);
            assert!(
                out.status.success(),
                "rerun failed: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        }

        for name in [
            "manifest.json",
            "loss.csv",
            "compressor-1.sirc",
            "compressor-2.sirc",
            "classifier.sirc",
            "metrics.csv",
            "run.trec",
        ] {
            assert_same_bytes(&rerun_a, &rerun_b, name);
            // The manifest reruns must also reproduce the original run.
            assert_same_bytes(&initial, &rerun_a, name);
        }
    });
}

// ===== 7. format suite =====

const GOLDEN_QUERIES: &str = "q1\twhat is a compressor cascade\n\
                              q2\thashing trick embeddings\n\
                              q3\t\n";
const GOLDEN_CORPUS: &str = "d1\thttps://example.org/a\tCascades\tA compressor keeps hard negatives.\n\
                             d2\t\t\tBody only, no url or title.\n\
                             d3\thttps://example.org/c\tTabs\tbody\twith\tliteral tabs kept\n";
const GOLDEN_CANDIDATES: &str = "q1\td2\t2\nq1\td1\t1\nq2\td3\t1\nq2\td1\t2\nq2\td2\t3\n";
const GOLDEN_QRELS: &str = "q1 0 d1 1\nq2\t0\td3\t1\nq2 0 d2 0\n";

#[test]
fn criterion_7_formats_round_trip_and_reject_malformed_input() {
    gate(7, "format-suite", || {
        let dir = tempfile::tempdir().unwrap();

        // (a) Checkpoint round-trip: every stored value is exactly the
        // 32-bit rounding of the original, and the architecture survives.
        let params = ScorerParams::init(&ScorerHyper {
            vocab_buckets: 128,
            embed_dim: 6,
            hidden_dim: 5,
            seed: 77,
        })
        .unwrap();
        let ck = dir.path().join("params.sirc");
        save_checkpoint(&params, &ck).unwrap();
        let loaded = load_checkpoint(&ck).unwrap();
        assert_eq!(loaded.hyper, params.hyper);
        for ((name, orig), (_, got)) in params.tensors().iter().zip(loaded.tensors().iter()) {
            assert_eq!(orig.shape(), got.shape(), "shape of {name}");
            for (a, b) in orig.data().iter().zip(got.data().iter()) {
                assert_eq!(*b, *a as f32 as f64, "{name} beyond 32-bit rounding");
            }
        }

        // (b) Golden fixtures parse to exactly the expected tables.
        let write = |name: &str, text: &str| {
            let path = dir.path().join(name);
            fs::write(&path, text).unwrap();
            path
        };
        let queries = load_queries(&write("queries.tsv", GOLDEN_QUERIES)).unwrap();
        assert_eq!(
            queries.rows(),
            &[
                ("q1".to_string(), "what is a compressor cascade".to_string()),
                ("q2".to_string(), "hashing trick embeddings".to_string()),
                ("q3".to_string(), String::new()),
            ]
        );

        let corpus = load_corpus(&write("corpus.tsv", GOLDEN_CORPUS)).unwrap();
        assert_eq!(corpus.len(), 3);
        let d1 = corpus.get("d1").unwrap();
        assert_eq!(
            (d1.url.as_str(), d1.title.as_str(), d1.body.as_str()),
            ("https://example.org/a", "Cascades", "A compressor keeps hard negatives.")
        );
        let d2 = corpus.get("d2").unwrap();
        assert_eq!((d2.url.as_str(), d2.title.as_str()), ("", ""));
        assert_eq!(d2.text(), "Body only, no url or title.");
        assert_eq!(corpus.get("d3").unwrap().body, "body\twith\tliteral tabs kept");

        let candidates = load_candidates(&write("candidates.tsv", GOLDEN_CANDIDATES)).unwrap();
        assert_eq!(
            candidates.get("q1").unwrap(),
            &[("d1".to_string(), 1), ("d2".to_string(), 2)],
            "candidates must come back rank-ascending"
        );
        assert_eq!(candidates.get("q2").unwrap().len(), 3);

        let qrels_table = load_qrels(&write("qrels.txt", GOLDEN_QRELS)).unwrap();
        assert_eq!(qrels_table.rows().len(), 3);
        assert_eq!(qrels_table.rows()[1].doc_id, "d3");
        let qrels = qrels_table.to_qrels();
        assert!(qrels.relevant("q1").unwrap().contains("d1"));
        // Relevance 0 is a judgment of non-relevance, not membership.
        assert!(qrels.relevant("q2").unwrap().contains("d3"));
        assert!(!qrels.relevant("q2").unwrap().contains("d2"));

        // (c) Malformed inputs are rejected with the offending line number.
        let expect_line = |result: sir_core::Result<()>, want: usize, what: &str| {
            match result {
                Err(Error::Ingest { line, .. }) => {
                    assert_eq!(line, want, "{what}: wrong line number")
                }
                other => panic!("{what}: expected ingest error, got {other:?}"),
            }
        };
        expect_line(
            load_queries(&write("bad-q.tsv", "q1\tok\nno tab here\n")).map(drop),
            2,
            "query row without a tab",
        );
        expect_line(
            load_queries(&write("dup-q.tsv", "q1\ta\nq2\tb\nq1\tc\n")).map(drop),
            3,
            "duplicate query id",
        );
        expect_line(
            load_corpus(&write("bad-c.tsv", "d1\tonly-two\n")).map(drop),
            1,
            "corpus row with two fields",
        );
        expect_line(
            load_candidates(&write("bad-cand.tsv", "q1\td1\t1\nq1\td2\t2\nq1\td3\tabc\n"))
                .map(drop),
            3,
            "candidate rank that is not an integer",
        );
        expect_line(
            load_candidates(&write("dup-cand.tsv", "q1\td1\t1\nq1\td1\t2\n")).map(drop),
            2,
            "duplicate candidate pair",
        );
        expect_line(
            load_qrels(&write("bad-qrels.txt", "q1 0 d1 1\nq1 0 d2\n")).map(drop),
            2,
            "qrels row with three fields",
        );
        expect_line(
            load_qrels(&write("bad-rel.txt", "q1 0 d1 1\nq2 0 d2 1\nq3 0 d3 maybe\n")).map(drop),
            3,
            "qrels relevance that is not an integer",
        );
    });
}

// ===== 8. closed-form loss =====

#[test]
fn criterion_8_uniform_probability_loss_matches_closed_form() {
    gate(8, "closed-form-loss", || {
        for &n in &[1usize, 3, 7, 87] {
            let ids: Vec<SampleId> = (0..=n as u32).map(SampleId).collect();
            let uniform = 1.0 / (n as f64 + 1.0);
            let probs = ProbVector::new(
                ids,
                Node::constant(Tensor::from_vec(vec![uniform; n + 1])),
            )
            .unwrap();
            let loss = contrastive_loss(&probs).unwrap().item();
            let expected =
                (n as f64 + 1.0).ln() - n as f64 * (n as f64 / (n as f64 + 1.0)).ln();
            assert!(
                (loss - expected).abs() <= CLOSED_FORM_TOL,
                "N={n}: loss {loss} vs closed form {expected}"
            );
        }
    });
}
