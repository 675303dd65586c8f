//! Acceptance suite. Prints one PASS or FAIL line per criterion and exits
//! non-zero if any criterion fails. A name filter may be passed as the
//! first free argument, as with ordinary test targets.

mod dataset_oracle;
mod pipeline;
mod synthetic;
mod ted_oracle;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synpara::dataset::{build_eval_set, BuildOptions};
use synpara::evaluation::{baselines, permutation_test, rouge_n, BleuMode};
use synpara::inference::{candidate_heights, select_by_rouge, Generation, Generator};
use synpara::io::{parse_parsed_pairs, to_training_pairs};
use synpara::model::{CopySource, DecoderState, LabelVocab};
use synpara::tensor::{grad_check, Graph};
use synpara::text::pretokenize;
use synpara::training::{
    batch_loss, build_lexicon, evaluate_loss, full_height_examples, make_training_example, train, PairRecord,
    TrainConfig,
};
use synpara::tree::{leaf_spans, max_height};
use synpara::{ConstituencyTree, Model, ModelConfig};

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn within(limit: Duration, start: Instant) -> Result<f64, String> {
    let secs = start.elapsed().as_secs_f64();
    ensure!(start.elapsed() < limit, "took {secs:.1}s, limit {}s", limit.as_secs());
    Ok(secs)
}

fn gradient_fidelity() -> Result<String, String> {
    let start = Instant::now();
    let tree = |s: &str| ConstituencyTree::parse_bracketed(s).map_err(|e| e.to_string());
    let pairs = [PairRecord {
            source: "where does the cat live ?".into(),
            target: "what is the home of the cat ?".into(),
            tree: tree("(ROOT (SBARQ (WHNP (WP what)) (SQ (VBZ is) (NP (NP (DT the) (NN home)) (PP (IN of) (NP (DT the) (NN cat))))) (. ?)))")?,
        },
        PairRecord {
            source: "the dog sat on the mat".into(),
            target: "on the mat sat the dog".into(),
            tree: tree("(ROOT (S (PP (IN on) (NP (DT the) (NN mat))) (VP (VBD sat)) (NP (DT the) (NN dog))))")?,
        }];
    // Lexicon from the first pair only, so the second pair exercises copying.
    let lex = build_lexicon(&pairs[..1], 6, 100).map_err(|e| e.to_string())?;
    let batch = vec![
        make_training_example(&pairs[0], &lex.bpe, &lex.vocab, 3, 60).map_err(|e| e.to_string())?,
        make_training_example(&pairs[1], &lex.bpe, &lex.vocab, max_height(&pairs[1].tree), 60)
            .map_err(|e| e.to_string())?,
    ];
    let config = ModelConfig {
        vocab_size: lex.vocab.len(),
        label_count: lex.labels.len(),
        hidden: 16,
        emb: 8,
        layers: 3,
    };
    let model = Model::<f64>::new(config, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let report = grad_check(
        &model.params,
        |g: &mut Graph<f64>| batch_loss(&model, g, &lex.labels, &batch, 1.0, &mut rng).map(|(l, _)| l),
        1e-4,
        64,
        0,
    )
    .map_err(|e| e.to_string())?;
    let secs = within(Duration::from_secs(60), start)?;
    ensure!(
        report.max_rel_error < 1e-5,
        "max relative error {:.3e} at {:?}",
        report.max_rel_error,
        report.worst
    );
    Ok(format!(
        "max rel error {:.2e} over {} coordinates of {} parameters, {secs:.1}s",
        report.max_rel_error,
        report.coordinates_checked,
        model.params.num_values()
    ))
}

fn overfit_reconstruction() -> Result<String, String> {
    let start = Instant::now();
    let dir = fixtures();
    let read = |f: &str| std::fs::read_to_string(dir.join(f)).map_err(|e| e.to_string());
    let pairs = parse_parsed_pairs(&read("toy_pairs.tsv")?, &read("toy_trees.tsv")?).map_err(|e| e.to_string())?;
    let records = to_training_pairs(&pairs);
    ensure!(records.len() == 32, "expected 32 pairs, got {}", records.len());
    let config = TrainConfig {
        lr: 3e-3,
        batch: 8,
        epochs: 150,
        max_steps: 2000,
        emb: 32,
        hidden: 64,
        layers: 3,
        merges: 200,
        tf_ratio: 0.9,
        ..TrainConfig::default()
    };
    let lex = build_lexicon(&records, config.merges, config.vocab_cap).map_err(|e| e.to_string())?;
    let mut model: Model<f64> = Model::new(config.model_config(&lex), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let outcome = train(&mut model, &lex, &config, &records, &[], &mut rng, |_| Ok(())).map_err(|e| e.to_string())?;
    ensure!(outcome.steps <= 2000, "{} steps", outcome.steps);

    let (full, skipped) = full_height_examples(&records, &lex, config.max_len);
    ensure!(skipped.is_empty(), "skipped {skipped:?}");
    let parts = evaluate_loss(&model, &lex.labels, &full, 1.0, &mut rng).map_err(|e| e.to_string())?;
    let generator = Generator::new(&model, &lex);
    let mut misses = Vec::new();
    for r in &records {
        let g = generator.generate_f(&r.source, &r.tree, None).map_err(|e| e.to_string())?;
        if g.text != r.target {
            misses.push(format!("{:?} -> {:?}", r.target, g.text));
        }
    }
    let secs = within(Duration::from_secs(600), start)?;
    ensure!(
        parts.total < 0.05,
        "per-token loss {:.4} (token {:.4}, gate {:.4})",
        parts.total,
        parts.token_nll,
        parts.gate_bce
    );
    ensure!(misses.is_empty(), "{} of 32 targets not reproduced: {}", misses.len(), misses.join("; "));
    Ok(format!(
        "{} steps, per-token loss {:.4} (token {:.4}, gate {:.5}), 32/32 exact, {secs:.1}s",
        outcome.steps, parts.total, parts.token_nll, parts.gate_bce
    ))
}

fn signalling_invariant() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = Vec::new();
    let mut total_tokens = 0;
    for trial in 0..1000 {
        let depth = rng.gen_range(2..=7);
        let tree = synthetic::random_tree(&mut rng, depth);
        let h = rng.gen_range(1..=max_height(&tree) + 1);
        let signal = leaf_spans(&tree, h);
        let queue = tree.strip_terminals().prune(h).leaf_queue().len();
        let t = tree.tokens().len();
        total_tokens += t;
        let ones = signal.bits.iter().filter(|&&b| b == 1).count();
        let mut expected_start = 0;
        let mut partition = signal.spans.len() == queue && signal.bits.len() == t;
        for span in &signal.spans {
            partition &= span.start == expected_start && span.end > span.start && signal.bits[span.start] == 1;
            expected_start = span.end;
        }
        partition &= expected_start == t;
        if ones != queue || !partition {
            violations.push(format!("trial {trial}: {} at H={h}", tree.to_bracketed()));
        }
    }
    ensure!(violations.is_empty(), "{} violations, first: {}", violations.len(), violations[0]);
    Ok(format!("1000 trees, {total_tokens} tokens, 0 violations"))
}

fn ted_oracle_equivalence() -> Result<String, String> {
    let start = Instant::now();
    let report = ted_oracle::run();
    let secs = within(Duration::from_secs(300), start)?;
    ensure!(
        report.mismatch_count == 0,
        "{} mismatches, e.g. {:?}",
        report.mismatch_count,
        report.mismatches
    );
    Ok(format!(
        "{} trees, {} ordered pairs, {} forest states searched, exact agreement, {secs:.1}s",
        report.trees, report.pairs, report.states
    ))
}

fn distribution_validity() -> Result<String, String> {
    let vocab_size = 40;
    let labels = LabelVocab::from_labels(["S", "NP", "VP", "PP", "SBAR", "DT", "NN", "VB", "IN", "JJ"]);
    let config = ModelConfig {
        vocab_size,
        label_count: labels.len(),
        hidden: 12,
        emb: 8,
        layers: 2,
    };
    let base = Model::<f64>::new(config, 11);
    let copy_b = base.params.id("copy.b").ok_or("no copy.b parameter")?;
    let mut pure = base.clone();
    pure.params.get_mut(copy_b).data_mut()[0] = -1000.0;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut steps, mut worst_sum, mut copy_steps) = (0usize, 0.0f64, 0usize);
    for instance in 0..400 {
        let mut model = if instance % 2 == 0 { base.clone() } else { pure.clone() };
        let is_pure = instance % 2 == 1;
        if !is_pure {
            model.params.get_mut(copy_b).data_mut()[0] = rng.gen_range(-3.0..3.0);
        }
        let len = rng.gen_range(1..=12);
        let mut ext_ids = Vec::with_capacity(len);
        let mut source_ids = Vec::with_capacity(len);
        let mut oov = 0;
        for _ in 0..len {
            if rng.gen_bool(0.3) {
                // Repeats of an earlier unknown word reuse its id.
                let id = if oov > 0 && rng.gen_bool(0.3) {
                    vocab_size + rng.gen_range(0..oov)
                } else {
                    oov += 1;
                    vocab_size + oov - 1
                };
                ext_ids.push(id);
                source_ids.push(synpara::text::UNK);
            } else {
                let id = rng.gen_range(4..vocab_size);
                ext_ids.push(id);
                source_ids.push(id);
            }
        }
        let copy = CopySource {
            ext_ids,
            ext_len: vocab_size + oov,
        };
        let tree = synthetic::random_tree(&mut rng, 6);
        let pruned = tree.strip_terminals().prune(rng.gen_range(1..=max_height(&tree)));

        let mut g = Graph::new(&model.params);
        let vars = model.bind(&mut g);
        let sem = model.encode_semantic(&mut g, &vars, &source_ids).map_err(|e| e.to_string())?;
        let syn = model.encode_syntax(&mut g, &vars, &pruned, &labels).map_err(|e| e.to_string())?;
        let mut state: DecoderState = model.initial_state(&mut g, &vars, &sem, &syn).map_err(|e| e.to_string())?;
        for _ in 0..25 {
            let out = model
                .decode_step(&mut g, &vars, &sem, &syn, &state, &copy)
                .map_err(|e| e.to_string())?;
            let dist = g.data(out.dist);
            ensure!(dist.len() == copy.ext_len, "distribution length {}", dist.len());
            ensure!(dist.iter().all(|&p| p >= 0.0), "negative probability");
            let sum: f64 = dist.iter().sum();
            worst_sum = worst_sum.max((sum - 1.0).abs());
            ensure!((sum - 1.0).abs() < 1e-9, "sum {sum}");
            if is_pure {
                ensure!(g.scalar(out.p_gen) == 0.0, "p_gen {}", g.scalar(out.p_gen));
                let mut expected = vec![0.0; copy.ext_len];
                for (&id, &a) in copy.ext_ids.iter().zip(g.data(out.alpha)) {
                    expected[id] += a;
                }
                ensure!(dist == expected.as_slice(), "pure copy differs from aggregated attention");
                copy_steps += 1;
            }
            steps += 1;
            if rng.gen_bool(0.4) {
                state.cursor = state.cursor.pop();
            }
            state.prev = rng.gen_range(0..vocab_size);
            state.s = out.next_s;
        }
    }
    ensure!(steps >= 10_000, "only {steps} steps");
    Ok(format!(
        "{steps} steps, max |sum - 1| {worst_sum:.1e}, {copy_steps} pure-copy steps equal aggregated attention exactly"
    ))
}

fn dataset_builder_oracle() -> Result<String, String> {
    let pairs = dataset_oracle::corpus(17);
    ensure!(pairs.len() == 50, "corpus has {} pairs", pairs.len());
    let defaults = BuildOptions::default();
    let compare = |opts: &BuildOptions| -> Result<dataset_oracle::Scan, String> {
        let threshold = opts.bleu_threshold;
        let expected = dataset_oracle::scan(&pairs, opts.max_tokens, opts.max_length_diff, |b| b <= threshold);
        let built = build_eval_set(&pairs, opts).map_err(|e| e.to_string())?;
        let got: Vec<dataset_oracle::Chosen> = built
            .triples
            .iter()
            .map(|t| dataset_oracle::Chosen {
                source: t.source.clone(),
                exemplar: t.exemplar.clone(),
                reference: t.reference.clone(),
                exemplar_tree: t.exemplar_tree.clone(),
            })
            .collect();
        ensure!(got == expected.chosen, "triples differ at threshold {threshold}");
        ensure!(
            built.too_long == expected.too_long && built.no_candidate == expected.no_candidate,
            "counts differ: built {}/{}, oracle {}/{}",
            built.too_long,
            built.no_candidate,
            expected.too_long,
            expected.no_candidate
        );
        Ok(expected)
    };
    let main = compare(&defaults)?;
    ensure!(main.too_long == 2, "{} pairs dropped for length", main.too_long);

    // Each filter must change at least one choice, or its boundary is untested.
    let keep_all = |_: f64| true;
    let wider = dataset_oracle::scan(&pairs, 30, 3, |b| b <= 0.6);
    let diff2 = main
        .chosen
        .iter()
        .filter(|c| pretokenize(&c.exemplar).len().abs_diff(pretokenize(&c.reference).len()) == 2)
        .count();
    ensure!(wider.chosen != main.chosen, "length difference 3 never matters");
    ensure!(diff2 > 0, "no exemplar at length difference 2");
    let unfiltered = dataset_oracle::scan(&pairs, 30, 2, keep_all);
    ensure!(unfiltered.chosen != main.chosen, "BLEU filter never matters");

    // No sentence of at most 30 words reaches BLEU of exactly 0.6, so the
    // equality case is exercised at attained values: a threshold equal to
    // an attained BLEU keeps it, one just below drops it.
    ensure!(!main.bleu_values.contains(&0.6), "corpus attains BLEU 0.6 exactly");
    let mut attained: Vec<f64> = main.bleu_values.iter().copied().filter(|&b| b > 0.2 && b < 1.0).collect();
    attained.sort_by(f64::total_cmp);
    attained.dedup();
    let mut decisive = 0;
    for &b in &attained {
        let at = dataset_oracle::scan(&pairs, 30, 2, |x| x <= b);
        let below = dataset_oracle::scan(&pairs, 30, 2, |x| x <= b.next_down());
        if at.chosen != below.chosen {
            decisive += 1;
            compare(&BuildOptions {
                bleu_threshold: b,
                ..defaults
            })?;
            compare(&BuildOptions {
                bleu_threshold: b.next_down(),
                ..defaults
            })?;
        }
    }
    ensure!(decisive > 0, "no attained BLEU value decides a choice");
    let nearest = main
        .bleu_values
        .iter()
        .copied()
        .min_by(|a, b| (a - 0.6).abs().total_cmp(&(b - 0.6).abs()))
        .unwrap_or(f64::NAN);
    Ok(format!(
        "{} triples match, {} too long, {} without candidate; length 2 kept ({diff2} exemplars), 3 dropped; \
         BLEU boundary checked at {decisive} attained thresholds (0.6 itself unattainable, nearest {nearest:.4})",
        main.chosen.len(),
        main.too_long,
        main.no_candidate
    ))
}

fn selection_run(seed: u64) -> Result<(Vec<usize>, usize), String> {
    const WORDS: [&str; 6] = ["what", "is", "the", "cat", "dog", "?"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = Vec::new();
    let mut ties = 0;
    for _ in 0..2000 {
        let sentence = |rng: &mut ChaCha8Rng, n: usize| -> String {
            (0..n).map(|_| *WORDS.choose(rng).expect("non-empty")).collect::<Vec<_>>().join(" ")
        };
        let n = rng.gen_range(1..=6);
        let source = sentence(&mut rng, n);
        let heights = candidate_heights(rng.gen_range(1..=9));
        let mut candidates: Vec<Generation> = Vec::new();
        for &h in &heights {
            let text = if !candidates.is_empty() && rng.gen_bool(0.3) {
                candidates[rng.gen_range(0..candidates.len())].text.clone()
            } else {
                let n = rng.gen_range(1..=6);
                sentence(&mut rng, n)
            };
            candidates.push(Generation { text, height: h });
        }
        candidates.shuffle(&mut rng);
        let idx = select_by_rouge(&source, &candidates);
        let src = pretokenize(&source);
        let scores: Vec<f64> = candidates.iter().map(|c| rouge_n(&pretokenize(&c.text), &src, 1)).collect();
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ensure!(scores[idx] == best, "picked {} of {:?}", scores[idx], scores);
        let tied: Vec<usize> = (0..candidates.len()).filter(|&i| scores[i] == best).collect();
        if tied.len() > 1 {
            ties += 1;
        }
        let lowest = tied.iter().map(|&i| candidates[i].height).min().expect("non-empty");
        ensure!(candidates[idx].height == lowest, "tie not broken toward the smaller height");
        picks.push(candidates[idx].height);
    }
    Ok((picks, ties))
}

fn rouge_selection() -> Result<String, String> {
    let (first, ties) = selection_run(21)?;
    let (again, _) = selection_run(21)?;
    ensure!(first == again, "selection differs between runs with the same seed");
    ensure!(ties > 0, "no ties generated");
    Ok(format!("2000 candidate sets, {ties} with ties, all maximal, repeat run identical"))
}

fn baseline_sanity() -> Result<String, String> {
    let dir = fixtures();
    let read = |f: &str| std::fs::read_to_string(dir.join(f)).map_err(|e| e.to_string());
    let toy = parse_parsed_pairs(&read("toy_pairs.tsv")?, &read("toy_trees.tsv")?).map_err(|e| e.to_string())?;
    let mut sets = vec![("toy", toy)];
    for seed in [17, 18, 19] {
        sets.push(("synthetic", dataset_oracle::corpus(seed)));
    }
    let mut details = Vec::new();
    for (name, pairs) in &sets {
        let built = build_eval_set(pairs, &BuildOptions::default()).map_err(|e| e.to_string())?;
        for mode in [BleuMode::Corpus, BleuMode::SentenceMean] {
            let [source, exemplar] = baselines(&built.triples, mode).map_err(|e| e.to_string())?;
            let (se, ee) = (source.ted_e.ok_or("no TED-E")?, exemplar.ted_e.ok_or("no TED-E")?);
            ensure!(ee == 0.0, "{name}: Exemplar-as-Output TED-E {ee}");
            ensure!(se > ee, "{name}: Source-as-Output TED-E {se} not above {ee}");
            if mode == BleuMode::Corpus {
                details.push(format!("{name} n={} {se:.2}>0", built.triples.len()));
            }
        }
    }
    Ok(format!("TED-E source vs exemplar: {}", details.join(", ")))
}

/// Counts sign assignments whose absolute summed difference reaches the
/// observed one; inputs are multiples of 1/8, so sums are exact.
fn enumerate_signs(d: &[f64], i: usize, acc: f64, observed: f64) -> usize {
    if i == d.len() {
        return usize::from(acc.abs() >= observed);
    }
    enumerate_signs(d, i + 1, acc + d[i], observed) + enumerate_signs(d, i + 1, acc - d[i], observed)
}

fn permutation_exactness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut cases = 0;
    for _ in 0..300 {
        let n = rng.gen_range(1..=10);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=80) as f64 / 8.0).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=80) as f64 / 8.0).collect();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let observed = d.iter().sum::<f64>().abs();
        let expected = enumerate_signs(&d, 0, 0.0, observed) as f64 / (1u64 << n) as f64;
        let r = permutation_test(&a, &b, 1 << n, 0.05, 0).map_err(|e| e.to_string())?;
        ensure!(r.exact, "n = {n} not enumerated");
        ensure!(r.p_value == expected, "n = {n}: p {} vs enumeration {expected}", r.p_value);
        let same = permutation_test(&a, &a, 1 << n, 0.05, 0).map_err(|e| e.to_string())?;
        ensure!(same.p_value == 1.0 && !same.significant, "identical samples p {}", same.p_value);
        cases += 1;
    }
    let a: Vec<f64> = (0..50).map(|_| rng.gen::<f64>()).collect();
    let sampled = permutation_test(&a, &a, 5000, 0.05, 1).map_err(|e| e.to_string())?;
    ensure!(sampled.p_value == 1.0, "sampled identical p {}", sampled.p_value);
    Ok(format!("{cases} samples of size 1..10 equal enumeration; identical samples p = 1.0"))
}

fn end_to_end_determinism() -> Result<String, String> {
    let start = Instant::now();
    let files = pipeline::compare_runs(&fixtures())?;
    let secs = start.elapsed().as_secs_f64();
    Ok(format!("{} output files byte-identical across two runs, {secs:.1}s", files))
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("gradient fidelity", gradient_fidelity),
        ("overfit reconstruction", overfit_reconstruction),
        ("signalling invariant", signalling_invariant),
        ("tree edit distance oracle", ted_oracle_equivalence),
        ("distribution validity", distribution_validity),
        ("dataset builder oracle", dataset_builder_oracle),
        ("rouge selection", rouge_selection),
        ("baseline sanity", baseline_sanity),
        ("permutation test", permutation_exactness),
        ("determinism", end_to_end_determinism),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("acceptance {:>2} {name:<26} PASS  {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("acceptance {:>2} {name:<26} FAIL  {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
