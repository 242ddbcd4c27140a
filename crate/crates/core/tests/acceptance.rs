//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Tolerances and time budgets are fixed below.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use llmloop::active_learning::{
    run_active_learning, CostComparison, LoopAnnotator, LoopConfig, LoopRunner, RunReport,
    SelectionStrategy,
};
use llmloop::annotation::{
    parse_batch_response, parse_response, pick_examples, AnnotationAttempt, Annotator,
    AnnotatorConfig, MockAnnotator, MockProfile, Outcome, ParseOptions, PromptVariant,
    RetryPolicy, TokenUsage,
};
use llmloop::annotation::prompt::render_output;
use llmloop::contamination::{contamination_score, ContaminationConfig, ContaminationMock, ContaminationSample};
use llmloop::corpus::{entity_proportion, NUM_TAGS};
use llmloop::quality::{consistency, fleiss_kappa, fleiss_kappa_from_counts, ReannotationSet};
use llmloop::sampling::{
    balanced_sample, gaussian_rank_weights, token_entropy, total_variation,
    BalancedSamplerConfig, TokenDistribution,
};
use llmloop::synth::{generate, generate_split, SynthConfig};
use llmloop::tagger::{gradient_check, train, TaggerModel, TrainConfig, DEFAULT_HASH_BITS};
use llmloop::{Corpus, Sentence, Tag};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn lib<T>(r: llmloop::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn attempt(id: &str, outcome: Outcome) -> AnnotationAttempt {
    AnnotationAttempt {
        sentence_id: id.into(),
        outcome,
        raw_response: String::new(),
        transport_error: false,
        latency: Duration::ZERO,
        token_usage: TokenUsage::default(),
    }
}

fn random_tags(r: &mut ChaCha8Rng, n: usize) -> Vec<Tag> {
    (0..n).map(|_| Tag::ALL[r.gen_range(0..NUM_TAGS)]).collect()
}

// Direct entropy in nats, written independently of the library.
fn entropy_oracle(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

fn c01_entropy() -> Check {
    let ln9 = (9f64).ln();
    let uniform = token_entropy(&TokenDistribution::uniform());
    ensure((uniform - ln9).abs() <= 1e-12, format!("uniform H = {uniform}"))?;
    for k in 0..NUM_TAGS {
        let h = token_entropy(&TokenDistribution::one_hot(k));
        ensure(h == 0.0, format!("one-hot {k} H = {h}"))?;
    }
    let mut r = rng(1);
    let mut worst = 0f64;
    for _ in 0..10_000 {
        // uniform on the simplex via normalized exponentials
        let mut p = [0.0; NUM_TAGS];
        for x in &mut p {
            *x = -(1.0 - r.gen::<f64>()).ln();
        }
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        let h = token_entropy(&lib(TokenDistribution::new(p))?);
        ensure((0.0..=ln9).contains(&h), format!("H = {h} out of [0, ln 9]"))?;
        worst = worst.max((h - entropy_oracle(&p)).abs());
    }
    ensure(worst <= 1e-12, format!("oracle disagreement {worst:e}"))?;
    Ok(format!("uniform |H - ln 9| = {:.1e}, 10000 simplex points in bounds, max oracle gap {worst:.1e}", (uniform - ln9).abs()))
}

// Fleiss' kappa from an explicit item x rater matrix by enumerating rater
// pairs.
fn kappa_oracle(ratings: &[Vec<usize>], k: usize) -> f64 {
    let n = ratings[0].len();
    let items = ratings.len() as f64;
    let mut p_bar = 0.0;
    let mut marg = vec![0.0; k];
    for row in ratings {
        let mut agree = 0.0;
        for r in 0..n {
            marg[row[r]] += 1.0;
            for s in 0..n {
                if r != s && row[r] == row[s] {
                    agree += 1.0;
                }
            }
        }
        p_bar += agree / (n * (n - 1)) as f64;
    }
    p_bar /= items;
    let pe: f64 = marg.iter().map(|m| (m / (items * n as f64)).powi(2)).sum();
    if ratings.iter().all(|row| row.iter().all(|&c| c == row[0])) {
        return 1.0;
    }
    (p_bar - pe) / (1.0 - pe)
}

fn c02_fleiss() -> Check {
    let mut r = rng(2);
    let mut worst = 0f64;
    for case in 0..100 {
        let items = r.gen_range(1..=10);
        let raters = r.gen_range(2..=5);
        let k = r.gen_range(2..=4);
        let ratings: Vec<Vec<usize>> = (0..items)
            .map(|_| (0..raters).map(|_| r.gen_range(0..k)).collect())
            .collect();
        let want = kappa_oracle(&ratings, k);
        let counts: Vec<Vec<usize>> = ratings
            .iter()
            .map(|row| (0..k).map(|c| row.iter().filter(|&&x| x == c).count()).collect())
            .collect();
        let got = lib(fleiss_kappa_from_counts(&counts))?;
        // the same instance through the annotation path: items are tokens of
        // one sentence, raters are attempts, categories map onto tags
        let gold = vec![Tag::O; items];
        let sentence = lib(Sentence::new(format!("k{case}"), vec!["w".into(); items], Some(gold), "x"))?;
        let attempts = (0..raters)
            .map(|a| {
                let labels = ratings.iter().map(|row| Tag::ALL[row[a]]).collect();
                attempt(&sentence.id, Outcome::Ok { labels })
            })
            .collect();
        let via_sets = lib(fleiss_kappa(&[lib(ReannotationSet::new(sentence, attempts))?]))?.kappa;
        if want.is_finite() {
            worst = worst.max((got - want).abs()).max((via_sets - want).abs());
        } else {
            ensure(!got.is_finite(), format!("case {case}: oracle undefined, got {got}"))?;
        }
    }
    ensure(worst <= 1e-9, format!("max deviation from oracle {worst:e}"))?;

    let s = lib(Sentence::from_pairs("p", "x", &[("a", "B-PER"), ("b", "I-PER"), ("c", "O")]))?;
    let gold = s.gold.clone().unwrap();
    let set = lib(ReannotationSet::new(
        s,
        (0..10).map(|_| attempt("p", Outcome::Ok { labels: gold.clone() })).collect(),
    ))?;
    let perfect = lib(fleiss_kappa(&[set]))?.kappa;
    ensure(perfect == 1.0, format!("perfect agreement gave {perfect}"))?;
    Ok(format!("100 instances, max |kappa - oracle| = {worst:.1e}; perfect agreement = 1.0"))
}

fn c03_consistency() -> Check {
    let s = lib(Sentence::from_pairs(
        "c",
        "x",
        &[("Musa", "B-PER"), ("ye", "O"), ("Bamako", "B-LOC"), ("taa", "O")],
    ))?;
    let gold = s.gold.clone().unwrap();
    let mut attempts: Vec<_> = (0..9).map(|_| attempt("c", Outcome::Ok { labels: gold.clone() })).collect();
    attempts.push(attempt(
        "c",
        Outcome::Omission {
            predicted_count: 3,
            reason: llmloop::annotation::OmissionReason::LengthMismatch,
        },
    ));
    let score = lib(consistency(&[lib(ReannotationSet::new(s, attempts))?]))?.overall;
    ensure(score == 90.0, format!("9 perfect + 1 omission gave {score}"))?;

    let mut r = rng(3);
    let mut worst = 0f64;
    for case in 0..50 {
        let n = r.gen_range(1..25);
        let gold = random_tags(&mut r, n);
        let id = format!("r{case}");
        let s = lib(Sentence::new(id.clone(), vec!["t".into(); n], Some(gold.clone()), "x"))?;
        let (outcome, accuracy) = if r.gen_bool(0.2) {
            (Outcome::Empty, 0.0)
        } else {
            let pred: Vec<Tag> = gold
                .iter()
                .map(|&g| if r.gen_bool(0.7) { g } else { Tag::ALL[r.gen_range(0..NUM_TAGS)] })
                .collect();
            let hits = pred.iter().zip(&gold).filter(|(p, g)| p == g).count();
            (Outcome::Ok { labels: pred }, 100.0 * hits as f64 / n as f64)
        };
        let c = lib(consistency(&[lib(ReannotationSet::new(s, vec![attempt(&id, outcome)]))?]))?.overall;
        worst = worst.max((c - accuracy).abs());
    }
    ensure(worst <= 1e-9, format!("R=1 consistency differs from accuracy by {worst:e}"))?;
    Ok(format!("omission case = 90.0; R=1 equals accuracy on 50 cases (max gap {worst:.1e})"))
}

fn c04_balanced_sampler() -> Check {
    let corpus = lib(generate(&SynthConfig {
        n_sentences: 5000,
        seed: 4,
        ..SynthConfig::default()
    }))?;
    let cfg = BalancedSamplerConfig::default();
    let pool: Vec<Sentence> = corpus
        .iter()
        .filter(|s| {
            let gold = s.gold.as_ref().unwrap();
            let entities = gold.iter().filter(|t| t.is_entity()).count();
            let p = entities as f64 / gold.len() as f64;
            entities > 0 && (0.05..=0.50).contains(&p)
        })
        .cloned()
        .collect();
    let pool_corpus = lib(Corpus::new("syn", pool))?;
    let pool_shares = lib(pool_corpus.class_shares())?;

    for n in [100usize, 4000, pool_corpus.len() / 4 * 4] {
        let w = gaussian_rank_weights(n);
        ensure(w[n / 2] == 1.0, format!("n={n}: weight at n/2 = {}", w[n / 2]))?;
        let q = w[3 * n / 4];
        ensure((q - (-0.5f64).exp()).abs() <= 1e-12, format!("n={n}: weight at 3n/4 = {q}"))?;
    }

    let mut mean_shares = [0.0; 4];
    let mut mean_tv = 0.0;
    for seed in 0..20 {
        let sample = lib(balanced_sample(&corpus, &BalancedSamplerConfig { seed, ..cfg }))?;
        ensure(sample.corpus.len() == 50 && !sample.undersized, "sample size")?;
        for s in &sample.corpus {
            let p = lib(entity_proportion(s))?.value();
            let entities = s.gold.as_ref().unwrap().iter().filter(|t| t.is_entity()).count();
            ensure((0.05..=0.50).contains(&p) && entities > 0, format!("{}: p = {p}", s.id))?;
        }
        let shares = lib(sample.corpus.class_shares())?;
        mean_tv += total_variation(&shares, &pool_shares) / 20.0;
        for (m, s) in mean_shares.iter_mut().zip(shares) {
            *m += s / 20.0;
        }
    }
    let tv = total_variation(&mean_shares, &pool_shares);
    ensure(tv <= 0.15, format!("TV(20-seed mean shares, pool) = {tv}"))?;
    Ok(format!(
        "all sampled p in [0.05, 0.50]; weights exact; TV of 20-seed mean shares = {tv:.3} (per-seed mean {mean_tv:.3})"
    ))
}

fn c05_parser() -> Check {
    let lax = ParseOptions::default();
    let mut r = rng(5);
    for _ in 0..2000 {
        let n = r.gen_range(1..30);
        let tokens: Vec<String> = (0..n).map(|i| format!("tok{}", i * 7 % 13)).collect();
        let labels = random_tags(&mut r, n);
        let raw = render_output(&tokens, &labels);
        ensure(
            parse_response(&raw, &tokens, lax) == Outcome::Ok { labels: labels.clone() },
            format!("round trip failed: {raw}"),
        )?;
        let short = &tokens[..n - 1];
        let mismatch = parse_response(&raw, short, lax);
        ensure(
            n == 1 || matches!(mismatch, Outcome::Omission { predicted_count, .. } if predicted_count == n),
            format!("length mismatch gave {mismatch:?}"),
        )?;
    }
    ensure(parse_response("", &["a".to_string()], lax) == Outcome::Empty, "empty input")?;

    let valid = render_output(&["a".into(), "b".into()], &[Tag::BPer, Tag::O]);
    let expected = vec!["a".to_string(), "b".to_string()];
    let mut counts = [0usize; 3];
    for i in 0..10_000 {
        let bytes: Vec<u8> = if i % 2 == 0 {
            (0..r.gen_range(0..200)).map(|_| r.gen()).collect()
        } else {
            // mutate a valid answer so many inputs are nearly well-formed
            let mut b = valid.clone().into_bytes();
            for _ in 0..r.gen_range(1..4) {
                let at = r.gen_range(0..b.len());
                match r.gen_range(0..3) {
                    0 => b[at] = r.gen(),
                    1 => {
                        b.remove(at);
                    }
                    _ => b.insert(at, b"{}[],\"OB-"[r.gen_range(0..9)]),
                }
            }
            b
        };
        let text = String::from_utf8_lossy(&bytes);
        let out = catch_unwind(|| parse_response(&text, &expected, lax))
            .map_err(|_| format!("parser panicked on {text:?}"))?;
        counts[match out {
            Outcome::Ok { .. } => 0,
            Outcome::Empty => 1,
            Outcome::Omission { .. } => 2,
        }] += 1;
        let batch = catch_unwind(|| parse_batch_response(&text, &[&expected, &expected[..1]], lax))
            .map_err(|_| format!("batch parser panicked on {text:?}"))?;
        ensure(batch.len() == 2, "batch outcome count")?;
    }
    Ok(format!(
        "2000 round trips; 10000 fuzzed inputs -> ok {} / empty {} / omission {}",
        counts[0], counts[1], counts[2]
    ))
}

fn c06_tagger() -> Check {
    let mut worst = 0f64;
    for seed in 0..5 {
        worst = worst.max(gradient_check(seed));
    }
    ensure(worst <= 1e-4, format!("gradient relative error {worst:e}"))?;

    let corpus = lib(generate(&SynthConfig {
        n_sentences: 300,
        seed: 6,
        ..SynthConfig::default()
    }))?;
    let model = lib(train(
        &corpus,
        &TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        },
    ))?;
    let zero = TaggerModel::zero(DEFAULT_HASH_BITS);
    let ln9 = (9f64).ln();
    let mut sum_gap = 0f64;
    let mut zero_gap = 0f64;
    for s in &corpus {
        for d in model.predict_proba(s) {
            sum_gap = sum_gap.max((d.probs().iter().sum::<f64>() - 1.0).abs());
        }
        for d in zero.predict_proba(s) {
            zero_gap = zero_gap.max((entropy_oracle(d.probs()) - ln9).abs());
        }
    }
    ensure(sum_gap <= 1e-6, format!("row sum off by {sum_gap:e}"))?;
    ensure(zero_gap <= 1e-12, format!("zero model entropy off by {zero_gap:e}"))?;
    Ok(format!(
        "max gradient rel. error {worst:.1e}; row sums within {sum_gap:.1e}; zero model |H - ln 9| <= {zero_gap:.1e}"
    ))
}

struct AlRuns {
    entropy: Vec<RunReport>,
    random: Vec<RunReport>,
    noisy: Vec<RunReport>,
    elapsed: Duration,
}

const AL_SEEDS: u64 = 5;

fn al_runs() -> Result<AlRuns, String> {
    let start = Instant::now();
    let (train, test) = lib(generate_split(
        &SynthConfig {
            n_sentences: 2000,
            ..SynthConfig::default()
        },
        500,
    ))?;
    let mut runs = AlRuns {
        entropy: Vec::new(),
        random: Vec::new(),
        noisy: Vec::new(),
        elapsed: Duration::ZERO,
    };
    for seed in 0..AL_SEEDS {
        let cfg = LoopConfig {
            seed,
            ..LoopConfig::default()
        };
        runs.entropy.push(lib(run_active_learning(&train, &test, &cfg, &LoopAnnotator::Oracle))?);
        let random = LoopConfig {
            strategy: SelectionStrategy::Random,
            ..cfg.clone()
        };
        runs.random.push(lib(run_active_learning(&train, &test, &random, &LoopAnnotator::Oracle))?);
        let mock = MockAnnotator::new(MockProfile {
            accuracy: 0.845,
            empty_rate: 0.0,
            omission_rate: 0.0,
            seed,
        });
        let annotator = lib(Annotator::new(
            Arc::new(lib(mock)?),
            AnnotatorConfig::default(),
            PromptVariant::Default,
            lib(pick_examples(&test, seed))?,
        ))?;
        runs.noisy.push(lib(run_active_learning(&train, &test, &cfg, &LoopAnnotator::Llm(annotator)))?);
    }
    runs.elapsed = start.elapsed();
    Ok(runs)
}

fn accuracy_at(report: &RunReport, percent: f64) -> Result<f64, String> {
    report
        .iterations
        .iter()
        .find(|r| (r.data_percent - percent).abs() < 1e-9)
        .map(|r| r.entity_accuracy)
        .ok_or_else(|| format!("no iteration at {percent}% data"))
}

fn c07_al_effectiveness(runs: &AlRuns) -> Check {
    let mut rising = 0;
    for r in &runs.entropy {
        if accuracy_at(r, 30.0)? >= accuracy_at(r, 10.0)? {
            rising += 1;
        }
    }
    let mean = |rs: &[RunReport]| -> Result<f64, String> {
        Ok(rs.iter().map(|r| accuracy_at(r, 30.0)).sum::<Result<f64, String>>()? / rs.len() as f64)
    };
    let (e, rnd) = (mean(&runs.entropy)?, mean(&runs.random)?);
    ensure(rising >= 4, format!("30% >= 10% in only {rising}/5 seeds"))?;
    ensure(e > rnd, format!("entropy {e:.2} <= random {rnd:.2} at 30%"))?;
    ensure(runs.elapsed < Duration::from_secs(300), format!("runs took {:?}", runs.elapsed))?;
    Ok(format!(
        "30% >= 10% in {rising}/5 seeds; mean accuracy at 30%: entropy {e:.2} vs random {rnd:.2}; all runs {:.1}s",
        runs.elapsed.as_secs_f64()
    ))
}

fn c08_al_degradation(runs: &AlRuns) -> Check {
    let n_iter = runs.entropy[0].iterations.len();
    let mut gaps = Vec::new();
    // iteration 0 is trained on the shared gold seed subset, before any
    // annotator output enters the labeled set
    for i in 1..n_iter {
        let mean = |rs: &[RunReport]| rs.iter().map(|r| r.iterations[i].entity_accuracy).sum::<f64>() / rs.len() as f64;
        for (o, m) in runs.entropy.iter().zip(&runs.noisy) {
            ensure(
                o.iterations[i].labeled_size == m.iterations[i].labeled_size,
                "paired runs differ in labeled size",
            )?;
        }
        let (o, m) = (mean(&runs.entropy), mean(&runs.noisy));
        ensure(m < o, format!("iteration {i}: noisy {m:.2} >= oracle {o:.2}"))?;
        gaps.push(format!("{:.2}", o - m));
    }
    Ok(format!("5-seed mean oracle - noisy gap per iteration: [{}]", gaps.join(", ")))
}

fn c09_cost() -> Check {
    let mut parts = Vec::new();
    for (human, want) in [(233.5, 42.45), (292.5, 53.18)] {
        let ratio = CostComparison::from_totals(human, 3, 16.5).ratio.ok_or("ratio undefined")?;
        let oracle = human * 3.0 / 16.5;
        ensure((ratio - want).abs() <= 0.01, format!("{human}: ratio {ratio}"))?;
        ensure((ratio - oracle).abs() <= 1e-12, format!("{human}: arithmetic {ratio} vs {oracle}"))?;
        parts.push(format!("{human} x 3 / 16.5 = {ratio:.4}"));
    }
    ensure(CostComparison::from_totals(233.5, 3, 0.0).ratio.is_none(), "zero LLM cost must be undefined")?;
    Ok(parts.join("; "))
}

fn c10_batch_equivalence() -> Check {
    let (train, test) = lib(generate_split(
        &SynthConfig {
            n_sentences: 500,
            seed: 10,
            ..SynthConfig::default()
        },
        50,
    ))?;
    let examples = lib(pick_examples(&test, 0))?;
    let annotate = |batch_size| -> Result<Vec<Outcome>, String> {
        let a = lib(Annotator::new(
            Arc::new(lib(MockAnnotator::new(MockProfile::perfect(10)))?),
            AnnotatorConfig {
                batch_size,
                ..AnnotatorConfig::default()
            },
            PromptVariant::Default,
            examples.clone(),
        ))?;
        Ok(lib(a.annotate(&train.sentences, 0))?.into_iter().map(|x| x.outcome).collect())
    };
    let single = annotate(1)?;
    let batched = annotate(2)?;
    ensure(single.iter().all(Outcome::is_ok), "perfect mock produced a failure")?;
    let same = single.iter().zip(&batched).filter(|(a, b)| a == b).count();
    ensure(same == train.len(), format!("{same}/{} identical", train.len()))?;
    Ok(format!("{same}/{} sentences identical between batch sizes 1 and 2", train.len()))
}

fn c11_contamination() -> Check {
    let corpus = lib(generate(&SynthConfig {
        n_sentences: 30,
        seed: 11,
        ..SynthConfig::default()
    }))?;
    let samples: Vec<ContaminationSample> = corpus
        .iter()
        .map(|s| ContaminationSample {
            sentence: s.clone(),
            source: "CoNLL-2003".into(),
        })
        .collect();
    let cfg = ContaminationConfig {
        dataset: "CoNLL-2003".into(),
        ..ContaminationConfig::default()
    };
    let retry = RetryPolicy::default();
    let exact = lib(contamination_score(&samples, &lib(ContaminationMock::new("CoNLL-2003", 1.0, 0))?, &cfg, &retry))?;
    ensure(exact.mean == 1.0 && exact.std == 0.0, format!("always-correct gave {} ± {}", exact.mean, exact.std))?;

    // three standard deviations of the mean of 3 x 30 Bernoulli(0.94) draws
    let bound = 3.0 * (0.94f64 * 0.06 / 90.0).sqrt();
    let noisy = lib(contamination_score(&samples, &lib(ContaminationMock::new("CoNLL-2003", 0.94, 0))?, &cfg, &retry))?;
    ensure((noisy.mean - 0.94).abs() <= bound, format!("Bernoulli(0.94) mean {}", noisy.mean))?;
    Ok(format!(
        "always-correct 1.00 ± 0.00; Bernoulli(0.94) {:.3} ± {:.3} (bound ±{bound:.3})",
        noisy.mean, noisy.std
    ))
}

fn c12_reproducibility() -> Check {
    let (train, test) = lib(generate_split(
        &SynthConfig {
            n_sentences: 600,
            seed: 12,
            ..SynthConfig::default()
        },
        150,
    ))?;
    let cfg = LoopConfig {
        seed: 12,
        max_iterations: 4,
        train: TrainConfig {
            epochs: 10,
            ..TrainConfig::default()
        },
        ..LoopConfig::default()
    };
    let mock = MockProfile::parse("accuracy=0.845,empty=0.3,omission=0.05,seed=12").map_err(|e| e.to_string())?;
    let annotator = LoopAnnotator::Llm(lib(Annotator::new(
        Arc::new(lib(MockAnnotator::new(mock))?),
        AnnotatorConfig::default(),
        PromptVariant::Default,
        lib(pick_examples(&test, 12))?,
    ))?);
    let json = |r: &RunReport| serde_json::to_vec(r).map_err(|e| e.to_string());

    let first = json(&lib(run_active_learning(&train, &test, &cfg, &annotator))?)?;
    let second = json(&lib(run_active_learning(&train, &test, &cfg, &annotator))?)?;
    ensure(first == second, "rerun produced a different report")?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    {
        let mut runner = lib(lib(LoopRunner::new(&train, &test, cfg.clone(), &annotator))?.with_checkpoint_dir(dir.path()))?;
        lib(runner.step())?;
        lib(runner.step())?;
    }
    let resumed = json(&lib(lib(LoopRunner::resume(dir.path(), &train, &test, &annotator))?.run())?)?;
    ensure(resumed == first, "resumed run differs from the uninterrupted run")?;
    Ok(format!(
        "{}-byte report identical across reruns and after resume from iteration 1",
        first.len()
    ))
}

fn main() {
    let budgets: [(u8, &str, Duration); 12] = [
        (1, "entropy correctness", Duration::from_secs(1)),
        (2, "Fleiss' kappa oracle", Duration::from_secs(5)),
        (3, "consistency semantics", Duration::from_secs(1)),
        (4, "balanced sampler", Duration::from_secs(10)),
        (5, "parser robustness", Duration::from_secs(30)),
        (6, "tagger numerics", Duration::from_secs(10)),
        (7, "AL effectiveness", Duration::from_secs(300)),
        (8, "AL degradation", Duration::MAX),
        (9, "cost arithmetic", Duration::from_secs(1)),
        (10, "batch equivalence", Duration::MAX),
        (11, "contamination harness", Duration::MAX),
        (12, "reproducibility", Duration::MAX),
    ];
    let mut al: Option<Result<AlRuns, String>> = None;
    let mut failed = 0;
    for (id, name, budget) in budgets {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| match id {
            1 => c01_entropy(),
            2 => c02_fleiss(),
            3 => c03_consistency(),
            4 => c04_balanced_sampler(),
            5 => c05_parser(),
            6 => c06_tagger(),
            7 | 8 => {
                let runs = al.get_or_insert_with(al_runs).as_ref().map_err(Clone::clone)?;
                if id == 7 {
                    c07_al_effectiveness(runs)
                } else {
                    c08_al_degradation(runs)
                }
            }
            9 => c09_cost(),
            10 => c10_batch_equivalence(),
            11 => c11_contamination(),
            _ => c12_reproducibility(),
        }))
        .unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if id != 7 && elapsed > budget => Err(format!("took {elapsed:?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {id:>2} {name:<24} PASS  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} {name:<24} FAIL  {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
