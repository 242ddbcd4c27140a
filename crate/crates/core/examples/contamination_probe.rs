//! Scores two simulated models on source identification and runs the
//! completion probe on a few records.

use llmloop::annotation::RetryPolicy;
use llmloop::contamination::{
    contamination_score, draw_samples, run_icl_probe, ContaminationConfig, ContaminationMock,
};
use llmloop::synth::{generate, SynthConfig};

pub fn run_example() -> llmloop::Result<()> {
    let languages: Vec<_> = ["ewe", "xho", "nya", "yor"]
        .iter()
        .enumerate()
        .map(|(i, lang)| {
            generate(&SynthConfig {
                n_sentences: 40,
                language: lang.to_string(),
                id_prefix: lang.to_string(),
                seed: i as u64,
                ..SynthConfig::default()
            })
        })
        .collect::<llmloop::Result<_>>()?;
    let cfg = ContaminationConfig {
        dataset: "MasakhaNER".into(),
        aliases: vec!["MasakhaNER 2.0".into()],
        multilingual: true,
        ..ContaminationConfig::default()
    };
    let samples = draw_samples(&languages, &cfg)?;

    for p in [0.94, 0.04] {
        let model = ContaminationMock::new("MasakhaNER 2.0", p, 11)?;
        let report = contamination_score(&samples, &model, &cfg, &RetryPolicy::default())?;
        println!(
            "p={p:.2}: score {:.2} ± {:.2}  runs {:?}",
            report.mean, report.std, report.per_run_correct
        );
    }

    let leaky = ContaminationMock::new("MasakhaNER", 1.0, 11)?.with_recall(0.3);
    let icl = run_icl_probe(&samples[..10], &leaky, 0.5, &RetryPolicy::default())?;
    println!(
        "completion probe: {} exact, {} near-exact, {} no match",
        icl.exact, icl.near_exact, icl.no_match
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> llmloop::Result<()> {
    run_example()
}
