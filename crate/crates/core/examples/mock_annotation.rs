//! Annotates a handful of sentences with a noisy offline annotator and
//! shows how each answer was classified.

use std::sync::Arc;

use llmloop::annotation::{
    pick_examples, Annotator, AnnotatorConfig, MockAnnotator, MockProfile, Outcome, PromptVariant,
};
use llmloop::synth::{generate_split, SynthConfig};

pub fn run_example() -> llmloop::Result<()> {
    let (train, test) = generate_split(
        &SynthConfig {
            n_sentences: 8,
            ..SynthConfig::default()
        },
        50,
    )?;
    let profile = MockProfile::parse("accuracy=0.845,empty=0.3,omission=0.1,seed=3")?;
    let annotator = Annotator::new(
        Arc::new(MockAnnotator::new(profile)?),
        AnnotatorConfig::default(),
        PromptVariant::Default,
        pick_examples(&test, 0)?,
    )?;

    for attempt in annotator.annotate(&train.sentences, 0)? {
        let verdict = match &attempt.outcome {
            Outcome::Ok { labels } => {
                let tags: Vec<&str> = labels.iter().map(|t| t.as_str()).collect();
                format!("ok     {}", tags.join(" "))
            }
            Outcome::Empty => "empty".to_string(),
            Outcome::Omission { predicted_count, reason } => {
                format!("omission ({predicted_count} labels, {reason:?})")
            }
        };
        println!(
            "{:<10} {:>5} tok  {verdict}",
            attempt.sentence_id,
            attempt.token_usage.total()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> llmloop::Result<()> {
    run_example()
}
