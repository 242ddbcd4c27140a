//! Compares two offline annotators on a balanced 50-sentence subset with
//! ten reannotations each: agreement, consistency, format errors and
//! entity accuracy.

use std::sync::Arc;

use llmloop::annotation::{
    pick_examples, Annotator, AnnotatorConfig, MockAnnotator, MockProfile, PromptVariant,
};
use llmloop::quality::{evaluate_annotator, DEFAULT_REANNOTATIONS};
use llmloop::sampling::{balanced_sample, BalancedSamplerConfig};
use llmloop::synth::{generate_split, SynthConfig};

pub fn run_example() -> llmloop::Result<()> {
    let (train, test) = generate_split(
        &SynthConfig {
            n_sentences: 800,
            ..SynthConfig::default()
        },
        100,
    )?;
    let subset = balanced_sample(&train, &BalancedSamplerConfig::default())?.corpus;
    let examples = pick_examples(&test, 0)?;

    for spec in ["accuracy=0.95,seed=1", "accuracy=0.845,empty=0.3,omission=0.05,seed=1"] {
        let annotator = Annotator::new(
            Arc::new(MockAnnotator::new(MockProfile::parse(spec)?)?),
            AnnotatorConfig::default(),
            PromptVariant::Default,
            examples.clone(),
        )?;
        let report = evaluate_annotator(&annotator, &subset, DEFAULT_REANNOTATIONS)?;
        println!("{}", report.to_table());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> llmloop::Result<()> {
    run_example()
}
