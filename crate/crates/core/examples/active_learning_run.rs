//! Runs the loop twice on a synthetic corpus, once with gold labels and
//! once with a noisy annotator, and prints both learning curves.

use std::sync::Arc;

use llmloop::active_learning::{run_active_learning, LoopAnnotator, LoopConfig};
use llmloop::annotation::{
    pick_examples, Annotator, AnnotatorConfig, MockAnnotator, MockProfile, PromptVariant,
};
use llmloop::synth::{generate_split, SynthConfig};
use llmloop::tagger::TrainConfig;

pub fn run_example() -> llmloop::Result<()> {
    let (train, test) = generate_split(
        &SynthConfig {
            n_sentences: 800,
            ..SynthConfig::default()
        },
        200,
    )?;
    let cfg = LoopConfig {
        seed: 1,
        train: TrainConfig {
            epochs: 15,
            ..TrainConfig::default()
        },
        ..LoopConfig::default()
    };
    let noisy = Annotator::new(
        Arc::new(MockAnnotator::new(MockProfile::parse("accuracy=0.845,seed=1")?)?),
        AnnotatorConfig::default(),
        PromptVariant::Default,
        pick_examples(&test, 1)?,
    )?;

    let gold = run_active_learning(&train, &test, &cfg, &LoopAnnotator::Oracle)?;
    let llm = run_active_learning(&train, &test, &cfg, &LoopAnnotator::Llm(noisy))?;
    println!("data %   oracle   noisy");
    for ((d, a), (_, b)) in gold.curve().into_iter().zip(llm.curve()) {
        println!("{d:>6.1}   {a:>6.2}   {b:>6.2}");
    }
    println!(
        "noisy run used {} prompt tokens, {} completion tokens",
        llm.total_usage.input_tokens, llm.total_usage.output_tokens
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> llmloop::Result<()> {
    run_example()
}
