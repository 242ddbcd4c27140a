//! Sends one sentence to a chat-completion endpoint. Needs the key named
//! by `api_key_env_name` (default `OPENAI_API_KEY`); without it the example
//! only prints the prompt it would send.

use std::sync::Arc;

use llmloop::annotation::{
    build_prompt, pick_examples, Annotator, AnnotatorConfig, PromptVariant, RemoteBackend,
};
use llmloop::corpus::Sentence;
use llmloop::synth::{generate_split, SynthConfig};

pub fn run_example() -> llmloop::Result<()> {
    let config = AnnotatorConfig::default();
    let (_, test) = generate_split(
        &SynthConfig {
            n_sentences: 1,
            language: "bam".into(),
            ..SynthConfig::default()
        },
        40,
    )?;
    let examples = pick_examples(&test, 0)?;
    let sentence = Sentence::new(
        "demo:0",
        "Musa taara Bamako sàn 2023 .".split(' ').map(String::from).collect(),
        None,
        "bam",
    )?;

    if std::env::var_os(&config.api_key_env_name).is_none() {
        println!("{} is not set; prompt only:\n", config.api_key_env_name);
        println!(
            "{}",
            build_prompt("bam", &examples, &[&sentence], PromptVariant::Default, 1)?
        );
        return Ok(());
    }
    let backend = Arc::new(RemoteBackend::from_config(&config)?);
    let annotator = Annotator::new(backend, config, PromptVariant::Default, examples)?;
    for attempt in annotator.annotate(&[sentence], 0)? {
        println!("{:?}\n{}", attempt.outcome, attempt.raw_response);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> llmloop::Result<()> {
    run_example()
}
