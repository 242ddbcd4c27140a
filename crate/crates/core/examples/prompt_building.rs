//! Renders the annotation prompt for one and for two sentences, in both
//! prompt variants.

use llmloop::annotation::{build_prompt, pick_examples, PromptVariant};
use llmloop::corpus::Sentence;
use llmloop::synth::{generate_split, SynthConfig};

pub fn run_example() -> llmloop::Result<()> {
    let (_, test) = generate_split(
        &SynthConfig {
            n_sentences: 10,
            language: "bam".into(),
            ..SynthConfig::default()
        },
        40,
    )?;
    let examples = pick_examples(&test, 0)?;
    let a = Sentence::from_pairs(
        "demo:0",
        "bam",
        &[("Musa", "B-PER"), ("taara", "O"), ("Bamako", "B-LOC")],
    )?;
    let b = Sentence::new("demo:1", vec!["A".into(), "ye".into(), "ɲɛ".into()], None, "bam")?;

    let single = build_prompt("bam", &examples, &[&a], PromptVariant::Default, 1)?;
    println!("{single}\n");
    let batch = build_prompt("bam", &examples, &[&a, &b], PromptVariant::Shortened, 2)?;
    println!("{batch}");
    println!(
        "\ndefault: {} chars, shortened batch: {} chars",
        single.len(),
        batch.len()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> llmloop::Result<()> {
    run_example()
}
