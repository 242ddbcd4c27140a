//! Trains a tagger on a small labeled seed and ranks the remaining pool by
//! mean token entropy.

use llmloop::sampling::{sample_entropy, select_most_uncertain, SampleEntropy};
use llmloop::synth::{generate, SynthConfig};
use llmloop::tagger::{train, TrainConfig};
use llmloop::Corpus;

pub fn run_example() -> llmloop::Result<()> {
    let corpus = generate(&SynthConfig {
        n_sentences: 600,
        ..SynthConfig::default()
    })?;
    let (seed, pool) = corpus.sentences.split_at(30);
    let model = train(
        &Corpus::new(corpus.language.clone(), seed.to_vec())?,
        &TrainConfig {
            epochs: 10,
            ..TrainConfig::default()
        },
    )?;

    let scored = pool
        .iter()
        .map(|s| {
            Ok(SampleEntropy {
                sentence_id: s.id.clone(),
                value: sample_entropy(&model.predict_proba(s))?,
            })
        })
        .collect::<llmloop::Result<Vec<_>>>()?;
    let picked = select_most_uncertain(&scored, 0.05, corpus.len())?;

    println!("selected {} of {} pool sentences", picked.len(), pool.len());
    for id in picked.iter().take(5) {
        let s = corpus.get(id).expect("selected from the pool");
        let h = scored.iter().find(|e| &e.sentence_id == id).map_or(0.0, |e| e.value);
        println!("{id}  H={h:.3}  {}", s.tokens.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> llmloop::Result<()> {
    run_example()
}
