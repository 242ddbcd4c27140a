//! Draws a 50-sentence evaluation subset whose entity density is neither
//! trivial nor saturated, and compares its class mix with the pool.

use llmloop::sampling::{balanced_sample, gaussian_rank_weights, BalancedSamplerConfig};
use llmloop::synth::{generate, SynthConfig};

pub fn run_example() -> llmloop::Result<()> {
    let corpus = generate(&SynthConfig {
        n_sentences: 1000,
        ..SynthConfig::default()
    })?;
    let cfg = BalancedSamplerConfig {
        sample_size: 50,
        seed: 7,
        ..BalancedSamplerConfig::default()
    };
    let sample = balanced_sample(&corpus, &cfg)?;

    println!(
        "pool {} -> filtered {} -> sampled {}{}",
        corpus.len(),
        sample.filtered_pool_size,
        sample.corpus.len(),
        if sample.undersized { " (undersized)" } else { "" }
    );
    let w = gaussian_rank_weights(8);
    println!("rank weights for n=8: {w:.3?}");
    for (name, (p, s)) in ["PER", "ORG", "LOC", "DATE"]
        .iter()
        .zip(sample.pool_class_shares.iter().zip(&sample.sample_class_shares))
    {
        println!("{name:>5}  pool {p:.3}  sample {s:.3}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> llmloop::Result<()> {
    run_example()
}
