//! Generates a synthetic train/test split and writes it as CoNLL files,
//! ready for the `llmloop` command line.
//!
//! ```text
//! cargo run --example synthetic_corpus -- /tmp/syn
//! ```

use std::path::PathBuf;

use llmloop::corpus::save_conll;
use llmloop::synth::{generate_split, SynthConfig};

pub fn run_example(dir: PathBuf) -> llmloop::Result<()> {
    std::fs::create_dir_all(&dir).map_err(|e| llmloop::Error::Config(e.to_string()))?;
    let cfg = SynthConfig {
        n_sentences: 2000,
        ..SynthConfig::default()
    };
    let (train, test) = generate_split(&cfg, 500)?;
    save_conll(&train, dir.join("train.conll"), '\t')?;
    save_conll(&test, dir.join("test.conll"), '\t')?;
    let shares = train.class_shares()?;
    println!(
        "{} train / {} test sentences in {}",
        train.len(),
        test.len(),
        dir.display()
    );
    println!(
        "entity token shares  PER {:.2}  ORG {:.2}  LOC {:.2}  DATE {:.2}",
        shares[0], shares[1], shares[2], shares[3]
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> llmloop::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("llmloop-syn"));
    run_example(dir)
}
