//! Human versus LLM annotation cost, from published totals and from a
//! run's token counts.

use llmloop::active_learning::{CostComparison, CostModel};
use llmloop::annotation::TokenUsage;

pub fn run_example() -> llmloop::Result<()> {
    for (language, per_annotator) in [("Bambara", 233.5), ("isiZulu", 292.5)] {
        let c = CostComparison::from_totals(per_annotator, 3, 16.5);
        println!(
            "{language:<8} human {:>6.1} USD  llm {:>5.1} USD  ratio {:.2}",
            c.human_cost,
            c.llm_cost,
            c.ratio.unwrap_or(f64::NAN)
        );
    }

    let model = CostModel {
        human_cost_per_200_sentences: 10.0,
        n_human_annotators: 3,
        ..CostModel::default()
    };
    let usage = TokenUsage {
        input_tokens: 1_200_000,
        output_tokens: 150_000,
    };
    let human = model.human_cost(4_462);
    let llm = model.llm_cost(usage);
    println!("4462 sentences: human {human:.2} USD vs llm {llm:.2} USD ({:.1}x)", human / llm);
    Ok(())
}

#[allow(dead_code)]
fn main() -> llmloop::Result<()> {
    run_example()
}
