//! Every example in `examples/` runs to completion.

#[path = "../examples/balanced_sampling.rs"]
#[allow(dead_code)]
mod balanced_sampling;
#[path = "../examples/entropy_selection.rs"]
#[allow(dead_code)]
mod entropy_selection;
#[path = "../examples/prompt_building.rs"]
#[allow(dead_code)]
mod prompt_building;
#[path = "../examples/mock_annotation.rs"]
#[allow(dead_code)]
mod mock_annotation;
#[path = "../examples/annotator_quality.rs"]
#[allow(dead_code)]
mod annotator_quality;
#[path = "../examples/active_learning_run.rs"]
#[allow(dead_code)]
mod active_learning_run;
#[path = "../examples/contamination_probe.rs"]
#[allow(dead_code)]
mod contamination_probe;
#[path = "../examples/cost_estimate.rs"]
#[allow(dead_code)]
mod cost_estimate;
#[path = "../examples/remote_annotator.rs"]
#[allow(dead_code)]
mod remote_annotator;
#[path = "../examples/synthetic_corpus.rs"]
#[allow(dead_code)]
mod synthetic_corpus;

#[test]
fn examples_run() {
    balanced_sampling::run_example().unwrap();
    entropy_selection::run_example().unwrap();
    prompt_building::run_example().unwrap();
    mock_annotation::run_example().unwrap();
    annotator_quality::run_example().unwrap();
    active_learning_run::run_example().unwrap();
    contamination_probe::run_example().unwrap();
    cost_estimate::run_example().unwrap();
    synthetic_corpus::run_example(tempfile::tempdir().unwrap().keep()).unwrap();
}

#[test]
fn remote_example_without_key_prints_the_prompt() {
    if std::env::var_os("OPENAI_API_KEY").is_none() {
        remote_annotator::run_example().unwrap();
    }
}
