//! Golden-file tests pinning the four system prompts at nationality
//! granularity with the default limits (M = 4, K = 5), rendered against the
//! shipped 99-label taxonomy.
//!
//! Regenerate with `LAMA_UPDATE_GOLDENS=1 cargo test --test prompts_golden`.

use std::path::Path;

use lama::prompts;
use lama::taxonomy::{Granularity, Taxonomy};

fn golden_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn check(name: &str, rendered: &str) {
    let path = golden_dir().join(name);
    if std::env::var("LAMA_UPDATE_GOLDENS").is_ok() {
        std::fs::write(&path, rendered).expect("write golden");
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden file {}: {e}", path.display()));
    assert_eq!(rendered, expected, "prompt drifted from {}", path.display());
}

fn shipped_space() -> lama::taxonomy::LabelSpace {
    Taxonomy::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/nationalities.tsv"))
        .expect("shipped taxonomy loads")
        .label_space(Granularity::Nationality)
}

#[test]
fn person_agent_system_prompt_is_pinned() {
    let space = shipped_space();
    check(
        "person_system.txt",
        &prompts::person_recall_system(&space, 4),
    );
}

#[test]
fn media_agent_system_prompt_is_pinned() {
    let space = shipped_space();
    check("media_system.txt", &prompts::media_recall_system(&space, 4));
}

#[test]
fn completion_system_prompt_is_pinned() {
    let space = shipped_space();
    check(
        "completion_system.txt",
        &prompts::completion_system(&space, 5),
    );
}

#[test]
fn direct_system_prompt_is_pinned() {
    let space = shipped_space();
    check("direct_system.txt", &prompts::direct_system(&space, 5));
}

#[test]
fn hallucination_guard_sentence_is_verbatim() {
    let space = shipped_space();
    let sentence = "Be honest - only include people you are CONFIDENT actually exist.";
    assert!(prompts::person_recall_system(&space, 4).ends_with(sentence));
    assert!(prompts::media_recall_system(&space, 4).ends_with(sentence));
}

#[test]
fn user_prompts_are_pinned() {
    let space = shipped_space();
    assert_eq!(
        prompts::recall_user("Tanaka"),
        "Name: Tanaka\n\nRecall real people with this name."
    );
    assert_eq!(prompts::direct_user("Tanaka"), "Name: Tanaka");
    assert_eq!(
        prompts::completion_user_fallback("Tanaka", "Japanese", &space, 5),
        "Name: Tanaka\nRank 1 (confirmed): Japanese\n\nSuggest 4 more nationalities for ranks 2-5."
    );
    assert_eq!(
        prompts::completion_user_with_recall(
            "Tanaka",
            r#"[{"name":"Kakuei Tanaka","nationality":"Japanese"}]"#,
            "Japanese",
            &space,
            5
        ),
        "Name: Tanaka\n\nRecalled people: [{\"name\":\"Kakuei Tanaka\",\"nationality\":\"Japanese\"}]\nRank 1 (from recall): Japanese\n\nSuggest 4 more nationalities for ranks 2-5."
    );
}
