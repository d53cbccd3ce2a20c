//! Prompt construction for the four pipeline calls: the two recall agents,
//! rank-2..K completion, and the direct-prediction fallback.
//!
//! The system prompts are fixed templates with two substitution points: the
//! valid-label list of the active [`LabelSpace`] and the recall/rank limits.
//! At nationality granularity with the default limits (M = 4, K = 5) the
//! rendered text is pinned by golden-file tests; region and continent runs
//! substitute the attribute noun. User prompts carry only the input name plus
//! the minimal per-call context.

use crate::taxonomy::LabelSpace;

/// System prompt for the general famous-person recall agent.
pub fn person_recall_system(space: &LabelSpace, max_recall: usize) -> String {
    let head = "You are recalling real people based on a given name.\n\
                Think of REAL, ACTUAL famous people who have this exact name or a very similar name.";
    recall_system_body(head, space, max_recall)
}

/// System prompt for the sports/entertainment recall agent.
pub fn media_recall_system(space: &LabelSpace, max_recall: usize) -> String {
    let head = "You are recalling athletes and entertainers based on a given name.\n\
                Think of REAL people from sports, movies, music, or TV who have this exact name or similar.";
    recall_system_body(head, space, max_recall)
}

fn recall_system_body(head: &str, space: &LabelSpace, max_recall: usize) -> String {
    let g = space.granularity();
    format!(
        "{head}\n\
         \n\
         For each person:\n\
         1. Full name\n\
         2. {title} (from valid list only)\n\
         \n\
         Valid {plural}: {labels}\n\
         \n\
         Output JSON array of up to {max_recall} people:\n\
         [{{\"name\": \"Full Name\", \"{noun}\": \"{title}\"}}]\n\
         \n\
         Be honest - only include people you are CONFIDENT actually exist.",
        title = g.noun_title(),
        plural = g.noun_plural(),
        noun = g.noun(),
        labels = space.prompt_label_list(),
    )
}

/// User prompt shared by both recall agents.
pub fn recall_user(name: &str) -> String {
    format!("Name: {name}\n\nRecall real people with this name.")
}

/// System prompt for the rank-2..K completion call.
pub fn completion_system(space: &LabelSpace, top_k: usize) -> String {
    let g = space.granularity();
    let more = top_k - 1;
    format!(
        "Given a name and the most likely {noun} (rank 1), suggest {more} more {plural} that could also be possible.\n\
         \n\
         Consider:\n\
         1. Culturally/geographically similar countries\n\
         2. Countries where this name pattern might also appear\n\
         3. Historical migration patterns\n\
         \n\
         The rank 1 {noun} is already determined. Suggest ranks 2-{top_k}.\n\
         \n\
         Valid {plural}: {labels}\n\
         Output a JSON array of exactly {more} {plural} for ranks 2-{top_k}.",
        noun = g.noun(),
        plural = g.noun_plural(),
        labels = space.prompt_label_list(),
    )
}

/// Completion user prompt when recall produced evidence: includes the
/// recalled people serialized as JSON and the vote-confirmed rank 1.
pub fn completion_user_with_recall(
    name: &str,
    recalled_json: &str,
    top1: &str,
    space: &LabelSpace,
    top_k: usize,
) -> String {
    let more = top_k - 1;
    format!(
        "Name: {name}\n\
         \n\
         Recalled people: {recalled_json}\n\
         Rank 1 (from recall): {top1}\n\
         \n\
         Suggest {more} more {plural} for ranks 2-{top_k}.",
        plural = space.granularity().noun_plural(),
    )
}

/// Completion user prompt on the failed-recall path: no recalled people
/// exist, so only the confirmed rank 1 is presented.
pub fn completion_user_fallback(
    name: &str,
    top1: &str,
    space: &LabelSpace,
    top_k: usize,
) -> String {
    let more = top_k - 1;
    format!(
        "Name: {name}\n\
         Rank 1 (confirmed): {top1}\n\
         \n\
         Suggest {more} more {plural} for ranks 2-{top_k}.",
        plural = space.granularity().noun_plural(),
    )
}

/// System prompt for the two-stage direct prediction used when both agents
/// recall nobody.
pub fn direct_system(space: &LabelSpace, top_k: usize) -> String {
    let g = space.granularity();
    format!(
        "You are an expert in identifying the {noun} of people based on their names.\n\
         Predict the TOP {top_k} most likely {plural} for the given name.\n\
         \n\
         Valid {plural}: {labels}\n\
         Output a JSON array of {top_k} {plural}.",
        noun = g.noun(),
        plural = g.noun_plural(),
        labels = space.prompt_label_list(),
    )
}

/// User prompt for direct prediction: just the name.
pub fn direct_user(name: &str) -> String {
    format!("Name: {name}")
}
