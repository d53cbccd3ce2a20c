//! Tolerant extraction of the first JSON array from model output.
//!
//! Models wrap arrays in prose, code fences, or both. The extractor scans for
//! the first balanced `[...]` block (string- and escape-aware) that parses as
//! JSON and returns it; absence is a value, not an error.

use serde_json::Value;

/// Locate and parse the first well-formed JSON array in `text`.
pub fn extract_json_array(text: &str) -> Option<Vec<Value>> {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(offset) = text[start..].find('[') {
        let open = start + offset;
        if let Some(end) = balanced_end(bytes, open) {
            let candidate = &text[open..=end];
            if let Ok(Value::Array(items)) = serde_json::from_str::<Value>(candidate) {
                return Some(items);
            }
        }
        start = open + 1;
    }
    None
}

/// Index of the `]` closing the bracket at `open`, honoring strings, escapes,
/// and nested objects/arrays. `None` when the block never closes.
fn balanced_end(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'[' | b'{' => depth += 1,
            b']' | b'}' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return if b == b']' { Some(i) } else { None };
                }
            }
            _ => {}
        }
    }
    None
}
