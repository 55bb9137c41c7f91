//! Answer normalization and extraction.
//!
//! Correctness is judged by string equality after [`canonicalize_answer`],
//! not by symbolic equivalence.

use std::sync::LazyLock;

use regex::Regex;

static NUMERIC_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"-?\d[\d,]*(?:\.\d+)?").expect("valid regex"));

const TERMINAL_MARKER: &str = "#### ";
const FINAL_ANSWER_MARKER: &str = "final answer:";

/// Normalizes a raw answer string. Total and idempotent.
pub fn canonicalize_answer(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let mut s: &str = &lowered;
    loop {
        let before = s.len();
        s = s.trim();
        s = s.trim_end_matches(['.', ',']);
        s = s.trim_matches('$');
        if s.len() == before {
            break;
        }
    }
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ");
    normalize_number(&collapsed).unwrap_or(collapsed)
}

/// Re-renders `s` in normalized decimal form if it is a plain number
/// (optional sign, optional comma thousands grouping, optional fraction).
fn normalize_number(s: &str) -> Option<String> {
    let (negative, body) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    if let Some(f) = frac_part {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    let digits = if int_part.contains(',') {
        let groups: Vec<&str> = int_part.split(',').collect();
        let first_ok = (1..=3).contains(&groups[0].len());
        let rest_ok = groups[1..].iter().all(|g| g.len() == 3);
        if !first_ok || !rest_ok {
            return None;
        }
        groups.concat()
    } else {
        int_part.to_string()
    };
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if digits.is_empty() && frac_part.is_none() {
        return None;
    }

    let int_trimmed = digits.trim_start_matches('0');
    let int_norm = if int_trimmed.is_empty() { "0" } else { int_trimmed };
    let frac_norm = frac_part.map(|f| f.trim_end_matches('0')).unwrap_or("");

    let mut out = String::with_capacity(s.len());
    let is_zero = int_norm == "0" && frac_norm.is_empty();
    if negative && !is_zero {
        out.push('-');
    }
    out.push_str(int_norm);
    if !frac_norm.is_empty() {
        out.push('.');
        out.push_str(frac_norm);
    }
    Some(out)
}

/// Pulls the final answer out of generated reasoning, canonicalized.
///
/// Priority: text after the last `"#### "` (to end of line), then text after
/// the last case-insensitive `"final answer:"` (to end of line), then the
/// last numeric token. Returns an empty string when nothing is found.
pub fn extract_final_answer(text: &str) -> String {
    if let Some(pos) = text.rfind(TERMINAL_MARKER) {
        return canonicalize_answer(first_line(&text[pos + TERMINAL_MARKER.len()..]));
    }
    if let Some(pos) = rfind_ascii_ci(text, FINAL_ANSWER_MARKER) {
        return canonicalize_answer(first_line(&text[pos + FINAL_ANSWER_MARKER.len()..]));
    }
    if let Some(m) = NUMERIC_TOKEN.find_iter(text).last() {
        return canonicalize_answer(m.as_str().trim_end_matches(','));
    }
    String::new()
}

fn first_line(s: &str) -> &str {
    s.split('\n').next().unwrap_or("")
}

/// Byte offset of the last ASCII-case-insensitive occurrence of `needle`.
fn rfind_ascii_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.len() > h.len() {
        return None;
    }
    (0..=h.len() - n.len())
        .rev()
        .find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}
