use std::fmt::Write;

use super::{PromptVariant, Stage};
use crate::dataset::{alphabetical_order, Entry};

const LITERAL_INSTRUCTION: &str =
    "This is a multiple-choice question. Answer it by repeating one of the options, exactly and literally.";
const INDEX_INSTRUCTION: &str = "This is a multiple-choice question. Select one of the options by providing its index.";
const CLOSING: &str = "Answer with one of the options.";

/// Original option indices in display order: alphabetical, then rotated left
/// by `rotation_offset`.
pub fn displayed_order(entry: &Entry, rotation_offset: usize) -> Vec<usize> {
    let mut order = alphabetical_order(&entry.options);
    if !order.is_empty() {
        let shift = rotation_offset % order.len();
        order.rotate_left(shift);
    }
    order
}

/// Label of display position `pos` (0-based): `1, 2, ..` or `a, b, .., z, aa, ab, ..`.
pub fn index_label(stage: Stage, pos: usize) -> String {
    match stage {
        Stage::Literal => String::new(),
        Stage::NumericIndex => (pos + 1).to_string(),
        Stage::LetterIndex => {
            let mut n = pos + 1;
            let mut out = Vec::new();
            while n > 0 {
                n -= 1;
                out.push(b'a' + (n % 26) as u8);
                n /= 26;
            }
            out.reverse();
            String::from_utf8(out).expect("ascii")
        }
    }
}

fn parse_label(token: &str, stage: Stage, n: usize) -> Option<usize> {
    let token = token.strip_suffix(['.', ')']).unwrap_or(token);
    if token.is_empty() {
        return None;
    }
    let pos = match stage {
        Stage::Literal => return None,
        Stage::NumericIndex => {
            if !token.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            token.parse::<usize>().ok()?.checked_sub(1)?
        }
        Stage::LetterIndex => {
            if !token.bytes().all(|b| b.is_ascii_alphabetic()) || token.len() > 4 {
                return None;
            }
            let mut v = 0usize;
            for b in token.to_ascii_lowercase().bytes() {
                v = v * 26 + (b - b'a' + 1) as usize;
            }
            v - 1
        }
    };
    (pos < n).then_some(pos)
}

fn render_question(out: &mut String, entry: &Entry, stage: Stage, order: &[usize]) {
    let _ = writeln!(out, "{}", entry.question);
    out.push_str("Available options:\n");
    for (pos, &i) in order.iter().enumerate() {
        match stage {
            Stage::Literal => {
                let _ = writeln!(out, "{}", entry.options[i]);
            }
            _ => {
                let _ = writeln!(out, "{}. {}", index_label(stage, pos), entry.options[i]);
            }
        }
    }
}

fn instruction(stage: Stage, k: Option<usize>) -> (String, String) {
    match (stage, k) {
        (_, Some(k)) => (
            format!(
                "This is a multiple-choice question. Select {k} different options by providing their indices, separated by commas."
            ),
            format!("Answer with {k} of the options."),
        ),
        (Stage::Literal, None) => (LITERAL_INSTRUCTION.into(), CLOSING.into()),
        (_, None) => (INDEX_INSTRUCTION.into(), CLOSING.into()),
    }
}

fn shot_answer(entry: &Entry, stage: Stage, order: &[usize], k: Option<usize>) -> String {
    let pos_of = |i: usize| order.iter().position(|&o| o == i).expect("option is displayed");
    match (stage, k) {
        (Stage::Literal, None) => entry.correct_option().to_string(),
        (_, None) => index_label(stage, pos_of(entry.correct_index)),
        (_, Some(k)) => {
            let first = pos_of(entry.correct_index);
            let mut picks = vec![first];
            picks.extend((0..order.len()).filter(|&p| p != first).take(k.saturating_sub(1)));
            picks.iter().map(|&p| index_label(stage, p)).collect::<Vec<_>>().join(", ")
        }
    }
}

/// The user-turn text for one stage of one attempt.
pub fn prompt_body(entry: &Entry, stage: Stage, rotation_offset: usize, variant: &PromptVariant) -> String {
    let k = variant.k_set();
    let (head, tail) = instruction(stage, k);
    let mut out = String::new();
    if let Some(preamble) = &variant.helpful_preamble {
        out.push_str(preamble.trim_end());
        out.push_str("\n\n");
    }
    if let Some(shots) = &variant.shot_entries {
        for shot in shots {
            let order = displayed_order(shot, 0);
            out.push_str(&head);
            out.push('\n');
            render_question(&mut out, shot, stage, &order);
            let _ = writeln!(out, "{tail}\nAnswer: {}\n", shot_answer(shot, stage, &order, k));
        }
    }
    out.push_str(&head);
    out.push('\n');
    render_question(&mut out, entry, stage, &displayed_order(entry, rotation_offset));
    out.push_str(&tail);
    out
}

/// The full prompt in `USER: .. ASSISTANT:` layout, as sent to completion-style models.
pub fn build_prompt(entry: &Entry, stage: Stage, rotation_offset: usize, variant: &PromptVariant) -> String {
    format!("USER: {}\nASSISTANT:", prompt_body(entry, stage, rotation_offset, variant))
}

/// Trims surrounding whitespace and keeps only the first line.
pub fn normalize_response(raw: &str) -> String {
    raw.trim().lines().next().unwrap_or("").trim_end().to_string()
}

/// Maps a normalised response to the original index of the chosen option.
///
/// The literal stage needs the whole response to equal an option, falling
/// back to a case-insensitive comparison when that identifies exactly one
/// option. Index stages need a bare label such as `2`, `2.` or `b)`.
pub fn match_option(normalized: &str, entry: &Entry, stage: Stage, rotation_offset: usize) -> Option<usize> {
    match stage {
        Stage::Literal => {
            if let Some(i) = entry.options.iter().position(|o| o == normalized) {
                return Some(i);
            }
            let folded = normalized.to_lowercase();
            let mut hits = entry.options.iter().enumerate().filter(|(_, o)| o.to_lowercase() == folded);
            match (hits.next(), hits.next()) {
                (Some((i, _)), None) => Some(i),
                _ => None,
            }
        }
        _ => {
            let pos = parse_label(normalized, stage, entry.options.len())?;
            Some(displayed_order(entry, rotation_offset)[pos])
        }
    }
}

/// Parses a comma or space separated list of exactly `k` distinct labels.
/// Returns the sorted original option indices.
pub fn match_top_k(normalized: &str, entry: &Entry, stage: Stage, rotation_offset: usize, k: usize) -> Option<Vec<usize>> {
    if stage == Stage::Literal {
        return None;
    }
    let order = displayed_order(entry, rotation_offset);
    let tokens: Vec<&str> = normalized.split([',', ' ', ';']).filter(|t| !t.is_empty()).collect();
    if tokens.len() != k {
        return None;
    }
    let mut picked = Vec::with_capacity(k);
    for t in tokens {
        let i = order[parse_label(t, stage, order.len())?];
        if picked.contains(&i) {
            return None;
        }
        picked.push(i);
    }
    picked.sort_unstable();
    Some(picked)
}
