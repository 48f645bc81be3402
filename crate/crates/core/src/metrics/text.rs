use std::collections::{BTreeMap, BTreeSet};

/// Words that end with a period without ending a sentence.
pub const ABBREVIATIONS: [&str; 19] = [
    "mr", "mrs", "ms", "dr", "prof", "inc", "corp", "co", "ltd", "llc", "jr", "sr", "st", "vs",
    "etc", "no", "e.g", "i.e", "u.s",
];

/// Lowercase and split on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Split at line breaks and at `.`, `?` or `!` followed by whitespace and
/// an uppercase letter, unless the word before the period is an abbreviation.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        let mut start = 0;
        for (i, &(pos, c)) in chars.iter().enumerate() {
            if !matches!(c, '.' | '?' | '!') {
                continue;
            }
            let mut j = i + 1;
            if j >= chars.len() || !chars[j].1.is_whitespace() {
                continue;
            }
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            if j >= chars.len() || !chars[j].1.is_uppercase() {
                continue;
            }
            if c == '.' && is_abbreviation(&line[start..pos]) {
                continue;
            }
            push_trimmed(&mut out, &line[start..pos + c.len_utf8()]);
            start = chars[j].0;
        }
        push_trimmed(&mut out, &line[start..]);
    }
    out
}

fn is_abbreviation(before: &str) -> bool {
    let word = before.rsplit(char::is_whitespace).next().unwrap_or("");
    let word = word
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
        || (word.chars().count() == 1 && word.chars().all(char::is_alphabetic))
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

/// n-gram counts of `tokens`.
pub fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut m = BTreeMap::new();
    if n > 0 {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Distinct n-grams for n = 1..=max_n.
pub fn ngram_set(tokens: &[String], max_n: usize) -> BTreeSet<&[String]> {
    (1..=max_n).flat_map(|n| tokens.windows(n)).collect()
}
