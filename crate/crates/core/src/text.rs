//! Tokenization and small text utilities shared by every module.
//!
//! All text (entity descriptions, queries, type labels) goes through the same
//! tokenizer: lowercase, split on any run of non-alphanumeric characters, no
//! stemming.

use std::path::Path;

use crate::error::{Error, Result};

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Splits a CamelCase identifier into a lowercase, space-separated label.
///
/// `MeanOfTransportation` becomes `mean of transportation`; runs of capitals
/// are kept together (`NCAATeamSeason` becomes `ncaa team season`).
pub fn split_camel_case(ident: &str) -> String {
    let chars: Vec<char> = ident.chars().collect();
    let mut words: Vec<String> = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphanumeric() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            continue;
        }
        if c.is_uppercase() && !current.is_empty() {
            let prev = chars[i - 1];
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            if prev.is_lowercase() || prev.is_numeric() || (prev.is_uppercase() && next_lower) {
                words.push(std::mem::take(&mut current));
            }
        }
        current.extend(c.to_lowercase());
    }
    if !current.is_empty() {
        words.push(current);
    }
    words.join(" ")
}

/// Function words excluded from content-word and noun sets.
pub const FUNCTION_WORDS: &[&str] = &[
    // articles and determiners
    "a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every", "all",
    "both", "either", "neither", "no", "such", "another", "other", "much", "many", "more", "most",
    "few", "several",
    // prepositions
    "about", "above", "across", "after", "against", "along", "among", "around", "at", "before",
    "behind", "below", "beneath", "beside", "between", "beyond", "by", "despite", "down", "during",
    "except", "for", "from", "in", "inside", "into", "near", "of", "off", "on", "onto", "out",
    "outside", "over", "past", "since", "through", "throughout", "to", "toward", "towards",
    "under", "until", "up", "upon", "via", "with", "within", "without", "per",
    // pronouns
    "i", "me", "my", "mine", "myself", "you", "your", "yours", "yourself", "he", "him", "his",
    "himself", "she", "her", "hers", "herself", "it", "its", "itself", "we", "us", "our", "ours",
    "ourselves", "they", "them", "their", "theirs", "themselves", "who", "whom", "whose",
    "which", "what", "whatever", "whoever", "someone", "something", "anyone", "anything",
    // auxiliaries and modals
    "be", "am", "is", "are", "was", "were", "been", "being", "have", "has", "had", "having",
    "do", "does", "did", "doing", "will", "would", "shall", "should", "can", "could", "may",
    "might", "must",
    // conjunctions and question words
    "and", "or", "but", "nor", "so", "yet", "if", "then", "than", "because", "although",
    "though", "while", "whereas", "unless", "whether", "as", "where", "when", "why", "how",
    // misc particles
    "not", "there", "here", "also", "very", "just", "only",
];

pub fn is_function_word(token: &str) -> bool {
    FUNCTION_WORDS.contains(&token)
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Reads a text file and runs `parse`, naming the file in parse errors.
pub(crate) fn load_with<T>(path: &Path, parse: impl FnOnce(&str) -> Result<T>) -> Result<T> {
    let text = read_to_string(path)?;
    parse(&text).map_err(|e| e.with_origin(&path.display().to_string()))
}

/// Tab-separated records, skipping blank lines and `#` comments.
///
/// Yields 1-based line numbers with the split fields.
pub(crate) fn tsv_records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').collect()))
        }
    })
}
