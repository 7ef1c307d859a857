//! Longest-match phrase scanning of free text against symbol names.
//!
//! Symbols are whitespace-free (`blue_cup`); in text they appear as words
//! (`blue cup`). Matching is case-insensitive, word-aligned, tolerates a
//! trailing plural `s`, and prefers names with more words.

/// Split text into lowercase alphanumeric words.
pub fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

fn name_words(name: &str) -> Vec<&str> {
    name.split('_').filter(|w| !w.is_empty()).collect()
}

fn word_matches(text_word: &str, name_word: &str) -> bool {
    text_word == name_word
        || text_word
            .strip_suffix('s')
            .is_some_and(|stem| stem == name_word)
        || text_word
            .strip_suffix("es")
            .is_some_and(|stem| stem == name_word)
}

/// Names mentioned in `text`, in order of first appearance, without duplicates.
pub fn scan<'a, I>(text: &str, names: I) -> Vec<String>
where
    I: IntoIterator<Item = &'a String>,
{
    let mut candidates: Vec<(&String, Vec<&str>)> = names
        .into_iter()
        .map(|n| (n, name_words(n)))
        .filter(|(_, w)| !w.is_empty())
        .collect();
    // Longest phrases first; ties broken by name for determinism.
    candidates.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(b.0)));

    let text_words = words(text);
    let mut found: Vec<String> = Vec::new();
    let mut i = 0;
    while i < text_words.len() {
        let hit = candidates.iter().find(|(_, nw)| {
            i + nw.len() <= text_words.len()
                && nw
                    .iter()
                    .zip(&text_words[i..i + nw.len()])
                    .all(|(n, t)| word_matches(t, n))
        });
        match hit {
            Some((name, nw)) => {
                if !found.iter().any(|f| f == *name) {
                    found.push((*name).clone());
                }
                i += nw.len();
            }
            None => i += 1,
        }
    }
    found
}

/// Whether `text` contains any of the given keyword phrases as whole words.
pub fn contains_phrase(text_words: &[String], phrase: &str) -> bool {
    let p = words(phrase);
    if p.is_empty() || p.len() > text_words.len() {
        return false;
    }
    text_words.windows(p.len()).any(|w| w == p.as_slice())
}
