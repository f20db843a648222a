//! Word-level matching of object categories inside free text.

use crate::scene::{ObjectId, SceneModel};

/// Lowercase alphanumeric words; everything else separates words.
pub fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Singular/plural tolerant word equality: one side equals the other with a
/// trailing "s" or "es" removed.
pub fn same_word(a: &str, b: &str) -> bool {
    fn strips_to(long: &str, short: &str) -> bool {
        long.strip_suffix("es") == Some(short) || long.strip_suffix('s') == Some(short)
    }
    a == b || strips_to(a, b) || strips_to(b, a)
}

/// Whether the word sequence `phrase` occurs in `text` starting at `at`.
/// Only the last word of the phrase is plural tolerant.
fn phrase_at(text: &[String], phrase: &[String], at: usize) -> bool {
    if phrase.is_empty() || at + phrase.len() > text.len() {
        return false;
    }
    let last = phrase.len() - 1;
    phrase.iter().enumerate().all(|(i, w)| {
        let t = &text[at + i];
        if i == last {
            same_word(w, t)
        } else {
            w == t
        }
    })
}

/// First word position at which `phrase` occurs.
pub fn find_phrase(text: &[String], phrase: &[String]) -> Option<usize> {
    (0..text.len()).find(|&at| phrase_at(text, phrase, at))
}

/// Ids of all objects whose category occurs in `text`, ascending.
pub fn detect_mentions(text: &str, scene: &SceneModel) -> Vec<ObjectId> {
    let tokens = words(text);
    let mut hits: Vec<ObjectId> = scene
        .categories()
        .iter()
        .filter(|cat| find_phrase(&tokens, &words(cat)).is_some())
        .flat_map(|cat| scene.instances_of(cat).map(|o| o.id))
        .collect();
    hits.sort_unstable();
    hits.dedup();
    hits
}

/// Resolves a noun phrase to a scene category. Longer categories win, so
/// "kitchen counter" is preferred over "counter" when both exist.
pub fn match_category(phrase: &str, categories: &[String]) -> Option<String> {
    let tokens = words(phrase);
    let mut ranked: Vec<(usize, &String)> = categories.iter().map(|c| (words(c).len(), c)).collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
    ranked
        .into_iter()
        .find(|(_, cat)| find_phrase(&tokens, &words(cat)).is_some())
        .map(|(_, cat)| cat.clone())
}
