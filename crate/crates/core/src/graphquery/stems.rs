//! Porter (1980) stemming and commit-verb counts.

use std::collections::HashMap;

use super::ArchiveGraph;

/// Messages of this many bytes or more are ignored by [`top_commit_stems`].
pub const MAX_MESSAGE_LEN: usize = 1_000_000;

/// First whitespace-delimited token of a message, lossily decoded.
pub fn first_token(message: &[u8]) -> Option<String> {
    if message.len() >= MAX_MESSAGE_LEN {
        return None;
    }
    message
        .split(|b| b.is_ascii_whitespace())
        .find(|t| !t.is_empty())
        .map(|t| String::from_utf8_lossy(t).into_owned())
}

/// The `k` most frequent stems of first message words, by count
/// descending then stem ascending.
pub fn top_commit_stems(graph: &ArchiveGraph, k: usize) -> Vec<(String, u64)> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for (_, info) in graph.revision_indexes() {
        if info.message_len >= MAX_MESSAGE_LEN {
            continue;
        }
        let Some(word) = &info.first_word else { continue };
        let stem = stem_word(word);
        if !stem.is_empty() {
            *counts.entry(stem).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

/// Lowercases `word` and applies the Porter algorithm.
pub fn stem_word(word: &str) -> String {
    let mut w: Vec<char> = word.to_lowercase().chars().collect();
    step1a(&mut w);
    step1b(&mut w);
    step1c(&mut w);
    step2(&mut w);
    step3(&mut w);
    step4(&mut w);
    step5a(&mut w);
    step5b(&mut w);
    w.into_iter().collect()
}

fn is_consonant(w: &[char], i: usize) -> bool {
    match w[i] {
        'a' | 'e' | 'i' | 'o' | 'u' => false,
        'y' => i == 0 || !is_consonant(w, i - 1),
        _ => true,
    }
}

/// m in [C](VC)^m[V] for the first `len` letters.
fn measure(w: &[char], len: usize) -> usize {
    let mut m = 0;
    let mut i = 0;
    while i < len && is_consonant(w, i) {
        i += 1;
    }
    loop {
        while i < len && !is_consonant(w, i) {
            i += 1;
        }
        if i >= len {
            return m;
        }
        while i < len && is_consonant(w, i) {
            i += 1;
        }
        m += 1;
    }
}

fn has_vowel(w: &[char], len: usize) -> bool {
    (0..len).any(|i| !is_consonant(w, i))
}

fn double_consonant(w: &[char], len: usize) -> bool {
    len >= 2 && w[len - 1] == w[len - 2] && is_consonant(w, len - 1)
}

/// *o: stem ends consonant-vowel-consonant, the last not w, x or y.
fn cvc(w: &[char], len: usize) -> bool {
    len >= 3
        && is_consonant(w, len - 3)
        && !is_consonant(w, len - 2)
        && is_consonant(w, len - 1)
        && !matches!(w[len - 1], 'w' | 'x' | 'y')
}

fn ends(w: &[char], suffix: &str) -> bool {
    let n = suffix.chars().count();
    w.len() >= n && w[w.len() - n..].iter().copied().eq(suffix.chars())
}

fn replace(w: &mut Vec<char>, suffix_len: usize, with: &str) {
    w.truncate(w.len() - suffix_len);
    w.extend(with.chars());
}

/// Applies the longest matching rule of a step when the stem's measure
/// exceeds `min_m`. Returns whether any suffix matched.
fn rule_table(w: &mut Vec<char>, rules: &[(&str, &str)], min_m: usize) -> bool {
    let mut best: Option<(&str, &str)> = None;
    for &(suffix, with) in rules {
        if ends(w, suffix) && best.is_none_or(|(s, _)| suffix.len() > s.len()) {
            best = Some((suffix, with));
        }
    }
    let Some((suffix, with)) = best else { return false };
    let n = suffix.chars().count();
    if measure(w, w.len() - n) > min_m {
        replace(w, n, with);
    }
    true
}

fn step1a(w: &mut Vec<char>) {
    if ends(w, "sses") || ends(w, "ies") {
        w.truncate(w.len() - 2);
    } else if ends(w, "ss") {
    } else if ends(w, "s") {
        w.pop();
    }
}

fn step1b(w: &mut Vec<char>) {
    if ends(w, "eed") {
        if measure(w, w.len() - 3) > 0 {
            w.pop();
        }
        return;
    }
    let cut = if ends(w, "ed") && has_vowel(w, w.len() - 2) {
        2
    } else if ends(w, "ing") && has_vowel(w, w.len() - 3) {
        3
    } else {
        return;
    };
    w.truncate(w.len() - cut);
    if ends(w, "at") || ends(w, "bl") || ends(w, "iz") {
        w.push('e');
    } else if double_consonant(w, w.len()) && !matches!(w[w.len() - 1], 'l' | 's' | 'z') {
        w.pop();
    } else if measure(w, w.len()) == 1 && cvc(w, w.len()) {
        w.push('e');
    }
}

fn step1c(w: &mut [char]) {
    let n = w.len();
    if n > 0 && w[n - 1] == 'y' && has_vowel(w, n - 1) {
        w[n - 1] = 'i';
    }
}

fn step2(w: &mut Vec<char>) {
    const RULES: &[(&str, &str)] = &[
        ("ational", "ate"),
        ("tional", "tion"),
        ("enci", "ence"),
        ("anci", "ance"),
        ("izer", "ize"),
        ("abli", "able"),
        ("alli", "al"),
        ("entli", "ent"),
        ("eli", "e"),
        ("ousli", "ous"),
        ("ization", "ize"),
        ("ation", "ate"),
        ("ator", "ate"),
        ("alism", "al"),
        ("iveness", "ive"),
        ("fulness", "ful"),
        ("ousness", "ous"),
        ("aliti", "al"),
        ("iviti", "ive"),
        ("biliti", "ble"),
    ];
    rule_table(w, RULES, 0);
}

fn step3(w: &mut Vec<char>) {
    const RULES: &[(&str, &str)] = &[
        ("icate", "ic"),
        ("ative", ""),
        ("alize", "al"),
        ("iciti", "ic"),
        ("ical", "ic"),
        ("ful", ""),
        ("ness", ""),
    ];
    rule_table(w, RULES, 0);
}

fn step4(w: &mut Vec<char>) {
    const SUFFIXES: &[&str] = &[
        "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion", "ou", "ism", "ate",
        "iti", "ous", "ive", "ize",
    ];
    let Some(suffix) = SUFFIXES.iter().filter(|s| ends(w, s)).max_by_key(|s| s.len()) else {
        return;
    };
    let stem = w.len() - suffix.len();
    if measure(w, stem) <= 1 {
        return;
    }
    if *suffix == "ion" && !(stem > 0 && matches!(w[stem - 1], 's' | 't')) {
        return;
    }
    w.truncate(stem);
}

fn step5a(w: &mut Vec<char>) {
    if !ends(w, "e") {
        return;
    }
    let stem = w.len() - 1;
    let m = measure(w, stem);
    if m > 1 || (m == 1 && !cvc(w, stem)) {
        w.pop();
    }
}

fn step5b(w: &mut Vec<char>) {
    let n = w.len();
    if measure(w, n) > 1 && double_consonant(w, n) && w[n - 1] == 'l' {
        w.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphquery::build_graph;
    use crate::graphquery::tests::{blob, dir, fixture, rev};

    #[test]
    fn stems_of_common_commit_verbs() {
        assert_eq!(stem_word("Updated"), "updat");
        assert_eq!(stem_word("merge"), "merg");
        assert_eq!(stem_word("fixing"), "fix");
        assert_eq!(stem_word("Add"), "add");
        assert_eq!(stem_word(""), "");
        assert_eq!(stem_word("s"), "");
        assert_eq!(stem_word("is"), "i");
    }

    #[test]
    fn porter_1980_examples() {
        let cases = [
            ("caresses", "caress"),
            ("ponies", "poni"),
            ("caress", "caress"),
            ("cats", "cat"),
            ("feed", "feed"),
            ("agreed", "agre"),
            ("plastered", "plaster"),
            ("bled", "bled"),
            ("motoring", "motor"),
            ("sing", "sing"),
            ("conflated", "conflat"),
            ("troubled", "troubl"),
            ("sized", "size"),
            ("hopping", "hop"),
            ("tanned", "tan"),
            ("falling", "fall"),
            ("hissing", "hiss"),
            ("fizzed", "fizz"),
            ("failing", "fail"),
            ("filing", "file"),
            ("happy", "happi"),
            ("sky", "sky"),
            ("relational", "relat"),
            ("conditional", "condit"),
            ("valenci", "valenc"),
            ("digitizer", "digit"),
            ("generalization", "gener"),
            ("oscillator", "oscil"),
            ("hopefulness", "hope"),
            ("formality", "formal"),
            ("sensibility", "sensibl"),
            ("triplicate", "triplic"),
            ("electrical", "electr"),
            ("goodness", "good"),
            ("revival", "reviv"),
            ("allowance", "allow"),
            ("adjustment", "adjust"),
            ("adoption", "adopt"),
            ("controll", "control"),
            ("roll", "roll"),
            ("probate", "probat"),
            ("rate", "rate"),
            ("cease", "ceas"),
        ];
        for (word, stem) in cases {
            assert_eq!(stem_word(word), stem, "{word}");
        }
    }

    #[test]
    fn first_token_splits_on_whitespace() {
        assert_eq!(first_token(b"  Fix bug\n").as_deref(), Some("Fix"));
        assert_eq!(first_token(b"Merge\n\nbody").as_deref(), Some("Merge"));
        assert_eq!(first_token(b" \n\t"), None);
        assert_eq!(first_token(&vec![b'a'; MAX_MESSAGE_LEN]), None);
    }

    #[test]
    fn counts_and_orders_stems() {
        let mut f = fixture();
        let b = blob(&mut f.store, b"x");
        let d = dir(&mut f.store, &[("x", b)]);
        for (i, msg) in ["Update deps", "updated x", "merge y", "fix z"].iter().enumerate() {
            rev(&mut f.store, d, &[], i as i64, msg);
        }
        let g = build_graph(&f.store).unwrap();
        assert_eq!(
            top_commit_stems(&g, 3),
            vec![
                ("updat".to_string(), 2),
                ("fix".to_string(), 1),
                ("merg".to_string(), 1)
            ]
        );
        assert_eq!(top_commit_stems(&g, 10).len(), 3);
    }
}
