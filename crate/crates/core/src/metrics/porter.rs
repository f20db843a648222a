//! The original Porter (1980) suffix-stripping stemmer for lowercase ASCII words.

fn is_consonant(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(w, i - 1),
        _ => true,
    }
}

/// Number of VC sequences in `w[..len]`.
fn measure(w: &[u8], len: usize) -> usize {
    let mut m = 0;
    let mut i = 0;
    while i < len && is_consonant(w, i) {
        i += 1;
    }
    while i < len {
        while i < len && !is_consonant(w, i) {
            i += 1;
        }
        if i >= len {
            break;
        }
        while i < len && is_consonant(w, i) {
            i += 1;
        }
        m += 1;
    }
    m
}

fn has_vowel(w: &[u8], len: usize) -> bool {
    (0..len).any(|i| !is_consonant(w, i))
}

fn ends_double_consonant(w: &[u8], len: usize) -> bool {
    len >= 2 && w[len - 1] == w[len - 2] && is_consonant(w, len - 1)
}

/// consonant-vowel-consonant ending where the last consonant is not w, x or y.
fn ends_cvc(w: &[u8], len: usize) -> bool {
    len >= 3
        && is_consonant(w, len - 1)
        && !is_consonant(w, len - 2)
        && is_consonant(w, len - 3)
        && !matches!(w[len - 1], b'w' | b'x' | b'y')
}

struct Word(Vec<u8>);

impl Word {
    fn ends(&self, suffix: &str) -> bool {
        self.0.ends_with(suffix.as_bytes())
    }

    fn stem_len(&self, suffix: &str) -> usize {
        self.0.len() - suffix.len()
    }

    fn replace(&mut self, suffix: &str, with: &str) {
        let n = self.stem_len(suffix);
        self.0.truncate(n);
        self.0.extend_from_slice(with.as_bytes());
    }

    /// Replaces `suffix` when the remaining stem has measure > `min_m`.
    fn replace_if_m(&mut self, suffix: &str, with: &str, min_m: usize) -> bool {
        if !self.ends(suffix) {
            return false;
        }
        if measure(&self.0, self.stem_len(suffix)) > min_m {
            self.replace(suffix, with);
        }
        true
    }
}

pub fn stem(word: &str) -> String {
    if word.len() <= 2 || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_string();
    }
    let mut w = Word(word.as_bytes().to_vec());
    step1a(&mut w);
    step1b(&mut w);
    step1c(&mut w);
    step2(&mut w);
    step3(&mut w);
    step4(&mut w);
    step5(&mut w);
    String::from_utf8(w.0).expect("ascii")
}

fn step1a(w: &mut Word) {
    if w.ends("sses") {
        w.replace("sses", "ss");
    } else if w.ends("ies") {
        w.replace("ies", "i");
    } else if w.ends("ss") {
    } else if w.ends("s") {
        w.replace("s", "");
    }
}

fn step1b(w: &mut Word) {
    if w.ends("eed") {
        if measure(&w.0, w.stem_len("eed")) > 0 {
            w.replace("eed", "ee");
        }
        return;
    }
    let stripped = if w.ends("ed") && has_vowel(&w.0, w.stem_len("ed")) {
        w.replace("ed", "");
        true
    } else if w.ends("ing") && has_vowel(&w.0, w.stem_len("ing")) {
        w.replace("ing", "");
        true
    } else {
        false
    };
    if !stripped {
        return;
    }
    if w.ends("at") || w.ends("bl") || w.ends("iz") {
        w.0.push(b'e');
    } else if ends_double_consonant(&w.0, w.0.len()) && !matches!(w.0[w.0.len() - 1], b'l' | b's' | b'z') {
        w.0.pop();
    } else if measure(&w.0, w.0.len()) == 1 && ends_cvc(&w.0, w.0.len()) {
        w.0.push(b'e');
    }
}

fn step1c(w: &mut Word) {
    if w.ends("y") && has_vowel(&w.0, w.stem_len("y")) {
        w.replace("y", "i");
    }
}

const STEP2: &[(&str, &str)] = &[
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

const STEP3: &[(&str, &str)] = &[
    ("icate", "ic"),
    ("ative", ""),
    ("alize", "al"),
    ("iciti", "ic"),
    ("ical", "ic"),
    ("ful", ""),
    ("ness", ""),
];

const STEP4: &[&str] = &[
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion", "ou", "ism", "ate", "iti",
    "ous", "ive", "ize",
];

/// Applies the rule for the longest matching suffix only.
fn apply_longest(w: &mut Word, table: &[(&str, &str)]) {
    let hit = table
        .iter()
        .filter(|(suffix, _)| w.ends(suffix))
        .max_by_key(|(suffix, _)| suffix.len());
    if let Some((suffix, with)) = hit {
        w.replace_if_m(suffix, with, 0);
    }
}

fn step2(w: &mut Word) {
    apply_longest(w, STEP2);
}

fn step3(w: &mut Word) {
    apply_longest(w, STEP3);
}

fn step4(w: &mut Word) {
    let Some(suffix) = STEP4.iter().filter(|s| w.ends(s)).max_by_key(|s| s.len()) else {
        return;
    };
    let n = w.stem_len(suffix);
    if measure(&w.0, n) <= 1 {
        return;
    }
    if *suffix == "ion" && !(n > 0 && matches!(w.0[n - 1], b's' | b't')) {
        return;
    }
    w.0.truncate(n);
}

fn step5(w: &mut Word) {
    let len = w.0.len();
    if w.ends("e") {
        let m = measure(&w.0, len - 1);
        if m > 1 || (m == 1 && !ends_cvc(&w.0, len - 1)) {
            w.0.pop();
        }
    }
    let len = w.0.len();
    if measure(&w.0, len) > 1 && ends_double_consonant(&w.0, len) && w.0[len - 1] == b'l' {
        w.0.pop();
    }
}
