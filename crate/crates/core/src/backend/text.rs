//! Hashing, character n-gram features and the rule-based paraphraser used by
//! the reference backend.

use serde::{Deserialize, Serialize};

/// SplitMix64 finaliser.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Map a 64-bit hash onto the open interval (0, 1).
pub fn unit_open(h: u64) -> f64 {
    // 52 bits keep the half-offset exactly representable
    ((h >> 12) as f64 + 0.5) / (1u64 << 52) as f64
}

/// `splitmix64(fnv1a64(gram) ^ splitmix64(seed))`; low bits pick the
/// bucket, the top bit picks the sign.
pub fn feature_hash(seed: u64, gram: &str) -> u64 {
    splitmix64(fnv1a64(gram.as_bytes()) ^ splitmix64(seed))
}

/// Add signed hashed counts of every character n-gram (`n` in `orders`)
/// into `out`.
pub fn accumulate_char_ngrams(text: &str, orders: &[usize], seed: u64, out: &mut [f64]) {
    let chars: Vec<char> = text.chars().collect();
    let dim = out.len() as u64;
    let mut buf = String::new();
    for &n in orders {
        if n == 0 || chars.len() < n {
            continue;
        }
        for window in chars.windows(n) {
            buf.clear();
            buf.extend(window.iter());
            let h = feature_hash(seed ^ (n as u64).wrapping_mul(0xA24B_AED4_963E_E407), &buf);
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            out[(h % dim) as usize] += sign;
        }
    }
}

/// Substitution rules applied by the reference paraphraser after
/// lowercasing. An empty replacement deletes the phrase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleTable {
    pub rules: Vec<(String, String)>,
}

impl Default for RuleTable {
    fn default() -> Self {
        let pairs: &[(&str, &str)] = &[
            // English register markers
            ("shall", "will"),
            ("hereby", ""),
            ("whereas", "while"),
            ("duly", ""),
            ("pursuant to", "under"),
            ("henceforth", "from now on"),
            ("therefore", "so"),
            ("commence", "start"),
            ("terminate", "end"),
            ("gonna", "going to"),
            ("kinda", "somewhat"),
            ("just", ""),
            ("really", ""),
            ("ok", ""),
            // target-language register markers
            ("debera", "va a"),
            ("deberan", "van a"),
            ("asimismo", ""),
            ("debidamente", ""),
            ("por la presente", ""),
            ("dicho", "el"),
            ("pues", ""),
            ("vale", ""),
            ("super", ""),
        ];
        Self {
            rules: pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }
}

/// Deterministic style neutraliser: lowercase, apply the rule table on word
/// boundaries, collapse whitespace.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Paraphraser {
    pub table: RuleTable,
}

impl Paraphraser {
    pub fn new(table: RuleTable) -> Self {
        Self { table }
    }

    /// The seed is accepted for interface parity and has no effect: the
    /// rule table admits exactly one rewrite per input.
    pub fn paraphrase(&self, text: &str, _seed: u64) -> String {
        let lowered = text.to_lowercase();
        let mut words: Vec<String> = lowered.split_whitespace().map(str::to_string).collect();
        for (from, to) in &self.table.rules {
            let pattern: Vec<&str> = from.split_whitespace().collect();
            let replacement: Vec<String> = to.split_whitespace().map(str::to_string).collect();
            words = replace_phrase(&words, &pattern, &replacement);
        }
        words.join(" ")
    }
}

/// Replace whole-word occurrences of `pattern`. Trailing punctuation on the
/// last matched word is carried over.
fn replace_phrase(words: &[String], pattern: &[&str], replacement: &[String]) -> Vec<String> {
    if pattern.is_empty() {
        return words.to_vec();
    }
    let mut out = Vec::with_capacity(words.len());
    let mut i = 0;
    while i < words.len() {
        if i + pattern.len() <= words.len() {
            let mut trailing = "";
            let matched = pattern.iter().enumerate().all(|(k, p)| {
                let w = &words[i + k];
                if k + 1 == pattern.len() {
                    let core = w.trim_end_matches(|c: char| c.is_ascii_punctuation());
                    trailing = &w[core.len()..];
                    core == *p
                } else {
                    w == p
                }
            });
            if matched {
                match replacement.split_last() {
                    Some((last, init)) => {
                        out.extend(init.iter().cloned());
                        out.push(format!("{last}{trailing}"));
                    }
                    None if !trailing.is_empty() => {
                        if let Some(prev) = out.last_mut() {
                            prev.push_str(trailing)
                        }
                    }
                    None => {}
                }
                i += pattern.len();
                continue;
            }
        }
        out.push(words[i].clone());
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn court_example() {
        let p = Paraphraser::default();
        assert_eq!(p.paraphrase("THE COURT SHALL ORDER", 0), "the court will order");
    }

    #[test]
    fn deletion_keeps_punctuation() {
        let p = Paraphraser::default();
        assert_eq!(p.paraphrase("We agree, hereby.", 1), "we agree,.");
        assert_eq!(p.paraphrase("I HEREBY resign", 1), "i resign");
    }

    #[test]
    fn multiword_rules() {
        let p = Paraphraser::default();
        assert_eq!(
            p.paraphrase("Payment pursuant to the contract", 0),
            "payment under the contract"
        );
    }

    #[test]
    fn ngram_features_are_deterministic() {
        let mut a = vec![0.0; 64];
        let mut b = vec![0.0; 64];
        accumulate_char_ngrams("hello", &[1, 2, 3], 9, &mut a);
        accumulate_char_ngrams("hello", &[1, 2, 3], 9, &mut b);
        assert_eq!(a, b);
        // 5 + 4 + 3 grams
        let mass: f64 = a.iter().map(|v| v.abs()).sum();
        assert!(mass <= 12.0 && mass > 0.0);
    }

    #[test]
    fn unit_open_never_hits_endpoints() {
        assert!(unit_open(0) > 0.0);
        assert!(unit_open(u64::MAX) < 1.0);
    }
}
