//! Tokenizers.
//!
//! Pair mining and the evaluation metrics tokenize slightly differently:
//! mining splits on every non-alphanumeric run, the metrics delete
//! punctuation first and then split on whitespace (so "don't" stays one
//! token there).

/// Lowercase, split on runs of non-alphanumeric characters.
pub fn mining_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Lowercase, strip punctuation, split on whitespace.
pub fn metric_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| !c.is_ascii_punctuation() && !is_unicode_punct(*c))
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

fn is_unicode_punct(c: char) -> bool {
    matches!(
        c,
        '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}' | '\u{2026}'
    )
}

/// All contiguous n-grams of `tokens`, joined with a single space.
pub fn ngrams(tokens: &[String], n: usize) -> Vec<String> {
    if n == 0 || tokens.len() < n {
        return Vec::new();
    }
    tokens.windows(n).map(|w| w.join(" ")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mining_splits_on_punctuation() {
        assert_eq!(
            mining_tokens("Turn-left, NOW!  ok"),
            ["turn", "left", "now", "ok"]
        );
    }

    #[test]
    fn metric_strips_punctuation_inside_words() {
        assert_eq!(metric_tokens("  Don't STOP. "), ["dont", "stop"]);
        assert!(metric_tokens(" ... ").is_empty());
    }

    #[test]
    fn ngram_windows() {
        let t = metric_tokens("a b c");
        assert_eq!(ngrams(&t, 2), ["a b", "b c"]);
        assert!(ngrams(&t, 4).is_empty());
    }
}
