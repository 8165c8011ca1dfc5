//! Word and token segmentation shared by the corpus, prompt and baseline code.
//!
//! Two views of a text are used throughout the crate:
//!
//! * **words**: whitespace-delimited runs, punctuation attached. These drive
//!   length limits (`word_count`) and random / attention masking.
//! * **tokens**: lowercased runs of alphanumeric characters (apostrophes are
//!   kept only between two alphanumerics). These drive n-gram mining and the
//!   bag-of-n-gram baselines.
//!
//! Both views carry byte spans into the original text so that a masked prompt
//! can replace exactly the surface characters of one unit.

use std::ops::Range;

/// Number of whitespace-delimited words in `text`.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// A whitespace-delimited word with its byte span and the span of its
/// alphanumeric core (leading/trailing punctuation stripped).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub span: Range<usize>,
    pub core: Range<usize>,
}

impl Word {
    /// The span to replace when this word is masked. Falls back to the whole
    /// word when it has no alphanumeric content.
    pub fn mask_span(&self) -> Range<usize> {
        if self.core.is_empty() {
            self.span.clone()
        } else {
            self.core.clone()
        }
    }
}

pub fn words(text: &str) -> Vec<Word> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(make_word(text, s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(make_word(text, s, text.len()));
    }
    out
}

fn make_word(text: &str, start: usize, end: usize) -> Word {
    let slice = &text[start..end];
    let lead = slice
        .char_indices()
        .find(|(_, c)| c.is_alphanumeric())
        .map(|(i, _)| i);
    let core = match lead {
        None => start..start,
        Some(l) => {
            let trail = slice
                .char_indices()
                .rev()
                .find(|(_, c)| c.is_alphanumeric())
                .map(|(i, c)| i + c.len_utf8())
                .unwrap_or(slice.len());
            start + l..start + trail
        }
    };
    Word {
        span: start..end,
        core,
    }
}

/// A normalized token and the byte span it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: Range<usize>,
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Lowercased alphanumeric tokens; every other character separates tokens.
pub fn tokens(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].1.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = chars[i].0;
        let mut j = i;
        loop {
            if j + 1 < chars.len() && chars[j + 1].1.is_alphanumeric() {
                j += 1;
            } else if j + 2 < chars.len()
                && is_apostrophe(chars[j + 1].1)
                && chars[j + 2].1.is_alphanumeric()
            {
                j += 2;
            } else {
                break;
            }
        }
        let end = chars[j].0 + chars[j].1.len_utf8();
        out.push(Token {
            text: text[start..end].to_lowercase(),
            span: start..end,
        });
        i = j + 1;
    }
    out
}

/// Token texts only.
pub fn token_strings(text: &str) -> Vec<String> {
    tokens(text).into_iter().map(|t| t.text).collect()
}

/// Replace `span` in `text` with `replacement`.
pub fn replace_span(text: &str, span: Range<usize>, replacement: &str) -> String {
    let mut out = String::with_capacity(text.len() + replacement.len());
    out.push_str(&text[..span.start]);
    out.push_str(replacement);
    out.push_str(&text[span.end..]);
    out
}

/// Upper-case the first character.
pub fn sentence_case(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_count_ignores_repeated_whitespace() {
        assert_eq!(word_count("  a  b\tc\n"), 3);
        assert_eq!(word_count(""), 0);
    }

    #[test]
    fn word_cores_strip_punctuation() {
        let text = "\"Hello,\" she said...";
        let w = words(text);
        assert_eq!(w.len(), 3);
        assert_eq!(&text[w[0].core.clone()], "Hello");
        assert_eq!(&text[w[2].core.clone()], "said");
        let dash = words("a -- b");
        assert_eq!(dash[1].mask_span(), dash[1].span);
    }

    #[test]
    fn tokens_split_on_punctuation_and_lowercase() {
        assert_eq!(
            token_strings("The Affordable-Care Act's cost, don't."),
            vec!["the", "affordable", "care", "act's", "cost", "don't"]
        );
        assert_eq!(token_strings("'quoted'"), vec!["quoted"]);
    }

    #[test]
    fn token_spans_point_into_source() {
        let text = "Care ACT!";
        let t = tokens(text);
        assert_eq!(&text[t[1].span.clone()], "ACT");
    }

    #[test]
    fn sentence_case_handles_unicode() {
        assert_eq!(sentence_case("élan vital"), "Élan vital");
        assert_eq!(sentence_case(""), "");
    }
}
