use std::ops::Range;

/// Splits text into tokens for budget accounting.
pub trait Tokenizer: Send + Sync {
    /// Byte ranges of the tokens of `text`, in order and non-overlapping.
    /// A marker token must never be split.
    fn tokenize(&self, text: &str) -> Vec<Range<usize>>;

    fn count(&self, text: &str) -> usize {
        self.tokenize(text).len()
    }
}

/// Offline tokenizer: one token per identifier, number, marker, or
/// punctuation character. Whitespace is not a token.
#[derive(Debug, Clone, Copy, Default)]
pub struct AtomTokenizer;

const MARKER_PREFIX: &str = "<extra_id_";

fn marker_len(rest: &str) -> Option<usize> {
    let digits = rest.strip_prefix(MARKER_PREFIX)?;
    let n = digits.bytes().take_while(u8::is_ascii_digit).count();
    (n > 0 && digits[n..].starts_with('>')).then_some(MARKER_PREFIX.len() + n + 1)
}

fn is_ident(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

impl Tokenizer for AtomTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut iter = text.char_indices().peekable();
        while let Some((start, c)) = iter.next() {
            if c.is_whitespace() {
                continue;
            }
            if c == '<' {
                if let Some(len) = marker_len(&text[start..]) {
                    while iter.peek().is_some_and(|(i, _)| *i < start + len) {
                        iter.next();
                    }
                    out.push(start..start + len);
                    continue;
                }
            }
            let mut end = start + c.len_utf8();
            if is_ident(c) {
                while let Some(&(i, d)) = iter.peek() {
                    if is_ident(d) || (c.is_ascii_digit() && d == '.') {
                        end = i + d.len_utf8();
                        iter.next();
                    } else {
                        break;
                    }
                }
            }
            out.push(start..end);
        }
        out
    }
}

/// Keeps the last `max` tokens (drops from the left). Returns the kept text.
pub(crate) fn keep_tail<'a>(tok: &dyn Tokenizer, text: &'a str, max: usize) -> &'a str {
    let tokens = tok.tokenize(text);
    if tokens.len() <= max {
        return text;
    }
    if max == 0 {
        return "";
    }
    &text[tokens[tokens.len() - max].start..]
}

/// Keeps the first `max` tokens (drops from the right).
pub(crate) fn keep_head<'a>(tok: &dyn Tokenizer, text: &'a str, max: usize) -> &'a str {
    let tokens = tok.tokenize(text);
    if tokens.len() <= max {
        return text;
    }
    if max == 0 {
        return "";
    }
    &text[..tokens[max - 1].end]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(text: &str) -> Vec<&str> {
        AtomTokenizer.tokenize(text).into_iter().map(|r| &text[r]).collect()
    }

    #[test]
    fn empty_text_has_no_tokens() {
        assert_eq!(AtomTokenizer.count(""), 0);
        assert_eq!(AtomTokenizer.count(" \n\t"), 0);
    }

    #[test]
    fn atoms() {
        assert_eq!(
            words("def f(x: <extra_id_0>) -> 1.5e3:"),
            vec!["def", "f", "(", "x", ":", "<extra_id_0>", ")", "-", ">", "1.5e3", ":"]
        );
        assert_eq!(words("a<extra_id_>b"), vec!["a", "<", "extra_id_", ">", "b"]);
    }

    #[test]
    fn truncation_keeps_whole_tokens() {
        let t = "alpha beta <extra_id_3> gamma";
        assert_eq!(keep_tail(&AtomTokenizer, t, 2), "<extra_id_3> gamma");
        assert_eq!(keep_head(&AtomTokenizer, t, 3), "alpha beta <extra_id_3>");
        assert_eq!(keep_head(&AtomTokenizer, t, 0), "");
        assert_eq!(keep_tail(&AtomTokenizer, t, 10), t);
    }
}
