//! Parsing of operator words.
//!
//! A word is a whitespace-separated sequence of generator tokens, each with
//! an optional caret exponent: `"Q^2 eps(X) lap^3 d"`. Composition reads
//! right to left, matching how the words are printed. Two derived tokens
//! expand into sums: `iota(D)` and `eps(D)` denote the interior and exterior
//! parts of the weight-coupled differential,
//!
//! ```text
//! iota(D) = -delta (K(X) - 4) + iota(X) lap
//! eps(D)  =  d (K(X) - 4) + eps(X) lap
//! ```
//!
//! with `K(X) - 4` spelled through `lie(X) - lie*(X) - 4`, so the expansion
//! stays inside the eight generators.

use thiserror::Error;

use super::{Gen, WordSum};
use crate::scalar::{rat_int, Rat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("unknown token `{token}` at byte {offset}")]
    UnknownToken { offset: usize, token: String },
    #[error("bad exponent in `{token}` at byte {offset}")]
    BadExponent { offset: usize, token: String },
}

fn base_token(name: &str) -> Option<Gen> {
    match name {
        "Q" => Some(Gen::Q),
        "eps(X)" => Some(Gen::EpsX),
        "lap" => Some(Gen::Lap),
        "d" => Some(Gen::D),
        "delta" => Some(Gen::Delta),
        "iota(X)" => Some(Gen::IotaX),
        "lie(X)" => Some(Gen::LieX),
        "lie*(X)" => Some(Gen::LieXStar),
        _ => None,
    }
}

/// Expansion of a derived token as a sum of words, or a single generator.
enum Factor {
    Single(Gen, u32),
    Sum(WordSum),
}

fn derived_token(name: &str) -> Option<WordSum> {
    match name {
        "iota(D)" => Some(vec![
            (rat_int(-1), vec![Gen::Delta, Gen::LieX]),
            (rat_int(1), vec![Gen::Delta, Gen::LieXStar]),
            (rat_int(4), vec![Gen::Delta]),
            (rat_int(1), vec![Gen::IotaX, Gen::Lap]),
        ]),
        "eps(D)" => Some(vec![
            (rat_int(1), vec![Gen::D, Gen::LieX]),
            (rat_int(-1), vec![Gen::D, Gen::LieXStar]),
            (rat_int(-4), vec![Gen::D]),
            (rat_int(1), vec![Gen::EpsX, Gen::Lap]),
        ]),
        _ => None,
    }
}

/// Parse a word into a formal sum of scaled generator sequences. Plain words
/// produce a single summand; derived tokens distribute.
pub fn parse_word(input: &str) -> Result<WordSum, ParseError> {
    let mut factors: Vec<Factor> = Vec::new();
    let mut rest = input;
    let mut offset = 0usize;
    loop {
        let trimmed = rest.trim_start();
        offset += rest.len() - trimmed.len();
        if trimmed.is_empty() {
            break;
        }
        let end = trimmed
            .find(char::is_whitespace)
            .unwrap_or(trimmed.len());
        let token = &trimmed[..end];
        let (name, exp) = match token.split_once('^') {
            None => (token, 1u32),
            Some((name, e)) => {
                let exp: u32 = e.parse().map_err(|_| ParseError::BadExponent {
                    offset,
                    token: token.to_owned(),
                })?;
                (name, exp)
            }
        };
        if let Some(g) = base_token(name) {
            factors.push(Factor::Single(g, exp));
        } else if let Some(sum) = derived_token(name) {
            if exp != 1 {
                // Derived tokens square through distribution; repeat them.
                for _ in 0..exp {
                    factors.push(Factor::Sum(sum.clone()));
                }
            } else {
                factors.push(Factor::Sum(sum));
            }
        } else {
            return Err(ParseError::UnknownToken {
                offset,
                token: token.to_owned(),
            });
        }
        rest = &trimmed[end..];
        offset += end;
    }

    // Distribute the product of factors into a flat sum of words.
    let mut sum: WordSum = vec![(rat_int(1), Vec::new())];
    for f in factors {
        match f {
            Factor::Single(g, exp) => {
                for (_, w) in &mut sum {
                    w.extend(std::iter::repeat(g).take(exp as usize));
                }
            }
            Factor::Sum(parts) => {
                let mut next: WordSum = Vec::new();
                for (c, w) in &sum {
                    for (cp, wp) in &parts {
                        let mut word = w.clone();
                        word.extend_from_slice(wp);
                        next.push((c.clone() * cp.clone(), word));
                    }
                }
                sum = next;
            }
        }
    }
    Ok(sum)
}

/// Render a word sum back to a deterministic string (used by the CLI).
pub fn render_sum(sum: &[(Rat, Vec<Gen>)]) -> String {
    if sum.is_empty() {
        return "0".to_owned();
    }
    sum.iter()
        .map(|(c, w)| {
            let word = if w.is_empty() {
                "1".to_owned()
            } else {
                w.iter().map(|g| g.token()).collect::<Vec<_>>().join(" ")
            };
            if c == &rat_int(1) {
                word
            } else {
                format!("({c}) {word}")
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}
