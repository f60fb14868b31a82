//! Words over {0,1,2}: parsing, the template family `w_{n,i}0^j1^k`, and the
//! right-to-left decomposition into template words.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parses a word over `{0,1,2}`; whitespace is ignored.
pub fn parse_word(s: &str) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(s.len());
    for (at, ch) in s.char_indices() {
        match ch {
            '0' | '1' | '2' => out.push(ch as u8 - b'0'),
            c if c.is_whitespace() => {}
            c => return Err(Error::Parse { at: format!("offset {at}"), msg: format!("unexpected symbol {c:?}") }),
        }
    }
    Ok(out)
}

pub fn format_word(w: &[u8]) -> String {
    w.iter().map(|&c| (b'0' + c) as char).collect()
}

/// Template parameters of a word `w_{n,i} 0^j 1^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Template {
    pub n: usize,
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

const ZERO_PREFIX: [&[u8]; 10] =
    [&[0, 0, 0, 1], &[1, 0, 0, 1], &[2, 0, 0, 1], &[1, 0, 1], &[2, 0, 1], &[0, 1, 1], &[1, 1, 1], &[2, 1, 1], &[2, 1], &[2]];
const TWO_PREFIX: [&[u8]; 8] = [&[0, 0], &[0, 0, 1, 0], &[1, 0, 1, 0], &[2, 0, 1, 0], &[1, 1, 0], &[2, 1, 0], &[2, 0], &[1]];

/// `w_{n,i}` for `i ∈ 1..=19`.
pub fn template_word(n: usize, i: usize) -> Vec<u8> {
    match i {
        1..=10 => {
            let mut w = ZERO_PREFIX[i - 1].to_vec();
            w.extend(std::iter::repeat(0).take(4 * n + 1));
            w
        }
        11 => vec![1, 1, 1, 1],
        12..=19 => {
            let mut w = TWO_PREFIX[i - 12].to_vec();
            w.extend(std::iter::repeat(2).take(n + 1));
            w
        }
        _ => panic!("template index {i} outside 1..=19"),
    }
}

impl Template {
    pub fn word(&self) -> Vec<u8> {
        let mut w = template_word(self.n, self.i);
        w.extend(std::iter::repeat(0).take(self.j));
        w.extend(std::iter::repeat(1).take(self.k));
        w
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordDecomposition {
    /// Strict suffix of a template word; may be empty.
    pub w0: Vec<u8>,
    pub words: Vec<Vec<u8>>,
    pub params: Vec<Template>,
}

impl WordDecomposition {
    pub fn concat(&self) -> Vec<u8> {
        let mut out = self.w0.clone();
        for w in &self.words {
            out.extend_from_slice(w);
        }
        out
    }

    /// Start index of each template word, followed by the total length.
    pub fn boundaries(&self) -> Vec<usize> {
        let mut out = vec![self.w0.len()];
        for w in &self.words {
            out.push(out.last().unwrap() + w.len());
        }
        out
    }
}

fn at(w: &[u8], idx: isize) -> Option<u8> {
    (idx >= 0).then(|| w[idx as usize])
}

/// The template word that is a suffix of `w[..e]`, as (start, params).
fn match_suffix(w: &[u8], e: usize) -> Option<(usize, Template)> {
    if e >= 4 && w[e - 4..e] == [1, 1, 1, 1] {
        return Some((e - 4, Template { n: 0, i: 11, j: 0, k: 0 }));
    }
    let mut p = e;
    let mut k = 0;
    while k < 3 && p > 0 && w[p - 1] == 1 {
        p -= 1;
        k += 1;
    }
    let a = at(w, p as isize - 1)?;
    let mut q = p;
    while q > 0 && w[q - 1] == a {
        q -= 1;
    }
    let m = p - q;
    let q = q as isize;
    match a {
        0 => {
            let (n, j) = ((m - 1) / 4, (m - 1) % 4);
            let (start, i) = match at(w, q - 1)? {
                2 => (q - 1, 10),
                _ => match at(w, q - 2)? {
                    2 => (q - 2, 9),
                    1 => (q - 3, 5 + at(w, q - 3)? as usize + 1),
                    _ => match at(w, q - 3)? {
                        1 => (q - 3, 4),
                        2 => (q - 3, 5),
                        _ => (q - 4, 1 + at(w, q - 4)? as usize),
                    },
                },
            };
            Some((start as usize, Template { n, i, j, k }))
        }
        2 => {
            let n = m - 1;
            let (start, i) = match at(w, q - 1)? {
                1 => (q - 1, 19),
                _ => match at(w, q - 2)? {
                    0 => (q - 2, 12),
                    2 => (q - 2, 18),
                    _ => match at(w, q - 3)? {
                        1 => (q - 3, 16),
                        2 => (q - 3, 17),
                        _ => (q - 4, 13 + at(w, q - 4)? as usize),
                    },
                },
            };
            Some((start as usize, Template { n, i, j: 0, k }))
        }
        _ => unreachable!("a run of four 1s is matched first"),
    }
}

/// Reads `w` from the right, peeling template words until the remainder is a
/// strict suffix of one.
pub fn decompose_word(w: &[u8]) -> WordDecomposition {
    let mut e = w.len();
    let mut words = Vec::new();
    let mut params = Vec::new();
    while let Some((s, t)) = match_suffix(w, e) {
        words.push(w[s..e].to_vec());
        params.push(t);
        e = s;
    }
    words.reverse();
    params.reverse();
    WordDecomposition { w0: w[..e].to_vec(), words, params }
}

/// All template words of length ≤ `max_len`.
pub fn template_words_up_to(max_len: usize) -> HashSet<Vec<u8>> {
    let mut out = HashSet::new();
    for i in 1..=19 {
        for n in 0..=max_len {
            for j in 0..4 {
                for k in 0..4 {
                    let w = Template { n, i, j, k }.word();
                    if w.len() <= max_len {
                        out.insert(w);
                    }
                }
            }
        }
    }
    out
}

/// Strict suffixes (including the empty word) of template words, of length ≤ `max_len`.
pub fn strict_suffixes_up_to(max_len: usize) -> HashSet<Vec<u8>> {
    let mut out = HashSet::new();
    for i in 1..=19 {
        for n in 0..=max_len {
            for j in 0..4 {
                for k in 0..4 {
                    let w = Template { n, i, j, k }.word();
                    for s in 1..=w.len() {
                        if w.len() - s <= max_len {
                            out.insert(w[s..].to_vec());
                        }
                    }
                }
            }
        }
    }
    out
}

/// The short words whose images collapse the cone onto a fixed support.
pub const W_PRIME: [&str; 11] = ["000", "100", "20", "1010", "011", "11", "211", "210", "002", "0010", "12"];
