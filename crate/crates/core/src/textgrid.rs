//! Praat TextGrid reader (long and short text forms).
//!
//! Both forms carry the same value sequence; the long form only adds
//! `key = ` annotations and `[n]:` indices. The reader tokenizes values the
//! way Praat does: quoted strings, numbers and `<exists>` flags, skipping
//! bare words, bracketed indices and `!` comments.

use std::io::Read;

use crate::error::{Error, Result};
use crate::ingest::Segment;

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Str(String),
    Num(f64),
    Flag(bool),
}

#[derive(Debug)]
struct Token {
    value: Value,
    line: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            '"' => {
                chars.next();
                let start_line = line;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => {
                            if chars.peek() == Some(&'"') {
                                chars.next();
                                s.push('"');
                            } else {
                                break;
                            }
                        }
                        Some(ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            s.push(ch);
                        }
                        None => return Err(Error::parse(start_line, "unterminated string")),
                    }
                }
                out.push(Token {
                    value: Value::Str(s),
                    line: start_line,
                });
            }
            '!' => {
                while let Some(&ch) = chars.peek() {
                    if ch == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '[' => {
                for ch in chars.by_ref() {
                    if ch == ']' {
                        break;
                    }
                    if ch == '\n' {
                        line += 1;
                    }
                }
            }
            '<' => {
                let mut word = String::new();
                chars.next();
                for ch in chars.by_ref() {
                    if ch == '>' {
                        break;
                    }
                    word.push(ch);
                }
                let flag = match word.as_str() {
                    "exists" => true,
                    "absent" => false,
                    _ => return Err(Error::parse(line, format!("unknown flag <{word}>"))),
                };
                out.push(Token {
                    value: Value::Flag(flag),
                    line,
                });
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let mut s = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_ascii_alphanumeric() || "+-.".contains(ch) {
                        s.push(ch);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let v = s
                    .parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("bad number `{s}`")))?;
                out.push(Token {
                    value: Value::Num(v),
                    line,
                });
            }
            c if c.is_alphabetic() || c == '_' => {
                // Key names such as `xmin` or `tiers?`.
                while let Some(&ch) = chars.peek() {
                    if ch.is_alphanumeric() || ch == '_' || ch == '?' {
                        chars.next();
                    } else {
                        break;
                    }
                }
            }
            _ => {
                chars.next();
            }
        }
    }
    Ok(out)
}

struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
}

impl Cursor {
    fn line(&self) -> usize {
        self.tokens
            .get(self.pos)
            .or(self.tokens.last())
            .map_or(1, |t| t.line)
    }

    fn next(&mut self, what: &str) -> Result<&Token> {
        let line = self.line();
        let t = self.tokens.get(self.pos).ok_or_else(|| {
            Error::parse(line, format!("unexpected end of file, expected {what}"))
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn num(&mut self, what: &str) -> Result<f64> {
        let t = self.next(what)?;
        match t.value {
            Value::Num(v) => Ok(v),
            _ => Err(Error::parse(t.line, format!("expected {what}"))),
        }
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let line = self.line();
        let v = self.num(what)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::parse(line, format!("{what} must be a whole number")));
        }
        Ok(v as usize)
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let t = self.next(what)?;
        match &t.value {
            Value::Str(s) => Ok(s.clone()),
            _ => Err(Error::parse(t.line, format!("expected {what}"))),
        }
    }
}

/// Reads the interval tier `tier_name` of a TextGrid. Every interval with a
/// non-blank label becomes one [`Segment`] of `utterance_id`.
pub fn parse_textgrid<R: Read>(
    mut reader: R,
    utterance_id: &str,
    tier_name: &str,
) -> Result<Vec<Segment>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    let mut cur = Cursor {
        tokens: tokenize(text)?,
        pos: 0,
    };

    let file_type = cur.string("file type")?;
    let object_class = cur.string("object class")?;
    if file_type != "ooTextFile" || object_class != "TextGrid" {
        return Err(Error::parse(1, "not a Praat TextGrid text file"));
    }
    cur.num("xmin")?;
    cur.num("xmax")?;
    let t = cur.next("tier flag")?;
    let has_tiers = match t.value {
        Value::Flag(f) => f,
        _ => return Err(Error::parse(t.line, "expected <exists> or <absent>")),
    };
    let n_tiers = if has_tiers {
        cur.count("tier count")?
    } else {
        0
    };

    let mut available = Vec::with_capacity(n_tiers);
    let mut found = None;
    for _ in 0..n_tiers {
        let class = cur.string("tier class")?;
        let name = cur.string("tier name")?;
        cur.num("tier xmin")?;
        cur.num("tier xmax")?;
        let n = cur.count("interval count")?;
        match class.as_str() {
            "IntervalTier" => {
                let mut segs = Vec::with_capacity(n);
                for _ in 0..n {
                    let line = cur.line();
                    let xmin = cur.num("interval xmin")?;
                    let xmax = cur.num("interval xmax")?;
                    let label = cur.string("interval text")?;
                    if xmax <= xmin {
                        return Err(Error::parse(
                            line,
                            format!("interval xmax {xmax} <= xmin {xmin}"),
                        ));
                    }
                    let label = label.trim();
                    if label.is_empty() || found.is_some() || name != tier_name {
                        continue;
                    }
                    segs.push(Segment {
                        utterance_id: utterance_id.to_string(),
                        phone_raw: label.to_string(),
                        start: xmin,
                        duration: xmax - xmin,
                    });
                }
                if name == tier_name && found.is_none() {
                    found = Some(segs);
                }
            }
            "TextTier" => {
                for _ in 0..n {
                    cur.num("point time")?;
                    cur.string("point mark")?;
                }
            }
            other => {
                return Err(Error::parse(
                    cur.line(),
                    format!("unknown tier class `{other}`"),
                ));
            }
        }
        available.push(name);
    }
    found.ok_or_else(|| Error::MissingTier {
        wanted: tier_name.to_string(),
        available,
    })
}
