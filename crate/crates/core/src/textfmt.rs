//! Sectioned whitespace-token text shared by the input file formats.
//!
//! A file is a magic header line, a `<count_key> <N>` line, then `[name]`
//! sections whose tokens may start on the header line. `#` starts a comment.

use crate::error::{Error, Result};
use crate::linalg::RMatrix;

pub(crate) struct Token<'a> {
    pub line: usize,
    pub text: &'a str,
}

pub(crate) struct Section<'a> {
    pub name: String,
    pub line: usize,
    pub tokens: Vec<Token<'a>>,
}

pub(crate) struct Parser<'a> {
    pub source: &'a str,
}

impl<'a> Parser<'a> {
    pub fn err(&self, line: usize, field: &str, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.source.to_string(),
            line,
            field: field.to_string(),
            msg: msg.into(),
        }
    }

    /// Returns the count, the line it was declared on, and the sections.
    pub fn split<'t>(&self, text: &'t str, magic: &str, count_key: &str) -> Result<(usize, usize, Vec<Section<'t>>)> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()));

        let (l1, header) = lines
            .by_ref()
            .find(|(_, l)| !l.is_empty())
            .ok_or_else(|| self.err(1, "header", "empty file"))?;
        if header != magic {
            return Err(self.err(l1, "header", format!("expected '{magic}', found '{header}'")));
        }
        let (l2, count) = lines
            .by_ref()
            .find(|(_, l)| !l.is_empty())
            .ok_or_else(|| self.err(l1 + 1, count_key, format!("missing {count_key} line")))?;
        let n: usize = match count.split_whitespace().collect::<Vec<_>>().as_slice() {
            [key, v] if *key == count_key => v
                .parse()
                .ok()
                .filter(|&n: &usize| n > 0)
                .ok_or_else(|| self.err(l2, count_key, format!("invalid count '{v}'")))?,
            _ => {
                return Err(self.err(
                    l2,
                    count_key,
                    format!("expected '{count_key} <N>', found '{count}'"),
                ))
            }
        };

        let mut sections: Vec<Section<'t>> = Vec::new();
        for (line, content) in lines {
            if content.is_empty() {
                continue;
            }
            let mut rest = content;
            if let Some(stripped) = content.strip_prefix('[') {
                let close = stripped
                    .find(']')
                    .ok_or_else(|| self.err(line, "section", format!("unterminated header '{content}'")))?;
                let name = stripped[..close].trim().to_string();
                if sections.iter().any(|s| s.name == name) {
                    return Err(self.err(line, &name, "duplicate section"));
                }
                sections.push(Section {
                    name,
                    line,
                    tokens: Vec::new(),
                });
                rest = &stripped[close + 1..];
            }
            let sec = sections
                .last_mut()
                .ok_or_else(|| self.err(line, "section", "data before the first section header"))?;
            sec.tokens
                .extend(rest.split_whitespace().map(|text| Token { line, text }));
        }
        Ok((n, l2, sections))
    }

    pub fn numbers(&self, sec: &Section<'_>, expected: usize) -> Result<Vec<f64>> {
        if sec.tokens.len() != expected {
            let line = sec.tokens.last().map_or(sec.line, |t| t.line);
            return Err(self.err(
                line,
                &sec.name,
                format!("expected {expected} values, found {}", sec.tokens.len()),
            ));
        }
        sec.tokens
            .iter()
            .map(|t| {
                t.text
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.err(t.line, &sec.name, format!("invalid number '{}'", t.text)))
            })
            .collect()
    }

    pub fn matrix(&self, sec: &Section<'_>, n: usize) -> Result<RMatrix> {
        let v = self.numbers(sec, n * n)?;
        Ok(RMatrix::from_row_slice(n, n, &v))
    }
}

/// 17 significant digits; round-trips exactly through `str::parse::<f64>`.
pub(crate) fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
