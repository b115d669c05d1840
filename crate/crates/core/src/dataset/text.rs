//! Line-oriented `key value...` reading and writing shared by the formats.

use std::fmt::{Display, Write};
use std::str::FromStr;

use super::FormatError;

pub(crate) struct Writer {
    pub out: String,
}

impl Writer {
    pub fn new(magic: &str, version: u32) -> Self {
        let mut w = Self { out: String::new() };
        w.line(magic, [version]);
        w
    }

    pub fn line<V: Display>(&mut self, key: &str, values: impl IntoIterator<Item = V>) {
        self.out.push_str(key);
        for v in values {
            let _ = write!(self.out, " {v}");
        }
        self.out.push('\n');
    }

    pub fn text(&mut self, key: &str, value: &str) {
        let _ = writeln!(self.out, "{key} {}", escape(value));
    }

    pub fn finish(mut self) -> String {
        self.out.push_str("end\n");
        self.out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some(o) => out.push(o),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

pub(crate) struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    pub line_no: usize,
}

impl<'a> Reader<'a> {
    /// Checks the magic word and version on the first line.
    pub fn open(text: &'a str, magic: &str, version: u32) -> Result<Self, FormatError> {
        let mut r = Self {
            lines: text.lines().enumerate(),
            line_no: 0,
        };
        let (key, rest) = r.next_line()?;
        if key != magic {
            return Err(r.err(format!("expected `{magic}` header, found `{key}`")));
        }
        let found: u32 = r.parse_one(rest)?;
        if found != version {
            return Err(FormatError::Version { found, expected: version });
        }
        Ok(r)
    }

    pub fn err(&self, msg: impl Into<String>) -> FormatError {
        FormatError::Parse {
            line: self.line_no,
            msg: msg.into(),
        }
    }

    fn next_line(&mut self) -> Result<(&'a str, &'a str), FormatError> {
        let (i, line) = self.lines.next().ok_or_else(|| FormatError::Parse {
            line: self.line_no + 1,
            msg: "unexpected end of file".into(),
        })?;
        self.line_no = i + 1;
        Ok(line.split_once(' ').unwrap_or((line, "")))
    }

    /// Remainder of the next line, which must start with `key`.
    pub fn expect(&mut self, key: &str) -> Result<&'a str, FormatError> {
        let (k, rest) = self.next_line()?;
        if k != key {
            return Err(self.err(format!("expected `{key}`, found `{k}`")));
        }
        Ok(rest)
    }

    pub fn parse_one<V: FromStr>(&self, s: &str) -> Result<V, FormatError> {
        s.trim()
            .parse()
            .map_err(|_| self.err(format!("cannot parse `{}`", s.trim())))
    }

    pub fn parse_all<V: FromStr>(&self, s: &str) -> Result<Vec<V>, FormatError> {
        s.split_whitespace().map(|t| self.parse_one(t)).collect()
    }

    pub fn value<V: FromStr>(&mut self, key: &str) -> Result<V, FormatError> {
        let rest = self.expect(key)?;
        self.parse_one(rest)
    }

    pub fn values<V: FromStr>(&mut self, key: &str) -> Result<Vec<V>, FormatError> {
        let rest = self.expect(key)?;
        self.parse_all(rest)
    }

    pub fn fixed<V: FromStr>(&mut self, key: &str, n: usize) -> Result<Vec<V>, FormatError> {
        let v = self.values(key)?;
        if v.len() != n {
            return Err(self.err(format!("`{key}` needs {n} values, found {}", v.len())));
        }
        Ok(v)
    }

    pub fn text(&mut self, key: &str) -> Result<String, FormatError> {
        Ok(unescape(self.expect(key)?))
    }

    /// `rows` lines of exactly `cols` values each.
    pub fn matrix<V: FromStr>(&mut self, rows: usize, cols: usize) -> Result<Vec<V>, FormatError> {
        let mut out = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (i, line) = self.lines.next().ok_or_else(|| FormatError::Parse {
                line: self.line_no + 1,
                msg: "unexpected end of file".into(),
            })?;
            self.line_no = i + 1;
            let row: Vec<V> = self.parse_all(line)?;
            if row.len() != cols {
                return Err(self.err(format!("expected {cols} values, found {}", row.len())));
            }
            out.extend(row);
        }
        Ok(out)
    }

    pub fn finish(mut self) -> Result<(), FormatError> {
        let (k, _) = self.next_line()?;
        if k != "end" {
            return Err(self.err(format!("expected `end`, found `{k}`")));
        }
        Ok(())
    }
}

pub(crate) fn parse_bool(r: &Reader, s: &str) -> Result<bool, FormatError> {
    match s.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(r.err(format!("expected true or false, found `{other}`"))),
    }
}

pub(crate) fn parse_enum<E: FromStr<Err = String>>(r: &Reader, s: &str) -> Result<E, FormatError> {
    s.trim().parse().map_err(|e: String| r.err(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escaping_round_trips() {
        for s in ["plain", "with space", "back\\slash", "new\nline", "trailing\\", ""] {
            assert_eq!(unescape(&escape(s)), s);
        }
    }
}
