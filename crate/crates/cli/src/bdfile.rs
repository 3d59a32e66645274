//! Boundary-data files (`staticext-bd v1`).
//!
//! ```text
//! staticext-bd v1
//! lmax 4
//! # σ − g_o|S² in the surface basis, h − 2 in scalar harmonics
//! sigma 2 1 even d 1e-3
//! h 2 1 -0.01
//! ```

use std::collections::BTreeMap;

use staticext::field::Discretization;
use staticext::geometry::BoundaryData;
use staticext::modes::Parity;

use crate::ParseError;

pub const BD_HEADER: &str = "staticext-bd v1";

/// Which surface basis tensor a `sigma` coefficient multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    /// `Hess Y` (odd parity: `(Hess Y)*`).
    C,
    /// `Y g`.
    D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFile {
    pub lmax: usize,
    pub sigma: BTreeMap<(usize, usize, Parity, Term), f64>,
    pub h: BTreeMap<(usize, usize), f64>,
}

/// Strip a `#` comment and surrounding whitespace.
pub(crate) fn content(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

pub(crate) fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, ParseError> {
    let tok = tok.ok_or_else(|| ParseError::new(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| ParseError::new(line, format!("invalid {what} `{tok}`")))
}

pub(crate) fn parse_float(tok: Option<&str>, line: usize, what: &str) -> Result<f64, ParseError> {
    let v: f64 = parse_num(tok, line, what)?;
    if !v.is_finite() {
        return Err(ParseError::new(line, format!("{what} must be finite")));
    }
    Ok(v)
}

fn check_mode(l: usize, m: usize, lmax: usize, line: usize) -> Result<(), ParseError> {
    if l > lmax {
        return Err(ParseError::new(line, format!("degree {l} exceeds lmax {lmax}")));
    }
    if m == 0 || m > 2 * l + 1 {
        return Err(ParseError::new(line, format!("order {m} is outside 1..={} for L = {l}", 2 * l + 1)));
    }
    Ok(())
}

fn no_trailing<'a>(mut toks: impl Iterator<Item = &'a str>, line: usize) -> Result<(), ParseError> {
    match toks.next() {
        Some(t) => Err(ParseError::new(line, format!("unexpected trailing token `{t}`"))),
        None => Ok(()),
    }
}

impl BoundaryFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, content(l)))
            .filter(|(_, l)| !l.is_empty());
        let (n, header) = lines.next().ok_or_else(|| ParseError::new(1, "empty file"))?;
        if header != BD_HEADER {
            return Err(ParseError::new(n, format!("expected `{BD_HEADER}`")));
        }
        let (n, lmax_line) = lines.next().ok_or_else(|| ParseError::new(n + 1, "missing `lmax` line"))?;
        let mut toks = lmax_line.split_whitespace();
        if toks.next() != Some("lmax") {
            return Err(ParseError::new(n, "expected `lmax <int>`"));
        }
        let lmax: usize = parse_num(toks.next(), n, "lmax")?;
        no_trailing(toks, n)?;
        if lmax > 64 {
            return Err(ParseError::new(n, "lmax above 64 is not supported"));
        }
        let mut out = Self {
            lmax,
            sigma: BTreeMap::new(),
            h: BTreeMap::new(),
        };
        for (n, line) in lines {
            let mut toks = line.split_whitespace();
            match toks.next() {
                Some("sigma") => {
                    let l: usize = parse_num(toks.next(), n, "degree")?;
                    let m: usize = parse_num(toks.next(), n, "order")?;
                    let parity = match toks.next() {
                        Some("even") => Parity::Even,
                        Some("odd") => Parity::Odd,
                        Some(t) => return Err(ParseError::new(n, format!("parity must be `even` or `odd`, got `{t}`"))),
                        None => return Err(ParseError::new(n, "missing parity")),
                    };
                    let term = match toks.next() {
                        Some("c") => Term::C,
                        Some("d") => Term::D,
                        Some(t) => return Err(ParseError::new(n, format!("term must be `c` or `d`, got `{t}`"))),
                        None => return Err(ParseError::new(n, "missing term")),
                    };
                    let v = parse_float(toks.next(), n, "coefficient")?;
                    no_trailing(toks, n)?;
                    check_mode(l, m, lmax, n)?;
                    if parity == Parity::Odd && term == Term::D {
                        return Err(ParseError::new(n, "odd parity has no `d` term"));
                    }
                    // For L ≤ 1 the trace-free part of Hess Y vanishes, so
                    // `c` carries no independent data there.
                    if term == Term::C && l < 2 {
                        return Err(ParseError::new(n, format!("the `c` term needs L >= 2, got L = {l}")));
                    }
                    if out.sigma.insert((l, m, parity, term), v).is_some() {
                        return Err(ParseError::new(n, "duplicate sigma coefficient"));
                    }
                }
                Some("h") => {
                    let l: usize = parse_num(toks.next(), n, "degree")?;
                    let m: usize = parse_num(toks.next(), n, "order")?;
                    let v = parse_float(toks.next(), n, "coefficient")?;
                    no_trailing(toks, n)?;
                    check_mode(l, m, lmax, n)?;
                    if out.h.insert((l, m), v).is_some() {
                        return Err(ParseError::new(n, "duplicate h coefficient"));
                    }
                }
                Some(t) => return Err(ParseError::new(n, format!("unknown record `{t}`"))),
                None => unreachable!("blank lines are filtered"),
            }
        }
        Ok(out)
    }

    /// Boundary data on `disc`, whose degree must cover the file's modes.
    pub fn to_boundary_data(&self, disc: &Discretization) -> staticext::Result<BoundaryData> {
        let mut sigma: BTreeMap<(usize, usize, Parity), (f64, f64)> = BTreeMap::new();
        for (&(l, m, p, term), &v) in &self.sigma {
            let e = sigma.entry((l, m, p)).or_default();
            match term {
                Term::C => e.0 = v,
                Term::D => e.1 = v,
            }
        }
        let sigma: Vec<_> = sigma.into_iter().map(|((l, m, p), (c, d))| (l, m, p, c, d)).collect();
        let h: Vec<_> = self.h.iter().map(|(&(l, m), &v)| (l, m, v)).collect();
        BoundaryData::from_modes(disc, &sigma, &h)
    }

    /// Highest degree actually present.
    pub fn max_degree(&self) -> usize {
        self.sigma.keys().map(|k| k.0).chain(self.h.keys().map(|k| k.0)).max().unwrap_or(0)
    }

    pub fn render(&self) -> String {
        let mut s = format!("{BD_HEADER}\nlmax {}\n", self.lmax);
        for (&(l, m, p, term), v) in &self.sigma {
            let t = match term {
                Term::C => "c",
                Term::D => "d",
            };
            s.push_str(&format!("sigma {l} {m} {} {t} {v:e}\n", p.as_str()));
        }
        for (&(l, m), v) in &self.h {
            s.push_str(&format!("h {l} {m} {v:e}\n"));
        }
        s
    }
}
