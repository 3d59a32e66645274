//! Solution files (`staticext-sol v1`): the radial grid followed by the
//! frame-normalized mode profiles of `Θ` and of the lapse perturbation.
//!
//! ```text
//! staticext-sol v1
//! nr 3
//! nodes 1e0 5e-1 0e0
//! lmax 0
//! mode 0 1 even
//! 1e0 2e-1 0e0 0e0 2e-1
//! 2e0 1e-1 0e0 0e0 1e-1
//! inf 0e0 0e0 0e0 0e0
//! lapse 0 1
//! 1e0 -1e-1
//! 2e0 -5e-2
//! inf 0e0
//! ```
//!
//! Rows start with the radius `r = 1/s` (`inf` at the last node). Floats
//! are written in shortest round-trip form, so the stored coefficients
//! reload exactly; the synthesized fields agree with the saved state to
//! transform roundoff.

use staticext::field::{standard, Discretization, ScalarField, SymTensorField};
use staticext::geometry::MetricState;
use staticext::modes::{transform_from_modes, transform_to_modes, FieldKind, ModeKey, ModeSpectrum, Parity};

use crate::bdfile::{content, parse_float, parse_num};
use crate::ParseError;

pub const SOL_HEADER: &str = "staticext-sol v1";

/// Relative tolerance when matching stored nodes and radii to the grid.
const NODE_TOL: f64 = 1e-13;

fn radius(s: f64) -> String {
    if s == 0.0 {
        "inf".to_string()
    } else {
        format!("{:e}", 1.0 / s)
    }
}

/// Serialize `state` through its mode analysis. Modes that are identically
/// zero are omitted.
pub fn render(state: &MetricState) -> String {
    render_spectra(state.disc(), &transform_to_modes(&state.theta), &transform_to_modes(&state.lapse_pert))
}

/// Serialize the state synthesized from `theta` and `lapse`; reloading gives
/// that synthesis bit for bit.
pub fn render_spectra(disc: &Discretization, theta: &ModeSpectrum, lapse: &ModeSpectrum) -> String {
    let nodes = disc.grid.radial.nodes();
    let mut out = String::new();
    out.push_str(SOL_HEADER);
    out.push('\n');
    out.push_str(&format!("nr {}\n", nodes.len()));
    let list: Vec<String> = nodes.iter().map(|s| format!("{s:e}")).collect();
    out.push_str(&format!("nodes {}\n", list.join(" ")));
    out.push_str(&format!("lmax {}\n", disc.grid.lmax()));
    for (key, p) in &theta.modes {
        if p.max_abs() == 0.0 {
            continue;
        }
        let (l, m) = (key.harmonic.l, key.harmonic.m);
        out.push_str(&format!("mode {l} {m} {}\n", key.parity.as_str()));
        for (i, &s) in nodes.iter().enumerate() {
            out.push_str(&format!("{} {:e} {:e} {:e} {:e}\n", radius(s), p.a[i], p.b[i], p.c[i], p.d[i]));
        }
    }
    for (key, p) in &lapse.modes {
        if p.max_abs() == 0.0 {
            continue;
        }
        out.push_str(&format!("lapse {} {}\n", key.harmonic.l, key.harmonic.m));
        for (i, &s) in nodes.iter().enumerate() {
            out.push_str(&format!("{} {:e}\n", radius(s), p.a[i]));
        }
    }
    out
}

struct Lines<'a> {
    inner: Box<dyn Iterator<Item = (usize, &'a str)> + 'a>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: Box::new(
                text.lines()
                    .enumerate()
                    .map(|(i, l)| (i + 1, content(l)))
                    .filter(|(_, l)| !l.is_empty()),
            ),
            last: 0,
        }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let item = self.inner.next();
        if let Some((n, _)) = item {
            self.last = n;
        }
        item
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), ParseError> {
        self.next()
            .ok_or_else(|| ParseError::new(self.last + 1, format!("unexpected end of file, expected {what}")))
    }

    /// A line `<key> <value>`.
    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<(usize, T), ParseError> {
        let (n, line) = self.expect(&format!("`{key}`"))?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some(key) {
            return Err(ParseError::new(n, format!("expected `{key} <value>`")));
        }
        let v = parse_num(toks.next(), n, key)?;
        if toks.next().is_some() {
            return Err(ParseError::new(n, format!("trailing tokens after `{key}`")));
        }
        Ok((n, v))
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= NODE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Parse a solution file back into a state on the standard grid it names.
pub fn parse(text: &str) -> Result<MetricState, ParseError> {
    let mut lines = Lines::new(text);
    let (n, header) = lines.expect("header")?;
    if header != SOL_HEADER {
        return Err(ParseError::new(n, format!("expected `{SOL_HEADER}`")));
    }
    let (n_line, n_r) = lines.keyed::<usize>("nr")?;
    if !(8..=1024).contains(&n_r) {
        return Err(ParseError::new(n_line, format!("nr = {n_r} is outside 8..=1024")));
    }
    let (n, node_line) = lines.expect("`nodes`")?;
    let mut toks = node_line.split_whitespace();
    if toks.next() != Some("nodes") {
        return Err(ParseError::new(n, "expected `nodes <floats>`"));
    }
    let stored: Vec<f64> = toks.map(|t| parse_float(Some(t), n, "node")).collect::<Result<_, _>>()?;
    if stored.len() != n_r {
        return Err(ParseError::new(n, format!("expected {n_r} nodes, found {}", stored.len())));
    }
    let nodes_line = n;
    let (n, lmax) = lines.keyed::<usize>("lmax")?;
    if lmax > 64 {
        return Err(ParseError::new(n, "lmax above 64 is not supported"));
    }
    let disc = standard(n_r, lmax).map_err(|e| ParseError::new(n, e.to_string()))?;
    let nodes = disc.grid.radial.nodes();
    if let Some(j) = (0..n_r).find(|&j| !close(stored[j], nodes[j])) {
        return Err(ParseError::new(nodes_line, format!("node {j} is not the Chebyshev node {:e}", nodes[j])));
    }
    let mut theta = ModeSpectrum::new(FieldKind::Tensor, lmax, n_r);
    let mut lapse = ModeSpectrum::new(FieldKind::Scalar, lmax, n_r);
    while let Some((n, line)) = lines.next() {
        let mut toks = line.split_whitespace();
        let (tensor, width) = match toks.next() {
            Some("mode") => (true, 5),
            Some("lapse") => (false, 2),
            Some(t) => return Err(ParseError::new(n, format!("unknown block `{t}`"))),
            None => unreachable!("blank lines are filtered"),
        };
        let l: usize = parse_num(toks.next(), n, "degree")?;
        let m: usize = parse_num(toks.next(), n, "order")?;
        let parity = if tensor {
            match toks.next() {
                Some("even") => Parity::Even,
                Some("odd") => Parity::Odd,
                _ => return Err(ParseError::new(n, "expected parity `even` or `odd`")),
            }
        } else {
            Parity::Even
        };
        if toks.next().is_some() {
            return Err(ParseError::new(n, "trailing tokens in block header"));
        }
        if l > lmax {
            return Err(ParseError::new(n, format!("degree {l} exceeds lmax {lmax}")));
        }
        if m == 0 || m > 2 * l + 1 {
            return Err(ParseError::new(n, format!("order {m} is outside 1..={} for L = {l}", 2 * l + 1)));
        }
        let spectrum = if tensor { &mut theta } else { &mut lapse };
        let key = ModeKey::new(l, m, parity);
        if spectrum.get(key).is_some() {
            return Err(ParseError::new(n, "duplicate block"));
        }
        let profile = spectrum.entry(key).map_err(|e| ParseError::new(n, e.to_string()))?;
        for (i, &s) in nodes.iter().enumerate() {
            let (rn, row) = lines.expect("a profile row")?;
            let toks: Vec<&str> = row.split_whitespace().collect();
            if toks.len() != width {
                return Err(ParseError::new(rn, format!("expected {width} columns, found {}", toks.len())));
            }
            let r_ok = if s == 0.0 {
                toks[0] == "inf"
            } else {
                toks[0].parse::<f64>().is_ok_and(|r| close(r, 1.0 / s))
            };
            if !r_ok {
                return Err(ParseError::new(rn, format!("radius `{}` does not match node {i}", toks[0])));
            }
            for k in 1..width {
                profile.get_mut(k - 1)[i] = parse_float(Some(toks[k]), rn, "profile value")?;
            }
        }
    }
    let theta: SymTensorField = transform_from_modes(&theta, &disc).map_err(|e| ParseError::new(lines.last, e.to_string()))?;
    let lapse: ScalarField = transform_from_modes(&lapse, &disc).map_err(|e| ParseError::new(lines.last, e.to_string()))?;
    MetricState::new(theta, lapse).map_err(|e| ParseError::new(lines.last, e.to_string()))
}
