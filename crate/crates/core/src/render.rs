//! Space-time diagrams as plain PGM or text.
//!
//! Rows are time steps, top row first; columns are the cells `lo..=hi`.
//! In PGM output a cell's gray value is its symbol index and `maxval` is the
//! alphabet size minus one (at least 1).

use crate::shift::{stepper, Automaton, Configuration, ShiftError, Sym};

/// Rows `t = 0..=steps` of the orbit of `c`, restricted to `lo..=hi`.
pub fn diagram(
    rule: &dyn Automaton,
    c: &Configuration,
    steps: usize,
    lo: i64,
    hi: i64,
) -> Result<Vec<Vec<Sym>>, ShiftError> {
    let mut st = stepper(rule, c);
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push((lo..=hi).map(|i| st.get(i)).collect());
    for _ in 0..steps {
        st.advance()?;
        rows.push((lo..=hi).map(|i| st.get(i)).collect());
    }
    Ok(rows)
}

pub fn to_pgm(rows: &[Vec<Sym>], alphabet_size: usize) -> String {
    let w = rows.first().map_or(0, Vec::len);
    let maxval = alphabet_size.saturating_sub(1).max(1);
    let mut out = format!("P2\n{} {}\n{}\n", w, rows.len(), maxval);
    for row in rows {
        let line: Vec<String> = row.iter().map(|s| s.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// One line per row, each symbol drawn by `glyph`.
pub fn to_text(rows: &[Vec<Sym>], glyph: impl Fn(Sym) -> char) -> String {
    let mut out = String::new();
    for row in rows {
        out.extend(row.iter().map(|&s| glyph(s)));
        out.push('\n');
    }
    out
}

/// Parses a plain PGM back into rows, for checking output.
pub fn parse_pgm(text: &str) -> Option<(usize, Vec<Vec<Sym>>)> {
    let mut it = text.split_whitespace();
    if it.next()? != "P2" {
        return None;
    }
    let w: usize = it.next()?.parse().ok()?;
    let h: usize = it.next()?.parse().ok()?;
    let maxval: usize = it.next()?.parse().ok()?;
    let vals: Vec<Sym> = it.map(|v| v.parse().ok()).collect::<Option<_>>()?;
    if vals.len() != w * h || vals.iter().any(|&v| v as usize > maxval) {
        return None;
    }
    let rows = if w == 0 { vec![Vec::new(); h] } else { vals.chunks(w).map(<[Sym]>::to_vec).collect() };
    Some((maxval, rows))
}
