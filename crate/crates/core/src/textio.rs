//! Plain-text matrix and vector files.
//!
//! Matrix: a header line `n p`, then `n` lines of `p` whitespace-separated
//! reals. Vector: one real per line. Blank lines are ignored in both.
//! Values are written with 17 significant digits so they parse back exactly.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn parse_real(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| Error::parse(line, format!("malformed number {token:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite value {token:?}")));
    }
    Ok(v)
}

fn parse_dim(token: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let t = token.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    let v: usize = t
        .parse()
        .map_err(|_| Error::parse(line, format!("malformed {what} {t:?}")))?;
    if v == 0 {
        return Err(Error::parse(line, format!("{what} must be positive")));
    }
    Ok(v)
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or_else(|| Error::parse(1, "empty matrix file"))?;
    let mut tokens = header.split_whitespace();
    let n = parse_dim(tokens.next(), hline, "row count")?;
    let p = parse_dim(tokens.next(), hline, "column count")?;
    if tokens.next().is_some() {
        return Err(Error::parse(hline, "header must be exactly `n p`"));
    }

    let mut data = Vec::new();
    let mut rows = 0usize;
    for (lno, line) in lines {
        if rows == n {
            return Err(Error::parse(lno, format!("more than {n} data rows")));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            if data.len() - before == p {
                return Err(Error::parse(lno, format!("more than {p} values in row")));
            }
            data.push(parse_real(tok, lno)?);
        }
        if data.len() - before != p {
            return Err(Error::parse(
                lno,
                format!("expected {p} values, found {}", data.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::parse(
            text.lines().count().max(1),
            format!("expected {n} data rows, found {rows}"),
        ));
    }
    Ok(DMatrix::from_row_slice(n, p, &data))
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_vector(text: &str) -> Result<DVector<f64>> {
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let tok = tokens.next().expect("nonempty line");
        if tokens.next().is_some() {
            return Err(Error::parse(i + 1, "expected one value per line"));
        }
        data.push(parse_real(tok, i + 1)?);
    }
    if data.is_empty() {
        return Err(Error::parse(1, "empty vector file"));
    }
    Ok(DVector::from_vec(data))
}

pub fn format_vector(v: &DVector<f64>) -> String {
    let mut out = String::new();
    for x in v.iter() {
        writeln!(out, "{x:.16e}").unwrap();
    }
    out
}
