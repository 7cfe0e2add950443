//! Text grid format:
//!
//! ```text
//! EDGRID 1
//! dims nx ny nz
//! cell a b c
//! origin ox oy oz
//! v0 v1 v2 ...        (nx*ny*nz values, x fastest)
//! ```

use std::fmt::Write as _;

use super::{Cell, DensityError, DensityGrid};

fn bad(msg: impl Into<String>) -> DensityError {
    DensityError::Format(msg.into())
}

fn header<'a, const N: usize>(line: Option<&'a str>, key: &str) -> Result<[&'a str; N], DensityError> {
    let line = line.ok_or_else(|| bad(format!("missing {key} line")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(bad(format!("expected {key:?} line, got {line:?}")));
    }
    let fields: Vec<&str> = parts.collect();
    fields
        .try_into()
        .map_err(|_| bad(format!("{key} line needs {N} fields")))
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T, DensityError> {
    s.parse().map_err(|_| bad(format!("bad number {s:?}")))
}

pub fn read_grid(text: &str) -> Result<DensityGrid, DensityError> {
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("EDGRID 1") => {}
        other => return Err(bad(format!("bad magic {other:?}"))),
    }
    let d: [&str; 3] = header(lines.next(), "dims")?;
    let c: [&str; 3] = header(lines.next(), "cell")?;
    let o: [&str; 3] = header(lines.next(), "origin")?;
    let dims = [num(d[0])?, num(d[1])?, num(d[2])?];
    let edges: [f64; 3] = [num(c[0])?, num(c[1])?, num(c[2])?];
    if edges.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(bad("cell edges must be positive"));
    }
    let cell = Cell {
        origin: [num(o[0])?, num(o[1])?, num(o[2])?],
        edges,
    };
    let values: Vec<f64> = lines
        .flat_map(str::split_whitespace)
        .map(num)
        .collect::<Result<_, _>>()?;
    let expected = dims.iter().product::<usize>();
    if values.len() != expected {
        return Err(bad(format!("dims {dims:?} need {expected} values, found {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite value"));
    }
    Ok(DensityGrid { cell, dims, values })
}

/// Writes values in shortest round-trip form, so reading back is bit-exact.
pub fn write_grid(grid: &DensityGrid) -> String {
    let mut s = String::new();
    let [nx, ny, nz] = grid.dims;
    let [a, b, c] = grid.cell.edges;
    let [ox, oy, oz] = grid.cell.origin;
    let _ = writeln!(s, "EDGRID 1\ndims {nx} {ny} {nz}\ncell {a} {b} {c}\norigin {ox} {oy} {oz}");
    for row in grid.values.chunks(8) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}
