//! The grid mini-language: `x:start:stop:count[,t:start:stop:count]`.

use vessels::grid::{Axis, Grid2};

fn parse_axis(part: &str, tag: &str) -> Result<Axis<f64>, String> {
    let fields: Vec<&str> = part.split(':').collect();
    if fields.len() != 4 || fields[0] != tag {
        return Err(format!("expected {tag}:start:stop:count, got {part:?}"));
    }
    let start: f64 = fields[1].parse().map_err(|_| format!("bad start in {part:?}"))?;
    let stop: f64 = fields[2].parse().map_err(|_| format!("bad stop in {part:?}"))?;
    let count: usize = fields[3].parse().map_err(|_| format!("bad count in {part:?}"))?;
    if count < 1 {
        return Err(format!("count must be at least 1 in {part:?}"));
    }
    if count > 1 && stop == start {
        return Err(format!("degenerate axis range in {part:?}"));
    }
    Ok(Axis::linspace(start, stop, count))
}

/// Parse `x:a:b:n` or `x:a:b:n,t:c:d:m` into a grid (a missing t-axis
/// becomes the single slice t = 0).
pub fn parse_grid(spec: &str) -> Result<Grid2<f64>, String> {
    let parts: Vec<&str> = spec.split(',').collect();
    match parts.len() {
        1 => Ok(Grid2 {
            x: parse_axis(parts[0], "x")?,
            t: Axis { start: 0.0, step: 1.0, count: 1 },
        }),
        2 => Ok(Grid2 { x: parse_axis(parts[0], "x")?, t: parse_axis(parts[1], "t")? }),
        _ => Err(format!("expected one or two axes, got {spec:?}")),
    }
}
