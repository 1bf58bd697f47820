//! Deterministic output writers and spectral-data JSON parsing.
//!
//! Numbers are always printed with 17 significant digits in scientific
//! notation, so identical inputs produce byte-identical files.

use std::fmt::Write as _;
use vessels::construction::SpectralData;
use vessels::grid::{Grid2, ScalarField};
use vessels::moments::MomentSequence;
use vessels::{C64, Mat64};

/// 17-significant-digit scientific form; the fixed float format of every
/// emitted file.
pub fn num(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn jstr(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn jarr(items: impl IntoIterator<Item = String>) -> String {
    let body: Vec<String> = items.into_iter().collect();
    format!("[{}]", body.join(","))
}

pub fn jobj(pairs: &[(&str, String)]) -> String {
    let body: Vec<String> = pairs.iter().map(|(k, v)| format!("{}:{}", jstr(k), v)).collect();
    format!("{{{}}}", body.join(","))
}

pub fn jcomplex(z: C64) -> String {
    jarr([num(z.re), num(z.im)])
}

pub fn jmatrix(m: &Mat64) -> String {
    jarr((0..m.rows()).map(|i| jarr((0..m.cols()).map(|j| jcomplex(m[(i, j)])))))
}

/// CSV export of a scalar field with the fixed column set.
pub fn field_csv(f: &ScalarField<f64>) -> String {
    let mut out = String::from("x,t,re,im,masked\n");
    let grid = f.grid;
    for it in 0..grid.t.count {
        for ix in 0..grid.x.count {
            let idx = grid.index(ix, it);
            let masked = if f.mask[idx] { 0 } else { 1 };
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                num(grid.x.coord(ix)),
                num(grid.t.coord(it)),
                num(f.values[idx].re),
                num(f.values[idx].im),
                masked
            );
        }
    }
    out
}

pub fn grid_tag(grid: &Grid2<f64>) -> String {
    let x_stop = grid.x.coord(grid.x.count - 1);
    if grid.t.count > 1 {
        let t_stop = grid.t.coord(grid.t.count - 1);
        format!(
            "x:{}:{}:{},t:{}:{}:{}",
            grid.x.start, x_stop, grid.x.count, grid.t.start, t_stop, grid.t.count
        )
    } else {
        format!("x:{}:{}:{}", grid.x.start, x_stop, grid.x.count)
    }
}

/// Spectral-data JSON schema:
/// {"lambdas":[[re,im],...], "mus":[[re,im],...], "B0":[[[re,im],[re,im]],...],
///  "C0":[...2 rows...], "X0":[...n rows...], "x0":0.0}
pub fn spectral_to_json(data: &SpectralData<f64>) -> String {
    jobj(&[
        ("lambdas", jarr(data.lambdas.iter().map(|&z| jcomplex(z)))),
        ("mus", jarr(data.mus.iter().map(|&z| jcomplex(z)))),
        ("B0", jmatrix(&data.b0)),
        ("C0", jmatrix(&data.c0)),
        ("X0", jmatrix(&data.x0)),
        ("x0", num(data.anchor)),
    ])
}

fn parse_complex(v: &serde_json::Value) -> Result<C64, String> {
    let arr = v.as_array().ok_or("expected [re, im] pair")?;
    if arr.len() != 2 {
        return Err("complex entries must be [re, im]".into());
    }
    let re = arr[0].as_f64().ok_or("non-numeric real part")?;
    let im = arr[1].as_f64().ok_or("non-numeric imaginary part")?;
    Ok(C64::new(re, im))
}

fn parse_matrix(v: &serde_json::Value, what: &str) -> Result<Mat64, String> {
    let rows = v.as_array().ok_or_else(|| format!("{what} must be an array of rows"))?;
    let mut data: Vec<Vec<C64>> = Vec::with_capacity(rows.len());
    for row in rows {
        let cols = row.as_array().ok_or_else(|| format!("{what}: row must be an array"))?;
        let mut r = Vec::with_capacity(cols.len());
        for entry in cols {
            r.push(parse_complex(entry).map_err(|e| format!("{what}: {e}"))?);
        }
        data.push(r);
    }
    if data.is_empty() {
        return Ok(Mat64::zeros(0, 0));
    }
    let w = data[0].len();
    if data.iter().any(|r| r.len() != w) {
        return Err(format!("{what}: ragged rows"));
    }
    Ok(Mat64::from_rows(&data))
}

pub fn spectral_from_json(text: &str) -> Result<SpectralData<f64>, String> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = v.as_object().ok_or("top level must be an object")?;
    let get = |k: &str| obj.get(k).ok_or_else(|| format!("missing field {k:?}"));
    let lambdas = get("lambdas")?
        .as_array()
        .ok_or("lambdas must be an array")?
        .iter()
        .map(parse_complex)
        .collect::<Result<Vec<_>, _>>()?;
    let mus = get("mus")?
        .as_array()
        .ok_or("mus must be an array")?
        .iter()
        .map(parse_complex)
        .collect::<Result<Vec<_>, _>>()?;
    let n = lambdas.len();
    let mut b0 = parse_matrix(get("B0")?, "B0")?;
    let mut c0 = parse_matrix(get("C0")?, "C0")?;
    let mut x0 = parse_matrix(get("X0")?, "X0")?;
    // empty matrices parse as 0x0; give them their structural shapes
    if n == 0 {
        b0 = Mat64::zeros(0, 2);
        c0 = Mat64::zeros(2, 0);
        x0 = Mat64::zeros(0, 0);
    }
    let anchor = get("x0")?.as_f64().ok_or("x0 must be a number")?;
    Ok(SpectralData { lambdas, mus, b0, c0, x0, anchor })
}

/// MomentSequence JSON schema:
/// {"N":..., "grid":[...], "H":[[n][point][2][2] re/im pairs], "policy":{...}}
pub fn moments_to_json(seq: &MomentSequence<f64>) -> String {
    let grid = jarr(seq.axis.coords().iter().map(|&x| num(x)));
    let h = jarr((0..=seq.order).map(|n| {
        jarr(seq.h[n].iter().map(|m| {
            jarr((0..2).map(|r| jarr((0..2).map(|c| jcomplex(m[(r, c)])))))
        }))
    }));
    let policy = jobj(&[
        ("beta0", jcomplex(seq.policy.beta0)),
        (
            "trace_constants",
            jarr(seq.policy.trace_constants.iter().map(|&z| jcomplex(z))),
        ),
        (
            "skew_constants",
            jarr(seq.policy.skew_constants.iter().map(|&z| jcomplex(z))),
        ),
    ]);
    jobj(&[
        ("N", seq.order.to_string()),
        ("grid", grid),
        ("H", h),
        ("policy", policy),
    ])
}
