//! CSV and JSON serialization of grids and spectra.

use crate::density::{GridDensity, SpectralFunction};
use crate::error::{Error, Result};
use crate::special::C64;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

pub fn write_density_csv<W: Write>(d: &GridDensity, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["x", "value"])?;
    for (i, v) in d.values.iter().enumerate() {
        wr.write_record([d.x(i).to_string(), v.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads `x,value` rows; the x column must be uniform with power-of-two
/// length. The truncated mass is re-estimated from the tails.
pub fn read_density_csv<R: Read>(r: R) -> Result<GridDensity> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Parse(format!("row {}: expected 2 columns, found {}", line + 2, rec.len())));
        }
        let parse = |s: &str, what: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: bad {what} '{s}': {e}", line + 2)))
        };
        xs.push(parse(&rec[0], "x")?);
        vs.push(parse(&rec[1], "value")?);
    }
    if xs.len() < 4 {
        return Err(Error::Parse(format!("need at least 4 rows, found {}", xs.len())));
    }
    let dx = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    for (i, &x) in xs.iter().enumerate() {
        if (x - (xs[0] + i as f64 * dx)).abs() > 1e-9 * dx.abs().max(1.0) {
            return Err(Error::Parse(format!("row {}: x column is not uniformly spaced", i + 2)));
        }
    }
    let mut d = GridDensity::new(xs[0], dx, vs, 0.0)?;
    d.truncated_mass = d.estimate_truncated_mass().min(1.0 - 1e-15);
    Ok(d)
}

pub fn write_spectrum_csv<W: Write>(s: &SpectralFunction, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["k", "re", "im"])?;
    for (j, v) in s.values.iter().enumerate() {
        wr.write_record([s.k(j).to_string(), v.re.to_string(), v.im.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_spectrum_csv<R: Read>(r: R) -> Result<SpectralFunction> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut ks = Vec::new();
    let mut vs = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        if rec.len() < 3 {
            return Err(Error::Parse(format!("row {}: expected 3 columns", line + 2)));
        }
        let p = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: '{s}': {e}", line + 2)));
        ks.push(p(&rec[0])?);
        vs.push(C64::new(p(&rec[1])?, p(&rec[2])?));
    }
    if ks.len() < 4 {
        return Err(Error::Parse("need at least 4 rows".into()));
    }
    let dk = ks[1] - ks[0];
    let k_max = -ks[0];
    if (k_max - dk * (ks.len() / 2) as f64).abs() > 1e-9 * k_max {
        return Err(Error::Parse("k column must start at -k_max with n_k/2 negative nodes".into()));
    }
    SpectralFunction::new(k_max, vs, None)
}

/// JSON layout: metadata header plus arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityJson {
    pub meta: DensityMeta,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityMeta {
    pub kind: String,
    pub n: usize,
    pub x_min: f64,
    pub dx: f64,
    pub truncated_mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumJson {
    pub meta: SpectrumMeta,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub kind: String,
    pub n_k: usize,
    pub k_max: f64,
    pub dk: f64,
    pub closed_form: Option<crate::cf::ClosedForm>,
}

pub fn density_to_json(d: &GridDensity) -> DensityJson {
    DensityJson {
        meta: DensityMeta {
            kind: "grid_density".into(),
            n: d.len(),
            x_min: d.x_min,
            dx: d.dx,
            truncated_mass: d.truncated_mass,
        },
        values: d.values.clone(),
    }
}

pub fn density_from_json(j: DensityJson) -> Result<GridDensity> {
    if j.meta.n != j.values.len() {
        return Err(Error::Parse(format!("header n = {} but {} values", j.meta.n, j.values.len())));
    }
    GridDensity::new(j.meta.x_min, j.meta.dx, j.values, j.meta.truncated_mass)
}

pub fn spectrum_to_json(s: &SpectralFunction) -> SpectrumJson {
    SpectrumJson {
        meta: SpectrumMeta {
            kind: "spectral_function".into(),
            n_k: s.n_k(),
            k_max: s.k_max,
            dk: s.dk,
            closed_form: s.closed_form.clone(),
        },
        re: s.values.iter().map(|v| v.re).collect(),
        im: s.values.iter().map(|v| v.im).collect(),
    }
}

pub fn spectrum_from_json(j: SpectrumJson) -> Result<SpectralFunction> {
    if j.re.len() != j.im.len() || j.re.len() != j.meta.n_k {
        return Err(Error::Parse("inconsistent spectrum array lengths".into()));
    }
    let values = j.re.iter().zip(&j.im).map(|(&a, &b)| C64::new(a, b)).collect();
    SpectralFunction::new(j.meta.k_max, values, j.meta.closed_form)
}

pub fn write_json<T: Serialize, W: Write>(value: &T, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}
