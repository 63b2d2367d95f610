//! CSV and JSON renderings of tables and spectra.

use std::io::Write;

use serde_json::{json, Value};

use crate::error::Result;
use crate::fbct::{DdtMatrix, FbctMatrix, Spectrum};
use crate::field::Field;

/// Writes `a,b,value` rows, optionally skipping pairs whose entry is forced.
pub fn write_fbct_csv<W: Write>(m: &FbctMatrix, out: W, nontrivial_only: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["a", "b", "value"])?;
    for (a, b, v) in m.entries() {
        if nontrivial_only && m.is_trivial(a, b) {
            continue;
        }
        w.serialize((a, b, v))?;
    }
    w.flush()?;
    Ok(())
}

pub fn fbct_json(m: &FbctMatrix) -> Value {
    square_json(m.field(), m.values())
}

/// Writes `a,b,count` rows of the DDT.
pub fn write_ddt_csv<W: Write>(m: &DdtMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["a", "b", "count"])?;
    let q = m.field().order();
    for a in 0..q {
        for (b, &v) in m.row(a).iter().enumerate() {
            w.serialize((a, b, v))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn ddt_json(m: &DdtMatrix) -> Value {
    square_json(m.field(), m.values())
}

fn square_json(field: &Field, values: &[u32]) -> Value {
    let rows: Vec<&[u32]> = values.chunks(field.size()).collect();
    json!({ "field": field.spec().to_string(), "matrix": rows })
}

pub fn spectrum_json(field: &Field, s: &Spectrum) -> Value {
    let counts: serde_json::Map<String, Value> = s
        .counts
        .iter()
        .map(|(v, k)| (v.to_string(), json!(k)))
        .collect();
    json!({ "field": field.spec().to_string(), "scope": s.scope, "counts": counts })
}

/// Writes `value,count` rows.
pub fn write_spectrum_csv<W: Write>(s: &Spectrum, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value", "count"])?;
    for (v, k) in &s.counts {
        w.serialize((v, k))?;
    }
    w.flush()?;
    Ok(())
}
