//! CSV import and export. Floats are written with the shortest round-trip
//! representation, so identical inputs give byte-identical files.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::geometry::GraphGeometry;
use crate::mesh::{ScalarField, SphereMesh};
use crate::monitor::MonitorRecord;

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn write_rows<W: Write>(w: W, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(row.into_iter().map(fmt))?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `theta, phi, value`, in node order.
pub fn write_field<W: Write>(w: W, field: &ScalarField) -> Result<()> {
    let mesh = field.mesh();
    write_rows(
        w,
        &["theta", "phi", "value"],
        field.values().iter().enumerate().map(|(i, &v)| {
            let (t, p) = mesh.coords(i);
            vec![t, p, v]
        }),
    )
}

/// Reads a `theta, phi, value` table written on some mesh of this crate.
/// The resolution is inferred from the distinct coordinates and every row
/// must sit on a node of that mesh.
pub fn read_field<R: Read>(r: R) -> Result<ScalarField> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Io(format!("field csv is missing column `{name}`")))
    };
    let (ct, cp, cv) = (col("theta")?, col("phi")?, col("value")?);
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::Io(format!(
                        "field csv row {}: bad number in column {c}",
                        line + 1
                    ))
                })
        };
        rows.push((get(ct)?, get(cp)?, get(cv)?));
    }
    let distinct = |mut xs: Vec<f64>| {
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        xs.len()
    };
    let n_theta = distinct(rows.iter().map(|r| r.0).collect());
    let n_phi = distinct(rows.iter().map(|r| r.1).collect());
    if n_theta * n_phi != rows.len() {
        return Err(Error::Io(format!(
            "field csv has {} rows but {n_theta} latitudes x {n_phi} longitudes",
            rows.len()
        )));
    }
    let reduced = n_phi == 1;
    let mesh = SphereMesh::build(n_theta, if reduced { 1 } else { n_phi }, reduced)?;
    let mut values = vec![f64::NAN; mesh.len()];
    for &(t, p, v) in &rows {
        let node = mesh.nearest_node(t, p);
        let (mt, mp) = mesh.coords(node);
        let dp = (mp - p).rem_euclid(std::f64::consts::TAU);
        if (mt - t).abs() > 1e-9 || dp.min(std::f64::consts::TAU - dp) > 1e-9 {
            return Err(Error::Io(format!(
                "field csv point ({t}, {p}) is not a node of the inferred mesh"
            )));
        }
        values[node] = v;
    }
    ScalarField::new(mesh, values)
}

pub const GEOMETRY_COLUMNS: [&str; 10] = [
    "theta", "phi", "r", "v", "H", "kappa1", "kappa2", "mu1", "mu2", "tau",
];

pub fn write_geometry<W: Write>(w: W, geom: &GraphGeometry) -> Result<()> {
    let mesh = geom.mesh();
    write_rows(
        w,
        &GEOMETRY_COLUMNS,
        geom.nodes().iter().enumerate().map(|(i, n)| {
            let (t, p) = mesh.coords(i);
            vec![
                t, p, n.r, n.v, n.mean, n.kappa[0], n.kappa[1], n.mu[0], n.mu[1], n.tau,
            ]
        }),
    )
}

pub const MONITOR_COLUMNS: [&str; 6] = ["t", "r_min", "r_max", "tau_min", "grad_max", "kappa_max"];

pub fn write_monitor<W: Write>(w: W, records: &[MonitorRecord]) -> Result<()> {
    write_rows(
        w,
        &MONITOR_COLUMNS,
        records
            .iter()
            .map(|m| vec![m.t, m.r_min, m.r_max, m.tau_min, m.grad_max, m.kappa_max]),
    )
}
