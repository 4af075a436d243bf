//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use phasefield_core::material::MaterialParams;
use phasefield_core::mesh::{generate_unit_square_mesh, insert_slit, SlitSpec};
use phasefield_core::subsolvers::FeSystem;

/// What a legacy VTK file declares, as read by [`check_vtk`].
#[derive(Debug, Default)]
pub struct VtkSummary {
    pub points: usize,
    pub cells: usize,
    pub scalars: Vec<String>,
    pub vectors: Vec<String>,
}

/// Independent reader for legacy ASCII unstructured-grid VTK files. Checks
/// the header, section sizes, index ranges, cell types and that every data
/// value parses as a finite number.
pub fn check_vtk(text: &str) -> Result<VtkSummary, String> {
    let mut lines = text.lines();
    let mut next = |what: &str| lines.next().ok_or_else(|| format!("unexpected end of file, expected {what}"));
    let version = next("version line")?;
    if !version.starts_with("# vtk DataFile Version ") {
        return Err(format!("bad version line `{version}`"));
    }
    let title = next("title")?;
    if title.len() > 256 {
        return Err("title longer than 256 characters".into());
    }
    if next("format")?.trim() != "ASCII" {
        return Err("not ASCII".into());
    }
    if next("dataset")?.trim() != "DATASET UNSTRUCTURED_GRID" {
        return Err("not an unstructured grid".into());
    }
    let rest: Vec<&str> = lines.collect();
    let mut tokens = rest.iter().flat_map(|l| l.split_whitespace());
    let mut word = |what: &str| tokens.next().ok_or_else(|| format!("unexpected end of file, expected {what}"));
    let mut summary = VtkSummary::default();

    if word("POINTS")? != "POINTS" {
        return Err("expected POINTS".into());
    }
    summary.points = word("point count")?.parse().map_err(|_| "bad point count")?;
    let dtype = word("point type")?;
    if !matches!(dtype, "float" | "double") {
        return Err(format!("unsupported point type {dtype}"));
    }
    for _ in 0..3 * summary.points {
        let v: f64 = word("coordinate")?.parse().map_err(|_| "bad coordinate")?;
        if !v.is_finite() {
            return Err("non-finite coordinate".into());
        }
    }
    if word("CELLS")? != "CELLS" {
        return Err("expected CELLS".into());
    }
    summary.cells = word("cell count")?.parse().map_err(|_| "bad cell count")?;
    let size: usize = word("cell list size")?.parse().map_err(|_| "bad cell list size")?;
    let mut read = 0;
    for _ in 0..summary.cells {
        let k: usize = word("cell size")?.parse().map_err(|_| "bad cell size")?;
        read += k + 1;
        for _ in 0..k {
            let idx: usize = word("cell index")?.parse().map_err(|_| "bad cell index")?;
            if idx >= summary.points {
                return Err(format!("cell index {idx} out of range"));
            }
        }
    }
    if read != size {
        return Err(format!("cell list size {size} but read {read}"));
    }
    if word("CELL_TYPES")? != "CELL_TYPES" {
        return Err("expected CELL_TYPES".into());
    }
    let n: usize = word("cell type count")?.parse().map_err(|_| "bad cell type count")?;
    if n != summary.cells {
        return Err("CELL_TYPES count differs from CELLS".into());
    }
    for _ in 0..n {
        if word("cell type")? != "9" {
            return Err("cell type is not VTK_QUAD".into());
        }
    }
    if word("POINT_DATA")? != "POINT_DATA" {
        return Err("expected POINT_DATA".into());
    }
    let n: usize = word("point data count")?.parse().map_err(|_| "bad point data count")?;
    if n != summary.points {
        return Err("POINT_DATA count differs from POINTS".into());
    }
    while let Ok(kind) = word("data section") {
        let name = word("array name")?.to_string();
        let _ty = word("array type")?;
        let comps = match kind {
            "SCALARS" => {
                if word("component count")? != "1" {
                    return Err("only 1-component scalars expected".into());
                }
                if word("LOOKUP_TABLE")? != "LOOKUP_TABLE" {
                    return Err("expected LOOKUP_TABLE".into());
                }
                word("table name")?;
                summary.scalars.push(name);
                1
            }
            "VECTORS" => {
                summary.vectors.push(name);
                3
            }
            other => return Err(format!("unexpected section {other}")),
        };
        for _ in 0..comps * n {
            let v: f64 = word("data value")?.parse().map_err(|_| "bad data value")?;
            if !v.is_finite() {
                return Err("non-finite data value".into());
            }
        }
    }
    Ok(summary)
}

/// Single edge notched shear geometry after `r` refinements.
pub fn sen_shear_system(r: u32) -> FeSystem {
    let mesh = insert_slit(&generate_unit_square_mesh(r), &SlitSpec::new([0.0, 0.5], [0.5, 0.5])).unwrap();
    FeSystem::new(mesh).unwrap()
}

/// Shear-test material with ε = 2h and γ = 10³ G_c/ε.
pub fn sen_shear_params(sys: &FeSystem) -> MaterialParams {
    let eps = 2.0 * sys.mesh().h();
    let gc = 2.7e-3;
    MaterialParams {
        mu: 80.77,
        lambda: 121.15,
        gc,
        kappa: 1e-10,
        eps,
        gamma: 1e3 * gc / eps,
    }
}
