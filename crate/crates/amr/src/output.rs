//! Report, estimator and field files.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing a
//! value back yields the same `f64` and identical runs give identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use nematic_core::estimator::EstimatorResult;
use nematic_core::fem::reference::{node_position, NODES};
use nematic_core::fem::{Space, State};
use nematic_core::mesh::{CellId, QuadMesh};
use nematic_core::metrics::RunReport;
use nematic_core::problem::BoundaryData;

pub const REPORT_HEADER: &str =
    "level,cells,dofs,free_dofs,newton_iterations,linearizations,damping,initial_residual,final_residual,global_estimate";
pub const SUMMARY_HEADER: &str =
    "refinement,max_unit_length_deviation,gauss_law,free_energy,penalty_energy,dofs,work_units,timing_s";
pub const ESTIMATOR_HEADER: &str = "cell_level,ix,iy,theta,theta_full,volume_p,volume_q,edge_p,edge_q";
pub const CELLS_HEADER: &str = "cell_level,ix,iy,x0,y0,h";

/// Shortest decimal that parses back to `v`.
pub fn float(v: f64) -> String {
    format!("{v:?}")
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// One row per solved level.
pub fn report_csv(report: &RunReport) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for (l, e) in report.levels.iter().zip(&report.estimates) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            l.level,
            l.cells,
            l.dofs,
            l.free_dofs,
            l.iterations,
            l.linearizations,
            float(l.damping),
            float(l.initial_residual),
            float(l.residual),
            float(e.global)
        );
    }
    out
}

/// The final-state row of the summary table.
pub fn summary_csv(report: &RunReport) -> String {
    let m = &report.metrics;
    format!(
        "{SUMMARY_HEADER}\n{},{},{},{},{},{},{},{}\n",
        report.mode.name(),
        float(m.max_unit_length_deviation),
        float(m.gauss_conformance),
        float(m.energy.free),
        float(m.energy.penalty),
        report.final_dofs,
        float(report.work_units),
        float(report.wall_time)
    )
}

/// Human-readable table with the same quantities as the summary CSV.
pub fn summary_table(report: &RunReport) -> String {
    let m = &report.metrics;
    let mut out = format!(
        "{:<11} {:>13} {:>13} {:>13} {:>10} {:>9} {:>10}\n",
        "Refinement", "Max |n.n-1|", "Gauss Law", "Free Energy", "DOFs", "WUs", "Timing(s)"
    );
    let _ = writeln!(
        out,
        "{:<11} {:>13.3e} {:>13.3e} {:>13.4} {:>10} {:>9.3} {:>10.2}",
        report.mode.name(),
        m.max_unit_length_deviation,
        m.gauss_conformance,
        m.energy.free,
        report.final_dofs,
        report.work_units,
        report.wall_time
    );
    out
}

/// Both indicator conventions plus the four squared components, per cell.
pub fn estimator_csv(est: &EstimatorResult) -> String {
    let mut out = String::from(ESTIMATOR_HEADER);
    out.push('\n');
    for c in &est.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            c.cell.level,
            c.cell.ix,
            c.cell.iy,
            float(c.theta()),
            float(c.theta_full()),
            float(c.volume_p),
            float(c.volume_q),
            float(c.edge_p),
            float(c.edge_q)
        );
    }
    out
}

pub fn cells_csv(mesh: &QuadMesh) -> String {
    let mut out = String::from(CELLS_HEADER);
    out.push('\n');
    for c in mesh.cells() {
        let o = mesh.origin(c);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.level,
            c.ix,
            c.iy,
            float(o[0]),
            float(o[1]),
            float(mesh.side_length(c))
        );
    }
    out
}

/// Legacy-format unstructured grid: one quad per cell over its corner
/// vertices, with the fields sampled at the vertices and the indicator per cell.
/// Mid-edge and centre coefficients are not represented.
pub fn fields_vtk(state: &State, est: &EstimatorResult, title: &str) -> String {
    let mesh = state.mesh();
    let corners: Vec<usize> = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
        .iter()
        .map(|r| (0..NODES).find(|&a| node_position(a) == *r).expect("Q2 corner node"))
        .collect();

    // Vertices keyed by lattice position, ordered by row then column.
    let mut vertices: BTreeMap<[u64; 2], ([f64; 2], [f64; 4])> = BTreeMap::new();
    let mut quads = Vec::with_capacity(mesh.len());
    for (i, cell) in mesh.cells().iter().enumerate() {
        let coeffs = state.cell_coefficients(i);
        let (o, h) = (mesh.origin(cell), mesh.side_length(cell));
        let (lo, ls) = (cell.lattice_origin(), cell.lattice_size());
        let mut quad = [[0u64; 2]; 4];
        for (k, &a) in corners.iter().enumerate() {
            let r = node_position(a);
            let key = [lo[1] + ls * r[1] as u64, lo[0] + ls * r[0] as u64];
            vertices.entry(key).or_insert(([o[0] + h * r[0], o[1] + h * r[1]], coeffs[a]));
            quad[k] = key;
        }
        quads.push(quad);
    }
    let index: BTreeMap<[u64; 2], usize> = vertices.keys().enumerate().map(|(i, k)| (*k, i)).collect();

    let mut theta = vec![0.0; mesh.len()];
    for c in &est.cells {
        theta[mesh.index_of(&c.cell).expect("estimate for an active cell")] = c.theta();
    }

    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{}", title.replace('\n', " "));
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", vertices.len());
    for (p, _) in vertices.values() {
        let _ = writeln!(out, "{} {} 0", float(p[0]), float(p[1]));
    }
    let _ = writeln!(out, "CELLS {} {}", quads.len(), 5 * quads.len());
    for q in &quads {
        let _ = writeln!(out, "4 {} {} {} {}", index[&q[0]], index[&q[1]], index[&q[2]], index[&q[3]]);
    }
    let _ = writeln!(out, "CELL_TYPES {}", quads.len());
    for _ in &quads {
        let _ = writeln!(out, "9");
    }
    let _ = writeln!(out, "POINT_DATA {}", vertices.len());
    for (f, name) in ["n1", "n2", "n3", "phi"].iter().enumerate() {
        let _ = writeln!(out, "SCALARS {name} double 1");
        let _ = writeln!(out, "LOOKUP_TABLE default");
        for (_, v) in vertices.values() {
            let _ = writeln!(out, "{}", float(v[f]));
        }
    }
    let _ = writeln!(out, "CELL_DATA {}", quads.len());
    let _ = writeln!(out, "SCALARS theta double 1");
    let _ = writeln!(out, "LOOKUP_TABLE default");
    for t in theta {
        let _ = writeln!(out, "{}", float(t));
    }
    out
}

/// The parts of a legacy grid file this crate writes.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkGrid {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub point_data: BTreeMap<String, Vec<f64>>,
    pub cell_data: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, thiserror::Error)]
#[error("malformed grid file: {0}")]
pub struct ParseError(String);

/// Reads an ASCII unstructured grid with scalar point and cell data.
pub fn parse_vtk(text: &str) -> Result<VtkGrid, ParseError> {
    let err = |m: &str| ParseError(m.to_string());
    let mut tokens = text.lines().skip(2).flat_map(str::split_whitespace);
    let mut next = || tokens.next().ok_or_else(|| err("unexpected end of file"));
    let count = |t: &str| t.parse::<usize>().map_err(|_| err("bad count"));
    let real = |t: &str| t.parse::<f64>().map_err(|_| err("bad number"));

    if next()? != "ASCII" || next()? != "DATASET" || next()? != "UNSTRUCTURED_GRID" {
        return Err(err("not an ASCII unstructured grid"));
    }
    let mut grid = VtkGrid {
        points: Vec::new(),
        cells: Vec::new(),
        point_data: BTreeMap::new(),
        cell_data: BTreeMap::new(),
    };
    let mut section: Option<(bool, usize)> = None;
    while let Ok(word) = next() {
        match word {
            "POINTS" => {
                let n = count(next()?)?;
                next()?;
                for _ in 0..n {
                    grid.points.push([real(next()?)?, real(next()?)?, real(next()?)?]);
                }
            }
            "CELLS" => {
                let n = count(next()?)?;
                next()?;
                for _ in 0..n {
                    let k = count(next()?)?;
                    let ids = (0..k).map(|_| next().and_then(|t| count(t))).collect::<Result<_, _>>()?;
                    grid.cells.push(ids);
                }
            }
            "CELL_TYPES" => {
                let n = count(next()?)?;
                for _ in 0..n {
                    if next()? != "9" {
                        return Err(err("only quadrilateral cells are supported"));
                    }
                }
            }
            "POINT_DATA" => section = Some((true, count(next()?)?)),
            "CELL_DATA" => section = Some((false, count(next()?)?)),
            "SCALARS" => {
                let name = next()?.to_string();
                next()?;
                if next()? != "1" || next()? != "LOOKUP_TABLE" {
                    return Err(err("expected one component and a lookup table"));
                }
                next()?;
                let (on_points, n) = section.ok_or_else(|| err("scalars outside a data section"))?;
                let values = (0..n).map(|_| next().and_then(|t| real(t))).collect::<Result<_, _>>()?;
                let target = if on_points { &mut grid.point_data } else { &mut grid.cell_data };
                target.insert(name, values);
            }
            other => return Err(ParseError(format!("unexpected keyword `{other}`"))),
        }
    }
    Ok(grid)
}

/// Full coefficient vector with the mesh it lives on, enough to rebuild the
/// state exactly.
pub fn state_dump(state: &State) -> String {
    let mesh = state.mesh();
    let mut out = format!("root {}\ncells {}\n", mesh.root(), mesh.len());
    for c in mesh.cells() {
        let _ = writeln!(out, "{} {} {}", c.level, c.ix, c.iy);
    }
    let _ = writeln!(out, "values {}", state.values().len());
    for v in state.values() {
        let _ = writeln!(out, "{}", float(*v));
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum DumpError {
    #[error("malformed state dump: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] nematic_core::Error),
}

/// Inverse of [`state_dump`] for the given boundary data.
pub fn read_state_dump(text: &str, boundary: BoundaryData) -> Result<State, DumpError> {
    let bad = |m: &str| DumpError::Format(m.to_string());
    let mut lines = text.lines();
    let mut header = |key: &str| -> Result<usize, DumpError> {
        let line = lines.next().ok_or_else(|| bad("truncated"))?;
        line.strip_prefix(key)
            .and_then(|r| r.trim().parse().ok())
            .ok_or_else(|| DumpError::Format(format!("expected `{key} <count>`")))
    };
    let root = header("root")?;
    let n = header("cells")?;
    let mut cells = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| bad("truncated cell list"))?;
        let f: Vec<u32> = line.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|_| bad("cell"))?;
        let [level, ix, iy] = f[..] else { return Err(bad("cell needs level, ix, iy")) };
        cells.push(CellId::new(level as u8, ix, iy));
    }
    let line = lines.next().ok_or_else(|| bad("truncated"))?;
    let k: usize = line.strip_prefix("values").and_then(|r| r.trim().parse().ok()).ok_or_else(|| bad("values"))?;
    let values = lines.take(k).map(str::parse::<f64>).collect::<Result<Vec<_>, _>>().map_err(|_| bad("value"))?;
    if values.len() != k {
        return Err(bad("truncated value list"));
    }
    let mesh = QuadMesh::from_cells(root as u32, cells)?;
    Ok(State::from_values(Space::new(mesh, boundary), values)?)
}
