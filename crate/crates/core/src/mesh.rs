//! Quadrilateral meshes: structured generation on the unit square, slit
//! insertion by node duplication, and the `quadmesh 1` text format.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cell {cell}{}: non-convex or inverted (corner {corner} has non-positive Jacobian)", fmt_line(*.line))]
    InvertedCell {
        cell: usize,
        corner: usize,
        line: Option<usize>,
    },
    #[error("cell {cell}{}: node index {node} out of range", fmt_line(*.line))]
    NodeOutOfRange {
        cell: usize,
        node: usize,
        line: Option<usize>,
    },
    #[error("boundary facet {facet} ({a}, {b}){}: {reason}", fmt_line(*.line))]
    DanglingFacet {
        facet: usize,
        a: usize,
        b: usize,
        reason: &'static str,
        line: Option<usize>,
    },
    #[error("unknown boundary tag `{0}`")]
    UnknownTag(String),
    #[error("slit does not align with mesh edges: {0}")]
    SlitMisaligned(String),
    #[error("mesh has no cells")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn fmt_line(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" (line {l})"),
        None => String::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Left,
    Right,
    Bottom,
    Top,
    SlitLower,
    SlitUpper,
    Other,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 7] = [
        BoundaryTag::Left,
        BoundaryTag::Right,
        BoundaryTag::Bottom,
        BoundaryTag::Top,
        BoundaryTag::SlitLower,
        BoundaryTag::SlitUpper,
        BoundaryTag::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Left => "left",
            BoundaryTag::Right => "right",
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::Top => "top",
            BoundaryTag::SlitLower => "slit_lower",
            BoundaryTag::SlitUpper => "slit_upper",
            BoundaryTag::Other => "other",
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundaryTag {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BoundaryTag::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| MeshError::UnknownTag(s.to_string()))
    }
}

/// A boundary edge. Node order follows the owning cell's counterclockwise
/// orientation, so the outward normal is the edge vector rotated clockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFacet {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Point>,
    cells: Vec<[usize; 4]>,
    facets: Vec<BoundaryFacet>,
    /// (cell, local edge) owning each facet; local edge k joins corners k and k+1.
    facet_owner: Vec<(usize, usize)>,
    /// (lower, upper) node pairs created by slit insertion.
    slit_pairs: Vec<(usize, usize)>,
    h: f64,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.nodes.len() == other.nodes.len()
            && self
                .nodes
                .iter()
                .zip(&other.nodes)
                .all(|(a, b)| a[0].to_bits() == b[0].to_bits() && a[1].to_bits() == b[1].to_bits())
            && self.cells == other.cells
            && self.facets == other.facets
    }
}

impl Mesh {
    /// Builds a mesh and checks its invariants. Facets given in either node
    /// order are re-oriented to match their owning cell.
    pub fn new(
        nodes: Vec<Point>,
        cells: Vec<[usize; 4]>,
        facets: Vec<BoundaryFacet>,
    ) -> Result<Mesh, MeshError> {
        Self::build(nodes, cells, facets, None, None)
    }

    fn build(
        nodes: Vec<Point>,
        cells: Vec<[usize; 4]>,
        mut facets: Vec<BoundaryFacet>,
        cell_lines: Option<&[usize]>,
        facet_lines: Option<&[usize]>,
    ) -> Result<Mesh, MeshError> {
        if cells.is_empty() {
            return Err(MeshError::Empty);
        }
        let mut edge_count: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        let mut h = f64::INFINITY;
        for (c, cell) in cells.iter().enumerate() {
            let line = cell_lines.map(|l| l[c]);
            for &n in cell {
                if n >= nodes.len() {
                    return Err(MeshError::NodeOutOfRange { cell: c, node: n, line });
                }
            }
            let p = cell.map(|n| nodes[n]);
            for k in 0..4 {
                let prev = p[(k + 3) % 4];
                let cur = p[k];
                let next = p[(k + 1) % 4];
                let cross = (next[0] - cur[0]) * (prev[1] - cur[1])
                    - (next[1] - cur[1]) * (prev[0] - cur[0]);
                if !(cross > 0.0) {
                    return Err(MeshError::InvertedCell { cell: c, corner: k, line });
                }
            }
            let mut diam: f64 = 0.0;
            for a in 0..4 {
                for b in a + 1..4 {
                    diam = diam.max(dist(p[a], p[b]));
                }
            }
            h = h.min(diam);
            for k in 0..4 {
                let (a, b) = (cell[k], cell[(k + 1) % 4]);
                edge_count
                    .entry((a.min(b), a.max(b)))
                    .or_default()
                    .push((c, k));
            }
        }

        let mut facet_owner = Vec::with_capacity(facets.len());
        let mut seen = BTreeSet::new();
        for (f, facet) in facets.iter_mut().enumerate() {
            let [a, b] = facet.nodes;
            let line = facet_lines.map(|l| l[f]);
            let dangling = |reason| MeshError::DanglingFacet { facet: f, a, b, reason, line };
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(dangling("listed twice"));
            }
            match edge_count.get(&key).map(Vec::as_slice) {
                Some([(c, k)]) => {
                    facet.nodes = [cells[*c][*k], cells[*c][(*k + 1) % 4]];
                    facet_owner.push((*c, *k));
                }
                Some(_) => return Err(dangling("interior edge shared by two cells")),
                None => return Err(dangling("not an edge of any cell")),
            }
        }

        Ok(Mesh {
            nodes,
            cells,
            facets,
            facet_owner,
            slit_pairs: Vec::new(),
            h,
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.facets
    }

    /// Owning cell and local edge index of boundary facet `f`.
    pub fn facet_owner(&self, f: usize) -> (usize, usize) {
        self.facet_owner[f]
    }

    pub fn slit_pairs(&self) -> &[(usize, usize)] {
        &self.slit_pairs
    }

    /// Minimal cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_coords(&self, c: usize) -> [Point; 4] {
        self.cells[c].map(|n| self.nodes[n])
    }

    pub fn area(&self) -> f64 {
        (0..self.num_cells())
            .map(|c| {
                let p = self.cell_coords(c);
                0.5 * (0..4)
                    .map(|k| {
                        let (a, b) = (p[k], p[(k + 1) % 4]);
                        a[0] * b[1] - b[0] * a[1]
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    fn bounding_diameter(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        dist(lo, hi)
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Uniformly refined 2×2 grid on the unit square [0,1]² (mm).
pub fn generate_unit_square_mesh(refinements: u32) -> Mesh {
    let n = 2usize << refinements;
    let np = n + 1;
    let idx = |i: usize, j: usize| j * np + i;
    let mut nodes = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            nodes.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let tol = 1e-12 * 2f64.sqrt();
    let tag_of = |a: Point, b: Point| {
        let on = |d: usize, v: f64| (a[d] - v).abs() <= tol && (b[d] - v).abs() <= tol;
        if on(1, 0.0) {
            BoundaryTag::Bottom
        } else if on(1, 1.0) {
            BoundaryTag::Top
        } else if on(0, 0.0) {
            BoundaryTag::Left
        } else if on(0, 1.0) {
            BoundaryTag::Right
        } else {
            BoundaryTag::Other
        }
    };
    let mut facets = Vec::with_capacity(4 * n);
    let mut push = |a: usize, b: usize, nodes: &[Point]| {
        facets.push(BoundaryFacet {
            nodes: [a, b],
            tag: tag_of(nodes[a], nodes[b]),
        })
    };
    for i in 0..n {
        push(idx(i, 0), idx(i + 1, 0), &nodes);
    }
    for j in 0..n {
        push(idx(n, j), idx(n, j + 1), &nodes);
    }
    for i in (0..n).rev() {
        push(idx(i + 1, n), idx(i, n), &nodes);
    }
    for j in (0..n).rev() {
        push(idx(0, j + 1), idx(0, j), &nodes);
    }
    Mesh::new(nodes, cells, facets).expect("structured mesh is valid")
}

/// A straight, axis-aligned crack segment.
///
/// For a horizontal slit, cells with centroid below the line keep the
/// original nodes (`slit_lower`) and cells above get the duplicates
/// (`slit_upper`). For a vertical slit, "lower" is the side of smaller x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlitSpec {
    pub start: Point,
    pub end: Point,
}

impl SlitSpec {
    pub fn new(start: Point, end: Point) -> Self {
        SlitSpec { start, end }
    }

    fn length(&self) -> f64 {
        dist(self.start, self.end)
    }
}

/// Duplicates the nodes along `slit` so the two crack faces are separate
/// boundaries. Endpoints that lie on the existing boundary (the crack mouth)
/// are duplicated as well; endpoints inside the domain (tips) are shared.
pub fn insert_slit(mesh: &Mesh, slit: &SlitSpec) -> Result<Mesh, MeshError> {
    let len = slit.length();
    if len == 0.0 {
        return Ok(mesh.clone());
    }
    let tol = 1e-12 * mesh.bounding_diameter().max(1.0);
    let (along, across) = if (slit.start[1] - slit.end[1]).abs() <= tol {
        (0, 1)
    } else if (slit.start[0] - slit.end[0]).abs() <= tol {
        (1, 0)
    } else {
        return Err(MeshError::SlitMisaligned("segment is not axis-aligned".into()));
    };
    let level = slit.start[across];
    let (lo, hi) = {
        let (a, b) = (slit.start[along], slit.end[along]);
        (a.min(b), a.max(b))
    };
    let on_segment =
        |p: Point| (p[across] - level).abs() <= tol && p[along] >= lo - tol && p[along] <= hi + tol;

    // mesh edges lying on the segment
    let mut seg_edges: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (c, cell) in mesh.cells.iter().enumerate() {
        for k in 0..4 {
            let (a, b) = (cell[k], cell[(k + 1) % 4]);
            if on_segment(mesh.nodes[a]) && on_segment(mesh.nodes[b]) {
                seg_edges.entry((a.min(b), a.max(b))).or_default().push(c);
            }
        }
    }
    let covered: f64 = seg_edges
        .keys()
        .map(|&(a, b)| dist(mesh.nodes[a], mesh.nodes[b]))
        .sum();
    if (covered - len).abs() > 1e-9 * len {
        return Err(MeshError::SlitMisaligned(format!(
            "mesh edges cover {covered} of segment length {len}"
        )));
    }
    for (&(a, b), owners) in &seg_edges {
        if owners.len() != 2 {
            return Err(MeshError::SlitMisaligned(format!(
                "edge ({a}, {b}) on the segment is not an interior edge"
            )));
        }
    }
    let seg_nodes: BTreeSet<usize> = seg_edges.keys().flat_map(|&(a, b)| [a, b]).collect();
    let endpoint_nodes: Vec<usize> = [slit.start, slit.end]
        .iter()
        .map(|&e| {
            seg_nodes
                .iter()
                .copied()
                .find(|&n| dist(mesh.nodes[n], e) <= tol)
                .ok_or_else(|| MeshError::SlitMisaligned("endpoint is not a mesh node".into()))
        })
        .collect::<Result<_, _>>()?;
    let on_boundary: BTreeSet<usize> = mesh.facets.iter().flat_map(|f| f.nodes).collect();
    let tips: BTreeSet<usize> = endpoint_nodes
        .into_iter()
        .filter(|n| !on_boundary.contains(n))
        .collect();

    let mut nodes = mesh.nodes.clone();
    let mut upper_of = BTreeMap::new();
    let mut pairs = Vec::new();
    for &n in seg_nodes.iter().filter(|n| !tips.contains(n)) {
        let copy = nodes.len();
        nodes.push(mesh.nodes[n]);
        upper_of.insert(n, copy);
        pairs.push((n, copy));
    }

    let is_upper = |c: usize| {
        let p = mesh.cell_coords(c);
        p.iter().map(|q| q[across]).sum::<f64>() / 4.0 > level
    };
    let mut cells = mesh.cells.clone();
    for (c, cell) in cells.iter_mut().enumerate() {
        if is_upper(c) {
            for n in cell.iter_mut() {
                if let Some(&u) = upper_of.get(n) {
                    *n = u;
                }
            }
        }
    }
    let mut facets: Vec<BoundaryFacet> = mesh
        .facets
        .iter()
        .enumerate()
        .map(|(f, facet)| {
            let (c, k) = mesh.facet_owner[f];
            BoundaryFacet {
                nodes: [cells[c][k], cells[c][(k + 1) % 4]],
                tag: facet.tag,
            }
        })
        .collect();
    for owners in seg_edges.values() {
        for &c in owners {
            let cell = cells[c];
            let k = (0..4)
                .find(|&k| {
                    on_segment(nodes[cell[k]]) && on_segment(nodes[cell[(k + 1) % 4]])
                })
                .expect("owner cell has the segment edge");
            facets.push(BoundaryFacet {
                nodes: [cell[k], cell[(k + 1) % 4]],
                tag: if is_upper(c) {
                    BoundaryTag::SlitUpper
                } else {
                    BoundaryTag::SlitLower
                },
            });
        }
    }
    let mut out = Mesh::new(nodes, cells, facets)?;
    out.slit_pairs = pairs;
    Ok(out)
}

/// Nodes incident to facets carrying `tag`, ascending.
pub fn boundary_nodes(mesh: &Mesh, tag: BoundaryTag) -> Vec<usize> {
    let set: BTreeSet<usize> = mesh
        .facets
        .iter()
        .filter(|f| f.tag == tag)
        .flat_map(|f| f.nodes)
        .collect();
    set.into_iter().collect()
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<(), MeshError> {
    let io_err = |source| MeshError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    write_mesh_to(mesh, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn write_mesh_to(mesh: &Mesh, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "quadmesh 1")?;
    writeln!(out, "nodes {}", mesh.nodes.len())?;
    for p in &mesh.nodes {
        // `{}` on f64 prints the shortest representation that round-trips
        writeln!(out, "{} {}", p[0], p[1])?;
    }
    writeln!(out, "cells {}", mesh.cells.len())?;
    for c in &mesh.cells {
        writeln!(out, "{} {} {} {}", c[0], c[1], c[2], c[3])?;
    }
    writeln!(out, "bfacets {}", mesh.facets.len())?;
    for f in &mesh.facets {
        writeln!(out, "{} {} {}", f.nodes[0], f.nodes[1], f.tag)?;
    }
    Ok(())
}

pub fn load_mesh(path: &Path) -> Result<Mesh, MeshError> {
    let text = fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_mesh(&text)
}

pub fn parse_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let last_line = text.lines().count().max(1);
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| MeshError::Parse {
            line: last_line,
            msg: format!("unexpected end of file, expected {what}"),
        })
    };

    let (ln, header) = next("header")?;
    if header.split_whitespace().collect::<Vec<_>>() != ["quadmesh", "1"] {
        return Err(MeshError::Parse {
            line: ln,
            msg: format!("expected `quadmesh 1`, found `{header}`"),
        });
    }

    fn count(ln: usize, line: &str, key: &str) -> Result<usize, MeshError> {
        let mut it = line.split_whitespace();
        match (it.next(), it.next().map(str::parse::<usize>), it.next()) {
            (Some(k), Some(Ok(n)), None) if k == key => Ok(n),
            _ => Err(MeshError::Parse {
                line: ln,
                msg: format!("expected `{key} <count>`, found `{line}`"),
            }),
        }
    }
    fn fields<T: FromStr, const N: usize>(ln: usize, line: &str) -> Result<[T; N], MeshError> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || MeshError::Parse {
            line: ln,
            msg: format!("expected {N} numbers, found `{line}`"),
        };
        if parts.len() != N {
            return Err(bad());
        }
        let vals: Vec<T> = parts
            .iter()
            .map(|p| p.parse::<T>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        vals.try_into().map_err(|_| bad())
    }

    let (ln, l) = next("nodes")?;
    let nn = count(ln, l, "nodes")?;
    let mut nodes = Vec::with_capacity(nn);
    for _ in 0..nn {
        let (ln, l) = next("node coordinates")?;
        let p: [f64; 2] = fields(ln, l)?;
        if !p.iter().all(|v| v.is_finite()) {
            return Err(MeshError::Parse {
                line: ln,
                msg: "non-finite coordinate".into(),
            });
        }
        nodes.push(p);
    }

    let (ln, l) = next("cells")?;
    let nc = count(ln, l, "cells")?;
    let mut cells = Vec::with_capacity(nc);
    let mut cell_lines = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, l) = next("cell")?;
        cells.push(fields::<usize, 4>(ln, l)?);
        cell_lines.push(ln);
    }

    let (ln, l) = next("bfacets")?;
    let nf = count(ln, l, "bfacets")?;
    let mut facets = Vec::with_capacity(nf);
    let mut facet_lines = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = next("boundary facet")?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        let bad = |msg: String| MeshError::Parse { line: ln, msg };
        if parts.len() != 3 {
            return Err(bad(format!("expected `i j tag`, found `{l}`")));
        }
        let a = parts[0].parse().map_err(|_| bad(format!("bad node index `{}`", parts[0])))?;
        let b = parts[1].parse().map_err(|_| bad(format!("bad node index `{}`", parts[1])))?;
        let tag = parts[2]
            .parse()
            .map_err(|_| bad(format!("unknown boundary tag `{}`", parts[2])))?;
        facets.push(BoundaryFacet { nodes: [a, b], tag });
        facet_lines.push(ln);
    }
    if let Some((ln, l)) = lines.next() {
        return Err(MeshError::Parse {
            line: ln,
            msg: format!("trailing content `{l}`"),
        });
    }
    Mesh::build(nodes, cells, facets, Some(&cell_lines), Some(&facet_lines))
}
