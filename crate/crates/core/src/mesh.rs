//! Quadtree meshes of axis-aligned squares over the unit square.
//!
//! A mesh starts from an `N x N` grid of root cells. Refinement splits a cell
//! into four children; adaptive refinement keeps the mesh 1-irregular, so two
//! active cells sharing an edge differ by at most one level and every edge
//! carries at most one hanging node.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Deepest refinement level representable on the node lattice.
pub const MAX_LEVEL: u8 = 24;

/// A quadtree cell: refinement level plus integer position on that level's grid.
///
/// At level `l` the root grid of `N x N` cells has become `N 2^l x N 2^l`, and
/// `(ix, iy)` index the cell on it. Ordering is by level, then row, then column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId {
    pub level: u8,
    pub iy: u32,
    pub ix: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];
}

impl CellId {
    pub const fn new(level: u8, ix: u32, iy: u32) -> Self {
        CellId { level, iy, ix }
    }

    pub fn parent(&self) -> Option<CellId> {
        (self.level > 0).then(|| CellId::new(self.level - 1, self.ix / 2, self.iy / 2))
    }

    /// Children in lexicographic order: lower-left, lower-right, upper-left, upper-right.
    pub fn children(&self) -> [CellId; 4] {
        let (l, x, y) = (self.level + 1, 2 * self.ix, 2 * self.iy);
        [
            CellId::new(l, x, y),
            CellId::new(l, x + 1, y),
            CellId::new(l, x, y + 1),
            CellId::new(l, x + 1, y + 1),
        ]
    }

    /// The ancestor (or self) at `level`; `None` if `level` is finer than self.
    pub fn ancestor_at(&self, level: u8) -> Option<CellId> {
        let shift = self.level.checked_sub(level)?;
        Some(CellId::new(level, self.ix >> shift, self.iy >> shift))
    }

    /// True if `other` is this cell or one of its descendants.
    pub fn contains(&self, other: &CellId) -> bool {
        other.ancestor_at(self.level) == Some(*self)
    }

    pub fn side_length(&self, root: u32) -> f64 {
        1.0 / (f64::from(root) * f64::from(1u32 << self.level))
    }

    pub fn origin(&self, root: u32) -> [f64; 2] {
        let h = self.side_length(root);
        [f64::from(self.ix) * h, f64::from(self.iy) * h]
    }

    pub fn center(&self, root: u32) -> [f64; 2] {
        let h = self.side_length(root);
        let o = self.origin(root);
        [o[0] + 0.5 * h, o[1] + 0.5 * h]
    }

    /// Lower-left corner on the global integer lattice whose spacing is half
    /// the side of a `MAX_LEVEL` cell; Q2 nodes of every cell land on it.
    pub fn lattice_origin(&self) -> [u64; 2] {
        let shift = u32::from(MAX_LEVEL - self.level) + 1;
        [u64::from(self.ix) << shift, u64::from(self.iy) << shift]
    }

    /// Side length in lattice units.
    pub fn lattice_size(&self) -> u64 {
        1u64 << (u32::from(MAX_LEVEL - self.level) + 1)
    }

    /// The same-level cell across `side`, or `None` outside the domain.
    pub fn neighbor(&self, side: Side, root: u32) -> Option<CellId> {
        let n = root << self.level;
        let (ix, iy) = (self.ix, self.iy);
        let (nx, ny) = match side {
            Side::Left => (ix.checked_sub(1)?, iy),
            Side::Right => (ix + 1, iy),
            Side::Bottom => (ix, iy.checked_sub(1)?),
            Side::Top => (ix, iy + 1),
        };
        (nx < n && ny < n).then(|| CellId::new(self.level, nx, ny))
    }
}

/// What lies across one side of an active cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Boundary,
    Same(CellId),
    Coarser(CellId),
    /// The two finer cells along the side (ordered along the side), which
    /// may themselves be subdivided further in a mesh that is not 1-irregular.
    Finer([CellId; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Conforming,
    /// Sub-edge of a coarse cell side; the coarse side carries a hanging node.
    Hanging { coarse: CellId },
}

/// One interior interface segment.
///
/// `minus` is the cell on the left (vertical edge) or below (horizontal edge);
/// the unit normal points from `minus` into `plus`. On a coarse-fine interface
/// one record is emitted per fine sub-edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorEdge {
    pub minus: CellId,
    pub plus: CellId,
    pub start: [f64; 2],
    pub length: f64,
    pub normal: [f64; 2],
    pub kind: EdgeKind,
}

impl InteriorEdge {
    pub fn is_vertical(&self) -> bool {
        self.normal[0] != 0.0
    }

    pub fn point(&self, t: f64) -> [f64; 2] {
        if self.is_vertical() {
            [self.start[0], self.start[1] + t * self.length]
        } else {
            [self.start[0] + t * self.length, self.start[1]]
        }
    }

    pub fn end(&self) -> [f64; 2] {
        self.point(1.0)
    }
}

/// Cells selected for refinement.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkSet(BTreeSet<CellId>);

impl MarkSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cell: CellId) -> bool {
        self.0.insert(cell)
    }

    pub fn contains(&self, cell: &CellId) -> bool {
        self.0.contains(cell)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CellId> {
        self.0.iter()
    }
}

impl FromIterator<CellId> for MarkSet {
    fn from_iter<I: IntoIterator<Item = CellId>>(iter: I) -> Self {
        MarkSet(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadMesh {
    root: u32,
    cells: Vec<CellId>,
}

impl QuadMesh {
    pub fn uniform(root: u32) -> Self {
        assert!(root > 0, "root grid must contain at least one cell");
        let mut cells = Vec::with_capacity((root * root) as usize);
        for iy in 0..root {
            for ix in 0..root {
                cells.push(CellId::new(0, ix, iy));
            }
        }
        QuadMesh { root, cells }
    }

    /// Builds a mesh from an explicit list of active cells, checking that they
    /// tile the unit square without overlap.
    pub fn from_cells(root: u32, cells: impl IntoIterator<Item = CellId>) -> Result<Self> {
        let mut cells: Vec<CellId> = cells.into_iter().collect();
        cells.sort_unstable();
        cells.dedup();
        let mesh = QuadMesh { root, cells };
        let invalid = || Error::InvalidConfig("cell list does not tile the unit square".into());
        // Area in units of the finest cell present.
        let finest = mesh.cells.iter().map(|c| c.level).max().ok_or_else(invalid)?;
        if finest > MAX_LEVEL {
            return Err(invalid());
        }
        let mut area: u128 = 0;
        for c in &mesh.cells {
            if c.ix >= root << c.level || c.iy >= root << c.level {
                return Err(invalid());
            }
            // No active ancestor may exist alongside an active descendant.
            if (0..c.level).any(|l| mesh.is_active(&c.ancestor_at(l).unwrap())) {
                return Err(invalid());
            }
            area += 1u128 << (2 * u32::from(finest - c.level));
        }
        let expected = u128::from(root) * u128::from(root) << (2 * u32::from(finest));
        if area != expected {
            return Err(invalid());
        }
        Ok(mesh)
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    /// Active cells in sorted order; positions in this slice are the cell indices
    /// used throughout the crate.
    pub fn cells(&self) -> &[CellId] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn index_of(&self, cell: &CellId) -> Option<usize> {
        self.cells.binary_search(cell).ok()
    }

    pub fn is_active(&self, cell: &CellId) -> bool {
        self.index_of(cell).is_some()
    }

    pub fn max_level(&self) -> u8 {
        self.cells.iter().map(|c| c.level).max().unwrap_or(0)
    }

    pub fn side_length(&self, cell: &CellId) -> f64 {
        cell.side_length(self.root)
    }

    pub fn origin(&self, cell: &CellId) -> [f64; 2] {
        cell.origin(self.root)
    }

    /// The active cell equal to `cell` or containing it, if any. `None` means the
    /// region of `cell` is subdivided into finer active cells.
    pub fn covering(&self, cell: &CellId) -> Option<CellId> {
        (0..=cell.level)
            .rev()
            .filter_map(|l| cell.ancestor_at(l))
            .find(|a| self.is_active(a))
    }

    /// The active cell containing the point, preferring the cell to the upper
    /// right on shared boundaries.
    pub fn locate(&self, x: f64, y: f64) -> Option<CellId> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return None;
        }
        let n = f64::from(self.root << MAX_LEVEL);
        let last = (self.root << MAX_LEVEL) - 1;
        let ix = ((x * n) as u32).min(last);
        let iy = ((y * n) as u32).min(last);
        self.covering(&CellId::new(MAX_LEVEL, ix, iy))
    }

    pub fn neighbor(&self, cell: &CellId, side: Side) -> Neighbor {
        let Some(nb) = cell.neighbor(side, self.root) else {
            return Neighbor::Boundary;
        };
        match self.covering(&nb) {
            Some(a) if a.level == cell.level => Neighbor::Same(a),
            Some(a) => Neighbor::Coarser(a),
            None => {
                let [c00, c10, c01, c11] = nb.children();
                Neighbor::Finer(match side {
                    Side::Left => [c10, c11],
                    Side::Right => [c00, c01],
                    Side::Bottom => [c01, c11],
                    Side::Top => [c00, c10],
                })
            }
        }
    }

    pub fn uniform_refine(&self) -> QuadMesh {
        let mut cells: Vec<CellId> = self.cells.iter().flat_map(|c| c.children()).collect();
        cells.sort_unstable();
        QuadMesh {
            root: self.root,
            cells,
        }
    }

    /// Splits every marked cell, plus whatever coarser neighbors must also be
    /// split so that the result stays 1-irregular.
    pub fn adaptive_refine(&self, marks: &MarkSet) -> Result<QuadMesh> {
        for m in marks.iter() {
            if !self.is_active(m) {
                return Err(Error::CellNotActive(*m));
            }
        }
        let mut active: BTreeSet<CellId> = self.cells.iter().copied().collect();
        let is_active = |set: &BTreeSet<CellId>, c: &CellId| set.contains(c);
        let covering = |set: &BTreeSet<CellId>, c: &CellId| {
            (0..=c.level)
                .rev()
                .filter_map(|l| c.ancestor_at(l))
                .find(|a| is_active(set, a))
        };

        for &mark in marks.iter() {
            let mut stack = alloc::vec![mark];
            while let Some(&cell) = stack.last() {
                if !active.contains(&cell) {
                    stack.pop();
                    continue;
                }
                // Any coarser edge neighbor would end up two levels away from the
                // new children, so it is refined first.
                let coarser: Vec<CellId> = Side::ALL
                    .iter()
                    .filter_map(|&s| cell.neighbor(s, self.root))
                    .filter_map(|nb| covering(&active, &nb))
                    .filter(|a| a.level < cell.level)
                    .collect();
                if coarser.is_empty() {
                    active.remove(&cell);
                    active.extend(cell.children());
                    stack.pop();
                } else {
                    stack.extend(coarser);
                }
            }
        }
        Ok(QuadMesh {
            root: self.root,
            cells: active.into_iter().collect(),
        })
    }

    /// Largest level difference across any shared edge.
    pub fn max_level_jump(&self) -> u8 {
        let mut worst = 0;
        for c in &self.cells {
            for side in Side::ALL {
                let Some(nb) = c.neighbor(side, self.root) else {
                    continue;
                };
                match self.covering(&nb) {
                    Some(a) => worst = worst.max(c.level - a.level),
                    None => {
                        // Finest active cell touching this side.
                        let deepest = self
                            .cells
                            .iter()
                            .filter(|d| nb.contains(d) && touches(d, c, side))
                            .map(|d| d.level)
                            .max()
                            .unwrap_or(c.level);
                        worst = worst.max(deepest - c.level);
                    }
                }
            }
        }
        worst
    }

    pub fn is_one_irregular(&self) -> bool {
        self.max_level_jump() <= 1
    }

    /// All interior interfaces, each geometric segment exactly once. Assumes a
    /// 1-irregular mesh.
    pub fn interior_edges(&self) -> Vec<InteriorEdge> {
        let mut edges = Vec::new();
        for c in &self.cells {
            let h = self.side_length(c);
            let [x0, y0] = self.origin(c);
            for side in Side::ALL {
                let (minus_is_self, start, normal) = match side {
                    Side::Left => (false, [x0, y0], [1.0, 0.0]),
                    Side::Right => (true, [x0 + h, y0], [1.0, 0.0]),
                    Side::Bottom => (false, [x0, y0], [0.0, 1.0]),
                    Side::Top => (true, [x0, y0 + h], [0.0, 1.0]),
                };
                let (other, kind) = match self.neighbor(c, side) {
                    Neighbor::Same(n) if minus_is_self => (n, EdgeKind::Conforming),
                    Neighbor::Coarser(n) => (n, EdgeKind::Hanging { coarse: n }),
                    _ => continue,
                };
                let (minus, plus) = if minus_is_self { (*c, other) } else { (other, *c) };
                edges.push(InteriorEdge {
                    minus,
                    plus,
                    start,
                    length: h,
                    normal,
                    kind,
                });
            }
        }
        edges
    }
}

// Whether `fine` (inside the neighbor region of `cell` across `side`) touches that side.
fn touches(fine: &CellId, cell: &CellId, side: Side) -> bool {
    let [fx, fy] = fine.lattice_origin();
    let fs = fine.lattice_size();
    let [cx, cy] = cell.lattice_origin();
    let cs = cell.lattice_size();
    match side {
        Side::Left => fx + fs == cx,
        Side::Right => fx == cx + cs,
        Side::Bottom => fy + fs == cy,
        Side::Top => fy == cy + cs,
    }
}

/// Dörfler (bulk) marking: the fewest cells whose squared estimates reach
/// `fraction` of the total squared estimate.
///
/// Cells are taken greedily by decreasing estimate, ties by ascending id.
pub fn dorfler_mark(estimates: &[(CellId, f64)], fraction: f64) -> Result<MarkSet> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    for &(cell, value) in estimates {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::InvalidEstimate { cell, value });
        }
    }
    let mut sorted: Vec<(CellId, f64)> = estimates.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let total: f64 = sorted.iter().map(|(_, t)| t * t).sum();
    if total == 0.0 {
        return Err(Error::NothingToMark);
    }
    let target = fraction * total;
    let mut marks = MarkSet::new();
    let mut acc = 0.0;
    for (cell, t) in sorted {
        if acc >= target {
            break;
        }
        acc += t * t;
        marks.insert(cell);
    }
    Ok(marks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_refinement_counts() {
        let m = QuadMesh::uniform(16);
        assert_eq!(m.len(), 256);
        let m1 = m.uniform_refine();
        assert_eq!(m1.len(), 1024);
        assert_eq!(m1.uniform_refine().len(), 4096);
        let hmax = |m: &QuadMesh| m.cells().iter().map(|c| m.side_length(c)).fold(0.0, f64::max);
        assert_eq!(hmax(&m), 1.0 / 16.0);
        assert_eq!(hmax(&m1), 1.0 / 32.0);
    }

    #[test]
    fn interior_edge_counts_on_uniform_grids() {
        assert_eq!(QuadMesh::uniform(2).interior_edges().len(), 4);
        assert_eq!(QuadMesh::uniform(16).interior_edges().len(), 480);
        assert_eq!(QuadMesh::uniform(1).interior_edges().len(), 0);
        let m = QuadMesh::uniform(4).uniform_refine();
        assert_eq!(m.interior_edges().len(), 2 * 8 * 7);
    }

    #[test]
    fn empty_marks_leave_mesh_unchanged() {
        let m = QuadMesh::uniform(4);
        assert_eq!(m.adaptive_refine(&MarkSet::new()).unwrap(), m);
    }

    #[test]
    fn single_mark_splits_one_cell() {
        let m = QuadMesh::uniform(4);
        let target = CellId::new(0, 1, 2);
        let r = m.adaptive_refine(&[target].into_iter().collect()).unwrap();
        assert_eq!(r.len(), 16 - 1 + 4);
        assert!(!r.is_active(&target));
        for ch in target.children() {
            assert!(r.is_active(&ch));
        }
        assert!(r.is_active(&CellId::new(0, 2, 2)));
        assert!(r.is_one_irregular());
        assert_eq!(r.max_level_jump(), 1);
    }

    #[test]
    fn closure_refines_coarse_neighbor() {
        let m = QuadMesh::uniform(4);
        let a = CellId::new(0, 1, 1);
        let m1 = m.adaptive_refine(&[a].into_iter().collect()).unwrap();
        // Right child of `a` adjacent to the unrefined cell (2, 1).
        let child = CellId::new(1, 3, 2);
        assert!(m1.is_active(&child));
        let m2 = m1.adaptive_refine(&[child].into_iter().collect()).unwrap();
        assert!(!m2.is_active(&CellId::new(0, 2, 1)), "closure must split the coarse neighbor");
        assert!(m2.is_one_irregular());
    }

    #[test]
    fn unmarked_cell_is_rejected() {
        let m = QuadMesh::uniform(2);
        let bogus = CellId::new(1, 0, 0);
        assert_eq!(
            m.adaptive_refine(&[bogus].into_iter().collect()),
            Err(Error::CellNotActive(bogus))
        );
    }

    #[test]
    fn neighbor_classification() {
        let m = QuadMesh::uniform(2)
            .adaptive_refine(&[CellId::new(0, 0, 0)].into_iter().collect())
            .unwrap();
        let coarse = CellId::new(0, 1, 0);
        assert_eq!(
            m.neighbor(&coarse, Side::Left),
            Neighbor::Finer([CellId::new(1, 1, 0), CellId::new(1, 1, 1)])
        );
        assert_eq!(m.neighbor(&CellId::new(1, 1, 1), Side::Right), Neighbor::Coarser(coarse));
        assert_eq!(m.neighbor(&coarse, Side::Right), Neighbor::Boundary);
        assert_eq!(m.neighbor(&coarse, Side::Top), Neighbor::Same(CellId::new(0, 1, 1)));
    }

    #[test]
    fn locate_and_from_cells() {
        let m = QuadMesh::uniform(2)
            .adaptive_refine(&[CellId::new(0, 0, 0)].into_iter().collect())
            .unwrap();
        assert_eq!(m.locate(0.1, 0.1), Some(CellId::new(1, 0, 0)));
        assert_eq!(m.locate(0.9, 0.2), Some(CellId::new(0, 1, 0)));
        assert_eq!(m.locate(1.0, 1.0), Some(CellId::new(0, 1, 1)));
        assert_eq!(QuadMesh::from_cells(2, m.cells().to_vec()).unwrap(), m);
        let mut broken = m.cells().to_vec();
        broken.pop();
        assert!(QuadMesh::from_cells(2, broken).is_err());
        let mut overlapping = m.cells().to_vec();
        overlapping.push(CellId::new(0, 0, 0));
        assert!(QuadMesh::from_cells(2, overlapping).is_err());
    }

    #[test]
    fn dorfler_examples() {
        let ids: Vec<CellId> = (0..4).map(|i| CellId::new(0, i, 0)).collect();
        let est = |v: &[f64]| -> Vec<(CellId, f64)> { ids.iter().copied().zip(v.iter().copied()).collect() };

        let m = dorfler_mark(&est(&[4.0, 2.0, 1.0, 1.0]), 0.9).unwrap();
        assert_eq!(m.iter().copied().collect::<Vec<_>>(), vec![ids[0], ids[1]]);

        let m = dorfler_mark(&est(&[5.0, 0.0, 0.0]), 0.9).unwrap();
        assert_eq!(m.iter().copied().collect::<Vec<_>>(), vec![ids[0]]);

        let m = dorfler_mark(&est(&[1.0, 1.0, 1.0, 1.0]), 1.0).unwrap();
        assert_eq!(m.len(), 4);

        assert_eq!(dorfler_mark(&est(&[0.0, 0.0]), 0.5), Err(Error::NothingToMark));
        assert!(matches!(dorfler_mark(&est(&[1.0]), 0.0), Err(Error::InvalidFraction(_))));
        assert!(matches!(
            dorfler_mark(&est(&[1.0, -1.0]), 0.5),
            Err(Error::InvalidEstimate { .. })
        ));
    }

    #[test]
    fn dorfler_ties_prefer_smaller_ids() {
        let est: Vec<(CellId, f64)> = [3u32, 1, 2, 0].iter().map(|&i| (CellId::new(0, i, 0), 1.0)).collect();
        let m = dorfler_mark(&est, 0.5).unwrap();
        assert_eq!(
            m.iter().copied().collect::<Vec<_>>(),
            vec![CellId::new(0, 0, 0), CellId::new(0, 1, 0)]
        );
    }
}
