//! Space-time box `(0,T) x Omega` on a uniform tensor grid, and the
//! inflow/outflow classification of its faces for a fixed velocity.
//!
//! Nodes are numbered row-major in `(t, x, y)`: time is the slowest axis.

use crate::error::{invalid, Result};

/// Default threshold below which a face flux `a.n` counts as zero.
pub const DEFAULT_FLUX_EPS: f64 = 1e-12;

/// Axis-aligned interval (d = 1) or rectangle (d = 2).
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SpaceDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(invalid(format!(
                "domain bounds disagree in length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        if !(1..=2).contains(&lower.len()) {
            return Err(invalid(format!(
                "spatial dimension must be 1 or 2, got {}",
                lower.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(invalid(format!("axis {i}: need lower < upper, got [{lo}, {hi}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit interval `(0, 1)`.
    pub fn unit_interval() -> Self {
        Self { lower: vec![0.0], upper: vec![1.0] }
    }

    pub fn unit_square() -> Self {
        Self { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.length(a)).product()
    }

    /// True if `x` lies in the closed box, allowing `tol` of slack per axis.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(xi, (lo, hi))| *xi >= lo - tol && *xi <= hi + tol)
    }
}

/// Uniform tensor grid of `[0,T] x closure(Omega)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeGrid {
    t_final: f64,
    domain: SpaceDomain,
    nt: usize,
    nx: Vec<usize>,
}

pub fn build_grid(t_final: f64, domain: SpaceDomain, nt: usize, nx: &[usize]) -> Result<SpaceTimeGrid> {
    SpaceTimeGrid::new(t_final, domain, nt, nx.to_vec())
}

impl SpaceTimeGrid {
    pub fn new(t_final: f64, domain: SpaceDomain, nt: usize, nx: Vec<usize>) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(invalid(format!("final time must be positive, got {t_final}")));
        }
        if nt == 0 {
            return Err(invalid("need at least one time cell"));
        }
        if nx.len() != domain.dim() {
            return Err(invalid(format!(
                "{} spatial cell counts for a {}-dimensional domain",
                nx.len(),
                domain.dim()
            )));
        }
        if nx.contains(&0) {
            return Err(invalid("need at least one cell per spatial axis"));
        }
        Ok(Self { t_final, domain, nt, nx })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn domain(&self) -> &SpaceDomain {
        &self.domain
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nx(&self) -> &[usize] {
        &self.nx
    }

    pub fn space_dim(&self) -> usize {
        self.domain.dim()
    }

    /// Number of space-time axes, `1 + d`.
    pub fn ndim(&self) -> usize {
        1 + self.domain.dim()
    }

    /// Cells per space-time axis, time first.
    pub fn cells(&self) -> Vec<usize> {
        std::iter::once(self.nt).chain(self.nx.iter().copied()).collect()
    }

    /// Nodes per space-time axis, time first.
    pub fn nodes_per_axis(&self) -> Vec<usize> {
        self.cells().into_iter().map(|n| n + 1).collect()
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis().iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.cells().iter().product()
    }

    pub fn ht(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    pub fn hx(&self, axis: usize) -> f64 {
        self.domain.length(axis) / self.nx[axis] as f64
    }

    /// Cell widths per space-time axis, time first.
    pub fn widths(&self) -> Vec<f64> {
        std::iter::once(self.ht()).chain((0..self.space_dim()).map(|a| self.hx(a))).collect()
    }

    /// Lower corner of the space-time box, time first.
    pub fn origin(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.domain.lower.iter().copied()).collect()
    }

    /// Coordinate of grid line `i` on space-time axis `axis` (0 = time).
    /// The last line is pinned to the upper bound.
    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        if axis == 0 {
            if i == self.nt {
                self.t_final
            } else {
                i as f64 * self.ht()
            }
        } else {
            let a = axis - 1;
            if i == self.nx[a] {
                self.domain.upper[a]
            } else {
                self.domain.lower[a] + i as f64 * self.hx(a)
            }
        }
    }

    /// Row-major strides over nodes, time first.
    pub fn node_strides(&self) -> Vec<usize> {
        strides(&self.nodes_per_axis())
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(self.node_strides()).map(|(i, s)| i * s).sum()
    }

    pub fn node_multi_index(&self, mut index: usize) -> Vec<usize> {
        let strides = self.node_strides();
        strides
            .iter()
            .map(|s| {
                let i = index / s;
                index %= s;
                i
            })
            .collect()
    }

    /// Node coordinates `(t, x[, y])`.
    pub fn node_point(&self, index: usize) -> Vec<f64> {
        self.node_multi_index(index)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.coordinate(axis, i))
            .collect()
    }
}

pub(crate) fn strides(extents: &[usize]) -> Vec<usize> {
    let mut s = vec![1; extents.len()];
    for a in (0..extents.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * extents[a + 1];
    }
    s
}

/// One face of the space-time box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaceId {
    /// `t = 0`
    TimeStart,
    /// `t = T`
    TimeEnd,
    /// `x_axis = lower[axis]` for all `t`
    Lower(usize),
    /// `x_axis = upper[axis]` for all `t`
    Upper(usize),
}

impl FaceId {
    /// Space-time axis normal to the face and the grid line it sits on.
    fn grid_line(self, grid: &SpaceTimeGrid) -> (usize, usize) {
        match self {
            FaceId::TimeStart => (0, 0),
            FaceId::TimeEnd => (0, grid.nt),
            FaceId::Lower(a) => (a + 1, 0),
            FaceId::Upper(a) => (a + 1, grid.nx[a]),
        }
    }

    /// Outward unit normal `(n_t, n_x)`.
    pub fn normal(self, space_dim: usize) -> Vec<f64> {
        let mut n = vec![0.0; 1 + space_dim];
        match self {
            FaceId::TimeStart => n[0] = -1.0,
            FaceId::TimeEnd => n[0] = 1.0,
            FaceId::Lower(a) => n[a + 1] = -1.0,
            FaceId::Upper(a) => n[a + 1] = 1.0,
        }
        n
    }

    pub fn all(space_dim: usize) -> Vec<FaceId> {
        let mut v = vec![FaceId::TimeStart, FaceId::TimeEnd];
        for a in 0..space_dim {
            v.push(FaceId::Lower(a));
            v.push(FaceId::Upper(a));
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceClass {
    Inflow,
    Outflow,
    Characteristic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    pub id: FaceId,
    pub class: FaceClass,
    /// `n_t + v . n_x`
    pub flux: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceClassification {
    velocity: Vec<f64>,
    cells: Vec<usize>,
    faces: Vec<BoundaryFace>,
}

impl FaceClassification {
    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn faces(&self) -> &[BoundaryFace] {
        &self.faces
    }

    pub fn face(&self, id: FaceId) -> Option<&BoundaryFace> {
        self.faces.iter().find(|f| f.id == id)
    }

    pub fn class_of(&self, id: FaceId) -> Option<FaceClass> {
        self.face(id).map(|f| f.class)
    }

    pub fn inflow(&self) -> impl Iterator<Item = FaceId> + '_ {
        self.faces.iter().filter(|f| f.class == FaceClass::Inflow).map(|f| f.id)
    }

    pub fn outflow(&self) -> impl Iterator<Item = FaceId> + '_ {
        self.faces.iter().filter(|f| f.class == FaceClass::Outflow).map(|f| f.id)
    }
}

pub fn classify_faces(grid: &SpaceTimeGrid, v: &[f64], eps: f64) -> Result<FaceClassification> {
    if v.len() != grid.space_dim() {
        return Err(invalid(format!(
            "velocity has {} components, grid is {}-dimensional",
            v.len(),
            grid.space_dim()
        )));
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(invalid("velocity must be finite"));
    }
    if !(eps >= 0.0) {
        return Err(invalid(format!("flux threshold must be nonnegative, got {eps}")));
    }
    let faces = FaceId::all(grid.space_dim())
        .into_iter()
        .map(|id| {
            let n = id.normal(grid.space_dim());
            let flux = n[0] + v.iter().zip(&n[1..]).map(|(vi, ni)| vi * ni).sum::<f64>();
            let class = if flux < -eps {
                FaceClass::Inflow
            } else if flux > eps {
                FaceClass::Outflow
            } else {
                FaceClass::Characteristic
            };
            BoundaryFace { id, class, flux }
        })
        .collect();
    Ok(FaceClassification { velocity: v.to_vec(), cells: grid.cells(), faces })
}

/// Sorted node indices pinned to zero by the homogeneous inflow condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSet {
    nodes: Vec<usize>,
    node_count: usize,
}

impl ConstraintSet {
    /// Nodes on the closure of any of `faces`.
    pub fn for_faces(grid: &SpaceTimeGrid, faces: impl IntoIterator<Item = FaceId>) -> Self {
        let lines: Vec<(usize, usize)> = faces.into_iter().map(|f| f.grid_line(grid)).collect();
        let nodes = (0..grid.node_count())
            .filter(|&n| {
                let m = grid.node_multi_index(n);
                lines.iter().any(|&(axis, line)| m[axis] == line)
            })
            .collect();
        Self { nodes, node_count: grid.node_count() }
    }

    pub fn empty(grid: &SpaceTimeGrid) -> Self {
        Self { nodes: Vec::new(), node_count: grid.node_count() }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn contains(&self, node: usize) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }

    /// Full-to-reduced numbering: `None` for constrained nodes.
    pub fn free_index_map(&self) -> (Vec<Option<usize>>, Vec<usize>) {
        let mut map = vec![None; self.node_count];
        let mut free = Vec::with_capacity(self.node_count - self.nodes.len());
        let mut c = self.nodes.iter().peekable();
        for (n, slot) in map.iter_mut().enumerate() {
            if c.peek() == Some(&&n) {
                c.next();
            } else {
                *slot = Some(free.len());
                free.push(n);
            }
        }
        (map, free)
    }
}

pub fn constrained_dofs(grid: &SpaceTimeGrid, faces: &FaceClassification) -> Result<ConstraintSet> {
    if faces.cells != grid.cells() {
        return Err(invalid("face classification was built for a different grid"));
    }
    Ok(ConstraintSet::for_faces(grid, faces.inflow()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(nt: usize, nx: usize) -> SpaceTimeGrid {
        build_grid(1.0, SpaceDomain::unit_interval(), nt, &[nx]).unwrap()
    }

    #[test]
    fn grid_counts() {
        let g = unit_grid(2, 2);
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.ht(), 0.5);
        assert_eq!(g.hx(0), 0.5);
        let g2 = build_grid(2.0, SpaceDomain::unit_square(), 1, &[1, 1]).unwrap();
        assert_eq!(g2.node_count(), 8);
    }

    #[test]
    fn grid_rejects_bad_input() {
        let d = SpaceDomain::unit_interval();
        assert!(build_grid(0.0, d.clone(), 2, &[2]).is_err());
        assert!(build_grid(-1.0, d.clone(), 2, &[2]).is_err());
        assert!(build_grid(1.0, d.clone(), 0, &[2]).is_err());
        assert!(build_grid(1.0, d.clone(), 2, &[0]).is_err());
        assert!(build_grid(1.0, d, 2, &[2, 2]).is_err());
        assert!(SpaceDomain::new(vec![1.0], vec![0.0]).is_err());
        assert!(SpaceDomain::new(vec![0.0; 3], vec![1.0; 3]).is_err());
    }

    #[test]
    fn node_numbering_is_time_major() {
        let g = build_grid(1.0, SpaceDomain::unit_square(), 2, &[3, 4]).unwrap();
        assert_eq!(g.node_strides(), vec![20, 5, 1]);
        let n = g.node_index(&[1, 2, 3]);
        assert_eq!(n, 33);
        assert_eq!(g.node_multi_index(n), vec![1, 2, 3]);
        assert_eq!(g.node_point(n), vec![0.5, 2.0 / 3.0, 0.75]);
        assert_eq!(g.coordinate(1, 3), 1.0);
    }

    #[test]
    fn faces_positive_velocity() {
        let g = unit_grid(2, 2);
        let f = classify_faces(&g, &[1.0], DEFAULT_FLUX_EPS).unwrap();
        assert_eq!(f.class_of(FaceId::Lower(0)), Some(FaceClass::Inflow));
        assert_eq!(f.face(FaceId::Lower(0)).unwrap().flux, -1.0);
        assert_eq!(f.class_of(FaceId::Upper(0)), Some(FaceClass::Outflow));
        assert_eq!(f.face(FaceId::Upper(0)).unwrap().flux, 1.0);
        assert_eq!(f.class_of(FaceId::TimeStart), Some(FaceClass::Inflow));
        assert_eq!(f.class_of(FaceId::TimeEnd), Some(FaceClass::Outflow));
    }

    #[test]
    fn faces_zero_and_negative_velocity() {
        let g = unit_grid(2, 2);
        let f = classify_faces(&g, &[0.0], DEFAULT_FLUX_EPS).unwrap();
        assert_eq!(f.class_of(FaceId::Lower(0)), Some(FaceClass::Characteristic));
        assert_eq!(f.class_of(FaceId::Upper(0)), Some(FaceClass::Characteristic));
        assert_eq!(f.class_of(FaceId::TimeStart), Some(FaceClass::Inflow));

        let f = classify_faces(&g, &[-2.0], DEFAULT_FLUX_EPS).unwrap();
        assert_eq!(f.class_of(FaceId::Upper(0)), Some(FaceClass::Inflow));
        assert_eq!(f.face(FaceId::Upper(0)).unwrap().flux, -2.0);
        assert_eq!(f.class_of(FaceId::Lower(0)), Some(FaceClass::Outflow));
    }

    #[test]
    fn velocity_dimension_checked() {
        let g = unit_grid(2, 2);
        assert!(classify_faces(&g, &[1.0, 0.0], DEFAULT_FLUX_EPS).is_err());
        assert!(classify_faces(&g, &[f64::NAN], DEFAULT_FLUX_EPS).is_err());
    }

    #[test]
    fn constraint_counts() {
        let g = unit_grid(2, 2);
        let c = |v: f64| {
            let f = classify_faces(&g, &[v], DEFAULT_FLUX_EPS).unwrap();
            constrained_dofs(&g, &f).unwrap()
        };
        assert_eq!(c(1.0).nodes(), &[0, 1, 2, 3, 6]);
        assert_eq!(c(0.0).nodes(), &[0, 1, 2]);
        assert_eq!(c(-1.0).nodes(), &[0, 1, 2, 5, 8]);
    }

    #[test]
    fn constraint_grid_mismatch() {
        let g = unit_grid(2, 2);
        let other = unit_grid(3, 2);
        let f = classify_faces(&other, &[1.0], DEFAULT_FLUX_EPS).unwrap();
        assert!(constrained_dofs(&g, &f).is_err());
    }

    #[test]
    fn free_index_map_complements_constraints() {
        let g = unit_grid(2, 2);
        let f = classify_faces(&g, &[1.0], DEFAULT_FLUX_EPS).unwrap();
        let c = constrained_dofs(&g, &f).unwrap();
        let (map, free) = c.free_index_map();
        assert_eq!(free, vec![4, 5, 7, 8]);
        assert_eq!(map[4], Some(0));
        assert_eq!(map[0], None);
    }

    #[test]
    fn two_dimensional_classification() {
        let g = build_grid(1.0, SpaceDomain::unit_square(), 2, &[2, 2]).unwrap();
        let f = classify_faces(&g, &[1.0, 0.0], DEFAULT_FLUX_EPS).unwrap();
        assert_eq!(f.class_of(FaceId::Lower(1)), Some(FaceClass::Characteristic));
        let c = constrained_dofs(&g, &f).unwrap();
        // 9 initial nodes plus 2 later time levels of the 3-node x = 0 edge
        assert_eq!(c.len(), 9 + 6);
    }
}
