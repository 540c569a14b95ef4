//! Tensor-product brick meshes over the space-time cylinder with anisotropic,
//! 1-irregular hanging-node refinement.
//!
//! Axes `0..d-1` are spatial, axis `d` is time. All brick boundaries are
//! dyadic subdivisions of an initial tensor grid and are kept as exact
//! integer coordinates ([`crate::dyadic`]); floating-point anchors and sizes
//! are derived views.

use crate::dyadic::{Dyadic, Interval, MAX_LEVEL};
use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt::Write as _;

pub const MAX_DIM: usize = 3;
const MAX_ROOT_CELLS: usize = 4096;

/// The space-time box `Q = Ω × (0, T)` plus an optional slit facet.
#[derive(Clone, Debug)]
pub struct DomainSpec {
    dim: usize,
    min: [f64; MAX_DIM],
    max: [f64; MAX_DIM],
    slit: Option<SlitFacet>,
}

/// A spatial segment `{x[normal_axis] = coord, lo <= x[span_axis] <= hi}`
/// carrying an essential condition for every time. Used for slit geometries
/// where part of the (topological) boundary lies on an interior mesh line.
#[derive(Clone, Debug)]
pub struct SlitFacet {
    pub normal_axis: usize,
    pub coord: f64,
    pub span_axis: usize,
    pub lo: f64,
    pub hi: f64,
}

impl DomainSpec {
    /// Space-time box with `d = mins.len() - 1` spatial axes; the last axis is
    /// time.
    pub fn new(mins: &[f64], maxs: &[f64]) -> Result<Self> {
        let dim = mins.len();
        if dim != maxs.len() || dim < 2 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "domain must have 2 or 3 axes, got {dim}"
            )));
        }
        let mut min = [0.0; MAX_DIM];
        let mut max = [0.0; MAX_DIM];
        for a in 0..dim {
            if !(maxs[a] > mins[a]) {
                return Err(Error::InvalidArgument(format!(
                    "degenerate domain box on axis {a}: [{}, {}]",
                    mins[a], maxs[a]
                )));
            }
            min[a] = mins[a];
            max[a] = maxs[a];
        }
        Ok(DomainSpec {
            dim,
            min,
            max,
            slit: None,
        })
    }

    /// Interval Ω = (x0, x1) times (0, T).
    pub fn interval(x0: f64, x1: f64, t_end: f64) -> Result<Self> {
        DomainSpec::new(&[x0, 0.0], &[x1, t_end])
    }

    /// Box Ω = (x0, x1) × (y0, y1) times (0, T).
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64, t_end: f64) -> Result<Self> {
        DomainSpec::new(&[x0, y0, 0.0], &[x1, y1, t_end])
    }

    pub fn with_slit(mut self, slit: SlitFacet) -> Result<Self> {
        if self.spatial_dim() != 2 {
            return Err(Error::InvalidArgument(
                "slit facets require two spatial axes".into(),
            ));
        }
        self.slit = Some(slit);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spatial_dim(&self) -> usize {
        self.dim - 1
    }

    pub fn time_axis(&self) -> usize {
        self.dim - 1
    }

    pub fn min(&self) -> &[f64] {
        &self.min[..self.dim]
    }

    pub fn max(&self) -> &[f64] {
        &self.max[..self.dim]
    }

    pub fn t_end(&self) -> f64 {
        self.max[self.dim - 1]
    }

    pub fn slit(&self) -> Option<&SlitFacet> {
        self.slit.as_ref()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|a| self.max[a] - self.min[a]).product()
    }

    /// Whether a spatial point lies on the slit facet (within tolerance).
    pub fn on_slit(&self, x: &[f64]) -> bool {
        match &self.slit {
            None => false,
            Some(s) => {
                (x[s.normal_axis] - s.coord).abs() < 1e-12
                    && x[s.span_axis] >= s.lo - 1e-12
                    && x[s.span_axis] <= s.hi + 1e-12
            }
        }
    }
}

/// Subset of axes `{0..dim-1}` stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct AxisSet(u8);

impl AxisSet {
    pub fn empty() -> Self {
        AxisSet(0)
    }

    pub fn single(axis: usize) -> Self {
        AxisSet(1 << axis)
    }

    pub fn all(dim: usize) -> Self {
        AxisSet(((1u16 << dim) - 1) as u8)
    }

    pub fn from_axes(axes: &[usize]) -> Self {
        let mut s = 0u8;
        for &a in axes {
            s |= 1 << a;
        }
        AxisSet(s)
    }

    pub fn insert(&mut self, axis: usize) {
        self.0 |= 1 << axis;
    }

    pub fn contains(&self, axis: usize) -> bool {
        self.0 & (1 << axis) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn count(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(&self, dim: usize) -> impl Iterator<Item = usize> + '_ {
        let mask = self.0;
        (0..dim).filter(move |a| mask & (1 << a) != 0)
    }
}

/// Request to bisect one active element along a set of axes.
#[derive(Clone, Copy, Debug)]
pub struct RefinementDirective {
    pub element: usize,
    pub axes: AxisSet,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BrickStatus {
    Active,
    Refined,
}

/// Axis-aligned brick element of the space-time mesh.
#[derive(Clone, Debug)]
pub struct Brick {
    id: usize,
    iv: [Interval; MAX_DIM],
    parent: Option<usize>,
    children: Vec<usize>,
    split_axes: AxisSet,
}

impl Brick {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn status(&self) -> BrickStatus {
        if self.children.is_empty() {
            BrickStatus::Active
        } else {
            BrickStatus::Refined
        }
    }

    pub fn is_active(&self) -> bool {
        self.children.is_empty()
    }

    pub fn parent(&self) -> Option<usize> {
        self.parent
    }

    pub fn children(&self) -> &[usize] {
        &self.children
    }

    /// Axes along which this brick was split (empty while active).
    pub fn split_axes(&self) -> AxisSet {
        self.split_axes
    }

    pub(crate) fn interval(&self, axis: usize) -> Interval {
        self.iv[axis]
    }

    pub fn axis_levels(&self) -> [u32; MAX_DIM] {
        [self.iv[0].level, self.iv[1].level, self.iv[2].level]
    }
}

/// Per-axis extents of a brick plus the derived spatial/temporal scalars.
#[derive(Clone, Copy, Debug)]
pub struct ElementSizes {
    pub h: [f64; MAX_DIM],
    pub h_x: f64,
    pub h_t: f64,
    pub h_k: f64,
}

/// Convention for the scalar element size h_K entering the stabilization.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum HkConvention {
    /// h_K = h_{K,t}. Default: every stabilized term carries a time
    /// derivative.
    Temporal,
    Min,
    Max,
}

/// Per-axis sizes, spatial maximum, temporal extent and the stabilization
/// scalar h_K of an active brick.
pub fn element_sizes(mesh: &BrickMesh, brick: &Brick, convention: HkConvention) -> ElementSizes {
    let dim = mesh.dim();
    let h = mesh.brick_sizes(brick);
    let h_x = h[..dim - 1].iter().cloned().fold(0.0, f64::max);
    let h_t = h[dim - 1];
    let h_k = match convention {
        HkConvention::Temporal => h_t,
        HkConvention::Min => h[..dim].iter().cloned().fold(f64::INFINITY, f64::min),
        HkConvention::Max => h[..dim].iter().cloned().fold(0.0, f64::max),
    };
    ElementSizes { h, h_x, h_t, h_k }
}

/// A nonconforming face: one master face covered by two or more slave
/// subfaces of finer neighbors.
#[derive(Clone, Debug)]
pub struct HangingFace {
    /// Brick id of the coarse element.
    pub master: usize,
    /// Face normal axis.
    pub axis: usize,
    /// True if the master face is the master brick's upper face on `axis`.
    pub master_side_hi: bool,
    /// Brick ids of the finer elements whose faces tile the master face.
    pub slaves: Vec<usize>,
}

/// Face-adjacency summary of the active mesh.
#[derive(Clone, Debug, Default)]
pub struct Adjacency {
    /// Conforming interior faces as (lower-side brick, upper-side brick, axis).
    pub conforming: Vec<(usize, usize, usize)>,
    pub hanging: Vec<HangingFace>,
}

/// Forest-of-bricks mesh. Immutable once built; `refine` returns a new mesh
/// sharing brick ids with its ancestor, which is what nested spaces rely on.
#[derive(Clone, Debug)]
pub struct BrickMesh {
    domain: DomainSpec,
    cells: [u64; MAX_DIM],
    bricks: Vec<Brick>,
    active: Vec<usize>,
    adjacency: Adjacency,
    /// One fresh nonce per generation; a mesh refines another iff the other's
    /// chain is a prefix of its own.
    lineage: Vec<u64>,
}

fn fresh_nonce() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(1);
    COUNTER.fetch_add(1, Ordering::Relaxed)
}

/// Uniform tensor grid over the domain.
pub fn build_tensor_mesh(domain: DomainSpec, cells_per_axis: &[usize]) -> Result<BrickMesh> {
    let dim = domain.dim();
    if cells_per_axis.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "expected {dim} cell counts, got {}",
            cells_per_axis.len()
        )));
    }
    for (a, &n) in cells_per_axis.iter().enumerate() {
        if n == 0 {
            return Err(Error::InvalidArgument(format!(
                "cells_per_axis[{a}] must be >= 1"
            )));
        }
        if n > MAX_ROOT_CELLS {
            return Err(Error::InvalidArgument(format!(
                "cells_per_axis[{a}] = {n} exceeds the supported maximum {MAX_ROOT_CELLS}"
            )));
        }
    }
    if let Some(slit) = domain.slit() {
        // The slit must lie on initial mesh lines so elements conform to it.
        let a = slit.normal_axis;
        let h = (domain.max()[a] - domain.min()[a]) / cells_per_axis[a] as f64;
        let k = (slit.coord - domain.min()[a]) / h;
        if (k - k.round()).abs() > 1e-9 {
            return Err(Error::InvalidMesh(
                "slit facet does not lie on initial mesh lines".into(),
            ));
        }
    }

    let mut cells = [1u64; MAX_DIM];
    for a in 0..dim {
        cells[a] = cells_per_axis[a] as u64;
    }
    let total: u64 = cells[..dim].iter().product();
    let mut bricks = Vec::with_capacity(total as usize);
    // Lexicographic root order, axis 0 fastest.
    for flat in 0..total {
        let mut rem = flat;
        let mut iv = [Interval::root(0); MAX_DIM];
        for a in 0..dim {
            let idx = rem % cells[a];
            rem /= cells[a];
            iv[a] = Interval::root(idx);
        }
        bricks.push(Brick {
            id: flat as usize,
            iv,
            parent: None,
            children: Vec::new(),
            split_axes: AxisSet::empty(),
        });
    }
    let mut mesh = BrickMesh {
        domain,
        cells,
        bricks,
        active: Vec::new(),
        adjacency: Adjacency::default(),
        lineage: vec![fresh_nonce()],
    };
    mesh.rebuild_active();
    mesh.adjacency = mesh.compute_adjacency()?;
    Ok(mesh)
}

impl BrickMesh {
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn spatial_dim(&self) -> usize {
        self.domain.spatial_dim()
    }

    pub fn cells_per_axis(&self) -> &[u64] {
        &self.cells[..self.dim()]
    }

    /// All bricks ever created (active and refined), indexed by id.
    pub fn bricks(&self) -> &[Brick] {
        &self.bricks
    }

    pub fn brick(&self, id: usize) -> &Brick {
        &self.bricks[id]
    }

    /// Ids of active bricks in ascending order.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    /// Width of a root cell along `axis`.
    pub fn root_width(&self, axis: usize) -> f64 {
        (self.domain.max()[axis] - self.domain.min()[axis]) / self.cells[axis] as f64
    }

    pub fn brick_anchor(&self, brick: &Brick) -> [f64; MAX_DIM] {
        let mut a = [0.0; MAX_DIM];
        for ax in 0..self.dim() {
            a[ax] = self.domain.min()[ax] + brick.iv[ax].start().as_f64() * self.root_width(ax);
        }
        a
    }

    pub fn brick_sizes(&self, brick: &Brick) -> [f64; MAX_DIM] {
        let mut s = [0.0; MAX_DIM];
        for ax in 0..self.dim() {
            s[ax] = brick.iv[ax].width_f64() * self.root_width(ax);
        }
        s
    }

    pub fn brick_volume(&self, brick: &Brick) -> f64 {
        let s = self.brick_sizes(brick);
        s[..self.dim()].iter().product()
    }

    /// Sum of active brick volumes.
    pub fn active_volume(&self) -> f64 {
        self.active
            .iter()
            .map(|&id| self.brick_volume(&self.bricks[id]))
            .sum()
    }

    /// Whether the brick's upper time face lies on the terminal face Σ_T.
    pub fn on_terminal_face(&self, brick: &Brick) -> bool {
        let t = self.domain.time_axis();
        brick.iv[t].end() == Dyadic::new(self.cells[t], 0)
    }

    /// Whether the closure of the brick's spatial footprint contains `x`.
    pub fn spatial_closure_contains(&self, brick: &Brick, x: &[f64]) -> bool {
        for a in 0..self.spatial_dim() {
            let lo = self.domain.min()[a] + brick.iv[a].start().as_f64() * self.root_width(a);
            let hi = self.domain.min()[a] + brick.iv[a].end().as_f64() * self.root_width(a);
            if x[a] < lo - 1e-12 || x[a] > hi + 1e-12 {
                return false;
            }
        }
        true
    }

    fn rebuild_active(&mut self) {
        self.active = self
            .bricks
            .iter()
            .filter(|b| b.is_active())
            .map(|b| b.id)
            .collect();
    }

    /// Refine the given active elements, then repair 1-irregularity and face
    /// compatibility by minimal closure splits. Returns a new mesh that
    /// extends this mesh's forest.
    pub fn refine(&self, directives: &[RefinementDirective]) -> Result<BrickMesh> {
        let dim = self.dim();
        let mut mesh = self.clone();
        mesh.lineage.push(fresh_nonce());
        // Deduplicate directives per element (union of axis sets).
        let mut requested: HashMap<usize, AxisSet> = HashMap::new();
        for d in directives {
            if d.axes.is_empty() {
                return Err(Error::InvalidArgument(
                    "refinement directive with empty axis set".into(),
                ));
            }
            if d.axes.iter(MAX_DIM).any(|a| a >= dim) {
                return Err(Error::InvalidArgument(format!(
                    "refinement axis out of range for element {}",
                    d.element
                )));
            }
            match mesh.bricks.get(d.element) {
                Some(b) if b.is_active() => {}
                _ => return Err(Error::StaleDirective { element: d.element }),
            }
            requested
                .entry(d.element)
                .and_modify(|s| {
                    for a in d.axes.iter(dim) {
                        s.insert(a)
                    }
                })
                .or_insert(d.axes);
        }
        let mut worklist: Vec<(usize, AxisSet)> = requested.into_iter().collect();
        worklist.sort_by_key(|&(id, _)| id);

        let mut passes = 0usize;
        while !worklist.is_empty() {
            passes += 1;
            if passes > 10_000 {
                return Err(Error::InvalidMesh(
                    "refinement closure did not terminate".into(),
                ));
            }
            for (id, axes) in worklist.drain(..) {
                if mesh.bricks[id].is_active() {
                    mesh.split(id, axes)?;
                }
            }
            mesh.rebuild_active();
            worklist = mesh.closure_violations()?;
        }
        mesh.rebuild_active();
        mesh.adjacency = mesh.compute_adjacency()?;
        Ok(mesh)
    }

    fn split(&mut self, id: usize, axes: AxisSet) -> Result<()> {
        let dim = self.dim();
        for a in axes.iter(dim) {
            if self.bricks[id].iv[a].level + 1 > MAX_LEVEL {
                return Err(Error::InvalidMesh(format!(
                    "refinement depth limit reached on axis {a}"
                )));
            }
        }
        let parent_iv = self.bricks[id].iv;
        let k = axes.count();
        let split_axes: Vec<usize> = axes.iter(dim).collect();
        let mut child_ids = Vec::with_capacity(1 << k);
        for combo in 0..(1usize << k) {
            let mut iv = parent_iv;
            for (bit, &a) in split_axes.iter().enumerate() {
                let (lo, hi) = parent_iv[a].split();
                iv[a] = if combo & (1 << bit) == 0 { lo } else { hi };
            }
            let cid = self.bricks.len();
            self.bricks.push(Brick {
                id: cid,
                iv,
                parent: Some(id),
                children: Vec::new(),
                split_axes: AxisSet::empty(),
            });
            child_ids.push(cid);
        }
        self.bricks[id].children = child_ids;
        self.bricks[id].split_axes = axes;
        Ok(())
    }

    /// Scan active faces for 1-irregularity and mixed-overlap violations.
    /// Returns closure directives (minimal axis sets on the coarser side).
    fn closure_violations(&self) -> Result<Vec<(usize, AxisSet)>> {
        let dim = self.dim();
        let pairs = self.face_pairs()?;
        let mut out: HashMap<usize, AxisSet> = HashMap::new();
        let mut add = |id: usize, axis: usize| {
            out.entry(id)
                .and_modify(|s| s.insert(axis))
                .or_insert_with(|| AxisSet::single(axis));
        };
        for &(lo, hi, axis) in &pairs {
            let bl = &self.bricks[lo];
            let bh = &self.bricks[hi];
            // Per-axis level gap must be at most one.
            for a in 0..dim {
                let (la, ha) = (bl.iv[a].level, bh.iv[a].level);
                if la + 2 <= ha {
                    add(lo, a);
                } else if ha + 2 <= la {
                    add(hi, a);
                }
            }
            // Face compatibility: tangential overlap must be one whole face.
            let mut lo_coarser = AxisSet::empty();
            let mut hi_coarser = AxisSet::empty();
            for a in 0..dim {
                if a == axis {
                    continue;
                }
                if !bl.iv[a].overlaps(&bh.iv[a]) {
                    continue;
                }
                if bl.iv[a].level < bh.iv[a].level && !bl.iv[a].contains_interval(&bh.iv[a]) {
                    // partial overlap handled below via mixed detection
                }
                if bl.iv[a].level < bh.iv[a].level {
                    lo_coarser.insert(a);
                } else if bh.iv[a].level < bl.iv[a].level {
                    hi_coarser.insert(a);
                }
            }
            if !lo_coarser.is_empty() && !hi_coarser.is_empty() {
                // Mixed face: split the overall-coarser brick along the axes
                // where it is coarser; ties go to the smaller id.
                let suml: u32 = (0..dim).map(|a| bl.iv[a].level).sum();
                let sumh: u32 = (0..dim).map(|a| bh.iv[a].level).sum();
                let pick_lo = suml < sumh || (suml == sumh && lo < hi);
                let (id, set) = if pick_lo {
                    (lo, lo_coarser)
                } else {
                    (hi, hi_coarser)
                };
                for a in set.iter(dim) {
                    add(id, a);
                }
            }
        }
        let mut v: Vec<(usize, AxisSet)> = out.into_iter().collect();
        v.sort_by_key(|&(id, _)| id);
        Ok(v)
    }

    /// All face-adjacent active pairs as (lower-side id, upper-side id, axis).
    fn face_pairs(&self) -> Result<Vec<(usize, usize, usize)>> {
        let dim = self.dim();
        let mut pairs = Vec::new();
        for axis in 0..dim {
            // Group active bricks by face plane coordinate.
            let mut lo_side: HashMap<Dyadic, Vec<usize>> = HashMap::new();
            let mut hi_side: HashMap<Dyadic, Vec<usize>> = HashMap::new();
            for &id in &self.active {
                let b = &self.bricks[id];
                lo_side.entry(b.iv[axis].end()).or_default().push(id);
                hi_side.entry(b.iv[axis].start()).or_default().push(id);
            }
            let mut planes: Vec<Dyadic> = lo_side.keys().cloned().collect();
            planes.sort();
            for plane in planes {
                let Some(his) = hi_side.get(&plane) else {
                    continue;
                };
                let los = &lo_side[&plane];
                self.match_plane(axis, los, his, &mut pairs);
            }
        }
        pairs.sort();
        Ok(pairs)
    }

    /// Match bricks touching one plane from both sides by tangential overlap.
    fn match_plane(
        &self,
        axis: usize,
        los: &[usize],
        his: &[usize],
        pairs: &mut Vec<(usize, usize, usize)>,
    ) {
        let dim = self.dim();
        let tang: Vec<usize> = (0..dim).filter(|&a| a != axis).collect();
        if tang.len() == 1 {
            let t = tang[0];
            let index = AxisIndex::build(his.iter().map(|&id| (self.bricks[id].iv[t], id)));
            let mut hits = Vec::new();
            for &lo in los {
                index.overlapping(self.bricks[lo].iv[t], &mut hits);
                for &hi in &hits {
                    pairs.push((lo, hi, axis));
                }
            }
        } else {
            // Two tangential axes: group the upper side by its first
            // tangential interval, then match on the second axis per group.
            let (t1, t2) = (tang[0], tang[1]);
            let mut groups: HashMap<(u64, u32), Vec<usize>> = HashMap::new();
            for &id in his {
                let iv = self.bricks[id].iv[t1];
                groups.entry((iv.num, iv.level)).or_default().push(id);
            }
            let mut keys: Vec<(u64, u32)> = groups.keys().cloned().collect();
            keys.sort();
            let t1_index = AxisIndex::build(keys.iter().enumerate().map(|(gi, &(num, level))| {
                (Interval { num, level }, gi)
            }));
            let t2_indexes: Vec<AxisIndex> = keys
                .iter()
                .map(|k| {
                    AxisIndex::build(groups[k].iter().map(|&id| (self.bricks[id].iv[t2], id)))
                })
                .collect();
            let mut ghits = Vec::new();
            let mut hits = Vec::new();
            for &lo in los {
                t1_index.overlapping(self.bricks[lo].iv[t1], &mut ghits);
                for &gi in &ghits {
                    t2_indexes[gi].overlapping(self.bricks[lo].iv[t2], &mut hits);
                    for &hi in &hits {
                        pairs.push((lo, hi, axis));
                    }
                }
            }
        }
    }

    /// Build the conforming/hanging face records. Fails if a mixed face
    /// survives closure (which would break the constraint model).
    fn compute_adjacency(&self) -> Result<Adjacency> {
        let dim = self.dim();
        let pairs = self.face_pairs()?;
        let mut adj = Adjacency::default();
        // master (id, axis, side) -> slaves
        let mut hanging: HashMap<(usize, usize, bool), Vec<usize>> = HashMap::new();
        for &(lo, hi, axis) in &pairs {
            let bl = &self.bricks[lo];
            let bh = &self.bricks[hi];
            let mut conforming = true;
            let mut lo_contains_hi = true;
            let mut hi_contains_lo = true;
            for a in 0..dim {
                if a == axis {
                    continue;
                }
                if bl.iv[a] != bh.iv[a] {
                    conforming = false;
                }
                if !bl.iv[a].contains_interval(&bh.iv[a]) {
                    lo_contains_hi = false;
                }
                if !bh.iv[a].contains_interval(&bl.iv[a]) {
                    hi_contains_lo = false;
                }
            }
            if conforming {
                adj.conforming.push((lo, hi, axis));
            } else if lo_contains_hi {
                hanging.entry((lo, axis, true)).or_default().push(hi);
            } else if hi_contains_lo {
                hanging.entry((hi, axis, false)).or_default().push(lo);
            } else {
                return Err(Error::InvalidMesh(format!(
                    "incompatible face overlap between elements {lo} and {hi}"
                )));
            }
        }
        let mut keys: Vec<(usize, usize, bool)> = hanging.keys().cloned().collect();
        keys.sort();
        for key in keys {
            let mut slaves = hanging.remove(&key).unwrap();
            slaves.sort_unstable();
            adj.hanging.push(HangingFace {
                master: key.0,
                axis: key.1,
                master_side_hi: key.2,
                slaves,
            });
        }
        Ok(adj)
    }

    /// Line-based text snapshot (one brick per line) for debugging and golden
    /// tests.
    pub fn write_snapshot(&self) -> String {
        let dim = self.dim();
        let mut s = String::new();
        writeln!(s, "brickmesh dim {} spatial {}", dim, self.spatial_dim()).unwrap();
        write!(s, "cells").unwrap();
        for a in 0..dim {
            write!(s, " {}", self.cells[a]).unwrap();
        }
        writeln!(s).unwrap();
        write!(s, "domain").unwrap();
        for a in 0..dim {
            write!(s, " {}", self.domain.min()[a]).unwrap();
        }
        for a in 0..dim {
            write!(s, " {}", self.domain.max()[a]).unwrap();
        }
        writeln!(s).unwrap();
        for b in &self.bricks {
            let anchor = self.brick_anchor(b);
            let sizes = self.brick_sizes(b);
            write!(s, "{}", b.id).unwrap();
            for a in 0..dim {
                write!(s, " {}", anchor[a]).unwrap();
            }
            for a in 0..dim {
                write!(s, " {}", sizes[a]).unwrap();
            }
            writeln!(
                s,
                " {}",
                match b.status() {
                    BrickStatus::Active => "active",
                    BrickStatus::Refined => "refined",
                }
            )
            .unwrap();
        }
        s
    }

    /// Check that every active brick traces back to a root of the initial
    /// grid without cycles.
    pub fn forest_is_acyclic(&self) -> bool {
        let n_roots: u64 = self.cells[..self.dim()].iter().product();
        for &id in &self.active {
            let mut cur = id;
            let mut steps = 0;
            loop {
                match self.bricks[cur].parent {
                    None => {
                        if cur as u64 >= n_roots {
                            return false;
                        }
                        break;
                    }
                    Some(p) => {
                        if p >= cur {
                            return false;
                        }
                        cur = p;
                    }
                }
                steps += 1;
                if steps > self.bricks.len() {
                    return false;
                }
            }
        }
        true
    }

    /// Whether this mesh was produced from `other` by a chain of `refine`
    /// calls (or is the same mesh).
    pub fn is_refinement_of(&self, other: &BrickMesh) -> bool {
        other.lineage.len() <= self.lineage.len()
            && self.lineage[..other.lineage.len()] == other.lineage[..]
    }

    /// Whether `ancestor` is `id` or a forest ancestor of `id`.
    pub fn is_ancestor_or_self(&self, ancestor: usize, id: usize) -> bool {
        let mut cur = id;
        loop {
            if cur == ancestor {
                return true;
            }
            match self.bricks[cur].parent {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }
}

/// Sorted interval index over a set of (mostly disjoint) dyadic intervals on
/// one axis, answering overlap queries exactly.
struct AxisIndex {
    /// (start, payload) sorted by start.
    sorted: Vec<(Dyadic, usize)>,
    /// Exact interval -> position in `sorted`.
    by_key: HashMap<(u64, u32), usize>,
    intervals: Vec<Interval>,
    max_level: u32,
}

impl AxisIndex {
    fn build(items: impl Iterator<Item = (Interval, usize)>) -> Self {
        let mut entries: Vec<(Interval, usize)> = items.collect();
        entries.sort_by(|a, b| a.0.start().cmp(&b.0.start()).then(a.1.cmp(&b.1)));
        let mut sorted = Vec::with_capacity(entries.len());
        let mut by_key = HashMap::with_capacity(entries.len());
        let mut intervals = Vec::with_capacity(entries.len());
        let mut max_level = 0;
        for (pos, (iv, payload)) in entries.into_iter().enumerate() {
            sorted.push((iv.start(), payload));
            by_key.insert((iv.num, iv.level), pos);
            intervals.push(iv);
            max_level = max_level.max(iv.level);
        }
        AxisIndex {
            sorted,
            by_key,
            intervals,
            max_level,
        }
    }

    /// Payloads of all stored intervals overlapping `query` (positive
    /// measure).
    fn overlapping(&self, query: Interval, out: &mut Vec<usize>) {
        out.clear();
        let qs = query.start();
        let qe = query.end();
        // Stored intervals whose start lies in [qs, qe).
        let lo = self.sorted.partition_point(|&(s, _)| s < qs);
        for &(s, payload) in &self.sorted[lo..] {
            if s >= qe {
                break;
            }
            out.push(payload);
        }
        // Stored intervals strictly containing qs: enumerate the dyadic
        // ancestors of qs at every coarser level.
        for level in 0..=self.max_level {
            let num = if level >= qs.level {
                qs.num << (level - qs.level)
            } else {
                qs.num >> (qs.level - level)
            };
            if let Some(&pos) = self.by_key.get(&(num, level)) {
                let iv = self.intervals[pos];
                if iv.start() < qs && iv.contains_point(qs) {
                    out.push(self.sorted[pos].1);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
    }
}
