//! Continuous Q_p tensor-product nodal space on a brick mesh, with
//! hanging-node constraints and essential boundary conditions on Σ ∪ Σ₀.
//!
//! Nodes are identified across elements by exact per-axis keys (dyadic point
//! coordinates for nodes on element boundaries, interval + index for interior
//! Gauss–Lobatto nodes), so conforming faces share DOFs without floating
//! point comparisons. Slave-face nodes on hanging faces are constrained to
//! interpolate the master-face trace; the constraint operator C maps true
//! DOFs to full DOFs with identity rows for unconstrained DOFs.

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::mesh::{BrickMesh, MAX_DIM};
use crate::problem::ProblemSpec;
use crate::shapes::{for_each_multi_index, ShapeSet};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

const NONE: u32 = u32::MAX;

pub const CLASS_LATERAL: u8 = 1;
pub const CLASS_BOTTOM: u8 = 2;
pub const CLASS_TOP: u8 = 4;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum AxisKey {
    Point { num: u64, level: u32 },
    Inner { num: u64, level: u32, k: u8 },
}

type NodeKey = [AxisKey; MAX_DIM];

pub struct FeSpace {
    mesh: Arc<BrickMesh>,
    p: usize,
    shapes: ShapeSet,
    elem_dofs: Vec<Vec<u32>>,
    active_index_of_brick: Vec<u32>,
    node_pos: Vec<[f64; MAX_DIM]>,
    node_class: Vec<u8>,
    // Constraints, resolved so each row references true DOFs only.
    constraint_of: Vec<u32>,
    constrained_full: Vec<u32>,
    constraint_rows: Vec<Vec<(u32, f64)>>,
    // True DOF numbering (unconstrained full DOFs).
    full_to_true: Vec<u32>,
    true_to_full: Vec<u32>,
    // Essential bookkeeping over true DOFs.
    essential: Vec<bool>,
    essential_value: Vec<f64>,
    true_to_free: Vec<u32>,
    free_to_true: Vec<u32>,
}

impl FeSpace {
    /// Build the space on a finalized mesh: global numbering with shared DOFs
    /// merged on conforming faces, hanging DOFs constrained toward master
    /// faces, essential DOFs collected on Σ ∪ Σ₀ with values from the
    /// problem's boundary data. The terminal face Σ_T stays free.
    pub fn build(mesh: Arc<BrickMesh>, p: usize, problem: &ProblemSpec) -> Result<FeSpace> {
        if mesh.n_active() == 0 {
            return Err(Error::InvalidMesh("mesh has no active elements".into()));
        }
        let dim = mesh.dim();
        let shapes = ShapeSet::new(p)?;
        let n_loc = (p + 1).pow(dim as u32);

        let mut active_index_of_brick = vec![NONE; mesh.bricks().len()];
        for (ai, &id) in mesh.active().iter().enumerate() {
            active_index_of_brick[id] = ai as u32;
        }

        // 1. Global numbering by exact node keys.
        let mut key_to_dof: HashMap<NodeKey, u32> = HashMap::new();
        let mut elem_dofs: Vec<Vec<u32>> = Vec::with_capacity(mesh.n_active());
        let mut node_pos: Vec<[f64; MAX_DIM]> = Vec::new();
        let ref_nodes = shapes.nodes().to_vec();
        for &id in mesh.active() {
            let b = mesh.brick(id);
            let anchor = mesh.brick_anchor(b);
            let sizes = mesh.brick_sizes(b);
            let mut dofs = Vec::with_capacity(n_loc);
            for_each_multi_index(dim, p + 1, |idx| {
                let mut key = [AxisKey::Point { num: 0, level: 0 }; MAX_DIM];
                let mut pos = [0.0; MAX_DIM];
                for a in 0..dim {
                    let iv = b.interval(a);
                    key[a] = if idx[a] == 0 {
                        let d = iv.start();
                        AxisKey::Point {
                            num: d.num,
                            level: d.level,
                        }
                    } else if idx[a] == p {
                        let d = iv.end();
                        AxisKey::Point {
                            num: d.num,
                            level: d.level,
                        }
                    } else {
                        AxisKey::Inner {
                            num: iv.num,
                            level: iv.level,
                            k: idx[a] as u8,
                        }
                    };
                    pos[a] = anchor[a] + sizes[a] * ref_nodes[idx[a]];
                }
                let next = node_pos.len() as u32;
                let dof = *key_to_dof.entry(key).or_insert_with(|| {
                    node_pos.push(pos);
                    next
                });
                dofs.push(dof);
            });
            elem_dofs.push(dofs);
        }
        let n_full = node_pos.len();

        // 2. Boundary classification from exact keys.
        let mut node_class = vec![0u8; n_full];
        {
            let mut class_of_key: HashMap<NodeKey, u32> = HashMap::new();
            std::mem::swap(&mut class_of_key, &mut key_to_dof);
            let t_axis = mesh.domain().time_axis();
            for (key, &dof) in &class_of_key {
                let mut class = 0u8;
                for a in 0..dim {
                    if let AxisKey::Point { num, level } = key[a] {
                        let d = Dyadic::new(num, level);
                        let lo = d == Dyadic::new(0, 0);
                        let hi = d == Dyadic::new(mesh.cells_per_axis()[a], 0);
                        if a == t_axis {
                            if lo {
                                class |= CLASS_BOTTOM;
                            }
                            if hi {
                                class |= CLASS_TOP;
                            }
                        } else if lo || hi {
                            class |= CLASS_LATERAL;
                        }
                    }
                }
                if mesh.domain().on_slit(&node_pos[dof as usize][..dim - 1]) {
                    class |= CLASS_LATERAL;
                }
                node_class[dof as usize] = class;
            }
        }

        // 3. Hanging constraints: slave-face nodes interpolate the master
        // trace. First raw rows over full DOFs, then chain resolution.
        let mut raw: BTreeMap<u32, Vec<(u32, f64)>> = BTreeMap::new();
        let mut wbuf: Vec<Vec<f64>> = vec![vec![0.0; p + 1]; MAX_DIM];
        for hf in &mesh.adjacency().hanging {
            let m_ai = active_index_of_brick[hf.master] as usize;
            let mb = mesh.brick(hf.master);
            let m_anchor = mesh.brick_anchor(mb);
            let m_sizes = mesh.brick_sizes(mb);
            let m_face_idx = if hf.master_side_hi { p } else { 0 };
            // Master face DOFs in tangential lexicographic order.
            let mut master_face: Vec<u32> = Vec::new();
            for_each_multi_index(dim, p + 1, |idx| {
                if idx[hf.axis] == m_face_idx {
                    master_face.push(elem_dofs[m_ai][local_flat(idx, p, dim)]);
                }
            });
            let tang: Vec<usize> = (0..dim).filter(|&a| a != hf.axis).collect();
            for &s_id in &hf.slaves {
                let s_ai = active_index_of_brick[s_id] as usize;
                let s_face_idx = if hf.master_side_hi { 0 } else { p };
                for_each_multi_index(dim, p + 1, |idx| {
                    if idx[hf.axis] != s_face_idx {
                        return;
                    }
                    let f = elem_dofs[s_ai][local_flat(idx, p, dim)];
                    if master_face.contains(&f) || raw.contains_key(&f) {
                        return;
                    }
                    // Reference coordinates of the node within the master
                    // face, per tangential axis.
                    for (ti, &a) in tang.iter().enumerate() {
                        let r = ((node_pos[f as usize][a] - m_anchor[a]) / m_sizes[a])
                            .clamp(0.0, 1.0);
                        shapes.eval(r, &mut wbuf[ti]);
                    }
                    let mut row: Vec<(u32, f64)> = Vec::new();
                    let mut fi = 0usize;
                    for_each_multi_index(dim - 1, p + 1, |tidx| {
                        let mut w = 1.0;
                        for ti in 0..dim - 1 {
                            w *= wbuf[ti][tidx[ti]];
                        }
                        if w.abs() > 1e-13 {
                            row.push((master_face[fi], w));
                        }
                        fi += 1;
                    });
                    raw.insert(f, row);
                });
            }
        }

        // Chain resolution: substitute constrained targets until every row
        // references unconstrained DOFs only. 1-irregularity keeps chains
        // short; the pass cap guards against cycles.
        for pass in 0..=(dim + 2) {
            let mut changed = false;
            let keys: Vec<u32> = raw.keys().cloned().collect();
            for key in keys {
                let row = raw[&key].clone();
                if !row.iter().any(|(t, _)| raw.contains_key(t)) {
                    continue;
                }
                changed = true;
                let mut expanded: BTreeMap<u32, f64> = BTreeMap::new();
                for (t, w) in row {
                    if let Some(inner) = raw.get(&t) {
                        for &(t2, w2) in inner {
                            *expanded.entry(t2).or_insert(0.0) += w * w2;
                        }
                    } else {
                        *expanded.entry(t).or_insert(0.0) += w;
                    }
                }
                raw.insert(
                    key,
                    expanded
                        .into_iter()
                        .filter(|(_, w)| w.abs() > 1e-14)
                        .collect(),
                );
            }
            if !changed {
                break;
            }
            if pass == dim + 2 {
                return Err(Error::InvalidMesh(
                    "hanging-node constraints did not resolve".into(),
                ));
            }
        }

        // 4. True numbering: unconstrained full DOFs keep their order.
        let mut constraint_of = vec![NONE; n_full];
        let mut constrained_full = Vec::with_capacity(raw.len());
        for (ci, &f) in raw.keys().enumerate() {
            constraint_of[f as usize] = ci as u32;
            constrained_full.push(f);
        }
        let mut full_to_true = vec![NONE; n_full];
        let mut true_to_full = Vec::with_capacity(n_full - raw.len());
        for f in 0..n_full {
            if constraint_of[f] == NONE {
                full_to_true[f] = true_to_full.len() as u32;
                true_to_full.push(f as u32);
            }
        }
        let constraint_rows: Vec<Vec<(u32, f64)>> = raw
            .values()
            .map(|row| {
                row.iter()
                    .map(|&(f, w)| (full_to_true[f as usize], w))
                    .collect()
            })
            .collect();
        debug_assert!(constraint_rows
            .iter()
            .all(|row| row.iter().all(|&(t, _)| t != NONE)));

        // 5. Essential DOFs on Σ ∪ Σ₀ with prescribed values; Σ_T is free.
        let n_true = true_to_full.len();
        let mut essential = vec![false; n_true];
        let mut essential_value = vec![0.0; n_true];
        for t in 0..n_true {
            let f = true_to_full[t] as usize;
            let class = node_class[f];
            if class & (CLASS_LATERAL | CLASS_BOTTOM) != 0 {
                essential[t] = true;
                let pos = &node_pos[f];
                essential_value[t] = if class & CLASS_BOTTOM != 0 {
                    (problem.initial)(&pos[..dim - 1])
                } else {
                    (problem.dirichlet)(&pos[..dim - 1], pos[dim - 1])
                };
            }
        }
        let mut true_to_free = vec![NONE; n_true];
        let mut free_to_true = Vec::new();
        for t in 0..n_true {
            if !essential[t] {
                true_to_free[t] = free_to_true.len() as u32;
                free_to_true.push(t as u32);
            }
        }

        Ok(FeSpace {
            mesh,
            p,
            shapes,
            elem_dofs,
            active_index_of_brick,
            node_pos,
            node_class,
            constraint_of,
            constrained_full,
            constraint_rows,
            full_to_true,
            true_to_full,
            essential,
            essential_value,
            true_to_free,
            free_to_true,
        })
    }

    pub fn mesh(&self) -> &BrickMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<BrickMesh> {
        Arc::clone(&self.mesh)
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn shapes(&self) -> &ShapeSet {
        &self.shapes
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn n_full(&self) -> usize {
        self.node_pos.len()
    }

    pub fn n_true(&self) -> usize {
        self.true_to_full.len()
    }

    pub fn n_free(&self) -> usize {
        self.free_to_true.len()
    }

    pub fn n_constrained(&self) -> usize {
        self.constrained_full.len()
    }

    pub fn n_essential(&self) -> usize {
        self.n_true() - self.n_free()
    }

    pub fn elem_dofs(&self, active_idx: usize) -> &[u32] {
        &self.elem_dofs[active_idx]
    }

    pub fn active_index_of_brick(&self, brick_id: usize) -> Option<usize> {
        let ai = self.active_index_of_brick[brick_id];
        (ai != NONE).then_some(ai as usize)
    }

    pub fn node_position(&self, full: u32) -> &[f64] {
        &self.node_pos[full as usize][..self.dim()]
    }

    pub fn node_class(&self, full: u32) -> u8 {
        self.node_class[full as usize]
    }

    pub fn is_constrained(&self, full: u32) -> bool {
        self.constraint_of[full as usize] != NONE
    }

    pub fn constraint_row(&self, full: u32) -> Option<&[(u32, f64)]> {
        let ci = self.constraint_of[full as usize];
        (ci != NONE).then(|| self.constraint_rows[ci as usize].as_slice())
    }

    pub fn constrained_dofs(&self) -> &[u32] {
        &self.constrained_full
    }

    pub fn full_to_true(&self, full: u32) -> Option<u32> {
        let t = self.full_to_true[full as usize];
        (t != NONE).then_some(t)
    }

    pub fn true_to_full(&self, t: u32) -> u32 {
        self.true_to_full[t as usize]
    }

    pub fn is_essential(&self, t: u32) -> bool {
        self.essential[t as usize]
    }

    pub fn essential_value(&self, t: u32) -> f64 {
        self.essential_value[t as usize]
    }

    pub fn true_to_free(&self, t: u32) -> Option<u32> {
        let fr = self.true_to_free[t as usize];
        (fr != NONE).then_some(fr)
    }

    pub fn free_to_true(&self, fr: u32) -> u32 {
        self.free_to_true[fr as usize]
    }

    /// Scatter expansion of a full DOF through the constraint operator:
    /// calls `f(true_dof, weight)` for every true DOF the full DOF reads.
    pub fn expand(&self, full: u32, mut f: impl FnMut(u32, f64)) {
        match self.constraint_row(full) {
            None => f(self.full_to_true[full as usize], 1.0),
            Some(row) => {
                for &(t, w) in row {
                    f(t, w);
                }
            }
        }
    }

    /// full = C · true.
    pub fn full_from_true(&self, true_vec: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_full()];
        for f in 0..self.n_full() {
            match self.constraint_row(f as u32) {
                None => full[f] = true_vec[self.full_to_true[f] as usize],
                Some(row) => {
                    full[f] = row.iter().map(|&(t, w)| w * true_vec[t as usize]).sum();
                }
            }
        }
        full
    }

    /// Combine free values with stored essential values into a full vector.
    pub fn full_from_free(&self, free: &[f64]) -> Vec<f64> {
        let mut tv = self.essential_value.clone();
        for (fr, &t) in self.free_to_true.iter().enumerate() {
            tv[t as usize] = free[fr];
        }
        self.full_from_true(&tv)
    }

    pub fn true_from_full(&self, full: &[f64]) -> Vec<f64> {
        self.true_to_full
            .iter()
            .map(|&f| full[f as usize])
            .collect()
    }

    /// Nodal Lagrange interpolation: coefficients are nodal values of `g`.
    pub fn interpolate(&self, g: impl Fn(&[f64], f64) -> f64) -> Vec<f64> {
        let dim = self.dim();
        (0..self.n_full())
            .map(|f| {
                let pos = &self.node_pos[f];
                g(&pos[..dim - 1], pos[dim - 1])
            })
            .collect()
    }

    /// Map a physical point into an element's reference coordinates.
    pub fn map_to_ref(&self, active_idx: usize, x: &[f64]) -> [f64; MAX_DIM] {
        let b = self.mesh.brick(self.mesh.active()[active_idx]);
        let anchor = self.mesh.brick_anchor(b);
        let sizes = self.mesh.brick_sizes(b);
        let mut r = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            r[a] = ((x[a] - anchor[a]) / sizes[a]).clamp(0.0, 1.0);
        }
        r
    }

    /// Evaluate the FE function at reference coordinates within an element.
    pub fn eval_local(&self, active_idx: usize, coeffs_full: &[f64], r: &[f64]) -> f64 {
        let dim = self.dim();
        let n = self.p + 1;
        let mut vals = [[0.0; 8]; MAX_DIM];
        for a in 0..dim {
            self.shapes.eval(r[a], &mut vals[a][..n]);
        }
        let dofs = &self.elem_dofs[active_idx];
        let mut total = 0.0;
        let mut li = 0usize;
        for_each_multi_index(dim, n, |idx| {
            let mut phi = 1.0;
            for a in 0..dim {
                phi *= vals[a][idx[a]];
            }
            total += phi * coeffs_full[dofs[li] as usize];
            li += 1;
        });
        total
    }

    /// Find an active element containing the point (any one on boundaries).
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mesh = &self.mesh;
        let dim = self.dim();
        let mut root = 0usize;
        let mut stride = 1usize;
        for a in 0..dim {
            let w = mesh.root_width(a);
            let n = mesh.cells_per_axis()[a] as usize;
            let idx = (((x[a] - mesh.domain().min()[a]) / w).floor() as i64)
                .clamp(0, n as i64 - 1) as usize;
            root += idx * stride;
            stride *= n;
        }
        let mut cur = root;
        let eps = 1e-12;
        loop {
            let b = mesh.brick(cur);
            if b.is_active() {
                return self.active_index_of_brick(cur);
            }
            let mut found = None;
            for &c in b.children() {
                let cb = mesh.brick(c);
                let anchor = mesh.brick_anchor(cb);
                let sizes = mesh.brick_sizes(cb);
                let inside = (0..dim)
                    .all(|a| x[a] >= anchor[a] - eps && x[a] <= anchor[a] + sizes[a] + eps);
                if inside {
                    found = Some(c);
                    break;
                }
            }
            cur = found?;
        }
    }

    /// Breakdown of free DOFs into temporal layers (by node time coordinate),
    /// for the time-slab block-Jacobi preconditioner.
    pub fn time_slab_blocks(&self) -> Vec<usize> {
        let t_axis = self.dim() - 1;
        let mut times: Vec<f64> = self
            .free_to_true
            .iter()
            .map(|&t| self.node_pos[self.true_to_full[t as usize] as usize][t_axis])
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();
        self.free_to_true
            .iter()
            .map(|&t| {
                let tc = self.node_pos[self.true_to_full[t as usize] as usize][t_axis];
                times.partition_point(|&v| v < tc)
            })
            .collect()
    }

    /// Maximum trace mismatch across hanging faces for a conforming
    /// coefficient vector, sampled at deterministic interior points.
    pub fn hanging_face_value_gap(&self, coeffs_full: &[f64], samples: usize) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for hf in &self.mesh.adjacency().hanging {
            let m_ai = self.active_index_of_brick[hf.master] as usize;
            for &s_id in &hf.slaves {
                let s_ai = self.active_index_of_brick[s_id] as usize;
                let sb = self.mesh.brick(s_id);
                let anchor = self.mesh.brick_anchor(sb);
                let sizes = self.mesh.brick_sizes(sb);
                for k in 0..samples {
                    // Low-discrepancy interior points on the slave subface.
                    let mut x = [0.0; MAX_DIM];
                    let mut seed = 0.381966 + 0.323606 * k as f64;
                    for a in 0..dim {
                        let r = if a == hf.axis {
                            if hf.master_side_hi {
                                0.0
                            } else {
                                1.0
                            }
                        } else {
                            seed = (seed * 9.869604401).fract();
                            0.05 + 0.9 * seed
                        };
                        x[a] = anchor[a] + sizes[a] * r;
                    }
                    let rs = self.map_to_ref(s_ai, &x[..dim]);
                    let rm = self.map_to_ref(m_ai, &x[..dim]);
                    let vs = self.eval_local(s_ai, coeffs_full, &rs[..dim]);
                    let vm = self.eval_local(m_ai, coeffs_full, &rm[..dim]);
                    worst = worst.max((vs - vm).abs());
                }
            }
        }
        worst
    }

    /// Text dump of DOF maps and constraints for golden tests.
    pub fn dump_dof_map(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "fespace p {} full {} true {} free {}",
            self.p,
            self.n_full(),
            self.n_true(),
            self.n_free()
        )
        .unwrap();
        for (ai, &id) in self.mesh.active().iter().enumerate() {
            write!(s, "elem {ai} brick {id}:").unwrap();
            for &d in &self.elem_dofs[ai] {
                write!(s, " {d}").unwrap();
            }
            writeln!(s).unwrap();
        }
        for (ci, &f) in self.constrained_full.iter().enumerate() {
            write!(s, "constraint {f} =").unwrap();
            for &(t, w) in &self.constraint_rows[ci] {
                write!(s, " {w}*T{t}").unwrap();
            }
            writeln!(s).unwrap();
        }
        s
    }
}

#[inline]
fn local_flat(idx: &[usize; 3], p: usize, dim: usize) -> usize {
    let n = p + 1;
    let mut flat = 0;
    let mut stride = 1;
    for a in 0..dim {
        flat += idx[a] * stride;
        stride *= n;
    }
    flat
}

/// Nodal interpolation of a coarse FE function onto a space whose mesh
/// refines the coarse mesh. Exact for functions of the coarse space.
pub fn prolongate(
    coarse: &FeSpace,
    coarse_full: &[f64],
    fine: &FeSpace,
) -> Result<Vec<f64>> {
    let dim = fine.dim();
    if coarse.dim() != dim || coarse.degree() != fine.degree() {
        return Err(Error::Hierarchy(
            "spaces differ in dimension or degree".into(),
        ));
    }
    if !fine.mesh().is_refinement_of(coarse.mesh()) {
        return Err(Error::Hierarchy(
            "fine mesh is not a refinement of the coarse mesh".into(),
        ));
    }
    let coarse_bricks = coarse.mesh().bricks().len();
    let mut out = vec![f64::NAN; fine.n_full()];
    for (ai, &id) in fine.mesh().active().iter().enumerate() {
        // Ancestor of this fine element that is active in the coarse mesh.
        let mut anc = id;
        let c_ai = loop {
            if anc < coarse_bricks {
                if let Some(c_ai) = coarse.active_index_of_brick(anc) {
                    break c_ai;
                }
            }
            anc = fine
                .mesh()
                .brick(anc)
                .parent()
                .ok_or_else(|| Error::Hierarchy("meshes are not nested".into()))?;
        };
        let dofs = fine.elem_dofs(ai);
        for &f in dofs {
            if !out[f as usize].is_nan() {
                continue;
            }
            let pos = fine.node_position(f);
            let r = coarse.map_to_ref(c_ai, pos);
            out[f as usize] = coarse.eval_local(c_ai, coarse_full, &r[..dim]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_tensor_mesh, AxisSet, DomainSpec, RefinementDirective};
    use crate::problem::smooth_problem;

    fn space_on(
        cells: &[usize],
        p: usize,
        refine: &[(usize, &[usize])],
    ) -> (Arc<BrickMesh>, FeSpace) {
        let d = cells.len() - 1;
        let problem = smooth_problem(d).unwrap();
        let mut mesh = build_tensor_mesh(problem.domain.clone(), cells).unwrap();
        for &(el, axes) in refine {
            mesh = mesh
                .refine(&[RefinementDirective {
                    element: el,
                    axes: AxisSet::from_axes(axes),
                }])
                .unwrap();
        }
        let mesh = Arc::new(mesh);
        let space = FeSpace::build(Arc::clone(&mesh), p, &problem).unwrap();
        (mesh, space)
    }

    #[test]
    fn single_brick_dof_counts() {
        let (_, s1) = space_on(&[1, 1], 1, &[]);
        assert_eq!(s1.n_full(), 4);
        assert_eq!(s1.n_true(), 4);
        // All four corners lie on Σ ∪ Σ₀ for the unit cell.
        assert_eq!(s1.n_essential(), 4);
        assert_eq!(s1.n_free(), 0);

        let (_, s2) = space_on(&[1, 1], 2, &[]);
        assert_eq!(s2.n_full(), 9);
        // Gauss–Lobatto midpoints are present.
        let mut mids = 0;
        for f in 0..s2.n_full() as u32 {
            let pos = s2.node_position(f);
            if (pos[0] - 0.5).abs() < 1e-15 {
                mids += 1;
            }
        }
        assert_eq!(mids, 3);
        // Free DOFs: (1/2, 1/2) and (1/2, 1) — the terminal face is free.
        assert_eq!(s2.n_free(), 2);
        for fr in 0..s2.n_free() as u32 {
            let f = s2.true_to_full(s2.free_to_true(fr));
            let pos = s2.node_position(f);
            assert!((pos[0] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn terminal_face_is_free() {
        let (_, s) = space_on(&[4, 4], 1, &[]);
        assert_eq!(s.n_full(), 25);
        assert_eq!(s.n_essential(), 13);
        assert_eq!(s.n_free(), 12);
        let mut top_free = 0;
        for fr in 0..s.n_free() as u32 {
            let f = s.true_to_full(s.free_to_true(fr));
            if s.node_class(f) & CLASS_TOP != 0 {
                top_free += 1;
            }
        }
        assert_eq!(top_free, 3, "interior Σ_T nodes must stay free");
    }

    #[test]
    fn single_hanging_dof_with_half_weights() {
        // 1 × 2 grid in (x, t); refining the lower cell in x hangs one vertex
        // on the shared time face.
        let (_, s) = space_on(&[1, 2], 1, &[(0, &[0])]);
        assert_eq!(s.n_constrained(), 1);
        let f = s.constrained_dofs()[0];
        let pos = s.node_position(f);
        assert!((pos[0] - 0.5).abs() < 1e-15 && (pos[1] - 0.5).abs() < 1e-15);
        let row = s.constraint_row(f).unwrap();
        assert_eq!(row.len(), 2);
        assert!((row[0].1 - 0.5).abs() < 1e-14);
        assert!((row[1].1 - 0.5).abs() < 1e-14);
        // Masters are the corners of the coarse face.
        for &(t, _) in row {
            let mf = s.true_to_full(t);
            let mpos = s.node_position(mf);
            assert!((mpos[1] - 0.5).abs() < 1e-15);
            assert!(mpos[0].abs() < 1e-15 || (mpos[0] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn constraint_rows_sum_to_one() {
        for p in [1usize, 2, 3] {
            let (_, s) = space_on(&[2, 2], p, &[(0, &[0, 1]), (1, &[1])]);
            assert!(s.n_constrained() > 0);
            for &f in s.constrained_dofs() {
                let sum: f64 = s.constraint_row(f).unwrap().iter().map(|&(_, w)| w).sum();
                assert!((sum - 1.0).abs() < 1e-12, "p={p} dof={f} sum={sum}");
            }
        }
    }

    #[test]
    fn hanging_faces_are_continuous_for_random_true_vectors() {
        let mut state = 0xC0FFEEu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for (cells, p) in [(vec![2usize, 2, 2], 1), (vec![2, 2, 2], 2), (vec![2, 2], 3)] {
            let refinements: Vec<(usize, Vec<usize>)> = if cells.len() == 3 {
                vec![(0, vec![0, 2]), (3, vec![1])]
            } else {
                vec![(0, vec![0]), (2, vec![1])]
            };
            let refs: Vec<(usize, &[usize])> = refinements
                .iter()
                .map(|(e, a)| (*e, a.as_slice()))
                .collect();
            let (_, s) = space_on(&cells, p, &refs);
            assert!(s.n_constrained() > 0, "expected hanging DOFs");
            let tv: Vec<f64> = (0..s.n_true()).map(|_| next() - 0.5).collect();
            let full = s.full_from_true(&tv);
            let gap = s.hanging_face_value_gap(&full, 5);
            assert!(gap < 1e-12, "continuity gap {gap} (p={p})");
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let (_, s) = space_on(&[2, 3], 1, &[(0, &[1])]);
        let ones = s.interpolate(|_, _| 1.0);
        assert!(ones.iter().all(|&v| (v - 1.0).abs() < 1e-15));

        // g = x t is bilinear, hence reproduced exactly by Q1.
        let g = |x: &[f64], t: f64| x[0] * t;
        let coeffs = s.interpolate(g);
        for f in 0..s.n_full() as u32 {
            let pos = s.node_position(f);
            assert!((coeffs[f as usize] - pos[0] * pos[1]).abs() < 1e-15);
        }
        for &(x, t) in &[(0.21, 0.67), (0.53, 0.11), (0.99, 0.98)] {
            let ai = s.locate(&[x, t]).unwrap();
            let r = s.map_to_ref(ai, &[x, t]);
            let v = s.eval_local(ai, &coeffs, &r[..2]);
            assert!((v - x * t).abs() < 1e-13);
        }
    }

    #[test]
    fn prolongation_is_exact_for_coarse_functions() {
        let d = 1;
        let problem = smooth_problem(d).unwrap();
        let mesh = Arc::new(build_tensor_mesh(problem.domain.clone(), &[2, 2]).unwrap());
        let coarse = FeSpace::build(Arc::clone(&mesh), 1, &problem).unwrap();

        // Constant preservation.
        let dirs: Vec<_> = mesh
            .active()
            .iter()
            .map(|&id| RefinementDirective {
                element: id,
                axes: AxisSet::all(2),
            })
            .collect();
        let fine_mesh = Arc::new(mesh.refine(&dirs).unwrap());
        let fine = FeSpace::build(Arc::clone(&fine_mesh), 1, &problem).unwrap();
        let ones = vec![1.0; coarse.n_full()];
        let up = prolongate(&coarse, &ones, &fine).unwrap();
        assert!(up.iter().all(|&v| (v - 1.0).abs() < 1e-14));

        // Hat function: fine coefficients are edge-midpoint averages.
        let hat = coarse.interpolate(|x, _| 1.0 - (2.0 * (x[0] - 0.5)).abs());
        let up = prolongate(&coarse, &hat, &fine).unwrap();
        for f in 0..fine.n_full() as u32 {
            let pos = fine.node_position(f);
            let expect = 1.0 - (2.0 * (pos[0] - 0.5)).abs();
            assert!((up[f as usize] - expect).abs() < 1e-14);
        }

        // Random coarse vectors evaluate identically at sample points.
        let mut state = 0x1234_5678u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let tv: Vec<f64> = (0..coarse.n_true()).map(|_| next() - 0.5).collect();
        let cfull = coarse.full_from_true(&tv);
        let ffull = prolongate(&coarse, &cfull, &fine).unwrap();
        for _ in 0..100 {
            let pt = [next(), next()];
            let cai = coarse.locate(&pt).unwrap();
            let fai = fine.locate(&pt).unwrap();
            let cv = coarse.eval_local(cai, &cfull, &coarse.map_to_ref(cai, &pt)[..2]);
            let fv = fine.eval_local(fai, &ffull, &fine.map_to_ref(fai, &pt)[..2]);
            assert!((cv - fv).abs() < 1e-12);
        }

        // Unrelated meshes are rejected.
        let other = Arc::new(build_tensor_mesh(problem.domain.clone(), &[3, 3]).unwrap());
        let other_space = FeSpace::build(other, 1, &problem).unwrap();
        assert!(prolongate(&other_space, &vec![0.0; other_space.n_full()], &fine).is_err());
    }

    #[test]
    fn essential_values_come_from_boundary_data() {
        // Manufactured inhomogeneous trace.
        let mut problem = smooth_problem(1).unwrap();
        problem.dirichlet = Box::new(|x: &[f64], t: f64| x[0] + 2.0 * t);
        problem.initial = Box::new(|x: &[f64]| x[0]);
        let mesh = Arc::new(build_tensor_mesh(problem.domain.clone(), &[2, 2]).unwrap());
        let s = FeSpace::build(mesh, 1, &problem).unwrap();
        for t in 0..s.n_true() as u32 {
            if !s.is_essential(t) {
                continue;
            }
            let pos = s.node_position(s.true_to_full(t));
            let class = s.node_class(s.true_to_full(t));
            let expect = if class & CLASS_BOTTOM != 0 {
                pos[0]
            } else {
                pos[0] + 2.0 * pos[1]
            };
            assert!((s.essential_value(t) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn dof_map_dump_is_stable() {
        let (_, s) = space_on(&[2, 1], 1, &[]);
        let dump = s.dump_dof_map();
        assert!(dump.starts_with("fespace p 1 full 6 true 6 free 1\n"));
        assert!(dump.contains("elem 0 brick 0: 0 1 2 3"));
        assert!(dump.contains("elem 1 brick 1: 1 4 3 5"));
    }
}
