//! Element integrals of the stabilized space-time forms and global sparse
//! assembly with constraint expansion and essential elimination.
//!
//! The bilinear form per element K is
//! ∫_K [ ∂_t u v + θ_K h_K ∂_t u ∂_t v + ν ∇_x u·∇_x v
//!       − θ_K h_K div_x(ν ∇_x u) ∂_t v ] dK,
//! and the load is ∫_K [ f v + θ_K h_K f ∂_t v ] dK.

use crate::error::{Error, Result};
use crate::fespace::FeSpace;
use crate::mesh::{element_sizes, Brick, BrickMesh, HkConvention, MAX_DIM};
use crate::par;
use crate::problem::{NuCoeff, ProblemSpec};
use crate::quadrature::QuadratureRule;
use crate::shapes::{for_each_multi_index, ShapeSet, Tab1d};
use crate::solver::CsrMatrix;

/// Upwind stabilization scale: θ_K = theta0 · h_K, with h_K given by the
/// convention. The weight entering every stabilized term is θ_K h_K.
#[derive(Clone, Copy, Debug)]
pub struct StabilizationParams {
    pub theta0: f64,
    pub convention: HkConvention,
}

impl StabilizationParams {
    pub fn new(theta0: f64, convention: HkConvention) -> Result<Self> {
        if !(theta0 >= 0.0) {
            return Err(Error::InvalidArgument(
                "stabilization scale theta0 must be nonnegative".into(),
            ));
        }
        Ok(StabilizationParams { theta0, convention })
    }

    /// θ_K = theta0 · h_K for the default convention.
    pub fn theta(&self, mesh: &BrickMesh, brick: &Brick) -> f64 {
        self.theta0 * element_sizes(mesh, brick, self.convention).h_k
    }

    /// θ_K · h_K, the weight of the stabilized terms.
    pub fn weight(&self, mesh: &BrickMesh, brick: &Brick) -> f64 {
        let h_k = element_sizes(mesh, brick, self.convention).h_k;
        self.theta0 * h_k * h_k
    }
}

impl Default for StabilizationParams {
    fn default() -> Self {
        StabilizationParams {
            theta0: 0.5,
            convention: HkConvention::Temporal,
        }
    }
}

/// Sparse system over free true DOFs: K_h u = f_h with essential values
/// lifted into the right-hand side.
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Number of true DOFs of the space (free + essential).
    pub n_true: usize,
}

/// Per-element evaluation context: tabulated reference basis data at the
/// tensor quadrature points, shared across elements of equal order.
pub(crate) struct ElementTab {
    pub quad: QuadratureRule,
    pub tab: Tab1d,
}

impl ElementTab {
    pub fn new(shapes: &ShapeSet, order: usize) -> Result<ElementTab> {
        let quad = QuadratureRule::gauss_legendre(order)?;
        let tab = shapes.tabulate(quad.points());
        Ok(ElementTab { quad, tab })
    }
}

/// Basis values at one tensor quadrature point of one element: values, time
/// derivatives, spatial gradients and spatial Laplacians of all local shape
/// functions, in physical coordinates.
pub(crate) struct BasisAtPoint {
    pub phi: Vec<f64>,
    pub dt: Vec<f64>,
    pub grad: Vec<[f64; 2]>,
    pub lap: Vec<f64>,
}

impl BasisAtPoint {
    pub fn new(n_loc: usize) -> Self {
        BasisAtPoint {
            phi: vec![0.0; n_loc],
            dt: vec![0.0; n_loc],
            grad: vec![[0.0; 2]; n_loc],
            lap: vec![0.0; n_loc],
        }
    }

    /// Fill from tabulated 1D data at quadrature multi-index `q`.
    pub fn fill(&mut self, dim: usize, p: usize, tab: &Tab1d, q: &[usize; 3], inv_h: &[f64; 3]) {
        let n = p + 1;
        let d = dim - 1;
        let mut li = 0usize;
        for_each_multi_index(dim, n, |idx| {
            let mut val = 1.0;
            for a in 0..dim {
                val *= tab.val[q[a]][idx[a]];
            }
            self.phi[li] = val;

            // Time derivative: the time factor replaced by its derivative.
            let mut dt = tab.d1[q[dim - 1]][idx[dim - 1]] * inv_h[dim - 1];
            for a in 0..d {
                dt *= tab.val[q[a]][idx[a]];
            }
            self.dt[li] = dt;

            // Spatial gradient and Laplacian.
            let mut lap = 0.0;
            for i in 0..d {
                let mut g = tab.d1[q[i]][idx[i]] * inv_h[i];
                let mut l2 = tab.d2[q[i]][idx[i]] * inv_h[i] * inv_h[i];
                for a in 0..dim {
                    if a != i {
                        let f = tab.val[q[a]][idx[a]];
                        g *= f;
                        l2 *= f;
                    }
                }
                self.grad[li][i] = g;
                lap += l2;
            }
            self.lap[li] = lap;
            li += 1;
        });
    }
}

/// Iterate the tensor quadrature points of a brick: calls
/// `f(q_multi_index, physical_point, weight·|detJ|)`.
pub(crate) fn for_each_quad_point(
    mesh: &BrickMesh,
    brick: &Brick,
    quad: &QuadratureRule,
    mut f: impl FnMut(&[usize; 3], &[f64; 3], f64),
) {
    let dim = mesh.dim();
    let anchor = mesh.brick_anchor(brick);
    let sizes = mesh.brick_sizes(brick);
    let detj: f64 = sizes[..dim].iter().product();
    let nq = quad.order();
    for_each_multi_index(dim, nq, |q| {
        let mut x = [0.0; MAX_DIM];
        let mut w = detj;
        for a in 0..dim {
            x[a] = anchor[a] + sizes[a] * quad.points()[q[a]];
            w *= quad.weights()[q[a]];
        }
        f(q, &x, w);
    });
}

/// Element stiffness of the stabilized bilinear form, row-major with the
/// test index first. `stab_weight` is θ_K h_K.
pub fn element_matrix(
    mesh: &BrickMesh,
    brick: &Brick,
    nu: &NuCoeff,
    stab_weight: f64,
    shapes: &ShapeSet,
    quad: &QuadratureRule,
) -> Result<Vec<f64>> {
    let dim = mesh.dim();
    let d = dim - 1;
    let p = shapes.degree();
    let n_loc = (p + 1).pow(dim as u32);
    let tab = shapes.tabulate(quad.points());
    let sizes = mesh.brick_sizes(brick);
    let mut inv_h = [0.0; MAX_DIM];
    for a in 0..dim {
        inv_h[a] = 1.0 / sizes[a];
    }

    let mut basis = BasisAtPoint::new(n_loc);
    let mut a_mat = vec![0.0; n_loc * n_loc];
    let mut grad_nu = [0.0; 2];
    let mut bad_nu = None;
    for_each_quad_point(mesh, brick, quad, |q, x, w| {
        let nu_val = nu.value(&x[..d], x[d]);
        if !(nu_val > 0.0) {
            bad_nu = Some(nu_val);
            return;
        }
        basis.fill(dim, p, &tab, q, &inv_h);
        if !nu.is_constant() {
            nu.grad(&x[..d], x[d], &mut grad_nu[..d]);
        }
        for jt in 0..n_loc {
            // div_x(ν ∇_x u) = ν Δ_x u + ∇_x ν · ∇_x u.
            let mut divflux = nu_val * basis.lap[jt];
            if !nu.is_constant() {
                for i in 0..d {
                    divflux += grad_nu[i] * basis.grad[jt][i];
                }
            }
            let dtj = basis.dt[jt];
            for it in 0..n_loc {
                let mut grad_dot = 0.0;
                for i in 0..d {
                    grad_dot += basis.grad[jt][i] * basis.grad[it][i];
                }
                a_mat[it * n_loc + jt] += w
                    * (dtj * basis.phi[it] + stab_weight * dtj * basis.dt[it]
                        + nu_val * grad_dot
                        - stab_weight * divflux * basis.dt[it]);
            }
        }
    });
    if let Some(v) = bad_nu {
        return Err(Error::Coefficient(format!(
            "nonpositive coefficient sample nu = {v}"
        )));
    }
    Ok(a_mat)
}

/// Element load of the stabilized linear form. `stab_weight` is θ_K h_K.
pub fn element_load(
    mesh: &BrickMesh,
    brick: &Brick,
    f: &(dyn Fn(&[f64], f64) -> f64 + Sync),
    stab_weight: f64,
    shapes: &ShapeSet,
    quad: &QuadratureRule,
) -> Vec<f64> {
    let dim = mesh.dim();
    let d = dim - 1;
    let p = shapes.degree();
    let n_loc = (p + 1).pow(dim as u32);
    let tab = shapes.tabulate(quad.points());
    let sizes = mesh.brick_sizes(brick);
    let mut inv_h = [0.0; MAX_DIM];
    for a in 0..dim {
        inv_h[a] = 1.0 / sizes[a];
    }
    let mut basis = BasisAtPoint::new(n_loc);
    let mut b = vec![0.0; n_loc];
    for_each_quad_point(mesh, brick, quad, |q, x, w| {
        let fv = f(&x[..d], x[d]);
        if fv == 0.0 {
            return;
        }
        basis.fill(dim, p, &tab, q, &inv_h);
        for it in 0..n_loc {
            b[it] += w * fv * (basis.phi[it] + stab_weight * basis.dt[it]);
        }
    });
    b
}

/// Assemble K_h = Cᵀ A C and f_h = Cᵀ(b − A g) restricted to free DOFs,
/// where C is the constraint operator and g lifts the essential values.
pub fn assemble(
    space: &FeSpace,
    problem: &ProblemSpec,
    stab: &StabilizationParams,
) -> Result<LinearSystem> {
    let mesh = space.mesh();
    let n_el = mesh.n_active();
    let p = space.degree();
    let base_order = p + 1;

    // Expansion of each element's local DOFs through constraints, as
    // (true_dof, weight) lists. Shared by pattern and value passes.
    let expansions: Vec<Vec<Vec<(u32, f64)>>> = par::map_range(n_el, |ai| {
        space
            .elem_dofs(ai)
            .iter()
            .map(|&f| {
                let mut list = Vec::with_capacity(1);
                space.expand(f, |t, w| list.push((t, w)));
                list
            })
            .collect()
    });

    // Sparsity pattern over free DOFs.
    let n_free = space.n_free();
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n_free];
    let mut scratch: Vec<u32> = Vec::new();
    for exp in &expansions {
        scratch.clear();
        for dof_list in exp {
            for &(t, _) in dof_list {
                if let Some(fr) = space.true_to_free(t) {
                    scratch.push(fr);
                }
            }
        }
        scratch.sort_unstable();
        scratch.dedup();
        for &r in &scratch {
            rows[r as usize].extend_from_slice(&scratch);
        }
    }
    let mut matrix = CsrMatrix::from_row_pattern(n_free, rows);
    let mut rhs = vec![0.0; n_free];

    // Element loop: parallel local computation in chunks, deterministic
    // sequential scatter in element order.
    const CHUNK: usize = 512;
    let mut chunk_start = 0usize;
    while chunk_start < n_el {
        let chunk_end = (chunk_start + CHUNK).min(n_el);
        let locals: Vec<(Vec<f64>, Vec<f64>)> =
            par::map_range(chunk_end - chunk_start, |k| {
                let ai = chunk_start + k;
                let brick = mesh.brick(mesh.active()[ai]);
                let order = base_order + problem.quad_boost(mesh, brick);
                let quad = QuadratureRule::gauss_legendre(order).expect("order >= 1");
                let sw = stab.weight(mesh, brick);
                let a_mat =
                    element_matrix(mesh, brick, &problem.nu, sw, space.shapes(), &quad)?;
                let b = element_load(mesh, brick, &problem.source, sw, space.shapes(), &quad);
                Ok::<_, Error>((a_mat, b))
            })
            .into_iter()
            .collect::<Result<_>>()?;

        for (k, (a_mat, b)) in locals.iter().enumerate() {
            let ai = chunk_start + k;
            let exp = &expansions[ai];
            let n_loc = exp.len();
            for (it, list_i) in exp.iter().enumerate() {
                for &(ti, wi) in list_i {
                    let Some(fi) = space.true_to_free(ti) else {
                        continue;
                    };
                    let fi = fi as usize;
                    rhs[fi] += wi * b[it];
                    for (jt, list_j) in exp.iter().enumerate() {
                        let a_ij = a_mat[it * n_loc + jt];
                        if a_ij == 0.0 {
                            continue;
                        }
                        for &(tj, wj) in list_j {
                            let v = wi * wj * a_ij;
                            match space.true_to_free(tj) {
                                Some(fj) => matrix.add_at(fi, fj as usize, v),
                                None => rhs[fi] -= v * space.essential_value(tj),
                            }
                        }
                    }
                }
            }
        }
        chunk_start = chunk_end;
    }

    Ok(LinearSystem {
        matrix,
        rhs,
        n_true: space.n_true(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::FeSpace;
    use crate::mesh::{build_tensor_mesh, AxisSet, DomainSpec, RefinementDirective};
    use crate::problem::smooth_problem;
    use crate::solver::{fgmres, make_preconditioner, FgmresConfig, PrecondKind};
    use std::sync::Arc;

    /// Exact polynomial arithmetic for the element-matrix oracle (test only,
    /// independent of the quadrature path).
    mod poly {
        pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
            let mut out = vec![0.0; a.len() + b.len() - 1];
            for (i, &ai) in a.iter().enumerate() {
                for (j, &bj) in b.iter().enumerate() {
                    out[i + j] += ai * bj;
                }
            }
            out
        }

        pub fn deriv(a: &[f64]) -> Vec<f64> {
            if a.len() <= 1 {
                return vec![0.0];
            }
            a.iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect()
        }

        /// ∫₀¹ a(x) dx.
        pub fn integrate01(a: &[f64]) -> f64 {
            a.iter()
                .enumerate()
                .map(|(k, &c)| c / (k as f64 + 1.0))
                .sum()
        }

        /// Lagrange basis polynomials for the given nodes.
        pub fn lagrange_basis(nodes: &[f64]) -> Vec<Vec<f64>> {
            let n = nodes.len();
            (0..n)
                .map(|j| {
                    let mut p = vec![1.0];
                    let mut denom = 1.0;
                    for (k, &xk) in nodes.iter().enumerate() {
                        if k != j {
                            p = mul(&p, &[-xk, 1.0]);
                            denom *= nodes[j] - xk;
                        }
                    }
                    p.iter().map(|c| c / denom).collect()
                })
                .collect()
        }
    }

    /// Symbolic oracle for the element matrix on an axis-aligned brick with
    /// constant ν: tensor products of exactly integrated 1D factors.
    fn symbolic_element_matrix(
        sizes: &[f64],
        p: usize,
        nu: f64,
        sw: f64,
        nodes: &[f64],
    ) -> Vec<f64> {
        let dim = sizes.len();
        let d = dim - 1;
        let n = p + 1;
        let n_loc = n.pow(dim as u32);
        let basis = poly::lagrange_basis(nodes);
        let dbasis: Vec<Vec<f64>> = basis.iter().map(|b| poly::deriv(b)).collect();
        let d2basis: Vec<Vec<f64>> = dbasis.iter().map(|b| poly::deriv(b)).collect();
        // 1D reference integrals (test index first).
        let mass = |i: usize, j: usize| poly::integrate01(&poly::mul(&basis[i], &basis[j]));
        let conv = |i: usize, j: usize| poly::integrate01(&poly::mul(&basis[i], &dbasis[j]));
        let stiff = |i: usize, j: usize| poly::integrate01(&poly::mul(&dbasis[i], &dbasis[j]));
        let d2m = |i: usize, j: usize| poly::integrate01(&poly::mul(&basis[i], &d2basis[j]));

        let mut local_idx = Vec::new();
        crate::shapes::for_each_multi_index(dim, n, |idx| local_idx.push(*idx));
        let mut a = vec![0.0; n_loc * n_loc];
        for (it, ii) in local_idx.iter().enumerate() {
            for (jt, jj) in local_idx.iter().enumerate() {
                let mut entry = 0.0;
                // (∂_t u, v): time factor ∫ v' u scaled by h_t/h_t = 1.
                {
                    let mut term = conv(ii[dim - 1], jj[dim - 1]);
                    for ax in 0..d {
                        term *= mass(ii[ax], jj[ax]) * sizes[ax];
                    }
                    entry += term;
                }
                // sw (∂_t u, ∂_t v): ∫ u' v' / h_t.
                {
                    let mut term = sw * stiff(ii[dim - 1], jj[dim - 1]) / sizes[dim - 1];
                    for ax in 0..d {
                        term *= mass(ii[ax], jj[ax]) * sizes[ax];
                    }
                    entry += term;
                }
                // ν (∇u, ∇v).
                for i in 0..d {
                    let mut term = nu * stiff(ii[i], jj[i]) / sizes[i];
                    for ax in 0..dim {
                        if ax != i {
                            term *= mass(ii[ax], jj[ax]) * sizes[ax];
                        }
                    }
                    entry += term;
                }
                // −sw ν (∂²_{x_i} u, ∂_t v).
                for i in 0..d {
                    let mut term = -sw * nu * d2m(ii[i], jj[i]) / sizes[i];
                    term *= conv(jj[dim - 1], ii[dim - 1]); // test derivative in t
                    for ax in 0..d {
                        if ax != i {
                            term *= mass(ii[ax], jj[ax]) * sizes[ax];
                        }
                    }
                    entry += term;
                }
                a[it * n_loc + jt] = entry;
            }
        }
        a
    }

    fn frob_rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let den: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    #[test]
    fn element_matrix_matches_symbolic_oracle_unit_cell() {
        // Unit cell, d = 1, p = 1, ν = 1, θ = 0: (∂_t u, v) + (∂_x u, ∂_x v).
        let dom = DomainSpec::interval(0.0, 1.0, 1.0).unwrap();
        let mesh = build_tensor_mesh(dom, &[1, 1]).unwrap();
        let shapes = ShapeSet::new(1).unwrap();
        let quad = QuadratureRule::gauss_legendre(2).unwrap();
        let a = element_matrix(
            &mesh,
            mesh.brick(0),
            &NuCoeff::Constant(1.0),
            0.0,
            &shapes,
            &quad,
        )
        .unwrap();
        let oracle = symbolic_element_matrix(&[1.0, 1.0], 1, 1.0, 0.0, shapes.nodes());
        assert!(frob_rel_err(&a, &oracle) < 1e-14);
        // Spot-check the stiffness block against the hand value
        // ∫ (1-x)' (1-x)' ∫ (1-t)² dt-type entries: A[0][0] must contain
        // mass(0,0)*conv + stiff(0,0)*mass = -1/3·... checked via oracle.
    }

    #[test]
    fn element_matrix_matches_symbolic_oracle_anisotropic() {
        for p in [1usize, 2, 3] {
            for (sx, st) in [(0.5, 0.25), (0.125, 1.0)] {
                let dom = DomainSpec::interval(0.0, sx, st).unwrap();
                let mesh = build_tensor_mesh(dom, &[1, 1]).unwrap();
                let shapes = ShapeSet::new(p).unwrap();
                let quad = QuadratureRule::gauss_legendre(p + 1).unwrap();
                let sw = 0.1 * st;
                let a = element_matrix(
                    &mesh,
                    mesh.brick(0),
                    &NuCoeff::Constant(2.5),
                    sw,
                    &shapes,
                    &quad,
                )
                .unwrap();
                let oracle = symbolic_element_matrix(&[sx, st], p, 2.5, sw, shapes.nodes());
                let err = frob_rel_err(&a, &oracle);
                assert!(err < 1e-12, "p={p} sizes=({sx},{st}): err {err}");
            }
        }
    }

    #[test]
    fn matrix_annihilates_constants() {
        // All form terms differentiate the trial function, so A·1 = 0.
        let dom = DomainSpec::rectangle(0.0, 2.0, 0.0, 1.0, 0.5).unwrap();
        let mesh = build_tensor_mesh(dom, &[1, 1, 1]).unwrap();
        let shapes = ShapeSet::new(2).unwrap();
        let quad = QuadratureRule::gauss_legendre(4).unwrap();
        let a = element_matrix(
            &mesh,
            mesh.brick(0),
            &NuCoeff::Constant(1.0),
            0.05,
            &shapes,
            &quad,
        )
        .unwrap();
        let n_loc = 27;
        for it in 0..n_loc {
            let s: f64 = (0..n_loc).map(|jt| a[it * n_loc + jt]).sum();
            assert!(s.abs() < 1e-12, "row {it} sum {s}");
        }
    }

    #[test]
    fn nonpositive_nu_rejected() {
        let dom = DomainSpec::interval(0.0, 1.0, 1.0).unwrap();
        let mesh = build_tensor_mesh(dom, &[1, 1]).unwrap();
        let shapes = ShapeSet::new(1).unwrap();
        let quad = QuadratureRule::gauss_legendre(2).unwrap();
        let nu = NuCoeff::Variable {
            eval: Box::new(|x, _| x[0] - 0.5),
            grad_x: Box::new(|_, _, g| g[0] = 1.0),
            min: -0.5,
        };
        assert!(matches!(
            element_matrix(&mesh, mesh.brick(0), &nu, 0.0, &shapes, &quad),
            Err(Error::Coefficient(_))
        ));
    }

    #[test]
    fn element_load_examples() {
        let dom = DomainSpec::interval(0.0, 1.0, 1.0).unwrap();
        let mesh = build_tensor_mesh(dom, &[1, 1]).unwrap();
        let shapes = ShapeSet::new(1).unwrap();
        let quad = QuadratureRule::gauss_legendre(2).unwrap();

        let zero = element_load(&mesh, mesh.brick(0), &|_, _| 0.0, 0.3, &shapes, &quad);
        assert!(zero.iter().all(|&v| v == 0.0));

        // f ≡ 1, θ = 0, p = 1, unit cell: each entry is 1/2^{d+1}.
        let ones = element_load(&mesh, mesh.brick(0), &|_, _| 1.0, 0.0, &shapes, &quad);
        for &v in &ones {
            assert!((v - 0.25).abs() < 1e-14);
        }

        // With θ > 0 the stabilized parts cancel in the sum over the test
        // functions (∂_t of a partition of unity).
        let with_theta = element_load(&mesh, mesh.brick(0), &|_, _| 1.0, 0.7, &shapes, &quad);
        let s0: f64 = ones.iter().sum();
        let s1: f64 = with_theta.iter().sum();
        assert!((s0 - s1).abs() < 1e-14);
    }

    #[test]
    fn galerkin_reproduces_manufactured_polynomial_solution() {
        // u = t·x(1−x) lies in Q2; the discrete solution must reproduce its
        // interpolant up to solver tolerance, including on a hanging mesh.
        let mut problem = smooth_problem(1).unwrap();
        problem.source = Box::new(|x: &[f64], t: f64| x[0] * (1.0 - x[0]) + 2.0 * t);
        problem.dirichlet = Box::new(|_, _| 0.0);
        problem.initial = Box::new(|_| 0.0);

        let mesh = build_tensor_mesh(problem.domain.clone(), &[4, 4]).unwrap();
        let mesh = mesh
            .refine(&[
                RefinementDirective {
                    element: 5,
                    axes: AxisSet::from_axes(&[0]),
                },
                RefinementDirective {
                    element: 10,
                    axes: AxisSet::from_axes(&[1]),
                },
            ])
            .unwrap();
        let space = FeSpace::build(Arc::new(mesh), 2, &problem).unwrap();
        assert!(space.n_constrained() > 0);
        let stab = StabilizationParams::default();
        let sys = assemble(&space, &problem, &stab).unwrap();

        let m = make_preconditioner(&sys.matrix, &PrecondKind::SymmetricGaussSeidel).unwrap();
        let x0 = vec![0.0; sys.rhs.len()];
        let cfg = FgmresConfig {
            rtol: 1e-12,
            ..Default::default()
        };
        let (x, stats) = fgmres(&sys.matrix, &sys.rhs, &x0, m.as_ref(), &cfg).unwrap();
        assert!(stats.converged);
        let u_full = space.full_from_free(&x);
        let exact = space.interpolate(|x, t| t * x[0] * (1.0 - x[0]));
        let worst = u_full
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-9, "max coefficient error {worst}");
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let mut problem = smooth_problem(1).unwrap();
        problem.source = Box::new(|_, _| 0.0);
        let mesh = build_tensor_mesh(problem.domain.clone(), &[4, 4]).unwrap();
        let space = FeSpace::build(Arc::new(mesh), 1, &problem).unwrap();
        let sys = assemble(&space, &problem, &StabilizationParams::default()).unwrap();
        assert!(sys.rhs.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn system_is_positive_definite_on_random_vectors() {
        let problem = smooth_problem(1).unwrap();
        let mesh = build_tensor_mesh(problem.domain.clone(), &[6, 6]).unwrap();
        let space = FeSpace::build(Arc::new(mesh), 1, &problem).unwrap();
        let sys = assemble(&space, &problem, &StabilizationParams::default()).unwrap();
        let n = sys.rhs.len();
        let mut state = 0x1357_9BDFu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut y = vec![0.0; n];
        for _ in 0..50 {
            let v: Vec<f64> = (0..n).map(|_| next()).collect();
            sys.matrix.matvec_into(&v, &mut y);
            let quad: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum();
            let nrm: f64 = v.iter().map(|a| a * a).sum();
            assert!(quad > 1e-12 * nrm, "vᵀKv = {quad} not positive");
        }
    }
}
