//! Mesh-dependent norm evaluations by elementwise tensor quadrature.
//!
//! ‖v‖_h²   = ½‖v‖²_{Σ_T} + Σ_K [ θ_K h_K ‖∂_t v‖²_K + ‖ν^{1/2}∇_x v‖²_K ]
//! ‖v‖_h,*² = ‖v‖_h² + Σ_K [ (θ_K h_K)^{-1}‖v‖²_K + θ_K h_K ‖div_x(ν∇_x v)‖²_K ]
//! |||v|||²_{(ε,κ)} = κ‖ν^{1/2}∇_x v‖²_Q + ε‖v‖²_{Σ_T}

use crate::assembly::{for_each_quad_point, BasisAtPoint, StabilizationParams};
use crate::error::{Error, Result};
use crate::fespace::FeSpace;
use crate::mesh::{Brick, BrickMesh, MAX_DIM};
use crate::par;
use crate::problem::{ExactSolution, NuCoeff, ProblemSpec};
use crate::quadrature::QuadratureRule;
use crate::shapes::{for_each_multi_index, Tab1d};

/// What to integrate: an FE function (full-DOF coefficients), an analytic
/// field, or their difference u_h − u.
#[derive(Clone, Copy)]
pub enum FieldRef<'a> {
    Coeffs(&'a [f64]),
    Exact(&'a ExactSolution),
    Diff {
        coeffs: &'a [f64],
        exact: &'a ExactSolution,
    },
}

/// Quadrature order selection: a base order plus a boost on elements whose
/// spatial closure contains the singular point.
#[derive(Clone, Debug)]
pub struct QuadPlan {
    pub base_order: usize,
    pub boost: usize,
    pub singularity: Option<Vec<f64>>,
}

impl QuadPlan {
    pub fn uniform(order: usize) -> QuadPlan {
        QuadPlan {
            base_order: order,
            boost: 0,
            singularity: None,
        }
    }

    /// Default plan for error and estimator integrals: order p+2, raised by
    /// two near a singular column.
    pub fn for_problem(problem: &ProblemSpec, p: usize) -> QuadPlan {
        QuadPlan {
            base_order: p + 2,
            boost: 2,
            singularity: problem.singularity.clone(),
        }
    }

    pub fn order_for(&self, mesh: &BrickMesh, brick: &Brick) -> usize {
        match &self.singularity {
            Some(x) if mesh.spatial_closure_contains(brick, x) => self.base_order + self.boost,
            _ => self.base_order,
        }
    }
}

/// Field sample at one space-time point.
#[derive(Clone, Copy, Default)]
pub(crate) struct Sample {
    pub v: f64,
    pub grad: [f64; 2],
    pub dt: f64,
    pub lap: Option<f64>,
}

/// Per-element state for sampling a field at quadrature points.
pub(crate) struct ElemField<'a> {
    field: FieldRef<'a>,
    dim: usize,
    local: Vec<f64>,
    basis: BasisAtPoint,
    inv_h: [f64; MAX_DIM],
}

impl<'a> ElemField<'a> {
    pub fn new(space: &FeSpace, field: FieldRef<'a>, ai: usize) -> ElemField<'a> {
        let dim = space.dim();
        let n_loc = space.elem_dofs(ai).len();
        let local = match field {
            FieldRef::Coeffs(c) | FieldRef::Diff { coeffs: c, .. } => space
                .elem_dofs(ai)
                .iter()
                .map(|&f| c[f as usize])
                .collect(),
            FieldRef::Exact(_) => Vec::new(),
        };
        let brick = space.mesh().brick(space.mesh().active()[ai]);
        let sizes = space.mesh().brick_sizes(brick);
        let mut inv_h = [0.0; MAX_DIM];
        for a in 0..dim {
            inv_h[a] = 1.0 / sizes[a];
        }
        ElemField {
            field,
            dim,
            local,
            basis: BasisAtPoint::new(n_loc),
            inv_h,
        }
    }

    /// Sample at tensor quadrature index `q` / physical point `x`.
    pub fn sample(&mut self, space: &FeSpace, tab: &Tab1d, q: &[usize; 3], x: &[f64]) -> Sample {
        let dim = self.dim;
        let d = dim - 1;
        let mut out = Sample::default();
        let fe_part = |basis: &mut BasisAtPoint, local: &[f64]| -> Sample {
            basis.fill(dim, space.degree(), tab, q, &self.inv_h);
            let mut s = Sample {
                lap: Some(0.0),
                ..Default::default()
            };
            let mut lap = 0.0;
            for (k, &c) in local.iter().enumerate() {
                s.v += c * basis.phi[k];
                s.dt += c * basis.dt[k];
                for i in 0..d {
                    s.grad[i] += c * basis.grad[k][i];
                }
                lap += c * basis.lap[k];
            }
            s.lap = Some(lap);
            s
        };
        match self.field {
            FieldRef::Coeffs(_) => {
                out = fe_part(&mut self.basis, &self.local);
            }
            FieldRef::Exact(e) => {
                out.v = (e.value)(&x[..d], x[d]);
                out.dt = (e.dt)(&x[..d], x[d]);
                (e.grad_x)(&x[..d], x[d], &mut out.grad[..d]);
                out.lap = e.laplace_x.as_ref().map(|l| l(&x[..d], x[d]));
            }
            FieldRef::Diff { exact: e, .. } => {
                out = fe_part(&mut self.basis, &self.local);
                out.v -= (e.value)(&x[..d], x[d]);
                out.dt -= (e.dt)(&x[..d], x[d]);
                let mut g = [0.0; 2];
                (e.grad_x)(&x[..d], x[d], &mut g[..d]);
                for i in 0..d {
                    out.grad[i] -= g[i];
                }
                out.lap = match (out.lap, e.laplace_x.as_ref()) {
                    (Some(l), Some(le)) => Some(l - le(&x[..d], x[d])),
                    _ => None,
                };
            }
        }
        out
    }

    /// Value on the top face (reference time coordinate 1) at a spatial
    /// quadrature index.
    pub fn sample_top_value(
        &mut self,
        space: &FeSpace,
        tab: &Tab1d,
        q_spatial: &[usize; 3],
        x: &[f64],
        t_end: f64,
    ) -> f64 {
        let dim = self.dim;
        let d = dim - 1;
        let p = space.degree();
        let fe = |local: &[f64]| -> f64 {
            // Gauss–Lobatto bases are nodal at the endpoint: only the last
            // time index contributes on the top face.
            let mut v = 0.0;
            let mut li = 0usize;
            for_each_multi_index(dim, p + 1, |idx| {
                if idx[dim - 1] == p {
                    let mut phi = 1.0;
                    for a in 0..d {
                        phi *= tab.val[q_spatial[a]][idx[a]];
                    }
                    v += local[li] * phi;
                }
                li += 1;
            });
            v
        };
        match self.field {
            FieldRef::Coeffs(_) => fe(&self.local),
            FieldRef::Exact(e) => (e.value)(&x[..d], t_end),
            FieldRef::Diff { exact: e, .. } => fe(&self.local) - (e.value)(&x[..d], t_end),
        }
    }
}

/// Σ over elements of the volume quadrature of
/// `integrand(sample, nu_value, stab_weight, point)`.
fn sum_volume(
    space: &FeSpace,
    field: FieldRef<'_>,
    nu: &NuCoeff,
    plan: &QuadPlan,
    integrand: impl Fn(&Sample, f64, f64, &[f64]) -> f64 + Sync,
    stab: &StabilizationParams,
) -> f64 {
    let mesh = space.mesh();
    par::sum_range(mesh.n_active(), |ai| {
        let brick = mesh.brick(mesh.active()[ai]);
        let order = plan.order_for(mesh, brick);
        let quad = QuadratureRule::gauss_legendre(order).expect("valid order");
        let tab = space.shapes().tabulate(quad.points());
        let mut ef = ElemField::new(space, field, ai);
        let sw = stab.weight(mesh, brick);
        let d = mesh.spatial_dim();
        let mut acc = 0.0;
        for_each_quad_point(mesh, brick, &quad, |q, x, w| {
            let s = ef.sample(space, &tab, q, x);
            let nu_val = nu.value(&x[..d], x[d]);
            acc += w * integrand(&s, nu_val, sw, x);
        });
        acc
    })
}

/// ∫_{Σ_T} w² by face quadrature over elements touching the terminal face.
fn sum_terminal_sq(space: &FeSpace, field: FieldRef<'_>, plan: &QuadPlan) -> f64 {
    let mesh = space.mesh();
    let dim = mesh.dim();
    let d = dim - 1;
    let t_end = mesh.domain().t_end();
    par::sum_range(mesh.n_active(), |ai| {
        let brick = mesh.brick(mesh.active()[ai]);
        if !mesh.on_terminal_face(brick) {
            return 0.0;
        }
        let order = plan.order_for(mesh, brick);
        let quad = QuadratureRule::gauss_legendre(order).expect("valid order");
        let tab = space.shapes().tabulate(quad.points());
        let mut ef = ElemField::new(space, field, ai);
        let anchor = mesh.brick_anchor(brick);
        let sizes = mesh.brick_sizes(brick);
        let area: f64 = sizes[..d].iter().product();
        let nq = quad.order();
        let mut acc = 0.0;
        for_each_multi_index(d, nq, |qs| {
            let mut x = [0.0; MAX_DIM];
            let mut w = area;
            for a in 0..d {
                x[a] = anchor[a] + sizes[a] * quad.points()[qs[a]];
                w *= quad.weights()[qs[a]];
            }
            x[d] = t_end;
            let v = ef.sample_top_value(space, &tab, qs, &x[..dim], t_end);
            acc += w * v * v;
        });
        acc
    })
}

/// The mesh-dependent norm ‖w‖_h.
pub fn norm_h(
    space: &FeSpace,
    field: FieldRef<'_>,
    stab: &StabilizationParams,
    nu: &NuCoeff,
    plan: &QuadPlan,
) -> f64 {
    let d = space.mesh().spatial_dim();
    let vol = sum_volume(
        space,
        field,
        nu,
        plan,
        |s, nu_val, sw, _| {
            let mut g2 = 0.0;
            for i in 0..d {
                g2 += s.grad[i] * s.grad[i];
            }
            sw * s.dt * s.dt + nu_val * g2
        },
        stab,
    );
    let face = sum_terminal_sq(space, field, plan);
    (0.5 * face + vol).sqrt()
}

/// The extended norm ‖w‖_{h,*}; requires θ_K > 0 and second derivatives.
pub fn norm_h_star(
    space: &FeSpace,
    field: FieldRef<'_>,
    stab: &StabilizationParams,
    nu: &NuCoeff,
    plan: &QuadPlan,
) -> Result<f64> {
    if stab.theta0 <= 0.0 {
        return Err(Error::InvalidArgument(
            "the h,* norm requires a positive stabilization scale".into(),
        ));
    }
    if let FieldRef::Exact(e) | FieldRef::Diff { exact: e, .. } = field {
        if e.laplace_x.is_none() {
            return Err(Error::InvalidArgument(
                "the h,* norm needs the spatial Laplacian of the exact field".into(),
            ));
        }
    }
    let d = space.mesh().spatial_dim();
    let base = norm_h(space, field, stab, nu, plan);
    let extra = sum_volume(
        space,
        field,
        nu,
        plan,
        |s, nu_val, sw, x| {
            let lap = s.lap.unwrap_or(0.0);
            // div(ν∇w) = ν Δw + ∇ν·∇w; the gradient term drops for constant ν.
            let mut divflux = nu_val * lap;
            if !nu.is_constant() {
                let mut gnu = [0.0; 2];
                nu.grad(&x[..d], x[d], &mut gnu[..d]);
                for i in 0..d {
                    divflux += gnu[i] * s.grad[i];
                }
            }
            s.v * s.v / sw + sw * divflux * divflux
        },
        stab,
    );
    Ok((base * base + extra).sqrt())
}

/// |||w|||_{(ε,κ)} with κ weighting the ν-gradient part and ε the terminal
/// trace.
pub fn triple_norm(
    space: &FeSpace,
    field: FieldRef<'_>,
    eps: f64,
    kappa: f64,
    nu: &NuCoeff,
    plan: &QuadPlan,
) -> Result<f64> {
    if eps < 0.0 || kappa < 0.0 {
        return Err(Error::InvalidArgument(
            "triple norm weights must be nonnegative".into(),
        ));
    }
    let d = space.mesh().spatial_dim();
    let stab = StabilizationParams::default();
    let vol = if kappa > 0.0 {
        sum_volume(
            space,
            field,
            nu,
            plan,
            |s, nu_val, _, _| {
                let mut g2 = 0.0;
                for i in 0..d {
                    g2 += s.grad[i] * s.grad[i];
                }
                nu_val * g2
            },
            &stab,
        )
    } else {
        0.0
    };
    let face = if eps > 0.0 {
        sum_terminal_sq(space, field, plan)
    } else {
        0.0
    };
    Ok((kappa * vol + eps * face).sqrt())
}

/// ‖w‖_{L2(Q)} by elementwise quadrature.
pub fn l2_q(space: &FeSpace, field: FieldRef<'_>, plan: &QuadPlan) -> f64 {
    let stab = StabilizationParams::default();
    sum_volume(
        space,
        field,
        &NuCoeff::Constant(1.0),
        plan,
        |s, _, _, _| s.v * s.v,
        &stab,
    )
    .sqrt()
}
