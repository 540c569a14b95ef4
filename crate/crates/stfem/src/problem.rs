//! Problem definitions: coefficients, data, exact solutions, and the
//! benchmark problems used by the studies.

use crate::error::Result;
use crate::mesh::{Brick, BrickMesh, DomainSpec, SlitFacet};

pub type SpaceTimeFn = Box<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type SpaceFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradFn = Box<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;

/// Diffusion coefficient ν, uniformly positive. Variable coefficients carry
/// their spatial gradient analytically so the stabilized form can evaluate
/// div(ν ∇u) = ν Δu + ∇ν·∇u.
pub enum NuCoeff {
    Constant(f64),
    Variable {
        eval: SpaceTimeFn,
        grad_x: GradFn,
        min: f64,
    },
}

impl NuCoeff {
    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        match self {
            NuCoeff::Constant(v) => *v,
            NuCoeff::Variable { eval, .. } => eval(x, t),
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            NuCoeff::Constant(v) => *v,
            NuCoeff::Variable { min, .. } => *min,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, NuCoeff::Constant(_))
    }

    pub fn grad(&self, x: &[f64], t: f64, out: &mut [f64]) {
        match self {
            NuCoeff::Constant(_) => out.iter_mut().for_each(|g| *g = 0.0),
            NuCoeff::Variable { grad_x, .. } => grad_x(x, t, out),
        }
    }
}

/// Exact solution data for error evaluation.
pub struct ExactSolution {
    pub value: SpaceTimeFn,
    pub grad_x: GradFn,
    pub dt: SpaceTimeFn,
    /// Spatial Laplacian; only needed by the h,* norm.
    pub laplace_x: Option<SpaceTimeFn>,
}

/// A linear parabolic initial-boundary value problem on Q = Ω × (0, T):
/// ∂_t u − div_x(ν ∇_x u) = f, u = g on Σ, u = u₀ on Σ₀.
pub struct ProblemSpec {
    pub name: String,
    pub domain: DomainSpec,
    pub nu: NuCoeff,
    pub source: SpaceTimeFn,
    /// Dirichlet trace g on the lateral boundary Σ (and the slit facet).
    pub dirichlet: SpaceTimeFn,
    /// Initial trace u₀ on Σ₀.
    pub initial: SpaceFn,
    pub exact: Option<ExactSolution>,
    /// Spatial point where the solution gradient is singular; elements whose
    /// spatial closure contains it integrate with a raised quadrature order.
    pub singularity: Option<Vec<f64>>,
}

impl ProblemSpec {
    pub fn spatial_dim(&self) -> usize {
        self.domain.spatial_dim()
    }

    /// Extra quadrature orders for an element (0 away from singularities).
    pub fn quad_boost(&self, mesh: &BrickMesh, brick: &Brick) -> usize {
        match &self.singularity {
            Some(x) if mesh.spatial_closure_contains(brick, x) => 2,
            _ => 0,
        }
    }
}

/// Polar coordinates about the origin with angle in [0, 2π).
pub fn polar(x: f64, y: f64) -> (f64, f64) {
    let r = x.hypot(y);
    let mut phi = y.atan2(x);
    if phi < 0.0 {
        phi += 2.0 * std::f64::consts::PI;
    }
    (r, phi)
}

/// Slit geometry variants for [`slit_problem`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SlitGeometry {
    /// Ω = (0,1)² with the slit on the bottom edge (the geometry of the
    /// benchmark as published; the slit is part of ∂Ω).
    PaperUnitSquare,
    /// Ω = (−1,1)² minus the segment [0,1)×{0}; the classical slit domain
    /// with the crack on an interior mesh line, pinned by the slit facet.
    Classical,
}

const ALPHA: f64 = 0.5;

fn slit_exact() -> ExactSolution {
    // u(r, φ, t) = t r^α sin(αφ), α = 1/2. The spatial factor is harmonic, so
    // f = ∂_t u. Values at r = 0 are the limit 0.
    let value: SpaceTimeFn = Box::new(|x, t| {
        let (r, phi) = polar(x[0], x[1]);
        if r == 0.0 {
            return 0.0;
        }
        t * r.powf(ALPHA) * (ALPHA * phi).sin()
    });
    let grad_x: GradFn = Box::new(|x, t, out| {
        let (r, phi) = polar(x[0], x[1]);
        if r == 0.0 {
            out[0] = 0.0;
            out[1] = 0.0;
            return;
        }
        // ∇ Im(z^α) = α r^{α−1} (sin((α−1)φ), cos((α−1)φ)).
        let s = ALPHA * r.powf(ALPHA - 1.0);
        out[0] = t * s * ((ALPHA - 1.0) * phi).sin();
        out[1] = t * s * ((ALPHA - 1.0) * phi).cos();
    });
    let dt: SpaceTimeFn = Box::new(|x, _| {
        let (r, phi) = polar(x[0], x[1]);
        if r == 0.0 {
            return 0.0;
        }
        r.powf(ALPHA) * (ALPHA * phi).sin()
    });
    ExactSolution {
        value,
        grad_x,
        dt,
        laplace_x: Some(Box::new(|_, _| 0.0)),
    }
}

/// The slit benchmark: ν ≡ 1, manufactured u = t r^{1/2} sin(φ/2) with a
/// gradient singularity at the origin, inhomogeneous Dirichlet data from the
/// exact trace, u₀ = 0.
pub fn slit_problem(geometry: SlitGeometry) -> Result<ProblemSpec> {
    let domain = match geometry {
        SlitGeometry::PaperUnitSquare => DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0, 1.0)?
            .with_slit(SlitFacet {
                normal_axis: 1,
                coord: 0.0,
                span_axis: 0,
                lo: 0.0,
                hi: 1.0,
            })?,
        SlitGeometry::Classical => DomainSpec::rectangle(-1.0, 1.0, -1.0, 1.0, 1.0)?
            .with_slit(SlitFacet {
                normal_axis: 1,
                coord: 0.0,
                span_axis: 0,
                lo: 0.0,
                hi: 1.0,
            })?,
    };
    let exact = slit_exact();
    let trace = slit_exact();
    let source: SpaceTimeFn = Box::new(move |x, t| {
        let _ = t;
        let (r, phi) = polar(x[0], x[1]);
        if r == 0.0 {
            return 0.0;
        }
        r.powf(ALPHA) * (ALPHA * phi).sin()
    });
    Ok(ProblemSpec {
        name: match geometry {
            SlitGeometry::PaperUnitSquare => "slit".into(),
            SlitGeometry::Classical => "slit-classical".into(),
        },
        domain,
        nu: NuCoeff::Constant(1.0),
        source,
        dirichlet: trace.value,
        initial: Box::new(|_| 0.0),
        exact: Some(exact),
        singularity: Some(vec![0.0, 0.0]),
    })
}

/// Smooth rate-calibration problem: u = t² Π sin(π x_i) on the unit box,
/// ν ≡ 1, homogeneous data.
pub fn smooth_problem(d: usize) -> Result<ProblemSpec> {
    use std::f64::consts::PI;
    let domain = match d {
        1 => DomainSpec::interval(0.0, 1.0, 1.0)?,
        2 => DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0, 1.0)?,
        _ => {
            return Err(crate::error::Error::InvalidArgument(format!(
                "smooth_problem supports d in {{1, 2}}, got {d}"
            )))
        }
    };
    let prod_sin = move |x: &[f64]| -> f64 { (0..d).map(|i| (PI * x[i]).sin()).product() };
    let value: SpaceTimeFn = Box::new(move |x, t| t * t * prod_sin(x));
    let dt: SpaceTimeFn = Box::new(move |x, t| 2.0 * t * prod_sin(x));
    let grad_x: GradFn = Box::new(move |x, t, out| {
        for i in 0..d {
            let mut g = PI * (PI * x[i]).cos();
            for j in 0..d {
                if j != i {
                    g *= (PI * x[j]).sin();
                }
            }
            out[i] = t * t * g;
        }
    });
    let laplace: SpaceTimeFn = Box::new(move |x, t| -(d as f64) * PI * PI * t * t * prod_sin(x));
    // f = ∂_t u − Δu = (2t + d π² t²) Π sin(π x_i).
    let source: SpaceTimeFn =
        Box::new(move |x, t| (2.0 * t + d as f64 * PI * PI * t * t) * prod_sin(x));
    Ok(ProblemSpec {
        name: format!("smooth{d}d"),
        domain,
        nu: NuCoeff::Constant(1.0),
        source,
        dirichlet: Box::new(|_, _| 0.0),
        initial: Box::new(|_| 0.0),
        exact: Some(ExactSolution {
            value,
            grad_x,
            dt,
            laplace_x: Some(laplace),
        }),
        singularity: None,
    })
}

/// d = 1 problem with u = sin(πx) t³: smooth but with unequal regularity use
/// across axes, for the directional rate study on tensor meshes.
pub fn aniso_rate_problem() -> Result<ProblemSpec> {
    use std::f64::consts::PI;
    let domain = DomainSpec::interval(0.0, 1.0, 1.0)?;
    let value: SpaceTimeFn = Box::new(|x, t| (PI * x[0]).sin() * t * t * t);
    let dt: SpaceTimeFn = Box::new(|x, t| 3.0 * t * t * (PI * x[0]).sin());
    let grad_x: GradFn = Box::new(|x, t, out| {
        out[0] = PI * (PI * x[0]).cos() * t * t * t;
    });
    let laplace: SpaceTimeFn = Box::new(|x, t| -PI * PI * (PI * x[0]).sin() * t * t * t);
    // f = ∂_t u − ∂²_x u = (3t² + π² t³) sin(πx).
    let source: SpaceTimeFn = Box::new(|x, t| (3.0 * t * t + PI * PI * t * t * t) * (PI * x[0]).sin());
    Ok(ProblemSpec {
        name: "aniso-rate".into(),
        domain,
        nu: NuCoeff::Constant(1.0),
        source,
        dirichlet: Box::new(|_, _| 0.0),
        initial: Box::new(|_| 0.0),
        exact: Some(ExactSolution {
            value,
            grad_x,
            dt,
            laplace_x: Some(laplace),
        }),
        singularity: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slit_initial_condition_is_zero() {
        let p = slit_problem(SlitGeometry::PaperUnitSquare).unwrap();
        let exact = p.exact.as_ref().unwrap();
        for &(x, y) in &[(0.3, 0.7), (0.01, 0.02), (1.0, 1.0), (0.0, 0.0)] {
            assert_eq!((exact.value)(&[x, y], 0.0), 0.0);
        }
        assert_eq!((p.initial)(&[0.5, 0.5]), 0.0);
    }

    #[test]
    fn slit_spatial_factor_is_harmonic() {
        // Finite-difference Laplacian of r^α sin(αφ) vanishes away from the
        // origin, so f = ∂_t u.
        let p = slit_problem(SlitGeometry::PaperUnitSquare).unwrap();
        let exact = p.exact.as_ref().unwrap();
        let g = |x: f64, y: f64| (exact.value)(&[x, y], 1.0);
        let h = 1e-4;
        for &(x, y) in &[(0.4, 0.6), (0.7, 0.2), (0.9, 0.9), (0.25, 0.8)] {
            let lap = (g(x + h, y) + g(x - h, y) + g(x, y + h) + g(x, y - h) - 4.0 * g(x, y))
                / (h * h);
            assert!(lap.abs() < 1e-5, "Laplacian at ({x},{y}) = {lap}");
            let f = (p.source)(&[x, y], 0.37);
            let du_dt = (exact.dt)(&[x, y], 0.37);
            assert!((f - du_dt).abs() < 1e-14);
        }
    }

    #[test]
    fn slit_gradient_matches_finite_differences() {
        let p = slit_problem(SlitGeometry::Classical).unwrap();
        let exact = p.exact.as_ref().unwrap();
        let h = 1e-6;
        let mut grad = [0.0; 2];
        for &(x, y) in &[(0.4, 0.6), (-0.5, 0.3), (-0.3, -0.7), (0.5, -0.25)] {
            (exact.grad_x)(&[x, y], 0.8, &mut grad);
            let gx = ((exact.value)(&[x + h, y], 0.8) - (exact.value)(&[x - h, y], 0.8)) / (2.0 * h);
            let gy = ((exact.value)(&[x, y + h], 0.8) - (exact.value)(&[x, y - h], 0.8)) / (2.0 * h);
            assert!((grad[0] - gx).abs() < 1e-6, "at ({x},{y}): {} vs {gx}", grad[0]);
            assert!((grad[1] - gy).abs() < 1e-6, "at ({x},{y}): {} vs {gy}", grad[1]);
        }
        // On the slit the trace vanishes from both sides.
        for &x in &[0.1, 0.5, 0.9] {
            assert!((exact.value)(&[x, 0.0], 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn smooth_problem_data() {
        for d in [1usize, 2] {
            let p = smooth_problem(d).unwrap();
            let exact = p.exact.as_ref().unwrap();
            let x = [0.3, 0.6];
            // f at t = 0 vanishes.
            assert_eq!((p.source)(&x[..d], 0.0), 0.0);
            // Homogeneous trace on the lateral boundary.
            let mut bx = [0.0, 0.4];
            assert!((exact.value)(&bx[..d], 0.7).abs() < 1e-15);
            bx = [1.0, 0.4];
            assert!((exact.value)(&bx[..d], 0.7).abs() < 1e-15);
            // f = ∂_t u − Δu by finite differences.
            let h = 1e-5;
            let t = 0.62;
            let u = |x: &[f64], t: f64| (exact.value)(x, t);
            let mut lap = 0.0;
            for i in 0..d {
                let mut xp = [0.0; 2];
                let mut xm = [0.0; 2];
                xp[..d].copy_from_slice(&x[..d]);
                xm[..d].copy_from_slice(&x[..d]);
                xp[i] += h;
                xm[i] -= h;
                lap += (u(&xp[..d], t) + u(&xm[..d], t) - 2.0 * u(&x[..d], t)) / (h * h);
            }
            let dudt = (u(&x[..d], t + h) - u(&x[..d], t - h)) / (2.0 * h);
            let f = (p.source)(&x[..d], t);
            assert!((f - (dudt - lap)).abs() < 1e-4, "d={d}: {f} vs {}", dudt - lap);
        }
    }

    #[test]
    fn aniso_rate_problem_source() {
        let p = aniso_rate_problem().unwrap();
        let exact = p.exact.as_ref().unwrap();
        let (x, t) = ([0.37], 0.81);
        let h = 1e-5;
        let u = |x: &[f64], t: f64| (exact.value)(x, t);
        let lap = (u(&[x[0] + h], t) + u(&[x[0] - h], t) - 2.0 * u(&x, t)) / (h * h);
        let dudt = (u(&x, t + h) - u(&x, t - h)) / (2.0 * h);
        assert!(((p.source)(&x, t) - (dudt - lap)).abs() < 1e-4);
    }
}
