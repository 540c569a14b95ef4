//! Sparse linear algebra: CSR storage, flexible GMRES with right
//! preconditioning, basic preconditioners, and nested iterations across
//! adaptive levels.

use crate::error::{Error, Result};
use crate::par;
use std::io::Write;
use std::time::Instant;

/// Compressed sparse row matrix with a fixed sparsity pattern.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build a zero matrix from per-row column lists (sorted and deduplicated
    /// here).
    pub fn from_row_pattern(n_cols: usize, mut rows: Vec<Vec<u32>>) -> CsrMatrix {
        let n_rows = rows.len();
        let mut indptr = Vec::with_capacity(n_rows + 1);
        indptr.push(0usize);
        let mut indices = Vec::new();
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            indices.extend_from_slice(row);
            indptr.push(indices.len());
            row.clear();
            row.shrink_to_fit();
        }
        let nnz = indices.len();
        CsrMatrix {
            n_rows,
            n_cols,
            indptr,
            indices,
            values: vec![0.0; nnz],
        }
    }

    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> CsrMatrix {
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n_rows];
        for &(r, c, _) in triplets {
            rows[r].push(c as u32);
        }
        let mut m = CsrMatrix::from_row_pattern(n_cols, rows);
        for &(r, c, v) in triplets {
            m.add_at(r, c, v);
        }
        m
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> CsrMatrix {
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), rows.first().map_or(0, |r| r.len()), &triplets)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    /// Accumulate into an entry that exists in the pattern.
    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: f64) {
        let span = self.indptr[r]..self.indptr[r + 1];
        let cols = &self.indices[span.clone()];
        match cols.binary_search(&(c as u32)) {
            Ok(k) => self.values[span.start + k] += v,
            Err(_) => panic!("entry ({r}, {c}) not in sparsity pattern"),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.binary_search(&(i as u32))
                    .map(|k| vals[k])
                    .unwrap_or(0.0)
            })
            .collect()
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let out = par::map_range(self.n_rows, |i| {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                s += v * x[*c as usize];
            }
            s
        });
        y.copy_from_slice(&out);
    }
}

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n_rows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y);
    }
}

/// Right preconditioner: z = M⁻¹ r. The flexible Krylov driver permits the
/// application to change between iterations.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPrecond;

impl Preconditioner for IdentityPrecond {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub struct JacobiPrecond {
    inv_diag: Vec<f64>,
}

impl Preconditioner for JacobiPrecond {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for i in 0..r.len() {
            z[i] = r[i] * self.inv_diag[i];
        }
    }
}

/// Symmetric Gauss–Seidel sweep: solve (D+L) w = r, then (D+U) z = D w.
pub struct SgsPrecond<'a> {
    a: &'a CsrMatrix,
    diag: Vec<f64>,
}

impl Preconditioner for SgsPrecond<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        // Forward solve into z.
        for i in 0..n {
            let (cols, vals) = self.a.row(i);
            let mut s = r[i];
            for (c, v) in cols.iter().zip(vals) {
                let j = *c as usize;
                if j < i {
                    s -= v * z[j];
                }
            }
            z[i] = s / self.diag[i];
        }
        // Backward solve of (D+U) z = D w.
        for i in (0..n).rev() {
            let (cols, vals) = self.a.row(i);
            let mut s = self.diag[i] * z[i];
            for (c, v) in cols.iter().zip(vals) {
                let j = *c as usize;
                if j > i {
                    s -= v * z[j];
                }
            }
            z[i] = s / self.diag[i];
        }
    }
}

/// Block-Jacobi with caller-supplied blocks (dense LU per block).
pub struct BlockJacobiPrecond {
    block_dofs: Vec<Vec<u32>>,
    factors: Vec<DenseLu>,
}

impl Preconditioner for BlockJacobiPrecond {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let mut rhs = Vec::new();
        for (b, dofs) in self.block_dofs.iter().enumerate() {
            rhs.clear();
            rhs.extend(dofs.iter().map(|&d| r[d as usize]));
            self.factors[b].solve_in_place(&mut rhs);
            for (k, &d) in dofs.iter().enumerate() {
                z[d as usize] = rhs[k];
            }
        }
    }
}

/// Dense LU with partial pivoting, for small preconditioner blocks.
struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    fn factor(n: usize, mut a: Vec<f64>) -> Result<DenseLu> {
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::InvalidArgument(
                    "singular block in block-Jacobi preconditioner".into(),
                ));
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let m = a[i * n + k] / pivot;
                a[i * n + k] = m;
                for j in k + 1..n {
                    a[i * n + j] -= m * a[k * n + j];
                }
            }
        }
        Ok(DenseLu { n, lu: a, piv })
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            for i in k + 1..n {
                b[i] -= self.lu[i * n + k] * b[k];
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * b[j];
            }
            b[i] = s / self.lu[i * n + i];
        }
    }
}

/// Preconditioner kinds with built-in constructions.
#[derive(Clone, Debug)]
pub enum PrecondKind {
    Identity,
    Jacobi,
    SymmetricGaussSeidel,
    /// Block-Jacobi; `blocks[i]` is the block id of DOF i.
    BlockJacobi(Vec<usize>),
}

pub fn make_preconditioner<'a>(
    a: &'a CsrMatrix,
    kind: &PrecondKind,
) -> Result<Box<dyn Preconditioner + 'a>> {
    let check_diag = |d: &[f64]| -> Result<()> {
        if d.iter().any(|&v| v == 0.0) {
            return Err(Error::InvalidArgument(
                "zero diagonal entry in preconditioner construction".into(),
            ));
        }
        Ok(())
    };
    match kind {
        PrecondKind::Identity => Ok(Box::new(IdentityPrecond)),
        PrecondKind::Jacobi => {
            let d = a.diagonal();
            check_diag(&d)?;
            Ok(Box::new(JacobiPrecond {
                inv_diag: d.iter().map(|v| 1.0 / v).collect(),
            }))
        }
        PrecondKind::SymmetricGaussSeidel => {
            let d = a.diagonal();
            check_diag(&d)?;
            Ok(Box::new(SgsPrecond { a, diag: d }))
        }
        PrecondKind::BlockJacobi(block_of) => {
            if block_of.len() != a.n_rows() {
                return Err(Error::InvalidArgument(
                    "block assignment length does not match matrix".into(),
                ));
            }
            let n_blocks = block_of.iter().max().map_or(0, |&b| b + 1);
            let mut block_dofs: Vec<Vec<u32>> = vec![Vec::new(); n_blocks];
            for (i, &b) in block_of.iter().enumerate() {
                block_dofs[b].push(i as u32);
            }
            const MAX_BLOCK: usize = 4096;
            let mut factors = Vec::with_capacity(n_blocks);
            for dofs in &block_dofs {
                let nb = dofs.len();
                if nb > MAX_BLOCK {
                    return Err(Error::InvalidArgument(format!(
                        "block-Jacobi block of size {nb} exceeds the dense limit {MAX_BLOCK}"
                    )));
                }
                let mut local = vec![0.0; nb * nb];
                for (li, &gi) in dofs.iter().enumerate() {
                    let (cols, vals) = a.row(gi as usize);
                    for (c, v) in cols.iter().zip(vals) {
                        if let Ok(lj) = dofs.binary_search(c) {
                            local[li * nb + lj] = *v;
                        }
                    }
                }
                factors.push(DenseLu::factor(nb, local)?);
            }
            Ok(Box::new(BlockJacobiPrecond {
                block_dofs,
                factors,
            }))
        }
    }
}

#[derive(Clone, Debug)]
pub struct FgmresConfig {
    /// Relative reduction of the initial residual.
    pub rtol: f64,
    pub restart: usize,
    pub maxit: usize,
}

impl Default for FgmresConfig {
    fn default() -> Self {
        FgmresConfig {
            rtol: 1e-8,
            restart: 50,
            maxit: 10_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveStats {
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub wall_time: std::time::Duration,
    pub converged: bool,
    /// Unpreconditioned residual norm estimate after every iteration.
    pub residual_history: Vec<f64>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Flexible GMRES with right preconditioning. The residual reported and
/// tested against `rtol` is the true residual ‖b − A x‖.
pub fn fgmres(
    a: &dyn LinearOperator,
    b: &[f64],
    x0: &[f64],
    m: &dyn Preconditioner,
    cfg: &FgmresConfig,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.dim();
    if cfg.restart == 0 {
        return Err(Error::InvalidArgument("restart must be >= 1".into()));
    }
    let start = Instant::now();
    let mut x = x0.to_vec();
    let mut history = Vec::new();

    let mut r = vec![0.0; n];
    a.apply(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r0 = norm2(&r);
    let target = cfg.rtol * r0;
    if r0 == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                initial_residual: 0.0,
                final_residual: 0.0,
                wall_time: start.elapsed(),
                converged: true,
                residual_history: history,
            },
        ));
    }

    let restart = cfg.restart.min(n);
    let mut total_iter = 0usize;
    let mut res_norm = r0;

    'outer: while total_iter < cfg.maxit {
        // Arnoldi basis V and preconditioned directions Z (flexible variant).
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];

        let beta = res_norm;
        if beta <= target {
            break;
        }
        let mut v0 = r.clone();
        for vi in v0.iter_mut() {
            *vi /= beta;
        }
        v.push(v0);
        g[0] = beta;

        let mut k_used = 0usize;
        for k in 0..restart {
            if total_iter >= cfg.maxit {
                break;
            }
            total_iter += 1;

            let mut zk = vec![0.0; n];
            m.apply(&v[k], &mut zk);
            let mut w = vec![0.0; n];
            a.apply(&zk, &mut w);
            z.push(zk);

            // Modified Gram–Schmidt with one reorthogonalization pass on
            // loss-of-orthogonality detection.
            let w_before = norm2(&w);
            for j in 0..=k {
                let hjk = dot(&v[j], &w);
                h[j][k] = hjk;
                for i in 0..n {
                    w[i] -= hjk * v[j][i];
                }
            }
            let mut w_norm = norm2(&w);
            if w_norm < 0.5 * w_before {
                for j in 0..=k {
                    let corr = dot(&v[j], &w);
                    h[j][k] += corr;
                    for i in 0..n {
                        w[i] -= corr * v[j][i];
                    }
                }
                w_norm = norm2(&w);
            }
            h[k + 1][k] = w_norm;

            let breakdown = w_norm < 1e-300;
            if !breakdown {
                let mut vk1 = w;
                for vi in vk1.iter_mut() {
                    *vi /= w_norm;
                }
                v.push(vk1);
            }

            // Apply stored Givens rotations, then create the new one.
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let (c, s) = {
                let (aa, bb) = (h[k][k], h[k + 1][k]);
                let rr = aa.hypot(bb);
                if rr == 0.0 {
                    (1.0, 0.0)
                } else {
                    (aa / rr, bb / rr)
                }
            };
            cs[k] = c;
            sn[k] = s;
            h[k][k] = c * h[k][k] + s * h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;

            k_used = k + 1;
            res_norm = g[k + 1].abs();
            history.push(res_norm);
            if res_norm <= target || breakdown {
                break;
            }
        }

        // x += Z y with H y = g by back substitution.
        let kk = k_used;
        if kk == 0 {
            break 'outer;
        }
        let mut y = vec![0.0; kk];
        for i in (0..kk).rev() {
            let mut s = g[i];
            for j in i + 1..kk {
                s -= h[i][j] * y[j];
            }
            y[i] = if h[i][i].abs() > 1e-300 {
                s / h[i][i]
            } else {
                0.0
            };
        }
        for j in 0..kk {
            let yj = y[j];
            let zj = &z[j];
            for i in 0..n {
                x[i] += yj * zj[i];
            }
        }

        // True residual for the restart/termination decision.
        a.apply(&x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        res_norm = norm2(&r);
        if res_norm <= target {
            break;
        }
        // Stagnation guard: a full cycle produced no meaningful progress
        // relative to the residual it started from.
        if res_norm >= beta * (1.0 - 1e-12) && kk == restart {
            break;
        }
    }

    let mut r_final = vec![0.0; n];
    a.apply(&x, &mut r_final);
    for i in 0..n {
        r_final[i] = b[i] - r_final[i];
    }
    let final_res = norm2(&r_final);
    let converged = final_res <= target * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    Ok((
        x,
        SolveStats {
            iterations: total_iter,
            initial_residual: r0,
            final_residual: final_res,
            wall_time: start.elapsed(),
            converged,
            residual_history: history,
        },
    ))
}

/// Nested iterations: solve the coarsest level to `rtol_coarse`, then each
/// finer level from the prolongated previous solution to the relaxed
/// `rtol_inner`.
#[derive(Clone, Debug)]
pub struct NestedConfig {
    pub rtol_coarse: f64,
    pub rtol_inner: f64,
    pub restart: usize,
    pub maxit: usize,
    pub precond: PrecondSpec,
}

impl Default for NestedConfig {
    fn default() -> Self {
        NestedConfig {
            rtol_coarse: 1e-8,
            rtol_inner: 1e-2,
            restart: 50,
            maxit: 10_000,
            precond: PrecondSpec::SymmetricGaussSeidel,
        }
    }
}

/// Preconditioner choice resolvable per level.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PrecondSpec {
    Identity,
    Jacobi,
    SymmetricGaussSeidel,
    BlockJacobiTimeSlab,
}

impl PrecondSpec {
    pub fn resolve(&self, space: &crate::fespace::FeSpace) -> PrecondKind {
        match self {
            PrecondSpec::Identity => PrecondKind::Identity,
            PrecondSpec::Jacobi => PrecondKind::Jacobi,
            PrecondSpec::SymmetricGaussSeidel => PrecondKind::SymmetricGaussSeidel,
            PrecondSpec::BlockJacobiTimeSlab => {
                PrecondKind::BlockJacobi(space.time_slab_blocks())
            }
        }
    }
}

/// Solve a coarse-to-fine hierarchy of assembled systems, warm-starting each
/// level from the previous solution. Returns the finest-level free vector and
/// per-level stats.
pub fn nested_solve(
    levels: &[(&crate::fespace::FeSpace, &crate::assembly::LinearSystem)],
    cfg: &NestedConfig,
) -> Result<(Vec<f64>, Vec<SolveStats>)> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no levels to solve".into()));
    }
    let mut all_stats = Vec::with_capacity(levels.len());
    let mut x = Vec::new();
    for (l, (space, sys)) in levels.iter().enumerate() {
        let x0 = if l == 0 {
            vec![0.0; sys.rhs.len()]
        } else {
            let (prev_space, _) = levels[l - 1];
            let prev_full = prev_space.full_from_free(&x);
            let fine_full = crate::fespace::prolongate(prev_space, &prev_full, space)?;
            (0..space.n_free())
                .map(|fr| fine_full[space.true_to_full(space.free_to_true(fr as u32)) as usize])
                .collect()
        };
        let rtol = if l == 0 { cfg.rtol_coarse } else { cfg.rtol_inner };
        let fg = FgmresConfig {
            rtol,
            restart: cfg.restart,
            maxit: cfg.maxit,
        };
        let kind = cfg.precond.resolve(space);
        let m = make_preconditioner(&sys.matrix, &kind)?;
        let (xl, stats) = fgmres(&sys.matrix, &sys.rhs, &x0, m.as_ref(), &fg)?;
        if !stats.converged {
            return Err(Error::NonConvergence {
                iterations: stats.iterations,
                residual: stats.final_residual,
                target: rtol * stats.initial_residual,
            });
        }
        all_stats.push(stats);
        x = xl;
    }
    Ok((x, all_stats))
}

/// MatrixMarket coordinate dump (1-based, general real).
pub fn write_matrix_market<W: Write>(a: &CsrMatrix, mut w: W) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        for (c, v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:.16e}", i + 1, *c as usize + 1, v)?;
        }
    }
    Ok(())
}
