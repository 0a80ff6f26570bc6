//! Problem container and lowering to the solver's standard conic form.

use std::io::{self, Write};

use nalgebra::DMatrix;

use crate::cones::{ConeKind, ConeLayout};
use crate::epigraph::{quadratic_epigraph, QuadraticFactor};
use crate::svec::{herm_len, HermEmbedding};
use crate::{ConicSolution, ProblemError, SolveStatus, SolverConfig, SolverMethod};

pub(crate) type SparseRow = Vec<(usize, f64)>;

/// A complex-Hermitian PSD constraint: `smat(offset + map z)` must be PSD,
/// where matrices are carried in the Hermitian encoding of [`crate::svec`].
#[derive(Clone, Debug)]
pub struct PsdBlock {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
    offset: Vec<f64>,
}

impl PsdBlock {
    /// A block for Hermitian matrices of side `dim`.
    pub fn new(dim: usize) -> Self {
        PsdBlock {
            dim,
            entries: Vec::new(),
            offset: vec![0.0; herm_len(dim)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Add `coeff * z[var]` to Hermitian coordinate `coord`.
    pub fn push(&mut self, coord: usize, var: usize, coeff: f64) -> &mut Self {
        self.entries.push((coord, var, coeff));
        self
    }

    pub fn set_offset(&mut self, coord: usize, value: f64) -> &mut Self {
        self.offset[coord] = value;
        self
    }

    fn validate(&self, n: usize) -> Result<(), ProblemError> {
        let hl = herm_len(self.dim);
        for &(coord, var, _) in &self.entries {
            if coord >= hl || var >= n {
                return Err(ProblemError::DimensionMismatch {
                    what: format!(
                        "psd block entry ({coord}, {var}) out of range (hl={hl}, n={n})"
                    ),
                });
            }
        }
        Ok(())
    }
}

/// A convex quadratic program over the intersection of an affine set,
/// halfspaces and Hermitian PSD cones:
///
/// ```text
/// minimize    z^T Q z + q^T z + c
/// subject to  A z = b
///             G z <= h
///             smat(offset_j + map_j z)  PSD,  j = 1..
/// ```
#[derive(Clone, Debug)]
pub struct ConicProblem {
    n: usize,
    quad: Option<QuadraticFactor>,
    lin: Vec<f64>,
    constant: f64,
    eq_rows: Vec<SparseRow>,
    eq_rhs: Vec<f64>,
    ineq_rows: Vec<SparseRow>,
    ineq_rhs: Vec<f64>,
    psd_blocks: Vec<PsdBlock>,
}

impl ConicProblem {
    pub fn new(n: usize) -> Self {
        ConicProblem {
            n,
            quad: None,
            lin: vec![0.0; n],
            constant: 0.0,
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            ineq_rows: Vec::new(),
            ineq_rhs: Vec::new(),
            psd_blocks: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Set the quadratic objective from a dense PSD `Q` (factored here).
    pub fn set_quadratic(
        &mut self,
        q_mat: &DMatrix<f64>,
        q_lin: &[f64],
        constant: f64,
    ) -> Result<&mut Self, ProblemError> {
        if q_mat.nrows() != self.n || q_lin.len() != self.n {
            return Err(ProblemError::DimensionMismatch {
                what: "objective dimensions".into(),
            });
        }
        self.quad = Some(quadratic_epigraph(q_mat)?);
        self.lin = q_lin.to_vec();
        self.constant = constant;
        Ok(self)
    }

    /// Set the quadratic objective from a precomputed factor
    /// (`z^T Q z = ||rows z||^2`), avoiding refactorization.
    pub fn set_quadratic_factor(
        &mut self,
        factor: QuadraticFactor,
        q_lin: &[f64],
        constant: f64,
    ) -> Result<&mut Self, ProblemError> {
        if factor.dim() != self.n || q_lin.len() != self.n {
            return Err(ProblemError::DimensionMismatch {
                what: "objective factor dimensions".into(),
            });
        }
        self.quad = Some(factor);
        self.lin = q_lin.to_vec();
        self.constant = constant;
        Ok(self)
    }

    pub fn set_linear(&mut self, q_lin: &[f64], constant: f64) -> Result<&mut Self, ProblemError> {
        if q_lin.len() != self.n {
            return Err(ProblemError::DimensionMismatch {
                what: "linear objective length".into(),
            });
        }
        self.quad = None;
        self.lin = q_lin.to_vec();
        self.constant = constant;
        Ok(self)
    }

    pub fn add_equality(&mut self, row: &[(usize, f64)], rhs: f64) -> Result<&mut Self, ProblemError> {
        self.check_row(row)?;
        self.eq_rows.push(row.to_vec());
        self.eq_rhs.push(rhs);
        Ok(self)
    }

    /// Add `row . z <= rhs`.
    pub fn add_inequality(
        &mut self,
        row: &[(usize, f64)],
        rhs: f64,
    ) -> Result<&mut Self, ProblemError> {
        self.check_row(row)?;
        self.ineq_rows.push(row.to_vec());
        self.ineq_rhs.push(rhs);
        Ok(self)
    }

    pub fn add_psd_block(&mut self, block: PsdBlock) -> Result<&mut Self, ProblemError> {
        block.validate(self.n)?;
        self.psd_blocks.push(block);
        Ok(self)
    }

    fn check_row(&self, row: &[(usize, f64)]) -> Result<(), ProblemError> {
        for &(c, _) in row {
            if c >= self.n {
                return Err(ProblemError::DimensionMismatch {
                    what: format!("row column {c} out of range (n={})", self.n),
                });
            }
        }
        Ok(())
    }

    /// Objective value at a decision vector.
    pub fn objective_at(&self, z: &[f64]) -> f64 {
        let quad = self.quad.as_ref().map_or(0.0, |f| f.quad_value(z));
        let lin: f64 = self.lin.iter().zip(z).map(|(a, b)| a * b).sum();
        quad + lin + self.constant
    }

    pub fn solve(&self, cfg: &SolverConfig) -> Result<ConicSolution, ProblemError> {
        cfg.validate()?;
        let form = self.lower();
        if form.infeasible {
            return Ok(ConicSolution {
                status: SolveStatus::Infeasible,
                primal: vec![0.0; self.n],
                objective: f64::INFINITY,
                residuals: Default::default(),
                iterations: 0,
            });
        }
        if form.n == 0 {
            // Fully pinned by the presolve; only constant cone membership
            // remains to check.
            let h = form.h_vec();
            let ok = h.is_empty() || form.layout.min_shift(&h) <= 1e-9;
            let full = form.restore(&[]);
            let primal = full[..self.n].to_vec();
            let objective = self.objective_at(&primal);
            return Ok(ConicSolution {
                status: if ok {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::Infeasible
                },
                primal,
                objective,
                residuals: Default::default(),
                iterations: 0,
            });
        }
        let raw = match cfg.method {
            SolverMethod::InteriorPoint => crate::ipm::solve(&form, cfg),
            SolverMethod::FirstOrder => crate::admm::solve(&form, cfg),
            SolverMethod::Auto => {
                let r = crate::ipm::solve(&form, cfg);
                match r.status {
                    SolveStatus::Optimal | SolveStatus::Infeasible | SolveStatus::Unbounded => r,
                    _ => {
                        let fallback = crate::admm::solve(&form, cfg);
                        if fallback.status == SolveStatus::Optimal
                            || fallback.status == SolveStatus::Infeasible
                            || fallback.status == SolveStatus::Unbounded
                        {
                            fallback
                        } else {
                            r
                        }
                    }
                }
            }
        };
        let full = form.restore(&raw.x);
        let primal: Vec<f64> = full[..self.n].to_vec();
        let objective = self.objective_at(&primal);
        Ok(ConicSolution {
            status: raw.status,
            primal,
            objective,
            residuals: raw.residuals,
            iterations: raw.iterations,
        })
    }

    /// Write the problem in a plain-text form: dimensions first, then each
    /// section as dense blocks, row-major. Intended for cross-checking
    /// against external solvers.
    pub fn dump<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(
            out,
            "qsdp {} {} {} {}",
            self.n,
            self.eq_rows.len(),
            self.ineq_rows.len(),
            self.psd_blocks.len()
        )?;
        writeln!(out, "objective_constant {:.17e}", self.constant)?;
        writeln!(out, "linear")?;
        dump_vec(out, &self.lin)?;
        if let Some(f) = &self.quad {
            writeln!(out, "quadratic_factor {} {}", f.rank(), f.dim())?;
            for i in 0..f.rank() {
                let row: Vec<f64> = (0..f.dim()).map(|j| f.rows[(i, j)]).collect();
                dump_vec(out, &row)?;
            }
        } else {
            writeln!(out, "quadratic_factor 0 {}", self.n)?;
        }
        writeln!(out, "equalities")?;
        for (row, rhs) in self.eq_rows.iter().zip(&self.eq_rhs) {
            dump_sparse_row(out, self.n, row, *rhs)?;
        }
        writeln!(out, "inequalities")?;
        for (row, rhs) in self.ineq_rows.iter().zip(&self.ineq_rhs) {
            dump_sparse_row(out, self.n, row, *rhs)?;
        }
        for b in &self.psd_blocks {
            writeln!(out, "psd_block {}", b.dim)?;
            let hl = herm_len(b.dim);
            let mut dense = vec![vec![0.0; self.n]; hl];
            for &(coord, var, coeff) in &b.entries {
                dense[coord][var] += coeff;
            }
            for row in &dense {
                dump_vec(out, row)?;
            }
            writeln!(out, "offset")?;
            dump_vec(out, &b.offset)?;
        }
        Ok(())
    }

    pub(crate) fn lower(&self) -> StdForm {
        let has_epigraph = self.quad.as_ref().map_or(false, |f| f.rank() > 0);
        let n_full = self.n + usize::from(has_epigraph);
        let t_var = self.n;

        // Presolve: equality rows touching a single variable pin it. Pinned
        // variables are substituted everywhere and removed, which keeps
        // per-coordinate constraints (like per-antenna power) out of the
        // KKT system entirely.
        let mut fixed: Vec<Option<f64>> = vec![None; n_full];
        let mut infeasible = false;
        for (row, rhs) in self.eq_rows.iter().zip(&self.eq_rhs) {
            let nnz: Vec<&(usize, f64)> = row.iter().filter(|(_, v)| *v != 0.0).collect();
            if nnz.len() == 1 {
                let (var, coeff) = *nnz[0];
                let val = rhs / coeff;
                match fixed[var] {
                    Some(prev) if (prev - val).abs() > 1e-12 * (1.0 + val.abs()) => {
                        infeasible = true;
                    }
                    _ => fixed[var] = Some(val),
                }
            } else if nnz.is_empty() && rhs.abs() > 1e-12 {
                infeasible = true;
            }
        }
        let var_map: Vec<Option<usize>> = {
            let mut map = vec![None; n_full];
            let mut next = 0;
            for (i, m) in map.iter_mut().enumerate() {
                if fixed[i].is_none() {
                    *m = Some(next);
                    next += 1;
                }
            }
            map
        };
        let n_std = var_map.iter().flatten().count();

        // Substitute a sparse row: returns the reduced row and the constant
        // contributed by pinned variables.
        let reduce_row = |row: &SparseRow| -> (SparseRow, f64) {
            let mut out = Vec::with_capacity(row.len());
            let mut shift = 0.0;
            for &(cidx, v) in row {
                match fixed[cidx] {
                    Some(val) => shift += v * val,
                    None => out.push((var_map[cidx].unwrap(), v)),
                }
            }
            (out, shift)
        };

        let mut c = vec![0.0; n_std];
        for (i, v) in self.lin.iter().enumerate() {
            if let Some(ni) = var_map[i] {
                c[ni] = *v;
            }
        }
        if has_epigraph {
            c[var_map[t_var].expect("epigraph variable is never pinned")] = 1.0;
        }

        let mut a_rows = Vec::new();
        let mut b = Vec::new();
        for (row, rhs) in self.eq_rows.iter().zip(&self.eq_rhs) {
            let (red, shift) = reduce_row(row);
            if red.is_empty() {
                if (rhs - shift).abs() > 1e-10 * (1.0 + rhs.abs()) {
                    infeasible = true;
                }
                continue;
            }
            if red.len() == 1 && row.iter().filter(|(_, v)| *v != 0.0).count() == 1 {
                continue; // consumed by the presolve
            }
            let sc = row_scale(&red);
            a_rows.push(scale_row(&red, 1.0 / sc));
            b.push((rhs - shift) / sc);
        }

        let mut blocks = Vec::new();
        let mut layout = ConeLayout::default();

        if !self.ineq_rows.is_empty() {
            let mut rows = Vec::new();
            let mut h = Vec::new();
            for (row, rhs) in self.ineq_rows.iter().zip(&self.ineq_rhs) {
                let (red, shift) = reduce_row(row);
                if red.is_empty() {
                    if rhs - shift < -1e-10 * (1.0 + rhs.abs()) {
                        infeasible = true;
                    }
                    continue;
                }
                let sc = row_scale(&red);
                rows.push(scale_row(&red, 1.0 / sc));
                h.push((rhs - shift) / sc);
            }
            if !rows.is_empty() {
                layout.push(ConeKind::NonNeg, rows.len());
                blocks.push(StdBlock::Rows { rows, h });
            }
        }

        if has_epigraph {
            let f = self.quad.as_ref().unwrap();
            let r = f.rank();
            let mut rows: Vec<SparseRow> = Vec::with_capacity(r + 2);
            let mut h = Vec::with_capacity(r + 2);
            rows.push(vec![(var_map[t_var].unwrap(), -1.0)]);
            h.push(1.0);
            for i in 0..r {
                let mut row: SparseRow = Vec::new();
                for j in 0..f.dim() {
                    let v = f.rows[(i, j)];
                    if v != 0.0 {
                        row.push((j, -2.0 * v));
                    }
                }
                let (red, shift) = reduce_row(&row);
                rows.push(red);
                h.push(-shift);
            }
            rows.push(vec![(var_map[t_var].unwrap(), 1.0)]);
            h.push(1.0);
            layout.push(ConeKind::Soc, r + 2);
            blocks.push(StdBlock::Rows { rows, h });
        }

        for blk in &self.psd_blocks {
            let sc = {
                let m = blk
                    .entries
                    .iter()
                    .map(|&(_, _, v)| v.abs())
                    .fold(0.0_f64, f64::max);
                if m > 0.0 {
                    m
                } else {
                    1.0
                }
            };
            let emb = HermEmbedding::new(blk.dim);
            let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_std];
            let mut offset_herm: Vec<f64> = blk.offset.iter().map(|v| v / sc).collect();
            for &(coord, var, coeff) in &blk.entries {
                match fixed[var] {
                    Some(val) => offset_herm[coord] += coeff * val / sc,
                    None => cols[var_map[var].unwrap()].push((coord, coeff / sc)),
                }
            }
            let active: Vec<usize> = (0..n_std).filter(|&v| !cols[v].is_empty()).collect();
            let mut h = vec![0.0; emb.embedded_len()];
            emb.apply(&offset_herm, &mut h);
            layout.push(ConeKind::Psd(2 * blk.dim), emb.embedded_len());
            blocks.push(StdBlock::Psd {
                emb,
                cols,
                active,
                h,
            });
        }

        StdForm {
            n: n_std,
            c,
            a_rows,
            b,
            blocks,
            layout,
            n_full,
            fixed,
            var_map,
            infeasible,
        }
    }
}

fn row_scale(row: &[(usize, f64)]) -> f64 {
    let m = row.iter().map(|&(_, v)| v.abs()).fold(0.0_f64, f64::max);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

fn scale_row(row: &[(usize, f64)], s: f64) -> SparseRow {
    row.iter().map(|&(c, v)| (c, v * s)).collect()
}

fn dump_vec<W: Write>(out: &mut W, v: &[f64]) -> io::Result<()> {
    let strs: Vec<String> = v.iter().map(|x| format!("{x:.17e}")).collect();
    writeln!(out, "{}", strs.join(" "))
}

fn dump_sparse_row<W: Write>(out: &mut W, n: usize, row: &SparseRow, rhs: f64) -> io::Result<()> {
    let mut dense = vec![0.0; n + 1];
    for &(c, v) in row {
        dense[c] += v;
    }
    dense[n] = rhs;
    dump_vec(out, &dense)
}

/// Lowered standard form: `min c^T x` s.t. `A x = b`, `G x + s = h`,
/// `s` in the product cone described by `layout`. Variables pinned by the
/// presolve are recovered through `restore`.
pub(crate) struct StdForm {
    pub n: usize,
    pub c: Vec<f64>,
    pub a_rows: Vec<SparseRow>,
    pub b: Vec<f64>,
    pub blocks: Vec<StdBlock>,
    pub layout: ConeLayout,
    pub n_full: usize,
    pub fixed: Vec<Option<f64>>,
    pub var_map: Vec<Option<usize>>,
    /// The presolve proved the problem infeasible.
    pub infeasible: bool,
}

impl StdForm {
    /// Map a reduced solution vector back to the full variable space.
    pub fn restore(&self, x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_full];
        for i in 0..self.n_full {
            full[i] = match self.fixed[i] {
                Some(v) => v,
                None => x[self.var_map[i].unwrap()],
            };
        }
        full
    }
}

pub(crate) enum StdBlock {
    /// Explicit sparse rows: `s_seg = h - rows * x`.
    Rows { rows: Vec<SparseRow>, h: Vec<f64> },
    /// Hermitian PSD block through the real embedding:
    /// `s_seg = h - E(cols * x)` where `h = E(offset)`.
    Psd {
        emb: HermEmbedding,
        cols: Vec<Vec<(usize, f64)>>,
        active: Vec<usize>,
        h: Vec<f64>,
    },
}

impl StdForm {
    pub fn p(&self) -> usize {
        self.a_rows.len()
    }

    pub fn m(&self) -> usize {
        self.layout.dim
    }

    /// `out = G x` over all cone rows.
    pub fn g_mul(&self, x: &[f64], out: &mut [f64]) {
        let mut off = 0;
        for blk in &self.blocks {
            match blk {
                StdBlock::Rows { rows, .. } => {
                    for (i, row) in rows.iter().enumerate() {
                        let mut acc = 0.0;
                        for &(c, v) in row {
                            acc += v * x[c];
                        }
                        out[off + i] = acc;
                    }
                    off += rows.len();
                }
                StdBlock::Psd { emb, cols, active, h } => {
                    let hl = herm_len(emb.m);
                    let mut herm = vec![0.0; hl];
                    for &v in active {
                        let xv = x[v];
                        if xv != 0.0 {
                            for &(coord, coeff) in &cols[v] {
                                herm[coord] += coeff * xv;
                            }
                        }
                    }
                    let seg = &mut out[off..off + h.len()];
                    emb.apply(&herm, seg);
                    for t in seg.iter_mut() {
                        *t = -*t;
                    }
                    off += h.len();
                }
            }
        }
    }

    /// `out += scale * G^T z`.
    pub fn gt_mul_acc(&self, z: &[f64], scale: f64, out: &mut [f64]) {
        let mut off = 0;
        for blk in &self.blocks {
            match blk {
                StdBlock::Rows { rows, .. } => {
                    for (i, row) in rows.iter().enumerate() {
                        let zi = z[off + i] * scale;
                        if zi != 0.0 {
                            for &(c, v) in row {
                                out[c] += v * zi;
                            }
                        }
                    }
                    off += rows.len();
                }
                StdBlock::Psd { emb, cols, active, h } => {
                    let hl = herm_len(emb.m);
                    let mut herm = vec![0.0; hl];
                    emb.apply_t(&z[off..off + h.len()], &mut herm);
                    for &v in active {
                        let mut acc = 0.0;
                        for &(coord, coeff) in &cols[v] {
                            acc += coeff * herm[coord];
                        }
                        out[v] -= scale * acc;
                    }
                    off += h.len();
                }
            }
        }
    }

    pub fn h_vec(&self) -> Vec<f64> {
        let mut h = Vec::with_capacity(self.m());
        for blk in &self.blocks {
            match blk {
                StdBlock::Rows { h: hb, .. } => h.extend_from_slice(hb),
                StdBlock::Psd { h: hb, .. } => h.extend_from_slice(hb),
            }
        }
        h
    }

    pub fn a_mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, row) in self.a_rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(c, v) in row {
                acc += v * x[c];
            }
            out[i] = acc;
        }
    }

    pub fn at_mul_acc(&self, y: &[f64], scale: f64, out: &mut [f64]) {
        for (i, row) in self.a_rows.iter().enumerate() {
            let yi = y[i] * scale;
            if yi != 0.0 {
                for &(c, v) in row {
                    out[c] += v * yi;
                }
            }
        }
    }

    /// Project cone vectors onto the image of the Hermitian embedding,
    /// `P = E E^T / 2`. Every PSD slack generated by the problem data lives
    /// in that subspace, but the dual is unconstrained orthogonal to it;
    /// projecting each iterate removes the resulting degeneracy (roundoff
    /// drift into the orthogonal complement otherwise blows up the Newton
    /// directions as the complementarity gap vanishes).
    pub fn project_embedding(&self, v: &mut [f64]) {
        let mut off = 0;
        for blk in &self.blocks {
            match blk {
                StdBlock::Rows { h, .. } => off += h.len(),
                StdBlock::Psd { emb, h, .. } => {
                    let seg = &mut v[off..off + h.len()];
                    let mut herm = vec![0.0; herm_len(emb.m)];
                    emb.apply_t(seg, &mut herm);
                    for t in herm.iter_mut() {
                        *t *= 0.5;
                    }
                    emb.apply(&herm, seg);
                    off += h.len();
                }
            }
        }
    }
}
