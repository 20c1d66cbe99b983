use nalgebra::{DMatrix, DVector, SMatrix};
use num_complex::Complex64;

use super::normalize::{reshape3, Normalized};
use super::{poly, CorrSet, SolverCandidate, SolverError, SolverOptions};
use crate::geometry::TwoViewModel;

/// Relative singular-value threshold used for the rank of the shift block.
const RANK_TOL: f64 = 1e-10;
/// Minimum reciprocal condition number for a matrix we invert.
const RCOND_MIN: f64 = 1e-10;

/// Coefficient matrices of `(M1 + delta M2) f = 0` for nine linearized
/// correspondences, with `f` the row-major entries of F and `delta` the
/// shift relative to the first correspondence's `beta0`.
pub fn gep_pencil(corr: &CorrSet, normalize: bool) -> (SMatrix<f64, 9, 9>, SMatrix<f64, 9, 9>) {
    let norm = Normalized::new(corr, normalize);
    let (m1, m2) = pencil(&norm);
    let mut a = SMatrix::<f64, 9, 9>::zeros();
    let mut b = SMatrix::<f64, 9, 9>::zeros();
    for r in 0..m1.nrows().min(9) {
        for c in 0..9 {
            a[(r, c)] = m1[(r, c)];
            b[(r, c)] = m2[(r, c)];
        }
    }
    (a, b)
}

fn pencil(norm: &Normalized) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = norm.len();
    let mut m1 = DMatrix::zeros(n, 9);
    let mut m2 = DMatrix::zeros(n, 9);
    for k in 0..n {
        let x1 = &norm.x1[k];
        let a = &norm.anchor[k];
        let v = &norm.tangent[k];
        for c in 0..3 {
            m1[(k, c)] = a.x * x1[c];
            m1[(k, 3 + c)] = a.y * x1[c];
            m1[(k, 6 + c)] = x1[c];
            m2[(k, c)] = v.x * x1[c];
            m2[(k, 3 + c)] = v.y * x1[c];
        }
    }
    (m1, m2)
}

fn rcond(m: &DMatrix<f64>) -> f64 {
    let s = m.singular_values();
    let max = s.max();
    if max == 0.0 {
        0.0
    } else {
        s.min() / max
    }
}

/// Null vector of a (possibly wide) matrix via SVD of a zero-padded square.
pub(crate) fn null_vector(m: &DMatrix<f64>) -> DVector<f64> {
    let cols = m.ncols();
    let mut sq = DMatrix::zeros(cols.max(m.nrows()), cols);
    sq.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let (idx, _) = svd.singular_values.argmin();
    v_t.row(idx).transpose()
}

/// The shift-compressed pencil `P g = -delta Q g` and the pieces needed to
/// lift `g` back to the nine entries of F.
struct Reduced {
    p: DMatrix<f64>,
    q: DMatrix<f64>,
    v: DMatrix<f64>,
    a1: DMatrix<f64>,
    a2: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl Reduced {
    fn new(m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> Result<Self, SolverError> {
        let svd = m2.clone().svd(true, true);
        let s = &svd.singular_values;
        let smax = s.max();
        if smax == 0.0 {
            return Err(SolverError::DegenerateInput("no shift dependence"));
        }
        let rank = s.iter().filter(|&&x| x > RANK_TOL * smax).count();
        let u = svd.u.expect("requested");
        let v = svd.v_t.expect("requested").transpose();
        let a = m1 * &v;
        let a1 = a.columns(0, rank).into_owned();
        let a2 = a.columns(rank, 9 - rank).into_owned();
        let mut b = u.columns(0, rank).into_owned();
        for c in 0..rank {
            b.column_mut(c).scale_mut(s[c]);
        }
        // rows orthogonal to the range of the shift-free block
        let complement = if rank < 9 {
            let mut padded = DMatrix::zeros(9, 9);
            padded.columns_mut(0, 9 - rank).copy_from(&a2);
            let psvd = padded.svd(true, false);
            let ps = &psvd.singular_values;
            if ps[8 - rank] <= RANK_TOL * ps[0].max(f64::MIN_POSITIVE) {
                return Err(SolverError::DegenerateInput(
                    "shift-free block is rank deficient",
                ));
            }
            psvd.u
                .expect("requested")
                .columns(9 - rank, rank)
                .into_owned()
        } else {
            DMatrix::identity(9, 9)
        };
        let p = complement.transpose() * &a1;
        let q = complement.transpose() * &b;
        Ok(Self { p, q, v, a1, a2, b })
    }

    fn eigenvalues(&self) -> Result<Vec<Complex64>, SolverError> {
        if rcond(&self.q) > RCOND_MIN {
            let qinv = self
                .q
                .clone()
                .try_inverse()
                .ok_or(SolverError::DegenerateInput("Q"))?;
            let c = -(qinv * &self.p);
            return poly::eigenvalues(c).ok_or(SolverError::DegenerateInput("eigenvalues"));
        }
        // Q singular: infinite eigenvalues present; shift and invert.
        for sigma in [0.0, 0.7, -1.3, 2.9, -4.1] {
            let ps = &self.p + &self.q * sigma;
            if rcond(&ps) <= RCOND_MIN {
                continue;
            }
            let psinv = ps.try_inverse().ok_or(SolverError::DegenerateInput("P"))?;
            let c = -(psinv * &self.q);
            let scale = c.norm();
            let mus = poly::eigenvalues(c).ok_or(SolverError::DegenerateInput("eigenvalues"))?;
            return Ok(mus
                .iter()
                .filter(|mu| mu.norm() > 1e-12 * scale)
                .map(|mu| Complex64::new(sigma, 0.0) + mu.inv())
                .collect());
        }
        Err(SolverError::DegenerateInput(
            "pencil is singular for every shift",
        ))
    }

    fn lift(&self, delta: f64) -> DVector<f64> {
        let g1 = null_vector(&(&self.p + &self.q * delta));
        let rank = g1.len();
        let mut g = DVector::zeros(9);
        g.rows_mut(0, rank).copy_from(&g1);
        if rank < 9 {
            let rhs = -((&self.a1 + &self.b * delta) * &g1);
            let g2 = self
                .a2
                .clone()
                .svd(true, true)
                .solve(&rhs, 1e-14)
                .expect("svd solve");
            g.rows_mut(rank, 9 - rank).copy_from(&g2);
        }
        &self.v * g
    }
}

/// Eigenvalues (shift relative to the first correspondence's `beta0`) of
/// the compressed pencil, before any filtering.
pub fn gep_eigenvalues(corr: &CorrSet, normalize: bool) -> Result<Vec<Complex64>, SolverError> {
    corr.expect_len(9)?;
    let norm = Normalized::new(corr, normalize);
    let (m1, m2) = pencil(&norm);
    Reduced::new(&m1, &m2)?.eigenvalues()
}

/// Nine-point solver: generalized eigenvalues of the linearized epipolar
/// pencil give the shift, eigenvectors give F (not rank constrained unless
/// `opts.rank2`).
pub fn solve_gep_f_beta(
    corr: &CorrSet,
    opts: &SolverOptions,
) -> Result<Vec<SolverCandidate>, SolverError> {
    corr.expect_len(9)?;
    let norm = Normalized::new(corr, opts.normalize);
    let (m1, m2) = pencil(&norm);
    let reduced = Reduced::new(&m1, &m2)?;
    let limit = opts.beta_limit(corr);
    let mut out = Vec::new();
    for z in reduced.eigenvalues()? {
        if !opts.is_real(z.re, z.im) || z.re.abs() > limit {
            continue;
        }
        let delta = z.re;
        let f = reduced.lift(delta);
        let mut fmat = reshape3(f.as_slice());
        if opts.epipolar_gate(&norm, &fmat, delta).is_none() {
            continue;
        }
        if opts.rank2 {
            fmat = crate::geometry::model_rank2(&fmat);
        }
        let Ok(model) = TwoViewModel::fundamental(norm.denormalize_f(&fmat)) else {
            continue;
        };
        out.push(SolverCandidate {
            beta: norm.beta_ref + delta,
            model,
            algebraic_residual: norm.epipolar_residual(&fmat, delta),
            imag_leak: z.im.abs(),
        });
    }
    finish(out)
}

pub(crate) fn finish(mut out: Vec<SolverCandidate>) -> Result<Vec<SolverCandidate>, SolverError> {
    if out.is_empty() {
        return Err(SolverError::NoRealSolution);
    }
    out.sort_by(|a, b| a.algebraic_residual.total_cmp(&b.algebraic_residual));
    Ok(out)
}

impl SolverOptions {
    /// `Some(residual)` when F satisfies the linearized constraints.
    pub(crate) fn epipolar_gate(
        &self,
        norm: &Normalized,
        f: &nalgebra::Matrix3<f64>,
        delta: f64,
    ) -> Option<f64> {
        let r = norm.epipolar_residual(f, delta);
        (r.is_finite() && r <= self.residual_tol).then_some(r)
    }
}
