//! Model parameters and the truncated transfer matrix.
//!
//! The spinor-Fock basis is laid out as two concatenated blocks:
//! `[|0,e>, |1,e>, .., |P,e>, |0,g>, |1,g>, .., |P,g>]`, so index `p` is the
//! excited-atom amplitude at Fock level `p` and index `P + 1 + p` the
//! ground-atom amplitude at the same level.

use ndarray::Array2;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{czero, Scalar};

/// Version tag for the coupling layout written by [`build_transfer_matrix`].
/// Bumped whenever the matrix assembled from a given parameter set changes,
/// so stale cached propagators are never reused.
pub const COUPLING_CONVENTION: u32 = 1;

/// Physical constants of the (optionally dissipative) spin-boson Hamiltonian with
/// intensity-dependent coupling, in units with hbar = 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams<T> {
    /// Field frequency.
    pub omega_f: T,
    /// Two-level splitting.
    pub omega_0: T,
    /// Rotating-wave coupling.
    pub g_minus: T,
    /// Counter-rotating coupling.
    pub g_plus: T,
    /// Photon leakage rate.
    pub beta: T,
    /// Spontaneous emission rate.
    pub gamma: T,
}

impl<T: Scalar> ModelParams<T> {
    /// Closed-system parameters (no dissipation).
    pub fn new(omega_f: T, omega_0: T, g_minus: T, g_plus: T) -> Self {
        Self {
            omega_f,
            omega_0,
            g_minus,
            g_plus,
            beta: T::zero(),
            gamma: T::zero(),
        }
    }

    pub fn with_dissipation(mut self, beta: T, gamma: T) -> Self {
        self.beta = beta;
        self.gamma = gamma;
        self
    }

    pub fn is_hermitian(&self) -> bool {
        self.beta == T::zero() && self.gamma == T::zero()
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_f", self.omega_f),
            ("omega_0", self.omega_0),
            ("g_minus", self.g_minus),
            ("g_plus", self.g_plus),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} is not finite")));
        }
        if self.omega_f <= T::zero() {
            return Err(Error::InvalidParams("omega_f must be positive".into()));
        }
        if self.beta < T::zero() || self.gamma < T::zero() {
            return Err(Error::InvalidParams(
                "dissipation rates beta and gamma must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Fock-space truncation: levels `0..=max_fock` are retained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Truncation {
    pub max_fock: usize,
}

impl Truncation {
    pub fn new(max_fock: usize) -> Self {
        Self { max_fock }
    }

    /// Number of basis states, `2 (P + 1)`.
    pub fn dim(&self) -> usize {
        2 * (self.max_fock + 1)
    }

    #[inline]
    pub fn e_index(&self, p: usize) -> usize {
        p
    }

    #[inline]
    pub fn g_index(&self, p: usize) -> usize {
        self.max_fock + 1 + p
    }
}

/// Row-compressed copy of the nonzero entries of a square matrix.
///
/// The transfer matrix has at most three nonzeros per row, so products with
/// it cost `O(3 dim)` per row instead of `O(dim)`.
#[derive(Clone, Debug)]
pub struct SparseRows<T> {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex<T>>,
}

impl<T: Scalar> SparseRows<T> {
    pub fn from_dense(m: &Array2<Complex<T>>) -> Self {
        let mut row_ptr = Vec::with_capacity(m.nrows() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in m.rows() {
            for (j, v) in row.iter().enumerate() {
                if v.re != T::zero() || v.im != T::zero() {
                    cols.push(j);
                    vals.push(*v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzero `(column, value)` pairs of row `i`, in ascending column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex<T>)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    /// `out = A x`.
    pub fn mul_vec_into(&self, x: &[Complex<T>], out: &mut [Complex<T>]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).fold(czero(), |acc, (j, v)| acc + v * x[j]);
        }
    }

    /// `out_row = x_row A`, i.e. one row of a dense-times-sparse product.
    pub fn left_mul_row_into(&self, x_row: &[Complex<T>], out_row: &mut [Complex<T>]) {
        out_row.iter_mut().for_each(|o| *o = czero());
        for (k, xk) in x_row.iter().enumerate() {
            if xk.re == T::zero() && xk.im == T::zero() {
                continue;
            }
            for (j, v) in self.row(k) {
                out_row[j] = out_row[j] + *xk * v;
            }
        }
    }
}

/// The Hamiltonian represented in the truncated spinor-Fock basis.
///
/// Immutable after construction.
#[derive(Clone, Debug)]
pub struct TransferMatrix<T> {
    params: ModelParams<T>,
    truncation: Truncation,
    matrix: Array2<Complex<T>>,
    sparse: SparseRows<T>,
    hermitian: bool,
}

impl<T: Scalar> TransferMatrix<T> {
    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<Complex<T>> {
        &self.matrix
    }

    pub fn sparse(&self) -> &SparseRows<T> {
        &self.sparse
    }

    /// True when built from parameters without dissipation.
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// `Q v` using the sparse structure.
    pub fn apply(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out = vec![czero(); self.dim()];
        self.sparse.mul_vec_into(v, &mut out);
        out
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> T {
        self.matrix
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|z| z.norm()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Largest off-diagonal (coupling) magnitude.
    pub fn max_coupling(&self) -> T {
        let mut best = T::zero();
        for i in 0..self.dim() {
            for (j, v) in self.sparse.row(i) {
                if i != j {
                    best = best.max(v.norm());
                }
            }
        }
        best
    }
}

/// Assemble `Q` for the given parameters, dropping couplings that would reach
/// Fock level `P + 1`.
///
/// Diagonal: `omega_0/2 + omega_f p` (excited) and `-omega_0/2 + omega_f p`
/// (ground). Couplings: `<p,e|Q|p+1,g> = g_minus (p+1)`,
/// `<p+1,e|Q|p,g> = g_plus (p+1)`, and their transposes. Dissipation adds
/// `-i beta p` to both diagonal blocks and `-i gamma` to the excited block.
pub fn build_transfer_matrix<T: Scalar>(
    params: ModelParams<T>,
    truncation: Truncation,
) -> Result<TransferMatrix<T>> {
    params.validate()?;
    let top = truncation.max_fock;
    let dim = truncation
        .max_fock
        .checked_add(1)
        .and_then(|n| n.checked_mul(2))
        .filter(|d| d.checked_mul(*d).is_some())
        .ok_or_else(|| Error::InvalidParams(format!("truncation P={top} too large")))?;

    let half = T::lit(0.5);
    let mut q = Array2::from_elem((dim, dim), czero::<T>());
    for p in 0..=top {
        let level = T::from_usize(p).unwrap();
        let (e, g) = (truncation.e_index(p), truncation.g_index(p));
        let leak = params.beta * level;
        q[[e, e]] = Complex::new(
            half * params.omega_0 + params.omega_f * level,
            -(leak + params.gamma),
        );
        q[[g, g]] = Complex::new(-half * params.omega_0 + params.omega_f * level, -leak);
        if p < top {
            let up = T::from_usize(p + 1).unwrap();
            let rotating = Complex::new(params.g_minus * up, T::zero());
            let counter = Complex::new(params.g_plus * up, T::zero());
            let (e_up, g_up) = (truncation.e_index(p + 1), truncation.g_index(p + 1));
            q[[e, g_up]] = rotating;
            q[[g_up, e]] = rotating;
            q[[g, e_up]] = counter;
            q[[e_up, g]] = counter;
        }
    }

    let sparse = SparseRows::from_dense(&q);
    Ok(TransferMatrix {
        params,
        truncation,
        matrix: q,
        sparse,
        hermitian: params.is_hermitian(),
    })
}

/// `max |Q[i,j] - conj(Q[j,i])|`.
pub fn hermiticity_check<T: Scalar>(q: &TransferMatrix<T>) -> T {
    let m = q.matrix();
    let n = q.dim();
    let mut worst = T::zero();
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn small_rwa_matrix() {
        let q = build_transfer_matrix(ModelParams::new(1.0, 1.0, 0.1, 0.0), Truncation::new(1))
            .unwrap();
        let m = q.matrix();
        assert_eq!(m[[0, 0]], c(0.5, 0.0));
        assert_eq!(m[[1, 1]], c(1.5, 0.0));
        assert_eq!(m[[2, 2]], c(-0.5, 0.0));
        assert_eq!(m[[3, 3]], c(0.5, 0.0));
        // |0,e> <-> |1,g>
        assert_eq!(m[[0, 3]], c(0.1, 0.0));
        assert_eq!(m[[3, 0]], c(0.1, 0.0));
        let off: usize = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && m[[i, j]] != c(0.0, 0.0))
            .count();
        assert_eq!(off, 2);
    }

    #[test]
    fn decoupled_is_diagonal() {
        let q = build_transfer_matrix(ModelParams::new(1.3, 0.7, 0.0, 0.0), Truncation::new(6))
            .unwrap();
        for ((i, j), v) in q.matrix().indexed_iter() {
            if i != j {
                assert_eq!(*v, c(0.0, 0.0));
            }
        }
        assert_eq!(q.max_coupling(), 0.0);
    }

    #[test]
    fn dissipative_diagonal() {
        let params = ModelParams::new(1.0, 0.75, 0.4, 0.4).with_dissipation(0.01, 0.01);
        let q = build_transfer_matrix(params, Truncation::new(1)).unwrap();
        let m = q.matrix();
        assert!(!q.is_hermitian());
        assert!((m[[0, 0]] - c(0.375, -0.01)).norm() < 1e-15);
        assert!((m[[1, 1]] - c(1.375, -0.02)).norm() < 1e-15);
        assert!((m[[2, 2]] - c(-0.375, 0.0)).norm() < 1e-15);
        assert!((m[[3, 3]] - c(0.625, -0.01)).norm() < 1e-15);
    }

    #[test]
    fn hermiticity_of_closed_and_open_models() {
        let q = build_transfer_matrix(ModelParams::new(1.0, 1.0, 2.0, 2.0), Truncation::new(10))
            .unwrap();
        assert_eq!(hermiticity_check(&q), 0.0);

        let params = ModelParams::<f64>::new(1.0, 1.0, 0.1, 0.1).with_dissipation(0.01, 0.0);
        let q = build_transfer_matrix(params, Truncation::new(1)).unwrap();
        // anti-Hermitian part on the diagonal is 2 beta p + 2 gamma (excited)
        assert!((hermiticity_check(&q) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_params() {
        let t = Truncation::new(2);
        assert!(build_transfer_matrix(ModelParams::new(f64::NAN, 1.0, 0.1, 0.1), t).is_err());
        assert!(build_transfer_matrix(ModelParams::new(1.0, 1.0, f64::INFINITY, 0.1), t).is_err());
        assert!(build_transfer_matrix(ModelParams::new(0.0, 1.0, 0.1, 0.1), t).is_err());
        let leaky = ModelParams::new(1.0, 1.0, 0.1, 0.1).with_dissipation(-0.1, 0.0);
        assert!(build_transfer_matrix(leaky, t).is_err());
        assert!(build_transfer_matrix(
            ModelParams::new(1.0, 1.0, 0.1, 0.1),
            Truncation::new(usize::MAX)
        )
        .is_err());
    }

    #[test]
    fn hermitian_matrix_is_real_symmetric() {
        let q = build_transfer_matrix(ModelParams::new(1.0, 0.75, 0.4, 0.3), Truncation::new(12))
            .unwrap();
        let m = q.matrix();
        for ((i, j), v) in m.indexed_iter() {
            assert_eq!(v.im, 0.0);
            assert_eq!(*v, m[[j, i]]);
        }
    }

    #[test]
    fn coupling_grows_linearly_in_level() {
        for p in [0usize, 1, 5, 40] {
            let q = build_transfer_matrix(ModelParams::new(1.0, 1.0, 0.3, 0.7), Truncation::new(p))
                .unwrap();
            // the top coupling reaches level P, i.e. g * P; level P+1 is dropped
            let expected = if p == 0 { 0.0 } else { 0.7 * p as f64 };
            assert!((q.max_coupling() - expected).abs() < 1e-12, "P={p}");
            assert!(q.max_coupling() <= 0.7 * (p as f64 + 1.0));
        }
    }

    #[test]
    fn sparse_products_match_dense() {
        let q = build_transfer_matrix(
            ModelParams::new(1.0, 0.6, 0.4, 0.2).with_dissipation(0.02, 0.01),
            Truncation::new(5),
        )
        .unwrap();
        let n = q.dim();
        let v: Vec<Complex<f64>> = (0..n)
            .map(|k| c(k as f64 * 0.3 - 1.0, 0.5 - k as f64 * 0.1))
            .collect();
        let dense: Vec<Complex<f64>> = (0..n)
            .map(|i| (0..n).map(|j| q.matrix()[[i, j]] * v[j]).sum())
            .collect();
        let sparse = q.apply(&v);
        for (a, b) in dense.iter().zip(&sparse) {
            assert!((a - b).norm() < 1e-13);
        }
        let mut row = vec![c(0.0, 0.0); n];
        q.sparse().left_mul_row_into(&v, &mut row);
        for (j, got) in row.iter().enumerate() {
            let expect: Complex<f64> = (0..n).map(|k| v[k] * q.matrix()[[k, j]]).sum();
            assert!((got - expect).norm() < 1e-13);
        }
        assert!(q.sparse().nnz() <= 3 * n);
    }
}
