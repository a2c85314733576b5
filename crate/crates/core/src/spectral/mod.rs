//! Reference evolution from the eigendecomposition of a Hermitian transfer
//! matrix, plus ground-state and level-spacing diagnostics.

mod eigh;

use ndarray::Array2;
use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    build_transfer_matrix, hermiticity_check, ModelParams, TransferMatrix, Truncation,
};
use crate::scalar::{czero, Scalar};
use crate::states::SpinorFockState;
use crate::trajectory::{Record, Trajectory};

/// Relative residual bound `max |Q v - E v| <= tol (1 + max |E|)`.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Bound on `max |V^T V - I|`.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
/// `gs_scan` reports Converged when the last and mid-scan ground energies
/// agree to this relative tolerance.
pub const CONVERGED_TOL: f64 = 1e-8;
/// A truncation is on the plateau when its ground energy agrees with the
/// final one (and stays so) to this relative tolerance.
pub const PLATEAU_TOL: f64 = 1e-6;
/// Unbounded requires a final-half slope below `-UNBOUNDED_SLOPE * omega_f`.
pub const UNBOUNDED_SLOPE: f64 = 1e-3;

/// Eigenpairs of a Hermitian (real symmetric) transfer matrix.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition<T> {
    /// Ascending eigenvalues.
    pub energies: Vec<T>,
    /// Column `j` is the eigenvector of `energies[j]`.
    pub vectors: Array2<T>,
    /// `max_j |Q v_j - E_j v_j|_2`.
    pub residual: T,
    /// `max |V^T V - I|`.
    pub orthonormality: T,
}

impl<T: Scalar> SpectralDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn ground_energy(&self) -> T {
        self.energies[0]
    }
}

/// Full eigendecomposition of a Hermitian transfer matrix.
pub fn diagonalize<T: Scalar>(q: &TransferMatrix<T>) -> Result<SpectralDecomposition<T>> {
    let a = real_part(q)?;
    diagonalize_symmetric(&a)
}

/// Eigendecomposition of an arbitrary real symmetric matrix, with the residual
/// and orthonormality checks applied.
pub fn diagonalize_symmetric<T: Scalar>(a: &Array2<T>) -> Result<SpectralDecomposition<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    let a = a.as_standard_layout();
    let data = a.as_slice().expect("standard layout");
    let eig = eigh::symmetric_eigen(data, n, true)?;
    let rows = eig.vectors.expect("vectors requested");

    let residual = (0..n)
        .into_par_iter()
        .map(|j| {
            let v = &rows[j * n..(j + 1) * n];
            (0..n)
                .map(|i| {
                    let av: T = data[i * n..(i + 1) * n]
                        .iter()
                        .zip(v)
                        .map(|(x, y)| *x * *y)
                        .sum();
                    let r = av - eig.values[j] * v[i];
                    r * r
                })
                .sum::<T>()
                .sqrt()
        })
        .reduce(T::zero, T::max);

    let orthonormality = (0..n)
        .into_par_iter()
        .map(|j| {
            let vj = &rows[j * n..(j + 1) * n];
            (0..n)
                .map(|k| {
                    let dot: T = vj
                        .iter()
                        .zip(&rows[k * n..(k + 1) * n])
                        .map(|(x, y)| *x * *y)
                        .sum();
                    let expect = if j == k { T::one() } else { T::zero() };
                    (dot - expect).abs()
                })
                .fold(T::zero(), T::max)
        })
        .reduce(T::zero, T::max);

    let emax = eig.values.iter().fold(T::zero(), |m, e| m.max(e.abs()));
    if !(residual <= T::tol(RESIDUAL_TOL) * (T::one() + emax)) {
        return Err(Error::EigenAccuracy(format!(
            "residual {residual:e} too large"
        )));
    }
    if !(orthonormality <= T::tol(ORTHONORMALITY_TOL)) {
        return Err(Error::EigenAccuracy(format!(
            "orthonormality defect {orthonormality:e} too large"
        )));
    }

    // rows of `rows` are eigenvectors; store them as columns
    let vectors = Array2::from_shape_vec((n, n), rows)
        .expect("square buffer")
        .reversed_axes();
    Ok(SpectralDecomposition {
        energies: eig.values,
        vectors: vectors.as_standard_layout().into_owned(),
        residual,
        orthonormality,
    })
}

/// `|t> = sum_j F_j exp(-i E_j t) v_j` with `F_j = <v_j|s0>`, recorded at each
/// of `times` (any order, any spacing).
pub fn teee_evolve<T: Scalar>(
    s0: &SpinorFockState<T>,
    dec: &SpectralDecomposition<T>,
    times: &[T],
) -> Result<Trajectory<T>> {
    let n = dec.dim();
    if s0.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: s0.dim(),
        });
    }
    let v = dec.vectors.as_slice().expect("standard layout");
    let mut coeffs = vec![czero::<T>(); n];
    for (i, si) in s0.amps().iter().enumerate() {
        for (c, vij) in coeffs.iter_mut().zip(&v[i * n..(i + 1) * n]) {
            *c = *c + si * *vij;
        }
    }
    let energy: T = coeffs
        .iter()
        .zip(&dec.energies)
        .map(|(c, e)| c.norm_sqr() * *e)
        .sum();

    let state_at = |t: T| -> Result<Record<T>> {
        let phased: Vec<Complex<T>> = coeffs
            .iter()
            .zip(&dec.energies)
            .map(|(c, e)| c * Complex::new(T::zero(), -*e * t).exp())
            .collect();
        let amps = (0..n)
            .map(|i| {
                v[i * n..(i + 1) * n]
                    .iter()
                    .zip(&phased)
                    .fold(czero(), |acc, (x, c)| acc + c * *x)
            })
            .collect();
        let state = SpinorFockState::from_amplitudes(s0.truncation(), amps)?;
        Ok(Record::measure(t, &state, energy))
    };
    let records = times
        .par_iter()
        .map(|&t| state_at(t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        records,
        snapshots: Vec::new(),
    })
}

/// `E_j - E_0` for `j = 1..=count`.
pub fn level_differences<T: Scalar>(
    dec: &SpectralDecomposition<T>,
    count: usize,
) -> Result<Vec<T>> {
    if count >= dec.dim() {
        return Err(Error::LevelCountOutOfRange {
            requested: count,
            available: dec.dim().saturating_sub(1),
        });
    }
    let e0 = dec.energies[0];
    Ok(dec.energies[1..=count].iter().map(|e| *e - e0).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GsClass {
    Converged,
    Unbounded,
    Undetermined,
}

impl std::fmt::Display for GsClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GsClass::Converged => "Converged",
            GsClass::Unbounded => "Unbounded",
            GsClass::Undetermined => "Undetermined",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GsScanResult<T> {
    pub p_values: Vec<usize>,
    pub e0_values: Vec<T>,
    pub classification: GsClass,
    /// Smallest truncation from which every ground energy stays within
    /// [`PLATEAU_TOL`] of the final one; `None` if only the final point does.
    pub plateau_p: Option<usize>,
    /// Least-squares slope of `E0` against `P` over the final half of the scan.
    pub slope: T,
    pub strictly_decreasing: bool,
}

/// Ground-state energy as a function of truncation, classified as converged,
/// unbounded from below, or undetermined.
pub fn gs_scan<T: Scalar>(params: ModelParams<T>, p_values: &[usize]) -> Result<GsScanResult<T>> {
    params.validate()?;
    if !params.is_hermitian() {
        let q = build_transfer_matrix(
            params,
            Truncation::new(p_values.last().copied().unwrap_or(0)),
        )?;
        return Err(Error::NonHermitianInput {
            asymmetry: hermiticity_check(&q).as_f64(),
        });
    }
    if p_values.is_empty() {
        return Err(Error::InvalidConfig(
            "gs_scan needs at least one truncation".into(),
        ));
    }
    if p_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "gs_scan truncations must be strictly ascending".into(),
        ));
    }

    let e0_values = p_values
        .par_iter()
        .map(|&p| ground_energy(params, p))
        .collect::<Result<Vec<T>>>()?;
    let last = e0_values.len() - 1;
    let e_last = e0_values[last];
    let scale = T::one() + e_last.abs();

    let strictly_decreasing = e0_values.windows(2).all(|w| w[1] < w[0]);

    let plateau_tol = T::tol(PLATEAU_TOL) * scale;
    let mut plateau_idx = e0_values.len();
    for k in (0..e0_values.len()).rev() {
        if (e0_values[k] - e_last).abs() < plateau_tol {
            plateau_idx = k;
        } else {
            break;
        }
    }
    let plateau_p = (plateau_idx < last).then(|| p_values[plateau_idx]);

    let (classification, slope) = if last == 0 {
        (GsClass::Undetermined, T::zero())
    } else {
        let mid = mid_index(p_values);
        let slope = least_squares_slope(&p_values[mid..], &e0_values[mid..]);
        let class = if (e_last - e0_values[mid]).abs() < T::tol(CONVERGED_TOL) * scale {
            GsClass::Converged
        } else if strictly_decreasing
            && slope < -T::lit(UNBOUNDED_SLOPE) * params.omega_f
            && plateau_p.is_none()
        {
            GsClass::Unbounded
        } else {
            GsClass::Undetermined
        };
        (class, slope)
    };

    Ok(GsScanResult {
        p_values: p_values.to_vec(),
        e0_values,
        classification,
        plateau_p,
        slope,
        strictly_decreasing,
    })
}

/// Lowest eigenvalue of `Q` at truncation `p` (eigenvalues only).
pub fn ground_energy<T: Scalar>(params: ModelParams<T>, p: usize) -> Result<T> {
    let q = build_transfer_matrix(params, Truncation::new(p))?;
    let a = real_part(&q)?;
    let eig = eigh::symmetric_eigen(a.as_slice().expect("standard layout"), q.dim(), false)?;
    Ok(eig.values[0])
}

/// Index (before the last) of the scan point nearest `P_max / 2`.
fn mid_index(p_values: &[usize]) -> usize {
    let last = p_values.len() - 1;
    let target = p_values[last] as f64 / 2.0;
    (0..last)
        .min_by(|&a, &b| {
            let da = (p_values[a] as f64 - target).abs();
            let db = (p_values[b] as f64 - target).abs();
            da.partial_cmp(&db).unwrap()
        })
        .unwrap_or(0)
}

fn least_squares_slope<T: Scalar>(xs: &[usize], ys: &[T]) -> T {
    let n = T::from_usize(xs.len()).unwrap();
    let xs: Vec<T> = xs.iter().map(|&x| T::from_usize(x).unwrap()).collect();
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let sxy: T = xs.iter().zip(ys).map(|(x, y)| (*x - mx) * (*y - my)).sum();
    let sxx: T = xs.iter().map(|x| (*x - mx) * (*x - mx)).sum();
    if sxx == T::zero() {
        T::zero()
    } else {
        sxy / sxx
    }
}

fn real_part<T: Scalar>(q: &TransferMatrix<T>) -> Result<Array2<T>> {
    let has_imag = q.matrix().iter().any(|z| z.im != T::zero());
    if !q.is_hermitian() || has_imag {
        return Err(Error::NonHermitianInput {
            asymmetry: hermiticity_check(q).as_f64(),
        });
    }
    Ok(q.matrix().mapv(|z| z.re))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{fock_state, Spin};

    fn dec(params: ModelParams<f64>, p: usize) -> SpectralDecomposition<f64> {
        diagonalize(&build_transfer_matrix(params, Truncation::new(p)).unwrap()).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn small_spectra() {
        assert_close(
            &dec(ModelParams::new(1.0, 1.0, 0.1, 0.0), 0).energies,
            &[-0.5, 0.5],
            1e-15,
        );
        assert_close(
            &dec(ModelParams::new(1.0, 1.0, 0.1, 0.0), 1).energies,
            &[-0.5, 0.4, 0.6, 1.5],
            1e-14,
        );
        assert_close(
            &dec(ModelParams::new(1.0, 1.0, 0.0, 0.0), 2).energies,
            &[-0.5, 0.5, 0.5, 1.5, 1.5, 2.5],
            1e-15,
        );
    }

    #[test]
    fn rejects_dissipative() {
        let q = build_transfer_matrix(
            ModelParams::new(1.0, 1.0, 0.1, 0.1).with_dissipation(0.01, 0.0),
            Truncation::new(3),
        )
        .unwrap();
        assert!(matches!(
            diagonalize(&q),
            Err(Error::NonHermitianInput { .. })
        ));
        assert!(matches!(
            gs_scan(
                ModelParams::new(1.0, 1.0, 0.1, 0.1).with_dissipation(0.0, 0.01),
                &[1, 2]
            ),
            Err(Error::NonHermitianInput { .. })
        ));
    }

    #[test]
    fn level_differences_examples() {
        let d = dec(ModelParams::new(1.0, 1.0, 0.1, 0.0), 1);
        assert_close(&level_differences(&d, 3).unwrap(), &[0.9, 1.1, 2.0], 1e-14);
        assert!(level_differences(&d, 4).is_err());

        let d = dec(ModelParams::new(1.0, 1.0, 0.0, 0.0), 6);
        let gaps = level_differences(&d, 11).unwrap();
        assert_close(
            &gaps,
            &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 5.0, 5.0, 6.0],
            1e-14,
        );
        assert!(gaps.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn stationary_state_is_constant() {
        let params = ModelParams::new(1.0, 0.75, 0.4, 0.4);
        let d = dec(params, 10);
        let q = build_transfer_matrix(params, Truncation::new(10)).unwrap();
        let v: Vec<Complex<f64>> = d
            .vectors
            .column(3)
            .iter()
            .map(|x| Complex::new(*x, 0.0))
            .collect();
        let s0 = SpinorFockState::from_amplitudes(Truncation::new(10), v).unwrap();
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.7).collect();
        let traj = teee_evolve(&s0, &d, &times).unwrap();
        for f in [
            |r: &Record<f64>| r.n_raw,
            |r: &Record<f64>| r.sz_raw,
            |r: &Record<f64>| r.norm2,
        ] {
            assert!(traj.max_drift(f) < 1e-12);
        }
        assert!((traj.records[0].energy_re - d.energies[3]).abs() < 1e-12);
        assert!((s0.energy_expectation(&q).unwrap().re - d.energies[3]).abs() < 1e-12);
    }

    #[test]
    fn rabi_two_level() {
        let d = dec(ModelParams::new(1.0, 1.0, 0.1, 0.0), 3);
        let s0 = fock_state(0, Spin::Excited, Truncation::new(3)).unwrap();
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.1).collect();
        let traj = teee_evolve(&s0, &d, &times).unwrap();
        for r in &traj.records {
            assert!((r.sz_raw - (0.2 * r.t).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn gs_scan_decoupled_is_converged() {
        let r = gs_scan(
            ModelParams::<f64>::new(1.0, 0.8, 0.0, 0.0),
            &[1, 2, 3, 5, 8],
        )
        .unwrap();
        assert!(r.e0_values.iter().all(|e| (*e + 0.4).abs() < 1e-15));
        assert_eq!(r.classification, GsClass::Converged);
        assert_eq!(r.plateau_p, Some(1));
    }

    #[test]
    fn gs_scan_input_validation() {
        let p = ModelParams::new(1.0, 1.0, 0.1, 0.1);
        assert!(gs_scan(p, &[]).is_err());
        assert!(gs_scan(p, &[3, 2]).is_err());
        assert_eq!(
            gs_scan(p, &[4]).unwrap().classification,
            GsClass::Undetermined
        );
    }

    #[test]
    fn slope_and_mid_index() {
        assert_eq!(mid_index(&[2, 4, 6, 8, 10]), 1);
        assert_eq!(mid_index(&[1, 100]), 0);
        assert!((least_squares_slope(&[1, 2, 3], &[1.0, 3.0, 5.0]) - 2.0f64).abs() < 1e-15);
    }
}
