//! Truncated Taylor-series step propagator.
//!
//! A single step matrix `M(dt) = sum_{n=0}^{N} (-i dt)^n / n! Q^n` is built once
//! per Hamiltonian and applied repeatedly to any number of initial states.
//! The magnitude of the final series term is kept as a convergence
//! certificate; construction fails when it exceeds the configured tolerance.

use ndarray::Array2;
use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fingerprint::fingerprint;
use crate::model::TransferMatrix;
use crate::scalar::{cone, czero, Scalar};
use crate::states::SpinorFockState;
use crate::trajectory::{Record, Snapshot, Trajectory};

/// Below this dimension rows are processed on the calling thread.
const PAR_MIN_DIM: usize = 128;

/// Largest step ever suggested.
pub const MAX_SUGGESTED_DT: f64 = 0.1;

pub const DEFAULT_ORDER: usize = 30;
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagatorConfig<T> {
    /// Step length.
    pub dt: T,
    /// Taylor order `N`.
    pub order: usize,
    /// Number of steps `K`.
    pub steps: usize,
    /// Bound on the max-norm of the last Taylor term.
    pub tol: T,
    /// Store the state every `snapshot_stride` steps; 0 disables snapshots.
    pub snapshot_stride: usize,
}

impl<T: Scalar> PropagatorConfig<T> {
    pub fn new(dt: T, order: usize, steps: usize) -> Self {
        Self {
            dt,
            order,
            steps,
            tol: T::lit(DEFAULT_TOL),
            snapshot_stride: 0,
        }
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_snapshot_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > T::zero()) {
            return Err(Error::InvalidConfig(
                "dt must be positive and finite".into(),
            ));
        }
        if self.order == 0 {
            return Err(Error::InvalidConfig(
                "Taylor order must be at least 1".into(),
            ));
        }
        if !(self.tol.is_finite() && self.tol > T::zero()) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Dense single-step propagator `M(dt)`.
#[derive(Clone, Debug)]
pub struct StepPropagator<T> {
    matrix: Array2<Complex<T>>,
    last_term_norm: T,
    dt: T,
    order: usize,
    fingerprint: u64,
}

impl<T: Scalar> StepPropagator<T> {
    /// Reassembles a propagator from stored parts (see the cache module).
    pub fn from_parts(
        matrix: Array2<Complex<T>>,
        last_term_norm: T,
        dt: T,
        order: usize,
        fingerprint: u64,
    ) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        Ok(Self {
            matrix: matrix.as_standard_layout().into_owned(),
            last_term_norm,
            dt,
            order,
            fingerprint,
        })
    }

    pub fn matrix(&self) -> &Array2<Complex<T>> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn last_term_norm(&self) -> T {
        self.last_term_norm
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// `M s`.
    pub fn apply(&self, s: &SpinorFockState<T>) -> Result<SpinorFockState<T>> {
        if s.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: s.dim(),
            });
        }
        let mut out = s.clone();
        mat_vec_into(&self.matrix, s.amps(), out.amps_mut());
        Ok(out)
    }

    /// `max |M^dagger M - I|`; zero for an exact unitary.
    pub fn unitarity_defect(&self) -> T {
        let n = self.dim();
        let m = self.matrix.as_slice().expect("standard layout");
        let worst_row = |i: usize| -> T {
            // row i of M^dagger M = sum_k conj(M[k,i]) M[k,:]
            let mut row = vec![czero::<T>(); n];
            for k in 0..n {
                let a = m[k * n + i].conj();
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for (r, b) in row.iter_mut().zip(&m[k * n..(k + 1) * n]) {
                    *r = *r + a * b;
                }
            }
            row[i] = row[i] - cone();
            row.iter().map(|z| z.norm()).fold(T::zero(), T::max)
        };
        if n >= PAR_MIN_DIM {
            (0..n)
                .into_par_iter()
                .map(worst_row)
                .reduce(T::zero, T::max)
        } else {
            (0..n).map(worst_row).fold(T::zero(), T::max)
        }
    }
}

/// Build `M(dt)` by accumulating `term_{n+1} = term_n Q (-i dt / (n+1))`.
pub fn build_step_propagator<T: Scalar>(
    q: &TransferMatrix<T>,
    cfg: &PropagatorConfig<T>,
) -> Result<StepPropagator<T>> {
    cfg.validate()?;
    let n = q.dim();
    let sparse = q.sparse();
    let mut term = identity::<T>(n);
    let mut acc = identity::<T>(n);
    let mut next = vec![czero::<T>(); n * n];

    for k in 0..cfg.order {
        let factor = Complex::new(T::zero(), -cfg.dt / T::from_usize(k + 1).unwrap());
        let row_step = |(dst, src): (&mut [Complex<T>], &[Complex<T>])| {
            sparse.left_mul_row_into(src, dst);
            dst.iter_mut().for_each(|z| *z = *z * factor);
        };
        if n >= PAR_MIN_DIM {
            next.par_chunks_mut(n)
                .zip(term.par_chunks(n))
                .for_each(row_step);
        } else {
            next.chunks_mut(n).zip(term.chunks(n)).for_each(row_step);
        }
        std::mem::swap(&mut term, &mut next);
        acc.iter_mut().zip(&term).for_each(|(a, t)| *a = *a + t);
    }

    let last = term
        .iter()
        .map(|z| z.norm())
        .fold(T::zero(), |a, b| if b.is_nan() { b } else { a.max(b) });
    if !(last <= cfg.tol) {
        let suggested = certified_step(q, cfg.order, cfg.tol);
        let ratio = q.norm_1() * cfg.dt / T::from_usize(cfg.order + 1).unwrap();
        return Err(Error::NotConverged {
            last_term_norm: last.as_f64(),
            tol: cfg.tol.as_f64(),
            ratio: ratio.as_f64(),
            reduction: (cfg.dt / suggested).as_f64(),
            suggested_dt: suggested.as_f64(),
        });
    }

    let fp = fingerprint(q.params(), q.truncation(), cfg.dt, cfg.order);
    let matrix = Array2::from_shape_vec((n, n), acc).expect("square buffer");
    StepPropagator::from_parts(matrix, last, cfg.dt, cfg.order, fp)
}

/// Propagate `s0` for `cfg.steps` steps, recording observables at every step
/// including `t = 0`.
pub fn evolve<T: Scalar>(
    s0: &SpinorFockState<T>,
    step: &StepPropagator<T>,
    cfg: &PropagatorConfig<T>,
    q: &TransferMatrix<T>,
) -> Result<Trajectory<T>> {
    check_compatible(s0, step, cfg, q)?;
    let mut records = Vec::with_capacity(cfg.steps + 1);
    let mut snapshots = Vec::new();
    let mut state = s0.clone();
    let mut scratch = s0.clone();

    for k in 0..=cfg.steps {
        let t = T::from_usize(k).unwrap() * cfg.dt;
        let energy = state.energy_expectation(q)?.re;
        records.push(Record::measure(t, &state, energy));
        if cfg.snapshot_stride > 0 && k % cfg.snapshot_stride == 0 {
            snapshots.push(Snapshot {
                step: k,
                t,
                state: state.clone(),
            });
        }
        if k == cfg.steps {
            break;
        }
        mat_vec_into(step.matrix(), state.amps(), scratch.amps_mut());
        std::mem::swap(&mut state, &mut scratch);
        if !state.is_finite() {
            return Err(Error::NonFinite { step: k + 1 });
        }
    }
    Ok(Trajectory { records, snapshots })
}

/// Evolve several initial states with one shared propagator. Each trajectory
/// is bit-identical to a separate [`evolve`] call.
pub fn evolve_reusing<T: Scalar>(
    states: &[SpinorFockState<T>],
    step: &StepPropagator<T>,
    cfg: &PropagatorConfig<T>,
    q: &TransferMatrix<T>,
) -> Result<Vec<Trajectory<T>>> {
    states.par_iter().map(|s| evolve(s, step, cfg, q)).collect()
}

/// Largest `dt = 0.1 / 2^k` with `(|Q|_1 dt)^{N+1} / (N+1)! < tol`.
pub fn suggest_step<T: Scalar>(q: &TransferMatrix<T>, order: usize, tol: T) -> T {
    suggest_step_for_norm(q.norm_1(), order, tol)
}

pub fn suggest_step_for_norm<T: Scalar>(norm_1: T, order: usize, tol: T) -> T {
    let mut dt = T::lit(MAX_SUGGESTED_DT);
    let two = T::lit(2.0);
    // 1100 halvings reach below the smallest subnormal double
    for _ in 0..1100 {
        if remainder_bound(norm_1 * dt, order) < tol {
            return dt;
        }
        dt = dt / two;
    }
    dt
}

/// [`suggest_step`], halved further until `(|Q|_1 dt)^N / N!` (a bound on
/// the max-norm of the last retained term) is also below `tol`, so that
/// [`build_step_propagator`] accepts the step.
pub fn certified_step<T: Scalar>(q: &TransferMatrix<T>, order: usize, tol: T) -> T {
    let norm = q.norm_1();
    let mut dt = suggest_step_for_norm(norm, order, tol);
    for _ in 0..1100 {
        if order == 0 || remainder_bound(norm * dt, order - 1) < tol {
            break;
        }
        dt = dt / T::lit(2.0);
    }
    dt
}

/// `x^{N+1} / (N+1)!` as a running product, free of overflow.
fn remainder_bound<T: Scalar>(x: T, order: usize) -> T {
    (1..=order + 1).fold(T::one(), |acc, k| acc * x / T::from_usize(k).unwrap())
}

/// Materialized powers `M^(2^j)` for jumping straight to a checkpoint step.
#[derive(Clone, Debug)]
pub struct PowerCache<T> {
    powers: Vec<Array2<Complex<T>>>,
}

impl<T: Scalar> PowerCache<T> {
    /// Powers up to the largest `2^j <= max_steps`.
    pub fn new(step: &StepPropagator<T>, max_steps: usize) -> Self {
        let mut powers = vec![step.matrix().clone()];
        while let Some(last) = powers.last() {
            let next_exp = 1usize << powers.len();
            if next_exp > max_steps {
                break;
            }
            let sq = mat_mul(last, last);
            powers.push(sq);
        }
        Self { powers }
    }

    pub fn max_steps(&self) -> usize {
        (1usize << self.powers.len()) - 1
    }

    /// `M^k s` via the binary expansion of `k`.
    pub fn advance(&self, s: &SpinorFockState<T>, k: usize) -> Result<SpinorFockState<T>> {
        if k > self.max_steps() {
            return Err(Error::InvalidConfig(format!(
                "power cache covers at most {} steps, asked for {k}",
                self.max_steps()
            )));
        }
        let dim = self.powers[0].nrows();
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.dim(),
            });
        }
        let mut state = s.clone();
        let mut scratch = s.clone();
        for (j, p) in self.powers.iter().enumerate() {
            if k >> j & 1 == 1 {
                mat_vec_into(p, state.amps(), scratch.amps_mut());
                std::mem::swap(&mut state, &mut scratch);
            }
        }
        Ok(state)
    }
}

fn check_compatible<T: Scalar>(
    s0: &SpinorFockState<T>,
    step: &StepPropagator<T>,
    cfg: &PropagatorConfig<T>,
    q: &TransferMatrix<T>,
) -> Result<()> {
    cfg.validate()?;
    for found in [s0.dim(), step.dim()] {
        if found != q.dim() {
            return Err(Error::DimensionMismatch {
                expected: q.dim(),
                found,
            });
        }
    }
    let expected = fingerprint(q.params(), q.truncation(), cfg.dt, cfg.order);
    if step.fingerprint() != expected {
        return Err(Error::FingerprintMismatch {
            expected,
            found: step.fingerprint(),
        });
    }
    Ok(())
}

fn identity<T: Scalar>(n: usize) -> Vec<Complex<T>> {
    let mut m = vec![czero::<T>(); n * n];
    for i in 0..n {
        m[i * n + i] = cone();
    }
    m
}

/// `out = A x` for a dense row-major `A`. Each output entry is accumulated in
/// ascending column order, so results do not depend on the thread count.
pub(crate) fn mat_vec_into<T: Scalar>(
    a: &Array2<Complex<T>>,
    x: &[Complex<T>],
    out: &mut [Complex<T>],
) {
    let n = a.ncols();
    let data = a.as_slice().expect("standard layout");
    let row_dot = |(o, row): (&mut Complex<T>, &[Complex<T>])| {
        *o = row.iter().zip(x).fold(czero(), |acc, (m, v)| acc + m * v);
    };
    if n >= 2 * PAR_MIN_DIM {
        out.par_iter_mut().zip(data.par_chunks(n)).for_each(row_dot);
    } else {
        out.iter_mut().zip(data.chunks(n)).for_each(row_dot);
    }
}

fn mat_mul<T: Scalar>(a: &Array2<Complex<T>>, b: &Array2<Complex<T>>) -> Array2<Complex<T>> {
    let n = a.nrows();
    let (ad, bd) = (
        a.as_slice().expect("standard layout"),
        b.as_slice().expect("standard layout"),
    );
    let mut out = vec![czero::<T>(); n * n];
    out.par_chunks_mut(n)
        .zip(ad.par_chunks(n))
        .for_each(|(row, arow)| {
            for (k, aik) in arow.iter().enumerate() {
                for (r, bkj) in row.iter_mut().zip(&bd[k * n..(k + 1) * n]) {
                    *r = *r + aik * bkj;
                }
            }
        });
    Array2::from_shape_vec((n, n), out).expect("square buffer")
}
