//! Observable records shared by the Taylor and spectral evolvers.

use crate::states::SpinorFockState;
use crate::Scalar;

/// Observables at one time. `*_raw` values are sesquilinear forms of the
/// (possibly non-normalized) state; `*_norm` divide by `norm2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Record<T> {
    pub t: T,
    pub norm2: T,
    pub n_raw: T,
    pub n_norm: T,
    pub sz_raw: T,
    pub sz_norm: T,
    pub energy_re: T,
    pub excitation: T,
    pub parity: T,
}

impl<T: Scalar> Record<T> {
    pub fn measure(t: T, state: &SpinorFockState<T>, energy_re: T) -> Self {
        let norm2 = state.norm_squared();
        let n_raw = state.mean_photon_number();
        let sz_raw = state.atomic_inversion();
        Self {
            t,
            norm2,
            n_raw,
            n_norm: n_raw / norm2,
            sz_raw,
            sz_norm: sz_raw / norm2,
            energy_re,
            excitation: state.excitation_number(),
            parity: state.parity_expectation(),
        }
    }
}

/// A stored state along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot<T> {
    pub step: usize,
    pub t: T,
    pub state: SpinorFockState<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub records: Vec<Record<T>>,
    pub snapshots: Vec<Snapshot<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        self.records.iter().map(|r| r.t)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Largest `|f(a) - f(b)|` over paired records.
    ///
    /// Panics if the trajectories have different lengths.
    pub fn max_abs_diff(&self, other: &Self, f: impl Fn(&Record<T>) -> T) -> T {
        assert_eq!(self.len(), other.len(), "trajectories differ in length");
        self.records
            .iter()
            .zip(&other.records)
            .map(|(a, b)| (f(a) - f(b)).abs())
            .fold(T::zero(), T::max)
    }

    /// Largest `|f(r) - f(first)|`.
    pub fn max_drift(&self, f: impl Fn(&Record<T>) -> T) -> T {
        match self.records.first() {
            None => T::zero(),
            Some(first) => {
                let base = f(first);
                self.records
                    .iter()
                    .map(|r| (f(r) - base).abs())
                    .fold(T::zero(), T::max)
            }
        }
    }
}
