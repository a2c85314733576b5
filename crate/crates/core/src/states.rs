//! Spinor-Fock states and their observables.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::{TransferMatrix, Truncation};
use crate::scalar::{cone, creal, czero, Scalar};

/// Atomic level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spin {
    Excited,
    Ground,
}

/// Coherent field amplitude and spin mixing angle of a product initial state
/// `|alpha> (sin(theta) |e> + cos(theta) |g>)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherentSpec<T> {
    pub alpha: T,
    pub theta: T,
    /// Largest Poisson mass allowed beyond the truncation.
    pub max_tail: T,
}

impl<T: Scalar> CoherentSpec<T> {
    pub fn new(alpha: T, theta: T) -> Self {
        Self {
            alpha,
            theta,
            max_tail: T::lit(1e-12),
        }
    }

    pub fn with_max_tail(mut self, max_tail: T) -> Self {
        self.max_tail = max_tail;
        self
    }
}

/// A state in the truncated spinor-Fock space, stored as the concatenation of
/// the excited block `F_p^1` and the ground block `F_p^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorFockState<T> {
    truncation: Truncation,
    amps: Vec<Complex<T>>,
}

impl<T: Scalar> SpinorFockState<T> {
    pub fn zeros(truncation: Truncation) -> Self {
        Self {
            truncation,
            amps: vec![czero(); truncation.dim()],
        }
    }

    /// Wraps a block-layout amplitude vector of length `2 (P + 1)`.
    pub fn from_amplitudes(truncation: Truncation, amps: Vec<Complex<T>>) -> Result<Self> {
        if amps.len() != truncation.dim() {
            return Err(Error::DimensionMismatch {
                expected: truncation.dim(),
                found: amps.len(),
            });
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidConfig(
                "state amplitudes must be finite".into(),
            ));
        }
        Ok(Self { truncation, amps })
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amps
    }

    pub fn amps_e(&self) -> &[Complex<T>] {
        &self.amps[..self.truncation.max_fock + 1]
    }

    pub fn amps_g(&self) -> &[Complex<T>] {
        &self.amps[self.truncation.max_fock + 1..]
    }

    pub fn scaled(&self, c: Complex<T>) -> Self {
        Self {
            truncation: self.truncation,
            amps: self.amps.iter().map(|z| z * c).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.amps
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn norm_squared(&self) -> T {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        self.check_dim(other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .fold(czero(), |acc, (a, b)| acc + a.conj() * b))
    }

    pub fn normalized(&self) -> Result<Self> {
        let n2 = self.norm_squared();
        if n2 == T::zero() {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scaled(creal(T::one() / n2.sqrt())))
    }

    /// Raw `<n>`; divide by [`norm_squared`](Self::norm_squared) for the
    /// normalized value.
    pub fn mean_photon_number(&self) -> T {
        self.weighted(|p| T::from_usize(p).unwrap(), |p| T::from_usize(p).unwrap())
    }

    /// Raw `<sigma_z>`.
    pub fn atomic_inversion(&self) -> T {
        self.weighted(|_| T::one(), |_| -T::one())
    }

    /// Raw expectation of the excitation number `n + |e><e|`, the
    /// rotating-wave constant of motion.
    pub fn excitation_number(&self) -> T {
        self.weighted(
            |p| T::from_usize(p + 1).unwrap(),
            |p| T::from_usize(p).unwrap(),
        )
    }

    /// Raw expectation of the parity `exp[i pi (n + |e><e|)]`.
    pub fn parity_expectation(&self) -> T {
        let sign = |k: usize| {
            if k.is_multiple_of(2) {
                T::one()
            } else {
                -T::one()
            }
        };
        self.weighted(|p| sign(p + 1), sign)
    }

    /// `<s|Q|s>`.
    pub fn energy_expectation(&self, q: &TransferMatrix<T>) -> Result<Complex<T>> {
        self.check_dim(q.dim())?;
        let qs = q.apply(&self.amps);
        Ok(self
            .amps
            .iter()
            .zip(&qs)
            .fold(czero(), |acc, (a, b)| acc + a.conj() * b))
    }

    fn weighted(&self, excited: impl Fn(usize) -> T, ground: impl Fn(usize) -> T) -> T {
        let e: T = self
            .amps_e()
            .iter()
            .enumerate()
            .map(|(p, z)| excited(p) * z.norm_sqr())
            .sum();
        let g: T = self
            .amps_g()
            .iter()
            .enumerate()
            .map(|(p, z)| ground(p) * z.norm_sqr())
            .sum();
        e + g
    }

    fn check_dim(&self, other: usize) -> Result<()> {
        if self.dim() == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other,
            })
        }
    }
}

/// Basis state `|p0, spin>`.
pub fn fock_state<T: Scalar>(
    p0: usize,
    spin: Spin,
    truncation: Truncation,
) -> Result<SpinorFockState<T>> {
    if p0 > truncation.max_fock {
        return Err(Error::LevelOutOfRange {
            level: p0,
            max_fock: truncation.max_fock,
        });
    }
    let mut s = SpinorFockState::zeros(truncation);
    let idx = match spin {
        Spin::Excited => truncation.e_index(p0),
        Spin::Ground => truncation.g_index(p0),
    };
    s.amps[idx] = cone();
    Ok(s)
}

/// Coherent product state truncated at `P`.
///
/// Poisson amplitudes come from the recurrence `c_{p+1} = c_p alpha / sqrt(p+1)`
/// with `c_0 = exp(-alpha^2 / 2)`. Fails when the discarded mass beyond `P`
/// exceeds `spec.max_tail`.
pub fn coherent_state<T: Scalar>(
    spec: CoherentSpec<T>,
    truncation: Truncation,
) -> Result<SpinorFockState<T>> {
    let CoherentSpec {
        alpha,
        theta,
        max_tail,
    } = spec;
    if !alpha.is_finite() || alpha < T::zero() {
        return Err(Error::InvalidConfig(
            "coherent amplitude alpha must be finite and >= 0".into(),
        ));
    }
    if !theta.is_finite() || theta < T::zero() || theta >= T::TAU() {
        return Err(Error::InvalidConfig(
            "mixing angle theta must lie in [0, 2 pi)".into(),
        ));
    }
    if !(max_tail > T::zero()) {
        return Err(Error::InvalidConfig(
            "tail tolerance must be positive".into(),
        ));
    }
    let c0 = (-alpha * alpha * T::lit(0.5)).exp();
    if c0 == T::zero() {
        return Err(Error::InvalidConfig(
            "coherent amplitude too large: exp(-alpha^2/2) underflows".into(),
        ));
    }

    let top = truncation.max_fock;
    let mut amps = Vec::with_capacity(top + 1);
    let mut c = c0;
    for p in 0..=top {
        amps.push(c);
        c = c * alpha / T::from_usize(p + 1).unwrap().sqrt();
    }

    let (tail, required) = tail_beyond(c, alpha, top + 1, max_tail);
    if tail > max_tail {
        return Err(Error::TailMassTooLarge {
            tail: tail.as_f64(),
            tol: max_tail.as_f64(),
            max_fock: top,
            required,
        });
    }

    let (sin, cos) = theta.sin_cos();
    let mut s = SpinorFockState::zeros(truncation);
    for (p, &c) in amps.iter().enumerate() {
        s.amps[truncation.e_index(p)] = creal(c * sin);
        s.amps[truncation.g_index(p)] = creal(c * cos);
    }
    Ok(s)
}

/// Mass `sum_{p >= first} |c_p|^2` given `c_first`, plus the smallest
/// truncation whose tail is within `tol`.
fn tail_beyond<T: Scalar>(c_first: T, alpha: T, first: usize, tol: T) -> (T, usize) {
    let mut terms = Vec::new();
    let mut c = c_first;
    let mut p = first;
    // Past the Poisson peak the terms decay geometrically; stop once negligible.
    while c != T::zero() {
        let w = c * c;
        terms.push(w);
        let past_peak = T::from_usize(p).unwrap() > alpha * alpha;
        if past_peak && w < T::min_positive_value().max(T::epsilon() * T::epsilon() * tol) {
            break;
        }
        c = c * alpha / T::from_usize(p + 1).unwrap().sqrt();
        p += 1;
    }
    // suffix sums, smallest first
    let mut suffix = vec![T::zero(); terms.len() + 1];
    for k in (0..terms.len()).rev() {
        suffix[k] = suffix[k + 1] + terms[k];
    }
    let required = suffix
        .iter()
        .position(|&m| m <= tol)
        .map(|k| first + k - 1)
        .unwrap_or(first + terms.len());
    (suffix[0], required.max(first - 1))
}
