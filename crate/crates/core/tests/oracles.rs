//! Checks against oracles that do not share code paths with the library:
//! operator-algebra construction of the Hamiltonian, closed-form two-level
//! dynamics, and cross-method agreement.

#![allow(clippy::needless_range_loop)]

use sbprop::spectral::diagonalize_symmetric;
use sbprop::*;

/// Hamiltonian assembled from truncated ladder and Pauli operators as
/// Kronecker products, in interleaved order `|0,e>, |0,g>, |1,e>, ..`.
fn interleaved_from_operators(params: &ModelParams64, p_max: usize) -> Vec<Vec<f64>> {
    let nf = p_max + 1;
    let mut a = vec![vec![0.0; nf]; nf];
    for p in 1..nf {
        a[p - 1][p] = (p as f64).sqrt();
    }
    let mm = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        let n = x.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| x[i][k] * y[k][j]).sum())
                    .collect()
            })
            .collect()
    };
    let tr = |x: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        let n = x.len();
        (0..n).map(|i| (0..n).map(|j| x[j][i]).collect()).collect()
    };
    let adag = tr(&a);
    let num = mm(&adag, &a);
    let sqrt_n: Vec<Vec<f64>> = (0..nf)
        .map(|i| {
            (0..nf)
                .map(|j| if i == j { num[i][i].sqrt() } else { 0.0 })
                .collect()
        })
        .collect();
    let lower = mm(&a, &sqrt_n); // a sqrt(n)
    let raise = mm(&sqrt_n, &adag); // sqrt(n) a^dag

    // spin basis (e, g)
    let sz = [[1.0, 0.0], [0.0, -1.0]];
    let sp = [[0.0, 1.0], [0.0, 0.0]]; // |e><g|
    let sm = [[0.0, 0.0], [1.0, 0.0]];
    let id2 = [[1.0, 0.0], [0.0, 1.0]];
    let eye: Vec<Vec<f64>> = (0..nf)
        .map(|i| (0..nf).map(|j| (i == j) as u8 as f64).collect())
        .collect();

    let dim = 2 * nf;
    let mut h = vec![vec![0.0; dim]; dim];
    let mut add = |f: &Vec<Vec<f64>>, s: &[[f64; 2]; 2], c: f64| {
        for p in 0..nf {
            for q in 0..nf {
                for x in 0..2 {
                    for y in 0..2 {
                        h[2 * p + x][2 * q + y] += c * f[p][q] * s[x][y];
                    }
                }
            }
        }
    };
    add(&num, &id2, params.omega_f);
    add(&eye, &sz, params.omega_0 / 2.0);
    add(&lower, &sp, params.g_minus);
    add(&raise, &sm, params.g_minus);
    add(&lower, &sm, params.g_plus);
    add(&raise, &sp, params.g_plus);
    h
}

#[test]
fn block_builder_matches_operator_algebra() {
    let cases = [
        ModelParams::new(1.0, 1.0, 0.1, 0.0),
        ModelParams::new(1.0, 0.75, 0.4, 0.4),
        ModelParams::new(1.3, -0.2, 0.7, 0.25),
        ModelParams::new(1.0, 1.0, 2.0, 2.0),
    ];
    for params in cases {
        for p_max in 0..7 {
            let t = Truncation::new(p_max);
            let q = build_transfer_matrix(params, t).unwrap();
            let h = interleaved_from_operators(&params, p_max);
            let perm = |k: usize| {
                if k.is_multiple_of(2) {
                    t.e_index(k / 2)
                } else {
                    t.g_index(k / 2)
                }
            };
            for i in 0..q.dim() {
                for j in 0..q.dim() {
                    let qij = q.matrix()[[perm(i), perm(j)]];
                    assert!((qij.re - h[i][j]).abs() < 1e-12, "P={p_max} ({i},{j})");
                    assert_eq!(qij.im, 0.0);
                    if (i as isize - j as isize).abs() > 3 {
                        assert_eq!(h[i][j], 0.0);
                        assert_eq!(qij.re, 0.0);
                    }
                }
            }
        }
    }
}

fn rabi_setup(p_max: usize) -> (TransferMatrix64, State64) {
    let t = Truncation::new(p_max);
    let q = build_transfer_matrix(ModelParams::new(1.0, 1.0, 0.1, 0.0), t).unwrap();
    (q, fock_state(0, Spin::Excited, t).unwrap())
}

#[test]
fn taylor_rabi_oscillation() {
    let (q, s0) = rabi_setup(5);
    let cfg = PropagatorConfig::new(0.1, 30, 1000);
    let m = build_step_propagator(&q, &cfg).unwrap();
    let traj = evolve(&s0, &m, &cfg, &q).unwrap();
    for r in &traj.records {
        assert!((r.sz_raw - (0.2 * r.t).cos()).abs() < 1e-8, "t={}", r.t);
        assert!((r.n_raw - (0.1 * r.t).sin().powi(2)).abs() < 1e-8);
    }
}

#[test]
fn single_precision_rabi() {
    let t = Truncation::new(3);
    let q: TransferMatrix32 =
        build_transfer_matrix(ModelParams::new(1.0f32, 1.0, 0.1, 0.0), t).unwrap();
    let cfg = PropagatorConfig::new(0.1f32, 20, 500).with_tol(1e-6);
    let m: StepPropagator32 = build_step_propagator(&q, &cfg).unwrap();
    let s0: State32 = fock_state(0, Spin::Excited, t).unwrap();
    let traj = evolve(&s0, &m, &cfg, &q).unwrap();
    for r in &traj.records {
        assert!((r.sz_raw - (0.2 * r.t).cos()).abs() < 1e-4, "t={}", r.t);
    }
    let dec = diagonalize(&q).unwrap();
    assert!((dec.energies[0] + 0.5).abs() < 1e-6);
}

#[test]
fn cross_method_detuned_counter_rotating() {
    let t = Truncation::new(50);
    let q: TransferMatrix64 =
        build_transfer_matrix(ModelParams::new(1.0, 0.75, 0.4, 0.4), t).unwrap();
    let dt = suggest_step(&q, 30, 1e-12);
    let cfg = PropagatorConfig::new(dt, 30, (60.0 / dt).round() as usize);
    let m = build_step_propagator(&q, &cfg).unwrap();
    let s0 = fock_state(0, Spin::Excited, t).unwrap();
    let taylor = evolve(&s0, &m, &cfg, &q).unwrap();
    let times: Vec<f64> = taylor.times().collect();
    let teee = teee_evolve(&s0, &diagonalize(&q).unwrap(), &times).unwrap();
    assert!(taylor.max_abs_diff(&teee, |r| r.n_raw) < 1e-6);
    assert!(taylor.max_abs_diff(&teee, |r| r.sz_raw) < 1e-6);
}

#[test]
fn completeness_of_expansion() {
    let t = Truncation::new(30);
    let q = build_transfer_matrix(ModelParams::new(1.0, 0.9, 0.3, 0.2), t).unwrap();
    let dec = diagonalize(&q).unwrap();
    let s0 = coherent_state(CoherentSpec::new(2.0, 0.9), t).unwrap();
    let total: f64 = (0..dec.dim())
        .map(|j| {
            let f: C64 = (0..dec.dim())
                .map(|i| s0.amps()[i] * dec.vectors[[i, j]])
                .sum();
            f.norm_sqr()
        })
        .sum();
    assert!((total - s0.norm_squared()).abs() < 1e-10);
}

#[test]
fn degenerate_basis_choice_does_not_change_observables() {
    // with no coupling every |p,e>/|p+1,g> pair at resonance is degenerate
    let p_max = 12;
    let t = Truncation::new(p_max);
    let q = build_transfer_matrix(ModelParams::new(1.0, 1.0, 0.0, 0.0), t).unwrap();
    let dim = q.dim();
    let reference = diagonalize(&q).unwrap();

    // diagonalize a reversed-basis copy, then map the eigenvectors back
    let perm: Vec<usize> = (0..dim).rev().collect();
    let mut permuted = ndarray::Array2::<f64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            permuted[[i, j]] = q.matrix()[[perm[i], perm[j]]].re;
        }
    }
    let mut other = diagonalize_symmetric(&permuted).unwrap();
    let mut vectors = ndarray::Array2::<f64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            vectors[[perm[i], j]] = other.vectors[[i, j]];
        }
    }
    other.vectors = vectors;

    let s0 = coherent_state(CoherentSpec::new(1.2, 0.6).with_max_tail(1e-6), t).unwrap();
    let times: Vec<f64> = (0..80).map(|k| k as f64 * 0.37).collect();
    let a = teee_evolve(&s0, &reference, &times).unwrap();
    let b = teee_evolve(&s0, &other, &times).unwrap();
    for f in [
        |r: &Record64| r.n_raw,
        |r: &Record64| r.sz_raw,
        |r: &Record64| r.energy_re,
        |r: &Record64| r.parity,
    ] {
        assert!(a.max_abs_diff(&b, f) < 1e-12);
    }
}

#[test]
fn step_composition() {
    let t = Truncation::new(20);
    let q: TransferMatrix64 =
        build_transfer_matrix(ModelParams::new(1.0, 0.75, 0.4, 0.4), t).unwrap();
    let dt = suggest_step(&q, 30, 1e-12);
    let k = 200;
    let coarse = PropagatorConfig::new(dt, 30, k);
    let fine = PropagatorConfig::new(dt / 2.0, 30, 2 * k);
    let mc = build_step_propagator(&q, &coarse).unwrap();
    let mf = build_step_propagator(&q, &fine).unwrap();
    let s0 = fock_state(0, Spin::Excited, t).unwrap();
    let a = evolve(&s0, &mc, &coarse, &q).unwrap();
    let b = evolve(&s0, &mf, &fine, &q).unwrap();
    let bound = 10.0 * 1e-12 * k as f64;
    for (i, ra) in a.records.iter().enumerate() {
        let rb = &b.records[2 * i];
        assert_eq!(ra.t, rb.t);
        assert!((ra.n_raw - rb.n_raw).abs() < bound);
        assert!((ra.sz_raw - rb.sz_raw).abs() < bound);
    }
}

#[test]
fn dissipative_norm_is_monotone() {
    let t = Truncation::new(30);
    let params = ModelParams::new(1.0, 0.75, 0.4, 0.4).with_dissipation(0.01, 0.01);
    let q = build_transfer_matrix(params, t).unwrap();
    let dt = suggest_step(&q, 30, 1e-12);
    let cfg = PropagatorConfig::new(dt, 30, (50.0 / dt) as usize);
    let m = build_step_propagator(&q, &cfg).unwrap();
    let s0 = coherent_state(CoherentSpec::new(1.0, 0.4).with_max_tail(1e-9), t).unwrap();
    let traj = evolve(&s0, &m, &cfg, &q).unwrap();
    for w in traj.records.windows(2) {
        assert!(w[1].norm2 <= w[0].norm2 + 1e-12);
    }
    assert!(traj.records.last().unwrap().norm2 < 0.9);
}
