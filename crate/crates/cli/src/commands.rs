//! Subcommand implementations. Each returns data plus its CSV rendering so
//! the binary and the tests share one code path.

use std::fmt::Write as _;

use sbprop::cache::{CacheEntry, CacheStore};
use sbprop::fingerprint::fingerprint;
use sbprop::{
    build_step_propagator, build_transfer_matrix, certified_step, diagonalize, evolve, gs_scan,
    level_differences, teee_evolve, Error, GsScan64, PropagatorConfig64, StepPropagator64,
    Trajectory64, TransferMatrix64,
};

use crate::config::{RunConfig, StepSize};
use crate::CliError;

/// Largest per-time difference `compare` accepts.
pub const COMPARE_TOL: f64 = 1e-6;

pub const EVOLVE_HEADER: &str = "t,norm2,n_raw,n_norm,sz_raw,sz_norm,energy_re,C_exp,parity";

pub struct EvolveRun {
    pub q: TransferMatrix64,
    pub propagator: StepPropagator64,
    pub config: PropagatorConfig64,
    pub trajectory: Trajectory64,
    pub cache_hit: bool,
    /// Non-fatal conditions worth reporting (cache trouble).
    pub warnings: Vec<String>,
}

/// Transfer matrix and propagator settings implied by a run config.
pub fn plan(cfg: &RunConfig) -> Result<(TransferMatrix64, PropagatorConfig64), CliError> {
    let q = build_transfer_matrix(cfg.params(), cfg.truncation())?;
    if !(cfg.t_max.is_finite() && cfg.t_max >= 0.0) {
        return Err(CliError::Config(format!(
            "t_max must be finite and >= 0, got {}",
            cfg.t_max
        )));
    }
    let dt = match cfg.dt {
        StepSize::Auto => certified_step(&q, cfg.order, cfg.tol),
        StepSize::Fixed(dt) => dt,
    };
    if !(dt.is_finite() && dt > 0.0) {
        return Err(CliError::Config(format!(
            "dt must be finite and > 0, got {dt}"
        )));
    }
    let steps = (cfg.t_max / dt).round() as usize;
    let pc = PropagatorConfig64::new(dt, cfg.order, steps)
        .with_tol(cfg.tol)
        .with_snapshot_stride(cfg.snapshot_stride);
    pc.validate()?;
    Ok((q, pc))
}

/// Fetch the step propagator from `cache` when possible, building and
/// storing it otherwise.
pub fn step_propagator(
    q: &TransferMatrix64,
    pc: &PropagatorConfig64,
    cache: Option<&CacheStore>,
    warnings: &mut Vec<String>,
) -> Result<(StepPropagator64, bool), CliError> {
    let Some(store) = cache else {
        return Ok((build_step_propagator(q, pc)?, false));
    };
    let fp = fingerprint(q.params(), q.truncation(), pc.dt, pc.order);
    match store.get(fp) {
        Ok(Some(entry)) if entry.dim() == q.dim() && entry.last_term_norm <= pc.tol => {
            return Ok((entry.into_propagator()?, true));
        }
        Ok(_) => {}
        Err(e) => warnings.push(format!("ignoring cache entry {fp:016x}: {e}")),
    }
    let m = build_step_propagator(q, pc)?;
    if let Err(e) = store.put(&CacheEntry::from_propagator(&m)) {
        warnings.push(format!("could not store propagator {fp:016x}: {e}"));
    }
    Ok((m, false))
}

pub fn run_evolve(cfg: &RunConfig, cache: Option<&CacheStore>) -> Result<EvolveRun, CliError> {
    let (q, pc) = plan(cfg)?;
    let s0 = cfg.initial_state()?;
    let mut warnings = Vec::new();
    let (propagator, cache_hit) = step_propagator(&q, &pc, cache, &mut warnings)?;
    let trajectory = evolve(&s0, &propagator, &pc, &q)?;
    Ok(EvolveRun {
        q,
        propagator,
        config: pc,
        trajectory,
        cache_hit,
        warnings,
    })
}

pub fn evolve_csv(traj: &Trajectory64) -> String {
    let mut out = String::with_capacity(64 * (traj.len() + 1));
    out.push_str(EVOLVE_HEADER);
    out.push('\n');
    for r in &traj.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            r.norm2,
            r.n_raw,
            r.n_norm,
            r.sz_raw,
            r.sz_norm,
            r.energy_re,
            r.excitation,
            r.parity
        );
    }
    out
}

/// Stored states as `step,t,index,re,im`.
pub fn snapshots_csv(traj: &Trajectory64) -> String {
    let mut out = String::from("step,t,index,re,im\n");
    for snap in &traj.snapshots {
        for (i, z) in snap.state.amps().iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{}", snap.step, snap.t, i, z.re, z.im);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<(f64, f64, f64)>,
    pub max_dn: f64,
    pub max_dsz: f64,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        self.max_dn < COMPARE_TOL && self.max_dsz < COMPARE_TOL
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,dn,dsz\n");
        for (t, dn, dsz) in &self.rows {
            let _ = writeln!(out, "{t},{dn},{dsz}");
        }
        let _ = writeln!(out, "max_dn={},max_dsz={}", self.max_dn, self.max_dsz);
        out
    }
}

/// Taylor and eigenvector evolution on the same time grid.
pub fn run_compare(cfg: &RunConfig, cache: Option<&CacheStore>) -> Result<CompareReport, CliError> {
    if !cfg.params().is_hermitian() {
        return Err(CliError::Config(
            "compare needs a Hermitian model (beta = gamma = 0); eigenvector evolution is unavailable".into(),
        ));
    }
    let run = run_evolve(cfg, cache)?;
    let times: Vec<f64> = run.trajectory.times().collect();
    let s0 = cfg.initial_state()?;
    let reference = teee_evolve(&s0, &diagonalize(&run.q)?, &times)?;
    let rows: Vec<(f64, f64, f64)> = run
        .trajectory
        .records
        .iter()
        .zip(&reference.records)
        .map(|(a, b)| (a.t, (a.n_raw - b.n_raw).abs(), (a.sz_raw - b.sz_raw).abs()))
        .collect();
    let max_dn = rows.iter().fold(0.0f64, |m, r| m.max(r.1));
    let max_dsz = rows.iter().fold(0.0f64, |m, r| m.max(r.2));
    if !(max_dn.is_finite() && max_dsz.is_finite()) {
        return Err(CliError::Numerical(
            "non-finite difference between methods".into(),
        ));
    }
    Ok(CompareReport {
        rows,
        max_dn,
        max_dsz,
    })
}

/// `(j, E_j, E_j - E_0)` for `j = 0..=levels`.
pub fn run_spectrum(cfg: &RunConfig) -> Result<Vec<(usize, f64, f64)>, CliError> {
    let q = build_transfer_matrix(cfg.params(), cfg.truncation())?;
    let dec = diagonalize(&q)?;
    let deltas = level_differences(&dec, cfg.levels)?;
    let mut rows = vec![(0, dec.energies[0], 0.0)];
    rows.extend(
        deltas
            .iter()
            .enumerate()
            .map(|(k, d)| (k + 1, dec.energies[k + 1], *d)),
    );
    Ok(rows)
}

pub fn spectrum_csv(rows: &[(usize, f64, f64)]) -> String {
    let mut out = String::from("j,energy,delta\n");
    for (j, e, d) in rows {
        let _ = writeln!(out, "{j},{e},{d}");
    }
    out
}

pub fn run_gs_scan(cfg: &RunConfig) -> Result<GsScan64, CliError> {
    Ok(gs_scan(cfg.params(), &cfg.scan_values())?)
}

pub fn gs_scan_csv(scan: &GsScan64) -> String {
    let mut out = String::from("P,E0\n");
    for (p, e) in scan.p_values.iter().zip(&scan.e0_values) {
        let _ = writeln!(out, "{p},{e}");
    }
    let _ = writeln!(out, "classification={}", scan.classification);
    out
}

pub fn cache_list_csv(store: &CacheStore) -> Result<String, CliError> {
    let mut out = String::from("fingerprint,dim,order,dt,last_term_norm,created_at\n");
    for e in store.list()? {
        let _ = writeln!(
            out,
            "{:016x},{},{},{},{:e},{}",
            e.fingerprint, e.dim, e.order, e.dt, e.last_term_norm, e.created_at
        );
    }
    Ok(out)
}

pub fn cache_info(store: &CacheStore, fp: Option<u64>) -> Result<String, CliError> {
    let mut out = String::new();
    match fp {
        None => {
            let entries = store.list()?;
            let _ = writeln!(out, "root={}", store.root().display());
            let _ = writeln!(out, "entries={}", entries.len());
        }
        Some(fp) => {
            let entry = store
                .get(fp)?
                .ok_or_else(|| CliError::Config(format!("no cache entry {fp:016x}")))?;
            let e = entry.info();
            let _ = writeln!(out, "path={}", store.path_for(fp).display());
            let _ = writeln!(out, "fingerprint={:016x}", e.fingerprint);
            let _ = writeln!(out, "dim={}", e.dim);
            let _ = writeln!(out, "order={}", e.order);
            let _ = writeln!(out, "dt={}", e.dt);
            let _ = writeln!(out, "last_term_norm={:e}", e.last_term_norm);
            let _ = writeln!(out, "created_at={}", e.created_at);
        }
    }
    Ok(out)
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotConverged { .. }
            | Error::NonFinite { .. }
            | Error::ZeroNorm
            | Error::EigenAccuracy(_) => CliError::Numerical(e.to_string()),
            Error::Io(_) | Error::CacheCorrupt { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
