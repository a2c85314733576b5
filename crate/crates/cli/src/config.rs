//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment. Keys given with `--set` are
//! applied after the file. Unknown keys are errors.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sbprop::{CoherentSpec64, ModelParams64, Spin, State64, Truncation};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitKind {
    Coherent,
    Fock,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub omega_f: f64,
    pub omega_0: f64,
    pub g_minus: f64,
    pub g_plus: f64,
    pub beta: f64,
    pub gamma: f64,
    pub max_fock: usize,
    pub order: usize,
    pub dt: StepSize,
    pub t_max: f64,
    pub tol: f64,
    pub init: InitKind,
    pub alpha: f64,
    pub theta: f64,
    pub p0: usize,
    pub spin: Spin,
    pub tail_tol: f64,
    pub snapshot_stride: usize,
    pub levels: usize,
    pub p_values: Vec<usize>,
    pub normalize: bool,
    pub out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            omega_f: 1.0,
            omega_0: 1.0,
            g_minus: 0.0,
            g_plus: 0.0,
            beta: 0.0,
            gamma: 0.0,
            max_fock: 10,
            order: sbprop::taylor::DEFAULT_ORDER,
            dt: StepSize::Auto,
            t_max: 10.0,
            tol: sbprop::taylor::DEFAULT_TOL,
            init: InitKind::Fock,
            alpha: 0.0,
            theta: 0.0,
            p0: 0,
            spin: Spin::Excited,
            tail_tol: 1e-12,
            snapshot_stride: 0,
            levels: 10,
            p_values: Vec::new(),
            normalize: false,
            out: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "omega_f",
    "omega_0",
    "g_minus",
    "g_plus",
    "beta",
    "gamma",
    "P",
    "N",
    "dt",
    "t_max",
    "tol",
    "init",
    "alpha",
    "theta",
    "p0",
    "spin",
    "tail_tol",
    "snapshot_stride",
    "levels",
    "p_values",
    "normalize",
    "out",
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), CliError> {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {kv:?}")))?;
        self.set(key.trim(), value.trim())
            .map_err(|e| CliError::Config(format!("--set {kv}: {e}")))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "omega_f" => self.omega_f = real(value)?,
            "omega_0" => self.omega_0 = real(value)?,
            "g_minus" => self.g_minus = real(value)?,
            "g_plus" => self.g_plus = real(value)?,
            "beta" => self.beta = real(value)?,
            "gamma" => self.gamma = real(value)?,
            "P" => self.max_fock = int(value)?,
            "N" => self.order = int(value)?,
            "dt" => {
                self.dt = if value.eq_ignore_ascii_case("auto") {
                    StepSize::Auto
                } else {
                    StepSize::Fixed(real(value)?)
                }
            }
            "t_max" => self.t_max = real(value)?,
            "tol" => self.tol = real(value)?,
            "init" => {
                self.init = match value {
                    "coherent" => InitKind::Coherent,
                    "fock" => InitKind::Fock,
                    _ => return Err(format!("init must be coherent or fock, got {value:?}")),
                }
            }
            "alpha" => self.alpha = real(value)?,
            "theta" => self.theta = real(value)?,
            "p0" => self.p0 = int(value)?,
            "spin" => {
                self.spin = match value {
                    "e" => Spin::Excited,
                    "g" => Spin::Ground,
                    _ => return Err(format!("spin must be e or g, got {value:?}")),
                }
            }
            "tail_tol" => self.tail_tol = real(value)?,
            "snapshot_stride" => self.snapshot_stride = int(value)?,
            "levels" => self.levels = int(value)?,
            "p_values" => self.p_values = p_list(value)?,
            "normalize" => {
                self.normalize = value
                    .parse()
                    .map_err(|_| format!("expected true or false, got {value:?}"))?
            }
            "out" => self.out = (!value.is_empty()).then(|| value.to_string()),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn params(&self) -> ModelParams64 {
        ModelParams64::new(self.omega_f, self.omega_0, self.g_minus, self.g_plus)
            .with_dissipation(self.beta, self.gamma)
    }

    pub fn truncation(&self) -> Truncation {
        Truncation::new(self.max_fock)
    }

    pub fn initial_state(&self) -> Result<State64, sbprop::Error> {
        let t = self.truncation();
        let s = match self.init {
            InitKind::Coherent => sbprop::coherent_state(
                CoherentSpec64::new(self.alpha, self.theta).with_max_tail(self.tail_tol),
                t,
            )?,
            InitKind::Fock => sbprop::fock_state(self.p0, self.spin, t)?,
        };
        if self.normalize {
            s.normalized()
        } else {
            Ok(s)
        }
    }

    /// Truncations for `gs-scan`; defaults to `2..=P`.
    pub fn scan_values(&self) -> Vec<usize> {
        if self.p_values.is_empty() {
            (2..=self.max_fock.max(2)).collect()
        } else {
            self.p_values.clone()
        }
    }
}

impl fmt::Display for RunConfig {
    /// Canonical text form, parseable by [`RunConfig::parse`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "omega_f = {}", self.omega_f)?;
        writeln!(f, "omega_0 = {}", self.omega_0)?;
        writeln!(f, "g_minus = {}", self.g_minus)?;
        writeln!(f, "g_plus = {}", self.g_plus)?;
        writeln!(f, "beta = {}", self.beta)?;
        writeln!(f, "gamma = {}", self.gamma)?;
        writeln!(f, "P = {}", self.max_fock)?;
        writeln!(f, "N = {}", self.order)?;
        match self.dt {
            StepSize::Auto => writeln!(f, "dt = auto")?,
            StepSize::Fixed(dt) => writeln!(f, "dt = {dt}")?,
        }
        writeln!(f, "t_max = {}", self.t_max)?;
        writeln!(f, "tol = {}", self.tol)?;
        match self.init {
            InitKind::Coherent => writeln!(f, "init = coherent")?,
            InitKind::Fock => writeln!(f, "init = fock")?,
        }
        writeln!(f, "alpha = {}", self.alpha)?;
        writeln!(f, "theta = {}", self.theta)?;
        writeln!(f, "p0 = {}", self.p0)?;
        writeln!(
            f,
            "spin = {}",
            if self.spin == Spin::Excited { "e" } else { "g" }
        )?;
        writeln!(f, "tail_tol = {}", self.tail_tol)?;
        writeln!(f, "snapshot_stride = {}", self.snapshot_stride)?;
        writeln!(f, "levels = {}", self.levels)?;
        let ps: Vec<String> = self.p_values.iter().map(|p| p.to_string()).collect();
        writeln!(f, "p_values = {}", ps.join(","))?;
        writeln!(f, "normalize = {}", self.normalize)?;
        writeln!(f, "out = {}", self.out.as_deref().unwrap_or(""))
    }
}

fn int<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse()
        .map_err(|_| format!("expected a non-negative integer, got {s:?}"))
}

/// A real number, optionally written in terms of pi: `pi`, `pi/4`, `3pi/2`,
/// `0.5*pi`, `-pi`.
pub fn real(s: &str) -> Result<f64, String> {
    let bad = || format!("expected a number, got {s:?}");
    let t = s.trim();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let lower = t.to_ascii_lowercase();
    let pos = lower.find("pi").ok_or_else(bad)?;
    let (head, rest) = (&lower[..pos], &lower[pos + 2..]);
    let head = head.trim().trim_end_matches('*').trim();
    let coef = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| bad())?,
    };
    let rest = rest.trim();
    let div = if rest.is_empty() {
        1.0
    } else {
        let d = rest.strip_prefix('/').ok_or_else(bad)?.trim();
        d.parse::<f64>().map_err(|_| bad())?
    };
    Ok(coef * std::f64::consts::PI / div)
}

/// `a..=b`, `a..=b:step`, or a comma list.
pub fn p_list(s: &str) -> Result<Vec<usize>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if let Some((a, rest)) = s.split_once("..=") {
        let (b, step) = match rest.split_once(':') {
            Some((b, st)) => (b, int::<usize>(st.trim())?),
            None => (rest, 1),
        };
        let (a, b): (usize, usize) = (int(a.trim())?, int(b.trim())?);
        if step == 0 || a > b {
            return Err(format!("empty or invalid range {s:?}"));
        }
        return Ok((a..=b).step_by(step).collect());
    }
    s.split(',').map(|x| int(x.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_forms() {
        let pi = std::f64::consts::PI;
        assert_eq!(real("pi/4").unwrap(), pi / 4.0);
        assert_eq!(real("3pi/2").unwrap(), 3.0 * pi / 2.0);
        assert_eq!(real("0.5*pi").unwrap(), 0.5 * pi);
        assert_eq!(real("-pi").unwrap(), -pi);
        assert_eq!(real("2.5e-3").unwrap(), 2.5e-3);
        assert!(real("pie").is_err());
        assert!(real("x").is_err());
    }

    #[test]
    fn p_lists() {
        assert_eq!(p_list("2..=5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(p_list("10..=30:10").unwrap(), vec![10, 20, 30]);
        assert_eq!(p_list("4, 8,16").unwrap(), vec![4, 8, 16]);
        assert!(p_list("5..=2").is_err());
    }

    #[test]
    fn comments_overrides_and_unknown_keys() {
        let mut cfg =
            RunConfig::parse("# header\nomega_0 = 0.75  # detuned\nP=50\ndt = auto\n").unwrap();
        assert_eq!(cfg.omega_0, 0.75);
        assert_eq!(cfg.max_fock, 50);
        cfg.apply_override("P=60").unwrap();
        assert_eq!(cfg.max_fock, 60);
        assert!(RunConfig::parse("omega = 1").is_err());
        assert!(RunConfig::parse("P").is_err());
        assert!(cfg.apply_override("spin=x").is_err());
    }

    #[test]
    fn display_round_trips() {
        let mut cfg = RunConfig::parse(
            "init=coherent\nalpha=5\ntheta=pi/4\np_values=2..=6\ndt=0.05\nout=a.csv",
        )
        .unwrap();
        cfg.normalize = true;
        assert_eq!(RunConfig::parse(&cfg.to_string()).unwrap(), cfg);
    }
}
