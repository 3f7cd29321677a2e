//! Run configuration: a line-oriented `key = value` format with `[section]`
//! headers, full validation with line numbers and key paths, canonical
//! serialization, and a hash over the physics-relevant keys used to guard
//! checkpoint resumes.

use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

use crate::dynamics::SchemeParams;
use crate::ensemble::EnsembleConfig;
use crate::error::{Result, SchnsError};
use crate::grid::Grid;
use crate::init::InitialCondition;
use crate::noise::NoiseParams;
use crate::potentials::{BoundaryKind, BulkKind, Potentials};
use crate::regularization::CutoffParams;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub enabled: bool,
    pub params: NoiseParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub bulk: BulkKind,
    pub boundary: BoundaryKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub steps: usize,
    pub record_every: usize,
    pub checkpoint_every: usize,
    pub out_dir: String,
}

/// Fully validated configuration of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub scheme: SchemeParams,
    pub noise: NoiseSpec,
    pub potential: PotentialSpec,
    pub init: InitialCondition,
    pub run: RunSpec,
    pub n_paths: usize,
    pub base_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec {
                nx: 64,
                ny: 64,
                lx: 1.0,
                ly: 1.0,
            },
            scheme: SchemeParams::default(),
            noise: NoiseSpec {
                enabled: true,
                params: NoiseParams::default(),
            },
            potential: PotentialSpec {
                bulk: BulkKind::DoubleWell,
                boundary: BoundaryKind::Linear,
            },
            init: InitialCondition::default(),
            run: RunSpec {
                steps: 1000,
                record_every: 100,
                checkpoint_every: 0,
                out_dir: "out".into(),
            },
            n_paths: 1,
            base_seed: 42,
        }
    }
}

impl RunConfig {
    pub fn build_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)
    }

    pub fn build_potentials(&self) -> Result<Potentials> {
        Potentials::new(self.potential.bulk.clone(), self.potential.boundary.clone())
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            n_paths: self.n_paths,
            base_seed: self.base_seed,
            record_every: self.run.record_every,
            steps: self.run.steps,
        }
    }

    /// SHA-256 over the canonical serialization of the physics sections
    /// (grid, scheme, noise, potential, init); output knobs are excluded so
    /// moving directories does not invalidate checkpoints.
    pub fn physics_hash(&self) -> [u8; 32] {
        let text = self.serialize_physics();
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        hasher.finalize().into()
    }

    fn serialize_physics(&self) -> String {
        let mut s = String::new();
        self.write_grid(&mut s);
        self.write_scheme(&mut s);
        self.write_noise(&mut s);
        self.write_potential(&mut s);
        self.write_init(&mut s);
        s
    }

    pub fn serialize(&self) -> String {
        let mut s = self.serialize_physics();
        s.push_str("[run]\n");
        s.push_str(&format!("steps = {}\n", self.run.steps));
        s.push_str(&format!("record_every = {}\n", self.run.record_every));
        s.push_str(&format!("checkpoint_every = {}\n", self.run.checkpoint_every));
        s.push_str(&format!("out_dir = {}\n", self.run.out_dir));
        s.push_str("[ensemble]\n");
        s.push_str(&format!("n_paths = {}\n", self.n_paths));
        s.push_str(&format!("base_seed = {}\n", self.base_seed));
        s
    }

    fn write_grid(&self, s: &mut String) {
        s.push_str("[grid]\n");
        s.push_str(&format!("nx = {}\n", self.grid.nx));
        s.push_str(&format!("ny = {}\n", self.grid.ny));
        s.push_str(&format!("lx = {:e}\n", self.grid.lx));
        s.push_str(&format!("ly = {:e}\n", self.grid.ly));
    }

    fn write_scheme(&self, s: &mut String) {
        s.push_str("[scheme]\n");
        s.push_str(&format!("dt = {:e}\n", self.scheme.dt));
        s.push_str(&format!("epsilon = {:e}\n", self.scheme.epsilon));
        s.push_str(&format!("delta = {:e}\n", self.scheme.delta));
        if self.scheme.cutoff.is_disabled() {
            s.push_str("cutoff_radius = inf\n");
        } else {
            s.push_str(&format!("cutoff_radius = {:e}\n", self.scheme.cutoff.r));
        }
        s.push_str(&format!("div_tol = {:e}\n", self.scheme.div_tol));
        s.push_str(&format!("trace_tol = {:e}\n", self.scheme.trace_tol));
        s.push_str(&format!("theta = {:e}\n", self.scheme.theta));
        s.push_str(&format!("blowup_guard = {:e}\n", self.scheme.blowup_guard));
    }

    fn write_noise(&self, s: &mut String) {
        s.push_str("[noise]\n");
        s.push_str(&format!("enabled = {}\n", self.noise.enabled));
        s.push_str(&format!("k_modes = {}\n", self.noise.params.k_modes));
        s.push_str(&format!("sigma0 = {:e}\n", self.noise.params.sigma0));
        s.push_str(&format!("gamma = {:e}\n", self.noise.params.gamma));
        s.push_str(&format!("alpha_u = {:e}\n", self.noise.params.alpha_u));
        s.push_str(&format!("alpha_phi = {:e}\n", self.noise.params.alpha_phi));
    }

    fn write_potential(&self, s: &mut String) {
        s.push_str("[potential]\n");
        match &self.potential.bulk {
            BulkKind::DoubleWell => s.push_str("bulk = double_well\n"),
            BulkKind::Poly(c) => {
                let list: Vec<String> = c.iter().map(|v| format!("{v:e}")).collect();
                s.push_str(&format!("bulk = poly:{}\n", list.join(",")));
            }
        }
        match self.potential.boundary {
            BoundaryKind::Linear => s.push_str("boundary = linear\n"),
            BoundaryKind::DoubleWell => s.push_str("boundary = double_well\n"),
        }
    }

    fn write_init(&self, s: &mut String) {
        s.push_str("[init]\n");
        match &self.init {
            InitialCondition::Zero => s.push_str("kind = zero\n"),
            InitialCondition::Spinodal { mean, amp } => {
                s.push_str("kind = spinodal\n");
                s.push_str(&format!("mean = {mean:e}\n"));
                s.push_str(&format!("amp = {amp:e}\n"));
            }
            InitialCondition::Stripe { amp, mx, my } => {
                s.push_str("kind = stripe\n");
                s.push_str(&format!("amp = {amp:e}\n"));
                s.push_str(&format!("mx = {mx}\n"));
                s.push_str(&format!("my = {my}\n"));
            }
            InitialCondition::ShearedStripe { u0, amp, mx, my } => {
                s.push_str("kind = sheared_stripe\n");
                s.push_str(&format!("u0 = {u0:e}\n"));
                s.push_str(&format!("amp = {amp:e}\n"));
                s.push_str(&format!("mx = {mx}\n"));
                s.push_str(&format!("my = {my}\n"));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

struct RawEntry {
    value: String,
    line: usize,
    used: bool,
}

struct RawConfig {
    entries: BTreeMap<(String, String), RawEntry>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(p) => &raw_line[..p],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or(SchnsError::Config {
                    line: line_no,
                    message: "malformed section header".into(),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(SchnsError::Config {
                line: line_no,
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(SchnsError::Config {
                    line: line_no,
                    message: "empty key".into(),
                });
            }
            if section.is_empty() {
                return Err(SchnsError::Config {
                    line: line_no,
                    message: format!("key `{key}` appears before any [section]"),
                });
            }
            let prev = entries.insert(
                (section.clone(), key.clone()),
                RawEntry {
                    value: value.trim().to_string(),
                    line: line_no,
                    used: false,
                },
            );
            if prev.is_some() {
                return Err(SchnsError::Config {
                    line: line_no,
                    message: format!("duplicate key `{section}.{key}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.entries
            .get_mut(&(section.to_string(), key.to_string()))
            .map(|e| {
                e.used = true;
                (e.value.clone(), e.line)
            })
    }

    fn reject_unknown(&self) -> Result<()> {
        for ((section, key), entry) in &self.entries {
            if !entry.used {
                return Err(SchnsError::Config {
                    line: entry.line,
                    message: format!("unknown key `{section}.{key}`"),
                });
            }
        }
        Ok(())
    }
}

fn parse_f64(raw: &str, path: &str, line: usize) -> Result<f64> {
    if raw.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    raw.parse::<f64>().map_err(|_| SchnsError::Config {
        line,
        message: format!("`{path}`: expected a number, got `{raw}`"),
    })
}

fn parse_usize(raw: &str, path: &str, line: usize) -> Result<usize> {
    raw.parse::<usize>().map_err(|_| SchnsError::Config {
        line,
        message: format!("`{path}`: expected a nonnegative integer, got `{raw}`"),
    })
}

fn parse_u64(raw: &str, path: &str, line: usize) -> Result<u64> {
    raw.parse::<u64>().map_err(|_| SchnsError::Config {
        line,
        message: format!("`{path}`: expected a 64-bit unsigned integer, got `{raw}`"),
    })
}

fn parse_u32(raw: &str, path: &str, line: usize) -> Result<u32> {
    raw.parse::<u32>().map_err(|_| SchnsError::Config {
        line,
        message: format!("`{path}`: expected an integer, got `{raw}`"),
    })
}

fn parse_bool(raw: &str, path: &str, line: usize) -> Result<bool> {
    match raw {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(SchnsError::Config {
            line,
            message: format!("`{path}`: expected true/false, got `{raw}`"),
        }),
    }
}

fn constraint(key: &str, message: impl Into<String>) -> SchnsError {
    SchnsError::Constraint {
        key: key.into(),
        message: message.into(),
    }
}

/// Parse and fully validate a configuration. Unknown keys are rejected with
/// their line number; constraint violations name the offending key path.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut raw = RawConfig::parse(text)?;
    let mut cfg = RunConfig::default();

    macro_rules! take_num {
        ($sec:literal, $key:literal, $parse:ident) => {
            raw.take($sec, $key)
                .map(|(v, line)| $parse(&v, concat!($sec, ".", $key), line))
                .transpose()?
        };
    }

    if let Some(v) = take_num!("grid", "nx", parse_usize) {
        cfg.grid.nx = v;
    }
    if let Some(v) = take_num!("grid", "ny", parse_usize) {
        cfg.grid.ny = v;
    }
    if let Some(v) = take_num!("grid", "lx", parse_f64) {
        cfg.grid.lx = v;
    }
    if let Some(v) = take_num!("grid", "ly", parse_f64) {
        cfg.grid.ly = v;
    }
    if cfg.grid.nx < 8 || cfg.grid.ny < 8 {
        return Err(constraint("grid.nx", "grid needs nx, ny >= 8"));
    }
    if !(cfg.grid.lx > 0.0 && cfg.grid.lx.is_finite()) || !(cfg.grid.ly > 0.0 && cfg.grid.ly.is_finite())
    {
        return Err(constraint("grid.lx", "extents must be positive and finite"));
    }
    let (hx, hy) = (
        cfg.grid.lx / cfg.grid.nx as f64,
        cfg.grid.ly / cfg.grid.ny as f64,
    );

    if let Some((v, line)) = raw.take("scheme", "dt") {
        cfg.scheme.dt = parse_f64(&v, "scheme.dt", line)?;
    }
    if !(cfg.scheme.dt > 0.0 && cfg.scheme.dt.is_finite()) {
        return Err(constraint("scheme.dt", "time step must be positive"));
    }
    if let Some((v, line)) = raw.take("scheme", "epsilon") {
        cfg.scheme.epsilon = if v.eq_ignore_ascii_case("auto") {
            2.0 * hx.max(hy)
        } else {
            parse_f64(&v, "scheme.epsilon", line)?
        };
    }
    if !(cfg.scheme.epsilon >= 0.0 && cfg.scheme.epsilon.is_finite()) {
        return Err(constraint("scheme.epsilon", "must be >= 0 (0 disables)"));
    }
    if let Some((v, line)) = raw.take("scheme", "delta") {
        cfg.scheme.delta = parse_f64(&v, "scheme.delta", line)?;
    }
    if !(cfg.scheme.delta >= 0.0 && cfg.scheme.delta.is_finite()) {
        return Err(constraint("scheme.delta", "must be >= 0"));
    }
    if let Some((v, line)) = raw.take("scheme", "cutoff_radius") {
        let r = parse_f64(&v, "scheme.cutoff_radius", line)?;
        cfg.scheme.cutoff =
            CutoffParams::new(r).map_err(|_| constraint("scheme.cutoff_radius", "must be positive (or inf)"))?;
    }
    if let Some((v, line)) = raw.take("scheme", "div_tol") {
        cfg.scheme.div_tol = parse_f64(&v, "scheme.div_tol", line)?;
    }
    if let Some((v, line)) = raw.take("scheme", "trace_tol") {
        cfg.scheme.trace_tol = parse_f64(&v, "scheme.trace_tol", line)?;
    }
    if !(cfg.scheme.div_tol > 0.0) || !(cfg.scheme.trace_tol > 0.0) {
        return Err(constraint("scheme.div_tol", "tolerances must be positive"));
    }
    if let Some((v, line)) = raw.take("scheme", "theta") {
        cfg.scheme.theta = parse_f64(&v, "scheme.theta", line)?;
    }
    if !(0.0..=1.0).contains(&cfg.scheme.theta) {
        return Err(constraint("scheme.theta", "must lie in [0, 1]"));
    }
    if let Some((v, line)) = raw.take("scheme", "blowup_guard") {
        cfg.scheme.blowup_guard = parse_f64(&v, "scheme.blowup_guard", line)?;
    }
    if !(cfg.scheme.blowup_guard > 0.0) {
        return Err(constraint("scheme.blowup_guard", "must be positive"));
    }

    if let Some((v, line)) = raw.take("noise", "enabled") {
        cfg.noise.enabled = parse_bool(&v, "noise.enabled", line)?;
    }
    if let Some(v) = take_num!("noise", "k_modes", parse_usize) {
        cfg.noise.params.k_modes = v;
    }
    if let Some(v) = take_num!("noise", "sigma0", parse_f64) {
        cfg.noise.params.sigma0 = v;
    }
    if let Some(v) = take_num!("noise", "gamma", parse_f64) {
        cfg.noise.params.gamma = v;
    }
    if let Some(v) = take_num!("noise", "alpha_u", parse_f64) {
        cfg.noise.params.alpha_u = v;
    }
    if let Some(v) = take_num!("noise", "alpha_phi", parse_f64) {
        cfg.noise.params.alpha_phi = v;
    }
    if cfg.noise.enabled {
        if cfg.noise.params.k_modes < 1 {
            return Err(constraint("noise.k_modes", "must be >= 1"));
        }
        if !(cfg.noise.params.sigma0 > 0.0) {
            return Err(constraint("noise.sigma0", "must be positive"));
        }
        if !(cfg.noise.params.gamma > 0.5) {
            return Err(constraint("noise.gamma", "must exceed 1/2"));
        }
    }

    if let Some((v, line)) = raw.take("potential", "bulk") {
        cfg.potential.bulk = if v == "double_well" {
            BulkKind::DoubleWell
        } else if let Some(list) = v.strip_prefix("poly:") {
            let coeffs: Result<Vec<f64>> = list
                .split(',')
                .map(|c| parse_f64(c.trim(), "potential.bulk", line))
                .collect();
            BulkKind::Poly(coeffs?)
        } else {
            return Err(SchnsError::Config {
                line,
                message: format!("`potential.bulk`: expected double_well or poly:<coeffs>, got `{v}`"),
            });
        };
    }
    if let Some((v, line)) = raw.take("potential", "boundary") {
        cfg.potential.boundary = match v.as_str() {
            "linear" => BoundaryKind::Linear,
            "double_well" => BoundaryKind::DoubleWell,
            _ => {
                return Err(SchnsError::Config {
                    line,
                    message: format!("`potential.boundary`: expected linear or double_well, got `{v}`"),
                })
            }
        };
    }
    Potentials::new(cfg.potential.bulk.clone(), cfg.potential.boundary.clone())
        .map_err(|e| constraint("potential.bulk", e.to_string()))?;

    let kind = raw.take("init", "kind").map(|(v, _)| v);
    let u0 = take_num!("init", "u0", parse_f64).unwrap_or(0.25);
    let amp = take_num!("init", "amp", parse_f64).unwrap_or(0.2);
    let mx = take_num!("init", "mx", parse_u32).unwrap_or(1);
    let my = take_num!("init", "my", parse_u32).unwrap_or(1);
    let ic_mean = take_num!("init", "mean", parse_f64).unwrap_or(0.0);
    cfg.init = match kind.as_deref() {
        None | Some("sheared_stripe") => InitialCondition::ShearedStripe { u0, amp, mx, my },
        Some("zero") => InitialCondition::Zero,
        Some("spinodal") => InitialCondition::Spinodal { mean: ic_mean, amp },
        Some("stripe") => InitialCondition::Stripe { amp, mx, my },
        Some(other) => {
            return Err(constraint(
                "init.kind",
                format!("unknown initial condition `{other}`"),
            ))
        }
    };

    if let Some(v) = take_num!("run", "steps", parse_usize) {
        cfg.run.steps = v;
    }
    if cfg.run.steps < 1 {
        return Err(constraint("run.steps", "must be >= 1"));
    }
    if let Some(v) = take_num!("run", "record_every", parse_usize) {
        cfg.run.record_every = v;
    }
    if cfg.run.record_every < 1 {
        return Err(constraint("run.record_every", "must be >= 1"));
    }
    if let Some(v) = take_num!("run", "checkpoint_every", parse_usize) {
        cfg.run.checkpoint_every = v;
    }
    if let Some((v, _)) = raw.take("run", "out_dir") {
        cfg.run.out_dir = v;
    }

    if let Some(v) = take_num!("ensemble", "n_paths", parse_usize) {
        cfg.n_paths = v;
    }
    if cfg.n_paths < 1 {
        return Err(constraint("ensemble.n_paths", "must be >= 1"));
    }
    if let Some(v) = take_num!("ensemble", "base_seed", parse_u64) {
        cfg.base_seed = v;
    }

    raw.reject_unknown()?;
    Ok(cfg)
}
