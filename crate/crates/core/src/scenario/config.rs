//! System configuration: file schema, defaults and validation.
//!
//! Every field of the file is optional. Powers are given in dBm in the file
//! and held in linear milliwatts in [`SystemConfig`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semantics::rho_lower_bound;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `10^(p/10)`: dBm to mW.
pub fn dbm_to_linear(p_dbm: f64) -> f64 {
    10f64.powf(p_dbm / 10.0)
}

pub fn linear_to_dbm(p_mw: f64) -> f64 {
    10.0 * p_mw.log10()
}

/// Inputs of the semantic extraction lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticParams {
    /// Lower bound of the per-sentence BLEU scores.
    pub varrho: f64,
    /// g-gram weights, summing to one.
    pub weights: Vec<f64>,
    /// g-gram precisions in (0, 1].
    pub precisions: Vec<f64>,
}

impl Default for SemanticParams {
    fn default() -> Self {
        Self {
            varrho: 0.2,
            weights: vec![0.25; 4],
            precisions: vec![0.9; 4],
        }
    }
}

/// Numerical knobs of the optimisers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Stop SCA when the exact objective improves by less than this.
    pub sca_tol: f64,
    pub sca_max_epochs: usize,
    /// SCA epochs allowed per alternating-optimisation epoch.
    pub ao_sca_epochs: usize,
    /// Relative duality gap accepted from the interior-point solver.
    pub kkt_tol: f64,
    pub bisection_tol: f64,
    /// Stopping threshold ς on the change of the worst-case secrecy rate.
    pub ao_tol: f64,
    pub ao_max_epochs: usize,
    /// Finite-difference step (m) for curvature estimates.
    pub grad_fd_step: f64,
    pub tau_init: f64,
    pub tau_min: f64,
    pub armijo_c: f64,
    pub shrink_factor: f64,
    /// BFGS updates with `Δ∇·Δu ≤ curvature_eps` are skipped.
    pub curvature_eps: f64,
    pub bfgs_max_epochs: usize,
    /// Projected-gradient norm that counts as stationary.
    pub bfgs_grad_tol: f64,
    /// Sharpness of the log-sum-exp soft minimum used for gradients.
    pub softmin_beta: f64,
    pub randomization_samples: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sca_tol: 1e-4,
            sca_max_epochs: 20,
            ao_sca_epochs: 1,
            kkt_tol: 1e-8,
            bisection_tol: 1e-8,
            ao_tol: 1e-3,
            ao_max_epochs: 50,
            grad_fd_step: 1e-6,
            tau_init: 1.0,
            tau_min: 1e-8,
            armijo_c: 1e-4,
            shrink_factor: 0.5,
            curvature_eps: 1e-12,
            bfgs_max_epochs: 60,
            bfgs_grad_tol: 1e-6,
            softmin_beta: 50.0,
            randomization_samples: 200,
        }
    }
}

/// Validated system parameters in internal units (Hz, m, mW, s, bits).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub carrier_frequency: f64,
    pub wavelength: f64,
    pub n_tx: usize,
    pub n_tz: usize,
    pub n_rx: usize,
    pub n_rz: usize,
    /// Frames per coherent block, `F`.
    pub frames: usize,
    /// Movable area `C_i` per fluid antenna, m².
    pub movable_area: f64,
    /// Transmit grid pitch override; defaults to the movable range `√C_i`.
    pub tx_pitch: Option<f64>,
    /// Receive element spacing; defaults to half a wavelength.
    pub rx_spacing: f64,
    pub users: usize,
    pub targets: usize,
    pub scatterers: usize,
    /// Upper bound on the scatterer cluster radius, m.
    pub cluster_radius: f64,
    pub sigma_c2: f64,
    pub sigma_r2: f64,
    pub p_t: f64,
    /// Upper bound `ξ` on the channel-estimation CRB.
    pub xi: f64,
    pub t_max: f64,
    /// Sensing data size `U_l` per target, bits.
    pub data_bits: f64,
    /// Workload `Q_l`, cycles per bit.
    pub cycles_per_bit: f64,
    pub kappa: f64,
    /// Semantic-extraction power coefficient, mW per nat.
    pub nu: f64,
    /// Words-to-bits conversion factor.
    pub iota: f64,
    /// Total CPU budget, Hz.
    pub f_max: f64,
    /// Baseline CPU frequency per task, Hz.
    pub f_bar: f64,
    pub semantic: SemanticParams,
    /// `false` runs the conventional (no-semantic) ablation: `ρ ≡ 1`, `ι = 1`.
    pub semantic_enabled: bool,
    pub tol: Tolerances,
    pub rng_seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        ConfigFile::default()
            .into_config()
            .expect("built-in defaults are valid")
    }
}

/// On-disk schema. Field names are the long names; common symbols are aliases.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(alias = "f_c")]
    pub carrier_frequency_hz: Option<f64>,
    pub n_tx: Option<usize>,
    pub n_tz: Option<usize>,
    pub n_rx: Option<usize>,
    pub n_rz: Option<usize>,
    #[serde(alias = "F")]
    pub frames: Option<usize>,
    #[serde(alias = "C_i")]
    pub movable_area_m2: Option<f64>,
    pub tx_pitch_m: Option<f64>,
    pub rx_spacing_m: Option<f64>,
    #[serde(alias = "K")]
    pub users: Option<usize>,
    #[serde(alias = "L")]
    pub targets: Option<usize>,
    #[serde(alias = "N_s")]
    pub scatterers: Option<usize>,
    pub cluster_radius_m: Option<f64>,
    pub sigma_c2_dbm: Option<f64>,
    pub sigma_r2_dbm: Option<f64>,
    pub p_t_dbm: Option<f64>,
    pub xi: Option<f64>,
    pub t_max_s: Option<f64>,
    #[serde(alias = "U_l")]
    pub data_bits: Option<f64>,
    #[serde(alias = "Q_l")]
    pub cycles_per_bit: Option<f64>,
    pub kappa: Option<f64>,
    pub nu: Option<f64>,
    pub iota: Option<f64>,
    pub f_max_hz: Option<f64>,
    pub f_bar_hz: Option<f64>,
    pub varrho: Option<f64>,
    #[serde(alias = "w_g")]
    pub gram_weights: Option<Vec<f64>>,
    /// A single value is broadcast over all grams.
    #[serde(alias = "p_g")]
    pub gram_precisions: Option<Precisions>,
    pub semantic_enabled: Option<bool>,
    pub rng_seed: Option<u64>,
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Precisions {
    Scalar(f64),
    List(Vec<f64>),
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn into_config(self) -> Result<SystemConfig> {
        let carrier_frequency = self.carrier_frequency_hz.unwrap_or(50e9);
        if !(carrier_frequency > 0.0 && carrier_frequency.is_finite()) {
            return Err(Error::config("carrier_frequency_hz", "must be positive"));
        }
        let wavelength = SPEED_OF_LIGHT / carrier_frequency;
        let defaults = SemanticParams::default();
        let weights = self.gram_weights.unwrap_or(defaults.weights);
        let precisions = match self.gram_precisions {
            None => vec![0.9; weights.len()],
            Some(Precisions::Scalar(p)) => vec![p; weights.len()],
            Some(Precisions::List(v)) => v,
        };
        let cfg = SystemConfig {
            carrier_frequency,
            wavelength,
            n_tx: self.n_tx.unwrap_or(3),
            n_tz: self.n_tz.unwrap_or(3),
            n_rx: self.n_rx.unwrap_or(5),
            n_rz: self.n_rz.unwrap_or(5),
            frames: self.frames.unwrap_or(100),
            movable_area: self.movable_area_m2.unwrap_or(0.0025),
            tx_pitch: self.tx_pitch_m,
            rx_spacing: self.rx_spacing_m.unwrap_or(wavelength / 2.0),
            users: self.users.unwrap_or(5),
            targets: self.targets.unwrap_or(2),
            scatterers: self.scatterers.unwrap_or(6),
            cluster_radius: self.cluster_radius_m.unwrap_or(0.5),
            sigma_c2: dbm_to_linear(self.sigma_c2_dbm.unwrap_or(-30.0)),
            sigma_r2: dbm_to_linear(self.sigma_r2_dbm.unwrap_or(-40.0)),
            p_t: dbm_to_linear(self.p_t_dbm.unwrap_or(25.0)),
            xi: self.xi.unwrap_or(0.5),
            t_max: self.t_max_s.unwrap_or(0.02),
            data_bits: self.data_bits.unwrap_or(0.5e6),
            cycles_per_bit: self.cycles_per_bit.unwrap_or(110.0),
            kappa: self.kappa.unwrap_or(1e-29),
            nu: self.nu.unwrap_or(20.0),
            iota: self.iota.unwrap_or(1.0),
            f_max: self.f_max_hz.unwrap_or(10e9),
            f_bar: self.f_bar_hz.unwrap_or(0.0),
            semantic: SemanticParams {
                varrho: self.varrho.unwrap_or(defaults.varrho),
                weights,
                precisions,
            },
            semantic_enabled: self.semantic_enabled.unwrap_or(true),
            tol: self.tolerances.unwrap_or_default(),
            rng_seed: self.rng_seed.unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Read and validate a TOML configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path)?;
    ConfigFile::parse(&text)?.into_config()
}

impl SystemConfig {
    pub fn n_t(&self) -> usize {
        self.n_tx * self.n_tz
    }

    pub fn n_r(&self) -> usize {
        self.n_rx * self.n_rz
    }

    /// Movable range `√C_i` along each axis.
    pub fn movable_range(&self) -> f64 {
        self.movable_area.sqrt()
    }

    pub fn rho_lb(&self) -> f64 {
        rho_lower_bound(
            self.semantic.varrho,
            &self.semantic.weights,
            &self.semantic.precisions,
        )
        .unwrap_or(f64::NAN)
    }

    /// CPU frequency each task needs to meet the latency bound.
    pub fn min_cpu_frequency(&self) -> f64 {
        self.f_bar + self.data_bits * self.cycles_per_bit / self.t_max
    }

    pub fn validate(&self) -> Result<()> {
        let n_t = self.n_t();
        let n_r = self.n_r();
        for (name, v) in [
            ("n_tx", self.n_tx),
            ("n_tz", self.n_tz),
            ("n_rx", self.n_rx),
            ("n_rz", self.n_rz),
            ("users", self.users),
            ("targets", self.targets),
            ("scatterers", self.scatterers),
        ] {
            if v == 0 {
                return Err(Error::config(name, "must be at least 1"));
            }
        }
        if self.users + self.targets > n_t {
            return Err(Error::config(
                "users",
                format!(
                    "users + targets = {} exceeds the {} transmit antennas",
                    self.users + self.targets,
                    n_t
                ),
            ));
        }
        if n_t >= n_r {
            return Err(Error::config(
                "n_rx",
                format!("{n_r} receive antennas must exceed the {n_t} transmit antennas"),
            ));
        }
        if self.frames <= n_t {
            return Err(Error::config(
                "frames",
                format!("{} frames must exceed {} transmit antennas", self.frames, n_t),
            ));
        }
        let positive = [
            ("sigma_c2_dbm", self.sigma_c2),
            ("sigma_r2_dbm", self.sigma_r2),
            ("p_t_dbm", self.p_t),
            ("xi", self.xi),
            ("t_max_s", self.t_max),
            ("data_bits", self.data_bits),
            ("cycles_per_bit", self.cycles_per_bit),
            ("nu", self.nu),
            ("iota", self.iota),
            ("f_max_hz", self.f_max),
            ("rx_spacing_m", self.rx_spacing),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("movable_area_m2", self.movable_area),
            ("kappa", self.kappa),
            ("f_bar_hz", self.f_bar),
            ("cluster_radius_m", self.cluster_radius),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be finite and non-negative, got {v}")));
            }
        }
        if let Some(p) = self.tx_pitch {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::config("tx_pitch_m", "must be positive"));
            }
            if p < self.movable_range() {
                return Err(Error::config(
                    "tx_pitch_m",
                    "pitch smaller than the movable range makes boxes overlap",
                ));
            }
        }
        let sem = &self.semantic;
        if sem.weights.is_empty() || sem.weights.len() != sem.precisions.len() {
            return Err(Error::config(
                "gram_weights",
                "weights and precisions must be non-empty and of equal length",
            ));
        }
        let wsum: f64 = sem.weights.iter().sum();
        if (wsum - 1.0).abs() > 1e-9 || sem.weights.iter().any(|w| *w < 0.0) {
            return Err(Error::config("gram_weights", format!("must be non-negative and sum to 1, got {wsum}")));
        }
        if !(sem.varrho > 0.0 && sem.varrho <= 1.0) {
            return Err(Error::config("varrho", "must lie in (0, 1]"));
        }
        if sem.precisions.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(Error::config("gram_precisions", "must lie in (0, 1]"));
        }
        let lb = rho_lower_bound(sem.varrho, &sem.weights, &sem.precisions)
            .map_err(|_| Error::config("varrho", "semantic lower bound is undefined"))?;
        if !(lb > 0.0 && lb <= 1.0) {
            return Err(Error::config(
                "varrho",
                format!("semantic extraction lower bound {lb:.4} is outside (0, 1]"),
            ));
        }
        let need = self.targets as f64 * self.min_cpu_frequency();
        if need > self.f_max {
            return Err(Error::config(
                "f_max_hz",
                format!("latency bound needs {need:e} Hz of CPU, budget is {:e}", self.f_max),
            ));
        }
        Ok(())
    }
}
