//! Run configuration: one TOML file per run, CLI flags override file keys.
//!
//! Sections and keys:
//!
//! ```toml
//! [teacher]                 # and [student], same keys
//! kind = "conv"             # conv | local
//! constituent = "laplacian" # laplacian | relu_ntk | rf_ntk | spectral
//! d = 6
//! s = 2
//! overlap = true
//! alpha = 1.0               # spectral constituent smoothness
//! mass = 1.0                # spectral constituent infrared mass
//! H = 1000000               # rf_ntk width
//! seed = 1                  # rf_ntk feature draw
//!
//! [sampling]
//! domain = "cube"           # cube | sphere | torus
//! P_grid = [128, 256, 512, 1024, 2048, 4096]
//! P_test = 4096
//! realizations = 32
//! base_seed = 0
//!
//! [ridge]
//! ridge_mode = "ridgeless"  # ridgeless | fixed | decaying
//! lambda0 = 0.0
//! gamma = 0.0
//!
//! [fit]
//! window = [512, 4096]      # optional; default: last decade of P_grid
//!
//! [spectrum]
//! k_max = 0.0               # optional; 0 = auto (>= 100 modes per sample)
//! ```

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, RidgeSchedule};
use crate::kernels::{
    CompositeKernel, CompositeKind, ConstituentKernel, Overlap, PatchScheme,
};
use crate::sampling::Domain;
use crate::spectral::SpectralDescriptor;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub teacher: KernelConfig,
    pub student: KernelConfig,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub ridge: RidgeConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelConfig {
    /// conv | local
    pub kind: String,
    /// laplacian | relu_ntk | rf_ntk | spectral
    pub constituent: String,
    pub d: usize,
    pub s: usize,
    pub overlap: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(rename = "H", skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// cube | sphere | torus
    pub domain: String,
    #[serde(rename = "P_grid")]
    pub p_grid: Vec<usize>,
    #[serde(rename = "P_test")]
    pub p_test: usize,
    pub realizations: u64,
    pub base_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RidgeConfig {
    /// ridgeless | fixed | decaying
    pub ridge_mode: String,
    #[serde(default)]
    pub lambda0: f64,
    #[serde(default)]
    pub gamma: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig {
            ridge_mode: "ridgeless".into(),
            lambda0: 0.0,
            gamma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FitConfig {
    /// Inclusive [low, high] window of P values for the exponent fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SpectrumConfig {
    /// Wavevector cutoff; omitted or 0 picks one with >= 100 modes per
    /// largest requested P.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<f64>,
}

impl KernelConfig {
    pub fn parse_kind(&self) -> Result<CompositeKind> {
        match self.kind.as_str() {
            "conv" => Ok(CompositeKind::Convolutional),
            "local" => Ok(CompositeKind::Local),
            other => Err(Error::config(
                "kind",
                format!("expected conv|local, got `{other}`"),
            )),
        }
    }

    pub fn overlap(&self) -> Overlap {
        if self.overlap {
            Overlap::Overlapping
        } else {
            Overlap::NonOverlapping
        }
    }

    pub fn scheme(&self) -> Result<PatchScheme> {
        PatchScheme::new(self.d, self.s, self.overlap())
            .map_err(|e| Error::config("s", e.to_string()))
    }

    /// Build the runnable kernel (draws random features for rf_ntk).
    pub fn build(&self) -> Result<CompositeKernel> {
        let kind = self.parse_kind()?;
        let scheme = self.scheme()?;
        let constituent = match self.constituent.as_str() {
            "laplacian" => ConstituentKernel::laplacian(self.s),
            "relu_ntk" => ConstituentKernel::relu_ntk(self.s),
            "rf_ntk" => {
                let h = self.h.ok_or_else(|| {
                    Error::config("H", "rf_ntk constituent needs a width H")
                })?;
                if h == 0 {
                    return Err(Error::config("H", "width H must be >= 1"));
                }
                ConstituentKernel::random_feature_ntk(self.s, h, self.seed.unwrap_or(0))
            }
            "spectral" => {
                let alpha = self.alpha.unwrap_or(1.0);
                let mass = self.mass.unwrap_or(1.0);
                if alpha <= 0.0 {
                    return Err(Error::config("alpha", "smoothness alpha must be > 0"));
                }
                if mass <= 0.0 {
                    return Err(Error::config("mass", "mass must be > 0"));
                }
                ConstituentKernel::power_law_spectral(self.s, alpha, mass)
            }
            other => {
                return Err(Error::config(
                    "constituent",
                    format!("expected laplacian|relu_ntk|rf_ntk|spectral, got `{other}`"),
                ))
            }
        };
        CompositeKernel::new(kind, constituent, scheme)
    }

    /// Spectral surrogate descriptor for this kernel.
    pub fn spectral_descriptor(&self) -> Result<SpectralDescriptor> {
        let kind = self.parse_kind()?;
        let (alpha, mass, amplitude) = match self.constituent.as_str() {
            "laplacian" => (
                1.0,
                1.0,
                crate::spectral::laplacian_fourier_amplitude(self.s),
            ),
            "relu_ntk" | "rf_ntk" => (1.0, 1.0, 1.0),
            "spectral" => (self.alpha.unwrap_or(1.0), self.mass.unwrap_or(1.0), 1.0),
            other => {
                return Err(Error::config(
                    "constituent",
                    format!("expected laplacian|relu_ntk|rf_ntk|spectral, got `{other}`"),
                ))
            }
        };
        let mut desc = SpectralDescriptor::power_law(
            kind,
            self.s,
            self.d,
            self.overlap(),
            alpha,
            mass,
        )?;
        desc.amplitude = amplitude;
        Ok(desc)
    }

    /// Whether spectral-theory values share the empirical kernel's scale.
    pub fn amplitude_calibrated(&self) -> bool {
        matches!(self.constituent.as_str(), "laplacian" | "spectral")
    }
}

impl SamplingConfig {
    pub fn parse_domain(&self) -> Result<Domain> {
        match self.domain.as_str() {
            "cube" => Ok(Domain::Hypercube01),
            "sphere" => Ok(Domain::SphereUnit),
            "torus" => Ok(Domain::Torus01),
            other => Err(Error::config(
                "domain",
                format!("expected cube|sphere|torus, got `{other}`"),
            )),
        }
    }
}

impl RidgeConfig {
    pub fn schedule(&self) -> Result<RidgeSchedule> {
        match self.ridge_mode.as_str() {
            "ridgeless" => Ok(RidgeSchedule::Ridgeless),
            "fixed" => {
                if self.lambda0 <= 0.0 {
                    return Err(Error::config("lambda0", "fixed ridge needs lambda0 > 0"));
                }
                Ok(RidgeSchedule::Fixed {
                    lambda0: self.lambda0,
                })
            }
            "decaying" => {
                if self.lambda0 <= 0.0 {
                    return Err(Error::config("lambda0", "decaying ridge needs lambda0 > 0"));
                }
                if self.gamma <= 0.0 {
                    return Err(Error::config("gamma", "decaying ridge needs gamma > 0"));
                }
                Ok(RidgeSchedule::Decaying {
                    lambda0: self.lambda0,
                    gamma: self.gamma,
                })
            }
            other => Err(Error::config(
                "ridge_mode",
                format!("expected ridgeless|fixed|decaying, got `{other}`"),
            )),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Validate everything and assemble the experiment description.
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let domain = self.sampling.parse_domain()?;
        if self.sampling.p_grid.is_empty() {
            return Err(Error::config("P_grid", "must contain at least one P"));
        }
        if !self.sampling.p_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config("P_grid", "must be strictly increasing"));
        }
        if self.sampling.p_grid[0] == 0 {
            return Err(Error::config("P_grid", "P values must be >= 1"));
        }
        if self.sampling.p_test == 0 {
            return Err(Error::config("P_test", "must be >= 1"));
        }
        if self.sampling.realizations == 0 {
            return Err(Error::config("realizations", "must be >= 1"));
        }
        if self.teacher.d != self.student.d {
            return Err(Error::config(
                "d",
                format!(
                    "teacher and student must share the input dimension (got {} and {})",
                    self.teacher.d, self.student.d
                ),
            ));
        }
        let ridge = self.ridge.schedule()?;
        let teacher = self.teacher.build()?;
        let student = self.student.build()?;
        if !teacher.constituent().supports_real_space() {
            return Err(Error::config(
                "constituent",
                "teacher: spectral kernels cannot run empirical experiments",
            ));
        }
        if !student.constituent().supports_real_space() {
            return Err(Error::config(
                "constituent",
                "student: spectral kernels cannot run empirical experiments",
            ));
        }
        let window = match self.fit.window {
            Some([lo, hi]) => {
                if lo > hi {
                    return Err(Error::config("window", "window low exceeds high"));
                }
                let inside = self
                    .sampling
                    .p_grid
                    .iter()
                    .filter(|&&p| p >= lo && p <= hi)
                    .count();
                if inside < 3 {
                    return Err(Error::config(
                        "window",
                        "fit window must contain at least 3 grid points",
                    ));
                }
                Some((lo, hi))
            }
            None => None,
        };
        Ok(ExperimentConfig {
            teacher,
            student,
            teacher_cfg: self.teacher.clone(),
            student_cfg: self.student.clone(),
            domain,
            p_grid: self.sampling.p_grid.clone(),
            p_test: self.sampling.p_test,
            realizations: self.sampling.realizations,
            ridge,
            base_seed: self.sampling.base_seed,
            fit_window: window,
        })
    }
}
