//! Spin-table configuration files.
//!
//! Frequencies are given in Hz and converted to angular units on load.
//! Every section except the spin list is optional and falls back to defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DdrfError, Result};
use crate::register::RegisterConfig;
use crate::sensing::{AmplitudePolicy, CoherenceModel};
use crate::spectroscopy::BathModel;
use crate::spin::{hz, to_hz, FieldConfig, NuclearSpinSpec, PhysicalConstants};

/// Name under which the bundled 15-spin table is available.
pub const BUILTIN_TABLE: &str = "spins_nv_table1";

const BUILTIN_TABLE_TEXT: &str = include_str!("../data/spins_nv_table1.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinEntry {
    pub label: String,
    pub delta_hz: f64,
    #[serde(default)]
    pub a_perp_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathSection {
    pub rho_13c: f64,
    pub delta_limit_hz: f64,
    pub n_bins: usize,
    pub clamp_floor: f64,
}

impl Default for BathSection {
    fn default() -> Self {
        let b = BathModel::default();
        Self {
            rho_13c: PhysicalConstants::default().rho_13c,
            delta_limit_hz: to_hz(b.delta_limit),
            n_bins: b.n_bins,
            clamp_floor: b.clamp_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherenceSection {
    pub t_ref_s: f64,
    pub eta: f64,
    pub n_exp: f64,
}

impl Default for CoherenceSection {
    fn default() -> Self {
        let c = CoherenceModel::default();
        Self { t_ref_s: c.t_ref, eta: c.eta, n_exp: c.n_exp }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmplitudeSection {
    pub omega_tau_cap: f64,
    pub max_rabi_hz: f64,
}

impl Default for AmplitudeSection {
    fn default() -> Self {
        let a = AmplitudePolicy::default();
        Self { omega_tau_cap: a.omega_tau_cap, max_rabi_hz: to_hz(a.omega_abs_cap) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NuclearSection {
    pub t2_star_s: f64,
    pub n_field_samples: usize,
    pub field_range_sigmas: f64,
}

impl Default for NuclearSection {
    fn default() -> Self {
        Self { t2_star_s: 10e-3, n_field_samples: 10, field_range_sigmas: 2.0 }
    }
}

/// Parsed spin table with all global settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinTable {
    #[serde(default = "default_field")]
    pub b_z_tesla: f64,
    /// Labels forming the qubit register; the remaining spins are bystanders.
    #[serde(default)]
    pub register: Vec<String>,
    #[serde(default)]
    pub bath: BathSection,
    #[serde(default)]
    pub coherence: CoherenceSection,
    #[serde(default)]
    pub amplitude: AmplitudeSection,
    #[serde(default)]
    pub nuclear: NuclearSection,
    #[serde(default, rename = "spin")]
    pub spins: Vec<SpinEntry>,
}

fn default_field() -> f64 {
    FieldConfig::default().b_z
}

impl SpinTable {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let err = |message: String| DdrfError::Config { path: origin.to_string(), message };
        let table: SpinTable = toml::from_str(text).map_err(|e| err(e.to_string()))?;
        table.check().map_err(|e| err(e.to_string()))?;
        Ok(table)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DdrfError::Config { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_TABLE_TEXT, BUILTIN_TABLE).expect("bundled spin table is valid")
    }

    pub fn builtin_text() -> &'static str {
        BUILTIN_TABLE_TEXT
    }

    /// Resolves the builtin name first, then a filesystem path.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if name_or_path == BUILTIN_TABLE && !Path::new(name_or_path).exists() {
            Ok(Self::builtin())
        } else {
            Self::from_path(Path::new(name_or_path))
        }
    }

    fn check(&self) -> Result<()> {
        self.field()?;
        self.constants().validate()?;
        for (i, s) in self.spins.iter().enumerate() {
            self.spin_spec(s).validate()?;
            if self.spins[..i].iter().any(|o| o.label == s.label) {
                return Err(crate::error::invalid(format!("duplicate spin label `{}`", s.label)));
            }
        }
        for (i, label) in self.register.iter().enumerate() {
            if !self.spins.iter().any(|s| &s.label == label) {
                return Err(DdrfError::UnknownSpin(label.clone()));
            }
            if self.register[..i].contains(label) {
                return Err(crate::error::invalid(format!("register lists `{label}` twice")));
            }
        }
        self.bath_model().validate()?;
        self.coherence_model().validate()?;
        self.amplitude_policy().validate()?;
        Ok(())
    }

    fn spin_spec(&self, s: &SpinEntry) -> NuclearSpinSpec {
        NuclearSpinSpec::from_hz(s.label.clone(), s.delta_hz, s.a_perp_hz)
    }

    pub fn field(&self) -> Result<FieldConfig> {
        FieldConfig::new(self.b_z_tesla)
    }

    pub fn constants(&self) -> PhysicalConstants {
        PhysicalConstants { rho_13c: self.bath.rho_13c, ..PhysicalConstants::default() }
    }

    pub fn spin_specs(&self) -> Vec<NuclearSpinSpec> {
        self.spins.iter().map(|s| self.spin_spec(s)).collect()
    }

    pub fn spin(&self, label: &str) -> Result<NuclearSpinSpec> {
        self.spins
            .iter()
            .find(|s| s.label == label)
            .map(|s| self.spin_spec(s))
            .ok_or_else(|| DdrfError::UnknownSpin(label.to_string()))
    }

    pub fn bath_model(&self) -> BathModel {
        BathModel {
            delta_limit: hz(self.bath.delta_limit_hz),
            n_bins: self.bath.n_bins,
            clamp_floor: self.bath.clamp_floor,
        }
    }

    pub fn coherence_model(&self) -> CoherenceModel {
        CoherenceModel { t_ref: self.coherence.t_ref_s, eta: self.coherence.eta, n_exp: self.coherence.n_exp }
    }

    pub fn amplitude_policy(&self) -> AmplitudePolicy {
        AmplitudePolicy { omega_tau_cap: self.amplitude.omega_tau_cap, omega_abs_cap: hz(self.amplitude.max_rabi_hz) }
    }

    /// Register from the `register` list, or from `labels` when given.
    pub fn register_config(&self, labels: Option<&[String]>) -> Result<RegisterConfig> {
        let labels = labels.unwrap_or(&self.register);
        let register = labels.iter().map(|l| self.spin(l)).collect::<Result<Vec<_>>>()?;
        let bystanders = self.spin_specs().into_iter().filter(|s| !labels.contains(&s.label)).collect::<Vec<_>>();
        let cfg = RegisterConfig {
            bath: self.bath_model(),
            coherence: self.coherence_model(),
            amplitude: self.amplitude_policy(),
            t2_star_nuclear: self.nuclear.t2_star_s,
            n_field_samples: self.nuclear.n_field_samples,
            field_range_sigmas: self.nuclear.field_range_sigmas,
            ..RegisterConfig::new(register, bystanders)
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table() {
        let t = SpinTable::builtin();
        assert_eq!(t.spins.len(), 15);
        assert_eq!(t.spin("C1").unwrap().delta, hz(-45870.0));
        let r = t.register_config(None).unwrap();
        assert_eq!(r.register_spins.len(), 5);
        assert_eq!(r.bystander_spins.len(), 10);
        assert_eq!(r.amplitude, AmplitudePolicy::default());
        assert_eq!(r.coherence, CoherenceModel::default());
    }

    #[test]
    fn empty_table_is_valid() {
        let t = SpinTable::parse("", "mem").unwrap();
        assert!(t.spins.is_empty());
        assert_eq!(t.b_z_tesla, 0.1891);
        assert!(t.register_config(None).is_err());
    }

    #[test]
    fn errors_name_the_problem() {
        let bad = "[[spin]]\nlabel = \"a\"\ndelta_hz = \"x\"\n";
        let e = SpinTable::parse(bad, "t.toml").unwrap_err().to_string();
        assert!(e.contains("delta_hz") && e.contains("t.toml"), "{e}");
        let dup = "[[spin]]\nlabel = \"a\"\ndelta_hz = 1.0\n[[spin]]\nlabel = \"a\"\ndelta_hz = 2.0\n";
        assert!(SpinTable::parse(dup, "m").unwrap_err().to_string().contains("duplicate"));
        let unknown = "register = [\"zz\"]\n";
        assert!(SpinTable::parse(unknown, "m").unwrap_err().to_string().contains("zz"));
        let typo = "b_z = 0.2\n";
        assert!(SpinTable::parse(typo, "m").is_err());
        let e = SpinTable::load("/nonexistent/table.toml").unwrap_err().to_string();
        assert!(e.contains("/nonexistent/table.toml"));
    }

    #[test]
    fn register_override() {
        let t = SpinTable::builtin();
        let labels = vec!["C4".to_string()];
        let r = t.register_config(Some(&labels)).unwrap();
        assert_eq!(r.register_spins.len(), 1);
        assert_eq!(r.bystander_spins.len(), 14);
    }
}
