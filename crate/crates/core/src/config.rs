//! TOML run configuration.
//!
//! Keys carry their unit as a suffix (`_ghz`, `_ns`, `_us`, `_ff`, `_phi0`);
//! dimensionless keys have none. Omitted keys take the reference-device
//! defaults. Either the charging energies or a `[capacitance]` table may be
//! given, never both.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::{
    charging_energies, CapacitanceSet, CircuitDesign, QubitParams, SloshingParams, SquidParams, Truncation,
};
use crate::composite::CircuitSpec;
use crate::dynamics::{BasisChoice, GateScheme, NoiseModel, OptimizeOptions, SchemeSettings, Tolerances};
use crate::zz::{J_MAX_DEFAULT, ZZ_TOLERANCE_DEFAULT};
use crate::{Error, Result};

/// Evenly spaced inclusive grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    pub const fn new(min: f64, max: f64, points: usize) -> Self {
        Grid { min, max, points }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n).map(|k| self.min + (self.max - self.min) * k as f64 / (n - 1) as f64).collect(),
        }
    }

    fn check(&self, name: &str, problems: &mut Vec<String>) {
        if !self.min.is_finite() || !self.max.is_finite() {
            problems.push(format!("{name}: grid bounds must be finite"));
        }
        if self.points == 0 {
            problems.push(format!("{name}: grid needs at least one point"));
        }
        if self.points > 1 && self.max < self.min {
            problems.push(format!("{name}: max {} is below min {}", self.max, self.min));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSettings {
    pub phi_s: Grid,
    /// Lowest labeled levels written per flux point.
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZzMapSettings {
    pub e_j_sigma: Grid,
    pub d: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JcStarSettings {
    pub e_j_sigma: Grid,
    pub d: Grid,
    pub j_max: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelSettings {
    pub phi_s: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSettings {
    pub scheme: GateScheme,
    /// Plateau flux of the pulsed element (coupler or qubit A).
    pub x: f64,
    pub t_g: f64,
    pub scheme_settings: SchemeSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSettings {
    /// T_1 values (µs) simulated in addition to the unitary case.
    pub t1: Vec<f64>,
    pub t_phi_over_t1: f64,
}

impl NoiseSettings {
    pub fn models(&self) -> Result<Vec<NoiseModel>> {
        self.t1.iter().map(|&t1| NoiseModel::new(t1, t1 * self.t_phi_over_t1)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSettings {
    pub scheme: GateScheme,
    pub x: Grid,
    pub t_g: Grid,
    pub scheme_settings: SchemeSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSettings {
    pub scheme: GateScheme,
    pub x: Grid,
    pub t_g_min: f64,
    pub t_g_max: f64,
    pub d: Vec<f64>,
    pub options: OptimizeOptions,
    pub scheme_settings: SchemeSettings,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub circuit: CircuitSpec,
    /// Present when the charging energies were derived from capacitances.
    pub capacitance: Option<CapacitanceSet>,
    pub basis: BasisChoice,
    pub solver: Tolerances,
    pub noise: NoiseSettings,
    pub spectrum: SpectrumSettings,
    pub zz_map: ZzMapSettings,
    pub jc_star: JcStarSettings,
    pub two_level: TwoLevelSettings,
    pub gate: GateSettings,
    pub landscape: LandscapeSettings,
    pub optimize: OptimizeSettings,
    /// Unknown keys tolerated outside strict mode.
    pub warnings: Vec<String>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        resolve(RawConfig::default(), Vec::new()).expect("defaults are valid")
    }
}

// ---- raw, as written in the file ----

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RawQubit {
    #[serde(skip_serializing_if = "Option::is_none")]
    e_j_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    e_c_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    e_l_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi_ext_phi0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RawSquid {
    #[serde(skip_serializing_if = "Option::is_none")]
    e_j_sigma_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi_s_phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    j_c_ghz: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RawSloshing {
    #[serde(skip_serializing_if = "Option::is_none")]
    e_c_sl_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    j_sl_ghz: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RawCapacitance {
    #[serde(skip_serializing_if = "Option::is_none")]
    c_ff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_c_ff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_g_ff: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RawTruncation {
    #[serde(skip_serializing_if = "Option::is_none")]
    n_fock: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_keep: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_charge_cut: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_keep_sl: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RawSolver {
    #[serde(skip_serializing_if = "Option::is_none")]
    rtol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    atol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RawNoise {
    #[serde(skip_serializing_if = "Option::is_none")]
    t1_us: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_phi_over_t1: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RawSpectrum {
    #[serde(skip_serializing_if = "Option::is_none")]
    phi_s_min_phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi_s_max_phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi_s_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RawZzGrid {
    #[serde(skip_serializing_if = "Option::is_none")]
    e_j_sigma_min_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    e_j_sigma_max_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    e_j_sigma_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    j_max_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tol_ghz: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RawTwoLevel {
    #[serde(skip_serializing_if = "Option::is_none")]
    phi_s_min_phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi_s_max_phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi_s_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RawGate {
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<GateScheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_g_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_r_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detuned_phi_s_on_phi0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RawLandscape {
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<GateScheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_min_phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_max_phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_g_min_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_g_max_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_g_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_r_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detuned_phi_s_on_phi0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RawOptimize {
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<GateScheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_min_phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_max_phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_g_min_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_g_max_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coarse_step_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refine_tol_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_r_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detuned_phi_s_on_phi0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    design: Option<CircuitDesign>,
    #[serde(skip_serializing_if = "Option::is_none")]
    basis: Option<BasisChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    qubit_a: Option<RawQubit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    qubit_b: Option<RawQubit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    squid: Option<RawSquid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sloshing: Option<RawSloshing>,
    #[serde(skip_serializing_if = "Option::is_none")]
    capacitance: Option<RawCapacitance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncation: Option<RawTruncation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<RawSolver>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<RawNoise>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectrum: Option<RawSpectrum>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zz_map: Option<RawZzGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jc_star: Option<RawZzGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    two_level: Option<RawTwoLevel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gate: Option<RawGate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    landscape: Option<RawLandscape>,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimize: Option<RawOptimize>,
}

/// Keys present in `input` but not in `known`, as dotted paths.
fn unknown_keys(input: &toml::Table, known: &toml::Table, prefix: &str, out: &mut Vec<(String, Option<String>)>) {
    for (k, v) in input {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match known.get(k) {
            None => {
                let hint = known.keys().find(|name| name.starts_with(&format!("{k}_"))).cloned();
                out.push((path, hint));
            }
            Some(kv) => {
                if let (toml::Value::Table(a), toml::Value::Table(b)) = (v, kv) {
                    unknown_keys(a, b, &path, out);
                }
            }
        }
    }
}

/// Every key the format accepts, with placeholder values.
fn schema() -> toml::Table {
    let full = dump_raw(&SimulationConfig::default(), true);
    let mut table: toml::Table = toml::from_str(&full).expect("canonical dump parses");
    // capacitance keys are absent from the default dump
    let mut caps = toml::Table::new();
    for k in ["c_ff", "c_c_ff", "c_g_ff"] {
        caps.insert(k.into(), toml::Value::Float(1.0));
    }
    table.insert("capacitance".into(), toml::Value::Table(caps));
    for (section, keys) in [
        ("qubit_a", &["e_c_ghz"][..]),
        ("qubit_b", &["e_c_ghz"][..]),
        ("squid", &["j_c_ghz"][..]),
        ("sloshing", &["e_c_sl_ghz", "j_sl_ghz"][..]),
    ] {
        if let Some(toml::Value::Table(t)) = table.get_mut(section) {
            for k in keys {
                t.entry(k.to_string()).or_insert(toml::Value::Float(1.0));
            }
        }
    }
    table
}

impl SimulationConfig {
    pub fn load(path: impl AsRef<Path>, strict: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, strict)
    }

    pub fn from_toml_str(text: &str, strict: bool) -> Result<Self> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(vec![format!("malformed TOML: {e}")]))?;
        let mut unknown = Vec::new();
        unknown_keys(&table, &schema(), "", &mut unknown);
        let mut problems = Vec::new();
        let mut warnings = Vec::new();
        for (key, hint) in unknown {
            match hint {
                Some(h) => problems.push(format!("key `{key}` has no unit suffix; write `{h}`")),
                None if strict => problems.push(format!("unknown key `{key}`")),
                None => warnings.push(format!("ignored unknown key `{key}`")),
            }
        }
        let raw: std::result::Result<RawConfig, _> = toml::Value::Table(table).try_into();
        let raw = match raw {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("invalid value: {e}"));
                return Err(Error::Config(problems));
            }
        };
        match resolve(raw, warnings) {
            Ok(cfg) if problems.is_empty() => Ok(cfg),
            Ok(_) => Err(Error::Config(problems)),
            Err(Error::Config(more)) => {
                problems.extend(more);
                Err(Error::Config(problems))
            }
            Err(e) => Err(e),
        }
    }

    /// Canonical TOML: every setting written out, charging energies omitted
    /// when they derive from capacitances.
    pub fn to_toml_string(&self) -> String {
        dump_raw(self, false)
    }

    /// Apply a scheme override to every gate sweep.
    pub fn set_scheme(&mut self, scheme: GateScheme) {
        let defaults = SchemeSettings::default_for(scheme);
        if self.gate.scheme != scheme {
            self.gate.scheme = scheme;
            self.gate.scheme_settings = defaults;
            self.gate.x = default_x(scheme);
            self.gate.t_g = default_t_g(scheme);
        }
        if self.landscape.scheme != scheme {
            self.landscape.scheme = scheme;
            self.landscape.scheme_settings = defaults;
            self.landscape.x = default_landscape_x(scheme);
            self.landscape.t_g = default_landscape_t_g(scheme);
        }
        if self.optimize.scheme != scheme {
            self.optimize.scheme = scheme;
            self.optimize.scheme_settings = defaults;
            self.optimize.x = default_optimize_x(scheme);
            (self.optimize.t_g_min, self.optimize.t_g_max) = default_optimize_window(scheme);
        }
    }

    /// Apply an asymmetry override to the circuit and the optimization sweep.
    pub fn set_asymmetry(&mut self, d: f64) -> Result<()> {
        let mut squid = self.circuit.squid;
        squid.d = d;
        squid.validate()?;
        self.circuit.squid = squid;
        self.optimize.d = vec![d];
        Ok(())
    }
}

fn default_x(scheme: GateScheme) -> f64 {
    match scheme {
        GateScheme::CouplerOnly => 0.47,
        GateScheme::Detuned => 0.523,
    }
}

fn default_t_g(scheme: GateScheme) -> f64 {
    match scheme {
        GateScheme::CouplerOnly => 11.4,
        GateScheme::Detuned => 17.0,
    }
}

fn default_landscape_x(scheme: GateScheme) -> Grid {
    match scheme {
        GateScheme::CouplerOnly => Grid::new(0.44, 0.5, 61),
        GateScheme::Detuned => Grid::new(0.51, 0.535, 51),
    }
}

fn default_landscape_t_g(scheme: GateScheme) -> Grid {
    match scheme {
        GateScheme::CouplerOnly => Grid::new(5.0, 20.0, 301),
        GateScheme::Detuned => Grid::new(12.0, 25.0, 261),
    }
}

fn default_optimize_x(scheme: GateScheme) -> Grid {
    match scheme {
        GateScheme::CouplerOnly => Grid::new(0.44, 0.5, 100),
        GateScheme::Detuned => Grid::new(0.51, 0.535, 100),
    }
}

fn default_optimize_window(scheme: GateScheme) -> (f64, f64) {
    match scheme {
        GateScheme::CouplerOnly => (5.0, 20.0),
        GateScheme::Detuned => (12.0, 25.0),
    }
}

fn grid(min: Option<f64>, max: Option<f64>, points: Option<usize>, default: Grid) -> Grid {
    Grid { min: min.unwrap_or(default.min), max: max.unwrap_or(default.max), points: points.unwrap_or(default.points) }
}

fn scheme_settings(scheme: GateScheme, t_r: Option<f64>, phi_s_on: Option<f64>) -> SchemeSettings {
    let d = SchemeSettings::default_for(scheme);
    SchemeSettings { t_r: t_r.unwrap_or(d.t_r), detuned_phi_s_on: phi_s_on.unwrap_or(d.detuned_phi_s_on) }
}

fn qubit(raw: Option<RawQubit>, default: QubitParams) -> QubitParams {
    let r = raw.unwrap_or_default();
    QubitParams {
        e_j: r.e_j_ghz.unwrap_or(default.e_j),
        e_c: r.e_c_ghz.unwrap_or(default.e_c),
        e_l: r.e_l_ghz.unwrap_or(default.e_l),
        phi_ext: r.phi_ext_phi0.unwrap_or(default.phi_ext),
    }
}

fn resolve(raw: RawConfig, warnings: Vec<String>) -> Result<SimulationConfig> {
    let mut problems = Vec::new();
    let design = raw.design.unwrap_or(CircuitDesign::Grounded);
    let mut qubit_a = qubit(raw.qubit_a.clone(), QubitParams::DEFAULT_A);
    let mut qubit_b = qubit(raw.qubit_b.clone(), QubitParams::DEFAULT_B);
    let rs = raw.squid.clone().unwrap_or_default();
    let mut squid = SquidParams {
        e_j_sigma: rs.e_j_sigma_ghz.unwrap_or(SquidParams::DEFAULT.e_j_sigma),
        d: rs.d.unwrap_or(SquidParams::DEFAULT.d),
        phi_s: rs.phi_s_phi0.unwrap_or(SquidParams::DEFAULT.phi_s),
        j_c: rs.j_c_ghz.unwrap_or(SquidParams::DEFAULT.j_c),
    };
    let rsl = raw.sloshing.clone().unwrap_or_default();
    let mut sloshing = SloshingParams {
        e_c_sl: rsl.e_c_sl_ghz.unwrap_or(SloshingParams::DEFAULT.e_c_sl),
        n_g: rsl.n_g.unwrap_or(SloshingParams::DEFAULT.n_g),
        j_sl: rsl.j_sl_ghz.unwrap_or(SloshingParams::DEFAULT.j_sl),
    };

    let mut capacitance = None;
    if let Some(rc) = &raw.capacitance {
        let direct = [
            ("qubit_a.e_c_ghz", raw.qubit_a.as_ref().and_then(|q| q.e_c_ghz).is_some()),
            ("qubit_b.e_c_ghz", raw.qubit_b.as_ref().and_then(|q| q.e_c_ghz).is_some()),
            ("squid.j_c_ghz", rs.j_c_ghz.is_some()),
            ("sloshing.e_c_sl_ghz", rsl.e_c_sl_ghz.is_some() && design == CircuitDesign::Floating),
            ("sloshing.j_sl_ghz", rsl.j_sl_ghz.is_some() && design == CircuitDesign::Floating),
        ];
        for (key, given) in direct {
            if given {
                problems.push(format!("`{key}` conflicts with the [capacitance] table; give one or the other"));
            }
        }
        match (rc.c_ff, rc.c_c_ff) {
            (Some(c), Some(c_c)) => {
                if design == CircuitDesign::Floating && rc.c_g_ff.is_none() {
                    problems.push("capacitance.c_g_ff is required for the floating design".into());
                } else {
                    let caps = CapacitanceSet {
                        c,
                        c_c,
                        c_g: if design == CircuitDesign::Floating { rc.c_g_ff } else { None },
                    };
                    if design == CircuitDesign::Grounded && rc.c_g_ff.is_some() {
                        problems.push("capacitance.c_g_ff only applies to the floating design".into());
                    }
                    match charging_energies(design, &caps) {
                        Ok(ch) => {
                            qubit_a.e_c = ch.e_c;
                            qubit_b.e_c = ch.e_c;
                            squid.j_c = ch.j_c;
                            if let (Some(e), Some(j)) = (ch.e_c_sl, ch.j_sl) {
                                sloshing.e_c_sl = e;
                                sloshing.j_sl = j;
                            }
                            capacitance = Some(caps);
                        }
                        Err(e) => problems.push(e.to_string()),
                    }
                }
            }
            _ => problems.push("capacitance table needs both c_ff and c_c_ff".into()),
        }
    }

    let rt = raw.truncation.clone().unwrap_or_default();
    let td = Truncation::default();
    let truncation = Truncation {
        n_fock: rt.n_fock.unwrap_or(td.n_fock),
        n_keep: rt.n_keep.unwrap_or(td.n_keep),
        n_charge_cut: rt.n_charge_cut.unwrap_or(td.n_charge_cut),
        n_keep_sl: rt.n_keep_sl.unwrap_or(td.n_keep_sl),
    };
    if truncation.n_fock < 50 || truncation.n_keep < 2 || truncation.n_keep > truncation.n_fock / 4 {
        problems.push(format!(
            "truncation needs n_fock >= 50 and 2 <= n_keep <= n_fock/4 (got n_fock={}, n_keep={})",
            truncation.n_fock, truncation.n_keep
        ));
    }
    if truncation.n_charge_cut < 10 || truncation.n_keep_sl < 1 || truncation.n_keep_sl > 2 * truncation.n_charge_cut + 1 {
        problems.push(format!(
            "truncation needs n_charge_cut >= 10 and 1 <= n_keep_sl <= 2 n_charge_cut + 1 (got {}, {})",
            truncation.n_charge_cut, truncation.n_keep_sl
        ));
    }

    for (name, r) in [
        ("qubit_a", qubit_a.validate()),
        ("qubit_b", qubit_b.validate()),
        ("squid", squid.validate()),
        ("sloshing", sloshing.validate()),
    ] {
        if let Err(e) = r {
            problems.push(format!("{name}: {e}"));
        }
    }
    if !(0.0..1.0).contains(&sloshing.n_g) {
        problems.push(format!("sloshing.n_g must lie in [0, 1), got {}", sloshing.n_g));
    }

    let rsv = raw.solver.clone().unwrap_or_default();
    let solver = Tolerances {
        rtol: rsv.rtol.unwrap_or(Tolerances::default().rtol),
        atol: rsv.atol.unwrap_or(Tolerances::default().atol),
    };
    if let Err(e) = solver.validate() {
        problems.push(format!("solver: {e}"));
    }

    let rn = raw.noise.clone().unwrap_or_default();
    let noise = NoiseSettings {
        t1: rn.t1_us.unwrap_or_else(|| vec![100.0, 10.0]),
        t_phi_over_t1: rn.t_phi_over_t1.unwrap_or(2.0),
    };
    if let Err(e) = noise.models() {
        problems.push(format!("noise: {e}"));
    }

    let rsp = raw.spectrum.clone().unwrap_or_default();
    let spectrum = SpectrumSettings {
        phi_s: grid(rsp.phi_s_min_phi0, rsp.phi_s_max_phi0, rsp.phi_s_points, Grid::new(0.0, 1.0, 201)),
        levels: rsp.levels.unwrap_or(16),
    };
    spectrum.phi_s.check("spectrum.phi_s", &mut problems);
    if spectrum.levels == 0 {
        problems.push("spectrum.levels must be positive".into());
    }

    let rz = raw.zz_map.clone().unwrap_or_default();
    let zz_map = ZzMapSettings {
        e_j_sigma: grid(rz.e_j_sigma_min_ghz, rz.e_j_sigma_max_ghz, rz.e_j_sigma_points, Grid::new(0.0, 10.0, 21)),
        d: grid(rz.d_min, rz.d_max, rz.d_points, Grid::new(0.0, 0.05, 11)),
    };
    zz_map.e_j_sigma.check("zz_map.e_j_sigma", &mut problems);
    zz_map.d.check("zz_map.d", &mut problems);
    if rz.j_max_ghz.is_some() || rz.tol_ghz.is_some() {
        problems.push("zz_map does not take j_max_ghz or tol_ghz (they belong to [jc_star])".into());
    }

    let rj = raw.jc_star.clone().unwrap_or_default();
    let jc_star = JcStarSettings {
        e_j_sigma: grid(rj.e_j_sigma_min_ghz, rj.e_j_sigma_max_ghz, rj.e_j_sigma_points, Grid::new(5.0, 9.0, 5)),
        d: grid(rj.d_min, rj.d_max, rj.d_points, Grid::new(0.0, 0.05, 6)),
        j_max: rj.j_max_ghz.unwrap_or(J_MAX_DEFAULT),
        tol: rj.tol_ghz.unwrap_or(ZZ_TOLERANCE_DEFAULT),
    };
    jc_star.e_j_sigma.check("jc_star.e_j_sigma", &mut problems);
    jc_star.d.check("jc_star.d", &mut problems);
    if !(jc_star.j_max > 0.0) || !(jc_star.tol > 0.0) {
        problems.push("jc_star.j_max_ghz and jc_star.tol_ghz must be positive".into());
    }

    let r2 = raw.two_level.clone().unwrap_or_default();
    let two_level = TwoLevelSettings {
        phi_s: grid(r2.phi_s_min_phi0, r2.phi_s_max_phi0, r2.phi_s_points, Grid::new(0.4, 0.5, 21)),
    };
    two_level.phi_s.check("two_level.phi_s", &mut problems);

    let rg = raw.gate.clone().unwrap_or_default();
    let g_scheme = rg.scheme.unwrap_or(GateScheme::CouplerOnly);
    let gate = GateSettings {
        scheme: g_scheme,
        x: rg.x_phi0.unwrap_or(default_x(g_scheme)),
        t_g: rg.t_g_ns.unwrap_or(default_t_g(g_scheme)),
        scheme_settings: scheme_settings(g_scheme, rg.t_r_ns, rg.detuned_phi_s_on_phi0),
    };
    if !(gate.scheme_settings.t_r >= 0.0) || !(gate.t_g >= 2.0 * gate.scheme_settings.t_r) {
        problems.push(format!(
            "gate: need t_r_ns >= 0 and t_g_ns >= 2 t_r_ns (got t_r={}, t_g={})",
            gate.scheme_settings.t_r, gate.t_g
        ));
    }

    let rl = raw.landscape.clone().unwrap_or_default();
    let l_scheme = rl.scheme.unwrap_or(GateScheme::CouplerOnly);
    let landscape = LandscapeSettings {
        scheme: l_scheme,
        x: grid(rl.x_min_phi0, rl.x_max_phi0, rl.x_points, default_landscape_x(l_scheme)),
        t_g: grid(rl.t_g_min_ns, rl.t_g_max_ns, rl.t_g_points, default_landscape_t_g(l_scheme)),
        scheme_settings: scheme_settings(l_scheme, rl.t_r_ns, rl.detuned_phi_s_on_phi0),
    };
    landscape.x.check("landscape.x", &mut problems);
    landscape.t_g.check("landscape.t_g", &mut problems);
    if landscape.t_g.min < 2.0 * landscape.scheme_settings.t_r || landscape.scheme_settings.t_r < 0.0 {
        problems.push(format!(
            "landscape: t_g_min_ns {} is shorter than two ramps of {} ns",
            landscape.t_g.min, landscape.scheme_settings.t_r
        ));
    }

    let ro = raw.optimize.clone().unwrap_or_default();
    let o_scheme = ro.scheme.unwrap_or(GateScheme::CouplerOnly);
    let (wlo, whi) = default_optimize_window(o_scheme);
    let od = OptimizeOptions::default();
    let optimize = OptimizeSettings {
        scheme: o_scheme,
        x: grid(ro.x_min_phi0, ro.x_max_phi0, ro.x_points, default_optimize_x(o_scheme)),
        t_g_min: ro.t_g_min_ns.unwrap_or(wlo),
        t_g_max: ro.t_g_max_ns.unwrap_or(whi),
        d: ro.d.unwrap_or_else(|| vec![0.0, 0.01, 0.05]),
        options: OptimizeOptions {
            coarse_step: ro.coarse_step_ns.unwrap_or(od.coarse_step),
            refine_tol: ro.refine_tol_ns.unwrap_or(od.refine_tol),
            bins: ro.bins.unwrap_or(od.bins),
        },
        scheme_settings: scheme_settings(o_scheme, ro.t_r_ns, ro.detuned_phi_s_on_phi0),
    };
    optimize.x.check("optimize.x", &mut problems);
    if !(optimize.t_g_max >= optimize.t_g_min) || optimize.t_g_max < 2.0 * optimize.scheme_settings.t_r {
        problems.push(format!(
            "optimize: gate-time window [{}, {}] ns is empty or shorter than two ramps",
            optimize.t_g_min, optimize.t_g_max
        ));
    }
    if optimize.d.iter().any(|d| !(0.0..=0.05).contains(d)) || optimize.d.is_empty() {
        problems.push(format!("optimize.d values must lie in [0, 0.05], got {:?}", optimize.d));
    }
    if !(optimize.options.coarse_step > 0.0) || !(optimize.options.refine_tol > 0.0) || optimize.options.bins == 0 {
        problems.push("optimize: coarse_step_ns, refine_tol_ns and bins must be positive".into());
    }

    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    Ok(SimulationConfig {
        circuit: CircuitSpec { design, qubit_a, qubit_b, squid, sloshing, truncation },
        capacitance,
        basis: raw.basis.unwrap_or_default(),
        solver,
        noise,
        spectrum,
        zz_map,
        jc_star,
        two_level,
        gate,
        landscape,
        optimize,
        warnings,
    })
}

fn raw_qubit(q: &QubitParams, with_e_c: bool) -> RawQubit {
    RawQubit {
        e_j_ghz: Some(q.e_j),
        e_c_ghz: with_e_c.then_some(q.e_c),
        e_l_ghz: Some(q.e_l),
        phi_ext_phi0: Some(q.phi_ext),
    }
}

fn dump_raw(cfg: &SimulationConfig, all_keys: bool) -> String {
    let direct = cfg.capacitance.is_none() || all_keys;
    let c = &cfg.circuit;
    let raw = RawConfig {
        design: Some(c.design),
        basis: Some(cfg.basis),
        qubit_a: Some(raw_qubit(&c.qubit_a, direct)),
        qubit_b: Some(raw_qubit(&c.qubit_b, direct)),
        squid: Some(RawSquid {
            e_j_sigma_ghz: Some(c.squid.e_j_sigma),
            d: Some(c.squid.d),
            phi_s_phi0: Some(c.squid.phi_s),
            j_c_ghz: direct.then_some(c.squid.j_c),
        }),
        sloshing: Some(RawSloshing {
            e_c_sl_ghz: (direct || c.design == CircuitDesign::Grounded).then_some(c.sloshing.e_c_sl),
            n_g: Some(c.sloshing.n_g),
            j_sl_ghz: (direct || c.design == CircuitDesign::Grounded).then_some(c.sloshing.j_sl),
        }),
        capacitance: cfg.capacitance.filter(|_| !all_keys).map(|caps| RawCapacitance {
            c_ff: Some(caps.c),
            c_c_ff: Some(caps.c_c),
            c_g_ff: caps.c_g,
        }),
        truncation: Some(RawTruncation {
            n_fock: Some(c.truncation.n_fock),
            n_keep: Some(c.truncation.n_keep),
            n_charge_cut: Some(c.truncation.n_charge_cut),
            n_keep_sl: Some(c.truncation.n_keep_sl),
        }),
        solver: Some(RawSolver { rtol: Some(cfg.solver.rtol), atol: Some(cfg.solver.atol) }),
        noise: Some(RawNoise { t1_us: Some(cfg.noise.t1.clone()), t_phi_over_t1: Some(cfg.noise.t_phi_over_t1) }),
        spectrum: Some(RawSpectrum {
            phi_s_min_phi0: Some(cfg.spectrum.phi_s.min),
            phi_s_max_phi0: Some(cfg.spectrum.phi_s.max),
            phi_s_points: Some(cfg.spectrum.phi_s.points),
            levels: Some(cfg.spectrum.levels),
        }),
        zz_map: Some(RawZzGrid {
            e_j_sigma_min_ghz: Some(cfg.zz_map.e_j_sigma.min),
            e_j_sigma_max_ghz: Some(cfg.zz_map.e_j_sigma.max),
            e_j_sigma_points: Some(cfg.zz_map.e_j_sigma.points),
            d_min: Some(cfg.zz_map.d.min),
            d_max: Some(cfg.zz_map.d.max),
            d_points: Some(cfg.zz_map.d.points),
            j_max_ghz: None,
            tol_ghz: None,
        }),
        jc_star: Some(RawZzGrid {
            e_j_sigma_min_ghz: Some(cfg.jc_star.e_j_sigma.min),
            e_j_sigma_max_ghz: Some(cfg.jc_star.e_j_sigma.max),
            e_j_sigma_points: Some(cfg.jc_star.e_j_sigma.points),
            d_min: Some(cfg.jc_star.d.min),
            d_max: Some(cfg.jc_star.d.max),
            d_points: Some(cfg.jc_star.d.points),
            j_max_ghz: Some(cfg.jc_star.j_max),
            tol_ghz: Some(cfg.jc_star.tol),
        }),
        two_level: Some(RawTwoLevel {
            phi_s_min_phi0: Some(cfg.two_level.phi_s.min),
            phi_s_max_phi0: Some(cfg.two_level.phi_s.max),
            phi_s_points: Some(cfg.two_level.phi_s.points),
        }),
        gate: Some(RawGate {
            scheme: Some(cfg.gate.scheme),
            x_phi0: Some(cfg.gate.x),
            t_g_ns: Some(cfg.gate.t_g),
            t_r_ns: Some(cfg.gate.scheme_settings.t_r),
            detuned_phi_s_on_phi0: Some(cfg.gate.scheme_settings.detuned_phi_s_on),
        }),
        landscape: Some(RawLandscape {
            scheme: Some(cfg.landscape.scheme),
            x_min_phi0: Some(cfg.landscape.x.min),
            x_max_phi0: Some(cfg.landscape.x.max),
            x_points: Some(cfg.landscape.x.points),
            t_g_min_ns: Some(cfg.landscape.t_g.min),
            t_g_max_ns: Some(cfg.landscape.t_g.max),
            t_g_points: Some(cfg.landscape.t_g.points),
            t_r_ns: Some(cfg.landscape.scheme_settings.t_r),
            detuned_phi_s_on_phi0: Some(cfg.landscape.scheme_settings.detuned_phi_s_on),
        }),
        optimize: Some(RawOptimize {
            scheme: Some(cfg.optimize.scheme),
            x_min_phi0: Some(cfg.optimize.x.min),
            x_max_phi0: Some(cfg.optimize.x.max),
            x_points: Some(cfg.optimize.x.points),
            t_g_min_ns: Some(cfg.optimize.t_g_min),
            t_g_max_ns: Some(cfg.optimize.t_g_max),
            d: Some(cfg.optimize.d.clone()),
            coarse_step_ns: Some(cfg.optimize.options.coarse_step),
            refine_tol_ns: Some(cfg.optimize.options.refine_tol),
            bins: Some(cfg.optimize.options.bins),
            t_r_ns: Some(cfg.optimize.scheme_settings.t_r),
            detuned_phi_s_on_phi0: Some(cfg.optimize.scheme_settings.detuned_phi_s_on),
        }),
    };
    toml::to_string(&raw).expect("config serializes")
}
