//! Experiment configuration: a sectioned TOML document with unit-suffixed
//! quantities.
//!
//! Dimensioned keys take strings such as `"185 mT"`; bare numbers are
//! rejected for them. Unknown keys are errors. Every optional key has a
//! default (see [`ExperimentConfig::default_for`] and the README table), and
//! [`to_toml`] writes the fully normalized form, which parses back to the
//! same configuration.

use std::path::PathBuf;

use nalgebra::Vector3;
use toml::{Table, Value};

use crate::dynamics::{
    DriveParams, LinkBudget, RelaxationParams, DEFAULT_CONVENTION_FACTOR, DEFAULT_KAPPA,
};
use crate::error::{Error, Result};
use crate::io::Format;
use crate::spectrum::{uniform_grid, LinewidthModel, SpectrometerSetup};
use crate::spin::{Ensemble, HalfInteger, InteractionTensor, OrientationCorrection, SpinSystem};
use crate::units::{format_quantity, parse_quantity, Dimension};

/// Four magnetically nonequivalent Er:YSO sites in effective-g mode.
pub const ER_YSO_EXAMPLE: &str = include_str!("../configs/er_yso_example.toml");
/// Full-tensor odd isotope next to the even isotopes of one site.
pub const ER167_FULL_TENSOR_EXAMPLE: &str = include_str!("../configs/er167_full_tensor.toml");

/// Principal values plus the z-y-z Euler frame (degrees) of one tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorSpec {
    pub principal: [f64; 3],
    pub frame: [f64; 3],
}

impl TensorSpec {
    fn tensor(&self) -> Result<InteractionTensor> {
        InteractionTensor::from_principal(self.principal, self.frame)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SiteKind {
    EffectiveG {
        g: f64,
    },
    FullTensor {
        nuclear_spin: HalfInteger,
        g: TensorSpec,
        /// Hz
        a: Option<TensorSpec>,
        /// Hz
        q: Option<TensorSpec>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteConfig {
    pub label: String,
    pub isotope: String,
    pub abundance: f64,
    pub kind: SiteKind,
}

impl SiteConfig {
    pub fn spin_system(&self) -> Result<SpinSystem> {
        let sys = match &self.kind {
            SiteKind::EffectiveG { g } => {
                let mut s = SpinSystem::effective_g(*g, &self.label, self.abundance);
                s.isotope_label = self.isotope.clone();
                s
            }
            SiteKind::FullTensor {
                nuclear_spin,
                g,
                a,
                q,
            } => SpinSystem {
                electron_spin: HalfInteger::HALF,
                nuclear_spin: *nuclear_spin,
                g: g.tensor()?,
                a: a.as_ref().map(TensorSpec::tensor).transpose()?,
                q: q.as_ref().map(TensorSpec::tensor).transpose()?,
                site_label: self.label.clone(),
                isotope_label: self.isotope.clone(),
                abundance: self.abundance,
            },
        };
        sys.validate()?;
        Ok(sys)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetupConfig {
    pub spectrometer: SpectrometerSetup,
    /// Effective g of the pumped site, used by rate laws, Rabi conversion
    /// and spin-temperature fits.
    pub g_eff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveConfig {
    pub params: DriveParams,
    /// s
    pub observe_duration: f64,
    /// s
    pub step: f64,
    pub convention_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Working point, T.
    pub field: f64,
    /// Cryostat temperature at the working point, K.
    pub temperature: f64,
    pub field_start: f64,
    pub field_stop: f64,
    pub field_steps: usize,
    pub frequency_start: f64,
    pub frequency_stop: f64,
    pub frequency_steps: usize,
    pub temperatures: Vec<f64>,
}

impl SweepConfig {
    pub fn field_axis(&self) -> Result<Vec<f64>> {
        uniform_grid(self.field_start, self.field_stop, self.field_steps)
    }

    pub fn frequency_axis(&self) -> Result<Vec<f64>> {
        uniform_grid(
            self.frequency_start,
            self.frequency_stop,
            self.frequency_steps,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoleConfig {
    pub depth: f64,
    /// Hole FWHM as a fraction of the parent linewidth.
    pub width_ratio: f64,
    /// Hz
    pub gamma_sd: f64,
    /// Relaxation rate outside the hole's FWHM relative to inside.
    pub outside_factor: f64,
    /// s
    pub times: Vec<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub setup: SetupConfig,
    pub sites: Vec<SiteConfig>,
    pub corrections: Vec<OrientationCorrection>,
    pub linewidth: LinewidthModel,
    pub relaxation: RelaxationParams,
    pub drive: DriveConfig,
    pub link_budget: LinkBudget,
    pub sweep: SweepConfig,
    pub hole: HoleConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// Everything but the sites at its default value.
    pub fn default_for(sites: Vec<SiteConfig>) -> Self {
        ExperimentConfig {
            setup: SetupConfig {
                spectrometer: SpectrometerSetup::default(),
                g_eff: 1.41,
            },
            sites,
            corrections: vec![],
            linewidth: LinewidthModel::default(),
            relaxation: RelaxationParams {
                w_ff: 0.05,
                w_d: 23.0,
                t_min: 0.069,
            },
            drive: DriveConfig {
                params: DriveParams {
                    rabi: 3.9,
                    detuning: 0.0,
                    burn_duration: 0.128,
                    transverse_rate: 0.5,
                },
                observe_duration: 60.0,
                step: 5e-3,
                convention_factor: DEFAULT_CONVENTION_FACTOR,
            },
            link_budget: LinkBudget {
                source_power_dbm: 15.0,
                attenuation_stages: vec![-40.0, -55.0],
                mode_coupling_db: -20.0,
                kappa: DEFAULT_KAPPA,
            },
            sweep: SweepConfig {
                field: 0.185,
                temperature: 0.01,
                field_start: 0.07,
                field_stop: 0.3,
                field_steps: 24,
                frequency_start: 1e9,
                frequency_stop: 8e9,
                frequency_steps: 3501,
                temperatures: (0..10).map(|i| 0.01 + 0.03 * f64::from(i)).collect(),
            },
            hole: HoleConfig {
                depth: 0.075,
                width_ratio: 0.65,
                gamma_sd: 1e3,
                outside_factor: 2.0,
                times: vec![0.0, 5.0, 10.0, 20.0, 40.0],
                points: 401,
            },
            output: OutputConfig {
                directory: PathBuf::from("out"),
                format: Format::Csv,
            },
        }
    }

    pub fn ensemble(&self) -> Result<Ensemble> {
        let members = self
            .sites
            .iter()
            .map(SiteConfig::spin_system)
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(members, self.corrections.clone())
    }

    fn validate(&self) -> Result<()> {
        self.ensemble()?;
        self.drive.params.validate()?;
        self.link_budget.validate()?;
        self.sweep
            .field_axis()
            .map_err(|e| Error::config("sweep.field_steps", e.to_string()))?;
        self.sweep
            .frequency_axis()
            .map_err(|e| Error::config("sweep.frequency_steps", e.to_string()))?;
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        context: "config".into(),
        message: e.message().to_string(),
    })?;
    check_keys(
        &root,
        "",
        &[
            "setup",
            "site",
            "correction",
            "linewidth",
            "relaxation",
            "drive",
            "link_budget",
            "sweep",
            "hole",
            "output",
        ],
    )?;

    let sites = array_of_tables(&root, "site")?;
    if sites.is_empty() {
        return Err(Error::config("site", "at least one [[site]] is required"));
    }
    let default_abundance = 1.0 / sites.len() as f64;
    let sites = sites
        .iter()
        .enumerate()
        .map(|(i, t)| parse_site(t, &format!("site[{i}]"), default_abundance))
        .collect::<Result<Vec<_>>>()?;
    let mut cfg = ExperimentConfig::default_for(sites);

    if let Some(t) = section(&root, "setup")? {
        parse_setup(&mut cfg.setup, &t)?;
    }
    cfg.corrections = array_of_tables(&root, "correction")?
        .iter()
        .enumerate()
        .map(|(i, t)| parse_correction(t, &format!("correction[{i}]")))
        .collect::<Result<_>>()?;
    if let Some(t) = section(&root, "linewidth")? {
        let k = Keys::new(&t, "linewidth", &["gamma0", "delta_gamma"])?;
        let gamma0 = k.required_quantity("gamma0", Dimension::Frequency)?;
        let slope = k
            .quantity("delta_gamma", Dimension::FrequencyPerField)?
            .unwrap_or(cfg.linewidth.delta_gamma);
        cfg.linewidth = LinewidthModel::new(gamma0, slope)
            .map_err(|e| Error::config("linewidth", e.to_string()))?;
    }
    if let Some(t) = section(&root, "relaxation")? {
        let k = Keys::new(&t, "relaxation", &["w_ff", "w_d", "t_min"])?;
        let r = &mut cfg.relaxation;
        k.set_quantity("w_ff", Dimension::Frequency, &mut r.w_ff)?;
        k.set_quantity("w_d", Dimension::FrequencyPerField5, &mut r.w_d)?;
        k.set_quantity("t_min", Dimension::Temperature, &mut r.t_min)?;
        *r = RelaxationParams::new(r.w_ff, r.w_d, r.t_min)
            .map_err(|e| Error::config("relaxation", e.to_string()))?;
    }
    if let Some(t) = section(&root, "drive")? {
        parse_drive(&mut cfg.drive, &t)?;
    }
    if let Some(t) = section(&root, "link_budget")? {
        let k = Keys::new(
            &t,
            "link_budget",
            &["source_power", "stages", "mode_coupling", "kappa"],
        )?;
        let lb = &mut cfg.link_budget;
        k.set_quantity(
            "source_power",
            Dimension::PowerDbm,
            &mut lb.source_power_dbm,
        )?;
        if let Some(stages) = k.quantity_list("stages", Dimension::Gain)? {
            lb.attenuation_stages = stages;
        }
        k.set_quantity("mode_coupling", Dimension::Gain, &mut lb.mode_coupling_db)?;
        k.set_quantity("kappa", Dimension::FieldPerRootPower, &mut lb.kappa)?;
        k.check(lb.kappa > 0.0, "kappa", "must be > 0")?;
    }
    if let Some(t) = section(&root, "sweep")? {
        parse_sweep(&mut cfg.sweep, &t)?;
    }
    if let Some(t) = section(&root, "hole")? {
        parse_hole(&mut cfg.hole, &t)?;
    }
    if let Some(t) = section(&root, "output")? {
        let k = Keys::new(&t, "output", &["directory", "format"])?;
        if let Some(d) = k.string("directory")? {
            cfg.output.directory = PathBuf::from(d);
        }
        if let Some(f) = k.string("format")? {
            cfg.output.format = f
                .parse()
                .map_err(|e: Error| Error::config("output.format", e.to_string()))?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_site(t: &Table, path: &str, default_abundance: f64) -> Result<SiteConfig> {
    let k = Keys::new(
        t,
        path,
        &[
            "label",
            "isotope",
            "abundance",
            "mode",
            "g",
            "g_frame",
            "nuclear_spin",
            "a",
            "a_frame",
            "q",
            "q_frame",
        ],
    )?;
    let label = k.string("label")?.ok_or_else(|| k.missing("label"))?;
    let isotope = k.string("isotope")?.unwrap_or_else(|| "I=0".into());
    let abundance = k.number("abundance")?.unwrap_or(default_abundance);
    k.check(
        (0.0..=1.0).contains(&abundance),
        "abundance",
        "must lie in [0, 1]",
    )?;
    let mode = k.string("mode")?.unwrap_or_else(|| "effective-g".into());
    let kind = match mode.as_str() {
        "effective-g" => {
            for key in ["g_frame", "nuclear_spin", "a", "a_frame", "q", "q_frame"] {
                if t.contains_key(key) {
                    return Err(Error::config(
                        k.key(key),
                        "only valid with mode = \"full-tensor\"",
                    ));
                }
            }
            let g = k.number("g")?.ok_or_else(|| k.missing("g"))?;
            k.check(g > 0.0, "g", "must be > 0")?;
            SiteKind::EffectiveG { g }
        }
        "full-tensor" => {
            let spin = k.number("nuclear_spin")?.unwrap_or(0.0);
            let nuclear_spin = HalfInteger::from_f64(spin)
                .map_err(|e| Error::config(k.key("nuclear_spin"), e.to_string()))?;
            let g = k
                .tensor("g", "g_frame", None)?
                .ok_or_else(|| k.missing("g"))?;
            let a = k.tensor("a", "a_frame", Some(Dimension::Frequency))?;
            let q = k.tensor("q", "q_frame", Some(Dimension::Frequency))?;
            SiteKind::FullTensor {
                nuclear_spin,
                g,
                a,
                q,
            }
        }
        other => {
            return Err(Error::config(
                k.key("mode"),
                format!("expected \"effective-g\" or \"full-tensor\", got \"{other}\""),
            ))
        }
    };
    Ok(SiteConfig {
        label,
        isotope,
        abundance,
        kind,
    })
}

fn parse_correction(t: &Table, path: &str) -> Result<OrientationCorrection> {
    let k = Keys::new(t, path, &["site", "euler_b_d2", "euler_d1_b"])?;
    let site = k.string("site")?.ok_or_else(|| k.missing("site"))?;
    let b_d2 = k.quantity("euler_b_d2", Dimension::Angle)?.unwrap_or(0.0);
    let d1_b = k.quantity("euler_d1_b", Dimension::Angle)?.unwrap_or(0.0);
    OrientationCorrection::new(b_d2, d1_b, site).map_err(|e| Error::config(path, e.to_string()))
}

fn parse_setup(s: &mut SetupConfig, t: &Table) -> Result<()> {
    let k = Keys::new(
        t,
        "setup",
        &[
            "field_direction",
            "drive_direction",
            "spin_temperature",
            "line_cutoff",
            "g_eff",
        ],
    )?;
    let sp = &mut s.spectrometer;
    if let Some(v) = k.vector("field_direction")? {
        sp.field_direction = v;
    }
    if let Some(v) = k.vector("drive_direction")? {
        sp.drive_direction = v;
    }
    k.set_quantity(
        "spin_temperature",
        Dimension::Temperature,
        &mut sp.spin_temperature,
    )?;
    k.check(sp.spin_temperature > 0.0, "spin_temperature", "must be > 0")?;
    if let Some(c) = k.number("line_cutoff")? {
        k.check((0.0..1.0).contains(&c), "line_cutoff", "must lie in [0, 1)")?;
        sp.line_cutoff = c;
    }
    if let Some(g) = k.number("g_eff")? {
        k.check(g > 0.0, "g_eff", "must be > 0")?;
        s.g_eff = g;
    }
    Ok(())
}

fn parse_drive(d: &mut DriveConfig, t: &Table) -> Result<()> {
    let k = Keys::new(
        t,
        "drive",
        &[
            "rabi",
            "detuning",
            "burn_duration",
            "transverse_rate",
            "observe_duration",
            "step",
            "convention_factor",
        ],
    )?;
    let p = &mut d.params;
    k.set_quantity("rabi", Dimension::Frequency, &mut p.rabi)?;
    k.set_quantity("detuning", Dimension::Frequency, &mut p.detuning)?;
    k.set_quantity("burn_duration", Dimension::Time, &mut p.burn_duration)?;
    k.set_quantity(
        "transverse_rate",
        Dimension::Frequency,
        &mut p.transverse_rate,
    )?;
    k.set_quantity("observe_duration", Dimension::Time, &mut d.observe_duration)?;
    k.set_quantity("step", Dimension::Time, &mut d.step)?;
    if let Some(x) = k.number("convention_factor")? {
        d.convention_factor = x;
    }
    k.check(p.rabi >= 0.0, "rabi", "must be >= 0")?;
    k.check(p.burn_duration >= 0.0, "burn_duration", "must be >= 0")?;
    k.check(p.transverse_rate > 0.0, "transverse_rate", "must be > 0")?;
    k.check(
        d.observe_duration >= 0.0,
        "observe_duration",
        "must be >= 0",
    )?;
    k.check(d.step > 0.0, "step", "must be > 0")?;
    k.check(
        d.convention_factor > 0.0 && d.convention_factor <= 1.0,
        "convention_factor",
        "must lie in (0, 1]",
    )
}

fn parse_sweep(s: &mut SweepConfig, t: &Table) -> Result<()> {
    let k = Keys::new(
        t,
        "sweep",
        &[
            "field",
            "temperature",
            "field_start",
            "field_stop",
            "field_steps",
            "frequency_start",
            "frequency_stop",
            "frequency_steps",
            "temperatures",
        ],
    )?;
    k.set_quantity("field", Dimension::MagneticField, &mut s.field)?;
    k.set_quantity("temperature", Dimension::Temperature, &mut s.temperature)?;
    k.set_quantity("field_start", Dimension::MagneticField, &mut s.field_start)?;
    k.set_quantity("field_stop", Dimension::MagneticField, &mut s.field_stop)?;
    k.set_quantity(
        "frequency_start",
        Dimension::Frequency,
        &mut s.frequency_start,
    )?;
    k.set_quantity(
        "frequency_stop",
        Dimension::Frequency,
        &mut s.frequency_stop,
    )?;
    if let Some(n) = k.count("field_steps")? {
        s.field_steps = n;
    }
    if let Some(n) = k.count("frequency_steps")? {
        s.frequency_steps = n;
    }
    if let Some(ts) = k.quantity_list("temperatures", Dimension::Temperature)? {
        s.temperatures = ts;
    }
    k.check(s.field >= 0.0, "field", "must be >= 0")?;
    k.check(s.temperature >= 0.0, "temperature", "must be >= 0")?;
    k.check(s.field_start >= 0.0, "field_start", "must be >= 0")?;
    k.check(
        s.field_stop > s.field_start || (s.field_steps == 1 && s.field_stop == s.field_start),
        "field_stop",
        "must exceed field_start",
    )?;
    k.check(
        s.frequency_start > 0.0 && s.frequency_stop > s.frequency_start,
        "frequency_stop",
        "must exceed frequency_start > 0",
    )?;
    k.check(
        !s.temperatures.is_empty(),
        "temperatures",
        "must not be empty",
    )?;
    k.check(
        s.temperatures.iter().all(|&t| t >= 0.0),
        "temperatures",
        "must all be >= 0",
    )
}

fn parse_hole(h: &mut HoleConfig, t: &Table) -> Result<()> {
    let k = Keys::new(
        t,
        "hole",
        &[
            "depth",
            "width_ratio",
            "gamma_sd",
            "outside_factor",
            "times",
            "points",
        ],
    )?;
    if let Some(x) = k.number("depth")? {
        h.depth = x;
    }
    if let Some(x) = k.number("width_ratio")? {
        h.width_ratio = x;
    }
    if let Some(x) = k.number("outside_factor")? {
        h.outside_factor = x;
    }
    k.set_quantity("gamma_sd", Dimension::Frequency, &mut h.gamma_sd)?;
    if let Some(ts) = k.quantity_list("times", Dimension::Time)? {
        h.times = ts;
    }
    if let Some(n) = k.count("points")? {
        h.points = n;
    }
    k.check(
        (0.0..=1.0).contains(&h.depth),
        "depth",
        "must lie in [0, 1]",
    )?;
    k.check(h.width_ratio > 0.0, "width_ratio", "must be > 0")?;
    k.check(h.gamma_sd >= 0.0, "gamma_sd", "must be >= 0")?;
    k.check(h.outside_factor >= 0.0, "outside_factor", "must be >= 0")?;
    k.check(h.points >= 5, "points", "must be >= 5")?;
    k.check(
        !h.times.is_empty() && h.times.iter().all(|&t| t >= 0.0),
        "times",
        "must be a non-empty list of times >= 0",
    )
}

fn check_keys(t: &Table, path: &str, allowed: &[&str]) -> Result<()> {
    for key in t.keys() {
        if !allowed.contains(&key.as_str()) {
            let full = if path.is_empty() {
                key.clone()
            } else {
                format!("{path}.{key}")
            };
            return Err(Error::config(
                full,
                format!("unknown key; expected one of {}", allowed.join(", ")),
            ));
        }
    }
    Ok(())
}

fn section(root: &Table, name: &str) -> Result<Option<Table>> {
    match root.get(name) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t.clone())),
        Some(_) => Err(Error::config(name, "expected a [section]")),
    }
}

fn array_of_tables(root: &Table, name: &str) -> Result<Vec<Table>> {
    match root.get(name) {
        None => Ok(vec![]),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::Table(t) => Ok(t.clone()),
                _ => Err(Error::config(format!("{name}[{i}]"), "expected a table")),
            })
            .collect(),
        Some(_) => Err(Error::config(name, format!("expected [[{name}]] entries"))),
    }
}

/// Typed access to the keys of one section, with errors naming `path.key`.
struct Keys<'a> {
    table: &'a Table,
    path: &'a str,
}

impl<'a> Keys<'a> {
    fn new(table: &'a Table, path: &'a str, allowed: &[&str]) -> Result<Self> {
        check_keys(table, path, allowed)?;
        Ok(Keys { table, path })
    }

    fn key(&self, key: &str) -> String {
        format!("{}.{key}", self.path)
    }

    fn missing(&self, key: &str) -> Error {
        Error::config(self.key(key), "required key is missing")
    }

    fn check(&self, ok: bool, key: &str, msg: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::config(self.key(key), msg))
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(Error::config(self.key(key), "expected a string")),
        }
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => as_number(v)
                .map(Some)
                .ok_or_else(|| Error::config(self.key(key), "expected a plain number")),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Integer(n)) if *n >= 1 => Ok(Some(*n as usize)),
            Some(_) => Err(Error::config(self.key(key), "expected an integer >= 1")),
        }
    }

    fn quantity(&self, key: &str, dim: Dimension) -> Result<Option<f64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => self.parse_quantity_value(key, v, dim).map(Some),
        }
    }

    fn required_quantity(&self, key: &str, dim: Dimension) -> Result<f64> {
        self.quantity(key, dim)?.ok_or_else(|| self.missing(key))
    }

    fn set_quantity(&self, key: &str, dim: Dimension, slot: &mut f64) -> Result<()> {
        if let Some(v) = self.quantity(key, dim)? {
            *slot = v;
        }
        Ok(())
    }

    fn parse_quantity_value(&self, key: &str, v: &Value, dim: Dimension) -> Result<f64> {
        match v {
            Value::String(s) => {
                parse_quantity(s, dim).map_err(|e| Error::config(self.key(key), e.to_string()))
            }
            Value::Integer(_) | Value::Float(_) => Err(Error::config(
                self.key(key),
                format!(
                    "bare number {v} needs a unit, e.g. \"{v} {}\"",
                    dim.si_unit()
                ),
            )),
            _ => Err(Error::config(
                self.key(key),
                "expected a quantity string such as \"185 mT\"",
            )),
        }
    }

    fn array(&self, key: &str, len: Option<usize>) -> Result<Option<&'a Vec<Value>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) if len.is_none_or(|n| a.len() == n) => Ok(Some(a)),
            Some(_) => Err(Error::config(
                self.key(key),
                match len {
                    Some(n) => format!("expected an array of {n} values"),
                    None => "expected an array".into(),
                },
            )),
        }
    }

    fn quantity_list(&self, key: &str, dim: Dimension) -> Result<Option<Vec<f64>>> {
        self.array(key, None)?
            .map(|a| {
                a.iter()
                    .map(|v| self.parse_quantity_value(key, v, dim))
                    .collect()
            })
            .transpose()
    }

    fn triple(&self, key: &str, dim: Option<Dimension>) -> Result<Option<[f64; 3]>> {
        let Some(a) = self.array(key, Some(3))? else {
            return Ok(None);
        };
        let mut out = [0.0; 3];
        for (slot, v) in out.iter_mut().zip(a) {
            *slot = match dim {
                Some(d) => self.parse_quantity_value(key, v, d)?,
                None => as_number(v)
                    .ok_or_else(|| Error::config(self.key(key), "expected plain numbers"))?,
            };
        }
        Ok(Some(out))
    }

    fn vector(&self, key: &str) -> Result<Option<Vector3<f64>>> {
        // Already-unit vectors are kept bit for bit so normalization is a
        // fixed point.
        self.triple(key, None)?
            .map(|v| {
                let raw = Vector3::from(v);
                if (raw.norm() - 1.0).abs() <= crate::spin::UNIT_TOLERANCE {
                    return Ok(raw);
                }
                crate::spin::unit(v).map_err(|e| Error::config(self.key(key), e.to_string()))
            })
            .transpose()
    }

    fn tensor(
        &self,
        key: &str,
        frame_key: &str,
        dim: Option<Dimension>,
    ) -> Result<Option<TensorSpec>> {
        let Some(principal) = self.triple(key, dim)? else {
            if self.table.contains_key(frame_key) {
                return Err(self.missing(key));
            }
            return Ok(None);
        };
        let frame = self
            .triple(frame_key, Some(Dimension::Angle))?
            .unwrap_or([0.0; 3]);
        Ok(Some(TensorSpec { principal, frame }))
    }
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Integer(n) => Some(*n as f64),
        Value::Float(x) => Some(*x),
        _ => None,
    }
}

/// Fully explicit, SI-normalized form of `cfg`. Parsing the output yields
/// `cfg` again, so a second pass is a fixed point.
pub fn to_toml(cfg: &ExperimentConfig) -> String {
    use std::fmt::Write;
    let q = format_quantity;
    let qs = |v: &[f64], d: Dimension| -> String {
        let parts: Vec<String> = v.iter().map(|&x| format!("\"{}\"", q(x, d))).collect();
        format!("[{}]", parts.join(", "))
    };
    let num = |x: f64| format!("{x:?}");
    let vec3 = |v: &Vector3<f64>| format!("[{}, {}, {}]", num(v.x), num(v.y), num(v.z));
    let text = |s: &str| Value::String(s.to_string()).to_string();

    let mut o = String::new();
    let sp = &cfg.setup.spectrometer;
    let _ = writeln!(o, "[setup]");
    let _ = writeln!(o, "field_direction = {}", vec3(&sp.field_direction));
    let _ = writeln!(o, "drive_direction = {}", vec3(&sp.drive_direction));
    let _ = writeln!(
        o,
        "spin_temperature = \"{}\"",
        q(sp.spin_temperature, Dimension::Temperature)
    );
    let _ = writeln!(o, "line_cutoff = {}", num(sp.line_cutoff));
    let _ = writeln!(o, "g_eff = {}", num(cfg.setup.g_eff));

    for s in &cfg.sites {
        let _ = writeln!(o, "\n[[site]]");
        let _ = writeln!(o, "label = {}", text(&s.label));
        let _ = writeln!(o, "isotope = {}", text(&s.isotope));
        let _ = writeln!(o, "abundance = {}", num(s.abundance));
        match &s.kind {
            SiteKind::EffectiveG { g } => {
                let _ = writeln!(o, "mode = \"effective-g\"");
                let _ = writeln!(o, "g = {}", num(*g));
            }
            SiteKind::FullTensor {
                nuclear_spin,
                g,
                a,
                q: quad,
            } => {
                let _ = writeln!(o, "mode = \"full-tensor\"");
                let _ = writeln!(o, "nuclear_spin = {}", num(nuclear_spin.value()));
                let p = g.principal;
                let _ = writeln!(o, "g = [{}, {}, {}]", num(p[0]), num(p[1]), num(p[2]));
                let _ = writeln!(o, "g_frame = {}", qs(&g.frame, Dimension::Angle));
                for (name, t) in [("a", a), ("q", quad)] {
                    if let Some(t) = t {
                        let _ = writeln!(o, "{name} = {}", qs(&t.principal, Dimension::Frequency));
                        let _ = writeln!(o, "{name}_frame = {}", qs(&t.frame, Dimension::Angle));
                    }
                }
            }
        }
    }
    for c in &cfg.corrections {
        let _ = writeln!(o, "\n[[correction]]");
        let _ = writeln!(o, "site = {}", text(&c.applies_to));
        let _ = writeln!(o, "euler_b_d2 = \"{}\"", q(c.euler_b_d2, Dimension::Angle));
        let _ = writeln!(o, "euler_d1_b = \"{}\"", q(c.euler_d1_b, Dimension::Angle));
    }

    let lw = &cfg.linewidth;
    let _ = writeln!(o, "\n[linewidth]");
    let _ = writeln!(o, "gamma0 = \"{}\"", q(lw.gamma0, Dimension::Frequency));
    let _ = writeln!(
        o,
        "delta_gamma = \"{}\"",
        q(lw.delta_gamma, Dimension::FrequencyPerField)
    );

    let r = &cfg.relaxation;
    let _ = writeln!(o, "\n[relaxation]");
    let _ = writeln!(o, "w_ff = \"{}\"", q(r.w_ff, Dimension::Frequency));
    let _ = writeln!(o, "w_d = \"{}\"", q(r.w_d, Dimension::FrequencyPerField5));
    let _ = writeln!(o, "t_min = \"{}\"", q(r.t_min, Dimension::Temperature));

    let d = &cfg.drive;
    let _ = writeln!(o, "\n[drive]");
    let _ = writeln!(o, "rabi = \"{}\"", q(d.params.rabi, Dimension::Frequency));
    let _ = writeln!(
        o,
        "detuning = \"{}\"",
        q(d.params.detuning, Dimension::Frequency)
    );
    let _ = writeln!(
        o,
        "burn_duration = \"{}\"",
        q(d.params.burn_duration, Dimension::Time)
    );
    let _ = writeln!(
        o,
        "transverse_rate = \"{}\"",
        q(d.params.transverse_rate, Dimension::Frequency)
    );
    let _ = writeln!(
        o,
        "observe_duration = \"{}\"",
        q(d.observe_duration, Dimension::Time)
    );
    let _ = writeln!(o, "step = \"{}\"", q(d.step, Dimension::Time));
    let _ = writeln!(o, "convention_factor = {}", num(d.convention_factor));

    let lb = &cfg.link_budget;
    let _ = writeln!(o, "\n[link_budget]");
    let _ = writeln!(
        o,
        "source_power = \"{}\"",
        q(lb.source_power_dbm, Dimension::PowerDbm)
    );
    let _ = writeln!(
        o,
        "stages = {}",
        qs(&lb.attenuation_stages, Dimension::Gain)
    );
    let _ = writeln!(
        o,
        "mode_coupling = \"{}\"",
        q(lb.mode_coupling_db, Dimension::Gain)
    );
    let _ = writeln!(
        o,
        "kappa = \"{}\"",
        q(lb.kappa, Dimension::FieldPerRootPower)
    );

    let s = &cfg.sweep;
    let _ = writeln!(o, "\n[sweep]");
    let _ = writeln!(o, "field = \"{}\"", q(s.field, Dimension::MagneticField));
    let _ = writeln!(
        o,
        "temperature = \"{}\"",
        q(s.temperature, Dimension::Temperature)
    );
    let _ = writeln!(
        o,
        "field_start = \"{}\"",
        q(s.field_start, Dimension::MagneticField)
    );
    let _ = writeln!(
        o,
        "field_stop = \"{}\"",
        q(s.field_stop, Dimension::MagneticField)
    );
    let _ = writeln!(o, "field_steps = {}", s.field_steps);
    let _ = writeln!(
        o,
        "frequency_start = \"{}\"",
        q(s.frequency_start, Dimension::Frequency)
    );
    let _ = writeln!(
        o,
        "frequency_stop = \"{}\"",
        q(s.frequency_stop, Dimension::Frequency)
    );
    let _ = writeln!(o, "frequency_steps = {}", s.frequency_steps);
    let _ = writeln!(
        o,
        "temperatures = {}",
        qs(&s.temperatures, Dimension::Temperature)
    );

    let h = &cfg.hole;
    let _ = writeln!(o, "\n[hole]");
    let _ = writeln!(o, "depth = {}", num(h.depth));
    let _ = writeln!(o, "width_ratio = {}", num(h.width_ratio));
    let _ = writeln!(o, "gamma_sd = \"{}\"", q(h.gamma_sd, Dimension::Frequency));
    let _ = writeln!(o, "outside_factor = {}", num(h.outside_factor));
    let _ = writeln!(o, "times = {}", qs(&h.times, Dimension::Time));
    let _ = writeln!(o, "points = {}", h.points);

    let _ = writeln!(o, "\n[output]");
    let _ = writeln!(
        o,
        "directory = {}",
        text(&cfg.output.directory.to_string_lossy())
    );
    let _ = writeln!(o, "format = \"{}\"", cfg.output.format.name());
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[[site]]\nlabel = \"X\"\ng = 2\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.sites.len(), 1);
        assert_eq!(cfg.sites[0].abundance, 1.0);
        assert_eq!(cfg.linewidth, LinewidthModel::default());
        assert_eq!(cfg.sweep.field, 0.185);
        assert_eq!(cfg.output.format, Format::Csv);
    }

    #[test]
    fn missing_gamma0_is_named() {
        let text = format!("{MINIMAL}[linewidth]\ndelta_gamma = \"0.21 MHz/mT\"\n");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("linewidth.gamma0"), "{err}");
    }

    #[test]
    fn bare_number_for_dimensioned_key_is_rejected() {
        let text = format!("{MINIMAL}[sweep]\nfield = 0.185\n");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("sweep.field") && err.contains("unit"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config(&format!("{MINIMAL}[drive]\nrabbi = \"3 Hz\"\n"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("drive.rabbi"), "{err}");
        assert!(parse_config(&format!("{MINIMAL}[extras]\n")).is_err());
    }

    #[test]
    fn out_of_range_reports_bounds() {
        let err = parse_config(&format!("{MINIMAL}[hole]\ndepth = 1.5\n"))
            .unwrap_err()
            .to_string();
        assert!(
            err.contains("hole.depth") && err.contains("[0, 1]"),
            "{err}"
        );
    }

    #[test]
    fn correction_for_unknown_site_fails() {
        let text = format!("{MINIMAL}[[correction]]\nsite = \"Y\"\neuler_b_d2 = \"3 deg\"\n");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn normalization_is_idempotent() {
        for text in [MINIMAL, ER_YSO_EXAMPLE, ER167_FULL_TENSOR_EXAMPLE] {
            let cfg = parse_config(text).unwrap();
            let once = to_toml(&cfg);
            let again = parse_config(&once).unwrap();
            assert_eq!(again, cfg);
            assert_eq!(to_toml(&again), once);
        }
    }

    #[test]
    fn shipped_full_tensor_config_builds_sixteen_level_member() {
        let cfg = parse_config(ER167_FULL_TENSOR_EXAMPLE).unwrap();
        let e = cfg.ensemble().unwrap();
        assert!(e.members.iter().any(|m| m.dimension() == 16));
    }
}
