//! `holeburn` command line: config-driven simulations and fits that write
//! plot-ready traces, fit reports and a run manifest.
//!
//! Every invocation writes `manifest.json` into the output directory. It
//! holds the normalized configuration (after command-line overrides), the
//! seed, the argument list and SHA-256 digests of the input and of every
//! file written, so a run can be repeated from the manifest alone.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use holeburn_core::config::{parse_config, to_toml, ExperimentConfig, ER_YSO_EXAMPLE};
use holeburn_core::constants::BOHR_MAGNETON_HZ_PER_T;
use holeburn_core::dynamics::{
    effective_temperature, link_budget, rate_at_spin_temperature, rate_scan, simulate_hole_burning,
    total_relaxation_rate, RecoveryTrace,
};
use holeburn_core::fit::montecarlo::{add_noise, draw_seed, NoiseModel};
use holeburn_core::fit::{
    self, boltzmann_area, fit_boltzmann_temperature, fit_exponential_recovery, fit_lorentzian,
    fit_relaxation_model, format_report, AreaForm, FitResult, SweepMode, Weighting,
};
use holeburn_core::io::{self, Format, Schema, TraceFile};
use holeburn_core::spectrum::{
    ensemble_lines, evolve_hole, linewidth_at, step_rate_profile, synthesize_absorption,
    synthesize_field_map, uniform_grid, HoleProfileParams, LorentzianLine,
};
use holeburn_core::units::{parse_quantity, Dimension};

#[derive(Debug, Parser)]
#[command(
    name = "holeburn",
    version,
    about = "Spin spectra, spectral hole burning and relaxation fits for rare-earth spin ensembles"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment config (TOML). Without it the built-in Er:YSO example is used.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Seed for noise and bootstrap draws. Required whenever either is used.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,

    /// Working field, e.g. `185mT`.
    #[arg(long = "B", global = true, value_name = "FIELD")]
    pub field: Option<String>,

    /// Cryostat temperature, e.g. `10mK`.
    #[arg(long = "T", global = true, value_name = "TEMPERATURE")]
    pub temperature: Option<String>,

    /// Burn pulse length, e.g. `128ms`. With fit-recovery --input, the
    /// start of the fitted tail.
    #[arg(long = "burn-time", global = true, value_name = "TIME")]
    pub burn_time: Option<String>,

    /// Data file to fit instead of synthesizing one from the config.
    #[arg(long, global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,

    /// Fractional Gaussian noise added to synthesized fit data.
    #[arg(long, global = true, default_value_t = 0.0, value_name = "FRACTION")]
    pub noise: f64,

    /// Residual-bootstrap resamples for fit uncertainties (0 = off).
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    pub bootstrap: usize,

    /// Swept variable for fit-relaxation.
    #[arg(long, global = true, value_enum, default_value_t = SweepArg::Field)]
    pub sweep: SweepArg,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Absorption spectrum of all sites at the working field.
    SimulateSpectrum,
    /// Field-frequency absorption map over the configured field sweep.
    SimulateMap,
    /// Bloch burn-and-recover trace, hole evolution and a rate scan.
    SimulateHole,
    /// Lorentzian fit of one absorption line.
    FitLine,
    /// Exponential fit of a hole recovery tail.
    FitRecovery,
    /// Flip-flop plus direct-process fit versus field or temperature.
    FitRelaxation,
    /// Spin temperature from line areas versus field.
    FitTemperature,
    /// Acting power, drive field and Rabi frequency of the microwave chain.
    LinkBudget,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::SimulateSpectrum => "simulate-spectrum",
            Command::SimulateMap => "simulate-map",
            Command::SimulateHole => "simulate-hole",
            Command::FitLine => "fit-line",
            Command::FitRecovery => "fit-recovery",
            Command::FitRelaxation => "fit-relaxation",
            Command::FitTemperature => "fit-temperature",
            Command::LinkBudget => "link-budget",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    #[value(name = "json-records")]
    JsonRecords,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepArg {
    Field,
    Temperature,
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    command: &'static str,
    arguments: &'a [String],
    seed: Option<u64>,
    format: &'static str,
    config_source: String,
    config_sha256: String,
    config: &'a str,
    input: Option<FileDigest>,
    outputs: Vec<FileDigest>,
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Run<'a> {
    cli: &'a Cli,
    cfg: ExperimentConfig,
    config_text: String,
    config_source: String,
    out: PathBuf,
    format: Format,
    input: Option<FileDigest>,
    outputs: Vec<FileDigest>,
    summary: String,
}

impl Run<'_> {
    fn write_bytes(&mut self, name: String, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(&name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(FileDigest {
            path: name,
            sha256: sha256(bytes),
        });
        Ok(())
    }

    fn write_trace(&mut self, stem: &str, trace: TraceFile) -> Result<()> {
        let trace = trace
            .with_comment(format!(
                "holeburn {} {}",
                env!("CARGO_PKG_VERSION"),
                self.cli.command.name()
            ))
            .with_comment(format!(
                "config sha256 {}",
                sha256(self.config_text.as_bytes())
            ));
        let text = io::render(&trace, self.format)?;
        self.write_bytes(
            format!("{stem}.{}", self.format.extension()),
            text.as_bytes(),
        )
    }

    fn write_report(&mut self, stem: &str, r: &FitResult) -> Result<()> {
        let text = format_report(r);
        self.write_bytes(format!("{stem}.txt"), text.as_bytes())?;
        let json = serde_json::to_string_pretty(r)? + "\n";
        self.write_bytes(format!("{stem}.json"), json.as_bytes())?;
        self.summary.push_str(&text);
        Ok(())
    }

    fn read_input(&mut self, json_schema: Schema) -> Result<Option<TraceFile>> {
        let Some(path) = &self.cli.input else {
            return Ok(None);
        };
        if self.cli.noise != 0.0 {
            bail!("--noise applies to synthesized data only, not to --input");
        }
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.input = Some(FileDigest {
            path: path.display().to_string(),
            sha256: sha256(&bytes),
        });
        Ok(Some(io::read_trace(path, Some(json_schema))?))
    }

    /// Seed for a stochastic step; its absence is an error.
    fn seed(&self, stream: u64) -> Result<u64> {
        match self.cli.seed {
            Some(s) => Ok(draw_seed(s, stream)),
            None => bail!("this run draws random numbers; pass --seed N"),
        }
    }

    fn noisy(&self, clean: &[f64], noise: NoiseModel) -> Result<Vec<f64>> {
        if self.cli.noise == 0.0 {
            return Ok(clean.to_vec());
        }
        if !(self.cli.noise > 0.0 && self.cli.noise.is_finite()) {
            bail!("--noise must be >= 0, got {}", self.cli.noise);
        }
        Ok(add_noise(clean, noise, self.seed(0)?))
    }

    /// Adds bootstrap spreads to the report as `bootstrap_sigma_<name>`.
    fn bootstrap<F>(&self, r: &mut FitResult, y: &[f64], refit: F) -> Result<()>
    where
        F: Fn(&[f64]) -> holeburn_core::Result<FitResult> + Sync,
    {
        if self.cli.bootstrap == 0 {
            return Ok(());
        }
        let spread = fit::bootstrap(r, y, self.cli.bootstrap, self.seed(1)?, refit)?;
        for (name, s) in r.names.clone().iter().zip(spread) {
            r.derived.push((format!("bootstrap_sigma_{name}"), s, 0.0));
        }
        Ok(())
    }

    fn finish(mut self, arguments: &[String]) -> Result<String> {
        let manifest = Manifest {
            tool: "holeburn",
            version: env!("CARGO_PKG_VERSION"),
            core_version: holeburn_core::VERSION,
            command: self.cli.command.name(),
            arguments,
            seed: self.cli.seed,
            format: self.format.name(),
            config_source: self.config_source.clone(),
            config_sha256: sha256(self.config_text.as_bytes()),
            config: &self.config_text,
            input: self.input.take(),
            outputs: std::mem::take(&mut self.outputs),
        };
        let json = serde_json::to_string_pretty(&manifest)? + "\n";
        let path = self.out.join("manifest.json");
        std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
        let _ = writeln!(self.summary, "manifest = {}", path.display());
        Ok(self.summary)
    }
}

fn quantity(text: &str, dim: Dimension, flag: &str) -> Result<f64> {
    parse_quantity(text, dim).with_context(|| format!("parsing {flag}"))
}

/// Runs one command and returns the text to print on stdout. `arguments`
/// is recorded verbatim in the manifest.
pub fn run(cli: &Cli, arguments: Vec<String>) -> Result<String> {
    let (raw, source) = match &cli.config {
        Some(path) => (
            std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            path.display().to_string(),
        ),
        None => (
            ER_YSO_EXAMPLE.to_string(),
            "builtin:er_yso_example".to_string(),
        ),
    };
    let mut cfg = parse_config(&raw).with_context(|| format!("in config {source}"))?;
    if let Some(b) = &cli.field {
        cfg.sweep.field = quantity(b, Dimension::MagneticField, "--B")?;
    }
    if let Some(t) = &cli.temperature {
        cfg.sweep.temperature = quantity(t, Dimension::Temperature, "--T")?;
    }
    if let (Some(t), false) = (&cli.burn_time, cli.input.is_some()) {
        cfg.drive.params.burn_duration = quantity(t, Dimension::Time, "--burn-time")?;
    }
    if let Some(f) = cli.format {
        cfg.output.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::JsonRecords => Format::JsonRecords,
        };
    }
    if let Some(out) = &cli.out {
        cfg.output.directory = out.clone();
    }
    // Re-parse the normalized text so the run sees exactly what the
    // manifest records.
    let config_text = to_toml(&cfg);
    let cfg = parse_config(&config_text)?;
    let out = cfg.output.directory.clone();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let mut run = Run {
        cli,
        format: cfg.output.format,
        cfg,
        config_text,
        config_source: source,
        out,
        input: None,
        outputs: vec![],
        summary: String::new(),
    };
    match cli.command {
        Command::SimulateSpectrum => simulate_spectrum(&mut run)?,
        Command::SimulateMap => simulate_map(&mut run)?,
        Command::SimulateHole => simulate_hole(&mut run)?,
        Command::FitLine => fit_line(&mut run)?,
        Command::FitRecovery => fit_recovery(&mut run)?,
        Command::FitRelaxation => fit_relaxation(&mut run)?,
        Command::FitTemperature => fit_temperature(&mut run)?,
        Command::LinkBudget => link(&mut run)?,
    }
    run.finish(&arguments)
}

fn simulate_spectrum(run: &mut Run) -> Result<()> {
    let cfg = &run.cfg;
    let b = cfg.sweep.field;
    let lines = ensemble_lines(&cfg.ensemble()?, &cfg.setup.spectrometer, b)?;
    let grid = cfg.sweep.frequency_axis()?;
    let spectrum = synthesize_absorption(&lines, &cfg.linewidth, b, &grid)?;
    let peaks = spectrum.local_maxima(0, 0.01);
    let _ = writeln!(run.summary, "field = {b} T");
    for p in peaks {
        let _ = writeln!(run.summary, "peak = {:.4} GHz", p / 1e9);
    }
    run.write_trace("spectrum", io::spectrum_trace(&spectrum))
}

fn simulate_map(run: &mut Run) -> Result<()> {
    let cfg = &run.cfg;
    let fields = cfg.sweep.field_axis()?;
    let grid = cfg.sweep.frequency_axis()?;
    let map = synthesize_field_map(
        &cfg.ensemble()?,
        &cfg.linewidth,
        &cfg.setup.spectrometer,
        &fields,
        &grid,
    )?;
    let _ = writeln!(
        run.summary,
        "map = {} fields x {} frequencies",
        fields.len(),
        grid.len()
    );
    run.write_trace("map", io::spectrum_trace(&map))
}

fn simulate_hole(run: &mut Run) -> Result<()> {
    let cfg = run.cfg.clone();
    let (g, b, t) = (cfg.setup.g_eff, cfg.sweep.field, cfg.sweep.temperature);
    let rates = total_relaxation_rate(&cfg.relaxation, g, b, t)?;
    let r = rates.total;
    let trace = simulate_hole_burning(
        &cfg.drive.params,
        r,
        cfg.drive.observe_duration,
        cfg.drive.step,
    )?;
    let _ = writeln!(
        run.summary,
        "spin_temperature = {:.6e} K",
        rates.spin_temperature
    );
    let _ = writeln!(run.summary, "relaxation_rate = {r:.6e} Hz");
    let _ = writeln!(run.summary, "relaxation_time = {:.6e} s", 1.0 / r);
    run.write_trace("recovery", io::recovery_trace(&trace))?;

    let parent = linewidth_at(&cfg.linewidth, b)?;
    let hole = HoleProfileParams {
        center: 0.0,
        width: cfg.hole.width_ratio * parent,
        depth: cfg.hole.depth,
        gamma_sd: cfg.hole.gamma_sd,
    };
    let detuning = uniform_grid(-2.0 * parent, 2.0 * parent, cfg.hole.points)?;
    let profile = step_rate_profile(hole.width / 2.0, r, r * cfg.hole.outside_factor);
    let mut snapshots = vec![];
    for &time in &cfg.hole.times {
        let s = evolve_hole(&hole, &profile, time, &detuning)?;
        match s.fitted_width {
            Some(w) => {
                let _ = writeln!(run.summary, "hole_width at {time} s = {:.4} MHz", w / 1e6);
            }
            None => {
                let _ = writeln!(run.summary, "hole_width at {time} s = refit failed");
            }
        }
        snapshots.push(s);
    }
    run.write_trace("hole_evolution", io::hole_trace(&detuning, &snapshots))?;

    let scan = rate_scan(
        &cfg.relaxation,
        g,
        &cfg.sweep.field_axis()?,
        &cfg.sweep.temperatures,
    )?;
    run.write_trace("rates", io::rate_scan_trace(&scan))
}

fn fit_line(run: &mut Run) -> Result<()> {
    let (freq, amp) = match run.read_input(Schema::Spectrum)? {
        Some(file) => {
            expect_schema(&file, &[Schema::Spectrum])?;
            (file.column("frequency_Hz")?, file.column("amplitude")?)
        }
        None => {
            let cfg = &run.cfg;
            let b = cfg.sweep.field;
            let line = LorentzianLine {
                center: cfg.setup.g_eff * BOHR_MAGNETON_HZ_PER_T * b,
                fwhm: linewidth_at(&cfg.linewidth, b)?,
                amplitude: 1.0,
            };
            let grid = uniform_grid(
                line.center - 5.0 * line.fwhm,
                line.center + 5.0 * line.fwhm,
                201,
            )?;
            let amp = run.noisy(&line.sample(&grid), NoiseModel::PeakScaled(run.cli.noise))?;
            let mut t = TraceFile::new(Schema::Spectrum);
            t.rows = grid.iter().zip(&amp).map(|(&f, &a)| vec![f, a]).collect();
            run.write_trace("line_data", t)?;
            (grid, amp)
        }
    };
    let mut r = fit_lorentzian(&freq, &amp)?;
    run.bootstrap(&mut r, &amp, |y| fit_lorentzian(&freq, y))?;
    run.write_report("fit_line", &r)
}

fn fit_recovery(run: &mut Run) -> Result<()> {
    let tail = match run.read_input(Schema::Recovery)? {
        Some(file) => {
            expect_schema(&file, &[Schema::Recovery])?;
            let start = match &run.cli.burn_time {
                Some(t) => quantity(t, Dimension::Time, "--burn-time")?,
                None => 0.0,
            };
            io::trace_from_file(&file)?.after(start)
        }
        None => {
            let cfg = &run.cfg;
            let rates = total_relaxation_rate(
                &cfg.relaxation,
                cfg.setup.g_eff,
                cfg.sweep.field,
                cfg.sweep.temperature,
            )?;
            let trace = simulate_hole_burning(
                &cfg.drive.params,
                rates.total,
                cfg.drive.observe_duration,
                cfg.drive.step,
            )?;
            let tail = trace.after(cfg.drive.params.burn_duration);
            let amp = run.noisy(&tail.hole_amplitude, NoiseModel::PeakScaled(run.cli.noise))?;
            let _ = writeln!(run.summary, "input_rate = {:.6e} Hz", rates.total);
            let tail = RecoveryTrace::new(tail.times, amp)?;
            run.write_trace("recovery_data", io::recovery_trace(&tail))?;
            tail
        }
    };
    let mut r = fit_exponential_recovery(&tail)?;
    let times = tail.times.clone();
    run.bootstrap(&mut r, &tail.hole_amplitude, |y| {
        fit_exponential_recovery(&RecoveryTrace::new(times.clone(), y.to_vec())?)
    })?;
    run.write_report("fit_recovery", &r)
}

fn fit_relaxation(run: &mut Run) -> Result<()> {
    let cfg = run.cfg.clone();
    let g = cfg.setup.g_eff;
    let (mode, schema, x_col) = match run.cli.sweep {
        SweepArg::Field => (SweepMode::Field, Schema::FieldRates, "B_T"),
        SweepArg::Temperature => (
            SweepMode::Temperature {
                field: cfg.sweep.field,
            },
            Schema::TemperatureRates,
            "T_K",
        ),
    };
    let (x, y) = match run.read_input(schema)? {
        Some(file) => {
            expect_schema(&file, &[schema])?;
            (file.column(x_col)?, file.column("R_Hz")?)
        }
        None => {
            let p = &cfg.relaxation;
            let (x, clean) = match mode {
                SweepMode::Field => {
                    let ts = effective_temperature(cfg.sweep.temperature, p.t_min)?;
                    let x = cfg.sweep.field_axis()?;
                    let y = x
                        .iter()
                        .map(|&b| Ok(rate_at_spin_temperature(p, g, b, ts)?.total))
                        .collect::<holeburn_core::Result<Vec<_>>>()?;
                    (x, y)
                }
                SweepMode::Temperature { field } => {
                    let x = cfg.sweep.temperatures.clone();
                    let y = x
                        .iter()
                        .map(|&t| Ok(total_relaxation_rate(p, g, field, t)?.total))
                        .collect::<holeburn_core::Result<Vec<_>>>()?;
                    (x, y)
                }
            };
            let y = run.noisy(&clean, NoiseModel::Relative(run.cli.noise))?;
            let mut t = TraceFile::new(schema);
            t.rows = x.iter().zip(&y).map(|(&a, &b)| vec![a, b]).collect();
            run.write_trace("rates_data", t)?;
            (x, y)
        }
    };
    let refit = |y: &[f64]| fit_relaxation_model(&x, y, mode, g, Weighting::Relative);
    let mut r = refit(&y)?;
    run.bootstrap(&mut r, &y, refit)?;
    run.write_report("fit_relaxation", &r)
}

fn fit_temperature(run: &mut Run) -> Result<()> {
    let cfg = run.cfg.clone();
    let g = cfg.setup.g_eff;
    let (b, area) = match run.read_input(Schema::LineAreas)? {
        Some(file) => {
            expect_schema(&file, &[Schema::LineAreas])?;
            (file.column("B_T")?, file.column("area")?)
        }
        None => {
            let b = cfg.sweep.field_axis()?;
            let ts = cfg.setup.spectrometer.spin_temperature;
            let clean: Vec<f64> = b
                .iter()
                .map(|&b| boltzmann_area(b, g, ts, 1.0, AreaForm::Logistic))
                .collect();
            let area = run.noisy(&clean, NoiseModel::PeakScaled(run.cli.noise))?;
            let mut t = TraceFile::new(Schema::LineAreas);
            t.rows = b.iter().zip(&area).map(|(&x, &y)| vec![x, y]).collect();
            run.write_trace("areas_data", t)?;
            (b, area)
        }
    };
    let refit = |y: &[f64]| fit_boltzmann_temperature(&b, y, g, AreaForm::Logistic);
    let mut r = refit(&area)?;
    run.bootstrap(&mut r, &area, refit)?;
    run.write_report("fit_temperature", &r)
}

fn link(run: &mut Run) -> Result<()> {
    let cfg = &run.cfg;
    let res = link_budget(
        &cfg.link_budget,
        cfg.setup.g_eff,
        cfg.drive.convention_factor,
    )?;
    let mut text = String::new();
    let _ = writeln!(text, "acting_power = {:.2} dBm", res.acting_dbm);
    let _ = writeln!(text, "acting_power_watts = {:.6e} W", res.acting_watts);
    let _ = writeln!(text, "drive_field_rms = {:.6e} T", res.b_ac);
    let _ = writeln!(text, "rabi_frequency = {:.6e} Hz", res.rabi);
    let json = serde_json::to_string_pretty(&res)? + "\n";
    run.write_bytes("link_budget.txt".into(), text.as_bytes())?;
    run.write_bytes("link_budget.json".into(), json.as_bytes())?;
    run.summary.push_str(&text);
    Ok(())
}

fn expect_schema(file: &TraceFile, allowed: &[Schema]) -> Result<()> {
    if !allowed.contains(&file.schema) {
        bail!(
            "input has columns {}, expected {}",
            file.schema.columns().join(","),
            allowed[0].columns().join(",")
        );
    }
    Ok(())
}
