//! Subcommand execution: sweeps, artifacts, run manifest and error report.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::CircuitDesign;
use crate::composite::spectrum_vs_flux;
use crate::config::SimulationConfig;
use crate::dynamics::{
    bin_points, error_landscape, model_with_asymmetry, optimize_points, GateModel, GatePlan, GateReport,
};
use crate::effective::reduce_to_two_level;
use crate::linalg;
use crate::output::{fmt_f64, write_json, write_text, CsvSink, ErrorReport, RunManifest};
use crate::zz::{find_jc_star, zz_map_points};
use crate::{Error, Result};

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ERROR_FILE: &str = "error.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Spectrum,
    ZzMap,
    JcStar,
    TwoLevel,
    GateSim,
    Landscape,
    Optimize,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Spectrum,
        Command::ZzMap,
        Command::JcStar,
        Command::TwoLevel,
        Command::GateSim,
        Command::Landscape,
        Command::Optimize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::ZzMap => "zz-map",
            Command::JcStar => "jc-star",
            Command::TwoLevel => "two-level",
            Command::GateSim => "gate-sim",
            Command::Landscape => "landscape",
            Command::Optimize => "optimize",
        }
    }
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown command '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub workers: usize,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>, workers: usize) -> Self {
        RunOptions { out_dir: out_dir.into(), workers }
    }

    fn chunk(&self) -> usize {
        (4 * self.workers).max(4)
    }
}

/// Artifacts of one run, tracked so a failure can report what was already written.
struct Outputs {
    dir: PathBuf,
    sinks: Vec<CsvSink>,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Outputs { dir: dir.to_path_buf(), sinks: Vec::new(), files: Vec::new() }
    }

    fn csv(&mut self, name: &str, header: &[&str]) -> Result<usize> {
        self.sinks.push(CsvSink::create(self.dir.join(name), header)?);
        self.files.push(name.into());
        Ok(self.sinks.len() - 1)
    }

    fn sink(&mut self, i: usize) -> &mut CsvSink {
        &mut self.sinks[i]
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        write_json(self.dir.join(name), value)?;
        self.files.push(name.into());
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.sinks.iter_mut().try_for_each(CsvSink::flush)
    }

    fn partial(&self) -> Vec<(String, usize)> {
        self.sinks
            .iter()
            .map(|s| (s.path().file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(), s.rows()))
            .collect()
    }
}

/// Runs `cmd` and writes its artifacts, the resolved config and a manifest into
/// `opts.out_dir`. On failure `error.json` is written as well and the error returned.
pub fn run(cmd: Command, cfg: &SimulationConfig, opts: &RunOptions) -> Result<RunManifest> {
    if opts.workers == 0 {
        return Err(Error::InvalidParameter("workers must be at least 1".into()));
    }
    let dir = &opts.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let resolved = cfg.to_toml_string();
    write_text(dir.join(RESOLVED_CONFIG_FILE), &resolved)?;

    let start = Instant::now();
    let mut outputs = Outputs::new(dir);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let result = pool.install(|| dispatch(cmd, cfg, opts, &mut outputs)).and_then(|_| outputs.flush());

    let mut files = vec![RESOLVED_CONFIG_FILE.to_string()];
    files.extend(outputs.files.iter().cloned());
    let manifest = RunManifest {
        command: cmd.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        status: if result.is_ok() { "ok" } else { "error" }.into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        workers: opts.workers,
        rtol: cfg.solver.rtol,
        atol: cfg.solver.atol,
        resolved_config: resolved,
        outputs: files,
        warnings: cfg.warnings.clone(),
    };
    match result {
        Ok(()) => {
            write_json(dir.join(MANIFEST_FILE), &manifest)?;
            Ok(manifest)
        }
        Err(err) => {
            let report = ErrorReport::new(cmd.name(), &err, outputs.partial());
            drop(outputs);
            // The original error matters more than a failure to describe it.
            let _ = write_json(dir.join(ERROR_FILE), &report);
            let _ = write_json(dir.join(MANIFEST_FILE), &manifest);
            Err(err)
        }
    }
}

fn dispatch(cmd: Command, cfg: &SimulationConfig, opts: &RunOptions, out: &mut Outputs) -> Result<()> {
    match cmd {
        Command::Spectrum => spectrum(cfg, out),
        Command::ZzMap => zz_map(cfg, opts, out),
        Command::JcStar => jc_star(cfg, opts, out),
        Command::TwoLevel => two_level(cfg, out),
        Command::GateSim => gate_sim(cfg, out),
        Command::Landscape => landscape(cfg, opts, out),
        Command::Optimize => optimize(cfg, opts, out),
    }
}

fn spectrum(cfg: &SimulationConfig, out: &mut Outputs) -> Result<()> {
    let system = cfg.circuit.build()?;
    let grid = cfg.spectrum.phi_s.values();
    let spectra = spectrum_vs_flux(&system, &grid)?;
    let s = out.csv(
        "spectrum.csv",
        &["phi_s_phi0", "level", "label_a", "label_b", "label_sl", "energy_ghz", "overlap"],
    )?;
    let levels = cfg.spectrum.levels.min(system.dim());
    for (phi, sp) in grid.iter().zip(&spectra) {
        for k in 0..levels {
            let lab = &sp.labels[k];
            let sl = lab.get(2).map(|v| v.to_string()).unwrap_or_default();
            out.sink(s).write_row([
                fmt_f64(*phi),
                k.to_string(),
                lab[0].to_string(),
                lab[1].to_string(),
                sl,
                fmt_f64(sp.energies[k]),
                fmt_f64(sp.overlaps[k]),
            ])?;
        }
    }
    Ok(())
}

fn zz_map(cfg: &SimulationConfig, opts: &RunOptions, out: &mut Outputs) -> Result<()> {
    let e_grid = cfg.zz_map.e_j_sigma.values();
    let d_grid = cfg.zz_map.d.values();
    let s = out.csv("zz_map.csv", &["e_j_sigma_ghz", "d", "zeta_ghz"])?;
    let rows_per_chunk = (opts.chunk() / d_grid.len().max(1)).max(1);
    for chunk in e_grid.chunks(rows_per_chunk) {
        let results = zz_map_points(&cfg.circuit, chunk, &d_grid);
        for r in results {
            let r = r?;
            out.sink(s).write_row([fmt_f64(r.spec.squid.e_j_sigma), fmt_f64(r.spec.squid.d), fmt_f64(r.zeta)])?;
        }
        out.sink(s).flush()?;
    }
    Ok(())
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn jc_star(cfg: &SimulationConfig, opts: &RunOptions, out: &mut Outputs) -> Result<()> {
    let settings = &cfg.jc_star;
    let d_grid = settings.d.values();
    let pairs: Vec<(f64, f64)> = settings
        .e_j_sigma
        .values()
        .into_iter()
        .flat_map(|e| d_grid.iter().map(move |&d| (e, d)))
        .collect();
    let s = out.csv(
        "jc_star.csv",
        &[
            "e_j_sigma_ghz",
            "d",
            "jc_star_ghz",
            "converged",
            "band_lo_ghz",
            "band_hi_ghz",
            "best_j_c_ghz",
            "best_abs_zeta_ghz",
        ],
    )?;
    for chunk in pairs.chunks(opts.chunk()) {
        let results: Vec<_> = chunk
            .par_iter()
            .map(|&(e, d)| find_jc_star(&cfg.circuit, e, d, settings.tol, settings.j_max))
            .collect();
        for r in results {
            let r = r?;
            out.sink(s).write_row([
                fmt_f64(r.e_j_sigma),
                fmt_f64(r.d),
                opt_f64(r.j_c_star),
                r.converged().to_string(),
                opt_f64(r.band.map(|b| b.0)),
                opt_f64(r.band.map(|b| b.1)),
                fmt_f64(r.best_j_c),
                fmt_f64(r.best_abs_zeta),
            ])?;
        }
        out.sink(s).flush()?;
    }
    Ok(())
}

fn two_level(cfg: &SimulationConfig, out: &mut Outputs) -> Result<()> {
    let spec = &cfg.circuit;
    if spec.design != CircuitDesign::Grounded {
        return Err(Error::Domain("the two-level reduction is defined for the grounded design".into()));
    }
    let (ma, mb) = spec.qubit_modes()?;
    let system = spec.build_with(ma.clone(), mb.clone())?;
    let grid = cfg.two_level.phi_s.values();
    let rows: Vec<Result<[f64; 12]>> = grid
        .par_iter()
        .map(|&phi| {
            let squid = spec.with_coupler_flux(phi).squid;
            let m = reduce_to_two_level(&spec.qubit_a, &spec.qubit_b, &squid, &ma, &mb)?;
            let full = linalg::eigh(&system.hamiltonian(phi))?;
            Ok([
                phi,
                m.omega_a,
                m.omega_b,
                m.a_x_a,
                m.a_x_b,
                m.g_sq,
                m.g_c,
                m.g_sq_asym,
                m.delta_sq_a,
                m.delta_sq_b,
                m.single_excitation_gap()?,
                full.values[2] - full.values[1],
            ])
        })
        .collect();
    let s = out.csv(
        "two_level.csv",
        &[
            "phi_s_phi0",
            "omega_a_ghz",
            "omega_b_ghz",
            "a_x_a",
            "a_x_b",
            "g_sq_ghz",
            "g_c_ghz",
            "g_sq_asym_ghz",
            "delta_sq_a_ghz",
            "delta_sq_b_ghz",
            "gap_model_ghz",
            "gap_full_ghz",
        ],
    )?;
    for r in rows {
        let r = r?;
        out.sink(s).write_row(r.iter().map(|&v| fmt_f64(v)))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct NoiseEntry {
    /// "unitary" or the T1 value in µs.
    noise: String,
    t1_us: Option<f64>,
    t_phi_us: Option<f64>,
    theta: f64,
    xi_sim: f64,
    leakage: f64,
    fidelity: f64,
    error: f64,
    leakage_warning: bool,
}

impl NoiseEntry {
    fn from_report(r: &GateReport) -> Self {
        NoiseEntry {
            noise: r.noise.map(|n| format!("t1_us={}", n.t1)).unwrap_or_else(|| "unitary".into()),
            t1_us: r.noise.map(|n| n.t1),
            t_phi_us: r.noise.map(|n| n.t_phi),
            theta: r.theta,
            xi_sim: r.xi,
            leakage: r.leakage,
            fidelity: r.fidelity,
            error: r.error(),
            leakage_warning: r.leakage_warning,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct GateReportFile {
    scheme: String,
    basis: String,
    x_phi0: f64,
    t_g_ns: f64,
    t_r_ns: f64,
    reports: Vec<NoiseEntry>,
}

fn gate_sim(cfg: &SimulationConfig, out: &mut Outputs) -> Result<()> {
    let g = &cfg.gate;
    let model = GateModel::from_spec(&cfg.circuit, cfg.basis, cfg.solver)?;
    let plan = GatePlan::for_scheme(g.scheme, g.x, &g.scheme_settings, &model);
    let schedule = plan.schedule(g.t_g)?;
    let noises = cfg.noise.models()?;
    let mut settings: Vec<Option<_>> = vec![None];
    settings.extend(noises.into_iter().map(Some));
    let reports: Vec<Result<GateReport>> =
        settings.par_iter().map(|n| model.simulate(&schedule, n.as_ref())).collect();
    let mut entries = Vec::with_capacity(reports.len());
    for r in reports {
        entries.push(NoiseEntry::from_report(&r?));
    }
    let basis = serde_json::to_value(cfg.basis)?.as_str().unwrap_or_default().to_string();
    let file = GateReportFile {
        scheme: g.scheme.to_string(),
        basis,
        x_phi0: g.x,
        t_g_ns: g.t_g,
        t_r_ns: g.scheme_settings.t_r,
        reports: entries,
    };
    out.json("gate_report.json", &file)
}

fn landscape(cfg: &SimulationConfig, opts: &RunOptions, out: &mut Outputs) -> Result<()> {
    let l = &cfg.landscape;
    let model = GateModel::from_spec(&cfg.circuit, cfg.basis, cfg.solver)?;
    let x_grid = l.x.values();
    let t_grid = l.t_g.values();
    let s = out.csv("landscape.csv", &["x", "t_g_ns", "error"])?;
    for chunk in x_grid.chunks(opts.chunk()) {
        for p in error_landscape(&model, l.scheme, &l.scheme_settings, chunk, &t_grid)? {
            out.sink(s).write_row([fmt_f64(p.x), fmt_f64(p.t_g), fmt_f64(p.error)])?;
        }
        out.sink(s).flush()?;
    }
    Ok(())
}

fn optimize(cfg: &SimulationConfig, opts: &RunOptions, out: &mut Outputs) -> Result<()> {
    let o = &cfg.optimize;
    if o.options.bins == 0 {
        return Err(Error::InvalidParameter("need at least one bin".into()));
    }
    let modes = cfg.circuit.qubit_modes()?;
    let x_grid = o.x.values();
    let s = out.csv("optimize_points.csv", &["x", "d", "t_g_ns", "error"])?;
    let mut points = Vec::with_capacity(x_grid.len() * o.d.len());
    for &d in &o.d {
        let model = model_with_asymmetry(&cfg.circuit, &modes, d, cfg.basis, cfg.solver)?;
        for chunk in x_grid.chunks(opts.chunk()) {
            let results =
                optimize_points(&model, o.scheme, &o.scheme_settings, chunk, (o.t_g_min, o.t_g_max), &o.options);
            for r in results {
                let p = r?;
                out.sink(s).write_row([fmt_f64(p.x), fmt_f64(p.d), fmt_f64(p.t_g), fmt_f64(p.error)])?;
                points.push(p);
            }
            out.sink(s).flush()?;
        }
    }
    let b = out.csv("optimize.csv", &["x_bin_center", "d", "err_mean", "err_min", "err_max", "count"])?;
    for bin in bin_points(&points, &o.d, o.options.bins) {
        out.sink(b).write_row([
            fmt_f64(bin.x_bin_center),
            fmt_f64(bin.d),
            fmt_f64(bin.err_mean),
            fmt_f64(bin.err_min),
            fmt_f64(bin.err_max),
            bin.count.to_string(),
        ])?;
    }
    Ok(())
}
