//! Run configuration, the profile / solve / spectrum / sweep workflows and output
//! validation.

use crate::error::{invalid, GlError, Result};
use crate::geometry::{normalize_shape, LatticeShape};
use crate::grid::{build_approximate_solution, build_grid, read_dump, C64};
use crate::operator::{energy, gibbs_energy};
use crate::profile::{scalars, solve_profile, ProfileScalars, VortexProfile};
use crate::solver::{solve_corrector, write_tiled_dump, SolveReport};
use crate::spectral::{
    fiber_blocks, fiber_spectrum, lattice_coercivity, lattice_zero_mode_residuals, lower_bound_outside,
    torus_coercivity, SpectralReport, ZeroModeReport,
};
use clap::Parser;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Parser, Debug, Default, Clone)]
#[command(
    name = "glv",
    about = "Vortex lattice solutions of the Ginzburg-Landau equations",
    allow_negative_numbers = true
)]
pub struct Cli {
    /// key=value configuration file; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// profile, solve, spectrum or sweep
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub kappa: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<i32>,
    #[arg(long = "tau-re", value_delimiter = ',')]
    pub tau_re: Vec<f64>,
    #[arg(long = "tau-im", value_delimiter = ',')]
    pub tau_im: Vec<f64>,
    /// lattice spacing, repeatable
    #[arg(long = "R", value_delimiter = ',')]
    pub r: Vec<f64>,
    /// nodes per cell side; 0 picks 4R
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// applied field for Gibbs energies
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// only re-check an existing output directory
    #[arg(long)]
    pub validate: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Profile,
    Solve,
    Spectrum,
    Sweep,
}

impl std::str::FromStr for Mode {
    type Err = GlError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "profile" => Ok(Mode::Profile),
            "solve" => Ok(Mode::Solve),
            "spectrum" => Ok(Mode::Spectrum),
            "sweep" => Ok(Mode::Sweep),
            other => invalid(format!("unknown mode '{other}'")),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub kappa: Vec<f64>,
    pub n: Vec<i32>,
    /// (Re tau, Im tau) pairs
    pub tau: Vec<[f64; 2]>,
    pub r: Vec<f64>,
    pub grid: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub h: Option<f64>,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub profile_r_max: f64,
    pub profile_mesh: usize,
}

impl RunConfig {
    pub fn new(mode: Mode) -> Self {
        RunConfig {
            mode,
            kappa: vec![1.5],
            n: vec![1],
            tau: vec![[0.0, 1.0]],
            r: vec![10.0],
            grid: 0,
            tol: 1e-8,
            max_iter: 30,
            h: None,
            out: PathBuf::from("runs"),
            seed: 0,
            threads: 1,
            profile_r_max: 25.0,
            profile_mesh: 2000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = vec![];
        if self.kappa.is_empty() || self.kappa.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            bad.push(format!("kappa must be positive, got {:?}", self.kappa));
        }
        if self.n.is_empty() || self.n.iter().any(|n| n % 2 == 0) {
            bad.push(format!("n must be odd and nonzero, got {:?}", self.n));
        }
        if self.tau.is_empty() || self.tau.iter().any(|t| !(t[1] > 0.0) || !t[0].is_finite()) {
            bad.push(format!("Im tau must be positive, got {:?}", self.tau));
        }
        if self.r.is_empty() || self.r.iter().any(|r| !(*r >= 5.0 && r.is_finite())) {
            bad.push(format!("R must be at least 5, got {:?}", self.r));
        }
        if self.grid != 0 && (self.grid % 2 != 0 || self.grid < 16) {
            bad.push(format!("grid must be even and at least 16 (or 0 for auto), got {}", self.grid));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            bad.push(format!("tol must lie in (0, 1), got {}", self.tol));
        }
        if self.max_iter == 0 {
            bad.push("max_iter must be positive".into());
        }
        if let Some(h) = self.h {
            if !(h >= 0.0 && h.is_finite()) {
                bad.push(format!("h must be non-negative, got {h}"));
            }
        }
        if self.threads == 0 {
            bad.push("threads must be positive".into());
        }
        if !(self.profile_r_max >= 10.0) || self.profile_mesh < 100 {
            bad.push("profile_r_max must be >= 10 and profile_mesh >= 100".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            invalid(bad.join("; "))
        }
    }

    /// Content hash of everything that affects the results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.threads = 1;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        let d = Sha256::digest(&bytes);
        d.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_dir(&self) -> PathBuf {
        let m = serde_json::to_value(self.mode).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        self.out.join(format!("{m}-{}", self.hash()))
    }

    fn grid_for(&self, r: f64) -> usize {
        if self.grid != 0 {
            self.grid
        } else {
            let n = (4.0 * r).round() as usize;
            (n + n % 2).max(16)
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| GlError::InvalidInput(format!("bad value '{s}' for {key}"))))
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse::<T>().map_err(|_| GlError::InvalidInput(format!("bad value '{v}' for {key}")))
}

/// Flat key=value text, '#' starts a comment, lists are comma separated.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut m = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| GlError::InvalidInput(format!("config line {}: expected key=value", i + 1)))?;
        m.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(m)
}

/// Defaults, then the config file, then flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let file = match &cli.config {
        Some(p) => parse_config_file(&std::fs::read_to_string(p)?)?,
        None => BTreeMap::new(),
    };
    let mode: Mode = match (&cli.mode, file.get("mode")) {
        (Some(m), _) => m.parse()?,
        (None, Some(m)) => m.parse()?,
        (None, None) => return invalid("no mode given"),
    };
    let mut c = RunConfig::new(mode);
    let mut tau_re: Option<Vec<f64>> = None;
    let mut tau_im: Option<Vec<f64>> = None;
    for (k, v) in &file {
        match k.as_str() {
            "mode" => {}
            "kappa" => c.kappa = parse_list(k, v)?,
            "n" => c.n = parse_list(k, v)?,
            "tau_re" => tau_re = Some(parse_list(k, v)?),
            "tau_im" => tau_im = Some(parse_list(k, v)?),
            "R" => c.r = parse_list(k, v)?,
            "grid" => c.grid = parse_one(k, v)?,
            "tol" => c.tol = parse_one(k, v)?,
            "max_iter" => c.max_iter = parse_one(k, v)?,
            "h" => c.h = Some(parse_one(k, v)?),
            "out" => c.out = PathBuf::from(v),
            "seed" => c.seed = parse_one(k, v)?,
            "threads" => c.threads = parse_one(k, v)?,
            "profile_r_max" => c.profile_r_max = parse_one(k, v)?,
            "profile_mesh" => c.profile_mesh = parse_one(k, v)?,
            other => return invalid(format!("unknown config key '{other}'")),
        }
    }
    if !cli.kappa.is_empty() {
        c.kappa = cli.kappa.clone();
    }
    if !cli.n.is_empty() {
        c.n = cli.n.clone();
    }
    if !cli.tau_re.is_empty() {
        tau_re = Some(cli.tau_re.clone());
    }
    if !cli.tau_im.is_empty() {
        tau_im = Some(cli.tau_im.clone());
    }
    if !cli.r.is_empty() {
        c.r = cli.r.clone();
    }
    if let Some(v) = cli.grid {
        c.grid = v;
    }
    if let Some(v) = cli.tol {
        c.tol = v;
    }
    if let Some(v) = cli.max_iter {
        c.max_iter = v;
    }
    if cli.h.is_some() {
        c.h = cli.h;
    }
    if let Some(v) = &cli.out {
        c.out = v.clone();
    }
    if let Some(v) = cli.seed {
        c.seed = v;
    }
    if let Some(v) = cli.threads {
        c.threads = v;
    }
    if tau_re.is_some() || tau_im.is_some() {
        let re = tau_re.unwrap_or_else(|| vec![0.0]);
        let im = tau_im.unwrap_or_else(|| vec![1.0]);
        if re.len() != im.len() {
            return invalid(format!("{} real parts of tau but {} imaginary parts", re.len(), im.len()));
        }
        c.tau = re.into_iter().zip(im).map(|(a, b)| [a, b]).collect();
    }
    c.validate()?;
    Ok(c)
}

/// 0 success, 2 invalid input, 3 solver failure, 4 validation failure.
pub fn exit_code(e: &GlError) -> i32 {
    match e {
        GlError::InvalidInput(_) | GlError::OutOfRange(_) | GlError::Shape(_) => 2,
        GlError::Validation(_) => 4,
        _ => 3,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub n: i32,
    pub kappa: f64,
    pub r_max: f64,
    pub mesh_size: usize,
    pub residual: f64,
    pub scalars: ProfileScalars,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveRecord {
    pub kappa: f64,
    pub n: i32,
    pub tau_re: f64,
    pub tau_im: f64,
    pub r: f64,
    pub grid: usize,
    pub area: f64,
    pub flux: f64,
    pub energy: f64,
    pub energy_per_area: f64,
    pub h: Option<f64>,
    pub h_c1: Option<f64>,
    /// G of the lattice state; the pure superconducting state has G = 0.
    pub gibbs: Option<f64>,
    pub gibbs_below_superconducting: Option<bool>,
    pub report: SolveReport,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub kappa: f64,
    pub n: i32,
    pub tau_re: f64,
    pub tau_im: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "N")]
    pub grid: usize,
    pub energy_per_area: f64,
    pub gibbs: f64,
    pub residual_v: f64,
    pub w_norm: f64,
    pub final_residual: f64,
    pub lowest_deflated_eig: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunStatus {
    pub complete: bool,
    pub failures: Vec<String>,
    pub files: Vec<String>,
}

fn tag(kappa: f64, n: i32, tau: [f64; 2], r: f64) -> String {
    format!("k{kappa:.4}_n{n}_t{:.4}_{:.4}_R{r:.3}", tau[0], tau[1])
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    files: std::sync::Mutex<Vec<String>>,
    failures: std::sync::Mutex<Vec<String>>,
    profiles: std::sync::Mutex<BTreeMap<(i32, u64), Arc<VortexProfile>>>,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.files.lock().unwrap().push(name.to_string());
        self.dir.join(name)
    }

    fn fail(&self, msg: String) {
        self.failures.lock().unwrap().push(msg);
    }

    fn profile(&self, n: i32, kappa: f64, need: f64) -> Result<Arc<VortexProfile>> {
        let key = (n, kappa.to_bits());
        if let Some(p) = self.profiles.lock().unwrap().get(&key) {
            if p.r_max() >= need {
                return Ok(p.clone());
            }
        }
        let r_max = self.cfg.profile_r_max.max(need);
        let p = Arc::new(solve_profile(n, kappa, r_max, self.cfg.profile_mesh, 1e-10)?);
        self.profiles.lock().unwrap().insert(key, p.clone());
        Ok(p)
    }
}

fn shape_of(tau: [f64; 2], r: f64) -> Result<LatticeShape> {
    let t = normalize_shape(C64::new(tau[0], tau[1]))?;
    LatticeShape::new(t, r)
}

struct Solved {
    v: crate::grid::FieldState,
    u: crate::grid::FieldState,
    report: SolveReport,
    record: SolveRecord,
    error: Option<String>,
}

fn solve_case(ctx: &Ctx, kappa: f64, n: i32, tau: [f64; 2], r: f64) -> Result<Solved> {
    let cfg = ctx.cfg;
    let shape = shape_of(tau, r)?;
    let nn = cfg.grid_for(r);
    let g = build_grid(&shape, nn, nn)?;
    let p = ctx.profile(n, kappa, shape.circumradius() + 2.0 * r / nn as f64 + 5.0)?;
    let v = build_approximate_solution(p.clone(), &g)?;
    let (w, report, error) = match solve_corrector(&v, kappa, cfg.tol, cfg.max_iter) {
        Ok((w, rep)) => (Some(w), rep, None),
        Err(GlError::Corrector { reason, report }) => (None, *report, Some(reason)),
        Err(e) => return Err(e),
    };
    let u = match &w {
        Some(w) => v.plus(w),
        None => v.clone(),
    };
    let area = shape.cell_area;
    let e = energy(&u, kappa);
    let h_c1 = if n == 1 { Some(crate::profile::profile_energy(&p) / crate::profile::profile_flux(&p)) } else { None };
    let gibbs = cfg.h.map(|h| gibbs_energy(&u, kappa, h));
    let record = SolveRecord {
        kappa,
        n,
        tau_re: shape.tau.re,
        tau_im: shape.tau.im,
        r,
        grid: nn,
        area,
        flux: u.total_flux(),
        energy: e,
        energy_per_area: e / area,
        h: cfg.h,
        h_c1,
        gibbs,
        gibbs_below_superconducting: gibbs.map(|gb| gb < 0.0),
        report: report.clone(),
    };
    Ok(Solved { v, u, report, record, error })
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn cases(cfg: &RunConfig) -> Vec<(f64, i32, [f64; 2], f64)> {
    let mut v = vec![];
    for &k in &cfg.kappa {
        for &n in &cfg.n {
            for &t in &cfg.tau {
                for &r in &cfg.r {
                    v.push((k, n, t, r));
                }
            }
        }
    }
    v
}

fn run_profile(ctx: &Ctx) -> Result<()> {
    for &kappa in &ctx.cfg.kappa {
        for &n in &ctx.cfg.n {
            let p = solve_profile(n, kappa, ctx.cfg.profile_r_max, ctx.cfg.profile_mesh, 1e-10)?;
            let name = format!("profile_n{n}_k{kappa:.4}");
            p.write_csv(&ctx.path(&format!("{name}.csv")))?;
            let rec = ProfileRecord {
                n,
                kappa,
                r_max: p.r_max(),
                mesh_size: p.mesh.len() - 1,
                residual: p.residual,
                scalars: scalars(&p)?,
            };
            write_json(&ctx.path(&format!("{name}.json")), &rec)?;
        }
    }
    Ok(())
}

fn run_solve(ctx: &Ctx) -> Result<()> {
    let mut gibbs_rows = vec![];
    for (kappa, n, tau, r) in cases(ctx.cfg) {
        let t = tag(kappa, n, tau, r);
        let s = solve_case(ctx, kappa, n, tau, r)?;
        write_json(&ctx.path(&format!("solve_{t}.json")), &s.record)?;
        s.v.write_dump(kappa, &ctx.path(&format!("approx_{t}.dat")))?;
        if let Some(reason) = &s.error {
            ctx.fail(format!("{t}: corrector failed ({reason}); field dumps hold the approximate state only"));
            continue;
        }
        s.u.write_dump(kappa, &ctx.path(&format!("field_{t}.dat")))?;
        write_tiled_dump(&s.u, kappa, 2, &ctx.path(&format!("tiled_{t}.dat")))?;
        if let Some(g) = s.record.gibbs {
            gibbs_rows.push((t, s.record.h.unwrap_or(f64::NAN), s.record.h_c1.unwrap_or(f64::NAN), g));
        }
    }
    if !gibbs_rows.is_empty() {
        let mut w = csv::Writer::from_path(ctx.path("gibbs.csv"))?;
        w.write_record(["case", "h", "h_c1", "gibbs_lattice", "gibbs_superconducting", "lattice_lower"])?;
        for (t, h, hc, g) in gibbs_rows {
            w.write_record([
                t,
                format!("{h:.12e}"),
                format!("{hc:.12e}"),
                format!("{g:.12e}"),
                "0".into(),
                (g < 0.0).to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn run_spectrum(ctx: &Ctx) -> Result<()> {
    for &kappa in &ctx.cfg.kappa {
        for &n in &ctx.cfg.n {
            let p = ctx.profile(n, kappa, ctx.cfg.profile_r_max)?;
            let blocks = fiber_blocks(&p, -2..=2)?;
            let reps: Vec<Result<SpectralReport>> = blocks.par_iter().map(|b| fiber_spectrum(b, 6)).collect();
            for (b, rep) in blocks.iter().zip(reps) {
                write_json(&ctx.path(&format!("spectrum_fiber_n{n}_k{kappa:.4}_m{}.json", b.m)), &rep?)?;
            }
        }
    }
    for (kappa, n, tau, r) in cases(ctx.cfg) {
        let t = tag(kappa, n, tau, r);
        let s = solve_case(ctx, kappa, n, tau, r)?;
        if let Some(reason) = &s.error {
            ctx.fail(format!("{t}: corrector failed ({reason}); lattice spectra skipped"));
            continue;
        }
        write_json(&ctx.path(&format!("spectrum_lattice_{t}.json")), &lattice_coercivity(&s.u, kappa, 4)?)?;
        write_json(&ctx.path(&format!("spectrum_torus_{t}.json")), &torus_coercivity(&s.u, kappa, 2, 4)?)?;
        write_json(
            &ctx.path(&format!("zero_modes_torus_{t}.json")),
            &lattice_zero_mode_residuals(&s.u.tiled(2)?, kappa)?,
        )?;
        write_json(&ctx.path(&format!("spectrum_outside_{t}.json")), &lower_bound_outside(&s.u, kappa, r / 2.0, 2)?)?;
        write_json(&ctx.path(&format!("zero_modes_{t}.json")), &lattice_zero_mode_residuals(&s.u, kappa)?)?;
    }
    Ok(())
}

fn sweep_row(ctx: &Ctx, kappa: f64, n: i32, tau: [f64; 2], r: f64) -> SweepRow {
    let nan = f64::NAN;
    let mut row = SweepRow {
        kappa,
        n,
        tau_re: tau[0],
        tau_im: tau[1],
        r,
        grid: ctx.cfg.grid_for(r),
        energy_per_area: nan,
        gibbs: nan,
        residual_v: nan,
        w_norm: nan,
        final_residual: nan,
        lowest_deflated_eig: nan,
        converged: false,
    };
    let t = tag(kappa, n, tau, r);
    match solve_case(ctx, kappa, n, tau, r) {
        Ok(s) => {
            row.tau_re = s.record.tau_re;
            row.tau_im = s.record.tau_im;
            row.residual_v = s.report.residual_v;
            row.w_norm = s.report.w_norm;
            row.final_residual = s.report.final_residual;
            if let Some(reason) = s.error {
                ctx.fail(format!("{t}: corrector failed ({reason})"));
                return row;
            }
            row.converged = true;
            row.energy_per_area = s.record.energy_per_area;
            row.gibbs = s.record.gibbs.unwrap_or(nan);
            match lattice_coercivity(&s.u, kappa, 1) {
                Ok(rep) => row.lowest_deflated_eig = rep.eigenvalues[0],
                Err(e) => ctx.fail(format!("{t}: coercivity eigensolve failed ({e})")),
            }
        }
        Err(e) => ctx.fail(format!("{t}: {e}")),
    }
    row
}

fn run_sweep(ctx: &Ctx) -> Result<()> {
    let list = cases(ctx.cfg);
    // profiles first, so workers share them
    for &k in &ctx.cfg.kappa {
        for &n in &ctx.cfg.n {
            let need = list
                .iter()
                .filter_map(|c| shape_of(c.2, c.3).ok().map(|s| s.circumradius() + c.3 / 4.0 + 5.0))
                .fold(ctx.cfg.profile_r_max, f64::max);
            ctx.profile(n, k, need)?;
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.cfg.threads)
        .build()
        .map_err(|e| GlError::InvalidInput(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> =
        pool.install(|| list.par_iter().map(|&(k, n, t, r)| sweep_row(ctx, k, n, t, r)).collect());
    let mut w = csv::Writer::from_path(ctx.path("sweep.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub status: RunStatus,
}

/// Executes one configuration into its hashed output directory.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let dir = cfg.run_dir();
    std::fs::create_dir_all(&dir)?;
    let ctx = Ctx {
        cfg,
        dir: dir.clone(),
        files: Default::default(),
        failures: Default::default(),
        profiles: Default::default(),
    };
    write_json(&ctx.path("config.json"), cfg)?;
    let res = match cfg.mode {
        Mode::Profile => run_profile(&ctx),
        Mode::Solve => run_solve(&ctx),
        Mode::Spectrum => run_spectrum(&ctx),
        Mode::Sweep => run_sweep(&ctx),
    };
    if let Err(e) = &res {
        ctx.fail(e.to_string());
    }
    let mut files = ctx.files.into_inner().unwrap();
    files.push("status.json".into());
    let failures = ctx.failures.into_inner().unwrap();
    let status = RunStatus { complete: failures.is_empty(), failures, files };
    write_json(&dir.join("status.json"), &status)?;
    res?;
    Ok(RunOutcome { dir, status })
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct ValidationReport {
    pub checked: Vec<String>,
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn profile_key(stem: &str) -> Option<(i32, f64)> {
    let rest = stem.strip_prefix("profile_n")?;
    let (n, k) = rest.split_once("_k")?;
    Some((n.parse().ok()?, k.parse().ok()?))
}

fn check_file(path: &Path, cfg: Option<&RunConfig>) -> Result<Vec<String>> {
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let mut p = vec![];
    let two_pi = 2.0 * PI;
    if name == "config.json" {
        let c: RunConfig = read_json(path)?;
        c.validate()?;
    } else if name == "status.json" {
        let _: RunStatus = read_json(path)?;
    } else if name == "sweep.csv" {
        let mut rd = csv::Reader::from_path(path)?;
        let hdr: Vec<String> = rd.headers()?.iter().map(String::from).collect();
        let want = "kappa,n,tau_re,tau_im,R,N,energy_per_area,gibbs,residual_v,w_norm,final_residual,lowest_deflated_eig,converged";
        if hdr.join(",") != want {
            p.push(format!("header {:?}", hdr.join(",")));
        }
        let mut count = 0;
        for row in rd.deserialize::<SweepRow>() {
            let row = row?;
            count += 1;
            if row.converged && !row.energy_per_area.is_finite() {
                p.push(format!("converged row with non-finite energy (R={})", row.r));
            }
        }
        if let Some(c) = cfg {
            let want = c.kappa.len() * c.n.len() * c.tau.len() * c.r.len();
            if count != want {
                p.push(format!("{count} rows, configuration has {want} cases"));
            }
        }
    } else if name == "gibbs.csv" {
        let mut rd = csv::Reader::from_path(path)?;
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != 6 {
                p.push("gibbs row with wrong arity".into());
            }
            for f in rec.iter().skip(1).take(3) {
                if f.parse::<f64>().is_err() {
                    p.push(format!("bad number '{f}'"));
                }
            }
        }
    } else if name.starts_with("profile_") && name.ends_with(".csv") {
        let (n, k) = profile_key(stem).ok_or_else(|| GlError::Validation(vec![format!("unparseable name {name}")]))?;
        let prof = VortexProfile::read_csv(path, n, k)?;
        if prof.f[0] != 0.0 || prof.mesh[0] != 0.0 {
            p.push("first row is not r = 0, f = 0".into());
        }
        if prof.mesh.windows(2).any(|w| w[1] <= w[0]) {
            p.push("radii not increasing".into());
        }
        if let Ok(rec) = read_json::<ProfileRecord>(&path.with_extension("json")) {
            if prof.mesh.len() != rec.mesh_size + 1 || (prof.r_max() - rec.r_max).abs() > 1e-9 * rec.r_max {
                p.push(format!(
                    "{} rows up to r = {}, record says {} up to {}",
                    prof.mesh.len(),
                    prof.r_max(),
                    rec.mesh_size + 1,
                    rec.r_max
                ));
            }
        }
    } else if name.starts_with("profile_") && name.ends_with(".json") {
        let r: ProfileRecord = read_json(path)?;
        if (r.scalars.flux - two_pi * r.n as f64).abs() > 1e-6 * two_pi * r.n.abs() as f64 {
            p.push(format!("vortex flux {} differs from 2 pi n", r.scalars.flux));
        }
    } else if name.starts_with("solve_") && name.ends_with(".json") {
        let r: SolveRecord = read_json(path)?;
        if (r.flux - two_pi * r.n as f64).abs() > 1e-8 {
            p.push(format!("cell flux {} differs from 2 pi n", r.flux));
        }
        if (r.energy_per_area * r.area - r.energy).abs() > 1e-9 * r.energy.abs().max(1.0) {
            p.push("energy per area inconsistent with energy and area".into());
        }
    } else if name.ends_with(".dat") {
        let d = read_dump(path)?;
        let shape = LatticeShape::new(d.tau, d.r)?;
        let cells = (d.area / shape.cell_area).round();
        if (d.area / shape.cell_area - cells).abs() > 1e-9 || cells < 1.0 {
            p.push(format!("dump area {} is not a whole number of cells", d.area));
        }
        let want = two_pi * d.n as f64 * cells;
        if (d.flux - want).abs() > 1e-8 * cells {
            p.push(format!("flux {} differs from 2 pi n per cell ({want})", d.flux));
        }
        if d.rows.iter().any(|r| r.iter().any(|x| !x.is_finite())) {
            p.push("non-finite field value".into());
        }
    } else if name.starts_with("spectrum_") && name.ends_with(".json") {
        let r: SpectralReport = read_json(path)?;
        p.extend(r.problems());
    } else if name.starts_with("zero_modes_") && name.ends_with(".json") {
        let r: ZeroModeReport = read_json(path)?;
        if r.translation.iter().chain([&r.gauge, &r.control]).any(|x| !(x.is_finite() && *x >= 0.0)) {
            p.push("non-finite residual".into());
        }
    }
    Ok(p)
}

/// Re-parses every artifact in a run directory and checks cross-file consistency.
pub fn validate_outputs(dir: &Path) -> Result<ValidationReport> {
    let mut rep = ValidationReport::default();
    let cfg: Option<RunConfig> = read_json(&dir.join("config.json")).ok();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    if let Ok(status) = read_json::<RunStatus>(&dir.join("status.json")) {
        for f in &status.files {
            if !dir.join(f).exists() {
                rep.problems.push(format!("{f}: listed in status but missing"));
            }
        }
    }
    for path in entries.iter().filter(|p| p.is_file()) {
        let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("").to_string();
        match check_file(path, cfg.as_ref()) {
            Ok(ps) => rep.problems.extend(ps.into_iter().map(|m| format!("{name}: {m}"))),
            Err(GlError::Validation(ms)) => rep.problems.extend(ms.into_iter().map(|m| format!("{name}: {m}"))),
            Err(e) => rep.problems.push(format!("{name}: {e}")),
        }
        rep.checked.push(name);
    }
    Ok(rep)
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    if let Some(dir) = &cli.validate {
        return match validate_outputs(dir) {
            Ok(r) if r.ok() => {
                println!("{} files valid", r.checked.len());
                0
            }
            Ok(r) => {
                for p in &r.problems {
                    eprintln!("{p}");
                }
                4
            }
            Err(e) => {
                eprintln!("{e}");
                exit_code(&e)
            }
        };
    }
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return exit_code(&e);
        }
    };
    let out = match run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return exit_code(&e);
        }
    };
    println!("{}", out.dir.display());
    match validate_outputs(&out.dir) {
        Ok(r) if !r.ok() => {
            for p in &r.problems {
                eprintln!("{p}");
            }
            return 4;
        }
        Err(e) => {
            eprintln!("{e}");
            return 4;
        }
        _ => {}
    }
    if !out.status.complete {
        for f in &out.status.failures {
            eprintln!("{f}");
        }
        return 3;
    }
    0
}
