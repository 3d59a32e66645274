//! The four subcommands. Each returns a process exit code and writes its
//! report to the given streams.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use staticext::grid::RadialGrid;
use staticext::linear::{adjoint_kernel, finite_difference_check, FdReport};
use staticext::modes::Parity;
use staticext::random::random_state;
use staticext::solver::{adm_mass, newton_solve_with, NewtonStep, SolverConfig, StaticSolution};
use staticext::Error;

use crate::bdfile::{BoundaryFile, BD_HEADER};
use crate::manifest::{RunManifest, LOG_FORMAT, VERIFY_FORMAT};
use crate::solfile::{self, SOL_HEADER};
use crate::{exit, ParseError};

#[derive(Debug, Parser)]
#[command(name = "staticext", version, about = "Static vacuum extensions of near-round boundary data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for a static extension of the given boundary data.
    Solve(SolveArgs),
    /// Report discrete kernels of the adjoint mode systems.
    Cokernel(CokernelArgs),
    /// Compare the linearized operator with finite differences.
    VerifyLinearization(VerifyArgs),
    /// Extract the ADM mass of a solution file.
    Mass(MassArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub boundary: PathBuf,
    /// Solution file; the log and the verification report are written next
    /// to it with `.log` and `.verify` appended.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = SolverConfig::default().lmax)]
    pub lmax: usize,
    #[arg(long, default_value_t = SolverConfig::default().n_r)]
    pub nr: usize,
    #[arg(long, default_value_t = SolverConfig::default().delta, allow_hyphen_values = true)]
    pub delta: f64,
    /// Newton tolerance on the residual norm.
    #[arg(long, default_value_t = SolverConfig::default().newton_tol)]
    pub tol: f64,
    #[arg(long, default_value_t = SolverConfig::default().lin_tol)]
    pub lin_tol: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iter)]
    pub max_iter: usize,
    #[arg(long, default_value_t = SolverConfig::default().damping)]
    pub damping: f64,
    /// Recorded in the manifest; the solve itself draws no random numbers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CokernelArgs {
    /// Restrict to one degree.
    #[arg(long = "L")]
    pub l: Option<usize>,
    /// Restrict to one parity (`even` or `odd`).
    #[arg(long)]
    pub parity: Option<Parity>,
    /// Largest degree of the default table.
    #[arg(long, default_value_t = SolverConfig::default().lmax)]
    pub lmax: usize,
    #[arg(long, default_value_t = SolverConfig::default().n_r)]
    pub nr: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Single step size: print the raw errors without fitting an order.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = SolverConfig::default().lmax)]
    pub lmax: usize,
    #[arg(long, default_value_t = SolverConfig::default().n_r)]
    pub nr: usize,
}

#[derive(Debug, Args)]
pub struct MassArgs {
    /// A `staticext-sol v1` file.
    pub solution: PathBuf,
}

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let code = match &cli.command {
        Command::Solve(a) => solve(a, out, err),
        Command::Cokernel(a) => cokernel(a, out, err),
        Command::VerifyLinearization(a) => verify_linearization(a, out, err),
        Command::Mass(a) => mass(a, out, err),
    };
    code.unwrap_or_else(|e| {
        let _ = writeln!(err, "error: {e}");
        exit::INPUT
    })
}

type Outcome = std::io::Result<i32>;

fn read(path: &Path, err: &mut dyn Write) -> std::io::Result<Option<Vec<u8>>> {
    match std::fs::read(path) {
        Ok(b) => Ok(Some(b)),
        Err(e) => {
            writeln!(err, "error: cannot read {}: {e}", path.display())?;
            Ok(None)
        }
    }
}

fn parse_failure(path: &Path, e: &ParseError, err: &mut dyn Write) -> Outcome {
    writeln!(err, "error: {}:{}: {}", path.display(), e.line, e.message)?;
    Ok(exit::INPUT)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn log_line(step_index: usize, s: &NewtonStep) -> String {
    let slots: Vec<String> = s.slots.iter().map(|v| format!("{v:.6e}")).collect();
    format!(
        "iter {step_index} res {:.6e} res_slot1..5 {} omega {:.6e}\n",
        s.residual,
        slots.join(" "),
        s.omega
    )
}

/// Verification norms of a converged solve sit a few orders above the
/// residual at larger masses, so the floor is the reduction tolerance.
const VERIFY_FLOOR: f64 = 1e-8;

/// Largest verification norm accepted for a converged solve.
fn verify_threshold(cfg: &SolverConfig) -> f64 {
    VERIFY_FLOOR.max(10.0 * cfg.newton_tol)
}

fn verify_report(sol: &StaticSolution, threshold: f64) -> (String, bool) {
    let r = &sol.diagnostics.report;
    let ok = r.is_static(threshold);
    let mut s = String::new();
    s.push_str(&format!("{VERIFY_FORMAT}\n"));
    s.push_str(&format!("threshold {threshold:.3e}\n"));
    for (name, v, checked) in [
        ("static_defect", r.static_defect, true),
        ("laplace_f", r.laplace_f, true),
        ("scalar_curvature", r.scalar_curvature, true),
        ("omega", r.omega, true),
        ("omega_equation", r.omega_equation, false),
        ("trace_identity", r.trace_identity, false),
    ] {
        let tag = if !checked {
            "info"
        } else if v <= threshold {
            "pass"
        } else {
            "fail"
        };
        s.push_str(&format!("{name} {v:.6e} {tag}\n"));
    }
    s.push_str(&format!("gauge_anomaly {}\n", sol.diagnostics.gauge_anomaly));
    s.push_str(&format!("kernel_dim {}\n", sol.diagnostics.kernel_dim));
    s.push_str(&format!("boundary_mismatch {:.6e}\n", sol.boundary_mismatch()));
    s.push_str(&format!("status {}\n", if ok { "static" } else { "not-static" }));
    (s, ok)
}

fn write_file(path: &Path, body: &str, manifest: &RunManifest, err: &mut dyn Write) -> std::io::Result<bool> {
    let text = format!("{body}{}", manifest.render());
    match std::fs::write(path, text) {
        Ok(()) => Ok(true),
        Err(e) => {
            writeln!(err, "error: cannot write {}: {e}", path.display())?;
            Ok(false)
        }
    }
}

pub fn solve(a: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let mut manifest = RunManifest::new("solve");
    let cfg = SolverConfig {
        lmax: a.lmax,
        n_r: a.nr,
        delta: a.delta,
        newton_tol: a.tol,
        lin_tol: a.lin_tol,
        max_iter: a.max_iter,
        damping: a.damping,
    };
    manifest
        .config("lmax", cfg.lmax)
        .config("nr", cfg.n_r)
        .config("delta", format!("{:e}", cfg.delta))
        .config("tol", format!("{:e}", cfg.newton_tol))
        .config("lin_tol", format!("{:e}", cfg.lin_tol))
        .config("max_iter", cfg.max_iter)
        .config("damping", format!("{:e}", cfg.damping))
        .config("seed", a.seed)
        .format(BD_HEADER)
        .format(SOL_HEADER)
        .format(LOG_FORMAT)
        .format(VERIFY_FORMAT);
    let Some(bytes) = read(&a.boundary, err)? else {
        return Ok(exit::INPUT);
    };
    manifest.input("boundary", &bytes);
    let parsed = manifest.time("parse", || {
        std::str::from_utf8(&bytes)
            .map_err(|e| ParseError::new(1 + bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count(), "invalid UTF-8"))
            .and_then(BoundaryFile::parse)
    });
    let file = match parsed {
        Ok(f) => f,
        Err(e) => return parse_failure(&a.boundary, &e, err),
    };
    if let Err(e) = cfg.validate() {
        writeln!(err, "error: {e}")?;
        return Ok(exit::INPUT);
    }
    if file.max_degree() > cfg.lmax {
        writeln!(err, "error: boundary data has degree {} above --lmax {}", file.max_degree(), cfg.lmax)?;
        return Ok(exit::INPUT);
    }
    let disc = match cfg.discretization() {
        Ok(d) => d,
        Err(e) => {
            writeln!(err, "error: {e}")?;
            return Ok(exit::INPUT);
        }
    };
    let bd = match file.to_boundary_data(&disc) {
        Ok(bd) => bd,
        Err(e) => {
            writeln!(err, "error: {}: {e}", a.boundary.display())?;
            return Ok(exit::INPUT);
        }
    };
    let mut log = format!("{LOG_FORMAT}\n");
    let mut count = 0;
    let result = manifest.time("solve", || {
        newton_solve_with(&bd, &cfg, |s| {
            log.push_str(&log_line(count, s));
            count += 1;
        })
    });
    let log_path = with_suffix(&a.out, ".log");
    let sol = match result {
        Ok(sol) => sol,
        Err(Error::NotSymmetric { reflection, deviation }) => {
            writeln!(err, "error: boundary data is not reflection symmetric: reflection {reflection}, deviation {deviation:.3e}")?;
            return Ok(exit::NOT_SYMMETRIC);
        }
        Err(e) => {
            log.push_str("status diverged\n");
            write_file(&log_path, &log, &manifest, err)?;
            writeln!(err, "error: {e}")?;
            writeln!(out, "status diverged after {count} iterates")?;
            return Ok(exit::DIVERGED);
        }
    };
    let (mass, flux, mass_ok) = manifest.time("mass", || match adm_mass(&sol.state) {
        Ok(m) => (m.mass, m.flux, true),
        Err(Error::MassExtraction { mass, flux }) => (mass, flux, false),
        Err(_) => (f64::NAN, f64::NAN, false),
    });
    log.push_str(&format!("mass {mass:.10e} {flux:.10e}\n"));
    log.push_str("status converged\n");
    let threshold = verify_threshold(&cfg);
    let (report, is_static) = verify_report(&sol, threshold);
    let body = solfile::render_spectra(sol.state.disc(), &sol.theta_modes, &sol.lapse_modes);
    // Output files carry the manifest as of the end of the solve; writing
    // them is not itself timed.
    let written = write_file(&a.out, &body, &manifest, err)?
        && write_file(&log_path, &log, &manifest, err)?
        && write_file(&with_suffix(&a.out, ".verify"), &report, &manifest, err)?;
    if !written {
        return Ok(exit::INPUT);
    }
    writeln!(out, "status converged in {} Newton steps, residual {:.3e}", count - 1, sol.diagnostics.steps[count - 1].residual)?;
    writeln!(out, "mass {mass:.10e} {flux:.10e}{}", if mass_ok { "" } else { " (extractions disagree)" })?;
    writeln!(out, "verify {}", if is_static { "static" } else { "not-static" })?;
    if !is_static {
        writeln!(err, "error: static verification failed at threshold {threshold:.1e}")?;
        return Ok(exit::VERIFY);
    }
    Ok(exit::OK)
}

fn profile_deviation(got: &[f64], nodes: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    got.iter().zip(nodes).map(|(g, &s)| (g - f(s)).abs()).fold(0.0, f64::max)
}

/// Singular-value gaps below this are flagged as unreliable.
const GAP_WARNING: f64 = 1e3;

pub fn cokernel(a: &CokernelArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let radial = match RadialGrid::new(a.nr) {
        Ok(r) => r,
        Err(e) => {
            writeln!(err, "error: {e}")?;
            return Ok(exit::INPUT);
        }
    };
    let mut manifest = RunManifest::new("cokernel");
    manifest.config("nr", a.nr).config("lmax", a.lmax);
    if let Some(l) = a.l {
        manifest.config("L", l);
    }
    if let Some(p) = a.parity {
        manifest.config("parity", p.as_str());
    }
    let degrees: Vec<usize> = match a.l {
        Some(l) => vec![l],
        None => (0..=a.lmax).collect(),
    };
    let parities: Vec<Parity> = match a.parity {
        Some(p) => vec![p],
        None => vec![Parity::Even, Parity::Odd],
    };
    let nodes = radial.nodes();
    let mut all_match = true;
    writeln!(out, "{:>3} {:>6} {:>4} {:>10} {:>10} {:>10}", "L", "parity", "dim", "gap", "sigma_min", "deviation")?;
    let rows = manifest.time("kernels", || -> std::io::Result<()> {
        for &l in &degrees {
            for &parity in &parities {
                if l == 0 && parity == Parity::Odd {
                    if a.parity.is_some() && a.l.is_some() {
                        writeln!(err, "warning: there are no odd modes at L = 0")?;
                    }
                    continue;
                }
                let expected = usize::from(l == 1);
                match adjoint_kernel(l, parity, &radial) {
                    Ok(k) => {
                        let dev = if l == 1 && k.dim() == 1 {
                            let p = &k.profiles[0];
                            match parity {
                                Parity::Even => profile_deviation(&p.a, nodes, |s| s * s)
                                    .max(profile_deviation(&p.b, nodes, |s| s))
                                    .max(profile_deviation(&p.c, nodes, |_| 0.0))
                                    .max(profile_deviation(&p.d, nodes, |s| -s * s)),
                                Parity::Odd => profile_deviation(&p.b, nodes, |s| s * s)
                                    .max(profile_deviation(&p.c, nodes, |_| 0.0)),
                            }
                        } else {
                            f64::NAN
                        };
                        let dev = if dev.is_nan() { "-".to_string() } else { format!("{dev:.3e}") };
                        writeln!(
                            out,
                            "{l:>3} {:>6} {:>4} {:>10.3e} {:>10.3e} {dev:>10}",
                            parity.as_str(),
                            k.dim(),
                            k.gap,
                            k.relative_singular_values[0]
                        )?;
                        if k.gap < GAP_WARNING {
                            writeln!(err, "warning: singular-value gap {:.2e} at L = {l} {} is below {GAP_WARNING:.0e}", k.gap, parity.as_str())?;
                        }
                        all_match &= k.dim() == expected;
                    }
                    Err(Error::Resolution { gap }) => {
                        writeln!(out, "{l:>3} {:>6} {:>4} {gap:>10.3e} {:>10} {:>10}", parity.as_str(), "?", "-", "-")?;
                        writeln!(err, "warning: kernel at L = {l} {} is not resolved (gap {gap:.2e})", parity.as_str())?;
                        all_match = false;
                    }
                    Err(e) => {
                        writeln!(err, "error: L = {l} {}: {e}", parity.as_str())?;
                        all_match = false;
                    }
                }
            }
        }
        Ok(())
    });
    rows?;
    writeln!(out, "pattern {}", if all_match { "match" } else { "mismatch" })?;
    write!(out, "{}", manifest.render())?;
    Ok(if all_match { exit::OK } else { exit::VERIFY })
}

const SLOT_NAMES: [&str; 5] = ["interior_tensor", "interior_scalar", "bdry_gauge", "bdry_metric", "bdry_meancurv"];

/// Step sizes of the order fit.
pub const FD_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Minimum fitted order for the check to pass.
pub const FD_MIN_ORDER: f64 = 1.8;

pub fn verify_linearization(a: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let disc = match staticext::field::standard(a.nr, a.lmax) {
        Ok(d) => d,
        Err(e) => {
            writeln!(err, "error: {e}")?;
            return Ok(exit::INPUT);
        }
    };
    if let Some(eps) = a.eps {
        if !(eps > 0.0 && eps.is_finite()) {
            writeln!(err, "error: --eps must be positive")?;
            return Ok(exit::INPUT);
        }
    }
    let mut manifest = RunManifest::new("verify-linearization");
    manifest.config("seed", a.seed).config("nr", a.nr).config("lmax", a.lmax);
    if let Some(eps) = a.eps {
        manifest.config("eps", format!("{eps:e}"));
    }
    let steps: Vec<f64> = a.eps.map_or(FD_STEPS.to_vec(), |e| vec![e]);
    let dir = random_state(&disc, a.lmax, 1.0, a.seed);
    let rep: FdReport = match manifest.time("differences", || finite_difference_check(&dir, &steps)) {
        Ok(r) => r,
        Err(e) => {
            writeln!(err, "error: {e}")?;
            return Ok(exit::INPUT);
        }
    };
    let heads: Vec<String> = steps.iter().map(|h| format!("{:>11}", format!("h={h:.0e}"))).collect();
    let fit = a.eps.is_none();
    writeln!(out, "{:<16} {}{}", "slot", heads.join(" "), if fit { "       order" } else { "" })?;
    let orders = rep.orders();
    for slot in 0..5 {
        let errs: Vec<String> = rep.errors.iter().map(|e| format!("{:>11.3e}", e[slot])).collect();
        let order = if !fit {
            String::new()
        } else {
            match orders[slot] {
                Some(o) => format!(" {o:>11.3}"),
                None => format!(" {:>11}", "exact"),
            }
        };
        writeln!(out, "{:<16} {}{order}", SLOT_NAMES[slot], errs.join(" "))?;
    }
    let pass = !fit || rep.passes(FD_MIN_ORDER);
    if fit {
        writeln!(out, "orders {}", if pass { "pass" } else { "fail" })?;
    }
    write!(out, "{}", manifest.render())?;
    Ok(if pass { exit::OK } else { exit::VERIFY })
}

pub fn mass(a: &MassArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let Some(bytes) = read(&a.solution, err)? else {
        return Ok(exit::INPUT);
    };
    let mut manifest = RunManifest::new("mass");
    manifest.input("solution", &bytes).format(SOL_HEADER);
    let parsed = manifest.time("parse", || {
        std::str::from_utf8(&bytes)
            .map_err(|e| ParseError::new(1 + bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count(), "invalid UTF-8"))
            .and_then(solfile::parse)
    });
    let state = match parsed {
        Ok(s) => s,
        Err(e) => return parse_failure(&a.solution, &e, err),
    };
    let result = manifest.time("mass", || adm_mass(&state));
    let (m, f, ok) = match result {
        Ok(est) => (est.mass, est.flux, true),
        Err(Error::MassExtraction { mass, flux }) => (mass, flux, false),
        Err(e) => {
            writeln!(err, "error: {e}")?;
            return Ok(exit::MASS_SPREAD);
        }
    };
    writeln!(out, "mass {m:.10e} {f:.10e}")?;
    writeln!(out, "spread {:.3e}", (m - f).abs())?;
    write!(out, "{}", manifest.render())?;
    if !ok {
        let why = if state.disc().grid.n_r() < staticext::solver::MIN_MASS_NR {
            format!("radial grid n_r = {} is too coarse for the flux extrapolation", state.disc().grid.n_r())
        } else {
            "the two extractions disagree beyond the relative tolerance".to_string()
        };
        writeln!(err, "error: {why}")?;
        return Ok(exit::MASS_SPREAD);
    }
    Ok(exit::OK)
}
