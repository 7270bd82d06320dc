// Command-line driver: run simulations from config files, estimate the
// coercivity gap, run verification suites, and emit energy spectra.
//
// Exit codes: 0 completed, 2 blowup detected, 1 any error. Scripts rely on
// this mapping to read off the global/blowup dichotomy.

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::process::exit;

use clap::{Parser, Subcommand};

use lcflow::config::parse_config;
use lcflow::director::{
    coercivity_ratio, grad_lp_norm, harmonic_energy, sphere_identity_residual,
};
use lcflow::dynamics::{run, ResumeSeed, RunStatus};
use lcflow::error::{Error, Result};
use lcflow::field::{Grid2D, ScalarField};
use lcflow::io;
use lcflow::norms::{gn_check, gn_check_vector, lp_norm};
use lcflow::rigidity::{estimate_delta0, OptimizerSettings, RigidityProblem, SweepCell};
use lcflow::scenarios::{divergence_free_velocity, smooth_random_director};
use lcflow::spectral::{
    bernstein_check, divergence, leray_project, lp_high, lp_low, to_physical, to_spectral,
};

#[derive(Parser)]
#[command(
    name = "lcflow",
    version,
    about = "Pseudospectral solver and verification tools for 2D liquid-crystal \
             flow and harmonic map heat flow"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a simulation described by a config file; writes diagnostics CSV
    /// and field snapshots into the configured output directory.
    Simulate {
        /// Path to a key = value config file.
        #[arg(long)]
        config: PathBuf,
        /// Resume from a snapshot written by an earlier run (the output
        /// directory must still hold that run's diagnostics.csv).
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Estimate the coercivity gap on a hemisphere cap and print one sweep
    /// CSV row.
    Rigidity {
        /// Cap height: search over unit fields with d3 >= epsilon0.
        #[arg(long)]
        epsilon0: f64,
        /// Gradient budget: ||grad d||_2 <= c0.
        #[arg(long)]
        c0: f64,
        #[arg(long = "grid-n", default_value_t = 64)]
        grid_n: usize,
        #[arg(long, default_value_t = 20.0)]
        length: f64,
        #[arg(long, default_value_t = 8)]
        starts: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run the verification suites (spectral, sphere, bernstein, gn).
    Check {
        /// Run a single suite instead of all of them.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Emit radially binned energy spectra of u and grad d from a snapshot.
    Spectrum {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    };
    exit(code);
}

fn dispatch(cmd: Cmd) -> Result<i32> {
    match cmd {
        Cmd::Simulate { config, resume } => cmd_simulate(&config, resume.as_deref()),
        Cmd::Rigidity {
            epsilon0,
            c0,
            grid_n,
            length,
            starts,
            seed,
        } => cmd_rigidity(epsilon0, c0, grid_n, length, starts, seed),
        Cmd::Check { suite } => cmd_check(suite.as_deref()),
        Cmd::Spectrum { snapshot, out } => cmd_spectrum(&snapshot, &out),
    }
}

// ---------------------------------------------------------------------------
// simulate

fn cmd_simulate(config_path: &std::path::Path, resume: Option<&std::path::Path>) -> Result<i32> {
    let text = fs::read_to_string(config_path)?;
    let cfg = parse_config(&text)?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut params = cfg.run_params()?;
    if let Some(snap_path) = resume {
        let state = io::read_snapshot(snap_path)?;
        let diag_path = cfg.output_dir.join("diagnostics.csv");
        let records = io::read_diagnostics(&diag_path)?;
        let t1 = state.t();
        let tol = 1e-9 * (1.0 + t1.abs());
        let rec = records
            .iter()
            .rev()
            .find(|r| (r.t - t1).abs() <= tol)
            .ok_or_else(|| {
                Error::ValidationError(format!(
                    "no diagnostics row at t = {t1} in {}; cannot seed the resumed integrals",
                    diag_path.display()
                ))
            })?;
        params.seed = Some(ResumeSeed::from_record(rec));
        params.initial = state;
        println!("resuming from t = {t1}");
    }
    params.validate()?;
    let traj = run(&params)?;

    io::write_diagnostics(&traj.records, &cfg.output_dir.join("diagnostics.csv"))?;
    for (i, s) in traj.snapshots.iter().enumerate() {
        io::write_snapshot(s, &cfg.output_dir.join(format!("snapshot_{i:04}.hfld")))?;
    }
    io::write_snapshot(&traj.final_state, &cfg.output_dir.join("final.hfld"))?;

    let status = match traj.status {
        RunStatus::Completed => "completed",
        RunStatus::BlowupDetected => "blowup_detected",
        RunStatus::Aborted => "aborted",
    };
    println!("status: {status} ({})", traj.stop_reason);
    println!(
        "steps: {}, final t: {:.6e}, records: {}, snapshots: {}",
        traj.steps,
        traj.final_state.t(),
        traj.records.len(),
        traj.snapshots.len()
    );
    if let (Some(first), Some(last)) = (traj.records.first(), traj.records.last()) {
        println!(
            "energy: {:.6e} -> {:.6e}, residual: {:.3e}",
            first.e, last.e, last.energy_residual
        );
    }
    println!(
        "sup |grad d|: {:.3e} -> max {:.3e}, max unit drift: {:.3e}",
        traj.grad_sup_initial, traj.grad_sup_max, traj.max_drift
    );
    Ok(match traj.status {
        RunStatus::Completed => 0,
        RunStatus::BlowupDetected => 2,
        RunStatus::Aborted => 1,
    })
}

// ---------------------------------------------------------------------------
// rigidity

fn cmd_rigidity(
    epsilon0: f64,
    c0: f64,
    grid_n: usize,
    length: f64,
    starts: usize,
    seed: u64,
) -> Result<i32> {
    let grid = Grid2D::new(grid_n, length)?;
    let optimizer = OptimizerSettings {
        starts,
        seed,
        ..OptimizerSettings::default()
    };
    let problem = RigidityProblem::new(epsilon0, c0, grid)?.with_optimizer(optimizer);
    let result = estimate_delta0(&problem)?;
    let iterations = result.history.iter().map(|h| h.iterations).sum();
    let cell = SweepCell {
        epsilon0,
        c0,
        n: grid_n,
        length,
        best_ratio: result.best_ratio,
        delta0_estimate: result.delta0_estimate,
        starts,
        iterations,
    };
    println!("{}", io::SWEEP_HEADER);
    println!("{}", io::sweep_row(&cell));
    Ok(0)
}

// ---------------------------------------------------------------------------
// spectrum

fn cmd_spectrum(snapshot: &std::path::Path, out: &std::path::Path) -> Result<i32> {
    let state = io::read_snapshot(snapshot)?;
    let rows = io::shell_spectrum(&state);
    io::write_spectrum(&rows, out)?;
    println!(
        "wrote {} shells for t = {:.6e} (n = {}) to {}",
        rows.len(),
        state.t(),
        state.grid().n(),
        out.display()
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// check suites

fn ensure(cond: bool, detail: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvariantViolation(detail()))
    }
}

fn inner(a: &ScalarField, b: &ScalarField) -> f64 {
    let h = a.grid().h();
    h * h
        * a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| x * y)
            .sum::<f64>()
}

fn suite_grid() -> Grid2D {
    Grid2D::new(64, 20.0 * PI).unwrap()
}

/// Transform round-trip, Parseval, Leray idempotence and self-adjointness,
/// and low/high partition of unity, all to 1e-12.
fn suite_spectral() -> Result<(usize, String)> {
    const TOL: f64 = 1e-12;
    let grid = suite_grid();
    let mut checks = 0usize;
    let mut worst = 0.0f64;
    for seed in 0..6u64 {
        let d = smooth_random_director(seed, 6, 1.3, grid)?;
        let f = d.comp(0);
        let scale = f.max_abs().max(1.0);

        let round = to_physical(&to_spectral(f));
        let mut diff = 0.0f64;
        for (a, b) in round.data().iter().zip(f.data()) {
            diff = diff.max((a - b).abs());
        }
        worst = worst.max(diff / scale);
        ensure(diff <= TOL * scale, || {
            format!("transform round-trip drift {diff:.3e} on seed {seed}")
        })?;
        checks += 1;

        let phys = lp_norm(f, 2.0)?;
        let spec = to_spectral(f).l2_norm();
        let gap = (phys - spec).abs() / phys.max(1e-300);
        worst = worst.max(gap);
        ensure(gap <= TOL, || {
            format!("Parseval mismatch {gap:.3e} on seed {seed}")
        })?;
        checks += 1;

        let u = divergence_free_velocity(seed + 100, 4, 1.0, grid)?;
        // graft a gradient part on top so the projector has work to do
        let mut v = u.clone();
        {
            let g = lcflow::spectral::gradient(d.comp(1));
            for c in 0..2 {
                let dst = v.comp_mut(c).data_mut();
                for (o, x) in dst.iter_mut().zip(g.comp(c).data()) {
                    *o += x;
                }
            }
        }
        let pv = leray_project(&v);
        let ppv = leray_project(&pv);
        let mut idem = 0.0f64;
        for c in 0..2 {
            for (a, b) in ppv.comp(c).data().iter().zip(pv.comp(c).data()) {
                idem = idem.max((a - b).abs());
            }
        }
        let vscale = v.max_magnitude().max(1.0);
        worst = worst.max(idem / vscale);
        ensure(idem <= TOL * vscale, || {
            format!("Leray idempotence drift {idem:.3e} on seed {seed}")
        })?;
        checks += 1;

        let div_norm = lp_norm(&divergence(&pv), 2.0)?;
        worst = worst.max(div_norm / vscale);
        ensure(div_norm <= TOL * vscale, || {
            format!("Leray output divergence {div_norm:.3e} on seed {seed}")
        })?;
        checks += 1;

        // <Pv, w> = <v, Pw> componentwise sum
        let w = divergence_free_velocity(seed + 200, 5, 0.7, grid)?;
        let pw = leray_project(&w);
        let lhs = inner(pv.comp(0), w.comp(0)) + inner(pv.comp(1), w.comp(1));
        let rhs = inner(v.comp(0), pw.comp(0)) + inner(v.comp(1), pw.comp(1));
        let adj = (lhs - rhs).abs() / lhs.abs().max(1.0);
        worst = worst.max(adj);
        ensure(adj <= TOL, || {
            format!("Leray self-adjointness gap {adj:.3e} on seed {seed}")
        })?;
        checks += 1;

        for beta in [0.5, 2.0] {
            let low = lp_low(f, beta)?;
            let high = lp_high(f, beta)?;
            let mut part = 0.0f64;
            for ((a, b), c) in low.data().iter().zip(high.data()).zip(f.data()) {
                part = part.max((a + b - c).abs());
            }
            worst = worst.max(part / scale);
            ensure(part <= TOL * scale, || {
                format!("low/high partition drift {part:.3e} at cut {beta}")
            })?;
            checks += 1;
        }
    }
    Ok((checks, format!("worst relative defect {worst:.2e}")))
}

/// Pointwise unit norm, the tension-field norm identity
/// ||Lap d + |grad d|^2 d||^2 = ||Lap d||^2 - |||grad d|^2||^2, and the
/// coercivity ratio staying below 1 on smooth normalized fields.
fn suite_sphere() -> Result<(usize, String)> {
    let grid = suite_grid();
    let mut checks = 0usize;
    let mut worst = 0.0f64;
    for seed in 0..12u64 {
        let d = smooth_random_director(seed, 2, 0.8, grid)?;
        ensure(d.unit_error() <= 1e-12, || {
            format!("unit error {:.3e} on seed {seed}", d.unit_error())
        })?;
        checks += 1;

        let num = grad_lp_norm(&d, 4.0)?.powi(4);
        let ratio = coercivity_ratio(&d)?;
        let den = num / ratio;
        let tension_sq = harmonic_energy(&d);
        let defect = (tension_sq - (den - num)).abs() / den;
        worst = worst.max(defect);
        ensure(defect <= 1e-6, || {
            format!("tension identity defect {defect:.3e} on seed {seed}")
        })?;
        checks += 1;

        let rel = sphere_identity_residual(&d) / den.sqrt();
        ensure(rel <= 1e-4, || {
            format!("pointwise sphere residual {rel:.3e} on seed {seed}")
        })?;
        checks += 1;

        ensure(ratio < 1.0, || {
            format!("coercivity ratio {ratio} reached 1 on seed {seed}")
        })?;
        checks += 1;
    }
    Ok((checks, format!("worst identity defect {worst:.2e}")))
}

/// Band-limited fields obey ||P_N f||_q <= C N^(2/p - 2/q) ||f||_p with a
/// modest discrete constant; the suite pins C = 1.0 for the exponent pairs
/// below on stream-function data.
fn suite_bernstein() -> Result<(usize, String)> {
    let grid = suite_grid();
    let mut checks = 0usize;
    let mut max_ratio = 0.0f64;
    const BOUND: f64 = 1.0;
    for seed in 0..8u64 {
        let u = divergence_free_velocity(seed, 4, 1.0, grid)?;
        // band edge: modes up to 4 on L = 20 pi, |xi| <= sqrt(2) * 0.4
        let n_freq = 0.6;
        for f in [u.comp(0), u.comp(1)] {
            for (p, q) in [(2.0, 4.0), (2.0, f64::INFINITY), (1.0, 2.0), (4.0, 8.0)] {
                let rep = bernstein_check(f, n_freq, p, q)?;
                max_ratio = max_ratio.max(rep.ratio);
                ensure(rep.ratio <= BOUND, || {
                    format!(
                        "Bernstein ratio {:.4} above {BOUND} at (p, q) = ({p}, {q}), seed {seed}",
                        rep.ratio
                    )
                })?;
                checks += 1;
            }
        }
    }
    Ok((checks, format!("max ratio {max_ratio:.4}")))
}

/// Mean-zero fields obey the 2D interpolation bound
/// ||f||_4 <= C ||f||_2^(1/2) ||grad f||_2^(1/2); the suite pins C = 1.0.
fn suite_gn() -> Result<(usize, String)> {
    let grid = suite_grid();
    let mut checks = 0usize;
    let mut max_ratio = 0.0f64;
    const BOUND: f64 = 1.0;
    for seed in 0..10u64 {
        let u = divergence_free_velocity(seed, 5, 1.0, grid)?;
        let rep = gn_check_vector(&u)?;
        max_ratio = max_ratio.max(rep.ratio);
        ensure(rep.ratio <= BOUND, || {
            format!("vector GN ratio {:.4} above {BOUND} on seed {seed}", rep.ratio)
        })?;
        checks += 1;

        // scalar corpus: mean-zero band of a normalized director component
        let d = smooth_random_director(seed + 50, 5, 1.2, grid)?;
        let band = lcflow::spectral::lp_band(d.comp(0), 0.05, 3.0)?;
        if lp_norm(&band, 2.0)? > 1e-8 {
            let rep = gn_check(&band)?;
            max_ratio = max_ratio.max(rep.ratio);
            ensure(rep.ratio <= BOUND, || {
                format!("scalar GN ratio {:.4} above {BOUND} on seed {seed}", rep.ratio)
            })?;
            checks += 1;
        }
    }
    Ok((checks, format!("max ratio {max_ratio:.4}")))
}

fn cmd_check(which: Option<&str>) -> Result<i32> {
    type SuiteFn = fn() -> Result<(usize, String)>;
    let suites: [(&str, SuiteFn); 4] = [
        ("spectral", suite_spectral),
        ("sphere", suite_sphere),
        ("bernstein", suite_bernstein),
        ("gn", suite_gn),
    ];
    if let Some(w) = which {
        if !suites.iter().any(|(name, _)| *name == w) {
            return Err(Error::InvalidParameter(format!(
                "unknown suite '{w}'; available: spectral, sphere, bernstein, gn"
            )));
        }
    }
    let mut failed = false;
    for (name, f) in suites {
        if which.is_some_and(|w| w != name) {
            continue;
        }
        match f() {
            Ok((count, note)) => println!("suite {name}: ok ({count} checks; {note})"),
            Err(e) => {
                failed = true;
                println!("suite {name}: FAILED: {e}");
            }
        }
    }
    Ok(if failed { 1 } else { 0 })
}
