use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nshopf::approx::io::{read_state, write_field, write_state};
use nshopf::approx::{build_preconditioner, hopf_locate, newton_solve, snapshot_csv, stationary_branch, BlockPlan, GalerkinState, Truncation};
use nshopf::contraction::certify::residual_norm;
use nshopf::contraction::{contr_fix, periodic_sweep, Certificate, ContrOptions};
use nshopf::field::{DEFAULT_RHO, DEFAULT_VARRHO};
use nshopf::maps::{MapConfig, MapKind, THETA};
use nshopf::Ball;

#[derive(Parser)]
#[command(name = "nshopf", version, about = "Computer-assisted verification of a Hopf bifurcation in planar Navier-Stokes flow")]
struct Cli {
    /// Worker threads for the norm computations; 0 uses every core.
    #[arg(long, global = true, env = "NSHOPF_WORKERS", default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Locate an approximate fixed point and write it to a state file.
    Find(FindArgs),
    /// Certify the fixed points near a state written by `find`.
    Check(CheckArgs),
    /// Sample the velocity field of a state on a grid (not rigorous).
    Snapshot(SnapshotArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FindKind {
    Stationary,
    Bifurcation,
}

#[derive(Args)]
struct FindArgs {
    #[arg(long, value_enum, default_value_t = FindKind::Bifurcation)]
    kind: FindKind,
    /// Wavenumber truncation `J_c = K_c`.
    #[arg(long, default_value_t = 48)]
    truncation: usize,
    /// Target `γ` of a stationary solution.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Step of the stationary sweep that brackets the eigenvalue crossing.
    #[arg(long, default_value_t = 5.0)]
    sweep_step: f64,
    /// Largest `γ` of the sweep.
    #[arg(long, default_value_t = 90.0)]
    sweep_max: f64,
    #[arg(long, default_value_t = THETA)]
    theta: f64,
    #[arg(long, default_value_t = 1e-14)]
    tol: f64,
    /// Also write the exact-ball embedding as a field file.
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckKind {
    Stationary,
    Bifurcation,
    Periodic,
    All,
}

#[derive(Args)]
struct CheckArgs {
    /// State file from `find --kind bifurcation`, or a stationary state.
    #[arg(long)]
    state: PathBuf,
    #[arg(long, value_enum, default_value_t = CheckKind::All)]
    kind: CheckKind,
    /// Block cutoff `m` of the preconditioner for frequencies 0 and 1.
    #[arg(long, default_value_t = 60)]
    m: usize,
    /// Block cutoff `m_n` for the periodic frequencies.
    #[arg(long, default_value_t = 60)]
    mn: usize,
    /// Largest frequency `N` of the periodic sweep.
    #[arg(long, default_value_t = 12)]
    nmax: u32,
    /// Wavenumber frontier of the explicit mode images.
    #[arg(long, default_value_t = 100)]
    frontier: usize,
    /// Sample count of the circle bound.
    #[arg(long, default_value_t = 16)]
    q: usize,
    #[arg(long, default_value_t = DEFAULT_RHO)]
    rho: f64,
    #[arg(long, default_value_t = DEFAULT_VARRHO)]
    varrho: f64,
    /// Weighted magnitude below which coefficients move into the fattening.
    #[arg(long, default_value_t = 1e-12)]
    sparsify: f64,
    /// The trial radius is this multiple of the residual.
    #[arg(long, default_value_t = 100.0)]
    delta_factor: f64,
    /// An explicit trial radius, overriding `--delta-factor`.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(short, long, default_value = "certificates.json")]
    output: PathBuf,
}

#[derive(Args)]
struct SnapshotArgs {
    #[arg(long)]
    state: PathBuf,
    /// Comma-separated times.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    times: Vec<f64>,
    #[arg(long, default_value_t = 33)]
    nx: usize,
    #[arg(long, default_value_t = 33)]
    ny: usize,
    /// Amplitude `β` of the odd part.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(short, long)]
    output: PathBuf,
}

fn load_state(path: &Path) -> Result<GalerkinState> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(read_state(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn cmd_find(a: &FindArgs) -> Result<()> {
    if a.truncation < 3 {
        bail!("truncation must be at least 3 to hold the forcing");
    }
    if !(a.theta > 0.0) {
        bail!("theta must be positive");
    }
    let tr = Truncation::new(0, a.truncation, a.truncation);
    let st = match a.kind {
        FindKind::Stationary => {
            let mut gs: Vec<f64> = Vec::new();
            let mut g = a.sweep_step.min(a.gamma);
            while g < a.gamma {
                gs.push(g);
                g += a.sweep_step;
            }
            gs.push(a.gamma);
            let st = stationary_branch(tr, &gs, a.tol)?.pop().expect("nonempty sweep");
            let res = newton_solve(&st, a.tol)?.1.residual;
            println!("stationary gamma {} residual {:e}", st.gamma, res);
            st
        }
        FindKind::Bifurcation => {
            if !(a.sweep_step > 0.0) || a.sweep_max <= a.sweep_step {
                bail!("the sweep needs 0 < sweep-step < sweep-max");
            }
            let n = (a.sweep_max / a.sweep_step).floor() as usize;
            let gs: Vec<f64> = (1..=n).map(|i| a.sweep_step * i as f64).collect();
            let mut branch = stationary_branch(tr, &gs, a.tol)?;
            for s in &mut branch {
                s.theta = a.theta;
            }
            let h = hopf_locate(&branch, a.tol)?;
            println!("bifurcation gamma {} alpha {} residual {:e}", h.gamma, h.alpha, h.residual);
            h.state
        }
    };
    std::fs::write(&a.output, write_state(&st)).with_context(|| format!("writing {}", a.output.display()))?;
    if let Some(p) = &a.field {
        let f = st.to_field(DEFAULT_RHO, DEFAULT_VARRHO)?;
        std::fs::write(p, write_field(&f)).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn check_weights(a: &CheckArgs) -> Result<()> {
    if !(a.rho > 1.0) || !(a.varrho > 1.0) {
        bail!("weights need rho > 1 and varrho > 1");
    }
    if a.q < 4 {
        bail!("q must be at least 4");
    }
    if !(a.delta_factor > 1.0) {
        bail!("delta-factor must exceed 1");
    }
    Ok(())
}

fn certify(st: &GalerkinState, plan: BlockPlan, a: &CheckArgs, opts: &ContrOptions) -> Result<Certificate> {
    let cfg = st.config();
    let l = build_preconditioner(st, &cfg, &plan)?;
    let phi = st.to_field(a.rho, a.varrho)?;
    let (eps, _) = residual_norm(&phi, &cfg)?;
    let delta = a.delta.unwrap_or(a.delta_factor * eps);
    Ok(contr_fix(&phi, &l, &cfg, delta, opts)?)
}

fn report(c: &Certificate) {
    eprintln!(
        "{:?}: {:?} eps {:.3e} delta {:.3e} K {:.5} gamma [{:.10}, {:.10}] alpha [{:.10}, {:.10}]",
        c.lemma, c.verdict, c.epsilon, c.delta, c.k, c.gamma[0], c.gamma[1], c.alpha[0], c.alpha[1]
    );
    for r in &c.frequency_table {
        eprintln!("  freqs {:?} K {:.5} frontier {:.5} tail {:.5}", r.freqs, r.k, r.frontier, r.tail);
    }
    if let Some(t) = &c.tail {
        eprintln!("  tail closure at n = {}: {:.5}", t.n, t.bound);
    }
    if let Some(r) = &c.reason {
        eprintln!("  {r}");
    }
}

fn cmd_check(a: &CheckArgs) -> Result<bool> {
    check_weights(a)?;
    let st = load_state(&a.state)?;
    let opts = ContrOptions { frontier: a.frontier, q: a.q, sparsify: a.sparsify };
    let mut certs = Vec::new();
    let want = |k: CheckKind| a.kind == k || a.kind == CheckKind::All;
    let bif_state = match st.kind {
        MapKind::Bifurcation => Some(st.clone()),
        MapKind::Stationary => None,
        MapKind::Periodic => bail!("state files for check hold a stationary or bifurcation fixed point"),
    };
    if want(CheckKind::Stationary) {
        let tr = Truncation::new(0, st.trunc.jc, st.trunc.kc);
        let mut s = st.clone().with_kind(MapKind::Stationary).resized(tr);
        s.s = 0.0;
        let s = newton_solve(&s, 1e-14)?.0;
        certs.push(certify(&s, BlockPlan::stationary(a.m), a, &opts)?);
    }
    if want(CheckKind::Bifurcation) || want(CheckKind::Periodic) {
        let Some(b) = &bif_state else {
            bail!("the bifurcation and periodic checks need a state from `find --kind bifurcation`");
        };
        let bif = certify(b, BlockPlan::bifurcation(a.m), a, &opts)?;
        if want(CheckKind::Bifurcation) {
            certs.push(bif.clone());
        }
        if want(CheckKind::Periodic) {
            let phi = b.to_field(a.rho, a.varrho)?;
            let pc = MapConfig::periodic(Ball::ZERO).with_theta(Ball::exact(b.theta));
            let per = periodic_sweep(&phi, |n| build_preconditioner(b, &pc, &BlockPlan::periodic(&[(n, a.mn)])), &bif, a.nmax, &opts)?;
            certs.push(per);
        }
    }
    for c in &certs {
        report(c);
    }
    let json = serde_json::to_string_pretty(&certs)?;
    println!("{json}");
    std::fs::write(&a.output, &json).with_context(|| format!("writing {}", a.output.display()))?;
    let ok = certs.iter().all(Certificate::passed);
    if !ok {
        for c in certs.iter().filter(|c| !c.passed()) {
            eprintln!("FAIL {:?}: {}", c.lemma, c.reason.as_deref().unwrap_or("no reason recorded"));
        }
    }
    Ok(ok)
}

fn cmd_snapshot(a: &SnapshotArgs) -> Result<()> {
    let st = load_state(&a.state)?;
    std::fs::write(&a.output, snapshot_csv(&st, &a.times, a.nx, a.ny, a.beta)).with_context(|| format!("writing {}", a.output.display()))?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global().context("starting the worker pool")?;
    faer::set_global_parallelism(faer::Par::Seq);
    match &cli.cmd {
        Cmd::Find(a) => cmd_find(a).map(|_| true),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Snapshot(a) => cmd_snapshot(a).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
