//! `qc1d`: solve, estimate and refine the QC benchmark chain and run the
//! scheme comparison.
//!
//! Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 stability lost.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use qc_chain::experiment::{self, emit_outputs, parse_csv, plot_documents, to_csv, Benchmark, SweepConfig};
use qc_chain::refine::{initial_adaptive_mesh, solve_level};
use qc_chain::{
    build_benchmark, estimate, optimal_mesh, refine_adaptive, solve_atomistic, solve_qc, AtomisticState, Mesh,
    QcError, QcState, RefinementConfig, Scheme,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use config::ConfigFile;

#[derive(Parser, Debug)]
#[command(name = "qc1d", version, about = "Consistent energy-based QC for a periodic chain")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Number of atoms per period (odd, ≥ 33 for the benchmark).
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Morse stiffness parameter.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Macroscopic deformation gradient F.
    #[arg(long = "big-f", global = true)]
    big_f: Option<f64>,
    /// optimal, gradient or energy.
    #[arg(long, global = true)]
    scheme: Option<String>,
    #[arg(long = "max-dof", global = true)]
    max_dof: Option<usize>,
    #[arg(long = "out-dir", global = true)]
    out_dir: Option<PathBuf>,
    /// Seeds a random perturbation of the initial guess.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use the published chain size N = 8193.
    #[arg(long = "full-scale", global = true)]
    full_scale: bool,
    /// Atoms per side of the optimal mesh.
    #[arg(long = "k-atoms", global = true)]
    k_atoms: Option<usize>,
    /// Mesh file (as written by `solve-qc`) instead of a generated mesh.
    #[arg(long, global = true)]
    mesh: Option<PathBuf>,
    /// key = value file with defaults for the flags above.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the full atomistic benchmark problem.
    SolveAtomistic,
    /// Solve the QC problem on one mesh.
    SolveQc,
    /// Solve on one mesh and evaluate the a posteriori estimators.
    Estimate,
    /// Run one mesh-generation scheme and dump every level.
    Refine,
    /// Run all (or one) schemes and write CSV and plots.
    Sweep,
    /// Redraw the plots from an existing results.csv.
    Plot {
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Debug, Clone)]
struct Settings {
    n: usize,
    alpha: f64,
    big_f: f64,
    scheme: Option<Scheme>,
    max_dof: Option<usize>,
    out_dir: PathBuf,
    seed: Option<u64>,
    k_atoms: usize,
    mesh: Option<PathBuf>,
}

fn resolve(c: &Common) -> Result<Settings, QcError> {
    let file = match &c.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let full_scale = c.full_scale || file.get::<bool>("full-scale")?.unwrap_or(false);
    let n = if full_scale {
        experiment::FULL_SCALE_N
    } else {
        c.n.or(file.get("n")?).unwrap_or(experiment::DESK_N)
    };
    let scheme = match c.scheme.clone().or(file.get("scheme")?) {
        Some(s) => Some(s.parse::<Scheme>()?),
        None => None,
    };
    Ok(Settings {
        n,
        alpha: c.alpha.or(file.get("alpha")?).unwrap_or(5.0),
        big_f: c.big_f.or(file.get("big-f")?).unwrap_or(1.0),
        scheme,
        max_dof: c.max_dof.or(file.get("max-dof")?),
        out_dir: c.out_dir.clone().or(file.get("out-dir")?).unwrap_or_else(|| PathBuf::from("qc1d-out")),
        seed: c.seed.or(file.get("seed")?),
        k_atoms: c.k_atoms.or(file.get("k-atoms")?).unwrap_or(8),
        mesh: c.mesh.clone().or(file.get("mesh")?),
    })
}

fn exit_code(e: &QcError) -> u8 {
    match e {
        QcError::Solver { .. } | QcError::Domain { .. } => 3,
        QcError::StabilityLost { .. } => 4,
        _ => 2,
    }
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), QcError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), body)?;
    Ok(())
}

/// Small seeded perturbation of `values` (relative to the lattice spacing).
fn perturb(values: &mut [f64], seed: Option<u64>, eps: f64) {
    if let Some(seed) = seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        values.iter_mut().for_each(|v| *v += 1e-3 * eps * rng.gen_range(-1.0..1.0));
    }
}

fn mesh_for(s: &Settings, b: &Benchmark) -> Result<Mesh, QcError> {
    if let Some(p) = &s.mesh {
        let mesh = Mesh::from_text(&std::fs::read_to_string(p)?)?;
        if mesh.config() != &b.cfg {
            return Err(QcError::InvalidParameter(format!(
                "mesh file is for N = {}, F = {}",
                mesh.config().n(),
                mesh.config().big_f()
            )));
        }
        return Ok(mesh);
    }
    match s.scheme.unwrap_or(Scheme::Optimal) {
        Scheme::Optimal => {
            let mut rc = RefinementConfig::new(Scheme::Optimal, b.cfg.n());
            rc.k_atoms = s.k_atoms;
            optimal_mesh(&b.cfg, &|r| b.force.radial(r), &rc)
        }
        _ => initial_adaptive_mesh(&b.cfg, 5),
    }
}

fn solve_on_mesh(s: &Settings, b: &Benchmark) -> Result<(Arc<Mesh>, QcState), QcError> {
    let mesh = Arc::new(mesh_for(s, b)?);
    let mut init = QcState::homogeneous(mesh.clone()).values().to_vec();
    perturb(&mut init, s.seed, b.cfg.eps());
    let init = QcState::new(mesh.clone(), init)?;
    let (y, rep) = solve_qc(mesh.clone(), b.potential, Some(b.force_field()), Some(&init))?;
    println!(
        "qc: K = {} nodes, {} iterations, |grad| = {:.3e}, min stretch = {:.6}",
        mesh.len(),
        rep.iterations,
        rep.gradient_norm,
        rep.min_stretch
    );
    Ok((mesh, y))
}

fn run(cli: &Cli) -> Result<(), QcError> {
    let s = resolve(&cli.common)?;
    if let Command::Plot { input } = &cli.command {
        let path = input.clone().unwrap_or_else(|| s.out_dir.join("results.csv"));
        let records = parse_csv(&std::fs::read_to_string(&path)?)?;
        if records.is_empty() {
            return Err(QcError::InvalidParameter(format!("{} has no records", path.display())));
        }
        for (name, body) in plot_documents(&records) {
            write(&s.out_dir, name, &body)?;
            println!("wrote {}", s.out_dir.join(name).display());
        }
        return Ok(());
    }
    let b = build_benchmark(s.n, s.alpha, s.big_f)?;
    if b.force.mean_correction != 0.0 {
        eprintln!("note: force mean {:.3e} projected out", b.force.mean_correction);
    }
    match &cli.command {
        Command::SolveAtomistic => {
            let mut init = AtomisticState::homogeneous(&b.cfg).values().to_vec();
            perturb(&mut init, s.seed, b.cfg.eps());
            let init = AtomisticState::new(&b.cfg, init)?;
            let (y, rep) = solve_atomistic(&b.cfg, b.potential, Some(b.force_field()), Some(&init))?;
            println!(
                "atomistic: N = {}, {} iterations, |grad| = {:.3e}, min stretch = {:.6}",
                s.n, rep.iterations, rep.gradient_norm, rep.min_stretch
            );
            write(&s.out_dir, "atomistic.txt", &y.field().to_text())?;
        }
        Command::SolveQc => {
            let (mesh, y) = solve_on_mesh(&s, &b)?;
            write(&s.out_dir, "mesh.txt", &mesh.to_text())?;
            write(&s.out_dir, "qc.txt", &y.field().to_text())?;
        }
        Command::Estimate => {
            let (mesh, y) = solve_on_mesh(&s, &b)?;
            let rep = estimate(&y, &b.potential, Some(b.force_field()))?;
            println!(
                "E_store = {:.6e}  E_ext = {:.6e}  A_* = {:.6}  deformation bound = {:.6e}  energy bound = {}",
                rep.e_store,
                rep.e_ext,
                rep.stability.a_star,
                rep.deformation_bound,
                rep.energy_bound.map_or("n/a".into(), |v| format!("{v:.6e}"))
            );
            if !rep.stability.stretch_ok {
                eprintln!("warning: minimum stretch below r*/2; the coercivity bound does not apply");
            }
            write(&s.out_dir, "mesh.txt", &mesh.to_text())?;
            write(&s.out_dir, "estimator.csv", &rep.to_csv(&mesh))?;
        }
        Command::Refine => {
            let scheme = s.scheme.unwrap_or(Scheme::Gradient);
            let reference = experiment::solve_reference(&b)?;
            let mut levels = Vec::new();
            let mut failure = None;
            if scheme == Scheme::Optimal {
                for &k in &SweepConfig::default_for(Scheme::Optimal, s.n).k_ladder {
                    let mut rc = RefinementConfig::new(Scheme::Optimal, s.n);
                    rc.k_atoms = k;
                    let mesh = Arc::new(optimal_mesh(&b.cfg, &|r| b.force.radial(r), &rc)?);
                    match solve_level(mesh, b.potential, Some(b.force_field()), None) {
                        Ok(l) => levels.push(l),
                        Err(e) => {
                            failure = Some(e);
                            break;
                        }
                    }
                }
            } else {
                let max_dof = s.max_dof.unwrap_or_else(|| SweepConfig::default_for(scheme, s.n).max_dof);
                let traj = refine_adaptive(&b.cfg, b.potential, Some(b.force_field()), &RefinementConfig::new(scheme, max_dof))?;
                levels = traj.levels;
                failure = traj.failure;
            }
            let mut records = Vec::new();
            for (i, l) in levels.iter().enumerate() {
                write(&s.out_dir, &format!("level_{i:03}_mesh.txt"), &l.mesh.to_text())?;
                write(&s.out_dir, &format!("level_{i:03}_estimator.csv"), &l.report.to_csv(&l.mesh))?;
                let r = experiment::record(&b, &reference, scheme, i, l)?;
                println!(
                    "level {i:3}  dof {:5}  e_def {:.3e}  e_energy {:.3e}  eff_def {:.2}",
                    r.dof, r.e_deformation, r.e_energy, r.efficiency_deformation
                );
                records.push(r);
            }
            write(&s.out_dir, "trajectory.csv", &to_csv(&records))?;
            if let Some(e) = failure {
                eprintln!("trajectory stopped after {} levels: {e}", levels.len());
                return Err(e);
            }
        }
        Command::Sweep => {
            let reference = experiment::solve_reference(&b)?;
            let schemes: Vec<Scheme> = s.scheme.map_or_else(|| Scheme::ALL.to_vec(), |x| vec![x]);
            let sweeps: Vec<SweepConfig> = schemes
                .iter()
                .map(|&sc| {
                    let mut c = SweepConfig::default_for(sc, s.n);
                    if let Some(m) = s.max_dof {
                        c.max_dof = m.min(s.n);
                        c.k_ladder.retain(|&k| 2 * k < m);
                    }
                    c
                })
                .collect();
            let outcomes = experiment::run_all(&b, &reference, &sweeps)?;
            let mut records = Vec::new();
            for (sc, o) in sweeps.iter().zip(outcomes) {
                for (level, e) in &o.failures {
                    eprintln!("{} level {level} failed: {e}", sc.scheme);
                }
                if let (Some(first), Some(last)) = (o.records.first(), o.records.last()) {
                    println!(
                        "{:8}  levels {:3}  dof {:5} → {:5}  e_def {:.3e} → {:.3e}  e_energy {:.3e} → {:.3e}",
                        sc.scheme,
                        o.records.len(),
                        first.dof,
                        last.dof,
                        first.e_deformation,
                        last.e_deformation,
                        first.e_energy,
                        last.e_energy
                    );
                }
                records.extend(o.records);
            }
            if records.is_empty() {
                return Err(QcError::Solver {
                    iterations: 0,
                    reason: "no level of any scheme succeeded".into(),
                });
            }
            for p in emit_outputs(&records, &s.out_dir)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Plot { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
