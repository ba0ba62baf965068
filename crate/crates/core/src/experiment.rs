//! Benchmark problem, scheme sweeps, relative errors and output files.
//!
//! The reference is the full atomistic minimizer. For every QC mesh the
//! relative errors
//! `e_deformation = ‖(J y_qc)' - y_a'‖ / ‖y_a' - F‖` and
//! `e_energy = |E_a(y_a) - E_qc(y_qc)| / |E_a(y_a) - E_a(Fx)|`
//! are recorded next to the estimator bounds.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::atomistic::{solve_atomistic, AtomisticModel, AtomisticState};
use crate::error::{QcError, Result};
use crate::field::{Field, FieldKind};
use crate::lattice::ChainConfig;
use crate::newton::SolveReport;
use crate::par;
use crate::potential::{MorseParams, Potential};
use crate::qc::QcModel;
use crate::refine::{optimal_mesh, refine_adaptive, solve_level, Level, RefinementConfig, Scheme};

/// The chain size of the published benchmark.
pub const FULL_SCALE_N: usize = 8193;
/// Default desk-scale chain size.
pub const DESK_N: usize = 129;

/// Force of the benchmark: a `1/r` singularity at the chain centre damped
/// linearly to zero at the period boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkForce {
    pub scale: f64,
    /// `f_ℓ` for `ℓ = 1..=N` stored at `ℓ - 1`.
    pub values: Vec<f64>,
    /// Mean removed after evaluation (0 when the formula was already balanced).
    pub mean_correction: f64,
}

impl BenchmarkForce {
    pub fn new(n: usize) -> Result<Self> {
        if n % 2 == 0 || n < 33 {
            return Err(QcError::param(format!("benchmark needs odd N ≥ 33, got {n}")));
        }
        let scale = 0.1;
        let c = ((n - 1) / 2) as f64;
        let nf = n as f64;
        let mut values: Vec<f64> = (1..=n)
            .map(|l| {
                let l = l as f64;
                let d = (l - c - 0.5).abs();
                if l <= c {
                    -scale * (1.0 - (l - c).abs() / c) * nf / d
                } else {
                    scale * (1.0 - (l - c - 1.0) / c) * nf / d
                }
            })
            .collect();
        let mean = values.iter().sum::<f64>() / nf;
        let mean_correction = if mean.abs() > 1e-10 {
            values.iter_mut().for_each(|v| *v -= mean);
            mean
        } else {
            0.0
        };
        Ok(Self {
            scale,
            values,
            mean_correction,
        })
    }

    /// Force magnitude at distance `r` to the right of the centre atom.
    pub fn radial(&self, r: f64) -> f64 {
        let n = self.values.len();
        let c = ((n - 1) / 2) as f64;
        let rho = r * n as f64;
        self.scale * (1.0 - rho / c).max(0.0) * n as f64 / (rho + 0.5)
    }

    pub fn field(&self, cfg: &ChainConfig) -> Result<Field> {
        Field::new(cfg.lattice_partition(), self.values.clone(), FieldKind::Displacement)
    }
}

/// Chain, potential and force of one benchmark instance.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub cfg: ChainConfig,
    pub potential: Potential,
    pub force: BenchmarkForce,
    force_field: Field,
}

impl Benchmark {
    pub fn force_field(&self) -> &Field {
        &self.force_field
    }
}

pub fn build_benchmark(n: usize, alpha: f64, big_f: f64) -> Result<Benchmark> {
    let cfg = ChainConfig::new(n, big_f)?;
    let potential = Potential::morse(MorseParams { alpha })?;
    let force = BenchmarkForce::new(n)?;
    let force_field = force.field(&cfg)?;
    Ok(Benchmark {
        cfg,
        potential,
        force,
        force_field,
    })
}

/// The atomistic solution the QC solutions are compared with.
#[derive(Debug, Clone)]
pub struct Reference {
    pub state: AtomisticState,
    pub energy: f64,
    pub homogeneous_energy: f64,
    /// `‖y_a' - F‖_{ℓ²_ε}`.
    pub deformation_scale: f64,
    pub solve: SolveReport,
}

pub fn solve_reference(b: &Benchmark) -> Result<Reference> {
    let (state, solve) = solve_atomistic(&b.cfg, b.potential, Some(&b.force_field), None)?;
    let model = AtomisticModel::new(&b.cfg, b.potential, Some(&b.force_field))?;
    let energy = model.stored_energy(state.values())? - model.external_energy(state.values());
    let homogeneous_energy = model.stored_energy(AtomisticState::homogeneous(&b.cfg).values())?;
    let eps = b.cfg.eps();
    let big_f = b.cfg.big_f();
    let deformation_scale = state.strains().iter().map(|s| eps * (s - big_f).powi(2)).sum::<f64>().sqrt();
    Ok(Reference {
        state,
        energy,
        homogeneous_energy,
        deformation_scale,
        solve,
    })
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub scheme: Scheme,
    pub level: usize,
    pub dof: usize,
    pub e_deformation: f64,
    pub e_energy: f64,
    pub e_store: f64,
    pub e_ext: f64,
    pub deformation_bound: f64,
    pub energy_bound: Option<f64>,
    /// Deformation bound over the true (absolute) deformation error.
    pub efficiency_deformation: f64,
    pub efficiency_energy: Option<f64>,
    pub a_star: f64,
    /// Stretch and coercivity hypotheses both hold.
    pub stable: bool,
    /// Not written to the CSV (kept out so output is deterministic).
    pub wall_time: f64,
}

// With a vanishing reference change (f = 0) only round-off is left.
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 && num <= 1e-12 {
        0.0
    } else {
        num / den
    }
}

fn efficiency(bound: f64, error: f64) -> f64 {
    match (bound == 0.0, error == 0.0) {
        (true, true) => 1.0,
        (false, true) => f64::INFINITY,
        _ => bound / error,
    }
}

/// Absolute errors of a QC level against the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelErrors {
    /// `‖(y_a - J y_qc)'‖_{ℓ²_ε}`.
    pub deformation: f64,
    /// `|E_a(y_a) - E_qc(y_qc)|`.
    pub energy: f64,
    pub qc_energy: f64,
}

pub fn level_errors(b: &Benchmark, reference: &Reference, level: &Level) -> Result<LevelErrors> {
    let eps = b.cfg.eps();
    let sa = reference.state.strains();
    let sq = level.report.projected.strains();
    let deformation = sa.iter().zip(&sq).map(|(a, q)| eps * (a - q).powi(2)).sum::<f64>().sqrt();
    let model = QcModel::new(level.mesh.clone(), b.potential, Some(&b.force_field))?;
    let y = level.state.values();
    let qc_energy = model.stored_energy(y)? - model.external_energy(y);
    Ok(LevelErrors {
        deformation,
        energy: (reference.energy - qc_energy).abs(),
        qc_energy,
    })
}

pub fn record(b: &Benchmark, reference: &Reference, scheme: Scheme, index: usize, level: &Level) -> Result<ExperimentRecord> {
    let err = level_errors(b, reference, level)?;
    let rep = &level.report;
    Ok(ExperimentRecord {
        scheme,
        level: index,
        dof: level.dof(),
        e_deformation: ratio(err.deformation, reference.deformation_scale),
        e_energy: ratio(err.energy, (reference.energy - reference.homogeneous_energy).abs()),
        e_store: rep.e_store,
        e_ext: rep.e_ext,
        deformation_bound: rep.deformation_bound,
        energy_bound: rep.energy_bound,
        efficiency_deformation: efficiency(rep.deformation_bound, err.deformation),
        efficiency_energy: rep.energy_bound.map(|eb| efficiency(eb, err.energy)),
        a_star: rep.stability.a_star,
        stable: rep.stability.is_stable(),
        wall_time: level.elapsed,
    })
}

/// What to run for one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub scheme: Scheme,
    /// Atoms per side for the optimal mesh, one mesh each.
    pub k_ladder: Vec<usize>,
    /// DOF budget of the adaptive schemes.
    pub max_dof: usize,
}

impl SweepConfig {
    /// Ladders used by the CLI and the tests: `K ≈ 2^{j/2}` atoms per side for
    /// the optimal mesh (about the DOF growth per adaptive level), and a DOF
    /// budget of about `N/4` (at most 1200) for the adaptive schemes.
    pub fn default_for(scheme: Scheme, n: usize) -> Self {
        let mid = (n - 1) / 2 + 1;
        let mut k_ladder: Vec<usize> = (2..)
            .map(|j| 2f64.powf(0.5 * j as f64).round() as usize)
            .take_while(|&k| k + 3 <= mid && 2 * k < n / 4)
            .collect();
        k_ladder.dedup();
        Self {
            scheme,
            k_ladder,
            max_dof: (n / 4).min(1200),
        }
    }
}

/// Records of a sweep plus the levels that failed (with the reason).
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<ExperimentRecord>,
    pub failures: Vec<(usize, QcError)>,
}

pub fn run_sweep(b: &Benchmark, reference: &Reference, sweep: &SweepConfig) -> Result<SweepOutcome> {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    match sweep.scheme {
        Scheme::Optimal => {
            let f = &b.force;
            let jobs: Vec<(usize, usize)> = sweep.k_ladder.iter().copied().enumerate().collect();
            let results = par::map_jobs(&jobs, |&(i, k)| -> Result<ExperimentRecord> {
                let mut rc = RefinementConfig::new(Scheme::Optimal, b.cfg.n());
                rc.k_atoms = k;
                let mesh = Arc::new(optimal_mesh(&b.cfg, &|r| f.radial(r), &rc)?);
                let level = solve_level(mesh, b.potential, Some(&b.force_field), None)?;
                record(b, reference, Scheme::Optimal, i, &level)
            });
            for (i, r) in results.into_iter().enumerate() {
                match r {
                    Ok(rec) => records.push(rec),
                    Err(e) => failures.push((i, e)),
                }
            }
        }
        scheme => {
            let rc = RefinementConfig::new(scheme, sweep.max_dof.min(b.cfg.n()));
            let traj = refine_adaptive(&b.cfg, b.potential, Some(&b.force_field), &rc)?;
            for (i, level) in traj.levels.iter().enumerate() {
                records.push(record(b, reference, scheme, i, level)?);
            }
            if let Some(e) = traj.failure {
                failures.push((traj.levels.len(), e));
            }
        }
    }
    Ok(SweepOutcome { records, failures })
}

/// All three schemes (in parallel when enabled), merged in scheme order.
pub fn run_all(b: &Benchmark, reference: &Reference, sweeps: &[SweepConfig]) -> Result<Vec<SweepOutcome>> {
    par::map_jobs(sweeps, |s| run_sweep(b, reference, s)).into_iter().collect()
}

pub const CSV_HEADER: &str = "scheme,level,dof,e_deformation,e_energy,e_store,e_ext,deformation_bound,energy_bound,efficiency_deformation,efficiency_energy,a_star,stable";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:.16e}"))
}

pub fn to_csv(records: &[ExperimentRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{},{:.16e},{}",
            r.scheme,
            r.level,
            r.dof,
            r.e_deformation,
            r.e_energy,
            r.e_store,
            r.e_ext,
            r.deformation_bound,
            opt(r.energy_bound),
            r.efficiency_deformation,
            opt(r.efficiency_energy),
            r.a_star,
            r.stable
        );
    }
    s
}

pub fn timings_csv(records: &[ExperimentRecord]) -> String {
    let mut s = String::from("scheme,level,dof,wall_time_s\n");
    for r in records {
        let _ = writeln!(s, "{},{},{},{:.6}", r.scheme, r.level, r.dof, r.wall_time);
    }
    s
}

/// Inverse of [`to_csv`]; wall times come back as 0.
pub fn parse_csv(text: &str) -> Result<Vec<ExperimentRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(QcError::Parse {
                line: 1,
                detail: "missing or unexpected header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |detail: String| QcError::Parse { line: i + 1, detail };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 13 {
            return Err(bad(format!("expected 13 columns, found {}", cols.len())));
        }
        let float = |j: usize| cols[j].parse::<f64>().map_err(|e| bad(format!("column {j}: {e}")));
        let opt_float = |j: usize| if cols[j] == "none" { Ok(None) } else { float(j).map(Some) };
        let int = |j: usize| cols[j].parse::<usize>().map_err(|e| bad(format!("column {j}: {e}")));
        out.push(ExperimentRecord {
            scheme: cols[0].parse().map_err(|e: QcError| bad(e.to_string()))?,
            level: int(1)?,
            dof: int(2)?,
            e_deformation: float(3)?,
            e_energy: float(4)?,
            e_store: float(5)?,
            e_ext: float(6)?,
            deformation_bound: float(7)?,
            energy_bound: opt_float(8)?,
            efficiency_deformation: float(9)?,
            efficiency_energy: opt_float(10)?,
            a_star: float(11)?,
            stable: cols[12].parse().map_err(|e| bad(format!("column 12: {e}")))?,
            wall_time: 0.0,
        });
    }
    Ok(out)
}

/// Largest DOF all listed schemes reach (the smallest of their final DOFs).
pub fn final_common_dof(records: &[ExperimentRecord], schemes: &[Scheme]) -> Option<usize> {
    schemes
        .iter()
        .map(|s| records.iter().filter(|r| r.scheme == *s).map(|r| r.dof).max())
        .collect::<Option<Vec<_>>>()?
        .into_iter()
        .min()
}

/// Log–log interpolation of `get` over the records of `scheme` at `dof`.
/// `None` outside the DOF range covered by the scheme.
pub fn value_at_dof(
    records: &[ExperimentRecord],
    scheme: Scheme,
    dof: usize,
    get: impl Fn(&ExperimentRecord) -> f64,
) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.scheme == scheme)
        .map(|r| (r.dof as f64, get(r)))
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let x = dof as f64;
    if let Some(p) = pts.iter().rev().find(|p| p.0 == x) {
        return Some(p.1);
    }
    let w = pts.windows(2).find(|w| w[0].0 < x && x < w[1].0)?;
    let (x0, y0, x1, y1) = (w[0].0, w[0].1, w[1].0, w[1].1);
    if y0 > 0.0 && y1 > 0.0 {
        let t = (x.ln() - x0.ln()) / (x1.ln() - x0.ln());
        Some((y0.ln() + t * (y1.ln() - y0.ln())).exp())
    } else {
        Some(y0 + (x - x0) / (x1 - x0) * (y1 - y0))
    }
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Log–log line plot with decade ticks and a legend. Nonpositive or
/// non-finite points are dropped.
pub fn svg_loglog(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h) = (640.0, 460.0);
    let (ml, mr, mt, mb) = (80.0, 150.0, 40.0, 60.0);
    let ok = |p: &&(f64, f64)| p.0 > 0.0 && p.1 > 0.0 && p.0.is_finite() && p.1.is_finite();
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().filter(ok).copied()).collect();
    let range = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if lo.is_finite() {
            let (lo, hi) = (lo.log10().floor(), hi.log10().ceil());
            (lo, if hi > lo { hi } else { lo + 1.0 })
        } else {
            (0.0, 1.0)
        }
    };
    let (x0, x1) = range(&mut pts.iter().map(|p| p.0));
    let (y0, y1) = range(&mut pts.iter().map(|p| p.1));
    let px = |x: f64| ml + (x.log10() - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y.log10() - y0) / (y1 - y0) * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, (w - mr + ml) / 2.0, title);
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - ml - mr,
        h - mt - mb
    );
    for d in x0 as i32..=x1 as i32 {
        let x = px(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{mt}" x2="{x:.2}" y2="{}" stroke="#ddd"/><text x="{x:.2}" y="{}" text-anchor="middle">1e{d}</text>"##,
            h - mb,
            h - mb + 18.0
        );
    }
    for d in y0 as i32..=y1 as i32 {
        let y = py(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{ml}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
            w - mr,
            ml - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (w - mr + ml) / 2.0, h - 15.0, x_label);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        (h - mb + mt) / 2.0,
        y_label
    );
    for (i, (name, data)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = data.iter().filter(ok).map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1))).collect();
        if !path.is_empty() {
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#, path.join(" "));
            for p in &path {
                let (cx, cy) = p.split_once(',').unwrap();
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#);
            }
        }
        let ly = mt + 16.0 + 20.0 * i as f64;
        let lx = w - mr + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{name}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// File name, title, y label and value of the four standard plots.
type PlotSpec = (&'static str, &'static str, &'static str, fn(&ExperimentRecord) -> f64);

pub const PLOTS: [PlotSpec; 4] = [
    ("relative_error_gradient.svg", "Relative error of the gradient", "e_deformation", |r| r.e_deformation),
    ("efficiency_gradient.svg", "Efficiency factor of the gradient", "efficiency", |r| r.efficiency_deformation),
    ("relative_error_energy.svg", "Relative error of the total energy", "e_energy", |r| r.e_energy),
    ("efficiency_energy.svg", "Efficiency factor of the energy", "efficiency", |r| {
        r.efficiency_energy.unwrap_or(f64::NAN)
    }),
];

/// Writes `results.csv`, `timings.csv` and the four plots into `dir`.
pub fn emit_outputs(records: &[ExperimentRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(QcError::param("no records to write"));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    put("results.csv", to_csv(records))?;
    put("timings.csv", timings_csv(records))?;
    for (file, body) in plot_documents(records) {
        put(file, body)?;
    }
    Ok(written)
}

/// The four SVG documents for `records`, one curve per scheme present.
pub fn plot_documents(records: &[ExperimentRecord]) -> Vec<(&'static str, String)> {
    let mut schemes: Vec<Scheme> = records.iter().map(|r| r.scheme).collect();
    schemes.sort();
    schemes.dedup();
    PLOTS
        .iter()
        .map(|(file, title, ylabel, get)| {
            let series: Vec<(String, Vec<(f64, f64)>)> = schemes
                .iter()
                .map(|s| {
                    let pts = records.iter().filter(|r| r.scheme == *s).map(|r| (r.dof as f64, get(r))).collect();
                    (s.to_string(), pts)
                })
                .collect();
            (*file, svg_loglog(title, "degrees of freedom", ylabel, &series))
        })
        .collect()
}

/// Runs reference and all schemes with default ladders.
pub fn run_benchmark(n: usize, alpha: f64, big_f: f64) -> Result<(Benchmark, Reference, Vec<SweepOutcome>)> {
    let b = build_benchmark(n, alpha, big_f)?;
    let reference = solve_reference(&b)?;
    let sweeps: Vec<SweepConfig> = Scheme::ALL.iter().map(|&s| SweepConfig::default_for(s, n)).collect();
    let out = run_all(&b, &reference, &sweeps)?;
    Ok((b, reference, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn force_is_antisymmetric_and_balanced() {
        let f = BenchmarkForce::new(129).unwrap();
        let c = 64;
        // f_c = -f_{c+1}
        assert!((f.values[c - 1] + f.values[c]).abs() < 1e-12);
        for l in 1..=c {
            assert!((f.values[l - 1] + f.values[2 * c - l]).abs() < 1e-9 * f.values[l - 1].abs());
        }
        assert_eq!(f.values[128], 0.0);
        assert!(f.values.iter().sum::<f64>().abs() / 129.0 < 1e-10);
        assert_eq!(f.mean_correction, 0.0);
        assert!(BenchmarkForce::new(128).is_err());
        assert!(BenchmarkForce::new(31).is_err());
    }

    #[test]
    fn radial_matches_right_branch() {
        let f = BenchmarkForce::new(65).unwrap();
        let eps = 1.0 / 65.0;
        for d in 0..32 {
            assert!((f.radial(d as f64 * eps) - f.values[32 + d]).abs() < 1e-12);
        }
    }

    fn sample(scheme: Scheme, level: usize) -> ExperimentRecord {
        ExperimentRecord {
            scheme,
            level,
            dof: 10 + level,
            e_deformation: 0.1 / (level + 1) as f64,
            e_energy: 1.0 / 3.0,
            e_store: 1e-300,
            e_ext: 2.5,
            deformation_bound: std::f64::consts::PI,
            energy_bound: if level % 2 == 0 { Some(1e-17) } else { None },
            efficiency_deformation: f64::INFINITY,
            efficiency_energy: Some(7.0),
            a_star: -0.0,
            stable: level % 3 != 0,
            wall_time: 0.0,
        }
    }

    #[test]
    fn csv_round_trip_and_line_count() {
        let recs: Vec<ExperimentRecord> =
            Scheme::ALL.iter().flat_map(|&s| (0..5).map(move |l| sample(s, l))).collect();
        let text = to_csv(&recs);
        assert_eq!(text.lines().count(), 16);
        let back = parse_csv(&text).unwrap();
        assert_eq!(back, recs);
        assert_eq!(to_csv(&back), text);
        assert_eq!(to_csv(&recs[..1]).lines().count(), 2);
        assert!(parse_csv("nope\n").is_err());
        let broken = text.replacen("optimal,0,10,", "optimal,zero,10,", 1);
        assert!(matches!(parse_csv(&broken), Err(QcError::Parse { line: 2, .. })));
    }

    #[test]
    fn interpolation_at_dof() {
        let mut recs: Vec<ExperimentRecord> = (0..3).map(|l| sample(Scheme::Gradient, l)).collect();
        recs[0].dof = 10;
        recs[1].dof = 100;
        recs[0].e_energy = 1.0;
        recs[1].e_energy = 0.01;
        recs[2].dof = 1000;
        let v = value_at_dof(&recs, Scheme::Gradient, 31, |r| r.e_energy).unwrap();
        let expect = (0.01f64.ln() * (31f64.ln() - 10f64.ln()) / 10f64.ln()).exp();
        assert!((v - expect).abs() < 1e-12);
        assert_eq!(value_at_dof(&recs, Scheme::Gradient, 100, |r| r.e_energy), Some(0.01));
        assert!(value_at_dof(&recs, Scheme::Gradient, 5, |r| r.e_energy).is_none());
        let mut all = recs.clone();
        all.push(sample(Scheme::Energy, 0));
        assert_eq!(final_common_dof(&all, &[Scheme::Gradient, Scheme::Energy]), Some(10));
        assert_eq!(final_common_dof(&all, &Scheme::ALL), None);
    }

    #[test]
    fn svg_has_one_curve_per_scheme() {
        let recs: Vec<ExperimentRecord> =
            Scheme::ALL.iter().flat_map(|&s| (0..4).map(move |l| sample(s, l))).collect();
        let docs = plot_documents(&recs);
        assert_eq!(docs.len(), 4);
        for (_, d) in &docs {
            assert!(d.starts_with("<svg") && d.trim_end().ends_with("</svg>"));
        }
        assert_eq!(docs[0].1.matches("<polyline").count(), 3);
    }

    #[test]
    fn zero_force_ladder_has_no_error() {
        let mut b = build_benchmark(65, 5.0, 1.0).unwrap();
        b.force.values.iter_mut().for_each(|v| *v = 0.0);
        b.force_field = b.force.field(&b.cfg).unwrap();
        let reference = solve_reference(&b).unwrap();
        let mut sweep = SweepConfig::default_for(Scheme::Gradient, 65);
        sweep.max_dof = 40;
        let out = run_sweep(&b, &reference, &sweep).unwrap();
        assert!(out.failures.is_empty());
        for r in &out.records {
            assert_eq!((r.e_deformation, r.e_energy), (0.0, 0.0));
            assert!(r.deformation_bound < 1e-12);
        }
    }
}
