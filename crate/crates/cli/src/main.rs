//! `quasispec` experiment driver.
//!
//! Exit codes: 0 ok, 2 parse error, 3 semantic violation, 4 runtime failure,
//! 5 resonant input.

mod svg;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use quasispec::lattice::{diophantine_csv, diophantine_report};
use quasispec::resonance::{fractions_csv, FractionEstimate};
use quasispec::synthesis::field_csv;
use quasispec::{
    branch_pair, grid_render, hole_statistics, nonresonant_fraction, run_multiscale, swiss_cheese, trace_curve, Error,
    ExperimentConfig, MomentumPoint, MultiscaleOutcome, PotentialSpec, RunManifest,
};

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "QUASISPEC_THREADS";

#[derive(Parser)]
#[command(name = "quasispec", version, about = "Multiscale spectral experiments for quasi-periodic polyharmonic operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and list every violation.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Multiscale chain at one momentum.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_k, allow_hyphen_values = true)]
        k: MomentumPoint,
        #[arg(long)]
        level: Option<u32>,
    },
    /// Nested non-resonant angle sets.
    Cheese {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        level: Option<u32>,
    },
    /// Isoenergetic curve on the non-resonant angle set.
    Isocurve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        level: Option<u32>,
    },
    /// Monte Carlo non-resonant fraction per disk radius.
    Fraction {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: Option<u32>,
    },
    /// Almost-plane wave on the configured spatial grid.
    Wave {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_k, allow_hyphen_values = true)]
        k: MomentumPoint,
        #[arg(long)]
        level: Option<u32>,
        /// Write `|Ψ|` only.
        #[arg(long)]
        magnitude: bool,
    },
    /// Smallest `|p + αm|` per box size.
    Diophantine {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        max_box: u32,
    },
    /// Re-render an SVG from a CSV written by another subcommand.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

fn parse_k(s: &str) -> Result<MomentumPoint, String> {
    let (a, b) = s.split_once(',').ok_or("expected KX,KY")?;
    let x = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let y = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    MomentumPoint::new(x, y).map_err(|e| e.to_string())
}

/// A failure carrying its exit code.
struct Fail {
    code: u8,
    message: String,
}

impl Fail {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse(_) => 2,
            Error::InvalidFrequency(_)
            | Error::InvalidSchedule(_)
            | Error::InvalidPotential(_)
            | Error::NonHermitianPotential
            | Error::InvalidArgument(_)
            | Error::GridCap { .. } => 3,
            _ => 4,
        };
        Fail::new(code, e.to_string())
    }
}

type Outcome = Result<(), Fail>;

/// A loaded, validated config plus the output bookkeeping of one run.
struct Run {
    config: ExperimentConfig,
    spec: PotentialSpec,
    dir: PathBuf,
    manifest: RunManifest,
    start: Instant,
}

fn load(path: &Path) -> Result<ExperimentConfig, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail::new(2, format!("{}: {e}", path.display())))?;
    Ok(ExperimentConfig::from_json(&text)?)
}

impl Run {
    fn open(common: &Common, subcommand: &str) -> Result<Self, Fail> {
        let config = load(&common.config)?.checked().map_err(|v| {
            let lines: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            Fail::new(3, lines.join("\n"))
        })?;
        let spec = config.valid_spec()?;
        let dir = common.out.clone().unwrap_or_else(|| PathBuf::from(&config.output_dir));
        std::fs::create_dir_all(&dir).map_err(|e| Fail::new(4, format!("{}: {e}", dir.display())))?;
        let manifest = RunManifest::new(&config, subcommand);
        Ok(Self { config, spec, dir, manifest, start: Instant::now() })
    }

    fn write(&mut self, name: &str, body: &str) -> Outcome {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| Fail::new(4, format!("{}: {e}", path.display())))?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    /// Writes a CSV and, when `figure` is set, the SVG rendered from it.
    fn write_csv(&mut self, name: &str, body: &str, figure: bool) -> Outcome {
        self.write(name, body)?;
        if figure {
            let svg = svg::render(body).map_err(|e| Fail::new(4, e.to_string()))?;
            self.write(&name.replace(".csv", ".svg"), &svg)?;
        }
        Ok(())
    }

    fn finish(mut self) -> Outcome {
        self.manifest.wall_clock_seconds = self.start.elapsed().as_secs_f64();
        let name = format!("manifest_{}.json", self.manifest.subcommand);
        let body = self.manifest.to_json();
        let path = self.dir.join(&name);
        std::fs::write(&path, body).map_err(|e| Fail::new(4, format!("{}: {e}", path.display())))?;
        for o in &self.manifest.outputs {
            println!("{}", self.dir.join(o).display());
        }
        println!("{}", path.display());
        Ok(())
    }

    fn lambdas(&self, one: Option<f64>) -> Vec<f64> {
        one.map_or_else(|| self.config.lambdas.clone(), |l| vec![l])
    }
}

fn validate(path: &Path) -> Outcome {
    let config = load(path)?;
    let v = config.validate();
    if v.is_empty() {
        println!("ok {}", config.hash());
        return Ok(());
    }
    for x in &v {
        println!("{x}");
    }
    Err(Fail::new(3, format!("{} violation(s)", v.len())))
}

fn converge(common: &Common, k: MomentumPoint, level: Option<u32>) -> Outcome {
    let mut run = Run::open(common, "converge")?;
    let levels = level.unwrap_or(run.config.levels);
    let c = &run.config;
    match run_multiscale(&run.spec, k, levels, &c.schedule, &c.selection)? {
        MultiscaleOutcome::Converged(r) => {
            run.write_csv("converge.csv", &r.to_csv(), false)?;
            run.finish()
        }
        MultiscaleOutcome::Resonant { level, witness } => {
            run.finish()?;
            Err(Fail::new(
                5,
                format!(
                    "resonant at level {level}: overlap {:.6}, gap {:e}, eigenvalue {}",
                    witness.overlap, witness.gap, witness.lambda
                ),
            ))
        }
    }
}

fn cheese(common: &Common, lambda: Option<f64>, level: Option<u32>) -> Outcome {
    let mut run = Run::open(common, "cheese")?;
    let levels = level.unwrap_or(run.config.levels);
    let mut stats = String::from("lambda,level,measure,holes,removed,largest_hole\n");
    for lam in run.lambdas(lambda) {
        let c = &run.config;
        let sets = swiss_cheese(&run.spec, lam, levels, c.grids.phi_resolution, &c.schedule, &c.thresholds, &c.selection, &c.radial)?;
        for b in &sets {
            let h = hole_statistics(b);
            let largest = h.lengths.first().copied().unwrap_or(0.0);
            writeln!(stats, "{lam},{},{},{},{},{largest}", b.level, b.measure(), h.count, h.removed).unwrap();
            run.write_csv(&format!("cheese_lambda{lam}_n{}.csv", b.level), &b.to_csv(), true)?;
        }
    }
    run.write_csv("cheese_stats.csv", &stats, false)?;
    run.finish()
}

fn isocurve(common: &Common, lambda: Option<f64>, level: Option<u32>) -> Outcome {
    let mut run = Run::open(common, "isocurve")?;
    let n = level.unwrap_or(1);
    let mut sweep = String::from("lambda,level,samples,failures,max_deviation\n");
    for lam in run.lambdas(lambda) {
        let c = &run.config;
        let sets = swiss_cheese(&run.spec, lam, n, c.grids.phi_resolution, &c.schedule, &c.thresholds, &c.selection, &c.radial)?;
        let b = sets.last().expect("at least one level");
        if b.is_empty() {
            writeln!(sweep, "{lam},{n},0,0,").unwrap();
            continue;
        }
        let curve = trace_curve(&run.spec, lam, n, b, c.grids.phi_resolution, &c.schedule, &c.selection, &c.radial)?;
        writeln!(sweep, "{lam},{n},{},{},{}", curve.samples.len(), curve.failures.len(), curve.max_deviation()).unwrap();
        run.write_csv(&format!("isocurve_lambda{lam}_n{n}.csv"), &curve.to_csv(), true)?;
    }
    run.write_csv("isocurve_sweep.csv", &sweep, false)?;
    run.finish()
}

fn fraction(common: &Common, level: Option<u32>) -> Outcome {
    let mut run = Run::open(common, "fraction")?;
    let seed = run.config.seed.ok_or_else(|| Fail::new(3, "seed: required for Monte Carlo sampling"))?;
    let n = level.unwrap_or(1);
    let c = &run.config;
    let rows: Vec<FractionEstimate> = c
        .grids
        .fraction_radii
        .iter()
        .map(|&r| {
            nonresonant_fraction(&run.spec, r, n, c.grids.fraction_samples, seed, c.grids.annulus, &c.schedule, &c.thresholds, &c.selection)
        })
        .collect::<Result<_, _>>()?;
    run.write_csv("fraction.csv", &fractions_csv(&rows), false)?;
    run.finish()
}

fn wave(common: &Common, k: MomentumPoint, level: Option<u32>, magnitude: bool) -> Outcome {
    let mut run = Run::open(common, "wave")?;
    let n = level.unwrap_or(run.config.levels);
    let c = &run.config;
    let pair = match branch_pair(&run.spec, k, n, &c.schedule, &c.selection)? {
        Ok(p) => p,
        Err(w) => {
            run.finish()?;
            return Err(Fail::new(5, format!("resonant at level {}: overlap {:.6}, gap {:e}", w.level, w.overlap, w.gap)));
        }
    };
    let field = grid_render(&pair, &run.spec.freq, c.convention, &c.grids.spatial, c.grids.grid_cap)?;
    run.write_csv("wave.csv", &field_csv(&field, magnitude), true)?;
    run.finish()
}

fn diophantine(common: &Common, max_box: u32) -> Outcome {
    let mut run = Run::open(common, "diophantine")?;
    let rows = diophantine_report(&run.spec.freq, max_box);
    run.write_csv("diophantine.csv", &diophantine_csv(&rows), false)?;
    run.finish()
}

fn render(input: &Path, output: &Path) -> Outcome {
    let text = std::fs::read_to_string(input).map_err(|e| Fail::new(2, format!("{}: {e}", input.display())))?;
    let svg = svg::render(&text).map_err(|e| Fail::new(2, e.to_string()))?;
    std::fs::write(output, svg).map_err(|e| Fail::new(4, format!("{}: {e}", output.display())))?;
    println!("{}", output.display());
    Ok(())
}

fn configure_threads() -> Outcome {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| Fail::new(3, format!("{THREADS_ENV}: not a thread count: {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Fail::new(4, e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Validate { config } => validate(config),
        Command::Converge { common, k, level } => converge(common, *k, *level),
        Command::Cheese { common, lambda, level } => cheese(common, *lambda, *level),
        Command::Isocurve { common, lambda, level } => isocurve(common, *lambda, *level),
        Command::Fraction { common, level } => fraction(common, *level),
        Command::Wave { common, k, level, magnitude } => wave(common, *k, *level, *magnitude),
        Command::Diophantine { common, max_box } => diophantine(common, *max_box),
        Command::Render { input, output } => render(input, output),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
