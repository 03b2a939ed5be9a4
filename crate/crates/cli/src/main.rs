mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use semilab::families::{affine_ratios, find_t1_with};
use semilab::geometry::{area_csv, area_estimate, box_dimension_with, AreaConfig, DimensionConfig};
use semilab::io::{csv, fmt_sig17, Report};
use semilab::julia::{backward_orbit, rasterize, repelling_fixed_point, PointCloud};
use semilab::randomdyn::{coliseum_raster, escape_radius, EscapeConfig};
use semilab::thermo::{bowen_parameter_with, moran_delta, pressure_csv, pressure_grid};
use semilab::transversality::{
    atc_certify, tc_scaling_probe, FiberPoint, LambdaGrid, PerturbationFamily, PerturbationKind,
};
use semilab::{Complex, Error, MultiMap};

use config::{RunConfig, WordConfig};

#[derive(Parser, Debug)]
#[command(name = "semilab", version, about = "Numerical experiments on polynomial semigroups")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Worker threads (all cores by default).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Overrides the seed in the config.
    #[arg(long, value_name = "K")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Backward-orbit point cloud rasterised to `julia.pgm`.
    Render,
    /// Zero of the preimage pressure.
    Bowen,
    /// Similarity dimension of an affine family.
    Moran,
    /// Box dimension and covered area of the point cloud.
    Dim,
    /// Boundary parameter of the d1d2 family.
    T1,
    /// Transversality certificate at detected overlaps.
    Atc,
    /// Sublevel scaling of a conjugacy difference.
    Tcprobe,
    /// Escape-probability raster `coliseum.pgm`.
    Tinfty,
    /// Pressure approximants on a grid of exponents.
    Pressure,
}

enum Failure {
    Core(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Out<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("ERROR {} {}", e.code(), e);
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
        Err(Failure::Io(msg)) => {
            eprintln!("ERROR Io {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Out<()> {
    let mut cfg = config::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidInput("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Io(e.to_string()))?;
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| Failure::Io(format!("{}: {e}", cli.out.display())))?;
    let f = cfg.family.build(&cfg.t1)?;
    let out = Output { dir: &cli.out };
    match cli.command {
        Command::Render => render(&cfg, &f, &out),
        Command::Bowen => bowen(&cfg, &f, &out),
        Command::Moran => moran(&f, &out),
        Command::Dim => dim(&cfg, &f, &out),
        Command::T1 => t1(&cfg, &out),
        Command::Atc => atc(&cfg, &f, &out),
        Command::Tcprobe => tcprobe(&cfg, &f, &out),
        Command::Tinfty => tinfty(&cfg, &f, &out),
        Command::Pressure => pressure(&cfg, &f, &out),
    }
}

struct Output<'a> {
    dir: &'a Path,
}

impl Output<'_> {
    fn write(&self, name: &str, bytes: &[u8]) -> Out<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
    }

    /// Prints `key value` lines and stores them in `name`.
    fn report(&self, name: &str, r: &Report) -> Out<()> {
        let text: String = r.lines().map(|(k, v)| format!("{k} {v}\n")).collect();
        print!("{text}");
        self.write(name, text.as_bytes())
    }
}

fn cloud(cfg: &RunConfig, f: &MultiMap) -> Out<PointCloud> {
    Ok(backward_orbit(f, cfg.cloud.points, cfg.cloud.burn_in, cfg.seed)?)
}

fn render(cfg: &RunConfig, f: &MultiMap, out: &Output) -> Out<()> {
    let c = cloud(cfg, f)?;
    let (min, max) = match (cfg.render.min, cfg.render.max) {
        (Some(a), Some(b)) => (a.0, b.0),
        (None, None) => {
            let (lo, hi) = c.bbox().ok_or(Error::DegenerateCloud)?;
            let pad = 0.02 * (hi - lo).norm();
            (lo - Complex::new(pad, pad), hi + Complex::new(pad, pad))
        }
        _ => return Err(Error::InvalidInput("render: give both min and max or neither".into()).into()),
    };
    let (raster, outside) = rasterize(&c.points, min, max, cfg.render.nx, cfg.render.ny)?;
    out.write("julia.pgm", &raster.to_pgm())?;
    let mut r = Report::new();
    r.push("points", c.points.len()).push("occupied", raster.occupied()).push("outside", outside);
    out.report("render.txt", &r)
}

fn bowen(cfg: &RunConfig, f: &MultiMap, out: &Output) -> Out<()> {
    let z0 = repelling_fixed_point(f)?;
    let res = bowen_parameter_with(f, cfg.bowen.level, cfg.bowen.tol, z0, cfg.metric.into(), cfg.bowen.estimator.into())?;
    let mut r = Report::new();
    r.push("delta", format!("{:.6}", res.delta))
        .push("delta_full", fmt_sig17(res.delta))
        .push("level", res.level)
        .push("residual", fmt_sig17(res.residual));
    out.report("bowen.txt", &r)
}

fn moran(f: &MultiMap, out: &Output) -> Out<()> {
    let ratios = affine_ratios(f)?;
    let delta = moran_delta(&ratios)?;
    let mut r = Report::new();
    r.push("delta", format!("{delta:.6}")).push("delta_full", fmt_sig17(delta));
    out.report("moran.txt", &r)
}

fn dim(cfg: &RunConfig, f: &MultiMap, out: &Output) -> Out<()> {
    let c = cloud(cfg, f)?;
    let d = &cfg.dim;
    let fit = box_dimension_with(&c, d.scales, &DimensionConfig { fit_scales: d.fit_scales, min_density: d.min_density })?;
    let area = area_estimate(&c, d.scales, &AreaConfig { plateau_tolerance: d.plateau_tolerance, min_density: d.min_density })?;
    out.write(
        "dim.csv",
        csv(&["scale", "count"], fit.scales.iter().zip(&fit.counts).map(|(s, n)| vec![fmt_sig17(*s), n.to_string()]))
            .as_bytes(),
    )?;
    out.write("area.csv", area_csv(&area).as_bytes())?;
    let mut r = Report::new();
    r.push("dimension", fmt_sig17(fit.dimension))
        .push("r_squared", fmt_sig17(fit.r_squared))
        .push("area", fmt_sig17(area.extrapolated))
        .push("area_positive", area.positive);
    out.report("dim.txt", &r)
}

fn t1(cfg: &RunConfig, out: &Output) -> Out<()> {
    let config::FamilyConfig::D1d2(d) = &cfg.family else {
        return Err(Error::InvalidInput("t1 needs a d1d2 family".into()).into());
    };
    let res = find_t1_with(d.d1, d.d2, d.b.0, cfg.t1.tol, &cfg.t1.t1_config())?;
    let mut r = Report::new();
    r.push("t1", fmt_sig17(res.t1))
        .push("bracket_low", fmt_sig17(res.bracket.0))
        .push("bracket_high", fmt_sig17(res.bracket.1))
        .push("upper", fmt_sig17(res.upper))
        .push("a_r", fmt_sig17(res.a_r))
        .push("big_r", fmt_sig17(res.big_r))
        .push("evaluations", res.evaluations);
    out.report("t1.txt", &r)
}

fn directions(cfg: &RunConfig, f: &MultiMap) -> Out<Vec<PerturbationFamily>> {
    let kinds: Vec<PerturbationKind> = if cfg.atc.directions.is_empty() {
        (0..f.m()).map(|index| PerturbationKind::Translation { index }).collect()
    } else {
        cfg.atc.directions.iter().map(|d| d.kind()).collect::<semilab::Result<_>>()?
    };
    let zero = Complex::new(0.0, 0.0);
    Ok(kinds.into_iter().map(|k| PerturbationFamily::new(f.clone(), k, zero)).collect::<semilab::Result<_>>()?)
}

fn atc(cfg: &RunConfig, f: &MultiMap, out: &Output) -> Out<()> {
    let dirs = directions(cfg, f)?;
    let c = cloud(cfg, f)?;
    let rep = atc_certify(&dirs, &c, cfg.atc.tol, cfg.atc.terms)?;
    out.report("atc.txt", &rep.report())
}

fn fiber(f: &MultiMap, w: &WordConfig) -> Out<FiberPoint> {
    let word = w.word()?;
    Ok(match w.hint {
        Some(h) => FiberPoint::near(f, &word, h.0)?,
        None => FiberPoint::canonical(f, &word)?,
    })
}

fn tcprobe(cfg: &RunConfig, f: &MultiMap, out: &Output) -> Out<()> {
    let tc = cfg.tcprobe.as_ref().ok_or_else(|| Error::InvalidInput("tcprobe section is missing".into()))?;
    let fam = PerturbationFamily::new(f.clone(), tc.direction.kind()?, Complex::new(0.0, 0.0))?;
    let (p, q) = (fiber(f, &tc.p)?, fiber(f, &tc.q)?);
    let grid = LambdaGrid { center: tc.center.0, radius: tc.radius, n: tc.n };
    let probe = tc_scaling_probe(&fam, (&p, &q), &grid, &tc.radii)?;
    out.write("tcprobe.csv", probe.csv().as_bytes())?;
    let mut r = Report::new();
    r.push("measure_exponent", fmt_sig17(probe.measure_exponent))
        .push("covering_exponent", fmt_sig17(probe.covering_exponent))
        .push("skipped", probe.skipped.len())
        .push("min_abs_delta", fmt_sig17(probe.min_abs_delta));
    out.report("tcprobe.txt", &r)
}

fn tinfty(cfg: &RunConfig, f: &MultiMap, out: &Output) -> Out<()> {
    let t = &cfg.tinfty;
    let m = f.m();
    let esc = EscapeConfig {
        probabilities: t.probabilities.clone().unwrap_or_else(|| vec![1.0 / m as f64; m]),
        escape_radius: match t.escape_radius {
            Some(r) => r,
            None => escape_radius(f)?,
        },
        max_iter: t.max_iter,
        trials: t.trials,
        seed: cfg.seed,
    };
    let raster = coliseum_raster(f, &esc, t.min.0, t.max.0, t.nx, t.ny)?;
    out.write("coliseum.pgm", &raster.to_pgm())?;
    let mut r = Report::new();
    r.push("pixels", raster.pixels.len()).push("undecided", raster.undecided);
    out.report("tinfty.txt", &r)
}

fn pressure(cfg: &RunConfig, f: &MultiMap, out: &Output) -> Out<()> {
    let z0 = repelling_fixed_point(f)?;
    let samples = pressure_grid(f, &cfg.pressure.ts, &cfg.pressure.levels, z0, cfg.metric.into())?;
    let text = pressure_csv(&samples);
    print!("{text}");
    out.write("pressure.csv", text.as_bytes())
}
