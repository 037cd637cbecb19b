//! Command-line front end.
//!
//! Exit codes: 0 success (or certified / consistent), 1 inconclusive,
//! 2 usage or input error (or refuted precondition).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::certify::{self, DichotomyParams, CSV_HEADER};
use crate::continua::{build_needle, build_p, build_zigzag_ln, default_base, PModel, DEFAULT_SHARPNESS};
use crate::error::{Error, Result};
use crate::format::{self, fmt17, ModelFile};
use crate::geometry::{ContinuumModel, Point, PointCloud};
use crate::ifs::{attractor, IfsSpec};
use crate::metric::{chain_profile, ProfileVerdict};
use crate::svg;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INCONCLUSIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "nonattractor", version, about = "Chain metrics, IFS attractors and non-attractor certificates")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Seed for every randomized estimate.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Only report errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a model file.
    Build(BuildArgs),
    /// Chain-distance profile between two marked points of a model.
    Chain(ChainArgs),
    /// Iterate an IFS to its attractor.
    Attractor(AttractorArgs),
    /// Run a non-attractor certificate.
    Certify(CertifyArgs),
    /// Render a model file or profile CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BuildKind {
    Needle,
    #[value(name = "P", alias = "p")]
    P,
    Zigzag,
    Segment,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    pub kind: BuildKind,
    /// Sampling pitch of the needle image.
    #[arg(long, default_value_t = 1e-3)]
    pub delta: f64,
    #[arg(long, default_value_t = DEFAULT_SHARPNESS)]
    pub sharpness: f64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Number of zigzag lines of P.
    #[arg(long, default_value_t = 5)]
    pub n_max: u32,
    /// Index of a single zigzag line.
    #[arg(long, default_value_t = 1)]
    pub n: u32,
    /// Relative length tolerance of the zigzag lines.
    #[arg(long, default_value_t = 1e-9)]
    pub length_tol: f64,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    pub model: PathBuf,
    pub from: String,
    pub to: String,
    #[arg(long, default_value_t = 0.1)]
    pub eps0: f64,
    #[arg(long, default_value_t = 8)]
    pub kmax: usize,
}

#[derive(Debug, Args)]
pub struct AttractorArgs {
    pub ifs: PathBuf,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Initial cloud file; the origin when absent.
    #[arg(long)]
    pub seed_cloud: Option<PathBuf>,
    /// Where to write the per-iteration step CSV (standard error summary
    /// only when absent).
    #[arg(long)]
    pub steps: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CertifyKind {
    Needle,
    FixedSet,
    Coverage,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    pub kind: CertifyKind,
    pub ifs: PathBuf,
    pub model: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eps0: f64,
    #[arg(long, default_value_t = 6)]
    pub kmax: usize,
    /// Pairs sampled when testing a declared Lipschitz bound.
    #[arg(long, default_value_t = 100_000)]
    pub pairs: usize,
    /// Emit a CSV header and row instead of key=value lines.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    pub input: PathBuf,
    /// SVG destination; overrides `--out`.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => format::write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!("--{name} must be positive, got {v}")))
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Build(a) => build(a, out),
        Command::Chain(a) => chain(a, out),
        Command::Attractor(a) => run_attractor(a, out),
        Command::Certify(a) => certify_cmd(a, cli.seed, out),
        Command::Plot(a) => plot(a, a.svg.as_deref().or(out)),
    }
}

fn build(a: &BuildArgs, out: Option<&Path>) -> Result<i32> {
    let text = match a.kind {
        BuildKind::Needle => {
            positive("delta", a.delta)?;
            let needle = build_needle(&default_base(a.dim)?, a.sharpness, a.delta)?;
            info!("needle image with {} pieces", needle.image.pieces().len());
            format::needle_to_string(&needle, a.delta)
        }
        BuildKind::P => {
            let p = build_p(a.n_max, a.length_tol)?;
            format::model_to_string(&p.model)
        }
        BuildKind::Zigzag => {
            let l = build_zigzag_ln(a.n, a.length_tol)?;
            let mut m = ContinuumModel::new(vec![(format!("l{}", a.n), l)], Default::default())?;
            m.add_mark("p0", crate::continua::p_point(0))?;
            m.add_mark(&format!("p{}", a.n), crate::continua::p_point(a.n))?;
            format::model_to_string(&m)
        }
        BuildKind::Segment => {
            let mut b = vec![0.0; a.dim.max(1)];
            b[0] = 1.0;
            let m = ContinuumModel::segment(Point::origin(a.dim.max(1)), Point::new(b)?)?;
            format::model_to_string(&m)
        }
    };
    emit(out, &text)?;
    Ok(EXIT_OK)
}

fn chain(a: &ChainArgs, out: Option<&Path>) -> Result<i32> {
    positive("eps0", a.eps0)?;
    let model = format::read_model(&a.model)?;
    let m = model.continuum();
    let x = m.marked_point(&a.from)?.clone();
    let y = m.marked_point(&a.to)?.clone();
    let profile = chain_profile(m, &x, &y, a.eps0, a.kmax)?;
    info!("{}", format::verdict_line(&profile.verdict));
    emit(out, &format::profile_to_string(&profile))?;
    Ok(match profile.verdict {
        ProfileVerdict::Inconclusive { .. } => EXIT_INCONCLUSIVE,
        _ => EXIT_OK,
    })
}

fn run_attractor(a: &AttractorArgs, out: Option<&Path>) -> Result<i32> {
    positive("tol", a.tol)?;
    let f = format::read_ifs(&a.ifs)?;
    let seed = match &a.seed_cloud {
        Some(p) => format::parse_cloud(&std::fs::read_to_string(p)?)?,
        None => PointCloud::from_flat(f.dim, vec![0.0; f.dim], a.tol)?,
    };
    let run = attractor(&f, &seed, a.tol, a.max_iter)?;
    let mut steps = String::from("iteration,step\n");
    for (k, s) in run.steps.iter().enumerate() {
        steps.push_str(&format!("{},{}\n", k + 1, fmt17(*s)));
    }
    steps.push_str(&format!(
        "converged={} lambda_max={} error_bound={}\n",
        run.converged,
        fmt17(run.lambda_max),
        fmt17(run.error_bound)
    ));
    match &a.steps {
        Some(p) => format::write_atomic(p, steps.as_bytes())?,
        None => info!("{} iterations, converged={}", run.steps.len(), run.converged),
    }
    emit(out, &format::cloud_to_string(&run.cloud))?;
    Ok(if run.converged { EXIT_OK } else { EXIT_INCONCLUSIVE })
}

/// Recovers `P` from a model file: pieces `l1..ln` in order.
fn p_from_model(m: ContinuumModel) -> Result<PModel> {
    let mut lines = Vec::new();
    for n in 1.. {
        match m.piece(&format!("l{n}")) {
            Some(l) => lines.push(l.clone()),
            None => break,
        }
    }
    if lines.is_empty() || lines.len() != m.pieces().len() {
        return Err(Error::Input("expected a P model with pieces l1..ln".into()));
    }
    Ok(PModel { n_max: lines.len() as u32, lines, model: m })
}

fn single_map(f: &IfsSpec) -> Result<&crate::ifs::MapSpec> {
    match f.maps.as_slice() {
        [m] => Ok(m),
        _ => Err(Error::Input(format!("the needle check takes exactly one map, got {}", f.maps.len()))),
    }
}

fn certify_cmd(a: &CertifyArgs, seed: u64, out: Option<&Path>) -> Result<i32> {
    positive("delta", a.delta)?;
    positive("eps0", a.eps0)?;
    let f = format::read_ifs(&a.ifs)?;
    let model = format::read_model(&a.model)?;
    let cert = match a.kind {
        CertifyKind::Needle => {
            let needle = match &model {
                ModelFile::Needle { needle, .. } => needle,
                ModelFile::Plain(_) => return Err(Error::Input("the needle check needs a needle model file".into())),
            };
            let params = DichotomyParams { eps0: a.eps0, k_max: a.kmax, seed, pairs: a.pairs };
            certify::needle_dichotomy_check(single_map(&f)?, needle, params)?
        }
        CertifyKind::FixedSet => certify::fixed_set_check(&f, model.continuum(), a.delta)?,
        CertifyKind::Coverage => {
            let p = match model {
                ModelFile::Plain(m) => p_from_model(m)?,
                ModelFile::Needle { .. } => return Err(Error::Input("the coverage check needs a P model".into())),
            };
            certify::p_point_coverage(&f, &p, a.delta)?.certificate
        }
    };
    info!("{}: {}", cert.verdict.tag(), cert.note);
    let text = if a.csv { format!("{CSV_HEADER}\n{}\n", cert.to_csv_row()) } else { cert.to_key_value() };
    emit(out, &text)?;
    Ok(cert.exit_code())
}

fn plot(a: &PlotArgs, out: Option<&Path>) -> Result<i32> {
    let text = std::fs::read_to_string(&a.input)?;
    let title = a.input.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let svg = if text.starts_with(format::PROFILE_CSV_HEADER) {
        svg::render_profile(&title, &format::parse_profile_csv(&text)?)?
    } else {
        let (pieces, marked) = format::parse_model(&text)?.drawing();
        svg::render_model(&title, &pieces, &marked)?
    };
    emit(out, &svg)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use std::path::PathBuf;

    fn run(args: &[&str]) -> i32 {
        let mut full = vec!["nonattractor", "--quiet"];
        full.extend_from_slice(args);
        super::run(full)
    }

    struct Scratch(tempfile::TempDir);

    impl Scratch {
        fn new() -> Scratch {
            Scratch(tempfile::tempdir().unwrap())
        }

        fn path(&self, name: &str) -> String {
            let p: PathBuf = self.0.path().join(name);
            p.to_string_lossy().into_owned()
        }

        fn write(&self, name: &str, text: &str) -> String {
            let p = self.path(name);
            std::fs::write(&p, text).unwrap();
            p
        }

        fn read(&self, name: &str) -> String {
            std::fs::read_to_string(self.path(name)).unwrap()
        }
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(&[]), 2);
        assert_eq!(run(&["build", "torus"]), 2);
        assert_eq!(run(&["chain", "/nonexistent/model.txt", "a", "b"]), 2);
        assert_eq!(run(&["build", "needle", "--delta=-1"]), 2);
    }

    #[test]
    fn help_and_version_exit_zero() {
        assert_eq!(run(&["--help"]), 0);
        assert_eq!(run(&["--version"]), 0);
    }

    #[test]
    fn segment_chain_converges_to_its_length() {
        let s = Scratch::new();
        let model = s.path("seg.txt");
        assert_eq!(run(&["--out", &model, "build", "segment"]), 0);
        let csv = s.path("seg.csv");
        assert_eq!(run(&["--out", &csv, "chain", &model, "a", "b", "--eps0", "0.1", "--kmax", "4"]), 0);
        let text = s.read("seg.csv");
        assert!(text.starts_with("epsilon,pitch,value\n"));
        let last = text.lines().filter(|l| !l.starts_with("verdict") && !l.starts_with("epsilon")).last().unwrap();
        let v: f64 = last.rsplit(',').next().unwrap().parse().unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn unknown_marked_point_is_an_input_error() {
        let s = Scratch::new();
        let model = s.path("seg.txt");
        assert_eq!(run(&["--out", &model, "build", "segment"]), 0);
        assert_eq!(run(&["chain", &model, "a", "nowhere"]), 2);
    }

    #[test]
    fn p_neighbours_chain_to_the_sum_of_their_lengths() {
        let s = Scratch::new();
        let model = s.path("p.txt");
        assert_eq!(run(&["--out", &model, "build", "P", "--n-max", "2"]), 0);
        // p0 -> p1 runs along l1 (length 2); small enough scales resolve it.
        let csv = s.path("p.csv");
        assert_eq!(run(&["--out", &csv, "chain", &model, "p0", "p1", "--eps0", "1e-3", "--kmax", "3"]), 0);
        let text = s.read("p.csv");
        let last = text.lines().filter(|l| !l.starts_with("verdict") && !l.starts_with("epsilon")).last().unwrap();
        let v: f64 = last.rsplit(',').next().unwrap().parse().unwrap();
        assert!((v - 2.0).abs() < 1e-2, "{v}");
    }

    #[test]
    fn attractor_writes_cloud_and_steps() {
        let s = Scratch::new();
        let ifs = s.write("cantor.ifs", "# middle thirds\naffine 0.3333333333333333 0\naffine 0.3333333333333333 0.6666666666666666\n");
        let (cloud, steps) = (s.path("cloud.txt"), s.path("steps.csv"));
        assert_eq!(run(&["--out", &cloud, "attractor", &ifs, "--tol", "1e-3", "--steps", &steps]), 0);
        assert!(!s.read("cloud.txt").is_empty());
        assert!(s.read("steps.csv").lines().count() > 2);
    }

    #[test]
    fn attractor_without_convergence_exits_one() {
        let s = Scratch::new();
        let ifs = s.write("slow.ifs", "affine 0.99 0\naffine 0.99 0.01\n");
        assert_eq!(run(&["--out", &s.path("c.txt"), "attractor", &ifs, "--tol", "1e-9", "--max-iter", "3"]), 1);
    }

    #[test]
    fn certify_exit_codes_follow_the_verdict() {
        let s = Scratch::new();
        let needle = s.path("needle.txt");
        assert_eq!(run(&["--out", &needle, "build", "needle", "--delta", "1e-3"]), 0);
        let konst = s.write("const.ifs", "constant 0 0\n");
        let half = s.write("half.ifs", "needle_half\nlip 0.9\n");
        let two = s.write("two.ifs", "constant 0 0\nconstant 1 0\n");
        let out = s.path("cert.txt");
        assert_eq!(run(&["--out", &out, "certify", "needle", &konst, &needle, "--kmax", "4"]), 0);
        assert!(s.read("cert.txt").contains("consistent"));
        assert_eq!(run(&["--out", &out, "certify", "needle", &half, &needle, "--kmax", "4"]), 2);
        assert!(s.read("cert.txt").contains("refuted"));
        assert_eq!(run(&["--out", &out, "certify", "needle", &two, &needle]), 2);
    }

    #[test]
    fn plot_renders_models_and_profiles() {
        let s = Scratch::new();
        let model = s.path("seg.txt");
        assert_eq!(run(&["--out", &model, "build", "segment"]), 0);
        let svg = s.path("seg.svg");
        assert_eq!(run(&["--out", &svg, "plot", &model]), 0);
        let text = s.read("seg.svg");
        assert!(text.contains("width=\"1000\" height=\"1000\""));
        let csv = s.path("seg.csv");
        assert_eq!(run(&["--out", &csv, "chain", &model, "a", "b", "--kmax", "3"]), 0);
        let svg2 = s.path("prof.svg");
        assert_eq!(run(&["--out", &svg2, "plot", &csv]), 0);
        assert!(s.read("prof.svg").contains("log10 epsilon"));
    }
}
