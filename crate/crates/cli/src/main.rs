mod output;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use eigencycle::analysis::{
    align_to_table, oriented_eigencycles, reproduce, spectrum, verify_manifold, Report, ReproduceOptions, Target,
};
use eigencycle::dynamics::{
    integrate_replicator, perturbed_state, random_tangent, simulate_agents, AgentConfig, OdeConfig, Policy,
};
use eigencycle::fixtures::FixtureSet;
use eigencycle::game::{PayoffBimatrix, StateVector};
use eigencycle::render::{render_accumulated, render_lissajous, render_regression_scatter, PlotKind, PlotSpec};
use eigencycle::spectral::{EigenPair, EigencycleSet, SubspacePair};
use eigencycle::stats::{ols, ols_simple, spearman};
use eigencycle::tsmetrics::{
    accumulated_angular_momentum_sessions, angular_momentum_table, encode_sessions, net_transit, PlaySeries, Protocol,
    TransitMode,
};
use output::Sink;
use rand::SeedableRng;

#[derive(Parser)]
#[command(name = "eigencycle", version, about = "Eigencycle analysis of replicator dynamics and play series")]
struct Cli {
    /// Game file (JSON). Defaults to the bundled 4x4 reference game.
    #[arg(long, global = true)]
    game: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output directory, or a file path when it has an extension.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format for table emitters.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Directory holding the reference fixtures instead of the bundled copy.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Rest point, Jacobian, eigenvalues and eigenvectors as JSON.
    Spectrum,
    /// Eigencycle table: one row per subspace, one column per eigenvector.
    /// Signs are positive for counterclockwise rotation. Degenerate
    /// eigenspaces of the reference game use the reference basis.
    Eigencycles,
    /// Angular momentum table of a play series.
    Analyze(AnalyzeArgs),
    /// Generate trajectories or play series.
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Ordinary least squares of one column on one or more columns.
    Regress(RegressArgs),
    /// Net transit matrix of a play series.
    NetTransit(NetTransitArgs),
    /// Integrate a small orbit of the fastest mode and check it stays near-periodic.
    VerifyManifold(ManifoldArgs),
    /// SVG figures.
    #[command(subcommand)]
    Render(RenderCmd),
    /// Recompute a reference result and report pass/fail per check.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Play series CSV (session,round,a_choice,b_choice).
    #[arg(long)]
    series: PathBuf,
    #[arg(long, default_value = "fixed-pair")]
    protocol: Protocol,
    /// Comma-separated origin; defaults to the interior rest point.
    #[arg(long, value_delimiter = ',')]
    origin: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum SimulateCmd {
    /// Replicator ODE from a perturbed rest point.
    Ode {
        #[arg(long, default_value_t = 30.0)]
        t1: f64,
        /// Size of the random tangent perturbation.
        #[arg(long, default_value_t = 1e-3)]
        perturb: f64,
        /// Sampling interval; omit to record every accepted step.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Agent-based repeated play.
    Agents {
        #[arg(long, default_value = "noisy-best-response")]
        policy: String,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 100_000)]
        rounds: usize,
    },
}

#[derive(Args)]
struct RegressArgs {
    /// CSV whose last column is the response.
    #[arg(long)]
    y: PathBuf,
    /// CSV files whose last columns are the regressors.
    #[arg(long, value_delimiter = ',', required = true)]
    x: Vec<PathBuf>,
    #[arg(long)]
    no_intercept: bool,
}

#[derive(Args)]
struct NetTransitArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long, default_value = "fixed-pair")]
    protocol: Protocol,
    #[arg(long, default_value = "occupancy")]
    mode: TransitMode,
}

#[derive(Args)]
struct ManifoldArgs {
    #[arg(long, default_value_t = 1e-3)]
    perturb: f64,
    #[arg(long, default_value_t = 10)]
    periods: usize,
}

#[derive(Subcommand)]
enum RenderCmd {
    /// Panel matrix of one eigencycle set.
    Lissajous {
        /// Eigenvector tag, e.g. .8i or .4i_1.
        #[arg(long, default_value = ".8i")]
        column: String,
        /// Use the tabulated eigencycles instead of computing them.
        #[arg(long)]
        reference: bool,
    },
    /// Reference angular momentum of one experiment against one eigencycle column.
    Scatter {
        #[arg(long, default_value = "O")]
        experiment: String,
        #[arg(long, default_value = ".8i")]
        column: String,
    },
    /// Accumulated angular momentum of a play series.
    Accumulated {
        #[arg(long)]
        series: PathBuf,
        #[arg(long, default_value = "fixed-pair")]
        protocol: Protocol,
        /// Subspace codes such as 15,16; defaults to the strongest seven.
        #[arg(long, value_delimiter = ',')]
        pairs: Option<Vec<String>>,
    },
}

#[derive(Args)]
struct ReproduceArgs {
    /// table2, table5, table6, fine_ttest, prop1, netfig or all.
    target: String,
    /// Exit 1 when any check fails.
    #[arg(long)]
    strict: bool,
}

struct Ctx {
    game: PayoffBimatrix,
    custom_game: bool,
    seed: u64,
    sink: Sink,
    format: Format,
    fixtures_dir: Option<PathBuf>,
}

impl Ctx {
    fn fixtures(&self) -> Result<FixtureSet> {
        Ok(match &self.fixtures_dir {
            Some(d) => FixtureSet::from_dir(d)?,
            None => FixtureSet::embedded()?,
        })
    }

    fn emit(&self, name: &str, contents: &str) -> Result<()> {
        if let Some(p) = self.sink.emit(name, contents)? {
            eprintln!("wrote {}", p.display());
        }
        Ok(())
    }

    fn emit_json(&self, name: &str, value: &impl serde::Serialize) -> Result<()> {
        self.emit(name, &serde_json::to_string_pretty(value)?)
    }

    fn read_series(&self, path: &Path, protocol: Protocol) -> Result<PlaySeries> {
        let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(PlaySeries::from_csv(file, self.game.n_a(), self.game.n_b(), protocol)?)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let (game, custom_game) = match &cli.game {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            (PayoffBimatrix::from_json(&text)?, true)
        }
        None => (PayoffBimatrix::oneill(), false),
    };
    let ctx = Ctx {
        game,
        custom_game,
        seed: cli.seed,
        sink: Sink::from_arg(cli.out.as_deref()),
        format: cli.format,
        fixtures_dir: cli.fixtures,
    };
    match cli.command {
        Command::Spectrum => cmd_spectrum(&ctx)?,
        Command::Eigencycles => cmd_eigencycles(&ctx)?,
        Command::Analyze(a) => cmd_analyze(&ctx, &a)?,
        Command::Simulate(s) => cmd_simulate(&ctx, s)?,
        Command::Regress(r) => cmd_regress(&ctx, &r)?,
        Command::NetTransit(n) => {
            let series = ctx.read_series(&n.series, n.protocol)?;
            ctx.emit_json("net_transit.json", &net_transit(&series, n.mode)?)?;
        }
        Command::VerifyManifold(m) => {
            let check = verify_manifold(&ctx.game, m.perturb, m.periods)?;
            ctx.emit_json("manifold.json", &check)?;
            if check.checks.iter().any(|c| !c.pass) {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Render(r) => cmd_render(&ctx, r)?,
        Command::Reproduce(r) => return cmd_reproduce(&ctx, &r),
    }
    Ok(ExitCode::SUCCESS)
}

/// Computed eigenpairs; for the reference game, degenerate eigenspaces are
/// expressed in the tabulated basis.
fn eigenpairs(ctx: &Ctx) -> Result<(eigencycle::analysis::Spectrum, Vec<EigenPair>)> {
    let spec = spectrum(&ctx.game)?;
    let fixtures = ctx.fixtures()?;
    let eigs =
        if ctx.game == fixtures.game { align_to_table(&spec, &fixtures.eigen_table)? } else { spec.eigs.clone() };
    Ok((spec, eigs))
}

fn complex_pair(z: &num_complex::Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn cmd_spectrum(ctx: &Ctx) -> Result<()> {
    let (spec, eigs) = eigenpairs(ctx)?;
    let doc = serde_json::json!({
        "rest_point": spec.rest_point.as_slice(),
        "jacobian": spec.jacobian.j.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
        "eigenvalues": eigs.iter().map(|e| complex_pair(&e.lambda)).collect::<Vec<_>>(),
        "tags": eigs.iter().map(|e| e.tag.clone()).collect::<Vec<_>>(),
        "eigenvectors": eigs.iter().map(|e| e.xi.iter().map(complex_pair).collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    ctx.emit_json("spectrum.json", &doc)
}

fn cmd_eigencycles(ctx: &Ctx) -> Result<()> {
    let (_, eigs) = eigenpairs(ctx)?;
    let sets: Vec<EigencycleSet> = eigs.iter().map(oriented_eigencycles).collect();
    let pairs = SubspacePair::enumerate(ctx.game.dim());
    match ctx.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["pair".to_string()];
            header.extend(eigs.iter().map(|e| e.tag.clone()));
            w.write_record(&header)?;
            for (i, p) in pairs.iter().enumerate() {
                let mut row = vec![p.code()];
                row.extend(sets.iter().map(|s| eigencycle::tsmetrics::fmt_f64(s.values()[i])));
                w.write_record(&row)?;
            }
            ctx.emit("eigencycles.csv", &String::from_utf8(w.into_inner()?)?)
        }
        Format::Json => {
            let columns: Vec<serde_json::Value> = eigs
                .iter()
                .zip(&sets)
                .map(|(e, s)| serde_json::json!({"tag": e.tag, "eigenvalue": complex_pair(&e.lambda), "values": s.values()}))
                .collect();
            let doc = serde_json::json!({
                "pairs": pairs.iter().map(|p| p.code()).collect::<Vec<_>>(),
                "columns": columns,
            });
            ctx.emit_json("eigencycles.json", &doc)
        }
    }
}

fn cmd_analyze(ctx: &Ctx, a: &AnalyzeArgs) -> Result<()> {
    let series = ctx.read_series(&a.series, a.protocol)?;
    let origin = match &a.origin {
        Some(v) => StateVector::new(v.clone(), ctx.game.n_a())?,
        None => spectrum(&ctx.game)?.rest_point,
    };
    let table = angular_momentum_table(&series, &origin)?;
    match ctx.format {
        Format::Csv => {
            let mut buf = Vec::new();
            table.to_csv(&mut buf)?;
            ctx.emit("angular_momentum.csv", &String::from_utf8(buf)?)
        }
        Format::Json => {
            let (_, eigs) = eigenpairs(ctx)?;
            let fastest = eigs.iter().filter(|e| e.lambda.im > 0.0).max_by(|x, y| x.lambda.im.total_cmp(&y.lambda.im));
            let fit = match fastest {
                Some(e) => {
                    let sigma = oriented_eigencycles(e);
                    let rank = spearman(table.values(), sigma.values())?;
                    let reg = ols_simple(table.values(), sigma.values(), &format!("sigma_{}", e.tag))?;
                    serde_json::json!({"tag": e.tag, "spearman": rank, "regression": reg})
                }
                None => serde_json::Value::Null,
            };
            let doc = serde_json::json!({
                "rounds": series.rounds(),
                "transitions": table.transitions(),
                "table": table,
                "fastest_mode_fit": fit,
            });
            ctx.emit_json("angular_momentum.json", &doc)
        }
    }
}

fn cmd_simulate(ctx: &Ctx, cmd: SimulateCmd) -> Result<()> {
    match cmd {
        SimulateCmd::Ode { t1, perturb, dt } => {
            let base = spectrum(&ctx.game)?.rest_point;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(ctx.seed);
            let delta = random_tangent(&mut rng, ctx.game.n_a(), ctx.game.n_b(), perturb);
            let mut cfg = OdeConfig::new(perturbed_state(&base, &delta)?, t1);
            if let Some(dt) = dt {
                cfg = cfg.with_sample_dt(dt);
            }
            let traj = integrate_replicator(&ctx.game, &cfg)?;
            let mut buf = Vec::new();
            traj.to_csv(&mut buf)?;
            ctx.emit("trajectory.csv", &String::from_utf8(buf)?)
        }
        SimulateCmd::Agents { policy, eps, rounds } => {
            let cfg = AgentConfig { policy: Policy::parse(&policy, eps)?, rounds, seed: ctx.seed };
            let series = simulate_agents(&ctx.game, &cfg)?;
            let mut buf = Vec::new();
            series.to_csv(&mut buf)?;
            ctx.emit("plays.csv", &String::from_utf8(buf)?)
        }
    }
}

/// Labels from the first column and values from the last one.
fn read_column(path: &Path) -> Result<(String, Vec<String>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    let name = headers.iter().next_back().unwrap_or("x").to_string();
    let (mut labels, mut values) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let last = rec.iter().next_back().unwrap_or("");
        let v: f64 = last
            .trim()
            .parse()
            .with_context(|| format!("{}: row {} value {last:?} is not a number", path.display(), i + 1))?;
        labels.push(rec.get(0).unwrap_or("").to_string());
        values.push(v);
    }
    Ok((name, labels, values))
}

fn cmd_regress(ctx: &Ctx, a: &RegressArgs) -> Result<()> {
    let (_, y_labels, y) = read_column(&a.y)?;
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for p in &a.x {
        let (name, labels, values) = read_column(p)?;
        if values.len() != y.len() {
            bail!("{} has {} rows, response has {}", p.display(), values.len(), y.len());
        }
        if labels.len() == y_labels.len() && headers_are_labels(&labels) && labels != y_labels {
            bail!("{} rows are not aligned with the response", p.display());
        }
        names.push(name);
        cols.push(values);
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let result = ols(&y, &cols, &refs, !a.no_intercept)?;
    eprint!("{}", result.to_text());
    ctx.emit_json("regression.json", &result)
}

/// First columns that look like subspace codes are used for alignment.
fn headers_are_labels(labels: &[String]) -> bool {
    labels.iter().all(|l| SubspacePair::parse(l).is_ok())
}

fn cmd_render(ctx: &Ctx, cmd: RenderCmd) -> Result<()> {
    match cmd {
        RenderCmd::Lissajous { column, reference } => {
            let spec = PlotSpec::new(PlotKind::LissajousMatrix);
            let svg = if reference {
                let f = ctx.fixtures()?;
                let set = f.eigen_table.eigencycle_column(&column)?;
                render_lissajous(&set, Some(f.eigen_table.eigenvector(&column)?), &spec)
            } else {
                let (_, eigs) = eigenpairs(ctx)?;
                let e = eigs
                    .iter()
                    .find(|e| e.tag == column)
                    .with_context(|| format!("no eigenvector tagged {column:?}"))?;
                render_lissajous(&oriented_eigencycles(e), Some(&e.xi), &spec)
            };
            ctx.emit(&format!("lissajous{}.svg", column.replace('.', "_")), &svg)
        }
        RenderCmd::Scatter { experiment, column } => {
            let f = ctx.fixtures()?;
            let sigma = f.eigen_table.eigencycle_column(&column)?;
            let l = f.l_table.column(&experiment)?;
            let reg = ols_simple(&l, sigma.values(), "sigma")?;
            let fit = (reg.coefficients[0].estimate, reg.coefficients[1].estimate);
            let svg = render_regression_scatter(
                &f.l_table.pairs,
                sigma.values(),
                &l,
                Some(fit),
                (&format!("sigma {column}"), &format!("L {experiment}")),
                &PlotSpec::new(PlotKind::RegressionScatter),
            );
            ctx.emit(&format!("scatter_{experiment}.svg"), &svg)
        }
        RenderCmd::Accumulated { series, protocol, pairs } => {
            let s = ctx.read_series(&series, protocol)?;
            let origin = spectrum(&ctx.game)?.rest_point;
            let chosen: Vec<SubspacePair> = match pairs {
                Some(codes) => codes.iter().map(|c| SubspacePair::parse(c)).collect::<Result<_, _>>()?,
                None => strongest_pairs(ctx, 7)?,
            };
            let sessions = encode_sessions(&s);
            let mut lines = Vec::new();
            for p in &chosen {
                lines.push((p.code(), accumulated_angular_momentum_sessions(&sessions, &origin, *p)?));
            }
            let n = lines.first().map(|l| l.1.len()).unwrap_or(0);
            let times: Vec<f64> = (1..=n).map(|i| i as f64).collect();
            let svg = render_accumulated(&times, &lines, &PlotSpec::new(PlotKind::AccumulatedL));
            ctx.emit("accumulated.svg", &svg)
        }
    }
}

fn strongest_pairs(ctx: &Ctx, k: usize) -> Result<Vec<SubspacePair>> {
    let (_, eigs) = eigenpairs(ctx)?;
    let e = eigs
        .iter()
        .filter(|e| e.lambda.im > 0.0)
        .max_by(|a, b| a.lambda.im.total_cmp(&b.lambda.im))
        .context("no rotating mode to rank subspaces by")?;
    let mut v: Vec<(SubspacePair, f64)> = oriented_eigencycles(e).iter().collect();
    v.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    Ok(v.into_iter().take(k).map(|(p, _)| p).collect())
}

fn cmd_reproduce(ctx: &Ctx, a: &ReproduceArgs) -> Result<ExitCode> {
    let targets: Vec<Target> = if a.target == "all" { Target::ALL.to_vec() } else { vec![a.target.parse()?] };
    let fixtures = ctx.fixtures()?;
    let game = ctx.custom_game.then_some(&ctx.game);
    let opts = ReproduceOptions { seed: ctx.seed };
    let reports: Vec<eigencycle::Result<Report>> = std::thread::scope(|s| {
        let handles: Vec<_> = targets
            .iter()
            .map(|&t| {
                let (fixtures, opts) = (&fixtures, &opts);
                s.spawn(move || reproduce(t, fixtures, game, opts))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("reproduce worker panicked")).collect()
    });
    let mut all_pass = true;
    for (t, r) in targets.iter().zip(reports) {
        let name = format!("reproduce_{t}.json");
        match r {
            Ok(r) => {
                eprintln!("{t}: {}", if r.pass { "PASS" } else { "FAIL" });
                all_pass &= r.pass;
                ctx.emit_json(&name, &r)?;
            }
            Err(eigencycle::Error::NotApplicable(why)) => {
                eprintln!("{t}: NOT APPLICABLE ({why})");
                ctx.emit_json(&name, &serde_json::json!({"target": t, "status": "not_applicable", "reason": why}))?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(if a.strict && !all_pass { ExitCode::from(1) } else { ExitCode::SUCCESS })
}
