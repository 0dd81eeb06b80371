use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use spatial_edr::bench::{
    self, EdrSweepConfig, RateConfig, ReportMeta, DEFAULT_ORACLE_DRAWS,
};
use spatial_edr::config::{dimension_echo, estimator_echo, neighbor_count_echo, scan_echo, Config};
use spatial_edr::edr::{edr_directions, CovariancePair, DimensionRule};
use spatial_edr::fieldsim::{generate_field, generate_single_index, Link};
use spatial_edr::io::{self, fmt_real};
use spatial_edr::lattice::center_dataset;
use spatial_edr::predictor::{estimate_neighbor_count, fit, NeighborCount, YEval};
use spatial_edr::{Error, Result};

#[derive(Parser)]
#[command(name = "spatial-edr", version, about = "Kernel inverse regression on lattice data")]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Add the wall-clock time to JSON reports.
    #[arg(long, global = true)]
    record_time: bool,
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
    /// Simulate a random field or a single-index dataset.
    Simulate {
        /// white-noise, moving-average, gaussian-decay or single-index
        #[arg(long)]
        kind: Option<String>,
        /// Lattice sides, comma separated.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Model file; its keys override --config.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Estimate EDR directions from a dataset CSV `x1,...,xd,y`.
    SirFit {
        #[arg(long)]
        data: PathBuf,
        /// `auto` or a fixed number of directions.
        #[arg(long)]
        dimension: Option<String>,
    },
    /// Convergence rate of the inverse-regression covariance.
    RateBench {
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        oracle_draws: Option<usize>,
    },
    /// Root-n fluctuation check at n and 4n.
    CltCheck {
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        oracle_draws: Option<usize>,
    },
    /// EDR recovery over a grid of links, noise levels and sizes.
    EdrSweep {
        #[arg(long, value_delimiter = ',')]
        links: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        noise: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Predict field values at target sites.
    Predict {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        /// Number of neighbors or `auto` [default: `bench.d`, else auto].
        #[arg(long)]
        d: Option<String>,
    },
    /// Estimate the number of informative neighbors.
    NeighborScan {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        dmax: Option<usize>,
        /// Grid size, or `single:<y>` for one evaluation point.
        #[arg(long)]
        ygrid: Option<String>,
    },
}

struct Output {
    body: String,
    elapsed: Option<f64>,
}

impl Output {
    fn plain(body: String) -> Self {
        Output { body, elapsed: None }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Serialize)]
struct FieldDoc<'a> {
    meta: ReportMeta,
    kind: &'a str,
    origin: &'a [i64],
    dims: &'a [usize],
    values: &'a [f64],
}

#[derive(Serialize)]
struct DatasetDoc<'a> {
    meta: ReportMeta,
    dim: usize,
    xs: &'a [f64],
    ys: &'a [f64],
}

fn simulate(
    cfg: &Config,
    seed: u64,
    format: Format,
    kind: Option<String>,
    dims: Option<Vec<usize>>,
    spec: Option<PathBuf>,
) -> Result<Output> {
    let mut cfg = cfg.clone();
    if let Some(path) = spec {
        for (k, v) in Config::load(&path)?.entries() {
            cfg.set(k, v.clone())?;
        }
    }
    let kind = kind.or_else(|| cfg.raw("field.kind").map(str::to_string));
    let joined = dims.map(|d| d.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    if kind.as_deref() == Some("single-index") {
        if let Some(d) = joined {
            cfg.set("model.dims", d)?;
        }
        let model = cfg.single_index(seed)?;
        let data = generate_single_index(&model)?;
        let mut echo = cfg.entries().clone();
        echo.insert("field.kind".into(), "single-index".into());
        echo.insert("model.seed".into(), model.seed.to_string());
        return Ok(Output::plain(match format {
            Format::Csv => csv_bytes(|b| io::write_dataset(&data, b))?,
            Format::Json => io::to_json_string(&DatasetDoc {
                meta: ReportMeta::new(seed, echo),
                dim: data.dim(),
                xs: data.xs(),
                ys: data.ys(),
            })?,
        }));
    }
    if let Some(d) = joined {
        cfg.set("field.dims", d)?;
    }
    let spec = cfg.field_spec(kind.as_deref(), seed)?;
    let field = generate_field(&spec)?;
    let mut echo = cfg.entries().clone();
    echo.insert("field.kind".into(), spec.kind.name().into());
    echo.insert("field.seed".into(), spec.seed.to_string());
    Ok(Output::plain(match format {
        Format::Csv => csv_bytes(|b| io::write_field(&field, b))?,
        Format::Json => io::to_json_string(&FieldDoc {
            meta: ReportMeta::new(seed, echo),
            kind: spec.kind.name(),
            origin: field.region().origin(),
            dims: field.region().dims(),
            values: field.values(),
        })?,
    }))
}

#[derive(Serialize)]
struct SirReport {
    meta: ReportMeta,
    samples: usize,
    dim: usize,
    bandwidth: f64,
    floor: f64,
    eigenvalues: Vec<f64>,
    #[serde(rename = "D")]
    dimension: usize,
    /// Row-major `D x d`, rows orthonormal in the `Sigma_n` inner product.
    directions: Vec<f64>,
    ridge: f64,
}

fn sir_fit(cfg: &Config, seed: u64, format: Format, data: PathBuf, dimension: Option<String>) -> Result<Output> {
    let mut cfg = cfg.clone();
    if let Some(d) = dimension {
        cfg.set("dimension.rule", d)?;
    }
    let estimator = cfg.estimator()?;
    let rule = cfg.dimension_rule()?;
    let raw = io::read_dataset(open(&data)?)?;
    let (centered, _) = center_dataset(&raw)?;
    let bw = estimator.bandwidths(&centered)?;
    let pair = CovariancePair::estimate(&centered, &estimator)?;
    let model = edr_directions(&pair, rule)?;
    if model.dimension() == 0 {
        return Err(Error::NoSignal);
    }
    let dirs = model.directions();
    let d = raw.dim();
    let body = match format {
        Format::Json => {
            let mut echo = estimator_echo(&estimator);
            echo.extend(dimension_echo(rule));
            io::to_json_string(&SirReport {
                meta: ReportMeta::new(seed, echo),
                samples: raw.len(),
                dim: d,
                bandwidth: bw.h,
                floor: bw.e,
                eigenvalues: model.eigenvalues().to_vec(),
                dimension: model.dimension(),
                directions: dirs.transpose().as_slice().to_vec(),
                ridge: model.ridge(),
            })?
        }
        Format::Csv => {
            let mut header = vec!["rank".to_string(), "eigenvalue".into(), "selected".into()];
            header.extend((1..=d).map(|k| format!("v{k}")));
            let basis = model.basis();
            let rows: Vec<Vec<String>> = (0..d)
                .map(|r| {
                    let mut row = vec![
                        (r + 1).to_string(),
                        fmt_real(model.eigenvalues()[r]),
                        (r < model.dimension()).to_string(),
                    ];
                    row.extend(basis.row(r).iter().map(|v| fmt_real(*v)));
                    row
                })
                .collect();
            let h: Vec<&str> = header.iter().map(String::as_str).collect();
            io::csv_string(&h, &rows)?
        }
    };
    Ok(Output::plain(body))
}

fn rate_bench(
    cfg: &Config,
    seed: u64,
    format: Format,
    sizes: Option<Vec<usize>>,
    replicates: Option<usize>,
    oracle_draws: Option<usize>,
) -> Result<Output> {
    let config = RateConfig {
        model: cfg.single_index(seed)?,
        sizes: match sizes {
            Some(s) => s,
            None => cfg.list("bench.sizes")?.unwrap_or_else(|| vec![400, 900, 1600, 3600]),
        },
        replicates: match replicates {
            Some(r) => r,
            None => cfg.get_or("bench.replicates", 10)?,
        },
        oracle_draws: match oracle_draws {
            Some(r) => r,
            None => cfg.get_or("bench.oracle_draws", DEFAULT_ORACLE_DRAWS)?,
        },
        estimator: cfg.estimator()?,
        theta: cfg.get("bench.theta")?,
    };
    let report = bench::run_rate_experiment(&config, seed)?;
    let body = match format {
        Format::Json => io::to_json_string(&report)?,
        Format::Csv => {
            let mut rows = Vec::new();
            for (s, n) in report.sizes.iter().enumerate() {
                for (r, e) in report.errors[s].iter().enumerate() {
                    rows.push(vec![
                        n.to_string(),
                        r.to_string(),
                        report.seeds[s][r].to_string(),
                        fmt_real(*e),
                    ]);
                }
            }
            io::csv_string(&["n_hat", "replicate", "seed", "error"], &rows)?
        }
    };
    Ok(Output {
        body,
        elapsed: Some(report.elapsed_seconds),
    })
}

fn clt_check(
    cfg: &Config,
    seed: u64,
    format: Format,
    size: Option<usize>,
    replicates: Option<usize>,
    oracle_draws: Option<usize>,
) -> Result<Output> {
    let model = cfg.single_index(seed)?;
    let size = match size {
        Some(s) => s,
        None => cfg.get_or("bench.size", 900)?,
    };
    let replicates = match replicates {
        Some(r) => r,
        None => cfg.get_or("bench.replicates", 200)?,
    };
    let draws = match oracle_draws {
        Some(r) => r,
        None => cfg.get_or("bench.oracle_draws", DEFAULT_ORACLE_DRAWS)?,
    };
    let report = bench::run_clt_check(&model, &cfg.estimator()?, size, replicates, draws, seed)?;
    let body = match format {
        Format::Json => io::to_json_string(&report)?,
        Format::Csv => {
            let mut rows = Vec::new();
            for e in &report.entries {
                for s in 0..2 {
                    rows.push(vec![
                        report.sizes[s].to_string(),
                        (e.row + 1).to_string(),
                        (e.col + 1).to_string(),
                        fmt_real(e.mean[s]),
                        fmt_real(e.std[s]),
                        fmt_real(e.std_ratio),
                    ]);
                }
            }
            io::csv_string(&["n_hat", "row", "col", "mean", "std", "std_ratio"], &rows)?
        }
    };
    Ok(Output {
        body,
        elapsed: Some(report.elapsed_seconds),
    })
}

fn edr_sweep(
    cfg: &Config,
    seed: u64,
    format: Format,
    links: Option<Vec<String>>,
    noise: Option<Vec<f64>>,
    sizes: Option<Vec<usize>>,
    seeds: Option<usize>,
) -> Result<Output> {
    let mut cfg = cfg.clone();
    if cfg.raw("model.d").is_none() && cfg.raw("model.beta").is_none() {
        cfg.set("model.d", "5")?;
    }
    let links: Vec<Link> = match links {
        Some(l) => l.iter().map(|s| s.parse()).collect::<Result<_>>()?,
        None => cfg.list("sweep.links")?.unwrap_or_else(|| vec![Link::Identity, Link::Cubic]),
    };
    let dimension = match cfg.raw("dimension.rule") {
        Some(_) => cfg.dimension_rule()?,
        None => DimensionRule::Fixed(1),
    };
    let config = EdrSweepConfig {
        model: cfg.single_index(seed)?,
        links,
        noise: match noise {
            Some(n) => n,
            None => cfg.list("sweep.noise")?.unwrap_or_else(|| vec![0.5]),
        },
        sizes: match sizes {
            Some(s) => s,
            None => cfg.list("sweep.sizes")?.unwrap_or_else(|| vec![2500]),
        },
        seeds: match seeds {
            Some(s) => s,
            None => cfg.get_or("bench.seeds", 10)?,
        },
        dimension,
        estimator: cfg.estimator()?,
    };
    let report = bench::run_edr_recovery(&config, seed)?;
    let body = match format {
        Format::Json => io::to_json_string(&report)?,
        Format::Csv => {
            let mut rows = Vec::new();
            for c in &report.cells {
                for (j, dist) in c.distances.iter().enumerate() {
                    rows.push(vec![
                        c.link.as_str().to_string(),
                        fmt_real(c.noise_std),
                        c.n_hat.to_string(),
                        c.seeds[j].to_string(),
                        c.dimensions[j].to_string(),
                        fmt_real(*dist),
                    ]);
                }
            }
            io::csv_string(&["link", "noise_std", "n_hat", "seed", "D", "distance"], &rows)?
        }
    };
    Ok(Output {
        body,
        elapsed: Some(report.elapsed_seconds),
    })
}

#[derive(Serialize)]
struct PredictionRow {
    site: Vec<i64>,
    prediction: f64,
}

#[derive(Serialize)]
struct PredictReport {
    meta: ReportMeta,
    d: usize,
    #[serde(rename = "D")]
    dimension: usize,
    directions: Vec<f64>,
    bandwidth: f64,
    training_sites: usize,
    predictions: Vec<PredictionRow>,
}

fn predict(cfg: &Config, seed: u64, format: Format, field: PathBuf, targets: PathBuf, d: Option<String>) -> Result<Output> {
    let d = d.or_else(|| cfg.raw("bench.d").map(str::to_string)).unwrap_or_else(|| "auto".into());
    let count = match d.as_str() {
        "auto" => NeighborCount::Auto,
        v => NeighborCount::Fixed(
            v.parse()
                .map_err(|_| Error::Parse(format!("--d `{v}` is neither `auto` nor an integer")))?,
        ),
    };
    let field = io::read_field(open(&field)?)?;
    let targets = io::read_targets(open(&targets)?)?;
    let ndim = field.region().ndim();
    if let Some(t) = targets.iter().find(|t| t.ndim() != ndim) {
        return Err(Error::InvalidSpec(format!("target {t} does not have {ndim} coordinates")));
    }
    let config = cfg.predictor()?;
    let observed = field.region().clone();
    let model = fit(&field, &observed, count, &config)?;
    let rows = targets
        .iter()
        .map(|t| Ok((t.clone(), model.predict_site(&field, &observed, t)?)))
        .collect::<Result<Vec<_>>>()?;
    let body = match format {
        Format::Csv => csv_bytes(|b| io::write_predictions(&rows, ndim, b))?,
        Format::Json => {
            let mut echo = estimator_echo(&config.estimator);
            echo.extend(dimension_echo(config.dimension));
            echo.extend(scan_echo(&config.scan));
            echo.insert("bench.d".into(), neighbor_count_echo(count));
            io::to_json_string(&PredictReport {
                meta: ReportMeta::new(seed, echo),
                d: model.d(),
                dimension: model.edr().dimension(),
                directions: model.edr().directions().transpose().as_slice().to_vec(),
                bandwidth: model.regressor().bandwidth(),
                training_sites: model.regressor().training_len(),
                predictions: rows
                    .into_iter()
                    .map(|(s, p)| PredictionRow {
                        site: s.coords().to_vec(),
                        prediction: p,
                    })
                    .collect(),
            })?
        }
    };
    Ok(Output::plain(body))
}

#[derive(Serialize)]
struct ScanReport {
    meta: ReportMeta,
    #[serde(flatten)]
    result: spatial_edr::predictor::ScanResult,
}

fn neighbor_scan(
    cfg: &Config,
    seed: u64,
    format: Format,
    field: PathBuf,
    delta: Option<f64>,
    dmax: Option<usize>,
    ygrid: Option<String>,
) -> Result<Output> {
    let mut scan = cfg.scan()?;
    if let Some(v) = delta {
        scan.delta = v;
    }
    if let Some(v) = dmax {
        scan.d_max = v;
    }
    if let Some(g) = ygrid {
        scan.y_eval = match g.strip_prefix("single:") {
            Some(y) => YEval::Single(
                y.parse()
                    .map_err(|_| Error::Parse(format!("--ygrid single value `{y}` is not a number")))?,
            ),
            None => {
                let size = g
                    .parse()
                    .map_err(|_| Error::Parse(format!("--ygrid `{g}` is not a grid size")))?;
                let fraction = match scan.y_eval {
                    YEval::Grid { central_fraction, .. } => central_fraction,
                    YEval::Single(_) => 0.8,
                };
                YEval::Grid {
                    size,
                    central_fraction: fraction,
                }
            }
        };
    }
    let field = io::read_field(open(&field)?)?;
    let result = estimate_neighbor_count(&field, field.region(), &scan)?;
    let body = match format {
        Format::Json => {
            let echo = scan_echo(&scan);
            io::to_json_string(&ScanReport {
                meta: ReportMeta::new(seed, echo),
                result,
            })?
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = result
                .steps
                .iter()
                .map(|s| {
                    vec![
                        s.k.to_string(),
                        s.samples.to_string(),
                        fmt_real(s.bandwidth),
                        fmt_real(s.statistic),
                        (s.k == result.d).to_string(),
                    ]
                })
                .collect();
            io::csv_string(&["k", "samples", "bandwidth", "statistic", "selected"], &rows)?
        }
    };
    Ok(Output::plain(body))
}

fn with_wall_clock(body: String, seconds: f64) -> Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(&body)?;
    if let Some(obj) = v.as_object_mut() {
        obj.insert("wall_clock_seconds".into(), serde_json::json!(seconds));
    }
    io::to_json_string(&v)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    let (seed, format) = (cli.seed, cli.format);
    let out = match cli.command {
        Command::Simulate { kind, dims, spec } => simulate(&cfg, seed, format, kind, dims, spec)?,
        Command::SirFit { data, dimension } => sir_fit(&cfg, seed, format, data, dimension)?,
        Command::RateBench {
            sizes,
            replicates,
            oracle_draws,
        } => rate_bench(&cfg, seed, format, sizes, replicates, oracle_draws)?,
        Command::CltCheck {
            size,
            replicates,
            oracle_draws,
        } => clt_check(&cfg, seed, format, size, replicates, oracle_draws)?,
        Command::EdrSweep {
            links,
            noise,
            sizes,
            seeds,
        } => edr_sweep(&cfg, seed, format, links, noise, sizes, seeds)?,
        Command::Predict { field, targets, d } => predict(&cfg, seed, format, field, targets, d)?,
        Command::NeighborScan {
            field,
            delta,
            dmax,
            ygrid,
        } => neighbor_scan(&cfg, seed, format, field, delta, dmax, ygrid)?,
    };
    let mut body = out.body;
    if let Some(t) = out.elapsed {
        eprintln!("elapsed: {t:.3} s");
        if cli.record_time && format == Format::Json {
            body = with_wall_clock(body, t)?;
        }
    }
    match cli.out {
        Some(path) => std::fs::write(&path, body)?,
        None => std::io::stdout().lock().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
