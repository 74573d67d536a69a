use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use reflect_ha::bmo::{bmo_norm, BmoFlavor, BmoOptions};
use reflect_ha::harness::{self, Experiment, ExperimentConfig};
use reflect_ha::kernels::KernelFamily;
use reflect_ha::operators::{apply, weighted_operator_norm, Backend, NormMethod, OperatorHandle};
use reflect_ha::squarefn::{hardy_norm, square_function, HardyFlavor, TimeGrid};
use reflect_ha::weights::WeightSpec;
use reflect_ha::{Domain, Grid, GridFunction, Weight};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "rha", version, about = "Reflected-domain harmonic analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Quadrature,
    Fft,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Svd,
    Ascent,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Full,
    Upper,
    Lower,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment and write its report.
    Run {
        experiment: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Record wall-clock time (breaks byte-identical reruns).
        #[arg(long)]
        timing: bool,
    },
    /// Apply an operator to a grid function stored as CSV.
    Apply {
        /// heat-free, heat-neumann, heat-dirichlet, qt, psi, riesz-{free,neumann,dirichlet}-j
        #[arg(long)]
        op: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, value_enum, default_value = "quadrature")]
        backend: BackendArg,
        /// Commutator symbol (CSV); wraps a Riesz operator.
        #[arg(long)]
        symbol: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weighted operator norm on a generated grid.
    Opnorm {
        #[arg(long)]
        op: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, value_enum, default_value = "quadrature")]
        backend: BackendArg,
        #[arg(long)]
        symbol: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        halfwidth: f64,
        #[arg(long, default_value_t = 128)]
        points: usize,
        #[arg(long, value_enum, default_value = "full")]
        domain: DomainArg,
        /// Weight spec as JSON, e.g. '{"kind":"power","alpha":0.5}'.
        #[arg(long)]
        mu: Option<String>,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, value_enum, default_value = "svd")]
        method: MethodArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Square function and weighted Hardy norm of a CSV grid function.
    Squarefn {
        /// classical-0, classical-1, heat-free, heat-neumann, haar
        #[arg(long)]
        flavor: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        weight: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// BMO norm of a CSV grid function.
    Bmo {
        /// classical-w, classical-wr, carleson-haar, carleson-heat-free, carleson-heat-neumann,
        /// carleson-heat-neumann-half, unweighted-half, odd-ext, even-ext
        #[arg(long)]
        flavor: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        weight: Option<String>,
        #[arg(long, default_value_t = 2.0)]
        r: f64,
    },
}

fn read_fn(path: &Path) -> Result<GridFunction> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(GridFunction::from_csv(&text)?)
}

fn weight(spec: Option<&str>, grid: Grid, base: &Path) -> Result<Weight> {
    let Some(s) = spec else { return Ok(Weight::unit(grid)) };
    let spec: WeightSpec = serde_json::from_str(s).context("parsing weight spec")?;
    let load = |name: &str| -> reflect_ha::Result<GridFunction> {
        GridFunction::from_csv(&fs::read_to_string(base.join(name))?)
    };
    Ok(spec.build(grid, &load)?)
}

fn operator(name: &str, t: f64, backend: BackendArg, symbol: Option<GridFunction>) -> Result<OperatorHandle> {
    let backend = match backend {
        BackendArg::Quadrature => Backend::Quadrature,
        BackendArg::Fft => Backend::FourierMultiplier,
    };
    let op = if name == "psi" {
        OperatorHandle::Psi { t, backend }
    } else {
        OperatorHandle::from_kernel(KernelFamily::parse(name)?, t, backend)
    };
    Ok(match symbol {
        Some(b) => OperatorHandle::commutator(b, op)?,
        None => op,
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let here = PathBuf::from(".");
    match cli.cmd {
        Cmd::Run { experiment, config, out, csv, timing } => {
            let exp = Experiment::parse(&experiment)?;
            let (cfg, base) = match &config {
                Some(p) => (
                    ExperimentConfig::from_json(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
                    p.parent().map(Path::to_path_buf).unwrap_or_else(|| here.clone()),
                ),
                None => (ExperimentConfig::default(), here.clone()),
            };
            let report = if timing { harness::run_timed(exp, &cfg, &base)? } else { harness::run(exp, &cfg, &base)? };
            fs::write(&out, report.to_json())?;
            if let Some(c) = csv {
                fs::write(c, report.to_csv())?;
            }
            for c in &report.checks {
                println!("{} {} value={} threshold={}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
            }
        }
        Cmd::Apply { op, t, backend, symbol, input, out } => {
            let f = read_fn(&input)?;
            let b = symbol.as_deref().map(read_fn).transpose()?;
            let g = apply(&operator(&op, t, backend, b)?, &f)?;
            fs::write(out, g.to_csv())?;
        }
        Cmd::Opnorm { op, t, backend, symbol, dim, halfwidth, points, domain, mu, lambda, p, method, seed } => {
            let domain = match domain {
                DomainArg::Full => Domain::FullSpace,
                DomainArg::Upper => Domain::UpperHalf,
                DomainArg::Lower => Domain::LowerHalf,
            };
            let grid = Grid::new(dim, halfwidth, points, domain)?;
            let b = symbol.as_deref().map(read_fn).transpose()?;
            if let Some(b) = &b {
                if b.grid != grid {
                    bail!("commutator symbol grid does not match the requested grid");
                }
            }
            let mu = weight(mu.as_deref(), grid, &here)?;
            let lambda = weight(lambda.as_deref(), grid, &here)?;
            let method = match method {
                MethodArg::Svd => NormMethod::SvdExact,
                MethodArg::Ascent => NormMethod::IterativeAscent,
            };
            let n = weighted_operator_norm(&operator(&op, t, backend, b)?, &grid, &mu, &lambda, p, method, seed)?;
            println!("{}", serde_json::to_string_pretty(&n)?);
        }
        Cmd::Squarefn { flavor, input, weight: ws, out } => {
            let f = read_fn(&input)?;
            let fl = HardyFlavor::parse(&flavor)?;
            let tg = TimeGrid::standard(&f.grid);
            let w = weight(ws.as_deref(), f.grid, &here)?;
            if let Some(o) = out {
                fs::write(o, square_function(&f, fl, &tg)?.to_csv())?;
            }
            println!("{}", serde_json::json!({ "flavor": flavor, "hardy_norm": hardy_norm(&f, fl, &w, &tg)? }));
        }
        Cmd::Bmo { flavor, input, weight: ws, r } => {
            let f = read_fn(&input)?;
            let w = weight(ws.as_deref(), f.grid, &here)?;
            let v = bmo_norm(&f, &w, BmoFlavor::parse(&flavor, r)?, &BmoOptions::default())?;
            println!("{}", serde_json::json!({ "flavor": flavor, "norm": v }));
        }
    }
    Ok(())
}
