//! Batch driver: build the model family, extend classes along an
//! interval-tree path, run the verification suites, compute dimensions and
//! budgets, and emit machine-readable reports and plot data.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 config error, 3 budget
//! exhausted.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use horseshoe_core::config::RunConfig;
use horseshoe_core::dimension::{gibbs_measure, lambda_curve, solve_dimension, Truncation};
use horseshoe_core::family::make_family;
use horseshoe_core::parabolic::TangencyCtx;
use horseshoe_core::params::{self, exponents};
use horseshoe_core::rclass::RClass;
use horseshoe_core::report::run_verification;

mod output;

#[derive(Parser)]
#[command(name = "horseshoe", version, about = "Heteroclinic-bifurcation machinery at desk scale")]
struct Cli {
    /// Configuration file (TOML or JSON); flags override.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    eps0: Option<f64>,
    #[arg(long, global = true)]
    lambda_s: Option<f64>,
    #[arg(long, global = true)]
    nonlinearity: Option<f64>,
    #[arg(long, global = true)]
    n_max: Option<usize>,
    #[arg(long, global = true)]
    width_floor: Option<f64>,
    /// Parameter override for geometry and tangency dumps.
    #[arg(long, global = true)]
    t: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the root class and dump elements plus geometry.
    Build(BuildArgs),
    /// Extend classes along the configured interval-tree path.
    Extend(BuildArgs),
    /// Run the invariant suites and report measured constants.
    Verify {
        /// Number of randomized map pairs per suite.
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        /// Fault-injection hook: mark one named check as failed.
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
    /// Transfer-operator dimension of the built class.
    Dimension,
    /// Per-cylinder Gibbs weights as CSV.
    Gibbs,
    /// Exponent calculus at given transverse dimensions.
    Exponents {
        #[arg(long)]
        ds: Option<f64>,
        #[arg(long)]
        du: Option<f64>,
    },
    /// Admissible-region grid of the dimension hypothesis.
    H4Region {
        #[arg(long, default_value_t = 50)]
        grid: usize,
    },
    /// Tangency functional of the special-rectangle pair as a CSV grid.
    DumpTangency {
        #[arg(long, default_value_t = 33)]
        grid: usize,
    },
    /// Markov rectangles and tongue boundaries as CSV polylines.
    DumpGeometry,
}

#[derive(Args)]
struct BuildArgs {
    /// Resume from a previous class dump.
    #[arg(long)]
    load: Option<PathBuf>,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg: RunConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            if path.extension().map(|e| e == "json").unwrap_or(false) {
                serde_json::from_str(&text).context("parsing JSON config")?
            } else {
                toml::from_str(&text).context("parsing TOML config")?
            }
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(v) = cli.eps0 {
        cfg.constants.eps0 = v;
    }
    if let Some(v) = cli.lambda_s {
        cfg.family.lambda_s = v;
    }
    if let Some(v) = cli.nonlinearity {
        cfg.family.nonlinearity = v;
    }
    if let Some(v) = cli.n_max {
        cfg.budgets.n_max = v;
    }
    if let Some(v) = cli.width_floor {
        cfg.budgets.width_floor = v;
    }
    if cli.t.is_some() {
        cfg.t = cli.t;
    }
    Ok(cfg.normalized())
}

fn build_chain(cfg: &RunConfig, load: Option<&Path>) -> Result<(Vec<Arc<RClass>>, bool)> {
    let fam = make_family(cfg.family).map_err(|e| anyhow::anyhow!("{e}"))?;
    for w in &fam.warnings {
        eprintln!("warning: {w}");
    }
    for w in cfg.constants.ordering_warnings() {
        eprintln!("warning: {w}");
    }
    let path = params::materialize_path(cfg.constants.eps0, cfg.constants.tau, &cfg.path)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut root = match load {
        Some(file) => {
            let words = output::read_dump_words(file)?;
            RClass::from_words(
                fam.clone(),
                path[0].clone(),
                cfg.budgets,
                cfg.constants.eta,
                &words,
            )
            .map_err(|e| anyhow::anyhow!("{e}"))?
        }
        None => RClass::init(fam.clone(), path[0].clone(), cfg.budgets, cfg.constants.eta)
            .map_err(|e| anyhow::anyhow!("{e}"))?,
    };
    root.parabolic_cfg = cfg.parabolic;
    let mut exhausted = root.extend().exhausted;
    let mut chain = vec![Arc::new(root)];
    for iv in &path[1..] {
        let mut cls = RClass::descend(chain.last().unwrap(), iv.clone());
        exhausted |= cls.extend().exhausted;
        chain.push(Arc::new(cls));
    }
    Ok((chain, exhausted))
}

fn run(cli: &Cli) -> Result<u8> {
    let cfg = load_config(cli)?;
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Build(args) | Command::Extend(args) => {
            let (chain, exhausted) = build_chain(&cfg, args.load.as_deref())?;
            let mut summaries = Vec::new();
            for class in &chain {
                let name = format!("class_level{}.jsonl", class.interval.level);
                output::write_class_dump(&cli.out.join(name), class)?;
                let summary = output::class_summary(class);
                println!(
                    "level {}: {} elements ({} parabolic), {} bicritical candidates \
                     ({} critical, {} undetermined, {} transverse)",
                    class.interval.level,
                    summary.elements,
                    summary.parabolic,
                    summary.candidates,
                    summary.critical,
                    summary.undetermined,
                    summary.transverse,
                );
                summaries.push(summary);
            }
            std::fs::write(
                cli.out.join("build_summary.json"),
                serde_json::to_string_pretty(&serde_json::json!({
                    "schema": "horseshoe/build-summary/v1",
                    "levels": summaries,
                    "exhausted": exhausted,
                }))?,
            )?;
            output::write_geometry(&cli.out, &cfg, chain[0].family.clone())?;
            Ok(if exhausted { 3 } else { 0 })
        }
        Command::Verify {
            pairs,
            inject_fault,
        } => {
            let report = run_verification(&cfg, *pairs, inject_fault.as_deref());
            let path = cli.out.join("verify.json");
            std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
            for c in &report.checks {
                println!(
                    "{} {} (measured {:.3e}, ceiling {:.3e})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.ceiling
                );
            }
            Ok(if report.all_pass { 0 } else { 1 })
        }
        Command::Dimension => {
            let (chain, _) = build_chain(&cfg, None)?;
            let class = chain.last().unwrap();
            let trunc = effective_truncation(&cfg, class);
            let d_s = solve_dimension(class, &trunc).map_err(|e| anyhow::anyhow!("{e}"))?;
            let grid: Vec<f64> = (0..20).map(|i| 0.1 + 1.3 * i as f64 / 19.0).collect();
            let curve = lambda_curve(class, &trunc, &grid).map_err(|e| anyhow::anyhow!("{e}"))?;
            let gibbs = gibbs_measure(class, d_s, &trunc).map_err(|e| anyhow::anyhow!("{e}"))?;
            let tm = horseshoe_core::dimension::transfer_matrix(class, d_s, &trunc)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let doc = serde_json::json!({
                "schema": "horseshoe/dimension/v1",
                "d_s": d_s,
                "lambda_curve": curve,
                "gibbs_constant": gibbs.gibbs_constant,
                "tail_mass": tm.tail_mass,
                "truncation": {"m_trunc": trunc.m_trunc, "w_min": trunc.w_min},
            });
            std::fs::write(
                cli.out.join("dimension.json"),
                serde_json::to_string_pretty(&doc)?,
            )?;
            println!("d_s = {d_s:.9}");
            Ok(0)
        }
        Command::Gibbs => {
            let (chain, _) = build_chain(&cfg, None)?;
            let class = chain.last().unwrap();
            let trunc = effective_truncation(&cfg, class);
            let d_s = solve_dimension(class, &trunc).map_err(|e| anyhow::anyhow!("{e}"))?;
            let gibbs = gibbs_measure(class, d_s, &trunc).map_err(|e| anyhow::anyhow!("{e}"))?;
            let mut csv = String::from("word,width,mu\n");
            for (w, width, mu) in &gibbs.mu {
                csv.push_str(&format!("{w},{width:.17e},{mu:.17e}\n"));
            }
            std::fs::write(cli.out.join("gibbs.csv"), csv)?;
            Ok(0)
        }
        Command::Exponents { ds, du } => {
            let fam = make_family(cfg.family).map_err(|e| anyhow::anyhow!("{e}"))?;
            let (ds, du) = (ds.unwrap_or(fam.d_s0), du.unwrap_or(fam.d_u0));
            let e = exponents(ds, du).map_err(|e| anyhow::anyhow!("{e}"))?;
            let mut doc = serde_json::to_value(e)?;
            doc.as_object_mut()
                .unwrap()
                .insert("schema".into(), "horseshoe/exponents/v1".into());
            let text = serde_json::to_string_pretty(&doc)?;
            std::fs::write(cli.out.join("exponents.json"), &text)?;
            println!("{text}");
            Ok(0)
        }
        Command::H4Region { grid } => {
            let mut csv = String::from("d_s0,d_u0,h4,beta_max\n");
            for i in 0..*grid {
                for j in 0..*grid {
                    let ds = 0.02 + 0.96 * i as f64 / (*grid - 1) as f64;
                    let du = 0.02 + 0.96 * j as f64 / (*grid - 1) as f64;
                    let h4 = params::check_h4(ds, du);
                    let (hi, lo) = (ds.max(du), ds.min(du));
                    let beta_max = if 2.0 * hi + lo > 1.0 {
                        (1.0 - lo) * (hi + lo) / (hi * (2.0 * hi + lo - 1.0))
                    } else {
                        f64::NAN
                    };
                    csv.push_str(&format!("{ds:.6},{du:.6},{},{beta_max:.9}\n", h4 as u8));
                }
            }
            std::fs::write(cli.out.join("h4_region.csv"), csv)?;
            Ok(0)
        }
        Command::DumpTangency { grid } => {
            let (chain, _) = build_chain(&cfg, None)?;
            let class = chain.last().unwrap();
            let t = cfg.t.unwrap_or(class.interval.mid());
            let fold = class
                .family
                .fold_at(t)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let q = class
                .get(&class.q_u_word)
                .ok_or_else(|| anyhow::anyhow!("special rectangle missing"))?;
            let p = class
                .get(&class.p_s_word)
                .ok_or_else(|| anyhow::anyhow!("special rectangle missing"))?;
            let ctx = TangencyCtx::new(&q.map, &fold, &p.map);
            let rect = ctx.cbar_rect();
            let mut csv = String::from("y0,x1,cbar\n");
            for i in 0..*grid {
                let y0 = rect.y.lo + rect.y.len() * i as f64 / (*grid - 1) as f64;
                for j in 0..*grid {
                    let x1 = rect.x.lo + rect.x.len() * j as f64 / (*grid - 1) as f64;
                    let (c, _) = ctx.cbar(y0, x1);
                    csv.push_str(&format!("{y0:.9},{x1:.9},{c:.17e}\n"));
                }
            }
            std::fs::write(cli.out.join("tangency.csv"), csv)?;
            Ok(0)
        }
        Command::DumpGeometry => {
            let fam = make_family(cfg.family).map_err(|e| anyhow::anyhow!("{e}"))?;
            output::write_geometry(&cli.out, &cfg, fam)?;
            Ok(0)
        }
    }
}

fn effective_truncation(cfg: &RunConfig, class: &RClass) -> Truncation {
    // Clamp the state depth so the composite cylinders stay above the
    // class floor.
    let lambda = class.family.config.lambda_s;
    let mut m = cfg.truncation.m_trunc;
    while m > 1 && lambda.powi(m as i32) < cfg.budgets.width_floor.max(cfg.truncation.w_min) {
        m -= 1;
    }
    Truncation {
        m_trunc: m,
        w_min: cfg.truncation.w_min,
        base_y: cfg.truncation.base_y,
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("HORSESHOE_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
