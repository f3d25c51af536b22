//! `rmmsl`: generate data, cluster, sweep parameter grids, export plot tables.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O error.
//! Failures print one JSON record `{"error", "class", "message"}` on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rmmsl::pipeline::{
    export_run, generator_from_pairs, merge_pairs, parse_pairs, run_cluster, run_sweep, write_points_csv, write_run,
    write_sweep, Pairs, RunConfig, SweepConfig, GENERATOR_KEYS,
};
use rmmsl::{Error, ErrorClass};

#[derive(Parser)]
#[command(name = "rmmsl", version, about = "Robust multiple-manifold structure learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one synthetic dataset as CSV (coordinates plus a label column, -1 = outlier).
    Generate {
        #[command(flatten)]
        generator: GeneratorArgs,
        /// Seed of the dataset.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster every trial of a run configuration and write its artifacts.
    Cluster {
        #[command(flatten)]
        keys: RunArgs,
        /// Number of independent trials; trial t uses seed + t [default: 1].
        #[arg(long)]
        trials: Option<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Select (k, sigma_c) on selection trials, then evaluate on fresh seeds.
    Sweep {
        #[command(flatten)]
        keys: RunArgs,
        /// Trials used to pick the grid point [default: 5].
        #[arg(long)]
        selection_trials: Option<String>,
        /// Fresh trials used to report the chosen point [default: 50].
        #[arg(long)]
        evaluation_trials: Option<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn one trial of a `cluster` output directory into plot tables.
    Export {
        /// Directory written by `cluster`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Output directory for plot_labels.csv and plot_scores.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Synthetic generator and its parameters. Unset parameters keep the
/// generator's defaults.
#[derive(Args, Default)]
struct GeneratorArgs {
    /// nested_spheres | intersecting_spheres | intersecting_planes |
    /// swissroll_plane_outliers [default: intersecting_spheres]
    #[arg(long)]
    generator: Option<String>,
    /// Points per manifold [default: 1000].
    #[arg(long)]
    n_per: Option<String>,
    /// Inner sphere radius [default: 10].
    #[arg(long)]
    r_small: Option<String>,
    /// Outer sphere radius [default: 30].
    #[arg(long)]
    r_big: Option<String>,
    /// Radius of both intersecting spheres [default: 10].
    #[arg(long)]
    radius: Option<String>,
    /// Distance between the intersecting sphere centers [default: 10].
    #[arg(long)]
    center_offset: Option<String>,
    /// Half side length of each plane [default: 10].
    #[arg(long)]
    extent: Option<String>,
    /// Angle between the planes in radians [default: pi/3].
    #[arg(long)]
    dihedral_angle: Option<String>,
    /// Swiss-roll points [default: 2000].
    #[arg(long)]
    n_roll: Option<String>,
    /// Plane points crossing the roll [default: 1000].
    #[arg(long)]
    n_plane: Option<String>,
    /// Uniform background outliers [default: 100].
    #[arg(long)]
    n_outliers: Option<String>,
    /// Gaussian noise standard deviation [default: 0.3, 0.1 for the Swiss roll].
    #[arg(long)]
    noise_sigma: Option<String>,
}

/// Run configuration keys. Flags override the same keys of `--config`.
#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` file; the keys are the long flag names with `_`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    generator: GeneratorArgs,
    /// CSV input instead of a generator.
    #[arg(long)]
    input: Option<String>,
    /// The CSV's last column holds integer labels (negative = outlier).
    #[arg(long)]
    has_labels: bool,
    /// The CSV starts with a header row.
    #[arg(long)]
    header: bool,
    /// Neighborhood size; a comma list for `sweep` [default: 10, sweep: 5,10,15,20,30,50,100].
    #[arg(long)]
    k: Option<String>,
    /// Neighbor rank of the local bandwidth [default: 7].
    #[arg(long)]
    k_sigma: Option<String>,
    /// Neighbors used for tangent estimation [default: k].
    #[arg(long)]
    k_tangent: Option<String>,
    /// Manifold dimension, or `auto` [default: 2].
    #[arg(long)]
    d: Option<String>,
    /// Noise scale of the tangent weights [default: 1].
    #[arg(long)]
    sigma_n: Option<String>,
    /// Curvature scale of the tangent weights [default: 1].
    #[arg(long)]
    sigma_e: Option<String>,
    /// constant | quadratic | quartic [default: quadratic].
    #[arg(long)]
    alpha: Option<String>,
    /// Curvature bandwidth; a comma list for `sweep` [default: 1, sweep: 0.2,0.5,1,1.5,2].
    #[arg(long)]
    sigma_c: Option<String>,
    /// Number of clusters [default: 2].
    #[arg(long)]
    n_c: Option<String>,
    /// off | auto | ratio:<fraction> [default: off].
    #[arg(long)]
    outlier: Option<String>,
    /// K-means restarts [default: 100].
    #[arg(long)]
    kmeans_replicates: Option<String>,
    /// Base seed [default: 0].
    #[arg(long)]
    seed: Option<String>,
}

impl GeneratorArgs {
    fn pairs(&self) -> Pairs {
        let fields = [
            ("generator", &self.generator),
            ("n_per", &self.n_per),
            ("r_small", &self.r_small),
            ("r_big", &self.r_big),
            ("radius", &self.radius),
            ("center_offset", &self.center_offset),
            ("extent", &self.extent),
            ("dihedral_angle", &self.dihedral_angle),
            ("n_roll", &self.n_roll),
            ("n_plane", &self.n_plane),
            ("n_outliers", &self.n_outliers),
            ("noise_sigma", &self.noise_sigma),
        ];
        collect(&fields)
    }
}

fn collect(fields: &[(&str, &Option<String>)]) -> Pairs {
    fields
        .iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect()
}

impl RunArgs {
    /// `--config` pairs overlaid with the flags.
    fn pairs(&self, extra: &[(&str, &Option<String>)]) -> Result<Pairs, Error> {
        let base = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                parse_pairs(&text)?
            }
            None => Pairs::new(),
        };
        let mut flags = self.generator.pairs();
        flags.extend(collect(&[
            ("input", &self.input),
            ("k", &self.k),
            ("k_sigma", &self.k_sigma),
            ("k_tangent", &self.k_tangent),
            ("d", &self.d),
            ("sigma_n", &self.sigma_n),
            ("sigma_e", &self.sigma_e),
            ("alpha", &self.alpha),
            ("sigma_c", &self.sigma_c),
            ("n_c", &self.n_c),
            ("outlier", &self.outlier),
            ("kmeans_replicates", &self.kmeans_replicates),
            ("seed", &self.seed),
        ]));
        for (key, set) in [("has_labels", self.has_labels), ("header", self.header)] {
            if set {
                flags.push((key.to_string(), "true".to_string()));
            }
        }
        flags.extend(collect(extra));
        Ok(merge_pairs(drop_replaced_input(base, &flags), flags))
    }
}

/// A flag that switches the data source discards the file's source keys.
fn drop_replaced_input(base: Pairs, flags: &Pairs) -> Pairs {
    let get = |pairs: &Pairs, key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
    let new_generator = get(flags, "generator");
    let same_generator = new_generator.is_some() && new_generator == get(&base, "generator");
    let drop_csv = new_generator.is_some();
    let drop_generator = get(flags, "input").is_some() || (drop_csv && !same_generator);
    base.into_iter()
        .filter(|(k, _)| {
            let k = k.as_str();
            let is_generator = k == "generator" || GENERATOR_KEYS.contains(&k);
            let is_csv = matches!(k, "input" | "has_labels" | "header");
            !(drop_generator && is_generator || drop_csv && is_csv)
        })
        .collect()
}

fn generate(args: &GeneratorArgs, seed: u64, out: &Path) -> Result<serde_json::Value, Error> {
    let mut pairs = args.pairs();
    if args.generator.is_none() {
        pairs.insert(0, ("generator".into(), "intersecting_spheres".into()));
    }
    let g = generator_from_pairs(&pairs)?;
    let data = g.generate(seed)?;
    let labels: Vec<i64> = data
        .labels
        .iter()
        .zip(&data.outlier_flags)
        .map(|(&l, &o)| if o { -1 } else { l as i64 })
        .collect();
    write_points_csv(out, &data.cloud, Some(&labels))?;
    Ok(serde_json::json!({
        "generator": g.name(),
        "points": data.cloud.len(),
        "outliers": data.outlier_count(),
        "out": out.display().to_string(),
    }))
}

fn cluster(keys: &RunArgs, trials: &Option<String>, out: &Path) -> Result<serde_json::Value, Error> {
    let config = RunConfig::from_pairs(&keys.pairs(&[("trials", trials)])?)?;
    let run = run_cluster(&config)?;
    write_run(out, &run)?;
    Ok(serde_json::json!({
        "out": out.display().to_string(),
        "trials": run.trials.len(),
        "summary": run.metrics(),
    }))
}

fn sweep(
    keys: &RunArgs,
    selection: &Option<String>,
    evaluation: &Option<String>,
    out: &Path,
) -> Result<serde_json::Value, Error> {
    let pairs = keys.pairs(&[("selection_trials", selection), ("evaluation_trials", evaluation)])?;
    let config = SweepConfig::from_pairs(&pairs)?;
    let report = run_sweep(&config)?;
    write_sweep(out, &config, &report)?;
    let failed = report.grid.iter().filter(|p| p.error.is_some()).count();
    Ok(serde_json::json!({
        "out": out.display().to_string(),
        "chosen": report.chosen.map(|(k, s)| serde_json::json!({"k": k, "sigma_c": s})),
        "failed_grid_points": failed,
        "evaluation_summary": report.evaluation_summary,
        "evaluation_error": report.evaluation_error,
    }))
}

fn run(cli: Cli) -> Result<serde_json::Value, Error> {
    match &cli.command {
        Command::Generate { generator, seed, out } => generate(generator, *seed, out),
        Command::Cluster { keys, trials, out } => cluster(keys, trials, out),
        Command::Sweep {
            keys,
            selection_trials,
            evaluation_trials,
            out,
        } => sweep(keys, selection_trials, evaluation_trials, out),
        Command::Export { run, trial, out } => {
            let written = export_run(run, *trial, out)?;
            let files: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
            Ok(serde_json::json!({ "written": files }))
        }
    }
}

fn fail(kind: &str, class: &str, message: &str, code: u8) -> ExitCode {
    let record = serde_json::json!({"error": kind, "class": class, "message": message});
    eprintln!("{record}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("Usage", "config", e.render().to_string().trim_end(), 2),
    };
    match run(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("json values serialize"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (class, code) = match e.class() {
                ErrorClass::Config => ("config", 2),
                ErrorClass::Numeric => ("numeric", 3),
                ErrorClass::Io => ("io", 4),
            };
            fail(e.kind(), class, &e.to_string(), code)
        }
    }
}
