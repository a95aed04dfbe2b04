//! `nearcount` — command-line front end for the rational-point toolkit.
//!
//! Every subcommand prints JSON (or CSV where noted) to stdout and uses
//! the exit codes: 0 success, 2 curvature refusal, 3 budget exceeded,
//! 1 any other failure.

use clap::{Parser, Subcommand};
use nearcount::curvature::{self, LocalizationOptions};
use nearcount::funcspace::{load_chart, rational, ManifoldChart, WeightFunction};
use nearcount::harness::{
    self, dimension_growth_check, fit_error_envelope, run_experiment, DeltaRule,
    ExperimentConfig, RunRecord,
};
use nearcount::kernels::{interval_indicator, selberg_pair};
use nearcount::legendre::LegendreChart;
use nearcount::matfam::{radon_hurwitz, suslin_family};
use nearcount::oscillatory::{stationary_phase_leading, OscillatoryIntegralSpec};
use nearcount::counting::{self, CountQuery};
use nearcount::{Error, Result};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "nearcount",
    version,
    about = "Counting rational points near curved manifolds: exact enumeration, \
             curvature certificates, extremal kernels, and experiment orchestration"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Verify the Hessian-pencil curvature condition and, when it holds,
    /// compute localization radii. Prints the report as JSON.
    VerifyCurvature {
        #[arg(long)]
        manifold: PathBuf,
        /// Boundary grid density per pencil-cube face.
        #[arg(long, default_value_t = 16)]
        t_grid: usize,
        /// Base-point sweep radius (defaults to the chart's box radius).
        #[arg(long)]
        x_radius: Option<f64>,
    },
    /// Build the extremal trigonometric sandwich for an interval indicator.
    Selberg {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        degree: usize,
        /// Emit CSV samples (theta, s_minus, indicator, s_plus) instead of
        /// the JSON summary.
        #[arg(long)]
        emit_csv: bool,
        /// Uniform sample count for the CSV / violation scan.
        #[arg(long, default_value_t = 2048)]
        samples: usize,
    },
    /// Round-trip statistics for the gradient inversion of one chart map.
    LegendreCheck {
        #[arg(long)]
        manifold: PathBuf,
        /// Which component map to invert (1-based).
        #[arg(long, default_value_t = 1)]
        map_index: usize,
        #[arg(long, default_value_t = 300)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Stationary-phase check along a ladder of frequencies; emits CSV
    /// rows (lambda, abs_integral, abs_leading, rel_err).
    PhaseCheck {
        #[arg(long)]
        manifold: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        lambda_list: Vec<u64>,
        /// Frequency vector j (comma-separated, defaults to 1,0,…,0).
        #[arg(long, value_delimiter = ',')]
        j: Option<Vec<i64>>,
        /// Dual vector k (comma-separated, defaults to all zeros).
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<i64>>,
    },
    /// Count rational points near the chart at one (Q, delta).
    Count {
        #[arg(long)]
        manifold: PathBuf,
        #[arg(long = "Q")]
        q_max: u64,
        /// Threshold: a literal like `0.1`, or `Q^-a` / `Q^-a+eps`.
        #[arg(long)]
        delta: String,
        /// Ignore any weight embedded in the chart file.
        #[arg(long)]
        unweighted: bool,
        /// Append a CSV row (q, delta, count, n0, main_term, ratio) here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Emit a symmetric matrix family with a nonsingular pencil.
    Matrices {
        /// Construct the recursive family with this many matrices.
        #[arg(long)]
        suslin: usize,
        /// Also write the induced quadratic chart (with a default weight)
        /// as a TOML file consumable by `count` and `verify-curvature`.
        #[arg(long)]
        emit_manifold: Option<PathBuf>,
    },
    /// Run a configured (Q, delta) ladder experiment and persist it.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Inspect a persisted run record.
    Report {
        #[arg(long)]
        run: PathBuf,
        /// Fit the theoretical error envelope to the recorded residuals.
        #[arg(long)]
        fit_envelope: bool,
        /// Re-count on-chart points along the recorded ladder and compare
        /// the growth exponent against the dimension bound.
        #[arg(long)]
        dimension_growth: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::CurvatureRefused { .. } => 2,
                Error::BudgetExceeded { .. } => 3,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}

fn load(path: &Path) -> Result<(ManifoldChart, Option<WeightFunction>)> {
    load_chart(path)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run(cmd: Cmd) -> Result<i32> {
    match cmd {
        Cmd::VerifyCurvature { manifold, t_grid, x_radius } => {
            let (chart, _) = load(&manifold)?;
            let radius = x_radius.unwrap_or_else(|| chart.eps0_f64());
            let mut report = curvature::verify_condition1(&chart, t_grid, radius)?;
            if report.condition1_holds {
                report =
                    curvature::compute_localization(&chart, &report, &LocalizationOptions::default())?;
            }
            print_json(&report);
            Ok(if report.condition1_holds { 0 } else { 2 })
        }

        Cmd::Selberg { delta, degree, emit_csv, samples } => {
            let pair = selberg_pair(delta, degree)?;
            let thetas: Vec<f64> = pair.check_grid(samples, samples / 4);
            if emit_csv {
                let mut out = String::from("theta,s_minus,indicator,s_plus\n");
                for &t in &thetas {
                    out.push_str(&format!(
                        "{t:.17e},{:.17e},{},{:.17e}\n",
                        pair.minus_value(t),
                        interval_indicator(delta, t),
                        pair.plus_value(t)
                    ));
                }
                print!("{out}");
                return Ok(0);
            }
            let mut worst_minus = f64::NEG_INFINITY; // max S⁻ − χ (should be ≤ 0)
            let mut worst_plus = f64::NEG_INFINITY; // max χ − S⁺ (should be ≤ 0)
            for &t in &thetas {
                let ind = interval_indicator(delta, t);
                worst_minus = worst_minus.max(pair.minus_value(t) - ind);
                worst_plus = worst_plus.max(ind - pair.plus_value(t));
            }
            print_json(&serde_json::json!({
                "delta": delta,
                "degree": degree,
                "plus_at_zero": pair.plus_coeff(0),
                "minus_at_zero": pair.minus_coeff(0),
                "l1_defect": 1.0 / (degree as f64 + 1.0),
                "grid_points": thetas.len(),
                "worst_minus_violation": worst_minus,
                "worst_plus_violation": worst_plus,
                "sandwich_holds": worst_minus <= 1e-12 && worst_plus <= 1e-12,
            }));
            Ok(0)
        }

        Cmd::LegendreCheck { manifold, map_index, samples, seed } => {
            let (chart, _) = load(&manifold)?;
            if map_index == 0 || map_index > chart.codim() {
                return Err(Error::Config(format!(
                    "map index {map_index} out of range 1..={}",
                    chart.codim()
                )));
            }
            let map = chart.maps()[map_index - 1].clone();
            let lchart =
                LegendreChart::new(map, chart.x0_f64().to_vec(), chart.eps0_f64())?;
            let stats = lchart.round_trip_stats(samples, seed)?;
            let bilip = lchart.bilipschitz_ratios(1000, seed ^ 0x5a5a);
            let (lo, hi) = lchart.image_box();
            print_json(&serde_json::json!({
                "map_index": map_index,
                "round_trip": stats,
                "bilipschitz": bilip,
                "image_box_lo": lo,
                "image_box_hi": hi,
            }));
            Ok(0)
        }

        Cmd::PhaseCheck { manifold, lambda_list, j, k } => {
            let (chart, weight) = load(&manifold)?;
            let weight = weight.ok_or_else(|| {
                Error::Config("phase-check needs a weight in the chart file".into())
            })?;
            let r = chart.codim();
            let n = chart.base_dim();
            let j = j.unwrap_or_else(|| {
                let mut v = vec![0i64; r];
                v[0] = 1;
                v
            });
            let k = k.unwrap_or_else(|| vec![0i64; n]);
            let j1 = *j.first().ok_or_else(|| Error::Config("empty j".into()))?;
            if j1 < 1 {
                return Err(Error::Config("j must start with a positive entry".into()));
            }
            let report = curvature::verify_condition1(&chart, 16, chart.eps0_f64())?;
            let mut out = String::from("lambda,abs_integral,abs_leading,rel_err\n");
            for &lambda in &lambda_list {
                if lambda == 0 || lambda % j1 as u64 != 0 {
                    return Err(Error::Config(format!(
                        "lambda {lambda} is not a positive multiple of j1 = {j1}"
                    )));
                }
                let spec = OscillatoryIntegralSpec::new(
                    weight.clone(),
                    chart.maps().to_vec(),
                    j.clone(),
                    k.clone(),
                    lambda / j1 as u64,
                )?;
                let res = stationary_phase_leading(&spec, &report)?;
                out.push_str(&format!(
                    "{lambda},{:.17e},{:.17e},{}\n",
                    res.quadrature.norm(),
                    res.leading.norm(),
                    res.relative_error
                        .map(|e| format!("{e:.17e}"))
                        .unwrap_or_default()
                ));
            }
            print!("{out}");
            Ok(0)
        }

        Cmd::Count { manifold, q_max, delta, unweighted, csv } => {
            let (chart, weight) = load(&manifold)?;
            let delta_val = DeltaRule::parse(&delta)?.delta(q_max);
            let query = CountQuery::new(q_max, delta_val)?;
            let result = match (&weight, unweighted) {
                (Some(w), false) => counting::count_weighted(&chart, w, &query)?,
                _ => counting::count_near(&chart, &query)?,
            };
            print_json(&result);
            if let Some(path) = csv {
                let fresh = !path.exists();
                let mut file = fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&path)?;
                if fresh {
                    writeln!(file, "q,delta,count,n0,main_term,ratio")?;
                }
                let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
                writeln!(
                    file,
                    "{},{:.17e},{:.17e},{},{},{}",
                    result.q_max,
                    result.delta,
                    result.count,
                    opt(result.n0),
                    opt(result.main_term),
                    opt(result.ratio)
                )?;
            }
            Ok(0)
        }

        Cmd::Matrices { suslin, emit_manifold } => {
            let fam = suslin_family(suslin)?;
            let mats: Vec<Vec<Vec<i64>>> = fam
                .matrices()
                .iter()
                .map(|m| {
                    (0..m.n_rows())
                        .map(|i| (0..m.n_cols()).map(|jc| m[(i, jc)]).collect())
                        .collect()
                })
                .collect();
            print_json(&serde_json::json!({
                "provenance": format!("{:?}", fam.provenance()),
                "count": fam.count(),
                "dim": fam.dim(),
                "radon_hurwitz_bound": radon_hurwitz(fam.dim() as u64)?,
                "matrices": mats,
            }));
            if let Some(path) = emit_manifold {
                let chart = fam.chart(rational(1, 4))?;
                let weight =
                    WeightFunction::bump(chart.x0_f64().to_vec(), 0.8 * chart.eps0_f64())?;
                let spec = nearcount::funcspace::ChartSpec::from_chart(&chart, Some(&weight));
                fs::write(&path, spec.to_toml())?;
                eprintln!("wrote chart to {}", path.display());
            }
            Ok(0)
        }

        Cmd::Experiment { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let record = run_experiment(&cfg)?;
            print_json(&record);
            Ok(0)
        }

        Cmd::Report { run, fit_envelope, dimension_growth } => {
            let record = RunRecord::load(&run)?;
            let mut code = 0;
            if !fit_envelope && !dimension_growth {
                print_json(&serde_json::json!({
                    "schema_version": record.schema_version,
                    "toolkit_version": record.toolkit_version,
                    "label": record.config.label,
                    "mode": record.config.mode,
                    "rungs": record.rows.len().max(record.base_rows.len()),
                    "q_ladder": record.config.q_ladder,
                    "ratios": record.ratios,
                    "fitted_c": record.fitted_c,
                }));
            }
            if fit_envelope {
                let fit = fit_error_envelope(&record)?;
                print_json(&fit);
            }
            if dimension_growth {
                let path = record.config.manifold.clone().ok_or_else(|| {
                    Error::Config("record has no manifold file for the growth check".into())
                })?;
                let (chart, _) = load(Path::new(&path))?;
                let growth = dimension_growth_check(&chart, &record.config.q_ladder)?;
                if !growth.pass {
                    code = 1;
                }
                print_json(&growth);
            }
            let _ = harness::RESULTS_DIR_ENV; // single source for the env name
            Ok(code)
        }
    }
}
