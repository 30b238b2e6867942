use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use semmap_core::harness::{run_ablation_detailed, AblationConfig, CaseArtifacts};
use semmap_core::instances::{extract_object_map, ClusterParams, ConfidenceMode};
use semmap_core::io::{load_json, load_labeled_cloud, load_object_map, load_trajectory, save_curve_csv, save_object_map};
use semmap_core::quality::{error_breakdown_curves, map3d, omq, pr_curve, BreakdownCurves, MapScores, OmqReport};
use semmap_core::trajectory::{evaluate_trajectories, TrajOptions};
use semmap_core::{ClassVocabulary, Execution, ObjectMap};
use serde_json::json;

#[derive(Parser)]
#[command(name = "semmap", version, about = "Evaluate semantic object maps and run the noise ablation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score an estimated object map against ground truth.
    Evaluate {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        omq: bool,
        #[arg(long)]
        map3d: bool,
        #[arg(long)]
        breakdown: bool,
        /// Print JSON instead of a table.
        #[arg(long, conflicts_with = "csv")]
        json: bool,
        /// Print `metric,value` rows instead of a table.
        #[arg(long)]
        csv: bool,
    },
    /// Cluster a labeled PLY cloud into an object map.
    Extract {
        #[arg(long)]
        cloud: PathBuf,
        /// Single-linkage distance in meters.
        #[arg(long)]
        link: f64,
        #[arg(long = "min-points")]
        min_points: usize,
        #[arg(long, value_enum, default_value_t = Confidence::Full)]
        confidence: Confidence,
        /// Output map; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// ATE and RPE between two TUM trajectories.
    Traj {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long = "no-align")]
        no_align: bool,
        #[arg(long, default_value_t = 1)]
        delta: usize,
        #[arg(long = "max-dt", default_value_t = 0.02)]
        max_dt: f64,
        #[arg(long)]
        json: bool,
    },
    /// Run the Cases I-IV ablation.
    Ablate {
        /// JSON config; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Master seed mixed into every scene and noise stream.
        #[arg(long)]
        seed: u64,
    },
    /// Write PR and error-breakdown curves as CSV.
    Curves {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Confidence {
    Full,
    PointShare,
}

impl From<Confidence> for ConfidenceMode {
    fn from(c: Confidence) -> Self {
        match c {
            Confidence::Full => ConfidenceMode::Full,
            Confidence::PointShare => ConfidenceMode::PointShare,
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("SEMMAP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("SEMMAP_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn table(rows: &[(String, f64)]) -> String {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::new();
    for (k, v) in rows {
        writeln!(s, "{k:<width$}  {v:.6}").unwrap();
    }
    s
}

fn csv_rows(rows: &[(String, f64)]) -> String {
    let mut s = String::from("metric,value\n");
    for (k, v) in rows {
        writeln!(s, "{k},{v}").unwrap();
    }
    s
}

fn omq_rows(r: &OmqReport) -> Vec<(String, f64)> {
    vec![
        ("omq".into(), r.omq),
        ("mpoq".into(), r.mpoq),
        ("msq".into(), r.msq),
        ("mlq".into(), r.mlq),
        ("mfpq".into(), r.mfpq),
        ("n_tp".into(), r.n_tp as f64),
        ("n_fp".into(), r.n_fp as f64),
        ("n_fn".into(), r.n_fn as f64),
    ]
}

fn map_rows(m: &MapScores) -> Vec<(String, f64)> {
    let mut rows = vec![
        ("map3d".to_string(), m.map3d),
        ("map25".to_string(), m.map25),
        ("map50".to_string(), m.map50),
    ];
    rows.extend(m.per_class_ap.iter().map(|c| {
        let mean = c.ap.iter().sum::<f64>() / c.ap.len().max(1) as f64;
        (format!("ap3d/{}", c.class_name), mean)
    }));
    rows
}

fn breakdown_rows(b: &BreakdownCurves) -> Vec<(String, f64)> {
    b.curves.iter().map(|(stage, c)| (format!("ap/{stage}"), c.ap)).collect()
}

fn load_pair(est: &Path, gt: &Path) -> anyhow::Result<(ObjectMap, ObjectMap)> {
    Ok((load_object_map(est)?, load_object_map(gt)?))
}

fn evaluate(est: &Path, gt: &Path, want_omq: bool, want_map: bool, want_breakdown: bool, json: bool, csv: bool) -> anyhow::Result<()> {
    let (est, gt) = load_pair(est, gt)?;
    let all = !(want_omq || want_map || want_breakdown);
    let mut rows = Vec::new();
    let mut doc = serde_json::Map::new();
    if want_omq || all {
        let r = omq(&est, &gt)?;
        rows.extend(omq_rows(&r));
        doc.insert("omq".into(), serde_json::to_value(&r)?);
    }
    if want_map || all {
        let m = map3d(&est, &gt)?;
        rows.extend(map_rows(&m));
        doc.insert("map".into(), serde_json::to_value(&m)?);
    }
    if want_breakdown {
        let b = error_breakdown_curves(&est, &gt)?;
        rows.extend(breakdown_rows(&b));
        let aps: serde_json::Map<_, _> = b.curves.iter().map(|(s, c)| (s.label().to_string(), json!(c.ap))).collect();
        doc.insert("breakdown".into(), serde_json::Value::Object(aps));
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else if csv {
        print!("{}", csv_rows(&rows));
    } else {
        print!("{}", table(&rows));
    }
    Ok(())
}

fn extract(cloud: &Path, link: f64, min_points: usize, confidence: Confidence, out: Option<&Path>) -> anyhow::Result<()> {
    let cloud = load_labeled_cloud(cloud)?;
    let params = ClusterParams {
        max_link_distance: link,
        min_cluster_points: min_points,
    };
    let map = extract_object_map(&cloud, &ClassVocabulary::default(), &params, confidence.into(), Execution::default())?;
    match out {
        Some(p) => save_object_map(&map, p)?,
        None => print!("{}", semmap_core::io::object_map_to_json(&map)),
    }
    log::info!("extracted {} objects from {} points", map.len(), cloud.len());
    Ok(())
}

fn traj(est: &Path, gt: &Path, opts: TrajOptions, json: bool) -> anyhow::Result<()> {
    let est = load_trajectory(est)?;
    let gt = load_trajectory(gt)?;
    let e = evaluate_trajectories(&est, &gt, &opts)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&e)?);
        return Ok(());
    }
    print!(
        "{}",
        table(&[
            ("ate_rmse_m".into(), e.ate_rmse),
            ("rpe_trans_rmse_m".into(), e.rpe_trans_rmse),
            ("rpe_rot_rmse_deg".into(), e.rpe_rot_rmse),
            ("trajectory_length_m".into(), e.trajectory_length),
            ("pairs".into(), e.n_pairs as f64),
        ])
    );
    Ok(())
}

fn write_curves(dir: &Path, prefix: &str, est: &ObjectMap, gt: &ObjectMap) -> anyhow::Result<()> {
    let b = error_breakdown_curves(est, gt)?;
    for (stage, curve) in &b.curves {
        save_curve_csv(&curve.points, &dir.join(format!("{prefix}breakdown_{stage}.csv")))?;
    }
    for class in gt.vocabulary().ids() {
        for (tag, t) in [("25", 0.25), ("50", 0.50)] {
            if let Some(c) = pr_curve(est, gt, class, t)? {
                let name = gt.vocabulary().name(class).unwrap_or("unknown");
                save_curve_csv(&c.points, &dir.join(format!("{prefix}pr{tag}_{name}.csv")))?;
            }
        }
    }
    Ok(())
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).map_err(|e| semmap_core::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn ablate(config: Option<&Path>, out: &Path, seed: u64) -> anyhow::Result<()> {
    let mut cfg: AblationConfig = match config {
        Some(p) => load_json(p)?,
        None => AblationConfig::default(),
    };
    cfg.master_seed = seed;
    let (report, artifacts) = run_ablation_detailed(&cfg, Execution::default())?;
    create_dir(out)?;
    semmap_core::io::write_bytes(&out.join("report.json"), (report.to_json()? + "\n").as_bytes())?;
    let curves = out.join("curves");
    create_dir(&curves)?;
    for CaseArtifacts {
        seed, case, estimate, ground_truth, ..
    } in &artifacts
    {
        write_curves(&curves, &format!("seed{seed}_case{case}_"), estimate, ground_truth)?;
    }
    let mut rows = Vec::new();
    for s in &report.summary {
        let r = s.mean_ratios;
        let v = |x: Option<f64>| x.unwrap_or(f64::NAN);
        rows.push((format!("case {} rOMQ", s.case), v(r.romq)));
        rows.push((format!("case {} rmAP", s.case), v(r.rmap)));
    }
    print!("{}", table(&rows));
    Ok(())
}

fn curves(est: &Path, gt: &Path, out: &Path) -> anyhow::Result<()> {
    let (est, gt) = load_pair(est, gt)?;
    create_dir(out)?;
    write_curves(out, "", &est, &gt)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Evaluate {
            est,
            gt,
            omq,
            map3d,
            breakdown,
            json,
            csv,
        } => evaluate(&est, &gt, omq, map3d, breakdown, json, csv),
        Command::Extract {
            cloud,
            link,
            min_points,
            confidence,
            out,
        } => extract(&cloud, link, min_points, confidence, out.as_deref()),
        Command::Traj {
            est,
            gt,
            no_align,
            delta,
            max_dt,
            json,
        } => traj(
            &est,
            &gt,
            TrajOptions {
                align: !no_align,
                delta,
                max_dt,
            },
            json,
        ),
        Command::Ablate { config, out, seed } => ablate(config.as_deref(), &out, seed),
        Command::Curves { est, gt, out } => curves(&est, &gt, &out),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<semmap_core::Error>() {
        Some(e) if !e.is_input_error() => 1,
        Some(_) => 2,
        None if err.downcast_ref::<serde_json::Error>().is_some() => 1,
        None => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
