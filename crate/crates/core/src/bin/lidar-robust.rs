use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use lidar_robust::corruption::parse_kind_list;
use lidar_robust::denoise::{bilateral_filter, BilateralParams};
use lidar_robust::eval::{kitti_drift, rpe_consecutive, KITTI_SEGMENT_LENGTHS};
use lidar_robust::experiment::{
    corrupt_frames, export_augmentation, run_experiment, write_outputs, DatasetConfig,
    ExperimentConfig,
};
use lidar_robust::io::{
    frame_file_name, frame_id_from_path, read_kitti_bin, read_poses, read_velodyne_dir,
    write_kitti_bin, write_poses,
};
use lidar_robust::odometry::{run_odometry, OdometryConfig};
use lidar_robust::synth::{generate_synthetic_sequence, split_sequence};
use lidar_robust::{CorruptionKind, Error, PointCloud, Result, SeverityProfile};

#[derive(Parser)]
#[command(
    name = "lidar-robust",
    version,
    about = "Corrupt LiDAR scans, run ICP odometry and measure drift"
)]
struct Cli {
    /// Global seed; for `experiment` it replaces the sweep seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Severity profile TOML file.
    #[arg(long, global = true)]
    profile: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the fully resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corrupt a .bin scan or a directory of scans.
    Corrupt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        kind: CorruptionKind,
        #[arg(long, default_value_t = 3)]
        severity: u8,
    },
    /// Bilateral-filter a .bin scan or a directory of scans.
    Denoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        params: FilterArgs,
    },
    /// Run frame-to-frame ICP over a directory of scans and write KITTI poses.
    Odometry {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        params: IcpArgs,
    },
    /// Relative pose error of an estimated trajectory against ground truth.
    Evaluate {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        /// Also report KITTI segment drift.
        #[arg(long)]
        segments: bool,
    },
    /// Run a corruption sweep described by a TOML config.
    Experiment {
        /// Config file; omitted means all defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report path, overriding `output.report`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Export corrupted copies of a dataset for training-set augmentation.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Comma-separated kinds, or `all`.
        #[arg(long)]
        kinds: String,
        #[arg(long, default_value_t = 5)]
        severity: u8,
    },
    /// Generate a synthetic sequence as `velodyne/NNNNNN.bin` plus `poses.txt`.
    Synth {
        #[arg(long, default_value = "corridor")]
        scene: String,
        #[arg(long, default_value_t = 50)]
        frames: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    sigma_d: Option<f64>,
    #[arg(long)]
    sigma_n: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    normal_k: Option<usize>,
}

impl FilterArgs {
    fn resolve(&self) -> BilateralParams {
        let d = BilateralParams::default();
        BilateralParams {
            radius: self.radius.unwrap_or(d.radius),
            sigma_d: self.sigma_d.unwrap_or(d.sigma_d),
            sigma_n: self.sigma_n.unwrap_or(d.sigma_n),
            iterations: self.iterations.unwrap_or(d.iterations),
            normal_k: self.normal_k.unwrap_or(d.normal_k),
        }
    }
}

#[derive(Args)]
struct IcpArgs {
    /// Start from the KITTI-scale defaults instead of the synthetic ones.
    #[arg(long)]
    kitti: bool,
    #[arg(long)]
    voxel_size: Option<f64>,
    #[arg(long)]
    max_corr_dist: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    convergence_eps: Option<f64>,
    #[arg(long)]
    robust_delta: Option<f64>,
    #[arg(long)]
    no_constant_velocity: bool,
}

impl IcpArgs {
    fn resolve(&self) -> OdometryConfig {
        let d = if self.kitti {
            OdometryConfig::kitti()
        } else {
            OdometryConfig::default()
        };
        OdometryConfig {
            voxel_size: self.voxel_size.unwrap_or(d.voxel_size),
            max_corr_dist: self.max_corr_dist.unwrap_or(d.max_corr_dist),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            convergence_eps: self.convergence_eps.unwrap_or(d.convergence_eps),
            robust_delta: self.robust_delta.unwrap_or(d.robust_delta),
            use_constant_velocity: d.use_constant_velocity && !self.no_constant_velocity,
        }
    }
}

fn load_profile(path: &Option<PathBuf>) -> Result<SeverityProfile> {
    path.as_ref()
        .map_or_else(|| Ok(SeverityProfile::default()), SeverityProfile::load)
}

fn to_toml<T: serde::Serialize>(value: &T) -> String {
    toml::to_string_pretty(value).expect("configs are always serializable")
}

/// A single `.bin` file or every `.bin` in a directory, with frame ids taken
/// from the file names.
fn read_input(path: &Path) -> Result<(Vec<PointCloud>, bool)> {
    if path.is_dir() {
        return Ok((read_velodyne_dir(path)?, true));
    }
    let mut cloud = read_kitti_bin(path)?;
    cloud.frame_id = frame_id_from_path(path).unwrap_or(0);
    Ok((vec![cloud], false))
}

fn write_output(clouds: &[PointCloud], is_dir: bool, output: &Path) -> Result<()> {
    if !is_dir {
        return write_kitti_bin(&clouds[0], output);
    }
    std::fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
    clouds
        .iter()
        .try_for_each(|c| write_kitti_bin(c, output.join(frame_file_name(c.frame_id))))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    }
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Experiment { config, report } => {
            let mut cfg = match &config {
                Some(path) => ExperimentConfig::load(path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.sweep.seeds = vec![s];
            }
            if cli.profile.is_some() {
                cfg.profile = load_profile(&cli.profile)?;
            }
            if report.is_some() {
                cfg.output.report = report;
            }
            if cli.print_config {
                print!("{}", cfg.to_toml_string());
                return Ok(());
            }
            let result = run_experiment(&cfg)?;
            write_outputs(&result, &cfg.output)?;
            if cfg.output.report.is_none() {
                print!("{}", result.to_csv());
            }
            Ok(())
        }
        Command::Corrupt {
            input,
            output,
            kind,
            severity,
        } => {
            let profile = load_profile(&cli.profile)?;
            if cli.print_config {
                print!("{}", profile.to_toml_string());
                return Ok(());
            }
            let (frames, is_dir) = read_input(&input)?;
            let corrupted = corrupt_frames(&frames, kind, severity, seed, &profile)?;
            write_output(&corrupted, is_dir, &output)
        }
        Command::Denoise {
            input,
            output,
            params,
        } => {
            let params = params.resolve();
            if cli.print_config {
                print!("{}", to_toml(&params));
                return Ok(());
            }
            params.validate()?;
            let (frames, is_dir) = read_input(&input)?;
            let filtered = frames
                .par_iter()
                .map(|f| bilateral_filter(f, &params))
                .collect::<Result<Vec<_>>>()?;
            write_output(&filtered, is_dir, &output)
        }
        Command::Odometry {
            input,
            output,
            params,
        } => {
            let cfg = params.resolve();
            if cli.print_config {
                print!("{}", to_toml(&cfg));
                return Ok(());
            }
            let frames = read_velodyne_dir(&input)?;
            let trajectory = run_odometry(&frames, &cfg)?;
            if !trajectory.flagged().is_empty() {
                eprintln!("flagged frames: {:?}", trajectory.flagged());
            }
            write_poses(&trajectory, &output)
        }
        Command::Evaluate {
            estimate,
            ground_truth,
            segments,
        } => {
            let est = read_poses(&estimate)?;
            let gt = read_poses(&ground_truth)?;
            let report = rpe_consecutive(&est, &gt)?;
            println!("pairs {}", report.per_pair.len());
            println!("rpe_trans_m {}", report.rpe_trans);
            println!("rpe_rot_deg {}", report.rpe_rot.to_degrees());
            if segments {
                println!(
                    "drift_percent {}",
                    kitti_drift(&est, &gt, &KITTI_SEGMENT_LENGTHS)?
                );
            }
            Ok(())
        }
        Command::Augment {
            input,
            output,
            kinds,
            severity,
        } => {
            let profile = load_profile(&cli.profile)?;
            if cli.print_config {
                print!("{}", profile.to_toml_string());
                return Ok(());
            }
            let kinds = parse_kind_list(&kinds)?;
            let frames = read_velodyne_dir(&input)?;
            let manifest = export_augmentation(&frames, &kinds, severity, seed, &profile, &output)?;
            eprintln!("wrote {} files", manifest.entries.len());
            Ok(())
        }
        Command::Synth {
            scene,
            frames,
            output,
        } => {
            if cli.print_config {
                let dataset = DatasetConfig::Synthetic {
                    scene,
                    frames,
                    seed,
                };
                print!("{}", to_toml(&dataset));
                return Ok(());
            }
            let (clouds, gt) = split_sequence(generate_synthetic_sequence(&scene, frames, seed)?);
            write_output(&clouds, true, &output.join("velodyne"))?;
            write_poses(&gt, output.join("poses.txt"))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
