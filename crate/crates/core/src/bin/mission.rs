use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use nalgebra::{Point3, Vector3};
use valvekit::detector::{detect_panels, DetectorParams};
use valvekit::geom::Pose6;
use valvekit::manip::{insertion_plan, insertion_plan_for_angle};
use valvekit::mission::{
    export_trajectory, robustness_csv, run_mission, run_robustness, trajectory_csv, valve_robustness_grid, Phase,
    RobustnessKind, Scenario,
};
use valvekit::registration::{register_panel, PanelModel, RegistrationParams};
use valvekit::scan_sim::io::{read_depth, read_scan, write_depth, write_scan};
use valvekit::scan_sim::{raycast_scan, DepthFrameSpec, PanelGeometry};
use valvekit::valve::{perceive_valve, ValvePerceptParams, ValveScene};
use valvekit::Error;

/// Simulated valve-turning mission: scenario runner, perception tools and robustness sweeps.
#[derive(Parser)]
#[command(name = "mission", version)]
struct Cli {
    /// Override the scenario or experiment seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full mission and write report.json, trajectory.csv and compute.csv.
    Run {
        /// Scenario file, or `default` for the built-in 50 m scenario.
        scenario: String,
    },
    /// Print the built-in scenario as JSON.
    Scenario,
    /// Simulate one LiDAR scan of a scenario's world.
    Scan {
        scenario: String,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        yaw_deg: f64,
    },
    /// Detect panel candidates in a scan file and print them as JSON.
    Detect {
        scan: PathBuf,
        /// Object width (m).
        #[arg(long)]
        width: Option<f64>,
        /// Response threshold (m).
        #[arg(long)]
        kappa: Option<f64>,
        /// Cluster tolerance (m).
        #[arg(long)]
        tolerance: Option<f64>,
        /// Also attach scan returns within this planar radius of each cluster (m).
        #[arg(long, default_value_t = 1.2)]
        segment_radius: f64,
    },
    /// Register the panel model to every cluster of a `detect` output; CSV x,y,yaw,score,t.
    Register {
        clusters: PathBuf,
        /// Panel geometry JSON; the default panel when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run the base approach of a scenario and write its trajectory CSV.
    Approach { scenario: String },
    /// Valve perception success rate over a dropout × noise grid; CSV p,sigma,success_rate.
    ValveRobustness {
        #[arg(long, value_delimiter = ',', default_value = "0")]
        p_missing: Vec<f64>,
        /// Depth noise levels (m).
        #[arg(long, value_delimiter = ',', default_value = "0")]
        sigma: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
    },
    /// One-dimensional robustness sweep; CSV param,success_rate.
    Robustness {
        /// valve-dropout, valve-noise or wrench-jitter.
        #[arg(long)]
        kind: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
    },
    /// Render a synthetic valve depth frame.
    RenderValve {
        #[arg(long, default_value_t = 25.0, allow_hyphen_values = true)]
        roll_deg: f64,
        /// Depth noise (m).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Insertion plan for a stem angle or a depth frame, as JSON.
    PlanInsertion {
        #[arg(long, allow_hyphen_values = true, conflicts_with = "depth", required_unless_present = "depth")]
        angle_deg: Option<f64>,
        #[arg(long)]
        depth: Option<PathBuf>,
    },
}

#[derive(Serialize, Deserialize)]
struct DetectedCluster {
    track_id: u64,
    centroid: Point3<f64>,
    bbox_dims: Vector3<f64>,
    points: Vec<Point3<f64>>,
    /// Scan returns around the cluster, the input for registration.
    segment: Vec<Point3<f64>>,
}

#[derive(Serialize, Deserialize)]
struct Detections {
    sensor_pose: Pose6,
    timestamp: f64,
    clusters: Vec<DetectedCluster>,
}

enum Outcome {
    Done,
    PhaseFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::PhaseFailed) => ExitCode::from(1),
        Err(e @ Error::Usage(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn load_scenario(arg: &str, seed: Option<u64>) -> valvekit::Result<Scenario> {
    let mut s = if arg == "default" { Scenario::default_50m() } else { Scenario::load(Path::new(arg))? };
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn emit(out: Option<&Path>, text: &str) -> valvekit::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn execute(cli: &Cli) -> valvekit::Result<Outcome> {
    let out = cli.out.as_deref();
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Run { scenario } => {
            let run = run_mission(&load_scenario(scenario, cli.seed)?)?;
            if let Some(dir) = out {
                run.write(dir)?;
            }
            for p in &run.report.phases {
                println!("{:<14} {:>8.2} s  {}", p.phase.as_str(), p.duration, outcome_text(&p.outcome));
            }
            println!("{:<14} {:>8.2} s", "total", run.report.total);
            Ok(if run.report.success() { Outcome::Done } else { Outcome::PhaseFailed })
        }
        Command::Scenario => {
            emit(out, &(Scenario::default_50m().to_json()? + "\n"))?;
            Ok(Outcome::Done)
        }
        Command::Scan { scenario, x, y, yaw_deg } => {
            let s = load_scenario(scenario, cli.seed)?;
            let pose = Pose6::new(*x, *y, s.tracking.sensor_height, 0.0, 0.0, yaw_deg.to_radians());
            let scan = raycast_scan(&s.world()?, &pose, &s.lidar, s.seed);
            let path = out.ok_or_else(|| Error::Usage("scan needs --out".into()))?;
            write_scan(path, &scan)?;
            Ok(Outcome::Done)
        }
        Command::Detect { scan, width, kappa, tolerance, segment_radius } => {
            let scan = read_scan(scan)?;
            let mut params = DetectorParams::panel();
            if let Some(w) = width {
                params.object_width = *w;
            }
            if let Some(k) = kappa {
                params.response_threshold = *k;
            }
            if let Some(t) = tolerance {
                params.cluster_tolerance = *t;
            }
            params.validate()?;
            let returns = scan.points();
            let clusters = detect_panels(&scan, &params)
                .into_iter()
                .map(|c| DetectedCluster {
                    track_id: c.track_id,
                    centroid: c.centroid,
                    bbox_dims: c.bbox_dims,
                    segment: returns
                        .iter()
                        .filter(|p| (p.x - c.centroid.x).hypot(p.y - c.centroid.y) < *segment_radius && p.z > 0.02)
                        .copied()
                        .collect(),
                    points: c.points,
                })
                .collect();
            let doc = Detections { sensor_pose: scan.sensor_pose, timestamp: scan.timestamp, clusters };
            emit(out, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
            Ok(Outcome::Done)
        }
        Command::Register { clusters, model } => {
            let doc: Detections = serde_json::from_str(&std::fs::read_to_string(clusters)?)?;
            let geometry: PanelGeometry = match model {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => PanelGeometry::default(),
            };
            let model = PanelModel::from_geometry(&geometry, 0.05)?;
            let params = RegistrationParams::default();
            let mut csv = String::from("x,y,yaw,score,t\n");
            let mut failed = false;
            for c in &doc.clusters {
                let pts = if c.segment.is_empty() { &c.points } else { &c.segment };
                match register_panel(&model, pts, &doc.sensor_pose, &params) {
                    Ok(p) => csv.push_str(&format!("{},{},{},{},{}\n", p.x, p.y, p.yaw, p.score, doc.timestamp)),
                    Err(e) => {
                        eprintln!("cluster {}: {e}", c.track_id);
                        failed = true;
                    }
                }
            }
            emit(out, &csv)?;
            Ok(if failed || doc.clusters.is_empty() { Outcome::PhaseFailed } else { Outcome::Done })
        }
        Command::Approach { scenario } => {
            let run = run_mission(&load_scenario(scenario, cli.seed)?)?;
            match out {
                Some(p) => export_trajectory(&run.trajectory, p)?,
                None => print!("{}", trajectory_csv(&run.trajectory)),
            }
            let arrived = run.report.phases[..=Phase::ArrivePanel as usize].iter().all(|p| p.outcome == valvekit::mission::Outcome::Success);
            Ok(if arrived { Outcome::Done } else { Outcome::PhaseFailed })
        }
        Command::ValveRobustness { p_missing, sigma, repeats } => {
            let rows = valve_robustness_grid(p_missing, sigma, *repeats, seed)?;
            let mut csv = String::from("p,sigma,success_rate\n");
            for (p, s, r) in rows {
                csv.push_str(&format!("{p},{s},{r}\n"));
            }
            emit(out, &csv)?;
            Ok(Outcome::Done)
        }
        Command::Robustness { kind, grid, repeats } => {
            let kind: RobustnessKind = kind.parse()?;
            emit(out, &robustness_csv(&run_robustness(kind, grid, *repeats, seed)?))?;
            Ok(Outcome::Done)
        }
        Command::RenderValve { roll_deg, noise } => {
            let scene = ValveScene { roll: roll_deg.to_radians(), ..Default::default() };
            let spec = DepthFrameSpec { noise_sigma: *noise, ..DepthFrameSpec::tof_camera() };
            let path = out.ok_or_else(|| Error::Usage("render-valve needs --out".into()))?;
            write_depth(path, &scene.render(&spec, seed))?;
            Ok(Outcome::Done)
        }
        Command::PlanInsertion { angle_deg, depth } => {
            let plan = match (angle_deg, depth) {
                (Some(a), _) => insertion_plan_for_angle(a.to_radians()),
                (None, Some(path)) => insertion_plan(&perceive_valve(&read_depth(path)?, &ValvePerceptParams::default())?.stem),
                (None, None) => return Err(Error::Usage("plan-insertion needs --angle-deg or --depth".into())),
            };
            emit(out, &(serde_json::to_string_pretty(&plan)? + "\n"))?;
            Ok(Outcome::Done)
        }
    }
}

fn outcome_text(o: &valvekit::mission::Outcome) -> String {
    match o {
        valvekit::mission::Outcome::Success => "success".into(),
        valvekit::mission::Outcome::Failure { reason } => format!("failure: {reason}"),
        valvekit::mission::Outcome::Skipped => "skipped".into(),
    }
}
