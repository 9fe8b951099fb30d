//! `occukit` command line: one subcommand per pipeline stage.
//!
//! Exit codes: 0 success, 2 usage error, 3 missing or unreadable input,
//! 4 malformed file, 5 invalid argument or inconsistent inputs, 6 infeasible
//! scene.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bev::{extract_locations, splat_gaussian, BevGrid, Detection};
use crate::config::{self, view_ap_thresholds, volume_ap_thresholds};
use crate::error::{Error, Result};
use crate::fusion::{depth_to_points, fuse_and_voxelize};
use crate::grouping::{group_instances, merge_panoptic};
use crate::io::{self, DatasetLayout, FormatError, Grid};
use crate::metrics::{
    instance_ap_codes, match_detections, panoptic_quality, semantic_iou, view_level_report, DetectionCounts,
    MetricReport, ViewMasks,
};
use crate::raymarch::{render_view, RayMarchParams};
use crate::scenegen::{gt_locations, render_sensors, sample_scene, voxelize_analytic, SceneConfig};
use crate::view_transform::{lift_features, LiftConfig};
use crate::volume::{decode_panoptic, InstanceVolume, LabelVolume, PanopticVolume, SemanticClass};

#[derive(Debug, Parser)]
#[command(name = "occukit", version, about = "Multi-view pedestrian occupancy toolkit")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Fuse labeled depth maps into semantic and instance grids.
    Fuse(FuseArgs),
    /// Lift per-camera feature maps into a voxel feature volume.
    Lift(LiftArgs),
    /// Extract ground-plane detections from an occupancy map or splatted locations.
    Detect(DetectArgs),
    /// Group pedestrian voxels around detections into a panoptic grid.
    Group(GroupArgs),
    /// Ray-march a grid into per-camera label masks.
    Render(RenderArgs),
    /// Score detections against ground-truth locations.
    Eval2d(Eval2dArgs),
    /// Score a predicted grid against a ground-truth grid.
    Eval3d(Eval3dArgs),
    /// Score rendered panoptic masks view by view.
    Evalview(EvalViewArgs),
    /// Merge metric reports into one summary.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "OCCUKIT_SEED", default_value_t = 0)]
    seed: u64,
    /// Scene config JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    frames: u32,
    #[arg(long)]
    peds: Option<usize>,
    #[arg(long)]
    others: Option<usize>,
    /// Border cameras; an overhead camera is always added.
    #[arg(long)]
    cameras: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["X", "Y"])]
    extent: Option<Vec<f64>>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
}

#[derive(Debug, Args)]
struct FuseArgs {
    /// Dataset root.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for `NNNN.{sem,inst}.mvpo`.
    #[arg(long)]
    out: PathBuf,
    /// Only this frame (default: all).
    #[arg(long)]
    frame: Option<u32>,
}

#[derive(Debug, Args)]
struct LiftArgs {
    #[arg(long)]
    data: PathBuf,
    /// Directory with `camNN.f32` feature maps (and their sidecars).
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = config::FEATURE_SCALE)]
    scale: f64,
    /// Divide by the number of views instead of the per-voxel valid count.
    #[arg(long)]
    strict_view_mean: bool,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// BEV occupancy map (`.f32` with sidecar).
    #[arg(long, conflicts_with = "locations", required_unless_present = "locations")]
    pocc: Option<PathBuf>,
    /// Frame number written for `--pocc` detections.
    #[arg(long, default_value_t = 0)]
    frame: u32,
    /// Locations CSV to splat into a Gaussian map per frame (needs `--data`).
    #[arg(long, requires = "data")]
    locations: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = config::DETECTION_TAU)]
    tau: f64,
    #[arg(long, default_value_t = config::NMS_RADIUS)]
    nms_radius: f64,
    #[arg(long, default_value_t = config::SPLAT_SIGMA)]
    sigma: f64,
}

#[derive(Debug, Args)]
struct GroupArgs {
    /// Semantic grid.
    #[arg(long)]
    sem: PathBuf,
    #[arg(long)]
    detections: PathBuf,
    #[arg(long, default_value_t = 0)]
    frame: u32,
    /// Panoptic grid output.
    #[arg(long)]
    out: PathBuf,
    /// Optional instance grid output.
    #[arg(long)]
    inst_out: Option<PathBuf>,
    #[arg(long, default_value_t = config::GROUPING_RADIUS)]
    radius: f64,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Dataset root, for the calibration.
    #[arg(long)]
    data: PathBuf,
    /// Any grid; its codes are rendered as-is.
    #[arg(long, conflicts_with = "sem", required_unless_present = "sem")]
    grid: Option<PathBuf>,
    /// Semantic grid, combined with `--inst` into panoptic codes.
    #[arg(long, requires = "inst")]
    sem: Option<PathBuf>,
    #[arg(long)]
    inst: Option<PathBuf>,
    /// Output directory for `camNN.pgm`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    /// Voxel boundary crossings before a ray gives up (default: unlimited).
    #[arg(long)]
    max_steps: Option<u32>,
    #[arg(long, default_value_t = config::RAY_MIN_HIT_DISTANCE)]
    min_hit: f64,
    #[arg(long, default_value_t = config::RAY_MAX_TRACE_DISTANCE)]
    max_trace: f64,
}

#[derive(Debug, Args)]
struct Eval2dArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = config::MATCH_DISTANCE)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Eval3dArgs {
    /// Predicted semantic or panoptic grid.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Instance grids to pair with semantic `--pred` / `--gt`.
    #[arg(long)]
    pred_inst: Option<PathBuf>,
    #[arg(long)]
    gt_inst: Option<PathBuf>,
    /// AP thresholds (default 0.50..0.95).
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalViewArgs {
    /// Directory of predicted panoptic masks `camNN.pgm`.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Evaluated classes (default: free,pedestrian,ground).
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    /// AP thresholds (default 0.25..0.70).
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::invalid("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))
            .and_then(|pool| pool.install(|| run(cli.command))),
        None => run(cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("occukit: error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Format(FormatError::Io { .. }) => 3,
        Error::Format(_) => 4,
        Error::Infeasible(_) => 6,
        Error::InvalidArgument(_) | Error::ShapeMismatch(_) | Error::SpecMismatch | Error::InvalidCamera(_) => 5,
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Fuse(a) => fuse(a),
        Command::Lift(a) => lift(a),
        Command::Detect(a) => detect(a),
        Command::Group(a) => group(a),
        Command::Render(a) => render(a),
        Command::Eval2d(a) => eval2d(a),
        Command::Eval3d(a) => eval3d(a),
        Command::Evalview(a) => evalview(a),
        Command::Report(a) => report(a),
    }
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(FormatError::from)?;
    text.push('\n');
    Ok(io::write_bytes(path, text.as_bytes())?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&io::read_text(path)?).map_err(FormatError::from)?)
}

fn load_scene_config(data: &Path) -> Result<SceneConfig> {
    read_json(&DatasetLayout::new(data).scene())
}

fn gen(a: GenArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => read_json(p)?,
        None => SceneConfig::default(),
    };
    cfg.seed = a.seed;
    if let Some(v) = a.peds {
        cfg.pedestrians = v;
    }
    if let Some(v) = a.others {
        cfg.others = v;
    }
    if let Some(v) = a.cameras {
        cfg.cameras = v;
    }
    if let Some(v) = &a.extent {
        cfg.extent = [v[0], v[1]];
    }
    if let Some(v) = a.width {
        cfg.image_width = v;
    }
    if let Some(v) = a.height {
        cfg.image_height = v;
    }
    if a.frames == 0 {
        return Err(Error::invalid("--frames must be at least 1"));
    }
    cfg.validate()?;
    let layout = DatasetLayout::new(&a.out);
    let cams = cfg.rig()?;
    let spec = cfg.grid_spec()?;
    io::save_calibration(&cams, &layout.calibration())?;
    write_json(&cfg, &layout.scene())?;
    for frame in 0..a.frames {
        let frame_cfg = SceneConfig { seed: cfg.seed.wrapping_add(u64::from(frame)), ..cfg.clone() };
        let prims = sample_scene(&frame_cfg)?;
        for (i, cam) in cams.iter().enumerate() {
            let (w, h) = (cam.intrinsics.width as usize, cam.intrinsics.height as usize);
            let f = render_sensors(cam, &prims, w, h)?;
            io::save_pfm(&f.depth, &layout.depth(frame, i))?;
            io::save_pgm(&f.semantic, &layout.semantic(frame, i))?;
            io::save_pgm(&f.instance, &layout.instance(frame, i))?;
        }
        let vol = voxelize_analytic(&prims, &spec);
        io::save_grid(&vol, &layout.gt_semantic(frame))?;
        io::save_grid(&vol.instance_volume(), &layout.gt_instance(frame))?;
        let locs: Vec<_> = gt_locations(&prims).into_iter().map(|l| (frame, l)).collect();
        io::write_locations(&layout.gt_locations(frame), &locs)?;
    }
    Ok(())
}

fn dataset_frames(layout: &DatasetLayout, only: Option<u32>) -> Result<Vec<u32>> {
    match only {
        Some(f) => Ok(vec![f]),
        None => layout
            .frames()
            .map_err(|source| FormatError::Io { path: layout.root.join("frames"), source }.into()),
    }
}

/// Fuses one frame of a dataset.
pub fn fuse_frame(data: &Path, frame: u32) -> Result<LabelVolume> {
    let layout = DatasetLayout::new(data);
    let cams = io::load_calibration(&layout.calibration())?;
    let spec = load_scene_config(data)?.grid_spec()?;
    let mut views = Vec::with_capacity(cams.len());
    for (i, cam) in cams.iter().enumerate() {
        let depth = io::load_pfm(&layout.depth(frame, i))?;
        let sem = io::load_pgm(&layout.semantic(frame, i))?;
        let inst = io::load_pgm(&layout.instance(frame, i))?;
        views.push(depth_to_points(cam, &depth, &sem, &inst)?);
    }
    Ok(fuse_and_voxelize(&views, &spec, &spec.bounds()))
}

fn fuse(a: FuseArgs) -> Result<()> {
    let layout = DatasetLayout::new(&a.data);
    for frame in dataset_frames(&layout, a.frame)? {
        let vol = fuse_frame(&a.data, frame)?;
        io::save_grid(&vol, &a.out.join(format!("{frame:04}.sem.mvpo")))?;
        io::save_grid(&vol.instance_volume(), &a.out.join(format!("{frame:04}.inst.mvpo")))?;
    }
    Ok(())
}

fn lift(a: LiftArgs) -> Result<()> {
    let cams = io::load_calibration(&DatasetLayout::new(&a.data).calibration())?;
    let spec = load_scene_config(&a.data)?.grid_spec()?;
    let maps = (0..cams.len())
        .map(|i| io::load_feature_map(&a.features.join(format!("cam{i:02}.f32"))))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let vol = lift_features(&cams, &maps, &spec, &LiftConfig { scale: a.scale, strict_view_mean: a.strict_view_mean })?;
    Ok(io::save_feature_volume(&vol, &a.out)?)
}

fn detect(a: DetectArgs) -> Result<()> {
    let mut rows: Vec<(u32, Detection)> = Vec::new();
    if let Some(p) = &a.pocc {
        let map = io::load_bev_map(p)?;
        rows.extend(extract_locations(&map, a.tau, a.nms_radius)?.into_iter().map(|d| (a.frame, d)));
    } else if let (Some(locs), Some(data)) = (&a.locations, &a.data) {
        let grid = BevGrid::from_voxel_spec(&load_scene_config(data)?.grid_spec()?);
        let records = io::read_locations(locs)?;
        let mut frames: Vec<u32> = records.iter().map(|r| r.frame).collect();
        frames.sort_unstable();
        frames.dedup();
        for f in frames {
            let pts: Vec<[f64; 2]> = records.iter().filter(|r| r.frame == f).map(|r| [r.x_m, r.y_m]).collect();
            let map = splat_gaussian(&pts, &grid, a.sigma)?;
            rows.extend(extract_locations(&map, a.tau, a.nms_radius)?.into_iter().map(|d| (f, d)));
        }
    }
    Ok(io::write_detections(&a.out, &rows)?)
}

fn group(a: GroupArgs) -> Result<()> {
    let sem = io::load_grid(&a.sem)?.into_semantic()?;
    let dets: Vec<Detection> =
        io::read_locations(&a.detections)?.iter().filter(|r| r.frame == a.frame).map(|r| r.detection()).collect();
    let inst = group_instances(&sem, &dets, a.radius)?;
    let pan = merge_panoptic(&sem, &inst)?;
    io::save_grid(&pan, &a.out)?;
    if let Some(p) = &a.inst_out {
        io::save_grid(&inst, p)?;
    }
    Ok(())
}

fn semantic_with_instances(sem: LabelVolume, inst: InstanceVolume) -> Result<LabelVolume> {
    if sem.spec != inst.spec {
        return Err(Error::SpecMismatch);
    }
    let ids = sem.labels.iter().zip(inst.ids).map(|(&l, id)| if l == SemanticClass::Pedestrian { id } else { 0 }).collect();
    LabelVolume::from_parts(sem.spec, sem.labels, ids)
}

fn render(a: RenderArgs) -> Result<()> {
    let cams = io::load_calibration(&DatasetLayout::new(&a.data).calibration())?;
    let params = RayMarchParams { max_steps: a.max_steps, min_hit_distance: a.min_hit, max_trace_distance: a.max_trace };
    params.validate()?;
    let vol: PanopticOrGrid = match (&a.grid, &a.sem, &a.inst) {
        (Some(g), _, _) => PanopticOrGrid::Grid(io::load_grid(g)?),
        (None, Some(s), Some(i)) => {
            let sem = io::load_grid(s)?.into_semantic()?;
            let inst = io::load_grid(i)?.into_instance()?;
            PanopticOrGrid::Panoptic(semantic_with_instances(sem, inst)?.panoptic())
        }
        _ => return Err(Error::invalid("render needs --grid or --sem with --inst")),
    };
    for (i, cam) in cams.iter().enumerate() {
        let w = a.width.unwrap_or(cam.intrinsics.width) as usize;
        let h = a.height.unwrap_or(cam.intrinsics.height) as usize;
        let img = match &vol {
            PanopticOrGrid::Panoptic(p) | PanopticOrGrid::Grid(Grid::Panoptic(p)) => render_view(cam, p, &params, w, h)?,
            PanopticOrGrid::Grid(Grid::Semantic(s)) => render_view(cam, s, &params, w, h)?,
            PanopticOrGrid::Grid(Grid::Instance(s)) => render_view(cam, s, &params, w, h)?,
        };
        io::save_pgm(&img, &a.out.join(format!("cam{i:02}.pgm")))?;
    }
    Ok(())
}

enum PanopticOrGrid {
    Panoptic(PanopticVolume),
    Grid(Grid),
}

fn eval2d(a: Eval2dArgs) -> Result<()> {
    let pred = io::read_locations(&a.pred)?;
    let gt = io::read_locations(&a.gt)?;
    let mut frames: Vec<u32> = pred.iter().chain(&gt).map(|r| r.frame).collect();
    frames.sort_unstable();
    frames.dedup();
    let mut counts = DetectionCounts::default();
    for f in frames {
        let p: Vec<[f64; 2]> = pred.iter().filter(|r| r.frame == f).map(|r| [r.x_m, r.y_m]).collect();
        let g: Vec<[f64; 2]> = gt.iter().filter(|r| r.frame == f).map(|r| [r.x_m, r.y_m]).collect();
        counts += match_detections(&p, &g, a.threshold)?.counts();
    }
    let mut report = MetricReport::default();
    report.set_detection(&counts.scores());
    write_json(&report, &a.out)
}

/// Semantic labels plus instance ids from a grid file, with an optional
/// separate instance grid.
fn load_labeled(path: &Path, inst: Option<&PathBuf>) -> Result<(LabelVolume, bool)> {
    match io::load_grid(path)? {
        Grid::Panoptic(p) => Ok((p.to_label_volume(), true)),
        Grid::Semantic(s) => match inst {
            Some(i) => Ok((semantic_with_instances(s, io::load_grid(i)?.into_instance()?)?, true)),
            None => Ok((s, false)),
        },
        Grid::Instance(_) => Err(FormatError::KindMismatch { expected: "semantic or panoptic", found: "instance" }.into()),
    }
}

fn eval3d(a: Eval3dArgs) -> Result<()> {
    let (pred, pred_inst) = load_labeled(&a.pred, a.pred_inst.as_ref())?;
    let (gt, gt_inst) = load_labeled(&a.gt, a.gt_inst.as_ref())?;
    let mut report = MetricReport::default();
    report.set_semantic(&semantic_iou(&pred, &gt, &SemanticClass::ALL)?);
    if pred_inst && gt_inst {
        let t = a.thresholds.unwrap_or_else(volume_ap_thresholds);
        report.set_instance(&instance_ap_codes(&pred.instances, &gt.instances, &t)?);
        report.set_panoptic(&panoptic_quality(&pred.panoptic(), &gt.panoptic())?);
    }
    write_json(&report, &a.out)
}

/// Panoptic mask split into semantic and instance masks.
fn split_panoptic(img: crate::image::LabelImage) -> Result<ViewMasks> {
    let mut sem = Vec::with_capacity(img.data.len());
    let mut inst = Vec::with_capacity(img.data.len());
    for &c in &img.data {
        let (class, id) = decode_panoptic(c).ok_or_else(|| Error::invalid(format!("mask holds non-panoptic code {c}")))?;
        sem.push(class as u32);
        inst.push(id);
    }
    Ok(ViewMasks {
        semantic: crate::image::LabelImage::from_data(img.width, img.height, sem)?,
        instance: crate::image::LabelImage::from_data(img.width, img.height, inst)?,
    })
}

fn mask_names(dir: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|source| FormatError::Io { path: dir.to_path_buf(), source })?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.ends_with(".pgm"))
        .collect();
    names.sort();
    Ok(names)
}

fn evalview(a: EvalViewArgs) -> Result<()> {
    let classes = match &a.classes {
        None => vec![SemanticClass::Free, SemanticClass::Pedestrian, SemanticClass::Ground],
        Some(names) => names
            .iter()
            .map(|n| SemanticClass::from_name(n).ok_or_else(|| Error::invalid(format!("unknown class {n:?}"))))
            .collect::<Result<_>>()?,
    };
    let thresholds = a.thresholds.clone().unwrap_or_else(view_ap_thresholds);
    let names = mask_names(&a.gt)?;
    if names.is_empty() {
        return Err(Error::invalid(format!("no .pgm masks in {}", a.gt.display())));
    }
    let mut pred = Vec::new();
    let mut gt = Vec::new();
    for n in &names {
        gt.push(split_panoptic(io::load_pgm(&a.gt.join(n))?)?);
        pred.push(split_panoptic(io::load_pgm(&a.pred.join(n))?)?);
    }
    write_json(&view_level_report(&pred, &gt, &classes, &thresholds)?, &a.out)
}

fn report(a: ReportArgs) -> Result<()> {
    let mut out = MetricReport::default();
    for p in &a.inputs {
        out.merge(&read_json(p)?);
    }
    write_json(&out, &a.out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors() {
        assert_eq!(main_with_args(["occukit", "frobnicate"]), 2);
        assert_eq!(main_with_args(["occukit", "eval2d", "--pred", "x.csv"]), 2);
        assert_eq!(main_with_args(["occukit", "--help"]), 0);
    }

    #[test]
    fn missing_input() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.json");
        let code = main_with_args([
            "occukit".as_ref(),
            "eval2d".as_ref(),
            "--pred".as_ref(),
            dir.path().join("none.csv").as_os_str(),
            "--gt".as_ref(),
            dir.path().join("none.csv").as_os_str(),
            "--out".as_ref(),
            out.as_os_str(),
        ]);
        assert_eq!(code, 3);
    }

    #[test]
    fn bad_threshold_is_precondition_error() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("a.csv");
        std::fs::write(&csv, "frame,x_m,y_m\n0,1,1\n").unwrap();
        let out = dir.path().join("r.json");
        let args: Vec<OsString> = ["occukit", "eval2d", "--threshold=-1", "--pred"]
            .iter()
            .map(OsString::from)
            .chain([csv.clone().into(), "--gt".into(), csv.into(), "--out".into(), out.into()])
            .collect();
        assert_eq!(main_with_args(args), 5);
    }
}
