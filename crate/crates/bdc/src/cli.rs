//! Command-line front end.
//!
//! Exit status: 0 on success, 1 for usage, validation and parse errors,
//! 2 for I/O errors. Tables and summaries go to stdout, diagnostics to stderr.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bdc_core::report::{
    localization_histogram, loss_delta_report, run_summary, validate_edges, DEFAULT_AGGREGATES,
    DEFAULT_EDGES,
};
use bdc_core::synth::{emit_detections, generate_dataset, perturb, PerturbSpec, SynthSpec};
use bdc_core::{align, compute_adc, AnnotationSet, CalibrationConfig, DetectionSet, Rounding};
use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::export::{histogram_table, mbp_json, mbp_tsv, CalibrationReport, LossSection};
use crate::formats::{
    read_detections, read_wider_gt, save_wider_gt, write_detections_dir, write_detections_text,
    write_file, DetectionsFormat,
};
use crate::pipeline;

#[derive(Debug, Parser)]
#[command(name = "bdc", version, about = "Calibrate misaligned face annotations with confident detector boxes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replace misaligned annotation boxes and write a calibrated ground-truth file.
    Calibrate(CalibrateArgs),
    /// Localization-accuracy histogram of high-confidence detections.
    Stats(StatsArgs),
    /// Average detection confidence of a detection set.
    Adc(AdcArgs),
    /// Write a seeded synthetic dataset, detections and perturbation ledger.
    Synth(SynthArgs),
    /// List boxes that differ between two annotation files.
    Diff(DiffArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Ground-truth annotation file.
    #[arg(long)]
    pub gt: PathBuf,
    /// Detection directory or consolidated detection file.
    #[arg(long)]
    pub dets: PathBuf,
    #[arg(long, value_enum, default_value_t = DetectionsFormat::Auto)]
    pub dets_format: DetectionsFormat,
    /// Image extension substituted for `.txt` when keying detection files.
    #[arg(long, default_value = "jpg")]
    pub image_ext: String,
}

impl InputArgs {
    fn load(&self) -> Result<(AnnotationSet, DetectionSet)> {
        let anns = read_wider_gt(&self.gt)?;
        let dets = read_detections(&self.dets, self.dets_format, &self.image_ext)?;
        Ok((anns, dets))
    }
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Calibrated annotation file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Matching threshold.
    #[arg(long, default_value_t = bdc_core::calibrate::DEFAULT_T_M)]
    pub tm: f64,
    /// Calibration threshold.
    #[arg(long, default_value_t = bdc_core::calibrate::DEFAULT_T_C)]
    pub tc: f64,
    /// Fixed confidence threshold instead of the computed average.
    #[arg(long)]
    pub adc: Option<f64>,
    /// Round non-integral output coordinates to integers.
    #[arg(long)]
    pub round_int: bool,
    /// Let annotations flagged invalid take part in matching.
    #[arg(long, action = clap::ArgAction::Set, default_value_t = true)]
    pub include_invalid: bool,
    /// Structured JSON report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Replacement listing; `.json` selects JSON, anything else tab-separated.
    #[arg(long)]
    pub mbp_export: Option<PathBuf>,
    /// Worker threads; output does not depend on this.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: u16,
    /// Predictor name recorded in the summary.
    #[arg(long, default_value = "unknown")]
    pub predictor: String,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Fixed confidence threshold instead of the computed average.
    #[arg(long)]
    pub adc: Option<f64>,
    /// Strictly increasing bin edges within [0, 1].
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_EDGES.to_vec())]
    pub edges: Vec<f64>,
    /// Write the histogram as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdcArgs {
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub images: usize,
    /// Faces per image as `MIN,MAX`.
    #[arg(long, value_parser = parse_pair::<usize>, default_value = "1,5")]
    pub faces: (usize, usize),
    #[arg(long, value_parser = parse_pair::<u32>, default_value = "1024,768")]
    pub image_size: (u32, u32),
    #[arg(long, value_parser = parse_pair::<u32>, default_value = "16,96")]
    pub box_size: (u32, u32),
    /// Keep faces far enough apart that perturbed boxes never touch another face.
    #[arg(long)]
    pub separated: bool,
    /// Share of faces to misalign.
    #[arg(long, default_value_t = 0.3)]
    pub fraction: f64,
    /// Target IoU range of misaligned faces as `LO,HI`.
    #[arg(long, value_parser = parse_pair::<f64>, default_value = "0.55,0.75")]
    pub iou: (f64, f64),
    #[arg(long, default_value_t = 1.0)]
    pub detect_fraction: f64,
    #[arg(long, value_parser = parse_pair::<f64>, default_value = "0.9,1.0")]
    pub aligned_score: (f64, f64),
    #[arg(long, value_parser = parse_pair::<usize>, default_value = "0,0")]
    pub distractors: (usize, usize),
    #[arg(long, value_parser = parse_pair::<f64>, default_value = "0.0,0.2")]
    pub distractor_score: (f64, f64),
    /// Detection layout to write.
    #[arg(long, value_enum, default_value_t = DetectionsFormat::Dir)]
    pub dets_format: DetectionsFormat,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    pub before: PathBuf,
    pub after: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = e.print();
                    1
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Calibrate(a) => run_calibrate(a, out),
        Command::Stats(a) => run_stats(a, out),
        Command::Adc(a) => run_adc(a, out),
        Command::Synth(a) => run_synth(a, out),
        Command::Diff(a) => run_diff(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

pub fn run_calibrate(a: &CalibrateArgs, out: &mut dyn Write) -> Result<()> {
    let start = Instant::now();
    let cfg = CalibrationConfig {
        t_m: a.tm,
        t_c: a.tc,
        adc_override: a.adc,
        rounding: if a.round_int { Rounding::Integer } else { Rounding::TwoDecimals },
        include_invalid: a.include_invalid,
    };
    cfg.validate().map_err(|e| Error::invalid(e.to_string()))?;
    let (anns, dets) = a.input.load()?;
    let threads = a.threads as usize;
    let result = pipeline::calibrate_dataset(&anns, &dets, &cfg, threads)?;
    save_wider_gt(&a.out, &result.calibrated, cfg.rounding)?;

    let mut summary = run_summary(&a.predictor, &result, &cfg);
    summary.wall_time = start.elapsed().as_secs_f64();

    if let Some(path) = &a.report {
        let alignment = align(&anns, &dets);
        let histogram = localization_histogram(
            &alignment.pairs,
            result.effective_adc,
            &DEFAULT_EDGES,
            &DEFAULT_AGGREGATES,
        )
        .expect("default edges are valid");
        let losses = loss_delta_report(&result.mbps);
        let report = CalibrationReport {
            summary: &summary,
            calibrate_time: result.wall_time,
            histogram: &histogram,
            loss: LossSection::new(&losses),
        };
        write_file(path, report.to_json().as_bytes())?;
    }
    if let Some(path) = &a.mbp_export {
        let body = if path.extension().is_some_and(|e| e == "json") {
            mbp_json(&result.mbps)
        } else {
            mbp_tsv(&result.mbps)
        };
        write_file(path, body.as_bytes())?;
    }
    emit(out, &format!("{summary}\n"))
}

fn aggregates_for(edges: &[f64]) -> Vec<(f64, f64)> {
    DEFAULT_AGGREGATES
        .iter()
        .copied()
        .filter(|(lo, hi)| edges.contains(lo) && edges.contains(hi))
        .collect()
}

pub fn run_stats(a: &StatsArgs, out: &mut dyn Write) -> Result<()> {
    validate_edges(&a.edges).map_err(|e| Error::invalid(e.to_string()))?;
    let (anns, dets) = a.input.load()?;
    let alignment = align(&anns, &dets);
    let adc = match a.adc {
        Some(v) => v,
        None => compute_adc(&alignment.pairs).value,
    };
    let hist = localization_histogram(&alignment.pairs, adc, &a.edges, &aggregates_for(&a.edges))
        .map_err(|e| Error::invalid(e.to_string()))?;
    if let Some(path) = &a.out {
        let body = serde_json::to_string_pretty(&hist).expect("histogram serializes") + "\n";
        write_file(path, body.as_bytes())?;
    }
    emit(out, &format!("adc\t{adc:.6}\n{}", histogram_table(&hist)))
}

pub fn run_adc(a: &AdcArgs, out: &mut dyn Write) -> Result<()> {
    let (anns, dets) = a.input.load()?;
    let r = compute_adc(&align(&anns, &dets).pairs);
    emit(
        out,
        &format!(
            "adc\t{:.6}\nnumerator\t{:.6}\ndenominator\t{}\nimages_used\t{}\nshortfall_images\t{}\n",
            r.value, r.numerator, r.denominator, r.images_used, r.shortfall_images
        ),
    )
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> std::result::Result<(T, T), String>
where
    T::Err: std::fmt::Display,
{
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `A,B`, found `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<T>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

pub fn run_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let spec = SynthSpec {
        seed: a.seed,
        n_images: a.images,
        faces_per_image: a.faces,
        image_size: a.image_size,
        box_size: a.box_size,
        separated: a.separated,
        detect_fraction: a.detect_fraction,
        aligned_score: a.aligned_score,
        distractors_per_image: a.distractors,
        distractor_score: a.distractor_score,
    };
    let (lo, hi) = a.iou;
    if !(lo > 0.0 && lo <= hi && hi < 1.0) {
        return Err(Error::invalid("--iou requires 0 < LO <= HI < 1"));
    }
    if !(0.0..=1.0).contains(&a.fraction) {
        return Err(Error::invalid("--fraction must lie within [0, 1]"));
    }
    let truth = generate_dataset(&spec).map_err(|e| Error::invalid(e.to_string()))?;
    let (perturbed, ledger) = perturb(
        &truth,
        &PerturbSpec {
            seed: a.seed,
            fraction: a.fraction,
            iou_range: (lo, hi),
            image_width: spec.image_size.0 as f64,
        },
    );
    let dets = emit_detections(&truth, &spec);

    save_wider_gt(&a.out.join("truth.txt"), &truth, Rounding::TwoDecimals)?;
    save_wider_gt(&a.out.join("gt.txt"), &perturbed, Rounding::TwoDecimals)?;
    match a.dets_format {
        DetectionsFormat::File => {
            write_file(&a.out.join("dets.txt"), write_detections_text(&dets).as_bytes())?
        }
        _ => write_detections_dir(&dets, &a.out.join("dets"))?,
    }
    let mut l = String::from("image\tann_index\ttrue_x\ttrue_y\ttrue_w\ttrue_h\tperturbed_x\tperturbed_y\tperturbed_w\tperturbed_h\tachieved_iou\n");
    for e in &ledger {
        let (t, p) = (&e.true_box, &e.perturbed_box);
        let _ = writeln!(
            l,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.image, e.ann_index, t.x, t.y, t.w, t.h, p.x, p.y, p.w, p.h, e.achieved_iou
        );
    }
    write_file(&a.out.join("ledger.tsv"), l.as_bytes())?;
    emit(
        out,
        &format!(
            "wrote {} images, {} faces, {} detections, {} perturbed to {}\n",
            truth.images.len(),
            truth.face_count(),
            dets.detection_count(),
            ledger.len(),
            a.out.display()
        ),
    )
}

fn box_str(b: &bdc_core::BBox) -> String {
    format!("{},{},{},{}", b.x, b.y, b.w, b.h)
}

pub fn run_diff(a: &DiffArgs, out: &mut dyn Write) -> Result<()> {
    let before = read_wider_gt(&a.before)?;
    let after = read_wider_gt(&a.after)?;
    let text = diff_sets(&before, &after, &a.before, &a.after)?;
    emit(out, &text)
}

/// Lists changed boxes as `image<TAB>index<TAB>old<TAB>new`, then a count line.
pub fn diff_sets(before: &AnnotationSet, after: &AnnotationSet, a: &Path, b: &Path) -> Result<String> {
    if before.images.len() != after.images.len() {
        return Err(Error::invalid(format!(
            "{} has {} images, {} has {}",
            a.display(),
            before.images.len(),
            b.display(),
            after.images.len()
        )));
    }
    let mut text = String::new();
    let mut changes = 0usize;
    for (x, y) in before.images.iter().zip(&after.images) {
        if x.path != y.path || x.faces.len() != y.faces.len() {
            return Err(Error::invalid(format!(
                "structure differs at `{}` ({} faces) vs `{}` ({} faces)",
                x.path,
                x.faces.len(),
                y.path,
                y.faces.len()
            )));
        }
        for (k, (f, g)) in x.faces.iter().zip(&y.faces).enumerate() {
            if f.bbox != g.bbox {
                changes += 1;
                let _ = writeln!(text, "{}\t{}\t{}\t{}", x.path, k, box_str(&f.bbox), box_str(&g.bbox));
            }
        }
    }
    let _ = writeln!(text, "{changes} changes");
    Ok(text)
}
