//! Batch front door: dataset ingestion, pipeline execution, phantom
//! generation, metric aggregation and manifest inspection.
//!
//! Exit codes: 0 success, 2 exclusion verdicts present, 3 invalid input,
//! 4 internal error.

use clap::{Parser, Subcommand, ValueEnum};
use condylar_core::config::{PipelineConfig, PointChoice};
use condylar_core::error::Error;
use condylar_core::manifest::{self, DatasetManifest, SliceBlock};
use condylar_core::metrics::{quality_report, summarize_report, SubjectQuality};
use condylar_core::phantom::{Phantom, PhantomDataset, PhantomSpec};
use condylar_core::pipeline::{run_pipeline, PipelineOutput};
use condylar_core::report;
use condylar_core::types::{PerSide, Side};
use condylar_core::SliceGeometry;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "condylar", version, about = "Condylar trajectory reconstruction from real-time MRI slice masks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PointArg {
    Iscom,
    Top,
}

#[derive(Clone, Copy, ValueEnum)]
enum MaskFormat {
    Rle,
    Pgm,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline on one or more dataset manifests
    Run {
        /// Dataset manifest file(s), one per subject
        #[arg(long, required = true, num_args = 1..)]
        manifest: Vec<PathBuf>,
        /// Pipeline configuration TOML; defaults apply when absent
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Skip the sagittal series and emit 2D axial trajectories
        #[arg(long)]
        axial_only: bool,
        /// Condyle point feeding the k channel
        #[arg(long, value_enum)]
        point: Option<PointArg>,
        /// Worker threads for multi-subject runs
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Generate a synthetic ground-truth dataset
    Phantom {
        /// Phantom spec TOML; defaults apply when absent
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output dataset directory
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's random seed
        #[arg(long)]
        seed: Option<u64>,
        /// Mask storage: inline run-length records or PGM files
        #[arg(long, value_enum, default_value = "rle")]
        format: MaskFormat,
    },
    /// Merge quality reports from previous run output directories
    Metrics {
        /// Output directories of previous runs
        #[arg(required = true)]
        outputs: Vec<PathBuf>,
        /// Directory for the merged report; stdout only when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a manifest and print its structure
    Inspect {
        #[arg(long)]
        manifest: PathBuf,
    },
}

const EXIT_OK: u8 = 0;
const EXIT_EXCLUSIONS: u8 = 2;
const EXIT_INVALID_INPUT: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

fn classify(error: &Error) -> u8 {
    match error {
        Error::Io(_) => EXIT_INVALID_INPUT,
        e if e.is_input_error() => EXIT_INVALID_INPUT,
        // Data-dependent failures (coverage, degenerate geometry, missing
        // motion) come from the input recordings, not from the tool.
        Error::Coverage(_)
        | Error::DegenerateGeometry(_)
        | Error::DegenerateAmplitude(_)
        | Error::EmptyMask
        | Error::InsufficientMask { .. }
        | Error::NoMotion
        | Error::NoFullCycle => EXIT_INVALID_INPUT,
        _ => EXIT_INTERNAL,
    }
}

fn main() -> ExitCode {
    // Clap's default error exit code (2) is reserved for exclusion verdicts.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_INVALID_INPUT);
        }
    };
    let result = match cli.command {
        Command::Run {
            manifest,
            config,
            out,
            axial_only,
            point,
            workers,
        } => cmd_run(&manifest, config.as_deref(), &out, axial_only, point, workers),
        Command::Phantom {
            spec,
            out,
            seed,
            format,
        } => cmd_phantom(spec.as_deref(), &out, seed, format),
        Command::Metrics { outputs, out } => cmd_metrics(&outputs, out.as_deref()),
        Command::Inspect { manifest } => cmd_inspect(&manifest),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(classify(&e))
        }
    }
}

fn effective_config(
    config_path: Option<&Path>,
    point: Option<PointArg>,
) -> Result<PipelineConfig, Error> {
    let mut config = match config_path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    config.apply_env(std::env::vars())?;
    if let Some(p) = point {
        config.point = match p {
            PointArg::Iscom => PointChoice::IsCom,
            PointArg::Top => PointChoice::Top,
        };
    }
    Ok(config)
}

fn write_subject_outputs(
    dir: &Path,
    output: &PipelineOutput,
    header: &str,
) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    if let Some(trajs) = &output.trajectories {
        let text = report::trajectory_csv(&[&trajs.left, &trajs.right], header);
        std::fs::write(dir.join("trajectory.csv"), text)?;
    }
    std::fs::write(
        dir.join("phases.csv"),
        report::phases_csv(&output.phases, header),
    )?;
    if let Some(warp) = &output.warp {
        std::fs::write(dir.join("warp.csv"), report::warp_csv(warp, header))?;
    }
    if let Some(t) = &output.axial_transform {
        std::fs::write(dir.join("transforms.csv"), report::transforms_csv(t, header))?;
    }
    std::fs::write(
        dir.join("quality.csv"),
        report::quality_csv(std::slice::from_ref(&output.quality), header),
    )?;
    Ok(())
}

fn cmd_run(
    manifests: &[PathBuf],
    config_path: Option<&Path>,
    out: &Path,
    axial_only: bool,
    point: Option<PointArg>,
    workers: usize,
) -> Result<u8, Error> {
    if workers == 0 {
        return Err(Error::InvalidArgument("--workers must be at least 1".into()));
    }
    let config = effective_config(config_path, point)?;
    let header = report::header_line(&config);
    std::fs::create_dir_all(out)?;

    let process = |path: &PathBuf| -> Result<PipelineOutput, Error> {
        let manifest = DatasetManifest::load(path)?;
        let data = manifest::load_dataset(&manifest, path)?;
        let output = run_pipeline(&data, &config, axial_only)?;
        write_subject_outputs(&out.join(&output.subject), &output, &header)?;
        Ok(output)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let results: Vec<Result<PipelineOutput, Error>> = pool.install(|| {
        use rayon::prelude::*;
        manifests.par_iter().map(process).collect()
    });
    let mut outputs = Vec::with_capacity(results.len());
    for r in results {
        outputs.push(r?);
    }
    {
        let mut subjects: Vec<&str> = outputs.iter().map(|o| o.subject.as_str()).collect();
        subjects.sort_unstable();
        subjects.dedup();
        if subjects.len() != outputs.len() {
            return Err(Error::Manifest("duplicate subject ids across manifests".into()));
        }
    }
    let rows = quality_report(outputs.iter().map(|o| o.quality.clone()).collect());
    std::fs::write(out.join("quality.csv"), report::quality_csv(&rows, &header))?;
    std::fs::write(
        out.join("summary.csv"),
        report::summary_csv(&summarize_report(&rows), &header),
    )?;
    let excluded = outputs.iter().filter(|o| o.exclusion.is_some()).count();
    for o in &outputs {
        match o.exclusion {
            Some(reason) => println!("{}: excluded: {reason}", o.subject),
            None => println!("{}: ok", o.subject),
        }
    }
    Ok(if excluded > 0 { EXIT_EXCLUSIONS } else { EXIT_OK })
}

fn geometry_block(geom: &SliceGeometry, times: &[f64]) -> SliceBlock {
    SliceBlock {
        origin: [geom.origin.x, geom.origin.y, geom.origin.z],
        row_dir: [geom.row_dir.x, geom.row_dir.y, geom.row_dir.z],
        col_dir: [geom.col_dir.x, geom.col_dir.y, geom.col_dir.z],
        pixel_spacing: [geom.pixel_spacing.0, geom.pixel_spacing.1],
        rows: geom.rows,
        cols: geom.cols,
        thickness: geom.thickness,
        frame_period: geom.frame_period,
        timestamps: Some(times.to_vec()),
        ..Default::default()
    }
}

fn attach_masks(
    block: &mut SliceBlock,
    masks: &PerSide<Option<&Vec<condylar_core::FrameMask>>>,
    format: MaskFormat,
    dir: &Path,
    slice_name: &str,
) -> Result<(), Error> {
    for side in Side::BOTH {
        let Some(frames) = masks.get(side) else {
            continue;
        };
        match format {
            MaskFormat::Rle => {
                let runs: Vec<Vec<u32>> = frames.iter().map(manifest::rle_encode).collect();
                match side {
                    Side::Left => block.rle_left = Some(runs),
                    Side::Right => block.rle_right = Some(runs),
                }
            }
            MaskFormat::Pgm => {
                let sub = dir.join(slice_name);
                std::fs::create_dir_all(&sub)?;
                let mut files = Vec::with_capacity(frames.len());
                for (f, m) in frames.iter().enumerate() {
                    let name = format!("{slice_name}/{side}_{f:04}.pgm");
                    manifest::write_pgm(&dir.join(&name), m)?;
                    files.push(name);
                }
                match side {
                    Side::Left => block.masks_left = Some(files),
                    Side::Right => block.masks_right = Some(files),
                }
            }
        }
    }
    Ok(())
}

fn write_phantom_dataset(
    dir: &Path,
    phantom: &Phantom,
    dataset: &PhantomDataset,
    format: MaskFormat,
) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let mut axial = geometry_block(&dataset.axial_geom, &dataset.axial_times);
    attach_masks(
        &mut axial,
        &PerSide::new(
            Some(&dataset.axial_masks.left),
            Some(&dataset.axial_masks.right),
        ),
        format,
        dir,
        "axial",
    )?;
    let mut sagittal_left = geometry_block(&dataset.sagittal_geoms.left, &dataset.sagittal_times);
    attach_masks(
        &mut sagittal_left,
        &PerSide::new(Some(&dataset.sagittal_masks.left), None),
        format,
        dir,
        "sagittal_left",
    )?;
    let mut sagittal_right =
        geometry_block(&dataset.sagittal_geoms.right, &dataset.sagittal_times);
    attach_masks(
        &mut sagittal_right,
        &PerSide::new(None, Some(&dataset.sagittal_masks.right)),
        format,
        dir,
        "sagittal_right",
    )?;
    let manifest = DatasetManifest {
        subject: format!("phantom-{:04}", phantom.spec.seed),
        closed_frame: None,
        axial: Some(axial),
        sagittal_left: Some(sagittal_left),
        sagittal_right: Some(sagittal_right),
    };
    manifest.save(&dir.join("manifest.toml"))?;
    let spec_text = toml::to_string_pretty(&phantom.spec)
        .map_err(|e| Error::Manifest(format!("spec serialization: {e}")))?;
    std::fs::write(dir.join("spec.toml"), spec_text)?;
    let header = format!("# condylar {} seed={}", env!("CARGO_PKG_VERSION"), phantom.spec.seed);
    std::fs::write(
        dir.join("truth.csv"),
        report::truth_csv(&dataset.truth, &header),
    )?;
    Ok(())
}

fn cmd_phantom(
    spec_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    format: MaskFormat,
) -> Result<u8, Error> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str::<PhantomSpec>(&text).map_err(|e| Error::Parse {
                file: p.display().to_string(),
                message: e.to_string(),
            })?
        }
        None => PhantomSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let phantom = Phantom::new(spec)?;
    let dataset = phantom.render()?;
    write_phantom_dataset(out, &phantom, &dataset, format)?;
    println!("phantom dataset written to {}", out.display());
    Ok(EXIT_OK)
}

fn cmd_metrics(outputs: &[PathBuf], out: Option<&Path>) -> Result<u8, Error> {
    let mut rows: Vec<SubjectQuality> = Vec::new();
    for dir in outputs {
        let path = dir.join("quality.csv");
        let text = std::fs::read_to_string(&path)?;
        rows.extend(report::parse_quality_csv(&text, &path.display().to_string())?);
    }
    let rows = quality_report(rows);
    let config = effective_config(None, None)?;
    let header = report::header_line(&config);
    let quality = report::quality_csv(&rows, &header);
    let summary = report::summary_csv(&summarize_report(&rows), &header);
    print!("{quality}");
    print!("{summary}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("quality.csv"), &quality)?;
        std::fs::write(dir.join("summary.csv"), &summary)?;
    }
    let excluded = rows.iter().any(|r| r.exclusion.is_some());
    Ok(if excluded { EXIT_EXCLUSIONS } else { EXIT_OK })
}

fn describe_slice(name: &str, block: &Option<SliceBlock>) {
    match block {
        None => println!("{name}: absent"),
        Some(b) => {
            let frames = b
                .masks_left
                .as_ref()
                .map(Vec::len)
                .or_else(|| b.rle_left.as_ref().map(Vec::len))
                .or_else(|| b.masks_right.as_ref().map(Vec::len))
                .or_else(|| b.rle_right.as_ref().map(Vec::len))
                .unwrap_or(0);
            println!(
                "{name}: {}x{} px, {:.4} mm/px, thickness {} mm, {} frames, masks left: {}, right: {}",
                b.rows,
                b.cols,
                b.pixel_spacing[0],
                b.thickness,
                frames,
                b.masks_left.is_some() || b.rle_left.is_some(),
                b.masks_right.is_some() || b.rle_right.is_some(),
            );
        }
    }
}

fn cmd_inspect(path: &Path) -> Result<u8, Error> {
    let m = DatasetManifest::load(path)?;
    println!("subject: {}", m.subject);
    describe_slice("axial", &m.axial);
    describe_slice("sagittal_left", &m.sagittal_left);
    describe_slice("sagittal_right", &m.sagittal_right);
    let data = manifest::load_dataset(&m, path)?;
    let full = data.sagittal.left.is_some() && data.sagittal.right.is_some();
    println!(
        "valid: {} ({} axial frames, {} mode)",
        data.subject,
        data.axial.times.len(),
        if full { "3d" } else { "axial-only" }
    );
    Ok(EXIT_OK)
}
