//! One function per subcommand. Each returns a JSON summary for stdout.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use geoscale::audio::{apply_channel_filter, cepstra, fit_pca, load_wav, project, stft, PcaModel, Spectrogram};
use geoscale::chart::{rescale_trajectory, trace_isoclines, Exclusion, Isocline, ScaleChart};
use geoscale::harness::{apply_transform, build_chart, compare_representations, generate_synthetic, ChartRecipe};
use geoscale::harness::{SyntheticSpec, TransformSpec};
use geoscale::io::isoclines_to_csv;
use geoscale::{Execution, FeatureTrajectory};

use crate::config::PipelineConfig;
use crate::error::{CliError, Kind};
use crate::files::{check_distinct, read_json, read_trajectory, sibling, write_atomic, write_json, write_trajectory};
use crate::svg::{ticks, Figure, Heatmap, Polyline};

/// Sidecar written next to every rescaled trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RescaleMeta {
    /// Times the chart's reference point and vectors were read at.
    pub source_times: Option<Vec<f64>>,
    pub input_samples: usize,
    pub exclusions: Vec<Exclusion>,
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn file_label(p: &Path) -> String {
    p.file_stem().map_or_else(|| path_str(p), |s| s.to_string_lossy().into_owned())
}

/// Plot points with a NaN break wherever the time step exceeds 1.5 times
/// the median step, so dropped samples show as gaps.
fn with_gaps(traj: &FeatureTrajectory, point: impl Fn(f64, &[f64]) -> [f64; 2]) -> Vec<[f64; 2]> {
    let t = traj.times();
    let mut steps: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    steps.sort_by(f64::total_cmp);
    let limit = steps.get(steps.len() / 2).map_or(f64::INFINITY, |m| 1.5 * m);
    let mut out = Vec::with_capacity(t.len());
    for (i, p) in traj.points().enumerate() {
        if i > 0 && t[i] - t[i - 1] > limit {
            out.push([f64::NAN; 2]);
        }
        out.push(point(t[i], p));
    }
    out
}

fn trajectory_figure(traj: &FeatureTrajectory, title: &str, prefix: &str) -> Figure {
    let mut fig;
    let points = if traj.dim() >= 2 {
        fig = Figure::new(title, &format!("{prefix}1"), &format!("{prefix}2"));
        with_gaps(traj, |_, p| [p[0], p[1]])
    } else {
        fig = Figure::new(title, "t (s)", &format!("{prefix}1"));
        with_gaps(traj, |t, p| [t, p[0]])
    };
    fig.lines.push(Polyline::new(points, 0));
    fig
}

/// Log-magnitude spectrogram over a 60 dB range, averaged down to at most
/// 400 columns.
fn spectrogram_figure(spec: &Spectrogram, title: &str) -> Figure {
    const COLUMNS: usize = 400;
    const RANGE_DB: f64 = 60.0;
    let n = spec.n_frames();
    let cols = n.min(COLUMNS);
    let bins = spec.n_bins();
    let mut db = vec![vec![0.0; cols]; bins];
    for c in 0..cols {
        let (a, b) = (c * n / cols, ((c + 1) * n / cols).max(c * n / cols + 1));
        for (bin, row) in db.iter_mut().enumerate() {
            let mean = (a..b).map(|i| spec.frame(i)[bin]).sum::<f64>() / (b - a) as f64;
            row[c] = 20.0 * (mean + 1e-12).log10();
        }
    }
    let top = db.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in db.iter_mut().flatten() {
        *v = (*v - (top - RANGE_DB)) / RANGE_DB;
    }
    let mut fig = Figure::new(title, "t (s)", "frequency (Hz)");
    fig.heatmap = Some(Heatmap {
        values: db,
        x_range: (spec.frame_center(0), spec.frame_center(n - 1)),
        y_range: (0.0, spec.max_frequency()),
    });
    fig
}

pub fn features(
    wav: &Path,
    config: Option<&Path>,
    filter: bool,
    pca_model: Option<&Path>,
    plot: bool,
    out: &Path,
) -> Result<Value, CliError> {
    let cfg = PipelineConfig::load(config)?;
    let pca_path = sibling(out, ".pca.json");
    let mut inputs = vec![wav];
    inputs.extend(pca_model);
    check_distinct(out, &inputs)?;
    check_distinct(&pca_path, &inputs)?;

    let clip = load_wav(wav)?;
    let raw = stft(&clip, &cfg.cepstra)?;
    let spec = if filter { apply_channel_filter(&raw, &cfg.channel_filter)? } else { raw };
    let ceps = cepstra(&spec, &cfg.cepstra)?;
    let model = match pca_model {
        Some(p) => {
            let m: PcaModel = read_json(p)?;
            if m.input_dim() != ceps.dim() {
                return Err(CliError::validation("PCA model does not match the cepstral dimension")
                    .with("model_dim", m.input_dim())
                    .with("cepstra_dim", ceps.dim()));
            }
            m
        }
        None => fit_pca(&ceps, cfg.pca_components)?,
    };
    let x = project(&ceps, &model)?;

    write_trajectory(out, &x, "x")?;
    let mut outputs = vec![path_str(out)];
    if pca_model.is_none() {
        write_json(&pca_path, &model)?;
        outputs.push(path_str(&pca_path));
    }
    if plot {
        let label = if filter { "filtered" } else { "unfiltered" };
        let spec_svg = sibling(out, ".spectrogram.svg");
        let spec_fig = spectrogram_figure(&spec, &format!("Spectrogram ({label})"));
        write_atomic(&spec_svg, spec_fig.render().as_bytes())?;
        let traj_svg = sibling(out, ".trajectory.svg");
        write_atomic(&traj_svg, trajectory_figure(&x, &format!("x trajectory ({label})"), "x").render().as_bytes())?;
        outputs.extend([path_str(&spec_svg), path_str(&traj_svg)]);
    }
    Ok(json!({
        "command": "features",
        "duration_s": clip.duration_s(),
        "frames": x.len(),
        "dim": x.dim(),
        "filtered": filter,
        "explained_variance": model.explained_variance,
        "outputs": outputs,
    }))
}

pub fn chart(trajectory: &Path, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<Value, CliError> {
    let cfg = PipelineConfig::load(config)?;
    check_distinct(out, &[trajectory])?;
    let reference = cfg.reference.clone().ok_or_else(|| {
        CliError::validation("config.reference is required: give t0 and one vector time per dimension")
    })?;
    let traj = read_trajectory(trajectory)?;
    let data = match cfg.history_window_s {
        Some(w) => {
            let end = *traj.times().last().expect("trajectories are nonempty");
            traj.segment(end - w, end)?
        }
        None => traj,
    };
    let mut tolerances = cfg.solver.clone();
    if let Some(s) = seed {
        tolerances.seed = s;
    }
    let recipe = ChartRecipe { grid: cfg.grid_choice(), estimation: cfg.estimation.clone(), tolerances, self_test: true };
    let chart = build_chart(&data, &reference, &recipe, Execution::default())?;
    write_json(out, &chart)?;

    let field = chart.field();
    let (lo, hi) = field.domain();
    Ok(json!({
        "command": "chart",
        "grid": field.grid(),
        "valid_nodes": field.valid_count(),
        "nodes": field.grid().node_count(),
        "domain": { "lo": lo, "hi": hi },
        "source_times": chart.frame().source_times,
        "self_test": chart.self_test_report(),
        "outputs": [path_str(out)],
    }))
}

pub fn rescale(
    chart_path: &Path,
    trajectory: &Path,
    segment: Option<(f64, f64)>,
    plot: bool,
    out: &Path,
) -> Result<Value, CliError> {
    let meta_path = sibling(out, ".meta.json");
    check_distinct(out, &[chart_path, trajectory])?;
    check_distinct(&meta_path, &[chart_path, trajectory])?;
    let chart: ScaleChart = read_json(chart_path)?;
    let mut traj = read_trajectory(trajectory)?;
    if traj.dim() != chart.dim() {
        return Err(CliError::validation("trajectory and chart dimensions differ")
            .with("trajectory_dim", traj.dim())
            .with("chart_dim", chart.dim()));
    }
    if let Some((start, end)) = segment {
        traj = traj.segment(start, end)?;
    }
    let rescaled = rescale_trajectory(&chart, &traj);
    if rescaled.is_empty() {
        let first = rescaled.exclusions.first().map(|e| e.reason.clone()).unwrap_or_default();
        return Err(CliError::new(Kind::Numerical, "no sample could be mapped into s")
            .with("excluded", rescaled.exclusions.len())
            .with("first_reason", first));
    }
    let s = rescaled.trajectory()?;
    write_trajectory(out, &s, "s")?;
    let meta = RescaleMeta {
        source_times: chart.frame().source_times.clone(),
        input_samples: traj.len(),
        exclusions: rescaled.exclusions.clone(),
    };
    write_json(&meta_path, &meta)?;
    let mut outputs = vec![path_str(out), path_str(&meta_path)];
    if plot {
        let x_svg = sibling(out, ".x.svg");
        let s_svg = sibling(out, ".s.svg");
        write_atomic(&x_svg, trajectory_figure(&traj, "x representation", "x").render().as_bytes())?;
        write_atomic(&s_svg, trajectory_figure(&s, "s representation", "s").render().as_bytes())?;
        outputs.extend([path_str(&x_svg), path_str(&s_svg)]);
    }
    Ok(json!({
        "command": "rescale",
        "samples": traj.len(),
        "rescaled": rescaled.len(),
        "excluded": rescaled.exclusions.len(),
        "outputs": outputs,
    }))
}

pub struct IsoclineArgs {
    pub region: Option<Vec<f64>>,
    pub levels1: Option<Vec<f64>>,
    pub levels2: Option<Vec<f64>>,
    pub resolution: usize,
    pub overlay: Option<std::path::PathBuf>,
}

/// Round levels spanning the `s` values reached on a coarse lattice over
/// the region.
fn auto_levels(chart: &ScaleChart, region: ([f64; 2], [f64; 2])) -> Result<[Vec<f64>; 2], CliError> {
    const PROBES: usize = 9;
    let (lo, hi) = region;
    let mut range = [(f64::INFINITY, f64::NEG_INFINITY); 2];
    for i in 0..PROBES {
        for j in 0..PROBES {
            let x = [
                lo[0] + (hi[0] - lo[0]) * i as f64 / (PROBES - 1) as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / (PROBES - 1) as f64,
            ];
            if let Ok(s) = chart.inverse_map(&x) {
                for k in 0..2 {
                    range[k] = (range[k].0.min(s[k]), range[k].1.max(s[k]));
                }
            }
        }
    }
    if !range[0].0.is_finite() {
        return Err(CliError::new(Kind::Numerical, "no probe point in the region maps into s"));
    }
    Ok(range.map(|(a, b)| ticks(a, b)))
}

pub fn isoclines(chart_path: &Path, args: IsoclineArgs, out: &Path) -> Result<Value, CliError> {
    let csv_path = sibling(out, ".csv");
    if csv_path == out {
        return Err(CliError::validation("isocline SVG output must not have a .csv extension"));
    }
    let mut inputs = vec![chart_path];
    inputs.extend(args.overlay.as_deref());
    check_distinct(out, &inputs)?;
    check_distinct(&csv_path, &inputs)?;
    let chart: ScaleChart = read_json(chart_path)?;
    if chart.dim() != 2 {
        return Err(CliError::validation("isoclines need a 2-D chart").with("dim", chart.dim()));
    }
    let region = match &args.region {
        Some(r) if r.len() == 4 => ([r[0], r[1]], [r[2], r[3]]),
        Some(r) => {
            return Err(CliError::validation("--region takes x1_lo,x2_lo,x1_hi,x2_hi").with("values", r.len()));
        }
        None => {
            let (lo, hi) = chart.field().domain();
            ([lo[0], lo[1]], [hi[0], hi[1]])
        }
    };
    let overlay = args.overlay.as_deref().map(read_trajectory).transpose()?;
    let (levels1, levels2) = match (args.levels1, args.levels2) {
        (Some(a), Some(b)) => (a, b),
        (a, b) => {
            let [auto1, auto2] = auto_levels(&chart, region)?;
            (a.unwrap_or(auto1), b.unwrap_or(auto2))
        }
    };
    let isos = trace_isoclines(&chart, region, &levels1, &levels2, args.resolution)?;

    write_atomic(&csv_path, isoclines_to_csv(&isos).as_bytes())?;
    write_atomic(out, isocline_figure(&isos, region, overlay.as_ref()).render().as_bytes())?;
    let empty: Vec<Value> =
        isos.iter().filter(|i| i.polylines.is_empty()).map(|i| json!([i.component, i.level])).collect();
    Ok(json!({
        "command": "isoclines",
        "region": { "lo": region.0, "hi": region.1 },
        "levels1": levels1,
        "levels2": levels2,
        "polylines": isos.iter().map(|i| i.polylines.len()).sum::<usize>(),
        "empty_levels": empty,
        "outputs": [path_str(out), path_str(&csv_path)],
    }))
}

fn isocline_figure(isos: &[Isocline], region: ([f64; 2], [f64; 2]), overlay: Option<&FeatureTrajectory>) -> Figure {
    let mut fig = Figure::new("s isoclines", "x1", "x2");
    fig.bounds = Some(region);
    if let Some(traj) = overlay.filter(|t| t.dim() >= 2) {
        let points = traj.points().map(|p| [p[0], p[1]]).collect();
        fig.lines.push(Polyline::new(points, 5).labelled("trajectory").faint());
    }
    let mut labelled = [false; 2];
    for iso in isos {
        let k = iso.component - 1;
        for line in &iso.polylines {
            let mut polyline = Polyline::new(line.clone(), k);
            if !labelled[k] {
                polyline = polyline.labelled(format!("s{} levels", iso.component));
                labelled[k] = true;
            }
            fig.lines.push(polyline);
        }
    }
    fig
}

fn read_meta(csv: &Path) -> Result<Option<RescaleMeta>, CliError> {
    let path = sibling(csv, ".meta.json");
    if path.exists() {
        read_json(&path).map(Some)
    } else {
        Ok(None)
    }
}

pub fn compare(
    a_path: &Path,
    b_path: &Path,
    force: bool,
    segment: Option<(f64, f64)>,
    plot: bool,
    out: &Path,
) -> Result<Value, CliError> {
    check_distinct(out, &[a_path, b_path])?;
    let (meta_a, meta_b) = (read_meta(a_path)?, read_meta(b_path)?);
    let reference = match (&meta_a, &meta_b) {
        (None, None) => "absent",
        (Some(a), Some(b)) if a.source_times == b.source_times => "matched",
        _ if force => "overridden",
        (Some(a), Some(b)) => {
            return Err(CliError::validation("charts were built from different reference times; pass --force to compare anyway")
                .with("a", json!(a.source_times))
                .with("b", json!(b.source_times)));
        }
        _ => {
            return Err(CliError::validation("only one input has rescale metadata; pass --force to compare anyway")
                .with("a", meta_a.is_some())
                .with("b", meta_b.is_some()));
        }
    };
    let mut a = read_trajectory(a_path)?;
    let mut b = read_trajectory(b_path)?;
    if let Some((start, end)) = segment {
        a = a.segment(start, end)?;
        b = b.segment(start, end)?;
    }
    let report = compare_representations(&a, &b)?;
    write_json(out, &report)?;
    let mut outputs = vec![path_str(out)];
    if plot {
        for k in 0..a.dim().min(b.dim()) {
            let mut fig = Figure::new(&format!("component {}", k + 1), "t (s)", &format!("{}", k + 1));
            for (color, (traj, path)) in [(&a, a_path), (&b, b_path)].into_iter().enumerate() {
                let points = with_gaps(traj, |t, p| [t, p[k]]);
                fig.lines.push(Polyline::new(points, color).labelled(file_label(path)));
            }
            let svg = sibling(out, &format!(".dim{}.svg", k + 1));
            write_atomic(&svg, fig.render().as_bytes())?;
            outputs.push(path_str(&svg));
        }
    }
    Ok(json!({ "command": "compare", "reference": reference, "report": report, "outputs": outputs }))
}

pub fn synth(spec_path: &Path, seed: Option<u64>, out: &Path) -> Result<Value, CliError> {
    check_distinct(out, &[spec_path])?;
    let mut spec: SyntheticSpec = read_json(spec_path)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let traj = generate_synthetic(&spec)?;
    write_trajectory(out, &traj, "x")?;
    Ok(json!({ "command": "synth", "samples": traj.len(), "dim": traj.dim(), "seed": spec.seed, "outputs": [path_str(out)] }))
}

pub fn transform(trajectory: &Path, transform_path: &Path, out: &Path) -> Result<Value, CliError> {
    check_distinct(out, &[trajectory, transform_path])?;
    let traj = read_trajectory(trajectory)?;
    let spec: TransformSpec = read_json(transform_path)?;
    let mapped = apply_transform(&traj, &spec)?;
    write_trajectory(out, &mapped, "x")?;
    Ok(json!({ "command": "transform", "samples": mapped.len(), "outputs": [path_str(out)] }))
}
