use std::io::Write;
use std::path::{Path, PathBuf};

use log::{debug, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use slfm_core::container::LatentContainer;
use slfm_core::diagnostics::{
    component_swap, path_profile, shell_stats, uniform_grid, OffShellUnits, ShellStats, DEFAULT_PAIRS,
};
use slfm_core::flow::loss::loss;
use slfm_core::flow::sampler::sample;
use slfm_core::flow::train::{sample_batch, sample_prior};
use slfm_core::flow::{
    train, FieldShape, LossKind, SyntheticDataset, TimeSampling, TrainConfig, VelocityField,
};
use slfm_core::numeric::{norm, robust_angle};
use slfm_core::paths::PathKind;
use slfm_core::sphere::{
    exp_map, gaussian_mean_radius_approx, gaussian_mean_radius_exact, gaussian_norm_cv, one_step_deficit,
    projected_euler_step, radial_project, SphereToken, TangentVector,
};

use crate::error::CliError;
use crate::report::{Report, ReportRow};
use crate::{
    Cli, Command, DeficitArgs, GaussianNormsArgs, PathsArgs, SampleArgs, ShellOverride, StatsArgs, SwapArgs,
    TimeSamplingArg, TrainArgs,
};

/// Run one parsed invocation, writing its report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let report = match &cli.command {
        Command::GaussianNorms(a) => gaussian_norms(a)?,
        Command::Stats(a) => stats(a)?,
        Command::Paths(a) => paths(a)?,
        Command::Swap(a) => swap(a)?,
        Command::Train(a) => train_cmd(a)?,
        Command::Sample(a) => sample_cmd(a)?,
        Command::Deficit(a) => deficit(a)?,
    };
    report.write(cli.format, out)
}

pub fn gaussian_norms(args: &GaussianNormsArgs) -> Result<Report, CliError> {
    let mut report = Report::new(&["d", "mean_radius_exact", "mean_radius_approx", "cv"]);
    for &d in &args.dims {
        if d == 0 {
            return Err(CliError::input("dimension must be at least 1"));
        }
        let d = d as usize;
        report.push(
            ReportRow::new()
                .with("d", d as f64)
                .with("mean_radius_exact", gaussian_mean_radius_exact(d))
                .with("mean_radius_approx", gaussian_mean_radius_approx(d))
                .with("cv", gaussian_norm_cv(d)),
        )?;
    }
    Ok(report)
}

fn read_container(path: &Path) -> Result<LatentContainer, CliError> {
    LatentContainer::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_container(c: &LatentContainer, path: &Path) -> Result<(), CliError> {
    c.write(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn shell_row(s: &ShellStats) -> ReportRow {
    ReportRow::new()
        .with("n_tokens", s.n_tokens as f64)
        .with("mean_radius", s.mean_radius)
        .with("std_radius", s.std_radius)
        .with("cv", s.cv)
}

const SHELL_COLUMNS: [&str; 4] = ["n_tokens", "mean_radius", "std_radius", "cv"];

pub fn stats(args: &StatsArgs) -> Result<Report, CliError> {
    let c = read_container(&args.input)?;
    info!("{}: shape {:?}", args.input.display(), c.shape());
    let tokens = c.tokens();
    let s = match args.project {
        None => shell_stats(&tokens)?,
        Some(r) => {
            let projected = tokens
                .iter()
                .map(|t| radial_project(t, r).map(SphereToken::into_vec))
                .collect::<Result<Vec<_>, _>>()?;
            shell_stats(&projected)?
        }
    };
    let mut report = Report::new(&SHELL_COLUMNS);
    report.push(shell_row(&s))?;
    Ok(report)
}

fn override_stats(o: ShellOverride) -> ShellStats {
    ShellStats {
        n_tokens: 0,
        mean_radius: o.mean,
        std_radius: o.std,
        cv: o.std / o.mean,
    }
}

type Pairs = Vec<(Vec<f64>, Vec<f64>)>;

fn container_pairs(args: &PathsArgs, z1: &Path, rng: &mut ChaCha8Rng) -> Result<Pairs, CliError> {
    let data = read_container(z1)?;
    let mut z1_tokens = data.tokens();
    let limit = args.pairs.unwrap_or(z1_tokens.len());
    z1_tokens.truncate(limit);
    let z0_tokens = match &args.z0 {
        Some(p) => {
            let noise = read_container(p)?;
            if noise.dim() != data.dim() {
                return Err(CliError::input(format!(
                    "token dimensions differ: z0 has {}, z1 has {}",
                    noise.dim(),
                    data.dim()
                )));
            }
            let mut t = noise.tokens();
            if t.len() < z1_tokens.len() {
                return Err(CliError::input(format!(
                    "z0 has {} tokens but {} pairs were requested",
                    t.len(),
                    z1_tokens.len()
                )));
            }
            t.truncate(z1_tokens.len());
            t
        }
        None => {
            // Slerp needs both endpoints on one sphere; draw noise on the
            // data's mean radius and let the path check the rest.
            let (loss_kind, radius) = match args.kind {
                PathKind::Slerp => (LossKind::Slerp, shell_stats(&z1_tokens)?.mean_radius),
                _ => (LossKind::Linear, 1.0),
            };
            (0..z1_tokens.len())
                .map(|_| sample_prior(loss_kind, data.dim(), radius, rng))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    Ok(z0_tokens.into_iter().zip(z1_tokens).collect())
}

pub fn paths(args: &PathsArgs) -> Result<Report, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let pairs = match (&args.synthetic, &args.z1) {
        (Some(spec), _) => spec.sample(args.pairs.unwrap_or(DEFAULT_PAIRS), &mut rng)?,
        (None, Some(z1)) => container_pairs(args, z1, &mut rng)?,
        (None, None) => return Err(CliError::input("give --synthetic or --z1")),
    };
    if pairs.is_empty() {
        return Err(CliError::input("no endpoint pairs"));
    }
    let grid = uniform_grid(args.grid)?;
    let shells = args.shell0.zip(args.shell1).map(|(a, b)| (override_stats(a), override_stats(b)));
    let profile = path_profile(&pairs, args.kind, &grid, shells)?;
    info!(
        "{} pairs, kind {}, shells r0={:.6} (std {:.3e}) r1={:.6} (std {:.3e}), off-shell in {}",
        pairs.len(),
        args.kind,
        profile.shell0.mean_radius,
        profile.shell0.std_radius,
        profile.shell1.mean_radius,
        profile.shell1.std_radius,
        match profile.offshell_units {
            OffShellUnits::Sigma => "standard deviations",
            OffShellUnits::Absolute => "absolute radius units",
        }
    );
    let mut report = Report::new(&["t", "mean_norm", "std_norm", "offshell", "radial_share"]);
    for k in 0..profile.t_grid.len() {
        report.push(
            ReportRow::new()
                .with("t", profile.t_grid[k])
                .with("mean_norm", profile.mean_norm[k])
                .with("std_norm", profile.std_norm[k])
                .with("offshell", profile.mean_offshell[k])
                .with("radial_share", profile.mean_radial_share[k]),
        )?;
    }
    Ok(report)
}

fn max_relative_norm_error(got: &[Vec<f64>], want: &[Vec<f64>]) -> f64 {
    got.iter()
        .zip(want)
        .map(|(g, w)| (norm(g) - norm(w)).abs() / norm(w))
        .fold(0.0, f64::max)
}

pub fn swap(args: &SwapArgs) -> Result<Report, CliError> {
    let anchor = read_container(&args.anchor)?;
    let substitute = read_container(&args.substitute)?;
    if anchor.shape() != substitute.shape() {
        return Err(CliError::input(format!(
            "shape mismatch: anchor {:?} vs substitute {:?} (n, d, h, w)",
            anchor.shape(),
            substitute.shape()
        )));
    }
    let a = anchor.tokens();
    let s = substitute.tokens();
    let mut keep_direction = Vec::with_capacity(a.len());
    let mut keep_radius = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(&s) {
        let pair = component_swap(x, y)?;
        keep_direction.push(pair.keep_direction);
        keep_radius.push(pair.keep_radius);
    }
    let [_, _, h, w] = anchor.shape();
    let dir_out = LatentContainer::from_tokens(h, w, &keep_direction)?;
    let rad_out = LatentContainer::from_tokens(h, w, &keep_radius)?;
    write_container(&dir_out, &args.out_direction)?;
    write_container(&rad_out, &args.out_radius)?;
    // Measured on what was written, after f32 rounding.
    let mut report = Report::new(&["n_tokens", "max_norm_error_keep_direction", "max_norm_error_keep_radius"]);
    report.push(
        ReportRow::new()
            .with("n_tokens", a.len() as f64)
            .with("max_norm_error_keep_direction", max_relative_norm_error(&dir_out.tokens(), &s))
            .with("max_norm_error_keep_radius", max_relative_norm_error(&rad_out.tokens(), &a)),
    )?;
    Ok(report)
}

/// JSON sidecar written next to a checkpoint container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: String,
    pub widths: Vec<usize>,
    pub shape: FieldShape,
    pub kind: LossKind,
    pub radius: f64,
    pub seed: u64,
    pub config: TrainConfig,
    pub dataset: SyntheticDataset,
    pub smoothing_window: usize,
    pub loss_trace: Vec<f64>,
}

const CHECKPOINT_FORMAT: &str = "slfm-checkpoint-v1";

pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Parameters are stored as f32, one item of `n_params` channels.
pub fn save_checkpoint(field: &VelocityField, meta: &CheckpointMeta, path: &Path) -> Result<(), CliError> {
    let c = LatentContainer::from_tokens(1, 1, &[field.params()])?;
    write_container(&c, path)?;
    let json = serde_json::to_string_pretty(meta)?;
    std::fs::write(sidecar_path(path), json + "\n")?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(VelocityField, CheckpointMeta), CliError> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| CliError::input(format!("{}: {e}", side.display())))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)?;
    if meta.format != CHECKPOINT_FORMAT {
        return Err(CliError::input(format!("unknown checkpoint format {:?}", meta.format)));
    }
    let c = read_container(path)?;
    if c.n_tokens() != 1 {
        return Err(CliError::input("checkpoint container must hold exactly one parameter vector"));
    }
    let params = c.tokens().swap_remove(0);
    let field = VelocityField::from_params(meta.shape.clone(), meta.kind, meta.radius, params)?;
    Ok((field, meta))
}

pub fn train_cmd(args: &TrainArgs) -> Result<Report, CliError> {
    if args.window == 0 {
        return Err(CliError::input("smoothing window must be positive"));
    }
    let dataset = SyntheticDataset::axis_centers(args.dim, args.spread, args.weights.clone())?;
    let mut shape = FieldShape::mlp(args.dim, args.hidden);
    if args.conditional {
        shape.n_classes = dataset.n_centers();
    }
    let config = TrainConfig {
        lr: args.lr,
        batch_size: args.batch,
        steps: args.steps,
        time_sampling: match args.time_sampling {
            TimeSamplingArg::Uniform => TimeSampling::Uniform,
            TimeSamplingArg::LogitNormal => TimeSampling::LogitNormal {
                mean: args.logit_mean,
                std: args.logit_std,
            },
        },
        shift: args.shift,
        kind: args.loss,
        seed: args.seed,
        weight_decay: args.weight_decay,
        grad_clip: args.grad_clip,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut field = VelocityField::new(shape, args.loss, dataset.radius, &mut rng)?;
    info!("training {} parameters for {} steps", field.n_params(), args.steps);
    let trace = train(&mut field, &dataset, &config, &mut rng)?;
    let (initial, last) = match (trace.initial_smoothed(args.window), trace.final_smoothed(args.window)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            // No steps: report the loss of one batch at initialization.
            let batch = sample_batch(&field, &dataset, &config, &mut rng)?;
            let l = loss(&field, &batch, config.kind)?;
            (l, l)
        }
    };
    if !(initial.is_finite() && last.is_finite()) {
        return Err(CliError::Divergence("non-finite loss".into()));
    }
    debug!("smoothed loss {initial} -> {last}");
    let meta = CheckpointMeta {
        format: CHECKPOINT_FORMAT.into(),
        widths: field.shape().widths(),
        shape: field.shape().clone(),
        kind: field.kind(),
        radius: field.radius(),
        seed: args.seed,
        config,
        dataset,
        smoothing_window: args.window,
        loss_trace: trace.loss_trace,
    };
    save_checkpoint(&field, &meta, &args.out)?;
    let mut report = Report::new(&["steps", "n_params", "initial_loss", "final_loss", "loss_ratio"]);
    report.push(
        ReportRow::new()
            .with("steps", args.steps as f64)
            .with("n_params", field.n_params() as f64)
            .with("initial_loss", initial)
            .with("final_loss", last)
            .with("loss_ratio", last / initial),
    )?;
    Ok(report)
}

pub fn sample_cmd(args: &SampleArgs) -> Result<Report, CliError> {
    let (field, meta) = load_checkpoint(&args.checkpoint)?;
    if args.cond >= field.shape().n_classes {
        return Err(CliError::input(format!(
            "condition {} out of range for {} classes",
            args.cond,
            field.shape().n_classes
        )));
    }
    if args.n == 0 {
        return Err(CliError::input("sample count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let run = sample(&field, args.n, args.sampler, args.nfe, args.cond, &mut rng)?;
    let deviation = run.max_sphere_deviation(field.radius());
    if field.kind() == LossKind::Linear {
        warn!("linear-kind model: sphere deviation is reported but not expected to be small");
    }
    info!("{} samples with {} at nfe {}", args.n, args.sampler, args.nfe);
    if let Some(p) = &args.out {
        write_container(&LatentContainer::from_tokens(1, 1, &run.outputs)?, p)?;
    }
    let hist = meta.dataset.assignment_histogram(&run.outputs);
    let mut report = Report::new(&["center", "weight", "frequency", "max_sphere_deviation", "nfe"]);
    for (k, (w, f)) in meta.dataset.weights.iter().zip(&hist).enumerate() {
        report.push(
            ReportRow::new()
                .with("center", k as f64)
                .with("weight", *w)
                .with("frequency", *f)
                .with("max_sphere_deviation", deviation)
                .with("nfe", args.nfe as f64),
        )?;
    }
    Ok(report)
}

/// Measured one-step gap: from `R e_1`, move with a tangent velocity of speed
/// `R omega` for time `h` by the exponential map and by projected Euler, and
/// take the arc length between the landing points.
pub fn measured_deficit(h: f64, omega: f64, radius: f64) -> Result<f64, CliError> {
    let z = SphereToken::new(vec![radius, 0.0, 0.0], radius)?;
    let step = vec![0.0, h * radius * omega, 0.0];
    let by_exp = exp_map(&z, &TangentVector::certify(step.clone(), &z)?);
    let by_euler = projected_euler_step(&z, &step)?;
    Ok(radius * robust_angle(&by_euler, &by_exp))
}

pub fn deficit(args: &DeficitArgs) -> Result<Report, CliError> {
    let analytical = one_step_deficit(args.h, args.omega, args.radius)?;
    let measured = measured_deficit(args.h, args.omega, args.radius)?;
    let rel = if analytical > 0.0 {
        (measured - analytical).abs() / analytical
    } else {
        (measured - analytical).abs()
    };
    let mut report = Report::new(&["h", "omega", "radius", "analytical", "measured", "rel_diff"]);
    report.push(
        ReportRow::new()
            .with("h", args.h)
            .with("omega", args.omega)
            .with("radius", args.radius)
            .with("analytical", analytical)
            .with("measured", measured)
            .with("rel_diff", rel),
    )?;
    Ok(report)
}
