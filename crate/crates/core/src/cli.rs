//! Command-line surface of the `mcbm` binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{build_filtration, channel_project, one_hot, LabelGrid, MulticlassPrediction};
use crate::io::{labels_from_tensor, prediction_from_tensor, read_labels, read_tensor, write_gradient, TensorData};
use crate::losses::{baseline_loss, total_loss, BaselineKind, LossConfig};
use crate::matching::betti_match;
use crate::metrics::evaluate;
use crate::oracle::suite::run_suite;
use crate::persistence::{compute_barcode, Dims};
use crate::report::{barcode_dump, matching_dump, ClassBarcodes, LossFileReport, Report, RunConfig, SweepPoint, SweepReport};

#[derive(Debug, Parser)]
#[command(name = "mcbm", version, about = "Betti matching losses and topology metrics for multi-class segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Persistence barcodes of every selected class channel.
    Barcodes(Common),
    /// Betti matching between prediction and ground truth, per class.
    Match(Common),
    /// Weighted Betti matching loss plus Dice, with gradient.
    Loss {
        #[command(flatten)]
        common: Common,
        /// Write the gradient (classes x height x width, f64) here.
        #[arg(long)]
        grad_out: Option<PathBuf>,
        /// Evaluate a comparison loss instead.
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
    },
    /// Dice, clDice, Betti matching and Betti number errors, selection score.
    Eval(Common),
    /// Loss components over a list of values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
    },
    /// Random equivalence checks against the brute-force oracle.
    OracleCheck {
        #[arg(long, default_value_t = 6)]
        size: usize,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Baseline {
    Dice,
    Cldice,
    Hutopo,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SweepParam {
    #[value(name = "gamma_m")]
    GammaM,
    #[value(name = "gamma_u")]
    GammaU,
    #[value(name = "alpha_max")]
    AlphaMax,
    Step,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Prediction: f32 (classes, height, width), or u8 labels with --classes.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth u8 labels (height, width).
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub ignore_background: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 0)]
    pub warmup: u64,
    #[arg(long, default_value_t = 1000)]
    pub total_steps: u64,
    /// Training step for the alpha schedule [default: total-steps].
    #[arg(long)]
    pub step: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    pub gamma_m: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma_u: f64,
    #[arg(long, default_value_t = 0.5)]
    pub cldice_alpha: f64,
    #[arg(long, default_value_t = 3)]
    pub skeleton_iterations: usize,
    /// Leave unmatched ground-truth bars out of the reported l_u.
    #[arg(long)]
    pub exclude_gt_unmatched: bool,
    /// Homology dimensions, e.g. "0,1" or "1".
    #[arg(long, default_value = "0,1")]
    pub dims: String,
    /// Filter by f = y instead of f = 1 - y.
    #[arg(long)]
    pub flip_filtration: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn step(&self) -> u64 {
        self.step.unwrap_or(self.total_steps)
    }

    pub fn loss_config(&self) -> Result<LossConfig> {
        let dims = self.dims()?;
        let cfg = LossConfig {
            alpha_max: self.alpha_max,
            warmup_alpha: self.warmup,
            total_steps: self.total_steps,
            gamma_matched: self.gamma_m,
            gamma_unmatched: self.gamma_u,
            cldice_alpha: self.cldice_alpha,
            skeleton_iterations: self.skeleton_iterations,
            ignore_background: self.ignore_background,
            filtration_flip: self.flip_filtration,
            include_gt_unmatched: !self.exclude_gt_unmatched,
            hutopo_dims: dims,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn dims(&self) -> Result<Dims> {
        Dims::parse(&self.dims)
    }

    fn run_config(&self, command: &str) -> Result<RunConfig> {
        Ok(RunConfig {
            command: command.into(),
            pred: Some(self.pred.display().to_string()),
            gt: self.gt.as_ref().map(|p| p.display().to_string()),
            classes: self.classes,
            step: self.step(),
            dims: self.dims()?,
            seed: self.seed,
            loss: self.loss_config()?,
        })
    }

    fn prediction(&self) -> Result<MulticlassPrediction> {
        let t = read_tensor(&self.pred)?;
        let pred = if matches!(t.data, TensorData::U8(_)) {
            let labels = labels_from_tensor(t)?;
            let n = self
                .classes
                .ok_or_else(|| Error::InvalidConfig("--classes is required for label predictions".into()))?;
            one_hot(&labels, n)?
        } else {
            prediction_from_tensor(t)?
        };
        if let Some(n) = self.classes {
            if n != pred.num_classes() {
                return Err(Error::InvalidConfig(format!(
                    "--classes {n} disagrees with the prediction's {} channels",
                    pred.num_classes()
                )));
            }
        }
        Ok(pred)
    }

    fn ground_truth(&self) -> Result<LabelGrid> {
        let path = self.gt.as_ref().ok_or_else(|| Error::InvalidConfig("--gt is required".into()))?;
        read_labels(path)
    }

    fn class_range(&self, n: usize) -> std::ops::Range<usize> {
        usize::from(self.ignore_background)..n
    }
}

fn emit<T: Serialize>(out: Option<&Path>, report: &Report<T>) -> Result<()> {
    match out {
        Some(p) => report.write(p),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(report.to_json()?.as_bytes())?;
            Ok(())
        }
    }
}

fn parse_values(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("cannot parse sweep value {v:?}")))
        })
        .collect()
}

/// Runs one command; the returned code is 0 unless an oracle check failed.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Barcodes(c) => {
            let pred = c.prediction()?;
            let gt = match &c.gt {
                Some(_) => Some(one_hot(&c.ground_truth()?, pred.num_classes())?),
                None => None,
            };
            let (cfg, dims) = (c.loss_config()?, c.dims()?);
            let dir = cfg.direction();
            let mut classes = Vec::new();
            for k in c.class_range(pred.num_classes()) {
                let dump = |p: &MulticlassPrediction| -> Result<_> {
                    let f = build_filtration(&channel_project(p, k)?, dir);
                    Ok(barcode_dump(&f, &compute_barcode(&f, dims)))
                };
                classes.push(ClassBarcodes {
                    class: k,
                    pred: dump(&pred)?,
                    gt: gt.as_ref().map(dump).transpose()?,
                });
            }
            emit(c.out.as_deref(), &Report::new(c.run_config("barcodes")?, classes))?;
        }
        Command::Match(c) => {
            let pred = c.prediction()?;
            let gt = one_hot(&c.ground_truth()?, pred.num_classes())?;
            let (cfg, dims) = (c.loss_config()?, c.dims()?);
            let dir = cfg.direction();
            let mut classes = Vec::new();
            for k in c.class_range(pred.num_classes()) {
                let fp = build_filtration(&channel_project(&pred, k)?, dir);
                let fg = build_filtration(&channel_project(&gt, k)?, dir);
                classes.push(matching_dump(k, &betti_match(&fp, &fg)?, &fp, &fg, dims));
            }
            emit(c.out.as_deref(), &Report::new(c.run_config("match")?, classes))?;
        }
        Command::Loss { common: c, grad_out, baseline } => {
            let pred = c.prediction()?;
            let gt = c.ground_truth()?;
            let cfg = c.loss_config()?;
            let shape = pred.shape();
            let gradient = match baseline {
                None => {
                    let loss = total_loss(&pred, &gt, c.step(), &cfg)?;
                    let gradient = loss.gradient.clone();
                    let result = LossFileReport {
                        loss,
                        gradient_file: grad_out.as_ref().map(|p| p.display().to_string()),
                        gradient_shape: shape,
                    };
                    emit(c.out.as_deref(), &Report::new(c.run_config("loss")?, result))?;
                    gradient
                }
                Some(b) => {
                    let kind = match b {
                        Baseline::Dice => BaselineKind::Dice,
                        Baseline::Cldice => BaselineKind::ClDice,
                        Baseline::Hutopo => BaselineKind::HuTopo,
                    };
                    let r = baseline_loss(kind, &pred, &gt, c.step(), &cfg)?;
                    let gradient = r.gradient.clone();
                    emit(c.out.as_deref(), &Report::new(c.run_config("loss")?, r))?;
                    gradient
                }
            };
            if let Some(p) = grad_out {
                write_gradient(&p, shape, &gradient)?;
            }
        }
        Command::Eval(c) => {
            let pred = c.prediction()?;
            let gt = c.ground_truth()?;
            let m = evaluate(&pred, &gt)?;
            emit(c.out.as_deref(), &Report::new(c.run_config("eval")?, m))?;
        }
        Command::Sweep { common: c, param, values } => {
            let pred = c.prediction()?;
            let gt = c.ground_truth()?;
            let base = c.loss_config()?;
            let mut points = Vec::new();
            for value in parse_values(&values)? {
                let mut cfg = base.clone();
                let mut step = c.step();
                match param {
                    SweepParam::GammaM => cfg.gamma_matched = value,
                    SweepParam::GammaU => cfg.gamma_unmatched = value,
                    SweepParam::AlphaMax => cfg.alpha_max = value,
                    SweepParam::Step => {
                        if value < 0.0 || value.fract() != 0.0 {
                            return Err(Error::InvalidConfig(format!("step must be a non-negative integer, got {value}")));
                        }
                        step = value as u64;
                    }
                }
                let r = total_loss(&pred, &gt, step, &cfg)?;
                points.push(SweepPoint {
                    value,
                    total: r.total,
                    dice_component: r.dice_component,
                    topo_matched: r.topo_matched,
                    topo_unmatched: r.topo_unmatched,
                    alpha: r.alpha,
                });
            }
            let param = match param {
                SweepParam::GammaM => "gamma_m",
                SweepParam::GammaU => "gamma_u",
                SweepParam::AlphaMax => "alpha_max",
                SweepParam::Step => "step",
            };
            let result = SweepReport {
                param: param.into(),
                points,
                metrics: evaluate(&pred, &gt)?,
            };
            emit(c.out.as_deref(), &Report::new(c.run_config("sweep")?, result))?;
        }
        Command::OracleCheck { size, count, seed, out } => {
            if size == 0 {
                return Err(Error::InvalidConfig("--size must be positive".into()));
            }
            let summary = run_suite(size, count, seed)?;
            let config = RunConfig {
                command: "oracle-check".into(),
                pred: None,
                gt: None,
                classes: None,
                step: 0,
                dims: Dims::BOTH,
                seed,
                loss: LossConfig::default(),
            };
            let ok = summary.all_passed();
            emit(out.as_deref(), &Report::new(config, summary))?;
            if !ok {
                return Ok(2);
            }
        }
    }
    Ok(0)
}
