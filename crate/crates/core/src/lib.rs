//! Persistent homology on cubical grids, Betti matchings between prediction
//! and ground-truth segmentations, topology-aware losses and evaluation
//! metrics for multi-class segmentation.

pub mod cli;
pub mod error;
pub mod grid;
pub mod io;
pub mod losses;
pub mod matching;
pub mod metrics;
pub mod oracle;
pub mod persistence;
pub mod report;
pub mod wasserstein;

pub use error::{Error, Result};
pub use grid::{
    build_filtration, channel_project, one_hot, CellId, CubicalGrid, Filtration, FiltrationDirection, LabelGrid,
    LikelihoodGrid, MulticlassPrediction,
};
pub use losses::{alpha_schedule, bm_loss, bm_loss_gradient, total_loss, LossConfig, LossReport};
pub use matching::{betti_match, BettiMatching};
pub use metrics::{evaluate, MetricsReport};
pub use persistence::{compute_barcode, image_barcode, Bar, Barcode, Dims};
