//! Trading-signal models and backtesting for daily commodity prices.

pub mod arma_garch;
pub mod backtest;
pub mod error;
pub mod evaluation;
pub mod indicators;
pub mod market_data;
pub mod ml_models;
pub mod neural;
pub mod pipeline;
pub mod stats;

pub use error::{Error, Result};
pub use market_data::{
    Alphabet, LabelKind, LabeledFrame, MinMaxScaler, PriceBar, PriceSeries, ReturnSeries, ScalingMeta, SignalSeries,
};
pub use backtest::{EquityCurve, PerformanceReport, StrategyKind};
pub use evaluation::{ClassReport, ConfusionMatrix, CvResult, ExtremeAccuracy, PermutationImportance};
pub use pipeline::{ModelKind, ModelSettings, Prepared};
