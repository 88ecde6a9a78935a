//! kNN, random forest and epsilon-SVR, plus randomized hyperparameter search.

pub mod forest;
pub mod knn;
pub mod search;
pub mod svr;

pub use forest::{rf_train, Forest, ForestPrediction, Node, RfConfig};
pub use knn::{knn_fit, KnnConfig, KnnModel, KnnPrediction, Metric, Weighting};
pub use svr::{svr_predict_signals, svr_train, SvrConfig, SvrModel};
pub use search::{random_search, score_config, KnnSpace, ModelConfig, ModelFamily, RfSpace, SearchResult, SearchSpace, SvrSpace, Trial};
