//! LambdaMART: boosted regression trees trained on average-precision lambdas.

pub mod lambda;
pub mod lambdamart;
pub mod tree;

pub use lambda::{compute_lambdas, lambdas_and_weights, list_average_precision, ranking};
pub use lambdamart::{
    fit_lambdamart, fit_lambdamart_traced, groups_map, rank_candidates, sort_ranked, FitOutput, Forest,
    LambdaMartConfig, QueryGroup,
};
pub use tree::{fit_tree, Node, RegressionTree, TreeConfig};
