use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::lambda::{lambdas_and_weights, list_average_precision, ranking};
use super::tree::{fit_tree, Node, RegressionTree, TreeConfig};
use crate::error::{Error, Result};
use crate::features::{FeatureSchema, FeatureVector};
use crate::math::seeded_rng;

const DUMP_HEADER: &str = "tabret-forest v1";

/// Candidates of one query with their features and binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryGroup {
    pub query_id: String,
    pub table_ids: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl QueryGroup {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_mixed(&self) -> bool {
        self.labels.iter().any(|&l| l) && self.labels.iter().any(|&l| !l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaMartConfig {
    pub num_trees: usize,
    pub max_leaves: usize,
    pub learning_rate: f64,
    pub min_instances_per_leaf: usize,
    /// Fraction of query groups drawn (seeded) for each tree.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for LambdaMartConfig {
    fn default() -> Self {
        Self {
            num_trees: 100,
            max_leaves: 16,
            learning_rate: 0.1,
            min_instances_per_leaf: 1,
            subsample: 1.0,
            seed: 7,
        }
    }
}

impl LambdaMartConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_leaves == 0 || !(self.learning_rate > 0.0) || !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Config(
                "ranker needs max_leaves >= 1, learning_rate > 0 and subsample in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Weighted sum of regression trees over a named feature layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub schema: FeatureSchema,
    pub trees: Vec<RegressionTree>,
    pub weights: Vec<f64>,
}

impl Forest {
    pub fn empty(schema: FeatureSchema) -> Self {
        Self {
            schema,
            trees: Vec::new(),
            weights: Vec::new(),
        }
    }

    fn raw_score(&self, x: &[f64]) -> f64 {
        self.trees.iter().zip(&self.weights).map(|(t, w)| w * t.predict(x)).sum()
    }

    /// `Σ w_i · tree_i(x)`.
    pub fn score(&self, features: &FeatureVector) -> Result<f64> {
        if features.values.len() != self.schema.len() {
            return Err(Error::Shape(format!(
                "feature vector has {} values, ranker expects {}",
                features.values.len(),
                self.schema.len()
            )));
        }
        Ok(self.raw_score(&features.values))
    }

    /// Human-readable dump; floats use the shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{DUMP_HEADER}");
        let _ = writeln!(s, "features {} {}", self.schema.len(), self.schema.names.join(" "));
        let _ = writeln!(s, "trees {}", self.trees.len());
        for (i, (tree, w)) in self.trees.iter().zip(&self.weights).enumerate() {
            let _ = writeln!(s, "tree {i} weight {w} nodes {}", tree.nodes.len());
            for (id, node) in tree.nodes.iter().enumerate() {
                let _ = match node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => writeln!(
                        s,
                        "node {id} split {} {threshold} {left} {right}",
                        self.schema.names[*feature]
                    ),
                    Node::Leaf { value } => writeln!(s, "node {id} leaf {value}"),
                };
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
                .ok_or_else(|| Error::parse(None, format!("forest dump ends before {what}")))
        };
        let (ln, header) = next("header")?;
        if header.join(" ") != DUMP_HEADER {
            return Err(Error::parse(Some(ln), "not a forest dump"));
        }
        let (ln, f) = next("feature list")?;
        let n: usize = field(&f, 1, ln)?;
        if f.first() != Some(&"features") || f.len() != n + 2 {
            return Err(Error::parse(Some(ln), "malformed feature line"));
        }
        let schema = FeatureSchema {
            names: f[2..].iter().map(|s| s.to_string()).collect(),
        };
        let (ln, t) = next("tree count")?;
        let k: usize = field(&t, 1, ln)?;
        let mut forest = Forest::empty(schema);
        for _ in 0..k {
            let (ln, th) = next("tree")?;
            if th.len() != 6 || th[0] != "tree" {
                return Err(Error::parse(Some(ln), "malformed tree line"));
            }
            let weight: f64 = field(&th, 3, ln)?;
            let count: usize = field(&th, 5, ln)?;
            let mut nodes = Vec::with_capacity(count);
            for id in 0..count {
                let (ln, nl) = next("node")?;
                if nl.first() != Some(&"node") || field::<usize>(&nl, 1, ln)? != id {
                    return Err(Error::parse(Some(ln), format!("expected node {id}")));
                }
                let node = match nl.get(2) {
                    Some(&"leaf") if nl.len() == 4 => Node::Leaf {
                        value: field(&nl, 3, ln)?,
                    },
                    Some(&"split") if nl.len() == 7 => Node::Split {
                        feature: forest
                            .schema
                            .position(nl[3])
                            .ok_or_else(|| Error::parse(Some(ln), format!("unknown feature `{}`", nl[3])))?,
                        threshold: field(&nl, 4, ln)?,
                        left: field(&nl, 5, ln)?,
                        right: field(&nl, 6, ln)?,
                    },
                    _ => return Err(Error::parse(Some(ln), "malformed node line")),
                };
                nodes.push(node);
            }
            let tree = RegressionTree { nodes };
            if !tree.is_well_formed(forest.schema.len()) {
                return Err(Error::parse(Some(ln), "tree structure is invalid"));
            }
            forest.trees.push(tree);
            forest.weights.push(weight);
        }
        Ok(forest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn field<T: std::str::FromStr>(parts: &[&str], i: usize, line: usize) -> Result<T> {
    parts
        .get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(Some(line), format!("bad value in field {}", i + 1)))
}

/// Mean average precision of the groups that contain a positive.
pub fn groups_map(groups: &[QueryGroup], scores: &[Vec<f64>]) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (g, s) in groups.iter().zip(scores) {
        if g.labels.iter().any(|&l| l) {
            sum += list_average_precision(ranking(s).into_iter().map(|i| g.labels[i]));
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Forest plus the training MAP after each tree (index 0: before any tree).
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub forest: Forest,
    pub train_map: Vec<f64>,
    pub validation_map: Vec<f64>,
}

pub fn fit_lambdamart(groups: &[QueryGroup], schema: FeatureSchema, config: &LambdaMartConfig) -> Result<Forest> {
    Ok(fit_lambdamart_traced(groups, None, schema, config)?.forest)
}

/// Boosting loop: lambdas at the current scores, a least-squares tree fit to
/// them, then every leaf set to the Newton step `Σλ / Σw` over its instances
/// (0 when `Σw` vanishes), and the tree appended with weight `learning_rate`.
pub fn fit_lambdamart_traced(
    groups: &[QueryGroup],
    validation: Option<&[QueryGroup]>,
    schema: FeatureSchema,
    config: &LambdaMartConfig,
) -> Result<FitOutput> {
    config.validate()?;
    if !groups.iter().any(QueryGroup::is_mixed) {
        return Err(Error::Training("no query group has both relevant and non-relevant candidates".into()));
    }
    for g in groups.iter().chain(validation.unwrap_or_default()) {
        if g.features.len() != g.labels.len() || g.features.iter().any(|f| f.len() != schema.len()) {
            return Err(Error::Shape(format!("group {} does not match the feature schema", g.query_id)));
        }
    }

    let mut x = Vec::new();
    let mut offsets = Vec::with_capacity(groups.len());
    for g in groups {
        offsets.push(x.len());
        x.extend(g.features.iter().cloned());
    }
    let mut scores: Vec<Vec<f64>> = groups.iter().map(|g| vec![0.0; g.len()]).collect();
    let mut val_scores: Vec<Vec<f64>> = validation.unwrap_or_default().iter().map(|g| vec![0.0; g.len()]).collect();
    let mut forest = Forest::empty(schema);
    let mut train_map = vec![groups_map(groups, &scores)];
    let mut validation_map = Vec::new();
    if let Some(v) = validation {
        validation_map.push(groups_map(v, &val_scores));
    }
    let tree_config = TreeConfig {
        max_leaves: config.max_leaves,
        min_instances_per_leaf: config.min_instances_per_leaf,
    };
    let mut rng = seeded_rng(config.seed);
    let mut lambdas = vec![0.0; x.len()];
    let mut weights = vec![0.0; x.len()];

    for _ in 0..config.num_trees {
        for (gi, g) in groups.iter().enumerate() {
            let (l, w) = lambdas_and_weights(&scores[gi], &g.labels);
            lambdas[offsets[gi]..offsets[gi] + g.len()].copy_from_slice(&l);
            weights[offsets[gi]..offsets[gi] + g.len()].copy_from_slice(&w);
        }
        let chosen: Vec<usize> = if config.subsample < 1.0 {
            let k = ((config.subsample * groups.len() as f64).floor() as usize).max(1);
            let mut c = sample(&mut rng, groups.len(), k).into_vec();
            c.sort_unstable();
            c
        } else {
            (0..groups.len()).collect()
        };
        let rows: Vec<usize> = chosen
            .iter()
            .flat_map(|&gi| offsets[gi]..offsets[gi] + groups[gi].len())
            .collect();
        let (mut tree, members) = fit_tree(&x, &lambdas, &rows, tree_config);
        for (node, idx) in members {
            let num: f64 = idx.iter().map(|&i| lambdas[i]).sum();
            let den: f64 = idx.iter().map(|&i| weights[i]).sum();
            let value = if den > 0.0 { num / den } else { 0.0 };
            tree.nodes[node] = Node::Leaf { value };
        }
        for (gi, g) in groups.iter().enumerate() {
            for (j, f) in g.features.iter().enumerate() {
                scores[gi][j] += config.learning_rate * tree.predict(f);
            }
        }
        if let Some(v) = validation {
            for (gi, g) in v.iter().enumerate() {
                for (j, f) in g.features.iter().enumerate() {
                    val_scores[gi][j] += config.learning_rate * tree.predict(f);
                }
            }
            validation_map.push(groups_map(v, &val_scores));
        }
        forest.trees.push(tree);
        forest.weights.push(config.learning_rate);
        train_map.push(groups_map(groups, &scores));
    }
    Ok(FitOutput {
        forest,
        train_map,
        validation_map,
    })
}

/// Candidates sorted by forest score, descending; ties by ascending table id.
pub fn rank_candidates(forest: &Forest, candidates: &[(String, FeatureVector)]) -> Result<Vec<(String, f64)>> {
    let mut out = candidates
        .iter()
        .map(|(id, f)| Ok((id.clone(), forest.score(f)?)))
        .collect::<Result<Vec<_>>>()?;
    sort_ranked(&mut out);
    Ok(out)
}

/// Sorts by score descending, then table id ascending.
pub fn sort_ranked(list: &mut [(String, f64)]) {
    list.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}
