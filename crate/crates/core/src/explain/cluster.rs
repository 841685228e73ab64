use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExplainError, TokenAttribution};

/// Similarity threshold used when none is configured.
pub const DEFAULT_SIM_THRESHOLD: f64 = 0.9;
pub const DEFAULT_TOP_K: usize = 5;

/// Static word vectors read from `token v1 ... vd` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Embeddings {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl Embeddings {
    pub fn parse(src: &str) -> Result<Self, ExplainError> {
        let mut out = Embeddings::default();
        for (i, line) in src.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let bad = |detail: String| ExplainError::Embeddings { line: i + 1, detail };
            let v = parts
                .map(|p| p.parse::<f64>().map_err(|e| bad(format!("`{p}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if v.is_empty() {
                return Err(bad("token without a vector".into()));
            }
            if out.dim == 0 {
                out.dim = v.len();
            } else if v.len() != out.dim {
                return Err(bad(format!("expected {} components, found {}", out.dim, v.len())));
            }
            out.vectors.insert(token.to_lowercase(), v);
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, ExplainError> {
        let src = std::fs::read_to_string(path).map_err(|source| ExplainError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&src)
    }

    /// The bundled 16-dimensional vectors covering the default vocabulary.
    pub fn builtin() -> Self {
        Self::parse(include_str!("../../assets/embeddings.txt")).expect("bundled embeddings parse")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn insert(&mut self, token: &str, v: Vec<f64>) {
        if self.dim == 0 {
            self.dim = v.len();
        }
        assert_eq!(v.len(), self.dim, "embedding dimension mismatch");
        self.vectors.insert(token.to_string(), v);
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// DBSCAN with cosine similarity and `min_samples = 1`.
///
/// With a single required sample every point is a core point, so clusters
/// are the connected components of the graph joining pairs with
/// similarity at least `threshold`. `None` entries are isolated points.
/// Returns a cluster index per point, numbered by first appearance.
pub fn dbscan_cosine(points: &[Option<&[f64]>], threshold: f64) -> Vec<usize> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        let Some(a) = points[i] else { continue };
        for (j, b) in points.iter().enumerate().skip(i + 1) {
            let Some(b) = b else { continue };
            if cosine(a, b) >= threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut ids = HashMap::new();
    (0..n)
        .map(|i| {
            let root = find(&mut parent, i);
            let next = ids.len();
            *ids.entry(root).or_insert(next)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    TowardHate,
    /// Also used for a mean of exactly zero.
    TowardNonHate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenCluster {
    /// Most frequent member, ties broken lexicographically.
    pub representative: String,
    pub members: BTreeSet<String>,
    /// Mean of member values, each member first averaged over occurrences.
    pub mean_shap: f64,
    pub mean_abs_shap: f64,
    pub direction: Direction,
    /// Total occurrences of all members.
    pub occurrences: usize,
}

/// Clusters the tokens of `attributions` and averages Shapley values.
///
/// Repeated token strings are merged first, with their values averaged.
/// Output is ordered by `mean_abs_shap` descending, then representative.
pub fn cluster_tokens(
    attributions: &[TokenAttribution],
    embed: &Embeddings,
    sim_threshold: f64,
) -> Result<Vec<TokenCluster>, ExplainError> {
    if !(sim_threshold > 0.0 && sim_threshold <= 1.0) {
        return Err(ExplainError::InvalidThreshold(sim_threshold));
    }
    let mut per_token: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for att in attributions {
        for (t, v) in att.tokens.iter().zip(&att.shapley) {
            let e = per_token.entry(t.as_str()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    let tokens: Vec<(&str, f64, usize)> = per_token
        .into_iter()
        .map(|(t, (sum, n))| (t, sum / n as f64, n))
        .collect();
    let points: Vec<Option<&[f64]>> = tokens.iter().map(|(t, _, _)| embed.get(t)).collect();
    let labels = dbscan_cosine(&points, sim_threshold);

    let mut grouped: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        grouped.entry(*l).or_default().push(i);
    }
    let mut clusters: Vec<TokenCluster> = grouped
        .into_values()
        .map(|idx| {
            let k = idx.len() as f64;
            let mean_shap = idx.iter().map(|&i| tokens[i].1).sum::<f64>() / k;
            let mean_abs_shap = idx.iter().map(|&i| tokens[i].1.abs()).sum::<f64>() / k;
            let representative = idx
                .iter()
                .map(|&i| tokens[i])
                .min_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(b.0)))
                .map(|t| t.0.to_string())
                .expect("cluster is non-empty");
            TokenCluster {
                representative,
                members: idx.iter().map(|&i| tokens[i].0.to_string()).collect(),
                mean_shap,
                mean_abs_shap,
                direction: if mean_shap > 0.0 {
                    Direction::TowardHate
                } else {
                    Direction::TowardNonHate
                },
                occurrences: idx.iter().map(|&i| tokens[i].2).sum(),
            }
        })
        .collect();
    clusters.sort_by(|a, b| {
        b.mean_abs_shap
            .total_cmp(&a.mean_abs_shap)
            .then_with(|| a.representative.cmp(&b.representative))
    });
    Ok(clusters)
}

/// Which misclassification set a global explanation describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Flagged but not hateful; contributions toward hate are the culprits.
    Fp,
    /// Hateful but not flagged; contributions toward non-hate are the culprits.
    Fn,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Fp => "fp",
            ErrorKind::Fn => "fn",
        }
    }
}

/// The `top_k` clusters pushing hardest toward the erroneous decision.
pub fn global_attributions(clusters: &[TokenCluster], kind: ErrorKind, top_k: usize) -> Vec<TokenCluster> {
    let mut picked: Vec<TokenCluster> = clusters
        .iter()
        .filter(|c| match kind {
            ErrorKind::Fp => c.mean_shap > 0.0,
            ErrorKind::Fn => c.mean_shap < 0.0,
        })
        .cloned()
        .collect();
    picked.sort_by(|a, b| {
        let ord = match kind {
            ErrorKind::Fp => b.mean_shap.total_cmp(&a.mean_shap),
            ErrorKind::Fn => a.mean_shap.total_cmp(&b.mean_shap),
        };
        ord.then_with(|| a.representative.cmp(&b.representative))
    });
    picked.truncate(top_k);
    picked
}
