use serde::{Deserialize, Serialize};

use super::{DistanceMatrix, MeasureError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Members of the lexicographically smaller cluster, sorted.
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
}

/// Nested form for plotting: leaves are names, internal nodes carry their
/// merge height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DendrogramNode {
    Leaf(String),
    Node {
        height: f64,
        children: [Box<DendrogramNode>; 2],
    },
}

impl Dendrogram {
    pub fn tree(&self) -> Option<DendrogramNode> {
        let mut nodes: Vec<(Vec<String>, DendrogramNode)> = self
            .leaves
            .iter()
            .map(|l| (vec![l.clone()], DendrogramNode::Leaf(l.clone())))
            .collect();
        for m in &self.merges {
            let li = nodes.iter().position(|(k, _)| *k == m.left)?;
            let left = nodes.remove(li);
            let ri = nodes.iter().position(|(k, _)| *k == m.right)?;
            let right = nodes.remove(ri);
            let mut members = [left.0, right.0].concat();
            members.sort();
            nodes.push((
                members,
                DendrogramNode::Node {
                    height: m.distance,
                    children: [Box::new(left.1), Box::new(right.1)],
                },
            ));
        }
        match nodes.len() {
            1 => nodes.pop().map(|n| n.1),
            _ => None,
        }
    }
}

/// Complete-linkage agglomerative clustering. At each step the two clusters
/// with the smallest maximum pairwise member distance merge; ties go to the
/// lexicographically smallest (left, right) pair of sorted member lists.
pub fn agglomerative_cluster(dm: &DistanceMatrix) -> Result<Dendrogram, MeasureError> {
    let n = dm.sources.len();
    if n < 2 {
        return Err(MeasureError::TooFewSources { needed: 2, got: n });
    }
    let mut clusters: Vec<Vec<String>> = dm.sources.iter().map(|s| vec![s.clone()]).collect();
    let mut dist = dm.values.clone();
    let mut active: Vec<bool> = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);

    for _ in 1..n {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            for j in (i + 1..n).filter(|&j| active[j]) {
                let (a, b) = if clusters[i] <= clusters[j] { (i, j) } else { (j, i) };
                let better = match best {
                    None => true,
                    Some((d, ba, bb)) => {
                        let c = dist[i][j].total_cmp(&d);
                        c.is_lt()
                            || (c.is_eq()
                                && (&clusters[a], &clusters[b]) < (&clusters[ba], &clusters[bb]))
                    }
                };
                if better {
                    best = Some((dist[i][j], a, b));
                }
            }
        }
        let (d, a, b) = best.expect("at least two active clusters");
        merges.push(Merge {
            left: clusters[a].clone(),
            right: clusters[b].clone(),
            distance: d,
        });
        // keep the merged cluster in slot `a`; complete linkage takes the max
        for k in 0..n {
            if active[k] && k != a && k != b {
                let m = dist[a][k].max(dist[b][k]);
                dist[a][k] = m;
                dist[k][a] = m;
            }
        }
        let mut merged = std::mem::take(&mut clusters[b]);
        clusters[a].append(&mut merged);
        clusters[a].sort();
        active[b] = false;
    }
    Ok(Dendrogram {
        leaves: dm.sources.clone(),
        merges,
    })
}
