//! Rollout traces: a structured record of one full game, exportable as
//! JSON lines (one record per step) and parseable back for rendering.

use crate::env::{GenAction, MergeAction, MergeGraph};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A merge edge with both its endpoint-graph indices and the original
/// vertices they map to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeEdgeRecord {
    pub p: usize,
    pub q: usize,
    pub p_orig: usize,
    pub q_orig: usize,
}

impl MergeEdgeRecord {
    pub fn new(g: &MergeGraph, action: MergeAction) -> Self {
        Self {
            p: action.p,
            q: action.q,
            p_orig: g.orig(action.p),
            q_orig: g.orig(action.q),
        }
    }
}

/// Everything needed to replay or draw one rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutTrace {
    pub instance_id: String,
    pub n: usize,
    pub k: usize,
    pub t_prime: usize,
    pub starts: Vec<usize>,
    pub isolated: Vec<usize>,
    /// Joint generation actions, one entry per extension step.
    pub gen_steps: Vec<Vec<GenAction>>,
    /// Merge start endpoint (index into the merge graph).
    pub merge_start: usize,
    /// All K+|I| merge edges in order, the forced closing edge last.
    pub merge_edges: Vec<MergeEdgeRecord>,
    /// Final subpath vertex sequences (front to rear), one per agent.
    pub subpaths: Vec<Vec<usize>>,
    pub tour: Vec<usize>,
    pub length: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum TraceLine {
    Header {
        instance_id: String,
        n: usize,
        k: usize,
        t_prime: usize,
        starts: Vec<usize>,
        merge_start: usize,
    },
    Step {
        step: usize,
        phase: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        actions: Option<Vec<GenAction>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        action: Option<MergeEdgeRecord>,
        reward: f64,
    },
    Footer {
        isolated: Vec<usize>,
        subpaths: Vec<Vec<usize>>,
        tour: Vec<usize>,
        length: f64,
        reward: f64,
    },
}

impl RolloutTrace {
    /// Serialize as JSON lines: header, one line per step (generation steps
    /// carry the joint action, merge steps one edge; only the terminal step
    /// has a non-zero reward), then a footer with the assembled solution.
    pub fn to_jsonl(&self) -> String {
        let mut lines = Vec::new();
        lines.push(
            serde_json::to_string(&TraceLine::Header {
                instance_id: self.instance_id.clone(),
                n: self.n,
                k: self.k,
                t_prime: self.t_prime,
                starts: self.starts.clone(),
                merge_start: self.merge_start,
            })
            .unwrap(),
        );
        let mut step = 0usize;
        for joint in &self.gen_steps {
            step += 1;
            lines.push(
                serde_json::to_string(&TraceLine::Step {
                    step,
                    phase: "generation".into(),
                    actions: Some(joint.clone()),
                    action: None,
                    reward: 0.0,
                })
                .unwrap(),
            );
        }
        for (i, edge) in self.merge_edges.iter().enumerate() {
            step += 1;
            let terminal = i + 1 == self.merge_edges.len();
            lines.push(
                serde_json::to_string(&TraceLine::Step {
                    step,
                    phase: "merging".into(),
                    actions: None,
                    action: Some(*edge),
                    reward: if terminal { -self.length } else { 0.0 },
                })
                .unwrap(),
            );
        }
        lines.push(
            serde_json::to_string(&TraceLine::Footer {
                isolated: self.isolated.clone(),
                subpaths: self.subpaths.clone(),
                tour: self.tour.clone(),
                length: self.length,
                reward: -self.length,
            })
            .unwrap(),
        );
        lines.join("\n") + "\n"
    }

    /// Rebuild a trace from its JSONL form. Files may hold several blocks
    /// (one per instance); parsing stops at the first footer.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut header = None;
        let mut footer = None;
        let mut gen_steps = Vec::new();
        let mut merge_edges = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: TraceLine = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
            match rec {
                TraceLine::Header { .. } => header = Some(rec),
                TraceLine::Footer { .. } => {
                    footer = Some(rec);
                    break;
                }
                TraceLine::Step {
                    actions, action, ..
                } => {
                    if let Some(joint) = actions {
                        gen_steps.push(joint);
                    }
                    if let Some(edge) = action {
                        merge_edges.push(edge);
                    }
                }
            }
        }
        let Some(TraceLine::Header {
            instance_id,
            n,
            k,
            t_prime,
            starts,
            merge_start,
        }) = header
        else {
            return Err(Error::Parse {
                line: 1,
                msg: "missing trace header record".into(),
            });
        };
        let Some(TraceLine::Footer {
            isolated,
            subpaths,
            tour,
            length,
            ..
        }) = footer
        else {
            return Err(Error::Parse {
                line: text.lines().count(),
                msg: "missing trace footer record".into(),
            });
        };
        Ok(Self {
            instance_id,
            n,
            k,
            t_prime,
            starts,
            isolated,
            gen_steps,
            merge_start,
            merge_edges,
            subpaths,
            tour,
            length,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Side;

    #[test]
    fn jsonl_round_trip() {
        let trace = RolloutTrace {
            instance_id: "t".into(),
            n: 10,
            k: 3,
            t_prime: 2,
            starts: vec![0, 4, 7],
            isolated: vec![9],
            gen_steps: vec![vec![GenAction {
                agent: 0,
                vertex: 1,
                side: Side::Front,
            }]],
            merge_start: 2,
            merge_edges: vec![MergeEdgeRecord {
                p: 6,
                q: 3,
                p_orig: 5,
                q_orig: 9,
            }],
            subpaths: vec![vec![1, 0], vec![4], vec![7]],
            tour: (0..10).collect(),
            length: 3.25,
        };
        let text = trace.to_jsonl();
        assert_eq!(RolloutTrace::from_jsonl(&text).unwrap(), trace);
        // only the last step carries a reward
        let rewards: Vec<f64> = text
            .lines()
            .filter(|l| l.contains("\"record\":\"step\""))
            .map(|l| {
                serde_json::from_str::<serde_json::Value>(l).unwrap()["reward"]
                    .as_f64()
                    .unwrap()
            })
            .collect();
        assert_eq!(rewards, vec![0.0, -3.25]);
    }
}
