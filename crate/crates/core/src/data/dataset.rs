//! In-memory video corpus with access-audited labels.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::Vector2;

use crate::body::{BodyParams, ImageSize, MeshTemplate, ProjectedBody};
use crate::error::{Error, Result};
use crate::render::{FlowMap, Image};

/// Reference 2D keypoints of one frame (e.g. from an off-the-shelf
/// detector) with per-joint confidences in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Keypoints2d {
    pub points: Vec<Vector2<f64>>,
    pub confidence: Vec<f64>,
}

/// Frames of one contiguous sequence and the flows between neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub id: usize,
    pub frames: Vec<Image>,
    /// `forward_flows[t]` maps frame `t` to `t + 1`.
    pub forward_flows: Vec<FlowMap>,
    /// `backward_flows[t]` maps frame `t + 1` to `t`.
    pub backward_flows: Vec<FlowMap>,
    pub keypoints: Option<Vec<Keypoints2d>>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Ground-truth body parameters, with a counter of every read.
#[derive(Debug, Default)]
pub struct LabelStore {
    params: Vec<Vec<Option<BodyParams>>>,
    reads: AtomicUsize,
}

impl Clone for LabelStore {
    fn clone(&self) -> Self {
        Self {
            params: self.params.clone(),
            reads: AtomicUsize::new(self.reads()),
        }
    }
}

impl PartialEq for LabelStore {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl LabelStore {
    pub fn new(params: Vec<Vec<Option<BodyParams>>>) -> Self {
        Self {
            params,
            reads: AtomicUsize::new(0),
        }
    }

    pub fn get(&self, sequence: usize, frame: usize) -> Option<&BodyParams> {
        self.reads.fetch_add(1, Ordering::Relaxed);
        self.params.get(sequence)?.get(frame)?.as_ref()
    }

    pub fn has(&self, sequence: usize, frame: usize) -> bool {
        matches!(self.params.get(sequence).and_then(|s| s.get(frame)), Some(Some(_)))
    }

    pub fn reads(&self) -> usize {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn reset_reads(&self) {
        self.reads.store(0, Ordering::Relaxed);
    }
}

/// Two frames of a sequence with their flows and no access to labels.
#[derive(Clone, Copy, Debug)]
pub struct UnlabeledPair<'a> {
    pub image_1: &'a Image,
    pub image_2: &'a Image,
    pub flow_1to2: &'a FlowMap,
    pub flow_2to1: Option<&'a FlowMap>,
    pub keypoints: Option<[&'a Keypoints2d; 2]>,
    pub sequence: usize,
    pub frame: usize,
    pub delta_t: usize,
}

/// A frame with its ground truth.
#[derive(Clone, Copy, Debug)]
pub struct LabeledFrame<'a> {
    pub image: &'a Image,
    pub params: &'a BodyParams,
    pub sequence: usize,
    pub frame: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub size: ImageSize,
    pub fps: f64,
    pub sequences: Vec<Sequence>,
    pub labels: LabelStore,
}

impl Dataset {
    pub fn frame(&self, sequence: usize, frame: usize) -> &Image {
        &self.sequences[sequence].frames[frame]
    }

    /// `(sequence, frame)` of every frame that carries a label.
    pub fn labeled_indices(&self) -> Vec<(usize, usize)> {
        self.sequences
            .iter()
            .enumerate()
            .flat_map(|(s, seq)| (0..seq.len()).map(move |f| (s, f)))
            .filter(|&(s, f)| self.labels.has(s, f))
            .collect()
    }

    pub fn labeled(&self, sequence: usize, frame: usize) -> Option<LabeledFrame<'_>> {
        self.labels.get(sequence, frame).map(|params| LabeledFrame {
            image: self.frame(sequence, frame),
            params,
            sequence,
            frame,
        })
    }

    /// Every pair of consecutive frames.
    pub fn pairs(&self) -> Vec<UnlabeledPair<'_>> {
        self.sequences
            .iter()
            .enumerate()
            .flat_map(|(s, seq)| {
                (0..seq.len().saturating_sub(1)).map(move |t| UnlabeledPair {
                    image_1: &seq.frames[t],
                    image_2: &seq.frames[t + 1],
                    flow_1to2: &seq.forward_flows[t],
                    flow_2to1: seq.backward_flows.get(t),
                    keypoints: seq.keypoints.as_ref().map(|k| [&k[t], &k[t + 1]]),
                    sequence: s,
                    frame: t,
                    delta_t: 1,
                })
            })
            .collect()
    }

    pub fn num_frames(&self) -> usize {
        self.sequences.iter().map(Sequence::len).sum()
    }

    /// Ground-truth 2D joint positions of a labeled frame.
    pub fn keypoints(&self, template: &MeshTemplate, sequence: usize, frame: usize) -> Result<Vec<Vector2<f64>>> {
        let params = self
            .labels
            .get(sequence, frame)
            .ok_or_else(|| Error::Data(format!("frame {frame} of sequence {sequence} has no label")))?;
        Ok(ProjectedBody::new(template, params, self.size).joints_2d)
    }
}
