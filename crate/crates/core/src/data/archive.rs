//! On-disk corpus layout.
//!
//! ```text
//! dataset.json                 size, fps and per-sequence frame counts
//! index.txt                    one line per consecutive frame pair
//! seq_0000/frame_0000.png      RGB frames
//! seq_0000/flow_fwd_0000.flo   flow from frame t to t + 1
//! seq_0000/flow_bwd_0000.flo   flow from frame t + 1 to t
//! seq_0000/labels.txt          `frame p_0 … p_84` for each labeled frame
//! seq_0000/keypoints.txt       optional: `frame x y confidence` per joint
//! ```
//!
//! Floats are written in shortest round-trip form, so labels and keypoints
//! reload bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Keypoints2d, LabelStore, Sequence};
use crate::body::{BodyParams, ImageSize};
use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::render::{FlowMap, Image};

pub const MANIFEST_FILE: &str = "dataset.json";
pub const INDEX_FILE: &str = "index.txt";
const FORMAT_TAG: &str = "flowfit-dataset";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub height: usize,
    pub width: usize,
    pub fps: f64,
    pub frames_per_sequence: Vec<usize>,
}

fn seq_dir(s: usize) -> String {
    format!("seq_{s:04}")
}

fn frame_file(s: usize, t: usize) -> String {
    format!("{}/frame_{t:04}.png", seq_dir(s))
}

fn flow_file(s: usize, t: usize, forward: bool) -> String {
    format!("{}/flow_{}_{t:04}.flo", seq_dir(s), if forward { "fwd" } else { "bwd" })
}

/// Text of the pair index, one record per consecutive pair.
pub fn index_text(dataset: &Dataset) -> String {
    let mut out = String::from("# frame_1 frame_2 flow_1to2 flow_2to1 delta_t labeled_1 labeled_2\n");
    for (s, seq) in dataset.sequences.iter().enumerate() {
        for t in 0..seq.len().saturating_sub(1) {
            let back = if seq.backward_flows.len() > t { flow_file(s, t, false) } else { "-".into() };
            writeln!(
                out,
                "{} {} {} {} 1 {} {}",
                frame_file(s, t),
                frame_file(s, t + 1),
                flow_file(s, t, true),
                back,
                dataset.labels.has(s, t) as u8,
                dataset.labels.has(s, t + 1) as u8
            )
            .unwrap();
        }
    }
    out
}

fn labels_text(dataset: &Dataset, s: usize) -> String {
    let mut out = String::new();
    for t in 0..dataset.sequences[s].len() {
        if let Some(p) = dataset.labels.get(s, t) {
            write!(out, "{t}").unwrap();
            for v in p.to_vec() {
                write!(out, " {v:?}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

fn keypoints_text(keypoints: &[Keypoints2d]) -> String {
    let mut out = String::new();
    for (t, k) in keypoints.iter().enumerate() {
        write!(out, "{t}").unwrap();
        for (p, c) in k.points.iter().zip(&k.confidence) {
            write!(out, " {:?} {:?} {c:?}", p.x, p.y).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Writes `dataset` under `root`, which must exist.
pub fn write_dataset(dataset: &Dataset, root: &Path) -> Result<()> {
    let manifest = Manifest {
        format: FORMAT_TAG.into(),
        version: 1,
        height: dataset.size.height,
        width: dataset.size.width,
        fps: dataset.fps,
        frames_per_sequence: dataset.sequences.iter().map(Sequence::len).collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format("manifest", e.to_string()))?;
    fs::write(root.join(MANIFEST_FILE), json + "\n")?;
    fs::write(root.join(INDEX_FILE), index_text(dataset))?;
    for (s, seq) in dataset.sequences.iter().enumerate() {
        fs::create_dir_all(root.join(seq_dir(s)))?;
        for (t, frame) in seq.frames.iter().enumerate() {
            frame.save_png(root.join(frame_file(s, t)))?;
        }
        for (t, flow) in seq.forward_flows.iter().enumerate() {
            flow.save(root.join(flow_file(s, t, true)))?;
        }
        for (t, flow) in seq.backward_flows.iter().enumerate() {
            flow.save(root.join(flow_file(s, t, false)))?;
        }
        fs::write(root.join(seq_dir(s)).join("labels.txt"), labels_text(dataset, s))?;
        if let Some(k) = &seq.keypoints {
            fs::write(root.join(seq_dir(s)).join("keypoints.txt"), keypoints_text(k))?;
        }
    }
    Ok(())
}

fn parse_floats(what: &'static str, fields: &[&str]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| f.parse::<f64>().map_err(|e| Error::format(what, format!("`{f}`: {e}"))))
        .collect()
}

fn parse_frame(what: &'static str, field: Option<&str>, frames: usize) -> Result<usize> {
    let t: usize = field
        .ok_or_else(|| Error::format(what, "empty record"))?
        .parse()
        .map_err(|e| Error::format(what, format!("frame index: {e}")))?;
    if t >= frames {
        return Err(Error::format(what, format!("frame {t} out of range")));
    }
    Ok(t)
}

fn read_labels(path: &Path, frames: usize) -> Result<Vec<Option<BodyParams>>> {
    let mut labels = vec![None; frames];
    if !path.exists() {
        return Ok(labels);
    }
    for line in fs::read_to_string(path)?.lines().filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let t = parse_frame("labels", fields.first().copied(), frames)?;
        labels[t] = Some(BodyParams::from_slice(&parse_floats("labels", &fields[1..])?)?);
    }
    Ok(labels)
}

fn read_keypoints(path: &Path, frames: usize) -> Result<Option<Vec<Keypoints2d>>> {
    if !path.exists() {
        return Ok(None);
    }
    let mut out: Vec<Option<Keypoints2d>> = vec![None; frames];
    for line in fs::read_to_string(path)?.lines().filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let t = parse_frame("keypoints", fields.first().copied(), frames)?;
        let values = parse_floats("keypoints", &fields[1..])?;
        if values.len() % 3 != 0 {
            return Err(Error::format("keypoints", format!("frame {t}: {} values", values.len())));
        }
        out[t] = Some(Keypoints2d {
            points: values.chunks(3).map(|c| Vector2::new(c[0], c[1])).collect(),
            confidence: values.chunks(3).map(|c| c[2]).collect(),
        });
    }
    out.into_iter()
        .enumerate()
        .map(|(t, k)| k.ok_or_else(|| Error::format("keypoints", format!("frame {t} missing"))))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

pub fn read_manifest(root: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(root.join(MANIFEST_FILE))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format("manifest", e.to_string()))?;
    if manifest.format != FORMAT_TAG || manifest.version != 1 {
        return Err(Error::format("manifest", format!("unsupported format {} v{}", manifest.format, manifest.version)));
    }
    Ok(manifest)
}

/// Loads a corpus written by [`write_dataset`]; sequences are decoded on up
/// to `workers` threads.
pub fn read_dataset(root: &Path, workers: usize) -> Result<Dataset> {
    let manifest = read_manifest(root)?;
    let size = ImageSize::new(manifest.height, manifest.width);
    let loaded = map_indexed(manifest.frames_per_sequence.len(), workers, |s| -> Result<_> {
        let n = manifest.frames_per_sequence[s];
        let frames = (0..n)
            .map(|t| {
                let img = Image::load_png(root.join(frame_file(s, t)))?;
                if img.size != size {
                    return Err(Error::format("frame", format!("sequence {s} frame {t} has the wrong size")));
                }
                Ok(img)
            })
            .collect::<Result<Vec<_>>>()?;
        let flows = |forward: bool| -> Result<Vec<FlowMap>> {
            let mut out = Vec::new();
            for t in 0..n.saturating_sub(1) {
                let path = root.join(flow_file(s, t, forward));
                if !forward && !path.exists() {
                    break;
                }
                let flow = FlowMap::load(path)?;
                if flow.size() != size {
                    return Err(Error::format("flow", format!("sequence {s} pair {t} has the wrong size")));
                }
                out.push(flow);
            }
            Ok(out)
        };
        let sequence = Sequence {
            id: s,
            frames,
            forward_flows: flows(true)?,
            backward_flows: flows(false)?,
            keypoints: read_keypoints(&root.join(seq_dir(s)).join("keypoints.txt"), n)?,
        };
        Ok((sequence, read_labels(&root.join(seq_dir(s)).join("labels.txt"), n)?))
    });
    let (sequences, labels): (Vec<_>, Vec<_>) = loaded.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok(Dataset {
        size,
        fps: manifest.fps,
        sequences,
        labels: LabelStore::new(labels),
    })
}
