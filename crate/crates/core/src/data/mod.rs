//! Synthetic corpora, label auditing, archive I/O and input noise.

pub mod archive;
pub mod dataset;
pub mod noise;
pub mod synth;

pub use archive::{read_dataset, read_manifest, write_dataset, Manifest};
pub use dataset::{Dataset, Keypoints2d, LabelStore, LabeledFrame, Sequence, UnlabeledPair};
pub use noise::apply_color_noise;
pub use synth::{generate, render_sequence, trajectory, MotionConfig, Trajectory};
