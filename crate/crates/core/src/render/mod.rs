//! Rasterization of the body into synthetic frames, vertex visibility and
//! ground-truth optical flow.

pub mod flow;
pub mod image;
pub mod raster;
pub mod scene;

pub use flow::{FlowMap, MIN_VALID_WEIGHT};
pub use image::Image;
pub use raster::{SurfaceHit, SurfaceIndex};
pub use scene::{
    flow_between, ground_truth_flow, render, render_scene, render_with, visibility, Appearance, PosedScene, RenderSettings,
    RenderedFrame, VisibilityMask, DEPTH_EPSILON,
};
