//! Small dense network toolkit, the body regressor and the temporal context
//! network.

pub mod checkpoint;
pub mod context;
pub mod ops;
pub mod params;
pub mod regressor;

pub use checkpoint::Checkpoint;
pub use context::{ContextConfig, ContextNet, ContextTrace};
pub use params::{Adam, ParamLayout, TensorSpec};
pub use regressor::{
    mean_raw_params, params_grad_to_raw, raw_to_params, AffineGrad, ContextAffine, ForwardPass, Regressor,
    RegressorConfig,
};
