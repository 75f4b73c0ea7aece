//! Forward-only enhancement network: residual blocks, U-shaped backbone,
//! weight container and cost accounting.

mod blocks;
mod config;
mod cost;
mod model;
pub mod ops;
mod tensor;
mod weights;

pub use blocks::{
    dws_hinb, sgfb_blend, sgfb_forward, sgfb_trace, web_forward, wgsrb_forward, BlockWeights,
    SgfbTrace,
};
pub use config::{BlockOrder, NetConfig};
pub use cost::{
    count_cost, dense_conv_cost, depthwise_cost, dws_cost, dws_hinb_cost, per_element,
    pointwise_cost, sgfb_cost, web_cost, wgsrb_cost, CostReport, LayerCost,
};
pub use model::{fused_input, model_forward};
pub use tensor::FeatureMap;
pub use weights::{
    init_random, load_weights, save_weights, tensor_specs, Tensor, TensorRole, TensorSpec,
    WeightStore, FORMAT_VERSION, MAGIC,
};
