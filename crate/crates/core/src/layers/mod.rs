//! Convolution, message-passing, pooling and readout layers.
//!
//! Layers operate on the disjoint layout: node and edge features are tape
//! values with one row per node or edge of the whole batch, and a
//! [`GraphContext`] carries the index vectors that tie rows to graphs.

mod dense;
mod gcn;
mod graph;
mod interaction;
mod megnet;
mod message;
mod pool;
mod readout;
mod schnet;

pub use dense::{Activation, Dense, Gru, Mlp};
pub use gcn::{gcn_conv, gcn_normalize};
pub use graph::GraphContext;
pub use interaction::{interaction_block, interaction_block_with, InteractionBlock};
pub use megnet::{megnet_block, megnet_block_with, MegNetBlock, MegNetFns};
pub use message::{message_aggregate, message_pass_step, MessagePassing, Update};
pub use pool::{keep_count, topk_pool, topk_unpool, PoolResult, TopKPool};
pub use readout::{readout_reduce, Set2Set};
pub use schnet::{cfconv_aggregate, gaussian_basis, schnet_interaction_with, SchNetInteraction};
