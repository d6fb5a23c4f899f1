//! Design, simulation and adaptation toolkit for uplink variable-modulation
//! sparse code multiple access (VM-SCMA).
//!
//! Layers are mapped onto K shared resources by a sparse factor graph; each
//! layer may use its own modulation order. The crate covers the pieces needed
//! to design such systems and to measure them:
//!
//! * [`constellation`]: 1-D constellations, the built-in mother-constellation
//!   pool and the permutation search,
//! * [`factor_graph`] and [`vmm_design`]: factor graphs and the assignment of
//!   modulation orders to layers,
//! * [`codebook`]: sparse codebooks, codebook/power allocation and the design
//!   loop,
//! * [`channel`] and [`mpa_decoder`]: the fading uplink and message-passing
//!   detection,
//! * [`analysis`] and [`avm`]: error-rate analysis and adaptive mode selection,
//! * [`montecarlo`]: reproducible simulation campaigns.
//!
//! Numeric routines are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases name the usual double-precision instances. Monte Carlo campaigns
//! run in `f64`.

pub mod analysis;
pub mod avm;
pub mod channel;
pub mod codebook;
pub mod constellation;
pub mod error;
pub mod factor_graph;
pub mod montecarlo;
pub mod mpa_decoder;
pub mod rng;
pub mod scalar;
pub mod vmm_design;

pub use analysis::{CapacityUnit, SerModel};
pub use avm::{tm_table, Controller, Scheme, TransmissionMode};
pub use channel::{ChannelRealization, Deployment};
pub use codebook::{design_vm_scma, Codebook, CodebookSet, DesignOptions};
pub use constellation::{builtin_mc_pool, Constellation, McPool, MotherConstellation};
pub use error::{Error, Result};
pub use factor_graph::{FactorGraph, MappingMatrix};
pub use montecarlo::{Campaign, CodebookSpec};
pub use mpa_decoder::{mpa_decode, MpaConfig, MpaDecoder};
pub use scalar::Real;
pub use vmm_design::{ModCombination, Vmm};

pub type Constellation64 = Constellation<f64>;
pub type MotherConstellation64 = MotherConstellation<f64>;
pub type McPool64 = McPool<f64>;
pub type Vmm64 = Vmm<f64>;
pub type Codebook64 = Codebook<f64>;
pub type CodebookSet64 = CodebookSet<f64>;
pub type Deployment64 = Deployment<f64>;
pub type ChannelRealization64 = ChannelRealization<f64>;

pub type Constellation32 = Constellation<f32>;
pub type McPool32 = McPool<f32>;
pub type CodebookSet32 = CodebookSet<f32>;
pub type Deployment32 = Deployment<f32>;
