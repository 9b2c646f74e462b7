// SPDX-License-Identifier: Apache-2.0

//! Soft-error resiliency analysis for a functional-block NPU.
//!
//! [`npu`] is a cycle-level int8 accelerator model with single-bit fault
//! injection, [`campaign`] runs sampled injection campaigns, [`reliability`]
//! turns campaign statistics into SDC per inference, and [`protection`]
//! searches per-block protection assignments against area and ASIL targets.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod cli;
pub mod config;
pub mod npu;
pub mod protection;
pub mod reliability;
