//! Bias-corrected maximum likelihood estimation.
//!
//! The crate fits scalar-parameter models by Newton's method, both in the
//! cross-section and in panels with one fixed effect per unit, and then
//! corrects the O(1/n) (or O(1/T)) bias of the estimate with a leave-one-out
//! jackknife, a split-sample jackknife, a nonparametric bootstrap, or one of
//! three analytical formulas. Higher-order variances of the corrected
//! estimators can be estimated from the same fit, and the [`montecarlo`]
//! module reproduces the simulation designs used to compare the corrections.
//!
//! [`vstat`] contains the normalized V-statistic machinery together with the
//! closed-form descriptions of what the jackknife and the split-sample
//! transform do to them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corrections;
pub mod data;
pub mod error;
pub mod estimate;
pub mod hovar;
pub mod models;
pub mod montecarlo;
pub mod numeric;
pub mod verify;
pub mod vstat;

pub use corrections::{BiasEstimate, Method, Setting};
pub use data::{Dataset, PanelDataset};
pub use error::{Error, Result};
pub use estimate::{fit_mle, fit_panel_mle, Estimate, PanelEstimate, SolverOpts};
pub use hovar::HigherOrderVariance;
pub use models::{builtin_model, BuiltinName, Model, PanelModel, ParamDomain, ScalarModel};
