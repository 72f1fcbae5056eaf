//! Bayesian one-hidden-layer ReLU regression network.
//!
//! Parameters are packed into one flat vector `(W1, b1, W2, b2, log τ)`:
//! `W1` is `hidden × d_in` row-major, `b1` and `W2` have `hidden` entries,
//! `b2` and the log noise precision `log τ` one each. Priors are `N(0, 1)` on
//! every weight and bias and `Gamma(1, 0.1)` (shape, rate) on `τ`, carried
//! over to `log τ` with its Jacobian. The likelihood is
//! `y | x ~ N(f(x), 1/τ)` on standardized targets.

mod data;
mod eval;
mod network;

pub use data::{load_uci_csv, Normalization, RawTable, RegressionDataset};
pub use eval::{evaluate, predict, select_step_size, Evaluation, GridSearchResult};
pub use network::{BnnLayout, BnnTarget, DEFAULT_BATCH_SIZE, HIDDEN_UNITS};
