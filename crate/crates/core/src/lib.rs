//! Deterministic simulator for privacy-aware keyword search over
//! access-controlled personal data stores.
//!
//! Pods keep one inverted index per WebID plus a public index. Servers
//! aggregate pod profiles into WebID-partitioned source-selection metadata,
//! which an overlay federates across servers. The [`audit`] module checks
//! the resulting system against independent reconstructions.

pub mod audit;
pub mod bloom;
pub mod error;
pub mod fixtures;
pub mod gen;
pub mod index;
pub mod metadata;
pub mod model;
pub mod overlay;
pub mod par;
pub mod search;
pub mod sim;

pub use error::{Error, Result};
