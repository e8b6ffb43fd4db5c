//! A deterministic simulator of governance-driven blockchains.
//!
//! The crate is layered bottom-up: `primitives` (hashing, signatures, Merkle
//! trees), `state` (ledger and blocks), `tx` (transactions, filters, pool),
//! `consensus`, `governance` and `contracts` (on-chain decision making),
//! `network` (the simulated message fabric) and `scenario` (config-driven
//! runs and reports).

pub mod consensus;
pub mod contracts;
pub mod governance;
pub mod network;
pub mod policy;
pub mod primitives;
pub mod ratio;
pub mod scenario;
pub mod state;
pub mod tx;

pub use policy::{Decentralisation, GovernancePolicy, Pattern, Role};
pub use primitives::{Address, Digest, KeyPair, PublicKey, Signature};
pub use ratio::Fraction;
pub use state::{Block, ChainState, GenesisAccount, GenesisConfig};
pub use tx::{Transaction, TxPayload};
