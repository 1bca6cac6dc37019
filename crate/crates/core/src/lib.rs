//! Generate AppArmor profiles for containers from recorded kernel traces and
//! audit logs, and replay exploit scenarios against them.

pub mod engine;
pub mod harness;
pub mod perms;
pub mod profile;
pub mod sim;
pub mod trace;

pub use perms::{Perm, PermSet};
pub use profile::{Layer, Profile, Rule};
