//! Reference implementations and acceptance checks for `vvbath`.

pub mod criteria;
pub mod oracle;
