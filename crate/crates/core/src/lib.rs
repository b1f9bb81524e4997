//! Exact-rational approximation algorithms for metric k-median and uncapacitated
//! facility location, with brute-force oracles and replayable certificates.

pub mod adaptive;
pub mod greedy;
pub mod lp;
pub mod merge;
pub mod metric;
pub mod num;
pub mod oracle;
pub mod scaled;
pub mod stable;
pub mod submodular;
