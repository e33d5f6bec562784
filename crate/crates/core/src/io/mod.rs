//! File formats: MOT text rows, binary fixtures, parameter snapshots and
//! key=value configs.

pub mod config;
pub mod fixture;
pub mod mot;
pub mod params;
