//! Simulated summonable vehicle: a deterministic typed message bus, a
//! drive-by-wire vehicle with RTK/SPP GPS and lidar, the adapter nodes that
//! bridge planner and vehicle, a pure-pursuit point-and-go planner, and the
//! HTTP summon service.
//!
//! Start with [`launcher::System`], which wires everything from a
//! [`launcher::LaunchConfig`].

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapters;
pub mod bus;
pub mod geodesy;
pub mod launcher;
pub mod messages;
pub mod planner;
pub mod summon;
pub mod vehicle_sim;

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/bus.md")]
    mod bus {}
    #[doc = include_str!("../../../book/src/geodesy.md")]
    mod geodesy {}
    #[doc = include_str!("../../../book/src/vehicle.md")]
    mod vehicle {}
    #[doc = include_str!("../../../book/src/adapters.md")]
    mod adapters {}
    #[doc = include_str!("../../../book/src/planner.md")]
    mod planner {}
    #[doc = include_str!("../../../book/src/summon.md")]
    mod summon {}
    #[doc = include_str!("../../../book/src/launcher.md")]
    mod launcher {}
}
