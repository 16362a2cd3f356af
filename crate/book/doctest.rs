//! Every chapter of the guide as a doc comment, so `cargo test` runs its
//! listings against the current library.

#[cfg(doctest)]
#[doc = include_str!("src/introduction.md")]
mod introduction {}

#[cfg(doctest)]
#[doc = include_str!("src/value-function.md")]
mod value_function {}

#[cfg(doctest)]
#[doc = include_str!("src/shape.md")]
mod shape {}

#[cfg(doctest)]
#[doc = include_str!("src/bellman.md")]
mod bellman {}

#[cfg(doctest)]
#[doc = include_str!("src/discrete.md")]
mod discrete {}

#[cfg(doctest)]
#[doc = include_str!("src/simulation.md")]
mod simulation {}

#[cfg(doctest)]
#[doc = include_str!("src/approximation.md")]
mod approximation {}

#[cfg(doctest)]
#[doc = include_str!("src/command-line.md")]
mod command_line {}

#[cfg(doctest)]
#[doc = include_str!("../README.md")]
mod readme {}
