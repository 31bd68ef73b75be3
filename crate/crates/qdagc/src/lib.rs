//! File formats and the `qdagc` command line driver for [`qdag_core`].

pub mod cli;
pub mod evidence;
pub mod network_format;
pub mod qdag_format;

pub use network_format::{parse_network, render_network, NetworkFormatError};
pub use qdag_format::{deserialize, serialize, FormatError};
