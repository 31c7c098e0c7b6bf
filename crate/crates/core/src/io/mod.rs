//! Case configuration text format, binary field dumps and atomic file output.

mod config;
mod dump;

pub use config::{parse_config, print_config};
pub use dump::{read_fields, write_atomic, write_fields, BlockField, FieldData, FieldDump, MAGIC, VERSION};
