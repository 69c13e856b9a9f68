//! File formats: grayscale PNG round trips and the flat key=value
//! configuration dialect (with JSON manifest pass-through).

mod config;
mod png;

pub use config::{parse_config_str, read_config, KvMap};
pub use png::{
    read_gray16, read_gray8, read_mask, write_gray16, write_gray8, write_mask,
};
