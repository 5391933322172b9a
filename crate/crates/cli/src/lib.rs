//! Command-line driver for rollergrasp: configuration, persisted formats and
//! the gen-expert / train / eval / replay subcommands.
pub mod commands;
pub mod config;
pub mod formats;
