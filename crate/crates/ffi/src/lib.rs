//! C ABI surface: opaque handles over the core library, integer error
//! codes, out-parameters for results. The header is generated at build
//! time; see `build.rs`.

// Symbols are added alongside the core modules they expose.
