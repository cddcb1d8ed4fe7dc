//! C interface: opaque handles over the core types, integer status codes,
//! and a per-thread last-error message. The header is generated into
//! `include/rml.h` at build time.

// Placeholder during bring-up; the full surface lands with the core API.
