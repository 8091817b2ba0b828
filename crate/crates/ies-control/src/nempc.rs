//! NEMPC (placeholder).
