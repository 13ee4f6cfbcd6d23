//! Holds the `acceptance` test target, which runs every criterion end to end
//! and prints one PASS/FAIL line each. Run it with
//! `cargo test -p rsvdlab-validate --test acceptance`.
