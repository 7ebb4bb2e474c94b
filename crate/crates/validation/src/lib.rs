//! Holds the `acceptance` test target; run it with `cargo test -p scorelabel-validation --test acceptance`.
