//! Fuzz target for the trajectory CSV loader.
//!
//! Any input must either be rejected with an error or parse into a sample
//! set that survives a write/parse round trip unchanged.

#![no_main]

use distkit::io::{parse_trajectories_csv, write_trajectories_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(set) = parse_trajectories_csv(data) else {
        return;
    };
    let mut buf = Vec::new();
    write_trajectories_csv(&set, &mut buf).expect("writing a parsed set");
    let again = parse_trajectories_csv(buf.as_slice()).expect("re-parsing written output");
    assert_eq!(set.len(), again.len());
    for (a, b) in set.iter().zip(again.iter()) {
        assert_eq!(a.values(), b.values());
        assert_eq!(a.steps(), b.steps());
        assert_eq!(a.output_dim(), b.output_dim());
    }
});
