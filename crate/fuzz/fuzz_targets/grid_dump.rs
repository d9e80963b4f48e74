#![no_main]

use libfuzzer_sys::fuzz_target;
use ringwalk::blockmatrix::BoxGrid;

// Accepted dumps must survive a write/read round trip unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = BoxGrid::from_dump(text) {
        let again = BoxGrid::from_dump(&grid.to_dump()).expect("dump of a parsed grid parses");
        assert_eq!(again, grid);
    }
});
