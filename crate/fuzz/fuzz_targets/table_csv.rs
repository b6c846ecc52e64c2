#![no_main]

use isonbhd::io::{parse_section_table, parse_trajectory_table, Table};
use libfuzzer_sys::fuzz_target;

fn same(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits()
}

fuzz_target!(|data: &[u8]| {
    let Ok(table) = Table::read(data) else { return };
    let _ = parse_section_table(&table);
    let _ = parse_trajectory_table(&table);
    let Ok(text) = table.render() else { return };
    let back = Table::read(text.as_bytes()).expect("rendered tables parse");
    assert_eq!(back.meta, table.meta);
    assert_eq!(back.columns, table.columns);
    assert_eq!(back.rows.len(), table.rows.len());
    for (r, s) in back.rows.iter().zip(&table.rows) {
        assert!(r.iter().zip(s).all(|(a, b)| same(*a, *b)));
    }
});
