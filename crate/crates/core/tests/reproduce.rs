use homesim::experiment::{reproduce, ReproduceOptions, Scale, ROWS};

fn small(seed: u64) -> homesim::experiment::Reproduction {
    let mut o = ReproduceOptions::new(Scale::Desk, seed);
    o.days = Some(60);
    o.replicates = Some(1);
    reproduce(&o, |_| {}).unwrap()
}

#[test]
fn short_reproduction_is_deterministic() {
    let a = small(5);
    let b = small(5);
    assert_eq!(a.rows.len(), ROWS.len());
    assert_eq!(a.to_string(), b.to_string());
    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), ROWS.len() + 1);
    assert!(text.starts_with("anomaly,method,denoise,"));
}

#[test]
fn bands_only_on_gated_rows() {
    let r = small(6);
    let gated = r.rows.iter().filter(|row| row.band.is_some()).count();
    assert_eq!(gated, 6);
    for row in &r.rows {
        assert_eq!(row.band.is_some(), row.pass.is_some());
    }
}
