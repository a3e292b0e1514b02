use std::fs;

use vecshuffle_harness::dataset::{
    ingest_csv, write_synthetic_ecg, IngestOptions, Normalize, Table, ECG_FEATURES,
};
use vecshuffle_harness::HarnessError;

fn file(contents: &str) -> tempfile::NamedTempFile {
    let f = tempfile::NamedTempFile::new().unwrap();
    fs::write(f.path(), contents).unwrap();
    f
}

#[test]
fn two_by_two_as_written() {
    let f = file("0.2,0.8\n1.0,0.0\n");
    let m = ingest_csv(f.path(), IngestOptions::default(), 2, 2).unwrap();
    assert_eq!(m.rows[0].values(), &[0.2, 0.8]);
    assert_eq!(m.rows[1].values(), &[1.0, 0.0]);
    assert!(m.provenance.notes.is_empty());
}

#[test]
fn minmax_over_wide_range() {
    let f = file("0,200,50\n100,25,150\n");
    let options = IngestOptions {
        normalize: Normalize::MinMax,
        ..IngestOptions::default()
    };
    let m = ingest_csv(f.path(), options, 2, 3).unwrap();
    let all: Vec<f64> = m.rows.iter().flat_map(|r| r.values().to_vec()).collect();
    assert!(all.iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(m.rows[0].values(), &[0.0, 1.0, 0.25]);
    assert_eq!(m.provenance.normalization, Normalize::MinMax);
}

#[test]
fn heartbeat_shaped_file_keeps_leading_features() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("beats.csv");
    write_synthetic_ecg(&path, 40, 7).unwrap();
    let raw = Table::read_csv(&path, IngestOptions::default());
    // Labels up to 4 fall outside [0, 1] unless dropped.
    assert!(raw.is_err());
    let options = IngestOptions {
        drop_label: true,
        ..IngestOptions::default()
    };
    let table = Table::read_csv(&path, options).unwrap();
    assert_eq!(table.columns(), ECG_FEATURES);
    let m = table.shape(40, 100).unwrap();
    assert_eq!(m.dim(), 100);
    for (row, full) in m.rows.iter().zip(table.rows()) {
        assert_eq!(row.values(), &full[..100]);
    }
}

#[test]
fn recycling_and_padding_are_recorded() {
    let f = file("x,y\n0.1,0.2\n0.3,0.4\n0.5,0.6\n");
    let m = ingest_csv(f.path(), IngestOptions::default(), 7, 4).unwrap();
    assert_eq!(m.n(), 7);
    assert_eq!(m.rows[6].values(), &[0.1, 0.2, 0.0, 0.0]);
    let notes = m.provenance.notes.join("; ");
    assert!(notes.contains("header"), "{notes}");
    assert!(notes.contains("cyclically"), "{notes}");
    assert!(notes.contains("zero-padded"), "{notes}");
}

#[test]
fn bad_cell_reports_position() {
    let f = file("0.1,0.2\n0.3,abc\n");
    match Table::read_csv(f.path(), IngestOptions::default()) {
        Err(HarnessError::Cell { row, column, .. }) => assert_eq!((row, column), (2, 2)),
        other => panic!("{other:?}"),
    }
    let f = file("h1,h2\n0.1,0.2\n0.3,1.7\n");
    match Table::read_csv(f.path(), IngestOptions::default()) {
        Err(HarnessError::Cell { row, column, .. }) => assert_eq!((row, column), (3, 2)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_file_is_an_error() {
    for contents in ["", "a,b\n"] {
        let f = file(contents);
        let err = Table::read_csv(f.path(), IngestOptions::default()).unwrap_err();
        assert!(matches!(err, HarnessError::EmptyDataset(_)), "{err:?}");
        assert_eq!(err.exit_code(), 3);
    }
}

#[test]
fn ragged_rows_are_rejected() {
    let f = file("0.1,0.2\n0.3\n");
    assert!(Table::read_csv(f.path(), IngestOptions::default()).is_err());
}

mod properties {
    use proptest::prelude::*;
    use vecshuffle_harness::dataset::{Normalize, Table};

    fn normalization() -> impl Strategy<Value = Normalize> {
        prop_oneof![Just(Normalize::Clamp), Just(Normalize::MinMax)]
    }

    proptest! {
        #[test]
        fn ingested_entries_lie_in_unit_interval(
            width in 1usize..6,
            cells in prop::collection::vec(-1e6f64..1e6, 1..60),
            normalize in normalization(),
            n in 1usize..40,
            d in 1usize..10,
        ) {
            let rows: Vec<Vec<f64>> = cells.chunks(width).filter(|c| c.len() == width).map(<[f64]>::to_vec).collect();
            prop_assume!(!rows.is_empty());
            let table = Table::from_rows(rows, "prop".into(), normalize, vec![]).unwrap();
            let m = table.shape(n, d).unwrap();
            prop_assert_eq!(m.n(), n);
            prop_assert_eq!(m.dim(), d);
            for row in &m.rows {
                prop_assert!(row.values().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
