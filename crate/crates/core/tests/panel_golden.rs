use std::path::PathBuf;

use nalgebra::DMatrix;
use rrvar::panel::{ingest, read_series_file, PanelSpec, Window};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

fn spec(pre: (&str, &str), post: (&str, &str)) -> PanelSpec {
    PanelSpec {
        csv_path: fixture("golden_panel.csv"),
        date_column: "date".into(),
        series: read_series_file(&fixture("golden_series.csv")).unwrap(),
        window_pre: Window { start: pre.0.into(), end: pre.1.into() },
        window_post: Window { start: post.0.into(), end: post.1.into() },
        match_length: true,
        min_length: 3,
    }
}

fn assert_close(got: &DMatrix<f64>, rows: usize, expected: &[f64]) {
    let want = DMatrix::from_row_slice(rows, expected.len() / rows, expected);
    assert_eq!(got.shape(), want.shape());
    assert!((got - &want).amax() < 1e-15, "{got} vs {want}");
}

#[test]
fn golden_windows() {
    let groups = ingest(&spec(("2000-04-01", "2000-10-01"), ("2001-10-01", "2002-10-01"))).unwrap();
    assert_eq!(groups.len(), 2);
    let real = &groups[0];
    let money = &groups[1];
    assert_eq!(real.group, "real");
    assert_eq!(real.series, vec!["gdp", "cpi"]);
    assert_eq!(money.group, "money");
    assert_eq!(real.pre_dates, vec!["2000-04-01", "2000-07-01", "2000-10-01"]);
    // the post window is trimmed to the pre length, keeping its earliest rows
    assert_eq!(real.post_dates, vec!["2001-10-01", "2002-01-01", "2002-04-01"]);

    assert_close(
        real.pre.data(),
        3,
        &[
            0.003349455087774918,
            0.006729056245085907,
            0.01300759562298322,
            -0.00331739610572912,
            -0.01635705071075814,
            -0.003411660139356787,
        ],
    );
    assert_close(
        real.post.data(),
        3,
        &[
            -0.0029313962878285693,
            0.006226590611238278,
            0.006115349718053942,
            -0.0030727125370410367,
            -0.0031839534302253725,
            -0.003153878074197239,
        ],
    );
    assert_close(money.pre.data(), 3, &[0.5833333333333334, -0.16666666666666669, -0.4166666666666667]);
    assert_close(money.post.data(), 3, &[0.08333333333333331, 0.08333333333333331, -0.16666666666666669]);
}

#[test]
fn missing_value_inside_a_window_is_an_error() {
    // the blank rate at 2001-04-01 leaves two undefined differences
    let err = ingest(&spec(("2000-04-01", "2000-10-01"), ("2001-01-01", "2002-10-01"))).unwrap_err();
    assert!(err.to_string().contains("missing"), "{err}");
}

#[test]
fn short_or_overlapping_windows_are_rejected() {
    let mut s = spec(("2000-04-01", "2000-10-01"), ("2001-10-01", "2002-10-01"));
    s.min_length = 4;
    assert!(ingest(&s).is_err());
    assert!(ingest(&spec(("2000-04-01", "2001-10-01"), ("2001-07-01", "2002-10-01"))).is_err());
}

#[test]
fn untrimmed_windows_keep_every_row() {
    let mut s = spec(("2000-04-01", "2000-10-01"), ("2001-10-01", "2002-10-01"));
    s.match_length = false;
    let groups = ingest(&s).unwrap();
    assert_eq!(groups[0].post.len(), 5);
    assert_eq!(groups[0].pre.len(), 3);
}
