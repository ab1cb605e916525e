use std::io::Write;

use crosslinear::data::{load_csv, save_csv, synth_exo_driven, SynthSpec};
use crosslinear::Error;

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    std::fs::File::create(&path).unwrap().write_all(text.as_bytes()).unwrap();
    path
}

#[test]
fn csv_drops_date_column_and_defaults_target_to_last() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        &dir,
        "ett.csv",
        "date,HUFL,HULL,OT\n2016-07-01 00:00:00,5.8,2.0,30.5\n2016-07-01 01:00:00,5.7,2.1,27.8\n",
    );
    let frame = load_csv(&path).unwrap();
    assert_eq!(frame.names(), ["HUFL", "HULL", "OT"]);
    assert_eq!(frame.endo_name(), "OT");
    assert_eq!(frame.series(2), [30.5, 27.8]);
}

#[test]
fn csv_errors_carry_row_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let ragged = write(&dir, "ragged.csv", "a,b\n1,2\n3\n");
    match load_csv(&ragged) {
        Err(Error::Ingest { row, .. }) => assert_eq!(row, Some(2)),
        other => panic!("{other:?}"),
    }
    let text = write(&dir, "text.csv", "a,b\n1,2\n3,4\n5,oops\n");
    match load_csv(&text) {
        Err(Error::Ingest { row, message, .. }) => {
            assert_eq!(row, Some(3));
            assert!(message.contains("oops"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    let nan = write(&dir, "nan.csv", "a,b\nNaN,2\n");
    assert!(matches!(load_csv(&nan), Err(Error::Ingest { row: Some(1), .. })));
}

#[test]
fn csv_save_load_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let frame = synth_exo_driven(&SynthSpec::new(3, 200, 2, 0.1, 4)).unwrap();
    let path = dir.path().join("s.csv");
    save_csv(&frame, &path).unwrap();
    let back = load_csv(&path).unwrap();
    assert_eq!(back.names(), frame.names());
    for v in 0..3 {
        assert_eq!(back.series(v), frame.series(v));
    }
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

#[test]
fn lagged_regression_recovers_generator_weights() {
    let weights = vec![0.5, -1.0, 0.8, 0.3];
    let lag = 3;
    let spec = SynthSpec::new(5, 5000, lag, 0.1, 0).with_weights(weights.clone());
    let frame = synth_exo_driven(&spec).unwrap();
    let n = weights.len();
    let mut xtx = vec![vec![0.0; n]; n];
    let mut xty = vec![0.0; n];
    for t in lag..frame.len() {
        let x: Vec<f64> = (0..n).map(|j| frame.series(j)[t - lag]).collect();
        let y = frame.series(n)[t];
        for i in 0..n {
            xty[i] += x[i] * y;
            for j in 0..n {
                xtx[i][j] += x[i] * x[j];
            }
        }
    }
    let fit = solve(xtx, xty);
    for (w, f) in weights.iter().zip(&fit) {
        assert!((w - f).abs() < 0.05, "fitted {fit:?} vs {weights:?}");
    }
}
