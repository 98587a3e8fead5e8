use br_ar_web::{power_view, test_view, wiener_view};

#[test]
fn test_view_shapes_and_decision() {
    let v = test_view("m1", "normal:0,1", 150, 3, "gaussian", 0.14).unwrap();
    assert_eq!(v.series.len(), 150);
    assert_eq!(v.theta_hat.len(), 3);
    assert_eq!(v.x.len(), v.f_hat.len());
    assert_eq!(v.x.len(), v.f0.len());
    assert!(v.f_hat.iter().all(|&y| y >= 0.0));
    assert_eq!(v.report.reject, v.report.p_value < 0.05);
    assert!(v.report.baseline_ks.is_some());
    let json = serde_json::to_string(&v).unwrap();
    assert!(json.contains("\"reject\""));
}

#[test]
fn shifted_noise_is_rejected() {
    let v = test_view("m0", "normal:1,1", 400, 1, "gaussian", 0.14).unwrap();
    assert!(v.report.reject);
}

#[test]
fn bad_inputs_are_errors() {
    assert!(test_view("m7", "normal:0,1", 100, 1, "gaussian", 0.14).is_err());
    assert!(test_view("m1", "normal:0", 100, 1, "gaussian", 0.14).is_err());
    assert!(test_view("m1", "normal:0,1", 100, 1, "box", 0.14).is_err());
    assert!(power_view("m0", 100, 10, 1, "scale", &[1.0]).is_err());
    assert!(wiener_view(100, 1000, 1, 10).is_err());
}

#[test]
fn power_view_is_monotone_in_the_shift() {
    let p = power_view("m0", 100, 100, 1, "mean", &[0.0, 1.0]).unwrap();
    assert_eq!(p.len(), 2);
    assert!(p[1].br > p[0].br);
    assert!(p[1].ks > p[0].ks);
}

#[test]
fn wiener_histogram_counts_paths_below_q99() {
    let w = wiener_view(10_000, 1000, 2, 20).unwrap();
    assert!(w.q90 <= w.q95 && w.q95 <= w.q99);
    assert_eq!(w.edges.len(), 21);
    let total: usize = w.counts.iter().sum();
    assert!((9850..=9910).contains(&total), "{total}");
}
