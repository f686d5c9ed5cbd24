use gcm::ingest::{generic_ids, read_panel, standardize, write_panel, ColumnMapping, ColumnNames};
use gcm::AppError;
use gcm_core::model::Dims;
use gcm_core::GrowthCurveDataset;
use proptest::prelude::*;

fn read(text: &str) -> Result<gcm::ingest::Panel, AppError> {
    read_panel(text.as_bytes(), &ColumnMapping::default())
}

fn data_error(text: &str) -> String {
    match read(text) {
        Err(AppError::Data(msg)) => msg,
        other => panic!("expected a data error, got {other:?}"),
    }
}

#[test]
fn two_subjects_three_rows_two_regions() {
    let p = read("subject,time,y_1,y_2\n1,0,1,2\n1,1,3,4\n1,2,5,6\n2,0,7,8\n2,1,9,10\n2,2,11,12\n").unwrap();
    let d = p.dataset.dims();
    assert_eq!((d.n_subjects, d.n_times, d.n_regions, d.n_static, d.n_dynamic), (2, 3, 2, 0, 0));
    assert_eq!(p.dataset.response(1, 1, 2), 12.0);
}

#[test]
fn ragged_subject_is_named() {
    let msg = data_error("subject,time,y_1\na,0,1\na,1,1\na,2,1\nb,0,1\nb,1,1\nc,0,1\nc,1,1\nc,2,1\n");
    assert!(msg.contains("ragged") && msg.contains("'b' (2 rows)"), "{msg}");
    assert!(!msg.contains("'a'") && !msg.contains("'c'"), "{msg}");
}

#[test]
fn varying_static_covariate_is_rejected() {
    let msg = data_error("subject,time,x_age,y_1\na,0,70,1\na,1,71,1\na,2,70,1\n");
    assert!(msg.contains("time-invariant column varies") && msg.contains("x_age") && msg.contains("'a'"), "{msg}");
}

#[test]
fn non_numeric_cell_reports_row_and_column() {
    let msg = data_error("subject,time,z_1,y_1\na,0,1,1\na,1,oops,1\na,2,1,1\n");
    assert!(msg.contains("row 3") && msg.contains("'z_1'") && msg.contains("'oops'"), "{msg}");
    let msg = data_error("subject,time,y_1\na,0,1\na,1,inf\na,2,1\n");
    assert!(msg.contains("not finite"), "{msg}");
}

#[test]
fn duplicate_subject_time_is_rejected() {
    let msg = data_error("subject,time,y_1\na,0,1\na,1,2\na,1,3\n");
    assert!(msg.contains("duplicate (subject, time) = (a, 1)") && msg.contains("rows 3 and 4"), "{msg}");
}

#[test]
fn too_few_time_points() {
    let msg = data_error("subject,time,y_1\na,0,1\na,1,2\nb,0,1\nb,1,2\n");
    assert!(msg.contains("at least 3"), "{msg}");
}

#[test]
fn mapped_columns_must_be_disjoint_and_present() {
    let mapping = ColumnMapping {
        static_columns: Some(vec!["y_1".into()]),
        ..ColumnMapping::default()
    };
    let err = read_panel("subject,time,y_1\na,0,1\n".as_bytes(), &mapping).unwrap_err();
    assert!(err.to_string().contains("both static and response"), "{err}");
    let mapping = ColumnMapping {
        id: "patient".into(),
        ..ColumnMapping::default()
    };
    let err = read_panel("subject,time,y_1\na,0,1\n".as_bytes(), &mapping).unwrap_err();
    assert!(err.to_string().contains("'patient' not found"), "{err}");
}

#[test]
fn explicit_mapping_selects_columns() {
    let mapping = ColumnMapping {
        id: "id".into(),
        time: "visit".into(),
        static_columns: Some(vec!["age".into()]),
        dynamic_columns: Some(vec![]),
        response_columns: Some(vec!["hippo".into(), "amyg".into()]),
    };
    let text = "id,visit,age,hippo,amyg,ignored\n7,0,80,1,2,x\n7,1,80,3,4,y\n7,2,80,5,6,z\n";
    let p = read_panel(text.as_bytes(), &mapping).unwrap();
    assert_eq!(p.names.responses, ["hippo", "amyg"]);
    assert_eq!(p.dataset.static_of(0), &[80.0]);
    assert_eq!(p.dataset.response(0, 1, 2), 6.0);
}

#[test]
fn standardization_scales_continuous_columns_only() {
    let text = "subject,time,x_age,x_sex,z_score,y_1\n\
        a,0,60,0,1,0\na,1,60,0,2,0\na,2,60,0,3,0\n\
        b,0,70,1,4,0\nb,1,70,1,5,0\nb,2,70,1,6,0\n\
        c,0,90,1,7,0\nc,1,90,1,8,0\nc,2,90,1,9,0\n";
    let mut p = read(text).unwrap();
    standardize(&mut p).unwrap();
    let ages: Vec<f64> = (0..3).map(|i| p.dataset.static_of(i)[0]).collect();
    let mean = ages.iter().sum::<f64>() / 3.0;
    let var = ages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / 2.0;
    assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    assert_eq!((0..3).map(|i| p.dataset.static_of(i)[1]).collect::<Vec<_>>(), [0.0, 1.0, 1.0]);
    let z: Vec<f64> = p.dataset.dynamic_covariates().to_vec();
    assert!((z.iter().sum::<f64>()).abs() < 1e-12);
    let applied: Vec<bool> = p.scaling.iter().map(|s| s.applied).collect();
    assert_eq!(applied, [true, false, true]);
}

fn arb_dataset() -> impl Strategy<Value = GrowthCurveDataset> {
    (1usize..5, 1usize..4, 3usize..5, 0usize..3, 0usize..3).prop_flat_map(|(n, r, t, p, q)| {
        let dims = Dims {
            n_subjects: n,
            n_regions: r,
            n_times: t,
            n_static: p,
            n_dynamic: q,
        };
        let value = prop_oneof![-1e6f64..1e6, any::<f64>().prop_filter("finite", |v| v.is_finite())];
        (
            prop::collection::vec(value.clone(), n * r * t),
            prop::collection::vec(prop::collection::btree_set(-1000i32..1000, t), n),
            prop::collection::vec(value.clone(), n * p),
            prop::collection::vec(value, n * t * q),
        )
            .prop_map(move |(y, g, x, z)| {
                let times = g.into_iter().flat_map(|s| s.into_iter().map(|v| v as f64 / 7.0)).collect();
                GrowthCurveDataset::new(dims, y, times, x, z).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn serialize_then_ingest_is_identity(ds in arb_dataset()) {
        let names = ColumnNames::generic(ds.dims());
        let ids = generic_ids(ds.n_subjects());
        let mut buf = Vec::new();
        write_panel(&mut buf, &ds, &ids, &names).unwrap();
        let back = read_panel(&buf[..], &ColumnMapping::default()).unwrap();
        prop_assert_eq!(&back.dataset, &ds);
        prop_assert_eq!(&back.subject_ids, &ids);
        prop_assert_eq!(&back.names, &names);

        // ingest -> serialize -> ingest on shuffled rows
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let header = lines.remove(0);
        lines.reverse();
        let shuffled = format!("{header}\n{}\n", lines.join("\n"));
        let first = read_panel(shuffled.as_bytes(), &ColumnMapping::default()).unwrap();
        let mut again = Vec::new();
        write_panel(&mut again, &first.dataset, &first.subject_ids, &first.names).unwrap();
        let second = read_panel(&again[..], &ColumnMapping::default()).unwrap();
        prop_assert_eq!(first, second);
    }
}
