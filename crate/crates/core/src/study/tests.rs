use super::*;

fn small(mode: Mode) -> StudyConfig {
    StudyConfig {
        degrees: vec![1],
        lambdas: vec![1.0],
        gammas: vec![40.0],
        nev: 2,
        reference_levels: Some(LevelRange::new(0, 2).unwrap()),
        ..StudyConfig::new(Domain::Square, mode, LevelRange::new(0, 1).unwrap())
    }
}

#[test]
fn level_range_parsing() {
    assert_eq!("1:5".parse::<LevelRange>().unwrap(), LevelRange { min: 1, max: 5 });
    assert_eq!("3".parse::<LevelRange>().unwrap(), LevelRange::single(3));
    assert!("5:1".parse::<LevelRange>().is_err());
    assert!("a:b".parse::<LevelRange>().is_err());
    assert_eq!(LevelRange::new(2, 4).unwrap().iter().collect::<Vec<_>>(), vec![2, 3, 4]);
}

#[test]
fn mode_names_round_trip() {
    for m in Mode::ALL {
        assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<Mode>(&json).unwrap(), m);
    }
    assert_eq!("EigenConvergence".parse::<Mode>().unwrap(), Mode::EigenConvergence);
    assert!("sweep".parse::<Mode>().is_err());
}

#[test]
fn config_file_uses_field_names_and_defaults() {
    let c = StudyConfig::from_json_str(
        r#"{"domain": "lshape", "levels": "1:3", "mode": "Robustness", "degrees": [1, 2], "lambdas": [1, 1e6]}"#,
    )
    .unwrap();
    assert_eq!(c.domain, Domain::LShape);
    assert_eq!(c.levels, LevelRange::new(1, 3).unwrap());
    assert_eq!(c.mode, Mode::Robustness);
    assert_eq!(c.degrees, vec![1, 2]);
    assert_eq!(c.lambdas, vec![1.0, 1e6]);
    assert_eq!(c.mu, 1.0);
    assert_eq!(c.gammas, vec![10.0, 40.0, 90.0]);
    assert_eq!(c.nev, 7);
    assert_eq!(c.seed, 0);
    assert_eq!(c.reference_levels(), LevelRange::new(1, 3).unwrap());

    let round = StudyConfig::from_json_str(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(round, c);
}

#[test]
fn default_lambda_sweep() {
    let c = StudyConfig::new(Domain::Square, Mode::Robustness, LevelRange::single(1));
    assert_eq!(c.lambdas, vec![1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6]);
}

#[test]
fn invalid_configs_are_config_errors() {
    let cases = [
        r#"{"domain": "hexagon", "levels": "1:2", "mode": "EigenConvergence"}"#,
        r#"{"domain": "square", "levels": "1:2", "mode": "Sweep"}"#,
        r#"{"domain": "square", "levels": "1:2", "mode": "EigenConvergence", "lambdas": [0]}"#,
        r#"{"domain": "square", "levels": "1:2", "mode": "EigenConvergence", "lambdas": []}"#,
        r#"{"domain": "square", "levels": "1:2", "mode": "EigenConvergence", "degrees": [4]}"#,
        r#"{"domain": "square", "levels": "1:7", "mode": "EigenConvergence"}"#,
        r#"{"domain": "cube", "levels": "1:4", "mode": "SourceConvergence"}"#,
        r#"{"domain": "square", "levels": "1:2", "mode": "ConformingCompare", "degrees": [3]}"#,
        r#"{"domain": "square", "levels": "1:2", "mode": "EigenConvergence", "nev": 0}"#,
        r#"{"domain": "square", "levels": "1:2", "mode": "EigenConvergence", "levls": "1:2"}"#,
        r#"{"domain": "square", "mode": "EigenConvergence"}"#,
        r#"{"domain": "square", "levels": "1:4", "mode": "EigenConvergence", "reference_levels": "3:4"}"#,
        r#"not json"#,
    ];
    for text in cases {
        assert!(matches!(StudyConfig::from_json_str(text), Err(Error::Config(_))), "{text}");
    }
    let unsupported = r#"{"domain": "cube", "levels": "0:1", "mode": "SourceConvergence", "cases": ["HARMONIC_PAIR_3"]}"#;
    assert!(matches!(StudyConfig::from_json_str(unsupported), Err(Error::UnknownCase { .. })));
}

#[test]
fn invalid_domain_stops_before_any_solve() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(&path, r#"{"domain": "circle", "levels": "1:5", "mode": "EigenConvergence"}"#).unwrap();
    let t = std::time::Instant::now();
    assert!(matches!(StudyConfig::from_file(&path), Err(Error::Config(_))));
    assert!(t.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn manifest_sits_next_to_csv() {
    assert_eq!(manifest_path(Path::new("out/results.csv")), PathBuf::from("out/results.manifest.json"));
    assert_eq!(manifest_path(Path::new("r.csv")), PathBuf::from("r.manifest.json"));
}

fn row(level: usize, error: f64, flags: Vec<Flag>) -> ConvergenceRecord {
    ConvergenceRecord {
        domain: Domain::Square,
        degree: 1,
        level,
        ndofs: 48 << (2 * level),
        lambda: 1.0,
        gamma: 40.0,
        quantity: "omega_1".into(),
        value: 1.0 + error,
        reference: 1.0,
        error,
        flags,
        wall_time_s: 0.0,
        h: 0.5f64.powi(level as i32),
        message: None,
    }
}

#[test]
fn csv_line_format() {
    let mut r = row(2, 0.25, vec![Flag::ReferenceLimited, Flag::Crossing]);
    r.lambda = 1e6;
    assert_eq!(
        r.csv_line(),
        "square,1,2,768,1e6,4e1,omega_1,1.25e0,1e0,2.5e-1,reference-limited;crossing,0.000"
    );
    let csv = csv_string(&[r]);
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(csv.lines().count(), 2);
    for line in csv.lines() {
        assert_eq!(line.split(',').count(), 12);
    }
}

#[test]
fn fits_skip_flagged_rows_and_the_coarsest_level() {
    let mut rows: Vec<ConvergenceRecord> = (1..=5).map(|l| row(l, 0.3 * 0.25f64.powi(l as i32), vec![])).collect();
    rows[0].error = 10.0; // pre-asymptotic outlier
    rows.push(row(6, 1e-30, vec![Flag::ReferenceLimited]));
    rows.push(row(7, 1.0, vec![Flag::Failed]));
    let fits = fit_rates(&rows);
    assert_eq!(fits.len(), 1);
    assert_eq!(fits[0].levels, vec![2, 3, 4, 5]);
    let rate = fits[0].rate.unwrap();
    assert!((rate.slope_vs_h - 2.0).abs() < 1e-12);
    assert!((rate.slope_vs_dofs + 1.0).abs() < 1e-12);
}

#[test]
fn three_levels_keep_the_coarsest() {
    let rows: Vec<ConvergenceRecord> = (1..=3).map(|l| row(l, 0.25f64.powi(l as i32), vec![])).collect();
    assert_eq!(fit_rates(&rows)[0].levels, vec![1, 2, 3]);
}

#[test]
fn eigen_convergence_rows_and_determinism() {
    let c = small(Mode::EigenConvergence);
    let rows = run(&c).unwrap();
    // two levels × (two eigenvalues + rigid count)
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert!(!r.is_failed(), "{r:?}");
        assert_eq!(r.ndofs, DgSpaceArithmetic::dofs(r.level, 1));
        assert!(r.error >= 0.0);
        assert_eq!(r.wall_time_s, 0.0);
    }
    let rigid: Vec<_> = rows.iter().filter(|r| r.quantity == "rigid_modes").collect();
    assert_eq!(rigid.len(), 2);
    assert!(rigid.iter().all(|r| r.value == 3.0));
    let again = run(&c).unwrap();
    assert_eq!(csv_string(&rows), csv_string(&again));
}

/// Square meshes have `2·4^l` cells.
struct DgSpaceArithmetic;

impl DgSpaceArithmetic {
    fn dofs(level: usize, k: usize) -> usize {
        let cells = 2 * 4usize.pow(level as u32);
        let n_basis = (k + 1) * (k + 2) / 2;
        cells * 2 * n_basis
    }
}

#[test]
fn robustness_single_level_has_no_rate() {
    let mut c = small(Mode::Robustness);
    c.levels = LevelRange::single(1);
    c.lambdas = vec![1.0, 1e4];
    let rows = run(&c).unwrap();
    assert_eq!(rows.iter().filter(|r| r.quantity == "omega_1").count(), 2);
    let fits = fit_rates(&rows);
    assert_eq!(fits.len(), 2);
    assert!(fits.iter().all(|f| f.rate.is_none()));
}

#[test]
fn source_rows_for_polynomial_case_are_exact() {
    let mut c = small(Mode::SourceConvergence);
    c.cases = Some(vec![ManufacturedCase::LinearDilation]);
    c.lambdas = vec![1.0, 1e6];
    let rows = run(&c).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 3);
    for r in &rows {
        assert!(!r.is_failed());
        assert!(r.error <= 1e-8 * 1e3, "{r:?}");
        assert_eq!(r.reference, 0.0);
    }
}

#[test]
fn conforming_compare_pairs_rows() {
    let c = small(Mode::ConformingCompare);
    let rows = run(&c).unwrap();
    let cg: Vec<_> = rows.iter().filter(|r| r.quantity.starts_with("cg_")).collect();
    let dg: Vec<_> = rows.iter().filter(|r| r.quantity.starts_with("dg_")).collect();
    assert_eq!(cg.len(), dg.len());
    for (p, q) in cg.iter().zip(&dg) {
        assert_eq!(p.quantity[3..], q.quantity[3..]);
        assert_eq!(p.level, q.level);
        assert_eq!(p.gamma, 0.0);
        assert!(!p.is_failed() && !q.is_failed());
    }
    let rigid = |rs: &[&ConvergenceRecord]| rs.iter().filter(|r| r.quantity.ends_with("rigid_modes")).map(|r| r.value).collect::<Vec<_>>();
    assert_eq!(rigid(&cg), rigid(&dg));
}

#[test]
fn failures_become_rows() {
    // P3 with γ = 10 is not coercive on these meshes.
    let mut c = small(Mode::EigenConvergence);
    c.degrees = vec![3];
    c.gammas = vec![10.0];
    c.levels = LevelRange::single(0);
    let rows = run(&c).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.is_failed() && r.message.is_some()));
    assert!(rows.iter().all(|r| r.csv_line().contains(",failed,")));
}

#[test]
fn non_coercive_reference_is_borrowed_from_a_larger_gamma() {
    let mut c = small(Mode::EigenConvergence);
    c.gammas = vec![10.0, 90.0];
    c.levels = LevelRange::single(1);
    let rows = run(&c).unwrap();
    let omega = |gamma: f64| rows.iter().find(|r| r.gamma == gamma && r.quantity == "omega_1").unwrap().clone();
    let (low, high) = (omega(10.0), omega(90.0));
    assert!(!low.is_failed(), "{low:?}");
    assert!(low.has(Flag::ReferenceFallback));
    assert!(!high.has(Flag::ReferenceFallback));
    assert_eq!(low.reference, high.reference);
}

#[test]
fn outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Mode::Robustness);
    c.output = dir.path().join("sub/r.csv");
    let rows = run(&c).unwrap();
    let now = SystemTime::now();
    let manifest = write_outputs(&c, &rows, now, now).unwrap();
    assert_eq!(manifest.rows, rows.len());
    assert_eq!(manifest.version, version_string());
    let csv = fs::read_to_string(&c.output).unwrap();
    assert_eq!(csv, csv_string(&rows));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sub/r.manifest.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["domain"], "square");
    assert_eq!(json["config"]["levels"], "0:1");
    assert!(json["started_unix_s"].as_u64().unwrap() > 0);
}
