use clap::Parser;
use hdgms_cli::{
    parse_penalty, run, BoundarySpec, CampaignEntry, Cli, Exit, MeshSpec, Status, VerifyCampaign,
};
use hdgms_core::geometry::Mesh;
use hdgms_core::hdg::{Family, Penalty};
use hdgms_core::msym::{MsclReport, RegionSampler, Tolerances};
use std::process::Command;

fn run_args(args: &[&str]) -> (Result<Exit, hdgms_cli::CliError>, String) {
    let cli = Cli::try_parse_from(std::iter::once("hdgms").chain(args.iter().copied())).expect("arguments parse");
    let mut out = Vec::new();
    let res = run(&cli, &mut out);
    (res, String::from_utf8(out).unwrap())
}

fn exit_of(args: &[&str]) -> u8 {
    match run_args(args).0 {
        Ok(e) => e.code(),
        Err(e) => e.exit().code(),
    }
}

fn rect_4x4() -> MeshSpec {
    MeshSpec::Rect { width: 1.0, height: 1.0, nx: 4, ny: 4, perturb: 0.2, seed: 7 }
}

#[test]
fn check_system_exit_codes() {
    let (res, text) = run_args(&["check-system", "poisson"]);
    assert_eq!(res.unwrap(), Exit::Pass);
    assert!(text.starts_with("PASS poisson"));
    assert_eq!(exit_of(&["check-system", "semilinear_sine"]), 0);
    assert_eq!(exit_of(&["check-system", "--system", "anisotropic:a=1/0.5/0.5/2"]), 0);
    assert_eq!(exit_of(&["check-system", "non_hamiltonian_control"]), 1);
    assert_eq!(exit_of(&["check-system", "heat"]), 2);
    assert_eq!(exit_of(&["check-system", "poisson:g=1"]), 2);
}

#[test]
fn check_system_json_records_unit_residual_for_control() {
    let (res, text) = run_args(&["check-system", "non_hamiltonian_control", "--json"]);
    assert_eq!(res.unwrap(), Exit::GateFailure);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["residual"].as_f64().unwrap(), 1.0);
    assert_eq!(v["pass"], false);
}

#[test]
fn counterexample_prints_five_pass_lines() {
    let (res, text) = run_args(&["counterexample"]);
    assert_eq!(res.unwrap(), Exit::Pass);
    let pass: Vec<&str> = text.lines().filter(|l| l.starts_with("PASS")).collect();
    assert_eq!(pass.len(), 5);
    assert!(!text.contains("FAIL"));
}

#[test]
fn counterexample_rejects_other_degrees() {
    assert_eq!(exit_of(&["counterexample", "--degree", "2"]), 2);
}

#[test]
fn counterexample_json_record() {
    let (res, text) = run_args(&["counterexample", "--json"]);
    assert_eq!(res.unwrap(), Exit::Pass);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["pass"], true);
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 5);
    let last = &checks[4];
    assert!((last["computed"][0].as_f64().unwrap() - 3f64.sqrt() / 6.0).abs() <= 1e-12);
}

#[test]
fn mesh_generators() {
    let (_, text) = run_args(&["mesh", "--two-equilateral"]);
    let m = Mesh::from_json(&text).unwrap();
    assert_eq!(m.vertices().len(), 4);
    assert_eq!(m.num_cells(), 2);

    let (_, text) = run_args(&["mesh", "--rect", "1x1", "--nx", "4", "--ny", "4", "--perturb", "0.2", "--seed", "7"]);
    assert_eq!(Mesh::from_json(&text).unwrap().num_cells(), 32);

    let (_, text) = run_args(&["mesh", "--interval", "0", "1", "--cells", "8"]);
    let m = Mesh::from_json(&text).unwrap();
    assert_eq!(m.dim(), 1);
    assert_eq!(m.num_cells(), 8);
}

#[test]
fn mesh_without_generator_is_a_usage_error() {
    assert_eq!(exit_of(&["mesh"]), 2);
    assert_eq!(exit_of(&["mesh", "--rect", "1by1"]), 2);
    assert_eq!(exit_of(&["mesh", "--rect", "1x1", "--perturb", "0.5"]), 2);
}

#[test]
fn mesh_file_round_trip_through_solve() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mesh.json");
    let p = path.to_str().unwrap();
    assert_eq!(exit_of(&["mesh", "--rect", "1x1", "--nx", "2", "--ny", "2", "--out", p]), 0);
    let (res, a) = run_args(&["solve", "--method", "rth", "--mesh", p, "--json"]);
    assert_eq!(res.unwrap(), Exit::Pass);
    let (_, b) = run_args(&["solve", "--method", "rth", "--rect", "1x1", "--nx", "2", "--ny", "2", "--json"]);
    assert_eq!(a, b);
}

#[test]
fn solve_reports_newton_iterations() {
    let (res, text) = run_args(&["solve", "--method", "ldgh-c", "--degree", "2", "--system", "semilinear_sine", "--rect", "1x1", "--nx", "2", "--ny", "2", "--json"]);
    assert_eq!(res.unwrap(), Exit::Pass);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let iters = v["newton_iterations"].as_u64().unwrap();
    assert!((2..=10).contains(&iters), "{iters}");
    assert_eq!(v["cells"].as_array().unwrap().len(), 8);
}

#[test]
fn solver_failures_exit_one_and_config_errors_two() {
    assert_eq!(exit_of(&["solve", "--method", "nch", "--degree", "2", "--rect", "1x1"]), 1);
    assert_eq!(exit_of(&["solve", "--method", "ldgh-b", "--penalty", "0", "--rect", "1x1"]), 1);
    assert_eq!(exit_of(&["solve", "--rect", "1x1"]), 2);
    assert_eq!(exit_of(&["solve", "--method", "rth", "--mesh", "/nonexistent/mesh.json"]), 2);
    assert_eq!(exit_of(&["solve", "--method", "cgh", "--degree", "0", "--rect", "1x1"]), 2);
    assert_eq!(exit_of(&["solve", "--method", "rth", "--system", "coupled_pair", "--penalty", "x", "--rect", "1x1"]), 2);
}

#[test]
fn penalty_parsing() {
    assert_eq!(parse_penalty("10").unwrap(), Penalty::uniform(10.0));
    assert_eq!(parse_penalty("1, 10").unwrap(), Penalty::two_sided(1.0, 10.0));
    assert!(parse_penalty("-1").is_err());
    assert!(parse_penalty("1,2,3").is_err());
}

#[test]
fn penalty_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("penalty.json");
    std::fs::write(&path, serde_json::to_string(&Penalty::two_sided(1.0, 10.0).with_override(0, 1, 3.0)).unwrap())
        .unwrap();
    let p = path.to_str().unwrap();
    let (res, text) = run_args(&["solve", "--method", "ldgh-a", "--penalty-file", p, "--rect", "1x1", "--nx", "1", "--ny", "1"]);
    assert_eq!(res.unwrap(), Exit::Pass);
    assert!(text.contains("lambda=1|10+1 overrides"), "{text}");
}

#[test]
fn verify_rt_poisson_perturbed_passes_all_gates() {
    let (res, text) = run_args(&["verify", "--method", "rth", "--rect", "1x1", "--perturb", "0.2", "--seed", "7"]);
    assert_eq!(res.unwrap(), Exit::Pass, "{text}");
    assert!(text.contains("1/1 entries pass"));
}

#[test]
fn verify_cg_two_triangles_expected_strong_failure() {
    assert_eq!(exit_of(&["verify", "--method", "cgh", "--two-equilateral", "--expect-strong-fail"]), 0);
    assert_eq!(exit_of(&["verify", "--method", "cgh", "--two-equilateral"]), 1);
    assert_eq!(exit_of(&["verify", "--method", "rth", "--two-equilateral", "--expect-strong-fail"]), 1);
}

#[test]
fn verify_cg_interval_strong_pass() {
    assert_eq!(exit_of(&["verify", "--method", "cgh", "--degree", "2", "--interval", "0", "1", "--cells", "8"]), 0);
}

#[test]
fn campaign_round_trip() {
    let mut cg = CampaignEntry::new(Family::CgH, 1, "poisson", MeshSpec::TwoEquilateral);
    cg.expect_strong_fail = true;
    cg.boundary = BoundarySpec::Zero;
    let mut ldg = CampaignEntry::new(Family::LdgHC, 2, "linear_elliptic:c=0.5", rect_4x4());
    ldg.penalty = Penalty::two_sided(1.0, 10.0).with_override(3, 0, 2.5);
    ldg.sampler = RegionSampler { count: 4, seed: 9 };
    let campaign = VerifyCampaign {
        output: Some("reports".into()),
        tolerances: Tolerances { strong: 1e-8, ..Default::default() },
        entries: vec![
            cg,
            ldg,
            CampaignEntry::new(Family::CgH, 2, "poisson", MeshSpec::Interval { a: 0.0, b: 1.0, cells: 8 }),
            CampaignEntry::new(Family::RtH, 0, "poisson", MeshSpec::File { path: "m.json".into() }),
        ],
    };
    let back = VerifyCampaign::from_json(&campaign.to_json()).unwrap();
    assert_eq!(back, campaign);
}

#[test]
fn campaign_defaults_and_unknown_fields() {
    let text = r#"{"entries": [{"method": "rth", "degree": 1, "system": "poisson",
        "mesh": {"kind": "rect", "width": 1, "height": 1, "nx": 2, "ny": 2}}]}"#;
    let c = VerifyCampaign::from_json(text).unwrap();
    assert_eq!(c.tolerances, Tolerances::default());
    assert_eq!(c.entries[0].boundary, BoundarySpec::Random { seed: 0 });
    assert_eq!(c.entries[0].penalty, Penalty::uniform(1.0));
    assert!(VerifyCampaign::from_json(&text.replace("\"degree\"", "\"order\"")).is_err());
}

#[test]
fn campaign_validation_rejects_unknown_system() {
    let c = VerifyCampaign {
        output: None,
        tolerances: Tolerances::default(),
        entries: vec![CampaignEntry::new(Family::RtH, 1, "heat", MeshSpec::TwoEquilateral)],
    };
    assert!(c.validate().is_err());
    let empty = VerifyCampaign { entries: vec![], ..c };
    assert!(empty.validate().is_err());
}

#[test]
fn campaign_reports_and_statuses() {
    let mut cg = CampaignEntry::new(Family::CgH, 1, "poisson", MeshSpec::TwoEquilateral);
    cg.expect_strong_fail = true;
    let campaign = VerifyCampaign {
        output: None,
        tolerances: Tolerances::default(),
        entries: vec![
            CampaignEntry::new(Family::RtH, 1, "poisson", rect_4x4()),
            cg,
            CampaignEntry::new(Family::CgH, 2, "poisson", MeshSpec::Interval { a: 0.0, b: 1.0, cells: 8 }),
            CampaignEntry::new(Family::NcH, 2, "poisson", rect_4x4()),
        ],
    };
    let outcomes = campaign.run();
    let statuses: Vec<Status> = outcomes.iter().map(|o| o.status).collect();
    assert_eq!(statuses, vec![Status::Pass, Status::ExpectedFail, Status::Pass, Status::Error]);
    let cg = outcomes[1].report.as_ref().unwrap();
    assert!((cg.strong_max() - 1.0 / 3f64.sqrt()).abs() <= 1e-12);
    assert!(outcomes[3].report.as_ref().unwrap_err().contains("singular local block"));
}

#[test]
fn verify_campaign_file_writes_deterministic_reports() {
    let dir = tempfile::tempdir().unwrap();
    let mut cg = CampaignEntry::new(Family::CgH, 1, "poisson", MeshSpec::TwoEquilateral);
    cg.expect_strong_fail = true;
    let campaign = VerifyCampaign {
        output: Some(dir.path().join("a")),
        tolerances: Tolerances::default(),
        entries: vec![
            CampaignEntry::new(Family::LdgHB, 1, "semilinear_sine:kappa=0.5", rect_4x4()),
            cg,
        ],
    };
    let path = dir.path().join("campaign.json");
    std::fs::write(&path, campaign.to_json()).unwrap();
    let p = path.to_str().unwrap();
    let (res, text) = run_args(&["verify", "--campaign", p]);
    assert_eq!(res.unwrap(), Exit::Pass, "{text}");
    let b = dir.path().join("b");
    assert_eq!(exit_of(&["verify", "--campaign", p, "--out", b.to_str().unwrap()]), 0);
    for name in ["000_ldgh-b_r1_semilinear_sine-kappa-0-5.json", "001_cgh_r1_poisson.json"] {
        let first = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let second = std::fs::read(b.join(name)).unwrap();
        assert_eq!(first, second);
        let rep = MsclReport::from_json(std::str::from_utf8(&first).unwrap()).unwrap();
        assert!(rep.passes.local);
    }
    assert_eq!(exit_of(&["verify", "--campaign", p, "--method", "rth"]), 2);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_hdgms");
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code().unwrap();
    assert_eq!(code(&["check-system", "poisson"]), 0);
    assert_eq!(code(&["check-system", "non_hamiltonian_control"]), 1);
    assert_eq!(code(&["check-system", "heat"]), 2);
    assert_eq!(code(&["counterexample"]), 0);
    assert_eq!(code(&["counterexample", "--degree", "2"]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&["solve", "--method", "bogus", "--rect", "1x1"]), 2);
}

#[test]
fn binary_output_is_deterministic() {
    let bin = env!("CARGO_BIN_EXE_hdgms");
    let args = ["verify", "--method", "iph", "--degree", "2", "--system", "anisotropic", "--rect", "1x1", "--perturb", "0.2", "--seed", "3", "--json"];
    let a = Command::new(bin).args(args).output().unwrap();
    let b = Command::new(bin).args(args).output().unwrap();
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
}
