//! Runs the `bates` binary: golden outputs, byte stability and exit codes.

use std::process::{Command, Output};

const S1: [&str; 5] = ["--preset", "S1", "--rate", "0.05", "--y0"];

fn bates(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bates")).args(args).output().unwrap()
}

fn s1(extra: &[&str]) -> Output {
    let mut args: Vec<&str> = S1.to_vec();
    args.push("eta");
    args.extend_from_slice(extra);
    bates(&args)
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn validate_matches_golden() {
    let o = s1(&["validate"]);
    assert_eq!(stdout(&o), include_str!("golden/validate_s1.ini"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Feller"));
}

#[test]
fn resolved_config_reads_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s1.ini");
    std::fs::write(&path, stdout(&s1(&["validate"]))).unwrap();
    let again = bates(&["--config", path.to_str().unwrap(), "validate"]);
    assert_eq!(stdout(&again), include_str!("golden/validate_s1.ini"));
}

#[test]
fn merton_price_matches_golden() {
    assert_eq!(
        stdout(&s1(&["price", "--method", "merton"])),
        include_str!("golden/price_merton_s1.csv")
    );
}

#[test]
fn price_rows_follow_the_schema() {
    let fft = stdout(&s1(&["price", "--method", "fft"]));
    let lines: Vec<&str> = fft.lines().collect();
    assert_eq!(lines[0], "method,s0,K,T,r,y0,price,stderr");
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells.len(), 8);
    assert_eq!(&cells[..6], ["fft", "100", "100", "1", "0.05", "0.04937"]);
    let price: f64 = cells[6].parse().unwrap();
    assert!(price > 100.0 - 100.0 * (-0.05f64).exp() && price < 100.0);
    assert_eq!(cells[7], "");

    let mc = stdout(&s1(&["--set", "mc.n_paths=20000", "price", "--method", "mc"]));
    let cells: Vec<&str> = mc.lines().nth(1).unwrap().split(',').collect();
    assert!(cells[7].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn compare_and_surface_are_byte_stable() {
    let cmp = ["--set", "grid.nx=24", "--set", "grid.ny=24", "--set", "grid.n_steps=20", "compare"];
    let a = stdout(&s1(&cmp));
    assert_eq!(a, stdout(&s1(&cmp)));
    assert!(a.starts_with("S,price_fem,price_fft,rel_diff\n"));
    assert_eq!(a.lines().count(), 10);

    let a = stdout(&s1(&["surface"]));
    assert_eq!(a, stdout(&s1(&["surface"])));
    assert_eq!(a.lines().count(), 1 + 9 * 5);
    assert!(!a.contains('\r'));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("surface.csv");
    let o = s1(&["--output", path.to_str().unwrap(), "surface"]);
    assert!(stdout(&o).is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), a);
}

#[test]
fn fem_surface_reads_all_strikes_from_one_solve_per_maturity() {
    let args = [
        "--set", "grid.nx=24", "--set", "grid.ny=24", "--set", "grid.n_steps=20",
        "surface", "--engine", "fem", "--strikes", "90,100,110", "--maturities", "0.5,1",
    ];
    let out = stdout(&s1(&args));
    let rows: Vec<Vec<f64>> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert!(r[3] > 0.05 && r[3] < 0.5, "{r:?}");
    }
}

#[test]
fn mesh_info_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("mesh.txt");
    let mats = dir.path().join("mats");
    let o = s1(&[
        "--set", "grid.nx=8", "--set", "grid.ny=8", "mesh-info",
        "--export-mesh", mesh.to_str().unwrap(), "--export-matrices", mats.to_str().unwrap(),
    ]);
    let text = stdout(&o);
    assert!(text.contains("nodes,81\n") && text.contains("triangles,128\n"));
    let m = bates_pide::Mesh::read(&mesh).unwrap();
    assert_eq!(m.n_nodes(), 81);
    let coo = std::fs::read_to_string(mats.join("mass.txt")).unwrap();
    assert!(coo.lines().count() > 81);
}

#[test]
fn exit_codes_partition_errors() {
    let code = |o: Output| o.status.code().unwrap();
    assert_eq!(code(bates(&["--preset", "S1", "--y0", "eta", "validate"])), 2);
    assert!(String::from_utf8_lossy(&bates(&["--preset", "S1", "--y0", "eta", "validate"]).stderr).contains("market.rate"));
    assert_eq!(code(s1(&["--set", "grid.nxx=3", "validate"])), 2);
    assert_eq!(code(s1(&["--set", "model.rho=1.5", "validate"])), 2);
    assert_eq!(code(s1(&["price", "--method", "nope"])), 2);
    assert_eq!(
        code(s1(&[
            "--set", "solver.linear_maxit=1", "--set", "grid.nx=8", "--set", "grid.ny=8",
            "--set", "grid.n_steps=1", "price", "--method", "fem",
        ])),
        3
    );
    assert_eq!(code(bates(&["--config", "/nonexistent/run.ini", "validate"])), 4);
    assert_eq!(code(s1(&["price", "--method", "merton"])), 0);
}
