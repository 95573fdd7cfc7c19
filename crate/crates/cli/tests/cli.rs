use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use supplyplan::supply::Instance;

const T1: &str = r#"{"meta":{"q":10,"alpha":0.5},
"suppliers":[{"id":"k1","r":0,"v":1000000,"plants":["p1"]}],
"destinations":[{"id":"d1","b_bar":8,"g":100,"l0":0}],
"arcs":[{"plant":"p1","supplier":"k1","destination":"d1","t":2}]}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_supplyplan"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn t1_dir(demands: &[f64]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t1.json"), T1).unwrap();
    let rows: String = demands.iter().map(|d| format!("{d}\n")).collect();
    fs::write(dir.path().join("d.csv"), format!("d1\n{rows}")).unwrap();
    dir
}

#[test]
fn solve_sp_on_t1() {
    let dir = t1_dir(&[30.0, 50.0]);
    let o = run(
        dir.path(),
        &[
            "solve",
            "--model",
            "sp",
            "--instance",
            "t1.json",
            "--scenarios",
            "d.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("objective: 90.000000"));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("solution.json")).unwrap()).unwrap();
    assert_eq!(doc["status"], "Optimal");
    assert_eq!(doc["objective"], 90.0);
    assert_eq!(doc["values"]["x[p1,k1,d1]"], 5.0);
    assert_eq!(doc["values"]["z[1,p1,k1,d1]"], 3.0);
}

#[test]
fn omega_flags() {
    let dir = t1_dir(&[30.0, 50.0]);
    let base = [
        "solve",
        "--instance",
        "t1.json",
        "--demand-csv",
        "d.csv",
        "--model",
        "ro-ell",
    ];
    assert_eq!(run(dir.path(), &base).status.code(), Some(1));

    let mut both = base.to_vec();
    both.extend(["--omega", "1", "--epsilon", "0.1"]);
    assert_eq!(run(dir.path(), &both).status.code(), Some(1));

    let mut eps = base.to_vec();
    eps.extend(["--epsilon", "0.1"]);
    let o = run(dir.path(), &eps);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("omega: 2.145966"), "{}", stdout(&o));
}

#[test]
fn infeasible_and_bad_input_codes() {
    let dir = t1_dir(&[30.0]);
    let tight = T1.replace(r#""r":0"#, r#""r":200"#);
    fs::write(dir.path().join("tight.json"), tight).unwrap();
    let o = run(
        dir.path(),
        &[
            "solve",
            "--model",
            "ro-box",
            "--instance",
            "tight.json",
            "--scenarios",
            "d.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(2));

    let o = run(
        dir.path(),
        &[
            "solve",
            "--model",
            "sp",
            "--instance",
            "missing.json",
            "--scenarios",
            "d.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let o = run(
        dir.path(),
        &[
            "solve",
            "--model",
            "nope",
            "--instance",
            "t1.json",
            "--scenarios",
            "d.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let o = run(dir.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn evpi_on_t1() {
    let dir = t1_dir(&[30.0, 50.0]);
    let o = run(dir.path(), &["evpi", "--instance", "t1.json", "--scenarios", "d.csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("evpi: 10.000000"));
    assert!(fs::read_to_string(dir.path().join("evpi.csv"))
        .unwrap()
        .contains("evpi,10.000000"));
}

#[test]
fn compare_on_t1() {
    let dir = t1_dir(&[30.0, 50.0, 40.0]);
    let args = [
        "compare",
        "--instance",
        "t1.json",
        "--scenarios",
        "d.csv",
        "--sbar",
        "2",
    ];
    let o = run(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "tau,m1,m2,m3,m4,m5,ws");
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!((cells[0], cells[1], cells[6]), ("2", "90.000000", "80.000000"));
    assert_ne!(cells[5], "inf");
    assert!(lines[2].starts_with("aggregate,"));
    assert!(dir.path().join("plot.csv").exists());
    assert!(dir.path().join("timing.csv").exists());

    let again = run(dir.path(), &args);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("report.csv")).unwrap(), report);

    let o = run(
        dir.path(),
        &[
            "compare",
            "--instance",
            "t1.json",
            "--scenarios",
            "d.csv",
            "--methods",
            "m1,m2,ws",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    for line in report.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert!(!f[1].is_empty() && !f[2].is_empty() && !f[6].is_empty());
        assert!(f[3].is_empty() && f[4].is_empty() && f[5].is_empty());
    }

    let o = run(
        dir.path(),
        &[
            "compare",
            "--instance",
            "t1.json",
            "--scenarios",
            "d.csv",
            "--sbar",
            "3",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gen_is_seeded_and_loads_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |out: &str, seed: &str| {
        let o = run(
            dir.path(),
            &[
                "gen",
                "--suppliers",
                "6",
                "--destinations",
                "4",
                "--scenarios",
                "8",
                "--seed",
                seed,
                "--out",
                out,
            ],
        );
        assert_eq!(o.status.code(), Some(0));
    };
    gen("a", "3");
    gen("b", "3");
    gen("c", "4");
    for f in ["instance.json", "demands.csv", "costs.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
        if f == "demands.csv" {
            assert_ne!(a, fs::read(dir.path().join("c").join(f)).unwrap());
        }
    }
    let inst = Instance::load(dir.path().join("a/instance.json")).unwrap();
    assert!(inst.warnings().is_empty());
    assert_eq!(inst.q(), 31.0);
    assert_eq!(inst.alpha(), 0.7);

    let o = run(dir.path(), &["gen", "--suppliers", "0", "--out", "z"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn montecarlo_stability_and_stress() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "gen",
            "--suppliers",
            "6",
            "--destinations",
            "3",
            "--scenarios",
            "6",
            "--seed",
            "2",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let data = [
        "--instance",
        "instance.json",
        "--demand-csv",
        "demands.csv",
        "--cost-csv",
        "costs.csv",
    ];

    let mut mc = vec!["montecarlo", "--n", "0"];
    mc.extend(data);
    assert_eq!(run(dir.path(), &mc).status.code(), Some(0));
    assert_eq!(
        fs::read_to_string(dir.path().join("montecarlo.csv")).unwrap(),
        "draw,m1,m2,m3,m4,m5,ws\n"
    );

    let mut mc = vec!["montecarlo", "--n", "5", "--seed", "9", "--jobs", "1"];
    mc.extend(data);
    assert_eq!(run(dir.path(), &mc).status.code(), Some(0));
    let first = fs::read_to_string(dir.path().join("montecarlo.csv")).unwrap();
    assert_eq!(first.lines().count(), 1 + 5 + 2);
    assert_eq!(run(dir.path(), &mc).status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("montecarlo.csv")).unwrap(), first);

    let mut st = vec!["stability", "--s-list", "4,8", "--seed", "7"];
    st.extend(data);
    assert_eq!(run(dir.path(), &st).status.code(), Some(0));
    let curve = fs::read_to_string(dir.path().join("stability.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("s,sp,seed"));
    assert_eq!(run(dir.path(), &st).status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("stability.csv")).unwrap(), curve);

    let mut stress = vec!["stress"];
    stress.extend(data);
    assert_eq!(run(dir.path(), &stress).status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("stress.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
}
