use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fitmap_core::ingest::{read_snapshot, write_snapshot};
use fitmap_core::synth::{planted_case_study, raw_inputs, synthetic_snapshot, SynthConfig, PLANTED_BETA};
use tempfile::TempDir;

fn fitmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fitmap")).args(args).output().expect("spawn fitmap")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Inputs {
    dir: TempDir,
}

impl Inputs {
    fn new() -> Self {
        let cfg = SynthConfig { districts: 4, schools_per_district: 3, ..SynthConfig::default() };
        let raw = raw_inputs(&synthetic_snapshot(&cfg));
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("records-2019.csv"), &raw.records_csv).unwrap();
        fs::write(dir.path().join("sites.csv"), &raw.sites_csv).unwrap();
        fs::write(dir.path().join("districts.geojson"), &raw.boundaries_geojson).unwrap();
        fs::write(dir.path().join("long.mapping.txt"), &raw.mapping).unwrap();
        Inputs { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn ingest(&self, records: &str, extra: &[&str]) -> Output {
        let (sites, geo, out) = (self.path("sites.csv"), self.path("districts.geojson"), self.path("snap"));
        let mut args =
            vec!["ingest", "--records", records, "--sites", s(&sites), "--boundaries", s(&geo), "--out", s(&out)];
        args.extend_from_slice(extra);
        fitmap(&args)
    }
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&fitmap(&["--help"])), 0);
    assert_eq!(code(&fitmap(&["--version"])), 0);
    assert_eq!(code(&fitmap(&[])), 64);
    assert_eq!(code(&fitmap(&["ingest", "--bogus"])), 64);
    assert_eq!(code(&fitmap(&["regress", "--grade", "6"])), 64);
}

#[test]
fn ingest_builds_snapshot() {
    let inp = Inputs::new();
    let pattern = inp.path("records-*.csv");
    let issues = inp.path("issues.csv");
    let out = inp.ingest(s(&pattern), &["--issues-out", s(&issues)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("SuppressedCell"), "{stdout}");
    assert!(stdout.contains("UnmatchedGeometry"));
    let snap = read_snapshot(&inp.path("snap")).unwrap();
    assert!(snap.records().count() > 0);
    assert_eq!(snap.manifest().sources.len(), 3);
    assert!(fs::read_to_string(&issues).unwrap().starts_with("source,line,kind,detail"));

    // the same inputs through an explicit mapping give the same data
    let first = snap.checksum().to_string();
    let out = inp.ingest(s(&pattern), &["--mapping", s(&inp.path("long.mapping.txt"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(read_snapshot(&inp.path("snap")).unwrap().checksum(), first);
}

#[test]
fn sidecar_mapping_wins() {
    let inp = Inputs::new();
    let text = fs::read_to_string(inp.path("records-2019.csv")).unwrap();
    let renamed = text.replacen("entity,", "code,", 1);
    fs::write(inp.path("renamed.csv"), renamed).unwrap();
    let mapping = fs::read_to_string(inp.path("long.mapping.txt")).unwrap().replace("code = entity", "code = code");
    fs::write(inp.path("renamed.mapping"), mapping).unwrap();
    let out = inp.ingest(s(&inp.path("renamed.csv")), &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    fs::remove_file(inp.path("renamed.mapping")).unwrap();
    let out = inp.ingest(s(&inp.path("renamed.csv")), &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("\"entity\""), "{}", stderr(&out));
}

#[test]
fn ingest_failures() {
    let inp = Inputs::new();
    let out = inp.ingest(s(&inp.path("nothing-*.csv")), &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no records file matches"));

    let out = inp.ingest(s(&inp.path("records-2019.csv")), &["--mapping", s(&inp.path("absent.mapping"))]);
    assert_eq!(code(&out), 2);

    // every count suppressed: nothing to map
    let text = fs::read_to_string(inp.path("records-2019.csv")).unwrap();
    let mut lines = text.lines();
    let mut blanked = format!("{}\n", lines.next().unwrap());
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        blanked.push_str(&format!("{},*,*,*,*\n", cells[..5].join(",")));
    }
    fs::write(inp.path("blank.csv"), blanked).unwrap();
    let out = inp.ingest(s(&inp.path("blank.csv")), &[]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(!inp.path("snap").exists());
}

#[test]
fn serve_startup_failures() {
    let inp = Inputs::new();
    assert_eq!(code(&inp.ingest(s(&inp.path("records-2019.csv")), &[])), 0);
    let snap = inp.path("snap");

    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let out = fitmap(&["serve", "--snapshot", s(&snap), "--port", &port]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));

    let out = fitmap(&["serve", "--snapshot", s(&inp.path("missing")), "--port", "0"]);
    assert_eq!(code(&out), 2);

    let manifest = snap.join("manifest.json");
    let mut m: serde_json::Value = serde_json::from_slice(&fs::read(&manifest).unwrap()).unwrap();
    m["record_count"] = serde_json::json!(m["record_count"].as_u64().unwrap() + 1);
    fs::write(&manifest, m.to_string()).unwrap();
    let out = fitmap(&["serve", "--snapshot", s(&snap), "--port", "0"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn regress_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let planted = planted_case_study(3, 120, &PLANTED_BETA, 2.0);
    write_snapshot(&planted.snapshot, &dir.path().join("snap")).unwrap();
    let cov = dir.path().join("acs.csv");
    fs::write(&cov, &planted.covariates_csv).unwrap();
    let prefix = dir.path().join("out/aerobic");
    let snap = dir.path().join("snap");
    let base = ["regress", "--snapshot", s(&snap), "--dep", "aerobic-capacity"];

    let mut args = base.to_vec();
    args.extend(["--covariates", s(&cov), "--year", "2019", "--grade", "5", "--out", s(&prefix)]);
    let out = fitmap(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("out/aerobic.csv")).unwrap();
    assert!(csv.starts_with("term,estimate,std_error,t_stat,p_value,stars,vif"));
    assert_eq!(csv.lines().count(), 7);
    let residuals = fs::read_to_string(dir.path().join("out/aerobic-residuals.csv")).unwrap();
    assert_eq!(residuals.lines().count(), 121);
    assert!(fs::read_to_string(dir.path().join("out/aerobic.txt")).unwrap().contains("(Intercept)"));

    // a year the snapshot lacks joins nothing
    let mut args = base.to_vec();
    args.extend(["--covariates", s(&cov), "--year", "2018", "--grade", "5", "--out", s(&prefix)]);
    assert_eq!(code(&fitmap(&args)), 5);

    // one predictor that is constant is collinear with the intercept
    let constant: String = planted
        .covariates_csv
        .lines()
        .enumerate()
        .map(|(i, l)| if i == 0 { format!("{l},flat\n") } else { format!("{l},1\n") })
        .collect();
    fs::write(&cov, constant).unwrap();
    let mut args = base.to_vec();
    args.extend(["--covariates", s(&cov), "--year", "2019", "--grade", "5", "--out", s(&prefix)]);
    args.extend(["--predictor", "pct_computer", "--predictor", "flat=Flat"]);
    let out = fitmap(&args);
    assert_eq!(code(&out), 5, "{}", stderr(&out));

    let mut args = base.to_vec();
    args.extend(["--covariates", s(&cov), "--year", "2019", "--grade", "5", "--out", s(&prefix)]);
    args.extend(["--predictor", "missing_column"]);
    assert_eq!(code(&fitmap(&args)), 2);
}

#[test]
fn convert_codes() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("crosswalk.csv");
    fs::write(&table, "leaid,cdscode\n0601620,01611920000000\n0612345,19647330000000\n").unwrap();
    let input = dir.path().join("in.csv");
    // a spreadsheet that dropped the leading zero, and one unknown code
    fs::write(&input, "name,leaid,data\nA,601620,1.5\nB,0699999,2\nC,0612345,3\n").unwrap();
    let output = dir.path().join("out.csv");
    let out = fitmap(&[
        "convert-codes",
        "--table",
        s(&table),
        "--input",
        s(&input),
        "--from",
        "leaid",
        "--to",
        "cdscode",
        "--output",
        s(&output),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("1 of 3 rows had no match"));
    assert_eq!(
        fs::read_to_string(&output).unwrap(),
        "name,cdscode,data\nA,01611920000000,1.5\nB,,2\nC,19647330000000,3\n"
    );

    let out =
        fitmap(&["convert-codes", "--table", s(&table), "--input", s(&output), "--from", "cdscode", "--to", "leaid"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "name,leaid,data\nA,0601620,1.5\nB,,2\nC,0612345,3\n");

    fs::write(&table, "leaid,cds\n1,2\n").unwrap();
    let out =
        fitmap(&["convert-codes", "--table", s(&table), "--input", s(&input), "--from", "leaid", "--to", "cdscode"]);
    assert_eq!(code(&out), 2);
}
