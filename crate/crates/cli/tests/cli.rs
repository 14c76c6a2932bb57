use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reqgrid"))
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// A config over the bundled data with the given models and grid section.
fn write_config(dir: &Path, models: &str, grid: &str) -> PathBuf {
    let data = root().join("data");
    let text = format!(
        r#"
[datasets.promise]
path = "{p}"
schemes = ["promise"]

[datasets.secreq]
path = "{s}"
schemes = ["secreq"]

[datasets.functional_quality]
path = "{f}"
schemes = ["functional", "quality"]

[grid]
{grid}

{models}

[backend]
retries = 0
parallelism = 2
initial_backoff_ms = 1
"#,
        p = data.join("promise.csv").display(),
        s = data.join("secreq.csv").display(),
        f = data.join("functional_quality.csv").display(),
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

const SMALL_MODELS: &str = r#"
[[models]]
id = "bloom-mock"
salt = "bloom"

[[models]]
id = "sbert-mock"
pipeline = "embedding"
dim = 384
"#;

const SMALL_GRID: &str = r#"
patterns = ["is-about-assertion", "belongs-to-definition"]
variations = ["punct-strip", "label-lower"]
tasks = ["Security", "NFR"]
"#;

#[test]
fn dry_run_lists_the_canonical_grid() {
    let out = ok(bin()
        .args(["run", "--dry-run", "--config"])
        .arg(root().join("configs/canonical.toml"))
        .output()
        .unwrap());
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 460);
    assert_eq!(lines[0], "bloom-mock__Functional__is-about-assertion__punct-strip");
    assert_eq!(lines[459], "allmini-mock__NFR-Top4__embedding");

    let binary = ok(bin()
        .args(["run", "--dry-run", "--family", "binary", "--pipeline", "inference", "--config"])
        .arg(root().join("configs/canonical.toml"))
        .output()
        .unwrap());
    assert_eq!(binary.lines().count(), 270);
}

#[test]
fn run_audit_stats_compare() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_MODELS, SMALL_GRID);
    let out = dir.path().join("results");
    let stdout = ok(bin().args(["run", "--config"]).arg(&config).arg("--out").arg(&out).output().unwrap());
    assert!(stdout.contains("planned 10 settings, executed 10"));
    assert!(out.join("report.md").is_file());

    let audit = ok(bin().args(["audit", "--results"]).arg(&out).output().unwrap());
    assert!(audit.contains("30 values match"), "{audit}");

    let stats = ok(bin()
        .args(["stats", "--factor", "pattern", "--measure", "wf1", "--results"])
        .arg(&out)
        .output()
        .unwrap());
    assert!(stats.starts_with("family,measure,factor,level,avg,max,times_best,contexts"));
    assert!(stats.contains("family,measure,factor,method,statistic,df,p_value,n,mark"));
    assert!(stats.contains("binary,wF1,pattern,friedman"));

    let emb = dir.path().join("embedding");
    ok(bin()
        .args(["run", "--pipeline", "embedding", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&emb)
        .output()
        .unwrap());
    let cmp = ok(bin()
        .args(["compare", "--task", "Security", "--a"])
        .arg(&out)
        .arg("--b")
        .arg(&emb)
        .output()
        .unwrap());
    let rows: Vec<&str> = cmp.lines().collect();
    assert_eq!(rows[0], "family,measure,task,comparison,method,statistic,df,p_value,n,mark");
    assert!(rows[1].starts_with("binary,wF1,Security,"), "{}", rows[1]);
    assert_eq!(rows.len(), 2);
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "nonsense = true\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let missing = bin().args(["audit", "--results"]).arg(dir.path().join("nope")).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));

    let http = r#"
[[models]]
id = "remote"
backend = "http"
url = "http://127.0.0.1:9"
"#;
    let grid = r#"
patterns = ["is-about-assertion"]
variations = ["punct-strip"]
tasks = ["Security"]
"#;
    let config = write_config(dir.path(), http, grid);
    let out = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("r"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let unknown = bin().args(["stats", "--factor", "colour", "--results"]).arg(dir.path()).output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn synth_regenerates_the_bundled_data() {
    let dir = tempfile::tempdir().unwrap();
    ok(bin().args(["synth", "--out"]).arg(dir.path()).output().unwrap());
    for name in ["promise.csv", "secreq.csv", "functional_quality.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(root().join("data").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn killed_run_resumes_to_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let models = r#"
[[models]]
id = "gemma-mock"
salt = "gemma"
"#;
    let config = write_config(dir.path(), models, "");
    let clean = dir.path().join("clean");
    ok(bin().args(["run", "--config"]).arg(&config).arg("--out").arg(&clean).output().unwrap());

    let killed = dir.path().join("killed");
    let mut child = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&killed)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let settings = killed.join("settings");
    let deadline = Instant::now() + Duration::from_secs(60);
    while Instant::now() < deadline {
        let done = std::fs::read_dir(&settings).map(|d| d.count()).unwrap_or(0);
        if done >= 20 || child.try_wait().unwrap().is_some() {
            break;
        }
        std::thread::sleep(Duration::from_millis(2));
    }
    let _ = child.kill();
    child.wait().unwrap();

    ok(bin()
        .args(["run", "--resume", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&killed)
        .output()
        .unwrap());
    assert_eq!(
        std::fs::read(clean.join("results.csv")).unwrap(),
        std::fs::read(killed.join("results.csv")).unwrap()
    );
    ok(bin().args(["audit", "--results"]).arg(&killed).output().unwrap());
}
