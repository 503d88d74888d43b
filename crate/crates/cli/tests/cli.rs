use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn trapctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trapctl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("trapctl-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn lists_and_validates_builtins() {
    let o = trapctl(&["list-scenarios"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    let names: Vec<&str> = text
        .lines()
        .filter_map(|l| l.split_whitespace().next())
        .collect();
    assert!(names.contains(&"step-response") && names.contains(&"dac-spectra"));
    let mut args = vec!["validate"];
    args.extend(&names);
    assert!(trapctl(&args).status.success());
}

#[test]
fn dac_rate_over_cap_is_a_config_error() {
    let dir = scratch("rate");
    let p = write(
        &dir,
        "fast.toml",
        "name = \"fast\"\nseed = 1\n\n[dac]\nupdate_rate_hz = 500e3\n\n[[dac.sets]]\ndefault_volts = 1.0\n",
    );
    let o = trapctl(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 5") && err.contains("430 kHz"), "{err}");
}

#[test]
fn missing_seed_and_unknown_keys() {
    let dir = scratch("seed");
    let p = write(&dir, "s.toml", "name = \"s\"\n[coherence]\ntrials = 200\n");
    let o = trapctl(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed required"));

    let p = write(
        &dir,
        "u.toml",
        "name = \"u\"\nseed = 3\n[coherence]\ntrails = 200\n",
    );
    let o = trapctl(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 4") && err.contains("trails"), "{err}");
}

#[test]
fn failed_expectation_exits_one_and_seed_override_applies() {
    let dir = scratch("expect");
    let p = write(
        &dir,
        "c.toml",
        "name = \"c\"\nseed = 3\n[coherence]\ntrials = 200\n\n[[expect]]\nmetric = \"coherence_time_s\"\nmax = 0.1\n",
    );
    let out = dir.join("out");
    let o = trapctl(&[
        "run",
        "--config",
        p.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["seed"], 3);
    assert_eq!(report["metrics"][0]["module"], "analysis");

    let o = trapctl(&[
        "run",
        "--config",
        p.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "11",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 11);
}

#[test]
fn runtime_fault_exits_three() {
    let dir = scratch("fault");
    // A 3 GHz beat is outside the photodiode bandwidth.
    let p = write(
        &dir,
        "o.toml",
        "name = \"o\"\nseed = 1\n[offset_lock]\nduration_s = 0.01\n[[offset_lock.slaves]]\nstart_offset_hz = 3e9\n",
    );
    let out = dir.join("out");
    let o = trapctl(&[
        "run",
        "--config",
        p.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(out.join("offset_report_s0.csv").exists());
    let report = std::fs::read_to_string(out.join("report.json")).unwrap();
    assert!(
        report.contains("OutOfCapture") || report.contains("bandwidth"),
        "{report}"
    );
}

#[test]
fn dac_program_file_and_artifacts() {
    let dir = scratch("dac");
    let mut lines = Vec::new();
    for v in [0.0, 2.0] {
        let mut set = vec!["0".to_string(); 100];
        set[0] = v.to_string();
        lines.push(set.join(" "));
    }
    let prog = write(&dir, "ramp.txt", &(lines.join("\n") + "\n"));
    let cfg = write(
        &dir,
        "d.toml",
        "name = \"d\"\nseed = 2\n[dac]\nupdate_rate_hz = 100e3\nmodes = [\"asynchronous\"]\nsteps_between = [4]\n\
         program_file = \"ramp.txt\"\nband_hz = [1e5, 1e6]\n[dac.simulation]\nsample_rate_hz = 4e6\nduration_s = 0.005\nobserve = [0]\n",
    );
    let out = dir.join("out");
    let o = trapctl(&[
        "dac",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let events = std::fs::read_to_string(out.join("dac_events_asynchronous.jsonl")).unwrap();
    // One full write, then four interpolation steps on channel 0.
    assert_eq!(events.lines().count(), 104);
    let wave = std::fs::read_to_string(out.join("dac_waveform_asynchronous.csv")).unwrap();
    assert!(wave.starts_with("t_s,channel,volts\n"));

    let o = trapctl(&[
        "dac",
        "--program",
        prog.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let bad = write(&dir, "bad.txt", "1 2 3\n");
    let o = trapctl(&[
        "dac",
        "--program",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"));
}

#[test]
fn analyze_round_trip() {
    let dir = scratch("analyze");
    let mut rows = vec!["tau_s,visibility".to_string()];
    for k in 1..=8 {
        let t = 0.15 * f64::from(k);
        rows.push(format!("{t},{}", (-(t / 0.8f64).powi(2)).exp()));
    }
    let input = write(&dir, "v.csv", &(rows.join("\n") + "\n"));
    let out = dir.join("out");
    let o = trapctl(&[
        "analyze",
        "coherence",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let alpha = summary[0]["value"].as_f64().unwrap();
    assert!((alpha - 0.8).abs() < 1e-6, "{alpha}");

    let mut rows = vec!["t_s,freq_hz".to_string()];
    let mut x = 1u64;
    for i in 0..4096 {
        x = x
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        rows.push(format!(
            "{i},{}",
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        ));
    }
    let input = write(&dir, "f.csv", &(rows.join("\n") + "\n"));
    let o = trapctl(&[
        "analyze",
        "adev",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("adev.csv").exists());
}

#[test]
fn parallel_jobs_match_sequential() {
    let dir = scratch("jobs");
    let a = dir.join("seq");
    let b = dir.join("par");
    let names = ["averaging", "coherence", "intensity-gate"];
    let mut args = vec!["run"];
    args.extend(names);
    let mut seq = args.clone();
    seq.extend(["--out", a.to_str().unwrap()]);
    let mut par = args.clone();
    par.extend(["--out", b.to_str().unwrap(), "--jobs", "3"]);
    assert!(trapctl(&seq).status.success());
    assert!(trapctl(&par).status.success());
    for n in names {
        for entry in std::fs::read_dir(a.join(n)).unwrap() {
            let p = entry.unwrap().path();
            if p.extension().is_some_and(|e| e == "csv") {
                let q = b.join(n).join(p.file_name().unwrap());
                assert_eq!(
                    std::fs::read(&p).unwrap(),
                    std::fs::read(&q).unwrap(),
                    "{}",
                    p.display()
                );
            }
        }
    }
}
