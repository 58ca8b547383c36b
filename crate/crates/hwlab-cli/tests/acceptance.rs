//! Determinism gate for the command-line interface: every subcommand,
//! run twice with the same configuration and seed at each of two thread
//! counts, must produce byte-identical report files. Prints one PASS or
//! FAIL line; run with `--nocapture` to see it on success.

use std::fs;
use std::path::Path;
use std::process::Command;

/// Runs the binary with `args` plus an output directory and a thread
/// count; returns the exit code and the sorted (name, bytes) listing of
/// the output directory.
fn run_once(args: &[String], out_dir: &Path, threads: &str) -> (i32, Vec<(String, Vec<u8>)>) {
    fs::create_dir_all(out_dir).unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_hwlab"))
        .args(args)
        .arg("--output-dir")
        .arg(out_dir)
        .arg("--threads")
        .arg(threads)
        .output()
        .expect("binary runs");
    let code = output.status.code().unwrap_or(-1);
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(out_dir)
        .unwrap()
        .map(|entry| {
            let entry = entry.unwrap();
            (
                entry.file_name().into_string().unwrap(),
                fs::read(entry.path()).unwrap(),
            )
        })
        .collect();
    files.sort_by(|a, b| a.0.cmp(&b.0));
    (code, files)
}

fn strs(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

#[test]
fn criterion_11_reports_are_bit_identical_across_runs_and_threads() {
    let root = tempfile::tempdir().unwrap();
    let inputs = root.path().join("inputs");
    fs::create_dir_all(&inputs).unwrap();

    // Family directory: two 3x3 members listed in a manifest, centers
    // resolved analytically from the Gaussian sampler.
    fs::write(
        inputs.join("m0.txt"),
        "3 3\n1 0 0.5\n0 -2 0\n0.5 0 1.5\n",
    )
    .unwrap();
    fs::write(
        inputs.join("m1.txt"),
        "3 3\n0 1 0\n1 0.5 -1\n0 -1 2\n",
    )
    .unwrap();
    fs::write(inputs.join("manifest.txt"), "m0.txt\nm1.txt\n").unwrap();
    fs::write(inputs.join("weights.txt"), "1 0.5 2 0.25\n").unwrap();
    fs::write(inputs.join("point.txt"), "0.8 -0.6 0.3 1.2\n").unwrap();

    let family_dir = inputs.to_str().unwrap().to_string();
    let weights = inputs.join("weights.txt").to_str().unwrap().to_string();
    let point = inputs.join("point.txt").to_str().unwrap().to_string();

    let commands: Vec<(&str, Vec<String>)> = vec![
        (
            "bound",
            strs(&[
                "bound", "--kind", "convex-hw", "--hs", "1", "--op", "1", "--K", "1.414",
                "--covnorm", "1", "--C", "8", "--t-grid", "0:10:0.5", "--format", "json",
            ]),
        ),
        (
            "tail",
            strs(&[
                "tail", "--matrix", "identity8", "--sampler", "gaussian", "--N", "2000",
                "--seed", "7", "--t-grid", "0:24:0.5",
            ]),
        ),
        (
            "uniform-tail",
            vec![
                "uniform-tail".into(),
                "--family-dir".into(),
                family_dir,
                "--sampler".into(),
                "gaussian".into(),
                "--N".into(),
                "1500".into(),
                "--seed".into(),
                "11".into(),
                "--t-grid".into(),
                "0:30:1".into(),
                "--family-norm-samples".into(),
                "2000".into(),
            ],
        ),
        (
            "envelope",
            vec![
                "envelope".into(),
                "--weights-file".into(),
                weights,
                "--point-file".into(),
                point,
                "--radius".into(),
                "0.9".into(),
                "--seed".into(),
                "3".into(),
            ],
        ),
        (
            "covest",
            strs(&[
                "covest", "--basis", "identity4", "--n", "30", "--R", "60", "--t-values",
                "1,2", "--seed", "5",
            ]),
        ),
        (
            "verify-concentration",
            strs(&[
                "verify-concentration", "--sampler", "gaussian", "--dim", "4",
                "--n-functions", "40", "--N", "1000", "--seed", "3", "--t-grid", "0:8:0.5",
            ]),
        ),
        (
            "lemmas",
            strs(&[
                "lemmas", "--sampler", "gaussian", "--dim", "2", "--N", "5000", "--seed", "9",
            ]),
        ),
    ];

    let mut failures: Vec<String> = Vec::new();
    for (idx, (name, args)) in commands.iter().enumerate() {
        // Two runs per thread count; everything must agree byte for byte.
        let mut listings: Vec<(String, Vec<(String, Vec<u8>)>)> = Vec::new();
        for (run, threads) in [(0, "1"), (1, "1"), (2, "4"), (3, "4")] {
            let out_dir = root.path().join(format!("out-{idx}-{run}"));
            let (code, files) = run_once(args, &out_dir, threads);
            if code != 0 {
                failures.push(format!("{name}: exit code {code} on run {run}"));
            }
            if files.is_empty() {
                failures.push(format!("{name}: run {run} wrote no report files"));
            }
            listings.push((format!("run {run} (threads {threads})"), files));
        }
        let (ref base_label, ref base) = listings[0];
        for (label, files) in &listings[1..] {
            if files.len() != base.len()
                || files.iter().zip(base).any(|(a, b)| a.0 != b.0)
            {
                failures.push(format!(
                    "{name}: {label} produced different file names than {base_label}"
                ));
                continue;
            }
            for ((fname, bytes), (_, base_bytes)) in files.iter().zip(base) {
                if bytes != base_bytes {
                    failures.push(format!(
                        "{name}: {fname} differs between {base_label} and {label}"
                    ));
                }
            }
        }
    }

    if failures.is_empty() {
        println!("criterion 11 (bit-identical reports across reruns and thread counts): PASS");
    } else {
        println!(
            "criterion 11 (bit-identical reports across reruns and thread counts): FAIL [{}]",
            failures[0]
        );
        panic!(
            "criterion 11: {} failure(s): {}",
            failures.len(),
            failures.join("; ")
        );
    }
}
