//! End-to-end tests of the `slfm` binary: exit codes, stdout reports and
//! written artifacts.

use std::path::{Path, PathBuf};
use std::process::Command;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use slfm_core::container::{LatentContainer, HEADER_LEN};
use slfm_core::flow::{FieldShape, LossKind, VelocityField};
use slfm_core::numeric::norm;
use slfm_core::sphere::{radial_project, sample_gaussian};

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn slfm(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_slfm"))
        .args(args)
        .output()
        .expect("binary runs");
    Output {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn csv_rows(text: &str) -> Vec<Map<String, Value>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().expect("header").split(',').collect();
    lines
        .map(|l| {
            header
                .iter()
                .zip(l.split(','))
                .map(|(k, v)| (k.to_string(), Value::from(v.parse::<f64>().unwrap())))
                .collect()
        })
        .collect()
}

fn json_rows(text: &str) -> Vec<Map<String, Value>> {
    serde_json::from_str(text).unwrap()
}

fn col(rows: &[Map<String, Value>], key: &str) -> Vec<f64> {
    rows.iter().map(|r| r[key].as_f64().unwrap()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gaussian_container(dir: &Path, name: &str, d: usize, h: u32, w: u32, n: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tokens: Vec<Vec<f64>> = (0..n * (h * w) as usize).map(|_| sample_gaussian(d, &mut rng)).collect();
    let path = dir.join(name);
    LatentContainer::from_tokens(h, w, &tokens).unwrap().write(&path).unwrap();
    path
}

#[test]
fn gaussian_norms_reports_and_validates() {
    let out = slfm(&["gaussian-norms", "16", "32"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rows = csv_rows(&out.stdout);
    assert_eq!(col(&rows, "d"), vec![16.0, 32.0]);
    let means = col(&rows, "mean_radius_exact");
    assert_eq!(format!("{:.2}", means[0]), "3.94");
    assert_eq!(format!("{:.2}", means[1]), "5.61");

    let empty = slfm(&["gaussian-norms"]);
    assert_eq!(empty.code, 0);
    assert_eq!(empty.stdout, "d,mean_radius_exact,mean_radius_approx,cv\n");
    assert_eq!(slfm(&["gaussian-norms", "--format", "json"]).stdout.trim(), "[]");

    for bad in ["0", "-3", "x", "2.5"] {
        assert_eq!(slfm(&["gaussian-norms", bad]).code, 2, "{bad}");
    }
}

#[test]
fn csv_and_json_carry_identical_values() {
    let args = ["paths", "--kind", "linear", "--synthetic", "gauss-shells:d=16,r0=4,r1=3,cv=0.2", "--grid", "11", "--pairs", "64", "--seed", "3"];
    let csv_out = slfm(&args);
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    let json_out = slfm(&json_args);
    assert_eq!(csv_out.code, 0);
    assert_eq!(json_out.code, 0);
    let a = csv_rows(&csv_out.stdout);
    let b = json_rows(&json_out.stdout);
    assert_eq!(a.len(), 11);
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(ra.keys().collect::<Vec<_>>(), rb.keys().collect::<Vec<_>>());
        for k in ra.keys() {
            let (x, y) = (ra[k].as_f64().unwrap(), rb[k].as_f64().unwrap());
            assert_eq!(format!("{x:.16e}"), format!("{y:.16e}"), "{k}");
        }
    }
}

#[test]
fn stats_reports_shell_and_projection() {
    let dir = tempfile::tempdir().unwrap();
    let path = gaussian_container(dir.path(), "g.slfm", 32, 10, 10, 1000, 1);
    let rows = csv_rows(&slfm(&["stats", s(&path)]).stdout);
    assert_eq!(col(&rows, "n_tokens"), vec![100_000.0]);
    let mean = col(&rows, "mean_radius")[0];
    assert!((mean - 5.61).abs() <= 0.01 * 5.61, "{mean}");

    let rows = csv_rows(&slfm(&["stats", s(&path), "--project", "5.656854249492381"]).stdout);
    assert_eq!(col(&rows, "cv"), vec![0.0]);

    // tokens projected before storage are still an exact shell after f32 rounding
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let tokens: Vec<Vec<f64>> = (0..500)
        .map(|_| radial_project(&sample_gaussian(8, &mut rng), 3.0).unwrap().into_vec())
        .collect();
    let proj = dir.path().join("p.slfm");
    LatentContainer::from_tokens(1, 1, &tokens).unwrap().write(&proj).unwrap();
    let rows = csv_rows(&slfm(&["stats", s(&proj)]).stdout);
    assert_eq!(col(&rows, "cv"), vec![0.0]);
}

#[test]
fn malformed_containers_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let good = gaussian_container(dir.path(), "g.slfm", 4, 2, 3, 2, 7);
    let bytes = std::fs::read(&good).unwrap();

    let cases: Vec<(&str, Vec<u8>, &str)> = vec![
        ("truncated", bytes[..bytes.len() - 3].to_vec(), "length"),
        ("extra", [bytes.clone(), vec![0, 0, 0, 0]].concat(), "length"),
        ("short-header", bytes[..10].to_vec(), "header"),
        ("magic", [b"NOPE".as_slice(), &bytes[4..]].concat(), "magic"),
        ("version", [&bytes[..4], &[2u8, 0][..], &bytes[6..]].concat(), "version"),
        ("nan", {
            let mut b = bytes.clone();
            b[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&f32::NAN.to_le_bytes());
            b
        }, "non-finite"),
    ];
    for (name, data, needle) in cases {
        let p = dir.path().join(format!("{name}.slfm"));
        std::fs::write(&p, data).unwrap();
        let out = slfm(&["stats", s(&p)]);
        assert_eq!(out.code, 2, "{name}");
        assert!(out.stdout.is_empty(), "{name}: stdout must stay data-only");
        assert!(out.stderr.to_lowercase().contains(needle), "{name}: {}", out.stderr);
    }
    assert_eq!(slfm(&["stats", s(&dir.path().join("missing.slfm"))]).code, 2);
}

#[test]
fn swap_writes_hybrids() {
    let dir = tempfile::tempdir().unwrap();
    let a = gaussian_container(dir.path(), "a.slfm", 4, 2, 2, 3, 1);
    let b = gaussian_container(dir.path(), "b.slfm", 4, 2, 2, 3, 2);
    let (kd, kr) = (dir.path().join("kd.slfm"), dir.path().join("kr.slfm"));

    let out = slfm(&["swap", "--anchor", s(&a), "--substitute", s(&a), "--out-direction", s(&kd), "--out-radius", s(&kr)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let anchor_bytes = std::fs::read(&a).unwrap();
    assert_eq!(std::fs::read(&kd).unwrap(), anchor_bytes);
    assert_eq!(std::fs::read(&kr).unwrap(), anchor_bytes);

    let out = slfm(&["swap", "--anchor", s(&a), "--substitute", s(&b), "--out-direction", s(&kd), "--out-radius", s(&kr)]);
    assert_eq!(out.code, 0);
    let rows = csv_rows(&out.stdout);
    assert!(col(&rows, "max_norm_error_keep_direction")[0] <= 1e-6);
    let sub = LatentContainer::read(&b).unwrap().tokens();
    let hybrid = LatentContainer::read(&kd).unwrap();
    assert_eq!(hybrid.shape(), LatentContainer::read(&a).unwrap().shape());
    for (x, y) in hybrid.tokens().iter().zip(&sub) {
        assert!((norm(x) - norm(y)).abs() <= 1e-6 * norm(y));
    }

    let other = gaussian_container(dir.path(), "c.slfm", 4, 2, 3, 3, 3);
    let out = slfm(&["swap", "--anchor", s(&a), "--substitute", s(&other), "--out-direction", s(&kd), "--out-radius", s(&kr)]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("shape mismatch"));
}

#[test]
fn paths_profiles_follow_construction() {
    let shell = json_rows(&slfm(&["paths", "--kind", "shell", "--synthetic", "gauss-shells:d=8,r0=2,r1=5,cv=0.1", "--grid", "21", "--pairs", "256", "--format", "json"]).stdout);
    let (t, m) = (col(&shell, "t"), col(&shell, "mean_norm"));
    for k in 0..t.len() {
        let want = (1.0 - t[k]) * m[0] + t[k] * m[m.len() - 1];
        assert!((m[k] - want).abs() < 1e-9, "t={}: {} vs {want}", t[k], m[k]);
    }

    let slerp = csv_rows(&slfm(&["paths", "--kind", "slerp", "--synthetic", "sphere:d=16,R=4", "--pairs", "128"]).stdout);
    assert_eq!(slerp.len(), 101);
    assert!(col(&slerp, "radial_share").iter().all(|v| *v <= 1e-10));

    // slerp between shells of different radius is an input error
    let dir = tempfile::tempdir().unwrap();
    let z0 = gaussian_container(dir.path(), "z0.slfm", 8, 1, 1, 32, 1);
    let z1 = gaussian_container(dir.path(), "z1.slfm", 8, 1, 1, 32, 2);
    let out = slfm(&["paths", "--kind", "slerp", "--z0", s(&z0), "--z1", s(&z1)]);
    assert_eq!(out.code, 2);
    let out = slfm(&["paths", "--kind", "linear", "--z0", s(&z0), "--z1", s(&z1), "--grid", "5"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(csv_rows(&out.stdout).len(), 5);
    // noise drawn from the prior when z0 is omitted
    assert_eq!(slfm(&["paths", "--z1", s(&z1), "--grid", "3"]).code, 0);
    assert_eq!(slfm(&["paths", "--kind", "nope", "--z1", s(&z1)]).code, 2);
}

#[test]
fn train_with_zero_steps_saves_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("init.slfm");
    let out = slfm(&["train", "--seed", "42", "--steps", "0", "--hidden", "8", "--out", s(&ck)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let want = VelocityField::new(FieldShape::mlp(4, 8), LossKind::Slerp, 2.0, &mut rng).unwrap();
    let stored = LatentContainer::read(&ck).unwrap();
    let want32: Vec<f32> = want.params().iter().map(|p| *p as f32).collect();
    assert_eq!(stored.data(), want32.as_slice());

    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("init.slfm.json")).unwrap()).unwrap();
    assert_eq!(meta["widths"], serde_json::json!([16, 8, 8, 4]));
    assert_eq!(meta["seed"], 42);
    assert_eq!(meta["config"]["steps"], 0);
}

#[test]
fn train_and_sample_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let ck = dir.path().join(name);
        let out = slfm(&["train", "--seed", "5", "--steps", "60", "--hidden", "16", "--batch", "32", "--out", s(&ck), "--format", "json"]);
        assert_eq!(out.code, 0, "{}", out.stderr);
        (ck, out.stdout)
    };
    let (a, ma) = run("a.slfm");
    let (b, mb) = run("b.slfm");
    assert_eq!(ma, mb);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let samples = dir.path().join("samples.slfm");
    let sample = |ck: &Path| slfm(&["sample", "--checkpoint", s(ck), "--seed", "9", "-n", "256", "--nfe", "20", "--format", "json", "--out", s(&samples)]);
    let (sa, sb) = (sample(&a), sample(&b));
    assert_eq!(sa.code, 0, "{}", sa.stderr);
    assert_eq!(sa.stdout, sb.stdout);
    let rows = json_rows(&sa.stdout);
    assert_eq!(rows.len(), 2);
    assert!(col(&rows, "max_sphere_deviation")[0] <= 1e-5);
    let total: f64 = col(&rows, "frequency").iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(LatentContainer::read(&samples).unwrap().n_tokens(), 256);

    assert_eq!(slfm(&["sample", "--checkpoint", s(&a), "--seed", "1", "--nfe", "0"]).code, 2);
    assert_eq!(slfm(&["sample", "--checkpoint", s(&a), "--seed", "1", "--cond", "3"]).code, 2);
    assert_eq!(slfm(&["sample", "--checkpoint", s(&dir.path().join("none.slfm")), "--seed", "1"]).code, 2);
    // seed is mandatory
    assert_eq!(slfm(&["train", "--out", s(&a)]).code, 2);
}

#[test]
fn divergence_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("boom.slfm");
    let out = slfm(&["train", "--seed", "0", "--steps", "50", "--lr", "1e300", "--hidden", "8", "--out", s(&ck)]);
    assert_eq!(out.code, 3, "{}", out.stderr);
    assert!(out.stdout.is_empty());
    assert!(!ck.exists());
}

#[test]
fn deficit_reports_closed_form_and_measurement() {
    let rows = csv_rows(&slfm(&["deficit", "--h", "0.1", "--omega", "1", "--radius", "1"]).stdout);
    let analytical = col(&rows, "analytical")[0];
    assert!((analytical - 3.31e-4).abs() < 5e-7);
    assert!(col(&rows, "rel_diff")[0] <= 1e-4);

    let tiny = csv_rows(&slfm(&["deficit", "--h", "1e-6", "--omega", "1"]).stdout);
    assert!(col(&tiny, "analytical")[0] < 1e-12);

    for omega in ["0", "3.2", "-1"] {
        assert_eq!(slfm(&["deficit", "--h", "0.1", "--omega", omega]).code, 2, "{omega}");
    }
    assert_eq!(slfm(&["deficit", "--h", "0", "--omega", "1"]).code, 2);
}
