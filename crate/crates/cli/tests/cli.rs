use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aai_core::corpus::{read_feature_file, read_target_file, CorpusLayout};

fn aai(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aai"))
        .args(args)
        .current_dir(dir)
        .env_remove("AAI_CORPUS_ROOT")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = aai(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn overall(run: &Path) -> f64 {
    let text = fs::read_to_string(run.join("eval.summary")).unwrap();
    let line = text.lines().find(|l| l.starts_with("overall")).unwrap();
    line.split('=').nth(1).unwrap().trim().parse().unwrap()
}

#[test]
fn synth_train_eval_recovers_the_linear_map() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--out", "corpus", "subjects=1", "utterances_per_subject=40", "min_duration=1", "max_duration=2", "dim=32"]);
    write_config(
        d,
        "exp.conf",
        "corpus = corpus\nfeature = SYNTH\nfeature_dim = 32\nsize = tiny\nregime = ss\n\
         lr = 3e-3   # the tiny model tolerates a faster rate\nbatch_size = 4\nmax_epochs = 60\n",
    );
    ok(d, &["train", "--config", "exp.conf"]);
    let printed = ok(d, &["eval", "--config", "exp.conf"]);
    assert!(printed.contains("all: "));
    let cc = overall(&d.join("runs/SYNTH-tiny-ss"));
    assert!(cc >= 0.95, "held-out CC {cc}");
}

#[test]
fn fine_tuning_without_warm_start_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d, "exp.conf", "corpus = .\nfeature = MFCC\nsize = s\nregime = ss\n");
    let out = aai(d, &["train", "--config", "exp.conf", "--regime", "ft"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warm-start"));
}

#[test]
fn config_problems_exit_with_usage_code_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d, "bad.conf", "corpus = .\nfeature = MFCC\nsize = s\nregime = ss\nlr = -1\n");
    let out = aai(d, &["train", "--config", "bad.conf"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));
    assert_eq!(aai(d, &["train"]).status.code(), Some(1));
    assert_eq!(aai(d, &["frobnicate"]).status.code(), Some(1));
}

#[test]
fn help_lists_every_key_with_its_default() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["train", "eval"] {
        let help = ok(dir.path(), &[sub, "--help"]);
        for (key, default, _) in aai_cli::config::KEYS {
            assert!(help.contains(key), "{sub} --help lacks {key}");
            if let Some(d) = default.filter(|d| !d.is_empty()) {
                assert!(help.contains(&format!("[default {d}]")), "{sub} --help lacks default of {key}");
            }
        }
    }
    let synth = ok(dir.path(), &["synth", "--help"]);
    for key in ["subjects = 2", "dim = 64", "noise_std = 0", "bandwidth_hz = 8"] {
        assert!(synth.contains(key), "{key}");
    }
}

fn small_corpus(d: &Path) {
    ok(d, &["synth", "--out", "corpus", "utterances_per_subject=10", "min_duration=0.5", "max_duration=0.8", "dim=16"]);
}

const SMALL: &str = "corpus = corpus\nfeature = SYNTH\nfeature_dim = 16\nsize = tiny\nlr = 3e-3\nbatch_size = 4\nmax_epochs = 2\n";

#[test]
fn report_grid_over_three_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_corpus(d);
    write_config(d, "ss.conf", &format!("{SMALL}regime = ss\n"));
    write_config(d, "pooled.conf", &format!("{SMALL}regime = pooled\n"));
    write_config(d, "ft.conf", &format!("{SMALL}regime = ft\nwarm_start = runs/SYNTH-tiny-pooled/model.aaim\n"));
    ok(d, &["train", "--config", "ss.conf", "--jobs", "2"]);
    ok(d, &["train", "--config", "pooled.conf"]);
    ok(d, &["train", "--config", "ft.conf"]);
    for conf in ["ss.conf", "pooled.conf", "ft.conf"] {
        ok(d, &["eval", "--config", conf]);
    }
    let printed = ok(
        d,
        &["report", "--out", "report", "runs/SYNTH-tiny-ft", "runs/SYNTH-tiny-ss", "runs/SYNTH-tiny-pooled"],
    );
    let lines: Vec<&str> = printed.lines().collect();
    assert_eq!(lines[0], "| feature | ss | pooled | ft |");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("| SYNTH | "));
    let csv = fs::read_to_string(d.join("report/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(d.join("report/report.md").exists());
    for subject in ["S01", "S02"] {
        assert!(d.join(format!("runs/SYNTH-tiny-ft/{subject}/model.aaim")).exists());
    }
}

#[test]
fn reruns_reproduce_csv_outputs_and_manifests_list_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_corpus(d);
    for out in ["a", "b"] {
        write_config(d, &format!("{out}.conf"), &format!("{SMALL}regime = ss\noutput = {out}\n"));
        ok(d, &["train", "--config", &format!("{out}.conf")]);
        ok(d, &["eval", "--config", &format!("{out}.conf")]);
    }
    for file in ["cc.csv", "S01/history.csv", "S02/history.csv", "cc.md", "eval.summary"] {
        let a = fs::read(d.join("a/SYNTH-tiny-ss").join(file)).unwrap();
        let b = fs::read(d.join("b/SYNTH-tiny-ss").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let run = d.join("a/SYNTH-tiny-ss");
    for manifest in ["train.manifest", "eval.manifest"] {
        let text = fs::read_to_string(run.join(manifest)).unwrap();
        let listed: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert!(!listed.is_empty());
        for path in listed {
            assert!(run.join(path).exists(), "{manifest} lists missing {path}");
        }
    }
    let train = fs::read_to_string(run.join("train.manifest")).unwrap();
    assert!(train.contains("S02/model.aaim") && train.contains("config.txt"));
}

#[test]
fn corrupt_and_non_finite_data_map_to_their_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_corpus(d);
    write_config(d, "exp.conf", &format!("{SMALL}regime = pooled\n"));
    let layout = CorpusLayout::new(d.join("corpus"));
    let feature = layout.feature_path("S01", 1, "SYNTH");
    let original = fs::read(&feature).unwrap();

    fs::write(&feature, &original[..original.len() - 2]).unwrap();
    let out = aai(d, &["train", "--config", "exp.conf"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let mut poisoned = original.clone();
    let n = poisoned.len();
    poisoned[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
    fs::write(&feature, &poisoned).unwrap();
    let out = aai(d, &["train", "--config", "exp.conf"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let conflicting = format!("{}regime = pooled\n", SMALL.replace("feature_dim = 16", "feature_dim = 20"));
    write_config(d, "dim.conf", &conflicting);
    fs::write(&feature, &original).unwrap();
    assert_eq!(aai(d, &["train", "--config", "dim.conf"]).status.code(), Some(2));
}

fn write_wav(path: &Path, samples: &[f64], rate: u32) {
    let w = aai_core::signal::Waveform::new(samples.to_vec(), rate).unwrap();
    aai_core::signal::write_wav(path, &w).unwrap();
}

#[test]
fn preprocess_and_mfcc_build_an_aligned_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let header = aai_core::signal::CHANNELS.join(",");
    for subject in ["F01", "M01"] {
        let sub = d.join("raw").join(subject);
        fs::create_dir_all(&sub).unwrap();
        for id in 1..=10u32 {
            let secs = 1.0 + 0.1 * id as f64;
            let audio: Vec<f64> = (0..(secs * 22_050.0) as usize).map(|i| 0.3 * (i as f64 * 0.05 * id as f64).sin()).collect();
            write_wav(&sub.join(format!("{id}.wav")), &audio, 22_050);
            let rows: Vec<String> = (0..(secs * 250.0) as usize)
                .map(|t| (0..12).map(|c| format!("{:.5}", (t as f64 * 0.02 + c as f64).sin() + c as f64)).collect::<Vec<_>>().join(","))
                .collect();
            fs::write(sub.join(format!("{id}.csv")), format!("{header}\n{}\n", rows.join("\n"))).unwrap();
        }
    }
    let printed = ok(d, &["preprocess", "--raw", "raw", "--corpus", "corpus"]);
    assert!(printed.contains("20 utterances from 2 subjects"));
    let layout = CorpusLayout::new(d.join("corpus"));
    assert_eq!(layout.read_split(0).unwrap().sizes(), (8, 1, 1));
    let f = read_feature_file::<f64>(&layout.feature_path("M01", 4, "MFCC")).unwrap();
    let t = read_target_file::<f64>(&layout.target_path("M01", 4)).unwrap();
    assert_eq!((f.dim(), f.len()), (13, t.len()));
    let wav = aai_core::signal::read_wav::<f64>(&layout.wav_path("M01", 4)).unwrap();
    assert_eq!(wav.rate, 16_000);

    fs::remove_file(layout.feature_path("M01", 4, "MFCC")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_aai"))
        .args(["mfcc", "--subjects", "M01"])
        .env("AAI_CORPUS_ROOT", d.join("corpus"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let again = read_feature_file::<f64>(&layout.feature_path("M01", 4, "MFCC")).unwrap();
    assert_eq!(again.len(), 1 + (wav.len() - 400) / 160);
}
