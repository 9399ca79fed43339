use std::path::Path;
use std::process::Command;

use qoe_narx::manifest::{Manifest, RawVideoEntry};
use qoe_narx::narx::{forward_closed_loop, load_model};
use qoe_narx::synth::{synth_generate, SynthSpec};
use qoe_narx::trace::csv::load_trace;

fn noise_free() -> SynthSpec {
    SynthSpec {
        length_s: 90.0,
        noise_std: 0.0,
        process_noise_std: 0.0,
        ..Default::default()
    }
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir.join("traces"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files.push(dir.join("manifest.toml"));
    files.push(dir.join("teacher.json"));
    files
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn synth_files_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth_generate(&noise_free(), a.path()).unwrap();
    synth_generate(&noise_free(), b.path()).unwrap();
    let (fa, fb) = (read_all(a.path()), read_all(b.path()));
    assert_eq!(fa.len(), 15 * 4 + 2);
    assert_eq!(fa, fb);
}

#[test]
fn teacher_reproduces_scores_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let written = synth_generate(&noise_free(), dir.path()).unwrap();
    let manifest = Manifest::load(&dir.path().join("manifest.toml")).unwrap();
    assert_eq!(manifest, written);
    let teacher = load_model(&dir.path().join("teacher.json")).unwrap();
    for s in manifest.load_sessions().unwrap() {
        let y = s.subjective().unwrap().values();
        let f = forward_closed_loop(&teacher, &s, y).unwrap();
        let err = f
            .values
            .values()
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-9, "{}: {err}", s.id);
    }
}

#[test]
fn manifest_save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = synth_generate(
        &SynthSpec {
            length_s: 60.0,
            ..Default::default()
        },
        dir.path(),
    )
    .unwrap();
    m.dataset = "renamed".into();
    m.pooling = qoe_narx::trace::Pooling::Last;
    let path = dir.path().join("copy.toml");
    m.save(&path).unwrap();
    assert_eq!(Manifest::load(&path).unwrap(), m);
}

fn write_frames(path: &Path, frames: &[Vec<u8>]) {
    std::fs::write(path, frames.concat()).unwrap();
}

#[test]
fn extract_adds_channels_from_raw_video() {
    let dir = tempfile::tempdir().unwrap();
    let (w, h) = (40, 32);
    let reference: Vec<Vec<u8>> = (0..6)
        .map(|k| {
            (0..w * h)
                .map(|i| ((i % w) * 5 + (i / w) * 3 + k * 7) as u8)
                .collect()
        })
        .collect();
    let distorted: Vec<Vec<u8>> = reference
        .iter()
        .enumerate()
        .map(|(k, f)| {
            f.iter()
                .enumerate()
                .map(|(i, &v)| {
                    if (i + k) % 5 == 0 {
                        v.wrapping_add(9)
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    write_frames(&dir.path().join("ref.y"), &reference);
    write_frames(&dir.path().join("dist.y"), &distorted);

    let mut m = Manifest::new("raw", 0.1, dir.path());
    m.sessions.push(qoe_narx::manifest::SessionEntry {
        id: "v1".into(),
        source_content: "A".into(),
        subjective: None,
        channels: Default::default(),
    });
    m.raw_videos.push(RawVideoEntry {
        session: "v1".into(),
        ref_path: "ref.y".into(),
        dist_path: "dist.y".into(),
        width: w,
        height: h,
        fps: 30.0,
        metrics: vec!["psnr".into(), "gmsd".into()],
    });
    let path = dir.path().join("manifest.toml");
    m.save(&path).unwrap();

    let o = Command::new(env!("CARGO_BIN_EXE_qoe-narx"))
        .args(["extract", "--manifest", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = Manifest::load(&path).unwrap();
    assert_eq!(m.channel_names().unwrap(), vec!["gmsd", "psnr"]);
    let psnr = load_trace(&m.resolve(&m.sessions[0].channels["psnr"])).unwrap();
    assert_eq!(psnr.len(), 6);
    assert!((psnr.dt() - 1.0 / 30.0).abs() < 1e-12);
    assert!(psnr.values().iter().all(|&v| v > 20.0 && v < 100.0));
    // 6 frames at 30 fps pool into two 0.1 s windows
    let s = m.load_sessions().unwrap();
    assert_eq!(s[0].len(), 2);
}
