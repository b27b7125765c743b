use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use studio_cli::report::{read_csv, HEADER};

fn studio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_studio")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/supplementary")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn closed_port_url(path: &str) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}{path}")
}

#[test]
fn corpus_report_is_complete_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for (i, jobs) in ["1", "3"].into_iter().enumerate() {
        let out = dir.path().join(format!("report{i}.csv"));
        let root = dir.path().join(format!("artifacts{i}"));
        let run = studio(&["run", s(&corpus()), "--out", s(&out), "--artifact-root", s(&root), "--jobs", jobs]);
        assert_eq!(code(&run), 0, "{}", stderr(&run));
        assert!(stdout(&run).contains("01_chocolate_river"));
        assert!(root.read_dir().unwrap().count() == 6, "one session directory per scenario");
        reports.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(reports[0], reports[1], "reruns must produce identical reports");

    let rows = read_csv(reports[0].as_slice()).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.scenario.as_str()).collect();
    assert_eq!(
        names,
        ["01_chocolate_river", "02_broken_diamonds", "03_polka_dotted_cat", "04_chef", "05_cookie_moon", "06_ice_cream_mountains"]
    );
    for r in &rows {
        assert!(!r.prompt.is_empty() && !r.refined_prompt.is_empty());
        assert_eq!(r.delta, r.inpainted_score - r.initial_score);
        assert!((0.0..=100.0).contains(&r.initial_score) && (0.0..=100.0).contains(&r.inpainted_score));
        assert_eq!(
            (r.generation.as_str(), r.inpaint.as_str(), r.segmenter.as_str(), r.embedder.as_str()),
            ("procedural", "procedural", "region", "stub")
        );
        assert_eq!(r.config_hash.len(), 64);
    }
    assert_eq!(rows[0].prompt, "a fantasy world where a river is made of dark chocolate");
}

#[test]
fn seed_flag_replaces_scenario_seed() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = corpus().join("04_chef.json");
    let root = dir.path().join("artifacts");
    assert_eq!(code(&studio(&["run", s(&scenario), "--artifact-root", s(&root)])), 0);
    assert_eq!(code(&studio(&["run", s(&scenario), "--artifact-root", s(&root), "--seed", "99"])), 0);
    let mut seeds: Vec<u64> = root
        .read_dir()
        .unwrap()
        .map(|e| {
            let record: serde_json::Value =
                serde_json::from_slice(&std::fs::read(e.unwrap().path().join("session.json")).unwrap()).unwrap();
            record["seed"].as_u64().unwrap()
        })
        .collect();
    seeds.sort();
    assert_eq!(seeds, [14, 99]);
}

#[test]
fn empty_directory_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("none");
    std::fs::create_dir(&input).unwrap();
    let out = dir.path().join("report.csv");
    let run = studio(&["run", s(&input), "--out", s(&out), "--artifact-root", s(&dir.path().join("a"))]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), format!("{}\n", HEADER.join(",")));
}

#[test]
fn unknown_backend_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("a");
    let run = studio(&["run", s(&corpus()), "--artifact-root", s(&root), "--backend.inpaint", "stable-diffusion"]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("stable-diffusion"), "{}", stderr(&run));
    assert!(!root.exists() || root.read_dir().unwrap().count() == 0, "nothing may run");

    let scenario = dir.path().join("bad.json");
    std::fs::write(
        &scenario,
        r#"{"initial_prompt": "p", "target_description": "t", "seed": 1, "mask_seed": {"kind": "point", "point": [1, 1]}, "backends": {"embedder": "clip-vit"}}"#,
    )
    .unwrap();
    let run = studio(&["run", s(&scenario), "--artifact-root", s(&root)]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("clip-vit"), "{}", stderr(&run));
}

#[test]
fn malformed_scenario_names_file_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("typo.json");
    std::fs::write(&scenario, r#"{"initial_prompt": "p", "target_description": "t", "seed": "seven", "mask_seed": {"kind": "point", "point": [1, 1]}}"#).unwrap();
    let run = studio(&["run", s(&scenario), "--artifact-root", s(&dir.path().join("a"))]);
    assert_eq!(code(&run), 2);
    let err = stderr(&run);
    assert!(err.contains("typo.json") && err.contains("seed"), "{err}");

    let run = studio(&["run", s(&dir.path().join("missing")), "--artifact-root", s(&dir.path().join("a"))]);
    assert_eq!(code(&run), 2);
}

#[test]
fn backend_failure_exits_3_with_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let url = closed_port_url("/generate");
    let run = studio(&[
        "run",
        s(&corpus().join("05_cookie_moon.json")),
        "--out",
        s(&out),
        "--artifact-root",
        s(&dir.path().join("a")),
        "--backend.generation",
        &url,
    ]);
    assert_eq!(code(&run), 3, "{}", stderr(&run));
    let err = stderr(&run);
    assert!(err.contains("05_cookie_moon") && err.contains("generate"), "{err}");
    assert!(read_csv(std::fs::File::open(out).unwrap()).unwrap().is_empty());
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&studio(&[])), 1);
    assert_eq!(code(&studio(&["run"])), 1);
    assert_eq!(code(&studio(&["run", "x", "--jobs", "0"])), 1);
    assert_eq!(code(&studio(&["mask", "img.png"])), 1, "a gesture is required");
    assert_eq!(code(&studio(&["mask", "img.png", "--point", "1,2", "--box", "0,0,1,1"])), 1);
    assert_eq!(code(&studio(&["--help"])), 0);
}

fn two_color_png(dir: &Path) -> (PathBuf, u32, u32) {
    let (w, h) = (20u32, 12u32);
    let img = image::RgbImage::from_fn(w, h, |x, _| if x < w / 2 { image::Rgb([220, 20, 20]) } else { image::Rgb([20, 20, 220]) });
    let path = dir.join("two.png");
    img.save(&path).unwrap();
    (path, w, h)
}

#[test]
fn mask_point_in_red_half() {
    let dir = tempfile::tempdir().unwrap();
    let (path, w, h) = two_color_png(dir.path());
    let out = dir.path().join("m.png");
    let run = studio(&["mask", s(&path), "--point", "3,5", "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let text = stdout(&run);
    assert!(text.contains("area_fraction: 0.5\n"), "{text}");
    assert!(text.contains(&format!("bbox: 0,0,{},{}", w / 2 - 1, h - 1)), "{text}");

    let mask = image::open(&out).unwrap().to_luma8();
    for (x, _, p) in mask.enumerate_pixels() {
        assert_eq!(p.0[0], if x < w / 2 { 255 } else { 0 });
    }

    // default output path sits next to the image
    assert_eq!(code(&studio(&["mask", s(&path), "--box", "12,2,15,6"])), 0);
    assert!(dir.path().join("two.mask.png").exists());
}

#[test]
fn mask_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _, _) = two_color_png(dir.path());
    let run = studio(&["mask", s(&path), "--point", "20,0"]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("outside"), "{}", stderr(&run));

    let junk = dir.path().join("junk.png");
    std::fs::write(&junk, b"nope").unwrap();
    assert_eq!(code(&studio(&["mask", s(&junk), "--point", "0,0"])), 2);
    assert_eq!(code(&studio(&["mask", s(&path), "--point", "1"])), 1);
}

#[test]
fn single_pixel_stroke() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _, _) = two_color_png(dir.path());
    let run = studio(&["mask", s(&path), "--stroke", "7,4", "--radius", "0", "--out", s(&dir.path().join("m.png"))]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert!(stdout(&run).contains("area: 1\n"));
    assert!(stdout(&run).contains("bbox: 7,4,7,4"));

    let run = studio(&["mask", s(&path), "--stroke", "0,0;19,0", "--stroke", "0,11", "--out", s(&dir.path().join("n.png"))]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert!(stdout(&run).contains("area: 21\n"), "{}", stdout(&run));
}

#[test]
fn score_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _, _) = two_color_png(dir.path());
    let run = studio(&["score", s(&path), "--prompt", "red and blue"]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let value: f64 = stdout(&run).trim().strip_prefix("score: ").unwrap().parse().unwrap();
    assert!((0.0..=100.0).contains(&value));

    let run = studio(&["score", s(&path), "--prompt", "x", "--embedder", "clip"]);
    assert_eq!(code(&run), 2);
    let run = studio(&["score", s(&path), "--prompt", "x", "--embedder", &closed_port_url("/embed")]);
    assert_eq!(code(&run), 3, "{}", stderr(&run));
}
