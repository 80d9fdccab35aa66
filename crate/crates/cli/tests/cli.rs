use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn tactile(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tactile"))
        .args(args)
        .env_remove("TACTILE_CONFIG")
        .output()
        .expect("spawn tactile")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(o: &Output, key: &str) -> String {
    let prefix = format!("{key}=");
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix(&prefix).map(str::to_owned))
        .unwrap_or_else(|| panic!("no {key} in output:\n{}", stdout(o)))
}

fn write(dir: &TempDir, name: &str, bytes: &[u8]) -> String {
    let p = dir.path().join(name);
    fs::write(&p, bytes).unwrap();
    p.display().to_string()
}

fn pbm_16(ink: u8) -> Vec<u8> {
    let mut v = b"P4\n16 16\n".to_vec();
    v.extend(std::iter::repeat_n(ink, 32));
    v
}

#[test]
fn black_image_sets_every_taxel() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.cfg", b"firmware.skip_reset_if_clear=true\n");
    let img = write(&dir, "black.pbm", &pbm_16(0xff));
    let o = tactile(&["--config", &cfg, "show", &img]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&o, "set_pulses"), "256");
    assert_eq!(value(&o, "reset_pulses"), "0");
    assert_eq!(value(&o, "total_joules"), "15.360000");
    assert_eq!(value(&o, "verified"), "true");
}

#[test]
fn white_image_sets_nothing() {
    let dir = TempDir::new().unwrap();
    let img = write(&dir, "white.pbm", &pbm_16(0x00));
    let o = tactile(&["show", &img]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&o, "set_pulses"), "0");
    assert_eq!(value(&o, "hazard_count"), "0");
}

#[test]
fn inverted_white_image_sets_everything() {
    let dir = TempDir::new().unwrap();
    let img = write(&dir, "white.pbm", &pbm_16(0x00));
    let o = tactile(&["show", "--invert", &img]);
    assert_eq!(value(&o, "set_pulses"), "256");
}

#[test]
fn malformed_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let short = write(&dir, "short.pbm", b"P1\n2 2\n1 0\n");
    let o = tactile(&["show", &short]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let junk = write(&dir, "junk.pbm", b"GIF89a");
    assert_eq!(tactile(&["show", &junk]).status.code(), Some(2));
    let missing = dir.path().join("nope.pbm").display().to_string();
    assert_eq!(tactile(&["show", &missing]).status.code(), Some(2));
    let badcfg = write(&dir, "bad.cfg", b"grid.rows=40\n");
    assert_eq!(tactile(&["--config", &badcfg, "budget"]).status.code(), Some(2));
    assert_eq!(tactile(&["show", "--frame", "abc"]).status.code(), Some(2));
}

#[test]
fn literal_frame() {
    let mut hex = String::from("8000");
    hex.push_str(&"00".repeat(30));
    let o = tactile(&["show", "--frame", &hex]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&o, "set_pulses"), "1");
}

#[test]
fn braille_text() {
    let o = tactile(&["text", "a"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&o, "set_pulses"), "1");
    let o = tactile(&["text", ""]);
    assert_eq!(value(&o, "set_pulses"), "0");
    let o = tactile(&["text", "Ω"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn long_text_reports_truncation() {
    let o = tactile(&["text", "abcdefghijklmnopqrstuvwxyz"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&o, "truncated"), "6");
}

#[test]
fn clear_resets_every_taxel() {
    let o = tactile(&["clear"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&o, "reset_pulses"), "256");
    assert_eq!(value(&o, "set_pulses"), "0");
}

#[test]
fn verify_exit_codes() {
    let o = tactile(&["verify", "--rows", "2", "--cols", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&o, "checked"), "16");
    assert_eq!(value(&o, "failed"), "0");

    let o = tactile(&["verify", "--rows", "2", "--cols", "2", "--mutant", "and-set-gate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("counterexample"));

    let o = tactile(&["verify", "--random", "20", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&o, "checked"), "20");

    assert_eq!(tactile(&["verify", "--rows", "5", "--cols", "5"]).status.code(), Some(2));
}

#[test]
fn budget_scales_with_grid() {
    let dir = TempDir::new().unwrap();
    for (r, c, want) in [
        (16, 16, [32, 16, 21, 512, 1024]),
        (8, 8, [16, 8, 13, 128, 256]),
        (1, 1, [2, 1, 6, 2, 4]),
    ] {
        let cfg = write(&dir, "g.cfg", format!("grid.rows={r}\ngrid.cols={c}\n").as_bytes());
        let o = tactile(&["--config", &cfg, "budget"]);
        assert_eq!(o.status.code(), Some(0));
        let got = [
            "column_transistors",
            "row_transistors",
            "controller_pins",
            "naive_half_bridge",
            "naive_full_bridge",
        ]
        .map(|k| value(&o, k).parse::<u64>().unwrap());
        assert_eq!(got, want, "{r}x{c}");
    }
}

#[test]
fn config_from_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "env.cfg", b"grid.rows=4\ngrid.cols=4\n");
    let o = Command::new(env!("CARGO_BIN_EXE_tactile"))
        .arg("clear")
        .env("TACTILE_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&o, "reset_pulses"), "16");
}

fn run_traced(dir: &Path, tag: &str) -> (String, Vec<u8>) {
    let img = dir.join("gray.pgm");
    let trace = dir.join(format!("{tag}.tsv"));
    let o = tactile(&[
        "show",
        "--dither",
        "--trace",
        trace.to_str().unwrap(),
        img.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    (stdout(&o), fs::read(trace).unwrap())
}

#[test]
fn runs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let mut pgm = b"P5\n20 12\n255\n".to_vec();
    pgm.extend((0..240u32).map(|i| (i * 37 % 256) as u8));
    fs::write(dir.path().join("gray.pgm"), pgm).unwrap();
    let (s1, t1) = run_traced(dir.path(), "a");
    let (s2, t2) = run_traced(dir.path(), "b");
    assert_eq!(s1, s2);
    assert_eq!(t1, t2);
    let text = String::from_utf8(t1).unwrap();
    assert!(text.starts_with("step\trow_addr\trow_enable\tmode\tcol_bits\tset\treset\tjoules\thazards\n"));
    assert!(text.lines().skip(1).all(|l| l.split('\t').count() == 9));
}
