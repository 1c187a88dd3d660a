//! Every fixture under `tests/fixtures/<kind>/` is run and compared byte for byte with its
//! `expected/` directory. Set `JMLAB_BLESS=1` to regenerate the expected files.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn files(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .map(|rd| rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default()
}

fn run_fixture(config: &Path, out: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_jmlab"))
        .arg("run")
        .arg(config)
        .arg("--output-dir")
        .arg(out)
        .env_remove("OUTPUT_DIR")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}: {}", config.display(), String::from_utf8_lossy(&status.stderr));
}

#[test]
fn fixtures_match_expected_outputs() {
    let bless = std::env::var_os("JMLAB_BLESS").is_some();
    let mut kinds: Vec<PathBuf> = fs::read_dir(fixtures()).unwrap().map(|e| e.unwrap().path()).collect();
    kinds.sort();
    let names: BTreeSet<String> = kinds
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for k in jmlab_cli::config::Kind::ALL {
        assert!(names.contains(k.as_str()), "no fixture for {}", k.as_str());
    }
    for dir in kinds {
        let tmp = tempfile::tempdir().unwrap();
        run_fixture(&dir.join("config.toml"), tmp.path());
        let expected = dir.join("expected");
        if bless {
            let _ = fs::remove_dir_all(&expected);
            fs::create_dir_all(&expected).unwrap();
            for f in files(tmp.path()) {
                fs::copy(tmp.path().join(&f), expected.join(&f)).unwrap();
            }
            continue;
        }
        assert_eq!(files(tmp.path()), files(&expected), "{}", dir.display());
        for f in files(&expected) {
            let got = fs::read(tmp.path().join(&f)).unwrap();
            let want = fs::read(expected.join(&f)).unwrap();
            assert!(got == want, "{}/{f} differs from the expected output", dir.display());
        }
    }
}
