//! Compiles a C program against the generated header and, when the static
//! library is available, links and runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "driftcl.h"

int main(void) {
    double a[] = {1, 2, 3, 4}, b[] = {2, 3, 4, 5}, d = -1;
    if (driftcl_ks_statistic(a, 4, b, 4, &d) != DRIFTCL_STATUS_OK || d != 0.25) return 1;
    DriftclBuffer *buf = NULL;
    if (driftcl_buffer_new(3, 1, 7, &buf) != DRIFTCL_STATUS_OK) return 2;
    int64_t slot;
    for (uint64_t i = 0; i < 10; i++) {
        double x = (double)i;
        if (driftcl_buffer_offer(buf, i, &x, 0, 0, &slot) != DRIFTCL_STATUS_OK) return 3;
    }
    if (driftcl_buffer_len(buf) != 3 || driftcl_buffer_seen(buf) != 10) return 4;
    driftcl_buffer_free(buf);
    if (driftcl_buffer_new(0, 1, 7, &buf) != DRIFTCL_STATUS_CONFIG) return 5;
    if (strstr(driftcl_last_error_message(), "capacity") == NULL) return 6;
    printf("ok %s\n", driftcl_version());
    return 0;
}
"#;

fn include_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include")
}

fn cc() -> Option<String> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
        .map(str::to_string)
}

/// `target/<profile>/libdriftcl_ffi.a`, next to this test's `deps` directory.
fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("libdriftcl_ffi.a");
    lib.is_file().then_some(lib)
}

fn write_program(dir: &Path) -> PathBuf {
    let src = dir.join("smoke.c");
    std::fs::write(&src, PROGRAM).unwrap();
    src
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let tmp = tempfile::tempdir().unwrap();
    let src = write_program(tmp.path());
    let out = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(include_dir())
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn c_program_links_and_runs() {
    let (Some(cc), Some(lib)) = (cc(), static_lib()) else {
        eprintln!("C compiler or static library not available; skipping");
        return;
    };
    let tmp = tempfile::tempdir().unwrap();
    let src = write_program(tmp.path());
    let bin = tmp.path().join("smoke");
    let out = Command::new(&cc)
        .args(["-std=c99", "-I"])
        .arg(include_dir())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok 0.1.0"));
}
